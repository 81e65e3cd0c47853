//! Seeded random generators for ensembles, operators and covariances.
//!
//! Everything is driven by `ChaCha8Rng` so a seed reproduces the same draws on
//! every platform.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::cost::HSOperator;
use crate::measure::{MeasureSpace, SourceEnsemble};
use crate::representation::RepresentationOperator;

pub type SynthRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SynthRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Haar-distributed orthogonal matrix (QR of a Gaussian with sign correction).
pub fn random_orthogonal<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DMatrix<f64> {
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let qr = gaussian_matrix(rng, n, n).qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// `m` atoms with weights uniform in `[0.1, 1)` and standard normal coefficients.
pub fn random_ensemble<R: Rng + ?Sized>(rng: &mut R, m: usize, d: usize, p: usize) -> SourceEnsemble {
    let weights = (0..m).map(|_| rng.random_range(0.1..1.0)).collect();
    let space = MeasureSpace::new(weights).expect("positive weights");
    let values = gaussian_matrix(rng, m, d * p);
    SourceEnsemble::new(space, d, p, values).expect("consistent shape")
}

/// `G Gᵀ / n` with `G` an `n × rank` Gaussian matrix.
pub fn random_psd<R: Rng + ?Sized>(rng: &mut R, n: usize, rank: usize) -> DMatrix<f64> {
    let g = gaussian_matrix(rng, n, rank);
    let m = &g * g.transpose() / n.max(1) as f64;
    (&m + m.transpose()) * 0.5
}

/// Dense Gaussian representation scaled by `1/√(d·p)`.
pub fn random_operator<R: Rng + ?Sized>(
    rng: &mut R,
    d: usize,
    p: usize,
    p_out: usize,
    q: usize,
) -> RepresentationOperator {
    let scale = 1.0 / ((d * p) as f64).sqrt();
    let s1 = gaussian_matrix(rng, p_out, d * p) * scale;
    let s2 = gaussian_matrix(rng, q, d * p) * scale;
    RepresentationOperator::new(d, p, s1, s2).expect("consistent shape")
}

/// Random representation with `p_out = q = p` whose stacked matrix has mutually
/// orthogonal column groups across coefficient levels: level `k` is written
/// into output rows `2k, 2k+1`, then all rows are mixed by a random rotation.
pub fn level_orthogonal_operator<R: Rng + ?Sized>(rng: &mut R, d: usize, p: usize) -> RepresentationOperator {
    let mut blocks = DMatrix::zeros(2 * p, d * p);
    for k in 0..p {
        for i in 0..d {
            blocks[(2 * k, i * p + k)] = rng.sample(StandardNormal);
            blocks[(2 * k + 1, i * p + k)] = rng.sample(StandardNormal);
        }
    }
    let stacked = random_orthogonal(rng, 2 * p) * blocks;
    let s1 = stacked.rows(0, p).into_owned();
    let s2 = stacked.rows(p, p).into_owned();
    RepresentationOperator::new(d, p, s1, s2).expect("consistent shape")
}

pub fn random_hs<R: Rng + ?Sized>(rng: &mut R, p_out: usize, q: usize, scale: f64) -> HSOperator {
    HSOperator::new(gaussian_matrix(rng, p_out, q) * scale).expect("finite")
}
