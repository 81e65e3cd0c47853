//! Wide-sense-stationary specialization: spectral densities, the spectral
//! envelope test, LTI frequency blocks, the Wiener-type symbol and a circulant
//! time-domain oracle for it.
//!
//! Conventions: `K[τ] = E[A_{t+τ} A_tᵀ]`, `K̂(ω) = Σ_τ K[τ] e^{−iωτ}` on the grid
//! `ω_r = 2πr/N`, and cross spectra are formed as `Y` against `X̄`.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::cost::{assemble_normal_equations, solve_pseudoinverse, DEFAULT_RANK_TOL};
use crate::error::{shape_err, Error, Result};
use crate::linalg;
use crate::measure::{MeasureSpace, SourceEnsemble};
use crate::representation::{apply, RepresentationOperator};
use crate::synth;

/// Finite-lag matrix covariance sequence, stored for `τ = 0..=L`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSequence {
    d: usize,
    lags: Vec<DMatrix<f64>>,
}

impl CovarianceSequence {
    /// Builds from the `τ ≥ 0` half; negative lags are `K[−τ] = K[τ]ᵀ`.
    pub fn new(d: usize, lags: Vec<DMatrix<f64>>) -> Result<Self> {
        if d == 0 || lags.is_empty() {
            return shape_err("need d > 0 and at least lag 0");
        }
        if lags.iter().any(|k| k.shape() != (d, d)) {
            return shape_err(format!("every lag must be {d}x{d}"));
        }
        if lags.iter().any(|k| !linalg::all_finite(k)) {
            return Err(Error::NonFinite("covariance sequence"));
        }
        let asymmetry = linalg::relative_asymmetry(&lags[0]);
        if asymmetry > 1e-12 {
            return Err(Error::NotSymmetric { asymmetry });
        }
        let mut lags = lags;
        lags[0] = linalg::symmetrized(&lags[0]);
        Ok(Self { d, lags })
    }

    /// Covariance of the moving average `A_t = Σ_k G_k e_{t−k}` driven by white
    /// noise: `K[τ] = Σ_k G_{k+τ} G_kᵀ`. PSD spectrum by construction.
    pub fn from_moving_average(taps: &[DMatrix<f64>]) -> Result<Self> {
        let Some(first) = taps.first() else {
            return shape_err("need at least one tap");
        };
        let d = first.nrows();
        if taps.iter().any(|g| g.shape() != (d, d)) {
            return shape_err("taps must be square and equally sized");
        }
        let lags = (0..taps.len())
            .map(|tau| {
                (0..taps.len() - tau).fold(DMatrix::zeros(d, d), |acc, k| {
                    acc + &taps[k + tau] * taps[k].transpose()
                })
            })
            .collect();
        Self::new(d, lags)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn max_lag(&self) -> usize {
        self.lags.len() - 1
    }

    /// `K[τ]` for any integer lag; zero beyond `±L`.
    pub fn at(&self, tau: isize) -> DMatrix<f64> {
        let idx = tau.unsigned_abs();
        match self.lags.get(idx) {
            None => DMatrix::zeros(self.d, self.d),
            Some(k) if tau >= 0 => k.clone(),
            Some(k) => k.transpose(),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            d: self.d,
            lags: self.lags.iter().map(|k| k * c).collect(),
        }
    }

    /// Period-`n` covariance matrix of the circulant extension, `dn × dn`,
    /// indexed component-major: `(i, t) ↦ i·n + t`.
    pub fn circulant_matrix(&self, n: usize) -> Result<DMatrix<f64>> {
        let min = 2 * self.max_lag() + 1;
        if n < min {
            return Err(Error::BadGrid { n_f: n, min });
        }
        let periodic = self.periodized(n);
        let d = self.d;
        Ok(DMatrix::from_fn(d * n, d * n, |row, col| {
            let (i, t) = (row / n, row % n);
            let (j, s) = (col / n, col % n);
            periodic[(t + n - s) % n][(i, j)]
        }))
    }

    fn periodized(&self, n: usize) -> Vec<DMatrix<f64>> {
        let l = self.max_lag() as isize;
        let mut out = vec![DMatrix::zeros(self.d, self.d); n];
        for tau in -l..=l {
            out[tau.rem_euclid(n as isize) as usize] += self.at(tau);
        }
        out
    }

    /// Rows `lag,i,j,value` for `τ ≥ 0`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["lag", "i", "j", "value"])?;
        for (tau, k) in self.lags.iter().enumerate() {
            for i in 0..self.d {
                for j in 0..self.d {
                    w.serialize((tau, i, j, k[(i, j)]))?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            lag: usize,
            i: usize,
            j: usize,
            value: f64,
        }
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let rows = rdr
            .deserialize::<Row>()
            .collect::<std::result::Result<Vec<_>, _>>()?;
        if rows.is_empty() {
            return Err(Error::Parse("covariance sequence csv has no rows".into()));
        }
        let d = rows.iter().map(|r| r.i.max(r.j)).max().unwrap_or(0) + 1;
        let n_lags = rows.iter().map(|r| r.lag).max().unwrap_or(0) + 1;
        let mut lags = vec![DMatrix::zeros(d, d); n_lags];
        for r in rows {
            lags[r.lag][(r.i, r.j)] = r.value;
        }
        Self::new(d, lags)
    }
}

fn forward_dft(buf: &mut [Complex64]) {
    let fft = FftPlanner::<f64>::new().plan_fft_forward(buf.len());
    fft.process(buf);
}

fn inverse_dft(buf: &mut [Complex64]) {
    let n = buf.len();
    let fft = FftPlanner::<f64>::new().plan_fft_inverse(n);
    fft.process(buf);
    for v in buf.iter_mut() {
        *v /= n as f64;
    }
}

/// Angular frequency of grid point `r` on an `n_f`-point grid.
pub fn grid_frequency(r: usize, n_f: usize) -> f64 {
    2.0 * std::f64::consts::PI * r as f64 / n_f as f64
}

/// Hermitian `d × d` spectral matrices on the uniform grid `ω_r = 2πr/N_f`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDensity {
    d: usize,
    values: Vec<DMatrix<Complex64>>,
}

impl SpectralDensity {
    pub fn new(d: usize, values: Vec<DMatrix<Complex64>>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| v.shape() != (d, d)) {
            return shape_err(format!("need a non-empty grid of {d}x{d} matrices"));
        }
        for (r, v) in values.iter().enumerate() {
            let herm = (v - v.adjoint()).norm();
            if herm > 1e-12 * v.norm().max(1.0) {
                return Err(Error::InvalidSpectrum(format!(
                    "value at frequency index {r} is not Hermitian ({herm:.3e})"
                )));
            }
        }
        Ok(Self { d, values })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n_f(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[DMatrix<Complex64>] {
        &self.values
    }

    pub fn at(&self, r: usize) -> &DMatrix<Complex64> {
        &self.values[r]
    }

    /// Entry `(i, j)` across the grid.
    pub fn entry(&self, i: usize, j: usize) -> Vec<Complex64> {
        self.values.iter().map(|v| v[(i, j)]).collect()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            d: self.d,
            values: self.values.iter().map(|v| v.map(|z| z * c)).collect(),
        }
    }

    /// `λ_min` at each grid point.
    pub fn lambda_min(&self) -> Vec<f64> {
        self.values.iter().map(hermitian_lambda_min).collect()
    }

    /// One entry as CSV rows `freq_index,re,im`.
    pub fn write_entry_csv<W: Write>(&self, i: usize, j: usize, w: W) -> Result<()> {
        if i >= self.d || j >= self.d {
            return shape_err(format!("entry ({i},{j}) outside {0}x{0}", self.d));
        }
        write_complex_series(&self.entry(i, j), w)
    }
}

/// CSV rows `freq_index,re,im`.
pub fn write_complex_series<W: Write>(series: &[Complex64], w: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["freq_index", "re", "im"])?;
    for (r, z) in series.iter().enumerate() {
        w.serialize((r, z.re, z.im))?;
    }
    w.flush()?;
    Ok(())
}

fn hermitian_lambda_min(m: &DMatrix<Complex64>) -> f64 {
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    SymmetricEigen::new(h)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// `K̂(ω_r) = Σ_{τ=−L..L} K[τ] e^{−iω_r τ}` on an `n_f`-point grid.
pub fn spectral_density(seq: &CovarianceSequence, n_f: usize) -> Result<SpectralDensity> {
    let min = 2 * seq.max_lag() + 1;
    if n_f < min {
        return Err(Error::BadGrid { n_f, min });
    }
    let d = seq.d;
    let periodic = seq.periodized(n_f);
    let mut values = vec![DMatrix::zeros(d, d); n_f];
    let mut buf = vec![Complex64::new(0.0, 0.0); n_f];
    for i in 0..d {
        for j in 0..d {
            for (slot, k) in buf.iter_mut().zip(&periodic) {
                *slot = Complex64::new(k[(i, j)], 0.0);
            }
            forward_dft(&mut buf);
            for (v, z) in values.iter_mut().zip(&buf) {
                v[(i, j)] = *z;
            }
        }
    }
    // exact Hermitian symmetry; the FFT leaves ~1e-16 residue
    for v in values.iter_mut() {
        *v = (&*v + v.adjoint()) * Complex64::new(0.5, 0.0);
    }
    SpectralDensity::new(d, values)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WssEnvelopeResult {
    pub dominated: bool,
    pub worst_index: usize,
    pub worst_frequency: f64,
    /// `min_r λ_min(K̂_A(ω_r) − K̂_{A'}(ω_r))`.
    pub worst_lambda_min: f64,
    /// `λ_min` of the difference at every grid point.
    pub lambda_min: Vec<f64>,
}

/// Grid version of the spectral envelope condition: `K̂_A − K̂_{A'} ⪰ −tol`
/// at every frequency.
pub fn wss_envelope_test(
    sa: &SpectralDensity,
    sap: &SpectralDensity,
    tol: f64,
) -> Result<WssEnvelopeResult> {
    if sa.d != sap.d || sa.n_f() != sap.n_f() {
        return shape_err("spectral densities differ in dimension or grid");
    }
    let lambda_min: Vec<f64> = sa
        .values
        .iter()
        .zip(&sap.values)
        .map(|(a, b)| hermitian_lambda_min(&(a - b)))
        .collect();
    let (worst_index, worst_lambda_min) = lambda_min
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty grid");
    Ok(WssEnvelopeResult {
        dominated: worst_lambda_min >= -tol,
        worst_index,
        worst_frequency: grid_frequency(worst_index, sa.n_f()),
        worst_lambda_min,
        lambda_min,
    })
}

/// Frequency responses of the target filter `h` and auxiliary filter `φ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LTIModel {
    pub h: Vec<Complex64>,
    pub phi: Vec<Complex64>,
}

impl LTIModel {
    pub fn new(h: Vec<Complex64>, phi: Vec<Complex64>) -> Result<Self> {
        if h.len() != phi.len() || h.is_empty() {
            return shape_err("H and Φ must share a non-empty grid");
        }
        if h.iter().chain(&phi).any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite("LTI model"));
        }
        Ok(Self { h, phi })
    }

    /// DFTs of real impulse responses, zero-padded to `n` taps.
    pub fn from_impulse_responses(h: &[f64], phi: &[f64], n: usize) -> Result<Self> {
        if h.len() > n || phi.len() > n {
            return Err(Error::BadGrid {
                n_f: n,
                min: h.len().max(phi.len()),
            });
        }
        let dft = |taps: &[f64]| {
            let mut buf = vec![Complex64::new(0.0, 0.0); n];
            for (slot, &t) in buf.iter_mut().zip(taps) {
                *slot = Complex64::new(t, 0.0);
            }
            forward_dft(&mut buf);
            buf
        };
        Self::new(dft(h), dft(phi))
    }

    pub fn n_f(&self) -> usize {
        self.h.len()
    }

    /// Real impulse responses `(h, φ)`; fails unless both responses are
    /// Hermitian-symmetric on the grid.
    pub fn impulse_responses(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let real = |resp: &[Complex64], name: &str| -> Result<Vec<f64>> {
            let mut buf = resp.to_vec();
            inverse_dft(&mut buf);
            let scale = resp.iter().map(|z| z.norm()).fold(1.0, f64::max);
            let imag = buf.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
            if imag > 1e-9 * scale {
                return Err(Error::InvalidSpectrum(format!(
                    "{name} is not the response of a real filter (imaginary part {imag:.3e})"
                )));
            }
            Ok(buf.iter().map(|z| z.re).collect())
        };
        Ok((real(&self.h, "H")?, real(&self.phi, "Φ")?))
    }
}

/// Observed spectral blocks `(Syy, Syx, Sxx)` over the grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralTriple {
    pub syy: Vec<Complex64>,
    pub syx: Vec<Complex64>,
    pub sxx: Vec<Complex64>,
}

impl SpectralTriple {
    pub fn new(syy: Vec<Complex64>, syx: Vec<Complex64>, sxx: Vec<Complex64>) -> Result<Self> {
        if syy.len() != syx.len() || syx.len() != sxx.len() {
            return shape_err("spectral blocks must share one grid");
        }
        Ok(Self { syy, syx, sxx })
    }

    pub fn n_f(&self) -> usize {
        self.syy.len()
    }
}

/// `Syy = |H|² K̂₁₁`, `Syx = H Φ̄ K̂₁₂`, `Sxx = |Φ|² K̂₂₂`, pointwise.
pub fn lti_blocks(src: &SpectralDensity, model: &LTIModel) -> Result<SpectralTriple> {
    if src.d != 2 {
        return Err(Error::WrongDimension {
            expected: 2,
            got: src.d,
        });
    }
    if src.n_f() != model.n_f() {
        return shape_err(format!(
            "source grid has {} points, model has {}",
            src.n_f(),
            model.n_f()
        ));
    }
    let mut syy = Vec::with_capacity(src.n_f());
    let mut syx = Vec::with_capacity(src.n_f());
    let mut sxx = Vec::with_capacity(src.n_f());
    for ((k, h), phi) in src.values.iter().zip(&model.h).zip(&model.phi) {
        syy.push(k[(0, 0)] * h.norm_sqr());
        syx.push(h * phi.conj() * k[(0, 1)]);
        sxx.push(k[(1, 1)] * phi.norm_sqr());
    }
    SpectralTriple::new(syy, syx, sxx)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WienerSymbol {
    pub tau: Vec<Complex64>,
    /// Frequencies where `Sxx` fell below `rank_tol · max Sxx`; `tau` is zero there.
    pub flagged: Vec<bool>,
}

impl WienerSymbol {
    pub fn flagged_count(&self) -> usize {
        self.flagged.iter().filter(|f| **f).count()
    }
}

/// `τ(ω) = Syx(ω) / Sxx(ω)` with the pseudoinverse convention at rank-deficient frequencies.
pub fn wiener_symbol(syx: &[Complex64], sxx: &[Complex64], rank_tol: f64) -> Result<WienerSymbol> {
    if syx.len() != sxx.len() {
        return shape_err("Syx and Sxx grids differ");
    }
    let scale = sxx.iter().map(|z| z.re).fold(0.0, f64::max);
    for (r, z) in sxx.iter().enumerate() {
        if z.im.abs() > 1e-10 * scale.max(1.0) || z.re < -1e-10 * scale.max(1.0) {
            return Err(Error::InvalidSpectrum(format!(
                "Sxx at frequency index {r} is not real nonnegative: {z}"
            )));
        }
    }
    let cutoff = rank_tol * scale;
    let (tau, flagged) = syx
        .iter()
        .zip(sxx)
        .map(|(yx, xx)| {
            if xx.re > cutoff {
                (yx / xx.re, false)
            } else {
                (Complex64::new(0.0, 0.0), true)
            }
        })
        .unzip();
    Ok(WienerSymbol { tau, flagged })
}

/// Pointwise `S + Sξ`.
pub fn add_baseline_spectrum(s: &SpectralTriple, sxi: &SpectralTriple) -> Result<SpectralTriple> {
    if s.n_f() != sxi.n_f() {
        return shape_err("baseline spectrum lives on a different grid");
    }
    let add = |a: &[Complex64], b: &[Complex64]| a.iter().zip(b).map(|(x, y)| x + y).collect();
    SpectralTriple::new(
        add(&s.syy, &sxi.syy),
        add(&s.syx, &sxi.syx),
        add(&s.sxx, &sxi.sxx),
    )
}

/// Per-sample cost of filtering with symbol `τ`:
/// `(1/N) Σ_r [Syy − 2 Re(τ̄ Syx) + |τ|² Sxx]`.
pub fn spectral_cost(s: &SpectralTriple, tau: &[Complex64]) -> Result<f64> {
    if tau.len() != s.n_f() {
        return shape_err("symbol and spectrum grids differ");
    }
    let total: f64 = (0..s.n_f())
        .map(|r| {
            let t = tau[r];
            s.syy[r].re - 2.0 * (t.conj() * s.syx[r]).re + t.norm_sqr() * s.sxx[r].re
        })
        .sum();
    Ok(total / s.n_f() as f64)
}

/// Fourier-basis realization of the period-`n` circulant source covariance.
///
/// For every frequency `r` and every eigenpair `(σ, u)` of `K̂(ω_r)` the complex
/// mode `z_{(i,t)} = √σ u_i e^{iθ} e^{iω_r t} / √n` is split into `Re z` and
/// `Im z`, each carried by a `±` pair of atoms of mass ½. The phases `θ` are
/// drawn from `seed`; the second moment is the circulant matrix exactly.
pub fn synthesize_circulant_ensemble(
    sd: &SpectralDensity,
    seed: u64,
) -> Result<SourceEnsemble> {
    let n = sd.n_f();
    let d = sd.d;
    for (r, v) in sd.values.iter().enumerate() {
        let lmin = hermitian_lambda_min(v);
        if lmin < -1e-9 {
            return Err(Error::EmbeddingNotPsd {
                lambda_min: lmin,
                frequency_index: r,
            });
        }
    }
    let mut rng = synth::rng(seed);
    let mut rows: Vec<DVector<f64>> = Vec::new();
    for (r, v) in sd.values.iter().enumerate() {
        let eig = SymmetricEigen::new(v.clone());
        for c in 0..d {
            let sigma = eig.eigenvalues[c];
            if sigma <= 0.0 {
                continue;
            }
            let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let amp = Complex64::from_polar((sigma / n as f64).sqrt(), theta);
            let omega = grid_frequency(r, n);
            let mode = DVector::from_fn(d * n, |idx, _| {
                let (i, t) = (idx / n, idx % n);
                eig.eigenvectors[(i, c)] * amp * Complex64::from_polar(1.0, omega * t as f64)
            });
            let re = mode.map(|z| z.re);
            let im = mode.map(|z| z.im);
            for part in [re, im] {
                rows.push(part.clone());
                rows.push(-part);
            }
        }
    }
    if rows.is_empty() {
        rows.push(DVector::zeros(d * n));
    }
    let space = MeasureSpace::new(vec![0.5; rows.len()])?;
    let values = DMatrix::from_fn(rows.len(), d * n, |j, c| rows[j][c]);
    SourceEnsemble::new(space, d, n, values)
}

/// Outcome of the time-domain solve inside the oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleOutcome {
    Solved,
    /// The auxiliary Gram matrix vanishes: every frequency is flagged and no
    /// informative filter exists.
    DegenerateAuxiliary,
    NoMinimizer,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub n: usize,
    pub outcome: OracleOutcome,
    /// `max_r |symbol_time(ω_r) − τ(ω_r)|`
    pub max_gap: f64,
    pub flagged_count: usize,
    /// `|Σ_r Syy(ω_r)/N − c_A/N| / (1 + c_A/N)`
    pub parseval_error: f64,
    pub residual: f64,
    pub kernel_dim: usize,
    pub frequency_symbol: Vec<Complex64>,
    pub time_domain_symbol: Vec<Complex64>,
    pub flagged: Vec<bool>,
}

/// Circular-convolution matrix `C[t, s] = taps[(t − s) mod n]`.
fn circulant_from_taps(taps: &[f64]) -> DMatrix<f64> {
    let n = taps.len();
    DMatrix::from_fn(n, n, |t, s| taps[(t + n - s) % n])
}

/// Time-domain representation of the LTI pair: `Y = h ⊛ A₁`, `X = φ ⊛ A₂`.
pub fn lti_representation(model: &LTIModel) -> Result<RepresentationOperator> {
    let (h, phi) = model.impulse_responses()?;
    let n = model.n_f();
    let mut s1 = DMatrix::zeros(n, 2 * n);
    let mut s2 = DMatrix::zeros(n, 2 * n);
    s1.view_mut((0, 0), (n, n)).copy_from(&circulant_from_taps(&h));
    s2.view_mut((0, n), (n, n)).copy_from(&circulant_from_taps(&phi));
    RepresentationOperator::new(2, n, s1, s2)
}

/// Solves the time-domain normal equation of the circulant LTI system and
/// compares its diagonal symbol with the frequency-domain Wiener symbol.
pub fn circulant_oracle(
    seq: &CovarianceSequence,
    model: &LTIModel,
    n: usize,
    seed: u64,
) -> Result<OracleReport> {
    if seq.d != 2 {
        return Err(Error::WrongDimension {
            expected: 2,
            got: seq.d,
        });
    }
    let min = 2 * seq.max_lag() + 2;
    if n < min {
        return Err(Error::BadGrid { n_f: n, min });
    }
    if model.n_f() != n {
        return shape_err(format!("model grid has {} points, oracle period is {n}", model.n_f()));
    }
    let sd = spectral_density(seq, n)?;
    let source = synthesize_circulant_ensemble(&sd, seed)?;
    let rep = lti_representation(model)?;
    let observed = apply(&rep, &source, None)?;
    let sys = assemble_normal_equations(&observed);

    let triple = lti_blocks(&sd, model)?;
    let wiener = wiener_symbol(&triple.syx, &triple.sxx, DEFAULT_RANK_TOL)?;

    let energy_time = sys.c_a / n as f64;
    let energy_freq = triple.syy.iter().map(|z| z.re).sum::<f64>() / n as f64;
    let parseval_error = (energy_freq - energy_time).abs() / (1.0 + energy_time.abs());

    let gram_scale = linalg::SortedEigen::new(&sys.m).max();
    let (outcome, lambda, residual, kernel_dim) = if gram_scale <= 0.0 {
        (OracleOutcome::DegenerateAuxiliary, DMatrix::zeros(n, n), 0.0, n)
    } else {
        match solve_pseudoinverse(&sys, DEFAULT_RANK_TOL) {
            Ok(sol) => (
                OracleOutcome::Solved,
                sol.operator.lambda().clone(),
                sol.report.residual,
                sol.report.kernel_dim,
            ),
            Err(Error::NoMinimizer { .. }) => {
                (OracleOutcome::NoMinimizer, DMatrix::zeros(n, n), f64::NAN, n)
            }
            Err(e) => return Err(e),
        }
    };

    let mut time_symbol: Vec<Complex64> =
        (0..n).map(|t| Complex64::new(lambda[(t, 0)], 0.0)).collect();
    forward_dft(&mut time_symbol);

    let max_gap = time_symbol
        .iter()
        .zip(&wiener.tau)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);

    Ok(OracleReport {
        n,
        outcome,
        max_gap,
        flagged_count: wiener.flagged_count(),
        parseval_error,
        residual,
        kernel_dim,
        frequency_symbol: wiener.tau,
        time_domain_symbol: time_symbol,
        flagged: wiener.flagged,
    })
}
