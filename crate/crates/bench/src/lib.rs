//! Fixed-seed inputs shared by the benchmarks.

use envmm_core::synth;
use envmm_core::{
    apply, assemble_normal_equations, BaselineSpec, CovarianceSequence, DMatrix, HSOperator,
    LTIModel, NormalEquationSystem, RepresentationOperator, SourceEnsemble,
};

pub fn ensemble(m: usize, d: usize, p: usize) -> SourceEnsemble {
    synth::random_ensemble(&mut synth::rng(1), m, d, p)
}

/// Normal equation with a `q`-dimensional auxiliary space of rank `rank`.
pub fn normal_system(q: usize, rank: usize) -> NormalEquationSystem {
    let mut rng = synth::rng(2);
    let (d, p) = (2, q);
    let a = synth::random_ensemble(&mut rng, 4 * q, d, p);
    let s2 = synth::gaussian_matrix(&mut rng, q, rank) * synth::gaussian_matrix(&mut rng, rank, d * p);
    let s1 = synth::gaussian_matrix(&mut rng, 4, d * p);
    let s = RepresentationOperator::new(d, p, s1, s2).expect("consistent shape");
    assemble_normal_equations(&apply(&s, &a, None).expect("matching source"))
}

pub fn moving_average(d: usize, taps: usize) -> CovarianceSequence {
    let mut rng = synth::rng(3);
    let g: Vec<DMatrix<f64>> = (0..taps).map(|_| synth::gaussian_matrix(&mut rng, d, d)).collect();
    CovarianceSequence::from_moving_average(&g).expect("square taps")
}

pub fn lti_model(n: usize) -> LTIModel {
    LTIModel::from_impulse_responses(&[0.5, 0.3, -0.1, 0.05], &[1.0, -0.25, 0.1], n).expect("short filters")
}

pub struct EnvelopeCase {
    pub a: SourceEnsemble,
    pub spec: BaselineSpec,
    pub s: RepresentationOperator,
    pub ts: Vec<HSOperator>,
}

pub fn envelope_case(m: usize, d: usize, p: usize) -> EnvelopeCase {
    let mut rng = synth::rng(4);
    let a = synth::random_ensemble(&mut rng, m, d, p);
    let spec = BaselineSpec::new(d, p, synth::random_psd(&mut rng, d * p, 2)).expect("psd");
    let s = synth::random_operator(&mut rng, d, p, 3, 3);
    let ts = (0..5).map(|_| synth::random_hs(&mut rng, 3, 3, 1.0)).collect();
    EnvelopeCase { a, spec, s, ts }
}
