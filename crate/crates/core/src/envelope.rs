//! Stability-set membership, dominated-source generation, baseline
//! realization and direct checks of the envelope extremal principle.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::covariance::{loewner_dominates, Domination};
use crate::cost::{cost_decomposed, cost_difference_bound, HSOperator};
use crate::error::{shape_err, Error, Result};
use crate::linalg::SortedEigen;
use crate::measure::{second_moment, BaselineEnsemble, BaselineSpec, MeasureSpace, SourceEnsemble};
use crate::representation::RepresentationOperator;
use crate::synth;

/// Membership tolerance used for generated samples.
pub const SAMPLE_MEMBERSHIP_TOL: f64 = 1e-10;

/// `Σ_{A'} ⪯ Σ_A`. Measure spaces may differ; only second moments enter.
pub fn is_member(ap: &SourceEnsemble, a: &SourceEnsemble, tol: f64) -> Result<Domination> {
    if ap.d() != a.d() || ap.p() != a.p() {
        return shape_err(format!(
            "(d,p) = ({},{}) vs ({},{})",
            ap.d(),
            ap.p(),
            a.d(),
            a.p()
        ));
    }
    loewner_dominates(&second_moment(a), &second_moment(ap), tol)
}

/// Applies `K = U diag(contraction) Uᵀ` to every atom, where `U` holds the
/// eigenvectors of `Σ_A`. Then `Σ_{A'} = U D Λ D Uᵀ ⪯ Σ_A` whenever `|D| ≤ 1`.
pub fn contract_along_eigenbasis(
    a: &SourceEnsemble,
    eig: &SortedEigen,
    contraction: &DVector<f64>,
) -> Result<SourceEnsemble> {
    if contraction.len() != a.dim() {
        return shape_err("contraction length differs from ensemble dim");
    }
    let k = &eig.vectors * DMatrix::from_diagonal(contraction) * eig.vectors.transpose();
    a.transformed(&k)
}

/// Draws `n_samples` members of the stability set of `a` by shrinking each
/// eigen-direction of `Σ_A` by an independent factor in `[shrink_floor, 1]`.
pub fn sample_dominated(
    a: &SourceEnsemble,
    seed: u64,
    n_samples: usize,
    shrink_floor: f64,
) -> Result<Vec<SourceEnsemble>> {
    if !(0.0..=1.0).contains(&shrink_floor) {
        return Err(Error::BadConfig(format!(
            "shrink_floor must lie in [0, 1], got {shrink_floor}"
        )));
    }
    let eig = SortedEigen::new(second_moment(a).matrix());
    let mut rng = synth::rng(seed);
    let contractions: Vec<DVector<f64>> = (0..n_samples)
        .map(|_| {
            DVector::from_fn(a.dim(), |_, _| {
                if shrink_floor == 1.0 {
                    1.0
                } else {
                    rng.random_range(shrink_floor..=1.0)
                }
            })
        })
        .collect();
    contractions
        .iter()
        .map(|c| contract_along_eigenbasis(a, &eig, c))
        .collect()
}

/// Realizes a baseline with second moment `Σ_ξ` and zero cross moment with `a`.
///
/// Writes `Σ_ξ = F Fᵀ` with `F = U √Σ Q` (`Q` a seeded random rotation of the
/// rank-`r` range) and builds an auxiliary factor of `2r` atoms of mass `1/(2r)`
/// carrying `±c·f_i`. The returned pair lives on the product space
/// `original × auxiliary`: `a` is constant along the auxiliary factor and `ξ`
/// along the original one. Since the auxiliary values come in `±` pairs, the
/// cross moment vanishes and `Σ_A` is preserved.
pub fn fit_baseline(
    a: &SourceEnsemble,
    spec: &BaselineSpec,
    seed: u64,
) -> Result<(SourceEnsemble, BaselineEnsemble)> {
    if spec.d() != a.d() || spec.p() != a.p() {
        return shape_err("baseline spec and source have different (d,p)");
    }
    let eig = SortedEigen::new(spec.sigma_xi());
    let scale = eig.max().max(0.0);
    if eig.min() < -BaselineSpec::PSD_TOL * scale {
        return Err(Error::DegenerateSpec { lambda_min: eig.min() });
    }
    let cutoff = 1e-14 * scale;
    let range: Vec<usize> = (0..a.dim()).filter(|&i| eig.values[i] > cutoff).collect();
    let r = range.len();
    if r == 0 {
        let xi = SourceEnsemble::zeros(a.space().clone(), a.d(), a.p())?;
        return Ok((a.clone(), BaselineEnsemble::new(xi, spec.clone())?));
    }

    let mut factor = DMatrix::zeros(a.dim(), r);
    for (c, &i) in range.iter().enumerate() {
        factor.set_column(c, &(eig.vectors.column(i) * eig.values[i].sqrt()));
    }
    let mut rng = synth::rng(seed);
    let factor = factor * synth::random_orthogonal(&mut rng, r);

    let mass = a.space().total_mass();
    let aux_weight = 1.0 / (2 * r) as f64;
    // Σ_l ν_l ξ_l ξ_lᵀ · mass = Σ_ξ with ξ_l = ±amp·f_i
    let amp = (1.0 / (2.0 * aux_weight * mass)).sqrt();

    let m = a.atom_count();
    let n_atoms = m * 2 * r;
    let mut weights = Vec::with_capacity(n_atoms);
    let mut lifted = DMatrix::zeros(n_atoms, a.dim());
    let mut xi = DMatrix::zeros(n_atoms, a.dim());
    let mut row = 0;
    for (j, mu) in a.space().weights().iter().enumerate() {
        for c in 0..r {
            for sign in [1.0, -1.0] {
                weights.push(mu * aux_weight);
                lifted.set_row(row, &a.values().row(j));
                xi.set_row(row, &(factor.column(c) * (sign * amp)).transpose());
                row += 1;
            }
        }
    }
    let space = MeasureSpace::new(weights)?;
    let expanded = SourceEnsemble::new(space.clone(), a.d(), a.p(), lifted)?;
    let xi = SourceEnsemble::new(space, a.d(), a.p(), xi)?;
    Ok((expanded, BaselineEnsemble::new(xi, spec.clone())?))
}

/// Envelope comparison for one fixed operator `T`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeReport {
    /// Every sample passed the membership test.
    pub member: bool,
    /// Smallest `λ_min(Σ_A − Σ_{A'})` over the samples.
    pub lambda_min_margin: f64,
    /// `R_A(T)`.
    pub cost_reference: f64,
    /// `(sample id, R_{A'}(T))`, sorted by id; id 0 is `A` itself.
    pub cost_samples: Vec<(usize, f64)>,
    /// `max_s R_{A'_s}(T) − R_A(T)`.
    pub max_violation: f64,
}

impl EnvelopeReport {
    /// Violation relative to `1 + R_A(T)`.
    pub fn relative_violation(&self) -> f64 {
        self.max_violation / (1.0 + self.cost_reference.abs())
    }

    /// `(sample id, R_A(T) − R_{A'}(T))`; nonnegative when the envelope holds.
    pub fn sample_margins(&self) -> Vec<(usize, f64)> {
        self.cost_samples
            .iter()
            .map(|&(id, c)| (id, self.cost_reference - c))
            .collect()
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.member && self.max_violation <= tol * (1.0 + self.cost_reference.abs())
    }
}

/// Compares `R_{A'}(T)` against `R_A(T)` for `A` itself (sample 0) and
/// `n_samples` generated members, for every `T` in `ts`.
///
/// A violation is reported, not raised: check [`EnvelopeReport::passes`].
pub fn verify_extremal(
    a: &SourceEnsemble,
    spec: &BaselineSpec,
    s: &RepresentationOperator,
    ts: &[HSOperator],
    seed: u64,
    n_samples: usize,
    tol: f64,
) -> Result<Vec<EnvelopeReport>> {
    verify_extremal_with_floor(a, spec, s, ts, seed, n_samples, tol, 0.0)
}

#[allow(clippy::too_many_arguments)]
pub fn verify_extremal_with_floor(
    a: &SourceEnsemble,
    spec: &BaselineSpec,
    s: &RepresentationOperator,
    ts: &[HSOperator],
    seed: u64,
    n_samples: usize,
    tol: f64,
    shrink_floor: f64,
) -> Result<Vec<EnvelopeReport>> {
    s.check_source(a)?;
    let mut samples = vec![a.clone()];
    samples.extend(sample_dominated(a, seed, n_samples, shrink_floor)?);

    let memberships = samples
        .par_iter()
        .map(|ap| is_member(ap, a, SAMPLE_MEMBERSHIP_TOL.max(tol)))
        .collect::<Result<Vec<_>>>()?;
    let member = memberships.iter().all(|m| m.dominates);
    let lambda_min_margin = memberships
        .iter()
        .map(|m| m.lambda_min)
        .fold(f64::INFINITY, f64::min);

    ts.iter()
        .map(|t| {
            let cost_reference = cost_decomposed(a, spec, s, t)?.total;
            let cost_samples = samples
                .par_iter()
                .enumerate()
                .map(|(id, ap)| Ok((id, cost_decomposed(ap, spec, s, t)?.total)))
                .collect::<Result<Vec<_>>>()?;
            let max_violation = cost_samples
                .iter()
                .map(|(_, c)| c - cost_reference)
                .fold(f64::NEG_INFINITY, f64::max);
            Ok(EnvelopeReport {
                member,
                lambda_min_margin,
                cost_reference,
                cost_samples,
                max_violation,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosureEntry {
    pub index: usize,
    /// `‖A_n − A‖` in the weighted ensemble norm.
    pub distance: f64,
    /// `|R_{A_n}(T) − R_A(T)|`
    pub gap: f64,
    pub bound: f64,
    pub within_bound: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosureReport {
    pub entries: Vec<ClosureEntry>,
    pub all_within_bound: bool,
    /// Gaps do not grow (beyond `tol`) when distances shrink.
    pub monotone: bool,
}

/// Tracks how the cost of approximants approaches the cost of their limit.
pub fn closure_regression(
    a_limit: &SourceEnsemble,
    approximants: &[SourceEnsemble],
    s: &RepresentationOperator,
    spec: &BaselineSpec,
    t: &HSOperator,
    tol: f64,
) -> Result<ClosureReport> {
    let reference = cost_decomposed(a_limit, spec, s, t)?.total;
    let entries = approximants
        .iter()
        .enumerate()
        .map(|(index, an)| {
            let distance = an.try_sub(a_limit)?.norm();
            let gap = (cost_decomposed(an, spec, s, t)?.total - reference).abs();
            let bound = cost_difference_bound(an, a_limit, s, t)?;
            Ok(ClosureEntry {
                index,
                distance,
                gap,
                bound,
                within_bound: gap <= bound + tol,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let all_within_bound = entries.iter().all(|e| e.within_bound);
    let mut by_distance: Vec<&ClosureEntry> = entries.iter().collect();
    by_distance.sort_by(|x, y| y.distance.total_cmp(&x.distance));
    let monotone = by_distance
        .windows(2)
        .all(|w| w[1].gap <= w[0].gap + tol);
    Ok(ClosureReport {
        entries,
        all_within_bound,
        monotone,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::source_energy;
    use crate::measure::{cross_moment, validate_baseline};
    use nalgebra::dmatrix;

    #[test]
    fn sample_margins_mirror_costs() {
        let r = EnvelopeReport {
            member: true,
            lambda_min_margin: 0.0,
            cost_reference: 2.0,
            cost_samples: vec![(0, 2.0), (1, 0.5), (2, 1.25)],
            max_violation: 0.0,
        };
        assert_eq!(r.sample_margins(), vec![(0, 0.0), (1, 1.5), (2, 0.75)]);
        assert!(r.passes(0.0));
    }

    fn demo_source() -> SourceEnsemble {
        let mut rng = synth::rng(11);
        synth::random_ensemble(&mut rng, 6, 2, 3)
    }

    #[test]
    fn membership_examples() {
        let a = demo_source();
        let r = is_member(&a, &a, 1e-9).unwrap();
        assert!(r.dominates);
        assert!(r.lambda_min.abs() < 1e-12);

        let half = a.scaled(0.5);
        let r = is_member(&half, &a, 1e-9).unwrap();
        let lmin = SortedEigen::new(second_moment(&a).matrix()).min();
        assert!(r.dominates);
        assert!((r.lambda_min - 0.75 * lmin).abs() < 1e-12);

        let r = is_member(&a.scaled(2.0), &a, 1e-9).unwrap();
        assert!(!r.dominates);
        assert!(r.lambda_min < 0.0);
    }

    #[test]
    fn sampler_identity_and_zero_contractions() {
        let a = demo_source();
        let same = sample_dominated(&a, 1, 2, 1.0).unwrap();
        for s in &same {
            assert!((s.values() - a.values()).norm() < 1e-12);
        }
        let eig = SortedEigen::new(second_moment(&a).matrix());
        let zero = contract_along_eigenbasis(&a, &eig, &DVector::zeros(a.dim())).unwrap();
        assert_eq!(zero.values().norm(), 0.0);
        assert!(is_member(&zero, &a, 1e-10).unwrap().dominates);
        assert!(sample_dominated(&a, 1, 1, 1.5).is_err());
    }

    #[test]
    fn sampler_members_seed_seven() {
        let a = demo_source();
        let samples = sample_dominated(&a, 7, 20, 0.0).unwrap();
        assert_eq!(samples.len(), 20);
        for s in &samples {
            assert!(is_member(s, &a, 1e-10).unwrap().dominates);
        }
        assert_eq!(samples, sample_dominated(&a, 7, 20, 0.0).unwrap());
    }

    #[test]
    fn fit_baseline_zero_spec() {
        let a = demo_source();
        let spec = BaselineSpec::zero(2, 3);
        let (expanded, xi) = fit_baseline(&a, &spec, 3).unwrap();
        assert_eq!(expanded, a);
        assert_eq!(xi.ensemble().values().norm(), 0.0);
    }

    #[test]
    fn fit_baseline_scalar_two_point() {
        let a = SourceEnsemble::from_flat(MeasureSpace::new(vec![1.0]).unwrap(), 1, 1, &[2.0]).unwrap();
        let spec = BaselineSpec::new(1, 1, dmatrix![1.0]).unwrap();
        let (expanded, xi) = fit_baseline(&a, &spec, 5).unwrap();
        assert_eq!(expanded.space().weights(), &[0.5, 0.5]);
        let vals: Vec<f64> = xi.ensemble().values().iter().copied().collect();
        assert!((vals[0].abs() - 1.0).abs() < 1e-15);
        assert_eq!(vals[0], -vals[1]);
        assert!(validate_baseline(&expanded, &xi, &spec, 1e-12).unwrap().passed);
    }

    #[test]
    fn fit_baseline_rank_two_in_dim_three() {
        let mut rng = synth::rng(21);
        let a = synth::random_ensemble(&mut rng, 5, 1, 3);
        let spec = BaselineSpec::new(1, 3, synth::random_psd(&mut rng, 3, 2)).unwrap();
        let (expanded, xi) = fit_baseline(&a, &spec, 9).unwrap();
        let report = validate_baseline(&expanded, &xi, &spec, 1e-10).unwrap();
        assert!(report.passed, "{report:?}");
        assert!(cross_moment(&expanded, &xi).unwrap().norm() <= 1e-12);
        assert!((second_moment(&expanded).matrix() - second_moment(&a).matrix()).norm() < 1e-12);
        assert_eq!(expanded.atom_count(), 5 * 4);
    }

    #[test]
    fn fit_baseline_realizations_differ_by_seed() {
        let mut rng = synth::rng(4);
        let a = synth::random_ensemble(&mut rng, 3, 1, 3);
        let spec = BaselineSpec::new(1, 3, synth::random_psd(&mut rng, 3, 3)).unwrap();
        let (_, x1) = fit_baseline(&a, &spec, 1).unwrap();
        let (_, x2) = fit_baseline(&a, &spec, 2).unwrap();
        assert!((x1.ensemble().values() - x2.ensemble().values()).norm() > 1e-3);
    }

    #[test]
    fn verify_extremal_zero_operator_trace_inequality() {
        let mut rng = synth::rng(8);
        let a = synth::random_ensemble(&mut rng, 10, 2, 3);
        let s = synth::random_operator(&mut rng, 2, 3, 2, 3);
        let spec = BaselineSpec::new(2, 3, synth::random_psd(&mut rng, 6, 2)).unwrap();
        let zero = HSOperator::zeros(2, 3);
        let reports = verify_extremal(&a, &spec, &s, std::slice::from_ref(&zero), 3, 10, 1e-10).unwrap();
        let r = &reports[0];
        assert!(r.member);
        assert_eq!(r.cost_samples.len(), 11);
        assert_eq!(r.cost_samples[0], (0, r.cost_reference));
        assert!(r.max_violation <= 1e-10);
        // h_{A'}(0) = tr(S1 Σ_{A'} S1ᵀ) ≤ tr(S1 Σ_A S1ᵀ)
        let h_a = source_energy(&a, &s, &zero).unwrap();
        let ha_direct = (s.s1() * second_moment(&a).matrix() * s.s1().transpose()).trace();
        assert!((h_a - ha_direct).abs() < 1e-12);
    }

    #[test]
    fn closure_scaled_approximants() {
        let mut rng = synth::rng(13);
        let a = synth::random_ensemble(&mut rng, 8, 1, 4);
        let s = synth::random_operator(&mut rng, 1, 4, 2, 2);
        let t = synth::random_hs(&mut rng, 2, 2, 0.5);
        let spec = BaselineSpec::zero(1, 4);
        let approx: Vec<_> = (1..=8).map(|n| a.scaled(1.0 - 1.0 / (n as f64 + 1.0))).collect();
        let r = closure_regression(&a, &approx, &s, &spec, &t, 1e-12).unwrap();
        assert!(r.all_within_bound);
        assert!(r.monotone);
        let gaps: Vec<f64> = r.entries.iter().map(|e| e.gap).collect();
        assert!(gaps.windows(2).all(|w| w[1] < w[0]));

        let same = vec![a.clone(); 3];
        let r = closure_regression(&a, &same, &s, &spec, &t, 0.0).unwrap();
        assert!(r.entries.iter().all(|e| e.gap == 0.0));
    }

    #[test]
    fn closure_zero_approximant_zero_operator() {
        let mut rng = synth::rng(17);
        let a = synth::random_ensemble(&mut rng, 5, 2, 2);
        let s = synth::random_operator(&mut rng, 2, 2, 3, 2);
        let t = HSOperator::zeros(3, 2);
        let spec = BaselineSpec::zero(2, 2);
        let r = closure_regression(&a, &[a.scaled(0.0)], &s, &spec, &t, 0.0).unwrap();
        let h = (s.s1() * second_moment(&a).matrix() * s.s1().transpose()).trace();
        assert!((r.entries[0].gap - h).abs() < 1e-12 * (1.0 + h));
        assert!(r.entries[0].within_bound);
    }
}
