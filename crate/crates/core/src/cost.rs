//! Quadratic cost, its baseline-invariant decomposition, and minimizers of the
//! normal equation.
//!
//! In coordinates the cost of `T` with coefficient matrix `λ` is
//!
//! ```text
//! R(λ) = c_A − 2⟨λ, B⟩_F + tr(λ M λᵀ)
//! ```
//!
//! with Gram matrix `M = Σ_j μ_j X_j X_jᵀ` and cross matrix `B = Σ_j μ_j Y_j X_jᵀ`.
//! The operator acting on the stacked coefficient vector is block-diagonal with
//! the same block `M` for every output row, so one eigendecomposition of `M`
//! serves every row.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::covariance::{header_field, read_dense, write_dense_rows};
use crate::error::{shape_err, Error, Result};
use crate::linalg::{self, SortedEigen};
use crate::measure::{second_moment, BaselineSpec, SourceEnsemble};
use crate::representation::{ObservedEnsemble, RepresentationOperator};

/// Default relative eigenvalue cutoff for `M†`.
pub const DEFAULT_RANK_TOL: f64 = 1e-12;

/// Default absolute part of the range-consistency tolerance, scaled by `1 + ‖B‖_F`.
pub const DEFAULT_CONSISTENCY_TOL: f64 = 1e-8;

/// Coefficient matrix of a Hilbert–Schmidt operator: `λ[k, ℓ] = ⟨T ψ_ℓ, φ_k⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct HSOperator {
    lambda: DMatrix<f64>,
}

impl HSOperator {
    pub fn new(lambda: DMatrix<f64>) -> Result<Self> {
        if !linalg::all_finite(&lambda) {
            return Err(Error::NonFinite("operator coefficients"));
        }
        Ok(Self { lambda })
    }

    pub fn zeros(p_out: usize, q: usize) -> Self {
        Self {
            lambda: DMatrix::zeros(p_out, q),
        }
    }

    pub fn lambda(&self) -> &DMatrix<f64> {
        &self.lambda
    }

    pub fn p_out(&self) -> usize {
        self.lambda.nrows()
    }

    pub fn q(&self) -> usize {
        self.lambda.ncols()
    }

    /// Frobenius norm of the coefficients.
    pub fn hs_norm(&self) -> f64 {
        self.lambda.norm()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# hsop p_out={} q={}", self.p_out(), self.q())?;
        write_dense_rows(&mut w, &self.lambda)
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let (header, lambda) = read_dense(r)?;
        let p_out = header_field(&header, "hsop", "p_out")?;
        let q = header_field(&header, "hsop", "q")?;
        if lambda.shape() != (p_out, q) {
            return Err(Error::Parse(format!(
                "header says {p_out}x{q}, body is {}x{}",
                lambda.nrows(),
                lambda.ncols()
            )));
        }
        Self::new(lambda)
    }
}

/// `Σ_j μ_j ‖Y_j − λ X_j‖²`.
pub fn cost(o: &ObservedEnsemble, t: &HSOperator) -> Result<f64> {
    if t.p_out() != o.p_out() || t.q() != o.q() {
        return shape_err(format!(
            "operator is {}x{}, observations have p_out={} q={}",
            t.p_out(),
            t.q(),
            o.p_out(),
            o.q()
        ));
    }
    let resid = o.y() - o.x() * t.lambda.transpose();
    Ok(o
        .space()
        .weights()
        .iter()
        .enumerate()
        .map(|(j, w)| w * resid.row(j).norm_squared())
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostDecomposition {
    /// Source-dependent part `tr(W Σ_A Wᵀ)`.
    pub h_a: f64,
    /// Baseline part `tr(W Σ_ξ Wᵀ)`, identical for every admissible source.
    pub r_xi: f64,
    pub total: f64,
}

/// Residual map `W = S1 − λ S2`.
pub fn residual_map(s: &RepresentationOperator, t: &HSOperator) -> Result<DMatrix<f64>> {
    if t.p_out() != s.p_out() || t.q() != s.q() {
        return shape_err(format!(
            "operator is {}x{}, representation has p_out={} q={}",
            t.p_out(),
            t.q(),
            s.p_out(),
            s.q()
        ));
    }
    Ok(s.s1() - &t.lambda * s.s2())
}

fn trace_sandwich(w: &DMatrix<f64>, sigma: &DMatrix<f64>) -> f64 {
    (w * sigma).component_mul(w).sum()
}

/// `h_A(T) = tr(W Σ_A Wᵀ)`, the source-dependent part of the cost.
pub fn source_energy(a: &SourceEnsemble, s: &RepresentationOperator, t: &HSOperator) -> Result<f64> {
    s.check_source(a)?;
    let w = residual_map(s, t)?;
    Ok(trace_sandwich(&w, second_moment(a).matrix()))
}

/// Cost split into source and baseline contributions.
pub fn cost_decomposed(
    a: &SourceEnsemble,
    spec: &BaselineSpec,
    s: &RepresentationOperator,
    t: &HSOperator,
) -> Result<CostDecomposition> {
    s.check_source(a)?;
    if spec.d() != a.d() || spec.p() != a.p() {
        return shape_err("baseline spec and source have different (d,p)");
    }
    let w = residual_map(s, t)?;
    let h_a = trace_sandwich(&w, second_moment(a).matrix());
    let r_xi = trace_sandwich(&w, spec.sigma_xi());
    Ok(CostDecomposition {
        h_a,
        r_xi,
        total: h_a + r_xi,
    })
}

/// Coordinate data of the normal equation `λ M = B`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalEquationSystem {
    /// `q × q` Gram matrix of the auxiliary coordinates.
    pub m: DMatrix<f64>,
    /// `p_out × q` cross matrix.
    pub b: DMatrix<f64>,
    /// `Σ_j μ_j ‖Y_j‖²`.
    pub c_a: f64,
}

impl NormalEquationSystem {
    pub fn new(m: DMatrix<f64>, b: DMatrix<f64>, c_a: f64) -> Result<Self> {
        if !m.is_square() || b.ncols() != m.nrows() {
            return shape_err(format!(
                "M is {}x{}, B is {}x{}",
                m.nrows(),
                m.ncols(),
                b.nrows(),
                b.ncols()
            ));
        }
        if !(c_a.is_finite() && c_a >= 0.0) {
            return Err(Error::BadConfig(format!("c_A must be finite and >= 0, got {c_a}")));
        }
        Ok(Self {
            m: linalg::symmetrized(&m),
            b,
            c_a,
        })
    }

    pub fn p_out(&self) -> usize {
        self.b.nrows()
    }

    pub fn q(&self) -> usize {
        self.m.nrows()
    }

    /// Quadratic expansion `c_A − 2⟨λ, B⟩_F + tr(λ M λᵀ)`.
    pub fn cost(&self, t: &HSOperator) -> f64 {
        let l = t.lambda();
        self.c_a - 2.0 * l.dot(&self.b) + trace_sandwich(l, &self.m)
    }

    /// `‖λ M − B‖_F`.
    pub fn residual(&self, t: &HSOperator) -> f64 {
        (t.lambda() * &self.m - &self.b).norm()
    }
}

pub fn assemble_normal_equations(o: &ObservedEnsemble) -> NormalEquationSystem {
    let k = crate::representation::observed_second_moments(o);
    NormalEquationSystem {
        m: k.kxx,
        b: k.kyx,
        c_a: k.kyy.trace(),
    }
}

/// Solution together with the diagnostics the reports carry.
#[derive(Debug, Clone, PartialEq)]
pub struct Minimizer {
    pub operator: HSOperator,
    pub report: MinimizerReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinimizerReport {
    /// `‖λ* M − B‖_F`
    pub residual: f64,
    /// `λ_min(M)`
    pub coercivity_margin: f64,
    pub kernel_dim: usize,
    pub unique: bool,
    pub hs_norm: f64,
    /// `‖B‖_F`, the norm of the linear part of the cost.
    pub functional_bound: f64,
    pub cost: f64,
}

fn report_for(
    sys: &NormalEquationSystem,
    eig: &SortedEigen,
    operator: HSOperator,
    kernel_dim: usize,
) -> Minimizer {
    let report = MinimizerReport {
        residual: sys.residual(&operator),
        coercivity_margin: eig.min(),
        kernel_dim,
        unique: kernel_dim == 0,
        hs_norm: operator.hs_norm(),
        functional_bound: sys.b.norm(),
        cost: sys.cost(&operator),
    };
    Minimizer { operator, report }
}

/// `λ* = B M⁻¹` when `λ_min(M) ≥ c_min > 0`.
pub fn solve_coercive(sys: &NormalEquationSystem, c_min: f64) -> Result<Minimizer> {
    if c_min.is_nan() || c_min <= 0.0 {
        return Err(Error::BadConfig(format!("c_min must be positive, got {c_min}")));
    }
    let eig = SortedEigen::new(&sys.m);
    if sys.q() == 0 || eig.min() < c_min {
        return Err(Error::NotCoercive {
            lambda_min: eig.min(),
            c_min,
        });
    }
    let inv = eig.reconstruct_with(|v| 1.0 / v);
    let operator = HSOperator::new(&sys.b * inv)?;
    Ok(report_for(sys, &eig, operator, 0))
}

/// Eigen-split of `M` into range and kernel at a relative cutoff.
struct RangeSplit {
    eig: SortedEigen,
    cutoff: f64,
}

impl RangeSplit {
    fn new(m: &DMatrix<f64>, rank_tol: f64) -> Self {
        let eig = SortedEigen::new(m);
        let cutoff = rank_tol * eig.max().max(0.0);
        Self { eig, cutoff }
    }

    fn in_range(&self, v: f64) -> bool {
        v > self.cutoff
    }

    fn pinv(&self) -> DMatrix<f64> {
        self.eig
            .reconstruct_with(|v| if self.in_range(v) { 1.0 / v } else { 0.0 })
    }

    fn range_projector(&self) -> DMatrix<f64> {
        self.eig
            .reconstruct_with(|v| if self.in_range(v) { 1.0 } else { 0.0 })
    }

    fn kernel_basis(&self) -> Vec<DVector<f64>> {
        (0..self.eig.values.len())
            .filter(|&i| !self.in_range(self.eig.values[i]))
            .map(|i| self.eig.vectors.column(i).into_owned())
            .collect()
    }
}

/// Minimal-norm solution `B M†`, or `NoMinimizer` when `B` leaves `ran(M)`.
pub fn solve_pseudoinverse(sys: &NormalEquationSystem, rank_tol: f64) -> Result<Minimizer> {
    solve_pseudoinverse_with(sys, rank_tol, DEFAULT_CONSISTENCY_TOL)
}

/// As [`solve_pseudoinverse`] with an explicit consistency tolerance, applied as
/// `consistency_tol · (1 + ‖B‖_F)`.
pub fn solve_pseudoinverse_with(
    sys: &NormalEquationSystem,
    rank_tol: f64,
    consistency_tol: f64,
) -> Result<Minimizer> {
    let split = RangeSplit::new(&sys.m, rank_tol);
    let range_violation = (&sys.b - &sys.b * split.range_projector()).norm();
    if range_violation > consistency_tol * (1.0 + sys.b.norm()) {
        return Err(Error::NoMinimizer { range_violation });
    }
    let operator = HSOperator::new(&sys.b * split.pinv())?;
    let kernel_dim = split.kernel_basis().len();
    Ok(report_for(sys, &split.eig, operator, kernel_dim))
}

/// The affine set of minimizers `T0 + {rows in span(kernel_basis)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionSet {
    pub t0: HSOperator,
    pub kernel_basis: Vec<DVector<f64>>,
    pub unique: bool,
}

pub fn solution_set(sys: &NormalEquationSystem, rank_tol: f64) -> Result<SolutionSet> {
    let t0 = solve_pseudoinverse(sys, rank_tol)?.operator;
    let kernel_basis = RangeSplit::new(&sys.m, rank_tol).kernel_basis();
    Ok(SolutionSet {
        t0,
        unique: kernel_basis.is_empty(),
        kernel_basis,
    })
}

/// Upper bound on `|h_{A1}(T) − h_{A2}(T)|`:
/// `(2+√2) ‖S‖² max(1,‖J‖²) max(1,‖T‖²) ‖A1 − A2‖ (‖A1‖ + ‖A2‖)`.
pub fn cost_difference_bound(
    a1: &SourceEnsemble,
    a2: &SourceEnsemble,
    s: &RepresentationOperator,
    t: &HSOperator,
) -> Result<f64> {
    s.check_source(a1)?;
    residual_map(s, t)?;
    let diff = a1.try_sub(a2)?.norm();
    let constant = (2.0 + 2f64.sqrt())
        * s.norm_bound().powi(2)
        * s.embedding_norm().powi(2).max(1.0)
        * t.hs_norm().powi(2).max(1.0);
    Ok(constant * diff * (a1.norm() + a2.norm()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::MeasureSpace;
    use nalgebra::dmatrix;

    fn hs(m: DMatrix<f64>) -> HSOperator {
        HSOperator::new(m).unwrap()
    }

    fn sys(m: DMatrix<f64>, b: DMatrix<f64>) -> NormalEquationSystem {
        NormalEquationSystem::new(m, b, 0.0).unwrap()
    }

    #[test]
    fn cost_at_zero_is_target_energy() {
        let o = ObservedEnsemble::new(
            MeasureSpace::new(vec![1.0]).unwrap(),
            dmatrix![3.0, 4.0],
            dmatrix![1.0],
        )
        .unwrap();
        assert_eq!(cost(&o, &HSOperator::zeros(2, 1)).unwrap(), 25.0);
        assert!(cost(&o, &HSOperator::zeros(1, 1)).is_err());
    }

    #[test]
    fn cost_vanishes_on_exact_fit() {
        let lambda = dmatrix![1.0, -2.0; 0.5, 3.0];
        let x = dmatrix![1.0, 2.0; -1.0, 0.5; 3.0, 3.0];
        let y = &x * lambda.transpose();
        let o = ObservedEnsemble::new(MeasureSpace::new(vec![0.2, 0.3, 0.5]).unwrap(), y, x)
            .unwrap();
        assert!(cost(&o, &hs(lambda)).unwrap().abs() < 1e-24);
    }

    #[test]
    fn normal_equations_single_atom() {
        let o = ObservedEnsemble::new(
            MeasureSpace::new(vec![1.0]).unwrap(),
            dmatrix![1.0],
            dmatrix![2.0],
        )
        .unwrap();
        let s = assemble_normal_equations(&o);
        assert_eq!((s.m[(0, 0)], s.b[(0, 0)], s.c_a), (4.0, 2.0, 1.0));
    }

    #[test]
    fn normal_equations_without_auxiliary_signal() {
        let o = ObservedEnsemble::new(
            MeasureSpace::new(vec![1.0, 2.0]).unwrap(),
            dmatrix![1.0; 2.0],
            dmatrix![0.0, 0.0; 0.0, 0.0],
        )
        .unwrap();
        let s = assemble_normal_equations(&o);
        assert_eq!(s.m, DMatrix::zeros(2, 2));
        assert_eq!(s.b, DMatrix::zeros(1, 2));
        assert_eq!(s.c_a, 9.0);
    }

    #[test]
    fn coercive_diagonal_solve() {
        let r = solve_coercive(&sys(dmatrix![2.0, 0.0; 0.0, 4.0], dmatrix![2.0, 4.0]), 1.0).unwrap();
        assert!((r.operator.lambda() - dmatrix![1.0, 1.0]).norm() < 1e-15);
        assert!(r.report.unique);
        assert_eq!(r.report.coercivity_margin, 2.0);

        let r = solve_coercive(&sys(dmatrix![2.0, 0.0; 0.0, 4.0], dmatrix![0.0, 0.0]), 1.0).unwrap();
        assert_eq!(r.operator.lambda(), &dmatrix![0.0, 0.0]);
    }

    #[test]
    fn coercive_rejects_small_margin() {
        let s = sys(dmatrix![2.0, 0.0; 0.0, 0.5], dmatrix![1.0, 1.0]);
        assert!(matches!(
            solve_coercive(&s, 1.0),
            Err(Error::NotCoercive { lambda_min, .. }) if lambda_min == 0.5
        ));
        assert!(solve_coercive(&s, 0.0).is_err());
    }

    #[test]
    fn coercive_norm_bound() {
        let s = sys(dmatrix![3.0, 1.0; 1.0, 2.0], dmatrix![1.0, -2.0; 0.5, 0.5]);
        let r = solve_coercive(&s, 1.0).unwrap();
        assert!(r.report.hs_norm <= r.report.functional_bound / 1.0);
        assert!(r.report.residual < 1e-12);
    }

    #[test]
    fn pseudoinverse_supported_rhs() {
        let r = solve_pseudoinverse(&sys(dmatrix![1.0, 0.0; 0.0, 0.0], dmatrix![2.0, 0.0]), 1e-12)
            .unwrap();
        assert_eq!(r.operator.lambda(), &dmatrix![2.0, 0.0]);
        assert_eq!(r.report.kernel_dim, 1);
        assert!(!r.report.unique);
    }

    #[test]
    fn pseudoinverse_detects_range_violation() {
        let r = solve_pseudoinverse(&sys(dmatrix![1.0, 0.0; 0.0, 0.0], dmatrix![2.0, 3.0]), 1e-12);
        match r {
            Err(Error::NoMinimizer { range_violation }) => assert_eq!(range_violation, 3.0),
            other => panic!("expected NoMinimizer, got {other:?}"),
        }
    }

    #[test]
    fn solution_set_examples() {
        let s = solution_set(&sys(dmatrix![2.0, 1.0; 1.0, 2.0], dmatrix![1.0, 0.0]), 1e-12).unwrap();
        assert!(s.unique);
        assert!(s.kernel_basis.is_empty());

        let s = solution_set(&sys(DMatrix::zeros(3, 3), DMatrix::zeros(2, 3)), 1e-12).unwrap();
        assert!(!s.unique);
        assert_eq!(s.kernel_basis.len(), 3);
        assert_eq!(s.t0.lambda(), &DMatrix::zeros(2, 3));

        assert!(matches!(
            solution_set(&sys(dmatrix![1.0, 0.0; 0.0, 0.0], dmatrix![0.0, 1.0]), 1e-12),
            Err(Error::NoMinimizer { .. })
        ));
    }

    #[test]
    fn quadratic_expansion_matches_direct_cost() {
        let x = dmatrix![1.0, 2.0; -1.0, 0.5; 3.0, 3.0; 0.0, 1.0];
        let y = dmatrix![0.5, 1.0, -1.0; 2.0, 0.0, 1.0; 1.0, 1.0, 1.0; -3.0, 0.2, 0.0];
        let o = ObservedEnsemble::new(MeasureSpace::new(vec![0.2, 0.3, 0.5, 1.0]).unwrap(), y, x)
            .unwrap();
        let t = hs(dmatrix![0.1, -0.4; 1.0, 0.0; 0.3, 0.3]);
        let sys = assemble_normal_equations(&o);
        assert!((cost(&o, &t).unwrap() - sys.cost(&t)).abs() < 1e-12);
    }

    #[test]
    fn hs_csv_round_trip() {
        let t = hs(dmatrix![0.1, -0.4; 1.0 / 3.0, 0.0]);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("# hsop p_out=2 q=2\n"));
        assert_eq!(HSOperator::read_csv(buf.as_slice()).unwrap(), t);
    }

    #[test]
    fn difference_bound_zero_for_equal_sources() {
        let a = SourceEnsemble::from_flat(MeasureSpace::new(vec![1.0, 2.0]).unwrap(), 1, 2, &[1.0, 2.0, 3.0, -1.0])
            .unwrap();
        let s = RepresentationOperator::new(1, 2, dmatrix![1.0, 1.0], dmatrix![0.0, 1.0]).unwrap();
        assert_eq!(cost_difference_bound(&a, &a, &s, &hs(dmatrix![2.0])).unwrap(), 0.0);
    }

    #[test]
    fn difference_bound_tight_example_stays_valid() {
        // S1 = S2 = e1ᵀ, λ = −1: h = 4‖a‖² while the bound uses ‖[S1;S2]‖² = 2.
        let a = SourceEnsemble::from_flat(MeasureSpace::new(vec![1.0]).unwrap(), 1, 2, &[1.0, 0.0])
            .unwrap();
        let zero = a.scaled(0.0);
        let s = RepresentationOperator::new(1, 2, dmatrix![1.0, 0.0], dmatrix![1.0, 0.0]).unwrap();
        let t = hs(dmatrix![-1.0]);
        let h = source_energy(&a, &s, &t).unwrap();
        assert!((h - 4.0).abs() < 1e-14);
        assert!(h <= cost_difference_bound(&a, &zero, &s, &t).unwrap());
    }
}
