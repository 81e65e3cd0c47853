//! Finite measure spaces, source ensembles and baseline ensembles.
//!
//! A source is stored as one coefficient block per atom: `d` components, each
//! expanded against a fixed orthonormal basis truncated to `p` coefficients.
//! Blocks are flattened component-major, so the pair `(i, k)` lands at
//! `i * p + k` (zero-based). Every second-order quantity in the crate uses this
//! ordering.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::covariance::BlockCovariance;
use crate::error::{shape_err, Error, Result};
use crate::linalg::{self, SortedEigen};

/// Finitely many atoms with strictly positive masses. Total mass is arbitrary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureSpace {
    weights: Vec<f64>,
}

impl MeasureSpace {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidMeasure("at least one atom is required".into()));
        }
        if let Some((j, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w > 0.0))
        {
            return Err(Error::InvalidMeasure(format!(
                "weight of atom {j} must be finite and positive, got {w}"
            )));
        }
        Ok(Self { weights })
    }

    /// `m` atoms of mass `mass / m` each.
    pub fn uniform(m: usize, mass: f64) -> Result<Self> {
        Self::new(vec![mass / m.max(1) as f64; m])
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn atom_count(&self) -> usize {
        self.weights.len()
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// A vector-valued source realized on a finite measure space.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceEnsemble {
    space: MeasureSpace,
    d: usize,
    p: usize,
    /// Row `j` is the flattened coefficient block of atom `j`.
    values: DMatrix<f64>,
}

impl SourceEnsemble {
    pub fn new(space: MeasureSpace, d: usize, p: usize, values: DMatrix<f64>) -> Result<Self> {
        if d == 0 || p == 0 {
            return shape_err(format!("d and p must be positive (d={d}, p={p})"));
        }
        if values.nrows() != space.atom_count() || values.ncols() != d * p {
            return shape_err(format!(
                "values are {}x{}, expected {}x{}",
                values.nrows(),
                values.ncols(),
                space.atom_count(),
                d * p
            ));
        }
        if !linalg::all_finite(&values) {
            return Err(Error::NonFinite("source ensemble"));
        }
        Ok(Self { space, d, p, values })
    }

    /// Builds from an `m × d × p` array flattened in row-major order.
    pub fn from_flat(space: MeasureSpace, d: usize, p: usize, flat: &[f64]) -> Result<Self> {
        let m = space.atom_count();
        if flat.len() != m * d * p {
            return shape_err(format!("expected {} values, got {}", m * d * p, flat.len()));
        }
        let values = DMatrix::from_row_slice(m, d * p, flat);
        Self::new(space, d, p, values)
    }

    pub fn zeros(space: MeasureSpace, d: usize, p: usize) -> Result<Self> {
        let m = space.atom_count();
        Self::new(space, d, p, DMatrix::zeros(m, d * p))
    }

    pub fn space(&self) -> &MeasureSpace {
        &self.space
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// `d * p`, the length of one flattened block.
    pub fn dim(&self) -> usize {
        self.d * self.p
    }

    pub fn atom_count(&self) -> usize {
        self.space.atom_count()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Coefficient of component `i` against basis vector `k` at atom `j`.
    pub fn coeff(&self, j: usize, i: usize, k: usize) -> f64 {
        self.values[(j, i * self.p + k)]
    }

    /// Flattened block of atom `j`.
    pub fn atom(&self, j: usize) -> DVector<f64> {
        self.values.row(j).transpose()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            values: &self.values * c,
            ..self.clone()
        }
    }

    /// Applies the square matrix `k` to every flattened block.
    pub fn transformed(&self, k: &DMatrix<f64>) -> Result<Self> {
        if k.nrows() != self.dim() || k.ncols() != self.dim() {
            return shape_err(format!(
                "transform is {}x{}, ensemble dim is {}",
                k.nrows(),
                k.ncols(),
                self.dim()
            ));
        }
        Self::new(
            self.space.clone(),
            self.d,
            self.p,
            &self.values * k.transpose(),
        )
    }

    fn check_compatible(&self, other: &SourceEnsemble, what: &str) -> Result<()> {
        if self.d != other.d || self.p != other.p {
            return shape_err(format!(
                "{what}: (d,p) = ({},{}) vs ({},{})",
                self.d, self.p, other.d, other.p
            ));
        }
        if self.space != other.space {
            return shape_err(format!("{what}: ensembles live on different measure spaces"));
        }
        Ok(())
    }

    pub fn try_sub(&self, other: &SourceEnsemble) -> Result<Self> {
        self.check_compatible(other, "difference")?;
        Ok(Self {
            values: &self.values - &other.values,
            ..self.clone()
        })
    }

    pub fn try_add(&self, other: &SourceEnsemble) -> Result<Self> {
        self.check_compatible(other, "sum")?;
        Ok(Self {
            values: &self.values + &other.values,
            ..self.clone()
        })
    }

    /// Weighted L²(μ) norm `(Σ_j μ_j ‖a_j‖²)^½`.
    pub fn norm(&self) -> f64 {
        self.space
            .weights()
            .iter()
            .enumerate()
            .map(|(j, w)| w * self.values.row(j).norm_squared())
            .sum::<f64>()
            .sqrt()
    }

    /// Writes the columnar form `atom,weight,component,coeff_index,value`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["atom", "weight", "component", "coeff_index", "value"])?;
        for (j, weight) in self.space.weights().iter().enumerate() {
            for i in 0..self.d {
                for k in 0..self.p {
                    w.serialize((j, weight, i, k, self.coeff(j, i, k)))?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the columnar form written by [`SourceEnsemble::write_csv`].
    ///
    /// `d` and `p` are inferred from the largest indices; missing entries are zero.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            atom: usize,
            weight: f64,
            component: usize,
            coeff_index: usize,
            value: f64,
        }
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let rows = rdr
            .deserialize::<Row>()
            .collect::<std::result::Result<Vec<_>, _>>()?;
        if rows.is_empty() {
            return Err(Error::Parse("ensemble csv has no rows".into()));
        }
        let m = rows.iter().map(|r| r.atom).max().unwrap_or(0) + 1;
        let d = rows.iter().map(|r| r.component).max().unwrap_or(0) + 1;
        let p = rows.iter().map(|r| r.coeff_index).max().unwrap_or(0) + 1;
        let mut weights = vec![f64::NAN; m];
        let mut values = DMatrix::zeros(m, d * p);
        for r in &rows {
            let w = &mut weights[r.atom];
            if w.is_nan() {
                *w = r.weight;
            } else if *w != r.weight {
                return Err(Error::Parse(format!(
                    "atom {} listed with weights {} and {}",
                    r.atom, w, r.weight
                )));
            }
            values[(r.atom, r.component * p + r.coeff_index)] = r.value;
        }
        if let Some(j) = weights.iter().position(|w| w.is_nan()) {
            return Err(Error::Parse(format!("atom {j} has no rows")));
        }
        Self::new(MeasureSpace::new(weights)?, d, p, values)
    }
}

impl AsRef<SourceEnsemble> for SourceEnsemble {
    fn as_ref(&self) -> &SourceEnsemble {
        self
    }
}

/// Prescribed second moment `Σ_ξ` of the baseline component.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineSpec {
    d: usize,
    p: usize,
    sigma_xi: DMatrix<f64>,
}

impl BaselineSpec {
    pub const SYMMETRY_TOL: f64 = 1e-12;
    pub const PSD_TOL: f64 = 1e-10;

    pub fn new(d: usize, p: usize, sigma_xi: DMatrix<f64>) -> Result<Self> {
        let n = d * p;
        if sigma_xi.nrows() != n || sigma_xi.ncols() != n {
            return shape_err(format!(
                "baseline second moment is {}x{}, expected {n}x{n}",
                sigma_xi.nrows(),
                sigma_xi.ncols()
            ));
        }
        if !linalg::all_finite(&sigma_xi) {
            return Err(Error::NonFinite("baseline second moment"));
        }
        let asymmetry = linalg::relative_asymmetry(&sigma_xi);
        if asymmetry > Self::SYMMETRY_TOL {
            return Err(Error::NotSymmetric { asymmetry });
        }
        let sigma_xi = linalg::symmetrized(&sigma_xi);
        let eig = SortedEigen::new(&sigma_xi);
        if eig.min() < -Self::PSD_TOL * eig.max().max(0.0) {
            return Err(Error::DegenerateSpec { lambda_min: eig.min() });
        }
        Ok(Self { d, p, sigma_xi })
    }

    pub fn zero(d: usize, p: usize) -> Self {
        Self {
            d,
            p,
            sigma_xi: DMatrix::zeros(d * p, d * p),
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn sigma_xi(&self) -> &DMatrix<f64> {
        &self.sigma_xi
    }
}

/// A realized baseline component together with the spec it was built for.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineEnsemble {
    ensemble: SourceEnsemble,
    spec: BaselineSpec,
}

impl BaselineEnsemble {
    /// Wraps a realization; consistency with `spec` is checked by [`validate_baseline`].
    pub fn new(ensemble: SourceEnsemble, spec: BaselineSpec) -> Result<Self> {
        if ensemble.d() != spec.d() || ensemble.p() != spec.p() {
            return shape_err("baseline realization and spec have different (d,p)");
        }
        Ok(Self { ensemble, spec })
    }

    pub fn ensemble(&self) -> &SourceEnsemble {
        &self.ensemble
    }

    pub fn spec(&self) -> &BaselineSpec {
        &self.spec
    }
}

impl AsRef<SourceEnsemble> for BaselineEnsemble {
    fn as_ref(&self) -> &SourceEnsemble {
        &self.ensemble
    }
}

/// Raw (uncentered) block second moment `Σ_j μ_j vec(a_j) vec(a_j)ᵀ`.
pub fn second_moment<E: AsRef<SourceEnsemble>>(e: E) -> BlockCovariance {
    let e = e.as_ref();
    let raw = weighted_gram(e.space.weights(), &e.values, &e.values);
    BlockCovariance::from_trusted(e.d, e.p, linalg::symmetrized(&raw))
}

/// `Σ_j μ_j vec(a_j) vec(ξ_j)ᵀ`.
pub fn cross_moment<A: AsRef<SourceEnsemble>, X: AsRef<SourceEnsemble>>(
    a: A,
    x: X,
) -> Result<DMatrix<f64>> {
    let (a, x) = (a.as_ref(), x.as_ref());
    a.check_compatible(x, "cross moment")?;
    Ok(weighted_gram(a.space.weights(), &a.values, &x.values))
}

/// `Σ_j w_j u_j v_jᵀ` where `u_j`, `v_j` are the rows of `u`, `v`.
pub(crate) fn weighted_gram(weights: &[f64], u: &DMatrix<f64>, v: &DMatrix<f64>) -> DMatrix<f64> {
    let mut scaled = u.clone();
    for (j, w) in weights.iter().enumerate() {
        scaled.row_mut(j).scale_mut(*w);
    }
    scaled.transpose() * v
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    /// `‖second_moment(ξ) − Σ_ξ‖_F`
    pub second_moment_error: f64,
    /// `‖cross_moment(A, ξ)‖_F`
    pub cross_moment_norm: f64,
    pub tol: f64,
    pub passed: bool,
}

/// Checks the two standing assumptions on a baseline realization.
///
/// The second-moment error is compared against `tol · max(1, ‖Σ_ξ‖_F)` and the
/// cross moment against `tol · max(1, (‖Σ_A‖_F ‖Σ_ξ‖_F)^½)`.
pub fn validate_baseline(
    a: &SourceEnsemble,
    xi: &BaselineEnsemble,
    spec: &BaselineSpec,
    tol: f64,
) -> Result<ValidationReport> {
    if spec.d() != a.d() || spec.p() != a.p() {
        return shape_err("baseline spec and source have different (d,p)");
    }
    let cross = cross_moment(a, xi)?;
    let sm = second_moment(xi);
    let second_moment_error = (sm.matrix() - spec.sigma_xi()).norm();
    let cross_moment_norm = cross.norm();
    let xi_scale = spec.sigma_xi().norm();
    let a_scale = second_moment(a).matrix().norm();
    let passed = second_moment_error <= tol * xi_scale.max(1.0)
        && cross_moment_norm <= tol * (a_scale * xi_scale).sqrt().max(1.0);
    Ok(ValidationReport {
        second_moment_error,
        cross_moment_norm,
        tol,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn space(w: &[f64]) -> MeasureSpace {
        MeasureSpace::new(w.to_vec()).unwrap()
    }

    #[test]
    fn measure_space_rejects_bad_weights() {
        assert!(MeasureSpace::new(vec![]).is_err());
        assert!(MeasureSpace::new(vec![1.0, 0.0]).is_err());
        assert!(MeasureSpace::new(vec![1.0, -2.0]).is_err());
        assert!(MeasureSpace::new(vec![f64::NAN]).is_err());
        assert_eq!(space(&[0.5, 2.0]).total_mass(), 2.5);
    }

    #[test]
    fn second_moment_rank_one() {
        let a = SourceEnsemble::from_flat(space(&[1.0]), 1, 2, &[1.0, 2.0]).unwrap();
        assert_eq!(second_moment(&a).matrix(), &dmatrix![1.0, 2.0; 2.0, 4.0]);
    }

    #[test]
    fn second_moment_of_zero_is_zero() {
        let a = SourceEnsemble::zeros(space(&[0.3, 0.7]), 2, 3).unwrap();
        assert_eq!(second_moment(&a).matrix(), &DMatrix::zeros(6, 6));
    }

    #[test]
    fn second_moment_two_atoms() {
        let a = SourceEnsemble::from_flat(space(&[0.5, 0.5]), 1, 2, &[1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(second_moment(&a).matrix(), &dmatrix![0.5, 0.0; 0.0, 0.5]);
    }

    #[test]
    fn vec_ordering_is_component_major() {
        let a = SourceEnsemble::from_flat(space(&[1.0]), 2, 3, &[1., 2., 3., 4., 5., 6.]).unwrap();
        assert_eq!(a.coeff(0, 1, 0), 4.0);
        assert_eq!(a.coeff(0, 0, 2), 3.0);
        assert_eq!(a.atom(0)[4], 5.0);
    }

    #[test]
    fn cross_moment_examples() {
        let sp = space(&[1.0, 1.0]);
        let a = SourceEnsemble::from_flat(sp.clone(), 1, 1, &[1.0, 1.0]).unwrap();
        let xi = SourceEnsemble::from_flat(sp.clone(), 1, 1, &[1.0, -1.0]).unwrap();
        assert_eq!(cross_moment(&a, &xi).unwrap(), dmatrix![0.0]);

        let zero = SourceEnsemble::zeros(sp.clone(), 1, 1).unwrap();
        assert_eq!(cross_moment(&a, &zero).unwrap(), dmatrix![0.0]);

        let other = SourceEnsemble::zeros(space(&[1.0]), 1, 1).unwrap();
        assert!(matches!(
            cross_moment(&a, &other),
            Err(Error::ShapeMismatch(_))
        ));
        let wide = SourceEnsemble::zeros(sp, 1, 2).unwrap();
        assert!(cross_moment(&a, &wide).is_err());
    }

    #[test]
    fn constant_source_against_mean_zero_baseline() {
        // weights (2, 1, 1) with ξ = (1, -1, -1): Σ μ ξ = 0
        let sp = space(&[2.0, 1.0, 1.0]);
        let a = SourceEnsemble::from_flat(sp.clone(), 1, 2, &[3.0, -1.0, 3.0, -1.0, 3.0, -1.0]).unwrap();
        let xi = SourceEnsemble::from_flat(sp, 1, 2, &[1.0, 0.5, -1.0, -0.5, -1.0, -0.5]).unwrap();
        assert!(cross_moment(&a, &xi).unwrap().norm() < 1e-15);
    }

    #[test]
    fn validate_baseline_detects_correlated_baseline() {
        let sp = space(&[0.5, 0.5]);
        let a = SourceEnsemble::from_flat(sp, 1, 1, &[1.0, 2.0]).unwrap();
        let sm = second_moment(&a).matrix().clone();
        let spec = BaselineSpec::new(1, 1, sm).unwrap();
        let xi = BaselineEnsemble::new(a.clone(), spec.clone()).unwrap();
        let report = validate_baseline(&a, &xi, &spec, 1e-10).unwrap();
        assert_eq!(report.second_moment_error, 0.0);
        assert!(report.cross_moment_norm > 1.0);
        assert!(!report.passed);
    }

    #[test]
    fn validate_zero_baseline_passes() {
        let sp = space(&[0.5, 0.5]);
        let a = SourceEnsemble::from_flat(sp.clone(), 1, 2, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        let spec = BaselineSpec::zero(1, 2);
        let xi = BaselineEnsemble::new(SourceEnsemble::zeros(sp, 1, 2).unwrap(), spec.clone()).unwrap();
        assert!(validate_baseline(&a, &xi, &spec, 1e-12).unwrap().passed);
    }

    #[test]
    fn baseline_spec_validation() {
        assert!(matches!(
            BaselineSpec::new(1, 2, dmatrix![1.0, 0.5; 0.4, 1.0]),
            Err(Error::NotSymmetric { .. })
        ));
        assert!(matches!(
            BaselineSpec::new(1, 2, dmatrix![1.0, 0.0; 0.0, -1.0]),
            Err(Error::DegenerateSpec { .. })
        ));
        assert!(BaselineSpec::new(1, 2, dmatrix![1.0]).is_err());
    }

    #[test]
    fn ensemble_shape_checks() {
        let sp = space(&[1.0, 1.0]);
        assert!(SourceEnsemble::from_flat(sp.clone(), 1, 2, &[1.0; 3]).is_err());
        assert!(SourceEnsemble::from_flat(sp.clone(), 1, 1, &[1.0, f64::INFINITY]).is_err());
        assert!(SourceEnsemble::zeros(sp, 0, 2).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let sp = space(&[0.25, 1.5, 2.0]);
        let flat: Vec<f64> = (0..12).map(|x| x as f64 * 0.37 - 1.0).collect();
        let a = SourceEnsemble::from_flat(sp, 2, 2, &flat).unwrap();
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("atom,weight,component,coeff_index,value\n"));
        let back = SourceEnsemble::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn csv_rejects_inconsistent_weights() {
        let text = "atom,weight,component,coeff_index,value\n0,1.0,0,0,1.0\n0,2.0,0,1,1.0\n";
        assert!(SourceEnsemble::read_csv(text.as_bytes()).is_err());
    }

    #[test]
    fn norm_matches_trace_of_second_moment() {
        let sp = space(&[0.2, 0.8]);
        let a = SourceEnsemble::from_flat(sp, 1, 2, &[1.0, 2.0, -3.0, 0.5]).unwrap();
        let tr = second_moment(&a).matrix().trace();
        assert!((a.norm().powi(2) - tr).abs() < 1e-14);
    }
}
