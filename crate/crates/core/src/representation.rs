//! The fixed linear representation operator and the observed pair it induces.
//!
//! `S1` maps a flattened source block to output coefficients (the target `Y`),
//! `S2` maps it to auxiliary coefficients (the observation `X`). When the
//! auxiliary block passes through an embedding `J`, the product `J·S2` is stored
//! and `‖J‖` is kept separately for the continuity constant.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::covariance::write_dense_rows;
use crate::error::{shape_err, Error, Result};
use crate::linalg;
use crate::measure::{weighted_gram, BaselineEnsemble, MeasureSpace, SourceEnsemble};

#[derive(Debug, Clone, PartialEq)]
pub struct RepresentationOperator {
    d: usize,
    p: usize,
    s1: DMatrix<f64>,
    s2: DMatrix<f64>,
    embedding_norm: f64,
    norm_bound: f64,
}

impl RepresentationOperator {
    /// Operator with `J = I`.
    pub fn new(d: usize, p: usize, s1: DMatrix<f64>, s2: DMatrix<f64>) -> Result<Self> {
        Self::build(d, p, s1, s2, 1.0)
    }

    /// Folds the embedding `j` into the auxiliary block: stores `j · s2`.
    pub fn with_embedding(
        d: usize,
        p: usize,
        s1: DMatrix<f64>,
        s2: DMatrix<f64>,
        j: &DMatrix<f64>,
    ) -> Result<Self> {
        if j.ncols() != s2.nrows() {
            return shape_err(format!(
                "embedding has {} columns, auxiliary block has {} rows",
                j.ncols(),
                s2.nrows()
            ));
        }
        let embedding_norm = linalg::spectral_norm(j);
        Self::build(d, p, s1, j * s2, embedding_norm)
    }

    fn build(
        d: usize,
        p: usize,
        s1: DMatrix<f64>,
        s2: DMatrix<f64>,
        embedding_norm: f64,
    ) -> Result<Self> {
        let n = d * p;
        if n == 0 {
            return shape_err("d and p must be positive");
        }
        if s1.ncols() != n || s2.ncols() != n {
            return shape_err(format!(
                "blocks have {} and {} columns, expected d*p = {n}",
                s1.ncols(),
                s2.ncols()
            ));
        }
        if s1.nrows() == 0 || s2.nrows() == 0 {
            return shape_err("target and auxiliary blocks need at least one row");
        }
        if !linalg::all_finite(&s1) || !linalg::all_finite(&s2) {
            return Err(Error::NonFinite("representation operator"));
        }
        let norm_bound = linalg::spectral_norm(&stack(&s1, &s2));
        Ok(Self {
            d,
            p,
            s1,
            s2,
            embedding_norm,
            norm_bound,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn input_dim(&self) -> usize {
        self.d * self.p
    }

    /// Rows of the target block.
    pub fn p_out(&self) -> usize {
        self.s1.nrows()
    }

    /// Rows of the auxiliary block.
    pub fn q(&self) -> usize {
        self.s2.nrows()
    }

    pub fn s1(&self) -> &DMatrix<f64> {
        &self.s1
    }

    pub fn s2(&self) -> &DMatrix<f64> {
        &self.s2
    }

    /// `[S1; S2]`, the matrix of the full representation.
    pub fn stacked(&self) -> DMatrix<f64> {
        stack(&self.s1, &self.s2)
    }

    /// Largest singular value of the stacked operator.
    pub fn norm_bound(&self) -> f64 {
        self.norm_bound
    }

    /// `‖J‖`; 1 when no embedding was supplied.
    pub fn embedding_norm(&self) -> f64 {
        self.embedding_norm
    }

    pub fn check_source(&self, a: &SourceEnsemble) -> Result<()> {
        if a.d() != self.d || a.p() != self.p {
            return shape_err(format!(
                "operator expects (d,p) = ({},{}), source has ({},{})",
                self.d,
                self.p,
                a.d(),
                a.p()
            ));
        }
        Ok(())
    }

    /// Dense export: a `# repop` header, then the rows of `S1` followed by `S2`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "# repop d={} p={} p_out={} q={} embedding_norm={:?}",
            self.d,
            self.p,
            self.p_out(),
            self.q(),
            self.embedding_norm
        )?;
        write_dense_rows(&mut w, &self.stacked())?;
        Ok(())
    }

    pub fn read_csv<R: std::io::BufRead>(r: R) -> Result<Self> {
        use crate::covariance::{header_field, read_dense};
        let (header, m) = read_dense(r)?;
        let d = header_field(&header, "repop", "d")?;
        let p = header_field(&header, "repop", "p")?;
        let p_out = header_field(&header, "repop", "p_out")?;
        let q = header_field(&header, "repop", "q")?;
        if m.nrows() != p_out + q {
            return Err(Error::Parse(format!(
                "expected {} rows, found {}",
                p_out + q,
                m.nrows()
            )));
        }
        let embedding_norm = header
            .split_whitespace()
            .find_map(|kv| kv.strip_prefix("embedding_norm="))
            .map(|v| v.parse::<f64>())
            .transpose()
            .map_err(|e| Error::Parse(format!("bad embedding_norm: {e}")))?
            .unwrap_or(1.0);
        let s1 = m.rows(0, p_out).into_owned();
        let s2 = m.rows(p_out, q).into_owned();
        Self::build(d, p, s1, s2, embedding_norm)
    }
}

fn stack(top: &DMatrix<f64>, bottom: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(top.nrows() + bottom.nrows(), top.ncols());
    out.rows_mut(0, top.nrows()).copy_from(top);
    out.rows_mut(top.nrows(), bottom.nrows()).copy_from(bottom);
    out
}

/// Per-atom observations: row `j` of `y` and `x` are `Y_j` and `X_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedEnsemble {
    space: MeasureSpace,
    y: DMatrix<f64>,
    x: DMatrix<f64>,
}

impl ObservedEnsemble {
    pub fn new(space: MeasureSpace, y: DMatrix<f64>, x: DMatrix<f64>) -> Result<Self> {
        let m = space.atom_count();
        if y.nrows() != m || x.nrows() != m {
            return shape_err(format!(
                "{m} atoms but Y has {} rows and X has {}",
                y.nrows(),
                x.nrows()
            ));
        }
        if !linalg::all_finite(&y) || !linalg::all_finite(&x) {
            return Err(Error::NonFinite("observed ensemble"));
        }
        Ok(Self { space, y, x })
    }

    pub fn space(&self) -> &MeasureSpace {
        &self.space
    }

    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn p_out(&self) -> usize {
        self.y.ncols()
    }

    pub fn q(&self) -> usize {
        self.x.ncols()
    }
}

/// Observes `a + ξ` through the operator; `ξ` is zero when absent.
pub fn apply(
    s: &RepresentationOperator,
    a: &SourceEnsemble,
    xi: Option<&BaselineEnsemble>,
) -> Result<ObservedEnsemble> {
    s.check_source(a)?;
    let total = match xi {
        Some(xi) => a.try_add(xi.ensemble())?,
        None => a.clone(),
    };
    let v = total.values();
    ObservedEnsemble::new(
        a.space().clone(),
        v * s.s1.transpose(),
        v * s.s2.transpose(),
    )
}

/// Observed second-moment blocks; `Kxy` is `kyx.transpose()`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedMoments {
    pub kyy: DMatrix<f64>,
    pub kyx: DMatrix<f64>,
    pub kxx: DMatrix<f64>,
}

impl ObservedMoments {
    /// `[Kyy Kyx; Kxy Kxx]`.
    pub fn joint(&self) -> DMatrix<f64> {
        let (a, b) = (self.kyy.nrows(), self.kxx.nrows());
        let mut out = DMatrix::zeros(a + b, a + b);
        out.view_mut((0, 0), (a, a)).copy_from(&self.kyy);
        out.view_mut((0, a), (a, b)).copy_from(&self.kyx);
        out.view_mut((a, 0), (b, a)).copy_from(&self.kyx.transpose());
        out.view_mut((a, a), (b, b)).copy_from(&self.kxx);
        out
    }
}

pub fn observed_second_moments(o: &ObservedEnsemble) -> ObservedMoments {
    let w = o.space.weights();
    ObservedMoments {
        kyy: linalg::symmetrized(&weighted_gram(w, &o.y, &o.y)),
        kyx: weighted_gram(w, &o.y, &o.x),
        kxx: linalg::symmetrized(&weighted_gram(w, &o.x, &o.x)),
    }
}

/// Finite section `Bⁿ` of the representation.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedRepresentation {
    pub n_in: usize,
    pub n_out: usize,
    /// `2·n_out × d·n_in`: truncated `S1` rows on top of truncated `S2` rows.
    pub b: DMatrix<f64>,
}

/// Column of the full operator that carries coefficient `k` of component `i`.
fn input_column(p: usize, i: usize, k: usize) -> usize {
    i * p + k
}

/// Builds `Bⁿ` from the first `n_out` target and auxiliary rows, restricted to
/// input coefficients with index `< n_in` in every component.
pub fn truncate(
    s: &RepresentationOperator,
    n_in: usize,
    n_out: usize,
) -> Result<TruncatedRepresentation> {
    if n_in == 0 || n_in > s.p {
        return Err(Error::BadTruncation { level: n_in, max: s.p });
    }
    let max_out = s.p_out().min(s.q());
    if n_out == 0 || n_out > max_out {
        return Err(Error::BadTruncation {
            level: n_out,
            max: max_out,
        });
    }
    let mut b = DMatrix::zeros(2 * n_out, s.d * n_in);
    for i in 0..s.d {
        for k in 0..n_in {
            let src = input_column(s.p, i, k);
            let dst = i * n_in + k;
            for r in 0..n_out {
                b[(r, dst)] = s.s1[(r, src)];
                b[(n_out + r, dst)] = s.s2[(r, src)];
            }
        }
    }
    Ok(TruncatedRepresentation { n_in, n_out, b })
}

/// Coordinates `H_n(P_n v)` of a flattened block: the first `n_in` coefficients per component.
pub fn project_coordinates(v: &DVector<f64>, d: usize, p: usize, n_in: usize) -> DVector<f64> {
    DVector::from_fn(d * n_in, |idx, _| {
        let (i, k) = (idx / n_in, idx % n_in);
        v[input_column(p, i, k)]
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationResidual {
    /// `‖δ_n‖` at each atom.
    pub per_atom: Vec<f64>,
    /// `Σ_j μ_j ‖δ_n,j‖²`.
    pub aggregate: f64,
}

/// Truncation error: leading output coordinates of `S̃(a+ξ)` minus `Bⁿ H_n(a+ξ)`.
pub fn truncation_residual(
    s: &RepresentationOperator,
    trunc: &TruncatedRepresentation,
    a: &SourceEnsemble,
    xi: Option<&BaselineEnsemble>,
) -> Result<TruncationResidual> {
    s.check_source(a)?;
    if trunc.b.ncols() != s.d * trunc.n_in || trunc.b.nrows() != 2 * trunc.n_out {
        return shape_err("truncation does not belong to this operator");
    }
    let total = match xi {
        Some(xi) => a.try_add(xi.ensemble())?,
        None => a.clone(),
    };
    let n_out = trunc.n_out;
    let leading = stack(
        &s.s1.rows(0, n_out).into_owned(),
        &s.s2.rows(0, n_out).into_owned(),
    );
    let per_atom: Vec<f64> = (0..total.atom_count())
        .map(|j| {
            let v = total.atom(j);
            let full = &leading * &v;
            let approx = &trunc.b * project_coordinates(&v, s.d, s.p, trunc.n_in);
            (full - approx).norm()
        })
        .collect();
    let aggregate = per_atom
        .iter()
        .zip(total.space().weights())
        .map(|(r, w)| w * r * r)
        .sum();
    Ok(TruncationResidual { per_atom, aggregate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::push_forward;
    use crate::measure::second_moment;
    use nalgebra::dmatrix;

    fn one_atom(d: usize, p: usize, v: &[f64]) -> SourceEnsemble {
        SourceEnsemble::from_flat(MeasureSpace::new(vec![1.0]).unwrap(), d, p, v).unwrap()
    }

    #[test]
    fn apply_identity_flattens_source() {
        let a = SourceEnsemble::from_flat(
            MeasureSpace::new(vec![0.5, 0.5]).unwrap(),
            2,
            1,
            &[1.0, 2.0, 3.0, 4.0],
        )
        .unwrap();
        let s = RepresentationOperator::new(2, 1, DMatrix::identity(2, 2), DMatrix::identity(2, 2))
            .unwrap();
        let o = apply(&s, &a, None).unwrap();
        assert_eq!(o.y(), a.values());
        assert_eq!(o.x(), a.values());
    }

    #[test]
    fn apply_zero_source() {
        let a = one_atom(1, 2, &[0.0, 0.0]);
        let s = RepresentationOperator::new(1, 2, dmatrix![1.0, 1.0], dmatrix![1.0, -1.0]).unwrap();
        let o = apply(&s, &a, None).unwrap();
        assert_eq!(o.y(), &dmatrix![0.0]);
        assert_eq!(o.x(), &dmatrix![0.0]);
    }

    #[test]
    fn apply_hand_product() {
        let a = one_atom(1, 2, &[2.0, 3.0]);
        let s = RepresentationOperator::new(1, 2, dmatrix![1.0, 1.0], dmatrix![1.0, -1.0]).unwrap();
        let o = apply(&s, &a, None).unwrap();
        assert_eq!(o.y(), &dmatrix![5.0]);
        assert_eq!(o.x(), &dmatrix![-1.0]);
    }

    #[test]
    fn operator_shape_checks() {
        assert!(RepresentationOperator::new(1, 2, dmatrix![1.0], dmatrix![1.0, 1.0]).is_err());
        let s = RepresentationOperator::new(1, 2, dmatrix![1.0, 0.0], dmatrix![0.0, 1.0]).unwrap();
        assert!(apply(&s, &one_atom(2, 1, &[1.0, 1.0]), None).is_err());
    }

    #[test]
    fn norm_bound_is_stacked_spectral_norm() {
        let s = RepresentationOperator::new(1, 2, dmatrix![1.0, 0.0], dmatrix![1.0, 0.0]).unwrap();
        assert!((s.norm_bound() - 2f64.sqrt()).abs() < 1e-14);
        assert_eq!(s.embedding_norm(), 1.0);
        let j = dmatrix![3.0];
        let s = RepresentationOperator::with_embedding(1, 2, dmatrix![1.0, 0.0], dmatrix![1.0, 0.0], &j)
            .unwrap();
        assert_eq!(s.s2(), &dmatrix![3.0, 0.0]);
        assert!((s.embedding_norm() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn observed_moments_single_atom() {
        let o = ObservedEnsemble::new(
            MeasureSpace::new(vec![1.0]).unwrap(),
            dmatrix![1.0],
            dmatrix![2.0],
        )
        .unwrap();
        let k = observed_second_moments(&o);
        assert_eq!((k.kyy[(0, 0)], k.kyx[(0, 0)], k.kxx[(0, 0)]), (1.0, 2.0, 4.0));
    }

    #[test]
    fn observed_moments_orthogonal_design() {
        let o = ObservedEnsemble::new(
            MeasureSpace::new(vec![1.0, 1.0]).unwrap(),
            dmatrix![1.0; 1.0],
            dmatrix![1.0; -1.0],
        )
        .unwrap();
        assert_eq!(observed_second_moments(&o).kyx, dmatrix![0.0]);
    }

    #[test]
    fn observed_moments_match_push_forward() {
        let a = SourceEnsemble::from_flat(
            MeasureSpace::new(vec![0.3, 1.2, 0.5]).unwrap(),
            1,
            3,
            &[1.0, -2.0, 0.5, 0.3, 0.7, -1.1, 2.0, 0.1, 0.4],
        )
        .unwrap();
        let s = RepresentationOperator::new(
            1,
            3,
            dmatrix![1.0, 2.0, 0.0; 0.5, -1.0, 3.0],
            dmatrix![0.2, 0.0, 1.0],
        )
        .unwrap();
        let joint = observed_second_moments(&apply(&s, &a, None).unwrap()).joint();
        let pushed = push_forward(&s.stacked(), &second_moment(&a)).unwrap();
        assert!((joint - pushed.matrix()).norm() < 1e-12);
    }

    #[test]
    fn truncate_full_and_partial() {
        let s1 = DMatrix::from_fn(3, 6, |r, c| (r * 6 + c) as f64);
        let s2 = DMatrix::from_fn(3, 6, |r, c| -((r * 6 + c) as f64));
        let s = RepresentationOperator::new(2, 3, s1.clone(), s2.clone()).unwrap();
        let t = truncate(&s, 3, 3).unwrap();
        assert_eq!(t.b, s.stacked());

        let t = truncate(&s, 2, 1).unwrap();
        // columns with coefficient index < 2: 0, 1 (component 0) and 3, 4 (component 1)
        assert_eq!(t.b.row(0).iter().copied().collect::<Vec<_>>(), vec![0.0, 1.0, 3.0, 4.0]);
        assert_eq!(t.b.row(1).iter().copied().collect::<Vec<_>>(), vec![0.0, -1.0, -3.0, -4.0]);

        assert!(matches!(truncate(&s, 0, 1), Err(Error::BadTruncation { .. })));
        assert!(matches!(truncate(&s, 4, 1), Err(Error::BadTruncation { .. })));
        assert!(matches!(truncate(&s, 1, 4), Err(Error::BadTruncation { .. })));
    }

    #[test]
    fn truncate_identity_single_output() {
        let s = RepresentationOperator::new(1, 3, DMatrix::identity(3, 3), DMatrix::identity(3, 3))
            .unwrap();
        let t = truncate(&s, 1, 1).unwrap();
        assert_eq!(t.b, dmatrix![1.0; 1.0]);
    }

    #[test]
    fn residual_vanishes_at_full_input_truncation() {
        let s = RepresentationOperator::new(
            1,
            3,
            dmatrix![1.0, 2.0, 3.0; 4.0, 5.0, 6.0],
            dmatrix![1.0, 0.0, -1.0; 0.0, 1.0, 1.0],
        )
        .unwrap();
        let a = one_atom(1, 3, &[0.3, -0.2, 1.5]);
        let t = truncate(&s, 3, 2).unwrap();
        let r = truncation_residual(&s, &t, &a, None).unwrap();
        assert_eq!(r.aggregate, 0.0);
    }

    #[test]
    fn residual_vanishes_for_supported_sources() {
        let s = RepresentationOperator::new(
            1,
            3,
            dmatrix![1.0, 2.0, 3.0],
            dmatrix![1.0, 0.0, -1.0],
        )
        .unwrap();
        let a = one_atom(1, 3, &[0.3, -0.2, 0.0]);
        let t = truncate(&s, 2, 1).unwrap();
        assert_eq!(truncation_residual(&s, &t, &a, None).unwrap().aggregate, 0.0);
    }

    #[test]
    fn residual_need_not_be_monotone_for_coupled_levels() {
        // Column 1 and column 2 of the target row are not orthogonal, so cutting
        // the input at level 1 cancels what level 2 alone would leave behind.
        let s = RepresentationOperator::new(
            1,
            3,
            dmatrix![0.0, 1.0, -1.0],
            dmatrix![0.0, 0.0, 0.0],
        )
        .unwrap();
        let a = one_atom(1, 3, &[0.0, 1.0, 1.0]);
        let r: Vec<f64> = (1..=3)
            .map(|n| {
                let t = truncate(&s, n, 1).unwrap();
                truncation_residual(&s, &t, &a, None).unwrap().aggregate
            })
            .collect();
        assert_eq!(r, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn csv_round_trip() {
        let s = RepresentationOperator::with_embedding(
            1,
            2,
            dmatrix![1.0, 0.25],
            dmatrix![0.5, -1.0; 2.0, 0.0],
            &dmatrix![1.0, 0.0; 0.0, 2.0],
        )
        .unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let back = RepresentationOperator::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, s);
    }
}
