//! Block second-moment operators and the Loewner order.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{shape_err, Error, Result};
use crate::linalg::{self, SortedEigen};

/// Default absolute tolerance on `λ_min(big − small)` for domination checks.
pub const DEFAULT_DOMINATION_TOL: f64 = 1e-9;

/// Symmetric PSD `(d·p) × (d·p)` second-moment matrix with its block layout.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockCovariance {
    d: usize,
    p: usize,
    matrix: DMatrix<f64>,
}

impl BlockCovariance {
    pub const SYMMETRY_TOL: f64 = 1e-12;
    pub const PSD_TOL: f64 = 1e-10;

    pub fn new(d: usize, p: usize, matrix: DMatrix<f64>) -> Result<Self> {
        let n = d * p;
        if n == 0 || matrix.nrows() != n || matrix.ncols() != n {
            return shape_err(format!(
                "block covariance with d={d}, p={p} cannot hold a {}x{} matrix",
                matrix.nrows(),
                matrix.ncols()
            ));
        }
        if !linalg::all_finite(&matrix) {
            return Err(Error::NonFinite("block covariance"));
        }
        let asymmetry = linalg::relative_asymmetry(&matrix);
        if asymmetry > Self::SYMMETRY_TOL {
            return Err(Error::NotSymmetric { asymmetry });
        }
        let matrix = linalg::symmetrized(&matrix);
        let eig = SortedEigen::new(&matrix);
        if eig.min() < -Self::PSD_TOL * eig.max().max(1.0) {
            return Err(Error::NotPsd { lambda_min: eig.min() });
        }
        Ok(Self { d, p, matrix })
    }

    /// A covariance without component structure (`d = 1`).
    pub fn flat(matrix: DMatrix<f64>) -> Result<Self> {
        let n = matrix.nrows();
        Self::new(1, n, matrix)
    }

    /// Caller guarantees symmetry and PSD-ness by construction.
    pub(crate) fn from_trusted(d: usize, p: usize, matrix: DMatrix<f64>) -> Self {
        debug_assert_eq!(matrix.nrows(), d * p);
        Self { d, p, matrix }
    }

    pub fn zeros(d: usize, p: usize) -> Self {
        Self::from_trusted(d, p, DMatrix::zeros(d * p, d * p))
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::from_trusted(self.d, self.p, &self.matrix * c)
    }

    /// Block `Σ_ij` between components `i` and `j` (a `p × p` view copy).
    pub fn block(&self, i: usize, j: usize) -> DMatrix<f64> {
        self.matrix
            .view((i * self.p, j * self.p), (self.p, self.p))
            .into_owned()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# blockcov d={} p={}", self.d, self.p)?;
        write_dense_rows(&mut w, &self.matrix)?;
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let (header, matrix) = read_dense(r)?;
        let d = header_field(&header, "blockcov", "d")?;
        let p = header_field(&header, "blockcov", "p")?;
        Self::new(d, p, matrix)
    }
}

/// Writes every row of `m` as comma-separated values with round-trip precision.
pub fn write_dense_rows<W: Write>(w: &mut W, m: &DMatrix<f64>) -> Result<()> {
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(|x| format!("{x:?}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

/// Reads a `# <tag> key=value ...` header line followed by dense rows.
pub fn read_dense<R: BufRead>(r: R) -> Result<(String, DMatrix<f64>)> {
    let mut header = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for line in r.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if header.is_none() {
                header = Some(rest.trim().to_string());
            }
            continue;
        }
        let row = line
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("bad number {tok:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let header = header.ok_or_else(|| Error::Parse("missing '#' header line".into()))?;
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Parse("ragged matrix rows".into()));
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let nrows = flat.len().checked_div(ncols).unwrap_or(0);
    Ok((header, DMatrix::from_row_slice(nrows, ncols, &flat)))
}

/// Extracts `key=<usize>` from a header of the form `<tag> key=value ...`.
pub fn header_field(header: &str, tag: &str, key: &str) -> Result<usize> {
    let mut parts = header.split_whitespace();
    if parts.next() != Some(tag) {
        return Err(Error::Parse(format!("expected header tag {tag:?} in {header:?}")));
    }
    parts
        .filter_map(|kv| kv.split_once('='))
        .find(|(k, _)| *k == key)
        .ok_or_else(|| Error::Parse(format!("header {header:?} lacks {key}=")))?
        .1
        .parse()
        .map_err(|e| Error::Parse(format!("bad {key} in header: {e}")))
}

/// Result of a Loewner comparison `small ⪯ big`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Domination {
    pub dominates: bool,
    /// `λ_min(big − small)`; negative values measure how far outside the order we are.
    pub lambda_min: f64,
}

/// Tests `small ⪯ big` through a full symmetric eigensolve of the difference.
pub fn loewner_dominates(
    big: &BlockCovariance,
    small: &BlockCovariance,
    tol: f64,
) -> Result<Domination> {
    loewner_dominates_matrix(&big.matrix, &small.matrix, tol)
}

/// Ascending eigenvalues of `big − small`; the first entry is the Loewner margin.
pub fn difference_spectrum(big: &BlockCovariance, small: &BlockCovariance) -> Result<Vec<f64>> {
    if big.matrix.shape() != small.matrix.shape() {
        return shape_err(format!(
            "cannot compare {:?} with {:?}",
            big.matrix.shape(),
            small.matrix.shape()
        ));
    }
    Ok(linalg::SortedEigen::new(&(&big.matrix - &small.matrix)).values.iter().copied().collect())
}

pub(crate) fn loewner_dominates_matrix(
    big: &DMatrix<f64>,
    small: &DMatrix<f64>,
    tol: f64,
) -> Result<Domination> {
    if big.shape() != small.shape() {
        return shape_err(format!(
            "cannot compare {:?} with {:?}",
            big.shape(),
            small.shape()
        ));
    }
    let lambda_min = linalg::lambda_min(&(big - small));
    Ok(Domination {
        dominates: lambda_min >= -tol,
        lambda_min,
    })
}

/// `gᵀ S g`.
pub fn quadratic_form(s: &BlockCovariance, g: &DVector<f64>) -> Result<f64> {
    if g.len() != s.dim() {
        return shape_err(format!("vector of length {} against dim {}", g.len(), s.dim()));
    }
    Ok(g.dot(&(s.matrix() * g)))
}

/// Componentwise projection onto the first `n` coefficients: every row and
/// column whose coefficient index is `≥ n` (zero-based) is zeroed.
pub fn compress(s: &BlockCovariance, n: usize) -> Result<BlockCovariance> {
    if n == 0 || n > s.p {
        return Err(Error::BadTruncation { level: n, max: s.p });
    }
    let mut m = s.matrix.clone();
    for i in 0..s.d {
        for k in n..s.p {
            let idx = i * s.p + k;
            m.row_mut(idx).fill(0.0);
            m.column_mut(idx).fill(0.0);
        }
    }
    Ok(BlockCovariance::from_trusted(s.d, s.p, m))
}

/// `L S Lᵀ` as a covariance without component structure.
pub fn push_forward(l: &DMatrix<f64>, s: &BlockCovariance) -> Result<BlockCovariance> {
    if l.ncols() != s.dim() {
        return shape_err(format!(
            "map has {} columns, covariance dim is {}",
            l.ncols(),
            s.dim()
        ));
    }
    let out = linalg::symmetrized(&(l * s.matrix() * l.transpose()));
    let r = out.nrows();
    Ok(BlockCovariance::from_trusted(1, r, out))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DenseSubsetCheck {
    pub passed: bool,
    /// Rank of the test family; the check certifies domination only at full rank.
    pub rank: usize,
    pub dim: usize,
    /// Largest `gᵀ SAp g − gᵀ SA g` over the family.
    pub worst_excess: f64,
}

/// Checks `gᵀ SAp g ≤ gᵀ SA g + tol` over a finite family of test vectors.
pub fn dense_subset_check(
    sa: &BlockCovariance,
    sap: &BlockCovariance,
    family: &[DVector<f64>],
    tol: f64,
) -> Result<DenseSubsetCheck> {
    if sa.dim() != sap.dim() {
        return shape_err("covariances have different dims");
    }
    let mut worst_excess = f64::NEG_INFINITY;
    for g in family {
        let excess = quadratic_form(sap, g)? - quadratic_form(sa, g)?;
        worst_excess = worst_excess.max(excess);
    }
    let rank = if family.is_empty() {
        0
    } else {
        let cols: Vec<_> = family.to_vec();
        DMatrix::from_columns(&cols).rank(1e-12 * (1.0 + family.iter().map(|g| g.norm()).fold(0.0, f64::max)))
    };
    Ok(DenseSubsetCheck {
        passed: worst_excess <= tol,
        rank,
        dim: sa.dim(),
        worst_excess: if family.is_empty() { 0.0 } else { worst_excess },
    })
}
