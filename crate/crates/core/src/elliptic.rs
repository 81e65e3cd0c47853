//! Representation built from a 1D Dirichlet problem `−z'' + q z = f` on `[0, 1]`.
//!
//! Each source component `j` drives the problem through a fixed spatial profile
//! `g_j`, so the observable `⟨G(Σ_j g_j u_j(t)), ℓ⟩` is linear in the time
//! coefficients of `u_j` with gain `c_j = ⟨G g_j, ℓ⟩`. The auxiliary block
//! aggregates `Σ_j α_j s_j u_j` with `Φ_j = s_j · I` on coefficients.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::representation::RepresentationOperator;

/// Spatial profile of one source component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Profile {
    /// Mollifier bump `ρ_δ(x − center)`, normalized to unit discrete mass.
    Bump { center: f64 },
    /// `g ≡ 1`.
    Flat,
}

/// The observable `ℓ`, sampled at interior grid nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    Constant(f64),
    Values(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipticConfig {
    /// Number of grid intervals; mesh width `1/n_x`.
    pub n_x: usize,
    /// Constant potential `q ≥ 0`.
    #[serde(default)]
    pub potential: f64,
    /// Bump half-width `δ`.
    pub bump_width: f64,
    /// One profile per component.
    pub profiles: Vec<Profile>,
    pub observable: Observable,
    /// Time-basis dimension.
    pub p: usize,
    /// Aggregation weights `α_j`.
    pub aggregation: Vec<f64>,
    /// Scales `s_j` of `Φ_j = s_j · I`; all ones when absent.
    #[serde(default)]
    pub phi_scales: Option<Vec<f64>>,
}

impl EllipticConfig {
    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::BadConfig(msg));
        if self.n_x < 2 {
            return bad(format!("n_x must be at least 2, got {}", self.n_x));
        }
        if !(self.potential.is_finite() && self.potential >= 0.0) {
            return bad(format!("potential must be >= 0, got {}", self.potential));
        }
        if !(self.bump_width.is_finite() && self.bump_width > 0.0) {
            return bad(format!("bump_width must be positive, got {}", self.bump_width));
        }
        if self.profiles.is_empty() {
            return bad("at least one profile is required".into());
        }
        if self.p == 0 {
            return bad("p must be positive".into());
        }
        let d = self.profiles.len();
        if self.aggregation.len() != d {
            return bad(format!("aggregation has {} weights for {d} profiles", self.aggregation.len()));
        }
        if let Some(s) = &self.phi_scales {
            if s.len() != d {
                return bad(format!("phi_scales has {} entries for {d} profiles", s.len()));
            }
        }
        if let Observable::Values(v) = &self.observable {
            if v.len() != self.n_x - 1 {
                return bad(format!(
                    "observable has {} values, expected n_x - 1 = {}",
                    v.len(),
                    self.n_x - 1
                ));
            }
        }
        for prof in &self.profiles {
            if let Profile::Bump { center } = prof {
                if !(*center > self.bump_width && *center < 1.0 - self.bump_width) {
                    return bad(format!(
                        "bump center {center} must keep distance > {} from the boundary",
                        self.bump_width
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Factorized tridiagonal system for the interior nodes, computed once.
#[derive(Debug, Clone)]
pub struct DirichletSolver {
    n_x: usize,
    /// Modified diagonal of the forward sweep.
    pivots: Vec<f64>,
    off: f64,
}

impl DirichletSolver {
    pub fn new(n_x: usize, potential: f64) -> Result<Self> {
        if n_x < 2 {
            return Err(Error::BadConfig(format!("n_x must be at least 2, got {n_x}")));
        }
        let h = 1.0 / n_x as f64;
        let diag = 2.0 / (h * h) + potential;
        let off = -1.0 / (h * h);
        let n = n_x - 1;
        let mut pivots = Vec::with_capacity(n);
        pivots.push(diag);
        for i in 1..n {
            pivots.push(diag - off * off / pivots[i - 1]);
        }
        Ok(Self { n_x, pivots, off })
    }

    pub fn mesh_width(&self) -> f64 {
        1.0 / self.n_x as f64
    }

    /// Interior nodes `x_i = i/n_x`, `i = 1..n_x−1`.
    pub fn nodes(&self) -> Vec<f64> {
        (1..self.n_x).map(|i| i as f64 * self.mesh_width()).collect()
    }

    /// Thomas algorithm on the stored factorization.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.pivots.len();
        assert_eq!(rhs.len(), n, "right-hand side must have n_x - 1 entries");
        let mut y = vec![0.0; n];
        y[0] = rhs[0];
        for i in 1..n {
            y[i] = rhs[i] - self.off / self.pivots[i - 1] * y[i - 1];
        }
        let mut z = vec![0.0; n];
        z[n - 1] = y[n - 1] / self.pivots[n - 1];
        for i in (0..n - 1).rev() {
            z[i] = (y[i] - self.off * z[i + 1]) / self.pivots[i];
        }
        z
    }

    /// Discrete pairing `h Σ_i z_i ℓ_i`.
    pub fn pair(&self, z: &[f64], ell: &[f64]) -> f64 {
        self.mesh_width() * z.iter().zip(ell).map(|(a, b)| a * b).sum::<f64>()
    }
}

fn mollifier(x: f64) -> f64 {
    if x.abs() < 1.0 {
        (-1.0 / (1.0 - x * x)).exp()
    } else {
        0.0
    }
}

fn profile_values(prof: &Profile, width: f64, solver: &DirichletSolver) -> Result<Vec<f64>> {
    let nodes = solver.nodes();
    match prof {
        Profile::Flat => Ok(vec![1.0; nodes.len()]),
        Profile::Bump { center } => {
            let raw: Vec<f64> = nodes.iter().map(|x| mollifier((x - center) / width)).collect();
            let mass = solver.mesh_width() * raw.iter().sum::<f64>();
            if mass <= 0.0 {
                return Err(Error::BadConfig(format!(
                    "bump of width {width} at {center} misses every grid node"
                )));
            }
            Ok(raw.into_iter().map(|v| v / mass).collect())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EllipticProvenance {
    pub mesh_width: f64,
    /// `c_j = ⟨G g_j, ℓ⟩` per component.
    pub gains: Vec<f64>,
    /// Discrete `‖g_j‖_{L²}` per component.
    pub profile_norms: Vec<f64>,
    /// Auxiliary weights `α_j s_j`.
    pub auxiliary_weights: Vec<f64>,
}

pub fn build_elliptic_representation(
    cfg: &EllipticConfig,
) -> Result<(RepresentationOperator, EllipticProvenance)> {
    cfg.validate()?;
    let solver = DirichletSolver::new(cfg.n_x, cfg.potential)?;
    let ell = match &cfg.observable {
        Observable::Constant(c) => vec![*c; cfg.n_x - 1],
        Observable::Values(v) => v.clone(),
    };
    let d = cfg.profiles.len();
    let p = cfg.p;
    let mut gains = Vec::with_capacity(d);
    let mut profile_norms = Vec::with_capacity(d);
    for prof in &cfg.profiles {
        let g = profile_values(prof, cfg.bump_width, &solver)?;
        let z = solver.solve(&g);
        gains.push(solver.pair(&z, &ell));
        profile_norms.push(solver.pair(&g, &g).sqrt());
    }
    let scales = cfg.phi_scales.clone().unwrap_or_else(|| vec![1.0; d]);
    let auxiliary_weights: Vec<f64> = cfg.aggregation.iter().zip(&scales).map(|(a, s)| a * s).collect();

    let mut s1 = DMatrix::zeros(p, d * p);
    let mut s2 = DMatrix::zeros(p, d * p);
    for j in 0..d {
        for k in 0..p {
            s1[(k, j * p + k)] = gains[j];
            s2[(k, j * p + k)] = auxiliary_weights[j];
        }
    }
    let op = RepresentationOperator::new(d, p, s1, s2)?;
    Ok((
        op,
        EllipticProvenance {
            mesh_width: solver.mesh_width(),
            gains,
            profile_norms,
            auxiliary_weights,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_config(n_x: usize) -> EllipticConfig {
        EllipticConfig {
            n_x,
            potential: 0.0,
            bump_width: 0.1,
            profiles: vec![Profile::Flat],
            observable: Observable::Constant(1.0),
            p: 2,
            aggregation: vec![1.0],
            phi_scales: None,
        }
    }

    #[test]
    fn solver_exact_for_quadratic_solution() {
        // −z'' = 1, z = x(1−x)/2 is reproduced exactly by the 3-point stencil
        let s = DirichletSolver::new(16, 0.0).unwrap();
        let z = s.solve(&[1.0; 15]);
        for (zi, x) in z.iter().zip(s.nodes()) {
            assert!((zi - x * (1.0 - x) / 2.0).abs() < 1e-13);
        }
    }

    #[test]
    fn solver_with_potential_satisfies_stencil() {
        let s = DirichletSolver::new(10, 3.0).unwrap();
        let f: Vec<f64> = (0..9).map(|i| (i as f64).sin()).collect();
        let z = s.solve(&f);
        let h2 = s.mesh_width().powi(2);
        for i in 0..9 {
            let left = if i > 0 { z[i - 1] } else { 0.0 };
            let right = if i < 8 { z[i + 1] } else { 0.0 };
            let lhs = (2.0 * z[i] - left - right) / h2 + 3.0 * z[i];
            assert!((lhs - f[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn flat_load_gain_approaches_one_twelfth() {
        let (op, prov) = build_elliptic_representation(&flat_config(32)).unwrap();
        let h = 1.0 / 32.0;
        // trapezoid rule on the exact nodal values: 1/12 − h²/12
        assert!((prov.gains[0] - (1.0 / 12.0 - h * h / 12.0)).abs() < 1e-14);
        assert_eq!(op.s1()[(0, 0)], prov.gains[0]);
        assert_eq!(op.s1()[(1, 1)], prov.gains[0]);
        assert_eq!(op.s1()[(0, 1)], 0.0);
    }

    #[test]
    fn zero_observable_gives_zero_target_block() {
        let mut cfg = flat_config(20);
        cfg.observable = Observable::Constant(0.0);
        cfg.profiles = vec![Profile::Bump { center: 0.3 }, Profile::Bump { center: 0.7 }];
        cfg.aggregation = vec![1.0, -0.5];
        let (op, _) = build_elliptic_representation(&cfg).unwrap();
        assert_eq!(op.s1().norm(), 0.0);
        assert_eq!(op.s2()[(1, 2 + 1)], -0.5);
    }

    #[test]
    fn bump_has_unit_discrete_mass() {
        let s = DirichletSolver::new(64, 0.0).unwrap();
        let g = profile_values(&Profile::Bump { center: 0.5 }, 0.2, &s).unwrap();
        assert!((s.mesh_width() * g.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn config_validation() {
        let mut cfg = flat_config(1);
        assert!(matches!(build_elliptic_representation(&cfg), Err(Error::BadConfig(_))));
        cfg.n_x = 10;
        cfg.bump_width = -1.0;
        assert!(build_elliptic_representation(&cfg).is_err());
        cfg.bump_width = 0.2;
        cfg.profiles = vec![Profile::Bump { center: 0.1 }];
        assert!(build_elliptic_representation(&cfg).is_err());
        cfg.profiles = vec![Profile::Bump { center: 0.5 }];
        cfg.aggregation = vec![];
        assert!(build_elliptic_representation(&cfg).is_err());
    }
}
