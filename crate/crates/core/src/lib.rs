//! Covariance-envelope minimax projection in finite dimensions.
//!
//! Sources are weighted ensembles of coefficient blocks on a finite measure
//! space. Their raw block second moments define a stability set under the
//! Loewner order; the quadratic cost of a linear reconstruction is maximized
//! over that set at the reference source, and minimized over operators through
//! the normal equation. The [`stationary`] module specializes everything to
//! periodic wide-sense-stationary sources filtered by LTI systems.

pub mod cost;
pub mod covariance;
pub mod elliptic;
pub mod envelope;
pub mod error;
pub mod linalg;
pub mod measure;
pub mod representation;
pub mod stationary;
pub mod synth;

pub use cost::{
    assemble_normal_equations, cost, cost_decomposed, cost_difference_bound, residual_map, solution_set,
    solve_coercive, solve_pseudoinverse, solve_pseudoinverse_with, source_energy, CostDecomposition, HSOperator, Minimizer,
    MinimizerReport, NormalEquationSystem, SolutionSet,
};
pub use covariance::{
    compress, dense_subset_check, difference_spectrum, loewner_dominates, push_forward, quadratic_form,
    BlockCovariance, Domination,
};
pub use elliptic::{build_elliptic_representation, EllipticConfig, Observable, Profile};
pub use envelope::{
    closure_regression, fit_baseline, is_member, sample_dominated, verify_extremal,
    verify_extremal_with_floor,
    ClosureReport, EnvelopeReport,
};
pub use error::{Error, Result};
pub use measure::{
    cross_moment, second_moment, validate_baseline, BaselineEnsemble, BaselineSpec, MeasureSpace,
    SourceEnsemble, ValidationReport,
};
pub use representation::{
    apply, observed_second_moments, truncate, truncation_residual, ObservedEnsemble,
    ObservedMoments, RepresentationOperator, TruncatedRepresentation, TruncationResidual,
};
pub use stationary::{
    add_baseline_spectrum, circulant_oracle, grid_frequency, lti_blocks, spectral_density, wiener_symbol,
    wss_envelope_test, CovarianceSequence, LTIModel, OracleOutcome, OracleReport,
    SpectralDensity, SpectralTriple, WienerSymbol, WssEnvelopeResult,
};

pub use nalgebra::{DMatrix, DVector};
pub use num_complex::Complex64;
