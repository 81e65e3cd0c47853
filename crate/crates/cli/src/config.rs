//! JSON experiment configuration. One flat schema for all kinds; the fields a
//! kind needs are checked by [`ExperimentConfig::validate`] before any work.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use envmm_core::EllipticConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    EnvelopeCheck,
    Minimize,
    VerifyExtremal,
    WssEnvelope,
    WssFilter,
    EllipticDemo,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::EnvelopeCheck => "envelope_check",
            Kind::Minimize => "minimize",
            Kind::VerifyExtremal => "verify_extremal",
            Kind::WssEnvelope => "wss_envelope",
            Kind::WssFilter => "wss_filter",
            Kind::EllipticDemo => "elliptic_demo",
        }
    }

    fn default_tol(self) -> f64 {
        match self {
            Kind::Minimize | Kind::EllipticDemo => 1e-8,
            Kind::WssFilter => 1e-6,
            _ => 1e-9,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomEnsemble {
    pub atoms: usize,
    pub d: usize,
    pub p: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineEnsemble {
    pub weights: Vec<f64>,
    pub d: usize,
    pub p: usize,
    /// One row per atom, `d·p` values in component-major order.
    pub values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleInput {
    Random(RandomEnsemble),
    Csv(PathBuf),
    Inline(InlineEnsemble),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateInput {
    /// Dominated member drawn from the source with the run seed.
    Sample {
        #[serde(default)]
        shrink_floor: f64,
    },
    Scaled(f64),
    Ensemble(EnsembleInput),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineInput {
    #[default]
    Zero,
    Random {
        rank: usize,
    },
    Matrix(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineOperator {
    pub s1: Vec<Vec<f64>>,
    pub s2: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorInput {
    Random { p_out: usize, q: usize },
    Csv(PathBuf),
    Inline(InlineOperator),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetsInput {
    Random {
        count: usize,
        #[serde(default = "one")]
        scale: f64,
    },
    Inline(Vec<Vec<Vec<f64>>>),
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverInput {
    Coercive { c_min: f64 },
    Pseudoinverse { rank_tol: f64 },
}

impl Default for SolverInput {
    fn default() -> Self {
        SolverInput::Pseudoinverse { rank_tol: 1e-12 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceInput {
    /// Taps `G_0..G_L` of a vector moving average.
    MovingAverage(Vec<Vec<Vec<f64>>>),
    /// `K[0..L]` directly.
    Lags(Vec<Vec<Vec<f64>>>),
    Csv(PathBuf),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterInput {
    pub h: Vec<f64>,
    pub phi: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub out: Option<PathBuf>,
    pub source: Option<EnsembleInput>,
    pub candidate: Option<CandidateInput>,
    #[serde(default)]
    pub baseline: BaselineInput,
    pub operator: Option<OperatorInput>,
    pub targets: Option<TargetsInput>,
    pub samples: Option<usize>,
    #[serde(default)]
    pub shrink_floor: f64,
    #[serde(default)]
    pub solver: SolverInput,
    pub sequence: Option<SequenceInput>,
    pub reference: Option<SequenceInput>,
    pub n_f: Option<usize>,
    pub filter: Option<FilterInput>,
    pub elliptic: Option<EllipticConfig>,
    #[serde(default)]
    pub refinement: Vec<usize>,
    /// Directory that relative CSV paths resolve against; set on load.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text)
            .with_context(|| format!("invalid config {}", path.display()))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn tol(&self) -> f64 {
        self.tol.unwrap_or_else(|| self.kind.default_tol())
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    fn uses_randomness(&self) -> bool {
        matches!(self.kind, Kind::VerifyExtremal | Kind::WssFilter)
            || matches!(self.source, Some(EnsembleInput::Random(_)))
            || matches!(self.candidate, Some(CandidateInput::Sample { .. }))
            || matches!(self.candidate, Some(CandidateInput::Ensemble(EnsembleInput::Random(_))))
            || !matches!(self.baseline, BaselineInput::Zero)
            || matches!(self.operator, Some(OperatorInput::Random { .. }))
            || matches!(self.targets, Some(TargetsInput::Random { .. }))
    }

    /// Kind-specific required fields, reported by name.
    pub fn validate(&self) -> anyhow::Result<()> {
        let kind = self.kind.name();
        let require = |present: bool, field: &str| -> anyhow::Result<()> {
            if !present {
                bail!("config field `{field}` is required for kind `{kind}`");
            }
            Ok(())
        };
        match self.kind {
            Kind::EnvelopeCheck => {
                require(self.source.is_some(), "source")?;
                require(self.candidate.is_some(), "candidate")?;
            }
            Kind::Minimize => {
                require(self.source.is_some(), "source")?;
                require(self.operator.is_some(), "operator")?;
            }
            Kind::VerifyExtremal => {
                require(self.source.is_some(), "source")?;
                require(self.operator.is_some(), "operator")?;
                require(self.targets.is_some(), "targets")?;
            }
            Kind::WssEnvelope => {
                require(self.reference.is_some(), "reference")?;
                require(self.sequence.is_some(), "sequence")?;
                require(self.n_f.is_some(), "n_f")?;
            }
            Kind::WssFilter => {
                require(self.sequence.is_some(), "sequence")?;
                require(self.filter.is_some(), "filter")?;
                require(self.n_f.is_some(), "n_f")?;
            }
            Kind::EllipticDemo => require(self.elliptic.is_some(), "elliptic")?,
        }
        if self.uses_randomness() {
            require(self.seed.is_some(), "seed")?;
        }
        if !(self.tol().is_finite() && self.tol() >= 0.0) {
            bail!("config field `tol` must be a finite nonnegative number");
        }
        Ok(())
    }
}
