//! Turns config inputs into core objects. Random inputs draw from one
//! seeded stream in a fixed order: source, candidate, baseline, operator, targets.

use std::fs::File;
use std::io::BufReader;

use anyhow::{bail, Context, Result};
use envmm_core::synth::{self, SynthRng};
use envmm_core::{
    BaselineSpec, CovarianceSequence, DMatrix, HSOperator, MeasureSpace, RepresentationOperator,
    SourceEnsemble,
};

use crate::config::{
    BaselineInput, EnsembleInput, ExperimentConfig, OperatorInput, SequenceInput, TargetsInput,
};

pub fn matrix(rows: &[Vec<f64>], field: &str) -> Result<DMatrix<f64>> {
    let n_cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != n_cols) {
        bail!("`{field}` rows must all have the same length");
    }
    Ok(DMatrix::from_fn(rows.len(), n_cols, |i, j| rows[i][j]))
}

pub fn open(cfg: &ExperimentConfig, path: &std::path::Path) -> Result<BufReader<File>> {
    let full = cfg.resolve(path);
    let file = File::open(&full).with_context(|| format!("cannot open {}", full.display()))?;
    Ok(BufReader::new(file))
}

/// Run RNG; configs without randomness never draw from it.
pub fn run_rng(cfg: &ExperimentConfig) -> SynthRng {
    synth::rng(cfg.seed.unwrap_or(0))
}

pub fn ensemble(
    cfg: &ExperimentConfig,
    input: &EnsembleInput,
    rng: &mut SynthRng,
    field: &str,
) -> Result<SourceEnsemble> {
    Ok(match input {
        EnsembleInput::Random(r) => {
            if r.atoms == 0 || r.d == 0 || r.p == 0 {
                bail!("`{field}.random` needs positive atoms, d and p");
            }
            synth::random_ensemble(rng, r.atoms, r.d, r.p)
        }
        EnsembleInput::Csv(path) => SourceEnsemble::read_csv(open(cfg, path)?)
            .with_context(|| format!("reading `{field}` from {}", path.display()))?,
        EnsembleInput::Inline(e) => {
            let space = MeasureSpace::new(e.weights.clone())
                .with_context(|| format!("`{field}.inline.weights`"))?;
            let values = matrix(&e.values, &format!("{field}.inline.values"))?;
            SourceEnsemble::new(space, e.d, e.p, values).with_context(|| format!("`{field}.inline`"))?
        }
    })
}

pub fn baseline(input: &BaselineInput, d: usize, p: usize, rng: &mut SynthRng) -> Result<BaselineSpec> {
    Ok(match input {
        BaselineInput::Zero => BaselineSpec::zero(d, p),
        BaselineInput::Random { rank } => {
            BaselineSpec::new(d, p, synth::random_psd(rng, d * p, *rank)).context("`baseline`")?
        }
        BaselineInput::Matrix(rows) => {
            BaselineSpec::new(d, p, matrix(rows, "baseline.matrix")?).context("`baseline`")?
        }
    })
}

pub fn operator(
    cfg: &ExperimentConfig,
    input: &OperatorInput,
    d: usize,
    p: usize,
    rng: &mut SynthRng,
) -> Result<RepresentationOperator> {
    let op = match input {
        OperatorInput::Random { p_out, q } => synth::random_operator(rng, d, p, *p_out, *q),
        OperatorInput::Csv(path) => RepresentationOperator::read_csv(open(cfg, path)?)
            .with_context(|| format!("reading `operator` from {}", path.display()))?,
        OperatorInput::Inline(o) => RepresentationOperator::new(
            d,
            p,
            matrix(&o.s1, "operator.inline.s1")?,
            matrix(&o.s2, "operator.inline.s2")?,
        )
        .context("`operator.inline`")?,
    };
    if op.d() != d || op.p() != p {
        bail!(
            "`operator` acts on d = {}, p = {} but the source has d = {d}, p = {p}",
            op.d(),
            op.p()
        );
    }
    Ok(op)
}

pub fn targets(input: &TargetsInput, p_out: usize, q: usize, rng: &mut SynthRng) -> Result<Vec<HSOperator>> {
    match input {
        TargetsInput::Random { count, scale } => {
            Ok((0..*count).map(|_| synth::random_hs(rng, p_out, q, *scale)).collect())
        }
        TargetsInput::Inline(list) => list
            .iter()
            .enumerate()
            .map(|(i, rows)| {
                let m = matrix(rows, &format!("targets.inline[{i}]"))?;
                if m.shape() != (p_out, q) {
                    bail!("`targets.inline[{i}]` must be {p_out}x{q}, got {}x{}", m.nrows(), m.ncols());
                }
                Ok(HSOperator::new(m)?)
            })
            .collect(),
    }
}

pub fn sequence(cfg: &ExperimentConfig, input: &SequenceInput, field: &str) -> Result<CovarianceSequence> {
    let mats = |list: &[Vec<Vec<f64>>]| -> Result<Vec<DMatrix<f64>>> {
        list.iter()
            .enumerate()
            .map(|(i, rows)| matrix(rows, &format!("{field}[{i}]")))
            .collect()
    };
    Ok(match input {
        SequenceInput::MovingAverage(taps) => {
            CovarianceSequence::from_moving_average(&mats(taps)?).with_context(|| format!("`{field}`"))?
        }
        SequenceInput::Lags(lags) => {
            let lags = mats(lags)?;
            let d = lags.first().map_or(0, DMatrix::nrows);
            CovarianceSequence::new(d, lags).with_context(|| format!("`{field}`"))?
        }
        SequenceInput::Csv(path) => CovarianceSequence::read_csv(open(cfg, path)?)
            .with_context(|| format!("reading `{field}` from {}", path.display()))?,
    })
}
