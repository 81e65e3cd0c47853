//! One pipeline per config kind. Each returns the report body, the plot series
//! and the summary table; numbers come straight from core operations.

use anyhow::{Context, Result};
use envmm_core::{
    apply, assemble_normal_equations, build_elliptic_representation, circulant_oracle,
    cost_decomposed, difference_spectrum, fit_baseline, grid_frequency, is_member,
    sample_dominated, second_moment, solve_coercive, solve_pseudoinverse_with, spectral_density,
    verify_extremal_with_floor, wss_envelope_test, BaselineSpec, DMatrix, Error, LTIModel,
    OracleOutcome, RepresentationOperator, SourceEnsemble,
};
use serde_json::{json, Value};

use crate::config::{CandidateInput, ExperimentConfig, Kind, SolverInput};
use crate::inputs::{self, run_rng};
use crate::summary::{Cell, Series, Summary};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    EnvelopeViolation,
    NoMinimizer,
    NotCoercive,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::EnvelopeViolation => "envelope_violation",
            Status::NoMinimizer => "no_minimizer",
            Status::NotCoercive => "not_coercive",
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            _ => 2,
        }
    }
}

pub struct Outcome {
    pub status: Status,
    pub result: Value,
    pub series: Series,
    pub summary: Summary,
}

pub fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    match cfg.kind {
        Kind::EnvelopeCheck => envelope_check(cfg),
        Kind::Minimize => minimize(cfg),
        Kind::VerifyExtremal => verify_extremal(cfg),
        Kind::WssEnvelope => wss_envelope(cfg),
        Kind::WssFilter => wss_filter(cfg),
        Kind::EllipticDemo => elliptic_demo(cfg),
    }
}

/// Present only after `validate`.
fn seed(cfg: &ExperimentConfig) -> u64 {
    cfg.seed.unwrap_or(0)
}

fn envelope_check(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut rng = run_rng(cfg);
    let a = inputs::ensemble(cfg, cfg.source.as_ref().expect("validated"), &mut rng, "source")?;
    let candidate = match cfg.candidate.as_ref().expect("validated") {
        CandidateInput::Sample { shrink_floor } => sample_dominated(&a, seed(cfg), 1, *shrink_floor)?.remove(0),
        CandidateInput::Scaled(c) => a.scaled(*c),
        CandidateInput::Ensemble(e) => inputs::ensemble(cfg, e, &mut rng, "candidate.ensemble")?,
    };
    let membership = is_member(&candidate, &a, cfg.tol()).context("membership test")?;
    let spectrum = difference_spectrum(&second_moment(&a), &second_moment(&candidate))?;

    let mut series = Series::new(&["index", "eigenvalue"]);
    let mut summary = Summary::new(&["index", "eigenvalue"]);
    for (i, v) in spectrum.iter().enumerate() {
        series.push(vec![Cell::Int(i), Cell::Num(*v)]);
        summary.push(vec![Cell::Int(i), Cell::Num(*v)]);
    }
    summary.scalar("member", Cell::Bool(membership.dominates));
    summary.scalar("lambda_min", Cell::Num(membership.lambda_min));

    Ok(Outcome {
        status: if membership.dominates { Status::Ok } else { Status::EnvelopeViolation },
        result: json!({
            "member": membership.dominates,
            "lambda_min": membership.lambda_min,
            "difference_spectrum": spectrum,
        }),
        series,
        summary,
    })
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Fits the baseline, assembles the normal equation and solves it.
fn solve(
    cfg: &ExperimentConfig,
    a: &SourceEnsemble,
    spec: &BaselineSpec,
    s: &RepresentationOperator,
) -> Result<Outcome> {
    let (expanded, xi) = fit_baseline(a, spec, seed(cfg))?;
    let sys = assemble_normal_equations(&apply(s, &expanded, Some(&xi))?);
    let solved = match cfg.solver {
        SolverInput::Coercive { c_min } => solve_coercive(&sys, c_min),
        SolverInput::Pseudoinverse { rank_tol } => solve_pseudoinverse_with(&sys, rank_tol, cfg.tol()),
    };
    let mut series = Series::new(&["row", "col", "value"]);
    let mut summary = Summary::new(&["row", "col", "value"]);
    match solved {
        Ok(sol) => {
            let lambda = sol.operator.lambda();
            for i in 0..lambda.nrows() {
                for j in 0..lambda.ncols() {
                    series.push(vec![Cell::Int(i), Cell::Int(j), Cell::Num(lambda[(i, j)])]);
                    summary.push(vec![Cell::Int(i), Cell::Int(j), Cell::Num(lambda[(i, j)])]);
                }
            }
            let decomposition = cost_decomposed(a, spec, s, &sol.operator)?;
            let r = &sol.report;
            summary.scalar("residual", Cell::Num(r.residual));
            summary.scalar("kernel_dim", Cell::Int(r.kernel_dim));
            summary.scalar("unique", Cell::Bool(r.unique));
            summary.scalar("coercivity_margin", Cell::Num(r.coercivity_margin));
            summary.scalar("hs_norm", Cell::Num(r.hs_norm));
            summary.scalar("cost", Cell::Num(r.cost));
            Ok(Outcome {
                status: Status::Ok,
                result: json!({
                    "no_minimizer": false,
                    "minimizer": sol.report,
                    "lambda": rows(lambda),
                    "decomposition": decomposition,
                }),
                series,
                summary,
            })
        }
        Err(Error::NoMinimizer { range_violation }) => {
            summary.scalar("no_minimizer", Cell::Bool(true));
            summary.scalar("range_violation", Cell::Num(range_violation));
            Ok(Outcome {
                status: Status::NoMinimizer,
                result: json!({ "no_minimizer": true, "range_violation": range_violation }),
                series,
                summary,
            })
        }
        Err(Error::NotCoercive { lambda_min, c_min }) => {
            summary.scalar("not_coercive", Cell::Bool(true));
            summary.scalar("lambda_min", Cell::Num(lambda_min));
            summary.scalar("c_min", Cell::Num(c_min));
            Ok(Outcome {
                status: Status::NotCoercive,
                result: json!({
                    "no_minimizer": false,
                    "not_coercive": true,
                    "lambda_min": lambda_min,
                    "c_min": c_min,
                }),
                series,
                summary,
            })
        }
        Err(e) => Err(e.into()),
    }
}

fn minimize(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut rng = run_rng(cfg);
    let a = inputs::ensemble(cfg, cfg.source.as_ref().expect("validated"), &mut rng, "source")?;
    let spec = inputs::baseline(&cfg.baseline, a.d(), a.p(), &mut rng)?;
    let s = inputs::operator(cfg, cfg.operator.as_ref().expect("validated"), a.d(), a.p(), &mut rng)?;
    solve(cfg, &a, &spec, &s)
}

fn verify_extremal(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut rng = run_rng(cfg);
    let a = inputs::ensemble(cfg, cfg.source.as_ref().expect("validated"), &mut rng, "source")?;
    let spec = inputs::baseline(&cfg.baseline, a.d(), a.p(), &mut rng)?;
    let s = inputs::operator(cfg, cfg.operator.as_ref().expect("validated"), a.d(), a.p(), &mut rng)?;
    let ts = inputs::targets(cfg.targets.as_ref().expect("validated"), s.p_out(), s.q(), &mut rng)?;
    let tol = cfg.tol();
    let reports = verify_extremal_with_floor(
        &a,
        &spec,
        &s,
        &ts,
        seed(cfg),
        cfg.samples.unwrap_or(20),
        tol,
        cfg.shrink_floor,
    )?;
    let passes: Vec<bool> = reports.iter().map(|r| r.passes(tol)).collect();
    let relative: Vec<f64> = reports.iter().map(|r| r.relative_violation()).collect();

    let mut series = Series::new(&["target", "sample", "cost", "margin"]);
    let mut summary = Summary::new(&["target", "sample", "cost", "margin"]);
    for (t, r) in reports.iter().enumerate() {
        for ((id, c), (_, margin)) in r.cost_samples.iter().zip(r.sample_margins()) {
            let row = vec![Cell::Int(t), Cell::Int(*id), Cell::Num(*c), Cell::Num(margin)];
            series.push(row.clone());
            summary.push(row);
        }
    }
    summary.scalar("targets", Cell::Int(reports.len()));
    summary.scalar("all_pass", Cell::Bool(passes.iter().all(|p| *p)));
    for (t, r) in reports.iter().enumerate() {
        summary.scalar(&format!("max_violation[{t}]"), Cell::Num(r.max_violation));
    }

    Ok(Outcome {
        status: if passes.iter().all(|p| *p) { Status::Ok } else { Status::EnvelopeViolation },
        result: json!({
            "reports": reports,
            "passes": passes,
            "relative_violation": relative,
        }),
        series,
        summary,
    })
}

fn wss_envelope(cfg: &ExperimentConfig) -> Result<Outcome> {
    let reference = inputs::sequence(cfg, cfg.reference.as_ref().expect("validated"), "reference")?;
    let candidate = inputs::sequence(cfg, cfg.sequence.as_ref().expect("validated"), "sequence")?;
    let n_f = cfg.n_f.expect("validated");
    let res = wss_envelope_test(
        &spectral_density(&reference, n_f)?,
        &spectral_density(&candidate, n_f)?,
        cfg.tol(),
    )?;

    let mut series = Series::new(&["freq_index", "frequency", "lambda_min"]);
    let mut summary = Summary::new(&["freq_index", "frequency", "lambda_min"]);
    for (r, l) in res.lambda_min.iter().enumerate() {
        let row = vec![Cell::Int(r), Cell::Num(grid_frequency(r, n_f)), Cell::Num(*l)];
        series.push(row.clone());
        summary.push(row);
    }
    summary.scalar("dominated", Cell::Bool(res.dominated));
    summary.scalar("worst_index", Cell::Int(res.worst_index));
    summary.scalar("worst_frequency", Cell::Num(res.worst_frequency));
    summary.scalar("worst_lambda_min", Cell::Num(res.worst_lambda_min));

    Ok(Outcome {
        status: if res.dominated { Status::Ok } else { Status::EnvelopeViolation },
        result: serde_json::to_value(&res)?,
        series,
        summary,
    })
}

fn wss_filter(cfg: &ExperimentConfig) -> Result<Outcome> {
    let seq = inputs::sequence(cfg, cfg.sequence.as_ref().expect("validated"), "sequence")?;
    let filter = cfg.filter.as_ref().expect("validated");
    let n = cfg.n_f.expect("validated");
    let model = LTIModel::from_impulse_responses(&filter.h, &filter.phi, n).context("`filter`")?;
    let report = circulant_oracle(&seq, &model, n, seed(cfg))?;
    let solved = report.outcome == OracleOutcome::Solved;

    let header = ["freq_index", "frequency", "tau_re", "tau_im", "time_re", "time_im", "flagged"];
    let mut series = Series::new(&header);
    for r in 0..n {
        let (tau, time) = (report.frequency_symbol[r], report.time_domain_symbol[r]);
        series.push(vec![
            Cell::Int(r),
            Cell::Num(grid_frequency(r, n)),
            Cell::Num(tau.re),
            Cell::Num(tau.im),
            Cell::Num(time.re),
            Cell::Num(time.im),
            Cell::Bool(report.flagged[r]),
        ]);
    }
    let mut summary = Summary::new(&[]);
    summary.scalar("outcome", Cell::Text(serde_json::to_value(report.outcome)?.as_str().unwrap_or_default().to_string()));
    summary.scalar("max_gap", Cell::Num(report.max_gap));
    summary.scalar("flagged_count", Cell::Int(report.flagged_count));
    summary.scalar("parseval_error", Cell::Num(report.parseval_error));
    summary.scalar("residual", Cell::Num(report.residual));
    summary.scalar("kernel_dim", Cell::Int(report.kernel_dim));

    Ok(Outcome {
        status: if solved { Status::Ok } else { Status::NoMinimizer },
        result: json!({
            "no_minimizer": !solved,
            "gap_within_tol": report.max_gap <= cfg.tol(),
            "oracle": report,
        }),
        series,
        summary,
    })
}

fn elliptic_demo(cfg: &ExperimentConfig) -> Result<Outcome> {
    let ecfg = cfg.elliptic.as_ref().expect("validated");
    let (s, provenance) = build_elliptic_representation(ecfg).context("`elliptic`")?;

    let mut levels = vec![(ecfg.n_x, provenance.clone())];
    for &n_x in &cfg.refinement {
        let refined = envmm_core::EllipticConfig { n_x, ..ecfg.clone() };
        let (_, prov) = build_elliptic_representation(&refined)
            .with_context(|| format!("`refinement` level n_x = {n_x}"))?;
        levels.push((n_x, prov));
    }

    let mut series = Series::new(&["n_x", "component", "gain"]);
    for (n_x, prov) in &levels {
        for (j, g) in prov.gains.iter().enumerate() {
            series.push(vec![Cell::Int(*n_x), Cell::Int(j), Cell::Num(*g)]);
        }
    }
    let refinement: Vec<Value> = levels
        .iter()
        .map(|(n_x, prov)| json!({ "n_x": n_x, "mesh_width": prov.mesh_width, "gains": prov.gains }))
        .collect();

    let (status, minimize, mut summary) = match &cfg.source {
        Some(input) => {
            let mut rng = run_rng(cfg);
            let a = inputs::ensemble(cfg, input, &mut rng, "source")?;
            s.check_source(&a).context("`source` must match the elliptic operator (d = profiles, p)")?;
            let spec = inputs::baseline(&cfg.baseline, a.d(), a.p(), &mut rng)?;
            let out = solve(cfg, &a, &spec, &s)?;
            (out.status, out.result, out.summary)
        }
        None => (Status::Ok, Value::Null, Summary::new(&[])),
    };
    summary.scalar("mesh_width", Cell::Num(provenance.mesh_width));
    summary.scalar("norm_bound", Cell::Num(s.norm_bound()));
    for (j, g) in provenance.gains.iter().enumerate() {
        summary.scalar(&format!("gain[{j}]"), Cell::Num(*g));
    }

    Ok(Outcome {
        status,
        result: json!({
            "provenance": provenance,
            "norm_bound": s.norm_bound(),
            "refinement": refinement,
            "minimize": minimize,
        }),
        series,
        summary,
    })
}
