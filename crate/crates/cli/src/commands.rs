use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};
use spade_core::information::{
    advantage_ratio, di_relative_entropy, parity_c01, quantum_relative_entropy, spade_relative_entropy_approx,
    spade_relative_entropy_exact,
};
use spade_core::simulate::{replicate_experiment, ExperimentReport, PhotonBudget, TrialBatch};
use spade_core::testing::{self, decide, rate_stderr, Decision, TestSpec, ThresholdSource};
use spade_core::{Crosstalk, Scene};

use crate::config::{EntropySweepConfig, SimulateConfig};
use crate::counts::{read_counts, write_counts, CountsFile, CountsRecord};
use crate::error::{CliError, CliResult};
use crate::output::{fmt_float, fmt_opt, write_csv, write_json};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const ENTROPY_COLUMNS: [&str; 9] = [
    "epsilon",
    "d_a",
    "C10",
    "C01",
    "D_Q",
    "D_DI",
    "D_SD_exact",
    "D_SD_approx",
    "advantage_ratio",
];

pub const RESULT_COLUMNS: [&str; 8] = [
    "epsilon",
    "d_a",
    "beta_hat",
    "beta_stderr",
    "beta_theory",
    "beta_di_theory",
    "n_star",
    "alpha_hat",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntropyRow {
    pub epsilon: f64,
    pub d_a: f64,
    pub c10: f64,
    pub c01: f64,
    pub d_q: Option<f64>,
    pub d_di: Option<f64>,
    pub d_sd_exact: Option<f64>,
    pub d_sd_approx: Option<f64>,
    pub advantage_ratio: Option<f64>,
}

/// Every `(epsilon, d_a, C10, C01)` combination; cells outside an
/// expression's regime are `None` (`NaN` in the CSV).
pub fn entropy_rows(cfg: &EntropySweepConfig) -> CliResult<Vec<EntropyRow>> {
    let r = cfg.resolve()?;
    let mut rows = Vec::new();
    for &e in &r.epsilon {
        for &d in &r.d_a {
            let scene = Scene::new(e, d, 0.0, r.formulation, r.alignment)?;
            for &c10 in &r.c10 {
                for &c01 in r.c01.as_deref().unwrap_or(&[c10]) {
                    let ct = Crosstalk::from_leakage(c10, c01)?;
                    rows.push(EntropyRow {
                        epsilon: e,
                        d_a: d,
                        c10,
                        c01,
                        d_q: quantum_relative_entropy(&scene).ok(),
                        d_di: di_relative_entropy(&scene).ok(),
                        d_sd_exact: spade_relative_entropy_exact(&scene, &ct).ok(),
                        d_sd_approx: spade_relative_entropy_approx(&scene, &ct).ok(),
                        advantage_ratio: advantage_ratio(&ct).ok(),
                    });
                }
            }
        }
    }
    Ok(rows)
}

pub fn cmd_entropy_sweep(cfg: &EntropySweepConfig) -> CliResult<Value> {
    let rows = entropy_rows(cfg)?;
    let contour: Option<Vec<(f64, Option<f64>)>> = cfg
        .contour_output
        .as_ref()
        .map(|_| cfg.c10.values("c10").map(|cs| cs.into_iter().map(|c| (c, parity_c01(c))).collect()))
        .transpose()?;
    write_csv(
        &cfg.output,
        &ENTROPY_COLUMNS,
        rows.iter().map(|r| {
            vec![
                fmt_float(r.epsilon),
                fmt_float(r.d_a),
                fmt_float(r.c10),
                fmt_float(r.c01),
                fmt_opt(r.d_q),
                fmt_opt(r.d_di),
                fmt_opt(r.d_sd_exact),
                fmt_opt(r.d_sd_approx),
                fmt_opt(r.advantage_ratio),
            ]
        }),
    )?;
    if let (Some(path), Some(points)) = (&cfg.contour_output, &contour) {
        write_csv(
            path,
            &["C10", "C01"],
            points.iter().map(|&(c10, c01)| vec![fmt_float(c10), fmt_opt(c01)]),
        )?;
    }
    Ok(json!({
        "command": "entropy-sweep",
        "rows": rows.len(),
        "output": cfg.output,
        "contour_output": cfg.contour_output,
        "version": VERSION,
    }))
}

#[derive(Debug, Clone, Serialize)]
struct ResultRow {
    epsilon: f64,
    d_a: f64,
    expected_photons: f64,
    beta_hat: f64,
    beta_stderr: f64,
    beta_theory: Option<f64>,
    beta_di_theory: Option<f64>,
    n_star: u64,
    alpha_hat: f64,
}

fn source_name(s: ThresholdSource) -> &'static str {
    match s {
        ThresholdSource::Analytic => "analytic",
        ThresholdSource::Calibrated => "calibrated",
    }
}

fn batch_records(batch: &TrialBatch, photons: &PhotonBudget, window: &str, label: Option<(f64, f64)>) -> Vec<CountsRecord> {
    batch
        .counts_n1()
        .iter()
        .enumerate()
        .map(|(rep, &n1)| CountsRecord {
            rep: rep as u64,
            window: window.to_string(),
            n1,
            n_total: Some(match (batch.counts_total(), photons) {
                (Some(t), _) => t[rep],
                (None, PhotonBudget::FixedN(n)) => *n,
                (None, _) => unreachable!("window batches carry totals"),
            }),
            label,
        })
        .collect()
}

/// Runs the experiment protocol on a rayon pool of `threads` workers (the
/// global pool when `None`). Output bytes do not depend on `threads`.
pub fn run_protocol(cfg: &SimulateConfig, threads: Option<usize>) -> CliResult<ExperimentReport> {
    let protocol = cfg.resolve()?;
    match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(|| replicate_experiment(&protocol))?)
        }
        None => Ok(replicate_experiment(&protocol)?),
    }
}

pub fn cmd_simulate(cfg: &SimulateConfig, threads: Option<usize>) -> CliResult<Value> {
    let start = Instant::now();
    let report = run_protocol(cfg, threads)?;
    let photons = cfg.photons.budget()?;
    let rows: Vec<ResultRow> = report
        .rows
        .iter()
        .map(|r| ResultRow {
            epsilon: r.epsilon,
            d_a: r.d_a,
            expected_photons: r.expected_photons,
            beta_hat: r.beta_hat,
            beta_stderr: r.beta_stderr,
            beta_theory: r.beta_theory,
            beta_di_theory: r.beta_di_theory,
            n_star: r.n_star,
            alpha_hat: report.alpha_hat,
        })
        .collect();

    write_csv(
        &cfg.output.results,
        &RESULT_COLUMNS,
        rows.iter().map(|r| {
            vec![
                fmt_float(r.epsilon),
                fmt_float(r.d_a),
                fmt_float(r.beta_hat),
                fmt_float(r.beta_stderr),
                fmt_opt(r.beta_theory),
                fmt_opt(r.beta_di_theory),
                r.n_star.to_string(),
                fmt_float(r.alpha_hat),
            ]
        }),
    )?;
    if let Some(path) = &cfg.output.counts {
        let records = report
            .rows
            .iter()
            .zip(&report.batches)
            .flat_map(|(row, batch)| batch_records(batch, &photons, "h1", Some((row.epsilon, row.d_a))))
            .collect();
        write_counts(path, &CountsFile { records, has_total: true, has_labels: true })?;
    }
    if let (Some(path), Some(batch)) = (&cfg.output.calibration, &report.calibration) {
        let records = batch_records(batch, &photons, "calibration", None);
        write_counts(path, &CountsFile { records, has_total: true, has_labels: false })?;
    }

    let summary = json!({
        "config": cfg,
        "seed": cfg.seed,
        "results": {
            "n_star": report.n_star,
            "threshold_source": source_name(report.threshold_source),
            "c_theory": report.c_theory,
            "alpha_hat": report.alpha_hat,
            "alpha_stderr": report.alpha_stderr,
            "rows": rows,
        },
        "runtime_ms": start.elapsed().as_millis() as u64,
        "version": VERSION,
    });
    if let Some(path) = &cfg.output.summary {
        write_json(path, &summary)?;
    }
    Ok(summary)
}

#[derive(Debug, Clone, Default)]
pub struct TestArgs {
    pub counts: PathBuf,
    pub alpha: f64,
    pub calibration: Option<PathBuf>,
    pub c10: Option<f64>,
    pub c01: Option<f64>,
    pub n_total: Option<u64>,
}

#[derive(Debug, Clone, Serialize)]
struct VerdictRow {
    rep: u64,
    window: String,
    n1: u64,
    decision: &'static str,
}

#[derive(Debug, Clone, Serialize)]
struct GroupRow {
    epsilon: Option<f64>,
    d_a: Option<f64>,
    trials: usize,
    accepted_h0: usize,
    beta_hat: f64,
    beta_stderr: f64,
}

fn check_alpha(alpha: f64) -> CliResult<()> {
    if !(alpha > 0.0 && alpha <= 0.5) {
        return Err(CliError::Config(format!("alpha = {alpha} must lie in (0, 1/2]")));
    }
    Ok(())
}

/// Threshold from a calibration file if given, else from the analytic
/// formula at the given crosstalk and photon number.
fn threshold_spec(args: &TestArgs) -> CliResult<TestSpec<f64>> {
    check_alpha(args.alpha)?;
    if let Some(cal) = &args.calibration {
        let file = read_counts(cal)?;
        return Ok(TestSpec::calibrated(&file.n1(), args.alpha)?);
    }
    match (args.c10, args.n_total) {
        (Some(c10), Some(n)) => {
            let ct = Crosstalk::from_leakage(c10, args.c01.unwrap_or(c10))?;
            Ok(TestSpec::analytic(n, &ct, args.alpha)?)
        }
        _ => Err(CliError::MissingThresholdSource),
    }
}

pub fn cmd_test(args: &TestArgs) -> CliResult<Value> {
    let spec = threshold_spec(args)?;
    let data = read_counts(&args.counts)?;
    let verdicts: Vec<VerdictRow> = data
        .records
        .iter()
        .map(|r| VerdictRow {
            rep: r.rep,
            window: r.window.clone(),
            n1: r.n1,
            decision: decide(r.n1, &spec).decision.as_str(),
        })
        .collect();
    let groups: Vec<GroupRow> = data
        .groups()
        .iter()
        .map(|g| {
            let accepted = g
                .rows
                .iter()
                .filter(|&&i| decide(data.records[i].n1, &spec).decision == Decision::H0)
                .count();
            let beta = accepted as f64 / g.rows.len() as f64;
            GroupRow {
                epsilon: g.label.map(|l| l.0),
                d_a: g.label.map(|l| l.1),
                trials: g.rows.len(),
                accepted_h0: accepted,
                beta_hat: beta,
                beta_stderr: rate_stderr(beta, g.rows.len()),
            }
        })
        .collect();
    Ok(json!({
        "alpha": args.alpha,
        "n_star": spec.n_star(),
        "threshold_source": source_name(spec.source()),
        "verdicts": verdicts,
        "groups": groups,
        "version": VERSION,
    }))
}

#[derive(Debug, Clone, Default)]
pub struct EstimateArgs {
    pub counts: Option<PathBuf>,
    pub n_star: Option<f64>,
    pub n_total: Option<f64>,
    pub alpha: f64,
}

fn mean_total(file: &CountsFile, path: &Path) -> CliResult<f64> {
    if !file.has_total || file.records.is_empty() {
        return Err(CliError::Config(format!(
            "{} has no n_total column; pass the photon number explicitly",
            path.display()
        )));
    }
    let sum: u64 = file.records.iter().filter_map(|r| r.n_total).sum();
    Ok(sum as f64 / file.records.len() as f64)
}

/// Crosstalk implied by a measured threshold: either given directly or taken
/// as the calibrated percentile of H0 counts.
pub fn cmd_estimate_crosstalk(args: &EstimateArgs) -> CliResult<Value> {
    check_alpha(args.alpha)?;
    let (n_star, file) = match (&args.counts, args.n_star) {
        (Some(path), None) => {
            let file = read_counts(path)?;
            (testing::calibrated_threshold(&file.n1(), args.alpha)? as f64, Some((file, path)))
        }
        (None, Some(t)) => (t, None),
        _ => return Err(CliError::Config("give exactly one of a counts file or a threshold".into())),
    };
    let n = match (args.n_total, &file) {
        (Some(n), _) => n,
        (None, Some((f, p))) => mean_total(f, p)?,
        (None, None) => return Err(CliError::Config("photon number required with an explicit threshold".into())),
    };
    let est = testing::invert_threshold(n_star, n, args.alpha)?;
    Ok(json!({
        "n_star": n_star,
        "n_total": n,
        "alpha": args.alpha,
        "c10": est.c10,
        "degenerate": est.degenerate,
        "version": VERSION,
    }))
}
