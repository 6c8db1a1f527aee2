use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use lpiopt_core::optimizer::{
    gd_run, lpi_gd_run, oracle_bound_eval, sgd_run, theory_schedule, RunOptions, RunReport, Schedule,
    ScheduleMode,
};
use lpiopt_core::{CountingOracle, Dataset, Error, Kernel, LossProblem};

use crate::config::{split_seed, ExperimentConfig, OptimizerSpec};
use crate::BenchError;

/// One row of the comparison table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub optimizer: String,
    /// `F(θ^T) - F_*`.
    pub eps_achieved: f64,
    /// Oracle calls over the whole run.
    pub gamma: u64,
    /// Oracle calls at the first iterate within `target_eps`.
    pub gamma_at_target: Option<u64>,
    pub wall_time_s: Option<f64>,
    pub log10_bound: Option<f64>,
}

pub const COMPARISON_HEADER: &str = "optimizer,eps_achieved,gamma,gamma_at_target,wall_time_s,log10_bound";

pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
    let mut out = String::from(COMPARISON_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{:.16e},{},{},{},{}\n",
            r.optimizer,
            r.eps_achieved,
            r.gamma,
            r.gamma_at_target.map(|g| g.to_string()).unwrap_or_default(),
            opt(r.wall_time_s),
            opt(r.log10_bound),
        ));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub files: Vec<String>,
    /// At least one run hit the runtime cap; its outputs are partial.
    pub truncated: bool,
    pub truncated_runs: Vec<String>,
}

/// What an experiment produced.
#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub output_dir: PathBuf,
    pub reports: Vec<(String, RunReport)>,
    pub rows: Vec<ComparisonRow>,
    pub manifest: Manifest,
}

struct Prepared {
    label: String,
    spec: OptimizerSpec,
    schedule: Option<Schedule>,
}

fn labels(specs: &[OptimizerSpec]) -> Vec<String> {
    let mut seen = std::collections::HashMap::<&str, usize>::new();
    specs
        .iter()
        .map(|s| {
            let k = seen.entry(s.name()).or_insert(0);
            *k += 1;
            if *k == 1 {
                s.name().to_string()
            } else {
                format!("{}-{}", s.name(), k)
            }
        })
        .collect()
}

fn map_core(e: Error) -> BenchError {
    match e {
        Error::GridCap { .. } => BenchError::Infeasible(e.to_string()),
        other => BenchError::Config(other.to_string()),
    }
}

/// Resolves schedules and checks every grid against the cap before any run.
fn prepare(
    cfg: &ExperimentConfig,
    problem: &LossProblem,
    data: &Dataset,
    theta0: &[f64],
    cap: u64,
) -> Result<Vec<Prepared>, BenchError> {
    let names = labels(&cfg.optimizers);
    let mut out = Vec::with_capacity(names.len());
    for (label, spec) in names.into_iter().zip(&cfg.optimizers) {
        let schedule = match spec {
            OptimizerSpec::LpiGd {
                iterations,
                m,
                h,
                l,
                kernel,
                ..
            } => {
                let k = Kernel::by_name(kernel).map_err(map_core)?;
                let s = match cfg.schedule_mode {
                    ScheduleMode::Practical => Schedule::practical(
                        m.expect("validated"),
                        h.expect("validated"),
                        l.expect("validated"),
                        iterations.expect("validated"),
                    )
                    .with_kernel(kernel),
                    ScheduleMode::Theory => {
                        let eps = cfg.target_eps.expect("validated");
                        let mut s = theory_schedule(problem, data, theta0, eps, &k, cap).map_err(map_core)?;
                        if let Some(t) = iterations {
                            s.t = *t;
                        }
                        s
                    }
                };
                s.check_feasible(problem.d(), cap).map_err(map_core)?;
                Some(s)
            }
            _ => None,
        };
        out.push(Prepared {
            label,
            spec: spec.clone(),
            schedule,
        });
    }
    Ok(out)
}

fn bound_for(
    cfg: &ExperimentConfig,
    problem: &LossProblem,
    data: &Dataset,
    report: &RunReport,
    spec: &OptimizerSpec,
) -> Option<f64> {
    let f_star = report.f_star?;
    let eps = cfg.target_eps.unwrap_or((report.final_f() - f_star).max(1e-12));
    let n = data.n() as f64;
    let v = match spec {
        OptimizerSpec::Gd { .. } => (n * (1.0 / eps).ln()).log10(),
        OptimizerSpec::Sgd { .. } => (1.0 / eps).log10(),
        OptimizerSpec::LpiGd { kernel, .. } => {
            let k = Kernel::by_name(kernel).ok()?;
            let gap = report.iterates.first()?.f - f_star;
            oracle_bound_eval(
                problem,
                &k,
                problem.p(),
                problem.d(),
                problem.eta(),
                problem.l(),
                eps,
                gap,
                data.n(),
            )
            .ok()?
            .log10_lpi
        }
    };
    v.is_finite().then_some(v)
}

fn write(dir: &Path, name: &str, contents: &str, files: &mut Vec<String>) -> Result<(), BenchError> {
    std::fs::write(dir.join(name), contents)
        .map_err(|e| BenchError::Config(format!("cannot write {}: {e}", dir.join(name).display())))?;
    files.push(name.to_string());
    Ok(())
}

/// Runs every configured optimizer and writes reports, the comparison table
/// and the manifest into the output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome, BenchError> {
    cfg.validate()?;
    let problem = cfg.problem.build().map_err(|e| BenchError::Config(format!("field `problem`: {e}")))?;
    let data = cfg.load_dataset()?;
    let theta0 = cfg.theta0.clone().unwrap_or_else(|| vec![0.0; problem.p()]);
    if theta0.len() != problem.p() {
        return Err(BenchError::Config(format!(
            "field `theta0`: length {} does not match p = {}",
            theta0.len(),
            problem.p()
        )));
    }
    let cap = cfg.grid_cap()?;
    let prepared = prepare(cfg, &problem, &data, &theta0, cap)?;
    let deadline = cfg
        .caps
        .max_runtime_secs
        .map(|s| Instant::now() + Duration::from_secs_f64(s.max(0.0)));

    let results: Vec<Result<(RunReport, f64), BenchError>> = prepared
        .par_iter()
        .map(|p| {
            let oracle = CountingOracle::new(problem.clone());
            let opts = RunOptions {
                audit: matches!(p.spec, OptimizerSpec::LpiGd { audit: true, .. } | OptimizerSpec::Gd { audit: true, .. }),
                target_eps: cfg.target_eps,
                deadline,
                record_every: match p.spec {
                    OptimizerSpec::Sgd { record_every, .. } => record_every.unwrap_or(1),
                    _ => 1,
                },
                grid_cap: Some(cap),
                config: serde_json::json!({
                    "problem": cfg.problem,
                    "optimizer": p.spec,
                    "schedule": p.schedule,
                    "seed": cfg.seed,
                }),
                ..Default::default()
            };
            let start = Instant::now();
            let report = match &p.spec {
                OptimizerSpec::LpiGd { .. } => {
                    lpi_gd_run(&oracle, &data, p.schedule.as_ref().expect("prepared"), &theta0, &opts)
                }
                OptimizerSpec::Gd { iterations, .. } => gd_run(&oracle, &data, *iterations, &theta0, &opts),
                OptimizerSpec::Sgd { iterations, sampling, .. } => sgd_run(
                    &oracle,
                    &data,
                    *iterations,
                    &theta0,
                    split_seed(cfg.seed, &p.label),
                    *sampling,
                    &opts,
                ),
            }
            .map_err(map_core)?;
            if report.final_count() != oracle.count() {
                return Err(BenchError::Config(format!(
                    "{}: report counts {} oracle calls, oracle saw {}",
                    p.label,
                    report.final_count(),
                    oracle.count()
                )));
            }
            Ok((report, start.elapsed().as_secs_f64()))
        })
        .collect();

    let dir = cfg.output_dir.clone();
    std::fs::create_dir_all(&dir)
        .map_err(|e| BenchError::Config(format!("cannot create {}: {e}", dir.display())))?;
    let mut files = Vec::new();
    let mut reports = Vec::new();
    let mut rows = Vec::new();
    let mut truncated_runs = Vec::new();
    for (p, res) in prepared.iter().zip(results) {
        let (report, secs) = res?;
        eprintln!("{}: {} iterations, {:.3} s", p.label, report.iterates.last().map_or(0, |r| r.t), secs);
        write(&dir, &format!("{}.json", p.label), &report.to_json().map_err(map_core)?, &mut files)?;
        write(&dir, &format!("{}.csv", p.label), &report.to_csv(), &mut files)?;
        if report.truncated {
            truncated_runs.push(p.label.clone());
        }
        let f_star = report.f_star.unwrap_or(f64::NAN);
        rows.push(ComparisonRow {
            optimizer: p.label.clone(),
            eps_achieved: report.final_f() - f_star,
            gamma: report.final_count(),
            gamma_at_target: cfg
                .target_eps
                .and_then(|eps| report.first_within(eps))
                .map(|r| r.oracle_count),
            wall_time_s: cfg.report_wall_time.then_some(secs),
            log10_bound: bound_for(cfg, &problem, &data, &report, &p.spec),
        });
        reports.push((p.label.clone(), report));
    }
    if rows.len() >= 2 {
        write(&dir, "comparison.csv", &comparison_csv(&rows), &mut files)?;
    }
    if let Some(prov) = data.provenance() {
        write(&dir, "provenance.json", &prov.to_json().map_err(map_core)?, &mut files)?;
    }
    let manifest = Manifest {
        config_hash: cfg.hash(),
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: cfg.seed,
        files: {
            let mut f = files.clone();
            f.push("MANIFEST.json".into());
            f
        },
        truncated: !truncated_runs.is_empty(),
        truncated_runs,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(dir.join("MANIFEST.json"), text)
        .map_err(|e| BenchError::Config(format!("cannot write manifest: {e}")))?;
    let outcome = ExperimentOutcome {
        output_dir: dir,
        reports,
        rows,
        manifest,
    };
    if outcome.manifest.truncated {
        return Err(BenchError::RuntimeCap(Box::new(outcome)));
    }
    Ok(outcome)
}
