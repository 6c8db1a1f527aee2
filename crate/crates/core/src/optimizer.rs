//! LPI-GD, exact gradient descent and SGD, with exact oracle accounting.
//!
//! LPI-GD queries the oracle on every point of a fixed grid `G_m` and
//! reconstructs the ERM gradient from interpolation weights computed once per
//! sample. Since the weights do not change across iterations, the per-sample
//! weights are also summed into a single grid weight vector, so an iteration
//! costs `m^d` oracle calls plus one dot product per parameter coordinate.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::interpolation::{
    theory_bandwidth_from_ln_m, theory_grid_size, theory_grid_size_ln, InterpConfig, LocalFit,
    LocalInterpolator, UniformGrid,
};
use crate::kernels::Kernel;
use crate::problems::{erm_gradient, erm_objective, CountingOracle, Dataset, LossProblem};
use crate::spectra::lambda_log;
use crate::{Error, Result};

/// Slack used when checking the unrolled inexact-descent inequality.
pub const BOUND_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleMode {
    Theory,
    Practical,
}

/// Iteration count, accuracy budget and grid for one LPI-GD run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub mode: ScheduleMode,
    #[serde(rename = "T")]
    pub t: usize,
    pub delta: f64,
    /// Points per axis; `None` when the theory value is not representable.
    pub m: Option<usize>,
    pub log10_m: f64,
    pub h: f64,
    pub ln_h: f64,
    pub l: u32,
    pub kernel: String,
    /// `m^d` is below the grid cap.
    pub feasible: bool,
}

impl Schedule {
    pub fn practical(m: usize, h: f64, l: u32, t: usize) -> Self {
        Self {
            mode: ScheduleMode::Practical,
            t,
            delta: f64::NAN,
            m: Some(m),
            log10_m: (m as f64).log10(),
            h,
            ln_h: h.ln(),
            l,
            kernel: "boxcar".into(),
            feasible: true,
        }
    }

    pub fn with_kernel(mut self, kernel: &str) -> Self {
        self.kernel = kernel.into();
        self
    }

    /// `m^d ≤ cap`, checked before any oracle query.
    pub fn check_feasible(&self, d: usize, cap: u64) -> Result<usize> {
        let m = match self.m {
            Some(m) if self.feasible => m,
            _ => {
                return Err(Error::GridCap {
                    points: 10f64.powf(d as f64 * self.log10_m),
                    cap,
                })
            }
        };
        UniformGrid::new(m, d, cap)?;
        Ok(m)
    }
}

/// `T = ceil(log((gap + p/(2μ))/ε) / log(σ/(σ-1)))`.
pub fn iteration_count(sigma: f64, gap: f64, p: usize, mu: f64, eps: f64) -> Result<usize> {
    if !(sigma > 1.0) {
        return Err(Error::Unsupported(format!(
            "theory schedule needs sigma = L1/mu > 1, got {sigma}"
        )));
    }
    if !(eps > 0.0) {
        return Err(Error::Input(format!("epsilon must be positive, got {eps}")));
    }
    let num = ((gap + p as f64 / (2.0 * mu)) / eps).ln();
    let den = (sigma / (sigma - 1.0)).ln();
    Ok((num / den).ceil().max(0.0) as usize)
}

/// `δ = (1 - 1/σ)^{T/2}`.
pub fn accuracy_budget(sigma: f64, t: usize) -> f64 {
    (1.0 - 1.0 / sigma).powf(t as f64 / 2.0)
}

/// Theory-mode schedule, with the grid and bandwidth carried in log-space.
pub fn theory_schedule(
    problem: &LossProblem,
    data: &Dataset,
    theta0: &[f64],
    eps: f64,
    kernel: &Kernel,
    cap: u64,
) -> Result<Schedule> {
    let sigma = problem.sigma();
    if !(sigma > 1.0) {
        return Err(Error::Unsupported(format!(
            "theory schedule needs sigma = L1/mu > 1, got {sigma}"
        )));
    }
    let f_star = problem.f_star(data)?;
    let gap = erm_objective(problem, data, theta0)? - f_star;
    let t = iteration_count(sigma, gap, problem.p(), problem.mu(), eps)?;
    let delta = accuracy_budget(sigma, t);
    let d = problem.d();
    let l = problem.l();
    let (b, c) = (kernel.lower(), kernel.upper());
    let size = theory_grid_size(delta, d, l, problem.eta(), problem.l2(), b, c, cap);
    let ln_m = theory_grid_size_ln(delta, d, l, problem.eta(), problem.l2(), b, c);
    let bw = match size.m {
        Some(m) => theory_bandwidth_from_ln_m((m as f64).ln(), d, l),
        None => theory_bandwidth_from_ln_m(ln_m, d, l),
    };
    Ok(Schedule {
        mode: ScheduleMode::Theory,
        t,
        delta,
        m: size.m.and_then(|m| usize::try_from(m).ok()),
        log10_m: size.log10_m,
        h: bw.h,
        ln_h: bw.ln_h,
        l,
        kernel: kernel.name().into(),
        feasible: size.feasible && !bw.practical_required,
    })
}

/// One row of a run trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterateRecord {
    pub t: usize,
    #[serde(rename = "F")]
    pub f: f64,
    /// `‖∇̂F - ∇F(θ^{t-1})‖₂` when audited.
    pub grad_err: Option<f64>,
    /// Largest per-coordinate interpolation error over the samples, when audited.
    pub coord_err: Option<f64>,
    pub oracle_count: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GradientKind {
    Exact,
    Interpolated,
    Stochastic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub optimizer: String,
    pub gradient: GradientKind,
    pub iterates: Vec<IterateRecord>,
    pub final_theta: Vec<f64>,
    pub f_star: Option<f64>,
    /// Final gap within the target accuracy.
    pub converged: bool,
    /// Stopped early by the runtime deadline.
    pub truncated: bool,
    pub config: serde_json::Value,
    pub notes: Vec<String>,
}

pub const CSV_HEADER: &str = "t,F,grad_err,oracle_count";

impl RunReport {
    pub fn final_f(&self) -> f64 {
        self.iterates.last().map_or(f64::NAN, |r| r.f)
    }

    pub fn final_count(&self) -> u64 {
        self.iterates.last().map_or(0, |r| r.oracle_count)
    }

    /// First iterate with `F - F_* ≤ eps`.
    pub fn first_within(&self, eps: f64) -> Option<&IterateRecord> {
        let fs = self.f_star?;
        self.iterates.iter().find(|r| r.f - fs <= eps)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Per-iteration series as CSV with 17 significant digits and LF endings.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.iterates.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.iterates {
            let ge = r.grad_err.map(|v| format!("{v:.16e}")).unwrap_or_default();
            out.push_str(&format!("{},{:.16e},{},{}\n", r.t, r.f, ge, r.oracle_count));
        }
        out
    }
}

/// Parses the CSV written by [`RunReport::to_csv`]; `coord_err` is not part of it.
pub fn parse_series_csv(text: &str) -> Result<Vec<IterateRecord>> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>().join(",") != CSV_HEADER {
        return Err(Error::Input(format!("unexpected CSV header {headers:?}")));
    }
    let bad = |e: String| Error::Input(format!("malformed series row: {e}"));
    rdr.records()
        .map(|rec| {
            let rec = rec?;
            let t = rec[0].parse().map_err(|e| bad(format!("{e}")))?;
            let f = rec[1].parse().map_err(|e| bad(format!("{e}")))?;
            let grad_err = match &rec[2] {
                "" => None,
                s => Some(s.parse().map_err(|e| bad(format!("{e}")))?),
            };
            let oracle_count = rec[3].parse().map_err(|e| bad(format!("{e}")))?;
            Ok(IterateRecord {
                t,
                f,
                grad_err,
                coord_err: None,
                oracle_count,
            })
        })
        .collect()
}

/// Options shared by the three optimizers.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Log the true gradient error each iteration (not counted in `Γ`).
    pub audit: bool,
    /// Target accuracy for the `converged` flag.
    pub target_eps: Option<f64>,
    /// Known `F_*`; otherwise taken from the problem when available.
    pub f_star: Option<f64>,
    /// Stop and flag the report as truncated past this instant.
    pub deadline: Option<Instant>,
    /// Record every k-th iterate (the last one is always recorded); 0 or 1 records all.
    pub record_every: usize,
    /// Grid cap for LPI-GD.
    pub grid_cap: Option<u64>,
    /// Configuration snapshot stored verbatim in the report.
    pub config: serde_json::Value,
}

struct Recorder<'a> {
    problem: &'a LossProblem,
    data: &'a Dataset,
    opts: &'a RunOptions,
    f_star: Option<f64>,
    iterates: Vec<IterateRecord>,
}

impl<'a> Recorder<'a> {
    fn new(problem: &'a LossProblem, data: &'a Dataset, opts: &'a RunOptions) -> Self {
        let f_star = opts.f_star.or_else(|| problem.f_star(data).ok());
        Self {
            problem,
            data,
            opts,
            f_star,
            iterates: Vec::new(),
        }
    }

    fn wants(&self, t: usize, last: usize) -> bool {
        let k = self.opts.record_every.max(1);
        t % k == 0 || t == last
    }

    fn push(&mut self, t: usize, theta: &[f64], grad_err: Option<f64>, coord_err: Option<f64>, count: u64) -> Result<()> {
        let f = erm_objective(self.problem, self.data, theta)?;
        self.iterates.push(IterateRecord {
            t,
            f,
            grad_err,
            coord_err,
            oracle_count: count,
        });
        Ok(())
    }

    fn expired(&self) -> bool {
        self.opts.deadline.is_some_and(|d| Instant::now() >= d)
    }

    fn finish(
        self,
        optimizer: &str,
        gradient: GradientKind,
        theta: Vec<f64>,
        truncated: bool,
        notes: Vec<String>,
    ) -> RunReport {
        let last = self.iterates.last().map(|r| r.f);
        let converged = match (self.f_star, self.opts.target_eps, last) {
            (Some(fs), Some(eps), Some(f)) => f - fs <= eps,
            _ => false,
        };
        RunReport {
            optimizer: optimizer.into(),
            gradient,
            iterates: self.iterates,
            final_theta: theta,
            f_star: self.f_star,
            converged,
            truncated,
            config: self.opts.config.clone(),
            notes,
        }
    }
}

fn check_start(problem: &LossProblem, data: &Dataset, theta0: &[f64]) -> Result<()> {
    if theta0.len() != problem.p() || data.d() != problem.d() {
        return Err(Error::Input(format!(
            "dimension mismatch: problem (d={}, p={}), data d={}, theta0 p={}",
            problem.d(),
            problem.p(),
            data.d(),
            theta0.len()
        )));
    }
    Ok(())
}

/// Interpolation weights for every sample, computed once and reused each iteration.
#[derive(Clone, Debug)]
pub struct SampleWeights {
    pub fits: Vec<LocalFit>,
    /// `(1/n) Σ_i w*_y(x^(i))` for every grid point `y`.
    pub aggregate: Vec<f64>,
    pub max_condition: f64,
}

pub fn sample_weights(interp: &LocalInterpolator, data: &Dataset) -> Result<SampleWeights> {
    let fits: Vec<LocalFit> = data
        .rows()
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            interp.local_fit(x).map_err(|e| match e {
                Error::IllPosedFit {
                    lambda_min,
                    condition,
                    ..
                } => Error::IllPosedFit {
                    location: format!("sample {i}"),
                    lambda_min,
                    condition,
                },
                Error::Domain(msg) => Error::Domain(format!("sample {i}: {msg}")),
                other => other,
            })
        })
        .collect::<Result<_>>()?;
    let n = data.n() as f64;
    let mut aggregate = vec![0.0; interp.grid().len()];
    let mut max_condition: f64 = 0.0;
    for f in &fits {
        max_condition = max_condition.max(f.condition);
        for &(idx, w) in &f.weights {
            aggregate[idx] += w;
        }
    }
    aggregate.iter_mut().for_each(|a| *a /= n);
    Ok(SampleWeights {
        fits,
        aggregate,
        max_condition,
    })
}

/// Gradients at every grid point, flat `[grid index][coordinate]`.
fn grid_gradients(oracle: &CountingOracle, grid: &UniformGrid, theta: &[f64], buf: &mut [f64]) -> Result<()> {
    let p = theta.len();
    buf.par_chunks_mut(p).enumerate().try_for_each(|(idx, out)| {
        let y = grid.point(idx);
        oracle.query_into(&y, theta, out)
    })
}

/// LPI-GD with a fixed grid and bandwidth.
pub fn lpi_gd_run(
    oracle: &CountingOracle,
    data: &Dataset,
    schedule: &Schedule,
    theta0: &[f64],
    opts: &RunOptions,
) -> Result<RunReport> {
    let problem = oracle.problem();
    check_start(problem, data, theta0)?;
    let cap = opts.grid_cap.unwrap_or(crate::DEFAULT_GRID_CAP);
    let m = schedule.check_feasible(problem.d(), cap)?;
    let grid = UniformGrid::new(m, problem.d(), cap)?;
    let kernel = Kernel::by_name(&schedule.kernel)?;
    let interp = LocalInterpolator::new(InterpConfig::new(m, schedule.h, schedule.l, kernel)?, grid.clone())?;
    let weights = sample_weights(&interp, data)?;

    let p = problem.p();
    let step = 1.0 / problem.l1();
    let base = oracle.count();
    let mut rec = Recorder::new(problem, data, opts);
    let mut theta = theta0.to_vec();
    rec.push(0, &theta, None, None, 0)?;
    let mut buf = vec![0.0; grid.len() * p];
    let mut sample_grad = vec![0.0; p];
    let mut truncated = false;
    for t in 1..=schedule.t {
        if rec.expired() {
            truncated = true;
            break;
        }
        grid_gradients(oracle, &grid, &theta, &mut buf)?;
        let mut est = vec![0.0; p];
        for (idx, &w) in weights.aggregate.iter().enumerate() {
            if w != 0.0 {
                for i in 0..p {
                    est[i] += w * buf[idx * p + i];
                }
            }
        }
        let (grad_err, coord_err) = if opts.audit {
            let truth = erm_gradient(problem, data, &theta)?;
            let ge = est.iter().zip(&truth).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let mut ce: f64 = 0.0;
            for (x, fit) in data.iter().zip(&weights.fits) {
                problem.grad_theta_into(x, &theta, &mut sample_grad);
                for i in 0..p {
                    let v: f64 = fit.weights.iter().map(|&(idx, w)| w * buf[idx * p + i]).sum();
                    ce = ce.max((v - sample_grad[i]).abs());
                }
            }
            (Some(ge), Some(ce))
        } else {
            (None, None)
        };
        for (th, g) in theta.iter_mut().zip(&est) {
            *th -= step * g;
        }
        if rec.wants(t, schedule.t) || opts.audit {
            rec.push(t, &theta, grad_err, coord_err, oracle.count() - base)?;
        }
    }
    let count = oracle.count() - base;
    let iterations = rec.iterates.last().map_or(0, |r| r.t) as u64;
    debug_assert_eq!(count, iterations * grid.len() as u64);
    let notes = vec![format!(
        "grid m={m}, d={}, h={}, l={}, kernel={}, max condition {:.3e}",
        problem.d(),
        schedule.h,
        schedule.l,
        schedule.kernel,
        weights.max_condition
    )];
    Ok(rec.finish("lpi-gd", GradientKind::Interpolated, theta, truncated, notes))
}

/// Exact gradient descent with step `1/L1`; `n` oracle calls per iteration.
pub fn gd_run(
    oracle: &CountingOracle,
    data: &Dataset,
    t_max: usize,
    theta0: &[f64],
    opts: &RunOptions,
) -> Result<RunReport> {
    let problem = oracle.problem();
    check_start(problem, data, theta0)?;
    if t_max == 0 {
        return Err(Error::Input("GD needs T >= 1".into()));
    }
    let p = problem.p();
    let n = data.n();
    let step = 1.0 / problem.l1();
    let base = oracle.count();
    let mut rec = Recorder::new(problem, data, opts);
    let mut theta = theta0.to_vec();
    rec.push(0, &theta, None, None, 0)?;
    let mut buf = vec![0.0; n * p];
    let mut truncated = false;
    for t in 1..=t_max {
        if rec.expired() {
            truncated = true;
            break;
        }
        buf.par_chunks_mut(p)
            .zip(data.rows().par_iter())
            .try_for_each(|(out, x)| oracle.query_into(x, &theta, out))?;
        let mut g = vec![0.0; p];
        for chunk in buf.chunks_exact(p) {
            for (gi, v) in g.iter_mut().zip(chunk) {
                *gi += v;
            }
        }
        for (th, gi) in theta.iter_mut().zip(&g) {
            *th -= step * gi / n as f64;
        }
        let audit = opts.audit.then_some(0.0);
        if rec.wants(t, t_max) || opts.audit {
            rec.push(t, &theta, audit, audit, oracle.count() - base)?;
        }
    }
    Ok(rec.finish("gd", GradientKind::Exact, theta, truncated, Vec::new()))
}

/// SGD sampling order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Sampling {
    #[default]
    WithReplacement,
    /// Reshuffled epochs.
    WithoutReplacement,
}

/// SGD with step `1/(μt)`, one oracle call per iteration.
pub fn sgd_run(
    oracle: &CountingOracle,
    data: &Dataset,
    t_max: usize,
    theta0: &[f64],
    seed: u64,
    sampling: Sampling,
    opts: &RunOptions,
) -> Result<RunReport> {
    let problem = oracle.problem();
    check_start(problem, data, theta0)?;
    if t_max == 0 {
        return Err(Error::Input("SGD needs T >= 1".into()));
    }
    let n = data.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = oracle.count();
    let mut rec = Recorder::new(problem, data, opts);
    let mut theta = theta0.to_vec();
    rec.push(0, &theta, None, None, 0)?;
    let mut g = vec![0.0; problem.p()];
    let mut order: Vec<usize> = (0..n).collect();
    let mut truncated = false;
    for t in 1..=t_max {
        if rec.expired() {
            truncated = true;
            break;
        }
        let i = match sampling {
            Sampling::WithReplacement => rng.gen_range(0..n),
            Sampling::WithoutReplacement => {
                let k = (t - 1) % n;
                if k == 0 {
                    order.shuffle(&mut rng);
                }
                order[k]
            }
        };
        oracle.query_into(data.sample(i), &theta, &mut g)?;
        let step = 1.0 / (problem.mu() * t as f64);
        for (th, gi) in theta.iter_mut().zip(&g) {
            *th -= step * gi;
        }
        if rec.wants(t, t_max) {
            rec.push(t, &theta, None, None, oracle.count() - base)?;
        }
    }
    let notes = vec!["SGD guarantees hold in expectation only".to_string()];
    Ok(rec.finish("sgd", GradientKind::Stochastic, theta, truncated, notes))
}

/// Outcome of checking the unrolled inexact-descent inequality along a run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundTrace {
    /// `F(θ^{T'}) - F_*` for each recorded `T'`.
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub holds: Vec<bool>,
    pub first_violation: Option<usize>,
    /// `‖∇̂F - ∇F‖₂ ≤ √p · coord_err` per iteration (true where not audited).
    pub p_dependence: Vec<bool>,
}

impl BoundTrace {
    pub fn all_hold(&self) -> bool {
        self.first_violation.is_none() && self.p_dependence.iter().all(|&b| b)
    }
}

/// Rounding allowance in the `√p` comparison, where both sides can be at the
/// level of floating-point noise.
pub const P_DEPENDENCE_ROUNDING: f64 = 1e-12;

/// Checks `F(θ^{T'}) - F_* ≤ (1-1/σ)^{T'} (F(θ⁰) - F_*) + (1/(2L1)) Σ_{t≤T'} (1-1/σ)^{T'-t} e_t²`
/// at every prefix, where `e_t` is the logged gradient error.
pub fn inexact_bound_trace(report: &RunReport, problem: &LossProblem) -> Result<BoundTrace> {
    let f_star = report
        .f_star
        .or(problem.f_star_hint())
        .ok_or_else(|| Error::Config("inexact bound check needs F_*".into()))?;
    let its = &report.iterates;
    if its.first().map(|r| r.t) != Some(0) || its.windows(2).any(|w| w[1].t != w[0].t + 1) {
        return Err(Error::Input("bound check needs every iterate recorded from t = 0".into()));
    }
    let q = 1.0 - 1.0 / problem.sigma();
    let gap0 = its[0].f - f_star;
    let sqrt_p = (problem.p() as f64).sqrt();
    let mut acc = 0.0;
    let mut trace = BoundTrace {
        lhs: Vec::with_capacity(its.len()),
        rhs: Vec::with_capacity(its.len()),
        holds: Vec::with_capacity(its.len()),
        first_violation: None,
        p_dependence: Vec::with_capacity(its.len()),
    };
    for (k, r) in its.iter().enumerate() {
        let e = if k == 0 {
            0.0
        } else {
            match (report.gradient, r.grad_err) {
                (GradientKind::Exact, e) => e.unwrap_or(0.0),
                (_, Some(e)) => e,
                (_, None) => {
                    return Err(Error::Input(format!("iterate {} has no audited gradient error", r.t)));
                }
            }
        };
        acc = q * acc + e * e;
        let lhs = r.f - f_star;
        let rhs = q.powi(r.t as i32) * gap0 + acc / (2.0 * problem.l1());
        let ok = lhs <= rhs + BOUND_SLACK;
        if !ok && trace.first_violation.is_none() {
            trace.first_violation = Some(r.t);
        }
        let pd = match (r.grad_err, r.coord_err) {
            (Some(ge), Some(ce)) => ge <= sqrt_p * ce + P_DEPENDENCE_ROUNDING,
            _ => true,
        };
        trace.lhs.push(lhs);
        trace.rhs.push(rhs);
        trace.holds.push(ok);
        trace.p_dependence.push(pd);
    }
    Ok(trace)
}

/// Bound values for one `(d, l, η, ε)` setting.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OracleBound {
    /// Natural log of `C(d,l) ((p+Δ)/ε)^{d/(2η)} log((p+Δ)/(2με))`.
    pub ln_lpi: f64,
    pub log10_lpi: f64,
    /// Natural log of `C(d,l)`.
    pub ln_constant: f64,
    /// `n log(1/ε)`.
    pub gd: f64,
    /// `1/ε`.
    pub sgd: f64,
    /// `ε ≤ (L1-μ)p/(2 L1 μ)`.
    pub precondition_ok: bool,
}

/// Parameters of the LPI-GD oracle bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub mu: f64,
    pub l1: f64,
    pub l2: f64,
    pub b: f64,
    pub c: f64,
    pub p: f64,
    pub d: usize,
    pub eta: f64,
    pub l: u32,
    pub eps: f64,
    pub f_gap: f64,
    pub n: f64,
}

/// Natural log of `C(d,l) = (σ + 2(L1-μ)) / ((L1-μ) log(σ/(σ-1))) · (220(2L2+1)c/b)^d · d^d (3e)^{d²} / Λ^{2d}`.
/// At `d = 0` the empty products are 1.
pub fn ln_bound_constant(mu: f64, l1: f64, l2: f64, b: f64, c: f64, d: usize, l: u32) -> f64 {
    let sigma = l1 / mu;
    let df = d as f64;
    let lead = ((sigma + 2.0 * (l1 - mu)) / ((l1 - mu) * (sigma / (sigma - 1.0)).ln())).ln();
    if d == 0 {
        return lead;
    }
    lead + df * (220.0 * (2.0 * l2 + 1.0) * c / b).ln() + df * df.ln()
        + df * df * (3.0 * std::f64::consts::E).ln()
        - 2.0 * df * lambda_log(d, l).ln_value
}

pub fn oracle_bound(inp: &BoundInputs) -> Result<OracleBound> {
    if !(inp.l1 > inp.mu && inp.mu > 0.0) {
        return Err(Error::Unsupported(format!(
            "bound needs L1 > mu > 0, got mu={}, L1={}",
            inp.mu, inp.l1
        )));
    }
    if !(inp.eps > 0.0 && inp.eta > 0.0) {
        return Err(Error::Input("bound needs eps > 0 and eta > 0".into()));
    }
    let delta = 2.0 * inp.mu * inp.f_gap;
    let ln_c = ln_bound_constant(inp.mu, inp.l1, inp.l2, inp.b, inp.c, inp.d, inp.l);
    let power = inp.d as f64 / (2.0 * inp.eta) * ((inp.p + delta) / inp.eps).ln();
    let log_term = ((inp.p + delta) / (2.0 * inp.mu * inp.eps)).ln();
    let ln_lpi = ln_c + power + log_term.ln();
    Ok(OracleBound {
        ln_lpi,
        log10_lpi: ln_lpi / std::f64::consts::LN_10,
        ln_constant: ln_c,
        gd: inp.n * (1.0 / inp.eps).ln(),
        sgd: 1.0 / inp.eps,
        precondition_ok: inp.eps <= (inp.l1 - inp.mu) * inp.p / (2.0 * inp.l1 * inp.mu),
    })
}

/// [`oracle_bound`] with the constants taken from a problem and kernel.
#[allow(clippy::too_many_arguments)]
pub fn oracle_bound_eval(
    problem: &LossProblem,
    kernel: &Kernel,
    p: usize,
    d: usize,
    eta: f64,
    l: u32,
    eps: f64,
    f_gap: f64,
    n: usize,
) -> Result<OracleBound> {
    oracle_bound(&BoundInputs {
        mu: problem.mu(),
        l1: problem.l1(),
        l2: problem.l2(),
        b: kernel.lower(),
        c: kernel.upper(),
        p: p as f64,
        d,
        eta,
        l,
        eps,
        f_gap,
        n: n as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{quadratic_problem, ridge_problem, synthetic_regression_data};

    #[test]
    fn iteration_count_example() {
        assert_eq!(iteration_count(2.0, 1.0, 2, 1.0, 0.1).unwrap(), 5);
        assert!((accuracy_budget(2.0, 5) - 0.5f64.powf(2.5)).abs() < 1e-15);
        assert!((accuracy_budget(2.0, 5) - 0.176777).abs() < 1e-6);
        assert!(matches!(iteration_count(1.0, 1.0, 2, 1.0, 0.1), Err(Error::Unsupported(_))));
    }

    #[test]
    fn iteration_count_monotone_in_eps() {
        let mut prev = 0;
        let mut eps = 1.0;
        for _ in 0..30 {
            let t = iteration_count(3.0, 2.0, 4, 0.5, eps).unwrap();
            assert!(t >= prev);
            let step = (2f64.ln() / 1.5f64.ln()).ceil() as usize;
            if prev > 0 {
                assert!(t - prev <= step);
            }
            prev = t;
            eps /= 2.0;
        }
    }

    #[test]
    fn gd_one_step_on_quadratic() {
        let o = CountingOracle::new(quadratic_problem(1, 1).unwrap());
        let data = Dataset::new(vec![vec![0.5]], 0.1).unwrap();
        let r = gd_run(&o, &data, 1, &[5.0], &RunOptions::default()).unwrap();
        assert_eq!(r.final_theta, vec![0.0]);
        assert_eq!(r.final_count(), 1);
    }

    #[test]
    fn gd_contracts_and_counts() {
        let pr = ridge_problem(0.1, 2).unwrap();
        let data = synthetic_regression_data(30, 2, 0.1, 5).unwrap();
        let o = CountingOracle::new(pr.clone());
        let r = gd_run(&o, &data, 25, &[0.0], &RunOptions::default()).unwrap();
        let fs = r.f_star.unwrap();
        let q = 1.0 - 1.0 / pr.sigma();
        let gap0 = r.iterates[0].f - fs;
        for it in &r.iterates {
            assert!(it.f - fs <= q.powi(it.t as i32) * gap0 + 1e-12);
            assert_eq!(it.oracle_count, 30 * it.t as u64);
        }
        let tr = inexact_bound_trace(&r, &pr).unwrap();
        assert!(tr.all_hold());
    }

    #[test]
    fn sgd_single_sample_matches_decaying_gd() {
        let pr = ridge_problem(0.5, 2).unwrap();
        let data = Dataset::new(vec![vec![0.4, 0.7]], 0.1).unwrap();
        let o = CountingOracle::new(pr.clone());
        let r = sgd_run(&o, &data, 15, &[0.2], 9, Sampling::WithReplacement, &RunOptions::default()).unwrap();
        let mut th = 0.2;
        for t in 1..=15 {
            let g = pr.grad_theta(&[0.4, 0.7], &[th])[0];
            th -= g / (pr.mu() * t as f64);
        }
        assert_eq!(r.final_theta[0], th);
        assert_eq!(r.final_count(), 15);
    }

    #[test]
    fn csv_round_trip() {
        let pr = ridge_problem(0.1, 2).unwrap();
        let data = synthetic_regression_data(20, 2, 0.1, 5).unwrap();
        let o = CountingOracle::new(pr);
        let opts = RunOptions {
            audit: true,
            ..Default::default()
        };
        let r = gd_run(&o, &data, 5, &[0.3], &opts).unwrap();
        let csv = r.to_csv();
        assert!(csv.starts_with("t,F,grad_err,oracle_count\n"));
        assert!(!csv.contains('\r'));
        let back = parse_series_csv(&csv).unwrap();
        for (a, b) in r.iterates.iter().zip(&back) {
            assert_eq!((a.t, a.f, a.grad_err, a.oracle_count), (b.t, b.f, b.grad_err, b.oracle_count));
        }
        assert_eq!(RunReport::from_json(&r.to_json().unwrap()).unwrap(), r);
    }

    #[test]
    fn infeasible_schedule_is_rejected_before_queries() {
        let pr = ridge_problem(0.1, 3).unwrap();
        let data = synthetic_regression_data(5, 3, 0.1, 1).unwrap();
        let o = CountingOracle::new(pr);
        let s = Schedule::practical(1_000_000, 0.1, 2, 3);
        let r = lpi_gd_run(&o, &data, &s, &[0.0, 0.0], &RunOptions::default());
        assert!(matches!(r, Err(Error::GridCap { .. })));
        assert_eq!(o.count(), 0);
    }

    #[test]
    fn bound_constant_power_law() {
        let base = BoundInputs {
            mu: 1.0,
            l1: 2.0,
            l2: 1.0,
            b: 1.0,
            c: 1.0,
            p: 4.0,
            d: 2,
            eta: 3.0,
            l: 2,
            eps: 0.01,
            f_gap: 0.0,
            n: 100.0,
        };
        let a = oracle_bound(&base).unwrap();
        let b = oracle_bound(&BoundInputs { p: 8.0, eps: 0.02, ..base }).unwrap();
        // p/ε unchanged, so only the log term moves
        assert!((a.ln_lpi - b.ln_lpi).abs() < 1e-12);
        let c = oracle_bound(&BoundInputs { p: 8.0, ..base }).unwrap();
        let log_ratio = (((8.0) / 0.02f64).ln() / (4.0f64 / 0.02).ln()).ln();
        assert!((c.ln_lpi - a.ln_lpi - (2.0 / 6.0) * 2f64.ln() - log_ratio).abs() < 1e-12);
        let e = oracle_bound(&BoundInputs { eps: 0.005, ..base }).unwrap();
        assert!((e.gd - a.gd - 100.0 * 2f64.ln()).abs() < 1e-9);
    }
}
