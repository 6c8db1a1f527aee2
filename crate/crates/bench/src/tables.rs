use serde::{Deserialize, Serialize};

use lpiopt_core::interpolation::{sup_error, InterpConfig, LocalInterpolator, UniformGrid};
use lpiopt_core::optimizer::{oracle_bound, BoundInputs};
use lpiopt_core::problems::{holder_order, synthetic_holder_components, TaylorFunction};
use lpiopt_core::Kernel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::InterpCheckConfig;
use crate::BenchError;

/// Least-squares slope of `log y` against `log x`.
pub fn rate_fit(xs: &[f64], ys: &[f64]) -> Result<f64, BenchError> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(BenchError::Input(format!(
            "rate fit needs at least 3 paired points, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(BenchError::Input("rate fit needs positive finite inputs".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(BenchError::Input("rate fit needs at least two distinct x values".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    Ok(sxy / sxx)
}

/// Asymptotic regime of the bound comparison.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub alpha: f64,
    pub beta: f64,
    pub tau: f64,
    pub gamma: f64,
}

impl Regime {
    /// `τ > max{1, 1/α}` and `γ > max{1, τ(α+β)/2}`.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.alpha > 0.0 && self.beta > 0.0) {
            v.push("alpha and beta must be positive".into());
        }
        if !(self.tau > 1f64.max(1.0 / self.alpha)) {
            v.push("tau <= max(1, 1/alpha)".into());
        }
        if !(self.gamma > 1f64.max(self.tau * (self.alpha + self.beta) / 2.0)) {
            v.push("gamma <= max(1, tau(alpha+beta)/2)".into());
        }
        v
    }
}

/// Fixed constants used when evaluating the LPI-GD bound in the scaling table.
pub const SCALING_CONSTANTS: BoundInputs = BoundInputs {
    mu: 1.0,
    l1: 2.0,
    l2: 1.0,
    b: 1.0,
    c: 1.0,
    p: 1.0,
    d: 0,
    eta: 1.0,
    l: 0,
    eps: 1.0,
    f_gap: 1.0,
    n: 1.0,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n: f64,
    pub eps: f64,
    pub p: f64,
    pub d: usize,
    pub eta: f64,
    pub log10_lpi: f64,
    pub log10_gd: f64,
    pub log10_sgd: f64,
    pub log10_lpi_over_gd: f64,
    pub log10_lpi_over_sgd: f64,
    /// Flags such as `degenerate_d` (`d = 0`) and regime violations.
    pub flags: Vec<String>,
}

/// `log₁₀` bound values with `ε = n^{-α}`, `p = n^β`,
/// `d = floor(log log n / (4 log(e(γ+1))))`, `η = τ(α+β)d/2`. The GD and SGD
/// columns use `n log(1/ε)` and `1/ε` with constant 1.
pub fn scaling_table(regime: Regime, ns: &[f64]) -> Result<Vec<ScalingRow>, BenchError> {
    let violations = regime.violations();
    ns.iter()
        .map(|&n| {
            if !(n > std::f64::consts::E) {
                return Err(BenchError::Input(format!("n must exceed e, got {n}")));
            }
            let eps = n.powf(-regime.alpha);
            let p = n.powf(regime.beta);
            let d = (n.ln().ln() / (4.0 * (std::f64::consts::E * (regime.gamma + 1.0)).ln())).floor() as usize;
            let eta = regime.tau * (regime.alpha + regime.beta) * d as f64 / 2.0;
            let mut flags = violations.clone();
            if d == 0 {
                flags.push("degenerate_d".into());
            }
            let bound = oracle_bound(&BoundInputs {
                p,
                d,
                eta: if d == 0 { 1.0 } else { eta },
                l: if d == 0 { 0 } else { holder_order(eta) },
                eps,
                n,
                ..SCALING_CONSTANTS
            })
            .map_err(|e| BenchError::Input(e.to_string()))?;
            if !bound.precondition_ok {
                flags.push("eps_above_theorem_range".into());
            }
            let log10_lpi = bound.log10_lpi;
            let log10_gd = bound.gd.log10();
            let log10_sgd = bound.sgd.log10();
            Ok(ScalingRow {
                n,
                eps,
                p,
                d,
                eta,
                log10_lpi,
                log10_gd,
                log10_sgd,
                log10_lpi_over_gd: log10_lpi - log10_gd,
                log10_lpi_over_sgd: log10_lpi - log10_sgd,
                flags,
            })
        })
        .collect()
}

pub const SCALING_HEADER: &str =
    "n,eps,p,d,eta,log10_lpi,log10_gd,log10_sgd,log10_lpi_over_gd,log10_lpi_over_sgd,flags";

pub fn scaling_csv(rows: &[ScalingRow]) -> String {
    let mut out = String::from(SCALING_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}\n",
            r.n,
            r.eps,
            r.p,
            r.d,
            r.eta,
            r.log10_lpi,
            r.log10_gd,
            r.log10_sgd,
            r.log10_lpi_over_gd,
            r.log10_lpi_over_sgd,
            r.flags.join(";")
        ));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub m: usize,
    pub h: f64,
    pub sup_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterpCheckReport {
    pub d: usize,
    pub eta: f64,
    pub l: u32,
    pub rows: Vec<RateRow>,
    pub slope: f64,
    /// `slope ≤ -η + 1/2`.
    pub rate_ok: bool,
}

/// Sup-norm interpolation error of a synthetic Hölder target across grid sizes.
pub fn interp_check(cfg: &InterpCheckConfig) -> Result<InterpCheckReport, BenchError> {
    let cfg_err = |e: lpiopt_core::Error| BenchError::Config(e.to_string());
    if cfg.m_values.len() < 3 || cfg.probes == 0 || !(cfg.bandwidth_factor > 0.0) {
        return Err(BenchError::Config(
            "interp-check needs >= 3 m values, probes >= 1 and a positive bandwidth factor".into(),
        ));
    }
    let l = holder_order(cfg.eta);
    let g = synthetic_holder_components(cfg.eta, 1, cfg.l2)[0];
    let kernel = Kernel::by_name(&cfg.kernel).map_err(cfg_err)?;
    let m_min = *cfg.m_values.iter().min().expect("non-empty");
    let margin = cfg.bandwidth_factor / m_min as f64;
    if !(margin < 0.5) {
        return Err(BenchError::Config(format!(
            "bandwidth {margin} at m = {m_min} leaves no admissible probe region"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let probes: Vec<Vec<f64>> = (0..cfg.probes)
        .map(|_| (0..cfg.d).map(|_| rng.gen_range(margin..=1.0 - margin)).collect())
        .collect();
    let cap = lpiopt_core::DEFAULT_GRID_CAP;
    let mut rows = Vec::with_capacity(cfg.m_values.len());
    for &m in &cfg.m_values {
        let h = cfg.bandwidth_factor / m as f64;
        let grid = UniformGrid::new(m, cfg.d, cap).map_err(|e| BenchError::Infeasible(e.to_string()))?;
        let interp = LocalInterpolator::new(InterpConfig::new(m, h, l, kernel.clone()).map_err(cfg_err)?, grid.clone())
            .map_err(cfg_err)?;
        let err = sup_error(|x| interp.local_fit(x), &grid, |y| g.value(y), &probes).map_err(cfg_err)?;
        rows.push(RateRow { m, h, sup_error: err });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.m as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.sup_error).collect();
    let slope = rate_fit(&xs, &ys)?;
    Ok(InterpCheckReport {
        d: cfg.d,
        eta: cfg.eta,
        l,
        rows,
        slope,
        rate_ok: slope <= -cfg.eta + 0.5,
    })
}

pub fn rate_csv(rows: &[RateRow]) -> String {
    let mut out = String::from("m,h,sup_error\n");
    for r in rows {
        out.push_str(&format!("{},{:.16e},{:.16e}\n", r.m, r.h, r.sup_error));
    }
    out
}
