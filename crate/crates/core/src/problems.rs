//! Loss functions `f(x; θ)`, the counting first-order oracle, datasets in
//! `[h', 1-h']^d` and smoothness diagnostics.
//!
//! The label is the last data coordinate.

use std::io::Read;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::multiindex::{multi_index_set, MultiIndex};
use crate::{Error, Result};

/// Default data margin `h'` in practical mode.
pub const DEFAULT_MARGIN: f64 = 0.05;

type LossFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;
type GradFn = Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;
type MinimizerFn = Arc<dyn Fn(&Dataset) -> Result<(Vec<f64>, f64)> + Send + Sync>;

/// Smoothness and convexity constants of a loss.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemConstants {
    pub mu: f64,
    pub l1: f64,
    pub l2: f64,
    pub eta: f64,
}

impl ProblemConstants {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.l1 >= self.mu && self.l1.is_finite()) {
            return Err(Error::Input(format!(
                "need 0 < mu <= L1 < inf, got mu={}, L1={}",
                self.mu, self.l1
            )));
        }
        if !(self.eta > 0.0 && self.l2 >= 0.0) {
            return Err(Error::Input(format!(
                "need eta > 0 and L2 >= 0, got eta={}, L2={}",
                self.eta, self.l2
            )));
        }
        Ok(())
    }

    /// `l = ceil(η) - 1`.
    pub fn l(&self) -> u32 {
        holder_order(self.eta)
    }

    /// `σ = L1 / μ`.
    pub fn sigma(&self) -> f64 {
        self.l1 / self.mu
    }
}

/// `l = ceil(η) - 1`.
pub fn holder_order(eta: f64) -> u32 {
    (eta.ceil() as u32).saturating_sub(1)
}

/// A loss `f(x; θ)` with `x ∈ [0,1]^d`, `θ ∈ R^p`.
#[derive(Clone)]
pub struct LossProblem {
    name: String,
    d: usize,
    p: usize,
    consts: ProblemConstants,
    loss: LossFn,
    grad: GradFn,
    minimizer: Option<MinimizerFn>,
    f_star_hint: Option<f64>,
}

impl std::fmt::Debug for LossProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LossProblem")
            .field("name", &self.name)
            .field("d", &self.d)
            .field("p", &self.p)
            .field("consts", &self.consts)
            .field("f_star_hint", &self.f_star_hint)
            .finish()
    }
}

impl LossProblem {
    /// A black-box loss. The constants are taken as asserted by the caller.
    pub fn new<L, G>(name: &str, d: usize, p: usize, consts: ProblemConstants, loss: L, grad: G) -> Result<Self>
    where
        L: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
        G: Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        consts.validate()?;
        if d == 0 || p == 0 {
            return Err(Error::Input(format!("need d, p >= 1, got d={d}, p={p}")));
        }
        Ok(Self {
            name: name.into(),
            d,
            p,
            consts,
            loss: Arc::new(loss),
            grad: Arc::new(grad),
            minimizer: None,
            f_star_hint: None,
        })
    }

    pub fn with_f_star_hint(mut self, f_star: f64) -> Self {
        self.f_star_hint = Some(f_star);
        self
    }

    fn with_minimizer(mut self, m: MinimizerFn) -> Self {
        self.minimizer = Some(m);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn constants(&self) -> ProblemConstants {
        self.consts
    }

    pub fn mu(&self) -> f64 {
        self.consts.mu
    }

    pub fn l1(&self) -> f64 {
        self.consts.l1
    }

    pub fn l2(&self) -> f64 {
        self.consts.l2
    }

    pub fn eta(&self) -> f64 {
        self.consts.eta
    }

    pub fn l(&self) -> u32 {
        self.consts.l()
    }

    pub fn sigma(&self) -> f64 {
        self.consts.sigma()
    }

    pub fn f_star_hint(&self) -> Option<f64> {
        self.f_star_hint
    }

    pub fn loss(&self, x: &[f64], theta: &[f64]) -> f64 {
        (self.loss)(x, theta)
    }

    /// `∇_θ f(x; θ)`, outside any oracle accounting.
    pub fn grad_theta(&self, x: &[f64], theta: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.p];
        self.grad_theta_into(x, theta, &mut out);
        out
    }

    pub fn grad_theta_into(&self, x: &[f64], theta: &[f64], out: &mut [f64]) {
        (self.grad)(x, theta, out)
    }

    /// Closed-form ERM minimizer and minimum, where the problem has one.
    pub fn exact_minimizer(&self, data: &Dataset) -> Option<Result<(Vec<f64>, f64)>> {
        self.minimizer.as_ref().map(|m| m(data))
    }

    /// `F_*` from the hint, else the closed form; a configuration error otherwise.
    pub fn f_star(&self, data: &Dataset) -> Result<f64> {
        if let Some(v) = self.f_star_hint {
            return Ok(v);
        }
        match self.exact_minimizer(data) {
            Some(r) => r.map(|(_, f)| f),
            None => Err(Error::Config(format!(
                "no F_* available for problem '{}': supply f_star_hint",
                self.name
            ))),
        }
    }

    fn check_dims(&self, data: &Dataset, theta: &[f64]) -> Result<()> {
        if data.d() != self.d || theta.len() != self.p {
            return Err(Error::Input(format!(
                "dimension mismatch: problem (d={}, p={}), data d={}, theta p={}",
                self.d,
                self.p,
                data.d(),
                theta.len()
            )));
        }
        Ok(())
    }
}

/// Ridge regression `f(x; θ) = (y - θᵀx_feat)² + λ‖θ‖²` with `p = d - 1`.
///
/// The gradient is a polynomial of degree 2 in `x`, so its derivatives of
/// order ≥ 2 are constant and `L2 = 0` is exact for any `l ≥ 2`. The default
/// exponent is `η = d + 1`.
pub fn ridge_problem(lambda_reg: f64, d: usize) -> Result<LossProblem> {
    if d < 2 {
        return Err(Error::Input(format!("ridge needs d >= 2 (features + label), got {d}")));
    }
    if !(lambda_reg > 0.0) {
        return Err(Error::Input(format!("lambda_reg must be positive, got {lambda_reg}")));
    }
    let p = d - 1;
    let consts = ProblemConstants {
        mu: 2.0 * lambda_reg,
        l1: 2.0 * lambda_reg + 2.0 * p as f64,
        l2: 0.0,
        eta: d as f64 + 1.0,
    };
    let lam = lambda_reg;
    let problem = LossProblem::new(
        "ridge",
        d,
        p,
        consts,
        move |x, th| {
            let (feat, y) = x.split_at(p);
            let r = y[0] - dot(th, feat);
            r * r + lam * dot(th, th)
        },
        move |x, th, out| {
            let (feat, y) = x.split_at(p);
            let r = y[0] - dot(th, feat);
            for ((o, &xi), &ti) in out.iter_mut().zip(feat).zip(th) {
                *o = -2.0 * r * xi + 2.0 * lam * ti;
            }
        },
    )?;
    Ok(problem.with_minimizer(Arc::new(move |data| ridge_closed_form(lam, data))))
}

/// Solves `(XᵀX/n + λI) θ = Xᵀy/n` and returns `(θ*, F(θ*))`.
pub fn ridge_closed_form(lambda_reg: f64, data: &Dataset) -> Result<(Vec<f64>, f64)> {
    let d = data.d();
    let p = d - 1;
    let n = data.n() as f64;
    let mut a = DMatrix::<f64>::identity(p, p) * lambda_reg;
    let mut b = DVector::<f64>::zeros(p);
    for x in data.iter() {
        let (feat, y) = x.split_at(p);
        for i in 0..p {
            b[i] += feat[i] * y[0] / n;
            for j in 0..p {
                a[(i, j)] += feat[i] * feat[j] / n;
            }
        }
    }
    let theta = a
        .cholesky()
        .ok_or_else(|| Error::Input("ridge normal equations are not positive definite".into()))?
        .solve(&b);
    let theta: Vec<f64> = theta.iter().copied().collect();
    let f = data
        .iter()
        .map(|x| {
            let (feat, y) = x.split_at(p);
            let r = y[0] - dot(&theta, feat);
            r * r
        })
        .sum::<f64>()
        / n
        + lambda_reg * dot(&theta, &theta);
    Ok((theta, f))
}

/// `f(x; θ) = ‖θ‖²/2`, independent of the data.
pub fn quadratic_problem(d: usize, p: usize) -> Result<LossProblem> {
    let consts = ProblemConstants {
        mu: 1.0,
        l1: 1.0,
        l2: 0.0,
        eta: 1.0,
    };
    let problem = LossProblem::new(
        "quadratic",
        d,
        p,
        consts,
        |_, th| 0.5 * dot(th, th),
        |_, th, out| out.copy_from_slice(th),
    )?;
    Ok(problem.with_minimizer(Arc::new(move |_| Ok((vec![0.0; p], 0.0)))))
}

/// `g(y) = a · sin(ω Σ_j y_j + φ)`, with derivatives of every order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SinRidge {
    pub amplitude: f64,
    pub omega: f64,
    pub phase: f64,
}

/// Scalar function on `[0,1]^d` with partial derivatives available in closed form.
pub trait TaylorFunction {
    /// `∇^s g(u)`; the zero index gives `g(u)`.
    fn derivative(&self, s: &MultiIndex, u: &[f64]) -> f64;

    fn value(&self, u: &[f64]) -> f64 {
        self.derivative(&MultiIndex::zeros(u.len()), u)
    }
}

impl TaylorFunction for SinRidge {
    fn derivative(&self, s: &MultiIndex, u: &[f64]) -> f64 {
        let k = s.order();
        let arg = self.omega * u.iter().sum::<f64>() + self.phase + k as f64 * std::f64::consts::FRAC_PI_2;
        self.amplitude * self.omega.powi(k as i32) * arg.sin()
    }
}

impl SinRidge {
    /// Hölder constant of the order-`l` derivatives with `η = l + α`:
    /// `a · 2^{1-α} · ω^η`, from `|sin a - sin b| ≤ min(2, |a - b|) ≤ 2^{1-α}|a - b|^α`.
    pub fn holder_constant(&self, eta: f64) -> f64 {
        let alpha = eta - holder_order(eta) as f64;
        self.amplitude.abs() * 2f64.powf(1.0 - alpha) * self.omega.powf(eta)
    }
}

/// `g(y) = Σ_k c_k y^{t_k}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    pub terms: Vec<(f64, MultiIndex)>,
}

impl TaylorFunction for Polynomial {
    fn derivative(&self, s: &MultiIndex, u: &[f64]) -> f64 {
        let mut acc = 0.0;
        'terms: for (c, t) in &self.terms {
            let mut v = *c;
            for ((&tj, &sj), &uj) in t.entries().iter().zip(s.entries()).zip(u) {
                if sj > tj {
                    continue 'terms;
                }
                for k in 0..sj {
                    v *= (tj - k) as f64;
                }
                v *= uj.powi((tj - sj) as i32);
            }
            acc += v;
        }
        acc
    }
}

/// Default frequency of the synthetic Hölder components.
pub const SYNTHETIC_OMEGA: f64 = 6.0;

/// Components `g_i` of the synthetic Hölder problem, scaled so that each has
/// Hölder constant exactly `l2_target` under [`SinRidge::holder_constant`].
pub fn synthetic_holder_components(eta: f64, p: usize, l2_target: f64) -> Vec<SinRidge> {
    let unit = SinRidge {
        amplitude: 1.0,
        omega: SYNTHETIC_OMEGA,
        phase: 0.0,
    };
    let amplitude = l2_target / unit.holder_constant(eta);
    (0..p)
        .map(|i| SinRidge {
            amplitude,
            omega: SYNTHETIC_OMEGA,
            phase: i as f64 * std::f64::consts::PI / (2.0 * p as f64) + 0.3,
        })
        .collect()
}

/// `f(x; θ) = ½ Σ_i c_i θ_i² + θᵀ g(x)` with curvatures `c_i` spread evenly
/// over `[μ, L1]` and `g` from [`synthetic_holder_components`].
pub fn synthetic_holder_problem_with(
    eta: f64,
    d: usize,
    p: usize,
    l2_target: f64,
    mu: f64,
    l1: f64,
) -> Result<LossProblem> {
    if !(eta > 0.0) {
        return Err(Error::Input(format!("eta must be positive, got {eta}")));
    }
    if !(l2_target > 0.0) {
        return Err(Error::Input(format!("L2 target must be positive, got {l2_target}")));
    }
    let comps = synthetic_holder_components(eta, p, l2_target);
    let curv: Vec<f64> = (0..p)
        .map(|i| {
            if p == 1 {
                mu
            } else {
                mu + (l1 - mu) * i as f64 / (p - 1) as f64
            }
        })
        .collect();
    let consts = ProblemConstants {
        mu,
        l1,
        l2: l2_target,
        eta,
    };
    let (c1, g1) = (curv.clone(), comps.clone());
    let (c2, g2) = (curv.clone(), comps.clone());
    let problem = LossProblem::new(
        "synthetic-holder",
        d,
        p,
        consts,
        move |x, th| {
            th.iter()
                .zip(&c1)
                .zip(&g1)
                .map(|((&t, &c), g)| 0.5 * c * t * t + t * g.value(x))
                .sum()
        },
        move |x, th, out| {
            for (((o, &t), &c), g) in out.iter_mut().zip(th).zip(&c2).zip(&g2) {
                *o = c * t + g.value(x);
            }
        },
    )?;
    Ok(problem.with_minimizer(Arc::new(move |data| {
        let n = data.n() as f64;
        let mut gbar = vec![0.0; p];
        for x in data.iter() {
            for (gb, g) in gbar.iter_mut().zip(&comps) {
                *gb += g.value(x) / n;
            }
        }
        let theta: Vec<f64> = gbar.iter().zip(&curv).map(|(g, c)| -g / c).collect();
        let f = -0.5 * gbar.iter().zip(&curv).map(|(g, c)| g * g / c).sum::<f64>();
        Ok((theta, f))
    })))
}

/// Synthetic Hölder problem with `μ = 1`, `L1 = 2`.
pub fn synthetic_holder_problem(eta: f64, d: usize, p: usize, l2_target: f64) -> Result<LossProblem> {
    synthetic_holder_problem_with(eta, d, p, l2_target, 1.0, 2.0)
}

/// First-order oracle that counts its successful queries.
#[derive(Debug)]
pub struct CountingOracle {
    problem: LossProblem,
    count: AtomicU64,
}

impl CountingOracle {
    pub fn new(problem: LossProblem) -> Self {
        Self {
            problem,
            count: AtomicU64::new(0),
        }
    }

    pub fn problem(&self) -> &LossProblem {
        &self.problem
    }

    /// Cumulative number of successful queries `Γ`.
    pub fn count(&self) -> u64 {
        self.count.load(Ordering::SeqCst)
    }

    pub fn query(&self, x: &[f64], theta: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.problem.p()];
        self.query_into(x, theta, &mut out)?;
        Ok(out)
    }

    pub fn query_into(&self, x: &[f64], theta: &[f64], out: &mut [f64]) -> Result<()> {
        if x.len() != self.problem.d() || theta.len() != self.problem.p() || out.len() != self.problem.p() {
            return Err(Error::Input("oracle query has wrong dimensions".into()));
        }
        if x.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Domain(format!("oracle query {x:?} outside [0,1]^d")));
        }
        self.problem.grad_theta_into(x, theta, out);
        self.count.fetch_add(1, Ordering::SeqCst);
        Ok(())
    }
}

/// Per-coordinate affine map used to bring raw data into `[h', 1-h']^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub h_prime: f64,
    pub raw_min: Vec<f64>,
    pub raw_max: Vec<f64>,
}

impl Provenance {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    fn forward(&self, j: usize, v: f64) -> f64 {
        let h = self.h_prime;
        let t = (v - self.raw_min[j]) / (self.raw_max[j] - self.raw_min[j]);
        (h + (1.0 - 2.0 * h) * t).clamp(h, 1.0 - h)
    }

    fn backward(&self, j: usize, v: f64) -> f64 {
        let h = self.h_prime;
        let t = (v - h) / (1.0 - 2.0 * h);
        self.raw_min[j] + t * (self.raw_max[j] - self.raw_min[j])
    }
}

/// Training samples in `[h', 1-h']^d`, stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    d: usize,
    h_prime: f64,
    samples: Vec<f64>,
    provenance: Option<Provenance>,
}

impl Dataset {
    pub fn new(rows: Vec<Vec<f64>>, h_prime: f64) -> Result<Self> {
        let d = rows.first().map(Vec::len).ok_or_else(|| Error::Input("empty dataset".into()))?;
        if d == 0 {
            return Err(Error::Input("samples must have at least one coordinate".into()));
        }
        if !(h_prime > 0.0 && h_prime < 0.5) {
            return Err(Error::Input(format!("margin must lie in (0, 1/2), got {h_prime}")));
        }
        let mut samples = Vec::with_capacity(rows.len() * d);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != d {
                return Err(Error::Input(format!("row {i} has {} coordinates, expected {d}", r.len())));
            }
            if let Some(v) = r.iter().find(|v| !(**v >= h_prime && **v <= 1.0 - h_prime)) {
                return Err(Error::Domain(format!(
                    "sample {i} has coordinate {v} outside [{h_prime}, {}]",
                    1.0 - h_prime
                )));
            }
            samples.extend_from_slice(r);
        }
        Ok(Self {
            d,
            h_prime,
            samples,
            provenance: None,
        })
    }

    pub fn n(&self) -> usize {
        self.samples.len() / self.d
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn h_prime(&self) -> f64 {
        self.h_prime
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.samples[i * self.d..(i + 1) * self.d]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.samples.chunks_exact(self.d)
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.iter().map(<[f64]>::to_vec).collect()
    }

    /// Reads raw samples from CSV (optional header) and rescales them.
    pub fn from_csv_path(path: impl AsRef<Path>, h_prime: f64) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        rescale_dataset(&read_csv_matrix(file)?, h_prime)
    }
}

/// Reads an `n × d` matrix of reals. A first row that does not parse as
/// numbers is treated as a header.
pub fn read_csv_matrix<R: Read>(reader: R) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(r) => rows.push(r),
            Err(_) if i == 0 => continue,
            Err(e) => return Err(Error::Input(format!("CSV row {}: {e}", i + 1))),
        }
    }
    if rows.is_empty() {
        return Err(Error::Input("CSV contains no samples".into()));
    }
    Ok(rows)
}

/// Per-coordinate affine map of raw data onto `[h', 1-h']`.
pub fn rescale_dataset(raw: &[Vec<f64>], h_prime: f64) -> Result<Dataset> {
    let d = raw.first().map(Vec::len).ok_or_else(|| Error::Input("empty dataset".into()))?;
    let mut raw_min = vec![f64::INFINITY; d];
    let mut raw_max = vec![f64::NEG_INFINITY; d];
    for (i, r) in raw.iter().enumerate() {
        if r.len() != d {
            return Err(Error::Input(format!("row {i} has {} coordinates, expected {d}", r.len())));
        }
        for j in 0..d {
            if !r[j].is_finite() {
                return Err(Error::DegenerateRange(j));
            }
            raw_min[j] = raw_min[j].min(r[j]);
            raw_max[j] = raw_max[j].max(r[j]);
        }
    }
    if let Some(j) = (0..d).find(|&j| !(raw_max[j] > raw_min[j])) {
        return Err(Error::DegenerateRange(j));
    }
    let prov = Provenance {
        h_prime,
        raw_min,
        raw_max,
    };
    let rows = raw
        .iter()
        .map(|r| r.iter().enumerate().map(|(j, &v)| prov.forward(j, v)).collect())
        .collect();
    let mut ds = Dataset::new(rows, h_prime)?;
    ds.provenance = Some(prov);
    Ok(ds)
}

/// Maps rescaled samples back to raw coordinates.
pub fn inverse_rescale(prov: &Provenance, data: &Dataset) -> Vec<Vec<f64>> {
    data.iter()
        .map(|r| r.iter().enumerate().map(|(j, &v)| prov.backward(j, v)).collect())
        .collect()
}

/// Synthetic regression data in `[margin, 1-margin]^d`: features uniform, the
/// label a noisy linear function of them.
pub fn synthetic_regression_data(n: usize, d: usize, margin: f64, seed: u64) -> Result<Dataset> {
    if n == 0 || d < 2 {
        return Err(Error::Input(format!("need n >= 1 and d >= 2, got n={n}, d={d}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = (margin, 1.0 - margin);
    let p = d - 1;
    let rows = (0..n)
        .map(|_| {
            let mut r: Vec<f64> = (0..p).map(|_| rng.gen_range(lo..=hi)).collect();
            let mean = r.iter().sum::<f64>() / p as f64;
            let noise: f64 = rng.gen_range(-0.1..=0.1);
            r.push((0.2 + 0.6 * mean + noise).clamp(lo, hi));
            r
        })
        .collect();
    Dataset::new(rows, margin)
}

/// `F(θ) = (1/n) Σ_i f(x^(i); θ)`.
pub fn erm_objective(problem: &LossProblem, data: &Dataset, theta: &[f64]) -> Result<f64> {
    problem.check_dims(data, theta)?;
    let n = data.n() as f64;
    Ok(data.iter().map(|x| problem.loss(x, theta)).sum::<f64>() / n)
}

/// `∇F(θ)`, computed directly and not counted against any oracle.
pub fn erm_gradient(problem: &LossProblem, data: &Dataset, theta: &[f64]) -> Result<Vec<f64>> {
    problem.check_dims(data, theta)?;
    let n = data.n() as f64;
    let mut acc = vec![0.0; problem.p()];
    let mut g = vec![0.0; problem.p()];
    for x in data.iter() {
        problem.grad_theta_into(x, theta, &mut g);
        for (a, gi) in acc.iter_mut().zip(&g) {
            *a += gi;
        }
    }
    acc.iter_mut().for_each(|a| *a /= n);
    Ok(acc)
}

/// `F_*` by long exact gradient descent, for problems without a closed form.
pub fn f_star_by_descent(problem: &LossProblem, data: &Dataset, max_iter: usize, tol: f64) -> Result<f64> {
    let mut theta = vec![0.0; problem.p()];
    let mut f_prev = erm_objective(problem, data, &theta)?;
    for _ in 0..max_iter {
        let g = erm_gradient(problem, data, &theta)?;
        for (t, gi) in theta.iter_mut().zip(&g) {
            *t -= gi / problem.l1();
        }
        let f = erm_objective(problem, data, &theta)?;
        if (f_prev - f).abs() <= tol {
            return Ok(f);
        }
        f_prev = f;
    }
    Ok(f_prev)
}

/// `max_i |central difference_i - ∂f/∂θ_i| / (1 + |∂f/∂θ_i|)`.
pub fn finite_diff_check(problem: &LossProblem, x: &[f64], theta: &[f64], step: f64) -> f64 {
    let g = problem.grad_theta(x, theta);
    let mut th = theta.to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..theta.len() {
        th[i] = theta[i] + step;
        let fp = problem.loss(x, &th);
        th[i] = theta[i] - step;
        let fm = problem.loss(x, &th);
        th[i] = theta[i];
        let fd = (fp - fm) / (2.0 * step);
        worst = worst.max((fd - g[i]).abs() / (1.0 + g[i].abs()));
    }
    worst
}

/// `|g(x) - Σ_{|s|≤l} ∇^s g(u)/s! (x-u)^s|`.
pub fn taylor_remainder<G: TaylorFunction + ?Sized>(g: &G, l: u32, x: &[f64], u: &[f64]) -> Result<f64> {
    let layout = multi_index_set(x.len(), l)?;
    let diff: Vec<f64> = x.iter().zip(u).map(|(a, b)| a - b).collect();
    let uvec = layout.u_vector(&diff);
    let poly: f64 = layout
        .indices()
        .iter()
        .zip(&uvec)
        .map(|(s, us)| g.derivative(s, u) * us)
        .sum();
    Ok((g.value(x) - poly).abs())
}

/// Whether the Taylor remainder of order `l = ceil(η) - 1` is within
/// `(L2 / l!) ‖x - u‖₁^η`.
pub fn taylor_remainder_check<G: TaylorFunction + ?Sized>(
    g: &G,
    eta: f64,
    l2: f64,
    x: &[f64],
    u: &[f64],
) -> Result<bool> {
    let l = holder_order(eta);
    let rem = taylor_remainder(g, l, x, u)?;
    let l_fact: f64 = (1..=l).map(f64::from).product();
    let dist: f64 = x.iter().zip(u).map(|(a, b)| (a - b).abs()).sum();
    let bound = l2 / l_fact * dist.powf(eta);
    // rounding in the Taylor polynomial when the remainder is exactly zero
    Ok(rem <= bound + 1e-12 * (1.0 + g.value(x).abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop_assert, proptest, ProptestConfig};

    fn one_sample(x: Vec<f64>) -> Dataset {
        Dataset::new(vec![x], 0.05).unwrap()
    }

    #[test]
    fn ridge_gradient_at_zero() {
        let pr = ridge_problem(0.1, 2).unwrap();
        let g = pr.grad_theta(&[0.5, 1.0], &[0.0]);
        assert!((g[0] + 1.0).abs() < 1e-15);
        assert_eq!(pr.mu(), 0.2);
        assert!((pr.l1() - 2.2).abs() < 1e-15);
        assert_eq!(pr.p(), 1);
    }

    #[test]
    fn ridge_closed_form_is_stationary() {
        let pr = ridge_problem(0.1, 3).unwrap();
        let data = one_sample(vec![0.3, 0.6, 0.8]);
        let (theta, f) = pr.exact_minimizer(&data).unwrap().unwrap();
        let g = erm_gradient(&pr, &data, &theta).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-10));
        assert!((erm_objective(&pr, &data, &theta).unwrap() - f).abs() < 1e-10);
        assert_eq!(pr.f_star(&data).unwrap(), f);
    }

    #[test]
    fn ridge_f_star_matches_independent_solve() {
        // 1 feature: θ* = mean(xy) / (mean(x²) + λ)
        let data = synthetic_regression_data(40, 2, 0.1, 7).unwrap();
        let lam = 0.1;
        let n = data.n() as f64;
        let sxy: f64 = data.iter().map(|r| r[0] * r[1]).sum::<f64>() / n;
        let sxx: f64 = data.iter().map(|r| r[0] * r[0]).sum::<f64>() / n;
        let t = sxy / (sxx + lam);
        let pr = ridge_problem(lam, 2).unwrap();
        let f_direct = erm_objective(&pr, &data, &[t]).unwrap();
        let (theta, f) = ridge_closed_form(lam, &data).unwrap();
        assert!((theta[0] - t).abs() < 1e-12);
        assert!((f - f_direct).abs() < 1e-10);
    }

    #[test]
    fn missing_f_star_is_config_error() {
        let pr = LossProblem::new(
            "bb",
            1,
            1,
            ProblemConstants {
                mu: 1.0,
                l1: 1.0,
                l2: 1.0,
                eta: 1.0,
            },
            |_, t| t[0] * t[0],
            |_, t, o| o[0] = 2.0 * t[0],
        )
        .unwrap();
        let data = one_sample(vec![0.5]);
        assert!(matches!(pr.f_star(&data), Err(Error::Config(_))));
        assert_eq!(pr.clone().with_f_star_hint(0.0).f_star(&data).unwrap(), 0.0);
    }

    #[test]
    fn oracle_counting() {
        let o = CountingOracle::new(ridge_problem(0.1, 2).unwrap());
        o.query(&[0.5, 1.0], &[0.0]).unwrap();
        o.query(&[0.2, 0.3], &[1.0]).unwrap();
        assert_eq!(o.count(), 2);
        assert!(matches!(o.query(&[1.5, 0.3], &[1.0]), Err(Error::Domain(_))));
        assert_eq!(o.count(), 2);
    }

    #[test]
    fn oracle_counter_is_linearizable() {
        use rayon::prelude::*;
        let o = CountingOracle::new(quadratic_problem(1, 2).unwrap());
        (0..10_000).into_par_iter().for_each(|i| {
            let x = if i % 10 == 0 { 2.0 } else { 0.5 };
            let _ = o.query(&[x], &[1.0, 2.0]);
        });
        assert_eq!(o.count(), 9_000);
    }

    #[test]
    fn synthetic_problem_examples() {
        let pr = synthetic_holder_problem(4.0, 1, 2, 1.0).unwrap();
        assert_eq!(pr.l(), 3);
        let comps = synthetic_holder_components(4.0, 2, 1.0);
        let g = pr.grad_theta(&[0.4], &[0.0, 0.0]);
        for (gi, c) in g.iter().zip(&comps) {
            assert_eq!(*gi, c.value(&[0.4]));
        }
        let data = synthetic_regression_data(30, 1 + 1, 0.1, 1).unwrap();
        let pr = synthetic_holder_problem(2.0, 2, 3, 5.0).unwrap();
        let (theta, f) = pr.exact_minimizer(&data).unwrap().unwrap();
        assert!(erm_gradient(&pr, &data, &theta).unwrap().iter().all(|v| v.abs() < 1e-12));
        assert!((erm_objective(&pr, &data, &theta).unwrap() - f).abs() < 1e-12);
    }

    #[test]
    fn synthetic_holder_probe() {
        // dense sampling of the order-l derivative at d = 1
        for eta in [1.5, 2.0, 2.5, 4.0] {
            let l = holder_order(eta);
            let alpha = eta - l as f64;
            for g in synthetic_holder_components(eta, 3, 2.0) {
                let s = MultiIndex::new(vec![l]);
                let pts: Vec<f64> = (0..=400).map(|k| k as f64 / 400.0).collect();
                let vals: Vec<f64> = pts.iter().map(|&y| g.derivative(&s, &[y])).collect();
                let mut worst: f64 = 0.0;
                for i in 0..pts.len() {
                    for j in i + 1..pts.len() {
                        let q = (vals[i] - vals[j]).abs() / (pts[j] - pts[i]).powf(alpha);
                        worst = worst.max(q);
                    }
                }
                assert!(worst <= 2.0 * (1.0 + 1e-12), "eta={eta}: {worst}");
            }
        }
    }

    #[test]
    fn erm_examples() {
        let pr = ridge_problem(0.1, 2).unwrap();
        let data = synthetic_regression_data(25, 2, 0.1, 3).unwrap();
        let th = [0.7];
        assert!(erm_objective(&pr, &data, &[0.3, 0.1]).is_err());
        let single = one_sample(data.sample(0).to_vec());
        assert_eq!(erm_objective(&pr, &single, &th).unwrap(), pr.loss(data.sample(0), &th));
        let mut rows = data.rows();
        rows.extend(data.rows());
        let doubled = Dataset::new(rows, 0.1).unwrap();
        let a = erm_objective(&pr, &data, &th).unwrap();
        let b = erm_objective(&pr, &doubled, &th).unwrap();
        assert!((a - b).abs() <= 1e-15 * a.abs().max(1.0));
    }

    #[test]
    fn rescale_examples() {
        let raw = vec![vec![0.0, 5.0], vec![10.0, 7.0], vec![2.5, 6.0]];
        let ds = rescale_dataset(&raw, 0.1).unwrap();
        assert!((ds.sample(0)[0] - 0.1).abs() < 1e-15);
        assert!((ds.sample(1)[0] - 0.9).abs() < 1e-15);
        let back = inverse_rescale(ds.provenance().unwrap(), &ds);
        for (r, b) in raw.iter().zip(&back) {
            for (x, y) in r.iter().zip(b) {
                assert!((x - y).abs() <= 1e-12);
            }
        }
        let ident = vec![vec![0.1], vec![0.9], vec![0.37]];
        let ds = rescale_dataset(&ident, 0.1).unwrap();
        for (r, s) in ident.iter().zip(ds.iter()) {
            assert!((r[0] - s[0]).abs() < 1e-15);
        }
        assert!(matches!(
            rescale_dataset(&[vec![1.0, 2.0], vec![1.0, 3.0]], 0.1),
            Err(Error::DegenerateRange(0))
        ));
        let prov = ds.provenance().unwrap();
        assert_eq!(&Provenance::from_json(&prov.to_json().unwrap()).unwrap(), prov);
    }

    #[test]
    fn csv_ingestion() {
        let with_header = "a,b\n1,2\n3,5\n";
        let rows = read_csv_matrix(with_header.as_bytes()).unwrap();
        assert_eq!(rows, vec![vec![1.0, 2.0], vec![3.0, 5.0]]);
        let rows = read_csv_matrix("0.5, 1e-1\n2,3\n".as_bytes()).unwrap();
        assert_eq!(rows[0], vec![0.5, 0.1]);
        assert!(read_csv_matrix("1,2\nx,3\n".as_bytes()).is_err());
    }

    #[test]
    fn finite_differences() {
        let q = quadratic_problem(1, 3).unwrap();
        assert!(finite_diff_check(&q, &[0.5], &[0.3, -1.0, 2.0], 1e-3) <= 1e-10);
        let r = ridge_problem(0.1, 3).unwrap();
        assert!(finite_diff_check(&r, &[0.3, 0.6, 0.2], &[0.4, -0.7], 1e-5) <= 1e-6);
        let s = synthetic_holder_problem(2.5, 2, 2, 3.0).unwrap();
        assert!(finite_diff_check(&s, &[0.3, 0.6], &[0.4, -0.7], 1e-5) <= 1e-6);
    }

    #[test]
    fn taylor_examples() {
        let poly = Polynomial {
            terms: vec![(2.0, MultiIndex::new(vec![1, 1])), (-1.0, MultiIndex::new(vec![0, 2]))],
        };
        assert!(taylor_remainder(&poly, 2, &[0.9, 0.1], &[0.2, 0.4]).unwrap() < 1e-14);
        assert!(taylor_remainder_check(&poly, 3.0, 0.0, &[0.9, 0.1], &[0.2, 0.4]).unwrap());
        let g = SinRidge {
            amplitude: 1.0,
            omega: 6.0,
            phase: 0.0,
        };
        assert!(taylor_remainder_check(&g, 2.0, 36.0, &[0.3], &[0.3]).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let x: f64 = rng.gen();
            let u: f64 = rng.gen();
            assert!(taylor_remainder_check(&g, 2.0, 36.0, &[x], &[u]).unwrap());
        }
    }

    fn shipped() -> Vec<LossProblem> {
        vec![
            ridge_problem(0.1, 2).unwrap(),
            ridge_problem(0.5, 3).unwrap(),
            synthetic_holder_problem(2.0, 2, 3, 1.0).unwrap(),
            synthetic_holder_problem_with(4.0, 1, 2, 1.0, 0.5, 3.0).unwrap(),
            quadratic_problem(2, 2).unwrap(),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn strong_convexity_and_lipschitz(
            seed in any::<u64>(),
            which in 0usize..5,
        ) {
            let pr = &shipped()[which];
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..pr.d()).map(|_| rng.gen()).collect();
            let a: Vec<f64> = (0..pr.p()).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let b: Vec<f64> = (0..pr.p()).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let ga = pr.grad_theta(&x, &a);
            let gb = pr.grad_theta(&x, &b);
            let diff: Vec<f64> = a.iter().zip(&b).map(|(u, v)| u - v).collect();
            let dist2 = dot(&diff, &diff);
            let lhs = pr.loss(&x, &a) - pr.loss(&x, &b);
            let rhs = dot(&gb, &diff) + 0.5 * pr.mu() * dist2;
            prop_assert!(lhs >= rhs - 1e-10 * (1.0 + lhs.abs()));
            let gd: Vec<f64> = ga.iter().zip(&gb).map(|(u, v)| u - v).collect();
            prop_assert!(dot(&gd, &gd).sqrt() <= pr.l1() * dist2.sqrt() * (1.0 + 1e-12) + 1e-12);
        }

        #[test]
        fn erm_gradient_is_mean_of_sample_gradients(seed in any::<u64>()) {
            let pr = ridge_problem(0.3, 3).unwrap();
            let data = synthetic_regression_data(17, 3, 0.05, seed).unwrap();
            let th = [0.4, -0.2];
            let g = erm_gradient(&pr, &data, &th).unwrap();
            for i in 0..2 {
                let h = 1e-5;
                let mut tp = th;
                tp[i] += h;
                let mut tm = th;
                tm[i] -= h;
                let fd = (erm_objective(&pr, &data, &tp).unwrap() - erm_objective(&pr, &data, &tm).unwrap()) / (2.0 * h);
                prop_assert!((fd - g[i]).abs() < 1e-7);
            }
        }
    }
}
