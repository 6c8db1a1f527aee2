//! Local polynomial interpolation on the virtual grid
//! `G_m = {u ∈ [0,1]^d : m·u_i ∈ {1,…,m}}`.
//!
//! For a query point `x ∈ [h, 1-h]^d` the moment matrix
//!
//! ```text
//! B(x) = (mh)^{-d} Σ_y U((y-x)/h) U((y-x)/h)ᵀ Π_j K((y_j-x_j)/h)
//! ```
//!
//! is assembled from the grid points inside the window, and the interpolation
//! weight of `y` is the first coordinate of
//! `(mh)^{-d} Π_j K(·) B(x)^{-1} U((y-x)/h)`. Because `B` is symmetric this is
//! `(mh)^{-d} Π_j K(·) vᵀ U((y-x)/h)` with `B v = e_1`, so a single solve per
//! query point suffices.

use std::collections::HashMap;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::kernels::Kernel;
use crate::multiindex::{multi_index_set, BasisLayout};
use crate::spectra::lambda_log;
use crate::{Error, Result};

/// Default threshold on the estimated condition number of `B(x)`.
pub const DEFAULT_SOLVE_TOLERANCE: f64 = 1e12;

/// `3e`, the recurring per-dimension constant of the theory-mode formulas.
const THREE_E: f64 = 3.0 * std::f64::consts::E;

/// The uniform grid `G_m` in `d` dimensions, enumerated row-major with the
/// first axis most significant. Points are generated on demand.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UniformGrid {
    m: usize,
    d: usize,
    len: usize,
}

impl UniformGrid {
    pub fn new(m: usize, d: usize, cap: u64) -> Result<Self> {
        if m == 0 || d == 0 {
            return Err(Error::Input(format!("grid needs m >= 1 and d >= 1, got m={m}, d={d}")));
        }
        let points = (m as f64).powi(d as i32);
        let exact = (m as u64).checked_pow(d as u32);
        match exact {
            Some(n) if n <= cap => Ok(Self {
                m,
                d,
                len: n as usize,
            }),
            _ => Err(Error::GridCap { points, cap }),
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// `m^d`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Coordinate `k/m` of the `k`-th grid line, `k ∈ 1..=m`.
    pub fn coordinate(&self, k: usize) -> f64 {
        k as f64 / self.m as f64
    }

    /// Per-axis positions `k_j ∈ 1..=m` of the grid point with flat index `idx`.
    pub fn axis_positions(&self, mut idx: usize) -> Vec<usize> {
        let mut ks = vec![0; self.d];
        for slot in ks.iter_mut().rev() {
            *slot = idx % self.m + 1;
            idx /= self.m;
        }
        ks
    }

    pub fn flat_index(&self, ks: &[usize]) -> usize {
        ks.iter().fold(0, |acc, &k| acc * self.m + (k - 1))
    }

    pub fn point(&self, idx: usize) -> Vec<f64> {
        let mut p = vec![0.0; self.d];
        self.point_into(idx, &mut p);
        p
    }

    pub fn point_into(&self, mut idx: usize, out: &mut [f64]) {
        for slot in out.iter_mut().rev() {
            *slot = self.coordinate(idx % self.m + 1);
            idx /= self.m;
        }
    }

    pub fn points(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.len).map(move |i| self.point(i))
    }

    /// Flat indices of all grid points with `|y_j - x_j| ≤ h` on every axis,
    /// in increasing order. Membership uses the same `|(y-x)/h| ≤ 1` test as
    /// the kernel so that window and kernel support agree exactly.
    pub fn window(&self, x: &[f64], h: f64) -> Vec<usize> {
        let mut ranges = Vec::with_capacity(self.d);
        for &xj in x {
            let lo = ((xj - h) * self.m as f64).floor() as i64 - 1;
            let hi = ((xj + h) * self.m as f64).ceil() as i64 + 1;
            let ks: Vec<usize> = (lo.max(1)..=hi.min(self.m as i64))
                .map(|k| k as usize)
                .filter(|&k| ((self.coordinate(k) - xj) / h).abs() <= 1.0)
                .collect();
            if ks.is_empty() {
                return Vec::new();
            }
            ranges.push(ks);
        }
        let mut out = Vec::with_capacity(ranges.iter().map(Vec::len).product());
        let mut cursor = vec![0usize; self.d];
        loop {
            let ks: Vec<usize> = cursor.iter().zip(&ranges).map(|(&c, r)| r[c]).collect();
            out.push(self.flat_index(&ks));
            // odometer increment, last axis fastest => increasing flat index
            let mut axis = self.d;
            loop {
                if axis == 0 {
                    return out;
                }
                axis -= 1;
                cursor[axis] += 1;
                if cursor[axis] < ranges[axis].len() {
                    break;
                }
                cursor[axis] = 0;
            }
        }
    }
}

/// Free-function constructor matching [`UniformGrid::new`].
pub fn uniform_grid(m: usize, d: usize, cap: u64) -> Result<UniformGrid> {
    UniformGrid::new(m, d, cap)
}

/// Practical-mode interpolation parameters.
#[derive(Clone, Debug)]
pub struct InterpConfig {
    pub m: usize,
    pub h: f64,
    pub l: u32,
    pub kernel: Kernel,
    pub solve_tolerance: f64,
}

impl InterpConfig {
    pub fn new(m: usize, h: f64, l: u32, kernel: Kernel) -> Result<Self> {
        let cfg = Self {
            m,
            h,
            l,
            kernel,
            solve_tolerance: DEFAULT_SOLVE_TOLERANCE,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_solve_tolerance(mut self, tol: f64) -> Self {
        self.solve_tolerance = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h < 0.5) {
            return Err(Error::Input(format!("bandwidth h must lie in (0, 1/2), got {}", self.h)));
        }
        if self.m == 0 {
            return Err(Error::Input("grid size m must be at least 1".into()));
        }
        if !(self.solve_tolerance > 1.0) {
            return Err(Error::Input("solve tolerance must exceed 1".into()));
        }
        Ok(())
    }
}

/// Interpolation weights `{w*_y(x)}` for one query point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalFit {
    pub x: Vec<f64>,
    /// `(flat grid index, w*_y(x))` for every grid point in the window, by index.
    pub weights: Vec<(usize, f64)>,
    /// `λ_max(B) / λ_min(B)`.
    pub condition: f64,
    pub lambda_min: f64,
}

impl LocalFit {
    pub fn active_count(&self) -> usize {
        self.weights.len()
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().map(|&(_, w)| w).sum()
    }

    pub fn l1_norm(&self) -> f64 {
        self.weights.iter().map(|&(_, w)| w.abs()).sum()
    }

    /// Deterministic text form: a header with the query point followed by one
    /// `index weight` line per active grid point, 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("x");
        for v in &self.x {
            let _ = write!(out, " {v:.16e}");
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "condition {:.16e}", self.condition);
        let _ = writeln!(out, "lambda_min {:.16e}", self.lambda_min);
        for (i, w) in &self.weights {
            let _ = writeln!(out, "{i} {w:.16e}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |line: &str| Error::Input(format!("malformed LocalFit line: {line:?}"));
        let mut lines = text.lines();
        let parse_f = |s: &str| s.parse::<f64>().map_err(|_| bad(s));
        let header = lines.next().ok_or_else(|| bad(""))?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some("x") {
            return Err(bad(header));
        }
        let x = parts.map(parse_f).collect::<Result<Vec<_>>>()?;
        let mut scalar = |key: &str| -> Result<f64> {
            let line = lines.next().ok_or_else(|| bad(key))?;
            match line.split_once(' ') {
                Some((k, v)) if k == key => parse_f(v),
                _ => Err(bad(line)),
            }
        };
        let condition = scalar("condition")?;
        let lambda_min = scalar("lambda_min")?;
        let weights = lines
            .filter(|l| !l.trim().is_empty())
            .map(|line| {
                let (i, w) = line.split_once(' ').ok_or_else(|| bad(line))?;
                Ok((i.parse::<usize>().map_err(|_| bad(line))?, parse_f(w)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            x,
            weights,
            condition,
            lambda_min,
        })
    }
}

/// Grid, configuration and basis bundled for repeated fits.
#[derive(Clone, Debug)]
pub struct LocalInterpolator {
    cfg: InterpConfig,
    grid: UniformGrid,
    layout: BasisLayout,
}

impl LocalInterpolator {
    pub fn new(cfg: InterpConfig, grid: UniformGrid) -> Result<Self> {
        cfg.validate()?;
        if cfg.m != grid.m() {
            return Err(Error::Input(format!(
                "config grid size {} does not match grid with m={}",
                cfg.m,
                grid.m()
            )));
        }
        let layout = multi_index_set(grid.d(), cfg.l)?;
        Ok(Self { cfg, grid, layout })
    }

    pub fn config(&self) -> &InterpConfig {
        &self.cfg
    }

    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    pub fn layout(&self) -> &BasisLayout {
        &self.layout
    }

    fn check_domain(&self, x: &[f64]) -> Result<()> {
        let h = self.cfg.h;
        if x.len() != self.grid.d() {
            return Err(Error::Input(format!(
                "query point has dimension {}, grid has {}",
                x.len(),
                self.grid.d()
            )));
        }
        if x.iter().any(|&v| !(v >= h && v <= 1.0 - h)) {
            return Err(Error::Domain(format!("{x:?} is outside [h, 1-h]^d with h = {h}")));
        }
        Ok(())
    }

    /// Window points with their kernel weight and basis vector.
    fn window_terms(&self, x: &[f64]) -> Vec<(usize, f64, Vec<f64>)> {
        let h = self.cfg.h;
        let d = self.grid.d();
        let mut y = vec![0.0; d];
        let mut t = vec![0.0; d];
        self.grid
            .window(x, h)
            .into_iter()
            .filter_map(|idx| {
                self.grid.point_into(idx, &mut y);
                let kw = self.cfg.kernel.product(x, &y, h);
                if kw == 0.0 {
                    return None;
                }
                for j in 0..d {
                    t[j] = (y[j] - x[j]) / h;
                }
                Some((idx, kw, self.layout.u_vector(&t)))
            })
            .collect()
    }

    fn scale(&self) -> f64 {
        (self.cfg.m as f64 * self.cfg.h).powi(self.grid.d() as i32).recip()
    }

    fn assemble(&self, terms: &[(usize, f64, Vec<f64>)]) -> DMatrix<f64> {
        let dim = self.layout.size();
        let mut b = DMatrix::<f64>::zeros(dim, dim);
        for (_, kw, u) in terms {
            for r in 0..dim {
                let ur = kw * u[r];
                for s in r..dim {
                    b[(r, s)] += ur * u[s];
                }
            }
        }
        let scale = self.scale();
        for r in 0..dim {
            for s in r..dim {
                let v = b[(r, s)] * scale;
                b[(r, s)] = v;
                b[(s, r)] = v;
            }
        }
        b
    }

    /// `B(x)` for `x ∈ [h, 1-h]^d`.
    pub fn b_matrix(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_domain(x)?;
        Ok(self.assemble(&self.window_terms(x)))
    }

    /// Interpolation weights at `x`.
    pub fn local_fit(&self, x: &[f64]) -> Result<LocalFit> {
        self.check_domain(x)?;
        let terms = self.window_terms(x);
        let b = self.assemble(&terms);
        let ill = |lambda_min: f64, condition: f64| Error::IllPosedFit {
            location: format!("{x:?}"),
            lambda_min,
            condition,
        };
        let eig = SymmetricEigen::new(b.clone()).eigenvalues;
        let lambda_min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        let lambda_max = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let condition = if lambda_min > 0.0 {
            lambda_max / lambda_min
        } else {
            f64::INFINITY
        };
        if !(condition <= self.cfg.solve_tolerance) {
            return Err(ill(lambda_min, condition));
        }
        let chol = b.cholesky().ok_or_else(|| ill(lambda_min, condition))?;
        let mut e1 = DVector::<f64>::zeros(self.layout.size());
        e1[0] = 1.0;
        let v = chol.solve(&e1);
        let scale = self.scale();
        let weights = terms
            .iter()
            .map(|(idx, kw, u)| {
                let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                (*idx, scale * kw * dot)
            })
            .collect();
        Ok(LocalFit {
            x: x.to_vec(),
            weights,
            condition,
            lambda_min,
        })
    }

    /// Fits for many query points, in input order.
    pub fn fit_many(&self, xs: &[Vec<f64>]) -> Vec<Result<LocalFit>> {
        xs.par_iter().map(|x| self.local_fit(x)).collect()
    }
}

/// `B(x)` without a pre-built interpolator.
pub fn b_matrix(cfg: &InterpConfig, grid: &UniformGrid, x: &[f64]) -> Result<DMatrix<f64>> {
    LocalInterpolator::new(cfg.clone(), grid.clone())?.b_matrix(x)
}

/// Interpolation weights without a pre-built interpolator.
pub fn local_fit(cfg: &InterpConfig, grid: &UniformGrid, x: &[f64]) -> Result<LocalFit> {
    LocalInterpolator::new(cfg.clone(), grid.clone())?.local_fit(x)
}

/// `Σ_y values[y] · w*_y(x)` with `values` indexed by flat grid index.
pub fn interpolate(fit: &LocalFit, values: &[f64]) -> Result<f64> {
    fit.weights.iter().try_fold(0.0, |acc, &(idx, w)| {
        let v = values.get(idx).copied().ok_or(Error::MissingValue(idx))?;
        Ok(acc + v * w)
    })
}

/// As [`interpolate`], with values supplied only on (a superset of) the active points.
pub fn interpolate_map(fit: &LocalFit, values: &HashMap<usize, f64>) -> Result<f64> {
    fit.weights.iter().try_fold(0.0, |acc, &(idx, w)| {
        let v = values.get(&idx).copied().ok_or(Error::MissingValue(idx))?;
        Ok(acc + v * w)
    })
}

/// Largest `|φ̂(x) - g(x)|` over the probe points.
pub fn sup_error<F, G>(fit_factory: F, grid: &UniformGrid, g: G, probes: &[Vec<f64>]) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<LocalFit>,
    G: Fn(&[f64]) -> f64,
{
    let mut worst: f64 = 0.0;
    let mut y = vec![0.0; grid.d()];
    for x in probes {
        let fit = fit_factory(x)?;
        let mut approx = 0.0;
        for &(idx, w) in &fit.weights {
            grid.point_into(idx, &mut y);
            approx += g(&y) * w;
        }
        worst = worst.max((approx - g(x)).abs());
    }
    Ok(worst)
}

/// Theory-mode grid size, carried in log-space since it is astronomically large
/// outside tiny `(d, l)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoryGridSize {
    /// `ceil(m)` when it is exactly representable (below `2^53`).
    pub m: Option<u64>,
    pub log10_m: f64,
    /// `m^d` fits under the grid cap.
    pub feasible: bool,
}

/// Natural log of the pre-ceiling grid size
/// `110(2L2+1)c/b · d(3e)^d / Λ(d,l)² · δ^{-1/η}`.
pub fn theory_grid_size_ln(delta: f64, d: usize, l: u32, eta: f64, l2: f64, b: f64, c: f64) -> f64 {
    let df = d as f64;
    (110.0 * (2.0 * l2 + 1.0) * c / b).ln() + df.ln() + df * THREE_E.ln()
        - 2.0 * lambda_log(d, l).ln_value
        - delta.ln() / eta
}

#[allow(clippy::too_many_arguments)]
pub fn theory_grid_size(
    delta: f64,
    d: usize,
    l: u32,
    eta: f64,
    l2: f64,
    b: f64,
    c: f64,
    cap: u64,
) -> TheoryGridSize {
    let ln_m = theory_grid_size_ln(delta, d, l, eta, l2, b, c);
    let (m, log10_m) = if ln_m < 53.0 * std::f64::consts::LN_2 {
        let m = ln_m.exp().ceil().max(1.0);
        (Some(m as u64), m.log10())
    } else {
        (None, ln_m / std::f64::consts::LN_10)
    };
    let feasible = (d as f64) * log10_m <= (cap as f64).log10();
    TheoryGridSize {
        m,
        log10_m,
        feasible,
    }
}

/// Theory-mode bandwidth `h = 4l(3e)^d / (mΛ(d,l))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoryBandwidth {
    pub h: f64,
    pub ln_h: f64,
    /// `h ≥ 1/2`: the theory bandwidth is not admissible, use practical mode.
    pub practical_required: bool,
}

pub fn theory_bandwidth_from_ln_m(ln_m: f64, d: usize, l: u32) -> TheoryBandwidth {
    let ln_h = (4.0 * l as f64).ln() + d as f64 * THREE_E.ln() - ln_m - lambda_log(d, l).ln_value;
    let h = ln_h.exp();
    TheoryBandwidth {
        h,
        ln_h,
        practical_required: !(h < 0.5),
    }
}

pub fn theory_bandwidth(m: u64, d: usize, l: u32) -> TheoryBandwidth {
    theory_bandwidth_from_ln_m((m as f64).ln(), d, l)
}

/// Natural log of the data margin `h' = 2b/(55(2L2+1)c) · Λ(d,l) l / d`,
/// the largest admissible theory bandwidth.
pub fn data_margin_ln(d: usize, l: u32, l2: f64, b: f64, c: f64) -> f64 {
    (2.0 * b / (55.0 * (2.0 * l2 + 1.0) * c)).ln() + lambda_log(d, l).ln_value
        + (l as f64 / d as f64).ln()
}
