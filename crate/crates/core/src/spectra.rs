//! The integral moment matrix `𝓑 = ∫_{[-1,1]^d} U(u) U(u)ᵀ du` and its structure.
//!
//! Entries are rational:
//! `𝓑_{r,s} = 1{r+s even} · 2^d / (r! s!) · Π_j 1/(r_j + s_j + 1)`.
//! Writing `U = R·L` with `L` the vector of orthonormal Legendre product
//! polynomials gives the Cholesky factorization `𝓑 = R Rᵀ`, whose diagonal is
//! known in closed form. The determinant identity `det 𝓑 = Π_s R_{s,s}²` is
//! therefore checkable exactly, since every `R_{s,s}²` is rational too.
//!
//! The eigenvalue constant `Λ(d,l)` underflows double-exponentially in `d`
//! and is only ever handled through its natural log.

use nalgebra::{DMatrix, SymmetricEigen};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::multiindex::{binomial, multi_index_set, BasisLayout, MultiIndex};
use crate::{Error, Result};

/// Largest basis size for which determinants are computed in exact arithmetic.
pub const MAX_EXACT_DIM: usize = 30;

/// Largest basis size for which `𝓑` is built at all.
pub const MAX_SCRIPT_B_DIM: usize = 2_000;

/// Smallest `(d, l)` regime (`l ≥ d ≥ 19`) in which `𝓑 ⪰ Λ(d,l) I` is claimed.
pub const THEOREM_MIN_DIM: usize = 19;

fn rational_to_f64(q: &BigRational) -> f64 {
    q.to_f64().unwrap_or_else(|| {
        // numerator and denominator converted separately
        let n = q.numer().to_f64().unwrap_or(f64::INFINITY);
        let d = q.denom().to_f64().unwrap_or(f64::INFINITY);
        n / d
    })
}

/// Exact entry `𝓑_{r,s}`.
pub fn script_b_entry(r: &MultiIndex, s: &MultiIndex) -> BigRational {
    assert_eq!(r.dim(), s.dim(), "multi-index dimensions differ");
    if r.entries().iter().zip(s.entries()).any(|(a, b)| (a + b) % 2 == 1) {
        return BigRational::zero();
    }
    let rf = r.factorial().expect("factorial within exact range");
    let sf = s.factorial().expect("factorial within exact range");
    let mut acc = BigRational::from_integer(BigInt::from(2u32).pow(r.dim() as u32));
    acc /= BigRational::from_integer(BigInt::from(rf) * BigInt::from(sf));
    for (a, b) in r.entries().iter().zip(s.entries()) {
        acc /= BigRational::from_integer(BigInt::from(a + b + 1));
    }
    acc
}

/// `𝓑` for a given `(d, l)` in layout order, exact.
#[derive(Clone, Debug)]
pub struct ScriptB {
    layout: BasisLayout,
    entries: Vec<BigRational>,
}

impl ScriptB {
    pub fn d(&self) -> usize {
        self.layout.d()
    }

    pub fn l(&self) -> u32 {
        self.layout.l()
    }

    pub fn size(&self) -> usize {
        self.layout.size()
    }

    pub fn layout(&self) -> &BasisLayout {
        &self.layout
    }

    pub fn entry(&self, r: usize, s: usize) -> &BigRational {
        &self.entries[r * self.size() + s]
    }

    pub fn to_f64(&self) -> DMatrix<f64> {
        let n = self.size();
        DMatrix::from_fn(n, n, |r, s| rational_to_f64(self.entry(r, s)))
    }

    pub fn trace(&self) -> BigRational {
        (0..self.size()).fold(BigRational::zero(), |acc, i| acc + self.entry(i, i))
    }

    /// Exact determinant by Gaussian elimination over the rationals.
    pub fn det_exact(&self) -> Result<BigRational> {
        let n = self.size();
        if n > MAX_EXACT_DIM {
            return Err(Error::Unsupported(format!(
                "exact determinant limited to D <= {MAX_EXACT_DIM}, got D = {n}"
            )));
        }
        let mut a = self.entries.clone();
        let mut det = BigRational::one();
        for col in 0..n {
            let pivot = (col..n).find(|&r| !a[r * n + col].is_zero());
            let Some(p) = pivot else {
                return Ok(BigRational::zero());
            };
            if p != col {
                for k in 0..n {
                    a.swap(p * n + k, col * n + k);
                }
                det = -det;
            }
            let pv = a[col * n + col].clone();
            det *= &pv;
            for r in col + 1..n {
                if a[r * n + col].is_zero() {
                    continue;
                }
                let factor = &a[r * n + col] / &pv;
                for k in col..n {
                    let delta = &factor * &a[col * n + k];
                    a[r * n + k] -= delta;
                }
            }
        }
        Ok(det)
    }
}

pub fn script_b_matrix(d: usize, l: u32) -> Result<ScriptB> {
    let layout = multi_index_set(d, l)?;
    let n = layout.size();
    if n > MAX_SCRIPT_B_DIM {
        return Err(Error::Unsupported(format!(
            "basis size D = {n} exceeds the cap of {MAX_SCRIPT_B_DIM}"
        )));
    }
    let idx = layout.indices();
    let mut entries = Vec::with_capacity(n * n);
    for r in idx {
        for s in idx {
            entries.push(script_b_entry(r, s));
        }
    }
    Ok(ScriptB { layout, entries })
}

/// Orthonormal Legendre polynomial `L_k(t) = √(k + 1/2) P_k(t)`, via the
/// three-term recurrence for `P_k`.
pub fn legendre(k: u32, t: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, t);
    if k == 0 {
        cur = 1.0;
    }
    for j in 1..k {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0) * t * cur - jf * prev) / (jf + 1.0);
        prev = cur;
        cur = next;
    }
    (k as f64 + 0.5).sqrt() * cur
}

/// `L_r(u) = Π_j L_{r_j}(u_j)`.
pub fn legendre_product(r: &MultiIndex, u: &[f64]) -> f64 {
    r.entries().iter().zip(u).map(|(&k, &t)| legendre(k, t)).product()
}

/// `R_{s,s}² = 4^{|s|} 2^d / (s!)² · Π_j 1/((2s_j+1) binom(2s_j, s_j)²)`, exact.
pub fn cholesky_diagonal_sq_exact(s: &MultiIndex) -> BigRational {
    let sf = BigInt::from(s.factorial().expect("factorial within exact range"));
    let mut acc = BigRational::from_integer(
        BigInt::from(4u32).pow(s.order()) * BigInt::from(2u32).pow(s.dim() as u32),
    );
    acc /= BigRational::from_integer(&sf * &sf);
    for &e in s.entries() {
        let c = BigInt::from(binomial(2 * u64::from(e), u64::from(e)));
        acc /= BigRational::from_integer(BigInt::from(2 * e + 1) * &c * &c);
    }
    acc
}

/// `R_{s,s} = 2^{|s|} 2^{d/2} / s! · Π_j (2s_j+1)^{-1/2} binom(2s_j, s_j)^{-1}`.
pub fn cholesky_diagonal(s: &MultiIndex) -> f64 {
    let d = s.dim() as f64;
    let sf = s.factorial().expect("factorial within exact range") as f64;
    let mut acc = 2f64.powi(s.order() as i32) * 2f64.powf(d / 2.0) / sf;
    for &e in s.entries() {
        acc /= (2.0 * e as f64 + 1.0).sqrt() * binomial(2 * u64::from(e), u64::from(e)) as f64;
    }
    acc
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DetIdentityReport {
    pub d: usize,
    pub l: u32,
    /// `det 𝓑` (exact when `D ≤ MAX_EXACT_DIM`, converted to `f64`).
    pub det_direct: f64,
    /// `Π_s R_{s,s}²` in floating point.
    pub det_cholesky: f64,
    /// `|det_direct - det_cholesky| / |det_direct|`.
    pub relative_gap: f64,
    /// Exact comparison of `det 𝓑` with the exact product of `R_{s,s}²`,
    /// when the exact determinant is available.
    pub exact_match: Option<bool>,
}

pub fn det_identity_check(d: usize, l: u32) -> Result<DetIdentityReport> {
    let b = script_b_matrix(d, l)?;
    let det_cholesky: f64 = b.layout().indices().iter().map(|s| cholesky_diagonal(s).powi(2)).product();
    let (det_direct, exact_match) = if b.size() <= MAX_EXACT_DIM {
        let det = b.det_exact()?;
        let prod = b
            .layout()
            .indices()
            .iter()
            .fold(BigRational::one(), |acc, s| acc * cholesky_diagonal_sq_exact(s));
        (rational_to_f64(&det), Some(det == prod))
    } else {
        let lu = b.to_f64().lu();
        (lu.determinant(), None)
    };
    Ok(DetIdentityReport {
        d,
        l,
        det_direct,
        det_cholesky,
        relative_gap: (det_direct - det_cholesky).abs() / det_direct.abs(),
        exact_match,
    })
}

/// `log Λ(d,l)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogLambda {
    pub d: usize,
    pub l: u32,
    /// Natural log of `Λ(d,l)`.
    pub ln_value: f64,
}

impl LogLambda {
    pub fn log10_value(&self) -> f64 {
        self.ln_value / std::f64::consts::LN_10
    }

    /// `l ≥ d ≥ 19`, where the eigenvalue bound is actually asserted.
    pub fn theorem_regime(&self) -> bool {
        self.l as usize >= self.d && self.d >= THEOREM_MIN_DIM
    }
}

/// `log Λ(d,l) = d·D'·log(πd/(8e²)) + (D'-1)·log(D'-1) - 3l·E·log(l+d)` with
/// `D' = ((l+d)/d)^d` and `E = (e(l+d)/d)^d`, and `0·log 0 = 0` when `l = 0`.
pub fn lambda_log(d: usize, l: u32) -> LogLambda {
    use std::f64::consts::{E, PI};
    let df = d as f64;
    let lf = l as f64;
    let d_prime = ((lf + df) / df).powf(df);
    let e_term = (E * (lf + df) / df).powf(df);
    let entropy = if d_prime > 1.0 {
        (d_prime - 1.0) * (d_prime - 1.0).ln()
    } else {
        0.0
    };
    let ln_value = df * d_prime * (PI * df / (8.0 * E * E)).ln() + entropy
        - 3.0 * lf * e_term * (lf + df).ln();
    LogLambda { d, l, ln_value }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MinEigReport {
    pub lambda_min: f64,
    /// Natural log of `Λ(d,l)`.
    pub log_lambda_bound: f64,
    /// Only true for `l ≥ d ≥ 19`; never at desk scale.
    pub bound_applicable: bool,
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

pub fn min_eig_report(d: usize, l: u32) -> Result<MinEigReport> {
    let b = script_b_matrix(d, l)?;
    let lambda_min = min_eigenvalue(&b.to_f64());
    let log_lambda = lambda_log(d, l);
    let bound_applicable = log_lambda.theorem_regime();
    if bound_applicable && lambda_min.ln() < log_lambda.ln_value {
        return Err(Error::Unsupported(format!(
            "lambda_min = {lambda_min:e} below the claimed bound exp({})",
            log_lambda.ln_value
        )));
    }
    Ok(MinEigReport {
        lambda_min,
        log_lambda_bound: log_lambda.ln_value,
        bound_applicable,
    })
}

/// Summary emitted by the `spectra-check` command.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectraReport {
    pub d: usize,
    pub l: u32,
    #[serde(rename = "D")]
    pub basis_size: usize,
    pub lambda_min: f64,
    pub log_lambda: f64,
    pub det_gap: f64,
    pub trace: f64,
    pub trace_bound: f64,
}

pub fn spectra_check(d: usize, l: u32) -> Result<SpectraReport> {
    let b = script_b_matrix(d, l)?;
    let eig = min_eig_report(d, l)?;
    let det = det_identity_check(d, l)?;
    Ok(SpectraReport {
        d,
        l,
        basis_size: b.size(),
        lambda_min: eig.lambda_min,
        log_lambda: eig.log_lambda_bound,
        det_gap: det.relative_gap,
        trace: rational_to_f64(&b.trace()),
        trace_bound: (2.0 * std::f64::consts::E).powi(d as i32),
    })
}

/// `|q|` as `f64`, for reporting.
pub fn abs_f64(q: &BigRational) -> f64 {
    rational_to_f64(&q.abs())
}
