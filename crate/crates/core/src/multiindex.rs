//! Multi-indices `s ∈ Z₊^d` and the polynomial basis `U(u) = [u^s / s! : |s| ≤ l]`.
//!
//! Indices are kept in strict lexicographic order, so the all-zeros index is
//! always at position 0 and the first coordinate of any weight vector refers
//! to the constant term.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Largest order for which `s!` is computed exactly in `u64`.
pub const MAX_EXACT_ORDER: u32 = 20;

/// Exponent tuple. The derived `Ord` on the inner vector is the
/// lexicographic order for tuples of equal length.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(entries: Vec<u32>) -> Self {
        Self(entries)
    }

    pub fn zeros(d: usize) -> Self {
        Self(vec![0; d])
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Total degree `|s|`.
    pub fn order(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    /// Exact `s! = Π s_j!`; fails once any partial product leaves `u64`.
    pub fn factorial(&self) -> Result<u64> {
        let mut acc: u64 = 1;
        for &e in &self.0 {
            for k in 2..=u64::from(e) {
                acc = acc
                    .checked_mul(k)
                    .ok_or_else(|| Error::Overflow(format!("{}! does not fit in u64", self)))?;
            }
        }
        Ok(acc)
    }

    /// `u^s = Π u_j^{s_j}`, with `0^0 = 1`.
    pub fn monomial(&self, u: &[f64]) -> f64 {
        debug_assert_eq!(u.len(), self.0.len());
        self.0
            .iter()
            .zip(u)
            .map(|(&e, &x)| x.powi(e as i32))
            .product()
    }

    /// Entry-wise sum `r + s`.
    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }
}

impl std::fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, ")")
    }
}

/// `u^s` for a multi-index given as a slice.
pub fn monomial(s: &MultiIndex, u: &[f64]) -> f64 {
    s.monomial(u)
}

/// Binomial coefficient in `u128`, exact for all sizes used here.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * u128::from(n - i) / u128::from(i + 1);
    }
    acc
}

/// The ordered set `{s ∈ Z₊^d : |s| ≤ l}` together with cached factorials.
#[derive(Clone, Debug)]
pub struct BasisLayout {
    d: usize,
    l: u32,
    indices: Vec<MultiIndex>,
    inv_factorials: Vec<f64>,
}

impl BasisLayout {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn l(&self) -> u32 {
        self.l
    }

    /// Basis size `D = binomial(l + d, d)`.
    pub fn size(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn position(&self, s: &MultiIndex) -> Option<usize> {
        self.indices.binary_search(s).ok()
    }

    /// `U(u)`: entry at `s` is `u^s / s!`.
    pub fn u_vector(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.size()];
        self.u_vector_into(u, &mut out);
        out
    }

    pub fn u_vector_into(&self, u: &[f64], out: &mut [f64]) {
        assert_eq!(u.len(), self.d, "point dimension does not match layout");
        for ((slot, s), inv) in out.iter_mut().zip(&self.indices).zip(&self.inv_factorials) {
            *slot = s.monomial(u) * inv;
        }
    }
}

/// Enumerate the basis of total degree `≤ l` in `d` variables.
pub fn multi_index_set(d: usize, l: u32) -> Result<BasisLayout> {
    if d == 0 {
        return Err(Error::Input("dimension d must be at least 1".into()));
    }
    if l > MAX_EXACT_ORDER {
        return Err(Error::Overflow(format!(
            "order {l} exceeds the exact-factorial limit {MAX_EXACT_ORDER}"
        )));
    }
    let mut indices = Vec::with_capacity(binomial(u64::from(l) + d as u64, d as u64) as usize);
    let mut current = vec![0u32; d];
    enumerate(0, l, &mut current, &mut indices);
    let inv_factorials = indices
        .iter()
        .map(|s| s.factorial().map(|f| 1.0 / f as f64))
        .collect::<Result<Vec<_>>>()?;
    Ok(BasisLayout {
        d,
        l,
        indices,
        inv_factorials,
    })
}

// Depth-first over coordinates with increasing exponent yields lexicographic order.
fn enumerate(pos: usize, budget: u32, current: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
    if pos == current.len() {
        out.push(MultiIndex(current.clone()));
        return;
    }
    for e in 0..=budget {
        current[pos] = e;
        enumerate(pos + 1, budget - e, current, out);
    }
    current[pos] = 0;
}
