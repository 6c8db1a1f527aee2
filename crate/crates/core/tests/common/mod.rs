#![allow(dead_code)]

use std::cell::RefCell;

use astro_float::{BigFloat, Consts, RoundingMode};

/// 200 bits, a little over 60 decimal digits.
pub const PREC: usize = 200;
const RM: RoundingMode = RoundingMode::ToEven;

pub struct Hp {
    cc: RefCell<Consts>,
}

impl Hp {
    pub fn new() -> Self {
        Self {
            cc: RefCell::new(Consts::new().expect("constants cache")),
        }
    }

    pub fn int(&self, v: u64) -> BigFloat {
        BigFloat::from_u64(v, PREC)
    }

    pub fn f(&self, v: f64) -> BigFloat {
        BigFloat::from_f64(v, PREC)
    }

    pub fn pi(&self) -> BigFloat {
        self.cc.borrow_mut().pi(PREC, RM)
    }

    pub fn e(&self) -> BigFloat {
        self.cc.borrow_mut().e(PREC, RM)
    }

    pub fn ln(&self, x: &BigFloat) -> BigFloat {
        x.ln(PREC, RM, &mut self.cc.borrow_mut())
    }

    pub fn add(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.add(b, PREC, RM)
    }

    pub fn sub(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.sub(b, PREC, RM)
    }

    pub fn mul(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.mul(b, PREC, RM)
    }

    pub fn div(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.div(b, PREC, RM)
    }

    pub fn powi(&self, a: &BigFloat, n: usize) -> BigFloat {
        a.powi(n, PREC, RM)
    }

    pub fn to_f64(&self, a: &BigFloat) -> f64 {
        format!("{a}").parse().expect("decimal rendering of a finite value")
    }

    /// `ln Λ(d,l)` in high precision, `0·ln 0 = 0`.
    pub fn ln_lambda(&self, d: u64, l: u64) -> BigFloat {
        let ratio = self.div(&self.int(l + d), &self.int(d));
        let d_prime = self.powi(&ratio, d as usize);
        let e = self.e();
        let e_term = self.powi(&self.mul(&e, &ratio), d as usize);
        let pi = self.pi();
        let inner = self.div(&self.mul(&pi, &self.int(d)), &self.mul(&self.int(8), &self.mul(&e, &e)));
        let first = self.mul(&self.mul(&self.int(d), &d_prime), &self.ln(&inner));
        let dm1 = self.sub(&d_prime, &self.int(1));
        let second = if l == 0 { self.int(0) } else { self.mul(&dm1, &self.ln(&dm1)) };
        let ln_ld = self.ln(&self.int(l + d));
        let third = self.mul(&self.mul(&self.int(3 * l), &e_term), &ln_ld);
        self.sub(&self.add(&first, &second), &third)
    }
}

/// Composite Simpson rule on `[a, b]` with `n` (even) panels.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    assert!(n % 2 == 0);
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + k as f64 * h);
    }
    acc * h / 3.0
}

pub fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}
