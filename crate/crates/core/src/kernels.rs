//! Bounded kernels `K: [-1,1] → [b,c]` with `0 < b ≤ c`, extended by zero
//! outside the closed support `[-1,1]`.

use std::fmt;
use std::sync::Arc;

use crate::{Error, Result};

/// Number of points used to validate the `[b, c]` bounds of a custom kernel.
const VALIDATION_SAMPLES: usize = 10_001;

type Profile = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Shape {
    Boxcar,
    RaisedCosine,
    Custom(Profile),
}

#[derive(Clone)]
pub struct Kernel {
    name: String,
    shape: Shape,
    b: f64,
    c: f64,
}

impl fmt::Debug for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Kernel")
            .field("name", &self.name)
            .field("b", &self.b)
            .field("c", &self.c)
            .finish()
    }
}

impl Kernel {
    /// `K ≡ 1` on `[-1,1]`.
    pub fn boxcar() -> Self {
        Self {
            name: "boxcar".into(),
            shape: Shape::Boxcar,
            b: 1.0,
            c: 1.0,
        }
    }

    /// `K(t) = 1 + cos(πt)/2` on `[-1,1]`, so `[b, c] = [0.5, 1.5]`.
    pub fn raised_cosine() -> Self {
        Self {
            name: "raised-cosine".into(),
            shape: Shape::RaisedCosine,
            b: 0.5,
            c: 1.5,
        }
    }

    /// Kernel with a user profile. The claimed bounds are checked on a dense
    /// sample of `[-1,1]`.
    pub fn custom<F>(name: &str, profile: F, b: f64, c: f64) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(b > 0.0 && c >= b && c.is_finite()) {
            return Err(Error::Input(format!(
                "kernel bounds must satisfy 0 < b <= c < inf, got b={b}, c={c}"
            )));
        }
        for i in 0..VALIDATION_SAMPLES {
            let t = -1.0 + 2.0 * i as f64 / (VALIDATION_SAMPLES - 1) as f64;
            let k = profile(t);
            if !(k >= b && k <= c) {
                return Err(Error::Input(format!(
                    "kernel '{name}' takes value {k} at t={t}, outside [{b}, {c}]"
                )));
            }
        }
        Ok(Self {
            name: name.into(),
            shape: Shape::Custom(Arc::new(profile)),
            b,
            c,
        })
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "boxcar" => Ok(Self::boxcar()),
            "raised-cosine" => Ok(Self::raised_cosine()),
            other => Err(Error::Input(format!(
                "unknown kernel '{other}' (expected \"boxcar\" or \"raised-cosine\")"
            ))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn lower(&self) -> f64 {
        self.b
    }

    pub fn upper(&self) -> f64 {
        self.c
    }

    /// Kernel value; the support boundary `|t| = 1` is inside the support.
    pub fn eval(&self, t: f64) -> f64 {
        if !(t.abs() <= 1.0) {
            return 0.0;
        }
        match &self.shape {
            Shape::Boxcar => 1.0,
            Shape::RaisedCosine => 1.0 + 0.5 * (std::f64::consts::PI * t).cos(),
            Shape::Custom(f) => f(t),
        }
    }

    /// `Π_j K((y_j - x_j)/h)`.
    pub fn product(&self, x: &[f64], y: &[f64], h: f64) -> f64 {
        debug_assert_eq!(x.len(), y.len());
        let mut acc = 1.0;
        for (xj, yj) in x.iter().zip(y) {
            acc *= self.eval((yj - xj) / h);
            if acc == 0.0 {
                break;
            }
        }
        acc
    }
}

/// Free-function form of [`Kernel::product`].
pub fn product_kernel(k: &Kernel, x: &[f64], y: &[f64], h: f64) -> f64 {
    k.product(x, y, h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn boxcar_support_is_closed() {
        let k = Kernel::boxcar();
        assert_eq!(k.eval(0.0), 1.0);
        assert_eq!(k.eval(1.0), 1.0);
        assert_eq!(k.eval(-1.0), 1.0);
        assert_eq!(k.eval(1.0000001), 0.0);
        assert_eq!(k.eval(-0.6), 1.0);
        assert_eq!(k.eval(f64::NAN), 0.0);
    }

    #[test]
    fn product_examples() {
        let k = Kernel::boxcar();
        assert_eq!(product_kernel(&k, &[0.5], &[0.75], 0.5), 1.0);
        assert_eq!(product_kernel(&k, &[0.5], &[1.0], 0.25), 0.0);
        assert_eq!(product_kernel(&k, &[0.5, 0.5], &[0.6, 0.9], 0.5), 1.0);
    }

    #[test]
    fn shipped_kernels_respect_bounds() {
        for k in [Kernel::boxcar(), Kernel::raised_cosine()] {
            for i in 0..=2000 {
                let t = -1.0 + i as f64 / 1000.0;
                let v = k.eval(t);
                assert!(v >= k.lower() && v <= k.upper(), "{} at {t}: {v}", k.name());
            }
        }
        let rc = Kernel::raised_cosine();
        assert!((rc.eval(0.0) - 1.5).abs() < 1e-15);
        assert!((rc.eval(1.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn custom_kernel_validation() {
        assert!(Kernel::custom("tri", |t: f64| 2.0 - t.abs(), 1.0, 2.0).is_ok());
        assert!(Kernel::custom("bad", |t: f64| 1.0 - t.abs(), 0.5, 1.0).is_err());
        assert!(Kernel::custom("neg", |_| 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn lookup_by_name() {
        assert_eq!(Kernel::by_name("boxcar").unwrap().name(), "boxcar");
        assert_eq!(Kernel::by_name("raised-cosine").unwrap().upper(), 1.5);
        assert!(Kernel::by_name("gaussian").is_err());
    }

    proptest! {
        #[test]
        fn product_is_bounded_and_factorizes(
            x in prop::collection::vec(0.0f64..1.0, 3),
            y in prop::collection::vec(0.0f64..1.0, 3),
            h in 0.05f64..0.5,
        ) {
            let k = Kernel::raised_cosine();
            let p = k.product(&x, &y, h);
            let c3 = k.upper().powi(3);
            prop_assert!(p >= 0.0 && p <= c3);
            let direct: f64 = x.iter().zip(&y).map(|(a, b)| k.eval((b - a) / h)).product();
            prop_assert!((p - direct).abs() <= 1e-15 * c3);
        }
    }
}
