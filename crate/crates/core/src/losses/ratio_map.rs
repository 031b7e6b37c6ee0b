//! Ratio maps `g`: classifier score ↦ density-ratio estimate.
//!
//! Every map is described through its inverse `g⁻¹` (a function of the ratio
//! value β) and the first two derivatives of that inverse; the loss
//! construction and the convexity certificates only ever need those.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::generators::{Generator, DEFAULT_DOMAIN_EPS};
use crate::scalar::Scalar;

pub trait RatioMap<T: Scalar>: Send + Sync {
    fn name(&self) -> String;
    /// `g(y)`.
    fn g(&self, y: T) -> T;
    /// `g⁻¹(β)`.
    fn g_inv(&self, beta: T) -> T;
    /// `(g⁻¹)′(β)`.
    fn g_inv1(&self, beta: T) -> T;
    /// `(g⁻¹)″(β)`.
    fn g_inv2(&self, beta: T) -> T;

    /// Open interval of scores on which `g` is defined; `None` marks an unbounded side.
    fn score_domain(&self) -> (Option<T>, Option<T>) {
        (None, None)
    }

    /// `g′(y)`, by the inverse-function rule.
    fn g1(&self, y: T) -> T {
        T::one() / self.g_inv1(self.g(y))
    }

    /// `g″(y) = −(g⁻¹)″(β) · g′(y)³`.
    fn g2(&self, y: T) -> T {
        let beta = self.g(y);
        let d1 = T::one() / self.g_inv1(beta);
        -self.g_inv2(beta) * d1 * d1 * d1
    }
}

/// `g(y) = y`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct IdentityMap;

impl<T: Scalar> RatioMap<T> for IdentityMap {
    fn name(&self) -> String {
        "identity".into()
    }
    fn g(&self, y: T) -> T {
        y
    }
    fn g_inv(&self, beta: T) -> T {
        beta
    }
    fn g_inv1(&self, _beta: T) -> T {
        T::one()
    }
    fn g_inv2(&self, _beta: T) -> T {
        T::zero()
    }
    fn g1(&self, _y: T) -> T {
        T::one()
    }
    fn g2(&self, _y: T) -> T {
        T::zero()
    }
}

/// `g(y) = e^{rate · y}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpMap<T> {
    pub rate: T,
}

impl<T: Scalar> ExpMap<T> {
    pub fn new(rate: T) -> Self {
        Self { rate }
    }
}

impl<T: Scalar> RatioMap<T> for ExpMap<T> {
    fn name(&self) -> String {
        if self.rate == T::one() {
            "exp".into()
        } else {
            format!("exp({}y)", self.rate)
        }
    }
    fn g(&self, y: T) -> T {
        (self.rate * y).exp()
    }
    fn g_inv(&self, beta: T) -> T {
        beta.ln() / self.rate
    }
    fn g_inv1(&self, beta: T) -> T {
        T::one() / (self.rate * beta)
    }
    fn g_inv2(&self, beta: T) -> T {
        -T::one() / (self.rate * beta * beta)
    }
    fn g1(&self, y: T) -> T {
        self.rate * self.g(y)
    }
    fn g2(&self, y: T) -> T {
        self.rate * self.rate * self.g(y)
    }
}

/// `g⁻¹(β) = β^p`, i.e. `g(y) = y^{1/p}` on `y > 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerMap<T> {
    pub p: T,
}

impl<T: Scalar> PowerMap<T> {
    pub fn new(p: T) -> Self {
        Self { p }
    }
}

impl<T: Scalar> RatioMap<T> for PowerMap<T> {
    fn name(&self) -> String {
        format!("power({})", self.p)
    }
    fn g(&self, y: T) -> T {
        y.powf(T::one() / self.p)
    }
    fn g_inv(&self, beta: T) -> T {
        beta.powf(self.p)
    }
    fn g_inv1(&self, beta: T) -> T {
        self.p * beta.powf(self.p - T::one())
    }
    fn g_inv2(&self, beta: T) -> T {
        self.p * (self.p - T::one()) * beta.powf(self.p - T::lit(2.0))
    }
    fn score_domain(&self) -> (Option<T>, Option<T>) {
        (Some(T::zero()), None)
    }
}

/// Newton tolerance and iteration cap for numeric `(φ′)⁻¹`.
pub const INVERSION_TOL: f64 = 1e-12;
pub const INVERSION_MAX_ITER: usize = 200;
const MAX_BRACKET_DOUBLINGS: usize = 2100;

/// The canonical map `g = (φ′)⁻¹`, which makes the constructed loss convex.
#[derive(Clone)]
pub struct CanonicalMap<T> {
    gen: Arc<dyn Generator<T>>,
    force_newton: bool,
}

/// Canonical ratio map of a generator.
pub fn canonical_ratio_map<T: Scalar>(gen: Arc<dyn Generator<T>>) -> CanonicalMap<T> {
    CanonicalMap {
        gen,
        force_newton: false,
    }
}

impl<T: Scalar> CanonicalMap<T> {
    /// Ignores any closed-form inverse and always inverts φ′ numerically.
    pub fn newton_only(mut self) -> Self {
        self.force_newton = true;
        self
    }

    pub fn generator(&self) -> &Arc<dyn Generator<T>> {
        &self.gen
    }

    /// `(φ′)⁻¹(y)`, reporting targets outside the range of φ′.
    pub fn try_g(&self, y: T) -> Result<T> {
        if !self.force_newton {
            if let Some(x) = self.gen.phi1_inverse(y) {
                return if x.is_finite() {
                    Ok(x)
                } else {
                    Err(Error::Inversion {
                        target: y.to_f64_lossy(),
                        reason: format!("outside the range of φ′ for {}", self.gen.name()),
                    })
                };
            }
        }
        invert_phi1(self.gen.as_ref(), y)
    }
}

impl<T: Scalar> fmt::Debug for CanonicalMap<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CanonicalMap")
            .field("generator", &self.gen.name())
            .field("force_newton", &self.force_newton)
            .finish()
    }
}

impl<T: Scalar> RatioMap<T> for CanonicalMap<T> {
    fn name(&self) -> String {
        format!("canonical({})", self.gen.name())
    }
    fn g(&self, y: T) -> T {
        self.try_g(y).unwrap_or_else(|_| T::nan())
    }
    fn g_inv(&self, beta: T) -> T {
        self.gen.phi1(beta)
    }
    fn g_inv1(&self, beta: T) -> T {
        self.gen.phi2(beta)
    }
    fn g_inv2(&self, beta: T) -> T {
        self.gen.phi3(beta)
    }
    fn score_domain(&self) -> (Option<T>, Option<T>) {
        self.gen.phi1_range()
    }
}

/// Solves `φ′(x) = y` by Newton's method safeguarded with bisection.
///
/// The bracket starts at `[eps, 1]` and doubles outward until it straddles
/// the target; generators with a domain floor never search below it.
pub fn invert_phi1<T: Scalar, G: Generator<T> + ?Sized>(gen: &G, y: T) -> Result<T> {
    let fail = |reason: String| Error::Inversion {
        target: y.to_f64_lossy(),
        reason,
    };
    if !y.is_finite() {
        return Err(fail("non-finite target".into()));
    }
    let eps = T::lit(DEFAULT_DOMAIN_EPS);
    let resid = |x: T| gen.phi1(x) - y;
    let mut lo = eps;
    let mut hi = T::one();

    let mut width = hi - lo;
    let mut steps = 0;
    while resid(lo) > T::zero() {
        if gen.domain_floor().is_some() {
            return Err(fail(format!("below inf φ′ of {}", gen.name())));
        }
        width = width + width;
        lo -= width;
        steps += 1;
        if steps > MAX_BRACKET_DOUBLINGS || !lo.is_finite() {
            return Err(fail("bracket expansion failed on the left".into()));
        }
    }
    let mut width = hi - lo;
    steps = 0;
    while resid(hi) < T::zero() {
        width = width + width;
        hi += width;
        steps += 1;
        if steps > MAX_BRACKET_DOUBLINGS || !hi.is_finite() || !resid(hi).is_finite() {
            return Err(fail("bracket expansion failed on the right".into()));
        }
    }
    let r_lo = resid(lo);
    if r_lo == T::zero() {
        return Ok(lo);
    }
    let r_hi = resid(hi);
    if r_hi == T::zero() {
        return Ok(hi);
    }

    let tol = T::lit(INVERSION_TOL);
    let mut x = (lo + hi) / T::lit(2.0);
    for _ in 0..INVERSION_MAX_ITER {
        let r = resid(x);
        if r == T::zero() {
            return Ok(x);
        }
        if r < T::zero() {
            lo = x;
        } else {
            hi = x;
        }
        let d = gen.phi2(x);
        let newton = x - r / d;
        let next = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            (lo + hi) / T::lit(2.0)
        };
        let scale = T::one().max(next.abs());
        if (next - x).abs() <= tol * scale || hi - lo <= tol * scale {
            return Ok(next);
        }
        x = next;
    }
    Err(fail(format!("no convergence in {INVERSION_MAX_ITER} iterations")))
}

type ScalarFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

/// A ratio map given by closures for `g`, `g⁻¹` and the two derivatives of `g⁻¹`.
#[derive(Clone)]
pub struct FnRatioMap<T> {
    name: String,
    g: ScalarFn<T>,
    g_inv: ScalarFn<T>,
    g_inv1: ScalarFn<T>,
    g_inv2: ScalarFn<T>,
    domain: (Option<T>, Option<T>),
}

impl<T: Scalar> FnRatioMap<T> {
    pub fn new(
        name: impl Into<String>,
        g: impl Fn(T) -> T + Send + Sync + 'static,
        g_inv: impl Fn(T) -> T + Send + Sync + 'static,
        g_inv1: impl Fn(T) -> T + Send + Sync + 'static,
        g_inv2: impl Fn(T) -> T + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            g: Arc::new(g),
            g_inv: Arc::new(g_inv),
            g_inv1: Arc::new(g_inv1),
            g_inv2: Arc::new(g_inv2),
            domain: (None, None),
        }
    }

    pub fn with_score_domain(mut self, lo: Option<T>, hi: Option<T>) -> Self {
        self.domain = (lo, hi);
        self
    }
}

impl<T: Scalar> fmt::Debug for FnRatioMap<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnRatioMap").field("name", &self.name).finish()
    }
}

impl<T: Scalar> RatioMap<T> for FnRatioMap<T> {
    fn name(&self) -> String {
        self.name.clone()
    }
    fn g(&self, y: T) -> T {
        (self.g)(y)
    }
    fn g_inv(&self, beta: T) -> T {
        (self.g_inv)(beta)
    }
    fn g_inv1(&self, beta: T) -> T {
        (self.g_inv1)(beta)
    }
    fn g_inv2(&self, beta: T) -> T {
        (self.g_inv2)(beta)
    }
    fn score_domain(&self) -> (Option<T>, Option<T>) {
        self.domain
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{builtin_generator, FnGenerator};

    fn canonical(name: &str, k: Option<f64>) -> CanonicalMap<f64> {
        canonical_ratio_map(builtin_generator(name, k).unwrap().into_arc())
    }

    #[test]
    fn canonical_examples() {
        let poly0 = canonical("poly", Some(0.0));
        for &f in &[0.1, 1.0, 3.5] {
            assert!((poly0.g(f) - f).abs() < 1e-15);
        }
        let ew = canonical("ew", None);
        assert_eq!(ew.g(0.5), 0.0);
        let e2 = std::f64::consts::E.powi(2);
        assert!((ew.g(e2 / 2.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn round_trips_on_grid() {
        let maps: Vec<Box<dyn RatioMap<f64>>> = vec![
            Box::new(IdentityMap),
            Box::new(ExpMap::new(1.0)),
            Box::new(ExpMap::new(2.0)),
            Box::new(PowerMap::new(1.5)),
            Box::new(canonical("lr", None)),
            Box::new(canonical("boost", None)),
            Box::new(canonical("klest", None)),
            Box::new(canonical("poly", Some(6.0))),
            Box::new(canonical("ew", None)),
        ];
        for m in &maps {
            let mut beta = 0.01;
            let mut prev = f64::NEG_INFINITY;
            while beta < 20.0 {
                let y = m.g_inv(beta);
                assert!(y > prev, "{} not increasing", m.name());
                prev = y;
                assert!((m.g(y) - beta).abs() <= 1e-9 * beta.max(1.0), "{} at {beta}", m.name());
                beta *= 1.3;
            }
        }
    }

    #[test]
    fn newton_matches_closed_forms() {
        for (name, k) in [("kulsif", None), ("lr", None), ("klest", None), ("boost", None), ("poly", Some(2.0)), ("ew", None)] {
            let closed = canonical(name, k);
            let newton = canonical(name, k).newton_only();
            for &beta in &[1e-3, 0.2, 1.0, 2.7, 9.0] {
                let y = closed.g_inv(beta);
                let a = closed.g(y);
                let b = newton.try_g(y).unwrap();
                assert!((a - b).abs() <= 1e-10 * beta.max(1.0), "{name}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn newton_reports_targets_outside_range() {
        let lr = canonical("lr", None).newton_only();
        assert!(matches!(lr.try_g(0.5), Err(Error::Inversion { .. })));
        let closed = canonical("lr", None);
        assert!(closed.try_g(0.5).is_err());
    }

    #[test]
    fn newton_for_custom_generator() {
        // φ(x) = x⁴/12 + x²/2 on ℝ: φ′ = x³/3 + x has no tidy inverse
        let gen = FnGenerator::new("quartic", |x: f64| x.powi(4) / 12.0 + x * x / 2.0, |x| x.powi(3) / 3.0 + x, |x| x * x + 1.0, |x| 2.0 * x);
        let map = canonical_ratio_map(Arc::new(gen));
        for &x in &[-5.0, -0.3, 0.0, 1.2, 40.0] {
            let y = x * x * x / 3.0 + x;
            assert!((map.g(y) - x).abs() < 1e-9);
        }
    }

    #[test]
    fn derivative_helpers() {
        let m = PowerMap::new(2.5f64);
        for &y in &[0.3, 1.0, 4.0] {
            let h = 1e-6;
            let fd1 = (m.g(y + h) - m.g(y - h)) / (2.0 * h);
            let fd2 = (m.g1(y + h) - m.g1(y - h)) / (2.0 * h);
            assert!((fd1 - m.g1(y)).abs() < 1e-8);
            assert!((fd2 - m.g2(y)).abs() < 1e-6);
        }
    }
}
