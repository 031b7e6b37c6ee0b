//! Bregman generators and the divergences they induce.
//!
//! A generator is a strictly convex φ on `(0, ∞)` together with its first
//! three derivatives. It induces the pointwise gap
//! `d_φ(r, r̂) = φ(r) − φ(r̂) − φ′(r̂)(r − r̂)`, and the density-ratio error
//! `B_φ(β, β̂) = E_Q[d_φ(β(x), β̂(x))]`. The second derivative φ″ acts as a
//! weight on ratio values: [`weight_representation`] recovers `d_φ` as the
//! integral of φ″ against a piecewise-linear kernel.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quadrature::{check_nodes, simpson, simpson_rule};
use crate::scalar::Scalar;

/// Evaluation floor for generators that are singular at zero.
pub const DEFAULT_DOMAIN_EPS: f64 = 1e-12;

/// A strictly convex scalar function with three derivatives.
pub trait Generator<T: Scalar>: Send + Sync {
    fn name(&self) -> String;
    fn phi(&self, x: T) -> T;
    fn phi1(&self, x: T) -> T;
    fn phi2(&self, x: T) -> T;
    fn phi3(&self, x: T) -> T;

    /// Left end of the natural domain, or `None` when φ is finite on all of ℝ.
    fn domain_floor(&self) -> Option<T> {
        None
    }

    /// Closed-form `(φ′)⁻¹(y)`, if the generator has one.
    fn phi1_inverse(&self, _y: T) -> Option<T> {
        None
    }

    /// Open range `(inf φ′, sup φ′)` over the domain; `None` marks an unbounded side.
    fn phi1_range(&self) -> (Option<T>, Option<T>) {
        (None, None)
    }
}

/// The builtin generator families.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum GeneratorFamily<T> {
    /// `φ(x) = (x − 1)²/2`.
    Kulsif,
    /// `φ(x) = x log x − (1 + x) log(1 + x)`.
    Lr,
    /// `φ(x) = x log x − x`.
    Klest,
    /// `φ″(x) = x^{−3/2}`, `φ′(x) = −2 x^{−1/2}`, `φ(x) = −4 √x`.
    Boost,
    /// `φ″(x) = x^k`, `φ(x) = x^{2+k} / ((1+k)(2+k))`.
    Poly { k: T },
    /// `φ″(x) = e^{2x}`, `φ′(x) = e^{2x}/2`, `φ(x) = e^{2x}/4`.
    Ew,
}

impl<T: Scalar> GeneratorFamily<T> {
    /// Parses a family identifier; `k` is required for `poly` and ignored otherwise.
    pub fn parse(name: &str, k: Option<T>) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "kulsif" => Ok(Self::Kulsif),
            "lr" => Ok(Self::Lr),
            "klest" => Ok(Self::Klest),
            "boost" | "exp" => Ok(Self::Boost),
            "ew" => Ok(Self::Ew),
            "poly" => {
                let k = k.ok_or_else(|| invalid("k", "poly needs an exponent k"))?;
                if !(k >= T::zero()) || !k.is_finite() {
                    return Err(invalid("k", format!("poly needs k >= 0, got {k}")));
                }
                Ok(Self::Poly { k })
            }
            other => Err(Error::UnknownFamily(other.to_string())),
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            Self::Kulsif => "kulsif",
            Self::Lr => "lr",
            Self::Klest => "klest",
            Self::Boost => "boost",
            Self::Poly { .. } => "poly",
            Self::Ew => "ew",
        }
    }

    pub fn k(&self) -> Option<T> {
        match self {
            Self::Poly { k } => Some(*k),
            _ => None,
        }
    }
}

impl<T: Scalar> fmt::Display for GeneratorFamily<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Poly { k } => write!(f, "poly({k})"),
            other => f.write_str(other.id()),
        }
    }
}

/// One of the builtin generators, with closed-form derivatives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BregmanGenerator<T> {
    family: GeneratorFamily<T>,
    domain_eps: T,
}

/// Looks up a builtin generator by name.
pub fn builtin_generator<T: Scalar>(name: &str, k: Option<T>) -> Result<BregmanGenerator<T>> {
    Ok(BregmanGenerator::new(GeneratorFamily::parse(name, k)?))
}

impl<T: Scalar> BregmanGenerator<T> {
    pub fn new(family: GeneratorFamily<T>) -> Self {
        Self {
            family,
            domain_eps: T::lit(DEFAULT_DOMAIN_EPS),
        }
    }

    pub fn with_domain_eps(mut self, eps: T) -> Self {
        self.domain_eps = eps;
        self
    }

    pub fn family(&self) -> GeneratorFamily<T> {
        self.family
    }

    pub fn domain_eps(&self) -> T {
        self.domain_eps
    }

    pub fn into_arc(self) -> Arc<dyn Generator<T>> {
        Arc::new(self)
    }

    #[inline]
    fn clip(&self, x: T) -> T {
        match self.family {
            GeneratorFamily::Kulsif | GeneratorFamily::Ew => x,
            _ => x.max(self.domain_eps),
        }
    }
}

impl<T: Scalar> Generator<T> for BregmanGenerator<T> {
    fn name(&self) -> String {
        self.family.to_string()
    }

    fn phi(&self, x: T) -> T {
        let x = self.clip(x);
        let one = T::one();
        match self.family {
            GeneratorFamily::Kulsif => (x - one) * (x - one) / T::lit(2.0),
            GeneratorFamily::Lr => x * x.ln() - (one + x) * x.ln_1p(),
            GeneratorFamily::Klest => x * x.ln() - x,
            GeneratorFamily::Boost => -T::lit(4.0) * x.sqrt(),
            GeneratorFamily::Poly { k } => x.powf(T::lit(2.0) + k) / ((one + k) * (T::lit(2.0) + k)),
            GeneratorFamily::Ew => (T::lit(2.0) * x).exp() / T::lit(4.0),
        }
    }

    fn phi1(&self, x: T) -> T {
        let x = self.clip(x);
        let one = T::one();
        match self.family {
            GeneratorFamily::Kulsif => x - one,
            GeneratorFamily::Lr => x.ln() - x.ln_1p(),
            GeneratorFamily::Klest => x.ln(),
            GeneratorFamily::Boost => -T::lit(2.0) / x.sqrt(),
            GeneratorFamily::Poly { k } => x.powf(one + k) / (one + k),
            GeneratorFamily::Ew => (T::lit(2.0) * x).exp() / T::lit(2.0),
        }
    }

    fn phi2(&self, x: T) -> T {
        let x = self.clip(x);
        let one = T::one();
        match self.family {
            GeneratorFamily::Kulsif => one,
            GeneratorFamily::Lr => one / (x * (one + x)),
            GeneratorFamily::Klest => one / x,
            GeneratorFamily::Boost => x.powf(T::lit(-1.5)),
            GeneratorFamily::Poly { k } => x.powf(k),
            GeneratorFamily::Ew => (T::lit(2.0) * x).exp(),
        }
    }

    fn phi3(&self, x: T) -> T {
        let x = self.clip(x);
        let one = T::one();
        match self.family {
            GeneratorFamily::Kulsif => T::zero(),
            GeneratorFamily::Lr => {
                let d = x * (one + x);
                -(T::lit(2.0) * x + one) / (d * d)
            }
            GeneratorFamily::Klest => -one / (x * x),
            GeneratorFamily::Boost => T::lit(-1.5) * x.powf(T::lit(-2.5)),
            GeneratorFamily::Poly { k } => {
                if k == T::zero() {
                    T::zero()
                } else {
                    k * x.powf(k - one)
                }
            }
            GeneratorFamily::Ew => T::lit(2.0) * (T::lit(2.0) * x).exp(),
        }
    }

    fn domain_floor(&self) -> Option<T> {
        match self.family {
            GeneratorFamily::Kulsif | GeneratorFamily::Ew => None,
            _ => Some(T::zero()),
        }
    }

    fn phi1_inverse(&self, y: T) -> Option<T> {
        let one = T::one();
        let nan = T::nan();
        Some(match self.family {
            GeneratorFamily::Kulsif => y + one,
            GeneratorFamily::Lr => {
                if y < T::zero() {
                    one / (-y).exp_m1()
                } else {
                    nan
                }
            }
            GeneratorFamily::Klest => y.exp(),
            GeneratorFamily::Boost => {
                if y < T::zero() {
                    T::lit(4.0) / (y * y)
                } else {
                    nan
                }
            }
            GeneratorFamily::Poly { k } => {
                if y >= T::zero() {
                    ((one + k) * y).powf(one / (one + k))
                } else {
                    nan
                }
            }
            GeneratorFamily::Ew => {
                if y > T::zero() {
                    (T::lit(2.0) * y).ln() / T::lit(2.0)
                } else {
                    nan
                }
            }
        })
    }

    fn phi1_range(&self) -> (Option<T>, Option<T>) {
        match self.family {
            GeneratorFamily::Kulsif | GeneratorFamily::Klest => (None, None),
            GeneratorFamily::Lr | GeneratorFamily::Boost => (None, Some(T::zero())),
            GeneratorFamily::Poly { .. } | GeneratorFamily::Ew => (Some(T::zero()), None),
        }
    }
}

type ScalarFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

/// A generator assembled from user-supplied closures.
#[derive(Clone)]
pub struct FnGenerator<T> {
    name: String,
    phi: ScalarFn<T>,
    phi1: ScalarFn<T>,
    phi2: ScalarFn<T>,
    phi3: ScalarFn<T>,
    floor: Option<T>,
    range: (Option<T>, Option<T>),
}

impl<T: Scalar> FnGenerator<T> {
    pub fn new(
        name: impl Into<String>,
        phi: impl Fn(T) -> T + Send + Sync + 'static,
        phi1: impl Fn(T) -> T + Send + Sync + 'static,
        phi2: impl Fn(T) -> T + Send + Sync + 'static,
        phi3: impl Fn(T) -> T + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            phi: Arc::new(phi),
            phi1: Arc::new(phi1),
            phi2: Arc::new(phi2),
            phi3: Arc::new(phi3),
            floor: None,
            range: (None, None),
        }
    }

    pub fn with_floor(mut self, floor: T) -> Self {
        self.floor = Some(floor);
        self
    }

    pub fn with_phi1_range(mut self, lo: Option<T>, hi: Option<T>) -> Self {
        self.range = (lo, hi);
        self
    }
}

impl<T: Scalar> fmt::Debug for FnGenerator<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnGenerator").field("name", &self.name).finish()
    }
}

impl<T: Scalar> Generator<T> for FnGenerator<T> {
    fn name(&self) -> String {
        self.name.clone()
    }
    fn phi(&self, x: T) -> T {
        (self.phi)(x)
    }
    fn phi1(&self, x: T) -> T {
        (self.phi1)(x)
    }
    fn phi2(&self, x: T) -> T {
        (self.phi2)(x)
    }
    fn phi3(&self, x: T) -> T {
        (self.phi3)(x)
    }
    fn domain_floor(&self) -> Option<T> {
        self.floor
    }
    fn phi1_range(&self) -> (Option<T>, Option<T>) {
        self.range
    }
}

/// Negative binary entropy `u log u + (1 − u) log(1 − u)` on `[0, 1)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct BinaryNegEntropy;

fn xlogx<T: Scalar>(x: T) -> T {
    if x <= T::zero() {
        T::zero()
    } else {
        x * x.ln()
    }
}

impl<T: Scalar> Generator<T> for BinaryNegEntropy {
    fn name(&self) -> String {
        "binary-neg-entropy".into()
    }
    fn phi(&self, u: T) -> T {
        xlogx(u) + xlogx(T::one() - u)
    }
    fn phi1(&self, u: T) -> T {
        u.ln() - (-u).ln_1p()
    }
    fn phi2(&self, u: T) -> T {
        T::one() / (u * (T::one() - u))
    }
    fn phi3(&self, u: T) -> T {
        let v = T::one() - u;
        T::one() / (v * v) - T::one() / (u * u)
    }
    fn domain_floor(&self) -> Option<T> {
        Some(T::zero())
    }
}

/// `φ⋄(z) = (1 + z) · φ(z / (1 + z))`, lifting a generator on `[0, 1)` to `[0, ∞)`.
#[derive(Clone, Debug)]
pub struct DiamondGenerator<G> {
    inner: G,
}

/// Smallest admissible gap `1 − z/(1+z)` before evaluation is refused.
pub const DIAMOND_MIN_GAP: f64 = 1e-12;

/// Builds the diamond transform of a generator defined on `[0, 1)`.
pub fn diamond_transform<T: Scalar, G: Generator<T>>(phi01: G) -> DiamondGenerator<G> {
    DiamondGenerator { inner: phi01 }
}

impl<G> DiamondGenerator<G> {
    pub fn inner(&self) -> &G {
        &self.inner
    }
}

impl<G> DiamondGenerator<G> {
    /// Checks that `z` maps to an inner argument safely below 1.
    pub fn check_arg<T: Scalar>(&self, z: T) -> Result<T> {
        if !(z >= T::zero()) || !z.is_finite() {
            return Err(Error::Domain {
                what: "diamond transform".into(),
                value: z.to_f64_lossy(),
            });
        }
        let gap = T::one() / (T::one() + z);
        if gap < T::lit(DIAMOND_MIN_GAP) {
            return Err(Error::Domain {
                what: "diamond transform (inner argument too close to 1)".into(),
                value: z.to_f64_lossy(),
            });
        }
        Ok(z / (T::one() + z))
    }
}

impl<T: Scalar, G: Generator<T>> Generator<T> for DiamondGenerator<G> {
    fn name(&self) -> String {
        format!("diamond({})", self.inner.name())
    }
    fn phi(&self, z: T) -> T {
        let s = T::one() + z;
        s * self.inner.phi(z / s)
    }
    fn phi1(&self, z: T) -> T {
        let s = T::one() + z;
        let u = z / s;
        self.inner.phi(u) + self.inner.phi1(u) / s
    }
    fn phi2(&self, z: T) -> T {
        let s = T::one() + z;
        self.inner.phi2(z / s) / (s * s * s)
    }
    fn phi3(&self, z: T) -> T {
        let s = T::one() + z;
        let u = z / s;
        let s4 = s * s * s * s;
        self.inner.phi3(u) / (s4 * s) - T::lit(3.0) * self.inner.phi2(u) / s4
    }
    fn domain_floor(&self) -> Option<T> {
        Some(T::zero())
    }
}

/// Pointwise Bregman gap `φ(r) − φ(r̂) − φ′(r̂)(r − r̂)`.
#[inline]
pub fn bregman_term<T: Scalar, G: Generator<T> + ?Sized>(gen: &G, r: T, rhat: T) -> T {
    gen.phi(r) - gen.phi(rhat) - gen.phi1(rhat) * (r - rhat)
}

fn mass_tolerance<T: Scalar>() -> T {
    T::lit(1e-12).max(T::epsilon() * T::lit(64.0))
}

/// Two probability mass functions on a shared finite support.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscretePair<T> {
    support: Vec<Vec<T>>,
    p: Vec<T>,
    q: Vec<T>,
}

impl<T: Scalar> DiscretePair<T> {
    /// Validates masses: both sum to one and every `q_i > 0`.
    pub fn new(support: Vec<Vec<T>>, p: Vec<T>, q: Vec<T>) -> Result<Self> {
        let n = support.len();
        if n == 0 {
            return Err(Error::InvalidPair("empty support".into()));
        }
        if p.len() != n || q.len() != n {
            return Err(Error::InvalidPair(format!(
                "support has {n} points but p has {} and q has {}",
                p.len(),
                q.len()
            )));
        }
        if p.iter().any(|&v| !(v >= T::zero()) || !v.is_finite()) {
            return Err(Error::InvalidPair("p must be finite and nonnegative".into()));
        }
        if q.iter().any(|&v| !(v > T::zero()) || !v.is_finite()) {
            return Err(Error::InvalidPair(
                "q must be strictly positive (P must be absolutely continuous w.r.t. Q)".into(),
            ));
        }
        let tol = mass_tolerance::<T>();
        for (label, m) in [("p", &p), ("q", &q)] {
            let s: T = m.iter().copied().sum();
            if (s - T::one()).abs() > tol {
                return Err(Error::InvalidPair(format!("{label} sums to {s}, not 1")));
            }
        }
        Ok(Self { support, p, q })
    }

    /// Pair on the support `{0, 1, …, n−1}` ⊂ ℝ.
    pub fn from_masses(p: Vec<T>, q: Vec<T>) -> Result<Self> {
        let support = (0..p.len()).map(|i| vec![T::from_usize_lossy(i)]).collect();
        Self::new(support, p, q)
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn support(&self) -> &[Vec<T>] {
        &self.support
    }

    pub fn p(&self) -> &[T] {
        &self.p
    }

    pub fn q(&self) -> &[T] {
        &self.q
    }

    /// Density ratio `β_i = p_i / q_i`.
    pub fn beta(&self) -> Vec<T> {
        self.p.iter().zip(&self.q).map(|(&p, &q)| p / q).collect()
    }
}

/// `Σ_i q_i · d_φ(β_i, β̂_i)`.
pub fn divergence_discrete<T: Scalar, G: Generator<T> + ?Sized>(
    gen: &G,
    pair: &DiscretePair<T>,
    betahat: &[T],
) -> Result<T> {
    if betahat.len() != pair.len() {
        return Err(Error::DimensionMismatch {
            expected: pair.len(),
            found: betahat.len(),
        });
    }
    let mut total = T::zero();
    for ((&q, beta), &bh) in pair.q.iter().zip(pair.beta()).zip(betahat) {
        let term = bregman_term(gen, beta, bh);
        if !term.is_finite() {
            return Err(Error::NonFinite {
                context: format!("{} at β={beta}, β̂={bh}", gen.name()),
            });
        }
        total += q * term;
    }
    Ok(total)
}

/// `∫ q(x) · d_φ(β(x), β̂(x)) dx` over `[a, b]` by composite Simpson.
pub fn divergence_quadrature<T: Scalar, G: Generator<T> + ?Sized>(
    gen: &G,
    beta: impl Fn(T) -> T,
    betahat: impl Fn(T) -> T,
    q_density: impl Fn(T) -> T,
    interval: (T, T),
    n_nodes: usize,
) -> Result<T> {
    let (nodes, weights) = simpson_rule(interval.0, interval.1, n_nodes)?;
    let mut total = T::zero();
    for (x, w) in nodes.into_iter().zip(weights) {
        let q = q_density(x);
        if q < T::zero() {
            return Err(invalid("q_density", format!("negative density {q} at x={x}")));
        }
        if q == T::zero() {
            continue;
        }
        let term = bregman_term(gen, beta(x), betahat(x));
        if !term.is_finite() {
            return Err(Error::NonFinite {
                context: format!("{} integrand at x={x}", gen.name()),
            });
        }
        total += w * q * term;
    }
    Ok(total)
}

/// The piecewise-linear kernel `φ_c(r, r̂)` of the weight representation.
pub fn weight_kernel<T: Scalar>(r: T, rhat: T, c: T) -> T {
    if rhat < c && c <= r {
        r - c
    } else if r < c && c <= rhat {
        c - r
    } else {
        T::zero()
    }
}

/// `∫ φ″(c) · φ_c(r, r̂) dc`, which equals the pointwise Bregman gap `d_φ(r, r̂)`.
///
/// The kernel vanishes outside `[min(r, r̂), max(r, r̂)]`, so only that range
/// is integrated. When the range is bounded away from zero the integral is
/// taken in `log c`, which tames the `1/c`-type weights of LR, KLest and Boost.
pub fn weight_representation<T: Scalar, G: Generator<T> + ?Sized>(
    gen: &G,
    r: T,
    rhat: T,
    n_nodes: usize,
) -> Result<T> {
    check_nodes(n_nodes)?;
    if !(r >= T::zero()) || !(rhat >= T::zero()) {
        return Err(Error::Domain {
            what: "weight representation (needs r, r̂ ≥ 0)".into(),
            value: r.min(rhat).to_f64_lossy(),
        });
    }
    if r == rhat {
        return Ok(T::zero());
    }
    let (lo, hi) = if r < rhat { (r, rhat) } else { (rhat, r) };
    // on the open range φ_c(r, r̂) = |r − c|; the closed form keeps the endpoints right
    let value = if lo > T::zero() {
        simpson(
            |s: T| {
                let c = s.exp();
                gen.phi2(c) * (r - c).abs() * c
            },
            lo.ln(),
            hi.ln(),
            n_nodes,
        )?
    } else {
        simpson(|c: T| gen.phi2(c) * (r - c).abs(), lo, hi, n_nodes)?
    };
    if !value.is_finite() {
        return Err(Error::NonFinite {
            context: format!("weight representation of {} on [{lo}, {hi}]", gen.name()),
        });
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn all_builtins() -> Vec<BregmanGenerator<f64>> {
        ["kulsif", "lr", "klest", "boost", "ew"]
            .iter()
            .map(|n| builtin_generator(n, None).unwrap())
            .chain([0.0, 1.0, 2.5, 6.0].iter().map(|&k| builtin_generator("poly", Some(k)).unwrap()))
            .collect()
    }

    #[test]
    fn kulsif_phi_at_three() {
        let g = builtin_generator::<f64>("kulsif", None).unwrap();
        assert_eq!(g.phi(3.0), 2.0);
    }

    #[test]
    fn poly_zero_has_unit_weight() {
        let g = builtin_generator("poly", Some(0.0)).unwrap();
        for &c in &[1e-3, 0.5, 1.0, 7.0, 40.0] {
            assert_eq!(g.phi2(c), 1.0);
        }
    }

    #[test]
    fn ew_weight_at_half() {
        let g = builtin_generator::<f64>("ew", None).unwrap();
        assert!((g.phi2(0.5) - std::f64::consts::E).abs() < 1e-15);
    }

    #[test]
    fn unknown_and_negative_k_rejected() {
        assert!(matches!(
            builtin_generator::<f64>("hinge", None),
            Err(Error::UnknownFamily(_))
        ));
        assert!(builtin_generator("poly", Some(-0.5)).is_err());
        assert!(builtin_generator::<f64>("poly", None).is_err());
    }

    #[test]
    fn strictly_convex_on_grid() {
        for g in all_builtins() {
            let mut x = 1e-12;
            while x < 20.0 {
                assert!(g.phi2(x) > 0.0, "{} at {x}", g.name());
                x *= 1.7;
            }
        }
    }

    #[test]
    fn derivatives_agree_with_central_differences() {
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-300);
        for g in all_builtins() {
            let mut x: f64 = 1e-2;
            while x <= 20.0 {
                let h = 1e-6 * x.max(1.0);
                let d0 = (g.phi(x + h) - g.phi(x - h)) / (2.0 * h);
                let d1 = (g.phi1(x + h) - g.phi1(x - h)) / (2.0 * h);
                let d2 = (g.phi2(x + h) - g.phi2(x - h)) / (2.0 * h);
                assert!(rel(d0, g.phi1(x)) <= 1e-5 || (d0 - g.phi1(x)).abs() < 1e-9, "{} φ′ at {x}", g.name());
                assert!(rel(d1, g.phi2(x)) <= 1e-5, "{} φ″ at {x}", g.name());
                if g.phi3(x) != 0.0 {
                    assert!(rel(d2, g.phi3(x)) <= 1e-5, "{} φ‴ at {x}", g.name());
                } else {
                    assert!(d2.abs() < 1e-6);
                }
                x *= 1.37;
            }
        }
    }

    #[test]
    fn closed_form_inverses() {
        for g in all_builtins() {
            for &x in &[0.05, 0.7, 1.0, 2.5, 6.0] {
                let back = g.phi1_inverse(g.phi1(x)).unwrap();
                assert!((back - x).abs() <= 1e-10 * x.max(1.0), "{} at {x}: {back}", g.name());
            }
        }
    }

    #[test]
    fn discrete_examples() {
        let g = builtin_generator::<f64>("kulsif", None).unwrap();
        let pair = DiscretePair::from_masses(vec![0.5, 0.5], vec![0.5, 0.5]).unwrap();
        assert_eq!(divergence_discrete(&g, &pair, &[1.0, 1.0]).unwrap(), 0.0);
        let pair = DiscretePair::from_masses(vec![0.75, 0.25], vec![0.5, 0.5]).unwrap();
        let d = divergence_discrete(&g, &pair, &[1.0, 1.0]).unwrap();
        assert!((d - 0.125).abs() < 1e-15);
        let klest = builtin_generator::<f64>("klest", None).unwrap();
        assert_eq!(divergence_discrete(&klest, &pair, &pair.beta()).unwrap(), 0.0);
    }

    #[test]
    fn pair_validation() {
        assert!(DiscretePair::from_masses(vec![0.5, 0.5], vec![1.0, 0.0]).is_err());
        assert!(DiscretePair::from_masses(vec![0.6, 0.5], vec![0.5, 0.5]).is_err());
        assert!(DiscretePair::from_masses(vec![0.5], vec![0.5, 0.5]).is_err());
        let pair = DiscretePair::from_masses(vec![0.2, 0.3, 0.5], vec![0.25, 0.25, 0.5]).unwrap();
        let s: f64 = pair.q().iter().zip(pair.beta()).map(|(q, b)| q * b).sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quadrature_examples() {
        let g = builtin_generator::<f64>("kulsif", None).unwrap();
        let one = |_x: f64| 1.0;
        let zero = divergence_quadrature(&g, |x| 1.0 + x, |x| 1.0 + x, one, (0.0, 1.0), 101).unwrap();
        assert!(zero.abs() < 1e-12);
        let v = divergence_quadrature(&g, |x| 1.0 + x, one, one, (0.0, 1.0), 101).unwrap();
        assert!((v - 1.0 / 6.0).abs() < 1e-14);
        assert!(divergence_quadrature(&g, one, one, |_| -1.0, (0.0, 1.0), 11).is_err());
        assert!(divergence_quadrature(&g, one, one, one, (0.0, 1.0), 10).is_err());
    }

    #[test]
    fn quadrature_error_shrinks_sixteenfold() {
        let g = builtin_generator::<f64>("ew", None).unwrap();
        let beta = |x: f64| 1.0 + x.sin();
        let betahat = |x: f64| 1.2 + 0.3 * x;
        let q = |x: f64| 0.5 + 0.5 * x * x;
        let reference = divergence_quadrature(&g, beta, betahat, q, (0.0, 2.0), 20001).unwrap();
        let e1 = (divergence_quadrature(&g, beta, betahat, q, (0.0, 2.0), 21).unwrap() - reference).abs();
        let e2 = (divergence_quadrature(&g, beta, betahat, q, (0.0, 2.0), 41).unwrap() - reference).abs();
        let ratio = e1 / e2;
        assert!((12.0..20.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn weight_representation_examples() {
        let g = builtin_generator::<f64>("kulsif", None).unwrap();
        assert_eq!(weight_representation(&g, 0.7, 0.7, 2001).unwrap(), 0.0);
        let v = weight_representation(&g, 1.5, 1.0, 2001).unwrap();
        assert!((v - 0.125).abs() < 1e-12);
        assert!(weight_representation(&g, -1.0, 1.0, 2001).is_err());
    }

    #[test]
    fn weight_kernel_cases() {
        assert_eq!(weight_kernel(2.0, 1.0, 1.5), 0.5);
        assert_eq!(weight_kernel(1.0, 2.0, 1.5), 0.5);
        assert_eq!(weight_kernel(1.0, 2.0, 1.0), 0.0);
        assert_eq!(weight_kernel(1.0, 2.0, 2.5), 0.0);
    }

    #[test]
    fn diamond_of_zero_is_zero() {
        let zero = FnGenerator::new("zero", |_u: f64| 0.0, |_| 0.0, |_| 0.0, |_| 0.0);
        let d = diamond_transform(zero);
        for &z in &[0.0, 0.3, 4.0] {
            assert_eq!(d.phi(z), 0.0);
            assert_eq!(d.phi2(z), 0.0);
        }
    }

    #[test]
    fn diamond_derivatives_match_differences() {
        let d = diamond_transform::<f64, _>(BinaryNegEntropy);
        for &z in &[0.2f64, 1.0, 3.0, 9.0] {
            let h = 1e-5;
            let fd1 = (d.phi(z + h) - d.phi(z - h)) / (2.0 * h);
            let fd2 = (d.phi1(z + h) - d.phi1(z - h)) / (2.0 * h);
            let fd3 = (d.phi2(z + h) - d.phi2(z - h)) / (2.0 * h);
            assert!((fd1 - d.phi1(z)).abs() < 1e-8);
            assert!((fd2 - d.phi2(z)).abs() < 1e-8);
            assert!((fd3 - d.phi3(z)).abs() < 1e-7);
        }
    }

    #[test]
    fn diamond_rejects_huge_arguments() {
        let d = diamond_transform::<f64, _>(BinaryNegEntropy);
        assert!(d.check_arg(1e13f64).is_err());
        assert!(d.check_arg(-1.0f64).is_err());
        assert!(d.check_arg(5.0f64).is_ok());
    }

    #[test]
    fn works_in_f32() {
        let g = builtin_generator::<f32>("ew", None).unwrap();
        let pair = DiscretePair::from_masses(vec![0.25f32, 0.75], vec![0.5, 0.5]).unwrap();
        let d = divergence_discrete(&g, &pair, &[0.8, 1.2]).unwrap();
        assert!(d > 0.0 && d.is_finite());
    }

    fn masses(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.05f64..1.0, n).prop_map(|v| {
            let s: f64 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect()
        })
    }

    fn normalised_pair(p: Vec<f64>, q: Vec<f64>) -> DiscretePair<f64> {
        // renormalise exactly so the 1e-12 mass check cannot trip on rounding
        let fix = |mut v: Vec<f64>| {
            let s: f64 = v.iter().sum();
            let last = v.len() - 1;
            v[last] += 1.0 - s;
            v
        };
        DiscretePair::from_masses(fix(p), fix(q)).unwrap()
    }

    proptest! {
        #[test]
        fn divergence_is_nonnegative_and_vanishes_at_truth(
            (p, q, bh) in (2usize..7).prop_flat_map(|n| (masses(n), masses(n), prop::collection::vec(0.01f64..4.0, n))),
            which in 0usize..9,
        ) {
            let g = all_builtins()[which];
            let pair = normalised_pair(p, q);
            let d = divergence_discrete(&g, &pair, &bh).unwrap();
            prop_assert!(d >= -1e-12 * (1.0 + g.phi(4.0).abs()));
            let zero = divergence_discrete(&g, &pair, &pair.beta()).unwrap();
            prop_assert_eq!(zero, 0.0);
        }

        #[test]
        fn affine_terms_do_not_change_divergence(
            (p, q, bh) in (2usize..7).prop_flat_map(|n| (masses(n), masses(n), prop::collection::vec(0.05f64..3.0, n))),
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
        ) {
            let base = builtin_generator::<f64>("lr", None).unwrap();
            let shifted = FnGenerator::new(
                "lr+affine",
                move |x| base.phi(x) + a * x + b,
                move |x| base.phi1(x) + a,
                move |x| base.phi2(x),
                move |x| base.phi3(x),
            );
            let pair = normalised_pair(p, q);
            let d0 = divergence_discrete(&base, &pair, &bh).unwrap();
            let d1 = divergence_discrete(&shifted, &pair, &bh).unwrap();
            prop_assert!((d0 - d1).abs() <= 1e-12, "{} vs {}", d0, d1);
        }
    }
}
