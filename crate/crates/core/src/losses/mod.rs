//! Composite binary losses built from a Bregman generator and a ratio map.
//!
//! Given a generator φ and a strictly increasing ratio map `g`, the loss is
//! assembled from `γ(η̂) = −(1 − η̂) φ(η̂/(1 − η̂)) + c₂ η̂ + c₁` as
//!
//! ```text
//! ℓ₁(ŷ)  = γ(η̂) + (1 − η̂) γ′(η̂)      η̂ = Ψ⁻¹(ŷ) = g(ŷ) / (1 + g(ŷ))
//! ℓ₋₁(ŷ) = γ(η̂) − η̂ γ′(η̂)
//! ```
//!
//! which collapses to `ℓ₁ = −φ′(β̂) + c₁ + c₂` and `ℓ₋₁ = β̂ φ′(β̂) − φ(β̂) + c₁`
//! with `β̂ = g(ŷ)`. Minimising the resulting risk recovers the density ratio
//! with error measured by the Bregman divergence of φ.

mod identities;
mod ratio_map;

use std::fmt;
use std::sync::Arc;

pub use identities::{
    additive_fit, bayes_risk, conditional_risk, convexity_margin, excess_risk_identity_check,
    properness_deviation, reid_convexity_margin, savage_residual, shuford_ratios, shuford_weight,
    ProperSweep,
};
pub use ratio_map::{
    canonical_ratio_map, invert_phi1, CanonicalMap, ExpMap, FnRatioMap, IdentityMap, PowerMap,
    RatioMap, INVERSION_MAX_ITER, INVERSION_TOL,
};

use crate::error::Result;
use crate::generators::{BregmanGenerator, Generator, GeneratorFamily, DEFAULT_DOMAIN_EPS};
use crate::scalar::Scalar;

/// Largest score magnitude admitted on a bounded-side ratio map.
pub const SCORE_CLAMP_MAX: f64 = 1e6;

/// Partial losses and their score derivatives at one score.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Partials<T> {
    pub pos: T,
    pub neg: T,
    pub dpos: T,
    pub dneg: T,
    pub d2pos: T,
    pub d2neg: T,
    /// `β̂ = g(ŷ)` at the (clamped) score.
    pub beta: T,
    /// The score fell outside the admissible range and was clamped.
    pub clamped: bool,
}

impl<T: Scalar> Partials<T> {
    /// Value, first and second derivative for the label `+1` (`true`) or `−1`.
    #[inline]
    pub fn for_label(&self, positive: bool) -> (T, T, T) {
        if positive {
            (self.pos, self.dpos, self.d2pos)
        } else {
            (self.neg, self.dneg, self.d2neg)
        }
    }
}

/// A strictly proper composite loss `(ℓ₁, ℓ₋₁)` with inverse link `Ψ⁻¹ = g/(1 + g)`.
#[derive(Clone)]
pub struct CompositeLoss<T> {
    gen: Arc<dyn Generator<T>>,
    rmap: Arc<dyn RatioMap<T>>,
    c1: T,
    c2: T,
    score_lo: Option<T>,
    score_hi: Option<T>,
    gamma_prime_sign: T,
    family: Option<GeneratorFamily<T>>,
}

/// Builds the composite loss of a generator and ratio map.
pub fn construct_loss<T: Scalar>(
    gen: Arc<dyn Generator<T>>,
    rmap: Arc<dyn RatioMap<T>>,
    c1: T,
    c2: T,
) -> CompositeLoss<T> {
    let (score_lo, score_hi) = clamp_bounds(gen.as_ref(), rmap.as_ref());
    CompositeLoss {
        gen,
        rmap,
        c1,
        c2,
        score_lo,
        score_hi,
        gamma_prime_sign: T::one(),
        family: None,
    }
}

/// The loss of a named family: generator plus its conventional ratio map.
///
/// | family | generator | g(ŷ) |
/// |---|---|---|
/// | kulsif | (x−1)²/2 | ŷ |
/// | lr | x log x − (1+x) log(1+x) | e^ŷ |
/// | klest | x log x − x | ŷ |
/// | boost | −4√x | e^{2ŷ} |
/// | poly(k) | x^{2+k}/((1+k)(2+k)) | ((1+k)ŷ)^{1/(1+k)} |
/// | ew | e^{2x}/4 | ½ log(2ŷ) |
pub fn family_loss<T: Scalar>(family: GeneratorFamily<T>) -> CompositeLoss<T> {
    let gen = BregmanGenerator::new(family).into_arc();
    let rmap: Arc<dyn RatioMap<T>> = match family {
        GeneratorFamily::Kulsif | GeneratorFamily::Klest => Arc::new(IdentityMap),
        GeneratorFamily::Lr => Arc::new(ExpMap::new(T::one())),
        GeneratorFamily::Boost => Arc::new(ExpMap::new(T::lit(2.0))),
        GeneratorFamily::Poly { .. } | GeneratorFamily::Ew => Arc::new(canonical_ratio_map(gen.clone())),
    };
    let mut loss = construct_loss(gen, rmap, T::zero(), T::zero());
    loss.family = Some(family);
    loss
}

/// [`family_loss`] by name.
pub fn loss_for<T: Scalar>(name: &str, k: Option<T>) -> Result<CompositeLoss<T>> {
    Ok(family_loss(GeneratorFamily::parse(name, k)?))
}

fn clamp_bounds<T: Scalar>(gen: &dyn Generator<T>, rmap: &dyn RatioMap<T>) -> (Option<T>, Option<T>) {
    let eps = T::lit(DEFAULT_DOMAIN_EPS);
    let big = T::lit(SCORE_CLAMP_MAX);
    match rmap.score_domain() {
        (Some(a), Some(b)) => (Some(a + eps), Some(b - eps)),
        (Some(a), None) => (Some(a + eps), Some(a + big)),
        (None, Some(b)) => (Some(b - big), Some(b - eps)),
        (None, None) => {
            let lo = gen
                .domain_floor()
                .map(|f| rmap.g_inv(f + eps))
                .filter(|y| y.is_finite());
            (lo, None)
        }
    }
}

impl<T: Scalar> CompositeLoss<T> {
    pub fn generator(&self) -> &Arc<dyn Generator<T>> {
        &self.gen
    }

    pub fn ratio_map(&self) -> &Arc<dyn RatioMap<T>> {
        &self.rmap
    }

    pub fn family(&self) -> Option<GeneratorFamily<T>> {
        self.family
    }

    pub fn constants(&self) -> (T, T) {
        (self.c1, self.c2)
    }

    pub fn name(&self) -> String {
        match self.family {
            Some(f) => f.to_string(),
            None => format!("{}∘{}", self.gen.name(), self.rmap.name()),
        }
    }

    /// Admissible score range; scores outside are clamped.
    pub fn score_bounds(&self) -> (Option<T>, Option<T>) {
        (self.score_lo, self.score_hi)
    }

    /// Replaces the admissible score range.
    pub fn with_score_bounds(mut self, lo: Option<T>, hi: Option<T>) -> Self {
        self.score_lo = lo;
        self.score_hi = hi;
        self
    }

    /// Flips the sign of `γ′` in the partial losses. Only useful for
    /// demonstrating that the identity checks catch a broken construction.
    #[doc(hidden)]
    pub fn with_gamma_prime_sign(mut self, sign: T) -> Self {
        self.gamma_prime_sign = sign;
        self
    }

    /// Clamps a score into the admissible range.
    #[inline]
    pub fn clamp_score(&self, y: T) -> (T, bool) {
        if let Some(lo) = self.score_lo {
            if y < lo {
                return (lo, true);
            }
        }
        if let Some(hi) = self.score_hi {
            if y > hi {
                return (hi, true);
            }
        }
        (y, false)
    }

    /// `β̂ = g(ŷ)` after clamping.
    pub fn ratio(&self, y: T) -> T {
        self.rmap.g(self.clamp_score(y).0)
    }

    /// `Ψ⁻¹(ŷ) = g(ŷ)/(1 + g(ŷ))`.
    pub fn inv_link(&self, y: T) -> T {
        let beta = self.ratio(y);
        beta / (T::one() + beta)
    }

    /// `d Ψ⁻¹ / dŷ`; zero where the score is clamped.
    pub fn inv_link1(&self, y: T) -> T {
        let (yc, clamped) = self.clamp_score(y);
        if clamped {
            return T::zero();
        }
        let s = T::one() + self.rmap.g(yc);
        self.rmap.g1(yc) / (s * s)
    }

    /// `Ψ(η) = g⁻¹(η/(1 − η))`.
    pub fn link(&self, eta: T) -> T {
        self.rmap.g_inv(eta / (T::one() - eta))
    }

    /// `γ(η)`.
    pub fn gamma(&self, eta: T) -> T {
        let beta = eta / (T::one() - eta);
        -(T::one() - eta) * self.gen.phi(beta) + self.c2 * eta + self.c1
    }

    /// `γ′(η) = φ(β) − (1 + β) φ′(β) + c₂` with `β = η/(1 − η)`.
    pub fn gamma1(&self, eta: T) -> T {
        let beta = eta / (T::one() - eta);
        self.gen.phi(beta) - (T::one() + beta) * self.gen.phi1(beta) + self.c2
    }

    /// `γ″(η) = −(1 + β)³ φ″(β)`.
    pub fn gamma2(&self, eta: T) -> T {
        let s = T::one() / (T::one() - eta);
        -s * s * s * self.gen.phi2(eta * s)
    }

    pub fn ell_pos(&self, y: T) -> T {
        self.partials(y).pos
    }

    pub fn ell_neg(&self, y: T) -> T {
        self.partials(y).neg
    }

    /// Both partial losses with first and second derivatives.
    ///
    /// Outside the admissible range each partial loss continues linearly
    /// with the slope it has at the boundary, so empirical risks stay
    /// convex and keep a gradient that points back into the range.
    pub fn partials(&self, y: T) -> Partials<T> {
        let (yc, clamped) = self.clamp_score(y);
        let mut p = self.partials_inside(yc);
        if clamped {
            let dy = y - yc;
            p.pos += p.dpos * dy;
            p.neg += p.dneg * dy;
            p.d2pos = T::zero();
            p.d2neg = T::zero();
            p.clamped = true;
        }
        p
    }

    fn partials_inside(&self, y: T) -> Partials<T> {
        let gen = &self.gen;
        let beta = self.rmap.g(y);
        let phi = gen.phi(beta);
        let phi1 = gen.phi1(beta);
        let phi2 = gen.phi2(beta);
        let phi3 = gen.phi3(beta);
        let g1 = self.rmap.g1(y);
        let g2 = self.rmap.g2(y);

        let d2pos = -(phi3 * g1 * g1 + phi2 * g2);
        let d2neg = (phi2 + beta * phi3) * g1 * g1 + beta * phi2 * g2;
        let s = self.gamma_prime_sign;
        if s == T::one() {
            return Partials {
                pos: -phi1 + self.c1 + self.c2,
                neg: beta * phi1 - phi + self.c1,
                dpos: -phi2 * g1,
                dneg: beta * phi2 * g1,
                d2pos,
                d2neg,
                beta,
                clamped: false,
            };
        }
        // general assembly from γ, γ′, γ″ with a possibly wrong sign on γ′
        let one = T::one();
        let om = one / (one + beta);
        let eta = beta * om;
        let gamma = -om * phi + self.c2 * eta + self.c1;
        let gamma1 = phi - (one + beta) * phi1 + self.c2;
        let gamma2 = -phi2 / (om * om * om);
        let deta = g1 * om * om;
        Partials {
            pos: gamma + om * s * gamma1,
            neg: gamma - eta * s * gamma1,
            dpos: ((one - s) * gamma1 + s * om * gamma2) * deta,
            dneg: ((one - s) * gamma1 - s * eta * gamma2) * deta,
            d2pos,
            d2neg,
            beta,
            clamped: false,
        }
    }
}

impl<T: Scalar> fmt::Debug for CompositeLoss<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CompositeLoss")
            .field("generator", &self.gen.name())
            .field("ratio_map", &self.rmap.name())
            .field("c1", &self.c1)
            .field("c2", &self.c2)
            .field("score_bounds", &(self.score_lo, self.score_hi))
            .finish()
    }
}
