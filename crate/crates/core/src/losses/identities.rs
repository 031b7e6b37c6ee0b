//! Risks of a composite loss and the classical identities a proper loss satisfies.

use super::{CompositeLoss, RatioMap};
use crate::error::{Error, Result};
use crate::generators::{divergence_discrete, DiscretePair, Generator};
use crate::optim::{bfgs, BfgsConfig};
use crate::scalar::Scalar;

/// Distance kept from 0 and 1 when a class probability is mapped through the link.
const ETA_EDGE: f64 = 1e-12;
/// Step of the five-point derivative of the Bayes risk.
const BR_STEP: f64 = 1e-5;
/// Relative agreement demanded of the two weight ratios.
const SHUFORD_TOL: f64 = 1e-7;

fn check_eta<T: Scalar>(eta: T) -> Result<()> {
    if eta >= T::zero() && eta <= T::one() {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "class probability η (needs [0, 1])".into(),
            value: eta.to_f64_lossy(),
        })
    }
}

fn check_open_eta<T: Scalar>(eta: T) -> Result<()> {
    if eta > T::zero() && eta < T::one() {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "class probability η (needs (0, 1))".into(),
            value: eta.to_f64_lossy(),
        })
    }
}

/// `CR(η, ŷ) = η ℓ₁(ŷ) + (1 − η) ℓ₋₁(ŷ)`.
pub fn conditional_risk<T: Scalar>(loss: &CompositeLoss<T>, eta: T, yhat: T) -> Result<T> {
    check_eta(eta)?;
    let p = loss.partials(yhat);
    let v = if eta == T::zero() {
        p.neg
    } else if eta == T::one() {
        p.pos
    } else {
        eta * p.pos + (T::one() - eta) * p.neg
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite {
            context: format!("conditional risk of {} at η={eta}, ŷ={yhat}", loss.name()),
        })
    }
}

/// `BR(η) = CR(η, Ψ(η))`; the link argument is kept `1e-12` away from 0 and 1.
pub fn bayes_risk<T: Scalar>(loss: &CompositeLoss<T>, eta: T) -> Result<T> {
    check_eta(eta)?;
    let edge = T::lit(ETA_EDGE);
    let e = eta.max(edge).min(T::one() - edge);
    conditional_risk(loss, eta, loss.link(e))
}

fn bayes_risk_slope<T: Scalar>(loss: &CompositeLoss<T>, eta: T) -> Result<T> {
    let h = T::lit(BR_STEP);
    let two = T::lit(2.0);
    let br = |e: T| bayes_risk(loss, e);
    let num = -br(eta + two * h)? + T::lit(8.0) * br(eta + h)? - T::lit(8.0) * br(eta - h)? + br(eta - two * h)?;
    Ok(num / (T::lit(12.0) * h))
}

/// `CR(η, ŷ) − [BR(η̂) + (η − η̂) BR′(η̂)]` with `η̂ = Ψ⁻¹(ŷ)`; zero for proper losses.
///
/// `BR′` is a five-point central difference, so the residual tests the
/// partial losses against the Bayes risk rather than restating it.
pub fn savage_residual<T: Scalar>(loss: &CompositeLoss<T>, eta: T, yhat: T) -> Result<T> {
    check_eta(eta)?;
    let eta_hat = loss.inv_link(yhat);
    let margin = T::lit(2.0 * BR_STEP);
    if !(eta_hat > margin && eta_hat < T::one() - margin) {
        return Err(Error::Domain {
            what: "Savage residual (Ψ⁻¹(ŷ) too close to 0 or 1)".into(),
            value: eta_hat.to_f64_lossy(),
        });
    }
    let cr = conditional_risk(loss, eta, yhat)?;
    let br = bayes_risk(loss, eta_hat)?;
    let slope = bayes_risk_slope(loss, eta_hat)?;
    Ok(cr - (br + (eta - eta_hat) * slope))
}

/// The two weight ratios `λ₁′(η)/(η − 1)` and `λ₋₁′(η)/η` of the proper loss
/// `λ(y, η) = ℓ(y, Ψ(η))`.
pub fn shuford_ratios<T: Scalar>(loss: &CompositeLoss<T>, eta: T) -> Result<(T, T)> {
    check_open_eta(eta)?;
    let one = T::one();
    let beta = eta / (one - eta);
    let y = loss.link(eta);
    let p = loss.partials(y);
    if p.clamped || !y.is_finite() {
        return Err(Error::Domain {
            what: format!("weight of {} (link leaves the admissible scores)", loss.name()),
            value: eta.to_f64_lossy(),
        });
    }
    // Ψ′(η) = (g⁻¹)′(β) · dβ/dη
    let psi1 = loss.ratio_map().g_inv1(beta) * (one + beta) * (one + beta);
    Ok((p.dpos * psi1 / (eta - one), p.dneg * psi1 / eta))
}

/// Shuford weight `w(η)`; fails with [`Error::NotProper`] when the two ratios disagree.
pub fn shuford_weight<T: Scalar>(loss: &CompositeLoss<T>, eta: T) -> Result<T> {
    let (pos, neg) = shuford_ratios(loss, eta)?;
    let scale = pos.abs().max(neg.abs());
    if !(pos > T::zero() && neg > T::zero()) || (pos - neg).abs() > T::lit(SHUFORD_TOL) * scale {
        return Err(Error::NotProper {
            eta: eta.to_f64_lossy(),
            pos: pos.to_f64_lossy(),
            neg: neg.to_f64_lossy(),
        });
    }
    Ok((pos + neg) / T::lit(2.0))
}

/// `(R(f) − R(f*), ½ B_φ(β, g∘f))` on a discrete pair; the two agree for proper losses.
///
/// `R(f) = ½ Σ pᵢ ℓ₁(fᵢ) + ½ Σ qᵢ ℓ₋₁(fᵢ)` and `f*ᵢ = g⁻¹(βᵢ)`. The excess is
/// accumulated point by point so large risks do not swamp small differences.
pub fn excess_risk_identity_check<T: Scalar>(
    loss: &CompositeLoss<T>,
    pair: &DiscretePair<T>,
    f: &[T],
) -> Result<(T, T)> {
    if f.len() != pair.len() {
        return Err(Error::DimensionMismatch {
            expected: pair.len(),
            found: f.len(),
        });
    }
    let half = T::lit(0.5);
    let rmap = loss.ratio_map();
    let mut excess = T::zero();
    let mut betahat = Vec::with_capacity(f.len());
    for (i, (&fi, beta)) in f.iter().zip(pair.beta()).enumerate() {
        let fstar = rmap.g_inv(beta);
        if !fstar.is_finite() || !fi.is_finite() {
            return Err(Error::NonFinite {
                context: format!("score at support point {i} (f={fi}, f*={fstar})"),
            });
        }
        let a = loss.partials(fi);
        let b = loss.partials(fstar);
        if a.clamped || b.clamped {
            log::warn!("excess-risk check: score clamped at support point {i}");
        }
        excess += half * pair.p()[i] * (a.pos - b.pos) + half * pair.q()[i] * (a.neg - b.neg);
        betahat.push(a.beta);
    }
    let bregman = divergence_discrete(loss.generator().as_ref(), pair, &betahat)?;
    Ok((excess, half * bregman))
}

/// Slacks `(M + 1/x, −M)` of the convexity condition, with
/// `M = φ‴(x)/φ″(x) − (g⁻¹)″(x)/(g⁻¹)′(x)`. The loss is convex iff both stay ≥ 0.
pub fn convexity_margin<T: Scalar>(gen: &dyn Generator<T>, rmap: &dyn RatioMap<T>, x: T) -> Result<(T, T)> {
    if !(x > T::zero()) {
        return Err(Error::Domain {
            what: "convexity margin (needs x > 0)".into(),
            value: x.to_f64_lossy(),
        });
    }
    let middle = gen.phi3(x) / gen.phi2(x) - rmap.g_inv2(x) / rmap.g_inv1(x);
    if !middle.is_finite() {
        return Err(Error::NonFinite {
            context: format!("convexity margin at x={x}"),
        });
    }
    Ok((middle + T::one() / x, -middle))
}

/// Slacks `(M + 1/η, 1/(1 − η) − M)` of the link-based convexity condition,
/// `M = w′(η)/w(η) − Ψ″(η)/Ψ′(η)`, with both derivatives taken numerically.
pub fn reid_convexity_margin<T: Scalar>(loss: &CompositeLoss<T>, eta: T) -> Result<(T, T)> {
    check_open_eta(eta)?;
    let one = T::one();
    let h = T::lit(1e-5) * eta.min(one - eta);
    let psi1 = |e: T| {
        let beta = e / (one - e);
        loss.ratio_map().g_inv1(beta) * (one + beta) * (one + beta)
    };
    let two_h = h + h;
    let w = shuford_weight(loss, eta)?;
    let dw = (shuford_weight(loss, eta + h)? - shuford_weight(loss, eta - h)?) / two_h;
    let dpsi = (psi1(eta + h) - psi1(eta - h)) / two_h;
    let middle = dw / w - dpsi / psi1(eta);
    if !middle.is_finite() {
        return Err(Error::NonFinite {
            context: format!("link convexity margin at η={eta}"),
        });
    }
    Ok((middle + one / eta, one / (one - eta) - middle))
}

/// Outcome of a properness sweep over class probabilities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProperSweep<T> {
    /// Largest `|Ψ⁻¹(ŷ*) − η|` over the tested grid.
    pub max_deviation: T,
    pub tested: usize,
    /// Grid points whose link falls outside the admissible score range.
    pub skipped: usize,
}

/// Minimises `CR(η, ·)` by BFGS from `Ψ(η) + 0.1` for each `η` and measures
/// how far `Ψ⁻¹` of the minimiser lands from `η`.
pub fn properness_deviation<T: Scalar>(loss: &CompositeLoss<T>, etas: &[T]) -> Result<ProperSweep<T>> {
    let cfg = BfgsConfig::default().with_max_iter(200);
    let mut sweep = ProperSweep {
        max_deviation: T::zero(),
        tested: 0,
        skipped: 0,
    };
    for &eta in etas {
        check_open_eta(eta)?;
        let y0 = loss.link(eta);
        let start = y0 + T::lit(0.1);
        if !y0.is_finite() || loss.clamp_score(y0).1 || loss.clamp_score(start).1 {
            sweep.skipped += 1;
            continue;
        }
        let obj = |x: &[T]| -> Result<(T, Vec<T>)> {
            let p = loss.partials(x[0]);
            let one = T::one();
            Ok((
                eta * p.pos + (one - eta) * p.neg,
                vec![eta * p.dpos + (one - eta) * p.dneg],
            ))
        };
        let res = bfgs(&obj, &[start], &cfg)?;
        let dev = (loss.inv_link(res.x_star[0]) - eta).abs();
        sweep.max_deviation = sweep.max_deviation.max(dev);
        sweep.tested += 1;
    }
    Ok(sweep)
}

/// Fits `reference ≈ built + b` and returns `(b, max |reference − built − b|)`.
pub fn additive_fit<T: Scalar>(reference: &[T], built: &[T]) -> Result<(T, T)> {
    if reference.len() != built.len() || reference.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: reference.len(),
            found: built.len(),
        });
    }
    let n = T::from_usize_lossy(reference.len());
    let offset = reference.iter().zip(built).map(|(&r, &b)| r - b).sum::<T>() / n;
    let resid = reference
        .iter()
        .zip(built)
        .map(|(&r, &b)| (r - b - offset).abs())
        .fold(T::zero(), T::max);
    Ok((offset, resid))
}
