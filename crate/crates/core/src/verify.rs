//! Seeded identity suite: every exact relation the construction must satisfy,
//! evaluated on random inputs and reduced to a worst-case residual.

use std::sync::Arc;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::generators::{
    bregman_term, builtin_generator, diamond_transform, weight_representation, BinaryNegEntropy,
    BregmanGenerator, DiscretePair, Generator, GeneratorFamily, DEFAULT_DOMAIN_EPS,
};
use crate::losses::{
    additive_fit, canonical_ratio_map, construct_loss, convexity_margin, excess_risk_identity_check,
    family_loss, properness_deviation, reid_convexity_margin, savage_residual, shuford_ratios,
    CompositeLoss, ExpMap, PowerMap, RatioMap,
};
use crate::quadrature::DEFAULT_NODES;
use crate::synth::Rng;

/// Outcome of one identity group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub name: String,
    pub evaluations: usize,
    pub max_residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl IdentityCheck {
    fn new(name: &str, evaluations: usize, max_residual: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            evaluations,
            max_residual,
            tolerance,
            passed: max_residual.is_finite() && max_residual <= tolerance && evaluations > 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SuiteConfig {
    pub seed: u64,
    /// Random discrete pairs for the excess-risk identity.
    pub n_pairs: usize,
    /// Random evaluations per family in the pointwise identities.
    pub n_random: usize,
    /// Break the loss construction on purpose (flip the sign of `γ′`).
    pub mutate_gamma_prime: bool,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_pairs: 200,
            n_random: 100,
            mutate_gamma_prime: false,
        }
    }
}

pub const EXCESS_RISK_TOL: f64 = 1e-10;
pub const EXAMPLE_RECOVERY_TOL: f64 = 1e-9;
pub const CLOSED_FORM_TOL: f64 = 1e-10;
pub const CONVEXITY_SLACK_TOL: f64 = 1e-9;
pub const SECOND_DERIVATIVE_TOL: f64 = 1e-8;
pub const WEIGHT_REPRESENTATION_TOL: f64 = 1e-6;
pub const SHUFORD_TOL: f64 = 1e-7;
pub const SAVAGE_TOL: f64 = 1e-8;
pub const DIAMOND_TOL: f64 = 1e-10;
pub const LINK_CONDITION_TOL: f64 = 1e-5;
pub const PROPERNESS_TOL: f64 = 1e-6;
pub const AFFINE_TOL: f64 = 1e-12;
/// Smallest estimated class probability the Savage and Shuford checks draw;
/// poly(6) clamps its score below η̂ ≈ 0.025.
pub const ETA_HAT_MIN: f64 = 0.03;

/// kulsif, lr, klest, boost, poly(0), poly(1), poly(6), ew.
pub fn builtin_families() -> Vec<GeneratorFamily<f64>> {
    vec![
        GeneratorFamily::Kulsif,
        GeneratorFamily::Lr,
        GeneratorFamily::Klest,
        GeneratorFamily::Boost,
        GeneratorFamily::Poly { k: 0.0 },
        GeneratorFamily::Poly { k: 1.0 },
        GeneratorFamily::Poly { k: 6.0 },
        GeneratorFamily::Ew,
    ]
}

fn suite_loss(family: GeneratorFamily<f64>, mutate: bool) -> CompositeLoss<f64> {
    let loss = family_loss(family);
    if mutate {
        loss.with_gamma_prime_sign(-1.0)
    } else {
        loss
    }
}

fn random_pair<R: rand::Rng + ?Sized>(rng: &mut R) -> DiscretePair<f64> {
    let n = rng.random_range(2..=6);
    let mut draw = || {
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..2.0)).collect();
        let s: f64 = v.iter().sum();
        let mut v: Vec<f64> = v.into_iter().map(|x| x / s).collect();
        let drift: f64 = 1.0 - v.iter().sum::<f64>();
        v[n - 1] += drift;
        v
    };
    let p = draw();
    let q = draw();
    DiscretePair::from_masses(p, q).expect("normalised masses")
}

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    grid(lo.ln(), hi.ln(), n).into_iter().map(f64::exp).collect()
}

/// `R(f) − R(f*) = ½ B_φ(β, g∘f)` on random discrete pairs.
pub fn check_excess_risk(cfg: &SuiteConfig) -> Result<IdentityCheck> {
    let mut rng = Rng::new(cfg.seed).stream("verify/excess-risk");
    let families = builtin_families();
    let losses: Vec<_> = families.iter().map(|&f| suite_loss(f, cfg.mutate_gamma_prime)).collect();
    let mut worst = 0.0f64;
    let mut count = 0;
    for _ in 0..cfg.n_pairs {
        let pair = random_pair(&mut rng);
        for loss in &losses {
            let f: Vec<f64> = (0..pair.len())
                .map(|_| loss.ratio_map().g_inv(rng.random_range(0.05..3.0)))
                .collect();
            let (excess, half) = excess_risk_identity_check(loss, &pair, &f)?;
            worst = worst.max((excess - half).abs());
            count += 1;
        }
    }
    Ok(IdentityCheck::new("excess_risk", count, worst, EXCESS_RISK_TOL))
}

/// Adding constants to γ leaves every excess risk unchanged.
pub fn check_affine_constants(cfg: &SuiteConfig) -> Result<IdentityCheck> {
    let mut rng = Rng::new(cfg.seed).stream("verify/affine");
    let mut worst = 0.0f64;
    let mut count = 0;
    for family in builtin_families() {
        let base = suite_loss(family, cfg.mutate_gamma_prime);
        for _ in 0..cfg.n_random / 4 + 1 {
            let (c1, c2) = (rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
            let shifted = construct_loss(base.generator().clone(), base.ratio_map().clone(), c1, c2)
                .with_score_bounds(base.score_bounds().0, base.score_bounds().1)
                .with_gamma_prime_sign(if cfg.mutate_gamma_prime { -1.0 } else { 1.0 });
            let pair = random_pair(&mut rng);
            let f: Vec<f64> = (0..pair.len())
                .map(|_| base.ratio_map().g_inv(rng.random_range(0.05..3.0)))
                .collect();
            let (a, _) = excess_risk_identity_check(&base, &pair, &f)?;
            let (b, _) = excess_risk_identity_check(&shifted, &pair, &f)?;
            worst = worst.max((a - b).abs());
            count += 1;
        }
    }
    Ok(IdentityCheck::new("affine_constants", count, worst, AFFINE_TOL))
}

/// The textbook KuLSIF, logistic and KL-importance losses, up to additive constants.
pub fn check_example_recovery(cfg: &SuiteConfig) -> Result<IdentityCheck> {
    type Partial = fn(f64) -> f64;
    type Case = (GeneratorFamily<f64>, (f64, f64), Partial, Partial);
    let cases: [Case; 3] = [
        (GeneratorFamily::Kulsif, (-3.0, 3.0), |y| -y, |y| 0.5 * y * y),
        (GeneratorFamily::Lr, (-3.0, 3.0), |y| (-y).exp().ln_1p(), |y| y.exp().ln_1p()),
        (GeneratorFamily::Klest, (0.05, 5.0), |y| -y.ln(), |y| y),
    ];
    let mut worst = 0.0f64;
    let mut count = 0;
    for (family, (lo, hi), pos, neg) in cases {
        let loss = suite_loss(family, cfg.mutate_gamma_prime);
        let ys = grid(lo, hi, 100);
        let built_pos: Vec<f64> = ys.iter().map(|&y| loss.ell_pos(y)).collect();
        let built_neg: Vec<f64> = ys.iter().map(|&y| loss.ell_neg(y)).collect();
        let ref_pos: Vec<f64> = ys.iter().map(|&y| pos(y)).collect();
        let ref_neg: Vec<f64> = ys.iter().map(|&y| neg(y)).collect();
        worst = worst.max(additive_fit(&ref_pos, &built_pos)?.1);
        worst = worst.max(additive_fit(&ref_neg, &built_neg)?.1);
        count += 2 * ys.len();
    }
    Ok(IdentityCheck::new("example_recovery", count, worst, EXAMPLE_RECOVERY_TOL))
}

/// Canonical maps of poly(k) and EW, inverted numerically, against their closed forms.
pub fn check_closed_form_estimators(_cfg: &SuiteConfig) -> Result<IdentityCheck> {
    let mut worst = 0.0f64;
    let mut count = 0;
    let fs = log_grid(1e-2, 20.0, 100);
    for k in [0.0, 1.0, 6.0] {
        let map = canonical_ratio_map(builtin_generator("poly", Some(k))?.into_arc()).newton_only();
        for &f in &fs {
            let expected = ((1.0 + k) * f).powf(1.0 / (1.0 + k));
            let got = map.try_g(f)?;
            worst = worst.max((got - expected).abs() / expected.abs().max(1.0));
            count += 1;
        }
    }
    let ew = canonical_ratio_map(builtin_generator::<f64>("ew", None)?.into_arc()).newton_only();
    for &f in &fs {
        let expected = 0.5 * (2.0 * f).ln();
        worst = worst.max((ew.try_g(f)? - expected).abs() / expected.abs().max(1.0));
        count += 1;
    }
    Ok(IdentityCheck::new("closed_form_estimators", count, worst, CLOSED_FORM_TOL))
}

/// Canonical-map convexity slacks on `x ∈ [1e-6, 50]`; the residual is the worst violation.
pub fn check_convexity_slacks(_cfg: &SuiteConfig) -> Result<IdentityCheck> {
    let mut worst = 0.0f64;
    let mut count = 0;
    for family in builtin_families() {
        let gen = BregmanGenerator::new(family);
        let map = canonical_ratio_map(gen.into_arc());
        for x in log_grid(1e-6, 50.0, 200) {
            let (lo, hi) = convexity_margin(&gen, &map, x)?;
            worst = worst.max(-lo).max(-hi);
            count += 1;
        }
    }
    Ok(IdentityCheck::new("convexity_slack", count, worst.max(0.0), CONVEXITY_SLACK_TOL))
}

/// Differences of the analytic first derivative of both canonical partial
/// losses on the scores `g⁻¹(x)`, `x ∈ [1e-6, 50]`; the residual is the most
/// negative second derivative found. Scores within one step of a clamp bound
/// are left out (only poly(k) near `y = 0` is affected).
pub fn check_second_derivatives(cfg: &SuiteConfig) -> Result<IdentityCheck> {
    let mut worst = 0.0f64;
    let mut count = 0;
    for family in builtin_families() {
        let gen = BregmanGenerator::new(family).into_arc();
        let map: Arc<dyn RatioMap<f64>> = Arc::new(canonical_ratio_map(gen.clone()));
        let mut loss = construct_loss(gen, map.clone(), 0.0, 0.0);
        if cfg.mutate_gamma_prime {
            loss = loss.with_gamma_prime_sign(-1.0);
        }
        for x in log_grid(1e-6, 50.0, 200) {
            let y = map.g_inv(x);
            let h = 1e-4 * y.abs().max(1.0);
            // stencils reaching into the clamped range measure the clamp, not the loss
            if loss.clamp_score(y - h).1 || loss.clamp_score(y + h).1 {
                continue;
            }
            let (a, b) = (loss.partials(y + h), loss.partials(y - h));
            let d2pos = (a.dpos - b.dpos) / (2.0 * h);
            let d2neg = (a.dneg - b.dneg) / (2.0 * h);
            worst = worst.max(-d2pos).max(-d2neg);
            count += 1;
        }
    }
    Ok(IdentityCheck::new("convexity_second_derivative", count, worst.max(0.0), SECOND_DERIVATIVE_TOL))
}

/// `∫ φ″(c) φ_c(r, r̂) dc` against the pointwise Bregman gap.
pub fn check_weight_representation(cfg: &SuiteConfig) -> Result<IdentityCheck> {
    let mut rng = Rng::new(cfg.seed).stream("verify/weight-representation");
    let mut worst = 0.0f64;
    let mut count = 0;
    for family in builtin_families() {
        let gen = BregmanGenerator::new(family);
        for _ in 0..cfg.n_random {
            let r: f64 = rng.random_range(DEFAULT_DOMAIN_EPS..3.0);
            let rhat: f64 = rng.random_range(DEFAULT_DOMAIN_EPS..3.0);
            let quad = weight_representation(&gen, r, rhat, DEFAULT_NODES)?;
            worst = worst.max((quad - bregman_term(&gen, r, rhat)).abs());
            count += 1;
        }
    }
    Ok(IdentityCheck::new("weight_representation", count, worst, WEIGHT_REPRESENTATION_TOL))
}

/// Relative disagreement of the two weight ratios of each proper loss.
pub fn check_shuford(cfg: &SuiteConfig) -> Result<IdentityCheck> {
    let mut rng = Rng::new(cfg.seed).stream("verify/shuford");
    let mut worst = 0.0f64;
    let mut count = 0;
    for family in builtin_families() {
        let loss = suite_loss(family, cfg.mutate_gamma_prime);
        for _ in 0..cfg.n_random {
            let eta: f64 = rng.random_range(ETA_HAT_MIN..0.85);
            let (a, b) = shuford_ratios(&loss, eta)?;
            let rel = if a > 0.0 && b > 0.0 {
                (a - b).abs() / a.abs().max(b.abs())
            } else {
                f64::INFINITY
            };
            worst = worst.max(rel);
            count += 1;
        }
    }
    Ok(IdentityCheck::new("shuford_weight", count, worst, SHUFORD_TOL))
}

/// `CR(η, ŷ) = BR(η̂) + (η − η̂) BR′(η̂)`.
pub fn check_savage(cfg: &SuiteConfig) -> Result<IdentityCheck> {
    let mut rng = Rng::new(cfg.seed).stream("verify/savage");
    let mut worst = 0.0f64;
    let mut count = 0;
    for family in builtin_families() {
        let loss = suite_loss(family, cfg.mutate_gamma_prime);
        for _ in 0..cfg.n_random {
            let eta: f64 = rng.random_range(0.0..=1.0);
            let eta_hat: f64 = rng.random_range(ETA_HAT_MIN..0.75);
            let y = loss.link(eta_hat);
            worst = worst.max(savage_residual(&loss, eta, y)?.abs());
            count += 1;
        }
    }
    Ok(IdentityCheck::new("savage", count, worst, SAVAGE_TOL))
}

/// `(1 + x) d_φ(x/(1+x), y/(1+y)) = d_{φ⋄}(x, y)` for the binary negative entropy.
pub fn check_diamond(cfg: &SuiteConfig) -> Result<IdentityCheck> {
    let mut rng = Rng::new(cfg.seed).stream("verify/diamond");
    let phi = BinaryNegEntropy;
    let lifted = diamond_transform::<f64, _>(BinaryNegEntropy);
    let mut worst = 0.0f64;
    for _ in 0..cfg.n_random {
        let x: f64 = rng.random_range(1e-6..10.0);
        let y: f64 = rng.random_range(1e-6..10.0);
        lifted.check_arg(x)?;
        lifted.check_arg(y)?;
        let lhs = (1.0 + x) * bregman_term(&phi, x / (1.0 + x), y / (1.0 + y));
        let rhs = bregman_term(&lifted, x, y);
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(IdentityCheck::new("diamond", cfg.n_random, worst, DIAMOND_TOL))
}

fn link_cases() -> Vec<(BregmanGenerator<f64>, Arc<dyn RatioMap<f64>>)> {
    let mut cases: Vec<(BregmanGenerator<f64>, Arc<dyn RatioMap<f64>>)> = Vec::new();
    for k in [0.0, 1.0, 2.0] {
        for dp in [0.5, 1.25, 1.75, 2.5] {
            cases.push((
                BregmanGenerator::new(GeneratorFamily::Poly { k }),
                Arc::new(PowerMap::new(k + dp)),
            ));
        }
    }
    for family in [GeneratorFamily::Kulsif, GeneratorFamily::Lr, GeneratorFamily::Boost] {
        cases.push((BregmanGenerator::new(family), Arc::new(ExpMap::new(1.0))));
    }
    cases
}

/// Convexity through the weight and link (in `η`) against convexity through
/// φ and `g` (in `x = η/(1 − η)`): the slacks differ exactly by `(1 + x)²`,
/// so both verdicts must agree.
pub fn check_link_condition(_cfg: &SuiteConfig) -> Result<IdentityCheck> {
    let mut worst = 0.0f64;
    let mut count = 0;
    for (gen, rmap) in link_cases() {
        let loss = construct_loss(gen.into_arc(), rmap.clone(), 0.0, 0.0);
        let mut convex8 = true;
        let mut convex25 = true;
        for x in log_grid(0.05, 20.0, 40) {
            let eta = x / (1.0 + x);
            let (l8, u8) = convexity_margin(&gen, rmap.as_ref(), x)?;
            let (l25, u25) = reid_convexity_margin(&loss, eta)?;
            let s = (1.0 + x) * (1.0 + x);
            for (a, b) in [(l25, l8), (u25, u8)] {
                worst = worst.max((a - s * b).abs() / (s * b.abs().max(1.0)));
            }
            convex8 &= l8 >= -CONVEXITY_SLACK_TOL && u8 >= -CONVEXITY_SLACK_TOL;
            convex25 &= l25 >= -LINK_CONDITION_TOL * s && u25 >= -LINK_CONDITION_TOL * s;
            count += 1;
        }
        if convex8 != convex25 {
            worst = f64::INFINITY;
        }
    }
    Ok(IdentityCheck::new("link_convexity_condition", count, worst, LINK_CONDITION_TOL))
}

/// Minimisers of the conditional risk sit at `Ψ(η)` for `η ∈ {0.01, …, 0.99}`.
pub fn check_properness(cfg: &SuiteConfig) -> Result<IdentityCheck> {
    let etas: Vec<f64> = (1..100).map(|i| i as f64 / 100.0).collect();
    let mut worst = 0.0f64;
    let mut count = 0;
    for family in builtin_families() {
        let loss = suite_loss(family, cfg.mutate_gamma_prime);
        let sweep = properness_deviation(&loss, &etas)?;
        worst = worst.max(sweep.max_deviation);
        count += sweep.tested;
    }
    Ok(IdentityCheck::new("properness", count, worst, PROPERNESS_TOL))
}

/// Runs every group. Groups that fail to evaluate at all are reported as
/// failures with an infinite residual rather than aborting the suite.
pub fn run_identity_suite(cfg: &SuiteConfig) -> Vec<IdentityCheck> {
    type Group = (&'static str, fn(&SuiteConfig) -> Result<IdentityCheck>);
    let groups: [Group; 12] = [
        ("excess_risk", check_excess_risk),
        ("affine_constants", check_affine_constants),
        ("example_recovery", check_example_recovery),
        ("closed_form_estimators", check_closed_form_estimators),
        ("convexity_slack", check_convexity_slacks),
        ("convexity_second_derivative", check_second_derivatives),
        ("weight_representation", check_weight_representation),
        ("shuford_weight", check_shuford),
        ("savage", check_savage),
        ("diamond", check_diamond),
        ("link_convexity_condition", check_link_condition),
        ("properness", check_properness),
    ];
    groups
        .iter()
        .map(|(name, run)| {
            run(cfg).unwrap_or_else(|e| {
                log::warn!("identity group {name} could not be evaluated: {e}");
                IdentityCheck {
                    name: name.to_string(),
                    evaluations: 0,
                    max_residual: f64::INFINITY,
                    tolerance: f64::NAN,
                    passed: false,
                }
            })
        })
        .collect()
}

/// Generator names covered by the suite, for reports.
pub fn covered_generators() -> Vec<String> {
    builtin_families()
        .into_iter()
        .map(|f| BregmanGenerator::new(f).name())
        .collect()
}
