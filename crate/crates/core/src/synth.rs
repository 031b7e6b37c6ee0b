//! Deterministic synthetic data: piecewise-constant pairs, Gaussian pairs and
//! a covariate-shift regression task.

use rand::{Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};
use crate::kernel::Point;
use crate::quadrature::simpson;
use crate::scalar::Scalar;

/// Seeded source of independent, named random streams.
///
/// Each consumer name selects its own ChaCha stream, so adding a draw in one
/// place never shifts the numbers another consumer sees.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Rng {
    seed: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The stream belonging to `name`.
    pub fn stream(&self, name: &str) -> ChaCha20Rng {
        let digest = Sha256::digest(name.as_bytes());
        let mut id = [0u8; 8];
        id.copy_from_slice(&digest[..8]);
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(u64::from_le_bytes(id));
        rng
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Which {
    P,
    Q,
}

/// Two piecewise-constant densities on a shared interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiecewisePairSpec<T> {
    pub interval: [T; 2],
    /// Interior breakpoints, sorted; `n` breakpoints give `n + 1` pieces.
    pub breakpoints: Vec<T>,
    pub p_levels: Vec<T>,
    pub q_levels: Vec<T>,
}

impl<T: Scalar> PiecewisePairSpec<T> {
    pub fn new(interval: [T; 2], breakpoints: Vec<T>, p_levels: Vec<T>, q_levels: Vec<T>) -> Result<Self> {
        let spec = Self {
            interval,
            breakpoints,
            p_levels,
            q_levels,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Five-piece symmetric pair on `[−1, 1]` with `β = 5.75` on the outer
    /// tenths, `1` on the shoulders and `0.05` in the middle; `Q` is uniform.
    pub fn default_pair() -> Self {
        let l = T::lit;
        Self::new(
            [l(-1.0), l(1.0)],
            vec![l(-0.9), l(-0.5), l(0.5), l(0.9)],
            vec![l(2.875), l(0.5), l(0.025), l(0.5), l(2.875)],
            vec![l(0.5); 5],
        )
        .expect("default pair is valid")
    }

    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.interval;
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidPair(format!("bad interval [{lo}, {hi}]")));
        }
        let pieces = self.breakpoints.len() + 1;
        if self.p_levels.len() != pieces || self.q_levels.len() != pieces {
            return Err(Error::InvalidPair(format!(
                "{pieces} pieces but {} P levels and {} Q levels",
                self.p_levels.len(),
                self.q_levels.len()
            )));
        }
        let edges = self.edges();
        if edges.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidPair("breakpoints must be strictly inside the interval and sorted".into()));
        }
        if self.p_levels.iter().any(|&v| !(v >= T::zero()) || !v.is_finite()) {
            return Err(Error::InvalidPair("P levels must be finite and nonnegative".into()));
        }
        if self.q_levels.iter().any(|&v| !(v > T::zero()) || !v.is_finite()) {
            return Err(Error::InvalidPair("Q levels must be positive".into()));
        }
        let tol = T::lit(1e-12).max(T::epsilon() * T::lit(64.0));
        for (label, levels) in [("P", &self.p_levels), ("Q", &self.q_levels)] {
            let mass: T = self.widths().iter().zip(levels.iter()).map(|(&w, &l)| w * l).sum();
            if (mass - T::one()).abs() > tol {
                return Err(Error::InvalidPair(format!("{label} density integrates to {mass}")));
            }
        }
        Ok(())
    }

    /// Interval endpoints with the breakpoints in between.
    pub fn edges(&self) -> Vec<T> {
        let mut e = Vec::with_capacity(self.breakpoints.len() + 2);
        e.push(self.interval[0]);
        e.extend_from_slice(&self.breakpoints);
        e.push(self.interval[1]);
        e
    }

    fn widths(&self) -> Vec<T> {
        self.edges().windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn n_pieces(&self) -> usize {
        self.p_levels.len()
    }

    /// Piece containing `x`; pieces are closed on the left, the last one on both sides.
    pub fn piece_index(&self, x: T) -> Result<usize> {
        let [lo, hi] = self.interval;
        if !(x >= lo && x <= hi) {
            return Err(Error::Domain {
                what: format!("piecewise pair on [{lo}, {hi}]"),
                value: x.to_f64_lossy(),
            });
        }
        Ok(self.breakpoints.iter().take_while(|&&b| x >= b).count())
    }

    pub fn density(&self, which: Which, x: T) -> Result<T> {
        let i = self.piece_index(x)?;
        Ok(match which {
            Which::P => self.p_levels[i],
            Which::Q => self.q_levels[i],
        })
    }

    /// Piece masses of P or Q.
    pub fn masses(&self, which: Which) -> Vec<T> {
        let levels = match which {
            Which::P => &self.p_levels,
            Which::Q => &self.q_levels,
        };
        self.widths().iter().zip(levels).map(|(&w, &l)| w * l).collect()
    }

    /// `∫ f dμ` where `μ` has density `weight` per piece, by Simpson on each piece.
    pub fn integrate(&self, f: impl Fn(T) -> T, which: Which, n_nodes: usize) -> Result<T> {
        let levels = match which {
            Which::P => &self.p_levels,
            Which::Q => &self.q_levels,
        };
        let mut total = T::zero();
        for (w, &level) in self.edges().windows(2).zip(levels) {
            if level == T::zero() {
                continue;
            }
            total += level * simpson(&f, w[0], w[1], n_nodes)?;
        }
        Ok(total)
    }
}

/// `β(x) = p(x)/q(x)` of a piecewise pair.
pub fn piecewise_beta<T: Scalar>(spec: &PiecewisePairSpec<T>, x: T) -> Result<T> {
    let i = spec.piece_index(x)?;
    Ok(spec.p_levels[i] / spec.q_levels[i])
}

/// Inverse-CDF draws from P or Q.
pub fn sample_piecewise<T: Scalar, R: RngCore + ?Sized>(
    spec: &PiecewisePairSpec<T>,
    which: Which,
    n: usize,
    rng: &mut R,
) -> Vec<T> {
    let masses: Vec<f64> = spec.masses(which).iter().map(|m| m.to_f64_lossy()).collect();
    let edges: Vec<f64> = spec.edges().iter().map(|e| e.to_f64_lossy()).collect();
    let last = (0..masses.len()).rev().find(|&i| masses[i] > 0.0).unwrap_or(0);
    (0..n)
        .map(|_| {
            let mut u: f64 = rng.random();
            let mut i = 0;
            while i < last && (u >= masses[i] || masses[i] == 0.0) {
                u -= masses[i];
                i += 1;
            }
            let frac = (u / masses[i]).clamp(0.0, 1.0);
            let x = edges[i] + frac * (edges[i + 1] - edges[i]);
            T::lit(x.min(edges[i + 1]))
        })
        .collect()
}

/// `P = N(μ_p, σ_p²)` and `Q = N(μ_q, σ_q²)` on the real line.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianPair<T> {
    pub mu_p: T,
    pub sigma_p: T,
    pub mu_q: T,
    pub sigma_q: T,
}

pub fn gaussian_pair<T: Scalar>(mu_p: T, sigma_p: T, mu_q: T, sigma_q: T) -> Result<GaussianPair<T>> {
    for (name, s) in [("sigma_p", sigma_p), ("sigma_q", sigma_q)] {
        if !(s > T::zero()) || !s.is_finite() {
            return Err(invalid(name, format!("standard deviation must be positive, got {s}")));
        }
    }
    Ok(GaussianPair {
        mu_p,
        sigma_p,
        mu_q,
        sigma_q,
    })
}

impl<T: Scalar> GaussianPair<T> {
    /// `Q = N(0, 1)`, `P = N(1, 0.5²)`.
    pub fn default_pair() -> Self {
        gaussian_pair(T::one(), T::lit(0.5), T::zero(), T::one()).expect("valid")
    }

    pub fn density(&self, which: Which, x: T) -> T {
        let (mu, s) = match which {
            Which::P => (self.mu_p, self.sigma_p),
            Which::Q => (self.mu_q, self.sigma_q),
        };
        let z = (x - mu) / s;
        (-z * z / T::lit(2.0)).exp() / (s * T::TAU().sqrt())
    }

    /// Ratio of the two normal densities in closed form.
    pub fn exact_beta(&self, x: T) -> T {
        let zp = (x - self.mu_p) / self.sigma_p;
        let zq = (x - self.mu_q) / self.sigma_q;
        self.sigma_q / self.sigma_p * ((zq * zq - zp * zp) / T::lit(2.0)).exp()
    }

    pub fn sample<R: RngCore + ?Sized>(&self, which: Which, n: usize, rng: &mut R) -> Vec<T> {
        let (mu, s) = match which {
            Which::P => (self.mu_p, self.sigma_p),
            Which::Q => (self.mu_q, self.sigma_q),
        };
        let normal = Normal::new(mu.to_f64_lossy(), s.to_f64_lossy()).expect("validated parameters");
        (0..n).map(|_| T::lit(normal.sample(rng))).collect()
    }
}

/// The regression function `f_P(x) = sin(3x⁴)`.
pub fn target_function<T: Scalar>(x: T) -> T {
    (T::lit(3.0) * x.powi(4)).sin()
}

/// Labelled source draws from Q and unlabelled target draws from P.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressionTask<T> {
    pub src_xs: Vec<T>,
    pub src_ys: Vec<T>,
    pub tgt_xs: Vec<T>,
}

/// Covariate-shift task: `y = sin(3x⁴) + ε` with `ε ~ N(0, noise_sigma²)`.
pub fn regression_task<T: Scalar>(
    spec: &PiecewisePairSpec<T>,
    n_src: usize,
    n_tgt: usize,
    noise_sigma: T,
    rng: &Rng,
) -> Result<RegressionTask<T>> {
    if n_src == 0 || n_tgt == 0 {
        return Err(invalid("n", "sample counts must be positive"));
    }
    if !(noise_sigma >= T::zero()) {
        return Err(invalid("noise_sigma", "must be nonnegative"));
    }
    let src_xs = sample_piecewise(spec, Which::Q, n_src, &mut rng.stream("regression/source"));
    let tgt_xs = sample_piecewise(spec, Which::P, n_tgt, &mut rng.stream("regression/target"));
    let mut noise = rng.stream("regression/noise");
    let src_ys = src_xs
        .iter()
        .map(|&x| {
            let e: f64 = StandardNormal.sample(&mut noise);
            target_function(x) + noise_sigma * T::lit(e)
        })
        .collect();
    Ok(RegressionTask { src_xs, src_ys, tgt_xs })
}

/// Wraps scalars as one-dimensional points.
pub fn as_points<T: Scalar>(xs: &[T]) -> Vec<Point<T>> {
    xs.iter().map(|&x| vec![x]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_pair_values() {
        let spec = PiecewisePairSpec::<f64>::default_pair();
        assert_eq!(piecewise_beta(&spec, 0.95).unwrap(), 5.75);
        assert_eq!(piecewise_beta(&spec, 0.9).unwrap(), 5.75);
        assert_eq!(piecewise_beta(&spec, 0.0).unwrap(), 0.05);
        assert_eq!(piecewise_beta(&spec, -0.7).unwrap(), 1.0);
        assert_eq!(piecewise_beta(&spec, 1.0).unwrap(), 5.75);
        assert!(piecewise_beta(&spec, 1.5).is_err());
        for which in [Which::P, Which::Q] {
            let norm = spec.integrate(|_| 1.0, which, 11).unwrap();
            assert!((norm - 1.0).abs() < 1e-12);
        }
        // both densities are symmetric, so odd moments vanish
        let m1 = spec.integrate(|x| x, Which::P, 11).unwrap();
        assert!(m1.abs() < 1e-14);
        let m2 = spec.integrate(|x| x * x, Which::Q, 11).unwrap();
        assert!((m2 - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn two_piece_ratio() {
        let spec = PiecewisePairSpec::new([-1.0f64, 1.0], vec![0.0], vec![0.1, 0.9], vec![0.9, 0.1]).unwrap();
        assert!((piecewise_beta(&spec, -0.5).unwrap() - 1.0 / 9.0).abs() < 1e-15);
        assert!((piecewise_beta(&spec, 0.5).unwrap() - 9.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(PiecewisePairSpec::new([-1.0, 1.0], vec![0.0], vec![0.5, 0.5], vec![0.5, 0.5]).is_ok());
        assert!(PiecewisePairSpec::new([-1.0, 1.0], vec![0.0], vec![0.5, 0.6], vec![0.5, 0.5]).is_err());
        assert!(PiecewisePairSpec::new([-1.0, 1.0], vec![0.0], vec![0.5, 0.5], vec![1.0, 0.0]).is_err());
        assert!(PiecewisePairSpec::new([-1.0, 1.0], vec![2.0], vec![0.5, 0.5], vec![0.5, 0.5]).is_err());
    }

    #[test]
    fn single_piece_mean() {
        let spec = PiecewisePairSpec::new([0.0, 2.0], vec![], vec![0.5], vec![0.5]).unwrap();
        let xs = sample_piecewise(&spec, Which::P, 20_000, &mut Rng::new(3).stream("t"));
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let sd = 2.0 / 12f64.sqrt();
        assert!((mean - 1.0).abs() < 3.0 * sd / (xs.len() as f64).sqrt());
        assert!(xs.iter().all(|&x| (0.0..=2.0).contains(&x)));
    }

    #[test]
    fn streams_are_deterministic_and_distinct() {
        let rng = Rng::new(42);
        let a: Vec<u64> = (0..4).map(|_| rng.stream("a").next_u64()).collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
        assert_ne!(rng.stream("a").next_u64(), rng.stream("b").next_u64());
        assert_ne!(Rng::new(1).stream("a").next_u64(), Rng::new(2).stream("a").next_u64());
    }

    #[test]
    fn gaussian_ratio() {
        let g = GaussianPair::<f64>::default_pair();
        assert!((g.exact_beta(1.0) - 2.0 * 0.5f64.exp()).abs() < 1e-14);
        let same = gaussian_pair(0.3f64, 1.2, 0.3, 1.2).unwrap();
        assert!((same.exact_beta(-2.0) - 1.0).abs() < 1e-15);
        let norm = simpson(|x| g.exact_beta(x) * g.density(Which::Q, x), -12.0, 12.0, 4001).unwrap();
        assert!((norm - 1.0).abs() < 1e-8);
        assert!(gaussian_pair(0.0, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn regression_examples() {
        assert_eq!(target_function(0.0f64), 0.0);
        assert!((target_function(1.0f64) - 3f64.sin()).abs() < 1e-15);
        let spec = PiecewisePairSpec::<f64>::default_pair();
        let t = regression_task(&spec, 50, 30, 0.0, &Rng::new(9)).unwrap();
        for (x, y) in t.src_xs.iter().zip(&t.src_ys) {
            assert_eq!(*y, target_function(*x));
        }
        let again = regression_task(&spec, 50, 30, 0.0, &Rng::new(9)).unwrap();
        assert_eq!(t, again);
        assert_eq!(t.tgt_xs.len(), 30);
    }
}
