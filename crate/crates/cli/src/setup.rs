//! Turning a [`RunConfig`] into core objects.

use bregman_dre::synth::{as_points, sample_piecewise};
use bregman_dre::{
    gaussian_pair, median_heuristic, FitConfig, GaussianPair, GeneratorFamily, KernelSpec, Loss64, PiecewisePairSpec,
    Point, Rng, SampleSet, Which,
};

use crate::config::{Bandwidth, RunConfig};
use crate::error::{CliError, CliResult};
use crate::output::read_points;

pub const DEFAULT_FAMILY: &str = "kulsif";
pub const DEFAULT_N: usize = 200;
pub const DEFAULT_HOLDOUT: usize = 1000;
pub const DEFAULT_CV_GRID: [f64; 3] = [10.0, 0.1, 1e-3];
pub const DEFAULT_CV_FOLDS: usize = 5;
/// Tighter than the library default: the saved model should sit at the optimum.
pub const DEFAULT_MAX_ITER: usize = 2000;
pub const DEFAULT_GRAD_TOL: f64 = 1e-10;

pub fn family(cfg: &RunConfig) -> CliResult<GeneratorFamily<f64>> {
    Ok(GeneratorFamily::parse(
        cfg.family.as_deref().unwrap_or(DEFAULT_FAMILY),
        cfg.k,
    )?)
}

pub fn fit_config(cfg: &RunConfig) -> FitConfig<f64> {
    let mut fc = FitConfig::default();
    fc.bfgs = fc
        .bfgs
        .with_max_iter(cfg.max_iter.unwrap_or(DEFAULT_MAX_ITER))
        .with_grad_tol(cfg.grad_tol.unwrap_or(DEFAULT_GRAD_TOL));
    fc
}

/// The pair that generated the data, when it is known.
#[derive(Clone, Debug)]
pub enum Truth {
    Gaussian(GaussianPair<f64>),
    Piecewise(PiecewisePairSpec<f64>),
    Unknown,
}

impl Truth {
    pub fn beta(&self, x: &[f64]) -> CliResult<Option<f64>> {
        match self {
            Truth::Gaussian(g) => Ok(Some(g.exact_beta(x[0]))),
            Truth::Piecewise(s) => Ok(Some(bregman_dre::synth::piecewise_beta(s, x[0])?)),
            Truth::Unknown => Ok(None),
        }
    }

    /// `n` fresh draws from Q on the named stream, if Q can be sampled.
    pub fn sample_q(&self, n: usize, rng: &Rng, stream: &str) -> Option<Vec<Point<f64>>> {
        let mut r = rng.stream(stream);
        match self {
            Truth::Gaussian(g) => Some(as_points(&g.sample(Which::Q, n, &mut r))),
            Truth::Piecewise(s) => Some(as_points(&sample_piecewise(s, Which::Q, n, &mut r))),
            Truth::Unknown => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Truth::Gaussian(_) => "gaussian",
            Truth::Piecewise(_) => "piecewise",
            Truth::Unknown => "csv",
        }
    }
}

pub fn gaussian(cfg: &RunConfig) -> CliResult<GaussianPair<f64>> {
    let d = GaussianPair::<f64>::default_pair();
    Ok(gaussian_pair(
        cfg.mu_p.unwrap_or(d.mu_p),
        cfg.sigma_p.unwrap_or(d.sigma_p),
        cfg.mu_q.unwrap_or(d.mu_q),
        cfg.sigma_q.unwrap_or(d.sigma_q),
    )?)
}

pub fn piecewise(cfg: &RunConfig) -> CliResult<PiecewisePairSpec<f64>> {
    let d = PiecewisePairSpec::<f64>::default_pair();
    Ok(PiecewisePairSpec::new(
        cfg.interval.unwrap_or(d.interval),
        cfg.breakpoints.clone().unwrap_or(d.breakpoints),
        cfg.p_levels.clone().unwrap_or(d.p_levels),
        cfg.q_levels.clone().unwrap_or(d.q_levels),
    )?)
}

/// The pair named by `data` (default `gaussian`).
pub fn truth(cfg: &RunConfig) -> CliResult<Truth> {
    match cfg.data.as_deref().unwrap_or("gaussian") {
        "gaussian" => Ok(Truth::Gaussian(gaussian(cfg)?)),
        "piecewise" => Ok(Truth::Piecewise(piecewise(cfg)?)),
        "csv" => Ok(Truth::Unknown),
        other => Err(CliError::Usage(format!(
            "`data` must be gaussian, piecewise or csv, got `{other}`"
        ))),
    }
}

/// Training samples for `fit`.
pub fn samples(cfg: &RunConfig, truth: &Truth, rng: &Rng) -> CliResult<SampleSet<f64>> {
    let (n_p, n_q) = (cfg.n_p.unwrap_or(DEFAULT_N), cfg.n_q.unwrap_or(DEFAULT_N));
    let (xp, xq) = match truth {
        Truth::Gaussian(g) => (
            as_points(&g.sample(Which::P, n_p, &mut rng.stream("fit/p"))),
            as_points(&g.sample(Which::Q, n_q, &mut rng.stream("fit/q"))),
        ),
        Truth::Piecewise(s) => (
            as_points(&sample_piecewise(s, Which::P, n_p, &mut rng.stream("fit/p"))),
            as_points(&sample_piecewise(s, Which::Q, n_q, &mut rng.stream("fit/q"))),
        ),
        Truth::Unknown => {
            let need = |p: &Option<std::path::PathBuf>, key: &str| {
                p.clone()
                    .ok_or_else(|| CliError::Usage(format!("data=csv needs `{key}`")))
            };
            (
                read_points(&need(&cfg.p_csv, "p_csv")?)?,
                read_points(&need(&cfg.q_csv, "q_csv")?)?,
            )
        }
    };
    Ok(SampleSet::new(xp, xq)?)
}

pub fn kernel(cfg: &RunConfig, pooled: &[Point<f64>]) -> CliResult<KernelSpec<f64>> {
    match cfg.kernel.as_deref().unwrap_or("gaussian") {
        "gaussian" => {
            let sigma = match cfg.sigma.unwrap_or(Bandwidth::Median) {
                Bandwidth::Fixed(s) => s,
                Bandwidth::Median => median_heuristic(pooled)?,
            };
            Ok(KernelSpec::gaussian(sigma)?)
        }
        "polynomial" => Ok(KernelSpec::polynomial(cfg.degree.unwrap_or(2), cfg.offset.unwrap_or(1.0))?),
        other => Err(CliError::Usage(format!(
            "`kernel` must be gaussian or polynomial, got `{other}`"
        ))),
    }
}

pub fn loss(family: GeneratorFamily<f64>) -> Loss64 {
    bregman_dre::family_loss(family)
}
