use bregman_dre::{
    bregman_term, cross_validate_alpha, fit, FitConfig, FitDiagnostics, GeneratorFamily, KernelSpec, Model64, Point, Rng, Status,
};
use serde::{Deserialize, Serialize};

use crate::config::{AlphaChoice, RunConfig};
use crate::error::{CliError, CliResult};
use crate::output::{prepare_dir, write_json};
use crate::setup::{self, Truth, DEFAULT_CV_FOLDS, DEFAULT_CV_GRID, DEFAULT_HOLDOUT};

/// On-disk form of a fitted ratio model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub family: String,
    pub k: Option<f64>,
    pub kernel: KernelSpec<f64>,
    pub alpha: f64,
    pub centers: Vec<Point<f64>>,
    pub coeffs: Vec<f64>,
    pub clamp_count: usize,
}

impl ModelFile {
    pub fn from_model(family: GeneratorFamily<f64>, m: &Model64) -> Self {
        Self {
            family: family.id().to_string(),
            k: family.k(),
            kernel: m.kernel,
            alpha: m.alpha,
            centers: m.centers.clone(),
            coeffs: m.coeffs.clone(),
            clamp_count: m.diagnostics.clamp_count,
        }
    }

    pub fn load(path: &std::path::Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let m: Self =
            serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("model {}: {e}", path.display())))?;
        m.kernel.validate()?;
        if m.centers.len() != m.coeffs.len() || m.centers.is_empty() {
            return Err(CliError::Usage(format!(
                "model {}: {} centers but {} coefficients",
                path.display(),
                m.centers.len(),
                m.coeffs.len()
            )));
        }
        Ok(m)
    }

    /// Rebuilds a model that predicts exactly like the one that was saved.
    pub fn into_model(self) -> CliResult<(GeneratorFamily<f64>, Model64)> {
        let family = GeneratorFamily::parse(&self.family, self.k)?;
        let n = self.coeffs.len();
        let model = Model64 {
            kernel: self.kernel,
            centers: self.centers,
            coeffs: self.coeffs,
            loss: setup::loss(family),
            alpha: self.alpha,
            diagnostics: FitDiagnostics {
                status: Status::Converged,
                iterations: 0,
                train_risk: f64::NAN,
                grad_norm: f64::NAN,
                clamp_count: self.clamp_count,
                clamp_fraction: self.clamp_count as f64 / n as f64,
                closed_form_max_diff: None,
            },
        };
        Ok((family, model))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CvRow {
    pub alpha: f64,
    pub heldout_risk: f64,
}

/// Ratio estimates on fresh Q draws, against the truth when it is known.
#[derive(Clone, Debug, Serialize)]
pub struct HoldoutMetrics {
    pub n: usize,
    pub mean_beta_hat: f64,
    pub clamp_count: usize,
    /// Mean of `B_φ(β(x), β̂(x))` over the draws.
    pub bregman_error: Option<f64>,
    pub mean_abs_error: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FitMetrics {
    pub family: String,
    pub k: Option<f64>,
    pub data: String,
    pub seed: u64,
    pub n_p: usize,
    pub n_q: usize,
    pub kernel: KernelSpec<f64>,
    pub alpha: f64,
    pub alpha_selection: String,
    pub cv_table: Vec<CvRow>,
    pub status: Status,
    pub iterations: usize,
    pub train_risk: f64,
    pub grad_norm: f64,
    pub clamp_count: usize,
    pub clamp_fraction: f64,
    pub closed_form_max_diff: Option<f64>,
    pub holdout: Option<HoldoutMetrics>,
}

pub fn holdout_metrics(
    family: GeneratorFamily<f64>,
    model: &Model64,
    truth: &Truth,
    points: &[Point<f64>],
) -> CliResult<HoldoutMetrics> {
    let (betas, clamp_count) = model.predict_ratios(points)?;
    let n = points.len();
    let mean_beta_hat = betas.iter().sum::<f64>() / n as f64;
    let gen = bregman_dre::BregmanGenerator::new(family);
    let (mut breg, mut abs, mut known) = (0.0, 0.0, true);
    for (x, &bh) in points.iter().zip(&betas) {
        match truth.beta(x)? {
            Some(b) => {
                breg += bregman_term(&gen, b, bh);
                abs += (b - bh).abs();
            }
            None => known = false,
        }
    }
    Ok(HoldoutMetrics {
        n,
        mean_beta_hat,
        clamp_count,
        bregman_error: known.then(|| breg / n as f64),
        mean_abs_error: known.then(|| abs / n as f64),
    })
}

pub fn fit_and_measure(cfg: &RunConfig) -> CliResult<(ModelFile, FitMetrics)> {
    let rng = Rng::new(cfg.seed());
    let family = setup::family(cfg)?;
    let loss = setup::loss(family);
    let truth = setup::truth(cfg)?;
    let samples = setup::samples(cfg, &truth, &rng)?;
    let (pooled, _) = samples.pooled();
    let kernel = setup::kernel(cfg, &pooled)?;
    let fc = setup::fit_config(cfg);

    let (alpha, selection, cv_table) = match cfg.alpha.unwrap_or(AlphaChoice::Cv) {
        AlphaChoice::Fixed(a) => (a, "fixed", Vec::new()),
        AlphaChoice::Cv => {
            let grid = cfg.cv_grid.clone().unwrap_or(DEFAULT_CV_GRID.to_vec());
            let folds = cfg.cv_folds.unwrap_or(DEFAULT_CV_FOLDS);
            // held-out risks only rank the grid; the library tolerance is plenty there
            let cv = cross_validate_alpha(&samples, &loss, &kernel, &grid, folds, &rng, &FitConfig::default())?;
            let table = cv
                .table
                .iter()
                .map(|&(alpha, heldout_risk)| CvRow { alpha, heldout_risk })
                .collect();
            (cv.alpha, "cv", table)
        }
    };
    let model = fit(&samples, &loss, &kernel, alpha, &fc)?;
    if model.diagnostics.status != Status::Converged {
        log::warn!(
            "fit stopped with status {:?} after {} iterations",
            model.diagnostics.status,
            model.diagnostics.iterations
        );
    }
    let n_holdout = cfg.n_holdout.unwrap_or(DEFAULT_HOLDOUT);
    let holdout = match truth.sample_q(n_holdout, &rng, "fit/holdout") {
        Some(pts) if n_holdout > 0 => Some(holdout_metrics(family, &model, &truth, &pts)?),
        _ => None,
    };
    let d = &model.diagnostics;
    let metrics = FitMetrics {
        family: family.id().to_string(),
        k: family.k(),
        data: truth.label().to_string(),
        seed: cfg.seed(),
        n_p: samples.xs_p().len(),
        n_q: samples.xs_q().len(),
        kernel,
        alpha,
        alpha_selection: selection.to_string(),
        cv_table,
        status: d.status,
        iterations: d.iterations,
        train_risk: d.train_risk,
        grad_norm: d.grad_norm,
        clamp_count: d.clamp_count,
        clamp_fraction: d.clamp_fraction,
        closed_form_max_diff: d.closed_form_max_diff,
        holdout,
    };
    Ok((ModelFile::from_model(family, &model), metrics))
}

pub fn run(cfg: &RunConfig) -> CliResult<()> {
    let (model, metrics) = fit_and_measure(cfg)?;
    let dir = cfg.out_dir();
    prepare_dir(&dir)?;
    write_json(&dir, "model.json", &model)?;
    write_json(&dir, "metrics.json", &metrics)?;
    Ok(())
}
