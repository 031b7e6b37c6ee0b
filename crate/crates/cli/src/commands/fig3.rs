use bregman_dre::dre::ParametricFit;
use bregman_dre::synth::{as_points, piecewise_beta, target_function};
use bregman_dre::{
    builtin_generator, population_fit_parametric, regression_task, weighted_krr, KernelSpec, KrrModel, Rng, Which,
};
use bregman_dre::iw::WeightedRegressionTask;
use serde::Serialize;

use crate::config::{AlphaChoice, RunConfig};
use crate::error::{CliError, CliResult};
use crate::output::{linspace, num, prepare_dir, write_csv, write_json};
use crate::setup;

pub const DEFAULT_N: usize = 200;
pub const DEFAULT_NOISE: f64 = 0.1;
pub const DEFAULT_ALPHA: f64 = 1e-32;
pub const DEFAULT_DEGREE: u32 = 5;
/// Simpson nodes per piece for the L² errors.
pub const DEFAULT_QUAD_NODES: usize = 10001;
pub const DEFAULT_CURVE_N: usize = 401;
/// Nodes per piece for the population ratio fits (as in `fig1`).
pub const FIT_QUAD_NODES: usize = 2001;

pub const WEIGHTINGS: [&str; 4] = ["uniform", "exact", "ew", "lr"];

#[derive(Clone, Debug, Serialize)]
pub struct WeightingResult {
    pub weighting: String,
    pub l2_p_sq: f64,
    pub l2_q_sq: f64,
    /// Mean squared error on the target draws.
    pub target_mse: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RatioFitSummary {
    pub family: String,
    pub k: f64,
    pub d: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Fig3Summary {
    pub seed: u64,
    pub n_src: usize,
    pub n_tgt: usize,
    pub noise_sigma: f64,
    pub kernel: KernelSpec<f64>,
    pub alpha: f64,
    pub quad_nodes: usize,
    pub ratio_fits: Vec<RatioFitSummary>,
    pub results: Vec<WeightingResult>,
    pub ew_below_lr_on_p: bool,
    pub ew_above_lr_on_q: bool,
    pub exact_below_uniform_on_p: bool,
}

pub struct Fig3 {
    pub models: Vec<KrrModel<f64>>,
    pub tgt_xs: Vec<f64>,
    pub interval: [f64; 2],
    pub summary: Fig3Summary,
}

fn predict(m: &KrrModel<f64>, x: f64) -> CliResult<f64> {
    Ok(m.try_predict(&[x])?[0])
}

pub fn compute(cfg: &RunConfig) -> CliResult<Fig3> {
    let spec = setup::piecewise(cfg)?;
    let rng = Rng::new(cfg.seed());
    let n_src = cfg.n_src.unwrap_or(DEFAULT_N);
    let n_tgt = cfg.n_tgt.unwrap_or(DEFAULT_N);
    let noise = cfg.noise_sigma.unwrap_or(DEFAULT_NOISE);
    let alpha = match cfg.alpha {
        None => DEFAULT_ALPHA,
        Some(AlphaChoice::Fixed(a)) => a,
        Some(AlphaChoice::Cv) => return Err(CliError::Usage("fig3 takes a fixed alpha".into())),
    };
    let kernel = match cfg.kernel.as_deref().unwrap_or("polynomial") {
        "polynomial" => KernelSpec::polynomial(cfg.degree.unwrap_or(DEFAULT_DEGREE), cfg.offset.unwrap_or(1.0))?,
        _ => setup::kernel(cfg, &[])?,
    };
    let quad_nodes = cfg.quad_nodes.unwrap_or(DEFAULT_QUAD_NODES);
    let task = regression_task(&spec, n_src, n_tgt, noise, &rng)?;

    let mut ratio_fits: Vec<(String, ParametricFit<f64>)> = Vec::new();
    for name in ["ew", "lr"] {
        let gen = builtin_generator::<f64>(name, None)?;
        ratio_fits.push((name.to_string(), population_fit_parametric(&gen, &spec, FIT_QUAD_NODES)?));
    }
    let pop = |name: &str| &ratio_fits.iter().find(|(n, _)| n == name).expect("fitted above").1;

    let xs = as_points(&task.src_xs);
    let ys: Vec<Vec<f64>> = task.src_ys.iter().map(|&y| vec![y]).collect();
    let mut models = Vec::new();
    let mut results = Vec::new();
    for w in WEIGHTINGS {
        let weights: Vec<f64> = task
            .src_xs
            .iter()
            .map(|&x| match w {
                "uniform" => Ok(1.0),
                "exact" => piecewise_beta(&spec, x),
                other => Ok(pop(other).beta_hat(x)),
            })
            .collect::<Result<_, _>>()?;
        let model = weighted_krr(&WeightedRegressionTask {
            xs: xs.clone(),
            ys: ys.clone(),
            weights,
            kernel,
            alpha,
        })?;
        let sq = |x: f64| {
            let e = predict(&model, x).unwrap_or(f64::NAN) - target_function(x);
            e * e
        };
        let l2_p_sq = spec.integrate(sq, Which::P, quad_nodes)?;
        let l2_q_sq = spec.integrate(sq, Which::Q, quad_nodes)?;
        let target_mse = task.tgt_xs.iter().map(|&x| sq(x)).sum::<f64>() / n_tgt as f64;
        if !(l2_p_sq.is_finite() && l2_q_sq.is_finite()) {
            return Err(bregman_dre::Error::NonFinite {
                context: format!("{w}-weighted regression error"),
            }
            .into());
        }
        results.push(WeightingResult {
            weighting: w.to_string(),
            l2_p_sq,
            l2_q_sq,
            target_mse,
        });
        models.push(model);
    }
    let get = |w: &str| results.iter().find(|r| r.weighting == w).expect("all weightings ran");
    let summary = Fig3Summary {
        seed: cfg.seed(),
        n_src,
        n_tgt,
        noise_sigma: noise,
        kernel,
        alpha,
        quad_nodes,
        ratio_fits: ratio_fits
            .iter()
            .map(|(n, f)| RatioFitSummary {
                family: n.clone(),
                k: f.k,
                d: f.d,
            })
            .collect(),
        ew_below_lr_on_p: get("ew").l2_p_sq < get("lr").l2_p_sq,
        ew_above_lr_on_q: get("ew").l2_q_sq > get("lr").l2_q_sq,
        exact_below_uniform_on_p: get("exact").l2_p_sq < get("uniform").l2_p_sq,
        results,
    };
    Ok(Fig3 {
        models,
        tgt_xs: task.tgt_xs,
        interval: spec.interval,
        summary,
    })
}

pub fn run(cfg: &RunConfig) -> CliResult<()> {
    let fig = compute(cfg)?;
    let dir = cfg.out_dir();
    prepare_dir(&dir)?;

    let mut header = vec!["x".to_string(), "f_true".to_string()];
    header.extend(WEIGHTINGS.iter().map(|w| format!("pred_{w}")));
    header.extend(WEIGHTINGS.iter().map(|w| format!("sq_err_{w}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();

    let mut points = Vec::new();
    for &x in &fig.tgt_xs {
        let truth = target_function(x);
        let preds: Vec<f64> = fig.models.iter().map(|m| predict(m, x)).collect::<CliResult<_>>()?;
        let mut row = vec![num(x), num(truth)];
        row.extend(preds.iter().map(|&p| num(p)));
        row.extend(preds.iter().map(|&p| num((p - truth) * (p - truth))));
        points.push(row);
    }
    write_csv(&dir, "fig3_points.csv", &header, &points)?;

    let mut curves = Vec::new();
    for x in linspace(fig.interval[0], fig.interval[1], cfg.curve_n.unwrap_or(DEFAULT_CURVE_N)) {
        let mut row = vec![num(x), num(target_function(x))];
        for m in &fig.models {
            row.push(num(predict(m, x)?));
        }
        curves.push(row);
    }
    write_csv(&dir, "fig3_curves.csv", &header[..2 + WEIGHTINGS.len()], &curves)?;
    write_json(&dir, "fig3_summary.json", &fig.summary)?;
    Ok(())
}
