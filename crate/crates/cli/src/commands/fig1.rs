use bregman_dre::dre::ParametricFit;
use bregman_dre::synth::piecewise_beta;
use bregman_dre::{builtin_generator, population_fit_parametric, PiecewisePairSpec, Status};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliResult;
use crate::output::{linspace, num, prepare_dir, write_csv, write_json};
use crate::setup;

pub const DEFAULT_QUAD_NODES: usize = 2001;
pub const DEFAULT_CURVE_N: usize = 401;
pub const SUP_GRID: usize = 101;
pub const WINDOW: [f64; 2] = [0.9, 1.0];

/// Column label, family name, poly exponent. LR first and EW last: the
/// large-value error should not grow along this order.
pub const FAMILIES: [(&str, &str, Option<f64>); 6] = [
    ("lr", "lr", None),
    ("kulsif", "kulsif", None),
    ("poly0", "poly", Some(0.0)),
    ("poly1", "poly", Some(1.0)),
    ("poly6", "poly", Some(6.0)),
    ("ew", "ew", None),
];

/// The sequence along which the sup error must not increase.
pub const ORDER: [&str; 5] = ["lr", "poly0", "poly1", "poly6", "ew"];

#[derive(Clone, Debug, Serialize)]
pub struct Fig1Row {
    pub family: String,
    pub k: f64,
    pub d: f64,
    pub divergence: f64,
    pub sup_error: f64,
    pub status: Status,
    pub iterations: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Fig1Summary {
    pub interval: [f64; 2],
    pub breakpoints: Vec<f64>,
    pub p_levels: Vec<f64>,
    pub q_levels: Vec<f64>,
    pub quad_nodes: usize,
    pub window: [f64; 2],
    pub rows: Vec<Fig1Row>,
    pub ew_below_lr: bool,
    pub non_increasing: bool,
}

pub struct Fig1 {
    pub spec: PiecewisePairSpec<f64>,
    pub fits: Vec<ParametricFit<f64>>,
    pub summary: Fig1Summary,
}

pub fn compute(cfg: &RunConfig) -> CliResult<Fig1> {
    let spec = setup::piecewise(cfg)?;
    let quad_nodes = cfg.quad_nodes.unwrap_or(DEFAULT_QUAD_NODES);
    let window = [cfg.x_lo.unwrap_or(WINDOW[0]), cfg.x_hi.unwrap_or(WINDOW[1])];
    let mut fits = Vec::new();
    let mut rows = Vec::new();
    for (label, name, k) in FAMILIES {
        let gen = builtin_generator::<f64>(name, k)?;
        let f = population_fit_parametric(&gen, &spec, quad_nodes)?;
        rows.push(Fig1Row {
            family: label.to_string(),
            k: f.k,
            d: f.d,
            divergence: f.divergence,
            sup_error: f.sup_error(&spec, window[0], window[1], SUP_GRID)?,
            status: f.status,
            iterations: f.iterations,
        });
        fits.push(f);
    }
    let err = |label: &str| rows.iter().find(|r| r.family == label).map(|r| r.sup_error).unwrap_or(f64::NAN);
    let seq: Vec<f64> = ORDER.iter().map(|l| err(l)).collect();
    let summary = Fig1Summary {
        interval: spec.interval,
        breakpoints: spec.breakpoints.clone(),
        p_levels: spec.p_levels.clone(),
        q_levels: spec.q_levels.clone(),
        quad_nodes,
        window,
        ew_below_lr: err("ew") < err("lr"),
        non_increasing: seq.windows(2).all(|w| w[1] <= w[0]),
        rows,
    };
    Ok(Fig1 { spec, fits, summary })
}

pub fn run(cfg: &RunConfig) -> CliResult<()> {
    let fig = compute(cfg)?;
    let dir = cfg.out_dir();
    prepare_dir(&dir)?;

    let [a, b] = fig.spec.interval;
    let mut curves = Vec::new();
    for x in linspace(a, b, cfg.curve_n.unwrap_or(DEFAULT_CURVE_N)) {
        let mut row = vec![num(x), num(piecewise_beta(&fig.spec, x)?)];
        row.extend(fig.fits.iter().map(|f| num(f.beta_hat(x))));
        curves.push(row);
    }
    let mut header = vec!["x", "beta"];
    header.extend(FAMILIES.iter().map(|f| f.0));
    write_csv(&dir, "fig1_curves.csv", &header, &curves)?;

    let table: Vec<Vec<String>> = fig
        .summary
        .rows
        .iter()
        .map(|r| {
            vec![
                r.family.clone(),
                num(r.k),
                num(r.d),
                num(r.divergence),
                num(r.sup_error),
            ]
        })
        .collect();
    write_csv(&dir, "fig1_sup_error.csv", &["family", "k", "d", "divergence", "sup_error"], &table)?;
    write_json(&dir, "fig1_summary.json", &fig.summary)?;
    Ok(())
}
