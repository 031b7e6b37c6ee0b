use bregman_dre::losses::convexity_margin;
use bregman_dre::{construct_loss, family_loss};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::{linspace, num, prepare_dir, write_csv, write_json};
use crate::setup;

#[derive(Debug, Serialize)]
pub struct LossShowHeader {
    pub family: String,
    pub k: Option<f64>,
    pub c1: f64,
    pub c2: f64,
    pub grid: [f64; 2],
    pub n: usize,
    /// Smallest convexity slack over the rows where it is defined.
    pub min_slack: Option<f64>,
}

/// One row of the loss table; slacks are `None` where `g(ŷ) ≤ 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct LossRow {
    pub yhat: f64,
    pub ell_pos: f64,
    pub ell_neg: f64,
    pub inv_link: f64,
    pub g: f64,
    pub slacks: Option<(f64, f64)>,
}

pub fn table(cfg: &RunConfig) -> CliResult<(LossShowHeader, Vec<LossRow>)> {
    let family = setup::family(cfg)?;
    let base = family_loss(family);
    let (c1, c2) = (cfg.c1.unwrap_or(0.0), cfg.c2.unwrap_or(0.0));
    let (lo_b, hi_b) = base.score_bounds();
    let loss = construct_loss(base.generator().clone(), base.ratio_map().clone(), c1, c2).with_score_bounds(lo_b, hi_b);
    let (lo, hi, n) = (
        cfg.grid_lo.unwrap_or(0.05),
        cfg.grid_hi.unwrap_or(5.0),
        cfg.grid_n.unwrap_or(100),
    );
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(CliError::Usage(format!("grid [{lo}, {hi}] is not an interval")));
    }
    let mut rows = Vec::with_capacity(n);
    for y in linspace(lo, hi, n) {
        let g = loss.ratio(y);
        let slacks = if g > 0.0 {
            Some(convexity_margin(loss.generator().as_ref(), loss.ratio_map().as_ref(), g)?)
        } else {
            None
        };
        rows.push(LossRow {
            yhat: y,
            ell_pos: loss.ell_pos(y),
            ell_neg: loss.ell_neg(y),
            inv_link: loss.inv_link(y),
            g,
            slacks,
        });
    }
    let min_slack = rows
        .iter()
        .filter_map(|r| r.slacks.map(|(a, b)| a.min(b)))
        .reduce(f64::min);
    let header = LossShowHeader {
        family: family.id().to_string(),
        k: family.k(),
        c1,
        c2,
        grid: [lo, hi],
        n,
        min_slack,
    };
    Ok((header, rows))
}

pub fn run(cfg: &RunConfig) -> CliResult<()> {
    let (header, rows) = table(cfg)?;
    let dir = cfg.out_dir();
    prepare_dir(&dir)?;
    let blank = |v: Option<f64>| v.map(num).unwrap_or_default();
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                num(r.yhat),
                num(r.ell_pos),
                num(r.ell_neg),
                num(r.inv_link),
                num(r.g),
                blank(r.slacks.map(|s| s.0)),
                blank(r.slacks.map(|s| s.1)),
            ]
        })
        .collect();
    write_csv(
        &dir,
        "loss_show.csv",
        &["yhat", "ell_pos", "ell_neg", "inv_link", "g", "slack_lower", "slack_upper"],
        &body,
    )?;
    write_json(&dir, "loss_show.json", &header)?;
    Ok(())
}
