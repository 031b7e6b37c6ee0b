use bregman_dre::Rng;
use serde::Serialize;

use crate::commands::fit::{holdout_metrics, HoldoutMetrics, ModelFile};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::{num, prepare_dir, read_points, write_csv, write_json};
use crate::setup::{self, Truth, DEFAULT_HOLDOUT};

#[derive(Debug, Serialize)]
pub struct EvalSummary {
    pub model: String,
    pub family: String,
    pub k: Option<f64>,
    pub source: String,
    pub metrics: HoldoutMetrics,
}

/// Scores a saved model on `points_csv`, or on fresh Q draws of the configured pair.
pub fn run(cfg: &RunConfig) -> CliResult<()> {
    let dir = cfg.out_dir();
    let model_path = cfg.model.clone().unwrap_or_else(|| dir.join("model.json"));
    let (family, model) = ModelFile::load(&model_path)?.into_model()?;
    let dim = model.centers[0].len();

    let (points, truth, source) = match &cfg.points_csv {
        Some(p) => (read_points(p)?, Truth::Unknown, p.display().to_string()),
        None => {
            let truth = setup::truth(cfg)?;
            let n = cfg.n_holdout.unwrap_or(DEFAULT_HOLDOUT);
            let pts = truth
                .sample_q(n, &Rng::new(cfg.seed()), "eval/q")
                .ok_or_else(|| CliError::Usage("eval needs `points_csv` or a synthetic `data` pair".into()))?;
            (pts, truth.clone(), format!("{} Q draws", truth.label()))
        }
    };
    if points.is_empty() {
        return Err(CliError::Usage("no points to evaluate".into()));
    }
    if points[0].len() != dim {
        return Err(CliError::Usage(format!(
            "points have dimension {} but the model was fitted in dimension {dim}",
            points[0].len()
        )));
    }

    let metrics = holdout_metrics(family, &model, &truth, &points)?;
    let mut rows = Vec::with_capacity(points.len());
    for x in &points {
        let score = model.score(x)?;
        let (beta, clamped) = model.predict_ratio_flagged(x)?;
        let mut row: Vec<String> = x.iter().map(|&v| num(v)).collect();
        row.push(num(score));
        row.push(num(beta));
        row.push(u8::from(clamped).to_string());
        if let Some(b) = truth.beta(x)? {
            row.push(num(b));
        }
        rows.push(row);
    }
    let mut header: Vec<String> = (0..dim).map(|j| format!("x{j}")).collect();
    header.extend(["score", "beta_hat", "clamped"].map(String::from));
    if matches!(truth, Truth::Gaussian(_) | Truth::Piecewise(_)) {
        header.push("beta".into());
    }
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();

    prepare_dir(&dir)?;
    write_csv(&dir, "eval.csv", &header_refs, &rows)?;
    write_json(
        &dir,
        "eval.json",
        &EvalSummary {
            model: model_path.display().to_string(),
            family: family.id().to_string(),
            k: family.k(),
            source,
            metrics,
        },
    )?;
    Ok(())
}
