//! One PASS/FAIL line per acceptance criterion. Tolerances are pinned here,
//! not borrowed from the library, so loosening a library constant cannot
//! make a criterion pass.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use bregman_dre::iw::WeightedRegressionTask;
use bregman_dre::optim::{bfgs, grad_check, BfgsConfig};
use bregman_dre::synth::as_points;
use bregman_dre::verify::{self, IdentityCheck, SuiteConfig};
use bregman_dre::{
    empirical_risk, fit, gram, iwa_aggregate, iwv_select, loss_for, median_heuristic, weighted_krr, weighted_sq_risk,
    CandidateSet, GaussianPair, KernelSpec, Matrix, Point, Predictor, Rng, SampleSet, Which,
};
use bregman_dre_cli::commands::{fig1, fig2, fig3};
use bregman_dre_cli::config::RunConfig;
use bregman_dre_cli::setup;
use nalgebra::{DMatrix, DVector};
use rand::Rng as _;

const EXCESS_RISK_TOL: f64 = 1e-10;
const EXCESS_RISK_PAIRS: usize = 200;
const EXCESS_RISK_BUDGET: Duration = Duration::from_secs(10);
const EXAMPLE_TOL: f64 = 1e-9;
const CLOSED_FORM_TOL: f64 = 1e-10;
const SLACK_TOL: f64 = 1e-9;
const SECOND_DERIVATIVE_TOL: f64 = 1e-8;
const WEIGHT_REP_TOL: f64 = 1e-6;
const WEIGHT_REP_DRAWS: usize = 100;
const SHUFORD_TOL: f64 = 1e-7;
const SAVAGE_TOL: f64 = 1e-8;
const DIAMOND_TOL: f64 = 1e-10;
const MIN_EVALUATIONS: usize = 100;
const SPD_TOL: f64 = 1e-8;
const SPD_PROBLEMS: usize = 500;
const KULSIF_CLOSED_TOL: f64 = 1e-6;
const GRADIENT_TOL: f64 = 1e-5;
const FIG1_BUDGET: Duration = Duration::from_secs(30);
const FIG2_SEEDS: usize = 10;
const FIG3_BUDGET: Duration = Duration::from_secs(60);
const KRR_TOL: f64 = 1e-6;
const IWV_INSTANCES: usize = 100;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// A library group judged against the tolerance pinned here.
fn judged(g: &IdentityCheck, tol: f64, min_evals: usize) -> (bool, String) {
    let pass = g.max_residual.is_finite() && g.max_residual <= tol && g.evaluations >= min_evals;
    (pass, format!("{} max {:.2e} over {} (tol {tol:.0e})", g.name, g.max_residual, g.evaluations))
}

fn suite() -> SuiteConfig {
    SuiteConfig {
        seed: 0,
        n_pairs: EXCESS_RISK_PAIRS,
        n_random: WEIGHT_REP_DRAWS,
        mutate_gamma_prime: false,
    }
}

fn combine(parts: Vec<(bool, String)>) -> Outcome {
    let pass = parts.iter().all(|p| p.0);
    outcome(pass, parts.into_iter().map(|p| p.1).collect::<Vec<_>>().join("; "))
}

fn c1_excess_risk() -> Outcome {
    let t = Instant::now();
    let g = verify::check_excess_risk(&suite()).expect("runs");
    let el = t.elapsed();
    let (ok, msg) = judged(&g, EXCESS_RISK_TOL, EXCESS_RISK_PAIRS);
    outcome(ok && el < EXCESS_RISK_BUDGET, format!("{msg}, {:.2}s", el.as_secs_f64()))
}

fn c2_example_recovery() -> Outcome {
    let g = verify::check_example_recovery(&suite()).expect("runs");
    let (ok, msg) = judged(&g, EXAMPLE_TOL, 1);
    outcome(ok, msg)
}

fn c3_closed_forms() -> Outcome {
    let g = verify::check_closed_form_estimators(&suite()).expect("runs");
    let (ok, msg) = judged(&g, CLOSED_FORM_TOL, 1);
    outcome(ok, msg)
}

fn c4_convexity() -> Outcome {
    let s = verify::check_convexity_slacks(&suite()).expect("runs");
    let d = verify::check_second_derivatives(&suite()).expect("runs");
    combine(vec![judged(&s, SLACK_TOL, 1), judged(&d, SECOND_DERIVATIVE_TOL, 1)])
}

fn c5_weight_representation() -> Outcome {
    let g = verify::check_weight_representation(&suite()).expect("runs");
    let n_builtins = verify::builtin_families().len();
    let (ok, msg) = judged(&g, WEIGHT_REP_TOL, WEIGHT_REP_DRAWS * n_builtins);
    outcome(ok, msg)
}

fn c6_appendix() -> Outcome {
    let s = suite();
    combine(vec![
        judged(&verify::check_shuford(&s).expect("runs"), SHUFORD_TOL, MIN_EVALUATIONS),
        judged(&verify::check_savage(&s).expect("runs"), SAVAGE_TOL, MIN_EVALUATIONS),
        judged(&verify::check_diamond(&s).expect("runs"), DIAMOND_TOL, MIN_EVALUATIONS),
    ])
}

fn gaussian_samples(n: usize, seed: u64) -> SampleSet<f64> {
    let pair = GaussianPair::<f64>::default_pair();
    let rng = Rng::new(seed);
    let xp = pair.sample(Which::P, n, &mut rng.stream("acceptance/p"));
    let xq = pair.sample(Which::Q, n, &mut rng.stream("acceptance/q"));
    SampleSet::new(as_points(&xp), as_points(&xq)).expect("nonempty")
}

fn c7_optimizer() -> Outcome {
    // SPD quadratics against nalgebra's LU
    let mut rng = Rng::new(7).stream("acceptance/spd");
    let mut spd_worst = 0.0f64;
    let mut spd_fail = 0;
    for _ in 0..SPD_PROBLEMS {
        let n = rng.random_range(1..=10);
        let r = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let a = &r * r.transpose() + DMatrix::identity(n, n) * 0.5;
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let am = Matrix::from_fn(n, n, |i, j| a[(i, j)]);
        let obj = |x: &[f64]| -> bregman_dre::Result<(f64, Vec<f64>)> {
            let ax = am.mat_vec(x);
            let v = 0.5 * x.iter().zip(&ax).map(|(u, w)| u * w).sum::<f64>()
                - x.iter().zip(&b).map(|(u, w)| u * w).sum::<f64>();
            Ok((v, ax.iter().zip(&b).map(|(u, w)| u - w).collect()))
        };
        let exact = a.clone().lu().solve(&DVector::from_vec(b.clone())).expect("SPD");
        match bfgs(&obj, &vec![0.0; n], &BfgsConfig::default()) {
            Ok(res) => {
                let e = res.x_star.iter().zip(exact.iter()).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
                spd_worst = spd_worst.max(e);
                if e > SPD_TOL {
                    spd_fail += 1;
                }
            }
            Err(_) => spd_fail += 1,
        }
    }

    // KuLSIF: BFGS against the linear-system solution, with the CLI's fit settings
    let samples = gaussian_samples(200, 1);
    let (pooled, _) = samples.pooled();
    let kernel = KernelSpec::gaussian(median_heuristic(&pooled).unwrap()).unwrap();
    let model = fit(
        &samples,
        &loss_for("kulsif", None).unwrap(),
        &kernel,
        1e-3,
        &setup::fit_config(&RunConfig::default()),
    )
    .expect("fit");
    let closed = model.diagnostics.closed_form_max_diff.unwrap_or(f64::INFINITY);

    // finite differences of the empirical risk, every builtin loss
    let small = gaussian_samples(12, 2);
    let (pts, pos) = small.pooled();
    let labels: Vec<i8> = pos.iter().map(|&p| if p { 1 } else { -1 }).collect();
    let g = gram(&KernelSpec::gaussian(1.0).unwrap(), &pts, &pts).unwrap();
    let mut grad_worst = 0.0f64;
    let mut crng = Rng::new(3).stream("acceptance/coeffs");
    for fam in verify::builtin_families() {
        let loss = bregman_dre::family_loss(fam);
        for _ in 0..5 {
            // positive coefficients keep every score inside each loss's domain
            let c: Vec<f64> = (0..pts.len()).map(|_| crng.random_range(0.05..0.5)).collect();
            let obj = |x: &[f64]| empirical_risk(&loss, &g, &labels, x, 1e-2);
            grad_worst = grad_worst.max(grad_check(&obj, &c, 1e-5).unwrap_or(f64::INFINITY));
        }
    }
    combine(vec![
        (
            spd_fail == 0,
            format!("SPD {SPD_PROBLEMS} problems, worst {spd_worst:.2e}, {spd_fail} over {SPD_TOL:.0e}"),
        ),
        (closed <= KULSIF_CLOSED_TOL, format!("KuLSIF closed form {closed:.2e} (tol {KULSIF_CLOSED_TOL:.0e})")),
        (grad_worst <= GRADIENT_TOL, format!("gradient rel err {grad_worst:.2e} (tol {GRADIENT_TOL:.0e})")),
    ])
}

fn c8_fig1() -> Outcome {
    let t = Instant::now();
    let fig = fig1::compute(&RunConfig::default()).expect("fig1");
    let el = t.elapsed();
    let err = |l: &str| fig.summary.rows.iter().find(|r| r.family == l).unwrap().sup_error;
    let seq: Vec<f64> = fig1::ORDER.iter().map(|l| err(l)).collect();
    let monotone = seq.windows(2).all(|w| w[1] <= w[0]);
    let pass = err("ew") < err("lr") && monotone && el < FIG1_BUDGET;
    let shown: Vec<String> = fig1::ORDER.iter().zip(&seq).map(|(l, e)| format!("{l} {e:.4}")).collect();
    outcome(pass, format!("sup error on [0.9,1]: {}, {:.2}s", shown.join(" ≥ "), el.as_secs_f64()))
}

fn c9_fig2() -> Outcome {
    let cfg = RunConfig {
        sizes: Some(vec![10]),
        alphas: Some(vec![1e-6]),
        n_seeds: Some(FIG2_SEEDS),
        ..RunConfig::default()
    };
    let fig = fig2::compute(&cfg).expect("fig2");
    let med = |f: &str| {
        fig.summary
            .cells
            .iter()
            .find(|c| c.family == f)
            .unwrap()
            .median_max_abs_beta_hat
    };
    let (k, e) = (med("kulsif"), med("ew"));
    outcome(
        e < k && fig.summary.all_finite,
        format!("median max|β̂| at m+n=10, α=1e-6: EW {e:.4} vs KuLSIF {k:.4}"),
    )
}

fn c10_fig3() -> Outcome {
    let t = Instant::now();
    let fig = fig3::compute(&RunConfig::default()).expect("fig3");
    let el = t.elapsed();
    let get = |w: &str| fig.summary.results.iter().find(|r| r.weighting == w).unwrap();
    let (ew, lr, ex, un) = (get("ew"), get("lr"), get("exact"), get("uniform"));
    let pass = ew.l2_p_sq < lr.l2_p_sq && ew.l2_q_sq > lr.l2_q_sq && ex.l2_p_sq < un.l2_p_sq && el < FIG3_BUDGET;
    outcome(
        pass,
        format!(
            "L²(P)² EW {:.4} < LR {:.4}; L²(Q)² EW {:.4} > LR {:.4}; exact {:.4} < uniform {:.4}; {:.2}s",
            ew.l2_p_sq,
            lr.l2_p_sq,
            ew.l2_q_sq,
            lr.l2_q_sq,
            ex.l2_p_sq,
            un.l2_p_sq,
            el.as_secs_f64()
        ),
    )
}

fn c11_iw() -> Outcome {
    let mut rng = Rng::new(11).stream("acceptance/iw");

    // weighted KRR against BFGS on the same objective
    let mut krr_worst = 0.0f64;
    for _ in 0..10 {
        let n = 8;
        let xs: Vec<Point<f64>> = (0..n).map(|i| vec![-2.0 + 0.5 * i as f64 + rng.random_range(-0.1..0.1)]).collect();
        let ys: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ws: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..3.0)).collect();
        let alpha = 1e-2;
        let kernel = KernelSpec::gaussian(1.0).unwrap();
        let model = weighted_krr(&WeightedRegressionTask {
            xs: xs.clone(),
            ys: ys.iter().map(|&y| vec![y]).collect(),
            weights: ws.clone(),
            kernel,
            alpha,
        })
        .unwrap();
        let k = gram(&kernel, &xs, &xs).unwrap();
        let nf = n as f64;
        let obj = |c: &[f64]| -> bregman_dre::Result<(f64, Vec<f64>)> {
            let kc = k.mat_vec(c);
            let r: Vec<f64> = ys.iter().zip(&kc).map(|(y, f)| y - f).collect();
            let v = r.iter().zip(&ws).map(|(r, w)| w * r * r).sum::<f64>() / nf
                + alpha * c.iter().zip(&kc).map(|(a, b)| a * b).sum::<f64>();
            let wr: Vec<f64> = r.iter().zip(&ws).map(|(r, w)| w * r).collect();
            let kwr = k.mat_vec(&wr);
            Ok((v, kwr.iter().zip(&kc).map(|(a, b)| -2.0 * a / nf + 2.0 * alpha * b).collect()))
        };
        let res = bfgs(&obj, &vec![0.0; n], &BfgsConfig::default().with_max_iter(5000).with_grad_tol(1e-13)).unwrap();
        for (x, d) in xs.iter().zip(k.mat_vec(&res.x_star)) {
            krr_worst = krr_worst.max((model.predict(x)[0] - d).abs());
        }
    }

    // aggregation with ridge 0 never loses to the best single candidate
    let mut iwa_ok = true;
    let mut iwa_margin = f64::INFINITY;
    for _ in 0..20 {
        let draw = |rng: &mut rand_chacha::ChaCha20Rng, n: usize| {
            let xs: Vec<Point<f64>> = (0..n).map(|_| vec![rng.random_range(-1.0..1.0)]).collect();
            let ys: Vec<Vec<f64>> = xs
                .iter()
                .map(|x| vec![(3.0 * x[0].powi(4)).sin() + 0.1 * (rng.random::<f64>() - 0.5)])
                .collect();
            (xs, ys)
        };
        let (tx, ty) = draw(&mut rng, 30);
        let (vx, vy) = draw(&mut rng, 40);
        let ws: Vec<f64> = vx.iter().map(|x| 0.5 + x[0].abs()).collect();
        let models: Vec<_> = [1e-1, 1e-3, 1e-6]
            .iter()
            .map(|&alpha| {
                weighted_krr(&WeightedRegressionTask {
                    xs: tx.clone(),
                    ys: ty.clone(),
                    weights: vec![1.0; tx.len()],
                    kernel: KernelSpec::gaussian(0.4).unwrap(),
                    alpha,
                })
                .unwrap()
            })
            .collect();
        let refs: Vec<&dyn Predictor<f64>> = models.iter().map(|m| m as &dyn Predictor<f64>).collect();
        let cands = CandidateSet::unlabeled(refs).unwrap();
        let coeffs = iwa_aggregate(&cands, &vx, &vy, &ws, 0.0).unwrap();
        let agg = bregman_dre::iw::Aggregate {
            candidates: &cands,
            coeffs,
        };
        let agg_risk = weighted_sq_risk(&agg, &vx, &vy, &ws).unwrap();
        let (_, risks) = iwv_select(&cands, &vx, &vy, &ws).unwrap();
        let best = risks.iter().cloned().fold(f64::INFINITY, f64::min);
        iwa_ok &= agg_risk <= best * (1.0 + 1e-12);
        iwa_margin = iwa_margin.min(best - agg_risk);
    }

    // uniform weights: IWV picks the plain validation argmin
    let mut iwv_agree = 0;
    for _ in 0..IWV_INSTANCES {
        let n = rng.random_range(3..20);
        let xs: Vec<Point<f64>> = (0..n).map(|_| vec![rng.random_range(-2.0..2.0)]).collect();
        let ys: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(-1.0..1.0)]).collect();
        let slopes: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fs: Vec<_> = slopes.iter().map(|&a| move |x: &[f64]| vec![a * x[0]]).collect();
        let refs: Vec<&dyn Predictor<f64>> = fs.iter().map(|f| f as &dyn Predictor<f64>).collect();
        let cands = CandidateSet::unlabeled(refs).unwrap();
        let (picked, _) = iwv_select(&cands, &xs, &ys, &vec![1.0; n]).unwrap();
        let plain: Vec<f64> = slopes
            .iter()
            .map(|a| xs.iter().zip(&ys).map(|(x, y)| (y[0] - a * x[0]).powi(2)).sum::<f64>() / n as f64)
            .collect();
        let argmin = (0..plain.len()).fold(0, |b, i| if plain[i] < plain[b] { i } else { b });
        iwv_agree += usize::from(picked == argmin);
    }
    combine(vec![
        (krr_worst <= KRR_TOL, format!("KRR vs BFGS {krr_worst:.2e} (tol {KRR_TOL:.0e})")),
        (iwa_ok, format!("IWA ≤ best single on 20 draws (min margin {iwa_margin:.2e})")),
        (iwv_agree == IWV_INSTANCES, format!("IWV uniform = plain on {iwv_agree}/{IWV_INSTANCES}")),
    ])
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

fn c12_determinism() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    let mut parts = Vec::new();
    for cmd in ["check", "fig1", "fig2", "fig3"] {
        let mut runs = Vec::new();
        for i in 0..2 {
            let out = root.path().join(format!("{cmd}_{i}"));
            let status = Command::new(env!("CARGO_BIN_EXE_bregman-dre"))
                .args([cmd, "--seed", "5", "--out", out.to_str().unwrap()])
                .env("RUST_LOG", "error")
                .output()
                .unwrap()
                .status;
            runs.push((status.code(), files(&out)));
        }
        let same = runs[0] == runs[1] && runs[0].0 == Some(0) && !runs[0].1.is_empty();
        parts.push((same, format!("{cmd} {} files {}", runs[0].1.len(), if same { "identical" } else { "DIFFER" })));
    }
    combine(parts)
}

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 12] = [
        ("excess-risk identity", c1_excess_risk),
        ("example recovery", c2_example_recovery),
        ("closed-form estimators", c3_closed_forms),
        ("convexity certificate", c4_convexity),
        ("weight representation", c5_weight_representation),
        ("shuford / savage / diamond", c6_appendix),
        ("optimizer oracles", c7_optimizer),
        ("figure 1 large-value ordering", c8_fig1),
        ("figure 2 exploding estimates", c9_fig2),
        ("figure 3 weighted regression", c10_fig3),
        ("importance-weighting oracles", c11_iw),
        ("determinism", c12_determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        println!("{} {:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
