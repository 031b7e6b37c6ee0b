use bregman_dre::iw::{Aggregate, WeightedRegressionTask};
use bregman_dre::optim::{bfgs, BfgsConfig};
use bregman_dre::{
    gram, iwa_aggregate, iwv_select, weighted_krr, weighted_sq_risk, CandidateSet, KernelSpec, KrrModel, Point,
    Predictor,
};
use proptest::prelude::*;
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn points(xs: &[f64]) -> Vec<Point<f64>> {
    xs.iter().map(|&x| vec![x]).collect()
}

fn spread(n: usize) -> impl Strategy<Value = Vec<f64>> {
    // jittered grid on [−2, 2]: distinct points keep K well conditioned
    prop::collection::vec(-0.15f64..0.15, n)
        .prop_map(move |jit| jit.iter().enumerate().map(|(i, j)| -2.0 + 4.0 * i as f64 / (n - 1) as f64 + j).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn krr_matches_direct_minimisation(
        xs in spread(7),
        ys in prop::collection::vec(-1.0f64..1.0, 7),
        ws in prop::collection::vec(0.1f64..3.0, 7),
        alpha in 1e-3f64..1e-1,
    ) {
        let kernel = KernelSpec::gaussian(1.0).unwrap();
        let pts = points(&xs);
        let task = WeightedRegressionTask {
            xs: pts.clone(),
            ys: ys.iter().map(|&y| vec![y]).collect(),
            weights: ws.clone(),
            kernel,
            alpha,
        };
        let model = weighted_krr(&task).unwrap();

        // (1/N) Σ wᵢ (yᵢ − (Kc)ᵢ)² + α cᵀKc, minimised over c from scratch
        let k = gram(&kernel, &pts, &pts).unwrap();
        let n = xs.len() as f64;
        let obj = |c: &[f64]| -> bregman_dre::Result<(f64, Vec<f64>)> {
            let kc = k.mat_vec(c);
            let r: Vec<f64> = ys.iter().zip(&kc).map(|(y, f)| y - f).collect();
            let v = r.iter().zip(&ws).map(|(r, w)| w * r * r).sum::<f64>() / n
                + alpha * c.iter().zip(&kc).map(|(a, b)| a * b).sum::<f64>();
            let wr: Vec<f64> = r.iter().zip(&ws).map(|(r, w)| w * r).collect();
            let kwr = k.mat_vec(&wr);
            Ok((v, kwr.iter().zip(&kc).map(|(a, b)| -2.0 * a / n + 2.0 * alpha * b).collect()))
        };
        let cfg = BfgsConfig::default().with_max_iter(5000).with_grad_tol(1e-13);
        let res = bfgs(&obj, &vec![0.0; xs.len()], &cfg).unwrap();
        let direct = k.mat_vec(&res.x_star);
        for (p, d) in pts.iter().zip(&direct) {
            let f = model.predict(p)[0];
            prop_assert!((f - d).abs() <= 1e-6, "{f} vs {d}");
        }
    }

    #[test]
    fn weights_scale_out(
        xs in spread(12),
        ys in prop::collection::vec(-1.0f64..1.0, 12),
        ws in prop::collection::vec(0.0f64..2.0, 12),
        lambda in 0.01f64..100.0,
    ) {
        let pts = points(&xs);
        let targets: Vec<Vec<f64>> = ys.iter().map(|&y| vec![y]).collect();
        let f1 = |x: &[f64]| vec![x[0].sin()];
        let f2 = |x: &[f64]| vec![0.3 * x[0]];
        let f3 = |x: &[f64]| vec![x[0] * x[0] - 0.5];
        let cands = CandidateSet::unlabeled(vec![&f1, &f2, &f3]).unwrap();
        let scaled: Vec<f64> = ws.iter().map(|w| lambda * w).collect();

        let r = weighted_sq_risk(&f1, &pts, &targets, &ws).unwrap();
        let rs = weighted_sq_risk(&f1, &pts, &targets, &scaled).unwrap();
        prop_assert!((rs - lambda * r).abs() <= 1e-12 * rs.abs().max(1e-300));

        let (i, _) = iwv_select(&cands, &pts, &targets, &ws).unwrap();
        let (j, _) = iwv_select(&cands, &pts, &targets, &scaled).unwrap();
        prop_assert_eq!(i, j);

        let ridge = 1e-6;
        let c = iwa_aggregate(&cands, &pts, &targets, &ws, ridge).unwrap();
        let cs = iwa_aggregate(&cands, &pts, &targets, &scaled, lambda * ridge).unwrap();
        for (a, b) in c.iter().zip(&cs) {
            prop_assert!((a - b).abs() <= 1e-8 * a.abs().max(1.0), "{a} vs {b}");
        }
    }
}

type Candidates = (Vec<KrrModel<f64>>, Vec<Point<f64>>, Vec<Vec<f64>>, Vec<f64>);

fn krr_candidates(seed: u64) -> Candidates {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |n: usize| -> (Vec<Point<f64>>, Vec<Vec<f64>>) {
        let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ys = xs.iter().map(|&x| vec![(3.0 * x.powi(4)).sin() + 0.1 * (rng.random::<f64>() - 0.5)]).collect();
        (points(&xs), ys)
    };
    let (train_x, train_y) = draw(30);
    let (val_x, val_y) = draw(40);
    let weights: Vec<f64> = val_x.iter().map(|x| 0.5 + x[0].abs()).collect();
    let models = [1e-1, 1e-3, 1e-6]
        .iter()
        .map(|&alpha| {
            weighted_krr(&WeightedRegressionTask {
                xs: train_x.clone(),
                ys: train_y.clone(),
                weights: vec![1.0; train_x.len()],
                kernel: KernelSpec::gaussian(0.4).unwrap(),
                alpha,
            })
            .unwrap()
        })
        .collect();
    (models, val_x, val_y, weights)
}

#[test]
fn aggregate_beats_every_single_candidate() {
    for seed in 0..20 {
        let (models, xs, ys, ws) = krr_candidates(seed);
        let refs: Vec<&dyn Predictor<f64>> = models.iter().map(|m| m as &dyn Predictor<f64>).collect();
        let cands = CandidateSet::unlabeled(refs).unwrap();
        let coeffs = iwa_aggregate(&cands, &xs, &ys, &ws, 0.0).unwrap();
        let agg = Aggregate {
            candidates: &cands,
            coeffs,
        };
        let agg_risk = weighted_sq_risk(&agg, &xs, &ys, &ws).unwrap();
        let (_, risks) = iwv_select(&cands, &xs, &ys, &ws).unwrap();
        let best = risks.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(agg_risk <= best * (1.0 + 1e-10), "seed {seed}: {agg_risk} vs {best}");
    }
}

#[test]
fn uniform_weights_reduce_to_plain_validation() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..100 {
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
        let mut expected = 0;
        for (i, &r) in plain.iter().enumerate() {
            if r < plain[expected] {
                expected = i;
            }
        }
        assert_eq!(picked, expected);
    }
}

#[test]
fn duplicated_candidates_split_evenly() {
    let (models, xs, ys, ws) = krr_candidates(7);
    let cands = CandidateSet::unlabeled(vec![&models[1] as &dyn Predictor<f64>, &models[1]]).unwrap();
    let c = iwa_aggregate(&cands, &xs, &ys, &ws, 1e-8).unwrap();
    assert!((c[0] - c[1]).abs() <= 1e-10, "{c:?}");
}
