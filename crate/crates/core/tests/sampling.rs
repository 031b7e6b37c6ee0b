use bregman_dre::quadrature::simpson;
use bregman_dre::synth::{piecewise_beta, sample_piecewise, target_function};
use bregman_dre::{gaussian_pair, regression_task, GaussianPair, PiecewisePairSpec, Rng, Which};

// χ²(4) upper 0.001 quantile for the five pieces of the default pair
const CHI2_4DF_999: f64 = 18.4668;

#[test]
fn piece_counts_pass_chi_square() {
    let spec = PiecewisePairSpec::<f64>::default_pair();
    let n = 100_000;
    for which in [Which::P, Which::Q] {
        let xs = sample_piecewise(&spec, which, n, &mut Rng::new(2024).stream("test/chi2"));
        let mut counts = vec![0usize; spec.n_pieces()];
        for &x in &xs {
            counts[spec.piece_index(x).unwrap()] += 1;
        }
        let stat: f64 = counts
            .iter()
            .zip(spec.masses(which))
            .map(|(&c, m)| {
                let e = m * n as f64;
                (c as f64 - e).powi(2) / e
            })
            .sum();
        assert_eq!(spec.n_pieces(), 5);
        assert!(stat < CHI2_4DF_999, "{which:?}: χ² = {stat}, counts {counts:?}");
    }
}

#[test]
fn samplers_are_bit_deterministic() {
    let spec = PiecewisePairSpec::<f64>::default_pair();
    let rng = Rng::new(77);
    let a = sample_piecewise(&spec, Which::P, 500, &mut rng.stream("x"));
    let b = sample_piecewise(&spec, Which::P, 500, &mut rng.stream("x"));
    assert_eq!(a, b);
    let pair = GaussianPair::<f64>::default_pair();
    assert_eq!(pair.sample(Which::Q, 300, &mut rng.stream("g")), pair.sample(Which::Q, 300, &mut rng.stream("g")));
    let t1 = regression_task(&spec, 50, 60, 0.1, &rng).unwrap();
    let t2 = regression_task(&spec, 50, 60, 0.1, &rng).unwrap();
    assert_eq!(t1, t2);
    assert_ne!(t1, regression_task(&spec, 50, 60, 0.1, &Rng::new(78)).unwrap());
}

#[test]
fn exact_ratios_integrate_to_one_under_q() {
    for (mp, sp, mq, sq) in [(1.0, 0.5, 0.0, 1.0), (0.0, 1.0, 0.0, 1.0), (-0.5, 0.8, 0.3, 1.2)] {
        let pair = gaussian_pair::<f64>(mp, sp, mq, sq).unwrap();
        let integral = simpson(|x| pair.exact_beta(x) * pair.density(Which::Q, x), -20.0, 20.0, 20001).unwrap();
        assert!((integral - 1.0).abs() <= 1e-8, "{integral}");
    }
    let spec = PiecewisePairSpec::<f64>::default_pair();
    let total: f64 = spec
        .edges()
        .windows(2)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            piecewise_beta(&spec, mid).unwrap() * spec.density(Which::Q, mid).unwrap() * (w[1] - w[0])
        })
        .sum();
    assert!((total - 1.0).abs() <= 1e-12, "{total}");
}

#[test]
fn noiseless_labels_follow_the_target() {
    let spec = PiecewisePairSpec::<f64>::default_pair();
    let task = regression_task(&spec, 40, 10, 0.0, &Rng::new(1)).unwrap();
    for (x, y) in task.src_xs.iter().zip(&task.src_ys) {
        assert_eq!(*y, target_function(*x));
    }
    assert_eq!(target_function(0.0f64), 0.0);
    assert!((target_function(1.0f64) - 0.141_120_008_059_867_2).abs() < 1e-15);
}
