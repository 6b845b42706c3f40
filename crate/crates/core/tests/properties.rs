use abc_bench::attribution::{ig_attribution, kernel_shap, lime_attribution, BinaryScheme, IgConfig, KsConfig};
use abc_bench::curve::{
    best_order_exhaustive, deletion_curve, insertion_curve, random_order_baseline, CurveMode, Ordering,
};
use abc_bench::decomposition::{auc_oracle, decompose, deletion_auc_oracle, shapley_from_dividends};
use abc_bench::feature_space::{assemble_hybrid, FeatureSpace, Point, SubsetMask};
use abc_bench::model::{AdditiveTerm, TabularInterpolantModel};
use abc_bench::model::{BuiltinModel, ModelHandle};
use abc_bench::synthetic::{random_multilinear, random_point};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pair(n: usize, rng: &mut ChaCha8Rng) -> (Point, Point) {
    let s = FeatureSpace::continuous(n).unwrap();
    (random_point(&s, rng), random_point(&s, rng))
}

fn order(n: usize, rng: &mut ChaCha8Rng) -> Ordering {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    Ordering::new(p, "random").unwrap()
}

/// Random polynomial additive model with small cubic terms.
fn additive(n: usize, rng: &mut ChaCha8Rng) -> ModelHandle {
    let additive = (1..=n)
        .map(|j| AdditiveTerm {
            feature: j,
            polynomial: vec![
                rng.random_range(-1.0..1.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-0.1..0.1),
            ],
        })
        .collect();
    let m = TabularInterpolantModel {
        n,
        binary: vec![],
        corner_values: vec![rng.random_range(-1.0..1.0)],
        additive,
    };
    ModelHandle::builtin(BuiltinModel::tabular(m).unwrap()).unwrap()
}

fn unit_box(n: usize, rng: &mut ChaCha8Rng) -> Point {
    Point::new((0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn dividends_reconstruct_every_corner(n in 1usize..7, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = ModelHandle::builtin(random_multilinear(n, 3, seed).unwrap()).unwrap();
        let (x, r) = pair(n, &mut rng);
        let d = decompose(&m, &x, &r).unwrap();
        for w in 0u64..(1 << n) {
            let w = SubsetMask::from_bits(w);
            let direct = m.predict_one(&assemble_hybrid(&x, &r, w).unwrap()).unwrap();
            prop_assert!((d.reconstruct(w) - direct).abs() < 1e-9);
        }
    }

    #[test]
    fn curve_auc_equals_dividend_forms(n in 1usize..9, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = ModelHandle::builtin(random_multilinear(n, 3, seed).unwrap()).unwrap();
        let (x, r) = pair(n, &mut rng);
        let d = decompose(&m, &x, &r).unwrap();
        let o = order(n, &mut rng);
        prop_assert!((insertion_curve(&m, &x, &r, &o).unwrap().auc - auc_oracle(&d, &o).unwrap()).abs() < 1e-9);
        prop_assert!((deletion_curve(&m, &x, &r, &o).unwrap().auc - deletion_auc_oracle(&d, &o).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn direction_symmetry_and_endpoints(n in 1usize..8, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = ModelHandle::builtin(random_multilinear(n, 3, seed).unwrap()).unwrap();
        let (x, r) = pair(n, &mut rng);
        let o = order(n, &mut rng);
        let fwd = insertion_curve(&m, &x, &r, &o).unwrap();
        let back = insertion_curve(&m, &r, &x, &o.reversed()).unwrap();
        prop_assert!((fwd.auc - back.auc).abs() < 1e-9);
        let other = insertion_curve(&m, &x, &r, &order(n, &mut rng)).unwrap();
        prop_assert_eq!(fwd.aul, other.aul);
        prop_assert_eq!(fwd.values[0], other.values[0]);
        prop_assert_eq!(fwd.values[n], other.values[n]);
    }

    #[test]
    fn additive_models(n in 1usize..8, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = additive(n, &mut rng);
        let (x, r) = (unit_box(n, &mut rng), unit_box(n, &mut rng));
        let phi = shapley_from_dividends(&decompose(&m, &x, &r).unwrap());
        let ins = insertion_curve(&m, &x, &r, &phi.insertion_order().unwrap()).unwrap();
        let del = deletion_curve(&m, &x, &r, &phi.deletion_order().unwrap()).unwrap();
        prop_assert!((ins.abc - del.abc).abs() < 1e-9);
        let ig = ig_attribution(&m, &x, &r, &IgConfig::default()).unwrap();
        prop_assert!(close(&ig.scores, &phi.scores, 1e-6), "{:?} vs {:?}", ig.scores, phi.scores);
    }

    #[test]
    fn efficiency_and_exact_kernel_shap(n in 1usize..9, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = ModelHandle::builtin(random_multilinear(n, 3, seed).unwrap()).unwrap();
        let (x, r) = pair(n, &mut rng);
        let gap = m.predict_one(&r).unwrap() - m.predict_one(&x).unwrap();
        let phi = shapley_from_dividends(&decompose(&m, &x, &r).unwrap());
        let ks = kernel_shap(&m, &x, &r, &KsConfig::exact()).unwrap();
        prop_assert!((phi.sum() - gap).abs() < 1e-9);
        prop_assert!((ks.sum() - gap).abs() < 1e-9);
        prop_assert!(close(&ks.scores, &phi.scores, 1e-9), "{:?} vs {:?}", ks.scores, phi.scores);
    }

    #[test]
    fn dummy_feature_gets_zero(n in 2usize..7, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // a model on n-1 features, padded with an ignored last coordinate
        let inner = random_multilinear(n - 1, 2, seed).unwrap();
        let BuiltinModel::Multilinear(ml) = inner else { unreachable!() };
        let padded = BuiltinModel::multilinear(n, ml.coefficients().iter().map(|(u, c)| (*u, *c))).unwrap();
        let m = ModelHandle::builtin(padded).unwrap();
        let (x, r) = pair(n, &mut rng);
        let phi = shapley_from_dividends(&decompose(&m, &x, &r).unwrap());
        let ks = kernel_shap(&m, &x, &r, &KsConfig::exact()).unwrap();
        let ig = ig_attribution(&m, &x, &r, &IgConfig::default()).unwrap();
        for v in [&phi, &ks, &ig] {
            prop_assert!(v.scores[n - 1].abs() < 1e-9, "{}: {}", v.method, v.scores[n - 1]);
        }
    }

    #[test]
    fn two_features_shapley_order_is_optimal(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = ModelHandle::builtin(random_multilinear(2, 2, seed).unwrap()).unwrap();
        let (x, r) = pair(2, &mut rng);
        let phi = shapley_from_dividends(&decompose(&m, &x, &r).unwrap());
        let a12 = insertion_curve(&m, &x, &r, &Ordering::identity(2)).unwrap().auc;
        let a21 = insertion_curve(&m, &x, &r, &Ordering::identity(2).reversed()).unwrap().auc;
        prop_assert!(((a12 - a21) - (phi.scores[0] - phi.scores[1])).abs() < 1e-9);
        let got = insertion_curve(&m, &x, &r, &phi.insertion_order().unwrap()).unwrap().auc;
        let (_, best) = best_order_exhaustive(&m, &x, &r, CurveMode::Insertion).unwrap();
        prop_assert!(got >= best.auc - 1e-9);
    }

    #[test]
    fn interaction_example_family(a in -10.0f64..10.0) {
        let m = ModelHandle::builtin(BuiltinModel::multilinear(3, [
            (SubsetMask::from_indices(&[0]), 3.0),
            (SubsetMask::from_indices(&[1]), 2.0),
            (SubsetMask::from_indices(&[2]), 1.0),
            (SubsetMask::from_indices(&[0, 1]), a),
        ]).unwrap()).unwrap();
        let x = Point::zeros(3);
        let r = Point::new(vec![1.0; 3]);
        let a123 = insertion_curve(&m, &x, &r, &Ordering::from_one_based(&[1, 2, 3], "").unwrap()).unwrap().auc;
        let a132 = insertion_curve(&m, &x, &r, &Ordering::from_one_based(&[1, 3, 2], "").unwrap()).unwrap().auc;
        prop_assert!((a123 - (14.0 + 2.0 * a)).abs() < 1e-12);
        prop_assert!((a132 - (13.0 + a)).abs() < 1e-12);
        let phi = shapley_from_dividends(&decompose(&m, &x, &r).unwrap());
        prop_assert!((phi.scores[0] - (3.0 + a / 2.0)).abs() < 1e-12);
        prop_assert!((phi.scores[1] - (2.0 + a / 2.0)).abs() < 1e-12);
    }

    #[test]
    fn random_orders_sum_to_zero(n in 1usize..7, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = ModelHandle::builtin(random_multilinear(n, 3, seed).unwrap()).unwrap();
        let (x, r) = pair(n, &mut rng);
        let b = random_order_baseline(&m, &x, &r, 1, 0).unwrap();
        prop_assert!(b.mean_sum.abs() < 1e-9);
    }
}

#[test]
fn interpolating_ig_on_mixed_multilinear() {
    // binary features 1..3 interact, features 4..5 are continuous and additive
    let space = FeatureSpace::new(vec![
        abc_bench::FeatureKind::Binary,
        abc_bench::FeatureKind::Binary,
        abc_bench::FeatureKind::Binary,
        abc_bench::FeatureKind::Continuous,
        abc_bench::FeatureKind::Continuous,
    ])
    .unwrap();
    let model = BuiltinModel::tabular(TabularInterpolantModel {
        n: 5,
        binary: vec![1, 2, 3],
        corner_values: vec![0.0, 1.0, -2.0, 4.0, 0.5, 2.5, 1.0, -3.0],
        additive: vec![
            AdditiveTerm {
                feature: 4,
                polynomial: vec![0.0, 1.0, 0.5],
            },
            AdditiveTerm {
                feature: 5,
                polynomial: vec![0.0, -2.0],
            },
        ],
    })
    .unwrap();
    let m = ModelHandle::builtin_on(model, space).unwrap();
    let x = Point::from([0.0, 1.0, 0.0, 0.3, -1.0]);
    let r = Point::from([1.0, 0.0, 1.0, -0.7, 0.5]);
    let phi = shapley_from_dividends(&decompose(&m, &x, &r).unwrap());
    let ig = ig_attribution(&m, &x, &r, &IgConfig::new(BinaryScheme::Interpolating)).unwrap();
    assert!(close(&ig.scores, &phi.scores, 1e-4), "{:?} vs {:?}", ig.scores, phi.scores);
}

#[test]
fn sampled_kernel_shap_approaches_shapley() {
    let n = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for seed in 0..5 {
        let m = ModelHandle::builtin(random_multilinear(n, 3, 100 + seed).unwrap()).unwrap();
        let (x, r) = pair(n, &mut rng);
        let phi = shapley_from_dividends(&decompose(&m, &x, &r).unwrap());
        let ks = kernel_shap(&m, &x, &r, &KsConfig::sampled(10 << n, seed)).unwrap();
        assert!((ks.sum() - phi.sum()).abs() < 1e-9);
        assert!(close(&ks.scores, &phi.scores, 0.05), "{:?} vs {:?}", ks.scores, phi.scores);
    }
}

#[test]
fn lime_recovers_additive_effects() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for seed in 0..5 {
        let n = 3 + seed as usize;
        let m = additive(n, &mut rng);
        let (x, r) = (unit_box(n, &mut rng), unit_box(n, &mut rng));
        let phi = shapley_from_dividends(&decompose(&m, &x, &r).unwrap());
        let lime = lime_attribution(&m, &x, &r, 5000, None, seed).unwrap();
        assert!(close(&lime.scores, &phi.scores, 0.05), "{:?} vs {:?}", lime.scores, phi.scores);
    }
}

#[test]
fn partially_sampled_kernel_shap_is_efficient_and_near() {
    // n = 12 with 1500 samples: only the size groups {1, 11} and {2, 10} are enumerated
    let n = 12;
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let m = ModelHandle::builtin(random_multilinear(n, 2, 7).unwrap()).unwrap();
    let (x, r) = pair(n, &mut rng);
    let phi = shapley_from_dividends(&decompose(&m, &x, &r).unwrap());
    let ks = kernel_shap(&m, &x, &r, &KsConfig::sampled(1500, 1)).unwrap();
    assert!((ks.sum() - phi.sum()).abs() < 1e-9);
    let evals = ks.metadata.model_evaluations.unwrap();
    assert!(evals > 2 + 24 + 132 && evals <= 1502, "{evals}");
    let worst = ks.scores.iter().zip(&phi.scores).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let scale = phi.scores.iter().map(|v| v.abs()).fold(0.0, f64::max);
    assert!(worst < 0.1 * scale, "worst {worst}, scale {scale}");
}
