//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! All criteria run inside a single test so that the runtime bounds are
//! measured without other tests competing for the CPU. Oracles here are
//! computed independently of the library: corner values come from direct
//! model calls on hand-assembled hybrid points and dividends from an
//! explicit alternating sum over submasks.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use abc_bench::attribution::{IgConfig, KsConfig, MethodSpec};
use abc_bench::curve::{deletion_curve, insertion_curve, random_order_baseline, Ordering};
use abc_bench::decomposition::{expected_abc_oracle, expected_ceiling, shapley_from_dividends};
use abc_bench::experiment::ExperimentConfig;
use abc_bench::model::Link;
use abc_bench::roar::{roar_run, roar_with_ranking, RankingMode, RidgeTrainer};
use abc_bench::synthetic::{linear_regression_data, random_monotone, random_multilinear, random_point};
use abc_bench::{decompose, BuiltinModel, FeatureSpace, ModelHandle, Point, SubsetMask};
use itertools::Itertools;
use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

// ---------- independent oracles ----------

/// `f` at every corner `x'_w : x_{-w}`, indexed by the bits of `w`.
fn corners(m: &ModelHandle, x: &Point, r: &Point) -> Vec<f64> {
    let n = x.len();
    let pts: Vec<Point> = (0u64..1 << n)
        .map(|w| Point::new((0..n).map(|j| if w >> j & 1 == 1 { r[j] } else { x[j] }).collect()))
        .collect();
    m.predict(&pts).unwrap()
}

/// `Δ_u = Σ_{v ⊆ u} (-1)^{|u - v|} f(x'_v : x_{-v})`.
fn dividends(values: &[f64]) -> Vec<f64> {
    (0..values.len() as u64)
        .map(|u| {
            let mut total = 0.0;
            let mut v = u;
            loop {
                let sign = if (u & !v).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                total += sign * values[v as usize];
                if v == 0 {
                    break;
                }
                v = (v - 1) & u;
            }
            total
        })
        .collect()
}

/// `Σ_u (n - ⌈π(u)⌉ + 1) Δ_u` with positions of `order` counted from 1.
fn auc_closed_form(delta: &[f64], order: &[usize]) -> f64 {
    let n = order.len();
    let mut pos = vec![0; n];
    for (k, &j) in order.iter().enumerate() {
        pos[j] = k + 1;
    }
    delta
        .iter()
        .enumerate()
        .map(|(u, d)| {
            let ceil = (0..n).filter(|j| u >> j & 1 == 1).map(|j| pos[j]).max().unwrap_or(0);
            (n - ceil + 1) as f64 * d
        })
        .sum()
}

/// `(n+1)/2 Σ_{u ≠ ∅} (1 - |u|)/(|u| + 1) Δ_u`.
fn expected_abc_closed_form(delta: &[f64], n: usize) -> f64 {
    (n as f64 + 1.0) / 2.0
        * delta
            .iter()
            .enumerate()
            .skip(1)
            .map(|(u, d)| {
                let k = (u as u64).count_ones() as f64;
                (1.0 - k) / (k + 1.0) * d
            })
            .sum::<f64>()
}

fn shapley_closed_form(delta: &[f64], n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| {
            delta
                .iter()
                .enumerate()
                .filter(|(u, _)| u >> j & 1 == 1)
                .map(|(u, d)| d / (u as u64).count_ones() as f64)
                .sum()
        })
        .collect()
}

/// Trajectory values read off the corner table.
fn trajectory(values: &[f64], order: &[usize]) -> Vec<f64> {
    let mut w = 0usize;
    let mut out = vec![values[0]];
    for &j in order {
        w |= 1 << j;
        out.push(values[w]);
    }
    out
}

fn abc_of(traj: &[f64]) -> f64 {
    let n = traj.len() - 1;
    traj.iter().sum::<f64>() - (n as f64 + 1.0) / 2.0 * (traj[0] + traj[n])
}

fn argsort_desc(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
    idx
}

fn continuous_pair(n: usize, rng: &mut ChaCha8Rng) -> (Point, Point) {
    let s = FeatureSpace::continuous(n).unwrap();
    (random_point(&s, rng), random_point(&s, rng))
}

fn shuffled(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

fn interaction_model(a: f64) -> ModelHandle {
    ModelHandle::builtin(
        BuiltinModel::multilinear(
            3,
            [
                (SubsetMask::from_indices(&[0]), 3.0),
                (SubsetMask::from_indices(&[1]), 2.0),
                (SubsetMask::from_indices(&[2]), 1.0),
                (SubsetMask::from_indices(&[0, 1]), a),
            ],
        )
        .unwrap(),
    )
    .unwrap()
}

fn within_time(start: Instant, limit: Duration) -> Result<Duration, String> {
    let t = start.elapsed();
    if t < limit {
        Ok(t)
    } else {
        Err(format!("took {t:?}, limit {limit:?}"))
    }
}

// ---------- criteria ----------

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    let mut cases = 0;
    for k in 0..50u64 {
        let n = 2 + (k as usize % 7);
        let m = ModelHandle::builtin(random_multilinear(n, 3, 1000 + k).unwrap()).unwrap();
        let (x, r) = continuous_pair(n, &mut rng);
        let delta = dividends(&corners(&m, &x, &r));
        for _ in 0..5 {
            let p = shuffled(n, &mut rng);
            let auc = insertion_curve(&m, &x, &r, &Ordering::new(p.clone(), "t").unwrap()).unwrap().auc;
            worst = worst.max((auc - auc_closed_form(&delta, &p)).abs());
            cases += 1;
        }
    }
    let t = within_time(start, Duration::from_secs(5))?;
    if worst < 1e-9 {
        Ok(format!("{cases} orders over 50 models, max error {worst:.2e}, {t:?}"))
    } else {
        Err(format!("max error {worst:.3e}"))
    }
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut checked = 0;
    for n in 1..=7usize {
        for k in 1..=n {
            let subsets: Vec<Vec<usize>> = (1..=n).combinations(k).collect();
            let total: u64 = subsets.iter().map(|s| *s.iter().max().unwrap() as u64).sum();
            let enumerated = Ratio::new(total, subsets.len() as u64);
            let formula = Ratio::new((k * (n + 1)) as u64, (k + 1) as u64);
            let lib = expected_ceiling(n as u64, k as u64).map_err(|e| e.to_string())?;
            if enumerated != formula || lib != formula {
                return Err(format!("n={n} |u|={k}: enumerated {enumerated}, formula {formula}, library {lib}"));
            }
            checked += 1;
        }
    }
    let t = within_time(start, Duration::from_secs(1))?;
    Ok(format!("{checked} (n, |u|) cases exact, {t:?}"))
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst = 0.0f64;
    for n in 2..=7usize {
        for rep in 0..2u64 {
            let m = ModelHandle::builtin(random_multilinear(n, 3, 3000 + n as u64 * 10 + rep).unwrap()).unwrap();
            let (x, r) = continuous_pair(n, &mut rng);
            let values = corners(&m, &x, &r);
            let delta = dividends(&values);
            let abcs: Vec<f64> = (0..n)
                .permutations(n)
                .map(|p| insertion_curve(&m, &x, &r, &Ordering::new(p, "t").unwrap()).unwrap().abc)
                .collect();
            let mean = abcs.iter().sum::<f64>() / abcs.len() as f64;
            let lib = expected_abc_oracle(&decompose(&m, &x, &r).unwrap());
            worst = worst.max((mean - expected_abc_closed_form(&delta, n)).abs());
            worst = worst.max((mean - lib).abs());
        }
    }
    let values = corners(&interaction_model(-1.5), &Point::zeros(3), &Point::new(vec![1.0; 3]));
    let example = (0..3).permutations(3).map(|p| abc_of(&trajectory(&values, &p))).sum::<f64>() / 6.0;
    if worst < 1e-9 && (example - 1.0).abs() < 1e-12 {
        Ok(format!("max error {worst:.2e}; interaction example mean ABC {example}"))
    } else {
        Err(format!("max error {worst:.3e}; interaction example mean ABC {example}"))
    }
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst = 0.0f64;
    for n in 2..=7usize {
        let m = ModelHandle::builtin(random_multilinear(n, 3, 4000 + n as u64).unwrap()).unwrap();
        let (x, r) = continuous_pair(n, &mut rng);
        let mut sum = 0.0;
        let mut count = 0;
        for p in (0..n).permutations(n) {
            let o = Ordering::new(p, "t").unwrap();
            sum += insertion_curve(&m, &x, &r, &o).unwrap().abc + deletion_curve(&m, &x, &r, &o).unwrap().abc;
            count += 1;
        }
        worst = worst.max((sum / count as f64).abs());
        worst = worst.max(random_order_baseline(&m, &x, &r, 1, 0).unwrap().mean_sum.abs());
    }
    if worst < 1e-9 {
        Ok(format!("max |mean(ABC + ABC')| = {worst:.2e} for n = 2..7"))
    } else {
        Err(format!("max |mean| = {worst:.3e}"))
    }
}

fn criterion_5() -> Outcome {
    let m = interaction_model(-1.5);
    let x = Point::zeros(3);
    let r = Point::new(vec![1.0; 3]);
    let phi = MethodSpec::Shapley.compute(&m, &x, &r, 0).unwrap();
    let a123 = insertion_curve(&m, &x, &r, &Ordering::from_one_based(&[1, 2, 3], "").unwrap()).unwrap().auc;
    let a132 = insertion_curve(&m, &x, &r, &Ordering::from_one_based(&[1, 3, 2], "").unwrap()).unwrap().auc;
    let a = -1.5;
    let ok = phi.scores == vec![2.25, 1.25, 1.0]
        && phi.insertion_order().unwrap().one_based() == vec![1, 2, 3]
        && a123 == 11.0
        && a123 == 14.0 + 2.0 * a
        && a132 == 11.5
        && a132 == 13.0 + a;
    let detail = format!("phi = {:?}, AUC(1,2,3) = {a123}, AUC(1,3,2) = {a132}", phi.scores);
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    for k in 0..500u64 {
        let m = ModelHandle::builtin(random_multilinear(2, 2, 6000 + k).unwrap()).unwrap();
        let (x, r) = continuous_pair(2, &mut rng);
        let values = corners(&m, &x, &r);
        let best = [vec![0, 1], vec![1, 0]]
            .iter()
            .map(|p| trajectory(&values, p).iter().sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max);
        let phi = MethodSpec::Shapley.compute(&m, &x, &r, 0).unwrap();
        let order = phi.insertion_order().unwrap();
        let got = insertion_curve(&m, &x, &r, &order).unwrap().auc;
        if got < best - 1e-12 * best.abs().max(1.0) {
            return Err(format!("model {k}: Shapley AUC {got} < best {best}"));
        }
    }
    Ok("500 two-feature models, Shapley order always attains the maximum".into())
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mut cases = 0;
    for link in [Link::Logistic, Link::Exp, Link::LeakyRelu] {
        for n in 2..=7usize {
            for rep in 0..3u64 {
                let m = ModelHandle::builtin(random_monotone(link, n, 7000 + n as u64 * 10 + rep)).unwrap();
                let (x, r) = continuous_pair(n, &mut rng);
                let values = corners(&m, &x, &r);
                let best = (0..n)
                    .permutations(n)
                    .map(|p| trajectory(&values, &p).iter().sum::<f64>())
                    .fold(f64::NEG_INFINITY, f64::max);
                let phi = shapley_closed_form(&dividends(&values), n);
                let order = argsort_desc(&phi);
                let got = insertion_curve(&m, &x, &r, &Ordering::new(order.clone(), "t").unwrap()).unwrap().auc;
                if got < best - 1e-9 * best.abs().max(1.0) {
                    return Err(format!("{} n={n}: Shapley AUC {got} < best {best}", link.name()));
                }
                let ig = MethodSpec::IntegratedGradients(IgConfig::default()).compute(&m, &x, &r, 0).unwrap();
                if argsort_desc(&ig.scores) != order {
                    return Err(format!("{} n={n}: IG order differs from Shapley order", link.name()));
                }
                cases += 1;
            }
        }
    }
    Ok(format!("{cases} models over logistic/exp/leaky-relu links, n = 2..7"))
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mut ks_worst = 0.0f64;
    for n in 2..=12usize {
        let m = ModelHandle::builtin(random_multilinear(n, 3, 8000 + n as u64).unwrap()).unwrap();
        let (x, r) = continuous_pair(n, &mut rng);
        let phi = shapley_closed_form(&dividends(&corners(&m, &x, &r)), n);
        let ks = MethodSpec::KernelShap(KsConfig::exact()).compute(&m, &x, &r, 0).unwrap();
        for (a, b) in ks.scores.iter().zip(&phi) {
            ks_worst = ks_worst.max((a - b).abs());
        }
    }
    let mut ig_worst = 0.0f64;
    for n in 2..=8usize {
        let space = FeatureSpace::binary(n).unwrap();
        let model = random_multilinear(n, 3, 8100 + n as u64).unwrap();
        let m = ModelHandle::builtin_on(model, space.clone()).unwrap();
        let x = random_point(&space, &mut rng);
        let r = random_point(&space, &mut rng);
        let phi = shapley_closed_form(&dividends(&corners(&m, &x, &r)), n);
        let ig = MethodSpec::IntegratedGradients(IgConfig::new(abc_bench::attribution::BinaryScheme::Interpolating))
            .compute(&m, &x, &r, 0)
            .unwrap();
        for (a, b) in ig.scores.iter().zip(&phi) {
            ig_worst = ig_worst.max((a - b).abs());
        }
    }
    let mut lin_worst = 0.0f64;
    for n in [1usize, 3, 9] {
        let beta: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let m = ModelHandle::builtin(BuiltinModel::linear(0.7, beta.clone())).unwrap();
        let (x, r) = continuous_pair(n, &mut rng);
        for nodes in [1usize, 2, 7, 500] {
            let ig = MethodSpec::IntegratedGradients(IgConfig::default().with_nodes(nodes))
                .compute(&m, &x, &r, 0)
                .unwrap();
            for j in 0..n {
                lin_worst = lin_worst.max((ig.scores[j] - beta[j] * (r[j] - x[j])).abs());
            }
        }
    }
    let detail = format!(
        "exact KS vs Shapley {ks_worst:.2e} (n <= 12); IG-interp vs Shapley {ig_worst:.2e}; IG on linear {lin_worst:.2e}"
    );
    if ks_worst < 1e-9 && ig_worst < 1e-4 && lin_worst < 1e-12 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let mut sym_worst = 0.0f64;
    for k in 0..40u64 {
        let n = 2 + (k as usize % 7);
        let model = match k % 3 {
            0 => BuiltinModel::linear(0.3, (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()),
            1 => BuiltinModel::monotone(Link::Identity, -0.2, (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()),
            _ => {
                let terms: Vec<(SubsetMask, f64)> = (0..n)
                    .map(|j| (SubsetMask::from_indices(&[j]), rng.random_range(-2.0..2.0)))
                    .collect();
                BuiltinModel::multilinear(n, terms).unwrap()
            }
        };
        let m = ModelHandle::builtin(model).unwrap();
        let (x, r) = continuous_pair(n, &mut rng);
        let phi = shapley_from_dividends(&decompose(&m, &x, &r).unwrap());
        let mut orders = vec![phi.insertion_order().unwrap()];
        orders.push(Ordering::new(shuffled(n, &mut rng), "t").unwrap());
        for o in orders {
            let ins = insertion_curve(&m, &x, &r, &o).unwrap().abc;
            let del = deletion_curve(&m, &x, &r, &o.reversed()).unwrap().abc;
            sym_worst = sym_worst.max((ins - del).abs());
        }
    }
    let mut dir_worst = 0.0f64;
    for k in 0..40u64 {
        let n = 2 + (k as usize % 7);
        let m = ModelHandle::builtin(random_multilinear(n, 3, 9000 + k).unwrap()).unwrap();
        let (x, r) = continuous_pair(n, &mut rng);
        let o = Ordering::new(shuffled(n, &mut rng), "t").unwrap();
        let fwd = insertion_curve(&m, &x, &r, &o).unwrap().auc;
        let back = insertion_curve(&m, &r, &x, &o.reversed()).unwrap().auc;
        dir_worst = dir_worst.max((fwd - back).abs());
    }
    let detail = format!("additive |ABC - ABC'| {sym_worst:.2e}; direction symmetry {dir_worst:.2e}");
    if sym_worst < 1e-9 && dir_worst < 1e-9 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let mut abcs = Vec::new();
    for k in 0..1200u64 {
        let n = 3 + (k as usize % 6);
        let beta: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let m = ModelHandle::builtin(BuiltinModel::linear(0.0, beta)).unwrap();
        let (x, r) = continuous_pair(n, &mut rng);
        let a = MethodSpec::Random.compute(&m, &x, &r, 50_000 + k).unwrap();
        abcs.push(insertion_curve(&m, &x, &r, &a.insertion_order().unwrap()).unwrap().abc);
    }
    let (mean, se) = mean_se(&abcs);
    let detail = format!("{} pairs, mean ABC {mean:.4} with SE {se:.4}", abcs.len());
    if mean.abs() <= 3.0 * se {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_11() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1111);
    let n = 8;
    let methods = [
        MethodSpec::Shapley,
        MethodSpec::KernelShap(KsConfig::sampled(100, 0)),
        MethodSpec::Random,
        MethodSpec::VanillaGrad,
    ];
    let mut abc: Vec<Vec<f64>> = vec![Vec::new(); methods.len()];
    for k in 0..200u64 {
        let m = ModelHandle::builtin(random_multilinear(n, 3, 11_000 + k).unwrap()).unwrap();
        let (x, r) = continuous_pair(n, &mut rng);
        for (mi, method) in methods.iter().enumerate() {
            let a = method.compute(&m, &x, &r, k * 10 + mi as u64).unwrap();
            abc[mi].push(insertion_curve(&m, &x, &r, &a.insertion_order().unwrap()).unwrap().abc);
        }
    }
    let means: Vec<f64> = abc.iter().map(|v| mean_se(v).0).collect();
    let diff: Vec<f64> = abc[0].iter().zip(&abc[1]).map(|(a, b)| a - b).collect();
    let (_, diff_se) = mean_se(&diff);
    let tol = 3.0 * diff_se + 1e-12;
    let detail = format!(
        "mean insertion ABC: shapley {:.4}, ks:sampled {:.4} (tol {tol:.2e}), random {:.4}; vanilla grad {:.4} (recorded only)",
        means[0], means[1], means[2], means[3]
    );
    if means[0] >= means[1] - tol && means[1] > means[2] {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_12() -> Outcome {
    let start = Instant::now();
    let beta = [5.0, 3.0, 2.0, 1.0, 0.5, 0.25, 0.0, 0.0];
    let mut ds = linear_regression_data(800, &beta, &[1.0; 8], 0.5, 12).map_err(|e| e.to_string())?;
    ds.split_train_test(0.25, 12).map_err(|e| e.to_string())?;
    let trainer = RidgeTrainer::default();
    let quantiles = [0.5, 1.0];
    let run = |method: MethodSpec| {
        roar_run(&ds, &trainer, &method, RankingMode::Absolute, &quantiles, 1, 200, 12).unwrap()
    };
    let correct = run(MethodSpec::Shapley);
    let reversed_ranking: Vec<usize> = correct.ranking.iter().rev().map(|j| j - 1).collect();
    let reversed = roar_with_ranking(&ds, &trainer, &reversed_ranking, &quantiles, 1, 12).unwrap();
    let others = [
        run(MethodSpec::IntegratedGradients(IgConfig::default().with_nodes(20))),
        run(MethodSpec::VanillaGrad),
        run(MethodSpec::Random),
    ];
    let mut full: Vec<f64> = vec![correct.losses[1][0], reversed[1][0]];
    full.extend(others.iter().map(|s| s.losses[1][0]));
    let spread = full.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - full.iter().cloned().fold(f64::INFINITY, f64::min);
    let t = within_time(start, Duration::from_secs(10))?;
    let detail = format!(
        "q=0.5 loss: correct {:.4} vs reversed {:.4}; q=1.0 spread {spread:.2e}; ranking {:?}; {t:?}",
        correct.losses[0][0], reversed[0][0], correct.ranking
    );
    if correct.losses[0][0] > reversed[0][0] && spread < 1e-9 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_13() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_abc-bench");
    let status = Command::new(bin).arg("selfcheck").output().map_err(|e| e.to_string())?;
    if !status.status.success() {
        return Err(format!("selfcheck failed:\n{}", String::from_utf8_lossy(&status.stdout)));
    }
    let out = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = workspace_root().join("configs/synthetic_experiment.toml");
    let start = Instant::now();
    let run = Command::new(bin)
        .args(["experiment", "--threads", "1", "--output-dir"])
        .arg(out.path())
        .arg(&config)
        .output()
        .map_err(|e| e.to_string())?;
    let t = within_time(start, Duration::from_secs(60))?;
    if !run.status.success() {
        return Err(format!("experiment failed: {}", String::from_utf8_lossy(&run.stderr)));
    }
    let text = std::fs::read_to_string(out.path().join("summary.json")).map_err(|e| e.to_string())?;
    let summary: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let rows = summary["table"]["rows"].as_array().ok_or("summary.json has no table rows")?;
    let cfg = ExperimentConfig::from_path(&config).map_err(|e| e.to_string())?;
    let expected = cfg.methods.len() * cfg.modes.len();
    let complete = rows.len() == expected
        && rows
            .iter()
            .all(|r| r["count"].as_u64().is_some_and(|c| c > 0) && r["mean"].as_f64().is_some_and(f64::is_finite));
    if complete {
        Ok(format!("selfcheck exit 0; experiment wrote {} table rows in {t:?}", rows.len()))
    } else {
        Err(format!("summary.json incomplete: {} rows, expected {expected}", rows.len()))
    }
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 13] = [
        ("anchored AUC identity", criterion_1),
        ("expected ceiling, exact rationals", criterion_2),
        ("expected ABC closed form", criterion_3),
        ("insertion plus deletion has zero mean", criterion_4),
        ("interaction counterexample", criterion_5),
        ("two features have no counterexample", criterion_6),
        ("monotone links", criterion_7),
        ("method cross-validation", criterion_8),
        ("additive and direction symmetry", criterion_9),
        ("random ordering control", criterion_10),
        ("dominance sanity", criterion_11),
        ("ROAR sanity", criterion_12),
        ("end-to-end smoke", criterion_13),
    ];
    let mut failed = Vec::new();
    for (k, (name, f)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(d) => println!("PASS criterion {}: {name}: {d}", k + 1),
            Err(d) => {
                println!("FAIL criterion {}: {name}: {d}", k + 1);
                failed.push(k + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
