//! Exact identities checked against brute force at small `n`.

use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::attribution::{ig_attribution, IgConfig};
use crate::curve::{
    best_order_exhaustive, deletion_curve, insertion_curve, next_permutation, random_order_baseline, CurveMode,
    Ordering,
};
use crate::decomposition::{
    auc_oracle, decompose, deletion_auc_oracle, expected_abc_oracle, expected_ceiling, shapley_from_dividends,
    CornerTable,
};
use crate::error::Result;
use crate::feature_space::{FeatureSpace, Point, SubsetMask};
use crate::model::{BuiltinModel, Link, ModelHandle};
use crate::synthetic::{random_monotone, random_multilinear, random_point};

/// Largest `n` used by the checks.
pub const SELFCHECK_MAX_N: usize = 7;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, r: Result<(bool, String)>) -> CheckOutcome {
    match r {
        Ok((passed, detail)) => CheckOutcome { name, passed, detail },
        Err(e) => CheckOutcome {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

/// Runs every check with random instances drawn from `seed`.
pub fn run_all(seed: u64) -> Vec<CheckOutcome> {
    vec![
        outcome("auc-from-dividends", check_auc_identity(seed)),
        outcome("expected-ceiling", check_expected_ceiling()),
        outcome("expected-abc", check_expected_abc(seed)),
        outcome("insertion-plus-deletion-mean-zero", check_sum_zero(seed)),
        outcome("shapley-vs-auc-counterexample", check_counterexample()),
        outcome("monotone-link-optimal-order", check_monotone(seed)),
    ]
}

fn random_pair(n: usize, rng: &mut ChaCha8Rng) -> Result<(Point, Point)> {
    let space = FeatureSpace::continuous(n)?;
    Ok((random_point(&space, rng), random_point(&space, rng)))
}

fn random_order(n: usize, rng: &mut ChaCha8Rng) -> Result<Ordering> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    Ordering::new(p, "random")
}

/// Insertion and deletion AUC along random orders equal their dividend forms.
pub fn check_auc_identity(seed: u64) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut cases = 0;
    for n in 2..=SELFCHECK_MAX_N {
        for rep in 0..5 {
            let m = ModelHandle::builtin(random_multilinear(n, 3, seed ^ ((n * 31 + rep) as u64))?)?;
            let (x, r) = random_pair(n, &mut rng)?;
            let d = decompose(&m, &x, &r)?;
            for _ in 0..4 {
                let o = random_order(n, &mut rng)?;
                let ins = insertion_curve(&m, &x, &r, &o)?;
                let del = deletion_curve(&m, &x, &r, &o)?;
                worst = worst.max((ins.auc - auc_oracle(&d, &o)?).abs());
                worst = worst.max((del.auc - deletion_auc_oracle(&d, &o)?).abs());
                cases += 1;
            }
        }
    }
    Ok((worst < 1e-9, format!("{cases} orders, max |curve - dividend form| = {worst:.3e}")))
}

/// Mean of the largest element of every `k`-subset of `1:n`, in exact rationals.
pub fn check_expected_ceiling() -> Result<(bool, String)> {
    let mut ok = true;
    let mut checked = 0;
    for n in 1..=SELFCHECK_MAX_N {
        for k in 1..=n {
            let mut total = 0u64;
            let mut count = 0u64;
            for bits in 1u64..(1 << n) {
                let u = SubsetMask::from_bits(bits);
                if u.len() == k {
                    total += u.ceiling() as u64;
                    count += 1;
                }
            }
            let enumerated = Ratio::new(total, count);
            ok &= enumerated == expected_ceiling(n as u64, k as u64)?;
            checked += 1;
        }
    }
    Ok((ok, format!("{checked} (n, |u|) cases with n <= {SELFCHECK_MAX_N}")))
}

/// Mean insertion ABC over all `n!` orders from a corner table.
fn exhaustive_mean_abc(table: &CornerTable) -> f64 {
    let n = table.n();
    let mut perm: Vec<usize> = (0..n).collect();
    let (mut sum, mut count) = (0.0, 0usize);
    loop {
        let v = table.trajectory(&perm);
        let aul = (n as f64 + 1.0) / 2.0 * (v[0] + v[n]);
        sum += v.iter().sum::<f64>() - aul;
        count += 1;
        if !next_permutation(&mut perm) {
            break;
        }
    }
    sum / count as f64
}

/// Exhaustive mean ABC against `(n+1)/2 Σ (1-|u|)/(|u|+1) Δ_u`.
pub fn check_expected_abc(seed: u64) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let mut worst = 0.0f64;
    for n in 2..=SELFCHECK_MAX_N {
        let m = ModelHandle::builtin(random_multilinear(n, 3, seed ^ (n as u64 * 977))?)?;
        let (x, r) = random_pair(n, &mut rng)?;
        let table = CornerTable::evaluate(&m, &x, &r)?;
        let d = crate::decomposition::AnchoredDecomposition::from_corners(&table, x, r);
        worst = worst.max((exhaustive_mean_abc(&table) - expected_abc_oracle(&d)).abs());
    }
    let m = ModelHandle::builtin(interaction_model(-1.5)?)?;
    let table = CornerTable::evaluate(&m, &Point::zeros(3), &Point::new(vec![1.0; 3]))?;
    let example = exhaustive_mean_abc(&table);
    Ok((
        worst < 1e-9 && (example - 1.0).abs() < 1e-12,
        format!("max deviation {worst:.3e}; interaction example mean ABC = {example}"),
    ))
}

/// Mean of `ABC + ABC'` over all orders is zero.
pub fn check_sum_zero(seed: u64) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(2));
    let mut worst = 0.0f64;
    for n in 2..=SELFCHECK_MAX_N {
        let m = ModelHandle::builtin(random_multilinear(n, 3, seed ^ (n as u64 * 7919))?)?;
        let (x, r) = random_pair(n, &mut rng)?;
        let b = random_order_baseline(&m, &x, &r, 1, 0)?;
        worst = worst.max(b.mean_sum.abs());
    }
    Ok((worst < 1e-9, format!("max |mean(ABC + ABC')| = {worst:.3e}")))
}

/// `f = 3x1 + 2x2 + x3 + A x1 x2`.
pub fn interaction_model(a: f64) -> Result<BuiltinModel> {
    BuiltinModel::multilinear(
        3,
        [
            (SubsetMask::from_indices(&[0]), 3.0),
            (SubsetMask::from_indices(&[1]), 2.0),
            (SubsetMask::from_indices(&[2]), 1.0),
            (SubsetMask::from_indices(&[0, 1]), a),
        ],
    )
}

/// Shapley order (1,2,3) loses to (1,3,2) once the interaction is -1.5.
pub fn check_counterexample() -> Result<(bool, String)> {
    let m = ModelHandle::builtin(interaction_model(-1.5)?)?;
    let x = Point::zeros(3);
    let r = Point::new(vec![1.0; 3]);
    let phi = shapley_from_dividends(&decompose(&m, &x, &r)?);
    let shapley_order = phi.insertion_order()?;
    let a123 = insertion_curve(&m, &x, &r, &Ordering::from_one_based(&[1, 2, 3], "")?)?.auc;
    let a132 = insertion_curve(&m, &x, &r, &Ordering::from_one_based(&[1, 3, 2], "")?)?.auc;
    let (best, _) = best_order_exhaustive(&m, &x, &r, CurveMode::Insertion)?;
    let phi_ok = phi
        .scores
        .iter()
        .zip([2.25, 1.25, 1.0])
        .all(|(a, b)| (a - b).abs() < 1e-12);
    let ok = phi_ok
        && shapley_order.one_based() == vec![1, 2, 3]
        && best.one_based() == vec![1, 3, 2]
        && a123 == 11.0
        && a132 == 11.5;
    Ok((
        ok,
        format!(
            "phi = {:?}, phi order {:?} AUC {a123}, best order {:?} AUC {a132}",
            phi.scores,
            shapley_order.one_based(),
            best.one_based()
        ),
    ))
}

/// For `h(γ0 + Σ γ_j x_j)` with increasing `h`, the Shapley order attains
/// the largest insertion AUC and integrated gradients ranks alike.
pub fn check_monotone(seed: u64) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(3));
    let mut failures = Vec::new();
    let mut cases = 0;
    for link in [Link::Logistic, Link::Exp, Link::LeakyRelu, Link::Identity] {
        for n in 2..=SELFCHECK_MAX_N {
            let m = ModelHandle::builtin(random_monotone(link, n, seed ^ (n as u64 * 104_729) ^ link as u64))?;
            let (x, r) = random_pair(n, &mut rng)?;
            let phi = shapley_from_dividends(&decompose(&m, &x, &r)?);
            let order = phi.insertion_order()?;
            let auc = insertion_curve(&m, &x, &r, &order)?.auc;
            let (_, best) = best_order_exhaustive(&m, &x, &r, CurveMode::Insertion)?;
            let ig = ig_attribution(&m, &x, &r, &IgConfig::default())?;
            cases += 1;
            if auc < best.auc - 1e-9 * best.auc.abs().max(1.0) {
                failures.push(format!("{} n={n}: AUC {auc} < best {}", link.name(), best.auc));
            }
            if ig.insertion_order()?.perm() != order.perm() {
                failures.push(format!("{} n={n}: IG order differs", link.name()));
            }
        }
    }
    let detail = if failures.is_empty() {
        format!("{cases} models, Shapley order optimal and IG order equal in all")
    } else {
        failures.join("; ")
    };
    Ok((failures.is_empty(), detail))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass() {
        for seed in [0, 1, 42] {
            for c in run_all(seed) {
                assert!(c.passed, "{}: {}", c.name, c.detail);
            }
        }
    }
}
