//! Kernel SHAP: weighted least squares on coalition values
//! `v(S) = f(x'_S : x_{-S})` with the Shapley kernel
//! `k(s) = (n - 1) / (C(n, s) s (n - s))`, pinned at `v(∅)` and constrained
//! to sum to `v(1:n) - v(∅)`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::AttributionVector;
use crate::error::{Error, Result};
use crate::feature_space::{check_pair, hybrid_unchecked, Point, SubsetMask};
use crate::model::ModelHandle;

/// Largest `n` for the exact mode (`2^n` coalitions).
pub const MAX_EXACT_KS_FEATURES: usize = 20;

/// Coalitions are stored as `u64` masks.
const MAX_SAMPLED_KS_FEATURES: usize = 64;

const EVAL_CHUNK: usize = 1 << 14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KsMode {
    Exact,
    Sampled { samples: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsConfig {
    pub mode: KsMode,
}

impl KsConfig {
    pub const DEFAULT_SAMPLES: usize = 120_000;

    pub fn exact() -> Self {
        Self { mode: KsMode::Exact }
    }

    pub fn sampled(samples: usize, seed: u64) -> Self {
        Self {
            mode: KsMode::Sampled { samples, seed },
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.mode {
            KsMode::Sampled { samples: 0, .. } => Err(Error::invalid("sampled kernel SHAP needs samples > 0")),
            _ => Ok(()),
        }
    }
}

pub fn kernel_shap(model: &ModelHandle, x: &Point, x_ref: &Point, cfg: &KsConfig) -> Result<AttributionVector> {
    let n = check_pair(x, x_ref)?;
    if n != model.n() {
        return Err(Error::DimensionMismatch {
            expected: model.n(),
            found: n,
        });
    }
    cfg.validate()?;
    let (name, coalitions) = match cfg.mode {
        KsMode::Exact => {
            if n > MAX_EXACT_KS_FEATURES {
                return Err(Error::CapExceeded {
                    what: "exact kernel SHAP",
                    n,
                    cap: MAX_EXACT_KS_FEATURES,
                });
            }
            let full = (1u64 << n) - 1;
            let c: Vec<(u64, f64)> = (1..full).map(|s| (s, shapley_kernel(n, s.count_ones() as usize))).collect();
            ("ks:exact", c)
        }
        KsMode::Sampled { samples, seed } => {
            if n > MAX_SAMPLED_KS_FEATURES {
                return Err(Error::CapExceeded {
                    what: "sampled kernel SHAP",
                    n,
                    cap: MAX_SAMPLED_KS_FEATURES,
                });
            }
            ("ks:sampled", sample_coalitions(n, samples, seed))
        }
    };

    let mut masks: Vec<u64> = vec![0, full_mask(n)];
    masks.extend(coalitions.iter().map(|c| c.0));
    let mut values = Vec::with_capacity(masks.len());
    for chunk in masks.chunks(EVAL_CHUNK) {
        let pts: Vec<Point> = chunk
            .iter()
            .map(|&s| hybrid_unchecked(x, x_ref, SubsetMask::from_bits(s)))
            .collect();
        values.extend(model.predict(&pts)?);
    }
    let (v_empty, v_full) = (values[0], values[1]);
    let scores = if n == 1 {
        vec![v_full - v_empty]
    } else {
        solve_constrained(n, &coalitions, &values[2..], v_empty, v_full)?
    };

    let mut v = AttributionVector::new(name, scores);
    v.metadata.model_evaluations = Some(masks.len() as u64);
    if let KsMode::Sampled { samples, seed } = cfg.mode {
        v.metadata.samples = Some(samples);
        v.metadata.seed = Some(seed);
        v.metadata.note = Some("complete size groups enumerated, others paired sampling".into());
    }
    v.check_finite()
}

fn full_mask(n: usize) -> u64 {
    if n == 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn shapley_kernel(n: usize, s: usize) -> f64 {
    (n - 1) as f64 / (binomial(n, s) * s as f64 * (n - s) as f64)
}

/// Masks of `n` bits with exactly `k` set, in increasing order (Gosper's hack).
fn masks_of_size(n: usize, k: usize) -> impl Iterator<Item = u64> {
    let full = full_mask(n);
    let mut next = Some(full_mask(k));
    std::iter::from_fn(move || {
        let m = next?;
        let c = m & m.wrapping_neg();
        let r = m.wrapping_add(c);
        next = if r == 0 || r > full || r < m {
            None
        } else {
            Some((((r ^ m) >> 2) / c) | r)
        };
        Some(m)
    })
}

/// Coalitions for the sampled mode with their regression weights.
///
/// Size groups `{s, n - s}` are visited from the smallest `s`; a group whose
/// coalitions all fit in its share of the remaining budget is enumerated
/// with exact kernel weights. The rest of the budget draws sizes by kernel
/// mass, each draw adding a coalition and its complement, and the
/// remaining mass is spread over the draws by count.
fn sample_coalitions(n: usize, samples: usize, seed: u64) -> Vec<(u64, f64)> {
    if n < 2 {
        return Vec::new();
    }
    let full = full_mask(n);
    let groups: Vec<usize> = (1..=n / 2).collect();
    let group_size = |s: usize| binomial(n, s) * if 2 * s == n { 1.0 } else { 2.0 };
    let group_mass = |s: usize| (n - 1) as f64 / (s * (n - s)) as f64 * if 2 * s == n { 1.0 } else { 2.0 };

    let mut out: BTreeMap<u64, f64> = BTreeMap::new();
    let mut budget = samples as f64;
    let mut first_sampled = 0;
    while first_sampled < groups.len() {
        let s = groups[first_sampled];
        let remaining: f64 = groups[first_sampled..].iter().map(|&g| group_mass(g)).sum();
        if budget * group_mass(s) / remaining < group_size(s) {
            break;
        }
        let w = shapley_kernel(n, s);
        for m in masks_of_size(n, s) {
            out.insert(m, w);
            out.insert(full & !m, w);
        }
        budget -= group_size(s);
        first_sampled += 1;
    }

    let rest = &groups[first_sampled..];
    let draws = (budget / 2.0).floor() as usize;
    if rest.is_empty() || draws == 0 {
        return out.into_iter().collect();
    }
    let masses: Vec<f64> = rest.iter().map(|&g| group_mass(g)).collect();
    let total: f64 = masses.iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts: BTreeMap<u64, f64> = BTreeMap::new();
    for _ in 0..draws {
        let mut r = rng.random::<f64>() * total;
        let mut size = rest[rest.len() - 1];
        for (g, m) in rest.iter().zip(&masses) {
            if r < *m {
                size = *g;
                break;
            }
            r -= m;
        }
        let s: u64 = sample(&mut rng, n, size).iter().fold(0, |acc, j| acc | (1u64 << j));
        *counts.entry(s).or_default() += 1.0;
        *counts.entry(full & !s).or_default() += 1.0;
    }
    let unit = total / (2 * draws) as f64;
    for (m, c) in counts {
        out.insert(m, c * unit);
    }
    out.into_iter().collect()
}

/// Minimizes `Σ w_S (v(S) - v(∅) - Σ_{j∈S} φ_j)^2` subject to
/// `Σ φ = v(1:n) - v(∅)` by eliminating the last coordinate.
fn solve_constrained(n: usize, coalitions: &[(u64, f64)], values: &[f64], v_empty: f64, v_full: f64) -> Result<Vec<f64>> {
    let k = n - 1;
    let last = 1u64 << (n - 1);
    let total = v_full - v_empty;
    let mut ata = DMatrix::<f64>::zeros(k, k);
    let mut atb = DVector::<f64>::zeros(k);
    let mut row = vec![0.0; k];
    for (&(s, w), &v) in coalitions.iter().zip(values) {
        let zn = if s & last != 0 { 1.0 } else { 0.0 };
        for (j, r) in row.iter_mut().enumerate() {
            *r = ((s >> j) & 1) as f64 - zn;
        }
        let y = v - v_empty - zn * total;
        for a in 0..k {
            if row[a] == 0.0 {
                continue;
            }
            let wa = w * row[a];
            atb[a] += wa * y;
            for b in a..k {
                ata[(a, b)] += wa * row[b];
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            ata[(a, b)] = ata[(b, a)];
        }
    }
    let svd = ata.svd(true, true);
    let smax = svd.singular_values.max();
    let tol = smax * k as f64 * 1e-12;
    if smax <= 0.0 || svd.singular_values.iter().any(|&s| s <= tol) {
        return Err(Error::Singular(format!(
            "kernel SHAP regression is rank deficient with {} distinct coalitions for n = {n}",
            coalitions.len()
        )));
    }
    let phi = svd
        .solve(&atb, tol)
        .map_err(|e| Error::Singular(e.to_string()))?;
    let mut out: Vec<f64> = phi.iter().copied().collect();
    out.push(total - out.iter().sum::<f64>());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::{decompose, shapley_from_dividends};
    use crate::model::BuiltinModel;

    fn interaction_model() -> ModelHandle {
        ModelHandle::builtin(
            BuiltinModel::multilinear(
                3,
                [
                    (SubsetMask::from_indices(&[0]), 3.0),
                    (SubsetMask::from_indices(&[1]), 2.0),
                    (SubsetMask::from_indices(&[2]), 1.0),
                    (SubsetMask::from_indices(&[0, 1]), -1.5),
                ],
            )
            .unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn exact_matches_section_example() {
        let v = kernel_shap(&interaction_model(), &Point::zeros(3), &Point::new(vec![1.0; 3]), &KsConfig::exact()).unwrap();
        for (a, b) in v.scores.iter().zip([2.25, 1.25, 1.0]) {
            assert!((a - b).abs() < 1e-12, "{:?}", v.scores);
        }
        assert_eq!(v.metadata.model_evaluations, Some(8));
    }

    #[test]
    fn exact_matches_dividends_with_a_logistic() {
        let m = ModelHandle::builtin(BuiltinModel::logistic(0.2, vec![1.0, -2.0, 0.5, 0.3, 1.1])).unwrap();
        let x = Point::from([0.1, 0.5, -1.0, 2.0, 0.0]);
        let r = Point::from([1.0, -0.5, 0.3, 0.0, 1.0]);
        let ks = kernel_shap(&m, &x, &r, &KsConfig::exact()).unwrap();
        let sh = shapley_from_dividends(&decompose(&m, &x, &r).unwrap());
        for (a, b) in ks.scores.iter().zip(&sh.scores) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn sampled_is_seeded_and_close() {
        let m = interaction_model();
        let x = Point::zeros(3);
        let r = Point::new(vec![1.0; 3]);
        let a = kernel_shap(&m, &x, &r, &KsConfig::sampled(200, 4)).unwrap();
        let b = kernel_shap(&m, &x, &r, &KsConfig::sampled(200, 4)).unwrap();
        assert_eq!(a, b);
        // with every coalition drawn the estimate is exact
        for (s, e) in a.scores.iter().zip([2.25, 1.25, 1.0]) {
            assert!((s - e).abs() < 0.05);
        }
        let sum: f64 = a.scores.iter().sum();
        assert!((sum - 4.5).abs() < 1e-12);
    }

    #[test]
    fn too_few_samples_is_singular() {
        let m = ModelHandle::builtin(BuiltinModel::linear(0.0, vec![1.0; 6])).unwrap();
        let err = kernel_shap(&m, &Point::zeros(6), &Point::new(vec![1.0; 6]), &KsConfig::sampled(2, 0)).unwrap_err();
        assert!(matches!(err, Error::Singular(_)), "{err}");
    }

    #[test]
    fn gosper_enumerates_every_mask_once() {
        for n in 1..=10 {
            for k in 1..=n {
                let masks: Vec<u64> = masks_of_size(n, k).collect();
                assert_eq!(masks.len() as f64, binomial(n, k));
                assert!(masks.windows(2).all(|w| w[0] < w[1]));
                assert!(masks.iter().all(|m| m.count_ones() as usize == k && *m <= full_mask(n)));
            }
        }
        assert_eq!(masks_of_size(64, 64).collect::<Vec<_>>(), vec![u64::MAX]);
    }

    #[test]
    fn sampled_weights_carry_the_kernel_mass() {
        // budget covers sizes {1, 5} but not {2, 4} or {3}
        let n = 6;
        let c = sample_coalitions(n, 40, 3);
        let total: f64 = c.iter().map(|x| x.1).sum();
        let mass: f64 = (1..n).map(|s| (n - 1) as f64 / (s * (n - s)) as f64).sum();
        assert!((total - mass).abs() < 1e-12);
        for (m, w) in &c {
            let s = m.count_ones() as usize;
            if s == 1 || s == 5 {
                assert_eq!(*w, shapley_kernel(n, s));
            }
        }
    }

    #[test]
    fn large_budget_is_exact() {
        let m = ModelHandle::builtin(crate::synthetic::random_multilinear(7, 3, 2).unwrap()).unwrap();
        let x = Point::zeros(7);
        let r = Point::new(vec![1.0; 7]);
        let a = kernel_shap(&m, &x, &r, &KsConfig::sampled(126, 0)).unwrap();
        let e = kernel_shap(&m, &x, &r, &KsConfig::exact()).unwrap();
        for (s, t) in a.scores.iter().zip(&e.scores) {
            assert!((s - t).abs() < 1e-12);
        }
    }

    #[test]
    fn kernel_weights() {
        assert!((shapley_kernel(3, 1) - 2.0 / (3.0 * 2.0)).abs() < 1e-15);
        assert!((binomial(16, 8) - 12870.0).abs() < 1e-9);
    }
}
