//! Seeded synthetic models and datasets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::feature_space::{FeatureKind, FeatureSpace, Point, SubsetMask};
use crate::model::{BuiltinModel, Link};

/// Multilinear model with main effects on every feature and sparse
/// interactions up to `max_order`; coefficients shrink with the order.
pub fn random_multilinear(n: usize, max_order: usize, seed: u64) -> Result<BuiltinModel> {
    if n == 0 || n > 30 {
        return Err(Error::invalid(format!("random multilinear model needs 1 <= n <= 30, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut terms = vec![(SubsetMask::EMPTY, rng.sample::<f64, _>(StandardNormal))];
    for j in 0..n {
        terms.push((SubsetMask::singleton(j), rng.sample::<f64, _>(StandardNormal)));
    }
    // Interactions: each pair with probability 0.4, each triple with 0.1, ...
    let mut prob = 0.4;
    let mut scale = 0.7;
    for order in 2..=max_order.min(n) {
        for_each_subset_of_size(n, order, |u| {
            if rng.random::<f64>() < prob {
                let c: f64 = rng.sample::<f64, _>(StandardNormal) * scale;
                terms.push((u, c));
            }
        });
        prob /= 4.0;
        scale /= 2.0;
    }
    BuiltinModel::multilinear(n, terms)
}

fn for_each_subset_of_size(n: usize, k: usize, mut f: impl FnMut(SubsetMask)) {
    for bits in 0u64..(1u64 << n) {
        if bits.count_ones() as usize == k {
            f(SubsetMask::from_bits(bits));
        }
    }
}

/// `h(γ_0 + Σ γ_j x_j)` with standard normal weights.
pub fn random_monotone(link: Link, n: usize, seed: u64) -> BuiltinModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g0 = rng.sample::<f64, _>(StandardNormal) * 0.5;
    let w = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    BuiltinModel::monotone(link, g0, w)
}

/// A random point: continuous coordinates standard normal, binary fair coins.
pub fn random_point<R: Rng>(space: &FeatureSpace, rng: &mut R) -> Point {
    space
        .kinds()
        .iter()
        .map(|k| match k {
            FeatureKind::Continuous => rng.sample::<f64, _>(StandardNormal),
            FeatureKind::Binary => f64::from(u8::from(rng.random::<bool>())),
        })
        .collect::<Vec<_>>()
        .into()
}

/// Table of a generated dataset in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub rows: usize,
    #[serde(default)]
    pub continuous: usize,
    #[serde(default)]
    pub binary: usize,
    #[serde(default)]
    pub seed: u64,
}

impl SyntheticSpec {
    /// Continuous features first, then binary ones; no targets.
    pub fn generate(&self) -> Result<Dataset> {
        let n = self.continuous + self.binary;
        if n == 0 {
            return Err(Error::config("dataset.synthetic", "needs at least one feature"));
        }
        if self.rows < 2 {
            return Err(Error::config("dataset.synthetic.rows", "needs at least two rows"));
        }
        let mut kinds = vec![FeatureKind::Continuous; self.continuous];
        kinds.extend(vec![FeatureKind::Binary; self.binary]);
        let space = FeatureSpace::new(kinds)?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let rows = (0..self.rows).map(|_| random_point(&space, &mut rng)).collect();
        Dataset::new(space, rows, None)
    }
}

/// Continuous data with `y = Σ β_j x_j + noise`, `x ~ N(0, scale_j^2)`.
pub fn linear_regression_data(rows: usize, beta: &[f64], scales: &[f64], noise: f64, seed: u64) -> Result<Dataset> {
    if beta.len() != scales.len() {
        return Err(Error::DimensionMismatch {
            expected: beta.len(),
            found: scales.len(),
        });
    }
    let space = FeatureSpace::continuous(beta.len())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eps = Normal::new(0.0, noise.max(0.0)).map_err(|e| Error::invalid(e.to_string()))?;
    let mut points = Vec::with_capacity(rows);
    let mut targets = Vec::with_capacity(rows);
    for _ in 0..rows {
        let x: Vec<f64> = scales.iter().map(|s| s * rng.sample::<f64, _>(StandardNormal)).collect();
        let y = x.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>() + eps.sample(&mut rng);
        points.push(Point::new(x));
        targets.push(y);
    }
    Dataset::new(space, points, Some(targets))
}
