//! Gradient-based scores and the random control.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::AttributionVector;
use crate::error::Result;
use crate::feature_space::{check_pair, FeatureKind, Point};
use crate::model::ModelHandle;

/// Stand-in for a binary zero when multiplying by the gradient.
pub const BINARY_ZERO_REPLACEMENT: f64 = -1e-4;

/// `∇f(x)`; the reference point is only checked for shape.
pub fn vanilla_grad(model: &ModelHandle, x: &Point, x_ref: &Point) -> Result<AttributionVector> {
    check_pair(x, x_ref)?;
    let g = model.gradient_one(x)?;
    let mut v = AttributionVector::new("vg", g);
    v.metadata.gradient_evaluations = Some(1);
    v.check_finite()
}

/// `x_j · ∂f/∂x_j(x)`, with binary zeros replaced by a small negative value.
pub fn input_x_gradient(model: &ModelHandle, x: &Point, x_ref: &Point) -> Result<AttributionVector> {
    check_pair(x, x_ref)?;
    let g = model.gradient_one(x)?;
    let kinds = model.space().kinds();
    let scores = g
        .iter()
        .zip(x.iter())
        .zip(kinds)
        .map(|((g, &xj), kind)| {
            let xj = if *kind == FeatureKind::Binary && xj == 0.0 {
                BINARY_ZERO_REPLACEMENT
            } else {
                xj
            };
            xj * g
        })
        .collect();
    let mut v = AttributionVector::new("ixg", scores);
    v.metadata.gradient_evaluations = Some(1);
    v.check_finite()
}

/// Independent standard normal scores.
pub fn random_attribution(n: usize, seed: u64) -> AttributionVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scores = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut v = AttributionVector::new("random", scores);
    v.metadata.seed = Some(seed);
    v.metadata.model_evaluations = Some(0);
    v
}
