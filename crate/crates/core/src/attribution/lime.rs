//! A LIME-style local surrogate on binary masks.
//!
//! Mask `z_j = 1` keeps `x_j`, `z_j = 0` takes `x'_j`. Masks are drawn
//! uniformly (the all-ones mask is always the first sample) and weighted
//! by `exp(-H / width^2)`, `H` being the number of switched coordinates.
//! A ridge regression with an unpenalized intercept is fitted, and the
//! score of feature `j` is minus its coefficient: the predicted change in
//! `f` from switching `x_j` to `x'_j`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::AttributionVector;
use crate::error::{Error, Result};
use crate::feature_space::{check_pair, Point};
use crate::model::ModelHandle;

const RIDGE: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimeConfig {
    pub samples: usize,
    /// Defaults to `0.75 √n`.
    pub kernel_width: Option<f64>,
}

impl LimeConfig {
    pub const DEFAULT_SAMPLES: usize = 5000;
}

impl Default for LimeConfig {
    fn default() -> Self {
        Self {
            samples: Self::DEFAULT_SAMPLES,
            kernel_width: None,
        }
    }
}

pub fn lime_attribution(
    model: &ModelHandle,
    x: &Point,
    x_ref: &Point,
    samples: usize,
    kernel_width: Option<f64>,
    seed: u64,
) -> Result<AttributionVector> {
    let n = check_pair(x, x_ref)?;
    if samples < n + 2 {
        return Err(Error::invalid(format!(
            "LIME needs at least n + 2 = {} samples, got {samples}",
            n + 2
        )));
    }
    let width = kernel_width.unwrap_or(0.75 * (n as f64).sqrt());
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::invalid(format!("LIME kernel width must be positive, got {width}")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut masks: Vec<Vec<bool>> = Vec::with_capacity(samples);
    masks.push(vec![true; n]);
    for _ in 1..samples {
        masks.push((0..n).map(|_| rng.random::<bool>()).collect());
    }
    let points: Vec<Point> = masks
        .iter()
        .map(|z| {
            z.iter()
                .enumerate()
                .map(|(j, &keep)| if keep { x[j] } else { x_ref[j] })
                .collect::<Vec<_>>()
                .into()
        })
        .collect();
    let y = model.predict(&points)?;

    // Normal equations for [intercept, z_1..z_n].
    let d = n + 1;
    let mut ata = DMatrix::<f64>::zeros(d, d);
    let mut aty = DVector::<f64>::zeros(d);
    let mut row = vec![0.0; d];
    for (z, &yi) in masks.iter().zip(&y) {
        let h = z.iter().filter(|&&k| !k).count() as f64;
        let w = (-h / (width * width)).exp();
        row[0] = 1.0;
        for (r, &k) in row[1..].iter_mut().zip(z) {
            *r = if k { 1.0 } else { 0.0 };
        }
        for a in 0..d {
            aty[a] += w * row[a] * yi;
            for b in 0..d {
                ata[(a, b)] += w * row[a] * row[b];
            }
        }
    }
    for j in 1..d {
        ata[(j, j)] += RIDGE;
    }
    let coef = ata
        .clone()
        .cholesky()
        .map(|c| c.solve(&aty))
        .ok_or_else(|| Error::Singular("LIME surrogate normal equations are not positive definite".into()))?;

    let scores = coef.iter().skip(1).map(|c| -c).collect();
    let mut v = AttributionVector::new("lime", scores);
    v.metadata.model_evaluations = Some(samples as u64);
    v.metadata.samples = Some(samples);
    v.metadata.seed = Some(seed);
    v.check_finite()
}
