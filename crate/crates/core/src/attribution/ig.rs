//! Integrated gradients, `A_j = (x'_j - x_j) ∫_0^1 ∂_j f(x + t(x' - x)) dt`,
//! by the midpoint rule, with three treatments of binary features.
//!
//! * Casting relaxes binary features to `[0, 1]` and follows the segment.
//! * Interpolating replaces `f` by its multilinear extension `g` over the
//!   binary features that change, which `f` and `g` agree on at every corner.
//! * Jumping moves continuous features along the segment and flips each
//!   changing binary feature at `t = p`, crediting it with the jump in `f`.

use serde::{Deserialize, Serialize};

use super::AttributionVector;
use crate::error::{Error, Result};
use crate::feature_space::{check_pair, FeatureKind, Point};
use crate::model::ModelHandle;

/// Largest number of changing binary features the interpolating scheme accepts.
pub const MAX_INTERPOLATED_BINARY: usize = 20;

/// Upper bound on the points sent to the model in one request.
const BATCH_POINTS: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinaryScheme {
    Casting,
    Interpolating,
    Jumping,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IgConfig {
    pub nodes: usize,
    pub binary_scheme: BinaryScheme,
    pub jump_position: f64,
}

impl IgConfig {
    pub const DEFAULT_NODES: usize = 500;

    pub fn new(binary_scheme: BinaryScheme) -> Self {
        Self {
            nodes: Self::DEFAULT_NODES,
            binary_scheme,
            jump_position: 0.5,
        }
    }

    pub fn with_nodes(mut self, nodes: usize) -> Self {
        self.nodes = nodes;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes == 0 {
            return Err(Error::invalid("integrated gradients needs at least one node"));
        }
        if !(self.jump_position > 0.0 && self.jump_position < 1.0) {
            return Err(Error::invalid(format!(
                "jump position {} must lie strictly between 0 and 1",
                self.jump_position
            )));
        }
        Ok(())
    }
}

impl Default for IgConfig {
    fn default() -> Self {
        Self::new(BinaryScheme::Casting)
    }
}

pub fn ig_attribution(model: &ModelHandle, x: &Point, x_ref: &Point, cfg: &IgConfig) -> Result<AttributionVector> {
    let n = check_pair(x, x_ref)?;
    if n != model.n() {
        return Err(Error::DimensionMismatch {
            expected: model.n(),
            found: n,
        });
    }
    cfg.validate()?;
    let (name, mut v) = match cfg.binary_scheme {
        BinaryScheme::Casting => ("ig:cast", casting(model, x, x_ref, cfg.nodes)?),
        BinaryScheme::Interpolating => ("ig:interp", interpolating(model, x, x_ref, cfg.nodes)?),
        BinaryScheme::Jumping => ("ig:jump", jumping(model, x, x_ref, cfg)?),
    };
    v.method = name.into();
    v.metadata.nodes = Some(cfg.nodes);
    v.check_finite()
}

fn segment_point(x: &Point, x_ref: &Point, t: f64) -> Point {
    x.iter().zip(x_ref.iter()).map(|(a, b)| a + t * (b - a)).collect::<Vec<_>>().into()
}

/// Midpoints of `nodes` equal cells of `[a, b]`.
fn midpoints(a: f64, b: f64, nodes: usize) -> impl Iterator<Item = f64> {
    let h = (b - a) / nodes as f64;
    (0..nodes).map(move |k| a + (k as f64 + 0.5) * h)
}

/// `Σ_k w ∇f(p_k)` over the given points, batched.
fn weighted_gradient_sum(model: &ModelHandle, points: &[Point], w: f64, acc: &mut [f64]) -> Result<u64> {
    for chunk in points.chunks(BATCH_POINTS) {
        let g = model.gradient(chunk)?;
        for row in &g.gradients {
            for (a, gj) in acc.iter_mut().zip(row) {
                *a += w * gj;
            }
        }
    }
    Ok(points.len() as u64)
}

fn casting(model: &ModelHandle, x: &Point, x_ref: &Point, nodes: usize) -> Result<AttributionVector> {
    let n = x.len();
    let points: Vec<Point> = midpoints(0.0, 1.0, nodes).map(|t| segment_point(x, x_ref, t)).collect();
    let mut avg = vec![0.0; n];
    let evals = weighted_gradient_sum(model, &points, 1.0 / nodes as f64, &mut avg)?;
    let scores = (0..n).map(|j| (x_ref[j] - x[j]) * avg[j]).collect();
    let mut v = AttributionVector::new("ig:cast", scores);
    v.metadata.gradient_evaluations = Some(evals);
    Ok(v)
}

/// Multilinear interpolation of `table` (indexed by bitmask over `z`) at `z`.
fn multilinear_value(table: &[f64], z: &[f64]) -> f64 {
    let mut buf = table.to_vec();
    let mut len = buf.len();
    for &zj in z.iter().rev() {
        len /= 2;
        for w in 0..len {
            buf[w] = (1.0 - zj) * buf[w] + zj * buf[w + len];
        }
    }
    buf[0]
}

/// `∂/∂z_k` of the multilinear interpolation of `table` at `z`.
fn multilinear_partial(table: &[f64], z: &[f64], k: usize) -> f64 {
    let bit = 1usize << k;
    let diffs: Vec<f64> = (0..table.len())
        .filter(|w| w & bit == 0)
        .map(|w| table[w | bit] - table[w])
        .collect();
    let rest: Vec<f64> = z.iter().enumerate().filter(|&(j, _)| j != k).map(|(_, &v)| v).collect();
    multilinear_value(&diffs, &rest)
}

fn interpolating(model: &ModelHandle, x: &Point, x_ref: &Point, nodes: usize) -> Result<AttributionVector> {
    let n = x.len();
    let kinds = model.space().kinds();
    let active: Vec<usize> = (0..n)
        .filter(|&j| kinds[j] == FeatureKind::Binary && x[j] != x_ref[j])
        .collect();
    let m = active.len();
    if m > MAX_INTERPOLATED_BINARY {
        return Err(Error::CapExceeded {
            what: "interpolating integrated gradients (changing binary features)",
            n: m,
            cap: MAX_INTERPOLATED_BINARY,
        });
    }
    let has_continuous = (0..n).any(|j| !active.contains(&j) && x[j] != x_ref[j]);
    let corners = 1usize << m;
    let corner_point = |base: &Point, w: usize| -> Point {
        let mut p = base.clone();
        for (i, &j) in active.iter().enumerate() {
            p[j] = ((w >> i) & 1) as f64;
        }
        p
    };

    let mut integral = vec![0.0; n];
    let weight = 1.0 / nodes as f64;
    let mut model_evals = 0u64;
    let mut grad_evals = 0u64;
    let mut fixed_table: Option<Vec<f64>> = None;
    let ts: Vec<f64> = midpoints(0.0, 1.0, nodes).collect();
    let nodes_per_batch = (BATCH_POINTS / corners).max(1);

    for chunk in ts.chunks(nodes_per_batch) {
        let bases: Vec<Point> = chunk.iter().map(|&t| segment_point(x, x_ref, t)).collect();
        // Corner values only move with t when a non-binary-switched coordinate does.
        let tables: Vec<Vec<f64>> = if has_continuous {
            let pts: Vec<Point> = bases.iter().flat_map(|b| (0..corners).map(|w| corner_point(b, w))).collect();
            let vals = model.predict(&pts)?;
            model_evals += pts.len() as u64;
            let grads = model.gradient(&pts)?;
            grad_evals += pts.len() as u64;
            for (b, base) in bases.iter().enumerate() {
                let z: Vec<f64> = active.iter().map(|&j| base[j]).collect();
                for j in (0..n).filter(|j| !active.contains(j)) {
                    let gj: Vec<f64> = (0..corners).map(|w| grads.row(b * corners + w)[j]).collect();
                    integral[j] += weight * multilinear_value(&gj, &z);
                }
            }
            vals.chunks(corners).map(<[f64]>::to_vec).collect()
        } else {
            if fixed_table.is_none() {
                let pts: Vec<Point> = (0..corners).map(|w| corner_point(x, w)).collect();
                fixed_table = Some(model.predict(&pts)?);
                model_evals += corners as u64;
            }
            vec![fixed_table.clone().expect("table filled"); bases.len()]
        };
        for (base, table) in bases.iter().zip(&tables) {
            let z: Vec<f64> = active.iter().map(|&j| base[j]).collect();
            for (i, &j) in active.iter().enumerate() {
                integral[j] += weight * multilinear_partial(table, &z, i);
            }
        }
    }
    let scores = (0..n).map(|j| (x_ref[j] - x[j]) * integral[j]).collect();
    let mut v = AttributionVector::new("ig:interp", scores);
    v.metadata.model_evaluations = Some(model_evals);
    v.metadata.gradient_evaluations = Some(grad_evals);
    Ok(v)
}

fn jumping(model: &ModelHandle, x: &Point, x_ref: &Point, cfg: &IgConfig) -> Result<AttributionVector> {
    let n = x.len();
    let p = cfg.jump_position;
    let kinds = model.space().kinds();
    let jumps: Vec<usize> = (0..n)
        .filter(|&j| kinds[j] == FeatureKind::Binary && x[j] != x_ref[j])
        .collect();
    let set_binary = |mut pt: Point, from: &Point| {
        for j in 0..n {
            if kinds[j] == FeatureKind::Binary {
                pt[j] = from[j];
            }
        }
        pt
    };

    // Split the nodes between the two sides of the jump in proportion to their length.
    let total = cfg.nodes.max(2);
    let before = ((total as f64 * p).round() as usize).clamp(1, total - 1);
    let after = total - before;
    let mut integral = vec![0.0; n];
    let pts_before: Vec<Point> = midpoints(0.0, p, before)
        .map(|t| set_binary(segment_point(x, x_ref, t), x))
        .collect();
    let pts_after: Vec<Point> = midpoints(p, 1.0, after)
        .map(|t| set_binary(segment_point(x, x_ref, t), x_ref))
        .collect();
    let mut grad_evals = weighted_gradient_sum(model, &pts_before, p / before as f64, &mut integral)?;
    grad_evals += weighted_gradient_sum(model, &pts_after, (1.0 - p) / after as f64, &mut integral)?;

    let mut scores: Vec<f64> = (0..n)
        .map(|j| {
            if kinds[j] == FeatureKind::Binary {
                0.0
            } else {
                (x_ref[j] - x[j]) * integral[j]
            }
        })
        .collect();

    let mut path = vec![set_binary(segment_point(x, x_ref, p), x)];
    for &j in &jumps {
        let mut next = path.last().expect("non-empty").clone();
        next[j] = x_ref[j];
        path.push(next);
    }
    let values = model.predict(&path)?;
    for (k, &j) in jumps.iter().enumerate() {
        scores[j] = values[k + 1] - values[k];
    }
    let mut v = AttributionVector::new("ig:jump", scores);
    v.metadata.gradient_evaluations = Some(grad_evals);
    v.metadata.model_evaluations = Some(path.len() as u64);
    Ok(v)
}
