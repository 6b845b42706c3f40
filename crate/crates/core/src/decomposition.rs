//! Anchored decomposition of `f` along a point pair.
//!
//! For a target `x` and reference `x'`, the corner values
//! `g(w) = f(x'_w : x_{-w})` over all `w ⊆ 1:n` are Möbius-transformed into
//! the iterated differences
//!
//! ```text
//! Δ_u = Σ_{v ⊆ u} (-1)^{|u - v|} f(x'_v : x_{-v}),    Δ_∅ = f(x)
//! ```
//!
//! These are the Harsanyi dividends of the hybrid game. The insertion AUC,
//! the deletion AUC, Shapley values and the random-order expectation of the
//! ABC are all linear in them.

use std::io::Write;

use num_rational::Ratio;
use rayon::prelude::*;

use crate::attribution::AttributionVector;
use crate::curve::Ordering;
use crate::error::{Error, Result};
use crate::feature_space::{check_pair, hybrid_unchecked, Point, SubsetMask, MAX_SUBSET_FEATURES};
use crate::model::ModelHandle;

const WARN_ABOVE: usize = 20;
const EVAL_CHUNK: usize = 4096;

/// Values of `f` at every hybrid corner `x'_w : x_{-w}`, indexed by `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct CornerTable {
    n: usize,
    values: Vec<f64>,
}

impl CornerTable {
    /// Evaluates all `2^n` corners; `n` is capped at 30.
    pub fn evaluate(model: &ModelHandle, x: &Point, x_ref: &Point) -> Result<Self> {
        let n = check_pair(x, x_ref)?;
        if n != model.n() {
            return Err(Error::DimensionMismatch {
                expected: model.n(),
                found: n,
            });
        }
        if n > MAX_SUBSET_FEATURES {
            return Err(Error::CapExceeded {
                what: "subset enumeration",
                n,
                cap: MAX_SUBSET_FEATURES,
            });
        }
        if n > WARN_ABOVE {
            log::warn!("evaluating 2^{n} = {} corner points", 1u64 << n);
        }
        let total = 1usize << n;
        let starts: Vec<usize> = (0..total).step_by(EVAL_CHUNK).collect();
        let chunks: Vec<Vec<f64>> = starts
            .par_iter()
            .map(|&start| {
                let end = (start + EVAL_CHUNK).min(total);
                let batch: Vec<Point> = (start..end)
                    .map(|w| hybrid_unchecked(x, x_ref, SubsetMask::from_bits(w as u64)))
                    .collect();
                model.predict(&batch)
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            n,
            values: chunks.into_iter().flatten().collect(),
        })
    }

    pub fn from_values(n: usize, values: Vec<f64>) -> Result<Self> {
        if n > MAX_SUBSET_FEATURES || values.len() != 1usize << n {
            return Err(Error::invalid(format!(
                "corner table for n = {n} needs {} values, got {}",
                1u64 << n.min(63),
                values.len()
            )));
        }
        Ok(Self { n, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn value(&self, w: SubsetMask) -> f64 {
        self.values[w.bits() as usize]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Trajectory `f(x̃^(0)), .., f(x̃^(n))` for an insertion order, by lookup.
    pub fn trajectory(&self, order: &[usize]) -> Vec<f64> {
        let mut w = 0u64;
        let mut out = Vec::with_capacity(order.len() + 1);
        out.push(self.values[0]);
        for &j in order {
            w |= 1u64 << j;
            out.push(self.values[w as usize]);
        }
        out
    }
}

/// The full table of `Δ_u` for one `(f, x, x')` triple.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchoredDecomposition {
    n: usize,
    deltas: Vec<f64>,
    x: Point,
    x_ref: Point,
}

/// `2^n` model evaluations followed by an `O(n 2^n)` Möbius transform.
pub fn decompose(model: &ModelHandle, x: &Point, x_ref: &Point) -> Result<AnchoredDecomposition> {
    let table = CornerTable::evaluate(model, x, x_ref)?;
    Ok(AnchoredDecomposition::from_corners(&table, x.clone(), x_ref.clone()))
}

impl AnchoredDecomposition {
    pub fn from_corners(table: &CornerTable, x: Point, x_ref: Point) -> Self {
        let n = table.n;
        let mut deltas = table.values.clone();
        for bit in 0..n {
            let step = 1usize << bit;
            for w in 0..deltas.len() {
                if w & step != 0 {
                    deltas[w] -= deltas[w ^ step];
                }
            }
        }
        Self { n, deltas, x, x_ref }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn x(&self) -> &Point {
        &self.x
    }

    pub fn x_ref(&self) -> &Point {
        &self.x_ref
    }

    pub fn delta(&self, u: SubsetMask) -> f64 {
        self.deltas[u.bits() as usize]
    }

    /// Dense table indexed by mask bits.
    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    pub fn iter(&self) -> impl Iterator<Item = (SubsetMask, f64)> + '_ {
        self.deltas
            .iter()
            .enumerate()
            .map(|(w, d)| (SubsetMask::from_bits(w as u64), *d))
    }

    pub fn f_x(&self) -> f64 {
        self.deltas[0]
    }

    /// `f(x')`, the sum of all dividends.
    pub fn f_ref(&self) -> f64 {
        self.deltas.iter().sum()
    }

    /// `Σ_{u ⊆ w} Δ_u`, which reproduces `f(x'_w : x_{-w})`.
    pub fn reconstruct(&self, w: SubsetMask) -> f64 {
        let w = w.bits();
        let mut sum = self.deltas[0];
        let mut u = w;
        while u != 0 {
            sum += self.deltas[u as usize];
            u = (u - 1) & w;
        }
        sum
    }

    /// Writes `mask,size,ceiling,delta` rows (1-based subset labels).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["mask", "size", "ceiling", "delta"])?;
        for (u, d) in self.iter() {
            w.write_record([
                u.to_string(),
                u.len().to_string(),
                u.ceiling().to_string(),
                crate::format::fmt_f64(d),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Shapley values as equal shares of the dividends: `φ_j = Σ_{u ∋ j} Δ_u / |u|`.
pub fn shapley_from_dividends(d: &AnchoredDecomposition) -> AttributionVector {
    let mut phi = vec![0.0; d.n];
    for (u, delta) in d.iter().skip(1) {
        let share = delta / u.len() as f64;
        for j in u.iter() {
            phi[j] += share;
        }
    }
    let mut v = AttributionVector::new("shapley", phi);
    v.metadata.model_evaluations = Some(1u64 << d.n);
    v
}

/// 1-based position of each feature in `order`.
fn positions(order: &[usize]) -> Vec<usize> {
    let mut pos = vec![0; order.len()];
    for (k, &j) in order.iter().enumerate() {
        pos[j] = k + 1;
    }
    pos
}

fn check_order(d: &AnchoredDecomposition, order: &Ordering) -> Result<()> {
    if order.len() != d.n {
        return Err(Error::DimensionMismatch {
            expected: d.n,
            found: order.len(),
        });
    }
    Ok(())
}

/// Insertion AUC from the dividends: `Σ_u (n - ⌈π(u)⌉ + 1) Δ_u`, where
/// `⌈π(u)⌉` is the latest insertion step among the members of `u`.
pub fn auc_oracle(d: &AnchoredDecomposition, order: &Ordering) -> Result<f64> {
    check_order(d, order)?;
    let pos = positions(order.perm());
    let n = d.n;
    Ok(d.iter()
        .map(|(u, delta)| {
            let ceil = u.iter().map(|j| pos[j]).max().unwrap_or(0);
            (n + 1 - ceil) as f64 * delta
        })
        .sum())
}

/// Deletion AUC from the dividends for a deletion order (the order in which
/// coordinates are switched to `x'`).
///
/// Writing `π` for the matching insertion order (the reverse), this is
/// `Σ_u ⌊π(u)⌋ Δ_u` with `⌊π(∅)⌋ = n + 1`.
pub fn deletion_auc_oracle(d: &AnchoredDecomposition, deletion_order: &Ordering) -> Result<f64> {
    check_order(d, deletion_order)?;
    let n = d.n;
    let insertion: Vec<usize> = deletion_order.perm().iter().rev().copied().collect();
    let pos = positions(&insertion);
    Ok(d.iter()
        .map(|(u, delta)| {
            let floor = u.iter().map(|j| pos[j]).min().unwrap_or(n + 1);
            floor as f64 * delta
        })
        .sum())
}

/// `E[ABC]` under a uniformly random insertion order:
/// `(n+1)/2 · Σ_{u≠∅} (1 - |u|)/(|u| + 1) · Δ_u`.
pub fn expected_abc_oracle(d: &AnchoredDecomposition) -> f64 {
    let n = d.n as f64;
    let sum: f64 = d
        .iter()
        .skip(1)
        .map(|(u, delta)| {
            let k = u.len() as f64;
            (1.0 - k) / (k + 1.0) * delta
        })
        .sum();
    (n + 1.0) / 2.0 * sum
}

/// Mean of the largest element of a uniformly random `size`-subset of
/// `1:n`, exactly: `size (n + 1) / (size + 1)`.
pub fn expected_ceiling(n: u64, size: u64) -> Result<Ratio<u64>> {
    if size > n {
        return Err(Error::invalid(format!("subset size {size} exceeds n = {n}")));
    }
    Ok(Ratio::new(size * (n + 1), size + 1))
}
