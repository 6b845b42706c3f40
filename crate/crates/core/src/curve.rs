//! Insertion and deletion trajectories and their areas.
//!
//! Both tests walk from `x` to `x'` one coordinate at a time. Insertion
//! switches features in descending attribution order and scores the signed
//! area above the chord, `ABC = AUC - AUL`. Deletion switches them in
//! ascending order and scores the area below the chord, `ABC' = AUL - AUC`.
//! Here `AUC = Σ_{j=0}^{n} f(x̃^(j))` and `AUL = (n+1)/2 · (f(x) + f(x'))`.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::decomposition::CornerTable;
use crate::error::{Error, Result};
use crate::feature_space::{check_pair, Point, MAX_EXHAUSTIVE_ORDER_FEATURES};
use crate::format::fmt_f64;
use crate::model::ModelHandle;

/// Largest `n` for which [`random_order_baseline`] enumerates all orders.
pub const EXHAUSTIVE_BASELINE_MAX: usize = 8;

/// A permutation of the features (0-based internally, 1-based when serialized).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "OrderingRepr", into = "OrderingRepr")]
pub struct Ordering {
    perm: Vec<usize>,
    source: String,
}

#[derive(Serialize, Deserialize)]
struct OrderingRepr {
    perm: Vec<usize>,
    source: String,
}

impl TryFrom<OrderingRepr> for Ordering {
    type Error = Error;
    fn try_from(r: OrderingRepr) -> Result<Self> {
        Ordering::from_one_based(&r.perm, r.source)
    }
}

impl From<Ordering> for OrderingRepr {
    fn from(o: Ordering) -> Self {
        OrderingRepr {
            perm: o.one_based(),
            source: o.source,
        }
    }
}

impl Ordering {
    /// `perm[k]` is the 0-based feature switched at step `k + 1`.
    pub fn new(perm: Vec<usize>, source: impl Into<String>) -> Result<Self> {
        let n = perm.len();
        if n == 0 {
            return Err(Error::invalid("ordering must be non-empty"));
        }
        let mut seen = vec![false; n];
        for &j in &perm {
            if j >= n || seen[j] {
                return Err(Error::invalid(format!(
                    "ordering {:?} is not a permutation of 1..={n}",
                    perm.iter().map(|j| j + 1).collect::<Vec<_>>()
                )));
            }
            seen[j] = true;
        }
        Ok(Self {
            perm,
            source: source.into(),
        })
    }

    pub fn from_one_based(perm: &[usize], source: impl Into<String>) -> Result<Self> {
        if perm.contains(&0) {
            return Err(Error::invalid("1-based ordering contains 0"));
        }
        Self::new(perm.iter().map(|j| j - 1).collect(), source)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            perm: (0..n).collect(),
            source: "identity".into(),
        }
    }

    /// Features by decreasing score; equal scores keep index order.
    pub fn descending(scores: &[f64], source: impl Into<String>) -> Result<Self> {
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::invalid("cannot order non-finite attribution scores"));
        }
        let mut perm: Vec<usize> = (0..scores.len()).collect();
        perm.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
        Self::new(perm, source)
    }

    /// The deletion order for the same scores: exactly the reverse of
    /// [`descending`](Self::descending), so ties run in decreasing index.
    pub fn ascending(scores: &[f64], source: impl Into<String>) -> Result<Self> {
        Ok(Self::descending(scores, source)?.reversed())
    }

    pub fn reversed(&self) -> Self {
        Self {
            perm: self.perm.iter().rev().copied().collect(),
            source: self.source.clone(),
        }
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.perm.iter().map(|j| j + 1).collect()
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveMode {
    Insertion,
    Deletion,
}

impl CurveMode {
    pub fn name(self) -> &'static str {
        match self {
            CurveMode::Insertion => "insertion",
            CurveMode::Deletion => "deletion",
        }
    }
}

impl std::str::FromStr for CurveMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "insertion" => Ok(CurveMode::Insertion),
            "deletion" => Ok(CurveMode::Deletion),
            other => Err(Error::invalid(format!(
                "unknown mode '{other}' (expected insertion or deletion)"
            ))),
        }
    }
}

/// One trajectory and its areas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryReport {
    pub mode: CurveMode,
    /// `f(x̃^(0)) .. f(x̃^(n))`.
    pub values: Vec<f64>,
    pub auc: f64,
    pub aul: f64,
    /// `AUC - AUL` for insertion, `AUL - AUC` for deletion.
    pub abc: f64,
    /// Area of the piecewise-linear curve; differs from `auc` by an
    /// order-independent constant.
    pub trapezoid_auc: f64,
    pub ordering: Ordering,
}

impl TrajectoryReport {
    pub fn from_values(mode: CurveMode, values: Vec<f64>, ordering: Ordering) -> Self {
        let n = values.len() - 1;
        let first = values[0];
        let last = values[n];
        let auc: f64 = values.iter().sum();
        let aul = (n as f64 + 1.0) / 2.0 * (first + last);
        let abc = match mode {
            CurveMode::Insertion => auc - aul,
            CurveMode::Deletion => aul - auc,
        };
        Self {
            mode,
            trapezoid_auc: auc - 0.5 * (first + last),
            values,
            auc,
            aul,
            abc,
            ordering,
        }
    }

    pub fn n(&self) -> usize {
        self.values.len() - 1
    }

    /// ABC per feature, in the units of `f`.
    pub fn abc_per_feature(&self) -> f64 {
        self.abc / self.n() as f64
    }

    /// `step,feature_changed,value`; step 0 has no feature.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["step", "feature_changed", "value"])?;
        for (step, v) in self.values.iter().enumerate() {
            let feature = if step == 0 {
                String::new()
            } else {
                (self.ordering.perm()[step - 1] + 1).to_string()
            };
            w.write_record([step.to_string(), feature, fmt_f64(*v)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Points `x̃^(0) = x, .., x̃^(n) = x'` along an order.
pub fn trajectory_points(x: &Point, x_ref: &Point, order: &Ordering) -> Result<Vec<Point>> {
    let n = check_pair(x, x_ref)?;
    if order.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: order.len(),
        });
    }
    let mut current = x.clone();
    let mut pts = Vec::with_capacity(n + 1);
    pts.push(current.clone());
    for &j in order.perm() {
        current[j] = x_ref[j];
        pts.push(current.clone());
    }
    Ok(pts)
}

fn curve(
    mode: CurveMode,
    model: &ModelHandle,
    x: &Point,
    x_ref: &Point,
    order: &Ordering,
) -> Result<TrajectoryReport> {
    let pts = trajectory_points(x, x_ref, order)?;
    let values = model.predict(&pts)?;
    Ok(TrajectoryReport::from_values(mode, values, order.clone()))
}

/// Insertion test along `order` (features switched first to last).
pub fn insertion_curve(
    model: &ModelHandle,
    x: &Point,
    x_ref: &Point,
    order: &Ordering,
) -> Result<TrajectoryReport> {
    curve(CurveMode::Insertion, model, x, x_ref, order)
}

/// Deletion test along `order` (features switched first to last).
pub fn deletion_curve(
    model: &ModelHandle,
    x: &Point,
    x_ref: &Point,
    order: &Ordering,
) -> Result<TrajectoryReport> {
    curve(CurveMode::Deletion, model, x, x_ref, order)
}

pub fn run_curve(
    mode: CurveMode,
    model: &ModelHandle,
    x: &Point,
    x_ref: &Point,
    order: &Ordering,
) -> Result<TrajectoryReport> {
    curve(mode, model, x, x_ref, order)
}

/// Means of the areas under random orders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomBaseline {
    /// Mean insertion ABC.
    pub mean_abc_ins: f64,
    /// Mean deletion ABC', each deletion along the reverse of an insertion order.
    pub mean_abc_del: f64,
    /// Mean of `ABC + ABC'` over the same orders.
    pub mean_sum: f64,
    pub orderings: usize,
    pub exhaustive: bool,
}

/// Rearranges `perm` into the next permutation in lexicographic order;
/// returns `false` (leaving it sorted ascending) after the last one.
pub fn next_permutation(perm: &mut [usize]) -> bool {
    let n = perm.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && perm[i - 1] >= perm[i] {
        i -= 1;
    }
    if i == 0 {
        perm.reverse();
        return false;
    }
    let mut k = n - 1;
    while perm[k] <= perm[i - 1] {
        k -= 1;
    }
    perm.swap(i - 1, k);
    perm[i..].reverse();
    true
}

fn areas(values: &[f64]) -> (f64, f64) {
    let n = values.len() - 1;
    let auc: f64 = values.iter().sum();
    let aul = (n as f64 + 1.0) / 2.0 * (values[0] + values[n]);
    (auc, aul)
}

/// `count` uniform random orders, reproducible from `seed`.
pub fn random_orderings(n: usize, count: usize, seed: u64) -> Result<Vec<Ordering>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|k| {
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            Ordering::new(perm, format!("random-{}", k + 1))
        })
        .collect()
}

/// Averages insertion ABC, deletion ABC' and their sum over random orders.
///
/// For `n <= 8` every one of the `n!` orders is used and `trials`/`seed`
/// are ignored; otherwise `trials` seeded uniform orders are drawn.
pub fn random_order_baseline(
    model: &ModelHandle,
    x: &Point,
    x_ref: &Point,
    trials: usize,
    seed: u64,
) -> Result<RandomBaseline> {
    let n = check_pair(x, x_ref)?;
    if n <= EXHAUSTIVE_BASELINE_MAX {
        let table = CornerTable::evaluate(model, x, x_ref)?;
        let (mut ins, mut del, mut count) = (0.0, 0.0, 0usize);
        let mut perm: Vec<usize> = (0..n).collect();
        let mut reversed = vec![0; n];
        loop {
            let (auc, aul) = areas(&table.trajectory(&perm));
            for (r, p) in reversed.iter_mut().zip(perm.iter().rev()) {
                *r = *p;
            }
            let (auc_del, _) = areas(&table.trajectory(&reversed));
            ins += auc - aul;
            del += aul - auc_del;
            count += 1;
            if !next_permutation(&mut perm) {
                break;
            }
        }
        let c = count as f64;
        return Ok(RandomBaseline {
            mean_abc_ins: ins / c,
            mean_abc_del: del / c,
            mean_sum: (ins + del) / c,
            orderings: count,
            exhaustive: true,
        });
    }
    if trials == 0 {
        return Err(Error::invalid("random baseline needs at least one trial"));
    }
    let (mut ins, mut del) = (0.0, 0.0);
    for order in random_orderings(n, trials, seed)? {
        let a = insertion_curve(model, x, x_ref, &order)?;
        let b = deletion_curve(model, x, x_ref, &order.reversed())?;
        ins += a.abc;
        del += b.abc;
    }
    let c = trials as f64;
    Ok(RandomBaseline {
        mean_abc_ins: ins / c,
        mean_abc_del: del / c,
        mean_sum: (ins + del) / c,
        orderings: trials,
        exhaustive: false,
    })
}

/// Exhaustive search for the order with the largest insertion AUC, or for
/// deletion the smallest AUC (largest ABC'). Ties, up to a relative
/// `1e-12`, go to the lexicographically smallest permutation.
pub fn best_order_exhaustive(
    model: &ModelHandle,
    x: &Point,
    x_ref: &Point,
    mode: CurveMode,
) -> Result<(Ordering, TrajectoryReport)> {
    let n = check_pair(x, x_ref)?;
    if n > MAX_EXHAUSTIVE_ORDER_FEATURES {
        return Err(Error::CapExceeded {
            what: "exhaustive order search",
            n,
            cap: MAX_EXHAUSTIVE_ORDER_FEATURES,
        });
    }
    let table = CornerTable::evaluate(model, x, x_ref)?;
    let sign = match mode {
        CurveMode::Insertion => 1.0,
        CurveMode::Deletion => -1.0,
    };
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best_perm = perm.clone();
    let mut best = sign * table.trajectory(&perm).iter().sum::<f64>();
    while next_permutation(&mut perm) {
        let score = sign * table.trajectory(&perm).iter().sum::<f64>();
        if score > best + 1e-12 * (1.0 + best.abs()) {
            best = score;
            best_perm.clone_from(&perm);
        }
    }
    let order = Ordering::new(best_perm, "exhaustive-best")?;
    let report = TrajectoryReport::from_values(mode, table.trajectory(order.perm()), order.clone());
    Ok((order, report))
}
