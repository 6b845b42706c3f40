//! Reference-point policies: counterfactual, one-to-one and average.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::feature_space::Point;
use crate::model::ModelHandle;

/// Written as `counterfactual[:min_diff=K][:knn=K]`, `one-to-one[:seed=S]`
/// or `average` in configs and on the command line.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicySpec {
    /// The reference is the held-out row, among the `knn` nearest that
    /// differ from the target in at least `min_diff_features` coordinates,
    /// with the largest `|f(x) - f(x')|`.
    Counterfactual { min_diff_features: usize, knn: usize },
    /// A random perfect matching of the held-out rows, used in both directions.
    OneToOne { seed: Option<u64> },
    /// The mean of the training rows.
    Average,
}

fn default_min_diff() -> usize {
    12
}

fn default_knn() -> usize {
    20
}

pub const POLICY_NAMES: &str = "counterfactual, one-to-one, average";

impl PolicySpec {
    pub fn counterfactual() -> Self {
        PolicySpec::Counterfactual {
            min_diff_features: default_min_diff(),
            knn: default_knn(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PolicySpec::Counterfactual { .. } => "counterfactual",
            PolicySpec::OneToOne { .. } => "one-to-one",
            PolicySpec::Average => "average",
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if let PolicySpec::Counterfactual { min_diff_features, knn } = *self {
            if min_diff_features > n {
                return Err(Error::config(
                    "policy.min_diff_features",
                    format!("{min_diff_features} exceeds the number of features {n}"),
                ));
            }
            if knn == 0 {
                return Err(Error::config("policy.knn", "must be at least 1"));
            }
        }
        Ok(())
    }
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicySpec::Counterfactual { min_diff_features, knn } => {
                write!(f, "counterfactual:min_diff={min_diff_features}:knn={knn}")
            }
            PolicySpec::OneToOne { seed: Some(s) } => write!(f, "one-to-one:seed={s}"),
            PolicySpec::OneToOne { seed: None } => write!(f, "one-to-one"),
            PolicySpec::Average => write!(f, "average"),
        }
    }
}

impl FromStr for PolicySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.trim().split(':');
        let name = parts.next().unwrap_or_default();
        let mut spec = match name {
            "counterfactual" => PolicySpec::counterfactual(),
            "one-to-one" => PolicySpec::OneToOne { seed: None },
            "average" => PolicySpec::Average,
            other => {
                return Err(Error::config(
                    "policy",
                    format!("unknown policy '{other}' (expected one of {POLICY_NAMES})"),
                ))
            }
        };
        for opt in parts {
            let (k, v) = opt
                .split_once('=')
                .ok_or_else(|| Error::config("policy", format!("option '{opt}' lacks '='")))?;
            let bad = || Error::config(format!("policy.{k}"), format!("bad value '{v}'"));
            match (&mut spec, k) {
                (PolicySpec::Counterfactual { min_diff_features, .. }, "min_diff") => {
                    *min_diff_features = v.parse().map_err(|_| bad())?
                }
                (PolicySpec::Counterfactual { knn, .. }, "knn") => *knn = v.parse().map_err(|_| bad())?,
                (PolicySpec::OneToOne { seed }, "seed") => *seed = Some(v.parse().map_err(|_| bad())?),
                _ => return Err(Error::config(format!("policy.{k}"), "unknown option")),
            }
        }
        Ok(spec)
    }
}

impl Serialize for PolicySpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PolicySpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A target row and its reference point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pair {
    pub target: usize,
    pub reference: Point,
    /// `None` for a synthetic reference such as the average.
    pub reference_index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSet {
    pub pairs: Vec<Pair>,
    pub policy: PolicySpec,
    /// Targets for which no reference could be chosen, with the reason.
    pub skipped: Vec<(usize, String)>,
}

impl PairSet {
    /// `target_row,reference_row,policy`, rows 0-based, `synthetic` for
    /// computed references.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["target_row", "reference_row", "policy"])?;
        for p in &self.pairs {
            let r = p
                .reference_index
                .map_or_else(|| "synthetic".to_string(), |i| i.to_string());
            w.write_record([p.target.to_string(), r, self.policy.name().to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Chooses the counterfactual reference for `target` among the held-out rows.
pub fn select_counterfactual(
    ds: &Dataset,
    model: &ModelHandle,
    target: usize,
    min_diff_features: usize,
    knn: usize,
) -> Result<(usize, Point)> {
    if target >= ds.len() {
        return Err(Error::invalid(format!("target row {target} out of range")));
    }
    PolicySpec::Counterfactual { min_diff_features, knn }.validate(ds.n())?;
    let x = ds.row(target);
    let mut candidates: Vec<(f64, usize)> = ds
        .test_indices()
        .into_iter()
        .filter(|&i| i != target && ds.row(i).count_differences(x) >= min_diff_features)
        .map(|i| (ds.row(i).euclidean_distance(x), i))
        .collect();
    if candidates.is_empty() {
        return Err(Error::NoCounterfactual {
            target,
            reason: format!("no held-out row differs in at least {min_diff_features} features"),
        });
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    candidates.truncate(knn);
    let mut pool: Vec<Point> = vec![x.clone()];
    pool.extend(candidates.iter().map(|&(_, i)| ds.row(i).clone()));
    let f = model.predict(&pool)?;
    let mut best = (f64::NEG_INFINITY, usize::MAX);
    for (k, &(_, i)) in candidates.iter().enumerate() {
        let gap = (f[k + 1] - f[0]).abs();
        if gap > best.0 || (gap == best.0 && i < best.1) {
            best = (gap, i);
        }
    }
    Ok((best.1, ds.row(best.1).clone()))
}

/// A uniform random perfect matching of `pool`; each matched pair gives
/// two instances, `a -> b` and `b -> a`. An odd pool leaves one row out.
pub fn pair_one_to_one(ds: &Dataset, pool: &[usize], seed: u64) -> Result<PairSet> {
    if pool.len() < 2 {
        return Err(Error::invalid("one-to-one pairing needs at least two rows"));
    }
    let mut rows = pool.to_vec();
    rows.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut pairs = Vec::with_capacity(rows.len());
    let mut skipped = Vec::new();
    for chunk in rows.chunks(2) {
        match *chunk {
            [a, b] => {
                pairs.push(Pair {
                    target: a,
                    reference: ds.row(b).clone(),
                    reference_index: Some(b),
                });
                pairs.push(Pair {
                    target: b,
                    reference: ds.row(a).clone(),
                    reference_index: Some(a),
                });
            }
            [a] => {
                log::info!("one-to-one pairing leaves row {a} unpaired");
                skipped.push((a, "odd pool: left unpaired".to_string()));
            }
            _ => unreachable!("chunks of two"),
        }
    }
    Ok(PairSet {
        pairs,
        policy: PolicySpec::OneToOne { seed: Some(seed) },
        skipped,
    })
}

/// Per-dimension mean of the training rows (all rows without a split),
/// binary dimensions included.
pub fn average_reference(ds: &Dataset) -> Point {
    let pool = ds.train_indices();
    let mut mean = vec![0.0; ds.n()];
    for &i in &pool {
        for (m, v) in mean.iter_mut().zip(ds.row(i).iter()) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= pool.len() as f64;
    }
    Point::new(mean)
}

/// Builds the pairs for `targets` (held-out rows) under `policy`.
/// Counterfactual targets without a valid reference are skipped and listed.
pub fn build_pairs(ds: &Dataset, model: &ModelHandle, policy: &PolicySpec, targets: &[usize], seed: u64) -> Result<PairSet> {
    policy.validate(ds.n())?;
    match *policy {
        PolicySpec::Counterfactual { min_diff_features, knn } => {
            let mut pairs = Vec::new();
            let mut skipped = Vec::new();
            for &t in targets {
                match select_counterfactual(ds, model, t, min_diff_features, knn) {
                    Ok((i, p)) => pairs.push(Pair {
                        target: t,
                        reference: p,
                        reference_index: Some(i),
                    }),
                    Err(e @ Error::NoCounterfactual { .. }) => skipped.push((t, e.to_string())),
                    Err(e) => return Err(e),
                }
            }
            Ok(PairSet {
                pairs,
                policy: policy.clone(),
                skipped,
            })
        }
        PolicySpec::OneToOne { seed: s } => pair_one_to_one(ds, targets, s.unwrap_or(seed)),
        PolicySpec::Average => {
            let r = average_reference(ds);
            Ok(PairSet {
                pairs: targets
                    .iter()
                    .map(|&t| Pair {
                        target: t,
                        reference: r.clone(),
                        reference_index: None,
                    })
                    .collect(),
                policy: policy.clone(),
                skipped: Vec::new(),
            })
        }
    }
}
