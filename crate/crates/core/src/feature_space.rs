//! Feature domains, points, subset masks and hybrid-point assembly.
//!
//! Features are indexed from 0 inside the crate. Anything written for
//! humans (CSV dumps, CLI tables, subset labels) uses 1-based indices.

use std::fmt;
use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest `n` accepted by operations that enumerate all `2^n` subsets.
pub const MAX_SUBSET_FEATURES: usize = 30;

/// Largest `n` accepted by operations that enumerate all `n!` orderings.
pub const MAX_EXHAUSTIVE_ORDER_FEATURES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpace {
    kinds: Vec<FeatureKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    names: Option<Vec<String>>,
}

impl FeatureSpace {
    pub fn new(kinds: Vec<FeatureKind>) -> Result<Self> {
        if kinds.is_empty() {
            return Err(Error::invalid("feature space must have at least one dimension"));
        }
        Ok(Self { kinds, names: None })
    }

    pub fn continuous(n: usize) -> Result<Self> {
        Self::new(vec![FeatureKind::Continuous; n])
    }

    pub fn binary(n: usize) -> Result<Self> {
        Self::new(vec![FeatureKind::Binary; n])
    }

    /// Attaches per-dimension labels; they must be unique and one per dimension.
    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.kinds.len() {
            return Err(Error::DimensionMismatch {
                expected: self.kinds.len(),
                found: names.len(),
            });
        }
        let mut seen = std::collections::HashSet::new();
        for name in &names {
            if !seen.insert(name.as_str()) {
                return Err(Error::invalid(format!("duplicate feature name '{name}'")));
            }
        }
        self.names = Some(names);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.kinds.len()
    }

    pub fn kinds(&self) -> &[FeatureKind] {
        &self.kinds
    }

    pub fn kind(&self, j: usize) -> FeatureKind {
        self.kinds[j]
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    /// Display label for feature `j` (0-based): its name, or its 1-based index.
    pub fn label(&self, j: usize) -> String {
        match &self.names {
            Some(names) => names[j].clone(),
            None => format!("x{}", j + 1),
        }
    }

    pub fn binary_indices(&self) -> Vec<usize> {
        self.kinds
            .iter()
            .enumerate()
            .filter(|(_, k)| **k == FeatureKind::Binary)
            .map(|(j, _)| j)
            .collect()
    }

    pub fn continuous_indices(&self) -> Vec<usize> {
        self.kinds
            .iter()
            .enumerate()
            .filter(|(_, k)| **k == FeatureKind::Continuous)
            .map(|(j, _)| j)
            .collect()
    }

    /// Checks length and finiteness only; binary coordinates may be fractional.
    pub fn validate_relaxed(&self, x: &Point) -> Result<()> {
        if x.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                found: x.len(),
            });
        }
        if let Some(j) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidPoint(format!(
                "coordinate {} is not finite ({})",
                j + 1,
                x[j]
            )));
        }
        Ok(())
    }

    /// Like [`validate_relaxed`](Self::validate_relaxed) but also requires
    /// binary coordinates to be exactly 0 or 1.
    pub fn validate(&self, x: &Point) -> Result<()> {
        self.validate_relaxed(x)?;
        for (j, kind) in self.kinds.iter().enumerate() {
            if *kind == FeatureKind::Binary && x[j] != 0.0 && x[j] != 1.0 {
                return Err(Error::InvalidPoint(format!(
                    "binary coordinate {} has value {}",
                    j + 1,
                    x[j]
                )));
            }
        }
        Ok(())
    }
}

/// A feature vector.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(values: Vec<f64>) -> Self {
        Point(values)
    }

    pub fn zeros(n: usize) -> Self {
        Point(vec![0.0; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Number of coordinates where the two points differ (exact inequality).
    pub fn count_differences(&self, other: &Point) -> usize {
        self.0
            .iter()
            .zip(other.0.iter())
            .filter(|(a, b)| a != b)
            .count()
    }

    pub fn euclidean_distance(&self, other: &Point) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

impl From<Vec<f64>> for Point {
    fn from(v: Vec<f64>) -> Self {
        Point(v)
    }
}

impl From<&[f64]> for Point {
    fn from(v: &[f64]) -> Self {
        Point(v.to_vec())
    }
}

impl<const N: usize> From<[f64; N]> for Point {
    fn from(v: [f64; N]) -> Self {
        Point(v.to_vec())
    }
}

/// Comma-separated coordinates, e.g. `0,1.5,-2`.
impl std::str::FromStr for Point {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let values = s
            .split(',')
            .map(|t| {
                let t = t.trim();
                t.parse::<f64>()
                    .map_err(|_| Error::invalid(format!("cannot parse coordinate '{t}' in '{s}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite coordinate in '{s}'")));
        }
        Ok(Point(values))
    }
}

impl Deref for Point {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Point {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

/// A subset `u ⊆ {0, .., n-1}` stored as a bitmask (bit `j` ↔ feature `j`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SubsetMask(u64);

impl SubsetMask {
    pub const EMPTY: SubsetMask = SubsetMask(0);

    /// Builds a mask and checks that no bit at or above `n` is set.
    pub fn new(bits: u64, n: usize) -> Result<Self> {
        if n > 64 {
            return Err(Error::CapExceeded {
                what: "subset masks",
                n,
                cap: 64,
            });
        }
        if n < 64 && bits >> n != 0 {
            return Err(Error::invalid(format!(
                "subset mask {bits:#b} has bits above n = {n}"
            )));
        }
        Ok(SubsetMask(bits))
    }

    pub const fn from_bits(bits: u64) -> Self {
        SubsetMask(bits)
    }

    pub fn full(n: usize) -> Self {
        assert!(n <= 64, "subset masks hold at most 64 features");
        if n == 64 {
            SubsetMask(u64::MAX)
        } else {
            SubsetMask((1u64 << n) - 1)
        }
    }

    pub fn singleton(j: usize) -> Self {
        SubsetMask(1u64 << j)
    }

    /// From 0-based indices.
    pub fn from_indices(indices: &[usize]) -> Self {
        SubsetMask(indices.iter().fold(0u64, |acc, &j| acc | (1u64 << j)))
    }

    pub const fn bits(self) -> u64 {
        self.0
    }

    pub fn contains(self, j: usize) -> bool {
        j < 64 && self.0 >> j & 1 == 1
    }

    pub fn insert(self, j: usize) -> Self {
        SubsetMask(self.0 | (1u64 << j))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn union(self, other: SubsetMask) -> Self {
        SubsetMask(self.0 | other.0)
    }

    pub fn intersection(self, other: SubsetMask) -> Self {
        SubsetMask(self.0 & other.0)
    }

    pub fn is_subset_of(self, other: SubsetMask) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_disjoint(self, other: SubsetMask) -> bool {
        self.0 & other.0 == 0
    }

    /// 0-based members in increasing order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut rest = self.0;
        std::iter::from_fn(move || {
            if rest == 0 {
                None
            } else {
                let j = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(j)
            }
        })
    }

    /// Largest member as a 1-based index; 0 for the empty set.
    pub fn ceiling(self) -> usize {
        if self.0 == 0 {
            0
        } else {
            64 - self.0.leading_zeros() as usize
        }
    }

    /// Smallest member as a 1-based index; `n + 1` for the empty set.
    pub fn floor(self, n: usize) -> usize {
        if self.0 == 0 {
            n + 1
        } else {
            self.0.trailing_zeros() as usize + 1
        }
    }
}

impl fmt::Display for SubsetMask {
    /// 1-based set notation, e.g. `{1,3}`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, j) in self.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}", j + 1)?;
        }
        f.write_str("}")
    }
}

/// Returns the point whose coordinate `j` comes from `x_ref` when `j ∈ u`
/// and from `x` otherwise, i.e. `x'_u : x_{-u}`.
pub fn assemble_hybrid(x: &Point, x_ref: &Point, u: SubsetMask) -> Result<Point> {
    if x.len() != x_ref.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: x_ref.len(),
        });
    }
    if x.len() < 64 && u.bits() >> x.len() != 0 {
        return Err(Error::invalid(format!(
            "subset {u} refers to features beyond n = {}",
            x.len()
        )));
    }
    Ok(hybrid_unchecked(x, x_ref, u))
}

pub(crate) fn hybrid_unchecked(x: &Point, x_ref: &Point, u: SubsetMask) -> Point {
    Point(
        x.iter()
            .zip(x_ref.iter())
            .enumerate()
            .map(|(j, (a, b))| if u.contains(j) { *b } else { *a })
            .collect(),
    )
}

pub(crate) fn check_pair(x: &Point, x_ref: &Point) -> Result<usize> {
    if x.len() != x_ref.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: x_ref.len(),
        });
    }
    if x.is_empty() {
        return Err(Error::invalid("points must have at least one coordinate"));
    }
    Ok(x.len())
}
