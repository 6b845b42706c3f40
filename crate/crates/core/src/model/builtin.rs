//! Analytic model families with exact gradients.
//!
//! Feature indices in the serialized form are 1-based.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{GradientCapability, Model};
use crate::error::{Error, Result};
use crate::feature_space::{Point, SubsetMask};

const LEAKY_RELU_SLOPE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BuiltinModel {
    Linear(LinearModel),
    MonotoneAdditive(MonotoneAdditiveModel),
    Multilinear(MultilinearModel),
    TabularInterpolant(TabularInterpolantModel),
}

/// `f(x) = intercept + Σ β_j x_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
}

/// Strictly increasing link applied to an additive core.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    Logistic,
    Exp,
    LeakyRelu,
    Identity,
}

impl Link {
    pub fn apply(self, w: f64) -> f64 {
        match self {
            Link::Logistic => 1.0 / (1.0 + (-w).exp()),
            Link::Exp => w.exp(),
            Link::LeakyRelu => {
                if w >= 0.0 {
                    w
                } else {
                    LEAKY_RELU_SLOPE * w
                }
            }
            Link::Identity => w,
        }
    }

    /// Derivative; the leaky ReLU uses its right derivative at 0.
    pub fn derivative(self, w: f64) -> f64 {
        match self {
            Link::Logistic => {
                let s = 1.0 / (1.0 + (-w).exp());
                s * (1.0 - s)
            }
            Link::Exp => w.exp(),
            Link::LeakyRelu => {
                if w >= 0.0 {
                    1.0
                } else {
                    LEAKY_RELU_SLOPE
                }
            }
            Link::Identity => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Link::Logistic => "logistic",
            Link::Exp => "exp",
            Link::LeakyRelu => "leaky-relu",
            Link::Identity => "identity",
        }
    }
}

/// `f(x) = h(γ0 + Σ γ_j x_j)` for a strictly increasing link `h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonotoneAdditiveModel {
    pub link: Link,
    pub intercept: f64,
    pub weights: Vec<f64>,
}

impl MonotoneAdditiveModel {
    fn core(&self, x: &[f64]) -> f64 {
        self.intercept + self.weights.iter().zip(x).map(|(g, v)| g * v).sum::<f64>()
    }
}

/// `f(x) = Σ_u c_u Π_{j∈u} x_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MultilinearRepr", into = "MultilinearRepr")]
pub struct MultilinearModel {
    n: usize,
    coefficients: BTreeMap<SubsetMask, f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MultilinearRepr {
    n: usize,
    terms: Vec<TermRepr>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermRepr {
    /// 1-based feature indices; empty for the constant term.
    features: Vec<usize>,
    coefficient: f64,
}

impl TryFrom<MultilinearRepr> for MultilinearModel {
    type Error = Error;

    fn try_from(repr: MultilinearRepr) -> Result<Self> {
        let mut terms = Vec::with_capacity(repr.terms.len());
        for t in repr.terms {
            let mut idx = Vec::with_capacity(t.features.len());
            for j in t.features {
                if j == 0 || j > repr.n {
                    return Err(Error::invalid(format!(
                        "multilinear term refers to feature {j}, valid range is 1..={}",
                        repr.n
                    )));
                }
                idx.push(j - 1);
            }
            terms.push((SubsetMask::from_indices(&idx), t.coefficient));
        }
        MultilinearModel::new(repr.n, terms)
    }
}

impl From<MultilinearModel> for MultilinearRepr {
    fn from(m: MultilinearModel) -> Self {
        MultilinearRepr {
            n: m.n,
            terms: m
                .coefficients
                .iter()
                .map(|(u, c)| TermRepr {
                    features: u.iter().map(|j| j + 1).collect(),
                    coefficient: *c,
                })
                .collect(),
        }
    }
}

impl MultilinearModel {
    /// Repeated subsets are summed.
    pub fn new(n: usize, terms: impl IntoIterator<Item = (SubsetMask, f64)>) -> Result<Self> {
        if n == 0 || n > 64 {
            return Err(Error::invalid(format!("multilinear model needs 1..=64 features, got {n}")));
        }
        let mut coefficients = BTreeMap::new();
        for (u, c) in terms {
            SubsetMask::new(u.bits(), n)?;
            *coefficients.entry(u).or_insert(0.0) += c;
        }
        Ok(Self { n, coefficients })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn coefficients(&self) -> &BTreeMap<SubsetMask, f64> {
        &self.coefficients
    }

    pub fn coefficient(&self, u: SubsetMask) -> f64 {
        self.coefficients.get(&u).copied().unwrap_or(0.0)
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.coefficients
            .iter()
            .map(|(u, c)| c * u.iter().map(|j| x[j]).product::<f64>())
            .sum()
    }

    fn grad(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.n];
        for (u, c) in &self.coefficients {
            for k in u.iter() {
                let rest: f64 = u.iter().filter(|&j| j != k).map(|j| x[j]).product();
                g[k] += c * rest;
            }
        }
        g
    }
}

/// Polynomial `c0 + c1 x + c2 x² + ...` in one continuous feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdditiveTerm {
    /// 1-based feature index.
    pub feature: usize,
    pub polynomial: Vec<f64>,
}

impl AdditiveTerm {
    fn eval(&self, v: f64) -> f64 {
        self.polynomial.iter().rev().fold(0.0, |acc, c| acc * v + c)
    }

    fn derivative(&self, v: f64) -> f64 {
        self.polynomial
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (k, c)| acc * v + k as f64 * c)
    }
}

/// Multilinear interpolation of a table of values at the `2^m` corners of
/// the binary features, plus an additive polynomial part in the others.
///
/// Corner `k` sets binary feature `binary[i]` to bit `i` of `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TabularInterpolantModel {
    pub n: usize,
    /// 1-based indices of the interpolated binary features.
    pub binary: Vec<usize>,
    pub corner_values: Vec<f64>,
    #[serde(default)]
    pub additive: Vec<AdditiveTerm>,
}

impl TabularInterpolantModel {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("tabular interpolant needs n >= 1"));
        }
        if self.binary.len() > 20 {
            return Err(Error::CapExceeded {
                what: "tabular interpolant binary table",
                n: self.binary.len(),
                cap: 20,
            });
        }
        if self.corner_values.len() != 1usize << self.binary.len() {
            return Err(Error::invalid(format!(
                "tabular interpolant with {} binary features needs {} corner values, got {}",
                self.binary.len(),
                1usize << self.binary.len(),
                self.corner_values.len()
            )));
        }
        let mut used = vec![false; self.n];
        let all = self.binary.iter().chain(self.additive.iter().map(|t| &t.feature));
        for &j in all {
            if j == 0 || j > self.n {
                return Err(Error::invalid(format!("feature index {j} out of range 1..={}", self.n)));
            }
            if used[j - 1] {
                return Err(Error::invalid(format!("feature {j} used twice")));
            }
            used[j - 1] = true;
        }
        Ok(())
    }

    /// Collapses the corner table one binary feature at a time; `skip`
    /// leaves that feature (by position in `binary`) uncollapsed.
    fn interpolate(&self, x: &[f64], skip: Option<usize>) -> Vec<f64> {
        let mut table = self.corner_values.clone();
        // collapse highest positions first so bit i keeps meaning feature binary[i]
        for i in (0..self.binary.len()).rev() {
            if Some(i) == skip {
                continue;
            }
            let t = x[self.binary[i] - 1];
            let stride = 1usize << i;
            let mut next = Vec::with_capacity(table.len() / 2);
            for (k, lo) in table.iter().enumerate() {
                if k & stride == 0 {
                    let hi = table[k | stride];
                    next.push((1.0 - t) * lo + t * hi);
                }
            }
            table = next;
        }
        table
    }

    fn eval(&self, x: &[f64]) -> f64 {
        let g = self.interpolate(x, None)[0];
        g + self.additive.iter().map(|t| t.eval(x[t.feature - 1])).sum::<f64>()
    }

    fn grad(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.n];
        for (i, &j) in self.binary.iter().enumerate() {
            let pair = self.interpolate(x, Some(i));
            g[j - 1] = pair[1] - pair[0];
        }
        for t in &self.additive {
            g[t.feature - 1] += t.derivative(x[t.feature - 1]);
        }
        g
    }
}

impl BuiltinModel {
    pub fn linear(intercept: f64, coefficients: Vec<f64>) -> Self {
        BuiltinModel::Linear(LinearModel {
            intercept,
            coefficients,
        })
    }

    pub fn monotone(link: Link, intercept: f64, weights: Vec<f64>) -> Self {
        BuiltinModel::MonotoneAdditive(MonotoneAdditiveModel {
            link,
            intercept,
            weights,
        })
    }

    pub fn logistic(intercept: f64, weights: Vec<f64>) -> Self {
        Self::monotone(Link::Logistic, intercept, weights)
    }

    pub fn multilinear(
        n: usize,
        terms: impl IntoIterator<Item = (SubsetMask, f64)>,
    ) -> Result<Self> {
        Ok(BuiltinModel::Multilinear(MultilinearModel::new(n, terms)?))
    }

    pub fn tabular(model: TabularInterpolantModel) -> Result<Self> {
        model.validate()?;
        Ok(BuiltinModel::TabularInterpolant(model))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            BuiltinModel::Linear(m) if m.coefficients.is_empty() => {
                Err(Error::invalid("linear model needs at least one coefficient"))
            }
            BuiltinModel::MonotoneAdditive(m) if m.weights.is_empty() => {
                Err(Error::invalid("monotone additive model needs at least one weight"))
            }
            BuiltinModel::TabularInterpolant(m) => m.validate(),
            _ => Ok(()),
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            BuiltinModel::Linear(m) => m.coefficients.len(),
            BuiltinModel::MonotoneAdditive(m) => m.weights.len(),
            BuiltinModel::Multilinear(m) => m.n,
            BuiltinModel::TabularInterpolant(m) => m.n,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            BuiltinModel::Linear(m) => {
                m.intercept + m.coefficients.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
            }
            BuiltinModel::MonotoneAdditive(m) => m.link.apply(m.core(x)),
            BuiltinModel::Multilinear(m) => m.eval(x),
            BuiltinModel::TabularInterpolant(m) => m.eval(x),
        }
    }

    pub fn eval_gradient(&self, x: &[f64]) -> Vec<f64> {
        match self {
            BuiltinModel::Linear(m) => m.coefficients.clone(),
            BuiltinModel::MonotoneAdditive(m) => {
                let d = m.link.derivative(m.core(x));
                m.weights.iter().map(|g| d * g).collect()
            }
            BuiltinModel::Multilinear(m) => m.grad(x),
            BuiltinModel::TabularInterpolant(m) => m.grad(x),
        }
    }
}

impl Model for BuiltinModel {
    fn n_features(&self) -> usize {
        BuiltinModel::n_features(self)
    }

    fn predict(&self, batch: &[Point]) -> Result<Vec<f64>> {
        Ok(batch.iter().map(|x| self.eval(x)).collect())
    }

    fn gradient_capability(&self) -> GradientCapability {
        GradientCapability::Analytic
    }

    fn gradient(&self, batch: &[Point]) -> Result<Vec<Vec<f64>>> {
        Ok(batch.iter().map(|x| self.eval_gradient(x)).collect())
    }
}
