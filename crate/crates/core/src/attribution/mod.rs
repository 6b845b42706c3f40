//! Attribution methods.
//!
//! Every method returns an [`AttributionVector`] oriented so that a large
//! score means switching that coordinate from `x` to `x'` raises `f`; the
//! insertion test sorts by descending score. Methods that satisfy
//! efficiency sum to `f(x') - f(x)`.

mod gradient;
mod ig;
mod kernel_shap;
mod lime;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use gradient::{input_x_gradient, random_attribution, vanilla_grad, BINARY_ZERO_REPLACEMENT};
pub use ig::{ig_attribution, BinaryScheme, IgConfig, MAX_INTERPOLATED_BINARY};
pub use kernel_shap::{kernel_shap, KsConfig, KsMode, MAX_EXACT_KS_FEATURES};
pub use lime::{lime_attribution, LimeConfig};

use crate::curve::Ordering;
use crate::decomposition::{decompose, shapley_from_dividends};
use crate::error::{Error, Result};
use crate::feature_space::Point;
use crate::model::ModelHandle;

/// Bookkeeping attached to an attribution.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AttributionMetadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_evaluations: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gradient_evaluations: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Per-feature scores from one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionVector {
    pub method: String,
    pub scores: Vec<f64>,
    #[serde(default)]
    pub metadata: AttributionMetadata,
}

impl AttributionVector {
    pub fn new(method: impl Into<String>, scores: Vec<f64>) -> Self {
        Self {
            method: method.into(),
            scores,
            metadata: AttributionMetadata::default(),
        }
    }

    pub fn n(&self) -> usize {
        self.scores.len()
    }

    pub fn sum(&self) -> f64 {
        self.scores.iter().sum()
    }

    /// Descending scores, ties by lower index.
    pub fn insertion_order(&self) -> Result<Ordering> {
        Ordering::descending(&self.scores, self.method.clone())
    }

    /// The reverse of [`insertion_order`](Self::insertion_order).
    pub fn deletion_order(&self) -> Result<Ordering> {
        Ordering::ascending(&self.scores, self.method.clone())
    }

    pub(crate) fn check_finite(self) -> Result<Self> {
        if let Some(j) = self.scores.iter().position(|s| !s.is_finite()) {
            return Err(Error::Model(format!(
                "{} produced a non-finite score for feature {}",
                self.method,
                j + 1
            )));
        }
        Ok(self)
    }
}

/// A method together with its settings, written as `name[:option...]`.
///
/// ```text
/// shapley                      exact, from all 2^n corners
/// ks:exact | ks:sampled[:samples=N]
/// ig:cast | ig:interp | ig:jump[:p=0.5]   all accept :nodes=N
/// vg | ixg | random
/// lime[:samples=N][:width=W]
/// ```
#[derive(Debug, Clone, PartialEq)]
pub enum MethodSpec {
    Shapley,
    KernelShap(KsConfig),
    IntegratedGradients(IgConfig),
    VanillaGrad,
    InputTimesGradient,
    Lime(LimeConfig),
    Random,
}

impl MethodSpec {
    /// Short stable label used in tables.
    pub fn label(&self) -> String {
        self.to_string()
    }

    /// Runs the method. `seed` drives every random choice it makes.
    pub fn compute(
        &self,
        model: &ModelHandle,
        x: &Point,
        x_ref: &Point,
        seed: u64,
    ) -> Result<AttributionVector> {
        let mut v = match self {
            MethodSpec::Shapley => shapley_from_dividends(&decompose(model, x, x_ref)?),
            MethodSpec::KernelShap(cfg) => {
                let mut cfg = cfg.clone();
                if let KsMode::Sampled { seed: s, .. } = &mut cfg.mode {
                    *s = seed;
                }
                kernel_shap(model, x, x_ref, &cfg)?
            }
            MethodSpec::IntegratedGradients(cfg) => ig_attribution(model, x, x_ref, cfg)?,
            MethodSpec::VanillaGrad => vanilla_grad(model, x, x_ref)?,
            MethodSpec::InputTimesGradient => input_x_gradient(model, x, x_ref)?,
            MethodSpec::Lime(cfg) => lime_attribution(model, x, x_ref, cfg.samples, cfg.kernel_width, seed)?,
            MethodSpec::Random => random_attribution(x.len(), seed),
        };
        v.method = self.label();
        Ok(v)
    }

    /// Whether the method needs the model's gradient.
    pub fn uses_gradient(&self) -> bool {
        matches!(
            self,
            MethodSpec::IntegratedGradients(_) | MethodSpec::VanillaGrad | MethodSpec::InputTimesGradient
        )
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MethodSpec::Shapley => write!(f, "shapley"),
            MethodSpec::KernelShap(c) => match c.mode {
                KsMode::Exact => write!(f, "ks:exact"),
                KsMode::Sampled { samples, .. } if samples == KsConfig::DEFAULT_SAMPLES => write!(f, "ks:sampled"),
                KsMode::Sampled { samples, .. } => write!(f, "ks:sampled:samples={samples}"),
            },
            MethodSpec::IntegratedGradients(c) => {
                let scheme = match c.binary_scheme {
                    BinaryScheme::Casting => "cast",
                    BinaryScheme::Interpolating => "interp",
                    BinaryScheme::Jumping => "jump",
                };
                write!(f, "ig:{scheme}")?;
                if c.nodes != IgConfig::DEFAULT_NODES {
                    write!(f, ":nodes={}", c.nodes)?;
                }
                if c.binary_scheme == BinaryScheme::Jumping && c.jump_position != 0.5 {
                    write!(f, ":p={}", c.jump_position)?;
                }
                Ok(())
            }
            MethodSpec::VanillaGrad => write!(f, "vg"),
            MethodSpec::InputTimesGradient => write!(f, "ixg"),
            MethodSpec::Lime(c) => {
                write!(f, "lime")?;
                if c.samples != LimeConfig::DEFAULT_SAMPLES {
                    write!(f, ":samples={}", c.samples)?;
                }
                if let Some(w) = c.kernel_width {
                    write!(f, ":width={w}")?;
                }
                Ok(())
            }
            MethodSpec::Random => write!(f, "random"),
        }
    }
}

const METHOD_NAMES: &str = "shapley, ks:exact, ks:sampled, ig:cast, ig:interp, ig:jump, vg, ixg, lime, random";

fn option_value<T: FromStr>(method: &str, key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::invalid(format!("method '{method}': bad value '{value}' for '{key}'")))
}

impl FromStr for MethodSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let mut tokens = s.split(':').map(str::trim);
        let name = tokens.next().unwrap_or_default();
        let mut variant: Option<&str> = None;
        let mut options: Vec<(&str, &str)> = Vec::new();
        for t in tokens {
            match t.split_once('=') {
                Some((k, v)) => options.push((k.trim(), v.trim())),
                None if variant.is_none() => variant = Some(t),
                None => return Err(Error::invalid(format!("method '{s}': unexpected '{t}'"))),
            }
        }
        let unknown = |key: &str| Error::invalid(format!("method '{s}': unknown option '{key}'"));
        let no_variant = |spec: MethodSpec| match variant {
            None => Ok(spec),
            Some(v) => Err(Error::invalid(format!("method '{s}': unexpected variant '{v}'"))),
        };

        match name {
            "shapley" | "vg" | "ixg" | "random" => {
                if let Some((k, _)) = options.first() {
                    return Err(unknown(k));
                }
                no_variant(match name {
                    "shapley" => MethodSpec::Shapley,
                    "vg" => MethodSpec::VanillaGrad,
                    "ixg" => MethodSpec::InputTimesGradient,
                    _ => MethodSpec::Random,
                })
            }
            "ks" => {
                let mut cfg = match variant {
                    Some("exact") | None => KsConfig::exact(),
                    Some("sampled") => KsConfig::sampled(KsConfig::DEFAULT_SAMPLES, 0),
                    Some(v) => {
                        return Err(Error::invalid(format!(
                            "method '{s}': unknown kernel SHAP mode '{v}' (expected exact or sampled)"
                        )))
                    }
                };
                for (k, v) in options {
                    match (k, &mut cfg.mode) {
                        ("samples", KsMode::Sampled { samples, .. }) => *samples = option_value(s, k, v)?,
                        _ => return Err(unknown(k)),
                    }
                }
                cfg.validate()?;
                Ok(MethodSpec::KernelShap(cfg))
            }
            "ig" => {
                let scheme = match variant {
                    Some("cast") | None => BinaryScheme::Casting,
                    Some("interp") => BinaryScheme::Interpolating,
                    Some("jump") => BinaryScheme::Jumping,
                    Some(v) => {
                        return Err(Error::invalid(format!(
                            "method '{s}': unknown binary scheme '{v}' (expected cast, interp or jump)"
                        )))
                    }
                };
                let mut cfg = IgConfig::new(scheme);
                for (k, v) in options {
                    match k {
                        "nodes" => cfg.nodes = option_value(s, k, v)?,
                        "p" if scheme == BinaryScheme::Jumping => cfg.jump_position = option_value(s, k, v)?,
                        _ => return Err(unknown(k)),
                    }
                }
                cfg.validate()?;
                Ok(MethodSpec::IntegratedGradients(cfg))
            }
            "lime" => {
                let mut cfg = LimeConfig::default();
                for (k, v) in options {
                    match k {
                        "samples" => cfg.samples = option_value(s, k, v)?,
                        "width" => cfg.kernel_width = Some(option_value(s, k, v)?),
                        _ => return Err(unknown(k)),
                    }
                }
                no_variant(MethodSpec::Lime(cfg))
            }
            other => Err(Error::invalid(format!(
                "unknown method '{other}' (expected one of {METHOD_NAMES})"
            ))),
        }
    }
}

impl Serialize for MethodSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MethodSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Parses a comma-separated method list.
pub fn parse_method_list(s: &str) -> Result<Vec<MethodSpec>> {
    let methods: Vec<MethodSpec> = s
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(str::parse)
        .collect::<Result<_>>()?;
    if methods.is_empty() {
        return Err(Error::invalid("method list is empty"));
    }
    Ok(methods)
}
