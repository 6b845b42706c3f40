//! Compact textual model specifications.
//!
//! ```text
//! linear:<intercept>:<b1>,<b2>,...
//! logistic:<g0>:<g1>,...        (also exp, leaky-relu, identity)
//! multilinear:<n>:<term>,...    term = 1+2=-1.5, constant term = 0=<c>
//! random-multilinear:<n>:<seed> seeded multilinear with interactions up to order 3
//! @path/to/model.json           serialized BuiltinModel (.json or .toml)
//! {"type": "linear", ...}       inline JSON
//! external:<shell command>
//! ```

use std::path::Path;
use std::str::FromStr;

use super::builtin::{BuiltinModel, Link};
use crate::error::{Error, Result};
use crate::feature_space::SubsetMask;

/// A parsed `--model` argument.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Builtin(BuiltinModel),
    External(String),
}

pub fn parse_model_spec(spec: &str) -> Result<ModelSpec> {
    let spec = spec.trim();
    if let Some(cmd) = spec.strip_prefix("external:") {
        if cmd.trim().is_empty() {
            return Err(Error::invalid("external model spec needs a command"));
        }
        return Ok(ModelSpec::External(cmd.trim().to_string()));
    }
    Ok(ModelSpec::Builtin(spec.parse()?))
}

/// Reads a builtin model from a JSON or TOML file.
pub fn load_builtin(path: &Path) -> Result<BuiltinModel> {
    let text = std::fs::read_to_string(path)?;
    let model: BuiltinModel = if path.extension().is_some_and(|e| e == "toml") {
        toml::from_str(&text).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?
    } else {
        serde_json::from_str(&text)?
    };
    model.validate()?;
    Ok(model)
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::invalid(format!("cannot parse {what} '{s}' as a number")))
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| parse_f64(t, "coefficient"))
        .collect()
}

impl FromStr for BuiltinModel {
    type Err = Error;

    fn from_str(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        if let Some(path) = spec.strip_prefix('@') {
            return load_builtin(Path::new(path));
        }
        if spec.starts_with('{') {
            let model: BuiltinModel = serde_json::from_str(spec)?;
            model.validate()?;
            return Ok(model);
        }
        let mut parts = spec.splitn(3, ':');
        let kind = parts.next().unwrap_or_default();
        let (Some(first), Some(rest)) = (parts.next(), parts.next()) else {
            return Err(Error::invalid(format!(
                "model spec '{spec}' should look like <kind>:<param>:<list>"
            )));
        };
        let model = match kind {
            "linear" => BuiltinModel::linear(parse_f64(first, "intercept")?, parse_list(rest)?),
            "logistic" | "exp" | "leaky-relu" | "identity" => {
                let link = match kind {
                    "logistic" => Link::Logistic,
                    "exp" => Link::Exp,
                    "leaky-relu" => Link::LeakyRelu,
                    _ => Link::Identity,
                };
                BuiltinModel::monotone(link, parse_f64(first, "intercept")?, parse_list(rest)?)
            }
            "multilinear" => {
                let n: usize = first
                    .trim()
                    .parse()
                    .map_err(|_| Error::invalid(format!("bad feature count '{first}'")))?;
                let mut terms = Vec::new();
                for term in rest.split(',').filter(|t| !t.trim().is_empty()) {
                    let (set, coef) = term
                        .split_once('=')
                        .ok_or_else(|| Error::invalid(format!("term '{term}' lacks '='")))?;
                    let mut idx = Vec::new();
                    for j in set.split('+') {
                        let j: usize = j
                            .trim()
                            .parse()
                            .map_err(|_| Error::invalid(format!("bad feature index in '{term}'")))?;
                        if j > n {
                            return Err(Error::invalid(format!(
                                "term '{term}' refers to feature {j} > n = {n}"
                            )));
                        }
                        if j > 0 {
                            idx.push(j - 1);
                        }
                    }
                    terms.push((SubsetMask::from_indices(&idx), parse_f64(coef, "coefficient")?));
                }
                BuiltinModel::multilinear(n, terms)?
            }
            "random-multilinear" => {
                let n: usize = first
                    .trim()
                    .parse()
                    .map_err(|_| Error::invalid(format!("bad feature count '{first}'")))?;
                let seed: u64 = rest
                    .trim()
                    .parse()
                    .map_err(|_| Error::invalid(format!("bad seed '{rest}'")))?;
                crate::synthetic::random_multilinear(n, 3, seed)?
            }
            other => {
                return Err(Error::invalid(format!(
                    "unknown model kind '{other}' (expected linear, logistic, exp, leaky-relu, \
                     identity, multilinear, random-multilinear, external, @file or inline JSON)"
                )))
            }
        };
        model.validate()?;
        Ok(model)
    }
}
