//! Model and point resolution shared by the single-pair subcommands.

use std::path::{Path, PathBuf};

use abc_bench::data::{load_csv, Schema};
use abc_bench::experiment::load_model_on;
use abc_bench::policy::build_pairs;
use abc_bench::{Dataset, Error, FeatureKind, FeatureSpace, ModelHandle, Point, PolicySpec, Result};
use clap::Args;

/// Where the model and the two points come from.
#[derive(Debug, Args)]
pub struct PairArgs {
    /// Model spec, e.g. `linear:0:1,1`, `multilinear:3:1=3,1+2=-1.5`,
    /// `logistic:0:1,-2`, `@model.json` or `external:<command>`.
    #[arg(long)]
    pub model: String,

    /// Target point as comma-separated coordinates.
    #[arg(long, allow_hyphen_values = true)]
    pub x: Option<String>,

    /// Reference point as comma-separated coordinates.
    #[arg(long, allow_hyphen_values = true)]
    pub xref: Option<String>,

    /// 1-based indices of binary features for inline points.
    #[arg(long, value_delimiter = ',')]
    pub binary: Vec<usize>,

    /// CSV file to take points from (needs --schema).
    #[arg(long, requires = "schema")]
    pub data: Option<PathBuf>,

    /// Column schema (JSON or TOML) for --data.
    #[arg(long, requires = "data")]
    pub schema: Option<PathBuf>,

    /// Keep continuous columns of --data in their original units.
    #[arg(long)]
    pub no_normalize: bool,

    /// 0-based data row used as the target.
    #[arg(long, requires = "data")]
    pub row: Option<usize>,

    /// 0-based data row used as the reference.
    #[arg(long, requires = "data", conflicts_with = "policy")]
    pub ref_row: Option<usize>,

    /// Reference policy over --data: counterfactual[:min_diff=K][:knn=K],
    /// one-to-one[:seed=S] or average.
    #[arg(long, requires = "data")]
    pub policy: Option<String>,
}

pub struct Resolved {
    pub model: ModelHandle,
    pub x: Point,
    pub x_ref: Point,
}

fn usage(key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.into(),
        message: message.into(),
    }
}

fn inline_space(n: usize, binary: &[usize]) -> Result<FeatureSpace> {
    let mut kinds = vec![FeatureKind::Continuous; n];
    for &j in binary {
        if j == 0 || j > n {
            return Err(usage("--binary", format!("feature {j} is outside 1..={n}")));
        }
        kinds[j - 1] = FeatureKind::Binary;
    }
    FeatureSpace::new(kinds)
}

fn data_row(ds: &Dataset, i: usize, flag: &str) -> Result<Point> {
    if i >= ds.len() {
        return Err(usage(flag, format!("row {i} is out of range (dataset has {} rows)", ds.len())));
    }
    Ok(ds.row(i).clone())
}

impl PairArgs {
    pub fn resolve(&self, seed: u64) -> Result<Resolved> {
        let cwd = Path::new("");
        match (&self.data, &self.schema) {
            (Some(data), Some(schema)) => {
                let ds = load_csv(data, &Schema::load(schema)?, !self.no_normalize)?;
                let model = load_model_on(&self.model, ds.space(), cwd)?;
                let (x, target) = match (&self.x, self.row) {
                    (Some(_), Some(_)) => return Err(usage("--x", "give either --x or --row, not both")),
                    (Some(s), None) => (s.parse::<Point>()?, None),
                    (None, Some(i)) => (data_row(&ds, i, "--row")?, Some(i)),
                    (None, None) => return Err(usage("--x", "missing target: give --x or --row")),
                };
                ds.space().validate_relaxed(&x)?;
                let x_ref = match (&self.xref, self.ref_row, &self.policy) {
                    (Some(s), None, None) => s.parse::<Point>()?,
                    (None, Some(j), None) => data_row(&ds, j, "--ref-row")?,
                    (None, None, Some(p)) => {
                        let policy: PolicySpec = p.parse()?;
                        policy.validate(ds.n())?;
                        let Some(target) = target else {
                            return Err(usage("--policy", "a policy needs the target given by --row"));
                        };
                        let pairs = build_pairs(&ds, &model, &policy, &[target], seed)?;
                        match pairs.pairs.into_iter().next() {
                            Some(p) => p.reference,
                            None => {
                                let why = pairs.skipped.first().map_or("no reference found", |s| s.1.as_str());
                                return Err(Error::Model(format!("policy {policy} gave no reference: {why}")));
                            }
                        }
                    }
                    (None, None, None) => {
                        return Err(usage("--xref", "missing reference: give --xref, --ref-row or --policy"))
                    }
                    _ => return Err(usage("--xref", "give only one of --xref, --ref-row, --policy")),
                };
                Ok(Resolved { model, x, x_ref })
            }
            _ => {
                let Some(x) = &self.x else {
                    return Err(usage("--x", "missing target point --x"));
                };
                let Some(xr) = &self.xref else {
                    return Err(usage(
                        "--xref",
                        "missing reference point --xref (or use --data with --ref-row or --policy)",
                    ));
                };
                let x: Point = x.parse()?;
                let x_ref: Point = xr.parse()?;
                if x.len() != x_ref.len() {
                    return Err(Error::DimensionMismatch {
                        expected: x.len(),
                        found: x_ref.len(),
                    });
                }
                let space = inline_space(x.len(), &self.binary)?;
                space.validate_relaxed(&x)?;
                space.validate_relaxed(&x_ref)?;
                let model = load_model_on(&self.model, &space, cwd)?;
                Ok(Resolved { model, x, x_ref })
            }
        }
    }
}
