//! Multi-method comparisons over many (target, reference) pairs.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attribution::MethodSpec;
use crate::curve::{deletion_curve, insertion_curve, CurveMode, TrajectoryReport};
use crate::data::{load_csv, ColumnSpec, Dataset, Schema};
use crate::error::{Error, Result};
use crate::feature_space::{FeatureKind, FeatureSpace, Point};
use crate::format::fmt_f64;
use crate::model::{parse_model_spec, ModelHandle, ModelSpec};
use crate::policy::{build_pairs, PairSet, PolicySpec};
use crate::stats::{mean, pearson, standard_error};
use crate::synthetic::{linear_regression_data, SyntheticSpec};

/// Where the rows come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetRef {
    Csv {
        path: PathBuf,
        /// JSON or TOML schema file; alternatively give `columns` inline.
        #[serde(default)]
        schema: Option<PathBuf>,
        #[serde(default)]
        columns: Option<Vec<ColumnSpec>>,
        #[serde(default = "yes")]
        normalize: bool,
    },
    Synthetic(SyntheticSpec),
    SyntheticLinear(LinearDataSpec),
}

/// Continuous rows with `y = Σ β_j x_j + noise`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearDataSpec {
    pub rows: usize,
    pub beta: Vec<f64>,
    /// Per-feature standard deviations, all 1 when omitted.
    #[serde(default)]
    pub scales: Option<Vec<f64>>,
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub seed: u64,
}

fn yes() -> bool {
    true
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl DatasetRef {
    /// Loads the data; relative paths are taken from `base`.
    pub fn load(&self, base: &Path) -> Result<Dataset> {
        match self {
            DatasetRef::Csv {
                path,
                schema,
                columns,
                normalize,
            } => {
                let schema = match (schema, columns) {
                    (Some(p), None) => Schema::load(&resolve(base, p))?,
                    (None, Some(c)) => Schema { columns: c.clone() },
                    _ => {
                        return Err(Error::config(
                            "dataset.csv",
                            "give exactly one of 'schema' (a file) or 'columns'",
                        ))
                    }
                };
                load_csv(&resolve(base, path), &schema, *normalize)
            }
            DatasetRef::Synthetic(s) => s.generate(),
            DatasetRef::SyntheticLinear(s) => {
                let scales = s.scales.clone().unwrap_or_else(|| vec![1.0; s.beta.len()]);
                linear_regression_data(s.rows, &s.beta, &scales, s.noise, s.seed)
            }
        }
    }
}

/// Resolves a model spec on the dataset's feature space. A relative
/// `@file` is looked up from `base`.
pub fn load_model(spec: &str, ds: &Dataset, base: &Path) -> Result<ModelHandle> {
    load_model_on(spec, ds.space(), base)
}

/// Resolves a model spec on an explicit feature space.
pub fn load_model_on(spec: &str, space: &FeatureSpace, base: &Path) -> Result<ModelHandle> {
    let spec = match spec.trim().strip_prefix('@') {
        Some(p) => format!("@{}", resolve(base, Path::new(p)).display()),
        None => spec.to_string(),
    };
    let handle = match parse_model_spec(&spec)? {
        ModelSpec::Builtin(m) => {
            if m.n_features() != space.n() {
                return Err(Error::config(
                    "model",
                    format!("model has {} features, data has {}", m.n_features(), space.n()),
                ));
            }
            ModelHandle::builtin_on(m, space.clone())?
        }
        ModelSpec::External(cmd) => ModelHandle::connect_external(&cmd, space.clone())?,
    };
    Ok(handle)
}

/// Reads a TOML (default) or JSON config file.
pub fn read_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    let key = path.display().to_string();
    if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| Error::config(key, e.to_string()))
    } else {
        toml::from_str(&text).map_err(|e| Error::config(key, e.to_string()))
    }
}

fn default_modes() -> Vec<CurveMode> {
    vec![CurveMode::Insertion, CurveMode::Deletion]
}

fn default_test_fraction() -> f64 {
    0.25
}

fn default_policy() -> PolicySpec {
    PolicySpec::counterfactual()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetRef,
    /// A model spec string (see [`parse_model_spec`]).
    pub model: String,
    #[serde(default = "default_policy")]
    pub policy: PolicySpec,
    pub methods: Vec<MethodSpec>,
    #[serde(default = "default_modes")]
    pub modes: Vec<CurveMode>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    /// Caps the number of pairs.
    #[serde(default)]
    pub max_pairs: Option<usize>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub write_curves: bool,
    /// Extra `[a, b]` method-label pairs reported as `a - b`; every
    /// kernel SHAP minus integrated gradients pair is always included.
    #[serde(default)]
    pub differences: Vec<[String; 2]>,
    #[serde(default)]
    pub threads: Option<usize>,
    /// Directory relative paths are resolved from.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let mut cfg: Self = read_config(path)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        if let Some(out) = &cfg.output_dir {
            cfg.output_dir = Some(resolve(&cfg.base_dir, out));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::config("methods", "at least one method is required"));
        }
        if self.modes.is_empty() {
            return Err(Error::config("modes", "at least one mode is required"));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::config("test_fraction", "must lie in (0, 1)"));
        }
        if self.threads == Some(0) {
            return Err(Error::config("threads", "must be at least 1"));
        }
        let labels: Vec<String> = self.methods.iter().map(MethodSpec::label).collect();
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::config("methods", format!("'{l}' is listed twice")));
            }
        }
        for (k, [a, b]) in self.differences.iter().enumerate() {
            for m in [a, b] {
                if !labels.contains(m) {
                    return Err(Error::config(
                        format!("differences[{k}]"),
                        format!("'{m}' is not one of the configured methods"),
                    ));
                }
            }
        }
        Ok(())
    }

    fn difference_pairs(&self) -> Vec<(String, String)> {
        let labels: Vec<String> = self.methods.iter().map(MethodSpec::label).collect();
        let mut out: Vec<(String, String)> = Vec::new();
        for a in labels.iter().filter(|l| l.starts_with("ks")) {
            for b in labels.iter().filter(|l| l.starts_with("ig")) {
                out.push((a.clone(), b.clone()));
            }
        }
        for [a, b] in &self.differences {
            let p = (a.clone(), b.clone());
            if !out.contains(&p) {
                out.push(p);
            }
        }
        out
    }
}

/// Results for one (pair, method).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub pair: usize,
    pub target_row: usize,
    pub reference_row: Option<usize>,
    pub method: String,
    pub f_x: f64,
    pub f_ref: f64,
    pub aul: f64,
    pub auc_ins: Option<f64>,
    pub abc_ins: Option<f64>,
    pub auc_del: Option<f64>,
    pub abc_del: Option<f64>,
    /// 1-based insertion order; the deletion order is its reverse.
    pub insertion_order: Vec<usize>,
    pub differing: usize,
    pub differing_binary: usize,
    pub model_evaluations: Option<u64>,
}

impl PairRecord {
    pub fn abc(&self, mode: CurveMode) -> Option<f64> {
        match mode {
            CurveMode::Insertion => self.abc_ins,
            CurveMode::Deletion => self.abc_del,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub pair: usize,
    pub target_row: usize,
    pub method: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub mode: CurveMode,
    pub method: String,
    pub mean: f64,
    /// Sample standard deviation over `√count`.
    pub standard_error: f64,
    pub count: usize,
    pub failures: usize,
    pub mean_model_evaluations: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifferenceRow {
    pub mode: CurveMode,
    pub minuend: String,
    pub subtrahend: String,
    /// Mean of per-pair differences over pairs where both succeeded.
    pub mean: f64,
    /// Standard error of the per-pair differences.
    pub paired_standard_error: f64,
    /// `√(se_a² + se_b²)` from the two rows, ignoring the pairing.
    pub unpaired_standard_error: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<TableRow>,
    pub differences: Vec<DifferenceRow>,
}

impl ComparisonTable {
    pub fn row(&self, mode: CurveMode, method: &str) -> Option<&TableRow> {
        self.rows.iter().find(|r| r.mode == mode && r.method == method)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodCorrelation {
    pub method: String,
    /// Pearson correlation of insertion ABC and deletion ABC' across pairs.
    pub correlation: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymmetryStats {
    pub policy: String,
    pub pairs: usize,
    /// Mean number of coordinates with `x_j != x'_j`.
    pub mean_differing: f64,
    pub mean_differing_binary: f64,
    pub correlations: Vec<MethodCorrelation>,
}

/// Per-policy diagnostics: coordinate differences per pair and the
/// insertion/deletion correlation of each method.
pub fn asymmetry_stats(records: &[PairRecord], policy: &str) -> Result<AsymmetryStats> {
    if records.is_empty() {
        return Err(Error::invalid("no pair records"));
    }
    let mut seen = std::collections::BTreeMap::new();
    for r in records {
        seen.entry(r.pair).or_insert((r.differing, r.differing_binary));
    }
    let diff: Vec<f64> = seen.values().map(|v| v.0 as f64).collect();
    let diff_bin: Vec<f64> = seen.values().map(|v| v.1 as f64).collect();
    let mut methods: Vec<&str> = Vec::new();
    for r in records {
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
    }
    let correlations = methods
        .iter()
        .map(|m| {
            let (ins, del): (Vec<f64>, Vec<f64>) = records
                .iter()
                .filter(|r| r.method == *m)
                .filter_map(|r| Some((r.abc_ins?, r.abc_del?)))
                .unzip();
            MethodCorrelation {
                method: m.to_string(),
                correlation: if ins.is_empty() { f64::NAN } else { pearson(&ins, &del) },
                count: ins.len(),
            }
        })
        .collect();
    Ok(AsymmetryStats {
        policy: policy.to_string(),
        pairs: seen.len(),
        mean_differing: mean(&diff),
        mean_differing_binary: mean(&diff_bin),
        correlations,
    })
}

#[derive(Debug, Clone)]
pub struct CurveDump {
    pub pair: usize,
    pub method: String,
    pub report: TrajectoryReport,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub n: usize,
    pub table: ComparisonTable,
    pub records: Vec<PairRecord>,
    pub failures: Vec<FailureRecord>,
    pub asymmetry: AsymmetryStats,
    pub pairs: PairSet,
    pub curves: Vec<CurveDump>,
}

#[derive(Serialize)]
struct Summary<'a> {
    policy: String,
    model: &'a str,
    n_features: usize,
    pairs: usize,
    skipped_targets: usize,
    seed: u64,
    table: &'a ComparisonTable,
    asymmetry: &'a AsymmetryStats,
    failures: &'a [FailureRecord],
}

/// Mixes indices into a seed (splitmix64 finalizer).
pub fn derive_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

type PairOutcome = (Vec<PairRecord>, Vec<FailureRecord>, Vec<CurveDump>);

fn run_pair(
    cfg: &ExperimentConfig,
    model: &ModelHandle,
    ds: &Dataset,
    k: usize,
    target: usize,
    reference_row: Option<usize>,
    reference: &Point,
) -> Result<PairOutcome> {
    let x = ds.row(target);
    let f = model.predict(&[x.clone(), reference.clone()])?;
    let n = ds.n();
    let aul = (n as f64 + 1.0) / 2.0 * (f[0] + f[1]);
    let differing = x.count_differences(reference);
    let differing_binary = (0..n)
        .filter(|&j| ds.space().kind(j) == FeatureKind::Binary && x[j] != reference[j])
        .count();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    let mut curves = Vec::new();
    for (mi, method) in cfg.methods.iter().enumerate() {
        let label = method.label();
        let outcome = (|| -> Result<PairRecord> {
            let a = method.compute(model, x, reference, derive_seed(cfg.seed, k as u64, mi as u64))?;
            let ins = a.insertion_order()?;
            let mut rec = PairRecord {
                pair: k,
                target_row: target,
                reference_row,
                method: label.clone(),
                f_x: f[0],
                f_ref: f[1],
                aul,
                auc_ins: None,
                abc_ins: None,
                auc_del: None,
                abc_del: None,
                insertion_order: ins.one_based(),
                differing,
                differing_binary,
                model_evaluations: a.metadata.model_evaluations,
            };
            for &mode in &cfg.modes {
                let report = match mode {
                    CurveMode::Insertion => insertion_curve(model, x, reference, &ins)?,
                    CurveMode::Deletion => deletion_curve(model, x, reference, &a.deletion_order()?)?,
                };
                match mode {
                    CurveMode::Insertion => {
                        rec.auc_ins = Some(report.auc);
                        rec.abc_ins = Some(report.abc);
                    }
                    CurveMode::Deletion => {
                        rec.auc_del = Some(report.auc);
                        rec.abc_del = Some(report.abc);
                    }
                }
                if cfg.write_curves {
                    curves.push(CurveDump {
                        pair: k,
                        method: label.clone(),
                        report,
                    });
                }
            }
            Ok(rec)
        })();
        match outcome {
            Ok(r) => records.push(r),
            Err(e) => {
                log::warn!("pair {k} (row {target}), method {label}: {e}");
                failures.push(FailureRecord {
                    pair: k,
                    target_row: target,
                    method: label,
                    error: e.to_string(),
                });
            }
        }
    }
    Ok((records, failures, curves))
}

fn aggregate(cfg: &ExperimentConfig, records: &[PairRecord], failures: &[FailureRecord]) -> ComparisonTable {
    let mut rows = Vec::new();
    for &mode in &cfg.modes {
        for m in &cfg.methods {
            let label = m.label();
            let mine: Vec<&PairRecord> = records.iter().filter(|r| r.method == label).collect();
            let vals: Vec<f64> = mine.iter().filter_map(|r| r.abc(mode)).collect();
            let evals: Vec<f64> = mine.iter().filter_map(|r| r.model_evaluations.map(|e| e as f64)).collect();
            rows.push(TableRow {
                mode,
                method: label.clone(),
                mean: mean(&vals),
                standard_error: standard_error(&vals),
                count: vals.len(),
                failures: failures.iter().filter(|f| f.method == label).count(),
                mean_model_evaluations: (!evals.is_empty()).then(|| mean(&evals)),
            });
        }
    }
    let mut differences = Vec::new();
    for &mode in &cfg.modes {
        for (a, b) in cfg.difference_pairs() {
            let value = |m: &str, p: usize| {
                records
                    .iter()
                    .find(|r| r.pair == p && r.method == m)
                    .and_then(|r| r.abc(mode))
            };
            let mut pairs: Vec<usize> = records.iter().map(|r| r.pair).collect();
            pairs.dedup();
            let (va, vb): (Vec<f64>, Vec<f64>) = pairs
                .iter()
                .filter_map(|&p| Some((value(&a, p)?, value(&b, p)?)))
                .unzip();
            let d: Vec<f64> = va.iter().zip(&vb).map(|(x, y)| x - y).collect();
            differences.push(DifferenceRow {
                mode,
                minuend: a.clone(),
                subtrahend: b.clone(),
                mean: mean(&d),
                paired_standard_error: standard_error(&d),
                unpaired_standard_error: (standard_error(&va).powi(2) + standard_error(&vb).powi(2)).sqrt(),
                count: d.len(),
            });
        }
    }
    ComparisonTable { rows, differences }
}

/// Runs every method on every pair. Per-(pair, method) failures are
/// recorded and excluded; `threads` overrides the config.
pub fn run_experiment(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<ExperimentResult> {
    cfg.validate()?;
    let threads = threads.or(cfg.threads);
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| Error::config("threads", e.to_string()))?;
    pool.install(|| run_inner(cfg))
}

fn run_inner(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let mut ds = cfg.dataset.load(&cfg.base_dir)?;
    ds.split_train_test(cfg.test_fraction, cfg.seed)?;
    cfg.policy.validate(ds.n())?;
    let model = load_model(&cfg.model, &ds, &cfg.base_dir)?;

    let mut targets = ds.test_indices();
    targets.sort_unstable();
    if !matches!(cfg.policy, PolicySpec::OneToOne { .. }) {
        if let Some(m) = cfg.max_pairs {
            targets.truncate(m);
        }
    }
    let mut pairs = build_pairs(&ds, &model, &cfg.policy, &targets, cfg.seed)?;
    if let Some(m) = cfg.max_pairs {
        pairs.pairs.truncate(m);
    }
    if pairs.pairs.is_empty() {
        return Err(Error::invalid(format!(
            "policy {} produced no pairs ({} targets skipped)",
            cfg.policy,
            pairs.skipped.len()
        )));
    }

    let outcomes: Vec<Result<PairOutcome>> = pairs
        .pairs
        .par_iter()
        .enumerate()
        .map(|(k, p)| run_pair(cfg, &model, &ds, k, p.target, p.reference_index, &p.reference))
        .collect();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    let mut curves = Vec::new();
    for (k, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok((r, f, c)) => {
                records.extend(r);
                failures.extend(f);
                curves.extend(c);
            }
            Err(e) => {
                for m in &cfg.methods {
                    failures.push(FailureRecord {
                        pair: k,
                        target_row: pairs.pairs[k].target,
                        method: m.label(),
                        error: e.to_string(),
                    });
                }
            }
        }
    }
    if records.is_empty() {
        return Err(Error::Model(format!(
            "every (pair, method) failed; first error: {}",
            failures.first().map_or("none", |f| f.error.as_str())
        )));
    }
    let table = aggregate(cfg, &records, &failures);
    let asymmetry = asymmetry_stats(&records, cfg.policy.name())?;
    Ok(ExperimentResult {
        n: ds.n(),
        table,
        records,
        failures,
        asymmetry,
        pairs,
        curves,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn sanitize(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' { c } else { '_' })
        .collect()
}

/// Writes `summary.json`, `pairs.csv`, `reference_pairs.csv` and, when
/// requested, `curves/*.csv` under `dir`.
pub fn write_outputs(cfg: &ExperimentConfig, result: &ExperimentResult, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let summary = Summary {
        policy: cfg.policy.to_string(),
        model: &cfg.model,
        n_features: result.n,
        pairs: result.pairs.pairs.len(),
        skipped_targets: result.pairs.skipped.len(),
        seed: cfg.seed,
        table: &result.table,
        asymmetry: &result.asymmetry,
        failures: &result.failures,
    };
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;

    let mut w = csv::Writer::from_path(dir.join("pairs.csv"))?;
    w.write_record([
        "pair",
        "target_row",
        "reference_row",
        "method",
        "abc_ins",
        "abc_del",
        "auc_ins",
        "auc_del",
        "aul",
    ])?;
    for r in &result.records {
        w.write_record([
            r.pair.to_string(),
            r.target_row.to_string(),
            r.reference_row.map_or_else(|| "synthetic".into(), |i| i.to_string()),
            r.method.clone(),
            opt(r.abc_ins),
            opt(r.abc_del),
            opt(r.auc_ins),
            opt(r.auc_del),
            fmt_f64(r.aul),
        ])?;
    }
    w.flush()?;
    result.pairs.write_csv(fs::File::create(dir.join("reference_pairs.csv"))?)?;

    if cfg.write_curves {
        let cdir = dir.join("curves");
        fs::create_dir_all(&cdir)?;
        for c in &result.curves {
            let name = format!("pair{}_{}_{}.csv", c.pair, sanitize(&c.method), c.report.mode.name());
            c.report.write_csv(fs::File::create(cdir.join(name))?)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(model: &str, methods: &str, policy: &str) -> ExperimentConfig {
        ExperimentConfig {
            dataset: DatasetRef::Synthetic(SyntheticSpec {
                rows: 60,
                continuous: 3,
                binary: 2,
                seed: 1,
            }),
            model: model.into(),
            policy: policy.parse().unwrap(),
            methods: crate::attribution::parse_method_list(methods).unwrap(),
            modes: default_modes(),
            seed: 3,
            test_fraction: 0.5,
            max_pairs: Some(12),
            output_dir: None,
            write_curves: true,
            differences: vec![],
            threads: Some(2),
            base_dir: PathBuf::new(),
        }
    }

    #[test]
    fn additive_shapley_rows_agree() {
        let cfg = config("linear:0.5:1,-2,0.3,1.5,-0.7", "shapley,ks:exact,ig:cast:nodes=20,random", "average");
        let r = run_experiment(&cfg, None).unwrap();
        let ins = r.table.row(CurveMode::Insertion, "shapley").unwrap();
        let del = r.table.row(CurveMode::Deletion, "shapley").unwrap();
        assert_eq!(ins.count, 12);
        assert!((ins.mean - del.mean).abs() < 1e-9);
        assert_eq!(r.table.differences.len(), 2);
        let d = &r.table.differences[0];
        let a = r.table.row(d.mode, &d.minuend).unwrap().mean;
        let b = r.table.row(d.mode, &d.subtrahend).unwrap().mean;
        assert!((d.mean - (a - b)).abs() < 1e-12);
        // one AUL per pair, whatever the method
        for rec in &r.records {
            let first = r.records.iter().find(|o| o.pair == rec.pair).unwrap();
            assert_eq!(rec.aul, first.aul);
            assert!(rec.differing == 5 || rec.differing <= 5);
        }
    }

    #[test]
    fn reproducible_across_thread_counts() {
        let cfg = config("random-multilinear:5:2", "ks:sampled:samples=200,lime:samples=50,random", "one-to-one");
        let a = run_experiment(&cfg, Some(1)).unwrap();
        let b = run_experiment(&cfg, Some(3)).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.table, b.table);
        let dir = tempfile::tempdir().unwrap();
        write_outputs(&cfg, &a, dir.path()).unwrap();
        let s1 = fs::read(dir.path().join("summary.json")).unwrap();
        write_outputs(&cfg, &b, dir.path()).unwrap();
        assert_eq!(s1, fs::read(dir.path().join("summary.json")).unwrap());
        assert!(dir.path().join("curves").read_dir().unwrap().count() > 0);
    }

    #[test]
    fn failures_are_tallied() {
        // LIME with too few samples fails on every pair without stopping the run
        let cfg = config("linear:0:1,1,1,1,1", "shapley,lime:samples=3", "average");
        let r = run_experiment(&cfg, None).unwrap();
        assert_eq!(r.failures.len(), 12);
        assert_eq!(r.table.row(CurveMode::Insertion, "lime:samples=3").unwrap().failures, 12);
    }

    #[test]
    fn config_validation() {
        let mut cfg = config("linear:0:1,1,1,1,1", "shapley", "average");
        cfg.methods.clear();
        assert!(matches!(cfg.validate(), Err(Error::Config { .. })));
        let mut cfg = config("linear:0:1,1,1,1,1", "shapley", "average");
        cfg.differences = vec![["shapley".into(), "vg".into()]];
        assert!(cfg.validate().is_err());
        let toml_text = "model = \"linear:0:1\"\nmethods = [\"shapley\"]\nbogus = 1\n[dataset.synthetic]\nrows = 4\ncontinuous = 1\n";
        assert!(toml::from_str::<ExperimentConfig>(toml_text).is_err());
        let toml_text = "model = \"linear:0:1\"\nmethods = [\"shapley\"]\npolicy = \"average\"\n[dataset.synthetic]\nrows = 4\ncontinuous = 1\n";
        let cfg: ExperimentConfig = toml::from_str(toml_text).unwrap();
        assert_eq!(cfg.policy, PolicySpec::Average);
    }

    #[test]
    fn seeds_mix() {
        assert_ne!(derive_seed(1, 0, 0), derive_seed(1, 1, 0));
        assert_ne!(derive_seed(1, 0, 1), derive_seed(1, 1, 0));
        assert_eq!(derive_seed(5, 2, 3), derive_seed(5, 2, 3));
    }
}
