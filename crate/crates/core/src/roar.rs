//! Remove-and-retrain: overwrite the top-ranked features with uninformative
//! values in training and test data, refit, and track the held-out loss.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attribution::{AttributionVector, MethodSpec};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::experiment::{read_config, DatasetRef};
use crate::feature_space::{FeatureKind, FeatureSpace, Point};
use crate::format::fmt_f64;
use crate::model::{BuiltinModel, ModelHandle};
use crate::policy::average_reference;
use crate::stats::{mean, standard_error};

pub const DEFAULT_QUANTILES: [f64; 6] = [0.1, 0.3, 0.5, 0.7, 0.9, 1.0];
pub const HUBER_DELTA: f64 = 1.0;

/// Fits a model to rows and targets.
pub trait Trainer: Send + Sync {
    fn name(&self) -> String;

    /// `seed` is for stochastic trainers; deterministic ones ignore it.
    fn fit(&self, rows: &[Point], targets: &[f64], space: &FeatureSpace, seed: u64) -> Result<ModelHandle>;
}

/// Closed-form ridge regression with an unpenalized intercept.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RidgeTrainer {
    pub lambda: f64,
}

impl Default for RidgeTrainer {
    fn default() -> Self {
        Self { lambda: 1e-3 }
    }
}

impl RidgeTrainer {
    pub fn fit_linear(&self, rows: &[Point], targets: &[f64]) -> Result<BuiltinModel> {
        if rows.is_empty() || rows.len() != targets.len() {
            return Err(Error::invalid("ridge fit needs matching, non-empty rows and targets"));
        }
        if self.lambda.is_nan() || self.lambda <= 0.0 {
            return Err(Error::invalid(format!("ridge penalty must be positive, got {}", self.lambda)));
        }
        let n = rows[0].len();
        let m = rows.len() as f64;
        let mut xm = vec![0.0; n];
        for r in rows {
            for (a, v) in xm.iter_mut().zip(r.iter()) {
                *a += v / m;
            }
        }
        let ym = targets.iter().sum::<f64>() / m;
        let mut xtx = DMatrix::<f64>::zeros(n, n);
        let mut xty = DVector::<f64>::zeros(n);
        for (r, y) in rows.iter().zip(targets) {
            let c: Vec<f64> = r.iter().zip(&xm).map(|(v, mu)| v - mu).collect();
            for a in 0..n {
                xty[a] += c[a] * (y - ym);
                for b in 0..n {
                    xtx[(a, b)] += c[a] * c[b];
                }
            }
        }
        for a in 0..n {
            xtx[(a, a)] += self.lambda;
        }
        let beta = xtx
            .cholesky()
            .ok_or_else(|| Error::Singular("ridge normal equations".into()))?
            .solve(&xty);
        let beta: Vec<f64> = beta.iter().copied().collect();
        let intercept = ym - beta.iter().zip(&xm).map(|(b, mu)| b * mu).sum::<f64>();
        Ok(BuiltinModel::linear(intercept, beta))
    }
}

impl Trainer for RidgeTrainer {
    fn name(&self) -> String {
        format!("ridge(lambda={})", self.lambda)
    }

    fn fit(&self, rows: &[Point], targets: &[f64], space: &FeatureSpace, _seed: u64) -> Result<ModelHandle> {
        ModelHandle::builtin_on(self.fit_linear(rows, targets)?, space.clone())
    }
}

/// Mean Huber loss.
pub fn huber_loss(predictions: &[f64], targets: &[f64], delta: f64) -> f64 {
    let total: f64 = predictions
        .iter()
        .zip(targets)
        .map(|(p, y)| {
            let r = (p - y).abs();
            if r <= delta {
                0.5 * r * r
            } else {
                delta * (r - 0.5 * delta)
            }
        })
        .sum();
    total / predictions.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankingMode {
    Signed,
    Absolute,
}

impl RankingMode {
    pub fn name(self) -> &'static str {
        match self {
            RankingMode::Signed => "signed",
            RankingMode::Absolute => "absolute",
        }
    }
}

/// Feature order (0-based, most important first) by mean per-instance rank.
pub fn rank_features_global(attributions: &[AttributionVector], mode: RankingMode) -> Result<Vec<usize>> {
    let first = attributions
        .first()
        .ok_or_else(|| Error::invalid("ranking needs at least one attribution"))?;
    let n = first.n();
    let mut rank_sum = vec![0.0; n];
    for a in attributions {
        if a.n() != n {
            return Err(Error::DimensionMismatch { expected: n, found: a.n() });
        }
        let key = |j: usize| match mode {
            RankingMode::Signed => a.scores[j],
            RankingMode::Absolute => a.scores[j].abs(),
        };
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&p, &q| key(q).total_cmp(&key(p)));
        for (rank, &j) in order.iter().enumerate() {
            rank_sum[j] += rank as f64;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&p, &q| rank_sum[p].total_cmp(&rank_sum[q]));
    Ok(order)
}

/// Training-set mean for continuous features, mode (lower value on ties)
/// for binary ones.
pub fn fill_values(ds: &Dataset) -> Vec<f64> {
    let train = ds.train_indices();
    (0..ds.n())
        .map(|j| {
            let col = train.iter().map(|&i| ds.row(i)[j]);
            match ds.space().kind(j) {
                FeatureKind::Continuous => col.sum::<f64>() / train.len() as f64,
                FeatureKind::Binary => {
                    let ones = col.filter(|&v| v == 1.0).count();
                    if 2 * ones > train.len() {
                        1.0
                    } else {
                        0.0
                    }
                }
            }
        })
        .collect()
}

/// Number of features removed at quantile `q`: `⌈q n⌉`.
pub fn removed_count(q: f64, n: usize) -> usize {
    ((q * n as f64) - 1e-9).ceil().clamp(0.0, n as f64) as usize
}

fn check_quantiles(quantiles: &[f64]) -> Result<()> {
    if quantiles.is_empty() {
        return Err(Error::config("quantiles", "at least one quantile is required"));
    }
    if let Some(q) = quantiles.iter().find(|q| !(**q > 0.0 && **q <= 1.0)) {
        return Err(Error::config("quantiles", format!("{q} lies outside (0, 1]")));
    }
    Ok(())
}

fn fit_and_score(ds: &Dataset, trainer: &dyn Trainer, rows: &[Point], seed: u64) -> Result<f64> {
    let y = ds
        .targets()
        .ok_or_else(|| Error::invalid("remove-and-retrain needs a target column"))?;
    let train = ds.train_indices();
    let test = ds.test_indices();
    let xr: Vec<Point> = train.iter().map(|&i| rows[i].clone()).collect();
    let yr: Vec<f64> = train.iter().map(|&i| y[i]).collect();
    let model = trainer.fit(&xr, &yr, ds.space(), seed)?;
    let xt: Vec<Point> = test.iter().map(|&i| rows[i].clone()).collect();
    let yt: Vec<f64> = test.iter().map(|&i| y[i]).collect();
    let loss = huber_loss(&model.predict(&xt)?, &yt, HUBER_DELTA);
    if !loss.is_finite() {
        return Err(Error::Model("non-finite held-out loss".into()));
    }
    Ok(loss)
}

/// Held-out loss of the model trained on unmodified data.
pub fn baseline_loss(ds: &Dataset, trainer: &dyn Trainer, seed: u64) -> Result<f64> {
    fit_and_score(ds, trainer, ds.rows(), seed)
}

/// Losses indexed `[quantile][replicate]` for a fixed feature ranking.
pub fn roar_with_ranking(
    ds: &Dataset,
    trainer: &dyn Trainer,
    ranking: &[usize],
    quantiles: &[f64],
    replicates: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    check_quantiles(quantiles)?;
    if ranking.len() != ds.n() {
        return Err(Error::DimensionMismatch {
            expected: ds.n(),
            found: ranking.len(),
        });
    }
    if replicates == 0 {
        return Err(Error::config("replicates", "must be at least 1"));
    }
    let fill = fill_values(ds);
    let cells: Vec<(usize, usize)> = (0..quantiles.len())
        .flat_map(|q| (0..replicates).map(move |r| (q, r)))
        .collect();
    let losses: Vec<f64> = cells
        .par_iter()
        .map(|&(qi, rep)| {
            let k = removed_count(quantiles[qi], ds.n());
            let rows: Vec<Point> = ds
                .rows()
                .iter()
                .map(|r| {
                    let mut r = r.clone();
                    for &j in &ranking[..k] {
                        r[j] = fill[j];
                    }
                    r
                })
                .collect();
            fit_and_score(ds, trainer, &rows, seed.wrapping_add(rep as u64))
        })
        .collect::<Result<_>>()?;
    Ok(losses.chunks(replicates).map(<[f64]>::to_vec).collect())
}

/// Losses of one (method, ranking mode) series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoarSeries {
    pub method: String,
    pub ranking_mode: RankingMode,
    /// 1-based, most important first.
    pub ranking: Vec<usize>,
    /// `[quantile][replicate]`.
    pub losses: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    /// `NaN` (serialized as null) with a single replicate.
    pub standard_error: Vec<f64>,
}

impl RoarSeries {
    pub fn new(method: impl Into<String>, ranking_mode: RankingMode, ranking: &[usize], losses: Vec<Vec<f64>>) -> Self {
        Self {
            method: method.into(),
            ranking_mode,
            ranking: ranking.iter().map(|j| j + 1).collect(),
            mean: losses.iter().map(|l| mean(l)).collect(),
            standard_error: losses.iter().map(|l| standard_error(l)).collect(),
            losses,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoarReport {
    pub quantiles: Vec<f64>,
    pub replicates: usize,
    pub trainer: String,
    pub baseline_loss: f64,
    pub series: Vec<RoarSeries>,
}

impl RoarReport {
    /// `method,ranking_mode,quantile,replicate,loss`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["method", "ranking_mode", "quantile", "replicate", "loss"])?;
        for s in &self.series {
            for (q, row) in self.quantiles.iter().zip(&s.losses) {
                for (rep, loss) in row.iter().enumerate() {
                    w.write_record([
                        s.method.clone(),
                        s.ranking_mode.name().to_string(),
                        fmt_f64(*q),
                        rep.to_string(),
                        fmt_f64(*loss),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Attributions of `model` at up to `max_instances` training rows against
/// the training mean.
pub fn training_attributions(
    ds: &Dataset,
    model: &ModelHandle,
    method: &MethodSpec,
    max_instances: usize,
    seed: u64,
) -> Result<Vec<AttributionVector>> {
    let reference = average_reference(ds);
    let rows: Vec<usize> = ds.train_indices().into_iter().take(max_instances.max(1)).collect();
    rows.par_iter()
        .map(|&i| method.compute(model, ds.row(i), &reference, seed.wrapping_add(i as u64)))
        .collect()
}

/// Full run for one method: fit on the training rows, attribute, rank,
/// then remove and retrain at each quantile.
#[allow(clippy::too_many_arguments)]
pub fn roar_run(
    ds: &Dataset,
    trainer: &dyn Trainer,
    method: &MethodSpec,
    mode: RankingMode,
    quantiles: &[f64],
    replicates: usize,
    max_instances: usize,
    seed: u64,
) -> Result<RoarSeries> {
    check_quantiles(quantiles)?;
    let y = ds
        .targets()
        .ok_or_else(|| Error::invalid("remove-and-retrain needs a target column"))?;
    let train = ds.train_indices();
    let xr: Vec<Point> = train.iter().map(|&i| ds.row(i).clone()).collect();
    let yr: Vec<f64> = train.iter().map(|&i| y[i]).collect();
    let model = trainer.fit(&xr, &yr, ds.space(), seed)?;
    let attributions = training_attributions(ds, &model, method, max_instances, seed)?;
    let ranking = rank_features_global(&attributions, mode)?;
    let losses = roar_with_ranking(ds, trainer, &ranking, quantiles, replicates, seed)?;
    Ok(RoarSeries::new(method.label(), mode, &ranking, losses))
}

fn default_rankings() -> Vec<RankingMode> {
    vec![RankingMode::Signed, RankingMode::Absolute]
}

fn default_quantiles() -> Vec<f64> {
    DEFAULT_QUANTILES.to_vec()
}

fn default_replicates() -> usize {
    1
}

fn default_lambda() -> f64 {
    RidgeTrainer::default().lambda
}

fn default_test_fraction() -> f64 {
    0.25
}

fn default_max_instances() -> usize {
    200
}

/// A remove-and-retrain run with the ridge trainer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoarConfig {
    /// Must provide a target column.
    pub dataset: DatasetRef,
    pub methods: Vec<MethodSpec>,
    #[serde(default = "default_rankings")]
    pub rankings: Vec<RankingMode>,
    #[serde(default = "default_quantiles")]
    pub quantiles: Vec<f64>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    /// Training rows attributed to build the ranking.
    #[serde(default = "default_max_instances")]
    pub max_instances: usize,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RoarConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let mut cfg: Self = read_config(path)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        if let Some(out) = &cfg.output_dir {
            if out.is_relative() {
                cfg.output_dir = Some(cfg.base_dir.join(out));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::config("methods", "at least one method is required"));
        }
        if self.rankings.is_empty() {
            return Err(Error::config("rankings", "at least one ranking mode is required"));
        }
        check_quantiles(&self.quantiles)?;
        if self.replicates == 0 {
            return Err(Error::config("replicates", "must be at least 1"));
        }
        if self.lambda.is_nan() || self.lambda <= 0.0 {
            return Err(Error::config("lambda", "must be positive"));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::config("test_fraction", "must lie in (0, 1)"));
        }
        if self.threads == Some(0) {
            return Err(Error::config("threads", "must be at least 1"));
        }
        Ok(())
    }
}

/// Every (method, ranking mode) series of a config.
pub fn run_roar(cfg: &RoarConfig, threads: Option<usize>) -> Result<RoarReport> {
    cfg.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads.or(cfg.threads) {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| Error::config("threads", e.to_string()))?;
    pool.install(|| {
        let mut ds = cfg.dataset.load(&cfg.base_dir)?;
        if ds.targets().is_none() {
            return Err(Error::config("dataset", "remove-and-retrain needs a target column"));
        }
        ds.split_train_test(cfg.test_fraction, cfg.seed)?;
        let trainer = RidgeTrainer { lambda: cfg.lambda };
        let baseline = baseline_loss(&ds, &trainer, cfg.seed)?;
        let mut series = Vec::new();
        for method in &cfg.methods {
            for &mode in &cfg.rankings {
                series.push(roar_run(
                    &ds,
                    &trainer,
                    method,
                    mode,
                    &cfg.quantiles,
                    cfg.replicates,
                    cfg.max_instances,
                    cfg.seed,
                )?);
            }
        }
        Ok(RoarReport {
            quantiles: cfg.quantiles.clone(),
            replicates: cfg.replicates,
            trainer: trainer.name(),
            baseline_loss: baseline,
            series,
        })
    })
}

/// Writes `roar.csv` and `roar_summary.json` under `dir`.
pub fn write_roar_outputs(report: &RoarReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    report.write_csv(fs::File::create(dir.join("roar.csv"))?)?;
    fs::write(dir.join("roar_summary.json"), serde_json::to_string_pretty(report)? + "\n")?;
    Ok(())
}
