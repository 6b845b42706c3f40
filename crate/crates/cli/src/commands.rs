use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;

use abc_bench::attribution::parse_method_list;
use abc_bench::curve::{random_orderings, run_curve, CurveMode, Ordering, TrajectoryReport};
use abc_bench::experiment::{derive_seed, run_experiment, write_outputs, ExperimentConfig, ExperimentResult};
use abc_bench::format::fmt_f64;
use abc_bench::roar::{run_roar, write_roar_outputs, RoarConfig, RoarReport};
use abc_bench::{decompose as decompose_pair, AttributionVector, Error, MethodSpec, PolicySpec, Result};
use clap::{Args, ValueEnum};

use crate::inputs::PairArgs;

fn usage(key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.into(),
        message: message.into(),
    }
}

/// Opens `path` for writing, or stdout when absent.
fn sink(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(fs::File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    #[command(flatten)]
    pair: PairArgs,

    /// Seed used by a randomized reference policy.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Write the CSV here instead of stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

pub fn decompose(a: DecomposeArgs) -> Result<()> {
    let p = a.pair.resolve(a.seed)?;
    let d = decompose_pair(&p.model, &p.x, &p.x_ref)?;
    d.write_csv(sink(&a.output)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Insertion,
    Deletion,
    Both,
}

impl ModeArg {
    fn modes(self) -> Vec<CurveMode> {
        match self {
            ModeArg::Insertion => vec![CurveMode::Insertion],
            ModeArg::Deletion => vec![CurveMode::Deletion],
            ModeArg::Both => vec![CurveMode::Insertion, CurveMode::Deletion],
        }
    }
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    #[command(flatten)]
    pair: PairArgs,

    /// Explicit 1-based switching order, e.g. `2,1`. Used as given in both modes.
    #[arg(long, value_delimiter = ',')]
    order: Vec<usize>,

    /// Attribution methods whose orders are evaluated, e.g. `shapley,ks:exact,ig:cast`.
    /// Defaults to `shapley` when no --order is given.
    #[arg(long)]
    methods: Option<String>,

    /// Which test to run.
    #[arg(long, value_enum, default_value_t = ModeArg::Insertion)]
    mode: ModeArg,

    /// Also evaluate this many uniformly random orders.
    #[arg(long, default_value_t = 0)]
    random_orders: usize,

    /// Seed for random orders and randomized methods.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Write the trajectory table here and the area table to stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

pub fn curve(a: CurveArgs) -> Result<()> {
    let p = a.pair.resolve(a.seed)?;
    let n = p.x.len();
    let modes = a.mode.modes();
    let mut reports: Vec<(String, TrajectoryReport)> = Vec::new();

    if !a.order.is_empty() {
        let order = Ordering::from_one_based(&a.order, "order")?;
        if order.len() != n {
            return Err(usage("--order", format!("order has {} entries, the points have {n}", order.len())));
        }
        for &mode in &modes {
            reports.push(("order".into(), run_curve(mode, &p.model, &p.x, &p.x_ref, &order)?));
        }
    }
    let methods = match &a.methods {
        Some(m) => parse_method_list(m)?,
        None if a.order.is_empty() => vec![MethodSpec::Shapley],
        None => vec![],
    };
    for (mi, m) in methods.iter().enumerate() {
        let v = m.compute(&p.model, &p.x, &p.x_ref, derive_seed(a.seed, 0, mi as u64))?;
        for &mode in &modes {
            let order = match mode {
                CurveMode::Insertion => v.insertion_order()?,
                CurveMode::Deletion => v.deletion_order()?,
            };
            reports.push((m.label(), run_curve(mode, &p.model, &p.x, &p.x_ref, &order)?));
        }
    }
    for order in random_orderings(n, a.random_orders, a.seed)? {
        for &mode in &modes {
            reports.push((order.source().to_string(), run_curve(mode, &p.model, &p.x, &p.x_ref, &order)?));
        }
    }

    let mut traj = sink(&a.output)?;
    writeln!(traj, "source,mode,step,feature_changed,value")?;
    for (src, r) in &reports {
        for (step, v) in r.values.iter().enumerate() {
            let feature = if step == 0 {
                String::new()
            } else {
                (r.ordering.perm()[step - 1] + 1).to_string()
            };
            writeln!(traj, "{src},{},{step},{feature},{}", r.mode.name(), fmt_f64(*v))?;
        }
    }
    traj.flush()?;
    drop(traj);

    let mut out = io::stdout().lock();
    if a.output.is_none() {
        writeln!(out)?;
    }
    writeln!(out, "source,mode,order,auc,aul,abc")?;
    for (src, r) in &reports {
        let order: Vec<String> = r.ordering.one_based().iter().map(usize::to_string).collect();
        writeln!(
            out,
            "{src},{},{},{},{},{}",
            r.mode.name(),
            order.join(" "),
            fmt_f64(r.auc),
            fmt_f64(r.aul),
            fmt_f64(r.abc)
        )?;
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct AttributeArgs {
    #[command(flatten)]
    pair: PairArgs,

    /// Attribution methods, e.g. `shapley,ks:sampled:samples=2000,ig:interp:nodes=200,lime`.
    #[arg(long, default_value = "shapley")]
    methods: String,

    /// Seed for randomized methods.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Print JSON instead of CSV.
    #[arg(long)]
    json: bool,
}

pub fn attribute(a: AttributeArgs) -> Result<()> {
    let p = a.pair.resolve(a.seed)?;
    let methods = parse_method_list(&a.methods)?;
    let vectors = methods
        .iter()
        .enumerate()
        .map(|(mi, m)| m.compute(&p.model, &p.x, &p.x_ref, derive_seed(a.seed, 0, mi as u64)))
        .collect::<Result<Vec<AttributionVector>>>()?;
    let mut out = io::stdout().lock();
    if a.json {
        serde_json::to_writer_pretty(&mut out, &vectors)?;
        writeln!(out)?;
        return Ok(());
    }
    writeln!(out, "method,feature,label,score")?;
    for v in &vectors {
        for (j, s) in v.scores.iter().enumerate() {
            writeln!(out, "{},{},{},{}", v.method, j + 1, p.model.space().label(j), fmt_f64(*s))?;
        }
    }
    Ok(())
}

fn check_config_path(path: &std::path::Path) -> Result<()> {
    if !path.is_file() {
        return Err(usage("config", format!("{} is not a readable file", path.display())));
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Experiment config (TOML, or JSON with a .json extension).
    config: PathBuf,

    /// Override the methods list.
    #[arg(long)]
    methods: Option<String>,

    /// Override the reference policy.
    #[arg(long)]
    policy: Option<String>,

    /// Override the curve modes.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,

    /// Override the seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Override the pair limit.
    #[arg(long)]
    max_pairs: Option<usize>,

    /// Override the output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,

    /// Also write one CSV per trajectory.
    #[arg(long)]
    write_curves: bool,
}

pub fn experiment(a: ExperimentArgs, threads: Option<usize>) -> Result<()> {
    check_config_path(&a.config)?;
    let mut cfg = ExperimentConfig::from_path(&a.config)?;
    if let Some(m) = &a.methods {
        cfg.methods = parse_method_list(m)?;
    }
    if let Some(p) = &a.policy {
        cfg.policy = p.parse::<PolicySpec>()?;
    }
    if let Some(m) = a.mode {
        cfg.modes = m.modes();
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(m) = a.max_pairs {
        cfg.max_pairs = Some(m);
    }
    if let Some(d) = a.output_dir {
        cfg.output_dir = Some(d);
    }
    cfg.write_curves |= a.write_curves;
    cfg.validate()?;

    let result = run_experiment(&cfg, threads)?;
    let dir = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("abc-bench-output"));
    write_outputs(&cfg, &result, &dir)?;
    print_table(&result)?;
    eprintln!("wrote {}", dir.display());
    Ok(())
}

fn print_table(result: &ExperimentResult) -> Result<()> {
    let mut out = io::stdout().lock();
    writeln!(out, "pairs: {}, features: {}", result.pairs.pairs.len(), result.n)?;
    writeln!(out, "mode,method,mean_abc,standard_error,count,failures,mean_model_evaluations")?;
    for r in &result.table.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.mode.name(),
            r.method,
            fmt_f64(r.mean),
            fmt_f64(r.standard_error),
            r.count,
            r.failures,
            r.mean_model_evaluations.map(fmt_f64).unwrap_or_default()
        )?;
    }
    if !result.table.differences.is_empty() {
        writeln!(out)?;
        writeln!(out, "mode,minuend,subtrahend,mean_difference,paired_standard_error,unpaired_standard_error,count")?;
        for d in &result.table.differences {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                d.mode.name(),
                d.minuend,
                d.subtrahend,
                fmt_f64(d.mean),
                fmt_f64(d.paired_standard_error),
                fmt_f64(d.unpaired_standard_error),
                d.count
            )?;
        }
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct RoarArgs {
    /// ROAR config (TOML, or JSON with a .json extension).
    config: PathBuf,

    /// Override the methods list.
    #[arg(long)]
    methods: Option<String>,

    /// Override the seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Override the number of retraining replicates.
    #[arg(long)]
    replicates: Option<usize>,

    /// Override the output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

pub fn roar(a: RoarArgs, threads: Option<usize>) -> Result<()> {
    check_config_path(&a.config)?;
    let mut cfg = RoarConfig::from_path(&a.config)?;
    if let Some(m) = &a.methods {
        cfg.methods = parse_method_list(m)?;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(r) = a.replicates {
        cfg.replicates = r;
    }
    if let Some(d) = a.output_dir {
        cfg.output_dir = Some(d);
    }
    cfg.validate()?;

    let report = run_roar(&cfg, threads)?;
    let dir = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("abc-bench-roar"));
    write_roar_outputs(&report, &dir)?;
    print_roar(&report)?;
    eprintln!("wrote {}", dir.display());
    Ok(())
}

fn print_roar(report: &RoarReport) -> Result<()> {
    let mut out = io::stdout().lock();
    writeln!(out, "trainer: {}, baseline loss: {}", report.trainer, fmt_f64(report.baseline_loss))?;
    writeln!(out, "method,ranking_mode,quantile,mean_loss,standard_error")?;
    for s in &report.series {
        for (k, q) in report.quantiles.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{}",
                s.method,
                s.ranking_mode.name(),
                fmt_f64(*q),
                fmt_f64(s.mean[k]),
                fmt_f64(s.standard_error[k])
            )?;
        }
    }
    Ok(())
}
