//! Serves a builtin model over the JSON-lines protocol on stdin/stdout.
//!
//! ```text
//! abc-model-server --model SPEC [--no-gradients] [--max-requests N] [--drift]
//! ```
//!
//! `--drift` makes every prediction differ slightly from the previous one,
//! which the client's determinism probe must reject.

use std::io::{self, BufWriter};
use std::process::ExitCode;
use std::sync::atomic::{AtomicU64, Ordering};

use abc_bench::error::Result;
use abc_bench::feature_space::Point;
use abc_bench::model::external::{serve, ServeOptions};
use abc_bench::model::{BuiltinModel, GradientCapability, Model};

struct Drifting {
    inner: BuiltinModel,
    calls: AtomicU64,
}

impl Model for Drifting {
    fn n_features(&self) -> usize {
        self.inner.n_features()
    }

    fn predict(&self, batch: &[Point]) -> Result<Vec<f64>> {
        let k = self.calls.fetch_add(1, Ordering::Relaxed) as f64;
        Ok(batch.iter().map(|x| self.inner.eval(x) + 1e-3 * (k + 1.0)).collect())
    }

    fn gradient_capability(&self) -> GradientCapability {
        GradientCapability::FiniteDifference
    }
}

fn usage(msg: &str) -> ExitCode {
    eprintln!("abc-model-server: {msg}");
    eprintln!("usage: abc-model-server --model SPEC [--no-gradients] [--max-requests N] [--drift]");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let mut spec = None;
    let mut options = ServeOptions {
        gradients: true,
        max_requests: None,
    };
    let mut drift = false;
    let mut args = std::env::args().skip(1);
    while let Some(a) = args.next() {
        match a.as_str() {
            "--model" => spec = args.next(),
            "--gradients" => options.gradients = true,
            "--no-gradients" => options.gradients = false,
            "--drift" => drift = true,
            "--max-requests" => match args.next().and_then(|v| v.parse().ok()) {
                Some(m) => options.max_requests = Some(m),
                None => return usage("--max-requests needs a non-negative integer"),
            },
            other => return usage(&format!("unknown argument '{other}'")),
        }
    }
    let Some(spec) = spec else {
        return usage("--model is required");
    };
    let model: BuiltinModel = match spec.parse() {
        Ok(m) => m,
        Err(e) => return usage(&e.to_string()),
    };
    let stdin = io::stdin().lock();
    let stdout = BufWriter::new(io::stdout().lock());
    let result = if drift {
        let m = Drifting {
            inner: model,
            calls: AtomicU64::new(0),
        };
        serve(&m, stdin, stdout, &options)
    } else {
        serve(&model, stdin, stdout, &options)
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("abc-model-server: {e}");
            ExitCode::FAILURE
        }
    }
}
