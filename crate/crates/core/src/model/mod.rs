//! Black-box model abstraction.
//!
//! Everything downstream talks to a [`ModelHandle`]: a shared, thread-safe
//! reference to some [`Model`] plus the [`FeatureSpace`] it is defined on.
//! Models without analytic gradients get central finite differences.

mod builtin;
pub mod external;
mod spec;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use builtin::{
    AdditiveTerm, BuiltinModel, LinearModel, Link, MonotoneAdditiveModel, MultilinearModel,
    TabularInterpolantModel,
};
pub use external::{ExternalModel, ExternalOptions};
pub use spec::{load_builtin, parse_model_spec, ModelSpec};

use crate::error::{Error, Result};
use crate::feature_space::{FeatureSpace, Point};

/// Relative finite-difference step: `h_j = FD_STEP * max(1, |x_j|)`.
pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Builtin,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientCapability {
    Analytic,
    FiniteDifference,
}

/// A prediction function `f: R^n -> R`.
///
/// Implementations must be pure: identical batches give identical outputs.
/// Binary features may be passed fractional values.
pub trait Model: Send + Sync {
    fn n_features(&self) -> usize;

    fn predict(&self, batch: &[Point]) -> Result<Vec<f64>>;

    fn kind(&self) -> ModelKind {
        ModelKind::Builtin
    }

    fn gradient_capability(&self) -> GradientCapability {
        GradientCapability::FiniteDifference
    }

    /// Gradients for each point. The default uses central finite differences.
    fn gradient(&self, batch: &[Point]) -> Result<Vec<Vec<f64>>> {
        finite_difference_gradient(self, batch)
    }
}

/// Central finite-difference gradient built only from `predict`.
pub fn finite_difference_gradient<M: Model + ?Sized>(
    model: &M,
    batch: &[Point],
) -> Result<Vec<Vec<f64>>> {
    let n = model.n_features();
    let mut probes = Vec::with_capacity(batch.len() * 2 * n);
    let mut steps = Vec::with_capacity(batch.len() * n);
    for x in batch {
        for j in 0..n {
            let h = FD_STEP * x[j].abs().max(1.0);
            let mut plus = x.clone();
            plus[j] += h;
            let mut minus = x.clone();
            minus[j] -= h;
            // the realised step can differ from h after rounding
            steps.push(plus[j] - minus[j]);
            probes.push(plus);
            probes.push(minus);
        }
    }
    let values = model.predict(&probes)?;
    if values.len() != probes.len() {
        return Err(Error::Model(format!(
            "model returned {} values for {} points",
            values.len(),
            probes.len()
        )));
    }
    Ok(batch
        .iter()
        .enumerate()
        .map(|(i, _)| {
            (0..n)
                .map(|j| {
                    let k = i * n + j;
                    (values[2 * k] - values[2 * k + 1]) / steps[k]
                })
                .collect()
        })
        .collect())
}

/// Gradients for a batch, one row per point.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientResult {
    pub gradients: Vec<Vec<f64>>,
}

impl GradientResult {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.gradients[i]
    }

    pub fn len(&self) -> usize {
        self.gradients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gradients.is_empty()
    }
}

/// Shared handle to a model and the space it is evaluated on.
#[derive(Clone)]
pub struct ModelHandle {
    model: Arc<dyn Model>,
    space: FeatureSpace,
}

impl fmt::Debug for ModelHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelHandle")
            .field("kind", &self.kind())
            .field("n", &self.n())
            .field("gradient", &self.gradient_capability())
            .finish()
    }
}

impl ModelHandle {
    pub fn new(model: Arc<dyn Model>, space: FeatureSpace) -> Result<Self> {
        if model.n_features() != space.n() {
            return Err(Error::DimensionMismatch {
                expected: space.n(),
                found: model.n_features(),
            });
        }
        Ok(Self { model, space })
    }

    /// Wraps a builtin on an all-continuous space of matching width.
    pub fn builtin(model: BuiltinModel) -> Result<Self> {
        let space = FeatureSpace::continuous(model.n_features())?;
        Self::new(Arc::new(model), space)
    }

    pub fn builtin_on(model: BuiltinModel, space: FeatureSpace) -> Result<Self> {
        Self::new(Arc::new(model), space)
    }

    /// Spawns `command` and speaks the JSON-lines protocol with it.
    pub fn connect_external(command: &str, space: FeatureSpace) -> Result<Self> {
        Self::connect_external_with(command, space, ExternalOptions::default())
    }

    pub fn connect_external_with(
        command: &str,
        space: FeatureSpace,
        options: ExternalOptions,
    ) -> Result<Self> {
        let model = ExternalModel::connect(command, space.n(), options)?;
        Self::new(Arc::new(model), space)
    }

    /// Same model, different labelling of feature kinds.
    pub fn with_space(&self, space: FeatureSpace) -> Result<Self> {
        Self::new(self.model.clone(), space)
    }

    pub fn space(&self) -> &FeatureSpace {
        &self.space
    }

    pub fn n(&self) -> usize {
        self.space.n()
    }

    pub fn kind(&self) -> ModelKind {
        self.model.kind()
    }

    pub fn gradient_capability(&self) -> GradientCapability {
        self.model.gradient_capability()
    }

    pub fn inner(&self) -> &Arc<dyn Model> {
        &self.model
    }

    pub fn predict(&self, batch: &[Point]) -> Result<Vec<f64>> {
        for x in batch {
            self.space.validate_relaxed(x)?;
        }
        if batch.is_empty() {
            return Ok(Vec::new());
        }
        let values = self.model.predict(batch)?;
        if values.len() != batch.len() {
            return Err(Error::Model(format!(
                "model returned {} values for {} points",
                values.len(),
                batch.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Model(format!(
                "non-finite prediction {} for point {}",
                values[i], i
            )));
        }
        Ok(values)
    }

    pub fn predict_one(&self, x: &Point) -> Result<f64> {
        Ok(self.predict(std::slice::from_ref(x))?[0])
    }

    /// Analytic gradient when the model has one, central finite differences otherwise.
    pub fn gradient(&self, batch: &[Point]) -> Result<GradientResult> {
        for x in batch {
            self.space.validate_relaxed(x)?;
        }
        if batch.is_empty() {
            return Ok(GradientResult { gradients: vec![] });
        }
        let gradients = match self.gradient_capability() {
            GradientCapability::Analytic => self.model.gradient(batch)?,
            GradientCapability::FiniteDifference => {
                finite_difference_gradient(self.model.as_ref(), batch)?
            }
        };
        if gradients.len() != batch.len() || gradients.iter().any(|g| g.len() != self.n()) {
            return Err(Error::Model(format!(
                "gradient has wrong shape for a batch of {} points with n = {}",
                batch.len(),
                self.n()
            )));
        }
        if gradients.iter().flatten().any(|g| !g.is_finite()) {
            return Err(Error::Model("non-finite gradient entry".into()));
        }
        Ok(GradientResult { gradients })
    }

    pub fn gradient_one(&self, x: &Point) -> Result<Vec<f64>> {
        Ok(self
            .gradient(std::slice::from_ref(x))?
            .gradients
            .pop()
            .expect("one row"))
    }
}
