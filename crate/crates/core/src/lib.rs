//! Insertion and deletion metrics for feature attributions on black-box
//! regression models, with exact oracles from the anchored decomposition.

pub mod attribution;
pub mod curve;
pub mod data;
pub mod decomposition;
pub mod error;
pub mod experiment;
pub mod feature_space;
pub mod format;
pub mod model;
pub mod policy;
pub mod roar;
pub mod selfcheck;
pub mod stats;
pub mod synthetic;

pub use attribution::{AttributionVector, MethodSpec};
pub use curve::{CurveMode, Ordering, TrajectoryReport};
pub use data::{load_csv, Dataset, Schema};
pub use decomposition::{decompose, AnchoredDecomposition, CornerTable};
pub use error::{Error, Result};
pub use feature_space::{assemble_hybrid, FeatureKind, FeatureSpace, Point, SubsetMask};
pub use model::{BuiltinModel, ModelHandle};
pub use policy::{PairSet, PolicySpec};
