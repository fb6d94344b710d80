//! Branch/trunk neural operator for the put pricing map.
//!
//! The branch network reads the payoff sampled at fixed sensor prices, the
//! trunk network reads normalized `(t, x)`, and the price is the inner
//! product of their `N₁` outputs.

mod checkpoint;
mod dataset;
mod model;
mod train;

pub use checkpoint::{read_operator, write_operator};
pub use dataset::{
    build_dataset, load_dataset, save_dataset, DatasetManifest, SplitRule, SurfaceDataset, SurfaceEntry, MANIFEST_NAME,
};
pub use model::{
    encode_payoff, operator_forward, predict_surface, Architecture, Normalization, OperatorModel,
    PredictedSurface, SensorSet,
};
pub use train::{objective, objective_by_tuples, relative_l2, train, TrainReport};
