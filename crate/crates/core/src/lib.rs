pub mod error;
pub mod interpolation_engine;
pub mod blaschke_carleson;
pub mod boundary_measures;
pub mod disk_geom;
pub mod dyadic_model;
pub mod lognum;
pub mod nevanlinna_gauges;
pub mod peak_builder;
pub mod quadrature;
pub mod witness_optimizer;

pub use error::{Error, Result};
pub use lognum::{log1p_exp, log_add_exp, log_sub_exp, DoubleDouble, LogMagnitude};
pub use boundary_measures::{BoundaryMeasure, GaugeFunction, SmirnovWeightParams};
pub use disk_geom::{Angle, Arc, CarlesonBox, DiskPoint, Gap, LogComplex};
pub use dyadic_model::{FamilyKind, PointIndex, PointKind, SequenceFamily};
pub use interpolation_engine::{BoundedInterpolant, PickOptions, PickProblem};
pub use nevanlinna_gauges::{Gauge, GaugeOptions, GaugeReport};
pub use peak_builder::{PeakFunction, PeakKind};
pub use quadrature::QuadOptions;
pub use witness_optimizer::{GridSpec, RhsMode, WitnessResult};
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
