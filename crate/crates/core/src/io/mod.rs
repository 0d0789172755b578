//! Run configuration and output writers.

pub mod config;
pub mod csv;
pub mod vtk;

pub use config::{parse_config, GeometryConfig, MaterialConfig, OutputConfig, RunConfig, SolverConfig};
pub use csv::{read_curve, write_curve, CurveWriter, CURVE_HEADER};
pub use vtk::{write_field_snapshot, write_mesh};
