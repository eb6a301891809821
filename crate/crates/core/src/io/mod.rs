//! Configuration files and output formats.

pub mod config;
pub mod csv;
pub mod vtk;

pub use config::{load_experiment, parse_config, parse_config_with, serialize_config};
pub use csv::{write_csv_series, CsvSeries};
pub use vtk::{vtk_snapshot, write_vtk_snapshot, DerivedFields};
