//! File formats: stack configuration, phase CSV, calibration batch
//! manifests, and report serialization.
//!
//! All formats carry units in their key or column names; nothing is
//! implicit. Phases are stored in radians, `_deg` keys convert at the
//! boundary. Floats in CSV files are written with 17 significant digits so
//! re-reading reproduces them bit for bit.

mod manifest;
mod phase_csv;
mod report;
mod stack_config;

pub use manifest::{load_manifest, ManifestLoad};
pub use phase_csv::{read_phase_csv, write_phase_csv, write_plot_data};
pub use report::{
    write_toml_report, CalibrationReportFile, FitReportFile, FitStartSummary, FittedLayer,
    SampleFitEntry,
};
pub use stack_config::{LayerSpec, NoiseSpec, StackConfig};
