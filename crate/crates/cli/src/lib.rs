//! Batch analysis of measured spin-correlation coefficients: input parsing, per-bin
//! profile scans of every correlation marker, and report emission.

pub mod analysis;
mod cli;
pub mod input;
pub mod oracle;
pub mod report;

pub use analysis::{run_analysis, AnalysisError, AnalysisOptions, BinReportRow, ObservableResult};
pub use cli::{
    cli_main, run, EXIT_IO, EXIT_NO_INPUT, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, EXIT_VALIDATION,
};
pub use input::{parse_input, parse_input_path, AnalysisRequest, InputError};
pub use report::{emit_report, format_value, Report, ReportFormat};
