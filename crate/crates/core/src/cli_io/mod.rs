//! Files in and out: CSV ingestion for the per-pair analysis, declarative
//! configuration documents, and the report and plot-data writers behind the
//! `csmt` command line.

mod analysis;
mod config;
mod data;
pub mod format;
mod simulation;

pub use analysis::{
    run_analysis, write_analysis, write_analysis_csv, write_human_table, write_json_lines, AnalysisConfig,
    AnalysisRow, MethodOutcome, ANALYSIS_SCHEMA_VERSION,
};
pub use config::{from_value, load_document, parse_document, KSetting, OutputFormat, Preset};
pub use data::{load_csv, write_dataset_csv, ColumnRoles, PairDataset, Table};
pub use simulation::{
    run_simulation, write_qq_csv, write_rate_table, write_simulation_outputs, PowerSection, SampleSizes, ScenarioKind, SimulationConfig,
    SimulationDocument, SimulationOverrides,
};
