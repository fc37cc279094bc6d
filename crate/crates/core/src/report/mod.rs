//! Config parsing, the analysis pipeline behind the command-line tool, and
//! the bundled presets.

mod config;
mod pipeline;
mod presets;

pub use config::{
    parse_config, AnalysisConfig, ArchitectureConfig, BlockMatrixConfig, DataPoint, LimitsConfig, RegionsConfig,
    Resolved, SearchConfig, SliceKind, VerifyConfig, SCHEMA_VERSION,
};
pub use pipeline::{
    run_pipeline, run_regions, AnalysisReport, BlockSummary, ConstraintEntry, PairEntry, RelationSet, RunOptions,
    SingleBlockEntry, SkippedEntry, Stage, Summary, ToolInfo, TransformSection,
};
pub use presets::{find_preset, Preset, ALIASES, PRESETS};

/// JSON schema of config documents.
pub const CONFIG_SCHEMA: &str = include_str!("../../schemas/config.v1.json");
/// JSON schema of reports.
pub const REPORT_SCHEMA: &str = include_str!("../../schemas/report.v1.json");
