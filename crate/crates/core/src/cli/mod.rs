//! Config files, result/summary CSVs, run manifests and SVG plots backing the
//! `activepos` command-line tool.

mod config;
mod manifest;
mod plot;
mod report;

pub use config::{parse_config, parse_config_str, serialize_config, ConfigError};
pub use manifest::{sha256_hex, verify_manifest, write_atomic, FileDigest, RunManifest, MANIFEST_FILE};
pub use plot::emit_plot;
pub use report::{
    read_results, results_csv, summarize_file, summary_csv, summary_text, write_results, ReportError, PLOT_FILE,
    RESULTS_FILE, SUMMARY_FILE, SUMMARY_TEXT_FILE,
};
