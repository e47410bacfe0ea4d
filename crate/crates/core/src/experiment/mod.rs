//! Config-driven batch experiments.
//!
//! One flat TOML file describes one experiment. [`validate_file`] checks it
//! against the catalogue of [`list_experiments`] and fills in defaults;
//! [`run`] executes it, writes the payload files and a `manifest.json`
//! holding the resolved config, its content hash, the payload digests and
//! the wall-clock duration.

mod instances;
mod runner;
mod schema;

pub use instances::random_measure_tuples;
pub use runner::{
    config_hash, exit_code, output_root, protocol_auxiliary, protocol_config, run, Manifest, PayloadEntry,
    ProtocolPoint, RunOutcome, MANIFEST_FILE, OUTPUT_ROOT_ENV,
};
pub use schema::{
    list_experiments, sample_config, validate_file, validate_str, Check, ExperimentSchema, FieldSpec, FieldType,
    ResolvedConfig, KINDS,
};
