//! Experiment configuration, run manifests and trajectory snapshots.

mod config;
mod manifest;
mod snapshot;

pub use config::{
    parse_config, ConditionsSpec, ControlSpec, EventSpec, ExperimentConfig, InitialState, TargetSpec,
};
pub use manifest::{sha256_file, BasisSummary, OutputRecord, RunManifest};
pub use snapshot::{read_snapshot, write_snapshot, SNAPSHOT_MAGIC, SNAPSHOT_VERSION};
