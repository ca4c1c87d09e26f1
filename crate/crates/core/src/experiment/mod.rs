//! Configuration, persistence and the end-to-end experiment pipeline.

pub mod config;
pub mod ic;
pub mod pipeline;
pub mod single;
pub mod snapshot;

pub use config::{DnsStage, IcSpec, LBar, RunConfig};
pub use ic::{gen_ic, gen_ic_coeffs, IcProfile};
pub use pipeline::{run_pipeline, run_pipeline_with, verify_manifest, PipelineReport, Summary};
pub use single::{fit_noise_from_dns, run_single, write_grid_csv, SingleRun};
pub use snapshot::Snapshot;
