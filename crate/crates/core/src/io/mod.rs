//! Configuration parsing, field files, run manifests and the run driver.

mod config;
mod field_csv;
mod manifest;
mod run;

pub use config::{parse_config, parse_with_mode, InitialSource, Mode, PotentialSource, RunConfig, KEYS};
pub use field_csv::{field_from_csv, field_to_csv, read_field, write_field};
pub use manifest::{sha256_file, write_atomic, Manifest, RunStatus};
pub use run::{execute, execute_file, run_config, RunOutcome, EXIT_NOT_CONVERGED, EXIT_OK, EXIT_USAGE};
