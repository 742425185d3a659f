//! Configuration, checkpoints, artifacts and commands of the `nrrd` binary.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, load_checkpoint_on, save_checkpoint};
pub use commands::run;
pub use config::{parse_config, to_canonical_string, Command, RunConfig};
pub use error::{CliError, Result};
