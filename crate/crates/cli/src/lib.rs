//! Front end for the parking planner: runs scenarios, writes artifacts and
//! plots, and compares against the Reeds-Shepp baseline.

pub mod artifact;
pub mod commands;
pub mod svg;

pub use artifact::RunArtifact;
pub use commands::{CliError, Format};
