//! Standard-library side of `glider-core`: external model processes, file
//! formats, worker pools and the `glider` command line.

pub mod cli;
pub mod error;
pub mod external;
pub mod formats;
pub mod models;
pub mod parallel;
pub mod serve;

pub use error::{Error, Result};
pub use external::{ExternalModel, LaunchSpec};
pub use models::{Builtin, HandlePool, ModelSpec};
