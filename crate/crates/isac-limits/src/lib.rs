//! MMSE-Rate region of MIMO integrated sensing and communication.
//!
//! * [`model`]: configuration, sensing statistics, deterministic sampling.
//! * [`sensing`]: the modified MMSE functional Φ and the channel estimator.
//! * [`waterfill`]: sensing- and communication-optimal water-filling.
//! * [`ba`]: constrained Blahut-Arimoto limit for the SISO channel.
//! * [`bounds`]: outer bound, SIB/CIB inner bounds, time sharing.
//! * [`compound`]: pilot-then-data signaling on a coincided channel.
//! * [`cli`]: config files, CSV datasets and run manifests.

pub mod ba;
pub mod bounds;
pub mod cli;
pub mod compound;
pub mod error;
pub mod linalg;
pub mod model;
pub mod sensing;
pub mod waterfill;

pub use error::{IsacError, Result};
