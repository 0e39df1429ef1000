//! File formats, checkpoints, result tables, figures and experiment commands
//! around the `audinv_core` latent-recovery library.

pub mod checkpoint;
pub mod experiment;
pub mod figures;
pub mod results;
pub mod sc09;
pub mod wav;
