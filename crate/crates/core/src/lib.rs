//! Ultrasound receive beamforming: RF simulation, time-of-flight migration,
//! classical and adaptive beamformers, a per-pixel neural combiner and the
//! image metrics used to compare them.

pub mod acoustics;
pub mod beamformers;
pub mod flops;
mod error;
pub mod imaging;
pub mod io;
pub mod migration;
pub mod neural;
pub mod pipeline;
pub mod simulator;

pub use error::{Error, Result};
