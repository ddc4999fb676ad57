//! Simulation and analysis of two-spin entangled-state storage under
//! CPMG and Uhrig dynamical decoupling.

pub mod bathfn;
mod ddtrig;
pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod sequence;
pub mod protocols;
pub mod spinops;
pub mod units;

pub use error::{Error, Result};
