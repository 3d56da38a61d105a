//! Simulation of multiparty key distribution over GHZ states, with eavesdropping
//! detected through violation of the N-partite Svetlichny inequality.
//!
//! * [`quantum`]: dense N-qubit states and planar spin measurements.
//! * [`protocol`]: setting profiles, round classification, Svetlichny coefficients.
//! * [`session`]: seeded end-to-end protocol runs producing transcripts.
//! * [`adversary`]: eavesdropper source models and their bound searches.
//! * [`analysis`]: estimators, key-rate bound and brute-force oracles.

pub mod adversary;
pub mod analysis;
pub mod error;
pub mod protocol;
pub mod quantum;
pub mod session;

pub use error::{Error, Result};
