//! Vehicular fog computing lab: synthetic vehicle traces, a fog-node
//! service simulator, and from-scratch neural models that learn which
//! fog serves a location and what the service will cost, feeding a
//! handover route planner.

pub mod cli;
pub mod error;
pub mod eval;
pub mod experiments;
pub mod features;
pub mod fogsim;
pub mod geo;
pub mod models;
pub mod nncore;
pub mod rng;
pub mod routing;
pub mod scalar;
pub mod traces;

pub use error::{Error, Result};

/// Scalar the shipped pipeline runs at. The network stack itself is
/// generic over [`scalar::Scalar`]; these aliases pin the concrete
/// instantiation everything above `nncore` uses.
pub type Real = f64;

pub type Matrix = nncore::Matrix<Real>;
pub type DenseLayer = nncore::DenseLayer<Real>;
pub type Mlp = nncore::Mlp<Real>;
pub type LstmLayer = nncore::LstmLayer<Real>;
pub type LstmState = nncore::LstmState<Real>;
pub type SeqRegressor = nncore::SeqRegressor<Real>;
pub type AdamState = nncore::AdamState<Real>;
pub type Grads = nncore::Grads<Real>;
