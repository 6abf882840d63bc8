//! Exact and open-system dynamics of the Rabi dimer.

pub mod error;
pub mod fockspace;
pub mod linalg;
pub mod model;
pub mod observables;
pub mod propagate;
pub mod spectral;
pub mod sweep;
pub mod trajectories;

pub use error::{Error, Result};
pub use fockspace::{FockSpace, OperatorMatrix, Qubit, Site, SiteLabel, StateVector};
