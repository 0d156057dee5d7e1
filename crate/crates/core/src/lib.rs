//! Hidden quantum Markov models: simulation, corruption-aware data filtering,
//! and likelihood training by unitary row-pair updates of stacked Kraus
//! operators.

pub mod circuit;
pub mod cxmat;
pub mod error;
pub mod filter;
pub mod gen;
pub mod hqmm;
pub mod learn;
pub mod optim;

pub use error::{Error, Result};
