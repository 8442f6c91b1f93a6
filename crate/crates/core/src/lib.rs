pub mod dynamics;
pub mod error;
pub mod harness;
pub mod lattice;
pub mod observables;
pub mod pde;
pub mod trig;

pub use error::{Error, Result};
