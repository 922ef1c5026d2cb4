//! Frictionless contact between two plane-strain elastic bodies coupled
//! through an independently discretized hybrid interface layer, using an
//! augmented-Lagrangian Nitsche formulation solved by semismooth Newton.

pub mod bench;
pub mod contact;
pub mod elasticity;
pub mod error;
pub mod geometry;
pub mod hybrid;
pub mod mesh_io;
pub mod output;
pub mod meshgen;
pub mod scenario;
pub mod solver;
pub mod sparse;

pub use error::{Error, Result};
