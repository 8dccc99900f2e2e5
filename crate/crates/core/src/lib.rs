//! Space-time least-squares discretization of the 1D heat equation with P1
//! elements in space and time, error norms, convergence studies and a
//! certified reduced-basis greedy for parametrized diffusion.

pub mod cg;
pub mod convergence;
pub mod error;
pub mod mesh_fe;
pub mod norms;
pub mod rb_greedy;
pub mod riesz;
pub mod spacetime_system;

pub use error::{Error, Result};
