//! Numerical workbench for hyperbolic polycycles of planar polynomial vector
//! fields: construction with prescribed hyperbolicity ratios, combinatorial
//! cyclicity bounds, Melnikov derivatives, connection breaking and detection
//! of the limit cycles that bifurcate.

pub mod approx;
pub mod bifurcate;
pub mod builder;
pub mod error;
pub mod flow;
pub mod graphic;
pub mod melnikov;
pub mod par;
pub mod polyalg;
pub mod real;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
