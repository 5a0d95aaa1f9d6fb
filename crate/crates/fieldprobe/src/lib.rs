//! Desk-scale simulator for local measurements of quantized fields on a
//! 1+1-dimensional lattice.
//!
//! A "system" scalar field is probed by coupling it to one or more
//! "probe" scalar fields inside a compact spacetime region. The crate
//! provides the discrete causal structure, exact Green operators for the
//! free and coupled dynamics, the scattering map identifying late-time
//! coupled observables with early-time uncoupled ones, Weyl-generator
//! algebra, Gaussian states, measurement instruments with post-selection
//! and causal composition, and the perturbative detector response.

pub mod algebra;
pub mod config;
pub mod detector;
pub mod error;
pub mod experiments;
pub mod green;
pub mod grid;
pub mod instruments;
pub mod lattice;
pub mod report;
pub mod scheme;
pub mod states;
pub mod util;

pub use error::{Error, Result};
pub use grid::{GridFunction, MultiComponentFunction};
pub use lattice::{causal_orderability, CausalOrder, Cell, Lattice, Region};

pub use algebra::{AlgebraContext, PolyObservable, SmearingClass, WeylSum};
pub use green::{born_series, CoupledOperator, GreenDirection, GreenOperator};
pub use states::QuasifreeState;
