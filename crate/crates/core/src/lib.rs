//! Finite-element k-eigenvalue experiments for the heterogeneous one-group
//! diffusion equation on the unit cube, together with dense emulation of the
//! block encodings needed to run phase estimation on the same operators.
//!
//! The modules build on one another:
//!
//! * [`geometry`]: dyadic meshes, material maps, node indexing.
//! * [`assembly`]: Q1 (and 2D P1) stiffness, absorption and fission matrices.
//! * [`bpx`]: multilevel interpolation and the BPX preconditioner.
//! * [`eigensolve`]: the Hamiltonian action, leading eigenpairs, seeds and
//!   emulated phase estimation.
//! * [`blockenc`]: row/column oracles, permutation fix-ups, LCU assembly and
//!   the Hamiltonian factor chain.
//! * [`lab`]: refinement ladders, order estimates, state preparation and the
//!   drivers behind the `keff-lab` binary.

pub mod assembly;
pub mod blockenc;
pub mod bpx;
pub mod dense;
pub mod eigensolve;
pub mod error;
pub mod geometry;
pub mod lab;
pub mod sparse;

pub use error::{Error, Result};
