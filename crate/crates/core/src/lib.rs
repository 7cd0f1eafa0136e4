//! Sample-based quantum diagonalization (SQD) with multi-programmed sampling.
//!
//! The crate covers the whole desk-scale workflow:
//!
//! * [`fcidump`]: FCIDUMP I/O and model Hamiltonians.
//! * [`fermion`]: determinants, bitstring encoding, Slater–Condon elements.
//! * [`eigen`]: lowest-eigenpair solvers and the exact full-CI reference.
//! * [`sampler`]: measurement sampling with readout and cross-talk noise.
//! * [`sqd`]: configuration recovery, batching, and the ext-SQD expansion.
//! * [`multiprog`]: coupling maps, layouts, circuit composition and splitting.
//! * [`harness`]: randomized-block experiments, statistics and reports.

pub mod eigen;
pub mod error;
pub mod fcidump;
pub mod fermion;
pub mod harness;
pub mod multiprog;
pub mod rng;
pub mod sampler;
pub mod sqd;

pub use error::Error;
