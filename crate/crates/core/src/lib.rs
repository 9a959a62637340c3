//! Fixed-energy phase shifts of piecewise-constant, spherically symmetric
//! potentials, and the recovery of such potentials from their phase shifts.
//!
//! The crate is `no_std` (it needs `alloc`). It contains the numerical core:
//!
//! - [`special`]: Riccati–Bessel functions `j_l`, `n_l` and their derivatives.
//! - [`potential`]: the layered potential model, the admissible search box and
//!   the `L2(R^3)` distance between potentials.
//! - [`forward`]: the interface-matching transfer-matrix solver for `δ(k, l)`.
//! - [`oracle`]: a variable-phase ODE integrator used to cross-check [`forward`].
//! - [`objective`]: the normalized phase-shift misfit and the target noise model.
//! - [`local`]: golden-section line search, the coordinate-ordered Powell
//!   variant, layer reduction, and their composition.
//! - [`global`]: iterative reduced random search with minimizing-set diameters.
//!
//! IO, file formats, the CLI and the threaded executor live in the `phaseshift`
//! crate.
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod forward;
pub mod global;
pub mod local;
pub mod objective;
pub mod oracle;
pub mod potential;
pub mod special;

pub use error::Error;
pub use forward::{phase_shift, phase_shifts, shift_count, PhaseShiftSet, TransferMatrix};
pub use global::{
    irrs, IrrsParams, Minimizer, MinimizingSet, Sequential, SlotRunner, StabilityReport, Verdict,
};
pub use local::{lmm, LocalParams, SearchPoint};
pub use objective::{add_noise, phi, InverseProblem, NoiseSpec};
pub use potential::{AdmissibleSet, PotentialConfig};

/// Result alias used throughout the crate.
pub type Result<T> = core::result::Result<T, Error>;
