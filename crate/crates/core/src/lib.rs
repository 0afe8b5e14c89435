//! Spin-dynamics models for optically pumped nuclear hyperpolarization with
//! randomly oriented NV centers in nanodiamonds.
//!
//! Frequencies are expressed in MHz with the factor of 2π left implicit, so a
//! value `f` corresponds to an angular frequency of `2π·f` rad/µs. Times are in
//! µs. Every propagator applies the 2π when exponentiating a generator.
//!
//! Module overview:
//!
//! * [`spincore`]: dense complex operators, density matrices, piecewise-constant
//!   propagation.
//! * [`orientation`]: orientation-dependent NV Hamiltonians and optical
//!   initialization.
//! * [`dressed`]: double-quantum dressed states, Hartmann-Hahn matching and the
//!   flip-flop transfer Hamiltonian.
//! * [`sweep`]: Landau-Zener analytics and numerically exact detuning sweeps.
//! * [`cycles`]: iterated polarization cycles for one or a few nuclei.
//! * [`ensemble`]: rate-equation model of lattice-scale buildup with spin
//!   diffusion and Brownian rotation.

pub mod cycles;
pub mod dressed;
pub mod ensemble;
mod error;
pub mod numeric;
pub mod orientation;
pub mod rng;
pub mod spincore;
pub mod sweep;
pub mod table;
pub mod units;

pub use error::{Error, Result};
