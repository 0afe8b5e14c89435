//! Dense complex operators, density matrices and piecewise-constant
//! propagation. All generators are in MHz (2π implicit) and durations in µs.

mod density;
mod matrix;
mod operators;
mod propagation;

pub use density::{
    expectation, partial_trace_electron, partial_trace_nuclear, DensityMatrix, POSITIVITY_TOL,
    TRACE_TOL,
};
pub use matrix::{c, re, ComplexMatrix, HermitianEigen, Ket, C64, HERMITIAN_TOL};
pub use operators::{
    embed_spin_half, kron_all, pauli, spin1_operators, spin_half_operators, tensor_product,
};
pub use propagation::{
    apply_unitary, propagate, propagate_ket, unitarity_error, PiecewiseConstantHamiltonian,
};
