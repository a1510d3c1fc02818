//! Symmetric convolution kernels for binary crossbar cores.
//!
//! Kernels of the form `K[i][j][k] = B · f(σ1^(i-1) σ2^(j-1) ρ_k)` lower
//! exactly onto a 256 × 256 core. The crate covers the permutation algebra,
//! kernel materialization and membership, the block Toeplitz convolution
//! matrix, the core compiler and its inverse, projection of arbitrary
//! kernels onto the family, and a small staged trainer for binary networks
//! built from such kernels.

pub mod compiler;
pub mod error;
pub mod kernels;
pub mod permutation;
pub mod projection;
pub mod tensor;
pub mod toeplitz;
pub mod trainer;

pub use compiler::{
    assemble_weight_matrix, check_core_constraints, compile, decompile, greedy_color, simulate_core, Coloring,
    Conflict, CoreProgram, Diagnostic,
};
pub use error::{Error, Result};
pub use kernels::{
    count_family, is_symmetric_kernel, materialize, StrengthFunction, SymmetricKernelSpec, SymmetricStructure,
};
pub use permutation::{enumerate_commuting_pairs, Permutation};
pub use tensor::{Kernel, Matrix};
pub use toeplitz::{build_block_toeplitz, conv2d_valid, BlockToeplitzMatrix};
