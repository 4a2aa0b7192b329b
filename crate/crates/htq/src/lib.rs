//! Temporal finite element matrices for the modified Hilbert transformation.
//!
//! The modified Hilbert transformation `H_T` maps the sine expansion of a
//! function on `(0, T)` onto the matching cosine expansion. Space-time
//! variational formulations of parabolic and hyperbolic problems need the
//! temporal Galerkin matrices
//!
//! ```text
//! M[i,j] = (phi_j,      H_T phi_i)_{L2(0,T)}
//! A[i,j] = (phi_j',     H_T phi_i)_{L2(0,T)}
//! B[i,j] = (phi_j',     H_T phi_i')_{L2(0,T)}
//! ```
//!
//! for piecewise polynomial bases `phi_i` on arbitrary meshes and degree
//! vectors. This crate assembles all three to near machine precision by
//! splitting every entry into analytic parts integrated by Gauss-Legendre
//! rules and weakly singular parts integrated exactly by log-weight
//! Gauss-Jacobi rules after Duffy-type transformations.
//!
//! The main pieces:
//!
//! - [`mesh`]: temporal meshes, degree vectors, and the global DOF map.
//! - [`shapefn`]: Lobatto (integrated Legendre) shape functions.
//! - [`quadrature`]: Gauss-Legendre and log-weight Gauss-Jacobi rules,
//!   tensor rules, and the log-kernel tensor identity.
//! - [`kernels`]: numerically stable evaluation of the transform kernel and
//!   its regularized logarithmic factors.
//! - [`spectral`]: an independent spectral realization of `H_T` used as a
//!   ground-truth oracle, plus a pointwise evaluator based on the weakly
//!   singular integral representation.
//! - [`assembly`]: the element-pair quadrature schemes and global assembly.
//! - [`solver`]: discrete systems for the model ODEs `u' + mu u = f` and
//!   `u'' + mu u = f` with h- and hp-refinement studies.
//! - [`cli`]: the command layer behind the `htq` binary.
//!
//! Every major capability has a runnable example under `examples/`; start
//! with `cargo run --release --example assemble_matrices`.

pub mod assembly;
pub mod cli;
mod error;
pub mod kernels;
pub mod linalg;
pub mod mesh;
pub mod quadrature;
pub mod shapefn;
pub mod solver;
pub mod spectral;

#[cfg(test)]
pub(crate) mod test_rng;

pub use error::{Error, Result};
