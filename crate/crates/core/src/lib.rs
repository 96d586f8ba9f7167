//! Spectral collocation in space and fractional Hamiltonian boundary value
//! methods in time for
//!
//! ```text
//! D^α u = u_xx - c(x) u + f(x, t)   on (a, b) × (0, T]
//! ```
//!
//! with Robin conditions at both ends.
//!
//! The pieces, in the order a solve uses them:
//!
//! * [`rmcp1`]: polynomials that satisfy the boundary conditions, with their
//!   derivative operational matrix and collocation points
//! * [`spacedisc`]: the problem description and the semi-discrete linear system
//! * [`timegrid`]: graded-then-uniform time meshes
//! * [`weighted_jacobi`]: orthonormal Jacobi polynomials, Gauss rules and the
//!   precomputed memory tables
//! * [`fhbvm`]: the step-by-step integrator with dense output
//! * [`mlf`]: Mittag-Leffler values for exact solutions
//! * [`bench`]: reference problems, error norms and the text formats of the CLI
//!
//! ```
//! use robin_fhbvm::bench::{run_case, RunConfig};
//!
//! let cfg = RunConfig { problem: "example2".into(), alpha: 0.6, n: 8, big_m: 20, v: 15, ..RunConfig::default() };
//! let case = run_case(&cfg)?;
//! assert!(case.report.e_inf < 1e-10);
//! # Ok::<(), robin_fhbvm::Error>(())
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bench;
pub mod error;
pub mod fhbvm;
pub mod mlf;
pub mod polycore;
pub mod rmcp1;
pub mod spacedisc;
pub mod special;
pub mod timegrid;
pub mod weighted_jacobi;

pub use error::{Error, Result};
