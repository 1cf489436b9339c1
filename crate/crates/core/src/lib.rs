//! Quantum-potential inversion in one space dimension.
//!
//! Given a quantum potential `Q(x, t)`, the crate solves for an amplitude `R` slice by slice,
//! builds the momentum field `p` from the continuity equation, the phase `S` from the
//! Hamilton-Jacobi equation, optionally reconstructs a classical potential `V` that makes the
//! whole system consistent, and reports every governing residual.
//!
//! Modules:
//! - [`expr`]: the expression language for user-supplied functions of `x` and `t`.
//! - [`grid`]: grids, fields, finite differences and cumulative quadratures.
//! - [`elliptic`]: the per-slice amplitude problem and its spectrum.
//! - [`madelung`]: momentum, phase, potential reconstruction, residuals and golden cases.
//! - [`cli`]: problem files, reports and the `qpot` command line.

pub mod cli;
pub mod elliptic;
pub mod expr;
pub mod grid;
pub mod madelung;
