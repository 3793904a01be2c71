//! Numerical laboratory for fully nonlinear parabolic equations with a
//! monotone nonlocal term of sublevel-measure type,
//!
//! ```text
//! u_t + F(u, grad u, Hess u, m(K ∩ {u(.,t) < u(x,t)})) = 0,
//! ```
//!
//! built around four pieces: an explicit monotone finite-difference scheme
//! with per-step sublevel measure indexing ([`evolve`]), quasiconvex and
//! power-convex envelope computations ([`envelopes`]), sampling checkers for
//! the structural assumptions on the operator ([`checks`]), and closed-form
//! references with barrier verifiers ([`oracles`]).

pub mod analysis;
pub mod checks;
pub mod config;
pub mod envelopes;
pub mod error;
pub mod evolve;
pub mod fields;
pub mod matrix;
pub mod nonlocal;
pub mod operators;
pub mod oracles;
pub mod report;

pub use error::{Error, Result};
pub use fields::{GridSpec, ScalarField};
pub use nonlocal::{build_index, ObstacleSet, SublevelMeasureIndex};
pub use operators::{Operator, OperatorSpec};
