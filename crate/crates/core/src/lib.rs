//! Proximal compositions and cocompositions of convex functions with linear
//! operators, finite proximal mixtures, comixtures, averages and sampled
//! proximal expectations.
//!
//! Everything lives in finite-dimensional Euclidean spaces. Functions come from
//! a catalog of closed proper convex atoms with exact proximity operators; the
//! composite objects are evaluated with fixed-step first-order solvers that
//! report residuals and, where available, duality gaps.
//!
//! Module map:
//!
//! * [`linalg`] dense operators, adjoints, spectral norms, pseudo-inverses
//! * [`funcat`] the function catalog and its transform calculus
//! * [`moreau`] envelopes, numerical conjugates and brute-force grid oracles
//! * [`proxcomp`] proximal compositions / cocompositions
//! * [`mixture`] proximal mixtures, comixtures, averages and expectations
//! * [`verify`] result-indexed property suites with JSON reports
//! * [`cli`] job configuration and the command implementations behind the binary

pub mod cli;
pub mod error;
pub mod exec;
pub mod funcat;
pub mod linalg;
pub mod mixture;
pub mod moreau;
pub mod proxcomp;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
pub use exec::Execution;
pub use funcat::{ConvexFunction, ExtReal, ProxFunction};
pub use linalg::{DenseMap, Vector};
pub use moreau::{SolveReport, SolveStatus, SolverOpts};
pub use proxcomp::CompositionSpec;
pub use mixture::MixtureSpec;
