//! Solvers and verifiers for a two-type signaling market in which schools
//! choose fees and deterministic monitoring policies.
//!
//! The crate is organised bottom-up:
//!
//! * [`market`]: model primitives and cost inversion.
//! * [`monitoring`]: step monitoring policies and the signals they produce.
//! * [`epbe`]: canonical equilibrium construction for any policy profile.
//! * [`refine`]: equilibrium checks and the brute-force enumerator.
//! * [`outer`]: monopoly and competition solvers with deviation audits.

pub mod epbe;
pub mod error;
pub mod market;
pub mod monitoring;
pub mod outer;
pub mod refine;

pub use error::{Error, Result};

/// Default tolerance for root finding and inequality comparisons.
pub const DEFAULT_TOL: f64 = 1e-9;
