//! Set-based reachability for polynomial nonlinear systems built on sparse
//! polynomial zonotopes.
//!
//! The crate provides:
//! - sparse polynomial zonotopes and the set operations on them
//!   ([`polyzono`]), with zonotopes and intervals as convex carriers,
//! - sparse multivariate polynomials with interval range bounding ([`poly`]),
//! - polynomial ODE models, Taylor abstraction and a simulation oracle
//!   ([`dynamics`]),
//! - a dependency-preserving reachability engine ([`reach`]),
//! - extraction of reachable subsets from a finished analysis, plus
//!   falsification, safe-set partitioning and optimization over reachable
//!   sets ([`extract`]).
//!
//! Dependent factors carry integer identifiers across all operations, which
//! is what makes the reachable sets evaluable after the fact: fixing the
//! initial-set factors of the final set yields an enclosure of the reachable
//! set of the corresponding initial point without re-running the analysis.

pub mod dynamics;
pub mod error;
pub mod extract;
pub mod interval;
pub mod lp;
pub mod poly;
pub mod polyzono;
pub mod reach;
pub mod taylor_model;
pub mod zonotope;

pub use error::{Error, Result};
pub use interval::IntervalVector;
pub use poly::{PolyExpr, RangeBound};
pub use polyzono::{IdGenerator, PolyZonotope};
pub use taylor_model::TaylorModel;
pub use zonotope::{ReductionMethod, Zonotope};
