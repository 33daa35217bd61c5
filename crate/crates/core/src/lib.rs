//! Minimum-norm interpolation and regularized learning in sequence spaces.
//!
//! The crate covers three settings for `min ||x|| s.t. L(x) = y` and for
//! `min Q_y(L(x)) + lambda phi(||x||)`:
//!
//! * a Hilbert space entered through the Gram matrix of the functionals,
//! * `lp` for `1 < p < inf`, solved through the lq duality map,
//! * `l1` with pre-dual `c0`, solved by proximal fixed-point iterations and
//!   cross-checked by an independent simplex-based LP route.
//!
//! Sequences are finitely supported ([`SparseSeq`]) and indices are 0-based.

pub mod duality;
pub mod error;
pub mod instance;
pub mod linalg;
pub mod lp;
pub mod mni;
pub mod prox;
pub mod reg;
pub mod sampling;
pub mod seq;
pub mod verify;

pub use error::{Error, Result};
pub use instance::{load_problem, Mode, ProblemInstance};
pub use mni::{IterationConfig, SolveReport};
pub use prox::{LossKind, LossSpec};
pub use reg::{RegProblem, Regularizer};
pub use sampling::{Coefs, SamplingOperator};
pub use seq::{Norm, SpaceTag, SparseSeq};
pub use verify::CheckReport;
