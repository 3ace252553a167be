//! Calculus of quantum combs and certification of their quantum-memory cost.
//!
//! The crate is organised bottom-up:
//!
//! - [`tensor`]: dense complex operators on labelled tensor factors (partial
//!   trace/transpose, permutations, Hermitian spectral tools, Schmidt rank).
//! - [`choi`]: Choi operators of linear maps, map application and the link
//!   product.
//! - [`comb`]: deterministic and probabilistic combs, instruments, testers and
//!   realization synthesis.
//! - [`memory`]: decompositions certifying quantum-memory bounds, channel cost
//!   bounds and the closed-form covariant families.
//! - [`symmetry`]: block structures and isotypic decompositions of finite group
//!   representations, and the memory bounds they imply.
//! - [`discrimination`]: error probabilities and lower bounds on the
//!   operational distance between strategies.
//!
//! Composite indices are always lexicographic in wire-list order, and every
//! transpose is taken in the computational basis of each factor.

pub mod choi;
pub mod comb;
pub mod discrimination;
mod error;
pub mod memory;
pub mod random;
pub mod symmetry;
pub mod tensor;

pub use error::{Error, Result};

pub use num_complex::Complex64 as C64;

/// Dense complex matrix used throughout the crate.
pub type Matrix = nalgebra::DMatrix<C64>;
/// Dense complex column vector.
pub type Vector = nalgebra::DVector<C64>;
