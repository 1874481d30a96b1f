//! Yukawa interaction in 0+1 dimensions.
//!
//! Spectra and Euclidean correlators of a boson coupled to a single fermion
//! through `lambda * phi * psibar psi`, computed by closed-form quantum
//! mechanics ([`analytic`]), truncated exact diagonalization ([`exactdiag`]),
//! Matsubara perturbation theory ([`matsubara`], [`loops`]) and lattice
//! Monte Carlo ([`lattice`]), with [`cli`] tying the routes together.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod cli;
pub mod error;
pub mod exactdiag;
pub mod lattice;
pub mod loops;
pub mod matsubara;
pub mod model;
pub mod quad;
pub mod series;

pub use error::{Error, Result};
pub use model::{Beta, ModelParams, NumericPolicy, RegularizationScheme};
