//! Lie-algebraic analysis of two exchange-coupled spin-1 particles.
//!
//! - [`su3`]: the single-spin basis and its structure tables.
//! - [`model`]: drift, controls, observables and states of the pair.
//! - [`lie`]: dynamical Lie algebra closure, controllability and observability.
//! - [`cartan`]: the parity grading of `su(9)` and its bracket relations.
//! - [`dynamics`]: piecewise-constant propagation and the equivalent partner model.
//! - [`ident`]: fitting couplings and initial state to measured records.
//! - [`io`]: model, schedule, trace and experiment files.
//!
//! ```
//! use spinlie::lie::controllability_verdict;
//! use spinlie::model::Couplings;
//!
//! let report = controllability_verdict(&Couplings::new(1.0, 2.0, 0.5))?;
//! assert_eq!(report.dimension, 80);
//! # Ok::<(), spinlie::Error>(())
//! ```

pub mod cartan;
pub mod dynamics;
pub mod error;
pub mod ident;
pub mod io;
pub mod lie;
pub mod model;
pub mod operator;
pub mod su3;

pub use error::{Error, Result};

// Runs the guide's code blocks as doc-tests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/su3.md")]
    mod su3 {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/controllability.md")]
    mod controllability {}
    #[doc = include_str!("../../../book/src/observability.md")]
    mod observability {}
    #[doc = include_str!("../../../book/src/parity.md")]
    mod parity {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/equivalence.md")]
    mod equivalence {}
    #[doc = include_str!("../../../book/src/identification.md")]
    mod identification {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
