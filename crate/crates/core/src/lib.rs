//! One-time-grab sample sizing.
//!
//! Given `N` points holding `C` disjoint structures plus outliers, find the
//! smallest `r` such that a single uniform grab of `r` points contains at least
//! `dof` points of every structure with probability at least `P`.
//!
//! * [`hypergeom`] evaluates the exact coverage probability.
//! * [`bounds`] evaluates the closed-form union bound and its variants.
//! * [`sizing`] searches for the minimal `r` under either predicate.
//! * [`montecarlo`] simulates grabs and estimates `r` empirically.
//! * [`baselines`] counts samples drawn by iterative samplers.
//! * [`demo`] recovers synthetic lines and planes from one grab.

pub mod baselines;
pub mod bounds;
pub mod cli;
pub mod demo;
pub mod error;
pub mod hypergeom;
pub mod model;
pub mod montecarlo;
pub mod sizing;

pub use error::{Error, Result};
pub use model::{validate_population, BoundVariant, DeltaBinomial, GrabOutcome, P0Form, PopulationSpec, Requirement};
pub use sizing::{min_grab_size, Method, SizingOptions, SizingResult};
