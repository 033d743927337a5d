//! Difficulty estimation for block reconfiguration tasks.
//!
//! A task moves a set of blocks from an initial state A to a target state B.
//! Its difficulty is described by two quantities:
//!
//! * **effort**: kinetic energy spent transporting every block that has to
//!   move, found by optimal assignment, a support-respecting symbolic plan and
//!   minimum-acceleration trajectories ([`assign`], [`symplan`], [`trajectory`]);
//! * **risk**: probability that B falls when block positions are jittered,
//!   estimated by forward simulation ([`physics`], [`risk`]).
//!
//! [`analysis`] fits regression models of human difficulty judgments on these
//! two quantities and [`pipeline`] ties everything together.

pub mod analysis;
pub mod assign;
pub mod error;
pub mod geom;
pub mod scene;
pub mod physics;
pub mod pipeline;
pub mod risk;
pub mod seeds;
pub mod stimuli;
pub mod symplan;
pub mod trajectory;

pub use error::{Error, Result};
