//! Thermodynamics with several conserved quantities.
//!
//! The crate is layered bottom-up: [`qcore`] holds dense Hermitian linear
//! algebra, [`gge`] builds generalized Gibbs states and solves for inverse
//! temperatures, [`bathtrade`] and [`extract`] implement the trade and
//! work-extraction protocols with implicit batteries, [`battery`] models
//! explicit ladder batteries, and [`numtheory`] provides exact rationals,
//! Bezout pairs and Farey sequences for robust bath selection. [`cli`] wires
//! everything to TOML configs and report files.

pub mod bathtrade;
pub mod battery;
pub mod cli;
pub mod error;
pub mod extract;
pub mod gge;
pub mod numtheory;
pub mod qcore;

pub use error::{Error, Result};
