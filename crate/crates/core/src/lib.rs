//! Simulation and numerical evaluation for fractional Brownian motion,
//! Riemann–Liouville processes and their weighted integrals: samplers,
//! integral operators, closed-form constants, small-ball Monte Carlo,
//! iterated-logarithm experiments and the randomized play-the-winner urn.

pub mod error;
pub mod formulas;
pub mod grid;
pub mod lil_lab;
pub mod mc;
pub mod operators;
pub mod paths;
pub mod process;
pub mod quad;
pub mod rng;
pub mod smallball;
pub mod stats;
pub mod urn;
pub mod verify;

pub use error::{Error, Result};
pub use grid::{GridKind, GridPath, TimeGrid};
pub use paths::{PathSampler, ProcessSampler};
pub use process::{BaseProcess, ProcessSpec};
pub use rng::SeedSpec;
