//! Two-particle tunneling wave-packet simulator.
//!
//! A light projectile meets a heavier barrier particle through a double-delta
//! interaction. The wave function is synthesised spectrally from scattering
//! eigenstates in centre-of-mass coordinates; the barrier's displacement and
//! recoil are read off conditional lab-frame averages and compared with a
//! stationary-phase prediction.

pub mod amplitude;
pub mod analysis;
pub mod config;
pub mod error;
pub mod evolve;
pub mod experiment;
pub mod initial;
pub mod oracle;
pub mod reference;
pub mod report;
pub mod stationary;

pub use error::{Error, Result};
