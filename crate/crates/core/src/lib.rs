//! Simulation and analysis toolkit for polarization-resolved single-photon
//! emitter spectroscopy: a Monte Carlo time-tag generator, a correlation and
//! lifetime analysis chain, cosine-squared and six-fold polarization fits,
//! time-resolved polarization extraction, dipole-angle statistics and a
//! transition-dipole engine over gridded wavefunctions.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod fitting;
pub mod geometry;
pub mod io;
pub mod photophysics;
pub mod recipes;
pub mod simulator;
pub mod tdm;

pub use error::{Error, Result};
