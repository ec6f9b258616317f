//! Simulation and calibration pipeline for a cavity-assisted quantum
//! non-demolition detector of itinerant microwave photons.
//!
//! The crate is organised bottom-up:
//!
//! - [`quantum`]: dense Lindblad engine, steady states, correlators, spectra
//! - [`device`]: device parameters, dispersive shift, dressed states and the
//!   qubit-state dependent reflection coefficient
//! - [`protocol`]: error model of the Ramsey-based detection protocol
//! - [`readout`]: single-shot readout statistics and double-Gaussian fits
//! - [`moments`]: matched filtering and the reflected-field moment check
//! - [`calibration`]: Mollow-triplet and AC-Stark power calibrations, loss
//! - [`runner`]: the batch experiments behind the command line tool

pub mod acceptance;
pub mod calibration;
pub mod config;
pub mod device;
pub mod error;
pub mod fit;
pub mod grid;
pub mod moments;
pub mod output;
pub mod protocol;
pub mod quantum;
pub mod readout;
pub mod runner;

pub use error::{Error, Result, Warned, Warning};
pub use grid::{SpectrumTrace, TimeTrace, UniformGrid};
