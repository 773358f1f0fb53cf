//! Simulation of far-field self-interference (FFSI) mitigation for full-duplex
//! multi-user MIMO OFDM.
//!
//! The crate is organised bottom-up:
//!
//! - [`array_geometry`]: ULA steering vectors and beam correlations.
//! - [`scenario`]: users, scatterer map, system constants, link budget.
//! - [`beamforming`]: conventional, max-SINR Rx and max-SLNR Tx beamformers.
//! - [`fd_link`]: frame simulation, ZF precoding and LS equalization.
//! - [`estimation`]: joint LS channel estimation and digital SI cancellation.
//! - [`selection`]: prior metrics and greedy action assignment.
//! - [`emergent`]: CA-CFAR detection of new scatterers, recovery, angle estimate.
//! - [`harness`]: Monte Carlo experiments and CSV output.

pub mod array_geometry;
pub mod beamforming;
pub mod config;
pub mod emergent;
pub mod error;
pub mod estimation;
pub mod fd_link;
pub mod harness;
pub mod linalg;
pub mod scenario;
pub mod selection;

pub use error::{Error, Result};
pub use linalg::{CMat, CVec};
