//! Channel probing for coherent optical transponders.
//!
//! Estimates the generalized SNR (GSNR) of a lightpath by transmitting a
//! probe signal, reading the receiver Q-factor, and inverting the probe
//! transponder's back-to-back Q-over-OSNR characterization. The estimate
//! feeds a margin calculation against a catalog of transponder operating
//! modes, from which the highest-rate feasible configuration is selected.
//!
//! The crate ships its own synthetic link model (amplified spans with ASE
//! accumulation plus a closed-form self-channel nonlinear-interference
//! term), so the whole probe-estimate-recommend chain can be exercised and
//! verified against known ground truth without lab hardware.

pub mod error;
pub mod experiment;
pub mod gn_reference;
pub mod link_model;
pub mod probe_engine;
pub mod recommender;
pub mod transponder_model;
pub mod units;

pub use error::Error;
pub use link_model::{FiberSpan, LaunchSpec, Lightpath, SpectrumSlot, Topology};
pub use probe_engine::{ProbeResult, ProbeRunSettings};
pub use recommender::{Classification, MarginEntry, Recommendation};
pub use transponder_model::{ModFormatSpec, QOverOsnrSample, QuadraticFit, TransponderConfig};
