//! Simulation and detection engine for a smartphone-based earthquake early
//! warning (EEW) network.
//!
//! The crate has two halves that share one forward model:
//!
//! * **Simulation** — synthesize a phone network from population density
//!   ([`netsim`]), propagate P/S wavefronts through a homogeneous medium
//!   ([`geo`]), attenuate ground motion ([`gmm`]), and emit a realistic
//!   trigger stream with clock error, pick latency, and random false
//!   positives ([`trigger`]).
//! * **Detection** — confirm earthquakes from a trigger stream with
//!   weighted spatio-temporal DBSCAN, locate them by grid search over
//!   P-wave moveout, and estimate magnitude by inverting the attenuation
//!   law ([`detect`]); then turn detections into per-city intensity and
//!   warning-time products ([`alert`]) and score runs against ground truth
//!   ([`metrics`]).
//!
//! [`scenario`] holds the configuration schema tying everything together,
//! [`pipeline`] runs scenarios end to end, and [`quality`] computes waveform
//! quality metrics used to weight individual sensors.

pub mod alert;
pub mod detect;
mod error;
pub mod geo;
pub mod gmm;
pub mod metrics;
pub mod netsim;
pub mod pipeline;
pub mod quality;
pub mod rng;
pub mod scenario;
pub mod snapshot;
pub mod trigger;

pub use error::{Error, Result};
