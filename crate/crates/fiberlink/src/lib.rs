//! Modeling and simulation of compensated fiber-optic RF transfer chains.
//!
//! A reference tone travels from a local site (LS) through one or more
//! multiple-access relay stations (MARS) to a remote site (RS). Each relay
//! runs a phase-locked loop steered by round-trip comparisons on the fiber
//! sub-links on either side of it, so that fiber phase noise is cancelled
//! and a stable tone can be extracted at every station and at the far end.
//!
//! The crate provides:
//!
//! * power-law fiber noise, noise-floor and RF-source models ([`noise`]),
//! * the station control-loop transfer function ([`pll`]),
//! * chain topology and propagation delays ([`topology`]),
//! * frequency-domain residual phase-noise spectra for single relays and
//!   arbitrary chains, plus free-running and cascaded references
//!   ([`freqdomain`]),
//! * phase-noise-PSD to Allan-deviation conversion and time-series Allan
//!   estimation ([`stability`]),
//! * the exact static lock algebra ([`phase_algebra`]),
//! * a time-domain loop simulation with transport delays ([`oracle`]),
//! * batch parameter sweeps ([`sweep`]),
//! * config parsing, presets and golden-fixture bookkeeping ([`config`],
//!   [`fixtures`]).

pub mod config;
pub mod error;
pub mod fixtures;
pub mod freqdomain;
pub mod noise;
pub mod oracle;
pub mod phase_algebra;
pub mod pll;
pub mod stability;
pub mod sweep;
pub mod topology;

pub use error::Error;
