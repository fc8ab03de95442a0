//! Simulator of an optical loop that converts orbital-angular-momentum
//! superpositions into trains of time-bin pulses and back.
//!
//! The pieces, bottom up:
//!
//! - [`mode_algebra`]: sparse complex amplitudes over (polarization, l, p, bin).
//! - [`elements`]: linear optical components acting on those states.
//! - [`cavity`]: the Fabry–Perot mode filter, its spectrum and its length lock.
//! - [`lg_fields`]: Laguerre–Gauss fields, overlaps and fringe diagnostics.
//! - [`transcoder`]: the loop engine and the unbalanced interferometer.
//! - [`analysis`]: efficiency matrices, cross-talk tables, waveforms, visibility.
//! - [`cli`]: configuration files and scenario runners.
//!
//! ```
//! use oam_transcoder::cavity::IdealCavity;
//! use oam_transcoder::mode_algebra::{ModeLabel, PulseState};
//! use oam_transcoder::transcoder::{run_forward, LoopParams};
//!
//! let (out, _) = run_forward(&PulseState::basis(ModeLabel::oam(2)), &LoopParams::lossless(), &IdealCavity::default()).unwrap();
//! assert!((out.power_in(|m| m.bin == 2) - 1.0).abs() < 1e-12);
//! ```

pub mod analysis;
pub mod cavity;
pub mod cli;
pub mod elements;
pub mod error;
pub mod lg_fields;
pub mod mode_algebra;
pub mod transcoder;

pub use error::{Error, Result};
