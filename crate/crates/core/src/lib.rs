//! Glottal inverse filtering, rhythm perturbation and EER scoring for
//! speech anti-spoofing data.
//!
//! The pipeline stages are independent modules:
//!
//! - [`audio_io`]: WAV, manifest and feature-file I/O
//! - [`dsp`]: framing, LPC, filtering and linear resampling
//! - [`glottal`]: IAIF glottal flow extraction
//! - [`features`]: log-mel spectrogram and F0 track
//! - [`rpm`]: rhythm perturbation of feature streams (and the speed
//!   perturbation baseline)
//! - [`synthesis`]: mel inversion and Griffin-Lim copy synthesis
//! - [`evaluation`]: pooled and per-attack equal error rate

pub mod audio_io;
pub mod dsp;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod glottal;
pub mod rpm;
pub mod synthesis;
pub mod synthetic;

pub use error::{Error, Result};
