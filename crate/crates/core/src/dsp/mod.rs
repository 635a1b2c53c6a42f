//! Numeric kernel shared by every pipeline stage: framing and overlap-add,
//! autocorrelation LPC, FIR/IIR filtering and linear resampling.
//!
//! Everything here works on plain `f64` slices and starts filters from a zero
//! state, so frames can be processed independently and analysis/synthesis
//! filter pairs invert each other exactly.

mod filter;
mod frame;
mod lpc;
mod resample;
mod stft;

pub use filter::{
    allpole_filter, butterworth_highpass, differentiate, inverse_filter, leaky_integrate,
    pre_emphasis, Biquad,
};
pub use frame::{frame_signal, n_frames, overlap_add, FrameSpec, Window};
pub use lpc::{autocorrelation, levinson_durbin, lpc_analysis, LpcModel, AUTOCORR_REGULARIZATION};
pub use resample::{linear_resample, linear_resample_rows, resampled_len};
pub use stft::{spectral_distance, Stft};
