use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::frame::{n_frames, FrameSpec};
use crate::error::{Error, Result};

/// Short-time Fourier transform over a fixed frame grid. Frames of
/// `win_length` samples are windowed and zero-padded to `n_fft`; only the
/// `n_fft / 2 + 1` non-negative frequency bins are kept.
pub struct Stft {
    spec: FrameSpec,
    n_fft: usize,
    window: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Stft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Stft")
            .field("spec", &self.spec)
            .field("n_fft", &self.n_fft)
            .finish()
    }
}

impl Stft {
    pub fn new(spec: FrameSpec, n_fft: usize) -> Result<Self> {
        spec.validate()?;
        if n_fft < spec.win_length || !n_fft.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "n_fft ({n_fft}) must be even and >= win_length ({})",
                spec.win_length
            )));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            window: spec.window.coefficients(spec.win_length),
            forward: planner.plan_fft_forward(n_fft),
            inverse: planner.plan_fft_inverse(n_fft),
            spec,
            n_fft,
        })
    }

    pub fn spec(&self) -> &FrameSpec {
        &self.spec
    }

    pub fn n_fft(&self) -> usize {
        self.n_fft
    }

    pub fn n_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<Vec<Complex64>>> {
        if x.len() < self.spec.win_length {
            return Err(Error::TooShort {
                len: x.len(),
                win: self.spec.win_length,
            });
        }
        let mut buf = vec![Complex64::new(0.0, 0.0); self.n_fft];
        let frames = (0..n_frames(x.len(), &self.spec))
            .map(|i| {
                let start = i * self.spec.hop_length;
                buf.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
                for (j, (s, w)) in x[start..start + self.spec.win_length]
                    .iter()
                    .zip(&self.window)
                    .enumerate()
                {
                    buf[j].re = s * w;
                }
                self.forward.process(&mut buf);
                buf[..self.n_bins()].to_vec()
            })
            .collect();
        Ok(frames)
    }

    pub fn magnitude(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        Ok(self
            .forward(x)?
            .into_iter()
            .map(|frame| frame.iter().map(|c| c.norm()).collect())
            .collect())
    }

    /// Least-squares inverse STFT: the signal whose STFT is closest (in the
    /// full-spectrum Frobenius norm) to `spectra`. Samples no window covers
    /// are zero.
    pub fn inverse(&self, spectra: &[Vec<Complex64>]) -> Result<Vec<f64>> {
        let n_bins = self.n_bins();
        let win = self.spec.win_length;
        let len = self.spec.output_len(spectra.len());
        let mut out = vec![0.0; len];
        let mut envelope = vec![0.0; len];
        let mut buf = vec![Complex64::new(0.0, 0.0); self.n_fft];
        let scale = 1.0 / self.n_fft as f64;
        for (i, frame) in spectra.iter().enumerate() {
            if frame.len() != n_bins {
                return Err(Error::ShapeMismatch(format!(
                    "spectrum frame {i} has {} bins, expected {n_bins}",
                    frame.len()
                )));
            }
            // Hermitian extension; DC and Nyquist imaginary parts are dropped
            // by taking the real part below.
            buf[..n_bins].copy_from_slice(frame);
            for k in n_bins..self.n_fft {
                buf[k] = frame[self.n_fft - k].conj();
            }
            self.inverse.process(&mut buf);
            let start = i * self.spec.hop_length;
            for j in 0..win {
                let w = self.window[j];
                out[start + j] += w * buf[j].re * scale;
                envelope[start + j] += w * w;
            }
        }
        for (o, e) in out.iter_mut().zip(&envelope) {
            *o = if *e > 0.0 { *o / e } else { 0.0 };
        }
        Ok(out)
    }
}

/// Frobenius distance between two magnitude spectrograms, counting each
/// interior bin twice so that it equals the full-spectrum distance.
pub fn spectral_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let mut acc = 0.0;
    for (fa, fb) in a.iter().zip(b) {
        let last = fa.len() - 1;
        for (k, (x, y)) in fa.iter().zip(fb).enumerate() {
            let weight = if k == 0 || k == last { 1.0 } else { 2.0 };
            acc += weight * (x - y) * (x - y);
        }
    }
    acc.sqrt()
}
