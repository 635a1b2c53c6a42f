use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Envelope values below this are clamped before dividing in [`overlap_add`].
const ENVELOPE_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Hann,
    Hamming,
    Rect,
}

impl Window {
    /// Periodic (DFT-even) window of `len` samples.
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        let n = len as f64;
        (0..len)
            .map(|i| {
                let phase = 2.0 * PI * i as f64 / n;
                match self {
                    Window::Hann => 0.5 - 0.5 * phase.cos(),
                    Window::Hamming => 0.54 - 0.46 * phase.cos(),
                    Window::Rect => 1.0,
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameSpec {
    pub win_length: usize,
    pub hop_length: usize,
    pub window: Window,
}

impl FrameSpec {
    pub fn new(win_length: usize, hop_length: usize, window: Window) -> Result<Self> {
        let spec = Self {
            win_length,
            hop_length,
            window,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.hop_length == 0 || self.hop_length > self.win_length {
            return Err(Error::InvalidConfig(format!(
                "frame spec needs 0 < hop ({}) <= win ({})",
                self.hop_length, self.win_length
            )));
        }
        Ok(())
    }

    /// Sample count produced by overlap-adding `n_frames` frames.
    pub fn output_len(&self, n_frames: usize) -> usize {
        if n_frames == 0 {
            0
        } else {
            (n_frames - 1) * self.hop_length + self.win_length
        }
    }
}

/// Number of full frames that fit in `len` samples (0 if none do).
pub fn n_frames(len: usize, spec: &FrameSpec) -> usize {
    if len < spec.win_length {
        0
    } else {
        1 + (len - spec.win_length) / spec.hop_length
    }
}

/// Slices `x` into windowed frames. Trailing samples that do not fill a whole
/// frame are dropped.
pub fn frame_signal(x: &[f64], spec: &FrameSpec) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    if x.len() < spec.win_length {
        return Err(Error::TooShort {
            len: x.len(),
            win: spec.win_length,
        });
    }
    let window = spec.window.coefficients(spec.win_length);
    let frames = (0..n_frames(x.len(), spec))
        .map(|i| {
            let start = i * spec.hop_length;
            x[start..start + spec.win_length]
                .iter()
                .zip(&window)
                .map(|(s, w)| s * w)
                .collect()
        })
        .collect();
    Ok(frames)
}

/// Overlap-adds windowed frames and divides by the summed window envelope, so
/// `overlap_add(frame_signal(x))` reproduces `x` wherever the envelope is
/// non-negligible.
pub fn overlap_add(frames: &[Vec<f64>], spec: &FrameSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    for (index, frame) in frames.iter().enumerate() {
        if frame.len() != spec.win_length {
            return Err(Error::InconsistentFrameLength {
                index,
                len: frame.len(),
                expected: spec.win_length,
            });
        }
    }
    let len = spec.output_len(frames.len());
    let window = spec.window.coefficients(spec.win_length);
    let mut out = vec![0.0; len];
    let mut envelope = vec![0.0; len];
    for (i, frame) in frames.iter().enumerate() {
        let start = i * spec.hop_length;
        for (j, (&s, &w)) in frame.iter().zip(&window).enumerate() {
            out[start + j] += s;
            envelope[start + j] += w;
        }
    }
    for (o, e) in out.iter_mut().zip(&envelope) {
        *o /= e.max(ENVELOPE_FLOOR);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noise(len: usize, mut seed: u64) -> Vec<f64> {
        (0..len)
            .map(|_| {
                seed = seed
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                (seed >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
            })
            .collect()
    }

    #[test]
    fn frame_count_follows_formula() {
        let spec = FrameSpec::new(320, 160, Window::Hann).unwrap();
        let frames = frame_signal(&vec![0.0; 480], &spec).unwrap();
        assert_eq!(frames.len(), 2);
    }

    #[test]
    fn rect_frames_are_raw_slices() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let spec = FrameSpec::new(4, 3, Window::Rect).unwrap();
        let frames = frame_signal(&x, &spec).unwrap();
        assert_eq!(frames, vec![vec![0., 1., 2., 3.], vec![3., 4., 5., 6.], vec![6., 7., 8., 9.]]);
    }

    #[test]
    fn too_short_signal_is_rejected() {
        let spec = FrameSpec::new(320, 160, Window::Hann).unwrap();
        assert!(matches!(
            frame_signal(&vec![0.0; 319], &spec),
            Err(Error::TooShort { len: 319, win: 320 })
        ));
    }

    #[test]
    fn invalid_hop_is_rejected() {
        assert!(FrameSpec::new(10, 0, Window::Hann).is_err());
        assert!(FrameSpec::new(10, 11, Window::Hann).is_err());
    }

    #[test]
    fn single_rect_frame_is_returned_unchanged() {
        let spec = FrameSpec::new(5, 5, Window::Rect).unwrap();
        let frame = vec![0.1, -0.2, 0.3, 0.4, -0.5];
        assert_eq!(overlap_add(&[frame.clone()], &spec).unwrap(), frame);
    }

    #[test]
    fn mixed_frame_lengths_are_rejected() {
        let spec = FrameSpec::new(4, 2, Window::Rect).unwrap();
        let err = overlap_add(&[vec![0.0; 4], vec![0.0; 3]], &spec).unwrap_err();
        assert!(matches!(err, Error::InconsistentFrameLength { index: 1, .. }));
    }

    #[test]
    fn hann_half_overlap_reconstructs_interior() {
        let spec = FrameSpec::new(256, 128, Window::Hann).unwrap();
        let x = noise(256 * 20, 7);
        let y = overlap_add(&frame_signal(&x, &spec).unwrap(), &spec).unwrap();
        assert_eq!(y.len(), spec.output_len(n_frames(x.len(), &spec)));
        for i in spec.win_length..y.len() - spec.win_length {
            let rel = (y[i] - x[i]).abs() / x[i].abs().max(1e-12);
            assert!(rel < 1e-10 || (y[i] - x[i]).abs() < 1e-15, "sample {i}: {} vs {}", y[i], x[i]);
        }
    }

    #[test]
    fn periodic_hann_at_half_hop_sums_to_one() {
        let w = Window::Hann.coefficients(8);
        for i in 0..4 {
            assert!((w[i] + w[i + 4] - 1.0).abs() < 1e-15);
        }
    }
}
