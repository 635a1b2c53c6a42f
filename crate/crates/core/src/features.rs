//! Vocoder-facing features: log-mel spectrogram and an autocorrelation F0
//! track, computed on one shared frame grid.

use serde::{Deserialize, Serialize};

use crate::audio_io::AudioBuffer;
use crate::dsp::{autocorrelation, frame_signal, FrameSpec, Stft, Window};
use crate::error::{Error, Result};

/// Power floor applied before the log in the mel spectrogram.
pub const MEL_POWER_FLOOR: f64 = 1e-10;

pub fn log_mel_floor() -> f64 {
    MEL_POWER_FLOOR.ln()
}

/// HTK-style mel scale.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub n_fft: usize,
    pub frame: FrameSpec,
    pub n_mels: usize,
    pub fmin: f64,
    /// Upper mel edge in Hz; `None` means Nyquist.
    pub fmax: Option<f64>,
    pub f0_min: f64,
    pub f0_max: f64,
    pub voicing_threshold: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            n_fft: 1024,
            frame: FrameSpec {
                win_length: 1024,
                hop_length: 256,
                window: Window::Hann,
            },
            n_mels: 80,
            fmin: 0.0,
            fmax: None,
            f0_min: 50.0,
            f0_max: 500.0,
            voicing_threshold: 0.3,
        }
    }
}

impl FeatureConfig {
    pub fn fmax_for(&self, sample_rate: f64) -> f64 {
        self.fmax.unwrap_or(sample_rate * 0.5)
    }

    pub fn validate(&self, sample_rate: f64) -> Result<()> {
        self.frame.validate()?;
        let fmax = self.fmax_for(sample_rate);
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_fft < self.frame.win_length || !self.n_fft.is_multiple_of(2) {
            return bad(format!("n_fft {} must be even and >= win_length", self.n_fft));
        }
        if self.n_mels == 0 {
            return bad("n_mels must be positive".into());
        }
        if !(self.fmin >= 0.0 && self.fmin < fmax && fmax <= sample_rate * 0.5) {
            return bad(format!("need 0 <= fmin ({}) < fmax ({fmax}) <= Nyquist", self.fmin));
        }
        if !(self.f0_min > 0.0 && self.f0_min < self.f0_max) {
            return bad(format!("need 0 < f0_min ({}) < f0_max ({})", self.f0_min, self.f0_max));
        }
        if !(self.voicing_threshold > 0.0 && self.voicing_threshold < 1.0) {
            return bad(format!("voicing_threshold {} outside (0, 1)", self.voicing_threshold));
        }
        Ok(())
    }
}

/// Time-aligned log-mel frames and F0 track.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBundle {
    mel: Vec<f64>,
    n_mels: usize,
    f0: Vec<f64>,
    pub sample_rate: f64,
    pub hop_length: usize,
    pub win_length: usize,
}

impl FeatureBundle {
    /// `mel` is frame-major with `n_mels` values per frame and must hold
    /// exactly `f0.len()` frames. All values must be finite and F0 nonnegative.
    pub fn new(
        mel: Vec<f64>,
        n_mels: usize,
        f0: Vec<f64>,
        sample_rate: f64,
        hop_length: usize,
        win_length: usize,
    ) -> Result<Self> {
        if n_mels == 0 {
            return Err(Error::ShapeMismatch("n_mels must be positive".into()));
        }
        if mel.len() != f0.len() * n_mels {
            return Err(Error::ShapeMismatch(format!(
                "{} mel values do not form {} frames of {n_mels} bands",
                mel.len(),
                f0.len()
            )));
        }
        if mel.iter().any(|v| !v.is_finite()) {
            return Err(Error::ShapeMismatch("non-finite mel value".into()));
        }
        if f0.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::ShapeMismatch("F0 values must be finite and >= 0".into()));
        }
        Ok(Self {
            mel,
            n_mels,
            f0,
            sample_rate,
            hop_length,
            win_length,
        })
    }

    pub fn n_frames(&self) -> usize {
        self.f0.len()
    }

    pub fn n_mels(&self) -> usize {
        self.n_mels
    }

    /// Frame-major mel values.
    pub fn mel(&self) -> &[f64] {
        &self.mel
    }

    pub fn mel_frame(&self, i: usize) -> &[f64] {
        &self.mel[i * self.n_mels..(i + 1) * self.n_mels]
    }

    pub fn mel_frames(&self) -> impl Iterator<Item = &[f64]> {
        self.mel.chunks_exact(self.n_mels)
    }

    pub fn f0(&self) -> &[f64] {
        &self.f0
    }
}

/// Triangular mel filters over the `n_fft / 2 + 1` DFT bins.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    /// `n_mels` rows of `n_bins` weights, each row peaking at 1.
    pub weights: Vec<Vec<f64>>,
    pub centers_hz: Vec<f64>,
}

impl MelFilterbank {
    pub fn n_mels(&self) -> usize {
        self.weights.len()
    }

    pub fn n_bins(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn apply(&self, power: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .map(|row| row.iter().zip(power).map(|(w, p)| w * p).sum())
            .collect()
    }
}

pub fn mel_filterbank(cfg: &FeatureConfig, sample_rate: f64) -> Result<MelFilterbank> {
    cfg.validate(sample_rate)?;
    let n_bins = cfg.n_fft / 2 + 1;
    let bin_hz = sample_rate / cfg.n_fft as f64;
    let (mel_lo, mel_hi) = (hz_to_mel(cfg.fmin), hz_to_mel(cfg.fmax_for(sample_rate)));
    let edges: Vec<f64> = (0..cfg.n_mels + 2)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (cfg.n_mels + 1) as f64))
        .collect();
    let edge_bins: Vec<i64> = edges.iter().map(|f| (f / bin_hz).round() as i64).collect();
    if let Some(i) = edge_bins.windows(2).position(|w| w[0] == w[1]) {
        return Err(Error::TooManyMels(i.min(cfg.n_mels - 1)));
    }

    let weights = (0..cfg.n_mels)
        .map(|m| {
            let (lo, center, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            let mut row: Vec<f64> = (0..n_bins)
                .map(|k| {
                    let f = k as f64 * bin_hz;
                    if f <= lo || f >= hi {
                        0.0
                    } else if f <= center {
                        (f - lo) / (center - lo)
                    } else {
                        (hi - f) / (hi - center)
                    }
                })
                .collect();
            let peak = row.iter().cloned().fold(0.0, f64::max);
            if peak > 0.0 {
                row.iter_mut().for_each(|w| *w /= peak);
            }
            row
        })
        .collect();
    Ok(MelFilterbank {
        weights,
        centers_hz: edges[1..=cfg.n_mels].to_vec(),
    })
}

pub fn stft_magnitude(audio: &AudioBuffer, cfg: &FeatureConfig) -> Result<Vec<Vec<f64>>> {
    Stft::new(cfg.frame, cfg.n_fft)?.magnitude(audio.samples())
}

/// Log-mel spectrogram from precomputed STFT magnitudes.
pub fn log_mel_from_magnitudes(magnitudes: &[Vec<f64>], filterbank: &MelFilterbank) -> Vec<Vec<f64>> {
    magnitudes
        .iter()
        .map(|frame| {
            let power: Vec<f64> = frame.iter().map(|m| m * m).collect();
            filterbank
                .apply(&power)
                .into_iter()
                .map(|e| e.max(MEL_POWER_FLOOR).ln())
                .collect()
        })
        .collect()
}

pub fn mel_spectrogram(audio: &AudioBuffer, cfg: &FeatureConfig) -> Result<Vec<Vec<f64>>> {
    let filterbank = mel_filterbank(cfg, audio.sample_rate() as f64)?;
    Ok(log_mel_from_magnitudes(&stft_magnitude(audio, cfg)?, &filterbank))
}

/// F0 of one analysis frame by normalized autocorrelation; 0.0 when unvoiced.
fn frame_f0(frame: &[f64], sample_rate: f64, cfg: &FeatureConfig) -> f64 {
    if frame.len() < 4 {
        return 0.0;
    }
    let lag_min = ((sample_rate / cfg.f0_max).ceil() as usize).max(2);
    let lag_max = ((sample_rate / cfg.f0_min).floor() as usize).min(frame.len() - 2);
    if lag_min > lag_max {
        return 0.0;
    }
    let r = autocorrelation(frame, lag_max + 1).expect("lag bounded by frame length");
    if !(r[0] > 0.0) {
        return 0.0;
    }
    let peak = (lag_min..=lag_max)
        .filter(|&k| r[k] > r[k - 1] && r[k] >= r[k + 1])
        .max_by(|&a, &b| r[a].total_cmp(&r[b]));
    let Some(k) = peak else { return 0.0 };
    if r[k] / r[0] < cfg.voicing_threshold {
        return 0.0;
    }
    let (left, mid, right) = (r[k - 1], r[k], r[k + 1]);
    let curvature = left - 2.0 * mid + right;
    let offset = if curvature < 0.0 {
        (0.5 * (left - right) / curvature).clamp(-0.5, 0.5)
    } else {
        0.0
    };
    (sample_rate / (k as f64 + offset)).clamp(cfg.f0_min, cfg.f0_max)
}

pub fn estimate_f0(audio: &AudioBuffer, cfg: &FeatureConfig) -> Result<Vec<f64>> {
    let sample_rate = audio.sample_rate() as f64;
    Ok(frame_signal(audio.samples(), &cfg.frame)?
        .iter()
        .map(|frame| frame_f0(frame, sample_rate, cfg))
        .collect())
}

pub fn extract_features(audio: &AudioBuffer, cfg: &FeatureConfig) -> Result<FeatureBundle> {
    let sample_rate = audio.sample_rate() as f64;
    let mel = mel_spectrogram(audio, cfg)?;
    let f0 = estimate_f0(audio, cfg)?;
    debug_assert_eq!(mel.len(), f0.len());
    FeatureBundle::new(
        mel.concat(),
        cfg.n_mels,
        f0,
        sample_rate,
        cfg.frame.hop_length,
        cfg.frame.win_length,
    )
}
