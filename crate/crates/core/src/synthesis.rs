//! Desk-scale copy synthesis: log-mel frames are mapped back to linear
//! magnitudes with a regularized pseudo-inverse of the filterbank, and a
//! waveform is recovered with classic Griffin-Lim.
//!
//! F0 is not used here. It is still carried through rhythm perturbation and
//! feature files so an external vocoder can consume the same bundles.

use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::audio_io::AudioBuffer;
use crate::dsp::{spectral_distance, FrameSpec, Stft};
use crate::error::{Error, Result};
use crate::features::{extract_features, mel_filterbank, FeatureBundle, FeatureConfig, MelFilterbank};
use crate::rpm::{rhythm_perturb, Rng, RpmConfig, SegmentPlan};

/// Tikhonov weight relative to the mean diagonal of `M M^T`.
pub const TIKHONOV_SCALE: f64 = 1e-5;
pub const OUTPUT_PEAK: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitPhase {
    Zeros,
    Random(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GriffinLimConfig {
    pub n_iters: usize,
    pub init_phase: InitPhase,
}

impl Default for GriffinLimConfig {
    fn default() -> Self {
        Self {
            n_iters: 60,
            init_phase: InitPhase::Zeros,
        }
    }
}

/// Inverts log-mel frames to linear magnitude frames.
///
/// Per frame, `p = M^T (M M^T + lambda I)^-1 exp(mel)` with negative entries
/// clipped to zero, and the magnitude is `sqrt(p)`.
pub fn mel_to_linear<'a>(
    mel_frames: impl IntoIterator<Item = &'a [f64]>,
    filterbank: &MelFilterbank,
) -> Result<Vec<Vec<f64>>> {
    let (n_mels, n_bins) = (filterbank.n_mels(), filterbank.n_bins());
    let m = DMatrix::from_fn(n_mels, n_bins, |i, j| filterbank.weights[i][j]);
    let mut gram = &m * m.transpose();
    let lambda = TIKHONOV_SCALE * gram.trace() / n_mels as f64;
    for i in 0..n_mels {
        gram[(i, i)] += lambda;
    }
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::ShapeMismatch("filterbank Gram matrix is not positive definite".into()))?;

    mel_frames
        .into_iter()
        .enumerate()
        .map(|(i, frame)| {
            if frame.len() != n_mels {
                return Err(Error::ShapeMismatch(format!(
                    "mel frame {i} has {} bands, filterbank has {n_mels}",
                    frame.len()
                )));
            }
            let target = DVector::from_iterator(n_mels, frame.iter().map(|v| v.exp()));
            let power = m.tr_mul(&chol.solve(&target));
            Ok(power.iter().map(|p| p.max(0.0).sqrt()).collect())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GriffinLimOutput {
    pub audio: AudioBuffer,
    /// Spectral distance `|| |STFT(x_k)| - target ||` for `k = 0..=n_iters`,
    /// measured before peak normalization.
    pub objective: Vec<f64>,
}

/// Classic (momentum-free) Griffin-Lim phase reconstruction. The returned
/// waveform has `(n_frames - 1) * hop + win` samples and is peak-normalized to
/// [`OUTPUT_PEAK`] unless silent.
pub fn griffin_lim(
    magnitudes: &[Vec<f64>],
    spec: FrameSpec,
    n_fft: usize,
    sample_rate: u32,
    cfg: &GriffinLimConfig,
) -> Result<GriffinLimOutput> {
    if cfg.n_iters == 0 {
        return Err(Error::InvalidConfig("griffin-lim needs n_iters >= 1".into()));
    }
    if magnitudes.is_empty() {
        return Err(Error::ShapeMismatch("no magnitude frames".into()));
    }
    if magnitudes.iter().flatten().any(|m| !(m.is_finite() && *m >= 0.0)) {
        return Err(Error::ShapeMismatch("magnitudes must be finite and nonnegative".into()));
    }
    let stft = Stft::new(spec, n_fft)?;

    let mut spectra: Vec<Vec<Complex64>> = match cfg.init_phase {
        InitPhase::Zeros => magnitudes
            .iter()
            .map(|f| f.iter().map(|&m| Complex64::new(m, 0.0)).collect())
            .collect(),
        InitPhase::Random(seed) => {
            let mut rng = Rng::new(seed);
            magnitudes
                .iter()
                .map(|f| {
                    f.iter()
                        .map(|&m| Complex64::from_polar(m, 2.0 * std::f64::consts::PI * rng.next_f64()))
                        .collect()
                })
                .collect()
        }
    };

    let mut signal = stft.inverse(&spectra)?;
    let mut objective = Vec::with_capacity(cfg.n_iters + 1);
    for iter in 0..=cfg.n_iters {
        let estimate = stft.forward(&signal)?;
        let estimate_mag: Vec<Vec<f64>> = estimate
            .iter()
            .map(|f| f.iter().map(|c| c.norm()).collect())
            .collect();
        objective.push(spectral_distance(&estimate_mag, magnitudes));
        if iter == cfg.n_iters {
            break;
        }
        for ((target, est), out) in magnitudes.iter().zip(&estimate).zip(spectra.iter_mut()) {
            for ((&m, c), o) in target.iter().zip(est).zip(out.iter_mut()) {
                let norm = c.norm();
                *o = if norm > 0.0 {
                    c * (m / norm)
                } else {
                    Complex64::new(m, 0.0)
                };
            }
        }
        signal = stft.inverse(&spectra)?;
    }

    Ok(GriffinLimOutput {
        audio: AudioBuffer::new(signal, sample_rate)?.peak_normalized(OUTPUT_PEAK),
        objective,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CopySynthesis {
    pub audio: AudioBuffer,
    /// Features fed to the vocoder (after rhythm perturbation, if any).
    pub features: FeatureBundle,
    pub plan: Option<SegmentPlan>,
}

/// Feature extraction, optional rhythm perturbation, mel inversion and
/// Griffin-Lim. A random initial phase is seeded per utterance
/// (`seed ^ fnv1a64(utt_id)`).
pub fn copy_synthesize(
    audio: &AudioBuffer,
    feat_cfg: &FeatureConfig,
    rpm_cfg: Option<&RpmConfig>,
    gl_cfg: &GriffinLimConfig,
    utt_id: &str,
) -> Result<CopySynthesis> {
    let sample_rate = audio.sample_rate();
    let features = extract_features(audio, feat_cfg)?;
    let (features, plan) = match rpm_cfg {
        Some(cfg) => {
            let cfg = RpmConfig {
                f0_floor: feat_cfg.f0_min,
                ..*cfg
            };
            let (perturbed, plan) = rhythm_perturb(&features, &cfg, utt_id)?;
            (perturbed, Some(plan))
        }
        None => (features, None),
    };
    let filterbank = mel_filterbank(feat_cfg, sample_rate as f64)?;
    let magnitudes = mel_to_linear(features.mel_frames(), &filterbank)?;
    let gl_cfg = match gl_cfg.init_phase {
        InitPhase::Random(seed) => GriffinLimConfig {
            init_phase: InitPhase::Random(Rng::for_utterance(seed, utt_id).next_u64()),
            ..*gl_cfg
        },
        InitPhase::Zeros => *gl_cfg,
    };
    let output = griffin_lim(&magnitudes, feat_cfg.frame, feat_cfg.n_fft, sample_rate, &gl_cfg)?;
    Ok(CopySynthesis {
        audio: output.audio,
        features,
        plan,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{log_mel_floor, stft_magnitude};
    use crate::synthetic;

    fn default_fb() -> (FeatureConfig, MelFilterbank) {
        let cfg = FeatureConfig::default();
        let fb = mel_filterbank(&cfg, 16000.0).unwrap();
        (cfg, fb)
    }

    #[test]
    fn silent_frame_inverts_to_near_zero() {
        let (_, fb) = default_fb();
        let frame = vec![log_mel_floor(); fb.n_mels()];
        let mags = mel_to_linear([frame.as_slice()], &fb).unwrap();
        assert!(mags[0].iter().all(|m| *m <= 1e-4 && *m >= 0.0));
    }

    #[test]
    fn wrong_band_count_is_rejected() {
        let (_, fb) = default_fb();
        let frame = vec![0.0; 10];
        assert!(matches!(mel_to_linear([frame.as_slice()], &fb), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn smooth_spectrum_projects_back_within_ten_percent() {
        let (_, fb) = default_fb();
        // smooth, strictly positive power spectrum with a few broad bumps
        let power: Vec<f64> = (0..fb.n_bins())
            .map(|k| {
                let f = k as f64 * 16000.0 / 1024.0;
                1.0 + 4.0 * (-((f - 500.0) / 300.0).powi(2)).exp()
                    + 2.0 * (-((f - 2500.0) / 800.0).powi(2)).exp()
                    + 0.5 * (f / 3000.0).cos().powi(2)
            })
            .collect();
        let mel_power = fb.apply(&power);
        let mel: Vec<f64> = mel_power.iter().map(|p| p.ln()).collect();
        let recon = mel_to_linear([mel.as_slice()], &fb).unwrap();
        let recon_power: Vec<f64> = recon[0].iter().map(|m| m * m).collect();
        let reprojected = fb.apply(&recon_power);
        for (band, (a, b)) in reprojected.iter().zip(&mel_power).enumerate() {
            assert!((a - b).abs() / b <= 0.10, "band {band}: {a} vs {b}");
        }
        assert!(recon[0].iter().all(|m| *m >= 0.0));
    }

    #[test]
    fn griffin_lim_is_monotone_and_matches_reference() {
        let cfg = FeatureConfig::default();
        let audio = synthetic::vowel(&synthetic::VowelSpec::default());
        let mags = stft_magnitude(&audio, &cfg).unwrap();
        let out = griffin_lim(&mags, cfg.frame, cfg.n_fft, 16000, &GriffinLimConfig::default()).unwrap();
        assert_eq!(out.objective.len(), 61);
        for w in out.objective.windows(2) {
            assert!(w[1] <= w[0], "{} -> {}", w[0], w[1]);
        }
        // independent numpy run of the same algorithm on the same signal
        let (first, last) = (810.3635489669373, 180.52623583653929);
        assert!((out.objective[0] - first).abs() / first < 1e-9);
        assert!((out.objective[60] - last).abs() / last < 1e-9);
        assert_eq!(out.audio.len(), audio.len() - (audio.len() - 1024) % 256);
        assert!((out.audio.peak() - OUTPUT_PEAK).abs() < 1e-12);
    }

    #[test]
    fn zero_magnitudes_give_silence() {
        let cfg = FeatureConfig::default();
        let mags = vec![vec![0.0; 513]; 5];
        let out = griffin_lim(&mags, cfg.frame, cfg.n_fft, 16000, &GriffinLimConfig::default()).unwrap();
        assert_eq!(out.audio.len(), 4 * 256 + 1024);
        assert!(out.audio.samples().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn random_phase_is_seeded() {
        let cfg = FeatureConfig::default();
        let audio = synthetic::white_noise(4096, 16000, 3);
        let mags = stft_magnitude(&audio, &cfg).unwrap();
        let gl = GriffinLimConfig {
            n_iters: 5,
            init_phase: InitPhase::Random(9),
        };
        let a = griffin_lim(&mags, cfg.frame, cfg.n_fft, 16000, &gl).unwrap();
        let b = griffin_lim(&mags, cfg.frame, cfg.n_fft, 16000, &gl).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn copy_synthesis_durations() {
        let cfg = FeatureConfig::default();
        let audio = synthetic::vowel(&synthetic::VowelSpec::default());
        let gl = GriffinLimConfig {
            n_iters: 8,
            ..GriffinLimConfig::default()
        };
        let plain = copy_synthesize(&audio, &cfg, None, &gl, "u").unwrap();
        assert!(plain.plan.is_none());
        assert!(audio.len().abs_diff(plain.audio.len()) <= cfg.frame.hop_length);

        let unit = RpmConfig {
            factor_lo: 1.0,
            factor_hi: 1.0,
            ..RpmConfig::default()
        };
        let same = copy_synthesize(&audio, &cfg, Some(&unit), &gl, "u").unwrap();
        assert_eq!(same.audio, plain.audio);

        let rpm = RpmConfig {
            seed: 17,
            ..RpmConfig::default()
        };
        let perturbed = copy_synthesize(&audio, &cfg, Some(&rpm), &gl, "u").unwrap();
        let frames = perturbed.plan.as_ref().unwrap().output_frames();
        let expected = frames * cfg.frame.hop_length + (cfg.frame.win_length - cfg.frame.hop_length);
        assert!(perturbed.audio.len().abs_diff(expected) <= cfg.frame.hop_length);
    }
}
