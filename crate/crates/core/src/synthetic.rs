//! Synthetic test signals with known construction, and plain-DFT measurement
//! helpers for checking the pipeline against them.
//!
//! The generators use their own resonator recursions rather than the
//! [`crate::dsp`] filters so they can serve as independent references.

use std::f64::consts::PI;

use crate::audio_io::AudioBuffer;

#[derive(Debug, Clone, PartialEq)]
pub struct VowelSpec {
    pub sample_rate: u32,
    pub duration_s: f64,
    pub f0: f64,
    /// (centre frequency, bandwidth) pairs in Hz.
    pub formants: Vec<(f64, f64)>,
    /// Pole radius of the two-pole glottal-pulse low-pass.
    pub source_pole: f64,
    pub lip_d: f64,
    /// Syllable-like amplitude modulation rate; 0 for a steady vowel.
    pub envelope_hz: f64,
}

impl Default for VowelSpec {
    fn default() -> Self {
        Self {
            sample_rate: 16000,
            duration_s: 1.0,
            f0: 120.0,
            formants: vec![(700.0, 80.0), (1200.0, 90.0)],
            source_pole: 0.95,
            lip_d: 0.99,
            envelope_hz: 3.0,
        }
    }
}

/// Amplitude envelope applied to the source of [`vowel`].
pub fn vowel_envelope(spec: &VowelSpec, n: usize) -> f64 {
    if spec.envelope_hz <= 0.0 {
        return 1.0;
    }
    let t = n as f64 / spec.sample_rate as f64;
    0.15 + 0.85 * (PI * spec.envelope_hz * t).sin().powi(2)
}

/// Impulse train at `f0`, shaped by a two-pole low-pass, amplitude-modulated,
/// passed through second-order formant resonators and a `1 - d z^-1` lip
/// radiation, then scaled to a 0.9 peak.
pub fn vowel(spec: &VowelSpec) -> AudioBuffer {
    let fs = spec.sample_rate as f64;
    let len = (spec.duration_s * fs).round() as usize;
    let period = fs / spec.f0;

    let mut x = vec![0.0; len];
    let mut next_pulse = 0.0f64;
    while (next_pulse.round() as usize) < len {
        x[next_pulse.round() as usize] = 1.0;
        next_pulse += period;
    }
    // (1 - p z^-1)^-2
    let p = spec.source_pole;
    let (mut y1, mut y2) = (0.0, 0.0);
    for (n, v) in x.iter_mut().enumerate() {
        let y = *v + 2.0 * p * y1 - p * p * y2;
        y2 = y1;
        y1 = y;
        *v = y * vowel_envelope(spec, n);
    }
    for &(freq, bw) in &spec.formants {
        let r = (-PI * bw / fs).exp();
        let theta = 2.0 * PI * freq / fs;
        let (c1, c2) = (2.0 * r * theta.cos(), -r * r);
        let (mut y1, mut y2) = (0.0, 0.0);
        for v in x.iter_mut() {
            let y = *v + c1 * y1 + c2 * y2;
            y2 = y1;
            y1 = y;
            *v = y;
        }
    }
    let mut prev = 0.0;
    for v in x.iter_mut() {
        let cur = *v;
        *v = cur - spec.lip_d * prev;
        prev = cur;
    }
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        x.iter_mut().for_each(|v| *v *= 0.9 / peak);
    }
    AudioBuffer::new(x, spec.sample_rate).expect("finite synthetic signal")
}

/// Uniform white noise in [-0.5, 0.5) from a 64-bit LCG.
pub fn white_noise(len: usize, sample_rate: u32, seed: u64) -> AudioBuffer {
    let mut s = seed ^ 0x2545_F491_4F6C_DD1D;
    let samples = (0..len)
        .map(|_| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .collect();
    AudioBuffer::new(samples, sample_rate).expect("finite noise")
}

pub fn sine(freq: f64, amplitude: f64, len: usize, sample_rate: u32) -> AudioBuffer {
    let fs = sample_rate as f64;
    let samples = (0..len)
        .map(|n| amplitude * (2.0 * PI * freq * n as f64 / fs).sin())
        .collect();
    AudioBuffer::new(samples, sample_rate).expect("finite sine")
}

/// Naive DFT magnitudes of the hann-windowed signal at the given bins
/// (bin `k` is `k * fs / len` Hz).
pub fn dft_magnitudes(signal: &[f64], bins: impl IntoIterator<Item = usize>) -> Vec<f64> {
    let n = signal.len();
    let windowed: Vec<f64> = signal
        .iter()
        .enumerate()
        .map(|(i, s)| s * (0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()))
        .collect();
    bins.into_iter()
        .map(|k| {
            let step = 2.0 * PI * k as f64 / n as f64;
            let (mut re, mut im) = (0.0, 0.0);
            for (i, s) in windowed.iter().enumerate() {
                let (sin, cos) = (step * i as f64).sin_cos();
                re += s * cos;
                im -= s * sin;
            }
            (re * re + im * im).sqrt()
        })
        .collect()
}

/// Spectral flatness (geometric over arithmetic mean of the power spectrum,
/// DC and Nyquist excluded) in dB.
pub fn spectral_flatness_db(frame: &[f64]) -> f64 {
    let power: Vec<f64> = dft_magnitudes(frame, 1..frame.len() / 2)
        .into_iter()
        .map(|m| m * m + 1e-300)
        .collect();
    let log_mean = power.iter().map(|p| p.ln()).sum::<f64>() / power.len() as f64;
    let mean = power.iter().sum::<f64>() / power.len() as f64;
    10.0 * (log_mean.exp() / mean).log10()
}

/// RMS of consecutive frames on a `win`/`hop` grid.
pub fn frame_rms(signal: &[f64], win: usize, hop: usize) -> Vec<f64> {
    if signal.len() < win {
        return Vec::new();
    }
    (0..=(signal.len() - win) / hop)
        .map(|i| {
            let frame = &signal[i * hop..i * hop + win];
            (frame.iter().map(|v| v * v).sum::<f64>() / win as f64).sqrt()
        })
        .collect()
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let ma = a.iter().sum::<f64>() / n as f64;
    let mb = b.iter().sum::<f64>() / n as f64;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}
