//! Rhythm perturbation of feature streams.
//!
//! The frame timeline of a [`FeatureBundle`] is cut into segments of random
//! length, and each segment is time-resampled by a random factor with linear
//! interpolation. Mel bands and F0 share one plan. Only the time axis is
//! touched: every mel band and every pitch value in the output is an
//! interpolation of input values from the same segment.
//!
//! [`speed_perturb`] is the waveform-domain baseline. It resamples raw samples,
//! which changes duration and scales every frequency by `1 / factor`.

use serde::{Deserialize, Serialize};

use crate::audio_io::AudioBuffer;
use crate::dsp::{linear_resample, linear_resample_rows, resampled_len};
use crate::error::{Error, Result};
use crate::features::FeatureBundle;

/// splitmix64 generator.
///
/// `next_u64` adds `0x9E3779B97F4A7C15` to the state and returns the state
/// mixed by `z ^= z >> 30; z *= 0xBF58476D1CE4E5B9; z ^= z >> 27;
/// z *= 0x94D049BB133111EB; z ^= z >> 31` (wrapping arithmetic). Uniform
/// reals take the high 53 bits: `(next_u64() >> 11) * 2^-53`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rng {
    state: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Generator for one utterance: seeded with `seed ^ fnv1a64(utt_id)`.
    pub fn for_utterance(seed: u64, utt_id: &str) -> Self {
        Self::new(seed ^ fnv1a64(utt_id))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `lo..=hi` (one draw).
    pub fn uniform_int(&mut self, lo: usize, hi: usize) -> usize {
        let span = (hi - lo + 1) as f64;
        lo + ((self.next_f64() * span) as usize).min(hi - lo)
    }

    /// Uniform real in `[lo, hi]` (one draw); exactly `lo` when `lo == hi`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + self.next_f64() * (hi - lo)
    }
}

/// 64-bit FNV-1a over the UTF-8 bytes of `s`.
pub fn fnv1a64(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RpmConfig {
    pub seg_min: usize,
    pub seg_max: usize,
    pub factor_lo: f64,
    pub factor_hi: f64,
    pub seed: u64,
    /// Resampled F0 values below this are snapped to 0 (unvoiced).
    pub f0_floor: f64,
}

impl Default for RpmConfig {
    fn default() -> Self {
        Self {
            seg_min: 19,
            seg_max: 32,
            factor_lo: 0.5,
            factor_hi: 1.5,
            seed: 0,
            f0_floor: 50.0,
        }
    }
}

impl RpmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1 <= self.seg_min && self.seg_min <= self.seg_max) {
            return Err(Error::InvalidConfig(format!(
                "need 1 <= seg_min ({}) <= seg_max ({})",
                self.seg_min, self.seg_max
            )));
        }
        if !(self.factor_lo > 0.0 && self.factor_lo <= self.factor_hi && self.factor_hi.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "need 0 < factor_lo ({}) <= factor_hi ({})",
                self.factor_lo, self.factor_hi
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: usize,
    pub len: usize,
    pub factor: f64,
}

impl Segment {
    pub fn output_len(&self) -> usize {
        resampled_len(self.len, self.factor)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SegmentPlan {
    pub segments: Vec<Segment>,
}

impl SegmentPlan {
    /// Frames covered by the plan.
    pub fn input_frames(&self) -> usize {
        self.segments.iter().map(|s| s.len).sum()
    }

    /// Frames produced by applying the plan: `sum max(1, round(len * factor))`.
    pub fn output_frames(&self) -> usize {
        self.segments.iter().map(Segment::output_len).sum()
    }

    /// Checks that the segments partition `0..n_frames` in order.
    pub fn check_tiles(&self, n_frames: usize) -> Result<()> {
        let mismatch = |reason: String| Err(Error::PlanMismatch { n_frames, reason });
        let mut cursor = 0;
        for (i, seg) in self.segments.iter().enumerate() {
            if seg.start != cursor {
                return mismatch(format!("segment {i} starts at {} instead of {cursor}", seg.start));
            }
            if seg.len == 0 {
                return mismatch(format!("segment {i} is empty"));
            }
            if !(seg.factor > 0.0 && seg.factor.is_finite()) {
                return mismatch(format!("segment {i} has factor {}", seg.factor));
            }
            cursor += seg.len;
        }
        if cursor != n_frames {
            return mismatch(format!("segments cover {cursor} frames"));
        }
        Ok(())
    }
}

/// Provenance record written next to each augmented output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRecord {
    pub utt_id: String,
    pub seed: u64,
    pub segments: Vec<Segment>,
}

/// Draws `(length, factor)` per segment, in that order, until the timeline is
/// covered; the last segment is clipped to the remaining frames but keeps its
/// factor draw.
pub fn sample_segment_plan(total_frames: usize, cfg: &RpmConfig, rng: &mut Rng) -> SegmentPlan {
    let mut segments = Vec::new();
    let mut start = 0;
    while start < total_frames {
        let len = rng.uniform_int(cfg.seg_min, cfg.seg_max);
        let factor = rng.uniform(cfg.factor_lo, cfg.factor_hi);
        let len = len.min(total_frames - start);
        segments.push(Segment { start, len, factor });
        start += len;
    }
    SegmentPlan { segments }
}

/// Resamples every segment of `bundle` (mel bands and F0 alike) by its factor
/// and concatenates the results.
pub fn apply_plan(bundle: &FeatureBundle, plan: &SegmentPlan, f0_floor: f64) -> Result<FeatureBundle> {
    plan.check_tiles(bundle.n_frames())?;
    let n_mels = bundle.n_mels();
    let out_frames = plan.output_frames();
    let mut mel = Vec::with_capacity(out_frames * n_mels);
    let mut f0 = Vec::with_capacity(out_frames);
    for seg in &plan.segments {
        let range = seg.start..seg.start + seg.len;
        mel.extend(linear_resample_rows(
            &bundle.mel()[range.start * n_mels..range.end * n_mels],
            n_mels,
            seg.factor,
        ));
        f0.extend(
            linear_resample(&bundle.f0()[range], seg.factor)
                .into_iter()
                .map(|v| if v < f0_floor { 0.0 } else { v }),
        );
    }
    FeatureBundle::new(
        mel,
        n_mels,
        f0,
        bundle.sample_rate,
        bundle.hop_length,
        bundle.win_length,
    )
}

pub fn rhythm_perturb(
    bundle: &FeatureBundle,
    cfg: &RpmConfig,
    utt_id: &str,
) -> Result<(FeatureBundle, SegmentPlan)> {
    cfg.validate()?;
    let mut rng = Rng::for_utterance(cfg.seed, utt_id);
    let plan = sample_segment_plan(bundle.n_frames(), cfg, &mut rng);
    let out = apply_plan(bundle, &plan, cfg.f0_floor)?;
    Ok((out, plan))
}

/// Waveform resampling by `factor`: duration scales by `factor`, the sample
/// rate field is kept, so played-back frequencies scale by `1 / factor`.
pub fn speed_perturb(audio: &AudioBuffer, factor: f64) -> Result<AudioBuffer> {
    if !(factor > 0.0 && factor.is_finite()) {
        return Err(Error::InvalidConfig(format!("speed factor {factor} must be > 0")));
    }
    if audio.is_empty() {
        return Err(Error::EmptyAudio);
    }
    AudioBuffer::new(linear_resample(audio.samples(), factor), audio.sample_rate())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop_assert, prop_assert_eq, proptest};

    fn bundle(n_frames: usize, n_mels: usize, seed: u64) -> FeatureBundle {
        let mut rng = Rng::new(seed);
        let mel = (0..n_frames * n_mels).map(|_| rng.uniform(-20.0, 5.0)).collect();
        let f0 = (0..n_frames)
            .map(|_| if rng.next_f64() < 0.3 { 0.0 } else { rng.uniform(80.0, 300.0) })
            .collect();
        FeatureBundle::new(mel, n_mels, f0, 16000.0, 256, 1024).unwrap()
    }

    #[test]
    fn splitmix_reference_values() {
        // Reference outputs of splitmix64 seeded with 0.
        let mut rng = Rng::new(0);
        assert_eq!(rng.next_u64(), 0xE220_A839_7B1D_CDAF);
        assert_eq!(rng.next_u64(), 0x6E78_9E6A_A1B9_65F4);
        assert_eq!(rng.next_u64(), 0x06C4_5D18_8009_454F);
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a64(""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a64("a"), 0xaf63_dc4c_8601_ec8c);
        assert_eq!(fnv1a64("foobar"), 0x8594_4171_f739_67e8);
    }

    #[test]
    fn short_timeline_is_one_segment() {
        let cfg = RpmConfig::default();
        let mut rng = Rng::new(3);
        let plan = sample_segment_plan(10, &cfg, &mut rng);
        assert_eq!(plan.segments.len(), 1);
        assert_eq!((plan.segments[0].start, plan.segments[0].len), (0, 10));
        // one length draw and one factor draw
        let mut probe = Rng::new(3);
        probe.next_u64();
        let factor = probe.uniform(0.5, 1.5);
        assert_eq!(plan.segments[0].factor, factor);
    }

    #[test]
    fn plans_are_deterministic() {
        let cfg = RpmConfig::default();
        let a = sample_segment_plan(64, &cfg, &mut Rng::new(42));
        let b = sample_segment_plan(64, &cfg, &mut Rng::new(42));
        assert_eq!(a, b);
    }

    #[test]
    fn mean_segment_length_is_uniform_mean() {
        let mut rng = Rng::new(2024);
        let n = 10_000;
        let total: usize = (0..n).map(|_| rng.uniform_int(19, 32)).sum();
        let mean = total as f64 / n as f64;
        assert!((mean - 25.5).abs() < 0.5, "{mean}");
    }

    #[test]
    fn unit_factor_is_identity() {
        let b = bundle(100, 8, 1);
        let cfg = RpmConfig {
            factor_lo: 1.0,
            factor_hi: 1.0,
            ..RpmConfig::default()
        };
        let (out, _) = rhythm_perturb(&b, &cfg, "utt").unwrap();
        assert_eq!(out, b);
    }

    #[test]
    fn stretch_one_segment() {
        let b = bundle(20, 4, 9);
        let plan = SegmentPlan {
            segments: vec![Segment {
                start: 0,
                len: 20,
                factor: 1.5,
            }],
        };
        let out = apply_plan(&b, &plan, 50.0).unwrap();
        assert_eq!(out.n_frames(), 30);
        for band in 0..4 {
            let column: Vec<f64> = b.mel_frames().map(|f| f[band]).collect();
            let lo = column.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = column.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert!(out.mel_frames().all(|f| f[band] >= lo && f[band] <= hi));
        }
    }

    #[test]
    fn constant_pitch_survives_any_plan() {
        let n = 90;
        let b = FeatureBundle::new(vec![0.0; n * 2], 2, vec![200.0; n], 16000.0, 256, 1024).unwrap();
        for seed in 0..20 {
            let cfg = RpmConfig {
                seed,
                ..RpmConfig::default()
            };
            let (out, _) = rhythm_perturb(&b, &cfg, "x").unwrap();
            assert!(out.f0().iter().all(|f| *f == 200.0));
        }
    }

    #[test]
    fn voiced_unvoiced_interpolation_snaps_low_pitch() {
        let b = FeatureBundle::new(vec![0.0; 4], 1, vec![0.0, 120.0, 120.0, 0.0], 16000.0, 256, 1024).unwrap();
        let plan = SegmentPlan {
            segments: vec![Segment {
                start: 0,
                len: 4,
                factor: 3.0,
            }],
        };
        let out = apply_plan(&b, &plan, 50.0).unwrap();
        assert!(out.f0().iter().all(|f| *f == 0.0 || *f >= 50.0));
        assert!(out.f0().iter().any(|f| *f == 0.0 && *f != out.f0()[0]) || out.f0()[0] == 0.0);
    }

    #[test]
    fn mismatched_plan_is_rejected() {
        let b = bundle(30, 2, 0);
        let plan = SegmentPlan {
            segments: vec![Segment {
                start: 0,
                len: 20,
                factor: 1.0,
            }],
        };
        assert!(matches!(apply_plan(&b, &plan, 50.0), Err(Error::PlanMismatch { .. })));
        let gap = SegmentPlan {
            segments: vec![
                Segment { start: 0, len: 10, factor: 1.0 },
                Segment { start: 12, len: 18, factor: 1.0 },
            ],
        };
        assert!(gap.check_tiles(30).is_err());
    }

    #[test]
    fn utterances_get_different_plans() {
        let b = bundle(200, 2, 5);
        let cfg = RpmConfig::default();
        let (_, p1) = rhythm_perturb(&b, &cfg, "LA_T_1000001").unwrap();
        let (_, p2) = rhythm_perturb(&b, &cfg, "LA_T_1000002").unwrap();
        let (_, p1_again) = rhythm_perturb(&b, &cfg, "LA_T_1000001").unwrap();
        assert_ne!(p1, p2);
        assert_eq!(p1, p1_again);
    }

    #[test]
    fn mean_output_length_tracks_mean_factor() {
        let b = bundle(300, 1, 8);
        let total: usize = (0..1000)
            .map(|seed| {
                let cfg = RpmConfig { seed, ..RpmConfig::default() };
                rhythm_perturb(&b, &cfg, "u").unwrap().0.n_frames()
            })
            .sum();
        let mean = total as f64 / 1000.0;
        assert!((mean - 300.0).abs() <= 5.0, "{mean}");
    }

    #[test]
    fn plan_record_json_shape() {
        let rec = PlanRecord {
            utt_id: "u".into(),
            seed: 7,
            segments: vec![Segment { start: 0, len: 3, factor: 0.75 }],
        };
        let json = serde_json::to_string(&rec).unwrap();
        assert_eq!(json, r#"{"utt_id":"u","seed":7,"segments":[{"start":0,"len":3,"factor":0.75}]}"#);
        assert_eq!(serde_json::from_str::<PlanRecord>(&json).unwrap(), rec);
    }

    #[test]
    fn speed_perturb_identity_and_length() {
        let audio = AudioBuffer::new(vec![0.1, 0.2, 0.3, 0.4, 0.5], 8000).unwrap();
        assert_eq!(speed_perturb(&audio, 1.0).unwrap(), audio);
        assert_eq!(speed_perturb(&audio, 1.5).unwrap().len(), 8);
        assert_eq!(speed_perturb(&audio, 0.01).unwrap().len(), 1);
        assert!(speed_perturb(&audio, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn sampled_plans_tile_and_respect_bounds(
            total in 1usize..2000,
            seed in any::<u64>(),
            seg_min in 1usize..40,
            seg_extra in 0usize..20,
            lo in 0.1f64..2.0,
            width in 0.0f64..1.0,
        ) {
            let cfg = RpmConfig { seg_min, seg_max: seg_min + seg_extra, factor_lo: lo, factor_hi: lo + width, seed, f0_floor: 50.0 };
            let plan = sample_segment_plan(total, &cfg, &mut Rng::new(seed));
            prop_assert!(plan.check_tiles(total).is_ok());
            let last = plan.segments.len() - 1;
            for (i, s) in plan.segments.iter().enumerate() {
                prop_assert!(s.factor >= cfg.factor_lo && s.factor <= cfg.factor_hi);
                if i < last {
                    prop_assert!(s.len >= cfg.seg_min && s.len <= cfg.seg_max);
                } else {
                    prop_assert!(s.len <= cfg.seg_max);
                }
            }
        }

        #[test]
        fn length_law_is_exact(n_frames in 1usize..400, seed in any::<u64>()) {
            let b = bundle(n_frames, 3, seed);
            let cfg = RpmConfig { seed, ..RpmConfig::default() };
            let (out, plan) = rhythm_perturb(&b, &cfg, "p").unwrap();
            let expected: usize = plan.segments.iter().map(|s| ((s.len as f64 * s.factor).round() as usize).max(1)).sum();
            prop_assert_eq!(out.n_frames(), expected);
            prop_assert_eq!(out.n_mels(), 3);
        }
    }
}
