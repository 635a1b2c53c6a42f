use std::fs;
use std::path::Path;

use rhythmaug::audio_io::Encoding;
use rhythmaug::dsp::Window;
use rhythmaug::features::FeatureConfig;
use rhythmaug::glottal::IaifConfig;
use rhythmaug::rpm::RpmConfig;
use rhythmaug::synthesis::GriffinLimConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Run configuration file. Every section and field is optional; unknown keys
/// are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub audio: AudioSection,
    pub iaif: IaifSection,
    pub features: FeatureConfig,
    pub rpm: RpmSection,
    pub griffin_lim: GriffinLimConfig,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AudioSection {
    /// Encoding of written WAV files.
    pub encoding: Encoding,
}

impl Default for AudioSection {
    fn default() -> Self {
        Self {
            encoding: Encoding::Pcm16,
        }
    }
}

/// IAIF overrides. Unset fields follow the sample-rate dependent defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IaifSection {
    pub vocal_tract_order: Option<usize>,
    pub glottal_order: Option<usize>,
    pub lip_d: Option<f64>,
    pub win_length: Option<usize>,
    pub hop_length: Option<usize>,
    pub window: Option<Window>,
    pub highpass_cutoff: Option<f64>,
}

impl IaifSection {
    pub fn resolve(&self, sample_rate: u32) -> IaifConfig {
        let mut cfg = IaifConfig::for_sample_rate(sample_rate);
        if let Some(v) = self.vocal_tract_order {
            cfg.vocal_tract_order = v;
        }
        if let Some(v) = self.glottal_order {
            cfg.glottal_order = v;
        }
        if let Some(v) = self.lip_d {
            cfg.lip_d = v;
        }
        if let Some(v) = self.win_length {
            cfg.frame.win_length = v;
        }
        if let Some(v) = self.hop_length {
            cfg.frame.hop_length = v;
        }
        if let Some(v) = self.window {
            cfg.frame.window = v;
        }
        if let Some(v) = self.highpass_cutoff {
            cfg.highpass_cutoff = v;
        }
        cfg
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RpmSection {
    pub seg_min: usize,
    pub seg_max: usize,
    pub factor_lo: f64,
    pub factor_hi: f64,
}

impl Default for RpmSection {
    fn default() -> Self {
        let d = RpmConfig::default();
        Self {
            seg_min: d.seg_min,
            seg_max: d.seg_max,
            factor_lo: d.factor_lo,
            factor_hi: d.factor_hi,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn rpm_config(&self) -> RpmConfig {
        RpmConfig {
            seg_min: self.rpm.seg_min,
            seg_max: self.rpm.seg_max,
            factor_lo: self.rpm.factor_lo,
            factor_hi: self.rpm.factor_hi,
            seed: self.seed,
            f0_floor: self.features.f0_min,
        }
    }

    pub fn write_echo(&self, out_dir: &Path) -> Result<(), CliError> {
        let json = serde_json::to_string_pretty(self).expect("config serializes");
        fs::write(out_dir.join("config.json"), json + "\n")?;
        Ok(())
    }
}
