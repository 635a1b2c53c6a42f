//! Audio, manifest and feature-file I/O.
//!
//! WAV files are mono PCM16 or IEEE float32; samples are held as `f64`
//! internally. Manifests are tab-separated (`utt_id, path, key, attack`) so
//! paths may contain commas. Feature bundles use a small little-endian binary
//! container:
//!
//! ```text
//! "RFB1" | u32 version=1 | u32 n_frames | u32 n_mels | f64 sample_rate
//!        | u32 hop_length | u32 win_length
//!        | n_frames * n_mels f64 mel (frame-major, natural log)
//!        | n_frames f64 f0 (Hz, 0.0 = unvoiced)
//! ```

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureBundle;

pub const FEATURE_MAGIC: &[u8; 4] = b"RFB1";
pub const FEATURE_VERSION: u32 = 1;
const FEATURE_HEADER_LEN: usize = 4 + 4 + 4 + 4 + 8 + 4 + 4;

/// Mono audio with `f64` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioBuffer {
    /// Rejects a zero sample rate and non-finite samples.
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidAudio("sample_rate=0".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidAudio(format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    /// Scales to the given peak; a silent buffer is returned unchanged.
    pub fn peak_normalized(mut self, target: f64) -> Self {
        let peak = self.peak();
        if peak > 0.0 {
            let gain = target / peak;
            self.samples.iter_mut().for_each(|s| *s *= gain);
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Encoding {
    Pcm16,
    Float32,
}

pub fn read_wav(path: &Path) -> Result<AudioBuffer> {
    read_wav_with_encoding(path).map(|(buf, _)| buf)
}

/// Like [`read_wav`] but also reports the file's sample encoding.
pub fn read_wav_with_encoding(path: &Path) -> Result<(AudioBuffer, Encoding)> {
    if !path.exists() {
        return Err(Error::NotFound(path.to_path_buf()));
    }
    let mut reader = hound::WavReader::open(path).map_err(|e| map_hound(e, path))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::UnsupportedFormat(format!("channels={}", spec.channels)));
    }
    let (samples, encoding) = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => {
            let samples = reader
                .samples::<i16>()
                .map(|s| s.map(|v| f64::from(v) / 32768.0))
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| map_hound(e, path))?;
            (samples, Encoding::Pcm16)
        }
        (hound::SampleFormat::Float, 32) => {
            let samples = reader
                .samples::<f32>()
                .map(|s| s.map(f64::from))
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| map_hound(e, path))?;
            (samples, Encoding::Float32)
        }
        (format, bits) => {
            let kind = match format {
                hound::SampleFormat::Int => "pcm",
                hound::SampleFormat::Float => "float",
            };
            return Err(Error::UnsupportedFormat(format!(
                "bits_per_sample={bits} ({kind})"
            )));
        }
    };
    if samples.is_empty() {
        return Err(Error::EmptyAudio);
    }
    Ok((AudioBuffer::new(samples, spec.sample_rate)?, encoding))
}

fn map_hound(err: hound::Error, path: &Path) -> Error {
    match err {
        hound::Error::IoError(e) if e.kind() == std::io::ErrorKind::NotFound => {
            Error::NotFound(path.to_path_buf())
        }
        hound::Error::IoError(e) => Error::Io(e),
        hound::Error::FormatError(msg) => Error::UnsupportedFormat(format!("malformed wav: {msg}")),
        hound::Error::Unsupported => Error::UnsupportedFormat("compressed or non-PCM encoding".into()),
        other => Error::UnsupportedFormat(other.to_string()),
    }
}

/// PCM16 quantization: clamp to [-1, 1], scale by 32768, round, saturate.
pub fn quantize_pcm16(sample: f64) -> i16 {
    (sample.clamp(-1.0, 1.0) * 32768.0)
        .round()
        .clamp(i16::MIN as f64, i16::MAX as f64) as i16
}

pub fn write_wav(path: &Path, buf: &AudioBuffer, encoding: Encoding) -> Result<()> {
    if buf.is_empty() {
        return Err(Error::EmptyAudio);
    }
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: buf.sample_rate,
        bits_per_sample: match encoding {
            Encoding::Pcm16 => 16,
            Encoding::Float32 => 32,
        },
        sample_format: match encoding {
            Encoding::Pcm16 => hound::SampleFormat::Int,
            Encoding::Float32 => hound::SampleFormat::Float,
        },
    };
    let to_io = |e: hound::Error| match e {
        hound::Error::IoError(e) => Error::Io(e),
        other => Error::Io(std::io::Error::other(other.to_string())),
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(to_io)?;
    match encoding {
        Encoding::Pcm16 => {
            for &s in &buf.samples {
                writer.write_sample(quantize_pcm16(s)).map_err(to_io)?;
            }
        }
        Encoding::Float32 => {
            for &s in &buf.samples {
                writer.write_sample(s as f32).map_err(to_io)?;
            }
        }
    }
    writer.finalize().map_err(to_io)
}

// ---------------------------------------------------------------------------
// Manifests
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Key {
    Bonafide,
    Spoof,
}

impl FromStr for Key {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "bonafide" => Ok(Key::Bonafide),
            "spoof" => Ok(Key::Spoof),
            other => Err(format!("unknown key `{other}` (expected bonafide or spoof)")),
        }
    }
}

impl fmt::Display for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Key::Bonafide => "bonafide",
            Key::Spoof => "spoof",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub utt_id: String,
    pub path: PathBuf,
    pub key: Key,
    pub attack: String,
}

/// Reads a TSV manifest. Blank lines are skipped; relative paths are resolved
/// against the manifest's own directory.
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    if !path.exists() {
        return Err(Error::NotFound(path.to_path_buf()));
    }
    let text = fs::read_to_string(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            line: line_no,
            message,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(parse_err(format!("expected 4 tab-separated fields, found {}", fields.len())));
        }
        let utt_id = fields[0].trim();
        if utt_id.is_empty() {
            return Err(parse_err("empty utt_id".into()));
        }
        let key: Key = fields[2].trim().parse().map_err(parse_err)?;
        let attack = fields[3].trim();
        if key == Key::Bonafide && attack != "-" {
            return Err(parse_err(format!("bonafide entry must have attack `-`, got `{attack}`")));
        }
        if !seen.insert(utt_id.to_string()) {
            return Err(Error::DuplicateId(utt_id.to_string()));
        }
        let raw = PathBuf::from(fields[1]);
        entries.push(ManifestEntry {
            utt_id: utt_id.to_string(),
            path: if raw.is_absolute() { raw } else { base.join(raw) },
            key,
            attack: attack.to_string(),
        });
    }
    Ok(entries)
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    for e in entries {
        writeln!(out, "{}\t{}\t{}\t{}", e.utt_id, e.path.display(), e.key, e.attack)?;
    }
    out.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Feature files
// ---------------------------------------------------------------------------

pub fn encode_features(bundle: &FeatureBundle) -> Vec<u8> {
    let n_frames = bundle.n_frames();
    let mut out = Vec::with_capacity(FEATURE_HEADER_LEN + 8 * n_frames * (bundle.n_mels() + 1));
    out.extend_from_slice(FEATURE_MAGIC);
    out.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
    out.extend_from_slice(&(n_frames as u32).to_le_bytes());
    out.extend_from_slice(&(bundle.n_mels() as u32).to_le_bytes());
    out.extend_from_slice(&bundle.sample_rate.to_le_bytes());
    out.extend_from_slice(&(bundle.hop_length as u32).to_le_bytes());
    out.extend_from_slice(&(bundle.win_length as u32).to_le_bytes());
    for v in bundle.mel().iter().chain(bundle.f0()) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_features(bytes: &[u8]) -> Result<FeatureBundle> {
    if bytes.len() < 4 || &bytes[..4] != FEATURE_MAGIC {
        return Err(Error::BadMagic);
    }
    if bytes.len() < FEATURE_HEADER_LEN {
        return Err(Error::MalformedFeatures(format!(
            "header needs {FEATURE_HEADER_LEN} bytes, file has {}",
            bytes.len()
        )));
    }
    let u32_at = |off: usize| u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != FEATURE_VERSION {
        return Err(Error::VersionMismatch(version));
    }
    let n_frames = u32_at(8) as usize;
    let n_mels = u32_at(12) as usize;
    let sample_rate = f64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let hop_length = u32_at(24) as usize;
    let win_length = u32_at(28) as usize;

    let n_values = n_frames
        .checked_mul(n_mels)
        .and_then(|m| m.checked_add(n_frames))
        .ok_or_else(|| Error::MalformedFeatures("frame counts overflow".into()))?;
    let expected = n_values
        .checked_mul(8)
        .and_then(|b| b.checked_add(FEATURE_HEADER_LEN))
        .ok_or_else(|| Error::MalformedFeatures("frame counts overflow".into()))?;
    if bytes.len() != expected {
        return Err(Error::MalformedFeatures(format!(
            "expected {expected} bytes for {n_frames} frames x {n_mels} mels, found {}",
            bytes.len()
        )));
    }
    let mut values = bytes[FEATURE_HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let mel: Vec<f64> = values.by_ref().take(n_frames * n_mels).collect();
    let f0: Vec<f64> = values.collect();
    FeatureBundle::new(mel, n_mels, f0, sample_rate, hop_length, win_length)
}

pub fn write_features(path: &Path, bundle: &FeatureBundle) -> Result<()> {
    fs::write(path, encode_features(bundle))?;
    Ok(())
}

pub fn read_features(path: &Path) -> Result<FeatureBundle> {
    if !path.exists() {
        return Err(Error::NotFound(path.to_path_buf()));
    }
    decode_features(&fs::read(path)?)
}
