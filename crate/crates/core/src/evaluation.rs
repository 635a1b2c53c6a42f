//! Equal error rate from detector scores, pooled and broken down by attack.
//!
//! Scores are "higher = more bonafide". At threshold `t`, a bonafide trial is
//! rejected when `score < t` and a spoof trial is accepted when `score >= t`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::audio_io::Key;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRecord {
    pub utt_id: String,
    pub key: Key,
    pub attack: String,
    pub score: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreSet {
    records: Vec<ScoreRecord>,
}

impl ScoreSet {
    /// Rejects duplicate utterance ids and non-finite scores.
    pub fn new(records: Vec<ScoreRecord>) -> Result<Self> {
        let mut seen = HashSet::new();
        for r in &records {
            if !r.score.is_finite() {
                return Err(Error::InvalidConfig(format!("score for {} is not finite", r.utt_id)));
            }
            if !seen.insert(r.utt_id.as_str()) {
                return Err(Error::DuplicateId(r.utt_id.clone()));
            }
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[ScoreRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn bonafide_scores(&self) -> Vec<f64> {
        self.scores_where(|r| r.key == Key::Bonafide)
    }

    pub fn spoof_scores(&self) -> Vec<f64> {
        self.scores_where(|r| r.key == Key::Spoof)
    }

    fn scores_where(&self, pred: impl Fn(&ScoreRecord) -> bool) -> Vec<f64> {
        self.records.iter().filter(|r| pred(r)).map(|r| r.score).collect()
    }
}

/// Reads a `utt_id<TAB>key<TAB>attack<TAB>score` file. Blank lines are skipped.
pub fn read_scores(path: &Path) -> Result<ScoreSet> {
    if !path.exists() {
        return Err(Error::NotFound(path.to_path_buf()));
    }
    parse_scores(&fs::read_to_string(path)?)
}

pub fn parse_scores(text: &str) -> Result<ScoreSet> {
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse { line: i + 1, message };
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        let [utt_id, key, attack, score] = fields[..] else {
            return Err(parse_err(format!("expected 4 tab-separated fields, found {}", fields.len())));
        };
        if utt_id.is_empty() {
            return Err(parse_err("empty utt_id".into()));
        }
        let key: Key = key.parse().map_err(parse_err)?;
        let score: f64 = score
            .parse()
            .map_err(|_| parse_err(format!("score `{score}` is not a number")))?;
        if !score.is_finite() {
            return Err(parse_err(format!("score `{score}` is not finite")));
        }
        records.push(ScoreRecord {
            utt_id: utt_id.to_string(),
            key,
            attack: attack.to_string(),
            score,
        });
    }
    ScoreSet::new(records)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EerResult {
    /// Fraction in [0, 1].
    pub eer: f64,
    pub threshold: f64,
}

impl EerResult {
    pub fn percent(&self) -> f64 {
        self.eer * 100.0
    }
}

pub fn compute_eer(scores: &ScoreSet) -> Result<EerResult> {
    eer_from_scores(&scores.bonafide_scores(), &scores.spoof_scores())
}

/// EER at the crossing of the FAR and FRR step functions.
///
/// Candidate thresholds are the sorted unique scores plus `+inf`
/// (FAR = 0, FRR = 1). With `D = FAR - FRR` non-increasing over candidates,
/// the crossing is located between the last candidate with `D > 0` and the
/// next one, and both rates are interpolated linearly there. When the upper
/// candidate is `+inf` the lower threshold is reported.
pub fn eer_from_scores(bonafide: &[f64], spoof: &[f64]) -> Result<EerResult> {
    if bonafide.is_empty() || spoof.is_empty() {
        return Err(Error::InsufficientClasses {
            bonafide: bonafide.len(),
            spoof: spoof.len(),
        });
    }
    let mut bona = bonafide.to_vec();
    let mut spf = spoof.to_vec();
    bona.sort_by(f64::total_cmp);
    spf.sort_by(f64::total_cmp);
    let mut thresholds: Vec<f64> = bona.iter().chain(&spf).copied().collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();

    let (n_bona, n_spoof) = (bona.len() as f64, spf.len() as f64);
    // cursors: bonafide below t, spoof below t
    let (mut bi, mut si) = (0usize, 0usize);
    let mut rates = |t: f64| {
        while bi < bona.len() && bona[bi] < t {
            bi += 1;
        }
        while si < spf.len() && spf[si] < t {
            si += 1;
        }
        let frr = bi as f64 / n_bona;
        let far = (spf.len() - si) as f64 / n_spoof;
        (far, frr)
    };

    let mut prev = (thresholds[0], rates(thresholds[0]));
    if prev.1 .0 <= prev.1 .1 {
        // can only happen with D == 0 at the lowest score
        return Ok(EerResult {
            eer: prev.1 .1,
            threshold: prev.0,
        });
    }
    for &t in thresholds[1..].iter().chain(std::iter::once(&f64::INFINITY)) {
        let (far, frr) = rates(t);
        if far - frr <= 0.0 {
            let (t0, (far0, frr0)) = prev;
            let d0 = far0 - frr0;
            let d1 = far - frr;
            let alpha = d0 / (d0 - d1);
            let threshold = if t.is_infinite() { t0 } else { t0 + alpha * (t - t0) };
            return Ok(EerResult {
                eer: frr0 + alpha * (frr - frr0),
                threshold,
            });
        }
        prev = (t, (far, frr));
    }
    unreachable!("D is -1 at the +inf sentinel")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum AttackGroup {
    #[serde(rename = "TTS")]
    Tts,
    #[serde(rename = "VC")]
    Vc,
}

impl FromStr for AttackGroup {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "TTS" => Ok(Self::Tts),
            "VC" => Ok(Self::Vc),
            other => Err(format!("unknown attack group `{other}` (expected TTS or VC)")),
        }
    }
}

impl fmt::Display for AttackGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Tts => "TTS",
            Self::Vc => "VC",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttackMapping {
    groups: HashMap<String, AttackGroup>,
}

impl Default for AttackMapping {
    /// ASVspoof 2019 LA evaluation attacks: A07-A16 are TTS, A17-A19 are VC.
    fn default() -> Self {
        let groups = (7..=19)
            .map(|i| {
                let group = if i <= 16 { AttackGroup::Tts } else { AttackGroup::Vc };
                (format!("A{i:02}"), group)
            })
            .collect();
        Self { groups }
    }
}

impl AttackMapping {
    pub fn new(groups: HashMap<String, AttackGroup>) -> Self {
        Self { groups }
    }

    /// `attack<TAB>TTS|VC` per line. Replaces the default table.
    pub fn from_file(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::NotFound(path.to_path_buf()));
        }
        let text = fs::read_to_string(path)?;
        let mut groups = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse { line: i + 1, message };
            let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
            let [attack, group] = fields[..] else {
                return Err(parse_err(format!("expected 2 tab-separated fields, found {}", fields.len())));
            };
            groups.insert(attack.to_string(), group.parse().map_err(parse_err)?);
        }
        Ok(Self { groups })
    }

    pub fn group(&self, attack: &str) -> Option<AttackGroup> {
        self.groups.get(attack).copied()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackEer {
    pub group: Option<AttackGroup>,
    pub result: EerResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EerBreakdown {
    pub total: EerResult,
    /// `None` when no spoof trial of the group is present.
    pub tts: Option<EerResult>,
    pub vc: Option<EerResult>,
    pub per_attack: BTreeMap<String, AttackEer>,
}

/// Per-attack and per-group EERs. Every subset pools all bonafide trials
/// against its own spoof trials. Spoof attacks missing from `mapping` are an
/// error in strict mode; otherwise they count only toward their own row and
/// the total.
pub fn eer_breakdown(scores: &ScoreSet, mapping: &AttackMapping, strict: bool) -> Result<EerBreakdown> {
    let bonafide = scores.bonafide_scores();
    let mut by_attack: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in scores.records().iter().filter(|r| r.key == Key::Spoof) {
        by_attack.entry(r.attack.as_str()).or_default().push(r.score);
    }
    let mut by_group: BTreeMap<AttackGroup, Vec<f64>> = BTreeMap::new();
    let mut per_attack = BTreeMap::new();
    for (attack, spoof) in &by_attack {
        let group = mapping.group(attack);
        match group {
            Some(g) => by_group.entry(g).or_default().extend(spoof),
            None if strict => return Err(Error::UnknownAttack(attack.to_string())),
            None => {}
        }
        per_attack.insert(
            attack.to_string(),
            AttackEer {
                group,
                result: eer_from_scores(&bonafide, spoof)?,
            },
        );
    }
    let group_eer = |g| {
        by_group
            .get(&g)
            .map(|spoof| eer_from_scores(&bonafide, spoof))
            .transpose()
    };
    Ok(EerBreakdown {
        total: compute_eer(scores)?,
        tts: group_eer(AttackGroup::Tts)?,
        vc: group_eer(AttackGroup::Vc)?,
        per_attack,
    })
}

fn round2(percent: f64) -> f64 {
    (percent * 100.0).round() / 100.0
}

#[derive(Serialize)]
struct JsonReport {
    total: f64,
    tts: Option<f64>,
    vc: Option<f64>,
    per_attack: BTreeMap<String, f64>,
}

impl EerBreakdown {
    /// `{total, tts, vc, per_attack: {..}}` with EERs in percent, two decimals.
    pub fn to_json(&self) -> serde_json::Value {
        let report = JsonReport {
            total: round2(self.total.percent()),
            tts: self.tts.map(|r| round2(r.percent())),
            vc: self.vc.map(|r| round2(r.percent())),
            per_attack: self
                .per_attack
                .iter()
                .map(|(k, v)| (k.clone(), round2(v.result.percent())))
                .collect(),
        };
        serde_json::to_value(report).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let mut rows: Vec<(String, String, Option<f64>)> = self
            .per_attack
            .iter()
            .map(|(attack, e)| {
                let group = e.group.map_or_else(|| "?".to_string(), |g| g.to_string());
                (attack.clone(), group, Some(e.result.percent()))
            })
            .collect();
        rows.push(("TTS".into(), "-".into(), self.tts.map(|r| r.percent())));
        rows.push(("VC".into(), "-".into(), self.vc.map(|r| r.percent())));
        rows.push(("total".into(), "-".into(), Some(self.total.percent())));

        let width = rows.iter().map(|r| r.0.len()).max().unwrap_or(0).max("attack".len());
        let mut out = format!("{:<width$}  {:<5}  {:>7}\n", "attack", "group", "EER(%)");
        for (name, group, eer) in rows {
            let eer = eer.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"));
            let _ = writeln!(out, "{name:<width$}  {group:<5}  {eer:>7}");
        }
        out
    }
}
