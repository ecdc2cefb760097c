//! Score files (`utterance_id attack_id key score`), alignment into score
//! vectors, and pooled / per-attack evaluation.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use sbcm_core::fusion::{ScoreVector, ScoreVectorSet};
use sbcm_core::metrics::{eer, min_tdcf, LabeledScores, TdcfCosts};
use sbcm_core::{Key, Trial};

use crate::error::{read_text, write_atomic, Error, LineError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreEntry {
    pub utterance_id: String,
    pub attack_id: Option<String>,
    pub score: f64,
}

impl ScoreEntry {
    pub fn key(&self) -> Key {
        if self.attack_id.is_some() {
            Key::Spoof
        } else {
            Key::Bonafide
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreFile {
    pub config_hash: Option<u64>,
    pub entries: Vec<ScoreEntry>,
}

pub(crate) fn format_hash(h: u64) -> String {
    format!("{h:#018x}")
}

pub(crate) fn parse_hash(s: &str) -> Option<u64> {
    u64::from_str_radix(s.strip_prefix("0x")?, 16).ok()
}

pub fn format_scores(file: &ScoreFile) -> String {
    let mut out = String::new();
    if let Some(h) = file.config_hash {
        out.push_str(&format!("# config_hash={}\n", format_hash(h)));
    }
    for e in &file.entries {
        out.push_str(&format!(
            "{} {} {} {:?}\n",
            e.utterance_id,
            e.attack_id.as_deref().unwrap_or("-"),
            e.key().as_str(),
            e.score
        ));
    }
    out
}

/// Parses a score file. `#` lines are comments, except `# config_hash=`.
pub fn parse_scores(text: &str) -> std::result::Result<ScoreFile, LineError> {
    let mut file = ScoreFile::default();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let err = |m: String| LineError::new(i + 1, m);
        if let Some(c) = line.strip_prefix('#') {
            if let Some(h) = c.trim().strip_prefix("config_hash=") {
                file.config_hash = Some(parse_hash(h).ok_or_else(|| err(format!("bad config hash {h:?}")))?);
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        let [utt, attack, key, score] = f[..] else {
            return Err(err(format!("expected 4 fields, found {}", f.len())));
        };
        let key = Key::parse(key).ok_or_else(|| err(format!("unknown key {key:?}")))?;
        let attack_id = (attack != "-").then(|| attack.to_string());
        if (key == Key::Bonafide) != attack_id.is_none() {
            return Err(err(format!("key {} does not match attack {attack:?}", key.as_str())));
        }
        let score: f64 = score.parse().map_err(|_| err(format!("bad score {score:?}")))?;
        if !score.is_finite() {
            return Err(err("score is not finite".into()));
        }
        if !seen.insert(utt.to_string()) {
            return Err(err(format!("duplicate utterance {utt}")));
        }
        file.entries.push(ScoreEntry { utterance_id: utt.into(), attack_id, score });
    }
    Ok(file)
}

pub fn read_scores(path: &Path) -> Result<ScoreFile> {
    parse_scores(&read_text(path)?).map_err(|e| e.at(path))
}

pub fn write_scores(path: &Path, file: &ScoreFile) -> Result<()> {
    if let Some(e) = file.entries.iter().find(|e| !e.score.is_finite()) {
        return Err(Error::format(path, format!("score of {} is not finite", e.utterance_id)));
    }
    write_atomic(path, format_scores(file).as_bytes())
}

/// Checks that a score file covers exactly the protocol's trials with the same labels.
pub fn check_against_protocol(file: &ScoreFile, protocol: &[Trial]) -> Result<()> {
    let labels: HashMap<&str, &Option<String>> = protocol.iter().map(|t| (t.utterance_id.as_str(), &t.attack_id)).collect();
    for e in &file.entries {
        match labels.get(e.utterance_id.as_str()) {
            None => return Err(Error::Alignment(format!("{} is not in the protocol", e.utterance_id))),
            Some(a) if **a != e.attack_id => {
                return Err(Error::Alignment(format!("{} is labelled differently in the protocol", e.utterance_id)))
            }
            _ => {}
        }
    }
    if file.entries.len() != protocol.len() {
        return Err(Error::Alignment(format!(
            "{} scores for {} protocol trials",
            file.entries.len(),
            protocol.len()
        )));
    }
    Ok(())
}

/// Joins several score files by utterance id into score vectors, in the order of
/// the first file. Every file must hold the same utterances with the same labels.
pub fn align(files: &[ScoreFile]) -> Result<ScoreVectorSet> {
    let first = files.first().ok_or_else(|| Error::Usage("no score files given".into()))?;
    let mut index: Vec<HashMap<&str, &ScoreEntry>> = Vec::with_capacity(files.len());
    for (j, f) in files.iter().enumerate() {
        if f.entries.len() != first.entries.len() {
            return Err(Error::Alignment(format!(
                "file {} has {} trials, file 1 has {}",
                j + 1,
                f.entries.len(),
                first.entries.len()
            )));
        }
        index.push(f.entries.iter().map(|e| (e.utterance_id.as_str(), e)).collect());
    }
    let mut trials = Vec::with_capacity(first.entries.len());
    for e in &first.entries {
        let mut scores = Vec::with_capacity(files.len());
        for (j, idx) in index.iter().enumerate() {
            let other = idx
                .get(e.utterance_id.as_str())
                .ok_or_else(|| Error::Alignment(format!("{} is missing from file {}", e.utterance_id, j + 1)))?;
            if other.attack_id != e.attack_id {
                return Err(Error::Alignment(format!("{} has different labels in file {}", e.utterance_id, j + 1)));
            }
            scores.push(other.score);
        }
        trials.push(ScoreVector { utterance_id: e.utterance_id.clone(), attack_id: e.attack_id.clone(), scores });
    }
    Ok(ScoreVectorSet::new(trials)?)
}

/// One row of an evaluation report.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    /// `pooled` or an attack id.
    pub name: String,
    pub n_bona: usize,
    pub n_spoof: usize,
    pub eer: f64,
    pub min_tdcf: f64,
}

/// Trials of each attack, plus every bona fide trial, keyed by attack id.
/// The spoof parts are disjoint and together cover every spoof trial.
pub fn per_attack_partition(entries: &[ScoreEntry]) -> BTreeMap<String, Vec<&ScoreEntry>> {
    let mut out: BTreeMap<String, Vec<&ScoreEntry>> = BTreeMap::new();
    for e in entries {
        if let Some(a) = &e.attack_id {
            out.entry(a.clone()).or_default().push(e);
        }
    }
    out
}

fn labeled<'a>(entries: impl Iterator<Item = &'a ScoreEntry>) -> Result<LabeledScores> {
    let (mut b, mut s) = (Vec::new(), Vec::new());
    for e in entries {
        match e.key() {
            Key::Bonafide => b.push(e.score),
            Key::Spoof => s.push(e.score),
        }
    }
    Ok(LabeledScores::new(b, s)?)
}

/// Pooled row first, then one row per attack sharing all bona fide trials.
pub fn evaluate(file: &ScoreFile, costs: &TdcfCosts) -> Result<Vec<EvalRow>> {
    let row = |name: &str, scores: LabeledScores| EvalRow {
        name: name.into(),
        n_bona: scores.bona().len(),
        n_spoof: scores.spoof().len(),
        eer: eer(&scores),
        min_tdcf: min_tdcf(&scores, costs).value,
    };
    let mut rows = vec![row("pooled", labeled(file.entries.iter())?)];
    let bona: Vec<&ScoreEntry> = file.entries.iter().filter(|e| e.attack_id.is_none()).collect();
    for (attack, spoof) in per_attack_partition(&file.entries) {
        rows.push(row(&attack, labeled(bona.iter().copied().chain(spoof))?));
    }
    Ok(rows)
}

pub fn format_report(rows: &[EvalRow], config_hash: u64) -> String {
    let mut out = format!("# config_hash={}\nname\tn_bonafide\tn_spoof\teer\tmin_tdcf\n", format_hash(config_hash));
    for r in rows {
        out.push_str(&format!("{}\t{}\t{}\t{:?}\t{:?}\n", r.name, r.n_bona, r.n_spoof, r.eer, r.min_tdcf));
    }
    out
}
