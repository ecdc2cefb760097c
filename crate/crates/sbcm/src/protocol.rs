//! Protocol files: one trial per line, `speaker utterance - attack key`.

use std::collections::HashSet;
use std::path::Path;

use sbcm_core::{Key, Trial};

use crate::error::{read_text, write_atomic, Error, LineError, Result};

fn parse_line(line: &str) -> std::result::Result<Trial, String> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    let [speaker, utt, dash, attack, key] = fields[..] else {
        return Err(format!("expected 5 fields, found {}", fields.len()));
    };
    if dash != "-" {
        return Err(format!("third field must be '-', found {dash:?}"));
    }
    let key = Key::parse(key).ok_or_else(|| format!("unknown key {key:?}"))?;
    let attack_id = (attack != "-").then(|| attack.to_string());
    if (key == Key::Bonafide) != attack_id.is_none() {
        return Err(format!("key {} does not match attack {attack:?}", key.as_str()));
    }
    Ok(Trial { speaker_id: speaker.into(), utterance_id: utt.into(), attack_id })
}

/// Parses protocol text. Blank lines are skipped; anything else must be a valid
/// trial, and utterance ids must be unique.
pub fn parse_protocol(text: &str) -> std::result::Result<Vec<Trial>, LineError> {
    let mut trials = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let t = parse_line(line).map_err(|m| LineError::new(i + 1, m))?;
        if !seen.insert(t.utterance_id.clone()) {
            return Err(LineError::new(i + 1, format!("duplicate utterance {}", t.utterance_id)));
        }
        trials.push(t);
    }
    Ok(trials)
}

fn is_token(s: &str) -> bool {
    !s.is_empty() && !s.contains(char::is_whitespace)
}

pub fn format_protocol(trials: &[Trial]) -> std::result::Result<String, String> {
    let mut out = String::new();
    for t in trials {
        let attack_ok = t.attack_id.as_deref().is_none_or(|a| is_token(a) && a != "-");
        if !(is_token(&t.speaker_id) && is_token(&t.utterance_id) && attack_ok) {
            return Err(format!("trial {:?} has a field that is not a single token", t.utterance_id));
        }
        out.push_str(&format!("{} {} - {} {}\n", t.speaker_id, t.utterance_id, t.attack_str(), t.key().as_str()));
    }
    Ok(out)
}

pub fn read_protocol(path: &Path) -> Result<Vec<Trial>> {
    parse_protocol(&read_text(path)?).map_err(|e| e.at(path))
}

pub fn write_protocol(path: &Path, trials: &[Trial]) -> Result<()> {
    let text = format_protocol(trials).map_err(|m| Error::format(path, m))?;
    write_atomic(path, text.as_bytes())
}
