//! Dataset manifests: TSV of `utterance_id path attack_id key`.

use std::path::{Path, PathBuf};

use sbcm_core::Key;

use crate::error::{read_text, write_atomic, LineError, Result};

const HEADER: &str = "utterance_id\tpath\tattack_id\tkey";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub utterance_id: String,
    pub path: PathBuf,
    pub attack_id: Option<String>,
}

impl ManifestEntry {
    pub fn key(&self) -> Key {
        if self.attack_id.is_some() {
            Key::Spoof
        } else {
            Key::Bonafide
        }
    }
}

pub fn format_manifest(entries: &[ManifestEntry]) -> String {
    let mut out = format!("{HEADER}\n");
    for e in entries {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            e.utterance_id,
            e.path.display(),
            e.attack_id.as_deref().unwrap_or("-"),
            e.key().as_str()
        ));
    }
    out
}

pub fn parse_manifest(text: &str) -> std::result::Result<Vec<ManifestEntry>, LineError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == HEADER => {}
        _ => return Err(LineError::new(1, format!("expected header {HEADER:?}"))),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        let [utt, path, attack, key] = f[..] else {
            return Err(LineError::new(i + 1, format!("expected 4 tab-separated fields, found {}", f.len())));
        };
        let key = Key::parse(key).ok_or_else(|| LineError::new(i + 1, format!("unknown key {key:?}")))?;
        let attack_id = (attack != "-").then(|| attack.to_string());
        if (key == Key::Bonafide) != attack_id.is_none() {
            return Err(LineError::new(i + 1, "key does not match attack id"));
        }
        out.push(ManifestEntry { utterance_id: utt.into(), path: path.into(), attack_id });
    }
    Ok(out)
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    parse_manifest(&read_text(path)?).map_err(|e| e.at(path))
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    write_atomic(path, format_manifest(entries).as_bytes())
}
