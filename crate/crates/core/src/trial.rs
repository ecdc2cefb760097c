//! Trial labels shared by protocols, score files and fusion sets.

use alloc::string::String;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Key {
    Bonafide,
    Spoof,
}

impl Key {
    pub fn as_str(self) -> &'static str {
        match self {
            Key::Bonafide => "bonafide",
            Key::Spoof => "spoof",
        }
    }

    pub fn parse(s: &str) -> Option<Key> {
        match s {
            "bonafide" => Some(Key::Bonafide),
            "spoof" => Some(Key::Spoof),
            _ => None,
        }
    }
}

/// One protocol entry. Bona fide trials carry no attack id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trial {
    pub speaker_id: String,
    pub utterance_id: String,
    pub attack_id: Option<String>,
}

impl Trial {
    pub fn key(&self) -> Key {
        if self.attack_id.is_some() {
            Key::Spoof
        } else {
            Key::Bonafide
        }
    }

    /// Attack id as written in files: `-` for bona fide.
    pub fn attack_str(&self) -> &str {
        self.attack_id.as_deref().unwrap_or("-")
    }
}
