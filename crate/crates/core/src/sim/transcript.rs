//! Per-session event log, one JSON object per line.
//!
//! The field set is fixed (`docs/transcript.schema.json`); readers reject
//! unknown fields.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::protocol::Phase;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    In,
    Out,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Inband,
    Oob,
    User,
    Local,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranscriptRecord {
    pub seq: u64,
    pub tick: u64,
    pub endpoint: usize,
    /// False for devices run by the adversary.
    pub honest: bool,
    pub direction: Direction,
    pub channel: Channel,
    pub kind: String,
    /// Hex of the wire message or frame bytes; empty for local events.
    pub bytes: String,
    pub phase_before: Phase,
    pub phase_after: Phase,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Transcript {
    pub records: Vec<TranscriptRecord>,
}

impl Transcript {
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, serde_json::Error> {
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<_, _>>()?;
        Ok(Self { records })
    }

    /// SHA-256 of the JSON-lines rendering.
    pub fn digest(&self) -> [u8; 32] {
        Sha256::digest(self.to_jsonl().as_bytes()).into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec() -> TranscriptRecord {
        TranscriptRecord {
            seq: 0,
            tick: 3,
            endpoint: 1,
            honest: true,
            direction: Direction::In,
            channel: Channel::Inband,
            kind: "Join".into(),
            bytes: "00ff".into(),
            phase_before: Phase::Ready,
            phase_after: Phase::Joining,
        }
    }

    #[test]
    fn jsonl_round_trips() {
        let t = Transcript {
            records: vec![rec(), rec()],
        };
        let text = t.to_jsonl();
        assert_eq!(text.lines().count(), 2);
        assert!(text.contains("\"direction\":\"in\""));
        assert_eq!(Transcript::from_jsonl(&text).unwrap(), t);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let mut v = serde_json::to_value(rec()).unwrap();
        v["extra"] = serde_json::json!(1);
        assert!(Transcript::from_jsonl(&v.to_string()).is_err());
    }
}
