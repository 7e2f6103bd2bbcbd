//! In-band message framing and body layouts.
//!
//! | kind          | body                                              |
//! |---------------|---------------------------------------------------|
//! | Join          | network_key (8) ‖ dh_public (32)                  |
//! | Roster        | canonical fields: id, dh_public, id, dh_public... |
//! | GdhUp         | u32 BE target position ‖ elements (32 each)       |
//! | GdhDown       | elements (32 each)                                |
//! | Commit        | canonical bundle                                  |
//! | Disperse      | canonical fields, one canonical bundle each       |
//! | SuccessNonce  | nonce (32)                                        |
//! | AbortNonce    | nonce (32)                                        |

use serde::{Deserialize, Serialize};

use crate::crypto::encoding::{CanonicalReader, CanonicalWriter};
use crate::crypto::hash::tagged_hash;
use crate::crypto::{CommitmentBundle, CryptoError, Element, ParticipantId};

const TAG_WIRE: &[u8] = b"pairsonic/v1/wire";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MessageKind {
    Join,
    Roster,
    GdhUp,
    GdhDown,
    Commit,
    Disperse,
    SuccessNonce,
    AbortNonce,
}

impl MessageKind {
    pub const ALL: [MessageKind; 8] = [
        Self::Join,
        Self::Roster,
        Self::GdhUp,
        Self::GdhDown,
        Self::Commit,
        Self::Disperse,
        Self::SuccessNonce,
        Self::AbortNonce,
    ];

    pub fn to_byte(self) -> u8 {
        self as u8 + 1
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        Self::ALL.get((b as usize).checked_sub(1)?).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Join => "Join",
            Self::Roster => "Roster",
            Self::GdhUp => "GdhUp",
            Self::GdhDown => "GdhDown",
            Self::Commit => "Commit",
            Self::Disperse => "Disperse",
            Self::SuccessNonce => "SuccessNonce",
            Self::AbortNonce => "AbortNonce",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WireMessage {
    pub kind: MessageKind,
    #[serde(with = "hex::serde")]
    pub session_id: [u8; 16],
    pub sender: ParticipantId,
    #[serde(with = "hex::serde")]
    pub body: Vec<u8>,
}

impl WireMessage {
    pub fn new(
        kind: MessageKind,
        session_id: [u8; 16],
        sender: ParticipantId,
        body: Vec<u8>,
    ) -> Self {
        Self {
            kind,
            session_id,
            sender,
            body,
        }
    }

    /// `kind (1) ‖ session_id (16) ‖ sender (16) ‖ body`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(33 + self.body.len());
        out.push(self.kind.to_byte());
        out.extend_from_slice(&self.session_id);
        out.extend_from_slice(self.sender.as_bytes());
        out.extend_from_slice(&self.body);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Option<Self> {
        if bytes.len() < 33 {
            return None;
        }
        Some(Self {
            kind: MessageKind::from_byte(bytes[0])?,
            session_id: bytes[1..17].try_into().ok()?,
            sender: ParticipantId(bytes[17..33].try_into().ok()?),
            body: bytes[33..].to_vec(),
        })
    }

    pub fn digest(&self) -> [u8; 32] {
        tagged_hash(TAG_WIRE, &[&self.to_bytes()])
    }
}

pub fn join_body(network_key: &[u8; 8], dh_public: &Element) -> Vec<u8> {
    let mut b = network_key.to_vec();
    b.extend_from_slice(dh_public);
    b
}

pub fn parse_join(body: &[u8]) -> Option<([u8; 8], Element)> {
    if body.len() != 40 {
        return None;
    }
    Some((body[..8].try_into().ok()?, body[8..].try_into().ok()?))
}

pub fn roster_body(roster: &[(ParticipantId, Element)]) -> Vec<u8> {
    let mut w = CanonicalWriter::new();
    for (id, dh) in roster {
        w.field(id.as_bytes()).field(dh);
    }
    w.finish()
}

pub fn parse_roster(body: &[u8]) -> Result<Vec<(ParticipantId, Element)>, CryptoError> {
    let mut r = CanonicalReader::new(body);
    let mut out = Vec::new();
    while !r.is_empty() {
        out.push((ParticipantId(r.fixed()?), r.fixed()?));
    }
    Ok(out)
}

fn elements_bytes(elements: &[Element]) -> Vec<u8> {
    elements.concat()
}

fn parse_elements(bytes: &[u8]) -> Option<Vec<Element>> {
    if !bytes.len().is_multiple_of(32) {
        return None;
    }
    Some(
        bytes
            .chunks_exact(32)
            .map(|c| c.try_into().unwrap())
            .collect(),
    )
}

pub fn gdh_up_body(target: usize, elements: &[Element]) -> Vec<u8> {
    let mut b = (target as u32).to_be_bytes().to_vec();
    b.extend(elements_bytes(elements));
    b
}

pub fn parse_gdh_up(body: &[u8]) -> Option<(usize, Vec<Element>)> {
    if body.len() < 4 {
        return None;
    }
    let target = u32::from_be_bytes(body[..4].try_into().ok()?) as usize;
    Some((target, parse_elements(&body[4..])?))
}

pub fn gdh_down_body(elements: &[Element]) -> Vec<u8> {
    elements_bytes(elements)
}

pub fn parse_gdh_down(body: &[u8]) -> Option<Vec<Element>> {
    parse_elements(body)
}

pub fn disperse_body(bundles: &[CommitmentBundle]) -> Vec<u8> {
    let mut w = CanonicalWriter::new();
    for b in bundles {
        w.field(&b.to_canonical_bytes());
    }
    w.finish()
}

pub fn parse_disperse(body: &[u8]) -> Result<Vec<CommitmentBundle>, CryptoError> {
    let mut r = CanonicalReader::new(body);
    let mut out = Vec::new();
    while !r.is_empty() {
        out.push(CommitmentBundle::from_canonical_bytes(r.field()?)?);
    }
    Ok(out)
}

pub fn parse_nonce(body: &[u8]) -> Option<[u8; 32]> {
    body.try_into().ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn message_bytes_round_trip() {
        let m = WireMessage::new(
            MessageKind::Commit,
            [3; 16],
            ParticipantId([9; 16]),
            vec![1, 2, 3],
        );
        let b = m.to_bytes();
        assert_eq!(b[0], 5);
        assert_eq!(b.len(), 36);
        assert_eq!(WireMessage::from_bytes(&b), Some(m));
        assert_eq!(WireMessage::from_bytes(&b[..32]), None);
    }

    #[test]
    fn kinds_round_trip_through_byte_and_name() {
        for k in MessageKind::ALL {
            assert_eq!(MessageKind::from_byte(k.to_byte()), Some(k));
            assert_eq!(MessageKind::from_name(&k.name().to_lowercase()), Some(k));
        }
        assert_eq!(MessageKind::from_byte(0), None);
        assert_eq!(MessageKind::from_byte(9), None);
    }

    #[test]
    fn bodies_round_trip() {
        let roster = vec![
            (ParticipantId([1; 16]), [2; 32]),
            (ParticipantId([3; 16]), [4; 32]),
        ];
        assert_eq!(parse_roster(&roster_body(&roster)).unwrap(), roster);
        assert_eq!(
            parse_gdh_up(&gdh_up_body(3, &[[7; 32], [8; 32]])),
            Some((3, vec![[7; 32], [8; 32]]))
        );
        assert_eq!(parse_gdh_down(&[0; 33]), None);
        assert_eq!(
            parse_join(&join_body(&[5; 8], &[6; 32])),
            Some(([5; 8], [6; 32]))
        );
        assert!(parse_roster(&[0, 0, 0, 16, 1]).is_err());
    }
}
