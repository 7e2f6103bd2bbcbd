//! Frame byte layout, bit-exact:
//!
//! ```text
//! kind (1) | length (1) | payload (length <= 64) | crc32 over kind||payload (4, big-endian) | RS parity
//! ```

use serde::{Deserialize, Serialize};

use super::ModemError;

pub const MAX_PAYLOAD: usize = 64;
/// kind + length + crc32.
pub const FRAME_OVERHEAD: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FrameKind {
    NetworkInit,
    VerifyHash,
}

impl FrameKind {
    pub fn to_byte(self) -> u8 {
        match self {
            FrameKind::NetworkInit => 0x01,
            FrameKind::VerifyHash => 0x02,
        }
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0x01 => Some(FrameKind::NetworkInit),
            0x02 => Some(FrameKind::VerifyHash),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OobFrame {
    pub kind: FrameKind,
    #[serde(with = "hex::serde")]
    pub payload: Vec<u8>,
    pub crc: u32,
}

fn frame_crc(kind: FrameKind, payload: &[u8]) -> u32 {
    let mut h = crc32fast::Hasher::new();
    h.update(&[kind.to_byte()]);
    h.update(payload);
    h.finalize()
}

impl OobFrame {
    pub fn new(kind: FrameKind, payload: Vec<u8>) -> Result<Self, ModemError> {
        if payload.len() > MAX_PAYLOAD {
            return Err(ModemError::PayloadTooLong(payload.len()));
        }
        let crc = frame_crc(kind, &payload);
        Ok(Self { kind, payload, crc })
    }

    pub fn crc_valid(&self) -> bool {
        self.crc == frame_crc(self.kind, &self.payload)
    }

    /// Header, payload and CRC; the part protected by Reed-Solomon parity.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.payload.len() + FRAME_OVERHEAD);
        out.push(self.kind.to_byte());
        out.push(self.payload.len() as u8);
        out.extend_from_slice(&self.payload);
        out.extend_from_slice(&self.crc.to_be_bytes());
        out
    }

    /// Parses the layout produced by [`OobFrame::to_bytes`], checking the CRC.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModemError> {
        if bytes.len() < FRAME_OVERHEAD {
            return Err(ModemError::BadFrame("shorter than header and crc"));
        }
        let kind = FrameKind::from_byte(bytes[0]).ok_or(ModemError::BadFrame("unknown kind"))?;
        let len = bytes[1] as usize;
        if len > MAX_PAYLOAD || bytes.len() != len + FRAME_OVERHEAD {
            return Err(ModemError::BadFrame(
                "length byte disagrees with frame size",
            ));
        }
        let payload = bytes[2..2 + len].to_vec();
        let crc = u32::from_be_bytes(bytes[2 + len..].try_into().unwrap());
        let frame = Self { kind, payload, crc };
        if !frame.crc_valid() {
            return Err(ModemError::BadFrame("crc mismatch"));
        }
        Ok(frame)
    }
}

/// Network announcement played by the coordinator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NetworkInit {
    #[serde(with = "hex::serde")]
    pub network_id: [u8; 6],
    #[serde(with = "hex::serde")]
    pub network_key: [u8; 8],
    #[serde(with = "hex::serde")]
    pub session_id: [u8; 16],
}

impl NetworkInit {
    pub fn to_frame(&self) -> OobFrame {
        let mut p = Vec::with_capacity(30);
        p.extend_from_slice(&self.network_id);
        p.extend_from_slice(&self.network_key);
        p.extend_from_slice(&self.session_id);
        OobFrame::new(FrameKind::NetworkInit, p).expect("30-byte payload fits")
    }

    pub fn from_frame(frame: &OobFrame) -> Option<Self> {
        if frame.kind != FrameKind::NetworkInit || frame.payload.len() != 30 {
            return None;
        }
        let p = &frame.payload;
        Some(Self {
            network_id: p[..6].try_into().unwrap(),
            network_key: p[6..14].try_into().unwrap(),
            session_id: p[14..30].try_into().unwrap(),
        })
    }
}

/// Truncated verification digest bound to a session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VerifyHashPayload {
    #[serde(with = "hex::serde")]
    pub truncation: [u8; 16],
    #[serde(with = "hex::serde")]
    pub session_id: [u8; 16],
}

impl VerifyHashPayload {
    pub fn to_frame(&self) -> OobFrame {
        let mut p = Vec::with_capacity(32);
        p.extend_from_slice(&self.truncation);
        p.extend_from_slice(&self.session_id);
        OobFrame::new(FrameKind::VerifyHash, p).expect("32-byte payload fits")
    }

    pub fn from_frame(frame: &OobFrame) -> Option<Self> {
        if frame.kind != FrameKind::VerifyHash || frame.payload.len() != 32 {
            return None;
        }
        Some(Self {
            truncation: frame.payload[..16].try_into().unwrap(),
            session_id: frame.payload[16..].try_into().unwrap(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn byte_layout_is_exact() {
        let f = OobFrame::new(FrameKind::VerifyHash, vec![0xaa, 0xbb]).unwrap();
        let b = f.to_bytes();
        assert_eq!(&b[..4], &[0x02, 0x02, 0xaa, 0xbb]);
        let mut h = crc32fast::Hasher::new();
        h.update(&[0x02, 0xaa, 0xbb]);
        assert_eq!(&b[4..], &h.finalize().to_be_bytes());
        assert_eq!(OobFrame::from_bytes(&b).unwrap(), f);
    }

    #[test]
    fn rejects_long_payloads_and_bad_crc() {
        assert!(OobFrame::new(FrameKind::NetworkInit, vec![0; 65]).is_err());
        let mut b = OobFrame::new(FrameKind::NetworkInit, vec![1, 2, 3])
            .unwrap()
            .to_bytes();
        b[3] ^= 1;
        assert!(OobFrame::from_bytes(&b).is_err());
    }

    #[test]
    fn typed_payloads_round_trip() {
        let ni = NetworkInit {
            network_id: [1; 6],
            network_key: [2; 8],
            session_id: [3; 16],
        };
        assert_eq!(NetworkInit::from_frame(&ni.to_frame()), Some(ni));
        let vh = VerifyHashPayload {
            truncation: [4; 16],
            session_id: [5; 16],
        };
        assert_eq!(VerifyHashPayload::from_frame(&vh.to_frame()), Some(vh));
        assert_eq!(NetworkInit::from_frame(&vh.to_frame()), None);
    }
}
