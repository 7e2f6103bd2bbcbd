//! Frame <-> PCM conversion.
//!
//! ```text
//! | A | B | A | B | data symbols ... | E |
//! ```
//!
//! `A`, `B` and `E` are fixed nibble patterns (one tone per bank). Each data
//! symbol carries three codeword bytes as six nibbles; nibble `j` selects tone
//! `16 j + nibble`. The codeword is the frame bytes followed by Reed-Solomon
//! parity, zero-padded to a whole number of symbols.

use serde::{Deserialize, Serialize};

use super::analyzer::{ToneTables, RAMP_LEN};
use super::frame::{OobFrame, FRAME_OVERHEAD, MAX_PAYLOAD};
use super::profile::{ModemProfile, TONES_PER_BANK};
use super::rs;
use super::sync::PreambleScanner;
use super::ModemError;

pub const PREAMBLE_SYMBOLS: usize = 4;
pub const END_SYMBOLS: usize = 1;

/// Nibble of pattern `A` in even banks; odd banks use `PATTERN_HIGH`.
pub(crate) const PATTERN_LOW: u8 = 0x3;
pub(crate) const PATTERN_HIGH: u8 = 0xc;

pub(crate) fn pattern_nibble(pattern: Pattern, bank: usize) -> u8 {
    let even = bank.is_multiple_of(2);
    match (pattern, even) {
        (Pattern::A, true) | (Pattern::B, false) => PATTERN_LOW,
        (Pattern::A, false) | (Pattern::B, true) => PATTERN_HIGH,
        (Pattern::End, true) => 0x0,
        (Pattern::End, false) => 0xf,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Pattern {
    A,
    B,
    End,
}

pub(crate) const PREAMBLE: [Pattern; PREAMBLE_SYMBOLS] =
    [Pattern::A, Pattern::B, Pattern::A, Pattern::B];

/// Result of trying to pull a frame out of a buffer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecodeOutcome {
    Frame(OobFrame),
    /// No preamble anywhere in the buffer.
    NoFrame,
    /// A preamble was found but no codeword survived error correction and CRC.
    Corrupt,
}

/// One preamble hit and what was recovered behind it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Detection {
    pub offset: usize,
    /// Samples from the preamble start to the end marker (inclusive) when a
    /// frame decoded; the preamble length otherwise.
    pub span: usize,
    pub frame: Option<OobFrame>,
}

/// Encoder/decoder bound to one profile, with tone tables precomputed.
#[derive(Debug, Clone)]
pub struct Modem {
    profile: ModemProfile,
    tables: ToneTables,
    scanner: PreambleScanner,
    /// Synthesized preamble, used to pin a detection to the exact sample.
    preamble: Vec<f32>,
}

pub fn codeword_len(payload_len: usize, parity: usize) -> usize {
    payload_len + FRAME_OVERHEAD + parity
}

pub fn data_symbols_for(payload_len: usize, profile: &ModemProfile) -> usize {
    codeword_len(payload_len, profile.ecc_parity_bytes).div_ceil(profile.bytes_per_symbol())
}

/// Exact buffer length [`Modem::encode`] produces for a payload length.
pub fn encoded_len(payload_len: usize, profile: &ModemProfile) -> usize {
    (PREAMBLE_SYMBOLS + data_symbols_for(payload_len, profile) + END_SYMBOLS)
        * profile.symbol_stride()
}

impl Modem {
    pub fn new(profile: ModemProfile) -> Result<Self, ModemError> {
        profile.validate()?;
        let tables = ToneTables::new(&profile);
        let scanner = PreambleScanner::new(&profile);
        let mut m = Self {
            profile,
            tables,
            scanner,
            preamble: Vec::new(),
        };
        let stride = m.profile.symbol_stride();
        let mut preamble = vec![0f32; PREAMBLE_SYMBOLS * stride];
        for (i, &p) in PREAMBLE.iter().enumerate() {
            m.tables.synthesize(
                &m.pattern_tones(p),
                m.amplitude(),
                &mut preamble[i * stride..],
            );
        }
        m.preamble = preamble;
        Ok(m)
    }

    pub fn profile(&self) -> &ModemProfile {
        &self.profile
    }

    pub fn tables(&self) -> &ToneTables {
        &self.tables
    }

    fn amplitude(&self) -> f32 {
        1.0 / self.profile.tones_per_symbol as f32
    }

    fn pattern_tones(&self, pattern: Pattern) -> Vec<usize> {
        (0..self.profile.tones_per_symbol)
            .map(|b| b * TONES_PER_BANK + pattern_nibble(pattern, b) as usize)
            .collect()
    }

    pub fn codeword(&self, frame: &OobFrame) -> Result<Vec<u8>, ModemError> {
        if frame.payload.len() > MAX_PAYLOAD {
            return Err(ModemError::PayloadTooLong(frame.payload.len()));
        }
        let mut cw = frame.to_bytes();
        let parity = rs::encode(&cw, self.profile.ecc_parity_bytes)?;
        cw.extend_from_slice(&parity);
        Ok(cw)
    }

    pub fn encode(&self, frame: &OobFrame) -> Result<Vec<f32>, ModemError> {
        let cw = self.codeword(frame)?;
        let bps = self.profile.bytes_per_symbol();
        let stride = self.profile.symbol_stride();
        let data_syms = cw.len().div_ceil(bps);
        let total = PREAMBLE_SYMBOLS + data_syms + END_SYMBOLS;
        let mut out = vec![0f32; total * stride];
        let amp = self.amplitude();
        out[..self.preamble.len()].copy_from_slice(&self.preamble);
        let mut padded = cw;
        padded.resize(data_syms * bps, 0);
        for (s, chunk) in padded.chunks(bps).enumerate() {
            let tones: Vec<usize> = chunk
                .iter()
                .flat_map(|&byte| [byte >> 4, byte & 0x0f])
                .enumerate()
                .map(|(bank, nib)| bank * TONES_PER_BANK + nib as usize)
                .collect();
            let at = (PREAMBLE_SYMBOLS + s) * stride;
            self.tables.synthesize(&tones, amp, &mut out[at..]);
        }
        let at = (PREAMBLE_SYMBOLS + data_syms) * stride;
        self.tables
            .synthesize(&self.pattern_tones(Pattern::End), amp, &mut out[at..]);
        Ok(out)
    }

    /// Demodulates consecutive data symbols starting at `start` into bytes.
    fn read_bytes(&self, samples: &[f32], start: usize, max_symbols: usize) -> Vec<u8> {
        let stride = self.profile.symbol_stride();
        let l = self.profile.symbol_len;
        let banks = self.profile.tones_per_symbol;
        let mut nibbles = vec![0u8; banks];
        let mut bytes = Vec::with_capacity(max_symbols * banks / 2);
        for s in 0..max_symbols {
            let at = start + s * stride;
            if at + l > samples.len() {
                break;
            }
            self.tables
                .demodulate(&samples[at..at + l], banks, &mut nibbles);
            bytes.extend(nibbles.chunks(2).map(|p| (p[0] << 4) | p[1]));
        }
        bytes
    }

    fn try_payload_len(&self, raw: &[u8], payload_len: usize) -> Option<OobFrame> {
        let c = codeword_len(payload_len, self.profile.ecc_parity_bytes);
        if raw.len() < c {
            return None;
        }
        let mut cw = raw[..c].to_vec();
        rs::correct(&mut cw, self.profile.ecc_parity_bytes).ok()?;
        let body = &cw[..c - self.profile.ecc_parity_bytes];
        if body[1] as usize != payload_len {
            return None;
        }
        OobFrame::from_bytes(body).ok()
    }

    /// Decodes the frame whose preamble starts at `offset`.
    pub fn decode_at(&self, samples: &[f32], offset: usize) -> Option<OobFrame> {
        let stride = self.profile.symbol_stride();
        let max_syms = data_symbols_for(MAX_PAYLOAD, &self.profile);
        let raw = self.read_bytes(samples, offset + PREAMBLE_SYMBOLS * stride, max_syms);
        if raw.len() < 2 {
            return None;
        }
        let hinted = raw[1] as usize;
        if hinted <= MAX_PAYLOAD {
            if let Some(f) = self.try_payload_len(&raw, hinted) {
                return Some(f);
            }
        }
        // Length byte may itself be damaged; let the code decide.
        (0..=MAX_PAYLOAD)
            .filter(|&len| len != hinted)
            .find_map(|len| self.try_payload_len(&raw, len))
    }

    /// The energy score is flat while the window only loses ramp samples;
    /// cross-correlation with the known preamble is sharp to the sample.
    fn refine(&self, samples: &[f32], coarse: usize) -> usize {
        let radius = RAMP_LEN;
        let lo = coarse.saturating_sub(radius);
        let hi = (coarse + radius).min(samples.len().saturating_sub(self.preamble.len()));
        let mut best = (coarse, f64::MIN);
        for o in lo..=hi.max(lo) {
            let end = (o + self.preamble.len()).min(samples.len());
            let c: f64 = samples[o..end]
                .iter()
                .zip(&self.preamble)
                .map(|(a, b)| *a as f64 * *b as f64)
                .sum();
            if c > best.1 {
                best = (o, c);
            }
        }
        best.0
    }

    /// Finds every preamble in the buffer and decodes behind each one.
    pub fn scan(&self, samples: &[f32]) -> Vec<Detection> {
        let stride = self.profile.symbol_stride();
        let preamble_span = PREAMBLE_SYMBOLS * stride;
        let scores = self.scanner.scores(samples);
        let mut out = Vec::new();
        let mut o = 0;
        while o < scores.len() {
            if scores[o] < super::sync::DETECT_THRESHOLD {
                o += 1;
                continue;
            }
            let end = (o + stride).min(scores.len());
            let mut best = o;
            for i in o..end {
                if scores[i] > scores[best] {
                    best = i;
                }
            }
            let best = self.refine(samples, best);
            match self.decode_at(samples, best) {
                Some(frame) => {
                    let span = encoded_len(frame.payload.len(), &self.profile);
                    out.push(Detection {
                        offset: best,
                        span,
                        frame: Some(frame),
                    });
                    o = best + span;
                }
                None => {
                    out.push(Detection {
                        offset: best,
                        span: preamble_span,
                        frame: None,
                    });
                    o = best + preamble_span;
                }
            }
        }
        out
    }

    /// First frame in the buffer.
    pub fn decode(&self, samples: &[f32]) -> DecodeOutcome {
        match self.scan(samples).into_iter().next() {
            None => DecodeOutcome::NoFrame,
            Some(Detection { frame: Some(f), .. }) => DecodeOutcome::Frame(f),
            Some(_) => DecodeOutcome::Corrupt,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modem::frame::FrameKind;

    fn modem() -> Modem {
        Modem::new(ModemProfile::default()).unwrap()
    }

    #[test]
    fn empty_payload_round_trips() {
        let m = modem();
        let f = OobFrame::new(FrameKind::NetworkInit, vec![]).unwrap();
        let pcm = m.encode(&f).unwrap();
        // 14-byte codeword: 5 data symbols.
        assert_eq!(pcm.len(), (4 + 5 + 1) * 1024);
        assert_eq!(m.decode(&pcm), DecodeOutcome::Frame(f));
    }

    #[test]
    fn verify_hash_frame_length_matches_symbol_count() {
        let m = modem();
        let f = OobFrame::new(FrameKind::VerifyHash, vec![0x42; 32]).unwrap();
        let pcm = m.encode(&f).unwrap();
        // Oracle: header 2 + payload 32 + crc 4 + parity 8 = 46 bytes, 3 per
        // symbol -> 16 data symbols; plus 4 preamble and 1 end marker.
        let header_payload_crc_parity: usize = 2 + 32 + 4 + 8;
        let data = header_payload_crc_parity.div_ceil(3);
        assert_eq!(data, 16);
        assert_eq!(pcm.len(), (4 + data + 1) * 1024);
        assert_eq!(encoded_len(32, m.profile()), pcm.len());
    }

    #[test]
    fn silence_has_no_frame() {
        let m = modem();
        assert_eq!(m.decode(&vec![0.0; 48_000]), DecodeOutcome::NoFrame);
        assert_eq!(m.decode(&[]), DecodeOutcome::NoFrame);
    }

    #[test]
    fn decodes_at_arbitrary_offset_with_leading_silence() {
        let m = modem();
        let f = OobFrame::new(FrameKind::VerifyHash, (0..32).collect()).unwrap();
        let pcm = m.encode(&f).unwrap();
        for lead in [1usize, 333, 1024, 5000] {
            let mut buf = vec![0.0; lead];
            buf.extend_from_slice(&pcm);
            buf.extend(std::iter::repeat_n(0.0, 777));
            let hits = m.scan(&buf);
            assert_eq!(hits.len(), 1, "lead {lead}");
            assert_eq!(hits[0].offset, lead);
            assert_eq!(hits[0].frame.as_ref(), Some(&f));
        }
    }

    #[test]
    fn truncated_frame_is_corrupt() {
        let m = modem();
        let f = OobFrame::new(FrameKind::VerifyHash, vec![9; 32]).unwrap();
        let pcm = m.encode(&f).unwrap();
        assert_eq!(m.decode(&pcm[..8 * 1024]), DecodeOutcome::Corrupt);
    }

    #[test]
    fn peak_is_bounded_and_encoding_is_pure() {
        let m = modem();
        let f = OobFrame::new(FrameKind::NetworkInit, vec![0xff; 64]).unwrap();
        let a = m.encode(&f).unwrap();
        let b = m.encode(&f).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|x| x.abs() <= 1.0));
    }

    #[test]
    fn two_sequential_frames_are_both_found() {
        let m = modem();
        let f1 = OobFrame::new(FrameKind::NetworkInit, vec![1; 30]).unwrap();
        let f2 = OobFrame::new(FrameKind::VerifyHash, vec![2; 32]).unwrap();
        let mut buf = m.encode(&f1).unwrap();
        buf.extend(vec![0.0; 2048]);
        buf.extend(m.encode(&f2).unwrap());
        let frames: Vec<_> = m.scan(&buf).into_iter().filter_map(|d| d.frame).collect();
        assert_eq!(frames, vec![f1, f2]);
    }
}
