//! Software-defined acoustic physical layer.
//!
//! 96 tones from 1875 Hz in steps of 46.875 Hz, split into six banks of
//! sixteen; every symbol plays one tone per bank and so carries three bytes.
//! Frames are `kind | len | payload | crc32 (BE) | RS parity`.

mod analyzer;
mod codec;
mod frame;
mod listen;
mod profile;
pub mod rs;
mod spectrum;
mod sync;
pub mod wav;

use std::sync::OnceLock;

pub use analyzer::{goertzel_power, ToneTables};
pub use codec::{encoded_len, DecodeOutcome, Detection, Modem, END_SYMBOLS, PREAMBLE_SYMBOLS};
pub use frame::{FrameKind, NetworkInit, OobFrame, VerifyHashPayload, FRAME_OVERHEAD, MAX_PAYLOAD};
pub use listen::{has_tonal_residual, listen_window, ListenVerdict};
pub use profile::{ModemProfile, TONES_PER_BANK};
pub use spectrum::band_energy_fraction;
pub use sync::DETECT_THRESHOLD;

#[derive(Debug, thiserror::Error)]
pub enum ModemError {
    #[error("invalid modem profile: {0}")]
    BadProfile(&'static str),
    #[error("tone index {0} out of range")]
    ToneOutOfRange(usize),
    #[error("payload of {0} bytes exceeds the 64-byte limit")]
    PayloadTooLong(usize),
    #[error("malformed frame: {0}")]
    BadFrame(&'static str),
    #[error("reed-solomon: {0}")]
    Rs(#[from] rs::RsError),
    #[error("audio format: {0}")]
    Format(String),
    #[error(transparent)]
    Wav(#[from] hound::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn cached(profile: &ModemProfile) -> Result<std::borrow::Cow<'static, Modem>, ModemError> {
    static DEFAULT: OnceLock<Modem> = OnceLock::new();
    if *profile == ModemProfile::default() {
        Ok(std::borrow::Cow::Borrowed(DEFAULT.get_or_init(|| {
            Modem::new(ModemProfile::default()).expect("default profile is valid")
        })))
    } else {
        Ok(std::borrow::Cow::Owned(Modem::new(profile.clone())?))
    }
}

pub fn tone_frequency(profile: &ModemProfile, index: usize) -> Result<f64, ModemError> {
    profile.tone_frequency(index)
}

pub fn encode(profile: &ModemProfile, frame: &OobFrame) -> Result<Vec<f32>, ModemError> {
    cached(profile)?.encode(frame)
}

pub fn decode(profile: &ModemProfile, samples: &[f32]) -> Result<DecodeOutcome, ModemError> {
    Ok(cached(profile)?.decode(samples))
}

/// Shared modem for the default profile.
pub fn default_modem() -> &'static Modem {
    match cached(&ModemProfile::default()) {
        Ok(std::borrow::Cow::Borrowed(m)) => m,
        _ => unreachable!("default profile is always cached"),
    }
}
