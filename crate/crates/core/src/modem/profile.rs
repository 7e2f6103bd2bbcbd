use serde::{Deserialize, Serialize};

use super::ModemError;

/// Tones per bank; one bank carries one nibble per symbol.
pub const TONES_PER_BANK: usize = 16;

/// Physical-layer parameters. The defaults give 96 tones from 1875 Hz in
/// steps of 46.875 Hz (band edge 6375 Hz), six banks of sixteen tones, three
/// bytes per symbol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModemProfile {
    pub sample_rate: u32,
    pub base_freq: f64,
    pub tone_spacing: f64,
    pub tone_count: usize,
    pub tones_per_symbol: usize,
    pub symbol_len: usize,
    pub guard_len: usize,
    pub ecc_parity_bytes: usize,
}

impl Default for ModemProfile {
    fn default() -> Self {
        Self {
            sample_rate: 48_000,
            base_freq: 1875.0,
            tone_spacing: 46.875,
            tone_count: 96,
            tones_per_symbol: 6,
            symbol_len: 1024,
            guard_len: 0,
            ecc_parity_bytes: 8,
        }
    }
}

impl ModemProfile {
    pub fn validate(&self) -> Result<(), ModemError> {
        if self.tones_per_symbol == 0 || !self.tones_per_symbol.is_multiple_of(2) {
            return Err(ModemError::BadProfile(
                "tones_per_symbol must be even and non-zero",
            ));
        }
        if self.tone_count != self.tones_per_symbol * TONES_PER_BANK {
            return Err(ModemError::BadProfile(
                "tone_count must equal 16 tones per bank",
            ));
        }
        if self.symbol_len < 64 {
            return Err(ModemError::BadProfile("symbol_len too short"));
        }
        if self.tone_spacing <= 0.0 || self.base_freq <= 0.0 {
            return Err(ModemError::BadProfile("frequencies must be positive"));
        }
        if self.band_edge() >= self.sample_rate as f64 / 2.0 {
            return Err(ModemError::BadProfile("tones exceed Nyquist"));
        }
        if self.ecc_parity_bytes == 0 || !self.ecc_parity_bytes.is_multiple_of(2) {
            return Err(ModemError::BadProfile(
                "ecc_parity_bytes must be even and non-zero",
            ));
        }
        Ok(())
    }

    pub fn tone_frequency(&self, index: usize) -> Result<f64, ModemError> {
        if index >= self.tone_count {
            return Err(ModemError::ToneOutOfRange(index));
        }
        Ok(self.base_freq + index as f64 * self.tone_spacing)
    }

    /// Upper edge of the band: one spacing above the highest tone.
    pub fn band_edge(&self) -> f64 {
        self.base_freq + self.tone_count as f64 * self.tone_spacing
    }

    pub fn bytes_per_symbol(&self) -> usize {
        self.tones_per_symbol / 2
    }

    /// Samples occupied by one symbol including its guard interval.
    pub fn symbol_stride(&self) -> usize {
        self.symbol_len + self.guard_len
    }

    pub fn symbol_duration_secs(&self) -> f64 {
        self.symbol_stride() as f64 / self.sample_rate as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_band_matches_published_range() {
        let p = ModemProfile::default();
        p.validate().unwrap();
        assert_eq!(p.tone_frequency(0).unwrap(), 1875.0);
        assert_eq!(p.tone_frequency(95).unwrap(), 6328.125);
        assert_eq!(p.band_edge(), 6375.0);
        assert_eq!((6375.0 - 1875.0) / 96.0, p.tone_spacing);
        assert!(matches!(
            p.tone_frequency(96),
            Err(ModemError::ToneOutOfRange(96))
        ));
    }

    #[test]
    fn bad_profiles_are_rejected() {
        let p = ModemProfile {
            sample_rate: 8000,
            ..Default::default()
        };
        assert!(p.validate().is_err());
        let p = ModemProfile {
            tone_count: 95,
            ..Default::default()
        };
        assert!(p.validate().is_err());
    }
}
