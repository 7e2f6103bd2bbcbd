//! Preamble search.
//!
//! For every candidate start sample the scanner measures, in each of the four
//! preamble windows, the fraction of window energy that sits in that window's
//! six pattern tones (1.0 for a clean pattern symbol, about `12 / L` for white
//! noise). The score is the minimum over the four windows, so a partial
//! preamble next to silence never qualifies. Window tone powers come from
//! running prefix sums of `x[m] e^{-j w m}`, which keeps the full search linear
//! in the buffer length.

use std::f64::consts::PI;

use super::codec::{pattern_nibble, Pattern, PREAMBLE, PREAMBLE_SYMBOLS};
use super::profile::{ModemProfile, TONES_PER_BANK};

/// Minimum per-window pattern energy fraction for a preamble hit.
pub const DETECT_THRESHOLD: f32 = 0.5;
/// Mean-square level below which a window counts as silence.
pub const SILENCE_LEVEL: f64 = 1e-8;

const RESYNC_EVERY: usize = 2048;

#[derive(Debug, Clone)]
pub struct PreambleScanner {
    symbol_len: usize,
    stride: usize,
    /// Angular frequency of each tone of pattern A, then pattern B.
    omegas: [Vec<f64>; 2],
}

impl PreambleScanner {
    pub fn new(profile: &ModemProfile) -> Self {
        let omega = |k: usize| {
            2.0 * PI * (profile.base_freq + k as f64 * profile.tone_spacing)
                / profile.sample_rate as f64
        };
        let tones = |p: Pattern| -> Vec<f64> {
            (0..profile.tones_per_symbol)
                .map(|b| omega(b * TONES_PER_BANK + pattern_nibble(p, b) as usize))
                .collect()
        };
        Self {
            symbol_len: profile.symbol_len,
            stride: profile.symbol_stride(),
            omegas: [tones(Pattern::A), tones(Pattern::B)],
        }
    }

    /// Sum over a pattern's tones of `|X_k|^2` for every window start.
    fn pattern_power(&self, samples: &[f32], omegas: &[f64]) -> Vec<f64> {
        let n = samples.len();
        let l = self.symbol_len;
        let windows = n + 1 - l;
        let mut acc = vec![0f64; windows];
        let mut prefix = vec![(0f64, 0f64); n + 1];
        for &w in omegas {
            let (step_im, step_re) = (-w).sin_cos();
            let (mut sr, mut si) = (0.0f64, 0.0f64);
            for (c, chunk) in samples.chunks(RESYNC_EVERY).enumerate() {
                let base = c * RESYNC_EVERY;
                let (mut ti, mut tr) = (-w * base as f64).sin_cos();
                for (j, &x) in chunk.iter().enumerate() {
                    let x = x as f64;
                    sr += x * tr;
                    si += x * ti;
                    prefix[base + j + 1] = (sr, si);
                    let nr = tr * step_re - ti * step_im;
                    ti = tr * step_im + ti * step_re;
                    tr = nr;
                }
            }
            for (o, a) in acc.iter_mut().enumerate() {
                let (ar, ai) = prefix[o];
                let (br, bi) = prefix[o + l];
                let (dr, di) = (br - ar, bi - ai);
                *a += dr * dr + di * di;
            }
        }
        acc
    }

    /// Preamble score for every start position that leaves room for the full
    /// preamble; empty when the buffer is shorter than one preamble.
    pub fn scores(&self, samples: &[f32]) -> Vec<f32> {
        let l = self.symbol_len;
        let span = (PREAMBLE_SYMBOLS - 1) * self.stride + l;
        if samples.len() < span {
            return Vec::new();
        }
        let mut energy = Vec::with_capacity(samples.len() + 1);
        energy.push(0f64);
        let mut e = 0f64;
        for &x in samples {
            e += (x as f64) * (x as f64);
            energy.push(e);
        }
        let powers = [
            self.pattern_power(samples, &self.omegas[0]),
            self.pattern_power(samples, &self.omegas[1]),
        ];
        let half = l as f64 / 2.0;
        let floor = SILENCE_LEVEL * l as f64;
        let ratio = |pattern: Pattern, o: usize| -> f64 {
            let en = energy[o + l] - energy[o];
            if en <= floor {
                return 0.0;
            }
            let idx = if pattern == Pattern::A { 0 } else { 1 };
            powers[idx][o] / (en * half)
        };
        (0..=samples.len() - span)
            .map(|o| {
                PREAMBLE
                    .iter()
                    .enumerate()
                    .map(|(s, &p)| ratio(p, o + s * self.stride))
                    .fold(f64::INFINITY, f64::min) as f32
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modem::codec::Modem;
    use crate::modem::frame::{FrameKind, OobFrame};

    #[test]
    fn score_peaks_at_true_offset() {
        let p = ModemProfile::default();
        let m = Modem::new(p.clone()).unwrap();
        let f = OobFrame::new(FrameKind::VerifyHash, vec![7; 32]).unwrap();
        let mut buf = vec![0.0; 2500];
        buf.extend(m.encode(&f).unwrap());
        let scores = PreambleScanner::new(&p).scores(&buf);
        let (best, &peak) = scores
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap();
        // Flat to within the edge ramp; the codec refines to the sample.
        assert!(
            best.abs_diff(2500) <= crate::modem::analyzer::RAMP_LEN,
            "best {best}"
        );
        // Edge ramps leak a little energy off-bin.
        assert!(peak > 0.85, "peak {peak}");
        // Two symbols early: half the windows are silent.
        assert_eq!(scores[2500 - 2 * 1024], 0.0);
    }

    #[test]
    fn short_buffers_have_no_scores() {
        let p = ModemProfile::default();
        assert!(PreambleScanner::new(&p).scores(&[0.1; 100]).is_empty());
    }
}
