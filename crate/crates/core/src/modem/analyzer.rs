//! Tone synthesis and per-tone spectral analysis for one profile.

use std::f64::consts::PI;

use super::profile::{ModemProfile, TONES_PER_BANK};

/// Power of `freq` over `samples` via the Goertzel recurrence, scaled like
/// `|X(f)|^2` of a plain DFT (rectangular window).
pub fn goertzel_power(samples: &[f32], freq: f64, sample_rate: f64) -> f64 {
    let omega = 2.0 * PI * freq / sample_rate;
    let coeff = 2.0 * omega.cos();
    let (mut s1, mut s2) = (0.0f64, 0.0f64);
    for &x in samples {
        let s0 = x as f64 + coeff * s1 - s2;
        s2 = s1;
        s1 = s0;
    }
    // |X|^2 of the DFT evaluated at omega, independent of the final phase.
    let re = s1 - s2 * omega.cos();
    let im = s2 * omega.sin();
    re * re + im * im
}

/// Precomputed sine/cosine tables for every tone over one symbol.
#[derive(Debug, Clone)]
pub struct ToneTables {
    symbol_len: usize,
    tone_count: usize,
    /// `tone_count * symbol_len`, row-major by tone.
    cos: Vec<f32>,
    sin: Vec<f32>,
    ramp: Vec<f32>,
}

/// Raised-cosine taper applied to both ends of every synthesized symbol.
pub const RAMP_LEN: usize = 64;

impl ToneTables {
    pub fn new(profile: &ModemProfile) -> Self {
        let l = profile.symbol_len;
        let fs = profile.sample_rate as f64;
        let mut cos = Vec::with_capacity(profile.tone_count * l);
        let mut sin = Vec::with_capacity(profile.tone_count * l);
        for k in 0..profile.tone_count {
            let f = profile.base_freq + k as f64 * profile.tone_spacing;
            let w = 2.0 * PI * f / fs;
            for n in 0..l {
                let phase = w * n as f64;
                cos.push(phase.cos() as f32);
                sin.push(phase.sin() as f32);
            }
        }
        let ramp_len = RAMP_LEN.min(l / 4);
        let ramp = (0..l)
            .map(|n| {
                let edge = n.min(l - 1 - n);
                if edge < ramp_len {
                    let x = (edge as f64 + 0.5) / ramp_len as f64;
                    (0.5 - 0.5 * (PI * x).cos()) as f32
                } else {
                    1.0
                }
            })
            .collect();
        Self {
            symbol_len: l,
            tone_count: profile.tone_count,
            cos,
            sin,
            ramp,
        }
    }

    pub fn symbol_len(&self) -> usize {
        self.symbol_len
    }

    /// Adds one symbol carrying `tones` (absolute indices) at `amplitude` each
    /// into `out[..symbol_len]`.
    pub fn synthesize(&self, tones: &[usize], amplitude: f32, out: &mut [f32]) {
        let l = self.symbol_len;
        for &k in tones {
            let row = &self.sin[k * l..(k + 1) * l];
            for ((o, s), r) in out[..l].iter_mut().zip(row).zip(&self.ramp) {
                *o += amplitude * s * r;
            }
        }
    }

    /// `|X_k|^2` of one tone over a full symbol window.
    pub fn tone_power(&self, k: usize, window: &[f32]) -> f32 {
        let l = self.symbol_len;
        let c = &self.cos[k * l..(k + 1) * l];
        let s = &self.sin[k * l..(k + 1) * l];
        // Independent lanes let the compiler vectorize the two dot products.
        const LANES: usize = 8;
        let (mut re, mut im) = ([0f32; LANES], [0f32; LANES]);
        let w = &window[..l];
        for ((x, cv), sv) in w
            .chunks_exact(LANES)
            .zip(c.chunks_exact(LANES))
            .zip(s.chunks_exact(LANES))
        {
            for i in 0..LANES {
                re[i] += x[i] * cv[i];
                im[i] += x[i] * sv[i];
            }
        }
        let tail = l - l % LANES;
        let (mut re, mut im) = (re.iter().sum::<f32>(), im.iter().sum::<f32>());
        for n in tail..l {
            re += w[n] * c[n];
            im += w[n] * s[n];
        }
        re * re + im * im
    }

    /// Powers of all tones over one symbol window.
    pub fn all_powers(&self, window: &[f32], out: &mut [f32]) {
        for (k, o) in out.iter_mut().enumerate().take(self.tone_count) {
            *o = self.tone_power(k, window);
        }
    }

    /// Strongest tone of each bank, as nibbles.
    pub fn demodulate(&self, window: &[f32], banks: usize, nibbles: &mut [u8]) {
        let mut powers = [0f32; TONES_PER_BANK];
        for (b, nib) in nibbles.iter_mut().enumerate().take(banks) {
            for (v, p) in powers.iter_mut().enumerate() {
                *p = self.tone_power(b * TONES_PER_BANK + v, window);
            }
            let mut best = 0;
            for v in 1..TONES_PER_BANK {
                if powers[v] > powers[best] {
                    best = v;
                }
            }
            *nib = best as u8;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tone_power_agrees_with_goertzel() {
        let p = ModemProfile::default();
        let t = ToneTables::new(&p);
        let window: Vec<f32> = (0..p.symbol_len)
            .map(|n| ((n * 7919) % 101) as f32 / 50.0 - 1.0)
            .collect();
        for k in [0, 17, 50, 95] {
            let f = p.tone_frequency(k).unwrap();
            let g = goertzel_power(&window, f, p.sample_rate as f64);
            let d = t.tone_power(k, &window) as f64;
            assert!((g - d).abs() <= 1e-3 * g.max(1.0), "k={k} g={g} d={d}");
        }
    }

    #[test]
    fn pure_tone_lands_in_its_bin() {
        let p = ModemProfile::default();
        let t = ToneTables::new(&p);
        let mut buf = vec![0f32; p.symbol_len];
        t.synthesize(
            &[3, 16 + 9, 32, 48 + 15, 64 + 1, 80 + 7],
            1.0 / 6.0,
            &mut buf,
        );
        let mut nib = [0u8; 6];
        t.demodulate(&buf, 6, &mut nib);
        assert_eq!(nib, [3, 9, 0, 15, 1, 7]);
    }
}
