//! Whole-buffer spectrum checks.

use rustfft::{num_complex::Complex, FftPlanner};

/// Fraction of the buffer's energy (one-sided FFT, no window) that falls in
/// `[lo, hi]` Hz.
pub fn band_energy_fraction(samples: &[f32], sample_rate: u32, lo: f64, hi: f64) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let n = samples.len();
    let mut buf: Vec<Complex<f64>> = samples
        .iter()
        .map(|&x| Complex::new(x as f64, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let bin_hz = sample_rate as f64 / n as f64;
    let (mut inside, mut total) = (0.0, 0.0);
    for (k, c) in buf.iter().enumerate().take(n / 2 + 1) {
        let e = c.norm_sqr();
        total += e;
        let f = k as f64 * bin_hz;
        if f >= lo && f <= hi {
            inside += e;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        inside / total
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_tone_is_inside_its_band() {
        let fs = 48_000;
        let s: Vec<f32> = (0..4800)
            .map(|i| (2.0 * std::f64::consts::PI * 3000.0 * i as f64 / fs as f64).sin() as f32)
            .collect();
        assert!(band_energy_fraction(&s, fs, 2900.0, 3100.0) > 0.999);
        assert!(band_energy_fraction(&s, fs, 100.0, 1000.0) < 1e-6);
    }
}
