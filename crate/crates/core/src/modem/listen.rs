//! Verification listen window.
//!
//! Besides matching decoded frames against the expected payload, the window
//! subtracts every decoded frame (re-synthesized, aligned and gain-fitted)
//! and looks at what is left. Residual energy that is concentrated on the
//! modem's tones means some other transmission was on the air, even if it
//! overlapped the legitimate frame so badly that neither decodes cleanly.
//! White noise puts about `2 * tone_count / L` of its energy on the tones
//! (0.19 for the default profile) and never trips the check.

use serde::{Deserialize, Serialize};

use super::codec::{Detection, Modem};
use super::frame::{OobFrame, VerifyHashPayload};

/// Residual tone-energy fraction above which a window counts as a foreign
/// transmission.
pub const TONAL_THRESHOLD: f64 = 0.5;
/// Residual mean-square level below which a window is ignored.
pub const RESIDUAL_FLOOR: f64 = 1e-6;
/// Alignment search radius, in samples, when subtracting a decoded frame.
const ALIGN_RADIUS: isize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ListenVerdict {
    /// Exactly the expected frame, nothing else.
    Match,
    /// A lone verification frame for this session carrying another digest.
    Mismatch,
    /// Any other frame, a corrupt frame, a repeated frame, or unexplained
    /// tonal energy.
    ForeignFrame,
    /// Silence or noise only.
    Nothing,
}

fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(x, y)| *x as f64 * *y as f64).sum()
}

/// Subtracts a decoded frame from `residual` at its best alignment.
fn subtract(modem: &Modem, residual: &mut [f32], det: &Detection, frame: &OobFrame) {
    let Ok(template) = modem.encode(frame) else {
        return;
    };
    let mut best = (0isize, f64::MIN);
    for d in -ALIGN_RADIUS..=ALIGN_RADIUS {
        let start = det.offset as isize + d;
        if start < 0 {
            continue;
        }
        let start = start as usize;
        let end = (start + template.len()).min(residual.len());
        if start >= end {
            continue;
        }
        let c = dot(&residual[start..end], &template[..end - start]);
        if c > best.1 {
            best = (d, c);
        }
    }
    let start = (det.offset as isize + best.0).max(0) as usize;
    let end = (start + template.len()).min(residual.len());
    let t = &template[..end - start];
    let norm = dot(t, t);
    if norm <= 0.0 {
        return;
    }
    let gain = (dot(&residual[start..end], t) / norm) as f32;
    for (r, x) in residual[start..end].iter_mut().zip(t) {
        *r -= gain * x;
    }
}

/// True when some window of `residual` carries tone-concentrated energy.
pub fn has_tonal_residual(modem: &Modem, residual: &[f32]) -> bool {
    let l = modem.profile().symbol_len;
    if residual.len() < l {
        return false;
    }
    let hop = l / 2;
    let tables = modem.tables();
    let mut powers = vec![0f32; modem.profile().tone_count];
    let floor = RESIDUAL_FLOOR * l as f64;
    let mut start = 0;
    loop {
        let w = &residual[start..start + l];
        let energy = dot(w, w);
        if energy > floor {
            tables.all_powers(w, &mut powers);
            let tonal: f64 = powers.iter().map(|&p| p as f64).sum();
            if tonal / (energy * l as f64 / 2.0) > TONAL_THRESHOLD {
                return true;
            }
        }
        if start + l == residual.len() {
            break;
        }
        start = (start + hop).min(residual.len() - l);
    }
    false
}

pub fn listen_window(
    modem: &Modem,
    samples: &[f32],
    expected: &VerifyHashPayload,
) -> ListenVerdict {
    let detections = modem.scan(samples);
    let mut residual = samples.to_vec();
    let mut matches = 0usize;
    let mut mismatch = false;
    let mut foreign = false;
    for det in &detections {
        match &det.frame {
            None => foreign = true,
            Some(frame) => {
                subtract(modem, &mut residual, det, frame);
                match VerifyHashPayload::from_frame(frame) {
                    Some(p) if p == *expected => matches += 1,
                    Some(p) if p.session_id == expected.session_id => mismatch = true,
                    _ => foreign = true,
                }
            }
        }
    }
    if foreign || matches + mismatch as usize > 1 {
        return ListenVerdict::ForeignFrame;
    }
    if has_tonal_residual(modem, &residual) {
        return ListenVerdict::ForeignFrame;
    }
    match (matches, mismatch) {
        (1, false) => ListenVerdict::Match,
        (0, true) => ListenVerdict::Mismatch,
        _ => ListenVerdict::Nothing,
    }
}
