//! Browser bindings. Each export returns plain numbers, byte arrays or JSON
//! text so the same functions run (and are tested) natively.

use pairsonic::modem::{default_modem, FrameKind, OobFrame};
use pairsonic::report::scaling_report;
use pairsonic::sim::{preset, preset_names, run_session_with, NoiseModel, SimConfig, UserScript};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// One encoded frame plus what a receiver makes of it.
#[wasm_bindgen]
pub struct EncodedFrame {
    samples: Vec<f32>,
    spectrogram: Vec<f32>,
    symbols: usize,
    decoded: Option<String>,
}

#[wasm_bindgen]
impl EncodedFrame {
    /// PCM at 48 kHz, ready for an AudioBuffer.
    pub fn samples(&self) -> Vec<f32> {
        self.samples.clone()
    }

    /// `symbols x tone_count` tone powers, row-major, normalised to [0, 1].
    pub fn spectrogram(&self) -> Vec<f32> {
        self.spectrogram.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn symbols(&self) -> usize {
        self.symbols
    }

    #[wasm_bindgen(getter)]
    pub fn tone_count(&self) -> usize {
        default_modem().profile().tone_count
    }

    #[wasm_bindgen(getter)]
    pub fn sample_rate(&self) -> u32 {
        default_modem().profile().sample_rate
    }

    /// Payload hex recovered by the decoder, if any.
    #[wasm_bindgen(getter)]
    pub fn decoded(&self) -> Option<String> {
        self.decoded.clone()
    }
}

#[wasm_bindgen]
pub fn encode_frame(kind: &str, payload_hex: &str) -> Result<EncodedFrame, String> {
    let kind = match kind {
        "verify-hash" => FrameKind::VerifyHash,
        "network-init" => FrameKind::NetworkInit,
        other => return Err(format!("unknown frame kind `{other}`")),
    };
    let cleaned: String = payload_hex.chars().filter(|c| !c.is_whitespace()).collect();
    let payload = hex::decode(cleaned).map_err(|e| format!("payload: {e}"))?;
    let frame = OobFrame::new(kind, payload).map_err(|e| e.to_string())?;
    let modem = default_modem();
    let samples = modem.encode(&frame).map_err(|e| e.to_string())?;

    let l = modem.profile().symbol_len;
    let tones = modem.profile().tone_count;
    let mut spectrogram = Vec::with_capacity(samples.len() / l * tones);
    let mut row = vec![0f32; tones];
    for window in samples.chunks_exact(l) {
        modem.tables().all_powers(window, &mut row);
        spectrogram.extend_from_slice(&row);
    }
    let peak = spectrogram
        .iter()
        .copied()
        .fold(0f32, f32::max)
        .max(f32::MIN_POSITIVE);
    spectrogram.iter_mut().for_each(|p| *p /= peak);

    let decoded = modem.decode_at(&samples, 0).map(|f| hex::encode(f.payload));
    Ok(EncodedFrame {
        symbols: samples.len() / l,
        samples,
        spectrogram,
        decoded,
    })
}

#[wasm_bindgen]
pub fn attack_names() -> Vec<String> {
    preset_names().into_iter().map(String::from).collect()
}

#[derive(Serialize)]
struct Member {
    endpoint: usize,
    role: String,
    verdict: String,
    contacts: Vec<String>,
    flags: Vec<&'static str>,
    false_accept: bool,
}

#[derive(Serialize)]
struct Event {
    tick: u64,
    endpoint: usize,
    honest: bool,
    direction: String,
    channel: String,
    kind: String,
    phase: String,
}

#[derive(Serialize)]
struct SessionView {
    n: usize,
    attack: String,
    ticks: u64,
    seconds: f64,
    all_imported: bool,
    members: Vec<Member>,
    events: Vec<Event>,
}

/// Runs one simulated exchange; returns JSON.
#[wasm_bindgen]
pub fn run_session(
    n: usize,
    attack: &str,
    users: &str,
    noise: &str,
    seed: u64,
) -> Result<String, String> {
    let policy = preset(attack).ok_or_else(|| format!("unknown attack `{attack}`"))?;
    let users = UserScript::parse(users).ok_or_else(|| format!("unknown user script `{users}`"))?;
    let noise = NoiseModel::parse(noise).ok_or_else(|| format!("unknown noise model `{noise}`"))?;
    let cfg = SimConfig {
        noise,
        ..Default::default()
    };
    let r = run_session_with(n, &policy, users, seed, &cfg).map_err(|e| e.to_string())?;
    let view = SessionView {
        n,
        attack: r.policy.clone(),
        ticks: r.ticks,
        seconds: r.seconds(),
        all_imported: r.all_imported(),
        members: r
            .results
            .iter()
            .map(|p| {
                let mut flags = Vec::new();
                if p.outcome.flags.duplicate_id {
                    flags.push("duplicate id");
                }
                if p.outcome.flags.duplicate_name {
                    flags.push("duplicate name");
                }
                Member {
                    endpoint: p.endpoint,
                    role: format!("{:?}", p.role),
                    verdict: format!("{:?}", p.outcome.verdict),
                    contacts: p.outcome.contacts.iter().map(|c| c.name.clone()).collect(),
                    flags,
                    false_accept: p.false_accept,
                }
            })
            .collect(),
        events: r
            .transcript
            .records
            .iter()
            .map(|t| Event {
                tick: t.tick,
                endpoint: t.endpoint,
                honest: t.honest,
                direction: format!("{:?}", t.direction).to_lowercase(),
                channel: format!("{:?}", t.channel).to_lowercase(),
                kind: t.kind.clone(),
                phase: format!("{:?}", t.phase_after),
            })
            .collect(),
    };
    serde_json::to_string(&view).map_err(|e| e.to_string())
}

/// Manual-effort table as JSON rows.
#[wasm_bindgen]
pub fn scaling_table(max_n: usize) -> Result<String, String> {
    let rows = scaling_report(max_n).map_err(|e| e.to_string())?;
    serde_json::to_string(&rows).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encoded_frame_decodes_and_fills_the_spectrogram() {
        let f = encode_frame("verify-hash", "00 11 22 33").unwrap();
        assert_eq!(f.decoded().as_deref(), Some("00112233"));
        assert_eq!(f.spectrogram().len(), f.symbols() * f.tone_count());
        assert_eq!(f.samples().len(), f.symbols() * 1024);
        assert!(f.spectrogram().iter().all(|p| (0.0..=1.0).contains(p)));
        assert!(encode_frame("chirp", "").is_err());
        assert!(encode_frame("network-init", "xyz").is_err());
        assert!(encode_frame("network-init", &"00".repeat(65)).is_err());
    }

    #[test]
    fn session_json_reports_members_and_events() {
        let json = run_session(3, "none", "confirm-all", "clean", 2).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["all_imported"], true);
        assert_eq!(v["members"].as_array().unwrap().len(), 3);
        assert!(v["events"].as_array().unwrap().len() > 10);
        let attacked: serde_json::Value =
            serde_json::from_str(&run_session(3, "oob_inject", "confirm-all", "clean", 2).unwrap())
                .unwrap();
        assert_eq!(attacked["all_imported"], false);
        assert!(run_session(1, "none", "confirm-all", "clean", 0).is_err());
        assert!(run_session(3, "nope", "confirm-all", "clean", 0).is_err());
    }

    #[test]
    fn scaling_rows_as_json() {
        let v: serde_json::Value = serde_json::from_str(&scaling_table(7).unwrap()).unwrap();
        assert_eq!(v.as_array().unwrap().len(), 6);
        assert_eq!(v[5]["pairwise"], 21);
        assert_eq!(attack_names().len(), 7);
    }
}
