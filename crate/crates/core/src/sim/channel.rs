//! Shared acoustic medium.
//!
//! Emissions are kept symbolically (frame, start sample, gain) and rendered on
//! demand into a listener's buffer, together with that listener's noise.
//! Noise is generated per tick-sized block from its own RNG stream, so any
//! two renderings of the same samples agree.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::modem::{default_modem, listen_window, ListenVerdict, OobFrame, VerifyHashPayload};

/// Samples per simulation tick (about 85 ms at 48 kHz).
pub const SAMPLES_PER_TICK: u64 = 4096;
/// Mean power of one data symbol: six tones at amplitude 1/6.
pub const SIGNAL_POWER: f64 = 1.0 / 12.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum NoiseModel {
    Clean,
    /// White Gaussian noise at the given SNR relative to symbol power.
    Awgn {
        snr_db: f64,
    },
    /// Decaying noise bursts: `rate` per second on average, peak `amplitude`.
    Impulsive {
        rate: f64,
        amplitude: f32,
    },
}

impl NoiseModel {
    /// `clean`, `awgn:<snr_db>` or `impulsive:<rate>:<amplitude>`.
    pub fn parse(s: &str) -> Option<Self> {
        let mut parts = s.trim().split(':');
        let m = match parts.next()? {
            "clean" => Self::Clean,
            "awgn" => Self::Awgn {
                snr_db: parts.next()?.parse().ok()?,
            },
            "impulsive" => Self::Impulsive {
                rate: parts.next()?.parse().ok().filter(|r: &f64| *r >= 0.0)?,
                amplitude: parts.next()?.parse().ok()?,
            },
            _ => return None,
        };
        parts.next().is_none().then_some(m)
    }

    pub fn label(&self) -> String {
        match self {
            Self::Clean => "clean".into(),
            Self::Awgn { snr_db } => format!("awgn:{snr_db}"),
            Self::Impulsive { rate, amplitude } => format!("impulsive:{rate}:{amplitude}"),
        }
    }

    /// Adds this model's noise for one block to `out`.
    fn add_block(&self, seed: u64, listener: usize, block: u64, out: &mut [f32]) {
        if *self == Self::Clean {
            return;
        }
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(((listener as u64) << 40) ^ block);
        match *self {
            Self::Clean => {}
            Self::Awgn { snr_db } => {
                let sigma = (SIGNAL_POWER / 10f64.powf(snr_db / 10.0)).sqrt();
                for s in out.iter_mut() {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    *s += (g * sigma) as f32;
                }
            }
            Self::Impulsive { rate, amplitude } => {
                let lambda = rate * out.len() as f64 / 48_000.0;
                let bursts = if lambda > 0.0 {
                    Poisson::new(lambda)
                        .map(|p| p.sample(&mut rng) as usize)
                        .unwrap_or(0)
                } else {
                    0
                };
                for _ in 0..bursts {
                    let at = rng.gen_range(0..out.len());
                    let len = rng.gen_range(64..512usize);
                    for (i, s) in out[at..].iter_mut().take(len).enumerate() {
                        let env = (-4.0 * i as f32 / len as f32).exp();
                        *s += amplitude * env * rng.gen_range(-1.0f32..1.0);
                    }
                }
            }
        }
    }
}

/// Who played a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Source {
    Endpoint(usize),
    Adversary,
}

#[derive(Debug, Clone)]
pub struct Emission {
    pub start: u64,
    pub frame: OobFrame,
    pub gain: f32,
    pub source: Source,
    samples: Arc<Vec<f32>>,
}

impl Emission {
    pub fn end(&self) -> u64 {
        self.start + self.samples.len() as u64
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct CacheKey {
    start: u64,
    len: u64,
    emissions: Vec<usize>,
    expected: Option<[u8; 32]>,
}

#[derive(Debug, Clone)]
enum Cached {
    Frames(Vec<OobFrame>),
    Verdict(ListenVerdict),
}

pub struct AcousticChannel {
    noise: NoiseModel,
    seed: u64,
    proximity: Vec<bool>,
    emissions: Vec<Emission>,
    cache: BTreeMap<CacheKey, Cached>,
    encoded: BTreeMap<Vec<u8>, Arc<Vec<f32>>>,
}

impl AcousticChannel {
    /// `proximity[i]` says whether endpoint `i` is within earshot of the group.
    pub fn new(noise: NoiseModel, seed: u64, proximity: Vec<bool>) -> Self {
        Self {
            noise,
            seed,
            proximity,
            emissions: Vec::new(),
            cache: BTreeMap::new(),
            encoded: BTreeMap::new(),
        }
    }

    fn near(&self, endpoint: usize) -> bool {
        self.proximity.get(endpoint).copied().unwrap_or(true)
    }

    pub fn emissions(&self) -> &[Emission] {
        &self.emissions
    }

    pub fn emit(&mut self, start: u64, frame: OobFrame, gain: f32, source: Source) -> &Emission {
        let bytes = frame.to_bytes();
        let samples = self
            .encoded
            .entry(bytes)
            .or_insert_with(|| Arc::new(default_modem().encode(&frame).expect("valid frame")))
            .clone();
        self.emissions.push(Emission {
            start,
            frame,
            gain,
            source,
            samples,
        });
        self.emissions.last().unwrap()
    }

    fn audible(&self, e: &Emission, listener: usize) -> bool {
        match e.source {
            Source::Endpoint(s) if s == listener => true,
            Source::Endpoint(s) => self.near(s) && self.near(listener),
            Source::Adversary => self.near(listener),
        }
    }

    fn overlapping(&self, listener: usize, start: u64, len: u64) -> Vec<usize> {
        self.emissions
            .iter()
            .enumerate()
            .filter(|(_, e)| e.start < start + len && e.end() > start && self.audible(e, listener))
            .map(|(i, _)| i)
            .collect()
    }

    /// What `listener` hears over `[start, start + len)`.
    pub fn render(&self, listener: usize, start: u64, len: u64) -> Vec<f32> {
        let mut out = vec![0f32; len as usize];
        for i in self.overlapping(listener, start, len) {
            let e = &self.emissions[i];
            let from = e.start.max(start);
            let to = e.end().min(start + len);
            let src = &e.samples[(from - e.start) as usize..(to - e.start) as usize];
            let dst = &mut out[(from - start) as usize..(to - start) as usize];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += e.gain * s;
            }
        }
        if self.noise != NoiseModel::Clean {
            let first = start / SAMPLES_PER_TICK;
            let last = (start + len).div_ceil(SAMPLES_PER_TICK);
            let mut block = vec![0f32; SAMPLES_PER_TICK as usize];
            for b in first..last {
                block.iter_mut().for_each(|x| *x = 0.0);
                self.noise.add_block(self.seed, listener, b, &mut block);
                let b0 = b * SAMPLES_PER_TICK;
                let from = b0.max(start);
                let to = (b0 + SAMPLES_PER_TICK).min(start + len);
                for t in from..to {
                    out[(t - start) as usize] += block[(t - b0) as usize];
                }
            }
        }
        out
    }

    /// Listener-independent key when the channel is clean: everyone in
    /// earshot hears the same samples.
    fn shared_key(
        &self,
        listener: usize,
        start: u64,
        len: u64,
        expected: Option<[u8; 32]>,
    ) -> Option<CacheKey> {
        (self.noise == NoiseModel::Clean && self.near(listener)).then(|| CacheKey {
            start,
            len,
            emissions: self.overlapping(listener, start, len),
            expected,
        })
    }

    /// Frames `listener` can decode in `[start, start + len)`.
    pub fn decode_frames(&mut self, listener: usize, start: u64, len: u64) -> Vec<OobFrame> {
        let key = self.shared_key(listener, start, len, None);
        if let Some(Cached::Frames(f)) = key.as_ref().and_then(|k| self.cache.get(k)) {
            return f.clone();
        }
        let samples = self.render(listener, start, len);
        let frames: Vec<OobFrame> = default_modem()
            .scan(&samples)
            .into_iter()
            .filter_map(|d| d.frame)
            .collect();
        if let Some(k) = key {
            self.cache.insert(k, Cached::Frames(frames.clone()));
        }
        frames
    }

    pub fn listen(
        &mut self,
        listener: usize,
        start: u64,
        len: u64,
        expected: &VerifyHashPayload,
    ) -> ListenVerdict {
        let mut tag = [0u8; 32];
        tag[..16].copy_from_slice(&expected.truncation);
        tag[16..].copy_from_slice(&expected.session_id);
        let key = self.shared_key(listener, start, len, Some(tag));
        if let Some(Cached::Verdict(v)) = key.as_ref().and_then(|k| self.cache.get(k)) {
            return *v;
        }
        let samples = self.render(listener, start, len);
        let v = listen_window(default_modem(), &samples, expected);
        if let Some(k) = key {
            self.cache.insert(k, Cached::Verdict(v));
        }
        v
    }
}

/// Renders every endpoint's buffer for frames played at the given ticks.
pub fn acoustic_channel(
    frames: &[(u64, OobFrame)],
    noise: NoiseModel,
    proximity: &[bool],
    seed: u64,
    total_ticks: u64,
) -> Vec<Vec<f32>> {
    let mut ch = AcousticChannel::new(noise, seed, proximity.to_vec());
    for (tick, f) in frames {
        ch.emit(tick * SAMPLES_PER_TICK, f.clone(), 1.0, Source::Adversary);
    }
    (0..proximity.len())
        .map(|i| ch.render(i, 0, total_ticks * SAMPLES_PER_TICK))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modem::{DecodeOutcome, FrameKind};

    fn frame() -> OobFrame {
        OobFrame::new(FrameKind::NetworkInit, (0..30).collect()).unwrap()
    }

    #[test]
    fn clean_single_frame_reaches_every_endpoint() {
        let bufs = acoustic_channel(&[(1, frame())], NoiseModel::Clean, &[true; 3], 0, 8);
        for b in &bufs {
            assert_eq!(default_modem().decode(b), DecodeOutcome::Frame(frame()));
        }
    }

    #[test]
    fn out_of_proximity_hears_silence() {
        let bufs = acoustic_channel(&[(1, frame())], NoiseModel::Clean, &[true, false], 0, 8);
        assert!(bufs[1].iter().all(|&x| x == 0.0));
        let exp = VerifyHashPayload {
            truncation: [1; 16],
            session_id: [2; 16],
        };
        assert_eq!(
            listen_window(default_modem(), &bufs[1], &exp),
            ListenVerdict::Nothing
        );
    }

    #[test]
    fn noise_is_reproducible_across_renderings() {
        let mut ch = AcousticChannel::new(NoiseModel::Awgn { snr_db: 10.0 }, 7, vec![true; 2]);
        ch.emit(0, frame(), 1.0, Source::Endpoint(0));
        let whole = ch.render(1, 0, 3 * SAMPLES_PER_TICK);
        let part = ch.render(1, 1000, 5000);
        assert_eq!(&whole[1000..6000], &part[..]);
        // Listeners get independent noise.
        assert_ne!(ch.render(0, 0, 100), ch.render(1, 0, 100));
    }

    #[test]
    fn awgn_power_matches_snr() {
        let ch = AcousticChannel::new(NoiseModel::Awgn { snr_db: 10.0 }, 3, vec![true]);
        let s = ch.render(0, 0, 40 * SAMPLES_PER_TICK);
        let p: f64 = s.iter().map(|x| (*x as f64).powi(2)).sum::<f64>() / s.len() as f64;
        let expected = SIGNAL_POWER / 10.0;
        assert!((p / expected - 1.0).abs() < 0.02, "power {p}");
    }

    #[test]
    fn noise_labels_round_trip() {
        for s in ["clean", "awgn:10", "awgn:-3.5", "impulsive:20:0.5"] {
            assert_eq!(NoiseModel::parse(s).unwrap().label(), s);
        }
        assert!(NoiseModel::parse("awgn").is_none());
        assert!(NoiseModel::parse("pink:3").is_none());
        assert!(NoiseModel::parse("impulsive:-1:0.5").is_none());
    }
}
