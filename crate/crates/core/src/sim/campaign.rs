//! Seed sweeps over presets, group sizes and noise conditions.

use serde::{Deserialize, Serialize};

use super::channel::{AcousticChannel, NoiseModel, Source};
use super::policy::AdversaryPolicy;
use super::run::{run_session_with, sub_seed, SessionReport, SimConfig, SimError};
use super::users::UserScript;
use crate::modem::{ListenVerdict, VerifyHashPayload};

#[derive(Debug, Clone)]
pub struct CampaignSpec {
    pub policies: Vec<AdversaryPolicy>,
    pub group_sizes: Vec<usize>,
    pub seeds: std::ops::Range<u64>,
    pub noises: Vec<NoiseModel>,
    pub users: UserScript,
    pub config: SimConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignRow {
    pub seed: u64,
    pub policy: String,
    pub n: usize,
    pub noise: String,
    pub users: String,
    /// Honest verdicts in endpoint order, `;`-separated.
    pub verdicts: String,
    pub imported: usize,
    pub false_accepts: usize,
    pub ticks: u64,
}

impl CampaignRow {
    pub fn from_report(r: &SessionReport) -> Self {
        Self {
            seed: r.seed,
            policy: r.policy.clone(),
            n: r.n,
            noise: r.noise.label(),
            users: r.users.to_string(),
            verdicts: r
                .results
                .iter()
                .map(|p| format!("{:?}", p.outcome.verdict))
                .collect::<Vec<_>>()
                .join(";"),
            imported: r.imported(),
            false_accepts: r.false_accepts(),
            ticks: r.ticks,
        }
    }
}

fn jobs(spec: &CampaignSpec) -> Vec<(usize, usize, usize, u64)> {
    let mut out = Vec::new();
    for p in 0..spec.policies.len() {
        for (ni, _) in spec.noises.iter().enumerate() {
            for (gi, _) in spec.group_sizes.iter().enumerate() {
                for s in spec.seeds.clone() {
                    out.push((p, ni, gi, s));
                }
            }
        }
    }
    out
}

fn run_job(
    spec: &CampaignSpec,
    (p, ni, gi, seed): (usize, usize, usize, u64),
) -> Result<CampaignRow, SimError> {
    let cfg = SimConfig {
        noise: spec.noises[ni],
        record_transcript: false,
        ..spec.config.clone()
    };
    let r = run_session_with(
        spec.group_sizes[gi],
        &spec.policies[p],
        spec.users,
        seed,
        &cfg,
    )?;
    Ok(CampaignRow::from_report(&r))
}

pub fn run_campaign(spec: &CampaignSpec) -> Result<Vec<CampaignRow>, SimError> {
    let jobs = jobs(spec);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        jobs.into_par_iter().map(|j| run_job(spec, j)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        jobs.into_iter().map(|j| run_job(spec, j)).collect()
    }
}

pub fn rows_to_csv(rows: &[CampaignRow]) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisePoint {
    pub noise: String,
    pub trials: usize,
    pub decoded: usize,
    /// Listen windows judged `Match` for a lone correct frame.
    pub matched: usize,
}

/// Modem robustness per noise condition: one verification frame in a
/// listen-sized window, rendered through the shared channel.
pub fn noise_benchmark(noises: &[NoiseModel], trials: usize, seed: u64) -> Vec<NoisePoint> {
    let window = 20 * super::channel::SAMPLES_PER_TICK;
    noises
        .iter()
        .map(|&noise| {
            let mut point = NoisePoint {
                noise: noise.label(),
                trials,
                decoded: 0,
                matched: 0,
            };
            for t in 0..trials {
                let s = sub_seed(seed ^ t as u64, &noise.label());
                let payload = VerifyHashPayload {
                    truncation: s.to_be_bytes().repeat(2).try_into().unwrap(),
                    session_id: (!s).to_be_bytes().repeat(2).try_into().unwrap(),
                };
                let mut ch = AcousticChannel::new(noise, s, vec![true, true]);
                let start = 4096 + s % 8192;
                ch.emit(start, payload.to_frame(), 1.0, Source::Endpoint(0));
                if ch.decode_frames(1, 0, window).contains(&payload.to_frame()) {
                    point.decoded += 1;
                }
                if ch.listen(1, 0, window, &payload) == ListenVerdict::Match {
                    point.matched += 1;
                }
            }
            point
        })
        .collect()
}
