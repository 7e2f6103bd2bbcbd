//! Deterministic multi-device simulation: an in-band network under adversary
//! control, a shared acoustic medium, and scripted users.

mod adversary;
pub mod campaign;
pub mod channel;
pub mod policy;
mod run;
pub mod transcript;
pub mod users;

pub use campaign::{
    noise_benchmark, rows_to_csv, run_campaign, CampaignRow, CampaignSpec, NoisePoint,
};
pub use channel::{acoustic_channel, AcousticChannel, NoiseModel, SAMPLES_PER_TICK, SIGNAL_POWER};
pub use policy::{attack_catalog, preset, preset_names, AdversaryPolicy, PolicyError};
pub use run::{
    run_session, run_session_with, OobStats, ParticipantResult, SessionReport, SimConfig, SimError,
};
pub use transcript::{Transcript, TranscriptRecord};
pub use users::UserScript;
