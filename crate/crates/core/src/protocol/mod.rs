//! Coordinator and participant state machines.
//!
//! [`step`] is a pure transition: it consumes an [`Event`] and returns the
//! [`Action`]s the host must carry out (send, play, listen, prompt). The engine
//! never touches a network, a speaker or a clock itself.
//!
//! ```text
//! Ready -> Joining -> Committing -> Dispersing -> AwaitOobHash
//!       -> AwaitUserConfirm -> AwaitNonces -> Accepted
//! (any non-terminal phase) -> Aborted
//! ```

mod session;
pub mod wire;

use rand_core::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};

use crate::crypto::{ContactCard, CryptoError, ParticipantId};
use crate::modem::{ListenVerdict, NetworkInit, OobFrame, VerifyHashPayload};

pub use session::SessionState;
pub use wire::{MessageKind, WireMessage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    Coordinator,
    Participant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    Idle,
    Ready,
    Joining,
    Committing,
    Dispersing,
    AwaitOobHash,
    AwaitUserConfirm,
    AwaitNonces,
    Accepted,
    Aborted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Verdict {
    ContactsImported,
    AbortedByUser,
    AbortedMismatch,
    AbortedForeignOob,
    AbortedTimeout,
    AbortedProtocol,
}

impl Verdict {
    pub fn is_abort(self) -> bool {
        self != Verdict::ContactsImported
    }
}

/// Conditions shown to the user next to the result.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OutcomeFlags {
    /// Two devices claimed the same participant id.
    pub duplicate_id: bool,
    /// Two contact cards carry the same display name.
    pub duplicate_name: bool,
}

impl OutcomeFlags {
    pub fn any(self) -> bool {
        self.duplicate_id || self.duplicate_name
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    pub verdict: Verdict,
    /// The other `n - 1` members' cards in id order; empty on any abort.
    pub contacts: Vec<ContactCard>,
    pub flags: OutcomeFlags,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OobEvent {
    /// A frame decoded from ambient audio outside a verification window.
    Frame(OobFrame),
    /// Result of a verification window opened by [`Action::StartListenWindow`].
    Verdict(ListenVerdict),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Event {
    InBand(WireMessage),
    Oob(OobEvent),
    UserConfirm(bool),
    /// One unit of simulated time.
    Tick,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Destination {
    Broadcast,
    Peer(ParticipantId),
    /// Whoever owns the network this device joined.
    Coordinator,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    SendInBand {
        msg: WireMessage,
        dest: Destination,
    },
    EmitOob(OobFrame),
    /// Record audio from now and report a verdict for this expected frame.
    StartListenWindow(VerifyHashPayload),
    /// Show the checkmark and ask the user to compare with the group.
    PromptUser,
    ReportOutcome(Outcome),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineConfig {
    /// Ticks without progress before a phase gives up.
    pub phase_timeout_ticks: u32,
    /// Ticks between dispersal and playing the verification frame; members
    /// need one tick to receive the dispersal and open their windows.
    pub verify_delay_ticks: u32,
    /// Ticks between repeats of the network announcement while joining.
    pub init_repeat_ticks: u32,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            phase_timeout_ticks: 50,
            verify_delay_ticks: 3,
            init_repeat_ticks: 12,
        }
    }
}

/// Knobs beyond the basic constructor, mostly for simulated adversaries.
#[derive(Debug, Clone, Default)]
pub struct SessionOptions {
    pub config: EngineConfig,
    /// Coordinator only: reuse an existing announcement.
    pub network: Option<NetworkInit>,
    /// Claim this id instead of minting one.
    pub participant_id: Option<ParticipantId>,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("group size {0} is below 2")]
    GroupTooSmall(usize),
    #[error("session is still in phase {0:?}")]
    NotTerminal(Phase),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}

pub fn new_session<R: RngCore + CryptoRng>(
    role: Role,
    n: usize,
    identity: ContactCard,
    rng: &mut R,
) -> Result<SessionState, ProtocolError> {
    SessionState::create(role, n, identity, rng, SessionOptions::default())
}

pub fn new_session_with<R: RngCore + CryptoRng>(
    role: Role,
    n: usize,
    identity: ContactCard,
    rng: &mut R,
    options: SessionOptions,
) -> Result<SessionState, ProtocolError> {
    SessionState::create(role, n, identity, rng, options)
}

pub fn step(mut state: SessionState, event: Event) -> (SessionState, Vec<Action>) {
    let actions = state.handle(event);
    (state, actions)
}

pub fn finalize(state: &SessionState) -> Result<Outcome, ProtocolError> {
    state
        .outcome
        .clone()
        .ok_or(ProtocolError::NotTerminal(state.phase))
}

/// Manual comparisons needed to verify every pair of an `n`-member group.
pub fn pairwise_action_count(n: usize) -> Result<u64, ProtocolError> {
    if n < 2 {
        return Err(ProtocolError::GroupTooSmall(n));
    }
    let n = n as u64;
    Ok(n * (n - 1) / 2)
}
