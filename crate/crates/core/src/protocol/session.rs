use std::collections::{BTreeMap, BTreeSet};

use rand_core::{CryptoRng, RngCore};

use super::wire::{self, MessageKind, WireMessage};
use super::{
    Action, Destination, EngineConfig, Event, OobEvent, Outcome, OutcomeFlags, Phase,
    ProtocolError, Role, SessionOptions, Verdict,
};
use crate::crypto::{
    commit, decode_element, gen_keypair, open_abort, open_payload, open_success, verification_hash,
    verify_commitment, CommitmentBundle, ContactCard, Element, GdhOutput, GdhState, GroupKey,
    KeyPair, NoncePair, ParticipantId, VerificationHash,
};
use crate::modem::{ListenVerdict, NetworkInit, VerifyHashPayload};

/// Cap on messages held for a later phase.
const MAX_BUFFERED: usize = 256;

/// One device's view of a pairing session.
#[derive(Clone)]
pub struct SessionState {
    pub role: Role,
    pub phase: Phase,
    /// 0 while a participant has not yet seen the roster.
    pub group_size_n: usize,
    pub self_id: ParticipantId,
    pub bundles: BTreeMap<ParticipantId, CommitmentBundle>,
    pub group_key: Option<GroupKey>,
    pub expected_hash: Option<VerificationHash>,
    pub outcome: Option<Outcome>,
    config: EngineConfig,
    card: ContactCard,
    dh: KeyPair,
    nonces: NoncePair,
    network: Option<NetworkInit>,
    coordinator_id: Option<ParticipantId>,
    roster: Vec<(ParticipantId, Element)>,
    joined: BTreeMap<ParticipantId, Element>,
    gdh: Option<GdhState>,
    own_bundle: Option<CommitmentBundle>,
    contacts: BTreeMap<ParticipantId, ContactCard>,
    opened: BTreeSet<ParticipantId>,
    seen: BTreeSet<[u8; 32]>,
    buffered: Vec<WireMessage>,
    phase_ticks: u32,
    since_init: u32,
    verify_countdown: Option<u32>,
    flags: OutcomeFlags,
}

impl std::fmt::Debug for SessionState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SessionState")
            .field("role", &self.role)
            .field("phase", &self.phase)
            .field("group_size_n", &self.group_size_n)
            .field("self_id", &self.self_id)
            .field("bundles", &self.bundles.len())
            .field("outcome", &self.outcome)
            .finish_non_exhaustive()
    }
}

/// Rank of the protocol step a message kind belongs to; messages ranked above
/// the current phase are held back, those below are stale.
fn kind_rank(kind: MessageKind) -> u8 {
    match kind {
        MessageKind::Join => 0,
        MessageKind::Roster => 1,
        MessageKind::GdhUp | MessageKind::GdhDown => 2,
        MessageKind::Commit => 3,
        MessageKind::Disperse => 4,
        MessageKind::SuccessNonce => 5,
        MessageKind::AbortNonce => u8::MAX,
    }
}

fn consumes(role: Role, kind: MessageKind) -> bool {
    match role {
        Role::Coordinator => !matches!(kind, MessageKind::Roster | MessageKind::Disperse),
        Role::Participant => !matches!(kind, MessageKind::Join | MessageKind::Commit),
    }
}

impl SessionState {
    pub(super) fn create<R: RngCore + CryptoRng>(
        role: Role,
        n: usize,
        identity: ContactCard,
        rng: &mut R,
        options: SessionOptions,
    ) -> Result<Self, ProtocolError> {
        if role == Role::Coordinator && n < 2 {
            return Err(ProtocolError::GroupTooSmall(n));
        }
        if role == Role::Participant && n == 1 {
            return Err(ProtocolError::GroupTooSmall(n));
        }
        identity.validate()?;
        let self_id = options
            .participant_id
            .unwrap_or_else(|| ParticipantId::random(rng));
        let dh = gen_keypair(rng);
        let nonces = NoncePair::generate(rng);
        let network = match (role, options.network) {
            (Role::Coordinator, Some(net)) => Some(net),
            (Role::Coordinator, None) => {
                let mut net = NetworkInit {
                    network_id: [0; 6],
                    network_key: [0; 8],
                    session_id: [0; 16],
                };
                rng.fill_bytes(&mut net.network_id);
                rng.fill_bytes(&mut net.network_key);
                rng.fill_bytes(&mut net.session_id);
                Some(net)
            }
            (Role::Participant, _) => None,
        };
        Ok(Self {
            role,
            phase: Phase::Ready,
            group_size_n: n,
            self_id,
            bundles: BTreeMap::new(),
            group_key: None,
            expected_hash: None,
            outcome: None,
            config: options.config,
            card: identity,
            dh,
            nonces,
            network,
            coordinator_id: (role == Role::Coordinator).then_some(self_id),
            roster: Vec::new(),
            joined: BTreeMap::new(),
            gdh: None,
            own_bundle: None,
            contacts: BTreeMap::new(),
            opened: BTreeSet::new(),
            seen: BTreeSet::new(),
            buffered: Vec::new(),
            phase_ticks: 0,
            since_init: 0,
            verify_countdown: None,
            flags: OutcomeFlags::default(),
        })
    }

    pub fn session_id(&self) -> Option<[u8; 16]> {
        self.network.as_ref().map(|n| n.session_id)
    }

    pub fn network(&self) -> Option<&NetworkInit> {
        self.network.as_ref()
    }

    pub fn card(&self) -> &ContactCard {
        &self.card
    }

    pub fn dh_public(&self) -> Element {
        self.dh.public_key
    }

    pub fn own_bundle(&self) -> Option<&CommitmentBundle> {
        self.own_bundle.as_ref()
    }

    pub fn roster(&self) -> &[(ParticipantId, Element)] {
        &self.roster
    }

    pub fn flags(&self) -> OutcomeFlags {
        self.flags
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self.phase, Phase::Accepted | Phase::Aborted)
    }

    /// The device shows its green checkmark once it heard its own hash.
    pub fn shows_checkmark(&self) -> bool {
        matches!(
            self.phase,
            Phase::AwaitUserConfirm | Phase::AwaitNonces | Phase::Accepted
        )
    }

    fn set_phase(&mut self, phase: Phase) {
        self.phase = phase;
        self.phase_ticks = 0;
    }

    fn message(&self, kind: MessageKind, body: Vec<u8>) -> WireMessage {
        WireMessage::new(
            kind,
            self.session_id().unwrap_or_default(),
            self.self_id,
            body,
        )
    }

    fn send(&self, out: &mut Vec<Action>, kind: MessageKind, body: Vec<u8>, dest: Destination) {
        out.push(Action::SendInBand {
            msg: self.message(kind, body),
            dest,
        });
    }

    fn abort(&mut self, verdict: Verdict, out: &mut Vec<Action>) {
        if self.is_terminal() {
            return;
        }
        if self.own_bundle.is_some() {
            let na = self.nonces.abort_nonce.to_vec();
            self.send(out, MessageKind::AbortNonce, na, Destination::Broadcast);
        }
        self.set_phase(Phase::Aborted);
        self.buffered.clear();
        let outcome = Outcome {
            verdict,
            contacts: Vec::new(),
            flags: self.flags,
        };
        self.outcome = Some(outcome.clone());
        out.push(Action::ReportOutcome(outcome));
    }

    fn accept(&mut self, out: &mut Vec<Action>) {
        self.set_phase(Phase::Accepted);
        self.buffered.clear();
        let outcome = Outcome {
            verdict: Verdict::ContactsImported,
            contacts: self.contacts.values().cloned().collect(),
            flags: self.flags,
        };
        self.outcome = Some(outcome.clone());
        out.push(Action::ReportOutcome(outcome));
    }

    fn phase_rank(&self) -> u8 {
        match (self.role, self.phase) {
            (_, Phase::Idle | Phase::Ready) => 0,
            (Role::Coordinator, Phase::Joining) => 0,
            (Role::Participant, Phase::Joining) => 1,
            (_, Phase::Committing) => 2,
            (Role::Coordinator, Phase::Dispersing) => 3,
            (Role::Participant, Phase::Dispersing) => 4,
            (_, Phase::AwaitOobHash | Phase::AwaitUserConfirm) => 4,
            (_, Phase::AwaitNonces) => 5,
            (_, Phase::Accepted | Phase::Aborted) => u8::MAX,
        }
    }

    pub fn handle(&mut self, event: Event) -> Vec<Action> {
        let mut out = Vec::new();
        if self.is_terminal() {
            return out;
        }
        match event {
            Event::Tick => self.on_tick(&mut out),
            Event::InBand(msg) => self.on_message(msg, &mut out),
            Event::Oob(OobEvent::Frame(frame)) => {
                if self.role == Role::Participant && self.phase == Phase::Ready {
                    if let Some(init) = NetworkInit::from_frame(&frame) {
                        self.on_network_init(init, &mut out);
                    }
                }
                // Ambient frames in other phases carry no instruction; the
                // verification window is what judges the acoustic channel.
            }
            Event::Oob(OobEvent::Verdict(v)) => self.on_verdict(v, &mut out),
            Event::UserConfirm(yes) => self.on_user(yes, &mut out),
        }
        self.drain(&mut out);
        out
    }

    fn drain(&mut self, out: &mut Vec<Action>) {
        loop {
            if self.is_terminal() || self.buffered.is_empty() {
                return;
            }
            let before = (self.phase, self.buffered.len(), self.bundles.len());
            let pending = std::mem::take(&mut self.buffered);
            for msg in pending {
                self.dispatch(msg, out);
            }
            if (self.phase, self.buffered.len(), self.bundles.len()) == before {
                return;
            }
        }
    }

    fn on_tick(&mut self, out: &mut Vec<Action>) {
        self.phase_ticks += 1;
        if self.role == Role::Coordinator {
            match self.phase {
                Phase::Ready => {
                    out.push(Action::EmitOob(self.network.unwrap().to_frame()));
                    self.since_init = 0;
                    self.set_phase(Phase::Joining);
                    return;
                }
                Phase::Joining => {
                    self.since_init += 1;
                    if self.since_init >= self.config.init_repeat_ticks {
                        self.since_init = 0;
                        out.push(Action::EmitOob(self.network.unwrap().to_frame()));
                    }
                }
                Phase::AwaitOobHash => {
                    if let Some(c) = self.verify_countdown.as_mut() {
                        *c = c.saturating_sub(1);
                        if *c == 0 {
                            self.verify_countdown = None;
                            let payload = self.verify_payload();
                            out.push(Action::EmitOob(payload.to_frame()));
                        }
                    }
                }
                _ => {}
            }
        }
        if self.phase_ticks >= self.config.phase_timeout_ticks {
            self.abort(Verdict::AbortedTimeout, out);
        }
    }

    fn verify_payload(&self) -> VerifyHashPayload {
        VerifyHashPayload {
            truncation: self.expected_hash.expect("hash computed").oob_truncation,
            session_id: self.session_id().unwrap_or_default(),
        }
    }

    fn on_network_init(&mut self, init: NetworkInit, out: &mut Vec<Action>) {
        self.network = Some(init);
        let body = wire::join_body(&init.network_key, &self.dh.public_key);
        self.send(out, MessageKind::Join, body, Destination::Coordinator);
        self.set_phase(Phase::Joining);
    }

    fn on_verdict(&mut self, v: ListenVerdict, out: &mut Vec<Action>) {
        if self.phase != Phase::AwaitOobHash {
            self.abort(Verdict::AbortedProtocol, out);
            return;
        }
        match v {
            ListenVerdict::Match => {
                self.set_phase(Phase::AwaitUserConfirm);
                out.push(Action::PromptUser);
            }
            ListenVerdict::Mismatch => self.abort(Verdict::AbortedMismatch, out),
            ListenVerdict::ForeignFrame => self.abort(Verdict::AbortedForeignOob, out),
            ListenVerdict::Nothing => self.abort(Verdict::AbortedTimeout, out),
        }
    }

    fn on_user(&mut self, yes: bool, out: &mut Vec<Action>) {
        if self.phase != Phase::AwaitUserConfirm {
            self.abort(Verdict::AbortedProtocol, out);
            return;
        }
        if !yes {
            self.abort(Verdict::AbortedByUser, out);
            return;
        }
        let ns = self.nonces.success_nonce.to_vec();
        self.send(out, MessageKind::SuccessNonce, ns, Destination::Broadcast);
        self.set_phase(Phase::AwaitNonces);
        self.check_nonces_complete(out);
    }

    fn on_message(&mut self, msg: WireMessage, out: &mut Vec<Action>) {
        match self.session_id() {
            Some(sid) if sid == msg.session_id => {}
            _ => return,
        }
        if !self.seen.insert(msg.digest()) {
            return;
        }
        self.dispatch(msg, out);
    }

    fn hold(&mut self, msg: WireMessage) {
        if self.buffered.len() < MAX_BUFFERED {
            self.buffered.push(msg);
        }
    }

    fn dispatch(&mut self, msg: WireMessage, out: &mut Vec<Action>) {
        if self.is_terminal() || !consumes(self.role, msg.kind) || msg.sender == self.self_id {
            return;
        }
        if msg.kind == MessageKind::AbortNonce {
            self.on_abort_nonce(msg, out);
            return;
        }
        let (k, p) = (kind_rank(msg.kind), self.phase_rank());
        if k > p {
            self.hold(msg);
            return;
        }
        if k < p {
            if msg.kind == MessageKind::Join {
                self.on_late_join(&msg);
            } else {
                self.abort(Verdict::AbortedProtocol, out);
            }
            return;
        }
        match (self.role, msg.kind) {
            (Role::Coordinator, MessageKind::Join) => self.on_join(msg, out),
            (Role::Participant, MessageKind::Roster) => self.on_roster(msg, out),
            (_, MessageKind::GdhUp) => self.on_gdh_up(msg, out),
            (_, MessageKind::GdhDown) => self.on_gdh_down(msg, out),
            (Role::Coordinator, MessageKind::Commit) => self.on_commit(msg, out),
            (Role::Participant, MessageKind::Disperse) => self.on_disperse(msg, out),
            (_, MessageKind::SuccessNonce) => self.on_success_nonce(msg, out),
            _ => self.abort(Verdict::AbortedProtocol, out),
        }
    }

    // ----- coordinator: admission -----

    fn on_join(&mut self, msg: WireMessage, out: &mut Vec<Action>) {
        let net = self.network.expect("coordinator owns the network");
        let Some((key, dh)) = wire::parse_join(&msg.body) else {
            return;
        };
        if key != net.network_key || decode_element(&dh).is_err() {
            return;
        }
        if msg.sender == self.self_id || self.joined.contains_key(&msg.sender) {
            self.flags.duplicate_id = true;
            return;
        }
        if dh == self.dh.public_key || self.joined.values().any(|d| *d == dh) {
            return;
        }
        self.joined.insert(msg.sender, dh);
        if self.joined.len() + 1 < self.group_size_n {
            return;
        }
        let mut roster: Vec<(ParticipantId, Element)> =
            self.joined.iter().map(|(id, dh)| (*id, *dh)).collect();
        roster.push((self.self_id, self.dh.public_key));
        roster.sort();
        self.roster = roster;
        let body = wire::roster_body(&self.roster);
        self.send(out, MessageKind::Roster, body, Destination::Broadcast);
        self.set_phase(Phase::Committing);
        self.start_gdh(out);
    }

    /// Join after the group is full: rejected, but a second claim on an
    /// admitted id is surfaced to the users.
    fn on_late_join(&mut self, msg: &WireMessage) {
        if let Some((_, dh)) = wire::parse_join(&msg.body) {
            if self
                .roster
                .iter()
                .any(|(id, d)| *id == msg.sender && *d != dh)
            {
                self.flags.duplicate_id = true;
            }
        }
    }

    // ----- participant: roster -----

    fn on_roster(&mut self, msg: WireMessage, out: &mut Vec<Action>) {
        let Ok(roster) = wire::parse_roster(&msg.body) else {
            self.abort(Verdict::AbortedProtocol, out);
            return;
        };
        if roster.windows(2).any(|w| w[0].0 == w[1].0) {
            self.flags.duplicate_id = true;
            self.abort(Verdict::AbortedMismatch, out);
            return;
        }
        let sorted = roster.windows(2).all(|w| w[0].0 < w[1].0);
        let mine = roster.iter().find(|(id, _)| *id == self.self_id);
        if let Some((_, dh)) = mine {
            if *dh != self.dh.public_key {
                self.flags.duplicate_id = true;
                self.abort(Verdict::AbortedMismatch, out);
                return;
            }
        }
        let coordinator_listed = roster.iter().any(|(id, _)| *id == msg.sender);
        let size_ok =
            roster.len() >= 2 && (self.group_size_n == 0 || self.group_size_n == roster.len());
        if !sorted || mine.is_none() || !coordinator_listed || !size_ok {
            self.abort(Verdict::AbortedProtocol, out);
            return;
        }
        self.group_size_n = roster.len();
        self.coordinator_id = Some(msg.sender);
        self.roster = roster;
        self.set_phase(Phase::Committing);
        self.start_gdh(out);
    }

    // ----- group key agreement -----

    fn position_of(&self, id: &ParticipantId) -> Option<usize> {
        self.roster.iter().position(|(r, _)| r == id)
    }

    fn start_gdh(&mut self, out: &mut Vec<Action>) {
        let dhs: Vec<Element> = self.roster.iter().map(|(_, d)| *d).collect();
        let pos = self.position_of(&self.self_id).expect("own roster entry");
        let gdh = match GdhState::new(&self.dh, pos, &dhs) {
            Ok(g) => g,
            Err(_) => {
                self.abort(Verdict::AbortedProtocol, out);
                return;
            }
        };
        if gdh.is_first() {
            let flow = gdh.start().expect("first member starts");
            self.send_upflow(1, &flow, out);
        }
        self.gdh = Some(gdh);
    }

    /// Upflow toward `target`. Participants hand it to the coordinator, which
    /// relays it; the coordinator addresses the member directly.
    fn send_upflow(&self, target: usize, flow: &[Element], out: &mut Vec<Action>) {
        let body = wire::gdh_up_body(target, flow);
        let dest = match self.role {
            Role::Coordinator => Destination::Peer(self.roster[target].0),
            Role::Participant => Destination::Coordinator,
        };
        self.send(out, MessageKind::GdhUp, body, dest);
    }

    fn forward_downflow(&self, flow: &[Element], out: &mut Vec<Action>) {
        let last = self.roster.len() - 1;
        let body = wire::gdh_down_body(flow);
        for (i, (id, _)) in self.roster.iter().enumerate() {
            if i != last && *id != self.self_id {
                self.send(
                    out,
                    MessageKind::GdhDown,
                    body.clone(),
                    Destination::Peer(*id),
                );
            }
        }
    }

    fn on_gdh_up(&mut self, msg: WireMessage, out: &mut Vec<Action>) {
        let Some((target, flow)) = wire::parse_gdh_up(&msg.body) else {
            self.abort(Verdict::AbortedProtocol, out);
            return;
        };
        let own = self.position_of(&self.self_id);
        let from = self.position_of(&msg.sender);
        let valid_sender = match self.role {
            Role::Coordinator => target >= 1 && from == Some(target - 1),
            Role::Participant => Some(msg.sender) == self.coordinator_id,
        };
        if !valid_sender || target >= self.roster.len() {
            self.abort(Verdict::AbortedProtocol, out);
            return;
        }
        if Some(target) != own {
            if self.role == Role::Coordinator {
                // Relay with the coordinator as sender.
                self.send(
                    out,
                    MessageKind::GdhUp,
                    msg.body,
                    Destination::Peer(self.roster[target].0),
                );
            } else {
                self.abort(Verdict::AbortedProtocol, out);
            }
            return;
        }
        let gdh = self.gdh.as_mut().expect("gdh initialised with roster");
        match gdh.contribute(&flow) {
            Ok(GdhOutput::Upflow(next)) => self.send_upflow(target + 1, &next, out),
            Ok(GdhOutput::Downflow(down)) => {
                match self.role {
                    Role::Coordinator => self.forward_downflow(&down, out),
                    Role::Participant => self.send(
                        out,
                        MessageKind::GdhDown,
                        wire::gdh_down_body(&down),
                        Destination::Coordinator,
                    ),
                }
                self.key_ready(out);
            }
            Err(_) => self.abort(Verdict::AbortedProtocol, out),
        }
    }

    fn on_gdh_down(&mut self, msg: WireMessage, out: &mut Vec<Action>) {
        let last = self.roster.len() - 1;
        let valid_sender = match self.role {
            Role::Coordinator => self.position_of(&msg.sender) == Some(last),
            Role::Participant => Some(msg.sender) == self.coordinator_id,
        };
        let Some(flow) = wire::parse_gdh_down(&msg.body).filter(|_| valid_sender) else {
            self.abort(Verdict::AbortedProtocol, out);
            return;
        };
        let gdh = self.gdh.as_mut().expect("gdh initialised with roster");
        if gdh.finish(&flow).is_err() {
            self.abort(Verdict::AbortedProtocol, out);
            return;
        }
        if self.role == Role::Coordinator {
            self.forward_downflow(&flow, out);
        }
        self.key_ready(out);
    }

    fn key_ready(&mut self, out: &mut Vec<Action>) {
        let key = self
            .gdh
            .as_ref()
            .and_then(|g| g.group_key())
            .cloned()
            .expect("key derived");
        let bundle = match commit(
            &self.card,
            &self.nonces,
            self.dh.public_key,
            &key,
            self.self_id,
        ) {
            Ok(b) => b,
            Err(_) => {
                self.abort(Verdict::AbortedProtocol, out);
                return;
            }
        };
        self.group_key = Some(key);
        self.own_bundle = Some(bundle.clone());
        match self.role {
            Role::Coordinator => {
                self.bundles.insert(self.self_id, bundle);
            }
            Role::Participant => self.send(
                out,
                MessageKind::Commit,
                bundle.to_canonical_bytes(),
                Destination::Coordinator,
            ),
        }
        self.set_phase(Phase::Dispersing);
    }

    // ----- commitments and dispersal -----

    /// Structural and cryptographic checks on one member's bundle; returns
    /// the decrypted card of another member.
    fn check_bundle(&self, bundle: &CommitmentBundle) -> Option<ContactCard> {
        let pos = self.position_of(&bundle.participant_id)?;
        if self.roster[pos].1 != bundle.dh_public || !verify_commitment(bundle) {
            return None;
        }
        let key = self.group_key.as_ref()?;
        let card = open_payload(&bundle.payload_ciphertext, key, &bundle.participant_id).ok()?;
        card.validate().ok()?;
        Some(card)
    }

    fn on_commit(&mut self, msg: WireMessage, out: &mut Vec<Action>) {
        let Ok(bundle) = CommitmentBundle::from_canonical_bytes(&msg.body) else {
            self.abort(Verdict::AbortedProtocol, out);
            return;
        };
        if bundle.participant_id != msg.sender || self.bundles.contains_key(&msg.sender) {
            self.abort(Verdict::AbortedMismatch, out);
            return;
        }
        let Some(card) = self.check_bundle(&bundle) else {
            self.abort(Verdict::AbortedMismatch, out);
            return;
        };
        self.contacts.insert(msg.sender, card);
        self.bundles.insert(msg.sender, bundle);
        if self.bundles.len() < self.group_size_n {
            return;
        }
        let all: Vec<CommitmentBundle> = self.bundles.values().cloned().collect();
        self.flags.duplicate_name |= self.duplicate_names();
        match verification_hash(&all) {
            Ok(v) => self.expected_hash = Some(v),
            Err(_) => {
                self.abort(Verdict::AbortedMismatch, out);
                return;
            }
        }
        self.send(
            out,
            MessageKind::Disperse,
            wire::disperse_body(&all),
            Destination::Broadcast,
        );
        self.set_phase(Phase::AwaitOobHash);
        self.verify_countdown = Some(self.config.verify_delay_ticks.max(1));
        out.push(Action::StartListenWindow(self.verify_payload()));
    }

    fn duplicate_names(&self) -> bool {
        let mut names = BTreeSet::new();
        !std::iter::once(&self.card)
            .chain(self.contacts.values())
            .all(|c| names.insert(c.name.as_str()))
    }

    fn on_disperse(&mut self, msg: WireMessage, out: &mut Vec<Action>) {
        if Some(msg.sender) != self.coordinator_id {
            self.abort(Verdict::AbortedProtocol, out);
            return;
        }
        let Ok(bundles) = wire::parse_disperse(&msg.body) else {
            self.abort(Verdict::AbortedProtocol, out);
            return;
        };
        let own = self
            .own_bundle
            .as_ref()
            .expect("committed before dispersal");
        let ids: BTreeSet<ParticipantId> = bundles.iter().map(|b| b.participant_id).collect();
        let roster_ids: BTreeSet<ParticipantId> = self.roster.iter().map(|(id, _)| *id).collect();
        if bundles.len() != self.group_size_n || ids.len() != bundles.len() {
            self.flags.duplicate_id |= ids.len() != bundles.len();
            self.abort(Verdict::AbortedMismatch, out);
            return;
        }
        if ids != roster_ids || !bundles.iter().any(|b| b == own) {
            self.abort(Verdict::AbortedMismatch, out);
            return;
        }
        let mut contacts = BTreeMap::new();
        for b in bundles.iter().filter(|b| b.participant_id != self.self_id) {
            match self.check_bundle(b) {
                Some(card) => {
                    contacts.insert(b.participant_id, card);
                }
                None => {
                    self.abort(Verdict::AbortedMismatch, out);
                    return;
                }
            }
        }
        let Ok(v) = verification_hash(&bundles) else {
            self.abort(Verdict::AbortedMismatch, out);
            return;
        };
        self.contacts = contacts;
        self.bundles = bundles.into_iter().map(|b| (b.participant_id, b)).collect();
        self.flags.duplicate_name |= self.duplicate_names();
        self.expected_hash = Some(v);
        self.set_phase(Phase::AwaitOobHash);
        out.push(Action::StartListenWindow(self.verify_payload()));
    }

    // ----- finalization -----

    fn on_success_nonce(&mut self, msg: WireMessage, out: &mut Vec<Action>) {
        let (Some(nonce), Some(bundle)) =
            (wire::parse_nonce(&msg.body), self.bundles.get(&msg.sender))
        else {
            self.abort(Verdict::AbortedProtocol, out);
            return;
        };
        if !open_success(bundle, &nonce) {
            self.abort(Verdict::AbortedMismatch, out);
            return;
        }
        self.opened.insert(msg.sender);
        self.check_nonces_complete(out);
    }

    fn check_nonces_complete(&mut self, out: &mut Vec<Action>) {
        if self.phase == Phase::AwaitNonces && self.opened.len() + 1 == self.group_size_n {
            self.accept(out);
        }
    }

    fn on_abort_nonce(&mut self, msg: WireMessage, out: &mut Vec<Action>) {
        let Some(nonce) = wire::parse_nonce(&msg.body) else {
            return;
        };
        match self.bundles.get(&msg.sender) {
            Some(b) if open_abort(b, &nonce) => self.abort(Verdict::AbortedByUser, out),
            // Unverifiable release: cannot be told apart from forged noise.
            Some(_) => {}
            None if self.phase_rank() < 4 => self.hold(msg),
            None => {}
        }
    }
}
