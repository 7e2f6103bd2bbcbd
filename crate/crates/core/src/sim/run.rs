//! Lockstep simulation of one pairing session.
//!
//! Each tick runs, in order: scheduled acoustic injections, listen-window
//! verdicts, in-band deliveries, ambient frame decoding for devices waiting
//! for an announcement, user button presses, and finally the clock tick for
//! every device. In-band messages take one tick plus whatever the adversary
//! adds; frames are on the air from the tick they are played.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_core::SeedableRng;
use serde::{Deserialize, Serialize};

use super::adversary::Adversary;
use super::channel::{AcousticChannel, NoiseModel, Source, SAMPLES_PER_TICK};
use super::policy::{AdversaryPolicy, AgentSpec, FrameSpec, InjectAt, OobRule};
use super::transcript::{Channel, Direction, Transcript, TranscriptRecord};
use super::users::{diligent, Decision, GroupView, UserScript, REACTION_TICKS};
use crate::crypto::hash::tagged_hash;
use crate::crypto::{gen_keypair, ContactCard, ParticipantId};
use crate::modem::{FrameKind, NetworkInit, OobFrame, VerifyHashPayload, MAX_PAYLOAD};
use crate::protocol::{
    finalize, new_session_with, Action, Destination, EngineConfig, Event, OobEvent, Outcome, Phase,
    Role, SessionOptions, SessionState, Verdict, WireMessage,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub noise: NoiseModel,
    /// Honest endpoints out of earshot of the rest of the group.
    pub out_of_range: Vec<usize>,
    pub max_ticks: u64,
    pub listen_ticks: u64,
    pub engine: EngineConfig,
    pub record_transcript: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            noise: NoiseModel::Clean,
            out_of_range: Vec::new(),
            max_ticks: 800,
            listen_ticks: 20,
            engine: EngineConfig::default(),
            record_transcript: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error("group size {0} is below 2")]
    GroupTooSmall(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantResult {
    pub endpoint: usize,
    pub role: Role,
    pub id: ParticipantId,
    pub outcome: Outcome,
    /// Imported a contact set other than exactly the other honest members'.
    pub false_accept: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OobStats {
    pub frames_played: usize,
    pub frames_injected: usize,
    /// Ambient decodes attempted / succeeded for devices awaiting the
    /// announcement.
    pub decodes_attempted: usize,
    pub decodes_ok: usize,
    pub verdicts: BTreeMap<String, usize>,
}

#[derive(Debug, Clone)]
pub struct SessionReport {
    pub n: usize,
    pub seed: u64,
    pub policy: String,
    pub users: UserScript,
    pub noise: NoiseModel,
    /// Honest members only, coordinator first.
    pub results: Vec<ParticipantResult>,
    pub ticks: u64,
    pub interventions: usize,
    pub oob: OobStats,
    pub transcript: Transcript,
}

impl SessionReport {
    pub fn imported(&self) -> usize {
        self.results
            .iter()
            .filter(|r| r.outcome.verdict == Verdict::ContactsImported)
            .count()
    }

    pub fn all_imported(&self) -> bool {
        self.imported() == self.results.len()
    }

    pub fn false_accepts(&self) -> usize {
        self.results.iter().filter(|r| r.false_accept).count()
    }

    /// Simulated protocol time in seconds.
    pub fn seconds(&self) -> f64 {
        self.ticks as f64 * SAMPLES_PER_TICK as f64 / 48_000.0
    }
}

/// Independent 64-bit seed for one purpose of one run.
pub(crate) fn sub_seed(seed: u64, label: &str) -> u64 {
    let h = tagged_hash(
        b"pairsonic/v1/sim-seed",
        &[&seed.to_be_bytes(), label.as_bytes()],
    );
    u64::from_be_bytes(h[..8].try_into().unwrap())
}

struct Endpoint {
    state: SessionState,
    honest: bool,
    network: usize,
    listen: Option<(u64, VerifyHashPayload)>,
    prompted_at: Option<u64>,
    /// Pressed without looking (rushing user).
    blind: Option<bool>,
    answered: bool,
    /// Adversary-run coordinators do not announce themselves.
    silent_init: bool,
    silent_verify: bool,
}

struct World {
    n: usize,
    cfg: SimConfig,
    users: UserScript,
    eps: Vec<Endpoint>,
    cards: Vec<ContactCard>,
    channel: AcousticChannel,
    adversary: Adversary,
    inbox: BTreeMap<u64, Vec<(usize, WireMessage)>>,
    decode_due: BTreeMap<u64, Vec<usize>>,
    injections_due: BTreeMap<u64, Vec<(u64, OobFrame, f32)>>,
    heard_init: Option<NetworkInit>,
    verify_played: bool,
    user_rng: ChaCha20Rng,
    agent_rng: ChaCha20Rng,
    transcript: Transcript,
    oob: OobStats,
    tick: u64,
}

fn phase_of(ep: &Endpoint) -> Phase {
    ep.state.phase
}

impl World {
    fn record(
        &mut self,
        e: usize,
        dir: Direction,
        ch: Channel,
        kind: String,
        bytes: &[u8],
        before: Phase,
        after: Phase,
    ) {
        if !self.cfg.record_transcript {
            return;
        }
        let seq = self.transcript.records.len() as u64;
        self.transcript.records.push(TranscriptRecord {
            seq,
            tick: self.tick,
            endpoint: e,
            honest: self.eps[e].honest,
            direction: dir,
            channel: ch,
            kind,
            bytes: hex::encode(bytes),
            phase_before: before,
            phase_after: after,
        });
    }

    fn deliver(&mut self, e: usize, event: Event) {
        let before = phase_of(&self.eps[e]);
        if self.eps[e].state.is_terminal() {
            return;
        }
        let log = match &event {
            Event::InBand(m) => Some((Channel::Inband, m.kind.name().to_string(), m.to_bytes())),
            Event::Oob(OobEvent::Frame(f)) => {
                Some((Channel::Oob, format!("{:?}", f.kind), f.to_bytes()))
            }
            Event::Oob(OobEvent::Verdict(v)) => {
                Some((Channel::Oob, format!("Verdict:{v:?}"), Vec::new()))
            }
            Event::UserConfirm(b) => Some((
                Channel::User,
                if *b { "Confirm" } else { "Reject" }.into(),
                Vec::new(),
            )),
            Event::Tick => None,
        };
        let actions = self.eps[e].state.handle(event);
        let after = phase_of(&self.eps[e]);
        match log {
            Some((ch, kind, bytes)) => {
                self.record(e, Direction::In, ch, kind, &bytes, before, after)
            }
            None if before != after => self.record(
                e,
                Direction::In,
                Channel::Local,
                "Tick".into(),
                &[],
                before,
                after,
            ),
            None => {}
        }
        for a in actions {
            self.act(e, a, before, after);
        }
    }

    fn route(&self, from: usize, dest: Destination) -> Vec<usize> {
        let net = self.eps[from].network;
        let same = |j: usize| j != from && self.eps[j].network == net;
        (0..self.eps.len())
            .filter(|&j| same(j))
            .filter(|&j| match dest {
                Destination::Broadcast => true,
                Destination::Peer(id) => self.eps[j].state.self_id == id,
                Destination::Coordinator => self.eps[j].state.role == Role::Coordinator,
            })
            .collect()
    }

    fn act(&mut self, e: usize, action: Action, before: Phase, after: Phase) {
        match action {
            Action::SendInBand { msg, dest } => {
                self.record(
                    e,
                    Direction::Out,
                    Channel::Inband,
                    msg.kind.name().into(),
                    &msg.to_bytes(),
                    before,
                    after,
                );
                self.observe_inband(e, &msg);
                for to in self.route(e, dest) {
                    for (at, m) in self.adversary.intercept(self.tick, e, to, self.n, &msg) {
                        self.inbox
                            .entry(at.max(self.tick + 1))
                            .or_default()
                            .push((to, m));
                    }
                }
            }
            Action::EmitOob(frame) => {
                let suppressed = match frame.kind {
                    FrameKind::NetworkInit => self.eps[e].silent_init,
                    FrameKind::VerifyHash => self.eps[e].silent_verify,
                };
                if suppressed {
                    return;
                }
                self.record(
                    e,
                    Direction::Out,
                    Channel::Oob,
                    format!("{:?}", frame.kind),
                    &frame.to_bytes(),
                    before,
                    after,
                );
                self.play(
                    self.tick * SAMPLES_PER_TICK,
                    frame.clone(),
                    1.0,
                    Source::Endpoint(e),
                );
                if self.eps[e].honest && self.eps[e].state.role == Role::Coordinator {
                    self.on_honest_coordinator_frame(&frame);
                }
            }
            Action::StartListenWindow(p) => {
                self.record(
                    e,
                    Direction::Out,
                    Channel::Local,
                    "StartListen".into(),
                    &[],
                    before,
                    after,
                );
                self.eps[e].listen = Some((self.tick, p));
            }
            Action::PromptUser => {
                self.record(
                    e,
                    Direction::Out,
                    Channel::User,
                    "Prompt".into(),
                    &[],
                    before,
                    after,
                );
                self.eps[e].prompted_at = Some(self.tick);
            }
            Action::ReportOutcome(o) => {
                self.record(
                    e,
                    Direction::Out,
                    Channel::Local,
                    format!("Outcome:{:?}", o.verdict),
                    &[],
                    before,
                    after,
                );
            }
        }
    }

    fn play(&mut self, start: u64, frame: OobFrame, gain: f32, source: Source) {
        let end = self.channel.emit(start, frame.clone(), gain, source).end();
        let idx = self.channel.emissions().len() - 1;
        self.oob.frames_played += 1;
        if source == Source::Adversary {
            self.oob.frames_injected += 1;
        }
        let due = end.div_ceil(SAMPLES_PER_TICK).max(self.tick + 1);
        self.decode_due.entry(due).or_default().push(idx);
        let from_agent = matches!(source, Source::Endpoint(s) if !self.eps[s].honest);
        if self.adversary.policy.eavesdrops() && !from_agent {
            if let Some(init) = NetworkInit::from_frame(&frame) {
                self.heard_init.get_or_insert(init);
            }
        }
    }

    fn on_honest_coordinator_frame(&mut self, frame: &OobFrame) {
        match frame.kind {
            FrameKind::NetworkInit => {
                let init = NetworkInit::from_frame(frame).expect("coordinator announces a network");
                if self.adversary.policy.eavesdrops() {
                    self.heard_init.get_or_insert(init);
                }
                let gitm = self.adversary.policy.agents.iter().find_map(|a| match a {
                    AgentSpec::GroupInTheMiddle { shadow_hash } => Some(*shadow_hash),
                    _ => None,
                });
                if let (Some(shadow_hash), false) = (gitm, self.eps.iter().any(|ep| !ep.honest)) {
                    self.spawn_gitm(init, shadow_hash, frame);
                }
            }
            FrameKind::VerifyHash => {
                if self.verify_played {
                    return;
                }
                self.verify_played = true;
                let start = self.tick * SAMPLES_PER_TICK;
                let rules = self.adversary.policy.oob_rules.clone();
                for r in rules {
                    if let OobRule::Inject {
                        frame: spec,
                        at: InjectAt::Verify { lo, hi },
                        gain,
                    } = r
                    {
                        let off = self.adversary.rng.gen_range(lo..=hi);
                        let at = (start as i64 + off).max(0) as u64;
                        let f = self.forge_frame(&spec);
                        self.schedule_injection(at, f, gain);
                    }
                }
            }
        }
    }

    fn schedule_injection(&mut self, at: u64, frame: OobFrame, gain: f32) {
        let tick = (at / SAMPLES_PER_TICK).max(self.tick);
        if tick == self.tick {
            self.play(at, frame, gain, Source::Adversary);
        } else {
            self.injections_due
                .entry(tick)
                .or_default()
                .push((at, frame, gain));
        }
    }

    fn forge_frame(&mut self, spec: &FrameSpec) -> OobFrame {
        let rng = &mut self.adversary.rng;
        match spec {
            FrameSpec::VerifyRandom => {
                let session_id = match self.heard_init {
                    Some(init) if self.adversary.policy.eavesdrops() => init.session_id,
                    _ => rng.gen(),
                };
                VerifyHashPayload {
                    truncation: rng.gen(),
                    session_id,
                }
                .to_frame()
            }
            FrameSpec::InitRandom => NetworkInit {
                network_id: rng.gen(),
                network_key: rng.gen(),
                session_id: rng.gen(),
            }
            .to_frame(),
            FrameSpec::Random => {
                let kind = if rng.gen() {
                    FrameKind::VerifyHash
                } else {
                    FrameKind::NetworkInit
                };
                let len = rng.gen_range(0..=MAX_PAYLOAD);
                OobFrame::new(kind, (0..len).map(|_| rng.gen()).collect())
                    .expect("length within limit")
            }
            FrameSpec::Bytes(b) => {
                let kind = match b.first() {
                    Some(2) => FrameKind::VerifyHash,
                    _ => FrameKind::NetworkInit,
                };
                let payload: Vec<u8> = b.iter().skip(2).take(MAX_PAYLOAD).copied().collect();
                OobFrame::new(kind, payload).expect("length within limit")
            }
        }
    }

    fn add_agent(
        &mut self,
        role: Role,
        card: ContactCard,
        network: usize,
        options: SessionOptions,
    ) -> usize {
        let state = new_session_with(role, self.n, card, &mut self.agent_rng, options)
            .expect("valid agent identity");
        self.eps.push(Endpoint {
            state,
            honest: false,
            network,
            listen: None,
            prompted_at: None,
            blind: None,
            answered: false,
            silent_init: role == Role::Coordinator,
            silent_verify: false,
        });
        self.eps.len() - 1
    }

    fn impostor_card(&mut self, of: usize) -> ContactCard {
        let mut c = self.cards[of].clone();
        c.public_key = gen_keypair(&mut self.agent_rng).public_key;
        c
    }

    /// Splits the group: the real coordinator keeps members `1..=k` and gets
    /// impostors for the rest, who are routed to a shadow coordinator that
    /// impersonates everyone on the first side.
    fn spawn_gitm(&mut self, init: NetworkInit, shadow_hash: bool, frame: &OobFrame) {
        let k = (self.n - 1) / 2;
        let side_b: Vec<usize> = (k + 1..self.n).collect();
        for &b in &side_b {
            self.eps[b].network = 1;
        }
        let options = |cfg: EngineConfig| SessionOptions {
            config: cfg,
            ..Default::default()
        };
        let cfg = self.cfg.engine;
        let shadow_card = self.impostor_card(0);
        let shadow = self.add_agent(
            Role::Coordinator,
            shadow_card,
            1,
            SessionOptions {
                config: cfg,
                network: Some(init),
                participant_id: None,
            },
        );
        self.eps[shadow].silent_verify = !shadow_hash;
        let mut fakes = Vec::new();
        for &b in &side_b {
            let c = self.impostor_card(b);
            fakes.push(self.add_agent(Role::Participant, c, 0, options(cfg)));
        }
        for a in 1..=k {
            let c = self.impostor_card(a);
            fakes.push(self.add_agent(Role::Participant, c, 1, options(cfg)));
        }
        for f in fakes {
            self.deliver(f, Event::Oob(OobEvent::Frame(frame.clone())));
        }
    }

    fn observe_inband(&mut self, from: usize, msg: &WireMessage) {
        let sybil = self
            .adversary
            .policy
            .agents
            .contains(&AgentSpec::SybilDuplicateId);
        let last = self.n - 1;
        if sybil
            && from == last
            && msg.kind == crate::protocol::MessageKind::Join
            && self.eps.len() == self.n
        {
            let Some(init) = self.heard_init else {
                return;
            };
            let card = self.impostor_card(last);
            let cfg = self.cfg.engine;
            let agent = self.add_agent(
                Role::Participant,
                card,
                0,
                SessionOptions {
                    config: cfg,
                    network: None,
                    participant_id: Some(msg.sender),
                },
            );
            self.deliver(agent, Event::Oob(OobEvent::Frame(init.to_frame())));
        }
    }

    fn group_view(&self) -> GroupView {
        let honest = self.eps.iter().filter(|e| e.honest);
        let mut v = GroupView {
            all_checkmarks: true,
            any_flag: false,
            any_failed: false,
        };
        for ep in honest {
            v.all_checkmarks &= ep.state.shows_checkmark();
            v.any_flag |= ep.state.flags().any();
            v.any_failed |= ep.state.phase == Phase::Aborted;
        }
        v
    }

    fn user_decisions(&mut self) -> Vec<(usize, bool)> {
        let view = self.group_view();
        let mut out = Vec::new();
        for e in 0..self.eps.len() {
            let ep = &self.eps[e];
            let Some(p) = ep.prompted_at else { continue };
            if ep.answered
                || ep.state.phase != Phase::AwaitUserConfirm
                || self.tick < p + REACTION_TICKS
            {
                continue;
            }
            if !ep.honest {
                out.push((e, true));
                continue;
            }
            if self.users == UserScript::RejectOne && e == self.n - 1 {
                out.push((e, false));
                continue;
            }
            if let UserScript::Rushing { p: prob } = self.users {
                let blind = match self.eps[e].blind {
                    Some(b) => b,
                    None => {
                        let b = self.user_rng.gen_bool(prob);
                        self.eps[e].blind = Some(b);
                        b
                    }
                };
                if blind {
                    out.push((e, true));
                    continue;
                }
            }
            match diligent(view, self.tick - p) {
                Decision::Confirm => out.push((e, true)),
                Decision::Reject => out.push((e, false)),
                Decision::Wait => {}
            }
        }
        out
    }

    fn step(&mut self) {
        let t = self.tick;
        for (at, f, g) in self.injections_due.remove(&t).unwrap_or_default() {
            self.play(at, f, g, Source::Adversary);
        }
        for e in 0..self.eps.len() {
            let due = matches!(self.eps[e].listen, Some((s, _)) if s + self.cfg.listen_ticks == t);
            if due {
                let (s, p) = self.eps[e].listen.take().unwrap();
                let v = self.channel.listen(
                    e,
                    s * SAMPLES_PER_TICK,
                    self.cfg.listen_ticks * SAMPLES_PER_TICK,
                    &p,
                );
                if self.eps[e].honest {
                    *self.oob.verdicts.entry(format!("{v:?}")).or_default() += 1;
                }
                self.deliver(e, Event::Oob(OobEvent::Verdict(v)));
            }
        }
        for (to, msg) in self.inbox.remove(&t).unwrap_or_default() {
            self.deliver(to, Event::InBand(msg));
        }
        if let Some(due) = self.decode_due.remove(&t) {
            self.ambient_decode(&due);
        }
        for (e, yes) in self.user_decisions() {
            self.eps[e].answered = true;
            self.deliver(e, Event::UserConfirm(yes));
        }
        for e in 0..self.eps.len() {
            self.deliver(e, Event::Tick);
        }
    }

    fn ambient_decode(&mut self, due: &[usize]) {
        let waiting: Vec<usize> = (0..self.n)
            .filter(|&e| {
                self.eps[e].state.role == Role::Participant
                    && self.eps[e].state.phase == Phase::Ready
            })
            .collect();
        if waiting.is_empty() {
            return;
        }
        let margin = default_symbol_len();
        for &idx in due {
            let em = &self.channel.emissions()[idx];
            let start = em.start.saturating_sub(margin);
            let len = em.end() + margin - start;
            for &e in &waiting {
                if self.eps[e].state.phase != Phase::Ready {
                    continue;
                }
                self.oob.decodes_attempted += 1;
                let frames = self.channel.decode_frames(e, start, len);
                if !frames.is_empty() {
                    self.oob.decodes_ok += 1;
                }
                for f in frames {
                    self.deliver(e, Event::Oob(OobEvent::Frame(f)));
                }
            }
        }
    }
}

fn default_symbol_len() -> u64 {
    crate::modem::default_modem().profile().symbol_len as u64
}

pub fn run_session(
    n: usize,
    policy: &AdversaryPolicy,
    users: UserScript,
    seed: u64,
) -> Result<SessionReport, SimError> {
    run_session_with(n, policy, users, seed, &SimConfig::default())
}

pub fn run_session_with(
    n: usize,
    policy: &AdversaryPolicy,
    users: UserScript,
    seed: u64,
    cfg: &SimConfig,
) -> Result<SessionReport, SimError> {
    if n < 2 {
        return Err(SimError::GroupTooSmall(n));
    }
    let mut id_rng = ChaCha20Rng::seed_from_u64(sub_seed(seed, "devices"));
    let mut eps = Vec::with_capacity(n);
    let mut cards = Vec::with_capacity(n);
    for i in 0..n {
        let card = ContactCard::new(
            format!("member-{i}"),
            tagged_hash(b"pairsonic/v1/sim-avatar", &[&(i as u64).to_be_bytes()]),
            format!("simulated device {i}"),
            gen_keypair(&mut id_rng).public_key,
        );
        let role = if i == 0 {
            Role::Coordinator
        } else {
            Role::Participant
        };
        let options = SessionOptions {
            config: cfg.engine,
            ..Default::default()
        };
        let state = new_session_with(
            role,
            if i == 0 { n } else { 0 },
            card.clone(),
            &mut id_rng,
            options,
        )
        .expect("simulated identities are valid");
        cards.push(card);
        eps.push(Endpoint {
            state,
            honest: true,
            network: 0,
            listen: None,
            prompted_at: None,
            blind: None,
            answered: false,
            silent_init: false,
            silent_verify: false,
        });
    }
    let proximity = (0..n).map(|i| !cfg.out_of_range.contains(&i)).collect();
    let mut world = World {
        n,
        cfg: cfg.clone(),
        users,
        eps,
        cards,
        channel: AcousticChannel::new(cfg.noise, sub_seed(seed, "noise"), proximity),
        adversary: Adversary::new(policy.clone(), sub_seed(seed, "adversary")),
        inbox: BTreeMap::new(),
        decode_due: BTreeMap::new(),
        injections_due: BTreeMap::new(),
        heard_init: None,
        verify_played: false,
        user_rng: ChaCha20Rng::seed_from_u64(sub_seed(seed, "users")),
        agent_rng: ChaCha20Rng::seed_from_u64(sub_seed(seed, "agents")),
        transcript: Transcript::default(),
        oob: OobStats::default(),
        tick: 0,
    };
    for r in policy.oob_rules.clone() {
        if let OobRule::Inject {
            frame,
            at: InjectAt::Tick(t),
            gain,
        } = r
        {
            let f = world.forge_frame(&frame);
            world
                .injections_due
                .entry(t)
                .or_default()
                .push((t * SAMPLES_PER_TICK, f, gain));
        }
    }
    while world.tick < cfg.max_ticks && !world.eps[..n].iter().all(|e| e.state.is_terminal()) {
        world.step();
        world.tick += 1;
    }
    let honest_cards = world.cards.clone();
    let results = (0..n)
        .map(|i| {
            let s = &world.eps[i].state;
            let outcome = finalize(s).unwrap_or(Outcome {
                verdict: Verdict::AbortedTimeout,
                contacts: Vec::new(),
                flags: s.flags(),
            });
            let false_accept = outcome.verdict == Verdict::ContactsImported && {
                let mut got = outcome.contacts.clone();
                let mut want: Vec<ContactCard> = honest_cards
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, c)| c.clone())
                    .collect();
                got.sort_by_key(|a| a.public_key);
                want.sort_by_key(|a| a.public_key);
                got != want
            };
            ParticipantResult {
                endpoint: i,
                role: s.role,
                id: s.self_id,
                outcome,
                false_accept,
            }
        })
        .collect();
    Ok(SessionReport {
        n,
        seed,
        policy: policy.name.clone(),
        users,
        noise: cfg.noise,
        results,
        ticks: world.tick,
        interventions: world.adversary.interventions,
        oob: world.oob,
        transcript: world.transcript,
    })
}
