//! In-band interception according to a policy.

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

use super::policy::{AdversaryPolicy, InbandAction, InjectBody};
use crate::crypto::{gen_keypair, seal_payload, CommitmentBundle, ContactCard, GroupKey, KeyPair};
use crate::protocol::{wire, MessageKind, WireMessage};

pub struct Adversary {
    pub policy: AdversaryPolicy,
    pub rng: ChaCha20Rng,
    counters: Vec<usize>,
    key: KeyPair,
    card: ContactCard,
    /// Deliveries the adversary changed, dropped, delayed or added.
    pub interventions: usize,
}

impl Adversary {
    pub fn new(policy: AdversaryPolicy, seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed ^ policy.seed.rotate_left(29));
        let key = gen_keypair(&mut rng);
        let card = ContactCard::new("impostor", [0xad; 32], "", gen_keypair(&mut rng).public_key);
        Self {
            counters: vec![0; policy.inband_rules.len()],
            policy,
            rng,
            key,
            card,
            interventions: 0,
        }
    }

    fn substitute(&mut self, msg: &mut WireMessage) {
        match msg.kind {
            MessageKind::Commit => {
                let Ok(mut b) = CommitmentBundle::from_canonical_bytes(&msg.body) else {
                    return;
                };
                let mut k = [0u8; 32];
                self.rng.fill_bytes(&mut k);
                // Without the group key the best it can do is a key of its own.
                let key = GroupKey {
                    key: k,
                    transcript_binding: [0; 32],
                };
                b.dh_public = self.key.public_key;
                if let Ok(ct) = seal_payload(&self.card, &key, &b.participant_id) {
                    b.payload_ciphertext = ct;
                }
                b.reseal();
                msg.body = b.to_canonical_bytes();
            }
            MessageKind::Join => {
                if let Some((nk, _)) = wire::parse_join(&msg.body) {
                    msg.body = wire::join_body(&nk, &self.key.public_key);
                }
            }
            _ => {}
        }
    }

    /// Applies the first matching rule to one delivery of `msg` from endpoint
    /// `from` to endpoint `to`, sent at `tick`. Returns `(delivery tick,
    /// message)` pairs.
    pub fn intercept(
        &mut self,
        tick: u64,
        from: usize,
        to: usize,
        n: usize,
        msg: &WireMessage,
    ) -> Vec<(u64, WireMessage)> {
        let next = tick + 1;
        let mut chosen = None;
        for (i, rule) in self.policy.inband_rules.iter().enumerate() {
            let m = &rule.matcher;
            let hit = m.kind.is_none_or(|k| k == msg.kind)
                && m.sender.is_none_or(|s| s.resolve(n) == from)
                && m.to.is_none_or(|s| s.resolve(n) == to)
                && m.ticks.is_none_or(|(a, b)| (a..=b).contains(&tick));
            if !hit {
                continue;
            }
            self.counters[i] += 1;
            if m.nth.is_some_and(|k| k != self.counters[i]) {
                continue;
            }
            chosen = Some(rule.action.clone());
            break;
        }
        let Some(action) = chosen else {
            return vec![(next, msg.clone())];
        };
        if action != InbandAction::Pass {
            self.interventions += 1;
        }
        match action {
            InbandAction::Pass => vec![(next, msg.clone())],
            InbandAction::Drop => vec![],
            InbandAction::Modify { offset, xor } => {
                let mut m = msg.clone();
                if !m.body.is_empty() {
                    let i = offset % m.body.len();
                    m.body[i] ^= xor;
                }
                vec![(next, m)]
            }
            InbandAction::Inject(body) => {
                let mut forged = msg.clone();
                forged.body = match body {
                    InjectBody::Random => (0..msg.body.len()).map(|_| self.rng.gen()).collect(),
                    InjectBody::Bytes(b) => b,
                };
                vec![(next, msg.clone()), (next, forged)]
            }
            InbandAction::ReplaceKey => {
                let mut m = msg.clone();
                self.substitute(&mut m);
                vec![(next, m)]
            }
            InbandAction::Replay { after } => {
                vec![(next, msg.clone()), (next + after, msg.clone())]
            }
            InbandAction::Delay { ticks } => vec![(next + ticks, msg.clone())],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{commit, verify_commitment, NoncePair, ParticipantId};
    use crate::sim::policy::preset;

    fn msg(kind: MessageKind, body: Vec<u8>) -> WireMessage {
        WireMessage::new(kind, [1; 16], ParticipantId([2; 16]), body)
    }

    #[test]
    fn pass_through_delivers_next_tick() {
        let mut a = Adversary::new(preset("none").unwrap(), 0);
        let m = msg(MessageKind::Join, vec![0; 40]);
        assert_eq!(a.intercept(5, 1, 0, 3, &m), vec![(6, m)]);
        assert_eq!(a.interventions, 0);
    }

    #[test]
    fn replace_key_keeps_commitment_well_formed() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let card = ContactCard::new("p1", [0; 32], "", [5; 32]);
        let key = GroupKey {
            key: [9; 32],
            transcript_binding: [0; 32],
        };
        let b = commit(
            &card,
            &NoncePair::generate(&mut rng),
            [3; 32],
            &key,
            ParticipantId([2; 16]),
        )
        .unwrap();
        let mut a = Adversary::new(preset("mitm_key_substitution").unwrap(), 0);
        let out = a.intercept(
            0,
            1,
            0,
            3,
            &msg(MessageKind::Commit, b.to_canonical_bytes()),
        );
        let forged = CommitmentBundle::from_canonical_bytes(&out[0].1.body).unwrap();
        assert!(verify_commitment(&forged));
        assert_ne!(forged.dh_public, b.dh_public);
        assert_eq!(forged.participant_id, b.participant_id);
        // Other senders are untouched.
        let m = msg(MessageKind::Commit, b.to_canonical_bytes());
        assert_eq!(a.intercept(0, 2, 0, 3, &m), vec![(1, m)]);
    }

    #[test]
    fn nth_and_delay() {
        let p = AdversaryPolicy::parse("t", "inband kind=Join nth=2 -> delay ticks=4").unwrap();
        let mut a = Adversary::new(p, 0);
        let m = msg(MessageKind::Join, vec![0; 40]);
        assert_eq!(a.intercept(0, 1, 0, 3, &m)[0].0, 1);
        assert_eq!(a.intercept(0, 2, 0, 3, &m)[0].0, 5);
        assert_eq!(a.intercept(0, 3, 0, 3, &m)[0].0, 1);
    }

    #[test]
    fn replay_and_inject_duplicate() {
        let p = AdversaryPolicy::parse(
            "t",
            "inband kind=Roster -> replay after=3\ninband -> inject body=random",
        )
        .unwrap();
        let mut a = Adversary::new(p, 0);
        let r = a.intercept(2, 0, 1, 3, &msg(MessageKind::Roster, vec![1, 2]));
        assert_eq!(r.iter().map(|x| x.0).collect::<Vec<_>>(), vec![3, 6]);
        let i = a.intercept(2, 0, 1, 3, &msg(MessageKind::Commit, vec![1; 64]));
        assert_eq!(i.len(), 2);
        assert_ne!(i[0].1.body, i[1].1.body);
    }
}
