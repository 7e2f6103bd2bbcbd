//! Adversary policies and their text format.
//!
//! One directive per line; `#` starts a comment.
//!
//! ```text
//! seed 7
//! inband kind=Commit sender=1 -> replace_key
//! inband kind=Join sender=last nth=1 -> delay ticks=4
//! inband kind=SuccessNonce tick=40..60 to=2 -> drop
//! inband kind=Disperse -> modify offset=100 xor=01
//! inband kind=GdhUp -> inject body=random
//! inband kind=Commit -> replay after=3
//! oob eavesdrop
//! oob inject frame=verify_random at=verify+-4096..49152 gain=0.8
//! oob inject frame=hex:0100... at=tick:12
//! agent sybil_duplicate_id
//! agent group_in_the_middle shadow_hash=false
//! ```
//!
//! In-band rules are checked in order against every delivery (one message to
//! one endpoint); the first match decides. Unmatched deliveries pass.
//! `sender`/`to` are endpoint indices (0 is the coordinator), or `last`.
//! `nth=k` fires only on the k-th delivery the rest of the rule matches.
//! Acoustic rules can add frames to the air but never remove one.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::protocol::MessageKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EndpointSel {
    Index(usize),
    /// Highest honest index, `n - 1`.
    Last,
}

impl EndpointSel {
    pub fn resolve(self, n: usize) -> usize {
        match self {
            Self::Index(i) => i,
            Self::Last => n.saturating_sub(1),
        }
    }

    fn parse(s: &str) -> Result<Self, String> {
        match s {
            "last" => Ok(Self::Last),
            "coordinator" => Ok(Self::Index(0)),
            _ => s
                .parse()
                .map(Self::Index)
                .map_err(|_| format!("bad endpoint `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleMatch {
    pub kind: Option<MessageKind>,
    pub sender: Option<EndpointSel>,
    pub to: Option<EndpointSel>,
    /// Inclusive tick range.
    pub ticks: Option<(u64, u64)>,
    pub nth: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum InjectBody {
    /// Same length as the matched body, random bytes.
    Random,
    Bytes(Vec<u8>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum InbandAction {
    Pass,
    Drop,
    /// XOR one body byte (offset taken modulo the body length).
    Modify {
        offset: usize,
        xor: u8,
    },
    /// Deliver the original plus a forged copy with a different body.
    Inject(InjectBody),
    /// Substitute the adversary's DH value (and, in a commitment, a card
    /// sealed under a key of its own choosing).
    ReplaceKey,
    /// Deliver now and again after the given ticks.
    Replay {
        after: u64,
    },
    Delay {
        ticks: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InbandRule {
    pub matcher: RuleMatch,
    pub action: InbandAction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum FrameSpec {
    /// Verification frame with random digest; carries the eavesdropped
    /// session id when the adversary listens, a random one otherwise.
    VerifyRandom,
    /// Network announcement for a network of the adversary's own.
    InitRandom,
    /// Random kind, random payload of random length.
    Random,
    /// Raw frame bytes: kind, length, payload (the CRC is computed).
    Bytes(Vec<u8>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InjectAt {
    Tick(u64),
    /// Sample offset range relative to the coordinator's verification frame.
    Verify {
        lo: i64,
        hi: i64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum OobRule {
    Eavesdrop,
    Inject {
        frame: FrameSpec,
        at: InjectAt,
        gain: f32,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AgentSpec {
    /// A device that claims the last member's id and name.
    SybilDuplicateId,
    /// A shadow coordinator plus impostors splitting the group in two.
    GroupInTheMiddle { shadow_hash: bool },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AdversaryPolicy {
    pub name: String,
    pub inband_rules: Vec<InbandRule>,
    pub oob_rules: Vec<OobRule>,
    pub agents: Vec<AgentSpec>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {msg}")]
pub struct PolicyError {
    pub line: usize,
    pub msg: String,
}

fn kv(token: &str) -> Result<(&str, &str), String> {
    token
        .split_once('=')
        .ok_or_else(|| format!("expected key=value, got `{token}`"))
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, String> {
    v.parse().map_err(|_| format!("bad value for {key}: `{v}`"))
}

fn range(key: &str, v: &str) -> Result<(i64, i64), String> {
    match v.split_once("..") {
        Some((a, b)) => {
            let (a, b) = (num(key, a)?, num(key, b)?);
            if a > b {
                return Err(format!("empty range for {key}: `{v}`"));
            }
            Ok((a, b))
        }
        None => {
            let x = num(key, v)?;
            Ok((x, x))
        }
    }
}

fn parse_inband(rest: &str) -> Result<InbandRule, String> {
    let (lhs, rhs) = rest
        .split_once("->")
        .ok_or("in-band rule needs `-> action`")?;
    let mut m = RuleMatch::default();
    for tok in lhs.split_whitespace() {
        let (k, v) = kv(tok)?;
        match k {
            "kind" => {
                m.kind = Some(MessageKind::from_name(v).ok_or(format!("unknown kind `{v}`"))?)
            }
            "sender" => m.sender = Some(EndpointSel::parse(v)?),
            "to" => m.to = Some(EndpointSel::parse(v)?),
            "tick" => {
                let (a, b) = range(k, v)?;
                if a < 0 {
                    return Err("ticks are non-negative".into());
                }
                m.ticks = Some((a as u64, b as u64));
            }
            "nth" => m.nth = Some(num::<usize>(k, v)?.max(1)),
            _ => return Err(format!("unknown match field `{k}`")),
        }
    }
    let mut toks = rhs.split_whitespace();
    let name = toks.next().ok_or("missing action")?;
    let args: Vec<(&str, &str)> = toks.map(kv).collect::<Result<_, _>>()?;
    let arg = |key: &str| args.iter().find(|(k, _)| *k == key).map(|(_, v)| *v);
    let need = |key: &str| arg(key).ok_or(format!("`{name}` needs {key}="));
    let action = match name {
        "pass" => InbandAction::Pass,
        "drop" => InbandAction::Drop,
        "replace_key" => InbandAction::ReplaceKey,
        "modify" => InbandAction::Modify {
            offset: num("offset", need("offset")?)?,
            xor: u8::from_str_radix(need("xor")?, 16).map_err(|_| "xor takes one hex byte")?,
        },
        "inject" => match need("body")? {
            "random" => InbandAction::Inject(InjectBody::Random),
            h => InbandAction::Inject(InjectBody::Bytes(
                hex::decode(h).map_err(|_| "body is not hex")?,
            )),
        },
        "replay" => InbandAction::Replay {
            after: num::<u64>("after", need("after")?)?.max(1),
        },
        "delay" => InbandAction::Delay {
            ticks: num("ticks", need("ticks")?)?,
        },
        _ => return Err(format!("unknown action `{name}`")),
    };
    Ok(InbandRule { matcher: m, action })
}

fn parse_oob(rest: &str) -> Result<OobRule, String> {
    let mut toks = rest.split_whitespace();
    match toks.next() {
        Some("eavesdrop") => Ok(OobRule::Eavesdrop),
        Some("inject") => {
            let (mut frame, mut at, mut gain) = (None, None, 1.0f32);
            for tok in toks {
                let (k, v) = kv(tok)?;
                match k {
                    "frame" => {
                        frame = Some(match v {
                            "verify_random" => FrameSpec::VerifyRandom,
                            "init_random" => FrameSpec::InitRandom,
                            "random" => FrameSpec::Random,
                            _ => FrameSpec::Bytes(
                                hex::decode(
                                    v.strip_prefix("hex:")
                                        .ok_or(format!("unknown frame `{v}`"))?,
                                )
                                .map_err(|_| "frame bytes are not hex")?,
                            ),
                        })
                    }
                    "at" => {
                        at = Some(if let Some(t) = v.strip_prefix("tick:") {
                            InjectAt::Tick(num("at", t)?)
                        } else if let Some(off) = v.strip_prefix("verify") {
                            let (lo, hi) = if off.is_empty() {
                                (0, 0)
                            } else {
                                let off = off.strip_prefix('+').unwrap_or(off);
                                range("at", off)?
                            };
                            InjectAt::Verify { lo, hi }
                        } else {
                            return Err(format!("bad injection time `{v}`"));
                        })
                    }
                    "gain" => gain = num("gain", v)?,
                    _ => return Err(format!("unknown inject field `{k}`")),
                }
            }
            Ok(OobRule::Inject {
                frame: frame.ok_or("inject needs frame=")?,
                at: at.ok_or("inject needs at=")?,
                gain,
            })
        }
        _ => Err("expected `oob eavesdrop` or `oob inject ...`".into()),
    }
}

fn parse_agent(rest: &str) -> Result<AgentSpec, String> {
    let mut toks = rest.split_whitespace();
    match toks.next() {
        Some("sybil_duplicate_id") => Ok(AgentSpec::SybilDuplicateId),
        Some("group_in_the_middle") => {
            let mut shadow_hash = true;
            for tok in toks {
                match kv(tok)? {
                    ("shadow_hash", v) => shadow_hash = num("shadow_hash", v)?,
                    (k, _) => return Err(format!("unknown agent field `{k}`")),
                }
            }
            Ok(AgentSpec::GroupInTheMiddle { shadow_hash })
        }
        Some(other) => Err(format!("unknown agent `{other}`")),
        None => Err("missing agent name".into()),
    }
}

impl AdversaryPolicy {
    pub fn parse(name: &str, text: &str) -> Result<Self, PolicyError> {
        let mut p = AdversaryPolicy {
            name: name.to_string(),
            ..Default::default()
        };
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (head, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
            let res = match head {
                "seed" => num::<u64>("seed", rest.trim()).map(|s| p.seed = s),
                "inband" => parse_inband(rest).map(|r| p.inband_rules.push(r)),
                "oob" => parse_oob(rest).map(|r| p.oob_rules.push(r)),
                "agent" => parse_agent(rest).map(|a| p.agents.push(a)),
                _ => Err(format!("unknown directive `{head}`")),
            };
            res.map_err(|msg| PolicyError { line: i + 1, msg })?;
        }
        Ok(p)
    }

    pub fn is_passive(&self) -> bool {
        self.agents.is_empty()
            && self
                .inband_rules
                .iter()
                .all(|r| r.action == InbandAction::Pass)
            && self.oob_rules.iter().all(|r| *r == OobRule::Eavesdrop)
    }

    pub fn eavesdrops(&self) -> bool {
        self.oob_rules.contains(&OobRule::Eavesdrop) || !self.agents.is_empty()
    }
}

impl fmt::Display for AdversaryPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

const PRESETS: &[(&str, &str)] = &[
    ("none", ""),
    (
        "mitm_key_substitution",
        "inband kind=Commit sender=1 -> replace_key",
    ),
    ("message_drop", "inband kind=Commit sender=1 -> drop"),
    (
        "replay",
        "inband kind=Commit -> replay after=2\n\
         inband kind=Roster -> replay after=6\n\
         inband kind=SuccessNonce -> replay after=1",
    ),
    (
        "sybil_duplicate_id",
        "inband kind=Join sender=last -> delay ticks=4\n\
         agent sybil_duplicate_id",
    ),
    ("group_in_the_middle", "agent group_in_the_middle"),
    (
        "oob_inject",
        "oob eavesdrop\n\
         oob inject frame=verify_random at=verify+-4096..49152",
    ),
];

/// Names of the built-in presets.
pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|(n, _)| *n).collect()
}

/// Every built-in preset, parsed from its text form.
pub fn attack_catalog() -> Vec<AdversaryPolicy> {
    PRESETS
        .iter()
        .map(|(name, text)| AdversaryPolicy::parse(name, text).expect("built-in preset parses"))
        .collect()
}

pub fn preset(name: &str) -> Option<AdversaryPolicy> {
    attack_catalog().into_iter().find(|p| p.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_has_every_preset() {
        let names = preset_names();
        for n in [
            "none",
            "mitm_key_substitution",
            "message_drop",
            "replay",
            "sybil_duplicate_id",
            "group_in_the_middle",
            "oob_inject",
        ] {
            assert!(names.contains(&n), "{n}");
        }
        assert!(preset("none").unwrap().is_passive());
        assert!(preset("nonexistent").is_none());
    }

    #[test]
    fn mitm_preset_replaces_a_commit_key() {
        let p = preset("mitm_key_substitution").unwrap();
        assert_eq!(
            p.inband_rules,
            vec![InbandRule {
                matcher: RuleMatch {
                    kind: Some(MessageKind::Commit),
                    sender: Some(EndpointSel::Index(1)),
                    ..Default::default()
                },
                action: InbandAction::ReplaceKey,
            }]
        );
    }

    #[test]
    fn full_grammar_parses() {
        let text = "seed 7 # trailing comment\n\
            inband kind=join sender=last to=0 tick=3..9 nth=2 -> delay ticks=4\n\
            inband -> modify offset=5 xor=ff\n\
            inband kind=GdhUp -> inject body=00ff\n\
            oob inject frame=hex:0200 at=tick:5 gain=0.5\n\
            oob inject frame=random at=verify-100..100\n\
            oob inject frame=init_random at=verify\n\
            agent group_in_the_middle shadow_hash=false\n";
        let p = AdversaryPolicy::parse("t", text).unwrap();
        assert_eq!(p.seed, 7);
        assert_eq!(p.inband_rules.len(), 3);
        assert_eq!(p.inband_rules[0].matcher.ticks, Some((3, 9)));
        assert_eq!(
            p.inband_rules[1].action,
            InbandAction::Modify {
                offset: 5,
                xor: 0xff
            }
        );
        assert_eq!(
            p.oob_rules[1],
            OobRule::Inject {
                frame: FrameSpec::Random,
                at: InjectAt::Verify { lo: -100, hi: 100 },
                gain: 1.0
            }
        );
        assert_eq!(
            p.oob_rules[2],
            OobRule::Inject {
                frame: FrameSpec::InitRandom,
                at: InjectAt::Verify { lo: 0, hi: 0 },
                gain: 1.0
            }
        );
        assert_eq!(
            p.agents,
            vec![AgentSpec::GroupInTheMiddle { shadow_hash: false }]
        );
    }

    #[test]
    fn errors_name_the_line() {
        let e = AdversaryPolicy::parse("t", "seed 1\ninband kind=Nope -> drop").unwrap_err();
        assert_eq!(e.line, 2);
        assert!(AdversaryPolicy::parse("t", "inband kind=Join").is_err());
        assert!(AdversaryPolicy::parse("t", "inband -> explode").is_err());
        assert!(AdversaryPolicy::parse("t", "oob inject at=tick:3").is_err());
        assert!(AdversaryPolicy::parse("t", "warp 9").is_err());
        assert!(AdversaryPolicy::parse("t", "inband tick=9..3 -> drop").is_err());
    }
}
