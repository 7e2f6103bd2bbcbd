//! Scripted humans.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Ticks a diligent user waits for every screen to show the checkmark.
pub const USER_PATIENCE_TICKS: u64 = 10;
/// Ticks between a prompt and the earliest button press.
pub const REACTION_TICKS: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "script", rename_all = "kebab-case")]
pub enum UserScript {
    /// Everyone confirms once every device in the group shows a checkmark
    /// and no device flags a duplicate; otherwise everyone rejects.
    ConfirmAll,
    /// As `ConfirmAll`, except the last participant always rejects.
    RejectOne,
    /// Each user presses confirm without looking with probability `p`, and
    /// behaves diligently otherwise.
    Rushing { p: f64 },
}

impl UserScript {
    /// `confirm-all`, `reject-one`, `rushing:<p>` or `rushing(<p>)`.
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "confirm-all" => Some(Self::ConfirmAll),
            "reject-one" => Some(Self::RejectOne),
            other => {
                let p = other
                    .strip_prefix("rushing:")
                    .or_else(|| other.strip_prefix("rushing(")?.strip_suffix(')'))?;
                let p: f64 = p.parse().ok()?;
                (0.0..=1.0).contains(&p).then_some(Self::Rushing { p })
            }
        }
    }
}

impl fmt::Display for UserScript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::ConfirmAll => f.write_str("confirm-all"),
            Self::RejectOne => f.write_str("reject-one"),
            Self::Rushing { p } => write!(f, "rushing:{p}"),
        }
    }
}

/// What every user can see by looking around the table.
#[derive(Debug, Clone, Copy)]
pub struct GroupView {
    pub all_checkmarks: bool,
    pub any_flag: bool,
    pub any_failed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Confirm,
    Reject,
    Wait,
}

/// Diligent rule: confirm only on a unanimous, flag-free display.
pub fn diligent(view: GroupView, waited: u64) -> Decision {
    if view.any_flag || view.any_failed {
        Decision::Reject
    } else if view.all_checkmarks {
        Decision::Confirm
    } else if waited >= USER_PATIENCE_TICKS {
        Decision::Reject
    } else {
        Decision::Wait
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scripts_parse() {
        assert_eq!(
            UserScript::parse("confirm-all"),
            Some(UserScript::ConfirmAll)
        );
        assert_eq!(UserScript::parse("reject-one"), Some(UserScript::RejectOne));
        assert_eq!(
            UserScript::parse("rushing:0.25"),
            Some(UserScript::Rushing { p: 0.25 })
        );
        assert_eq!(
            UserScript::parse("rushing(1)"),
            Some(UserScript::Rushing { p: 1.0 })
        );
        assert_eq!(UserScript::parse("rushing:1.5"), None);
        assert_eq!(UserScript::parse("yes"), None);
        for s in ["confirm-all", "reject-one", "rushing:0.5"] {
            assert_eq!(UserScript::parse(s).unwrap().to_string(), s);
        }
    }

    #[test]
    fn diligent_users_need_unanimity() {
        let ok = GroupView {
            all_checkmarks: true,
            any_flag: false,
            any_failed: false,
        };
        assert_eq!(diligent(ok, 0), Decision::Confirm);
        assert_eq!(
            diligent(
                GroupView {
                    any_flag: true,
                    ..ok
                },
                0
            ),
            Decision::Reject
        );
        let pending = GroupView {
            all_checkmarks: false,
            ..ok
        };
        assert_eq!(diligent(pending, 3), Decision::Wait);
        assert_eq!(diligent(pending, USER_PATIENCE_TICKS), Decision::Reject);
    }
}
