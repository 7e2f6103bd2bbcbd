//! Manual-effort scaling model.
//!
//! Per group size `n`:
//! - pairwise: `n(n-1)/2` comparisons to verify every pair directly;
//! - SafeSlinger-style ceremony: every member enters the group size and the
//!   lowest-ID coordination value (`2n`), then the group runs `n` phrase
//!   comparisons, `3n` in total;
//! - PairSonic: one group-size entry on the coordinator plus one checkmark
//!   glance per member, `1 + n`;
//! - machine time: simulated length of an honest session on a clean channel,
//!   averaged over a few seeds. Human reading and tapping time is not modelled.

use serde::{Deserialize, Serialize};

use crate::protocol::pairwise_action_count;
use crate::sim::{preset, run_session, SimError, UserScript};

/// Seeds averaged for the machine-time column.
pub const TIMING_SEEDS: u64 = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n: usize,
    pub pairwise: u64,
    pub safeslinger: u64,
    pub pairsonic: u64,
    pub protocol_seconds: f64,
}

pub fn safeslinger_steps(n: usize) -> u64 {
    3 * n as u64
}

pub fn pairsonic_steps(n: usize) -> u64 {
    1 + n as u64
}

pub fn scaling_report(max_n: usize) -> Result<Vec<ScalingRow>, SimError> {
    if max_n < 2 {
        return Err(SimError::GroupTooSmall(max_n));
    }
    let honest = preset("none").expect("built-in preset");
    (2..=max_n)
        .map(|n| {
            let mut secs = 0.0;
            for seed in 0..TIMING_SEEDS {
                secs += run_session(n, &honest, UserScript::ConfirmAll, seed)?.seconds();
            }
            Ok(ScalingRow {
                n,
                pairwise: pairwise_action_count(n).expect("n >= 2"),
                safeslinger: safeslinger_steps(n),
                pairsonic: pairsonic_steps(n),
                protocol_seconds: secs / TIMING_SEEDS as f64,
            })
        })
        .collect()
}

/// Plain-text table with the model in the header.
pub fn render_table(rows: &[ScalingRow]) -> String {
    let mut s = String::new();
    s.push_str("# manual steps: pairwise = n(n-1)/2, safeslinger = 2n + n, pairsonic = 1 + n\n");
    s.push_str("# protocol_s: simulated machine time of an honest session (no human time)\n");
    s.push_str(&format!(
        "{:>4} {:>9} {:>12} {:>10} {:>11}\n",
        "n", "pairwise", "safeslinger", "pairsonic", "protocol_s"
    ));
    for r in rows {
        s.push_str(&format!(
            "{:>4} {:>9} {:>12} {:>10} {:>11.2}\n",
            r.n, r.pairwise, r.safeslinger, r.pairsonic, r.protocol_seconds
        ));
    }
    s
}
