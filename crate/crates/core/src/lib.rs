//! Acoustic group pairing.
//!
//! A coordinator announces an ad-hoc network over sound, the group runs a
//! chained Diffie-Hellman and exchanges committed, encrypted contact cards
//! in-band, and the coordinator finally plays a digest of everything it saw.
//! Every device compares that digest with its own view; users confirm that all
//! screens show a checkmark, and success nonces open the commitments.
//!
//! * [`crypto`]: keys, commitments, group key agreement, verification hash.
//! * [`modem`]: 96-tone multi-frequency FSK physical layer on PCM buffers.
//! * [`protocol`]: coordinator and participant state machines.
//! * [`sim`]: lockstep two-channel simulator with a scripted adversary.
//! * [`report`]: manual-effort scaling model.

pub mod crypto;
pub mod modem;
pub mod protocol;
pub mod report;
pub mod sim;
