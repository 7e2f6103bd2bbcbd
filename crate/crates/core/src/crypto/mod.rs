//! Key material, commitments, group key agreement and the verification hash.
//!
//! Everything here is a pure function of its inputs plus an explicitly passed
//! RNG.

mod card;
mod commitment;
pub mod encoding;
mod gdh;
pub mod hash;
mod keys;
mod verify;

pub use card::{ContactCard, MAX_DESCRIPTION_LEN, MAX_NAME_LEN};
pub use commitment::{
    abort_digest, commit, open_abort, open_payload, open_success, seal_payload, success_digest,
    verify_commitment, CommitmentBundle, GroupKey,
};
pub use gdh::{derive_group_key, gdh_contribute, transcript_binding, Element, GdhOutput, GdhState};
pub use keys::{decode_element, gen_keypair, KeyPair, NoncePair, ParticipantId};
pub use verify::{
    verification_hash, VerificationHash, OOB_HASH_BITS, OOB_HASH_BYTES, SAFESLINGER_SAS_BITS,
};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum CryptoError {
    #[error("malformed input: {0}")]
    Malformed(&'static str),
    #[error("invalid contact card: {0}")]
    InvalidCard(&'static str),
    #[error("group element failed to decode")]
    BadGroupElement,
    #[error("authenticated decryption failed")]
    Aead,
    #[error("group of {0} is too small; at least 2 members are required")]
    GroupTooSmall(usize),
    #[error("duplicate participant id")]
    DuplicateParticipant,
    #[error("group key agreement out of order: {0}")]
    GdhOrder(&'static str),
}
