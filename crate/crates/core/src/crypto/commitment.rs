use chacha20poly1305::aead::{Aead, KeyInit, Payload};
use chacha20poly1305::{ChaCha20Poly1305, Key, Nonce};
use serde::{Deserialize, Serialize};

use super::card::ContactCard;
use super::encoding::{CanonicalReader, CanonicalWriter};
use super::hash::{tagged_hash, TAG_ABORT, TAG_AEAD_NONCE, TAG_COMMIT, TAG_PAYLOAD, TAG_SUCCESS};
use super::keys::{NoncePair, ParticipantId};
use super::CryptoError;

/// Symmetric key shared by every member that completed the group DH, plus a
/// hash of the roster's DH contributions it was derived under.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupKey {
    #[serde(with = "hex::serde")]
    pub key: [u8; 32],
    #[serde(with = "hex::serde")]
    pub transcript_binding: [u8; 32],
}

impl std::fmt::Debug for GroupKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GroupKey")
            .field("transcript_binding", &hex::encode(self.transcript_binding))
            .finish_non_exhaustive()
    }
}

/// One participant's published commitment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitmentBundle {
    pub participant_id: ParticipantId,
    #[serde(with = "hex::serde")]
    pub success_digest: [u8; 32],
    #[serde(with = "hex::serde")]
    pub abort_digest: [u8; 32],
    #[serde(with = "hex::serde")]
    pub payload_ciphertext: Vec<u8>,
    #[serde(with = "hex::serde")]
    pub dh_public: [u8; 32],
    #[serde(with = "hex::serde")]
    pub outer_commitment: [u8; 32],
}

pub fn success_digest(nonce: &[u8; 32]) -> [u8; 32] {
    tagged_hash(TAG_SUCCESS, &[nonce])
}

pub fn abort_digest(nonce: &[u8; 32]) -> [u8; 32] {
    tagged_hash(TAG_ABORT, &[nonce])
}

fn outer_commitment(
    id: &ParticipantId,
    success_digest: &[u8; 32],
    abort_digest: &[u8; 32],
    dh_public: &[u8; 32],
    payload_ciphertext: &[u8],
) -> [u8; 32] {
    let payload_hash = tagged_hash(TAG_PAYLOAD, &[payload_ciphertext]);
    tagged_hash(
        TAG_COMMIT,
        &[
            id.as_bytes(),
            success_digest,
            abort_digest,
            dh_public,
            &payload_hash,
        ],
    )
}

impl CommitmentBundle {
    pub fn to_canonical_bytes(&self) -> Vec<u8> {
        let mut w = CanonicalWriter::new();
        w.field(self.participant_id.as_bytes())
            .field(&self.success_digest)
            .field(&self.abort_digest)
            .field(&self.payload_ciphertext)
            .field(&self.dh_public)
            .field(&self.outer_commitment);
        w.finish()
    }

    pub fn read_canonical(r: &mut CanonicalReader<'_>) -> Result<Self, CryptoError> {
        Ok(Self {
            participant_id: ParticipantId(r.fixed()?),
            success_digest: r.fixed()?,
            abort_digest: r.fixed()?,
            payload_ciphertext: r.field()?.to_vec(),
            dh_public: r.fixed()?,
            outer_commitment: r.fixed()?,
        })
    }

    pub fn from_canonical_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        let mut r = CanonicalReader::new(bytes);
        let b = Self::read_canonical(&mut r)?;
        r.finish()?;
        Ok(b)
    }

    /// Recomputes the outer commitment over the remaining fields. Used by
    /// anyone constructing a bundle by hand, including a simulated adversary.
    pub fn reseal(&mut self) {
        self.outer_commitment = outer_commitment(
            &self.participant_id,
            &self.success_digest,
            &self.abort_digest,
            &self.dh_public,
            &self.payload_ciphertext,
        );
    }
}

fn aead_nonce(sender: &ParticipantId) -> [u8; 12] {
    let full = tagged_hash(TAG_AEAD_NONCE, &[sender.as_bytes()]);
    full[..12].try_into().unwrap()
}

/// Encrypts a card under the group key. The AEAD nonce is derived from the
/// sender id, which is unique within a session, and the id is bound as
/// associated data.
pub fn seal_payload(
    card: &ContactCard,
    group_key: &GroupKey,
    sender: &ParticipantId,
) -> Result<Vec<u8>, CryptoError> {
    let plaintext = card.to_canonical_bytes()?;
    let cipher = ChaCha20Poly1305::new(Key::from_slice(&group_key.key));
    let nonce = aead_nonce(sender);
    cipher
        .encrypt(
            Nonce::from_slice(&nonce),
            Payload {
                msg: &plaintext,
                aad: sender.as_bytes(),
            },
        )
        .map_err(|_| CryptoError::Aead)
}

pub fn open_payload(
    ciphertext: &[u8],
    group_key: &GroupKey,
    sender: &ParticipantId,
) -> Result<ContactCard, CryptoError> {
    let cipher = ChaCha20Poly1305::new(Key::from_slice(&group_key.key));
    let nonce = aead_nonce(sender);
    let plaintext = cipher
        .decrypt(
            Nonce::from_slice(&nonce),
            Payload {
                msg: ciphertext,
                aad: sender.as_bytes(),
            },
        )
        .map_err(|_| CryptoError::Aead)?;
    ContactCard::from_canonical_bytes(&plaintext)
}

pub fn commit(
    card: &ContactCard,
    nonces: &NoncePair,
    dh_public: [u8; 32],
    group_key: &GroupKey,
    id: ParticipantId,
) -> Result<CommitmentBundle, CryptoError> {
    let payload_ciphertext = seal_payload(card, group_key, &id)?;
    let mut bundle = CommitmentBundle {
        participant_id: id,
        success_digest: success_digest(&nonces.success_nonce),
        abort_digest: abort_digest(&nonces.abort_nonce),
        payload_ciphertext,
        dh_public,
        outer_commitment: [0; 32],
    };
    bundle.reseal();
    Ok(bundle)
}

pub fn verify_commitment(bundle: &CommitmentBundle) -> bool {
    outer_commitment(
        &bundle.participant_id,
        &bundle.success_digest,
        &bundle.abort_digest,
        &bundle.dh_public,
        &bundle.payload_ciphertext,
    ) == bundle.outer_commitment
}

pub fn open_success(bundle: &CommitmentBundle, revealed_nonce: &[u8; 32]) -> bool {
    success_digest(revealed_nonce) == bundle.success_digest
}

pub fn open_abort(bundle: &CommitmentBundle, revealed_nonce: &[u8; 32]) -> bool {
    abort_digest(revealed_nonce) == bundle.abort_digest
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::keys::gen_keypair;
    use rand_chacha::ChaCha20Rng;
    use rand_core::{RngCore, SeedableRng};

    struct Fixture {
        card: ContactCard,
        nonces: NoncePair,
        dh: [u8; 32],
        key: GroupKey,
        id: ParticipantId,
    }

    fn fixture(seed: u64) -> Fixture {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let identity = gen_keypair(&mut rng);
        let dh = gen_keypair(&mut rng).public_key;
        let mut key = [0u8; 32];
        rng.fill_bytes(&mut key);
        Fixture {
            card: ContactCard::new("Grace", [1; 32], "compilers", identity.public_key),
            nonces: NoncePair::generate(&mut rng),
            dh,
            key: GroupKey {
                key,
                transcript_binding: [2; 32],
            },
            id: ParticipantId::random(&mut rng),
        }
    }

    fn bundle(f: &Fixture) -> CommitmentBundle {
        commit(&f.card, &f.nonces, f.dh, &f.key, f.id).unwrap()
    }

    #[test]
    fn commit_verifies_and_is_deterministic() {
        let f = fixture(0);
        let b = bundle(&f);
        assert!(verify_commitment(&b));
        assert_eq!(b, bundle(&fixture(0)));
        assert_eq!(
            CommitmentBundle::from_canonical_bytes(&b.to_canonical_bytes()).unwrap(),
            b
        );
    }

    #[test]
    fn altered_fields_fail_verification() {
        let b = bundle(&fixture(1));
        let mut x = b.clone();
        x.success_digest[0] ^= 1;
        assert!(!verify_commitment(&x));
        let mut x = b.clone();
        x.dh_public[31] ^= 0x80;
        assert!(!verify_commitment(&x));
        let mut x = b.clone();
        x.abort_digest[5] ^= 4;
        assert!(!verify_commitment(&x));
        let mut x = b.clone();
        x.participant_id.0[0] ^= 1;
        assert!(!verify_commitment(&x));
        for i in 0..b.payload_ciphertext.len() {
            let mut x = b.clone();
            x.payload_ciphertext[i] ^= 0x01;
            assert!(!verify_commitment(&x), "byte {i}");
        }
    }

    #[test]
    fn openings_are_separated() {
        let f = fixture(2);
        let b = bundle(&f);
        assert!(open_success(&b, &f.nonces.success_nonce));
        assert!(!open_success(&b, &f.nonces.abort_nonce));
        assert!(open_abort(&b, &f.nonces.abort_nonce));
        assert!(!open_abort(&b, &f.nonces.success_nonce));
        assert!(!open_abort(&b, &[0x5a; 32]));
    }

    #[test]
    fn zero_nonce_never_opens_sampled_sessions() {
        // Brute force over sampled sessions: the all-zero nonce must not hash
        // to any honest digest.
        let zero = success_digest(&[0; 32]);
        for seed in 0..500 {
            let f = fixture(seed);
            let b = bundle(&f);
            assert_ne!(b.success_digest, zero);
            assert!(!open_success(&b, &[0; 32]));
        }
    }

    #[test]
    fn payload_round_trip_and_failures() {
        let f = fixture(3);
        let ct = seal_payload(&f.card, &f.key, &f.id).unwrap();
        assert_eq!(open_payload(&ct, &f.key, &f.id).unwrap(), f.card);

        let mut wrong = f.key.clone();
        wrong.key[0] ^= 1;
        assert!(matches!(
            open_payload(&ct, &wrong, &f.id),
            Err(CryptoError::Aead)
        ));
        assert!(open_payload(&ct[..ct.len() - 1], &f.key, &f.id).is_err());
        let other = ParticipantId([0xee; 16]);
        assert!(open_payload(&ct, &f.key, &other).is_err());
    }

    #[test]
    fn malformed_card_is_a_commit_error() {
        let mut f = fixture(4);
        f.card.name.clear();
        assert!(commit(&f.card, &f.nonces, f.dh, &f.key, f.id).is_err());
    }
}
