use serde::{Deserialize, Serialize};

use super::commitment::CommitmentBundle;
use super::hash::{tagged_hash, TAG_VERIFY};
use super::CryptoError;

/// Bytes of the verification digest carried on the acoustic channel.
pub const OOB_HASH_BYTES: usize = 16;
/// Authentication strength of the acoustic verification, in bits.
pub const OOB_HASH_BITS: u32 = (OOB_HASH_BYTES * 8) as u32;
/// Length of the word-phrase short authentication string used by the manual
/// SafeSlinger comparison.
pub const SAFESLINGER_SAS_BITS: u32 = 24;

const _: () = assert!(OOB_HASH_BITS > SAFESLINGER_SAS_BITS);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationHash {
    #[serde(with = "hex::serde")]
    pub digest: [u8; 32],
    #[serde(with = "hex::serde")]
    pub oob_truncation: [u8; OOB_HASH_BYTES],
}

/// Digest over every bundle of the group, in ascending participant-id order
/// regardless of input order: first all outer commitments, then every bundle
/// in canonical encoding.
pub fn verification_hash(bundles: &[CommitmentBundle]) -> Result<VerificationHash, CryptoError> {
    if bundles.len() < 2 {
        return Err(CryptoError::GroupTooSmall(bundles.len()));
    }
    let mut sorted: Vec<&CommitmentBundle> = bundles.iter().collect();
    sorted.sort_by_key(|b| b.participant_id);
    if sorted
        .windows(2)
        .any(|w| w[0].participant_id == w[1].participant_id)
    {
        return Err(CryptoError::DuplicateParticipant);
    }
    let n = (sorted.len() as u32).to_be_bytes();
    let encoded: Vec<Vec<u8>> = sorted.iter().map(|b| b.to_canonical_bytes()).collect();
    let mut parts: Vec<&[u8]> = vec![&n];
    parts.extend(sorted.iter().map(|b| b.outer_commitment.as_slice()));
    parts.extend(encoded.iter().map(Vec::as_slice));
    let digest = tagged_hash(TAG_VERIFY, &parts);
    Ok(VerificationHash {
        digest,
        oob_truncation: digest[..OOB_HASH_BYTES].try_into().unwrap(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::keys::ParticipantId;

    fn fake_bundle(tag: u8) -> CommitmentBundle {
        let mut b = CommitmentBundle {
            participant_id: ParticipantId([tag; 16]),
            success_digest: [tag.wrapping_add(1); 32],
            abort_digest: [tag.wrapping_add(2); 32],
            payload_ciphertext: vec![tag; 40],
            dh_public: [tag.wrapping_add(3); 32],
            outer_commitment: [0; 32],
        };
        b.reseal();
        b
    }

    #[test]
    fn order_independent() {
        let bs = vec![fake_bundle(3), fake_bundle(1), fake_bundle(2)];
        let mut rev = bs.clone();
        rev.reverse();
        assert_eq!(
            verification_hash(&bs).unwrap(),
            verification_hash(&rev).unwrap()
        );
    }

    #[test]
    fn any_flipped_dh_bit_changes_digest() {
        let bs = vec![fake_bundle(1), fake_bundle(2)];
        let base = verification_hash(&bs).unwrap();
        for bit in 0..256 {
            let mut x = bs.clone();
            x[1].dh_public[bit / 8] ^= 1 << (bit % 8);
            assert_ne!(verification_hash(&x).unwrap().digest, base.digest);
        }
    }

    #[test]
    fn rejects_singletons_and_duplicates() {
        assert!(matches!(
            verification_hash(&[fake_bundle(1)]),
            Err(CryptoError::GroupTooSmall(1))
        ));
        let mut dup = fake_bundle(2);
        dup.payload_ciphertext.push(0);
        assert!(matches!(
            verification_hash(&[fake_bundle(2), dup]),
            Err(CryptoError::DuplicateParticipant)
        ));
    }

    #[test]
    fn truncation_is_prefix_and_stronger_than_sas() {
        let h = verification_hash(&[fake_bundle(1), fake_bundle(9)]).unwrap();
        assert_eq!(&h.digest[..16], &h.oob_truncation);
        assert_eq!(OOB_HASH_BITS, 128);
    }
}
