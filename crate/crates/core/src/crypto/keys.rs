use curve25519_dalek::constants::RISTRETTO_BASEPOINT_POINT;
use curve25519_dalek::ristretto::{CompressedRistretto, RistrettoPoint};
use curve25519_dalek::scalar::Scalar;
use rand_core::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};

use super::CryptoError;

/// 16 random bytes minted per session; the canonical sort key of the group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ParticipantId(#[serde(with = "hex::serde")] pub [u8; 16]);

impl ParticipantId {
    pub fn random<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        let mut id = [0u8; 16];
        rng.fill_bytes(&mut id);
        Self(id)
    }

    pub fn as_bytes(&self) -> &[u8; 16] {
        &self.0
    }
}

impl std::fmt::Display for ParticipantId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&hex::encode(&self.0[..4]))
    }
}

/// A Ristretto255 keypair. The public key is the compressed encoding of
/// `basepoint * secret`.
#[derive(Clone)]
pub struct KeyPair {
    pub public_key: [u8; 32],
    secret_scalar: Scalar,
}

impl KeyPair {
    pub fn secret_bytes(&self) -> [u8; 32] {
        self.secret_scalar.to_bytes()
    }

    pub(crate) fn scalar(&self) -> &Scalar {
        &self.secret_scalar
    }

    pub fn from_secret_bytes(secret: [u8; 32]) -> Result<Self, CryptoError> {
        let secret_scalar = Option::<Scalar>::from(Scalar::from_canonical_bytes(secret))
            .ok_or(CryptoError::Malformed("secret scalar is not canonical"))?;
        if secret_scalar == Scalar::ZERO {
            return Err(CryptoError::Malformed("secret scalar is zero"));
        }
        Ok(Self::from_scalar(secret_scalar))
    }

    fn from_scalar(secret_scalar: Scalar) -> Self {
        let public_key = (RISTRETTO_BASEPOINT_POINT * secret_scalar)
            .compress()
            .to_bytes();
        Self {
            public_key,
            secret_scalar,
        }
    }

    /// Recomputes the public key from the secret and compares.
    pub fn is_consistent(&self) -> bool {
        (RISTRETTO_BASEPOINT_POINT * self.secret_scalar)
            .compress()
            .to_bytes()
            == self.public_key
    }
}

impl std::fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KeyPair")
            .field("public_key", &hex::encode(self.public_key))
            .finish_non_exhaustive()
    }
}

pub fn gen_keypair<R: RngCore + CryptoRng>(rng: &mut R) -> KeyPair {
    loop {
        let mut wide = [0u8; 64];
        rng.fill_bytes(&mut wide);
        let s = Scalar::from_bytes_mod_order_wide(&wide);
        if s != Scalar::ZERO {
            return KeyPair::from_scalar(s);
        }
    }
}

/// Decodes a 32-byte group element, rejecting non-canonical encodings and the
/// identity element.
pub fn decode_element(bytes: &[u8; 32]) -> Result<RistrettoPoint, CryptoError> {
    let point = CompressedRistretto(*bytes)
        .decompress()
        .ok_or(CryptoError::BadGroupElement)?;
    if point == RistrettoPoint::default() {
        return Err(CryptoError::BadGroupElement);
    }
    Ok(point)
}

/// Success and abort openings for one participant's commitment.
#[derive(Clone, PartialEq, Eq)]
pub struct NoncePair {
    pub success_nonce: [u8; 32],
    pub abort_nonce: [u8; 32],
}

impl NoncePair {
    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        let mut success_nonce = [0u8; 32];
        rng.fill_bytes(&mut success_nonce);
        loop {
            let mut abort_nonce = [0u8; 32];
            rng.fill_bytes(&mut abort_nonce);
            if abort_nonce != success_nonce {
                return Self {
                    success_nonce,
                    abort_nonce,
                };
            }
        }
    }
}

impl std::fmt::Debug for NoncePair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("NoncePair(..)")
    }
}
