use serde::{Deserialize, Serialize};

use super::encoding::{CanonicalReader, CanonicalWriter};
use super::CryptoError;

pub const MAX_NAME_LEN: usize = 64;
pub const MAX_DESCRIPTION_LEN: usize = 256;

/// Identity payload a participant hands to the rest of the group.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ContactCard {
    pub name: String,
    #[serde(with = "hex::serde")]
    pub avatar_digest: [u8; 32],
    pub description: String,
    #[serde(with = "hex::serde")]
    pub public_key: [u8; 32],
}

impl ContactCard {
    pub fn new(
        name: impl Into<String>,
        avatar_digest: [u8; 32],
        description: impl Into<String>,
        public_key: [u8; 32],
    ) -> Self {
        Self {
            name: name.into(),
            avatar_digest,
            description: description.into(),
            public_key,
        }
    }

    pub fn validate(&self) -> Result<(), CryptoError> {
        if self.name.is_empty() {
            return Err(CryptoError::InvalidCard("name is empty"));
        }
        if self.name.len() > MAX_NAME_LEN {
            return Err(CryptoError::InvalidCard("name exceeds 64 bytes"));
        }
        if self.description.len() > MAX_DESCRIPTION_LEN {
            return Err(CryptoError::InvalidCard("description exceeds 256 bytes"));
        }
        if self.name.chars().any(char::is_control) {
            return Err(CryptoError::InvalidCard("name contains control characters"));
        }
        Ok(())
    }

    pub fn to_canonical_bytes(&self) -> Result<Vec<u8>, CryptoError> {
        self.validate()?;
        let mut w = CanonicalWriter::new();
        w.field(self.name.as_bytes())
            .field(&self.avatar_digest)
            .field(self.description.as_bytes())
            .field(&self.public_key);
        Ok(w.finish())
    }

    pub fn from_canonical_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        let mut r = CanonicalReader::new(bytes);
        let name = String::from_utf8(r.field()?.to_vec())
            .map_err(|_| CryptoError::Malformed("name is not UTF-8"))?;
        let avatar_digest = r.fixed::<32>()?;
        let description = String::from_utf8(r.field()?.to_vec())
            .map_err(|_| CryptoError::Malformed("description is not UTF-8"))?;
        let public_key = r.fixed::<32>()?;
        r.finish()?;
        let card = Self {
            name,
            avatar_digest,
            description,
            public_key,
        };
        card.validate()?;
        Ok(card)
    }
}
