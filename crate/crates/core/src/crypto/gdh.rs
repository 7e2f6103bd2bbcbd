//! Chain-style group Diffie-Hellman.
//!
//! Members are ordered by participant id. Member `i` receives `i + 1`
//! intermediates from its predecessor: entry `j < i` is the base raised to the
//! product of all scalars before `i` except `x_j`, and entry `i` is the base
//! raised to the full product of those scalars. It raises the partials to its
//! own scalar, keeps the cardinal value as its own partial, and appends the
//! cardinal raised to its scalar. The last member turns the cardinal into the
//! shared element and answers with the partials, one per earlier member, each
//! of which needs only that member's scalar to complete.

use curve25519_dalek::constants::RISTRETTO_BASEPOINT_POINT;
use curve25519_dalek::ristretto::RistrettoPoint;
use curve25519_dalek::scalar::Scalar;

use super::commitment::GroupKey;
use super::hash::{tagged_hash, TAG_GDH_BINDING, TAG_GDH_KEY};
use super::keys::{decode_element, KeyPair};
use super::CryptoError;

pub type Element = [u8; 32];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GdhOutput {
    /// Forward to the next member in the chain.
    Upflow(Vec<Element>),
    /// Broadcast to every earlier member; the sender already holds the key.
    Downflow(Vec<Element>),
}

#[derive(Clone)]
pub struct GdhState {
    position: usize,
    group_size: usize,
    scalar: Scalar,
    roster: Vec<Element>,
    contributed: bool,
    key: Option<GroupKey>,
}

/// Hash of every member's DH public value in roster order.
pub fn transcript_binding(roster_dh_publics: &[Element]) -> [u8; 32] {
    let n = (roster_dh_publics.len() as u32).to_be_bytes();
    let mut parts: Vec<&[u8]> = vec![&n];
    parts.extend(roster_dh_publics.iter().map(|p| p.as_slice()));
    tagged_hash(TAG_GDH_BINDING, &parts)
}

/// Key derivation from the shared group element.
pub fn derive_group_key(shared: &Element, roster_dh_publics: &[Element]) -> GroupKey {
    let transcript_binding = transcript_binding(roster_dh_publics);
    GroupKey {
        key: tagged_hash(TAG_GDH_KEY, &[shared, &transcript_binding]),
        transcript_binding,
    }
}

fn decode_all(elements: &[Element]) -> Result<Vec<RistrettoPoint>, CryptoError> {
    elements.iter().map(decode_element).collect()
}

impl GdhState {
    /// `roster_dh_publics` lists every member's DH public value in canonical
    /// (ascending id) order; entry `position` must be this member's own.
    pub fn new(
        keypair: &KeyPair,
        position: usize,
        roster_dh_publics: &[Element],
    ) -> Result<Self, CryptoError> {
        let group_size = roster_dh_publics.len();
        if group_size < 2 {
            return Err(CryptoError::GroupTooSmall(group_size));
        }
        if position >= group_size || roster_dh_publics[position] != keypair.public_key {
            return Err(CryptoError::Malformed(
                "roster does not contain own DH value",
            ));
        }
        decode_all(roster_dh_publics)?;
        Ok(Self {
            position,
            group_size,
            scalar: *keypair.scalar(),
            roster: roster_dh_publics.to_vec(),
            contributed: false,
            key: None,
        })
    }

    pub fn position(&self) -> usize {
        self.position
    }

    pub fn is_first(&self) -> bool {
        self.position == 0
    }

    pub fn is_last(&self) -> bool {
        self.position + 1 == self.group_size
    }

    pub fn group_key(&self) -> Option<&GroupKey> {
        self.key.as_ref()
    }

    /// Opening upflow of the first member: `[g, g^x]`.
    pub fn start(&self) -> Result<Vec<Element>, CryptoError> {
        if !self.is_first() {
            return Err(CryptoError::GdhOrder(
                "only the first member starts the chain",
            ));
        }
        let g = RISTRETTO_BASEPOINT_POINT;
        Ok(vec![
            g.compress().to_bytes(),
            (g * self.scalar).compress().to_bytes(),
        ])
    }

    /// Processes the upflow from the predecessor.
    pub fn contribute(&mut self, incoming: &[Element]) -> Result<GdhOutput, CryptoError> {
        if self.is_first() {
            return Err(CryptoError::GdhOrder("first member receives no upflow"));
        }
        if self.contributed {
            return Err(CryptoError::GdhOrder("upflow already processed"));
        }
        if incoming.len() != self.position + 1 {
            return Err(CryptoError::Malformed("upflow has wrong length"));
        }
        let points = decode_all(incoming)?;
        let (partials, cardinal) = points.split_at(self.position);
        let cardinal = cardinal[0];
        let raised: Vec<Element> = partials
            .iter()
            .map(|p| (p * self.scalar).compress().to_bytes())
            .collect();
        let next_cardinal = cardinal * self.scalar;
        self.contributed = true;
        if self.is_last() {
            self.key = Some(derive_group_key(
                &next_cardinal.compress().to_bytes(),
                &self.roster,
            ));
            Ok(GdhOutput::Downflow(raised))
        } else {
            let mut out = raised;
            out.push(cardinal.compress().to_bytes());
            out.push(next_cardinal.compress().to_bytes());
            Ok(GdhOutput::Upflow(out))
        }
    }

    /// Completes the key from the last member's downflow.
    pub fn finish(&mut self, downflow: &[Element]) -> Result<&GroupKey, CryptoError> {
        if self.is_last() {
            return Err(CryptoError::GdhOrder(
                "last member does not consume the downflow",
            ));
        }
        if self.key.is_some() {
            return Err(CryptoError::GdhOrder("key already derived"));
        }
        if downflow.len() != self.group_size - 1 {
            return Err(CryptoError::Malformed("downflow has wrong length"));
        }
        let mine = decode_element(&downflow[self.position])?;
        let shared = (mine * self.scalar).compress().to_bytes();
        Ok(self.key.insert(derive_group_key(&shared, &self.roster)))
    }
}

/// Single chain step over raw intermediates: the first list a member (other
/// than the first) sees is its upflow; anything after that is the final
/// downflow, which completes the key and yields an empty list.
pub fn gdh_contribute(
    state: &mut GdhState,
    incoming: &[Element],
) -> Result<Vec<Element>, CryptoError> {
    if state.is_first() || state.contributed {
        state.finish(incoming)?;
        return Ok(Vec::new());
    }
    match state.contribute(incoming)? {
        GdhOutput::Upflow(v) | GdhOutput::Downflow(v) => Ok(v),
    }
}
