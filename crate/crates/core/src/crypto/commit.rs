//! Salted hash commitments for identity shares inside coin candidates.

use super::hashing::sha256_parts;
use crate::rng::SimRng;
use crate::wire::{Decoder, Encoder, WireError};
use rand::RngCore;

pub const SALT_LEN: usize = 16;

const COMMIT_TAG: &[u8] = b"opfsim.commit.v1";

/// Binding commitment to a byte payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Commitment {
    pub digest: [u8; 32],
}

/// What the committer keeps: the payload and the salt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommitmentOpening {
    pub payload: Vec<u8>,
    pub salt: [u8; SALT_LEN],
}

pub fn commit(payload: &[u8], rng: &mut SimRng) -> (Commitment, CommitmentOpening) {
    let mut salt = [0u8; SALT_LEN];
    rng.fill_bytes(&mut salt);
    let commitment = Commitment {
        digest: commitment_digest(payload, &salt),
    };
    (
        commitment,
        CommitmentOpening {
            payload: payload.to_vec(),
            salt,
        },
    )
}

pub fn commitment_digest(payload: &[u8], salt: &[u8; SALT_LEN]) -> [u8; 32] {
    sha256_parts(&[COMMIT_TAG, payload, salt])
}

impl Commitment {
    pub fn verify(&self, opening: &CommitmentOpening) -> bool {
        commitment_digest(&opening.payload, &opening.salt) == self.digest
    }

    /// Verify against an explicit (payload, salt) pair, as found in a
    /// transfer record's revealed share.
    pub fn verify_parts(&self, payload: &[u8], salt: &[u8; SALT_LEN]) -> bool {
        commitment_digest(payload, salt) == self.digest
    }

    pub fn encode_into(&self, enc: &mut Encoder) {
        enc.raw(&self.digest);
    }

    pub fn decode(dec: &mut Decoder) -> Result<Self, WireError> {
        let digest: [u8; 32] = dec
            .raw(32)?
            .try_into()
            .map_err(|_| WireError::Malformed("commitment digest"))?;
        Ok(Self { digest })
    }
}

impl CommitmentOpening {
    pub fn encode_into(&self, enc: &mut Encoder) {
        enc.bytes(&self.payload).raw(&self.salt);
    }

    pub fn decode(dec: &mut Decoder) -> Result<Self, WireError> {
        let payload = dec.bytes()?;
        let salt: [u8; SALT_LEN] = dec
            .raw(SALT_LEN)?
            .try_into()
            .map_err(|_| WireError::Malformed("salt"))?;
        Ok(Self { payload, salt })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;

    #[test]
    fn opens_and_rejects_tamper() {
        let mut rng = derive_rng(4, "commit");
        let (c, o) = commit(b"share-bytes", &mut rng);
        assert!(c.verify(&o));
        let mut bad = o.clone();
        bad.payload[0] ^= 1;
        assert!(!c.verify(&bad));
        let mut bad_salt = o;
        bad_salt.salt[0] ^= 1;
        assert!(!c.verify(&bad_salt));
    }

    #[test]
    fn distinct_salts_give_distinct_digests() {
        let mut rng = derive_rng(5, "commit");
        let (c1, _) = commit(b"same", &mut rng);
        let (c2, _) = commit(b"same", &mut rng);
        assert_ne!(c1.digest, c2.digest);
    }
}
