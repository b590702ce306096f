//! XOR splitting of a withdrawer identity into two shares.
//!
//! One share is revealed per spend; both shares of the same position only
//! ever surface together when the same fund is spent twice, and their XOR
//! is the identity.

use super::CryptoError;
use crate::rng::SimRng;
use rand::RngCore;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdentityShares {
    pub left: Vec<u8>,
    pub right: Vec<u8>,
}

/// Split `identity` into (left, right) with `left` uniform random and
/// `left XOR right = identity`.
pub fn split_identity(identity: &[u8], rng: &mut SimRng) -> Result<IdentityShares, CryptoError> {
    if identity.is_empty() {
        return Err(CryptoError::EmptyIdentity);
    }
    let mut left = vec![0u8; identity.len()];
    rng.fill_bytes(&mut left);
    let right = left
        .iter()
        .zip(identity)
        .map(|(l, i)| l ^ i)
        .collect::<Vec<u8>>();
    Ok(IdentityShares { left, right })
}

pub fn reconstruct_identity(left: &[u8], right: &[u8]) -> Result<Vec<u8>, CryptoError> {
    if left.len() != right.len() {
        return Err(CryptoError::ShareLengthMismatch);
    }
    Ok(left.iter().zip(right).map(|(l, r)| l ^ r).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;
    use proptest::prelude::*;

    #[test]
    fn zero_identity_shares_cancel() {
        let mut rng = derive_rng(1, "shares");
        let s = split_identity(&[0x00], &mut rng).unwrap();
        assert_eq!(reconstruct_identity(&s.left, &s.right).unwrap(), vec![0x00]);
    }

    #[test]
    fn fixed_share_pair() {
        assert_eq!(reconstruct_identity(&[0x5c], &[0xf7]).unwrap(), vec![0xab]);
    }

    #[test]
    fn empty_identity_rejected() {
        let mut rng = derive_rng(2, "shares");
        assert_eq!(
            split_identity(&[], &mut rng).unwrap_err(),
            CryptoError::EmptyIdentity
        );
    }

    /// Left shares look uniform: over 10^4 seeded splits of one identity,
    /// every bit position of the left share is set about half the time.
    #[test]
    fn left_share_bit_frequency() {
        let mut rng = derive_rng(3, "shares-freq");
        let identity = [0xde, 0xad, 0xbe, 0xef];
        let trials = 10_000u32;
        let mut counts = [0u32; 32];
        for _ in 0..trials {
            let s = split_identity(&identity, &mut rng).unwrap();
            for (byte_idx, byte) in s.left.iter().enumerate() {
                for bit in 0..8 {
                    if byte >> bit & 1 == 1 {
                        counts[byte_idx * 8 + bit] += 1;
                    }
                }
            }
        }
        for (i, c) in counts.iter().enumerate() {
            let freq = f64::from(*c) / f64::from(trials);
            assert!((freq - 0.5).abs() < 0.05, "bit {i} frequency {freq}");
        }
    }

    proptest! {
        #[test]
        fn split_always_reconstructs(identity in proptest::collection::vec(any::<u8>(), 1..64), seed: u64) {
            let mut rng = derive_rng(seed, "shares-prop");
            let s = split_identity(&identity, &mut rng).unwrap();
            prop_assert_eq!(reconstruct_identity(&s.left, &s.right).unwrap(), identity);
        }
    }
}
