//! Cut-and-choose candidate construction and opening.

use super::{CandidateOpening, CoinCandidate, FundsError};
use crate::crypto::{commit, reconstruct_identity, split_identity, CryptoError};
use crate::rng::SimRng;
use num_bigint::{BigUint, RandBigInt};

const SERIAL_PART_BITS: u64 = 128;

/// Issuance-side candidate generation: `count` must be even (half will be
/// opened) and at least 4.
pub fn make_candidates(
    identity: &[u8],
    count: usize,
    rng: &mut SimRng,
) -> Result<Vec<(CoinCandidate, CandidateOpening)>, FundsError> {
    if count < 4 || count % 2 != 0 {
        return Err(FundsError::BadCandidateCount);
    }
    generate_candidates(identity, count, rng)
}

/// Candidate generation without the issuance floor, used for per-hop
/// endorsement sets.
pub fn generate_candidates(
    identity: &[u8],
    count: usize,
    rng: &mut SimRng,
) -> Result<Vec<(CoinCandidate, CandidateOpening)>, FundsError> {
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let shares = split_identity(identity, rng).map_err(|e| match e {
            CryptoError::EmptyIdentity => FundsError::InvalidRecord("empty identity"),
            _ => FundsError::InvalidRecord("share split"),
        })?;
        let serial_part = rng.gen_biguint(SERIAL_PART_BITS);
        let (left_commitment, left_opening) = commit(&shares.left, rng);
        let (right_commitment, right_opening) = commit(&shares.right, rng);
        out.push((
            CoinCandidate {
                serial_part,
                left_commitment,
                right_commitment,
            },
            CandidateOpening {
                left: left_opening,
                right: right_opening,
            },
        ));
    }
    Ok(out)
}

/// Select the openings for the challenged half.
pub fn open_candidates(
    openings: &[CandidateOpening],
    subset: &[usize],
) -> Result<Vec<(usize, CandidateOpening)>, FundsError> {
    let mut out = Vec::with_capacity(subset.len());
    for &i in subset {
        let opening = openings.get(i).ok_or(FundsError::IndexOutOfRange(i))?;
        out.push((i, opening.clone()));
    }
    Ok(out)
}

/// Verifier side: the opening must match both commitments and the shares
/// must XOR to the claimed identity.
pub fn verify_candidate_opening(
    candidate: &CoinCandidate,
    opening: &CandidateOpening,
    identity: &[u8],
) -> bool {
    if !candidate.left_commitment.verify(&opening.left)
        || !candidate.right_commitment.verify(&opening.right)
    {
        return false;
    }
    match reconstruct_identity(&opening.left.payload, &opening.right.payload) {
        Ok(id) => id == identity,
        Err(_) => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;
    use std::collections::HashSet;

    #[test]
    fn all_openings_reconstruct_identity() {
        let mut rng = derive_rng(20, "cands");
        let identity = b"alice";
        let cands = make_candidates(identity, 4, &mut rng).unwrap();
        for (c, o) in &cands {
            assert!(verify_candidate_opening(c, o, identity));
        }
    }

    #[test]
    fn wrong_identity_fails_opening_check() {
        let mut rng = derive_rng(21, "cands");
        let cands = make_candidates(b"mallory", 4, &mut rng).unwrap();
        let (c, o) = &cands[0];
        assert!(!verify_candidate_opening(c, o, b"allicee"));
        // Tampered share also fails.
        let mut bad = o.clone();
        bad.left.payload[0] ^= 0xff;
        assert!(!verify_candidate_opening(c, &bad, b"mallory"));
    }

    #[test]
    fn candidate_count_validation() {
        let mut rng = derive_rng(22, "cands");
        assert_eq!(
            make_candidates(b"x", 3, &mut rng).unwrap_err(),
            FundsError::BadCandidateCount
        );
        assert_eq!(
            make_candidates(b"x", 2, &mut rng).unwrap_err(),
            FundsError::BadCandidateCount
        );
    }

    #[test]
    fn open_subset_bounds_checked() {
        let mut rng = derive_rng(23, "cands");
        let cands = make_candidates(b"x", 4, &mut rng).unwrap();
        let openings: Vec<_> = cands.iter().map(|(_, o)| o.clone()).collect();
        assert!(open_candidates(&openings, &[0, 2]).is_ok());
        assert_eq!(
            open_candidates(&openings, &[0, 7]).unwrap_err(),
            FundsError::IndexOutOfRange(7)
        );
    }

    #[test]
    fn serial_parts_distinct_over_seeded_runs() {
        let mut seen = HashSet::new();
        for seed in 0..1000u64 {
            let mut rng = derive_rng(seed, "cands-distinct");
            for (c, _) in make_candidates(b"id", 8, &mut rng).unwrap() {
                assert!(seen.insert(c.serial_part.to_bytes_be()), "collision");
            }
        }
    }
}
