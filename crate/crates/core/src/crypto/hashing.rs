//! The one hash function used everywhere, plus hash-to-integer helpers.

use num_bigint::BigUint;
use num_traits::Zero;
use sha2::{Digest, Sha256};

/// Identifier recorded in traces and fixtures for the hash in use.
pub const HASH_ALGORITHM: &str = "sha-256";

pub fn sha256(data: &[u8]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(data);
    h.finalize().into()
}

/// Hash a sequence of parts, each length-prefixed so part boundaries are
/// unambiguous.
pub fn sha256_parts(parts: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u32).to_be_bytes());
        h.update(p);
    }
    h.finalize().into()
}

/// Hash to a nonzero integer below `modulus`, used as the RSA message for
/// coin bodies.
pub fn hash_to_biguint_mod(tag: &[u8], data: &[u8], modulus: &BigUint) -> BigUint {
    let digest = sha256_parts(&[tag, data]);
    let v = BigUint::from_bytes_be(&digest) % modulus;
    if v.is_zero() {
        BigUint::from(1u32)
    } else {
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn part_boundaries_matter() {
        assert_ne!(sha256_parts(&[b"ab", b"c"]), sha256_parts(&[b"a", b"bc"]));
    }

    #[test]
    fn hash_to_int_stays_in_range() {
        let n = BigUint::from(3233u32);
        let v = hash_to_biguint_mod(b"t", b"hello", &n);
        assert!(v < n && !v.is_zero());
    }
}
