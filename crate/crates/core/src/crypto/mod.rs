//! Self-contained cryptographic primitives at simulation scale.
//!
//! RSA blind signatures carry coin issuance, Schnorr proofs of knowledge
//! carry ownership and authorization, hash commitments carry the
//! cut-and-choose identity encoding, and XOR share splitting carries the
//! redundancy that de-anonymizes double spenders. Parameters are
//! configurable and deliberately small; nothing here aims at production
//! security margins.

mod commit;
mod hashing;
mod primes;
mod rsa;
mod schnorr;
mod shares;

pub use commit::{commit, Commitment, CommitmentOpening, SALT_LEN};
pub use hashing::{hash_to_biguint_mod, sha256, sha256_parts, HASH_ALGORITHM};
pub use primes::{gen_prime, is_probable_prime};
pub use rsa::{blind, rsa_verify, sign_blinded, unblind, BlindingFactor, RsaKeyPair, RsaPublicKey};
pub use schnorr::{
    default_group, schnorr_prove, schnorr_verify, test_group, SchnorrGroup, SchnorrKeyPair,
    SchnorrProof,
};
pub use shares::{reconstruct_identity, split_identity, IdentityShares};

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::One;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CryptoError {
    #[error("message outside the valid range for this modulus")]
    MessageOutOfRange,
    #[error("blinding factor is not invertible modulo n")]
    NonInvertibleBlinding,
    #[error("identity must be non-empty")]
    EmptyIdentity,
    #[error("identity shares have mismatched lengths")]
    ShareLengthMismatch,
    #[error("key size below the supported floor of {0} bits")]
    KeyTooSmall(u32),
    #[error("invalid group parameters: {0}")]
    InvalidGroup(&'static str),
}

/// Modular inverse via the extended Euclidean algorithm.
pub(crate) fn mod_inverse(a: &BigUint, modulus: &BigUint) -> Option<BigUint> {
    let a = BigInt::from(a % modulus);
    let m = BigInt::from(modulus.clone());
    let ext = a.extended_gcd(&m);
    if !ext.gcd.is_one() {
        return None;
    }
    let mut x = ext.x % &m;
    if x.sign() == Sign::Minus {
        x += &m;
    }
    x.to_biguint()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mod_inverse_agrees_with_definition() {
        let m = BigUint::from(780u32);
        let a = BigUint::from(17u32);
        let inv = mod_inverse(&a, &m).unwrap();
        assert_eq!((a * inv) % m, BigUint::one());
        // 2 shares a factor with 780.
        assert!(mod_inverse(&BigUint::from(2u32), &BigUint::from(780u32)).is_none());
    }
}
