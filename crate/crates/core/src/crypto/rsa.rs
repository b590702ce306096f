//! Textbook RSA blind signatures over hash-to-integer messages.
//!
//! The signer sees only `m * r^e mod n` and signs it; dividing the result by
//! `r` yields an ordinary signature on `m` that the signer cannot link back
//! to the blinded value it processed.

use super::{mod_inverse, primes::gen_prime, CryptoError};
use crate::rng::SimRng;
use crate::wire::{Decoder, Encoder, WireError};
use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Zero};

/// Smallest supported modulus width; below this the hash-to-integer message
/// space degenerates.
pub const MIN_RSA_BITS: u32 = 64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RsaPublicKey {
    pub n: BigUint,
    pub e: BigUint,
}

#[derive(Debug, Clone)]
pub struct RsaKeyPair {
    public: RsaPublicKey,
    d: BigUint,
    bit_length: u32,
}

impl RsaPublicKey {
    pub fn from_parts(n: BigUint, e: BigUint) -> Self {
        Self { n, e }
    }

    pub fn encode_into(&self, enc: &mut Encoder) {
        enc.biguint(&self.n).biguint(&self.e);
    }

    pub fn decode(dec: &mut Decoder) -> Result<Self, WireError> {
        Ok(Self {
            n: dec.biguint()?,
            e: dec.biguint()?,
        })
    }
}

impl RsaKeyPair {
    /// Generate a keypair with an exactly `bits`-wide modulus.
    /// `e * d == 1 (mod lcm(p-1, q-1))`.
    pub fn generate(bits: u32, rng: &mut SimRng) -> Result<Self, CryptoError> {
        if bits < MIN_RSA_BITS {
            return Err(CryptoError::KeyTooSmall(MIN_RSA_BITS));
        }
        let half = u64::from(bits) / 2;
        let e = BigUint::from(65537u32);
        loop {
            let p = gen_prime(half, rng);
            let q = gen_prime(half, rng);
            if p == q {
                continue;
            }
            let lambda = (&p - 1u32).lcm(&(&q - 1u32));
            if !(&lambda % &e).is_zero() {
                if let Some(d) = mod_inverse(&e, &lambda) {
                    let n = &p * &q;
                    debug_assert_eq!(n.bits(), u64::from(bits));
                    return Ok(Self {
                        public: RsaPublicKey { n, e },
                        d,
                        bit_length: bits,
                    });
                }
            }
        }
    }

    /// Assemble a keypair from known parameters (toy keys, fixtures).
    pub fn from_parts(n: BigUint, e: BigUint, d: BigUint, bit_length: u32) -> Self {
        Self {
            public: RsaPublicKey { n, e },
            d,
            bit_length,
        }
    }

    pub fn public(&self) -> &RsaPublicKey {
        &self.public
    }

    pub fn bit_length(&self) -> u32 {
        self.bit_length
    }
}

/// Multiplicative blinding factor, invertible mod n.
#[derive(Debug, Clone)]
pub struct BlindingFactor {
    r: BigUint,
    r_inv: BigUint,
}

impl BlindingFactor {
    pub fn random(key: &RsaPublicKey, rng: &mut SimRng) -> Self {
        loop {
            let r = rng.gen_biguint_below(&key.n);
            if r.is_zero() {
                continue;
            }
            if let Some(r_inv) = mod_inverse(&r, &key.n) {
                return Self { r, r_inv };
            }
        }
    }

    pub fn from_value(r: BigUint, key: &RsaPublicKey) -> Result<Self, CryptoError> {
        if r.is_zero() || r >= key.n {
            return Err(CryptoError::NonInvertibleBlinding);
        }
        let r_inv = mod_inverse(&r, &key.n).ok_or(CryptoError::NonInvertibleBlinding)?;
        Ok(Self { r, r_inv })
    }

    pub fn value(&self) -> &BigUint {
        &self.r
    }
}

/// Blind a message for signing: `m * r^e mod n`.
pub fn blind(
    message: &BigUint,
    key: &RsaPublicKey,
    factor: &BlindingFactor,
) -> Result<BigUint, CryptoError> {
    if message.is_zero() || message >= &key.n {
        return Err(CryptoError::MessageOutOfRange);
    }
    Ok((message * factor.r.modpow(&key.e, &key.n)) % &key.n)
}

/// Signer side: raise the blinded value to the private exponent.
pub fn sign_blinded(blinded: &BigUint, key: &RsaKeyPair) -> Result<BigUint, CryptoError> {
    if blinded.is_zero() || blinded >= &key.public.n {
        return Err(CryptoError::MessageOutOfRange);
    }
    Ok(blinded.modpow(&key.d, &key.public.n))
}

/// Strip the blinding: `sig_blind * r^-1 mod n`.
pub fn unblind(blind_sig: &BigUint, factor: &BlindingFactor, key: &RsaPublicKey) -> BigUint {
    (blind_sig * &factor.r_inv) % &key.n
}

/// `sig^e == m (mod n)`. Malformed inputs simply fail verification.
pub fn rsa_verify(message: &BigUint, signature: &BigUint, key: &RsaPublicKey) -> bool {
    if message >= &key.n || signature >= &key.n {
        return false;
    }
    signature.modpow(&key.e, &key.n) == *message
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;
    use proptest::prelude::*;

    // Independent oracle: plain i128 modular exponentiation and extended
    // Euclid, used to derive expected values without touching the bignum
    // implementation under test.
    fn oracle_modpow(mut base: i128, mut exp: i128, m: i128) -> i128 {
        let mut acc = 1i128;
        base %= m;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = acc * base % m;
            }
            base = base * base % m;
            exp >>= 1;
        }
        acc
    }

    fn oracle_egcd(a: i128, b: i128) -> (i128, i128, i128) {
        if b == 0 {
            (a, 1, 0)
        } else {
            let (g, x, y) = oracle_egcd(b, a % b);
            (g, y, x - (a / b) * y)
        }
    }

    fn oracle_inv(a: i128, m: i128) -> i128 {
        let (g, x, _) = oracle_egcd(a, m);
        assert_eq!(g, 1);
        x.rem_euclid(m)
    }

    /// The toy key n=3233 (p=61, q=53), e=17, d = e^-1 mod lcm(60, 52).
    fn toy_key() -> RsaKeyPair {
        let lambda = 60i128 * 52 / oracle_egcd(60, 52).0;
        let d = oracle_inv(17, lambda);
        RsaKeyPair::from_parts(
            BigUint::from(3233u32),
            BigUint::from(17u32),
            BigUint::from(d as u32),
            12,
        )
    }

    #[test]
    fn identity_blinding_is_identity() {
        let key = toy_key();
        let one = BlindingFactor::from_value(BigUint::one(), key.public()).unwrap();
        let m = BigUint::from(1u32);
        assert_eq!(blind(&m, key.public(), &one).unwrap(), m);
        assert_eq!(sign_blinded(&BigUint::one(), &key).unwrap(), BigUint::one());
        assert!(rsa_verify(&BigUint::one(), &BigUint::one(), key.public()));
    }

    #[test]
    fn toy_values_match_oracle() {
        let key = toy_key();
        let m = BigUint::from(65u32);
        let r = BlindingFactor::from_value(BigUint::from(2u32), key.public()).unwrap();

        let expected_blinded = (65 * oracle_modpow(2, 17, 3233)).rem_euclid(3233);
        let blinded = blind(&m, key.public(), &r).unwrap();
        assert_eq!(blinded, BigUint::from(expected_blinded as u32));

        // Signing the classic blinded value 2790 = 65^17 mod 3233.
        assert_eq!(oracle_modpow(65, 17, 3233), 2790);
        let lambda = 60i128 * 52 / oracle_egcd(60, 52).0;
        let d = oracle_inv(17, lambda);
        let expected_sig = oracle_modpow(2790, d, 3233);
        let got = sign_blinded(&BigUint::from(2790u32), &key).unwrap();
        assert_eq!(got, BigUint::from(expected_sig as u32));
    }

    #[test]
    fn full_withdraw_pipeline_on_toy_key() {
        let key = toy_key();
        let m = BigUint::from(65u32);
        let r = BlindingFactor::from_value(BigUint::from(2u32), key.public()).unwrap();
        let blinded = blind(&m, key.public(), &r).unwrap();
        let blind_sig = sign_blinded(&blinded, &key).unwrap();
        let sig = unblind(&blind_sig, &r, key.public());
        assert!(rsa_verify(&m, &sig, key.public()));
        // s^e mod n recovers the message.
        assert_eq!(sig.modpow(&key.public().e, &key.public().n), m);
        // Tampered signature fails.
        let bad = (&sig + 1u32) % &key.public().n;
        assert!(!rsa_verify(&m, &bad, key.public()));
    }

    #[test]
    fn unblind_with_unit_factor_is_identity() {
        let key = toy_key();
        let one = BlindingFactor::from_value(BigUint::one(), key.public()).unwrap();
        let v = BigUint::from(1234u32);
        assert_eq!(unblind(&v, &one, key.public()), v);
    }

    #[test]
    fn roundtrip_over_seeded_random_messages() {
        let mut rng = derive_rng(11, "rsa-roundtrip");
        let key = RsaKeyPair::generate(128, &mut rng).unwrap();
        for _ in 0..100 {
            let m = loop {
                let m = rng.gen_biguint_below(&key.public().n);
                if !m.is_zero() {
                    break m;
                }
            };
            let r = BlindingFactor::random(key.public(), &mut rng);
            let blinded = blind(&m, key.public(), &r).unwrap();
            let sig = unblind(&sign_blinded(&blinded, &key).unwrap(), &r, key.public());
            assert!(rsa_verify(&m, &sig, key.public()));
            // Algebraic identity: unblinded blind signature equals m^d.
            assert_eq!(sig, m.modpow(&key.d, &key.public().n));
        }
    }

    #[test]
    fn range_errors() {
        let key = toy_key();
        let n = key.public().n.clone();
        let r = BlindingFactor::from_value(BigUint::from(2u32), key.public()).unwrap();
        assert_eq!(
            blind(&n, key.public(), &r).unwrap_err(),
            CryptoError::MessageOutOfRange
        );
        assert_eq!(
            sign_blinded(&BigUint::zero(), &key).unwrap_err(),
            CryptoError::MessageOutOfRange
        );
        // 61 divides 3233, so it is not invertible.
        assert_eq!(
            BlindingFactor::from_value(BigUint::from(61u32), key.public()).unwrap_err(),
            CryptoError::NonInvertibleBlinding
        );
    }

    /// Blindness at a toy modulus: over all invertible blinding factors the
    /// multiset of blinded values for m0 equals the multiset for m1, so the
    /// signer's view carries no information about the underlying message.
    #[test]
    fn blindness_by_exhaustive_enumeration() {
        let key = toy_key();
        let n = 3233u32;
        let view = |m: u32| -> Vec<u32> {
            let mut out = Vec::new();
            for r in 1..n {
                if oracle_egcd(i128::from(r), i128::from(n)).0 != 1 {
                    continue;
                }
                let f = BlindingFactor::from_value(BigUint::from(r), key.public()).unwrap();
                let b = blind(&BigUint::from(m), key.public(), &f).unwrap();
                out.push(num_traits::ToPrimitive::to_u32(&b).unwrap());
            }
            out.sort_unstable();
            out
        };
        assert_eq!(view(65), view(1234));
    }

    /// No exposed operation yields a verifying signature without the private
    /// exponent: blinding, unblinding and verification alone never produce
    /// one, and a guessed exponent fails.
    #[test]
    fn no_signature_without_private_key() {
        let mut rng = derive_rng(13, "rsa-forge");
        let key = RsaKeyPair::generate(128, &mut rng).unwrap();
        let m = BigUint::from(987654321u64);
        let r = BlindingFactor::random(key.public(), &mut rng);
        let blinded = blind(&m, key.public(), &r).unwrap();
        // Unblinding the blinded message itself is not a signature.
        assert!(!rsa_verify(&m, &unblind(&blinded, &r, key.public()), key.public()));
        // A random value is not a signature.
        let guess = rng.gen_biguint_below(&key.public().n);
        assert!(!rsa_verify(&m, &guess, key.public()));
        // "Signing" with the public exponent is not a signature.
        let fake = m.modpow(&key.public().e, &key.public().n);
        assert!(!rsa_verify(&m, &fake, key.public()));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn blind_then_unblind_verifies(seed: u64) {
            let mut rng = derive_rng(seed, "rsa-prop");
            let key = RsaKeyPair::generate(96, &mut rng).unwrap();
            let m = loop {
                let m = rng.gen_biguint_below(&key.public().n);
                if !m.is_zero() { break m; }
            };
            let r = BlindingFactor::random(key.public(), &mut rng);
            let blinded = blind(&m, key.public(), &r).unwrap();
            let sig = unblind(&sign_blinded(&blinded, &key).unwrap(), &r, key.public());
            prop_assert!(rsa_verify(&m, &sig, key.public()));
        }
    }
}
