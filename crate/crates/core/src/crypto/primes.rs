//! Probabilistic prime generation for toy RSA and Schnorr parameters.

use crate::rng::SimRng;
use num_bigint::{BigUint, RandBigInt};
use num_traits::{One, Zero};

const MILLER_RABIN_ROUNDS: usize = 32;
const SMALL_PRIMES: [u32; 15] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47];

/// Miller-Rabin with random bases drawn from `rng`.
pub fn is_probable_prime(n: &BigUint, rng: &mut SimRng) -> bool {
    let two = BigUint::from(2u32);
    if n < &two {
        return false;
    }
    for p in SMALL_PRIMES {
        let p = BigUint::from(p);
        if n == &p {
            return true;
        }
        if (n % &p).is_zero() {
            return false;
        }
    }

    let one = BigUint::one();
    let n_minus_1 = n - &one;
    let mut d = n_minus_1.clone();
    let mut s = 0u32;
    while (&d % &two).is_zero() {
        d >>= 1;
        s += 1;
    }

    'witness: for _ in 0..MILLER_RABIN_ROUNDS {
        let a = rng.gen_biguint_range(&two, &n_minus_1);
        let mut x = a.modpow(&d, n);
        if x.is_one() || x == n_minus_1 {
            continue;
        }
        for _ in 0..s.saturating_sub(1) {
            x = x.modpow(&two, n);
            if x == n_minus_1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Generate a prime with exactly `bits` bits and the top two bits set, so a
/// product of two such primes has full width.
pub fn gen_prime(bits: u64, rng: &mut SimRng) -> BigUint {
    assert!(bits >= 8, "prime width too small");
    loop {
        let mut candidate = rng.gen_biguint(bits);
        candidate.set_bit(bits - 1, true);
        candidate.set_bit(bits - 2, true);
        candidate.set_bit(0, true);
        if is_probable_prime(&candidate, rng) {
            return candidate;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;

    #[test]
    fn classifies_known_values() {
        let mut rng = derive_rng(1, "primes");
        for p in [2u32, 3, 61, 53, 65537, 104729] {
            assert!(is_probable_prime(&BigUint::from(p), &mut rng), "{p}");
        }
        // 561 is a Carmichael number; Miller-Rabin must still reject it.
        for c in [1u32, 4, 561, 65535, 100000] {
            assert!(!is_probable_prime(&BigUint::from(c), &mut rng), "{c}");
        }
    }

    #[test]
    fn generated_primes_have_requested_width() {
        let mut rng = derive_rng(2, "primes");
        for _ in 0..4 {
            let p = gen_prime(48, &mut rng);
            assert_eq!(p.bits(), 48);
            assert!(is_probable_prime(&p, &mut rng));
        }
    }
}
