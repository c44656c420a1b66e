//! Probabilistic prime generation for key material.

use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::RngCore;

/// Miller-Rabin rounds. Each round has soundness error at most 1/4, so 40
/// rounds bound the composite-acceptance probability by 2^-80.
pub const MILLER_RABIN_ROUNDS: usize = 40;

/// Primes below 2000, used to cheaply reject most candidates before the
/// Miller-Rabin rounds.
fn small_primes() -> &'static [u64] {
    use std::sync::OnceLock;
    static TABLE: OnceLock<Vec<u64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let limit = 2000usize;
        let mut sieve = vec![true; limit];
        sieve[0] = false;
        sieve[1] = false;
        for i in 2..limit {
            if sieve[i] {
                let mut j = i * i;
                while j < limit {
                    sieve[j] = false;
                    j += i;
                }
            }
        }
        (2..limit).filter(|&i| sieve[i]).map(|i| i as u64).collect()
    })
}

/// Miller-Rabin primality test with uniformly random witnesses.
pub fn is_probable_prime<R: RngCore>(n: &BigUint, rounds: usize, rng: &mut R) -> bool {
    let two = BigUint::from(2u8);
    if n < &two {
        return false;
    }
    for &p in small_primes() {
        let p = BigUint::from(p);
        if n == &p {
            return true;
        }
        if (n % &p).is_zero() {
            return false;
        }
    }

    // n - 1 = d * 2^s with d odd
    let n_minus_one = n - BigUint::one();
    let s = n_minus_one.trailing_zeros().unwrap_or(0);
    let d = &n_minus_one >> s;

    'witness: for _ in 0..rounds {
        let a = rng.gen_biguint_range(&two, &n_minus_one);
        let mut x = a.modpow(&d, n);
        if x.is_one() || x == n_minus_one {
            continue;
        }
        for _ in 0..s.saturating_sub(1) {
            x = x.modpow(&two, n);
            if x == n_minus_one {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// A random probable prime with exactly `bits` bits and the two most
/// significant bits set, so the product of two such primes always has exactly
/// `2*bits` bits.
pub fn gen_prime<R: RngCore>(bits: u64, rng: &mut R) -> BigUint {
    assert!(bits >= 16, "prime size too small");
    let top_two = (BigUint::from(3u8)) << (bits - 2);
    loop {
        let mut candidate = rng.gen_biguint(bits) | &top_two;
        candidate |= BigUint::one();
        if is_probable_prime(&candidate, MILLER_RABIN_ROUNDS, rng) {
            return candidate;
        }
    }
}

/// Carmichael function for n = p*q with p, q prime: lcm(p-1, q-1).
pub fn carmichael(p: &BigUint, q: &BigUint) -> BigUint {
    (p - BigUint::one()).lcm(&(q - BigUint::one()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn known_primes_and_composites() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for p in [2u64, 3, 5, 7, 2003, 65537, 4294967311] {
            assert!(
                is_probable_prime(&BigUint::from(p), 20, &mut rng),
                "{p} should be prime"
            );
        }
        for c in [1u64, 4, 9, 2001, 65535, 4294967297] {
            assert!(
                !is_probable_prime(&BigUint::from(c), 20, &mut rng),
                "{c} should be composite"
            );
        }
    }

    #[test]
    fn rejects_strong_pseudoprime() {
        // 3215031751 is a strong pseudoprime to bases 2, 3, 5 and 7; random
        // witnesses must still reject it.
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        assert!(!is_probable_prime(
            &BigUint::from(3215031751u64),
            40,
            &mut rng
        ));
    }

    #[test]
    fn generated_primes_have_exact_width() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for _ in 0..4 {
            let p = gen_prime(128, &mut rng);
            assert_eq!(p.bits(), 128);
            let q = gen_prime(128, &mut rng);
            assert_eq!((p * q).bits(), 256);
        }
    }
}
