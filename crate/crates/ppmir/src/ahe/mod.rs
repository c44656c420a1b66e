//! Exact additively homomorphic encryption (Paillier construction).
//!
//! Ciphertexts live in Z*_{n^2}. Adding plaintexts is multiplying ciphertext
//! residues; multiplying a plaintext by a public scalar is raising the
//! ciphertext to that scalar. Both are exact integer operations with no noise
//! budget, so every correctness property in this crate is an exact assertion.
//!
//! Signed plaintexts use the usual centered convention: residues above n/2
//! decode as negative numbers, which makes the scheme close under the signed
//! arithmetic the similarity engine needs.

mod primes;

pub use primes::{is_probable_prime, MILLER_RABIN_ROUNDS};

use num_bigint::{BigInt, BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Key sizes accepted by [`keygen`]. 512 is a test-only size: fast enough for
/// property suites, far too small for real deployments.
pub const ALLOWED_KEY_BITS: [u32; 4] = [512, 1024, 2048, 3072];

/// Default modulus size for production key material.
pub const DEFAULT_KEY_BITS: u32 = 2048;

/// Truncated fingerprint of a public modulus; tags every ciphertext so that
/// operands under different keys are rejected instead of silently combined.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct KeyId(String);

impl KeyId {
    fn of_modulus(n: &BigUint) -> Self {
        let digest = Sha256::digest(n.to_bytes_be());
        KeyId(hex::encode(&digest[..16]))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for KeyId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Public half of a key pair: the composite modulus and derived constants.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicKey {
    n: BigUint,
    n_squared: BigUint,
    g: BigUint,
    bits: u32,
    key_id: KeyId,
}

/// Private half: Carmichael value and the decryption coefficient.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrivateKey {
    lambda: BigUint,
    mu: BigUint,
    bits: u32,
    key_id: KeyId,
}

#[derive(Debug, Clone)]
pub struct KeyPair {
    pub public: PublicKey,
    pub private: PrivateKey,
}

/// One encrypted integer residue in [0, n^2).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ciphertext {
    value: BigUint,
    key_id: KeyId,
}

/// A signed plaintext in (-n/2, n/2). The modulus is not attached; range
/// checks happen when the value meets a key.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct PlainInteger {
    value: BigInt,
}

impl PlainInteger {
    pub fn new(value: BigInt) -> Self {
        PlainInteger { value }
    }

    pub fn from_i64(value: i64) -> Self {
        PlainInteger {
            value: BigInt::from(value),
        }
    }

    pub fn from_i128(value: i128) -> Self {
        PlainInteger {
            value: BigInt::from(value),
        }
    }

    /// Signed decode of a canonical residue in [0, n): values above n/2 wrap
    /// to negatives.
    pub fn from_residue(residue: BigUint, n: &BigUint) -> Self {
        let value = if &residue * 2u8 >= *n {
            BigInt::from(residue) - BigInt::from(n.clone())
        } else {
            BigInt::from(residue)
        };
        PlainInteger { value }
    }

    /// Canonical residue in [0, n).
    pub fn residue(&self, n: &BigUint) -> BigUint {
        let n_int = BigInt::from(n.clone());
        let r = self.value.mod_floor(&n_int);
        r.to_biguint()
            .expect("mod_floor yields a non-negative value")
    }

    pub fn value(&self) -> &BigInt {
        &self.value
    }

    pub fn is_zero(&self) -> bool {
        self.value.is_zero()
    }

    fn in_range(&self, n: &BigUint) -> bool {
        let bound = BigInt::from(n.clone());
        let doubled = self.value.abs() * 2;
        doubled < bound
    }
}

impl std::fmt::Display for PlainInteger {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.value.fmt(f)
    }
}

impl From<i64> for PlainInteger {
    fn from(v: i64) -> Self {
        PlainInteger::from_i64(v)
    }
}

/// Generate a fresh key pair with an exactly `bits`-wide modulus.
///
/// Primes are drawn with their two top bits forced so |p*q| = bits always
/// holds; the loop retries in the (absurdly unlikely) event p = q.
pub fn keygen<R: RngCore>(bits: u32, rng: &mut R) -> Result<KeyPair> {
    if !ALLOWED_KEY_BITS.contains(&bits) {
        return Err(Error::UnsupportedKeySize { bits });
    }
    let half = u64::from(bits) / 2;
    loop {
        let p = primes::gen_prime(half, rng);
        let q = primes::gen_prime(half, rng);
        if p == q {
            continue;
        }
        let n = &p * &q;
        debug_assert_eq!(n.bits(), u64::from(bits));
        let n_squared = &n * &n;
        let g = &n + BigUint::one();
        let lambda = primes::carmichael(&p, &q);

        // mu = (L(g^lambda mod n^2))^-1 mod n, with L(u) = (u - 1) / n.
        let u = g.modpow(&lambda, &n_squared);
        let l = (&u - BigUint::one()) / &n;
        let Some(mu) = l.modinv(&n) else {
            // gcd(L, n) != 1 can only happen for degenerate primes; redraw.
            continue;
        };

        let key_id = KeyId::of_modulus(&n);
        return Ok(KeyPair {
            public: PublicKey {
                n,
                n_squared,
                g,
                bits,
                key_id: key_id.clone(),
            },
            private: PrivateKey {
                lambda,
                mu,
                bits,
                key_id,
            },
        });
    }
}

impl PublicKey {
    /// Rebuild a public key from its modulus (the generator is fixed to n+1).
    pub fn from_modulus(n: BigUint) -> Result<Self> {
        let bits =
            u32::try_from(n.bits()).map_err(|_| Error::UnsupportedKeySize { bits: u32::MAX })?;
        if !ALLOWED_KEY_BITS.contains(&bits) {
            return Err(Error::UnsupportedKeySize { bits });
        }
        let n_squared = &n * &n;
        let g = &n + BigUint::one();
        let key_id = KeyId::of_modulus(&n);
        Ok(PublicKey {
            n,
            n_squared,
            g,
            bits,
            key_id,
        })
    }

    pub fn modulus(&self) -> &BigUint {
        &self.n
    }

    pub fn modulus_squared(&self) -> &BigUint {
        &self.n_squared
    }

    pub fn generator(&self) -> &BigUint {
        &self.g
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn key_id(&self) -> &KeyId {
        &self.key_id
    }

    /// Encrypt a signed plaintext: c = g^m * r^n mod n^2 with r uniform in
    /// [1, n) and coprime to n. With g = n+1 the first factor collapses to
    /// 1 + m*n mod n^2, leaving a single full-width exponentiation.
    pub fn encrypt<R: RngCore>(&self, m: &PlainInteger, rng: &mut R) -> Result<Ciphertext> {
        if !m.in_range(&self.n) {
            return Err(Error::PlaintextOutOfRange {
                value: m.to_string(),
            });
        }
        let m_res = m.residue(&self.n);
        let g_m = (BigUint::one() + &m_res * &self.n) % &self.n_squared;
        let r = self.sample_unit(rng);
        let r_n = r.modpow(&self.n, &self.n_squared);
        let value = g_m * r_n % &self.n_squared;
        Ok(Ciphertext {
            value,
            key_id: self.key_id.clone(),
        })
    }

    /// The trivial encryption of zero (residue 1), the identity for
    /// [`PublicKey::add_ct`]. Not semantically hidden; rerandomize before
    /// releasing it.
    pub fn zero_ciphertext(&self) -> Ciphertext {
        Ciphertext {
            value: BigUint::one(),
            key_id: self.key_id.clone(),
        }
    }

    /// Homomorphic addition: Dec(add_ct(a, b)) = Dec(a) + Dec(b).
    pub fn add_ct(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
        self.check_key(a)?;
        self.check_key(b)?;
        let value = &a.value * &b.value % &self.n_squared;
        Ok(Ciphertext {
            value,
            key_id: self.key_id.clone(),
        })
    }

    /// Plaintext-scalar multiplication: Dec(scalar_mul(c, s)) = s * Dec(c).
    ///
    /// Square-and-multiply in the exponent, O(log s) group operations rather
    /// than literal s-fold addition; negative scalars invert the ciphertext
    /// residue first. s = 0 yields the trivial encryption of zero.
    pub fn scalar_mul(&self, c: &Ciphertext, s: &PlainInteger) -> Result<Ciphertext> {
        self.check_key(c)?;
        if s.is_zero() {
            return Ok(self.zero_ciphertext());
        }
        let magnitude = s.value.abs().to_biguint().expect("abs is non-negative");
        let base = if s.value.is_negative() {
            c.value
                .modinv(&self.n_squared)
                .ok_or(Error::NonInvertibleCiphertext)?
        } else {
            c.value.clone()
        };
        let value = pow_mod(&base, &magnitude, &self.n_squared);
        Ok(Ciphertext {
            value,
            key_id: self.key_id.clone(),
        })
    }

    /// Homomorphic linear combination: an encryption of sum(s_i * Dec(c_i)).
    ///
    /// Residue-identical to folding `scalar_mul` terms with `add_ct`, but all
    /// negative-scalar terms share a single modular inversion (the inverse of
    /// a product is the product of the inverses), which is what keeps large
    /// mixed-sign dot products cheap.
    pub fn linear_combination<'a, I>(&self, terms: I) -> Result<Ciphertext>
    where
        I: IntoIterator<Item = (&'a Ciphertext, &'a PlainInteger)>,
    {
        let mut positive = BigUint::one();
        let mut negated = BigUint::one();
        for (c, s) in terms {
            self.check_key(c)?;
            if s.is_zero() {
                continue;
            }
            let magnitude = s.value.abs().to_biguint().expect("abs is non-negative");
            let powered = pow_mod(&c.value, &magnitude, &self.n_squared);
            if s.value.is_negative() {
                negated = negated * powered % &self.n_squared;
            } else {
                positive = positive * powered % &self.n_squared;
            }
        }
        if !negated.is_one() {
            let inv = negated
                .modinv(&self.n_squared)
                .ok_or(Error::NonInvertibleCiphertext)?;
            positive = positive * inv % &self.n_squared;
        }
        Ok(Ciphertext {
            value: positive,
            key_id: self.key_id.clone(),
        })
    }

    /// Fresh randomness over the same plaintext: c * r^n mod n^2.
    pub fn rerandomize<R: RngCore>(&self, c: &Ciphertext, rng: &mut R) -> Result<Ciphertext> {
        self.check_key(c)?;
        let r = self.sample_unit(rng);
        let value = &c.value * r.modpow(&self.n, &self.n_squared) % &self.n_squared;
        Ok(Ciphertext {
            value,
            key_id: self.key_id.clone(),
        })
    }

    fn check_key(&self, c: &Ciphertext) -> Result<()> {
        if c.key_id != self.key_id {
            return Err(Error::KeyMismatch {
                expected: self.key_id.to_string(),
                found: c.key_id.to_string(),
            });
        }
        Ok(())
    }

    fn sample_unit<R: RngCore>(&self, rng: &mut R) -> BigUint {
        loop {
            let r = rng.gen_biguint_range(&BigUint::one(), &self.n);
            if r.gcd(&self.n).is_one() {
                return r;
            }
        }
    }
}

impl PrivateKey {
    pub fn key_id(&self) -> &KeyId {
        &self.key_id
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// Decrypt: m = L(c^lambda mod n^2) * mu mod n, then signed decode.
    pub fn decrypt(&self, pk: &PublicKey, c: &Ciphertext) -> Result<PlainInteger> {
        if c.key_id != self.key_id {
            return Err(Error::KeyMismatch {
                expected: self.key_id.to_string(),
                found: c.key_id.to_string(),
            });
        }
        if pk.key_id != self.key_id {
            return Err(Error::KeyMismatch {
                expected: self.key_id.to_string(),
                found: pk.key_id.to_string(),
            });
        }
        let u = c.value.modpow(&self.lambda, &pk.n_squared);
        let l = (&u - BigUint::one()) / &pk.n;
        let residue = l * &self.mu % &pk.n;
        Ok(PlainInteger::from_residue(residue, &pk.n))
    }
}

impl KeyPair {
    /// Pair a loaded public and private key, verifying they belong together:
    /// fingerprints must match and mu * L(g^lambda mod n^2) must be 1 mod n.
    pub fn from_parts(public: PublicKey, private: PrivateKey) -> Result<Self> {
        if public.key_id != private.key_id {
            return Err(Error::KeyMismatch {
                expected: public.key_id.to_string(),
                found: private.key_id.to_string(),
            });
        }
        let u = public.g.modpow(&private.lambda, &public.n_squared);
        let l = (&u - BigUint::one()) / &public.n;
        if (l * &private.mu % &public.n) != BigUint::one() {
            return Err(Error::Manifest(
                "private key does not invert this public key".into(),
            ));
        }
        Ok(KeyPair { public, private })
    }

    pub fn decrypt(&self, c: &Ciphertext) -> Result<PlainInteger> {
        self.private.decrypt(&self.public, c)
    }
}

impl Ciphertext {
    pub fn value(&self) -> &BigUint {
        &self.value
    }

    pub fn key_id(&self) -> &KeyId {
        &self.key_id
    }

    /// Exact size of the residue in bytes; the unit the benchmark harness
    /// accounts in.
    pub fn byte_len(&self) -> usize {
        (self.value.bits() as usize).div_ceil(8)
    }

    pub fn to_hex(&self) -> String {
        self.value.to_str_radix(16)
    }

    pub fn from_hex(hex_residue: &str, key_id: KeyId) -> Result<Self> {
        let value = BigUint::parse_bytes(hex_residue.as_bytes(), 16).ok_or_else(|| {
            Error::InvalidArgument(format!("invalid hex ciphertext residue {hex_residue:?}"))
        })?;
        Ok(Ciphertext { value, key_id })
    }
}

/// Modular exponentiation with a non-negative exponent. Small exponents (the
/// common case: quantized embedding coordinates) take a plain
/// square-and-multiply ladder, which beats the Montgomery setup cost of
/// `modpow`; anything wider falls through to `modpow`.
fn pow_mod(base: &BigUint, exp: &BigUint, modulus: &BigUint) -> BigUint {
    if exp.is_zero() {
        return BigUint::one();
    }
    match exp.to_u64() {
        Some(mut e) => {
            let mut acc = BigUint::one();
            let mut b = base % modulus;
            while e > 0 {
                if e & 1 == 1 {
                    acc = &acc * &b % modulus;
                }
                e >>= 1;
                if e > 0 {
                    b = &b * &b % modulus;
                }
            }
            acc
        }
        None => base.modpow(exp, modulus),
    }
}

// --- serialization ----------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct PublicKeyWire {
    bits: u32,
    key_id: KeyId,
    n: String,
    g: String,
}

#[derive(Serialize, Deserialize)]
struct PrivateKeyWire {
    bits: u32,
    key_id: KeyId,
    lambda: String,
    mu: String,
}

fn parse_hex(field: &str, value: &str) -> Result<BigUint> {
    BigUint::parse_bytes(value.as_bytes(), 16)
        .ok_or_else(|| Error::Manifest(format!("field {field:?} is not a hex integer")))
}

impl PublicKey {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&PublicKeyWire {
            bits: self.bits,
            key_id: self.key_id.clone(),
            n: self.n.to_str_radix(16),
            g: self.g.to_str_radix(16),
        })
        .expect("public key serializes")
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let wire: PublicKeyWire = serde_json::from_str(json)?;
        let n = parse_hex("n", &wire.n)?;
        let g = parse_hex("g", &wire.g)?;
        let pk = PublicKey::from_modulus(n)?;
        if pk.g != g {
            return Err(Error::Manifest("generator is not n + 1".into()));
        }
        if pk.key_id != wire.key_id {
            return Err(Error::Manifest("public key fingerprint mismatch".into()));
        }
        if pk.bits != wire.bits {
            return Err(Error::Manifest("declared bit length mismatch".into()));
        }
        Ok(pk)
    }
}

impl PrivateKey {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&PrivateKeyWire {
            bits: self.bits,
            key_id: self.key_id.clone(),
            lambda: self.lambda.to_str_radix(16),
            mu: self.mu.to_str_radix(16),
        })
        .expect("private key serializes")
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let wire: PrivateKeyWire = serde_json::from_str(json)?;
        Ok(PrivateKey {
            lambda: parse_hex("lambda", &wire.lambda)?,
            mu: parse_hex("mu", &wire.mu)?,
            bits: wire.bits,
            key_id: wire.key_id,
        })
    }
}
