//! Fixed-point codec between real embedding coordinates and exact plaintext
//! integers.
//!
//! Coordinates are quantized at scale 2^frac_bits and weights at
//! 2^weight_frac_bits; an inner product of encoded values therefore carries
//! scale 2^(2*frac_bits), and a weighted sum 2^(2*frac_bits+weight_frac_bits).
//! [`decode_product`] undoes the right power. Rounding is half-to-even so the
//! mapping is bit-deterministic across platforms.

use num_bigint::{BigInt, BigUint};
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::ahe::PlainInteger;
use crate::error::{Error, Result};

/// Quantization parameters shared by a database and every query against it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleConfig {
    /// Fractional bits for embedding coordinates; scale = 2^frac_bits.
    pub frac_bits: u32,
    /// Fractional bits for block weights. Weights are coarse task knobs, so
    /// they default to lower precision than coordinates.
    pub weight_frac_bits: u32,
    /// Declared bound on |coordinate| and |weight|.
    pub max_abs: f64,
}

impl Default for ScaleConfig {
    fn default() -> Self {
        ScaleConfig {
            frac_bits: 16,
            weight_frac_bits: 8,
            max_abs: 4.0,
        }
    }
}

impl ScaleConfig {
    pub fn coordinate_scale(&self) -> f64 {
        (2.0f64).powi(self.frac_bits as i32)
    }

    pub fn weight_scale(&self) -> f64 {
        (2.0f64).powi(self.weight_frac_bits as i32)
    }

    /// Largest encoded magnitude a coordinate can take.
    fn coordinate_bound(&self) -> BigUint {
        round_scaled(self.max_abs, self.frac_bits)
    }

    fn weight_bound(&self) -> BigUint {
        round_scaled(self.max_abs, self.weight_frac_bits)
    }

    /// Worst-case absolute error of a decoded d-dimensional inner product of
    /// encoded coordinates, relative to the exact real dot product.
    pub fn product_error_bound(&self, dim: usize) -> f64 {
        let d = dim as f64;
        let f = self.frac_bits as i32;
        d * (2.0 * self.max_abs + 1.0) * (2.0f64).powi(-f - 1) + d * (2.0f64).powi(-2 * f - 2)
    }
}

/// Quantize one coordinate: round-half-to-even of v * 2^frac_bits.
pub fn encode(v: f64, cfg: &ScaleConfig) -> Result<PlainInteger> {
    encode_at(v, cfg.frac_bits, cfg.max_abs)
}

/// Quantize one block weight at the weight scale.
pub fn encode_weight(w: f64, cfg: &ScaleConfig) -> Result<PlainInteger> {
    encode_at(w, cfg.weight_frac_bits, cfg.max_abs)
}

fn encode_at(v: f64, frac_bits: u32, max_abs: f64) -> Result<PlainInteger> {
    if !v.is_finite() || v.abs() > max_abs {
        return Err(Error::CoordinateOutOfRange { value: v, max_abs });
    }
    let scaled = (v * (2.0f64).powi(frac_bits as i32)).round_ties_even();
    Ok(PlainInteger::from_i128(scaled as i128))
}

/// Map a decrypted inner-product accumulator back to the real line.
///
/// `weighted` selects the extra weight-scale division applied by
/// weighted similarity scores.
pub fn decode_product(m: &PlainInteger, cfg: &ScaleConfig, weighted: bool) -> f64 {
    let exponent = 2 * cfg.frac_bits as i32
        + if weighted {
            cfg.weight_frac_bits as i32
        } else {
            0
        };
    let raw = m.value().to_f64().unwrap_or_else(|| {
        // Magnitudes beyond f64 range cannot occur within the overflow
        // budget; saturate rather than panic on hostile inputs.
        if m.value() < &BigInt::ZERO {
            f64::MIN
        } else {
            f64::MAX
        }
    });
    raw / (2.0f64).powi(exponent)
}

/// Exact round-half-to-even of v * 2^shift as an unsigned big integer, for
/// any shift: decomposes the float into mantissa and exponent so no width
/// limit applies. Used for the budget inequality, which must stay exact even
/// at scales far beyond what encode itself supports.
fn round_scaled(v: f64, shift: u32) -> BigUint {
    debug_assert!(v.is_finite() && v >= 0.0);
    if v == 0.0 {
        return BigUint::ZERO;
    }
    let bits = v.to_bits();
    let exp_raw = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    let (mant, exp) = if exp_raw == 0 {
        (frac, -1074i64)
    } else {
        (frac | (1u64 << 52), exp_raw - 1075)
    };
    let e = exp + i64::from(shift);
    if e >= 0 {
        BigUint::from(mant) << (e as u64)
    } else {
        let s = -e as u32;
        if s >= 64 {
            return BigUint::ZERO;
        }
        let kept = mant >> s;
        let dropped = mant & ((1u64 << s) - 1);
        let half = 1u64 << (s - 1);
        let rounded = if dropped > half || (dropped == half && kept & 1 == 1) {
            kept + 1
        } else {
            kept
        };
        BigUint::from(rounded)
    }
}

/// Outcome of the overflow-budget check: whether accumulated products at
/// dimension `dim` stay below n/2, and the largest dimension that does.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BudgetReport {
    pub holds: bool,
    pub max_dim: usize,
}

/// Evaluate d * (max_abs * 2^f)^2 * (max_abs * 2^f_w) < n / 2 exactly.
///
/// The bound is what guarantees sign-correct decoding: every weighted,
/// d-term inner product of encoded values stays strictly inside the signed
/// plaintext range.
pub fn overflow_budget(cfg: &ScaleConfig, dim: usize, n: &BigUint) -> BudgetReport {
    let per_term = cfg.coordinate_bound().pow(2) * cfg.weight_bound();
    if per_term == BigUint::ZERO {
        return BudgetReport {
            holds: true,
            max_dim: usize::MAX,
        };
    }
    // d * per_term < n/2  <=>  2 * d * per_term <= n - 1 for integer n.
    let max_dim_big = (n - 1u8) / (per_term * 2u8);
    let max_dim = max_dim_big
        .to_u64()
        .map_or(usize::MAX, |v| usize::try_from(v).unwrap_or(usize::MAX));
    BudgetReport {
        holds: dim <= max_dim,
        max_dim,
    }
}
