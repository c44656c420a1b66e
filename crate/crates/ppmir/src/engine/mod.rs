//! Encrypted inner products and retrieval.
//!
//! Exactly one side of every encrypted computation is ciphertext: either the
//! query (encrypted-query setting) or the database vector (encrypted-database
//! setting). The other side stays plaintext, so a dot product needs only
//! ciphertext additions and plaintext-scalar multiplications. The blocked
//! form evaluates each labeled block separately and sums homomorphically; the
//! weighted form scales each block's score by a public quantized weight
//! before the sum.

mod topk;

pub use topk::{topk_search, Opener, QueryRef, RankedHit, RetrievalResult, SearchKind, TargetRef};

use crate::ahe::{Ciphertext, PlainInteger, PublicKey};
use crate::codec::{self, ScaleConfig};
use crate::error::{Error, Result};
use crate::store::{BlockSchema, EmbeddingVector, EncryptedVector, WeightVector};

/// Which side of the computation was encrypted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    EncryptedQuery,
    EncryptedDb,
    PlaintextOracle,
}

impl Setting {
    pub fn as_str(&self) -> &'static str {
        match self {
            Setting::EncryptedQuery => "encrypted_query",
            Setting::EncryptedDb => "encrypted_db",
            Setting::PlaintextOracle => "plaintext",
        }
    }
}

impl std::fmt::Display for Setting {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which similarity form produced a score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    Plain,
    Blocked,
    Weighted,
}

impl ScoreKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScoreKind::Plain => "plain",
            ScoreKind::Blocked => "blocked",
            ScoreKind::Weighted => "weighted",
        }
    }
}

/// A similarity score with provenance. `raw` is the decrypted integer
/// accumulator for scores that went through the encrypted path (or its
/// quantized equivalent for oracle scores computed by the retrieval layer);
/// the float oracle [`plain_inner`] leaves it empty.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityScore {
    pub query_id: String,
    pub target_id: String,
    pub raw: Option<PlainInteger>,
    pub value: f64,
    pub kind: ScoreKind,
    pub setting: Setting,
}

/// Exact floating-point dot product, the reference every encrypted path is
/// checked against.
pub fn plain_inner(x: &EmbeddingVector, y: &EmbeddingVector) -> Result<SimilarityScore> {
    check_plain_pair(x, y)?;
    let value = x.values().iter().zip(y.values()).map(|(a, b)| a * b).sum();
    Ok(SimilarityScore {
        query_id: x.id.clone(),
        target_id: y.id.clone(),
        raw: None,
        value,
        kind: ScoreKind::Plain,
        setting: Setting::PlaintextOracle,
    })
}

fn check_plain_pair(x: &EmbeddingVector, y: &EmbeddingVector) -> Result<()> {
    if x.schema_ref() != y.schema_ref() || x.dim() != y.dim() {
        return Err(Error::SchemaMismatch(format!(
            "vectors {:?} and {:?} do not share a schema",
            x.id, y.id
        )));
    }
    Ok(())
}

fn check_mixed_pair(plain: &EmbeddingVector, enc: &EncryptedVector) -> Result<()> {
    if plain.schema_ref() != enc.schema_ref() || plain.dim() != enc.dim() {
        return Err(Error::SchemaMismatch(format!(
            "vectors {:?} and {:?} do not share a schema",
            plain.id, enc.id
        )));
    }
    Ok(())
}

fn check_budget(pk: &PublicKey, cfg: &ScaleConfig, dim: usize) -> Result<()> {
    let budget = codec::overflow_budget(cfg, dim, pk.modulus());
    if !budget.holds {
        return Err(Error::BudgetExceeded {
            dim,
            max_dim: budget.max_dim,
        });
    }
    Ok(())
}

/// Homomorphic dot product of encrypted cells against plaintext coordinates
/// over the index range [lo, hi): sum of scalar_mul(cell_i, encode(coord_i)),
/// computed as one linear combination so every negative coordinate shares a
/// single modular inversion. Zero coordinates drop out entirely, which also
/// makes crafted queries with zeroed blocks cheap to evaluate.
fn masked_product(
    pk: &PublicKey,
    cells: &[Ciphertext],
    coords: &[f64],
    cfg: &ScaleConfig,
    lo: usize,
    hi: usize,
) -> Result<Ciphertext> {
    let scalars = coords[lo..hi]
        .iter()
        .map(|&v| codec::encode(v, cfg))
        .collect::<Result<Vec<_>>>()?;
    pk.linear_combination(cells[lo..hi].iter().zip(scalars.iter()))
}

/// Encrypted-query setting: the query arrives encrypted, the database vector
/// is plaintext. Returns an encryption of the quantized dot product; no
/// private key is involved.
pub fn encquery_inner(
    enc_x: &EncryptedVector,
    y: &EmbeddingVector,
    pk: &PublicKey,
    cfg: &ScaleConfig,
) -> Result<Ciphertext> {
    check_mixed_pair(y, enc_x)?;
    check_budget(pk, cfg, y.dim())?;
    masked_product(pk, enc_x.cells(), y.values(), cfg, 0, y.dim())
}

/// Encrypted-database setting: mirror image of [`encquery_inner`] with the
/// roles of query and database swapped.
pub fn encdb_inner(
    x: &EmbeddingVector,
    enc_y: &EncryptedVector,
    pk: &PublicKey,
    cfg: &ScaleConfig,
) -> Result<Ciphertext> {
    check_mixed_pair(x, enc_y)?;
    check_budget(pk, cfg, x.dim())?;
    masked_product(pk, enc_y.cells(), x.values(), cfg, 0, x.dim())
}

/// Per-block encrypted scores plus their homomorphic total.
#[derive(Debug, Clone)]
pub struct BlockedScores {
    pub per_block: Vec<Ciphertext>,
    pub total: Ciphertext,
}

/// Block-partitioned similarity: one encrypted score per labeled block, and
/// the total obtained by adding them. Because ciphertext addition is residue
/// multiplication, the total is bit-identical to the unpartitioned product.
pub fn blocked_similarity(
    x: &EmbeddingVector,
    enc_y: &EncryptedVector,
    schema: &BlockSchema,
    pk: &PublicKey,
    cfg: &ScaleConfig,
) -> Result<BlockedScores> {
    check_schema_ref(schema, x.schema_ref())?;
    check_mixed_pair(x, enc_y)?;
    check_budget(pk, cfg, x.dim())?;

    let mut per_block = Vec::with_capacity(schema.block_count());
    for block in schema.blocks() {
        per_block.push(masked_product(
            pk,
            enc_y.cells(),
            x.values(),
            cfg,
            block.offset,
            block.offset + block.len,
        )?);
    }
    let mut total = pk.zero_ciphertext();
    for b in &per_block {
        total = pk.add_ct(&total, b)?;
    }
    Ok(BlockedScores { per_block, total })
}

/// Weighted hierarchical similarity: each block score is scaled by its public
/// weight (a plaintext-scalar multiplication) before the homomorphic sum.
/// The result carries scale 2^(2*frac_bits + weight_frac_bits).
pub fn weighted_similarity(
    x: &EmbeddingVector,
    enc_y: &EncryptedVector,
    schema: &BlockSchema,
    weights: &WeightVector,
    pk: &PublicKey,
    cfg: &ScaleConfig,
) -> Result<Ciphertext> {
    weights.check_len(schema)?;
    let blocked = blocked_similarity(x, enc_y, schema, pk, cfg)?;
    weighted_total(&blocked, weights, pk, cfg)
}

/// Apply weights to already-computed per-block scores.
pub fn weighted_total(
    blocked: &BlockedScores,
    weights: &WeightVector,
    pk: &PublicKey,
    cfg: &ScaleConfig,
) -> Result<Ciphertext> {
    if weights.0.len() != blocked.per_block.len() {
        return Err(Error::WeightCount {
            expected: blocked.per_block.len(),
            got: weights.0.len(),
        });
    }
    let mut acc = pk.zero_ciphertext();
    for (block_score, &w) in blocked.per_block.iter().zip(&weights.0) {
        let scalar = codec::encode_weight(w, cfg)?;
        if scalar.is_zero() {
            continue;
        }
        let term = pk.scalar_mul(block_score, &scalar)?;
        acc = pk.add_ct(&acc, &term)?;
    }
    Ok(acc)
}

/// Promote an unweighted score to the weighted scale (multiply by the
/// encoding of 1.0) so scores of both kinds can be compared after decoding.
pub fn promote_to_weighted_scale(
    ct: &Ciphertext,
    pk: &PublicKey,
    cfg: &ScaleConfig,
) -> Result<Ciphertext> {
    let unit = codec::encode_weight(1.0, cfg)?;
    pk.scalar_mul(ct, &unit)
}

fn check_schema_ref(schema: &BlockSchema, seen: &str) -> Result<()> {
    if schema.fingerprint() != seen {
        return Err(Error::SchemaMismatch(
            "supplied schema is not the one the vectors were built against".into(),
        ));
    }
    Ok(())
}

/// The quantized integer a correct encrypted path must decrypt to:
/// sum of encode(x_i) * encode(y_i), optionally weighted per block.
pub fn quantized_inner(
    x: &EmbeddingVector,
    y: &EmbeddingVector,
    cfg: &ScaleConfig,
) -> Result<PlainInteger> {
    check_plain_pair(x, y)?;
    let mut acc = num_bigint::BigInt::from(0u8);
    for (a, b) in x.values().iter().zip(y.values()) {
        acc += codec::encode(*a, cfg)?.value() * codec::encode(*b, cfg)?.value();
    }
    Ok(PlainInteger::new(acc))
}

/// Weighted counterpart of [`quantized_inner`], at the weighted scale.
pub fn quantized_weighted_inner(
    x: &EmbeddingVector,
    y: &EmbeddingVector,
    schema: &BlockSchema,
    weights: &WeightVector,
    cfg: &ScaleConfig,
) -> Result<PlainInteger> {
    check_plain_pair(x, y)?;
    weights.check_len(schema)?;
    let mut acc = num_bigint::BigInt::from(0u8);
    for (block, &w) in schema.blocks().iter().zip(&weights.0) {
        let mut block_acc = num_bigint::BigInt::from(0u8);
        for i in block.offset..block.offset + block.len {
            block_acc += codec::encode(x.values()[i], cfg)?.value()
                * codec::encode(y.values()[i], cfg)?.value();
        }
        acc += codec::encode_weight(w, cfg)?.value() * block_acc;
    }
    Ok(PlainInteger::new(acc))
}
