//! Data model, ingestion, synthetic generation and persistence for
//! block-structured music embeddings and their encrypted counterparts.

mod persist;
mod schema;
mod synth;

pub use persist::{
    load_encrypted_db, load_plain_db, save_encrypted_db, save_plain_db, DbMode, EncryptedDb,
    Manifest, PlainDb, QueryFile,
};
pub use schema::{Block, BlockSchema, DEFAULT_BLOCK_LABELS};
pub use synth::{synth_corpus, CorpusProfile, GroundTruth, SynthCorpus};

use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ahe::{Ciphertext, KeyId, PublicKey};
use crate::codec::{self, ScaleConfig};
use crate::error::{Error, Result};
use crate::par::{self, Parallelism};
use crate::rng::Randomness;

/// One real-valued embedding with optional creator attribution.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    pub id: String,
    pub creator: Option<String>,
    values: Vec<f64>,
    schema_ref: String,
}

impl EmbeddingVector {
    pub fn new(
        id: impl Into<String>,
        creator: Option<String>,
        values: Vec<f64>,
        schema: &BlockSchema,
    ) -> Result<Self> {
        let id = id.into();
        if values.len() != schema.total_dim() {
            return Err(Error::SchemaMismatch(format!(
                "vector {id:?} has {} values, schema expects {}",
                values.len(),
                schema.total_dim()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "vector {id:?} contains non-finite value {bad}"
            )));
        }
        Ok(EmbeddingVector {
            id,
            creator,
            values,
            schema_ref: schema.fingerprint(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn schema_ref(&self) -> &str {
        &self.schema_ref
    }

    /// Unit-norm copy; with normalized corpora the inner product behaves as
    /// cosine similarity, so a vector is its own best match.
    pub fn l2_normalized(&self) -> EmbeddingVector {
        let norm = self.values.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut out = self.clone();
        if norm > 0.0 {
            for v in &mut out.values {
                *v /= norm;
            }
        }
        out
    }
}

/// Element-wise encryption of an embedding; ids, creators and block structure
/// travel with the ciphertext cells.
#[derive(Debug, Clone, PartialEq)]
pub struct EncryptedVector {
    pub id: String,
    pub creator: Option<String>,
    cells: Vec<Ciphertext>,
    schema_ref: String,
    key_id: KeyId,
}

impl EncryptedVector {
    pub fn from_parts(
        id: String,
        creator: Option<String>,
        cells: Vec<Ciphertext>,
        schema_ref: String,
    ) -> Result<Self> {
        let key_id = cells
            .first()
            .map(|c| c.key_id().clone())
            .ok_or_else(|| Error::InvalidArgument("encrypted vector has no cells".into()))?;
        if let Some(bad) = cells.iter().find(|c| c.key_id() != &key_id) {
            return Err(Error::KeyMismatch {
                expected: key_id.to_string(),
                found: bad.key_id().to_string(),
            });
        }
        Ok(EncryptedVector {
            id,
            creator,
            cells,
            schema_ref,
            key_id,
        })
    }

    pub fn cells(&self) -> &[Ciphertext] {
        &self.cells
    }

    pub fn dim(&self) -> usize {
        self.cells.len()
    }

    pub fn schema_ref(&self) -> &str {
        &self.schema_ref
    }

    pub fn key_id(&self) -> &KeyId {
        &self.key_id
    }

    /// Total serialized residue bytes across all cells.
    pub fn ciphertext_bytes(&self) -> usize {
        self.cells.iter().map(|c| c.byte_len()).sum()
    }
}

/// Per-block public weights, aligned with a schema's block order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector(pub Vec<f64>);

impl WeightVector {
    pub fn uniform(k: usize) -> Self {
        WeightVector(vec![1.0; k])
    }

    pub fn one_hot(k: usize, hot: usize) -> Self {
        let mut w = vec![0.0; k];
        if hot < k {
            w[hot] = 1.0;
        }
        WeightVector(w)
    }

    pub fn check_len(&self, schema: &BlockSchema) -> Result<()> {
        if self.0.len() != schema.block_count() {
            return Err(Error::WeightCount {
                expected: schema.block_count(),
                got: self.0.len(),
            });
        }
        Ok(())
    }
}

#[derive(Deserialize)]
struct JsonlRow {
    id: String,
    #[serde(default)]
    creator: Option<String>,
    values: Vec<f64>,
}

/// Read embeddings from a JSONL file, one `{id, creator?, values}` object per
/// line. Line numbers are 1-based in error messages and the input order is
/// preserved.
pub fn ingest_jsonl(path: impl AsRef<Path>, schema: &BlockSchema) -> Result<Vec<EmbeddingVector>> {
    let file = std::fs::File::open(path.as_ref())?;
    ingest_jsonl_reader(std::io::BufReader::new(file), schema)
}

pub fn ingest_jsonl_reader(
    reader: impl BufRead,
    schema: &BlockSchema,
) -> Result<Vec<EmbeddingVector>> {
    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: JsonlRow = serde_json::from_str(&line).map_err(|e| Error::Ingest {
            line: line_no,
            msg: format!("invalid JSON: {e}"),
        })?;
        if row.values.len() != schema.total_dim() {
            return Err(Error::Ingest {
                line: line_no,
                msg: format!(
                    "vector {:?} has {} values, schema expects {}",
                    row.id,
                    row.values.len(),
                    schema.total_dim()
                ),
            });
        }
        if row.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Ingest {
                line: line_no,
                msg: format!("vector {:?} contains a non-finite value", row.id),
            });
        }
        if !seen.insert(row.id.clone()) {
            return Err(Error::Ingest {
                line: line_no,
                msg: format!("duplicate id {:?}", row.id),
            });
        }
        out.push(EmbeddingVector::new(
            row.id,
            row.creator,
            row.values,
            schema,
        )?);
    }
    Ok(out)
}

/// Serialize embeddings back to the JSONL ingestion format.
pub fn write_jsonl(path: impl AsRef<Path>, vectors: &[EmbeddingVector]) -> Result<()> {
    use std::io::Write;
    let mut file = std::io::BufWriter::new(std::fs::File::create(path.as_ref())?);
    for v in vectors {
        let row = serde_json::json!({
            "id": v.id,
            "creator": v.creator,
            "values": v.values(),
        });
        writeln!(file, "{row}")?;
    }
    Ok(())
}

/// Encrypt every coordinate of every vector under `pk`.
///
/// Each vector draws its own randomness stream keyed by its index, so seeded
/// runs produce identical output whether execution is sequential or parallel.
/// The overflow budget is checked once up front.
pub fn encrypt_collection(
    vectors: &[EmbeddingVector],
    pk: &PublicKey,
    cfg: &ScaleConfig,
    randomness: Randomness,
    mode: Parallelism,
) -> Result<Vec<EncryptedVector>> {
    if let Some(first) = vectors.first() {
        let budget = codec::overflow_budget(cfg, first.dim(), pk.modulus());
        if !budget.holds {
            return Err(Error::BudgetExceeded {
                dim: first.dim(),
                max_dim: budget.max_dim,
            });
        }
    }
    par::try_map_indexed(mode, vectors, |idx, v| {
        let mut rng = randomness.stream(idx as u64);
        let cells = v
            .values()
            .iter()
            .map(|&x| pk.encrypt(&codec::encode(x, cfg)?, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        EncryptedVector::from_parts(v.id.clone(), v.creator.clone(), cells, v.schema_ref.clone())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ahe::keygen;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use std::io::Cursor;
    use std::sync::OnceLock;

    fn test_pk() -> &'static crate::ahe::KeyPair {
        static KEYS: OnceLock<crate::ahe::KeyPair> = OnceLock::new();
        KEYS.get_or_init(|| {
            let mut rng = ChaCha20Rng::seed_from_u64(0x5eed_0002);
            keygen(512, &mut rng).unwrap()
        })
    }

    #[test]
    fn ingest_well_formed() {
        let schema = BlockSchema::equal_partition(4, 2).unwrap();
        let data = r#"{"id":"a","values":[1,2,3,4]}
{"id":"b","creator":"x","values":[0.5,0,0,-1]}
{"id":"c","values":[0,0,0,0]}"#;
        let vectors = ingest_jsonl_reader(Cursor::new(data), &schema).unwrap();
        assert_eq!(vectors.len(), 3);
        assert_eq!(vectors[1].creator.as_deref(), Some("x"));
    }

    #[test]
    fn ingest_reports_offending_line() {
        let schema = BlockSchema::equal_partition(4, 2).unwrap();
        let data = r#"{"id":"a","values":[1,2,3,4]}
{"id":"b","values":[1,2,3,4,5]}"#;
        let err = ingest_jsonl_reader(Cursor::new(data), &schema).unwrap_err();
        match err {
            Error::Ingest { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn ingest_rejects_duplicates_and_nonfinite() {
        let schema = BlockSchema::equal_partition(2, 1).unwrap();
        let dup = "{\"id\":\"a\",\"values\":[1,2]}\n{\"id\":\"a\",\"values\":[3,4]}";
        assert!(matches!(
            ingest_jsonl_reader(Cursor::new(dup), &schema),
            Err(Error::Ingest { line: 2, .. })
        ));
        let nan = "{\"id\":\"a\",\"values\":[1e9999,2]}";
        // 1e9999 parses as infinity
        assert!(ingest_jsonl_reader(Cursor::new(nan), &schema).is_err());
    }

    #[test]
    fn encrypt_collection_round_trips_within_codec_tolerance() {
        let kp = test_pk();
        let schema = BlockSchema::equal_partition(6, 2).unwrap();
        let cfg = ScaleConfig::default();
        let vectors = vec![
            EmbeddingVector::new("a", None, vec![0.5, -1.25, 3.0, 0.0, 2.0, -0.125], &schema)
                .unwrap(),
            EmbeddingVector::new("b", Some("artist".into()), vec![1.0; 6], &schema).unwrap(),
        ];
        let encrypted = encrypt_collection(
            &vectors,
            &kp.public,
            &cfg,
            Randomness::Seeded(1),
            Parallelism::Sequential,
        )
        .unwrap();
        assert_eq!(encrypted.len(), 2);
        assert_eq!(encrypted[1].creator.as_deref(), Some("artist"));

        let tol = 0.5 / cfg.coordinate_scale();
        for (plain, enc) in vectors.iter().zip(&encrypted) {
            for (x, cell) in plain.values().iter().zip(enc.cells()) {
                let m = kp.decrypt(cell).unwrap();
                let decoded =
                    m.value().to_string().parse::<f64>().unwrap() / cfg.coordinate_scale();
                assert!((decoded - x).abs() <= tol);
            }
        }
    }

    #[test]
    fn encrypt_collection_is_seed_deterministic_across_modes() {
        let kp = test_pk();
        let schema = BlockSchema::equal_partition(4, 2).unwrap();
        let cfg = ScaleConfig::default();
        let vectors: Vec<EmbeddingVector> = (0..6)
            .map(|i| {
                EmbeddingVector::new(
                    format!("v{i}"),
                    None,
                    vec![0.25 * i as f64, -0.5, 1.0, 0.0],
                    &schema,
                )
                .unwrap()
            })
            .collect();
        let seq = encrypt_collection(
            &vectors,
            &kp.public,
            &cfg,
            Randomness::Seeded(9),
            Parallelism::Sequential,
        )
        .unwrap();
        let par = encrypt_collection(
            &vectors,
            &kp.public,
            &cfg,
            Randomness::Seeded(9),
            Parallelism::Parallel,
        )
        .unwrap();
        assert_eq!(seq, par);
    }

    #[test]
    fn empty_collection_encrypts_to_empty() {
        let kp = test_pk();
        let cfg = ScaleConfig::default();
        let out = encrypt_collection(
            &[],
            &kp.public,
            &cfg,
            Randomness::System,
            Parallelism::Sequential,
        )
        .unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn serialized_ciphertext_size_tracks_modulus() {
        // Each residue lives in [0, n^2), i.e. about 2 * modulus_bytes; the
        // sum over N * d cells should land within a percent of that.
        let kp = test_pk();
        let schema = BlockSchema::equal_partition(8, 2).unwrap();
        let cfg = ScaleConfig::default();
        let vectors: Vec<EmbeddingVector> = (0..10)
            .map(|i| {
                let vals: Vec<f64> = (0..8)
                    .map(|j| ((i * 8 + j) % 5) as f64 * 0.25 - 0.5)
                    .collect();
                EmbeddingVector::new(format!("v{i}"), None, vals, &schema).unwrap()
            })
            .collect();
        let encrypted = encrypt_collection(
            &vectors,
            &kp.public,
            &cfg,
            Randomness::Seeded(3),
            Parallelism::Sequential,
        )
        .unwrap();
        let total: usize = encrypted.iter().map(|e| e.ciphertext_bytes()).sum();
        let expected = 10 * 8 * 2 * (512 / 8);
        let ratio = total as f64 / expected as f64;
        assert!((0.98..=1.0).contains(&ratio), "ratio {ratio}");
    }
}
