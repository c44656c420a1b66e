//! On-disk database layout: a directory holding `manifest.json` plus either
//! `vectors.jsonl` (plaintext) or `cells.hex.jsonl` (encrypted). The manifest
//! pins the schema, the quantization scale and, for encrypted databases, the
//! key fingerprint; loads re-validate every invariant.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::schema::BlockSchema;
use super::{EmbeddingVector, EncryptedVector};
use crate::ahe::{Ciphertext, KeyId};
use crate::codec::ScaleConfig;
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const PLAIN_VECTORS_FILE: &str = "vectors.jsonl";
pub const ENCRYPTED_CELLS_FILE: &str = "cells.hex.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DbMode {
    Plain,
    Encrypted,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub mode: DbMode,
    pub schema: BlockSchema,
    pub scale: ScaleConfig,
    pub dim: usize,
    pub count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key_id: Option<KeyId>,
}

#[derive(Debug, Clone)]
pub struct PlainDb {
    pub schema: BlockSchema,
    pub scale: ScaleConfig,
    pub vectors: Vec<EmbeddingVector>,
}

#[derive(Debug, Clone)]
pub struct EncryptedDb {
    pub schema: BlockSchema,
    pub scale: ScaleConfig,
    pub key_id: KeyId,
    pub vectors: Vec<EncryptedVector>,
}

/// A single encrypted query vector as written by `encrypt-query` and accepted
/// by the search service.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QueryFile {
    pub id: String,
    pub key_id: KeyId,
    pub dim: usize,
    pub schema_ref: String,
    pub cells: Vec<String>,
}

impl QueryFile {
    pub fn from_vector(v: &EncryptedVector) -> Self {
        QueryFile {
            id: v.id.clone(),
            key_id: v.key_id().clone(),
            dim: v.dim(),
            schema_ref: v.schema_ref().to_string(),
            cells: v.cells().iter().map(|c| c.to_hex()).collect(),
        }
    }

    pub fn into_vector(self) -> Result<EncryptedVector> {
        if self.cells.len() != self.dim {
            return Err(Error::Manifest(format!(
                "query {:?} declares dim {} but carries {} cells",
                self.id,
                self.dim,
                self.cells.len()
            )));
        }
        let cells = self
            .cells
            .iter()
            .map(|h| Ciphertext::from_hex(h, self.key_id.clone()))
            .collect::<Result<Vec<_>>>()?;
        EncryptedVector::from_parts(self.id, None, cells, self.schema_ref)
    }
}

#[derive(Serialize, Deserialize)]
struct EncryptedRow {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    creator: Option<String>,
    cells: Vec<String>,
}

fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<()> {
    let json = serde_json::to_string_pretty(manifest)?;
    std::fs::write(dir.join(MANIFEST_FILE), json)?;
    Ok(())
}

fn read_manifest(dir: &Path) -> Result<Manifest> {
    let json = std::fs::read_to_string(dir.join(MANIFEST_FILE))?;
    Ok(serde_json::from_str(&json)?)
}

pub fn save_plain_db(
    dir: impl AsRef<Path>,
    schema: &BlockSchema,
    scale: &ScaleConfig,
    vectors: &[EmbeddingVector],
) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    write_manifest(
        dir,
        &Manifest {
            mode: DbMode::Plain,
            schema: schema.clone(),
            scale: *scale,
            dim: schema.total_dim(),
            count: vectors.len(),
            key_id: None,
        },
    )?;
    super::write_jsonl(dir.join(PLAIN_VECTORS_FILE), vectors)
}

pub fn load_plain_db(dir: impl AsRef<Path>) -> Result<PlainDb> {
    let dir = dir.as_ref();
    let manifest = read_manifest(dir)?;
    if manifest.mode != DbMode::Plain {
        return Err(Error::Manifest("expected a plaintext database".into()));
    }
    let vectors = super::ingest_jsonl(dir.join(PLAIN_VECTORS_FILE), &manifest.schema)?;
    validate_counts(&manifest, vectors.len())?;
    Ok(PlainDb {
        schema: manifest.schema,
        scale: manifest.scale,
        vectors,
    })
}

pub fn save_encrypted_db(
    dir: impl AsRef<Path>,
    schema: &BlockSchema,
    scale: &ScaleConfig,
    key_id: &KeyId,
    vectors: &[EncryptedVector],
) -> Result<()> {
    let dir = dir.as_ref();
    if let Some(bad) = vectors.iter().find(|v| v.key_id() != key_id) {
        return Err(Error::KeyMismatch {
            expected: key_id.to_string(),
            found: bad.key_id().to_string(),
        });
    }
    std::fs::create_dir_all(dir)?;
    write_manifest(
        dir,
        &Manifest {
            mode: DbMode::Encrypted,
            schema: schema.clone(),
            scale: *scale,
            dim: schema.total_dim(),
            count: vectors.len(),
            key_id: Some(key_id.clone()),
        },
    )?;
    let mut file = std::io::BufWriter::new(std::fs::File::create(dir.join(ENCRYPTED_CELLS_FILE))?);
    for v in vectors {
        let row = EncryptedRow {
            id: v.id.clone(),
            creator: v.creator.clone(),
            cells: v.cells().iter().map(|c| c.to_hex()).collect(),
        };
        writeln!(file, "{}", serde_json::to_string(&row)?)?;
    }
    Ok(())
}

pub fn load_encrypted_db(dir: impl AsRef<Path>) -> Result<EncryptedDb> {
    let dir = dir.as_ref();
    let manifest = read_manifest(dir)?;
    if manifest.mode != DbMode::Encrypted {
        return Err(Error::Manifest("expected an encrypted database".into()));
    }
    let key_id = manifest
        .key_id
        .clone()
        .ok_or_else(|| Error::Manifest("encrypted manifest lacks key_id".into()))?;
    let schema_ref = manifest.schema.fingerprint();

    let file = std::fs::File::open(dir.join(ENCRYPTED_CELLS_FILE))?;
    let mut vectors = Vec::new();
    for (idx, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: EncryptedRow = serde_json::from_str(&line).map_err(|e| Error::Ingest {
            line: line_no,
            msg: format!("invalid JSON: {e}"),
        })?;
        if row.cells.len() != manifest.dim {
            return Err(Error::Manifest(format!(
                "vector {:?} has {} cells, manifest declares dimension {}",
                row.id,
                row.cells.len(),
                manifest.dim
            )));
        }
        let cells = row
            .cells
            .iter()
            .map(|h| Ciphertext::from_hex(h, key_id.clone()))
            .collect::<Result<Vec<_>>>()?;
        vectors.push(EncryptedVector::from_parts(
            row.id,
            row.creator,
            cells,
            schema_ref.clone(),
        )?);
    }
    validate_counts(&manifest, vectors.len())?;
    Ok(EncryptedDb {
        schema: manifest.schema,
        scale: manifest.scale,
        key_id,
        vectors,
    })
}

fn validate_counts(manifest: &Manifest, found: usize) -> Result<()> {
    if manifest.dim != manifest.schema.total_dim() {
        return Err(Error::Manifest(format!(
            "manifest dimension {} disagrees with schema dimension {}",
            manifest.dim,
            manifest.schema.total_dim()
        )));
    }
    if manifest.count != found {
        return Err(Error::Manifest(format!(
            "manifest declares {} vectors, payload holds {found}",
            manifest.count
        )));
    }
    Ok(())
}
