//! Block structure of an embedding: ordered, contiguous, labeled segments
//! that partition [0, d) exactly.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub label: String,
    pub offset: usize,
    pub len: usize,
}

/// Partition of a d-dimensional embedding into k labeled semantic blocks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SchemaWire", into = "SchemaWire")]
pub struct BlockSchema {
    blocks: Vec<Block>,
    total_dim: usize,
}

#[derive(Serialize, Deserialize, Clone)]
struct SchemaWire {
    blocks: Vec<Block>,
    total_dim: usize,
}

impl From<BlockSchema> for SchemaWire {
    fn from(s: BlockSchema) -> Self {
        SchemaWire {
            blocks: s.blocks,
            total_dim: s.total_dim,
        }
    }
}

impl TryFrom<SchemaWire> for BlockSchema {
    type Error = Error;
    fn try_from(w: SchemaWire) -> Result<Self> {
        let pairs: Vec<(String, usize)> =
            w.blocks.iter().map(|b| (b.label.clone(), b.len)).collect();
        let rebuilt = BlockSchema::new(pairs)?;
        if rebuilt.blocks != w.blocks || rebuilt.total_dim != w.total_dim {
            return Err(Error::InvalidSchema(
                "stored offsets or total_dim are inconsistent".into(),
            ));
        }
        Ok(rebuilt)
    }
}

/// Labels used for the default four-way music partition.
pub const DEFAULT_BLOCK_LABELS: [&str; 4] = ["rhythm", "melody", "harmony", "timbre"];

impl BlockSchema {
    /// Build a schema from (label, length) pairs; offsets are derived so the
    /// blocks tile [0, d) in order.
    pub fn new(blocks: Vec<(String, usize)>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidSchema("at least one block required".into()));
        }
        let mut seen = std::collections::HashSet::new();
        let mut out = Vec::with_capacity(blocks.len());
        let mut offset = 0usize;
        for (label, len) in blocks {
            if label.is_empty() {
                return Err(Error::InvalidSchema("empty block label".into()));
            }
            if len == 0 {
                return Err(Error::InvalidSchema(format!(
                    "block {label:?} has zero length"
                )));
            }
            if !seen.insert(label.clone()) {
                return Err(Error::InvalidSchema(format!(
                    "duplicate block label {label:?}"
                )));
            }
            out.push(Block { label, offset, len });
            offset += len;
        }
        Ok(BlockSchema {
            blocks: out,
            total_dim: offset,
        })
    }

    /// Equal k-way partition with generic labels block0..block{k-1}.
    pub fn equal_partition(dim: usize, k: usize) -> Result<Self> {
        if k == 0 || dim == 0 || !dim.is_multiple_of(k) {
            return Err(Error::InvalidSchema(format!(
                "cannot split dimension {dim} into {k} equal blocks"
            )));
        }
        let len = dim / k;
        BlockSchema::new((0..k).map(|i| (format!("block{i}"), len)).collect())
    }

    /// Default music layout: equal rhythm/melody/harmony/timbre quarters.
    pub fn default_music(dim: usize) -> Result<Self> {
        if dim == 0 || !dim.is_multiple_of(4) {
            return Err(Error::InvalidSchema(format!(
                "dimension {dim} is not divisible into four equal blocks"
            )));
        }
        let len = dim / 4;
        BlockSchema::new(
            DEFAULT_BLOCK_LABELS
                .iter()
                .map(|l| (l.to_string(), len))
                .collect(),
        )
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn block_by_label(&self, label: &str) -> Result<&Block> {
        self.blocks
            .iter()
            .find(|b| b.label == label)
            .ok_or_else(|| Error::UnknownBlock {
                label: label.to_string(),
            })
    }

    /// The sub-slice of `values` covered by `block`.
    pub fn slice<'a>(&self, values: &'a [f64], block: &Block) -> &'a [f64] {
        &values[block.offset..block.offset + block.len]
    }

    /// Content fingerprint; vectors carry it so that schema drift between a
    /// database and a query is caught instead of silently misaligning blocks.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.total_dim.to_le_bytes());
        for b in &self.blocks {
            hasher.update(b.label.as_bytes());
            hasher.update([0u8]);
            hasher.update(b.len.to_le_bytes());
        }
        hex::encode(&hasher.finalize()[..8])
    }
}
