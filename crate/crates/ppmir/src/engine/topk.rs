//! Exhaustive top-k retrieval over the three deployment settings.
//!
//! The API separates the two roles the protocol cares about: evaluators
//! compute encrypted scores with nothing but the public key, and the
//! [`Opener`] is the only type that can turn a score ciphertext back into a
//! number. Scoring the database is pure per-target work and may fan out
//! across threads; ranking happens after a deterministic sort.

use crate::ahe::{Ciphertext, KeyPair, PlainInteger, PrivateKey, PublicKey};
use crate::codec::{self, ScaleConfig};
use crate::error::{Error, Result};
use crate::par::{self, Parallelism};
use crate::store::{BlockSchema, EmbeddingVector, EncryptedVector, WeightVector};

use super::{
    blocked_similarity, encdb_inner, encquery_inner, plain_inner, quantized_inner,
    quantized_weighted_inner, weighted_similarity, weighted_total, ScoreKind, Setting,
    SimilarityScore,
};

/// Key-holding role: the only way from a score ciphertext to a value.
pub struct Opener {
    keys: KeyPair,
}

impl Opener {
    pub fn new(keys: KeyPair) -> Self {
        Opener { keys }
    }

    pub fn from_parts(public: PublicKey, private: PrivateKey) -> Result<Self> {
        Ok(Opener {
            keys: KeyPair::from_parts(public, private)?,
        })
    }

    pub fn public(&self) -> &PublicKey {
        &self.keys.public
    }

    /// Decrypt and de-scale one score.
    pub fn open(
        &self,
        ct: &Ciphertext,
        cfg: &ScaleConfig,
        weighted: bool,
    ) -> Result<(PlainInteger, f64)> {
        let raw = self.keys.decrypt(ct)?;
        let value = codec::decode_product(&raw, cfg, weighted);
        Ok((raw, value))
    }
}

/// The query side of a search.
#[derive(Clone, Copy)]
pub enum QueryRef<'a> {
    Plain(&'a EmbeddingVector),
    Encrypted(&'a EncryptedVector),
}

/// The database side of a search.
#[derive(Clone, Copy)]
pub enum TargetRef<'a> {
    Plain(&'a [EmbeddingVector]),
    Encrypted(&'a [EncryptedVector]),
}

impl TargetRef<'_> {
    fn len(&self) -> usize {
        match self {
            TargetRef::Plain(v) => v.len(),
            TargetRef::Encrypted(v) => v.len(),
        }
    }
}

/// Which similarity form to rank by.
#[derive(Debug, Clone)]
pub enum SearchKind {
    Plain,
    Blocked,
    Weighted(WeightVector),
}

impl SearchKind {
    fn tag(&self) -> ScoreKind {
        match self {
            SearchKind::Plain => ScoreKind::Plain,
            SearchKind::Blocked => ScoreKind::Blocked,
            SearchKind::Weighted(_) => ScoreKind::Weighted,
        }
    }

    fn is_weighted(&self) -> bool {
        matches!(self, SearchKind::Weighted(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedHit {
    /// 1-based rank.
    pub rank: usize,
    pub target_id: String,
    pub score: SimilarityScore,
}

/// Scores for the best k targets, descending by value with ties broken by
/// ascending target id. The ordering is independent of evaluation schedule.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RetrievalResult {
    pub hits: Vec<RankedHit>,
}

impl RetrievalResult {
    pub fn ids(&self) -> Vec<&str> {
        self.hits.iter().map(|h| h.target_id.as_str()).collect()
    }
}

/// Score every database vector against the query, open the scores, and rank.
///
/// `opener` may be `None` only when both sides are plaintext; encrypted
/// settings return [`Error::MissingKey`] without it. Mixing two encrypted
/// sides is refused: that would need ciphertext-ciphertext multiplication,
/// which this scheme deliberately does not have.
#[allow(clippy::too_many_arguments)]
pub fn topk_search(
    query: QueryRef<'_>,
    database: TargetRef<'_>,
    schema: &BlockSchema,
    cfg: &ScaleConfig,
    kind: &SearchKind,
    k_top: usize,
    opener: Option<&Opener>,
    mode: Parallelism,
) -> Result<RetrievalResult> {
    if k_top == 0 {
        return Err(Error::InvalidArgument("k_top must be at least 1".into()));
    }
    if database.len() == 0 {
        return Err(Error::EmptyDatabase);
    }
    if let SearchKind::Weighted(w) = kind {
        w.check_len(schema)?;
    }

    let mut scored: Vec<SimilarityScore> = match (query, database) {
        (QueryRef::Plain(x), TargetRef::Plain(targets)) => {
            oracle_scores(x, targets, schema, cfg, kind, mode)?
        }
        (QueryRef::Encrypted(enc_x), TargetRef::Plain(targets)) => {
            let opener = opener.ok_or(Error::MissingKey)?;
            let pk = opener.public();
            let cts = par::try_map_indexed(mode, targets, |_, y| {
                let ct = match kind {
                    SearchKind::Plain | SearchKind::Blocked => encquery_inner(enc_x, y, pk, cfg)?,
                    SearchKind::Weighted(w) => {
                        let blocked = blocked_similarity(y, enc_x, schema, pk, cfg)?;
                        weighted_total(&blocked, w, pk, cfg)?
                    }
                };
                Ok((y.id.clone(), ct))
            })?;
            open_all(
                cts,
                enc_x.id.clone(),
                Setting::EncryptedQuery,
                kind,
                cfg,
                opener,
            )?
        }
        (QueryRef::Plain(x), TargetRef::Encrypted(targets)) => {
            let opener = opener.ok_or(Error::MissingKey)?;
            let pk = opener.public();
            let cts = par::try_map_indexed(mode, targets, |_, enc_y| {
                let ct = match kind {
                    SearchKind::Plain | SearchKind::Blocked => encdb_inner(x, enc_y, pk, cfg)?,
                    SearchKind::Weighted(w) => weighted_similarity(x, enc_y, schema, w, pk, cfg)?,
                };
                Ok((enc_y.id.clone(), ct))
            })?;
            open_all(cts, x.id.clone(), Setting::EncryptedDb, kind, cfg, opener)?
        }
        (QueryRef::Encrypted(_), TargetRef::Encrypted(_)) => {
            return Err(Error::InvalidArgument(
                "query and database cannot both be encrypted under an additive-only scheme".into(),
            ));
        }
    };

    scored.sort_by(|a, b| {
        b.value
            .total_cmp(&a.value)
            .then_with(|| a.target_id.cmp(&b.target_id))
    });
    scored.truncate(k_top);

    Ok(RetrievalResult {
        hits: scored
            .into_iter()
            .enumerate()
            .map(|(i, score)| RankedHit {
                rank: i + 1,
                target_id: score.target_id.clone(),
                score,
            })
            .collect(),
    })
}

fn oracle_scores(
    x: &EmbeddingVector,
    targets: &[EmbeddingVector],
    schema: &BlockSchema,
    cfg: &ScaleConfig,
    kind: &SearchKind,
    mode: Parallelism,
) -> Result<Vec<SimilarityScore>> {
    par::try_map_indexed(mode, targets, |_, y| {
        let (value, raw) = match kind {
            SearchKind::Plain | SearchKind::Blocked => {
                (plain_inner(x, y)?.value, quantized_inner(x, y, cfg)?)
            }
            SearchKind::Weighted(w) => {
                let mut value = 0.0;
                for (block, &wi) in schema.blocks().iter().zip(&w.0) {
                    let xs = schema.slice(x.values(), block);
                    let ys = schema.slice(y.values(), block);
                    let dot: f64 = xs.iter().zip(ys).map(|(a, b)| a * b).sum();
                    value += wi * dot;
                }
                (value, quantized_weighted_inner(x, y, schema, w, cfg)?)
            }
        };
        Ok(SimilarityScore {
            query_id: x.id.clone(),
            target_id: y.id.clone(),
            raw: Some(raw),
            value,
            kind: kind.tag(),
            setting: Setting::PlaintextOracle,
        })
    })
}

/// Open encrypted scores sequentially; the opener is single-threaded per key.
fn open_all(
    cts: Vec<(String, Ciphertext)>,
    query_id: String,
    setting: Setting,
    kind: &SearchKind,
    cfg: &ScaleConfig,
    opener: &Opener,
) -> Result<Vec<SimilarityScore>> {
    cts.into_iter()
        .map(|(target_id, ct)| {
            let (raw, value) = opener.open(&ct, cfg, kind.is_weighted())?;
            Ok(SimilarityScore {
                query_id: query_id.clone(),
                target_id,
                raw: Some(raw),
                value,
                kind: kind.tag(),
                setting,
            })
        })
        .collect()
}
