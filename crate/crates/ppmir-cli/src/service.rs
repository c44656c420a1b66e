//! Encrypted-query search service.
//!
//! The server loads a plaintext database and answers queries that arrive
//! encrypted: it computes one encrypted score per database vector using only
//! the public key supplied with the request, rerandomizes them, and returns
//! them. No private key ever enters this process — decryption and ranking are
//! strictly the client's business, as is whatever the client then learns from
//! the opened scores.

use std::sync::Arc;

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use ppmir::engine::{blocked_similarity, encquery_inner, weighted_total};
use ppmir::store::{EncryptedVector, PlainDb, QueryFile};
use ppmir::{BlockSchema, Parallelism, PublicKey, Randomness, ScaleConfig, WeightVector};

pub struct ServeState {
    pub db: PlainDb,
}

#[derive(Debug, Deserialize)]
pub struct PublicKeyBody {
    /// Hex-encoded modulus; the generator is implied (n + 1).
    pub n: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindBody {
    #[default]
    Plain,
    Blocked,
    Weighted,
}

#[derive(Debug, Deserialize)]
pub struct SearchRequest {
    pub public_key: PublicKeyBody,
    pub key_id: String,
    /// Hex ciphertext residues, one per query coordinate.
    pub cells: Vec<String>,
    #[serde(default)]
    pub kind: KindBody,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    /// Fresh randomness on every returned score; on by default so repeated
    /// identical requests are not linkable by ciphertext bytes.
    #[serde(default = "default_true")]
    pub rerandomize: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Serialize)]
pub struct ScoreEntry {
    pub id: String,
    pub cell: String,
}

#[derive(Debug, Serialize)]
pub struct SearchResponse {
    pub key_id: String,
    pub kind: KindBody,
    pub scores: Vec<ScoreEntry>,
}

#[derive(Debug, Serialize)]
pub struct ManifestResponse {
    pub dim: usize,
    pub count: usize,
    pub schema: BlockSchema,
    pub scale: ScaleConfig,
}

/// Error payload; messages describe the request's problem, never database
/// contents.
pub struct ServiceError {
    status: StatusCode,
    message: String,
}

impl ServiceError {
    fn unprocessable(message: impl Into<String>) -> Self {
        ServiceError {
            status: StatusCode::UNPROCESSABLE_ENTITY,
            message: message.into(),
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let body = Json(serde_json::json!({ "error": self.message }));
        (self.status, body).into_response()
    }
}

pub fn router(state: Arc<ServeState>) -> Router {
    Router::new()
        .route("/v1/search", post(search))
        .route("/v1/manifest", get(manifest))
        .with_state(state)
}

async fn manifest(State(state): State<Arc<ServeState>>) -> Json<ManifestResponse> {
    Json(ManifestResponse {
        dim: state.db.schema.total_dim(),
        count: state.db.vectors.len(),
        schema: state.db.schema.clone(),
        scale: state.db.scale,
    })
}

async fn search(
    State(state): State<Arc<ServeState>>,
    Json(req): Json<SearchRequest>,
) -> Result<Json<SearchResponse>, ServiceError> {
    let result = tokio::task::spawn_blocking(move || evaluate(&state, req))
        .await
        .map_err(|_| ServiceError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            message: "evaluation task failed".into(),
        })?;
    result.map(Json)
}

fn evaluate(state: &ServeState, req: SearchRequest) -> Result<SearchResponse, ServiceError> {
    let db = &state.db;
    let dim = db.schema.total_dim();
    if req.cells.len() != dim {
        return Err(ServiceError::unprocessable(format!(
            "expected dimension {dim}, request carries {} cells",
            req.cells.len()
        )));
    }

    let n = BigUint::parse_bytes(req.public_key.n.as_bytes(), 16)
        .ok_or_else(|| ServiceError::unprocessable("public_key.n is not a hex integer"))?;
    let pk = PublicKey::from_modulus(n)
        .map_err(|e| ServiceError::unprocessable(format!("unusable public key: {e}")))?;
    if pk.key_id().as_str() != req.key_id {
        return Err(ServiceError::unprocessable(
            "key_id does not match the supplied modulus",
        ));
    }

    let budget = ppmir::overflow_budget(&db.scale, dim, pk.modulus());
    if !budget.holds {
        return Err(ServiceError::unprocessable(format!(
            "overflow budget violated: dimension {dim} exceeds the maximum safe dimension {} for this key and scale",
            budget.max_dim
        )));
    }

    let weights = match (req.kind, &req.weights) {
        (KindBody::Weighted, Some(w)) => {
            let wv = WeightVector(w.clone());
            wv.check_len(&db.schema)
                .map_err(|e| ServiceError::unprocessable(e.to_string()))?;
            Some(wv)
        }
        (KindBody::Weighted, None) => {
            return Err(ServiceError::unprocessable(
                "weighted search requires a weights array",
            ))
        }
        _ => None,
    };

    // Reassemble the encrypted query from the wire form.
    let query_file = QueryFile {
        id: "query".into(),
        key_id: pk.key_id().clone(),
        dim,
        schema_ref: db.schema.fingerprint().to_string(),
        cells: req.cells,
    };
    let enc_query: EncryptedVector = query_file
        .into_vector()
        .map_err(|e| ServiceError::unprocessable(e.to_string()))?;

    let scores = ppmir::par::try_map_indexed(Parallelism::Parallel, &db.vectors, |_, y| {
        let ct = match &weights {
            None => encquery_inner(&enc_query, y, &pk, &db.scale)?,
            Some(w) => {
                let blocked = blocked_similarity(y, &enc_query, &db.schema, &pk, &db.scale)?;
                weighted_total(&blocked, w, &pk, &db.scale)?
            }
        };
        let ct = if req.rerandomize {
            let mut rng = Randomness::System.stream(0);
            pk.rerandomize(&ct, &mut rng)?
        } else {
            ct
        };
        Ok(ScoreEntry {
            id: y.id.clone(),
            cell: ct.to_hex(),
        })
    })
    .map_err(|e| ServiceError::unprocessable(e.to_string()))?;

    Ok(SearchResponse {
        key_id: req.key_id,
        kind: req.kind,
        scores,
    })
}

/// Serve until the listener fails or the task is dropped.
pub async fn serve(listener: tokio::net::TcpListener, db: PlainDb) -> std::io::Result<()> {
    let app = router(Arc::new(ServeState { db }));
    axum::serve(listener, app).await
}
