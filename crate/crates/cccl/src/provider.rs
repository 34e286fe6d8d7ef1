//! HTTP client for an embedding provider.
//!
//! `POST {base}/v1/embed` with `{"modality", "items": [{"key", "payload"}], "model"?}`
//! answers `{"model_id", "dim", "vectors": [{"key", "vec"}]}` in request
//! order. `GET {base}/health` answers `{"status", "model_id", "dim"}`.
//! Text payloads are the surface string; image payloads are the base64 of the
//! image file bytes.

use std::thread;
use std::time::Duration;

use cccl_core::{EmbeddingKey, EmbeddingStore, EmbeddingVector, Modality, StoreError};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use ureq::Agent;

pub const DEFAULT_BATCH_SIZE: usize = 64;
pub const DEFAULT_ATTEMPTS: u32 = 3;
pub const DEFAULT_BACKOFF: Duration = Duration::from_millis(500);
const TIMEOUT: Duration = Duration::from_secs(120);

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("provider unreachable at {url} after {attempts} attempt(s): {message}")]
    Unreachable {
        url: String,
        attempts: u32,
        message: String,
    },
    #[error("provider returned HTTP {status} for {url}: {body}")]
    Status {
        url: String,
        status: u16,
        body: String,
    },
    #[error("malformed provider response: {0}")]
    Protocol(String),
    #[error("provider model `{provider}` does not match store extractor `{store}`")]
    ExtractorMismatch { store: String, provider: String },
    #[error("provider vector rejected: {0}")]
    Vector(#[from] StoreError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbedItem {
    pub key: String,
    pub payload: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct EmbedRequest<'a> {
    pub modality: String,
    pub items: &'a [EmbedItem],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<&'a str>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct KeyedVector {
    pub key: String,
    pub vec: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct EmbedResponse {
    pub model_id: String,
    pub dim: usize,
    pub vectors: Vec<KeyedVector>,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct Health {
    pub status: String,
    pub model_id: String,
    pub dim: usize,
}

#[derive(Debug, Clone)]
pub struct ProviderClient {
    base_url: String,
    model: Option<String>,
    agent: Agent,
    batch_size: usize,
    attempts: u32,
    backoff: Duration,
}

impl ProviderClient {
    pub fn new(base_url: impl Into<String>) -> Self {
        let agent: Agent = Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(TIMEOUT))
            .build()
            .into();
        Self {
            base_url: base_url.into().trim_end_matches('/').to_owned(),
            model: None,
            agent,
            batch_size: DEFAULT_BATCH_SIZE,
            attempts: DEFAULT_ATTEMPTS,
            backoff: DEFAULT_BACKOFF,
        }
    }

    /// Model id forwarded with every embed request.
    pub fn with_model(mut self, model: Option<String>) -> Self {
        self.model = model;
        self
    }

    pub fn with_batch_size(mut self, n: usize) -> Self {
        self.batch_size = n.max(1);
        self
    }

    pub fn with_attempts(mut self, n: u32) -> Self {
        self.attempts = n.max(1);
        self
    }

    /// First retry waits `base`, then `2·base`, `4·base`, ...
    pub fn with_backoff(mut self, base: Duration) -> Self {
        self.backoff = base;
        self
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    /// Runs `send` until it yields a non-5xx response, retrying transport
    /// failures and server errors with exponential backoff.
    fn with_retries<T>(
        &self,
        url: &str,
        send: impl Fn() -> Result<ureq::http::Response<ureq::Body>, ureq::Error>,
        read: impl FnOnce(ureq::http::Response<ureq::Body>) -> Result<T, ProviderError>,
    ) -> Result<T, ProviderError> {
        let mut last = String::new();
        for attempt in 0..self.attempts {
            if attempt > 0 {
                thread::sleep(self.backoff * 2u32.saturating_pow(attempt - 1));
            }
            match send() {
                Ok(response) if response.status().is_server_error() => {
                    last = format!("HTTP {}", response.status().as_u16());
                }
                Ok(mut response) if !response.status().is_success() => {
                    let body = response.body_mut().read_to_string().unwrap_or_default();
                    return Err(ProviderError::Status {
                        url: url.to_owned(),
                        status: response.status().as_u16(),
                        body,
                    });
                }
                Ok(response) => return read(response),
                Err(e) => last = e.to_string(),
            }
        }
        Err(ProviderError::Unreachable {
            url: url.to_owned(),
            attempts: self.attempts,
            message: last,
        })
    }

    pub fn health(&self) -> Result<Health, ProviderError> {
        let url = format!("{}/health", self.base_url);
        self.with_retries(
            &url,
            || self.agent.get(&url).call(),
            |mut r| {
                r.body_mut()
                    .read_json()
                    .map_err(|e| ProviderError::Protocol(e.to_string()))
            },
        )
    }

    /// One request; `items` must fit in a batch.
    pub fn embed_batch(
        &self,
        modality: Modality,
        items: &[EmbedItem],
    ) -> Result<EmbedResponse, ProviderError> {
        let url = format!("{}/v1/embed", self.base_url);
        let request = EmbedRequest {
            modality: modality.to_string(),
            items,
            model: self.model.as_deref(),
        };
        self.with_retries(
            &url,
            || self.agent.post(&url).send_json(&request),
            |mut r| {
                r.body_mut()
                    .read_json()
                    .map_err(|e| ProviderError::Protocol(e.to_string()))
            },
        )
    }

    /// Embeds `items` in batches and puts every vector into `store`.
    ///
    /// Batches already accepted stay in the store when a later batch fails, so
    /// a rerun only needs to fetch the rest. Returns the number of vectors put.
    pub fn embed_into(
        &self,
        store: &mut EmbeddingStore,
        modality: Modality,
        items: &[(EmbeddingKey, String)],
    ) -> Result<usize, ProviderError> {
        let mut done = 0;
        for chunk in items.chunks(self.batch_size) {
            let batch: Vec<EmbedItem> = chunk
                .iter()
                .map(|(key, payload)| EmbedItem {
                    key: key.to_string(),
                    payload: payload.clone(),
                })
                .collect();
            let response = self.embed_batch(modality, &batch)?;
            let vectors = accept_batch(store, &batch, response)?;
            for ((key, _), vector) in chunk.iter().zip(vectors) {
                store.put(key.clone(), vector)?;
            }
            done += chunk.len();
        }
        Ok(done)
    }
}

/// Checks a response against its request and the target store: same model,
/// same keys in the same order, and a dimension the store accepts.
pub fn accept_batch(
    store: &EmbeddingStore,
    request: &[EmbedItem],
    response: EmbedResponse,
) -> Result<Vec<EmbeddingVector>, ProviderError> {
    if response.model_id != store.extractor_id() {
        return Err(ProviderError::ExtractorMismatch {
            store: store.extractor_id().to_owned(),
            provider: response.model_id,
        });
    }
    if response.vectors.len() != request.len() {
        return Err(ProviderError::Protocol(format!(
            "{} vectors for {} items",
            response.vectors.len(),
            request.len()
        )));
    }
    store.check_dim(response.dim)?;
    request
        .iter()
        .zip(response.vectors)
        .map(|(item, v)| {
            if v.key != item.key {
                return Err(ProviderError::Protocol(format!(
                    "expected key {:?}, got {:?}",
                    item.key, v.key
                )));
            }
            if v.vec.len() != response.dim {
                return Err(StoreError::DimensionMismatch {
                    expected: response.dim,
                    found: v.vec.len(),
                }
                .into());
            }
            Ok(EmbeddingVector::new(v.vec)?)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn items(keys: &[&str]) -> Vec<EmbedItem> {
        keys.iter()
            .map(|k| EmbedItem {
                key: (*k).into(),
                payload: "p".into(),
            })
            .collect()
    }

    fn response(model: &str, dim: usize, keys: &[&str]) -> EmbedResponse {
        EmbedResponse {
            model_id: model.into(),
            dim,
            vectors: keys
                .iter()
                .map(|k| KeyedVector {
                    key: (*k).into(),
                    vec: vec![1.0; dim],
                })
                .collect(),
        }
    }

    #[test]
    fn accepts_matching_batch() {
        let store = EmbeddingStore::new("clip", Some(3)).unwrap();
        let got = accept_batch(
            &store,
            &items(&["a", "b"]),
            response("clip", 3, &["a", "b"]),
        )
        .unwrap();
        assert_eq!(got.len(), 2);
    }

    #[test]
    fn rejects_reordered_or_short_batches() {
        let store = EmbeddingStore::new("clip", None).unwrap();
        let req = items(&["a", "b"]);
        assert!(matches!(
            accept_batch(&store, &req, response("clip", 3, &["b", "a"])),
            Err(ProviderError::Protocol(_))
        ));
        assert!(matches!(
            accept_batch(&store, &req, response("clip", 3, &["a"])),
            Err(ProviderError::Protocol(_))
        ));
    }

    #[test]
    fn rejects_other_model_and_dimension() {
        let store = EmbeddingStore::new("clip", Some(4)).unwrap();
        let req = items(&["a"]);
        assert!(matches!(
            accept_batch(&store, &req, response("sbert", 4, &["a"])),
            Err(ProviderError::ExtractorMismatch { .. })
        ));
        assert!(matches!(
            accept_batch(&store, &req, response("clip", 3, &["a"])),
            Err(ProviderError::Vector(StoreError::DimensionMismatch {
                expected: 4,
                found: 3
            }))
        ));
        let mut ragged = response("clip", 4, &["a"]);
        ragged.vectors[0].vec.pop();
        assert!(accept_batch(&store, &req, ragged).is_err());
    }

    #[test]
    fn request_shape() {
        let req_items = items(&["rock|ja|original|text|0"]);
        let req = EmbedRequest {
            modality: "text".into(),
            items: &req_items,
            model: None,
        };
        assert_eq!(
            serde_json::to_string(&req).unwrap(),
            r#"{"modality":"text","items":[{"key":"rock|ja|original|text|0","payload":"p"}]}"#
        );
    }

    #[test]
    fn trailing_slash_trimmed() {
        assert_eq!(ProviderClient::new("http://h:1/").base_url(), "http://h:1");
    }
}
