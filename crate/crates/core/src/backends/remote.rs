use std::sync::{Condvar, Mutex};
use std::time::Duration;

use reqwest::blocking::{Client, Response};
use reqwest::StatusCode;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::wire::{self, DenoiseBody, EmbedImageReply, EmbedTextBody, EmbedTextReply, Health, TensorBody};
use crate::sampler::{dispatch_ordered, BatchError, DenoiseError, DenoiseRequest, Denoiser};
use crate::tensor::ptsr::RawTensor;
use crate::tensor::Canvas;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub endpoint: String,
    #[serde(with = "secs")]
    pub timeout: Duration,
    pub max_inflight: usize,
    pub retries: u32,
}

mod secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let v = f64::deserialize(d)?;
        Duration::try_from_secs_f64(v).map_err(serde::de::Error::custom)
    }
}

impl BackendConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            timeout: Duration::from_secs(120),
            max_inflight: 4,
            retries: 2,
        }
    }

    pub fn validate(&self) -> Result<(), DenoiseError> {
        if self.timeout.is_zero() {
            return Err(DenoiseError::Config("timeout must be positive".into()));
        }
        if self.max_inflight == 0 {
            return Err(DenoiseError::Config("max_inflight must be at least 1".into()));
        }
        if !(self.endpoint.starts_with("http://") || self.endpoint.starts_with("https://")) {
            return Err(DenoiseError::Config(format!(
                "endpoint `{}` is not an http(s) URL",
                self.endpoint
            )));
        }
        Ok(())
    }
}

/// Counting semaphore bounding concurrent HTTP requests.
#[derive(Debug)]
struct Gate {
    limit: usize,
    active: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a Gate);

impl Gate {
    fn new(limit: usize) -> Self {
        Self {
            limit,
            active: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut active = self.active.lock().unwrap();
        while *active >= self.limit {
            active = self.freed.wait(active).unwrap();
        }
        *active += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.active.lock().unwrap() -= 1;
        self.0.freed.notify_one();
    }
}

/// HTTP client for a model server speaking the denoise protocol.
#[derive(Debug)]
pub struct RemoteDenoiser {
    client: Client,
    config: BackendConfig,
    health: Health,
    gate: Gate,
}

fn transport(e: reqwest::Error) -> DenoiseError {
    DenoiseError::Transport {
        retryable: e.is_timeout() || e.is_connect(),
        message: e.to_string(),
    }
}

fn retryable(e: &DenoiseError) -> bool {
    match e {
        DenoiseError::Transport { retryable, .. } => *retryable,
        DenoiseError::Http { status, .. } => matches!(*status, 429 | 502 | 503 | 504),
        _ => false,
    }
}

impl RemoteDenoiser {
    /// Builds the client and checks `GET /health`.
    pub fn connect(config: BackendConfig) -> Result<Self, DenoiseError> {
        config.validate()?;
        let client = Client::builder().timeout(config.timeout).build().map_err(transport)?;
        let gate = Gate::new(config.max_inflight);
        let mut this = Self {
            client,
            config,
            health: Health {
                model: String::new(),
                latent_channels: 0,
            },
            gate,
        };
        this.health = this.with_retries(|| {
            let resp = this.client.get(this.url("health")).send().map_err(transport)?;
            parse_json(resp)
        })?;
        Ok(this)
    }

    pub fn health(&self) -> &Health {
        &self.health
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }

    fn url(&self, path: &str) -> String {
        format!("{}/{path}", self.config.endpoint.trim_end_matches('/'))
    }

    fn with_retries<T>(&self, mut call: impl FnMut() -> Result<T, DenoiseError>) -> Result<T, DenoiseError> {
        let mut attempt = 0;
        loop {
            match call() {
                Err(e) if retryable(&e) && attempt < self.config.retries => {
                    attempt += 1;
                    std::thread::sleep(Duration::from_millis(50 * attempt as u64));
                }
                other => return other,
            }
        }
    }

    fn post<B: Serialize, R: DeserializeOwned>(&self, path: &str, body: &B) -> Result<R, DenoiseError> {
        let payload = serde_json::to_vec(body).map_err(|e| DenoiseError::Protocol(e.to_string()))?;
        self.with_retries(|| {
            let _permit = self.gate.acquire();
            let resp = self
                .client
                .post(self.url(path))
                .header("content-type", "application/json")
                .body(payload.clone())
                .send()
                .map_err(transport)?;
            parse_json(resp)
        })
    }

    /// `POST /embed_text`: registers a prompt and returns its embedding id.
    pub fn embed_text(&self, prompt: &str) -> Result<String, DenoiseError> {
        let reply: EmbedTextReply = self.post(
            "embed_text",
            &EmbedTextBody {
                prompt: prompt.to_string(),
            },
        )?;
        Ok(reply.embedding_id)
    }

    /// `POST /embed_image`: image embedding as a flat vector.
    pub fn embed_image(&self, image: &Canvas) -> Result<Vec<f32>, DenoiseError> {
        let reply: EmbedImageReply = self.post(
            "embed_image",
            &TensorBody {
                tensor: wire::encode_canvas(image),
            },
        )?;
        let raw = decode_reply(&reply.embedding)?;
        if raw.dims.len() != 1 {
            return Err(DenoiseError::Protocol(format!(
                "embedding has rank {}, expected 1",
                raw.dims.len()
            )));
        }
        check_finite(&raw.data)?;
        Ok(raw.data)
    }
}

fn parse_json<R: DeserializeOwned>(resp: Response) -> Result<R, DenoiseError> {
    let status = resp.status();
    let bytes = resp.bytes().map_err(transport)?;
    if status != StatusCode::OK {
        return Err(DenoiseError::Http {
            status: status.as_u16(),
            body: String::from_utf8_lossy(&bytes).into_owned(),
        });
    }
    serde_json::from_slice(&bytes).map_err(|e| DenoiseError::Protocol(format!("bad response body: {e}")))
}

fn decode_reply(b64: &str) -> Result<RawTensor, DenoiseError> {
    wire::decode_tensor(b64).map_err(|e| DenoiseError::Protocol(e.to_string()))
}

fn check_finite(data: &[f32]) -> Result<(), DenoiseError> {
    match data.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(DenoiseError::Data(format!("non-finite value at index {i} in response"))),
        None => Ok(()),
    }
}

impl Denoiser for RemoteDenoiser {
    fn name(&self) -> String {
        format!("remote:{} ({})", self.config.endpoint, self.health.model)
    }

    fn denoise(&self, request: &DenoiseRequest<'_>) -> Result<Canvas, DenoiseError> {
        let body = DenoiseBody {
            tensor: wire::encode_canvas(request.patch),
            t: request.t,
            total_steps: request.total_steps,
            prompt: request.conditioning.prompt_text().map(str::to_string),
            embedding_id: request.conditioning.embedding_id().map(str::to_string),
            seed: request.seed,
        };
        let reply: TensorBody = self.post("denoise", &body)?;
        let raw = decode_reply(&reply.tensor)?;
        let (h, w, c) = request.patch.shape();
        if raw.dims != [h, w, c] {
            return Err(DenoiseError::Protocol(format!(
                "response shape {:?} does not match request shape {:?}",
                raw.dims,
                [h, w, c]
            )));
        }
        check_finite(&raw.data)?;
        Canvas::new(h, w, c, raw.data).map_err(|e| DenoiseError::Data(e.to_string()))
    }

    fn denoise_batch(&self, requests: &[DenoiseRequest<'_>]) -> Result<Vec<Canvas>, BatchError> {
        dispatch_ordered(self, requests, self.config.max_inflight)
    }
}

pub fn remote_denoiser(config: BackendConfig) -> Result<RemoteDenoiser, DenoiseError> {
    RemoteDenoiser::connect(config)
}
