//! Black-box answer oracles.
//!
//! Every model, remote or scripted, sits behind the [`Oracle`] trait and is
//! constructed by name through an [`OracleRegistry`]. [`OracleClient`] adds
//! bounded-concurrency batching and transcript logging on top.

mod batch;
mod http;
mod registry;
mod scripted;

use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::types::GuidanceLabel;

pub use batch::{OracleClient, TranscriptRecord};
pub use http::HttpOracle;
pub use registry::{OracleFactory, OracleRegistry};
pub use scripted::{AnswerTable, EchoTruth, FixedLetter, ScriptedOracleSpec, VisibleFractionRule, WRONG_ANSWER};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("transport failure after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("environment variable {0} holding the API key is not set")]
    AuthMissing(String),
    #[error("oracle returned an empty response")]
    Refusal,
    #[error("oracle rejected the request with HTTP {code}: {body}")]
    Status { code: u16, body: String },
    #[error("cannot read image {path}: {message}")]
    Image { path: PathBuf, message: String },
    #[error("oracle configuration: {0}")]
    Config(String),
}

impl OracleError {
    pub fn is_transport(&self) -> bool {
        matches!(self, OracleError::Transport { .. })
    }
}

/// Side information that only scripted stand-ins look at. Remote oracles ignore it.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RequestHints {
    pub sample_id: String,
    /// 1-based prompt round; 0 for auxiliary queries such as rephrasing.
    pub round: u8,
    /// Visible share of the target box along the cut axis, when the image is a crop.
    pub visible_fraction: Option<f64>,
    /// Ground-truth answer of the unperturbed pair.
    pub reference_answer: Option<String>,
    /// Ground-truth guidance label, when the sample has one.
    pub truth: Option<GuidanceLabel>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleRequest {
    pub image_ref: PathBuf,
    pub prompt: String,
    pub max_tokens: u32,
    pub temperature: f64,
    pub hints: RequestHints,
}

impl OracleRequest {
    pub fn new(image_ref: impl Into<PathBuf>, prompt: impl Into<String>) -> Self {
        OracleRequest {
            image_ref: image_ref.into(),
            prompt: prompt.into(),
            max_tokens: 64,
            temperature: 0.0,
            hints: RequestHints::default(),
        }
    }

    pub fn with_hints(mut self, hints: RequestHints) -> Self {
        self.hints = hints;
        self
    }

    /// Stable key over everything a remote model sees.
    pub fn key(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.image_ref.to_string_lossy().as_bytes());
        h.update([0]);
        h.update(self.prompt.as_bytes());
        h.update([0, self.hints.round]);
        hex::encode(&h.finalize()[..16])
    }

    pub fn validate(&self) -> Result<(), OracleError> {
        if self.max_tokens == 0 {
            return Err(OracleError::Config("max_tokens must be positive".into()));
        }
        if !(self.temperature >= 0.0) {
            return Err(OracleError::Config("temperature must be non-negative".into()));
        }
        Ok(())
    }
}

pub trait Oracle: Send + Sync {
    /// Short human-readable identity, echoed into run reports.
    fn describe(&self) -> String;

    fn answer(&self, req: &OracleRequest) -> Result<String, OracleError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub endpoint_url: Option<String>,
    pub model_name: Option<String>,
    /// `None` sends no Authorization header.
    pub api_key_env: Option<String>,
    pub max_concurrency: usize,
    pub max_retries: u32,
    #[serde(with = "millis")]
    pub timeout: Duration,
    #[serde(with = "millis")]
    pub backoff_base: Duration,
    #[serde(with = "millis")]
    pub backoff_cap: Duration,
    pub max_tokens: u32,
    pub temperature: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            endpoint_url: None,
            model_name: None,
            api_key_env: Some("ORACLE_API_KEY".into()),
            max_concurrency: 4,
            max_retries: 3,
            timeout: Duration::from_secs(60),
            backoff_base: Duration::from_millis(500),
            backoff_cap: Duration::from_secs(20),
            max_tokens: 64,
            temperature: 0.0,
        }
    }
}

mod millis {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_key_depends_on_image_prompt_and_round() {
        let a = OracleRequest::new("a.jpg", "q");
        let b = OracleRequest::new("b.jpg", "q");
        let mut c = a.clone();
        c.hints.round = 2;
        assert_eq!(a.key(), OracleRequest::new("a.jpg", "q").key());
        assert_ne!(a.key(), b.key());
        assert_ne!(a.key(), c.key());
        assert_eq!(a.key().len(), 32);
    }

    #[test]
    fn request_validation() {
        let mut r = OracleRequest::new("a.jpg", "q");
        assert!(r.validate().is_ok());
        r.max_tokens = 0;
        assert!(r.validate().is_err());
        r.max_tokens = 1;
        r.temperature = -1.0;
        assert!(r.validate().is_err());
    }
}
