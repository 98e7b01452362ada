//! Chat-completions client: one user message carrying the prompt and the image
//! as a base64 data URL.

use std::time::Duration;

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use rand::Rng;
use serde_json::{json, Value};

use super::{Oracle, OracleConfig, OracleError, OracleRequest};

#[derive(Debug)]
pub struct HttpOracle {
    agent: ureq::Agent,
    endpoint: String,
    model: String,
    api_key_env: Option<String>,
    max_retries: u32,
    backoff_base: Duration,
    backoff_cap: Duration,
}

enum Attempt {
    Done(String),
    Retry { message: String, wait_at_least: Option<Duration> },
    Fatal(OracleError),
}

impl HttpOracle {
    pub fn new(cfg: &OracleConfig) -> Result<Self, OracleError> {
        let endpoint = cfg
            .endpoint_url
            .clone()
            .filter(|s| !s.is_empty())
            .ok_or_else(|| OracleError::Config("http oracle requires an endpoint url".into()))?;
        let model = cfg
            .model_name
            .clone()
            .filter(|s| !s.is_empty())
            .ok_or_else(|| OracleError::Config("http oracle requires a model name".into()))?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(cfg.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(HttpOracle {
            agent,
            endpoint,
            model,
            api_key_env: cfg.api_key_env.clone().filter(|s| !s.is_empty()),
            max_retries: cfg.max_retries,
            backoff_base: cfg.backoff_base,
            backoff_cap: cfg.backoff_cap,
        })
    }

    fn api_key(&self) -> Result<Option<String>, OracleError> {
        match &self.api_key_env {
            None => Ok(None),
            Some(var) => std::env::var(var).map(Some).map_err(|_| OracleError::AuthMissing(var.clone())),
        }
    }

    pub fn request_body(&self, req: &OracleRequest) -> Result<Value, OracleError> {
        let bytes = std::fs::read(&req.image_ref)
            .map_err(|e| OracleError::Image { path: req.image_ref.clone(), message: e.to_string() })?;
        let mime = match req.image_ref.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase) {
            Some(ext) if ext == "png" => "image/png",
            _ => "image/jpeg",
        };
        let url = format!("data:{mime};base64,{}", STANDARD.encode(bytes));
        Ok(json!({
            "model": self.model,
            "messages": [{
                "role": "user",
                "content": [
                    {"type": "text", "text": req.prompt},
                    {"type": "image_url", "image_url": {"url": url}},
                ],
            }],
            "max_tokens": req.max_tokens,
            "temperature": req.temperature,
        }))
    }

    fn attempt(&self, body: &str, key: Option<&str>) -> Attempt {
        let mut call = self.agent.post(&self.endpoint).header("Content-Type", "application/json");
        if let Some(k) = key {
            call = call.header("Authorization", &format!("Bearer {k}"));
        }
        let mut resp = match call.send(body) {
            Ok(r) => r,
            Err(e) => return Attempt::Retry { message: e.to_string(), wait_at_least: None },
        };
        let status = resp.status().as_u16();
        let retry_after = resp
            .headers()
            .get("retry-after")
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.trim().parse::<u64>().ok())
            .map(Duration::from_secs);
        let text = match resp.body_mut().read_to_string() {
            Ok(t) => t,
            Err(e) => return Attempt::Retry { message: e.to_string(), wait_at_least: None },
        };
        match status {
            200..=299 => match extract_content(&text) {
                Some(content) if !content.trim().is_empty() => Attempt::Done(content),
                _ => Attempt::Fatal(OracleError::Refusal),
            },
            429 => Attempt::Retry { message: format!("HTTP 429: {text}"), wait_at_least: retry_after },
            500..=599 => Attempt::Retry { message: format!("HTTP {status}: {text}"), wait_at_least: None },
            _ => Attempt::Fatal(OracleError::Status { code: status, body: text }),
        }
    }

    fn backoff(&self, retry: u32) -> Duration {
        let exp = self.backoff_base.saturating_mul(1u32 << retry.min(16));
        let capped = exp.min(self.backoff_cap);
        capped.mul_f64(rand::rng().random_range(0.5..=1.0))
    }
}

/// Pulls `choices[0].message.content`, accepting either a string or a list of text parts.
pub(crate) fn extract_content(body: &str) -> Option<String> {
    let v: Value = serde_json::from_str(body).ok()?;
    let content = v.get("choices")?.get(0)?.get("message")?.get("content")?;
    match content {
        Value::String(s) => Some(s.clone()),
        Value::Array(parts) => Some(
            parts
                .iter()
                .filter_map(|p| p.get("text").and_then(Value::as_str))
                .collect::<Vec<_>>()
                .join(""),
        ),
        _ => None,
    }
}

impl Oracle for HttpOracle {
    fn describe(&self) -> String {
        format!("http:{} model={}", self.endpoint, self.model)
    }

    fn answer(&self, req: &OracleRequest) -> Result<String, OracleError> {
        req.validate()?;
        let key = self.api_key()?;
        let body = self.request_body(req)?.to_string();
        let attempts = self.max_retries + 1;
        let mut last = String::new();
        for i in 0..attempts {
            match self.attempt(&body, key.as_deref()) {
                Attempt::Done(s) => return Ok(s),
                Attempt::Fatal(e) => return Err(e),
                Attempt::Retry { message, wait_at_least } => {
                    log::debug!("attempt {} of {attempts} for {} failed: {message}", i + 1, req.hints.sample_id);
                    last = message;
                    if i + 1 < attempts {
                        let wait = self.backoff(i).max(wait_at_least.unwrap_or_default().min(self.backoff_cap));
                        std::thread::sleep(wait);
                    }
                }
            }
        }
        Err(OracleError::Transport { attempts, message: last })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn content_extraction() {
        let body = r#"{"choices":[{"message":{"role":"assistant","content":"B"}}]}"#;
        assert_eq!(extract_content(body).as_deref(), Some("B"));
        let parts = r#"{"choices":[{"message":{"content":[{"type":"text","text":"le"},{"type":"text","text":"ft"}]}}]}"#;
        assert_eq!(extract_content(parts).as_deref(), Some("left"));
        assert_eq!(extract_content("{}"), None);
        assert_eq!(extract_content("not json"), None);
    }

    #[test]
    fn config_requires_endpoint_and_model() {
        let mut cfg = OracleConfig::default();
        assert!(matches!(HttpOracle::new(&cfg), Err(OracleError::Config(_))));
        cfg.endpoint_url = Some("http://127.0.0.1:1/v1/chat/completions".into());
        assert!(matches!(HttpOracle::new(&cfg), Err(OracleError::Config(_))));
        cfg.model_name = Some("m".into());
        assert!(HttpOracle::new(&cfg).is_ok());
    }

    #[test]
    fn missing_key_env_is_reported() {
        let cfg = OracleConfig {
            endpoint_url: Some("http://127.0.0.1:1/".into()),
            model_name: Some("m".into()),
            api_key_env: Some("DIRGUIDE_TEST_UNSET_KEY_VAR".into()),
            ..Default::default()
        };
        let o = HttpOracle::new(&cfg).unwrap();
        let err = o.answer(&OracleRequest::new("/nonexistent.jpg", "q")).unwrap_err();
        assert_eq!(err, OracleError::AuthMissing("DIRGUIDE_TEST_UNSET_KEY_VAR".into()));
    }

    #[test]
    fn backoff_is_capped() {
        let cfg = OracleConfig {
            endpoint_url: Some("http://127.0.0.1:1/".into()),
            model_name: Some("m".into()),
            backoff_base: Duration::from_millis(100),
            backoff_cap: Duration::from_millis(250),
            ..Default::default()
        };
        let o = HttpOracle::new(&cfg).unwrap();
        assert!(o.backoff(0) <= Duration::from_millis(100));
        assert!(o.backoff(0) >= Duration::from_millis(50));
        assert!(o.backoff(10) <= Duration::from_millis(250));
    }
}
