//! Optional TOML settings file. Every key mirrors a command-line flag; a flag
//! given on the command line wins over the file, which wins over the default.

use std::path::{Path, PathBuf};
use std::time::Duration;

use dirguide::oracle::OracleConfig;
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    pub manifest: Option<PathBuf>,
    pub benchmark: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub range: Option<String>,
    pub step: Option<String>,
    pub threshold: Option<f64>,
    pub shuffle_letters: Option<bool>,
    pub balance: Option<bool>,
    pub mismatch_count: Option<usize>,
    pub dedup_label_runs: Option<bool>,
    pub rephrase: Option<String>,
    pub oracle: Option<String>,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub api_key_env: Option<String>,
    pub concurrency: Option<usize>,
    pub max_retries: Option<u32>,
    pub timeout_ms: Option<u64>,
    pub max_tokens: Option<u32>,
    pub protocol: Option<String>,
    pub template_family: Option<String>,
    pub templates_dir: Option<PathBuf>,
    pub shuffle_seed: Option<u64>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else { return Ok(FileConfig::default()) };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let mut cfg: FileConfig =
            toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.manifest, &mut cfg.benchmark, &mut cfg.out, &mut cfg.templates_dir].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

/// Flag, then file, then default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

/// Oracle connection flags shared by every subcommand that queries a model.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct OracleFlags {
    /// Oracle URI: http[:<endpoint>], scripted:visfrac=<f>, scripted:table=<json>,
    /// scripted:replay=<transcript>, scripted:letter=<L>, scripted:echo
    #[arg(long)]
    pub oracle: Option<String>,
    /// Chat-completions endpoint for the http oracle
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Model name sent with each request
    #[arg(long)]
    pub model: Option<String>,
    /// Environment variable holding the API key
    #[arg(long)]
    pub api_key_env: Option<String>,
    /// Maximum concurrent oracle requests
    #[arg(long)]
    pub concurrency: Option<usize>,
    /// Retries per request after the first attempt
    #[arg(long)]
    pub max_retries: Option<u32>,
    /// Per-request timeout in milliseconds
    #[arg(long)]
    pub timeout_ms: Option<u64>,
    /// Response token budget
    #[arg(long)]
    pub max_tokens: Option<u32>,
}

impl OracleFlags {
    pub fn uri(&self, file: &FileConfig) -> String {
        pick(self.oracle.clone(), file.oracle.clone(), "http".into())
    }

    pub fn resolve(&self, file: &FileConfig) -> OracleConfig {
        let d = OracleConfig::default();
        OracleConfig {
            endpoint_url: self.endpoint.clone().or_else(|| file.endpoint.clone()),
            model_name: self.model.clone().or_else(|| file.model.clone()),
            api_key_env: self.api_key_env.clone().or_else(|| file.api_key_env.clone()).or(d.api_key_env),
            max_concurrency: pick(self.concurrency, file.concurrency, d.max_concurrency),
            max_retries: pick(self.max_retries, file.max_retries, d.max_retries),
            timeout: self.timeout_ms.or(file.timeout_ms).map(Duration::from_millis).unwrap_or(d.timeout),
            max_tokens: pick(self.max_tokens, file.max_tokens, d.max_tokens),
            ..d
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pick_precedence() {
        assert_eq!(pick(Some(1), Some(2), 3), 1);
        assert_eq!(pick(None, Some(2), 3), 2);
        assert_eq!(pick(None, None, 3), 3);
    }

    #[test]
    fn file_paths_resolve_against_file_dir() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "manifest = \"pool.json\"\nseed = 4\nout = \"/abs/out\"\n").unwrap();
        let cfg = FileConfig::load(Some(&path)).unwrap();
        assert_eq!(cfg.manifest.unwrap(), dir.path().join("pool.json"));
        assert_eq!(cfg.out.unwrap(), PathBuf::from("/abs/out"));
        assert_eq!(cfg.seed, Some(4));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "seeed = 4\n").unwrap();
        assert!(matches!(FileConfig::load(Some(&path)), Err(CliError::Config(_))));
    }

    #[test]
    fn oracle_flags_override_file() {
        let file = FileConfig { concurrency: Some(9), timeout_ms: Some(1500), model: Some("m".into()), ..Default::default() };
        let flags = OracleFlags { concurrency: Some(2), ..Default::default() };
        let cfg = flags.resolve(&file);
        assert_eq!(cfg.max_concurrency, 2);
        assert_eq!(cfg.timeout, Duration::from_millis(1500));
        assert_eq!(cfg.model_name.as_deref(), Some("m"));
        assert_eq!(cfg.max_retries, 3);
        assert_eq!(flags.uri(&file), "http");
    }
}
