//! Name → constructor table for oracles.
//!
//! Oracle URIs look like `scripted:visfrac=0.5`, `scripted:table=answers.json`,
//! `scripted:replay=run.jsonl`, `scripted:letter=A`, `scripted:echo`, `http` or `http:<endpoint>`.

use std::collections::BTreeMap;
use std::path::Path;

use super::{AnswerTable, EchoTruth, FixedLetter, HttpOracle, Oracle, OracleConfig, OracleError, VisibleFractionRule};

pub type OracleFactory = fn(arg: Option<&str>, cfg: &OracleConfig) -> Result<Box<dyn Oracle>, OracleError>;

pub struct OracleRegistry {
    factories: BTreeMap<String, OracleFactory>,
}

impl Default for OracleRegistry {
    fn default() -> Self {
        let mut r = OracleRegistry { factories: BTreeMap::new() };
        r.register("http", build_http);
        r.register("scripted:visfrac", build_visfrac);
        r.register("scripted:table", build_table);
        r.register("scripted:replay", build_replay);
        r.register("scripted:letter", build_letter);
        r.register("scripted:echo", build_echo);
        r
    }
}

impl OracleRegistry {
    pub fn empty() -> Self {
        OracleRegistry { factories: BTreeMap::new() }
    }

    pub fn register(&mut self, name: &str, factory: OracleFactory) {
        self.factories.insert(name.to_string(), factory);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    /// Splits a URI into a registered name and its argument.
    pub fn parse_uri(uri: &str) -> (String, Option<String>) {
        let uri = uri.trim();
        if uri.starts_with("http://") || uri.starts_with("https://") {
            return ("http".into(), Some(uri.to_string()));
        }
        if let Some(rest) = uri.strip_prefix("scripted:") {
            return match rest.split_once('=') {
                Some((k, v)) => (format!("scripted:{k}"), Some(v.to_string())),
                None => (uri.to_string(), None),
            };
        }
        match uri.split_once(':') {
            Some((k, v)) => (k.to_string(), Some(v.to_string()).filter(|v| !v.is_empty())),
            None => (uri.to_string(), None),
        }
    }

    pub fn build(&self, uri: &str, cfg: &OracleConfig) -> Result<Box<dyn Oracle>, OracleError> {
        let (name, arg) = Self::parse_uri(uri);
        let factory = self.factories.get(&name).ok_or_else(|| {
            let known: Vec<&str> = self.names().collect();
            OracleError::Config(format!("unknown oracle {name:?}; known: {}", known.join(", ")))
        })?;
        factory(arg.as_deref(), cfg)
    }
}

fn require<'a>(arg: Option<&'a str>, what: &str) -> Result<&'a str, OracleError> {
    arg.filter(|a| !a.is_empty())
        .ok_or_else(|| OracleError::Config(format!("{what} requires an argument")))
}

fn build_http(arg: Option<&str>, cfg: &OracleConfig) -> Result<Box<dyn Oracle>, OracleError> {
    let mut cfg = cfg.clone();
    if let Some(url) = arg.filter(|a| !a.is_empty()) {
        cfg.endpoint_url = Some(url.to_string());
    }
    Ok(Box::new(HttpOracle::new(&cfg)?))
}

fn build_visfrac(arg: Option<&str>, _: &OracleConfig) -> Result<Box<dyn Oracle>, OracleError> {
    let raw = require(arg, "scripted:visfrac")?;
    let v: f64 = raw.parse().map_err(|_| OracleError::Config(format!("bad visible fraction {raw:?}")))?;
    Ok(Box::new(VisibleFractionRule::new(v)?))
}

fn build_table(arg: Option<&str>, _: &OracleConfig) -> Result<Box<dyn Oracle>, OracleError> {
    Ok(Box::new(AnswerTable::from_json_file(Path::new(require(arg, "scripted:table")?))?))
}

fn build_replay(arg: Option<&str>, _: &OracleConfig) -> Result<Box<dyn Oracle>, OracleError> {
    Ok(Box::new(AnswerTable::from_transcript(Path::new(require(arg, "scripted:replay")?))?))
}

fn build_letter(arg: Option<&str>, _: &OracleConfig) -> Result<Box<dyn Oracle>, OracleError> {
    let raw = require(arg, "scripted:letter")?;
    let mut chars = raw.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) if c.is_ascii_alphabetic() => Ok(Box::new(FixedLetter(c.to_ascii_uppercase()))),
        _ => Err(OracleError::Config(format!("bad option letter {raw:?}"))),
    }
}

fn build_echo(arg: Option<&str>, _: &OracleConfig) -> Result<Box<dyn Oracle>, OracleError> {
    match arg {
        None => Ok(Box::new(EchoTruth)),
        Some(a) => Err(OracleError::Config(format!("scripted:echo takes no argument, got {a:?}"))),
    }
}
