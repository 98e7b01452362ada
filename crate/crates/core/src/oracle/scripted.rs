//! Deterministic oracle stand-ins.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use super::{Oracle, OracleError, OracleRequest, TranscriptRecord};

/// Answer returned by [`VisibleFractionRule`] when too little of the target is visible.
pub const WRONG_ANSWER: &str = "UNKNOWN";

#[derive(Debug, Clone, PartialEq)]
pub enum ScriptedOracleSpec {
    VisibleFractionRule { min_visible: f64 },
    AnswerTable(HashMap<String, String>),
    FixedLetter(char),
}

impl ScriptedOracleSpec {
    pub fn build(self) -> Result<Box<dyn Oracle>, OracleError> {
        Ok(match self {
            ScriptedOracleSpec::VisibleFractionRule { min_visible } => Box::new(VisibleFractionRule::new(min_visible)?),
            ScriptedOracleSpec::AnswerTable(t) => Box::new(AnswerTable::new(t)),
            ScriptedOracleSpec::FixedLetter(l) => Box::new(FixedLetter(l)),
        })
    }
}

/// Answers correctly while at least `min_visible` of the target box survives the crop.
#[derive(Debug, Clone, Copy)]
pub struct VisibleFractionRule {
    min_visible: f64,
}

impl VisibleFractionRule {
    pub fn new(min_visible: f64) -> Result<Self, OracleError> {
        if !(0.0..=1.0).contains(&min_visible) {
            return Err(OracleError::Config(format!("min_visible {min_visible} outside [0,1]")));
        }
        Ok(VisibleFractionRule { min_visible })
    }
}

impl Oracle for VisibleFractionRule {
    fn describe(&self) -> String {
        format!("scripted:visfrac={}", self.min_visible)
    }

    fn answer(&self, req: &OracleRequest) -> Result<String, OracleError> {
        if req.hints.visible_fraction.unwrap_or(1.0) >= self.min_visible {
            req.hints.reference_answer.clone().filter(|a| !a.is_empty()).ok_or(OracleError::Refusal)
        } else {
            Ok(WRONG_ANSWER.to_string())
        }
    }
}

/// Fixed responses looked up by request key, then `{sample_id}#r{round}`, then `sample_id`.
#[derive(Debug, Clone, Default)]
pub struct AnswerTable {
    table: HashMap<String, String>,
}

impl AnswerTable {
    pub fn new(table: HashMap<String, String>) -> Self {
        AnswerTable { table }
    }

    /// Reads a JSON object mapping ids to answers.
    pub fn from_json_file(path: &Path) -> Result<Self, OracleError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| OracleError::Config(format!("{}: {e}", path.display())))?;
        let table = serde_json::from_str(&text)
            .map_err(|e| OracleError::Config(format!("{}: {e}", path.display())))?;
        Ok(AnswerTable { table })
    }

    /// Builds a table keyed by request key from a transcript log, so a logged
    /// run can be replayed without the original model.
    pub fn from_transcript(path: &Path) -> Result<Self, OracleError> {
        let cfg = |e: String| OracleError::Config(format!("{}: {e}", path.display()));
        let file = std::fs::File::open(path).map_err(|e| cfg(e.to_string()))?;
        let mut table = HashMap::new();
        for line in std::io::BufReader::new(file).lines() {
            let line = line.map_err(|e| cfg(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: TranscriptRecord = serde_json::from_str(&line).map_err(|e| cfg(e.to_string()))?;
            if let Some(resp) = rec.response {
                table.insert(rec.key, resp);
            }
        }
        Ok(AnswerTable { table })
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

impl Oracle for AnswerTable {
    fn describe(&self) -> String {
        format!("scripted:table({} entries)", self.table.len())
    }

    fn answer(&self, req: &OracleRequest) -> Result<String, OracleError> {
        let id = &req.hints.sample_id;
        self.table
            .get(&req.key())
            .or_else(|| self.table.get(&format!("{id}#r{}", req.hints.round)))
            .or_else(|| self.table.get(id))
            .filter(|s| !s.is_empty())
            .cloned()
            .ok_or(OracleError::Refusal)
    }
}

/// Always answers with the same option letter.
#[derive(Debug, Clone, Copy)]
pub struct FixedLetter(pub char);

impl Oracle for FixedLetter {
    fn describe(&self) -> String {
        format!("scripted:letter={}", self.0)
    }

    fn answer(&self, _req: &OracleRequest) -> Result<String, OracleError> {
        Ok(self.0.to_string())
    }
}

/// Replies with the display phrase of the request's true label; a perfect guidance oracle.
#[derive(Debug, Clone, Copy)]
pub struct EchoTruth;

impl Oracle for EchoTruth {
    fn describe(&self) -> String {
        "scripted:echo".into()
    }

    fn answer(&self, req: &OracleRequest) -> Result<String, OracleError> {
        req.hints.truth.map(|l| l.display().to_string()).ok_or(OracleError::Refusal)
    }
}
