//! Instruction-tuning JSONL output.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::GenError;
use crate::types::{GuidanceLabel, GuidanceSample};

pub const TASK_INSTRUCTION: &str = "To improve the image and answer the question, how should the camera be moved?";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub from: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub id: String,
    pub image: String,
    pub conversations: Vec<Turn>,
}

pub fn human_prompt(sample: &GuidanceSample) -> String {
    format!("<image>\n{} {TASK_INSTRUCTION} {}", sample.question.trim(), sample.letter_map.render_options())
}

pub fn to_record(sample: &GuidanceSample) -> CorpusRecord {
    CorpusRecord {
        id: sample.id.clone(),
        image: sample.image_ref.clone(),
        conversations: vec![
            Turn { from: "human".into(), value: human_prompt(sample) },
            Turn { from: "gpt".into(), value: sample.answer_letter().to_string() },
        ],
    }
}

/// Writes one record per line; returns the record count.
pub fn emit_corpus(samples: &[GuidanceSample], out_path: &Path) -> Result<usize, GenError> {
    let werr = |e: std::io::Error| GenError::Write { path: out_path.to_path_buf(), message: e.to_string() };
    if let Some(parent) = out_path.parent() {
        std::fs::create_dir_all(parent).map_err(werr)?;
    }
    let mut w = BufWriter::new(File::create(out_path).map_err(werr)?);
    for s in samples {
        let line = serde_json::to_string(&to_record(s)).expect("record serializes");
        writeln!(w, "{line}").map_err(werr)?;
    }
    w.flush().map_err(werr)?;
    Ok(samples.len())
}

fn option_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"\b([A-F])\.(Leave it unchanged|Left|Right|Up|Down|None of the other options)\.").unwrap()
    })
}

/// Recovers the label of a record from its rendered options and answer letter.
pub fn record_label(rec: &CorpusRecord) -> Option<GuidanceLabel> {
    let human = rec.conversations.iter().find(|t| t.from == "human")?;
    let answer = rec.conversations.iter().find(|t| t.from == "gpt")?.value.trim();
    option_re()
        .captures_iter(&human.value)
        .find(|c| &c[1] == answer)
        .and_then(|c| c[2].parse().ok())
}

pub fn read_corpus(path: &Path) -> Result<Vec<CorpusRecord>, GenError> {
    let rerr = |m: String| GenError::Read { path: path.to_path_buf(), message: m };
    let file = File::open(path).map_err(|e| rerr(e.to_string()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| rerr(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| rerr(format!("line {}: {e}", i + 1)))?);
    }
    Ok(out)
}
