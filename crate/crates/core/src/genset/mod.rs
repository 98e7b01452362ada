//! Training-corpus synthesis.
//!
//! Answerable pairs are found by querying the oracle on intact images. Each
//! answerable pair is then cropped with every spec on the perturbation grid
//! and re-queried: a pair the oracle still answers is labeled `Unchanged`,
//! otherwise it gets the direction that undoes the crop. Mismatched
//! question/image pairs supply the `None` class.

mod balance;
mod corpus;
mod mismatch;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use balance::{assign_letters, balance, class_counts, directional_target, BalanceOutcome};
pub use corpus::{emit_corpus, human_prompt, read_corpus, record_label, to_record, CorpusRecord, Turn, TASK_INSTRUCTION};
pub use mismatch::{make_mismatch_samples, rephrase_prompt, rephrase_question, template_rephrase, Rephraser};

use crate::ingest::{DatasetManifest, IngestError};
use crate::oracle::{OracleClient, OracleError, RequestHints};
use crate::perturb::{self, PerturbError};
use crate::scoring::{self, ScoringConfig};
use crate::types::{GuidanceLabel, GuidanceSample, LetterMap, PerturbationSpec, Provenance, Ratio, VqaSample};

pub const ANSWER_INSTRUCTION: &str = "Answer the question using a single word or phrase.";
pub const IMAGE_SUBDIR: &str = "images";
pub const CORPUS_FILE: &str = "corpus.jsonl";
pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Error)]
pub enum GenError {
    #[error("cannot write {path}: {message}")]
    Write { path: PathBuf, message: String },
    #[error("cannot read {path}: {message}")]
    Read { path: PathBuf, message: String },
    #[error("pool has {available} usable samples, {requested} needed")]
    InsufficientPool { available: usize, requested: usize },
    #[error("sample {0:?} has an empty answer")]
    EmptyAnswer(String),
    #[error("oracle unreachable: {0}")]
    OracleUnreachable(OracleError),
    #[error(transparent)]
    Oracle(OracleError),
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl From<IngestError> for GenError {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::InsufficientPool { available, requested } => GenError::InsufficientPool { available, requested },
            other => GenError::Config(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub perturb_lo: Ratio,
    pub perturb_hi: Ratio,
    /// Grid step in tenths.
    pub perturb_step: u8,
    pub scoring: ScoringConfig,
    pub shuffle_letters: bool,
    pub balance: bool,
    pub seed: u64,
    #[serde(skip)]
    pub out_dir: PathBuf,
    /// Mismatch draws; defaults to the directional mean after generation.
    pub mismatch_count: Option<usize>,
    pub dedup_by_label_run: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            perturb_lo: Ratio::from_tenths(1).unwrap(),
            perturb_hi: Ratio::from_tenths(9).unwrap(),
            perturb_step: 1,
            scoring: ScoringConfig::default(),
            shuffle_letters: true,
            balance: true,
            seed: 0,
            out_dir: PathBuf::from("out"),
            mismatch_count: None,
            dedup_by_label_run: false,
        }
    }
}

impl GenConfig {
    pub fn grid(&self) -> Result<Vec<PerturbationSpec>, GenError> {
        perturb::perturbation_grid(self.perturb_lo, self.perturb_hi, self.perturb_step)
            .map_err(|e| GenError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), GenError> {
        self.grid()?;
        self.scoring.validate().map_err(GenError::Config)
    }
}

/// Itemized reasons a pair or perturbation produced no sample.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusions {
    /// Pool samples without a box or without answers.
    pub ungrounded: usize,
    /// Oracle answered the intact pair incorrectly.
    pub not_answerable: usize,
    /// Oracle errors while checking intact pairs.
    pub filter_oracle_errors: usize,
    /// Source images that failed to decode (all their specs are lost).
    pub decode_errors: usize,
    /// Specs lost to decode failures or empty crops.
    pub crop_errors: usize,
    /// Oracle errors on perturbed pairs.
    pub perturb_oracle_errors: usize,
    /// Perturbed samples dropped by label-run dedup.
    pub dedup_dropped: usize,
    /// Mismatch draws that could not be made.
    pub mismatch_unavailable: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome {
    pub answerable: DatasetManifest,
    pub not_answerable: usize,
    pub oracle_errors: usize,
    pub ungrounded: usize,
}

fn answer_prompt(question: &str) -> String {
    format!("{}\n{ANSWER_INSTRUCTION}", question.trim())
}

/// Keeps pool samples whose intact image the oracle answers correctly, in pool order.
pub fn filter_answerable(
    pool: &DatasetManifest,
    client: &OracleClient,
    scoring: &ScoringConfig,
) -> Result<FilterOutcome, GenError> {
    let (grounded, ungrounded): (Vec<&VqaSample>, Vec<&VqaSample>) =
        pool.samples.iter().partition(|s| s.bbox.is_some() && !s.answers.is_empty());
    let reqs: Vec<_> = grounded
        .iter()
        .map(|s| {
            client.request(
                pool.image_path(s),
                answer_prompt(&s.question),
                RequestHints {
                    sample_id: s.id.clone(),
                    round: 1,
                    visible_fraction: Some(1.0),
                    reference_answer: s.answers.first().cloned(),
                    truth: None,
                },
            )
        })
        .collect();
    let results = client.answer_batch(&reqs);
    if !results.is_empty() && results.iter().all(|r| r.is_err()) {
        let first = results[0].clone().unwrap_err();
        if results.iter().all(|r| matches!(r, Err(OracleError::Transport { .. }))) {
            return Err(GenError::OracleUnreachable(first));
        }
        if let OracleError::AuthMissing(_) | OracleError::Config(_) = first {
            return Err(GenError::Oracle(first));
        }
    }

    let mut answerable = Vec::new();
    let (mut not_answerable, mut oracle_errors) = (0, 0);
    for (s, res) in grounded.into_iter().zip(results) {
        match res {
            Ok(text) if scoring::is_correct(&text, &s.answers, scoring) => answerable.push(s.clone()),
            Ok(_) => not_answerable += 1,
            Err(e) => {
                log::warn!("excluding {}: {e}", s.id);
                oracle_errors += 1;
            }
        }
    }
    Ok(FilterOutcome {
        answerable: DatasetManifest { image_root: pool.image_root.clone(), samples: answerable },
        not_answerable,
        oracle_errors,
        ungrounded: ungrounded.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GuidanceOutcome {
    pub samples: Vec<GuidanceSample>,
    pub decode_errors: usize,
    pub crop_errors: usize,
    pub oracle_errors: usize,
    pub dedup_dropped: usize,
}

struct Pending {
    source: usize,
    spec: PerturbationSpec,
    image_ref: String,
}

/// Crops every answerable sample with every grid spec, re-queries the oracle on
/// the crop and labels the result. Crops land in `{out_dir}/images`; sample
/// image refs are relative to `out_dir`.
pub fn generate_guidance(
    answerable: &DatasetManifest,
    cfg: &GenConfig,
    client: &OracleClient,
) -> Result<GuidanceOutcome, GenError> {
    let grid = cfg.grid()?;
    let image_dir = cfg.out_dir.join(IMAGE_SUBDIR);
    let mut outcome = GuidanceOutcome::default();
    let mut pending = Vec::new();
    let mut reqs = Vec::new();

    for (si, s) in answerable.samples.iter().enumerate() {
        let Some(bbox) = s.bbox else {
            outcome.crop_errors += grid.len();
            continue;
        };
        let path = answerable.image_path(s);
        let img = match perturb::decode(&path) {
            Ok(img) => img,
            Err(e) => {
                log::warn!("excluding {}: {e}", s.id);
                outcome.decode_errors += 1;
                outcome.crop_errors += grid.len();
                continue;
            }
        };
        for &spec in &grid {
            let rect = match perturb::compute_crop(img.width(), img.height(), bbox, spec) {
                Ok(r) => r,
                Err(e) => {
                    log::warn!("excluding {} {spec}: {e}", s.id);
                    outcome.crop_errors += 1;
                    continue;
                }
            };
            let written = perturb::write_crop(&img, rect, &image_dir, &s.id, spec).map_err(|e| match e {
                PerturbError::Write { path, message } => GenError::Write { path, message },
                other => GenError::Write { path: image_dir.clone(), message: other.to_string() },
            })?;
            reqs.push(client.request(
                written,
                answer_prompt(&s.question),
                RequestHints {
                    sample_id: s.id.clone(),
                    round: 1,
                    visible_fraction: Some(perturb::visible_fraction(bbox, spec.direction, rect)),
                    reference_answer: s.answers.first().cloned(),
                    truth: None,
                },
            ));
            pending.push(Pending {
                source: si,
                spec,
                image_ref: format!("{IMAGE_SUBDIR}/{}", perturb::output_name(&s.id, spec)),
            });
        }
    }

    let results = client.answer_batch(&reqs);
    for (p, res) in pending.into_iter().zip(results) {
        let s = &answerable.samples[p.source];
        let label = match res {
            Ok(text) if scoring::is_correct(&text, &s.answers, &cfg.scoring) => GuidanceLabel::Unchanged,
            Ok(_) => p.spec.guidance(),
            Err(e) => {
                log::warn!("excluding {} {}: {e}", s.id, p.spec);
                outcome.oracle_errors += 1;
                continue;
            }
        };
        outcome.samples.push(GuidanceSample {
            id: format!("{}_{}_{}", s.id, p.spec.direction, p.spec.ratio.tenths()),
            image_ref: p.image_ref,
            question: s.question.clone(),
            label,
            letter_map: LetterMap::template(),
            provenance: Provenance::Perturbation { source_id: s.id.clone(), spec: p.spec },
        });
    }

    if cfg.dedup_by_label_run {
        let before = outcome.samples.len();
        outcome.samples = dedup_label_runs(std::mem::take(&mut outcome.samples));
        outcome.dedup_dropped = before - outcome.samples.len();
    }
    Ok(outcome)
}

/// Within each (source, direction) sweep, keeps only the first sample of every
/// run of equal labels across ascending ratios.
fn dedup_label_runs(samples: Vec<GuidanceSample>) -> Vec<GuidanceSample> {
    let mut last: BTreeMap<(String, crate::types::Direction), (Ratio, GuidanceLabel)> = BTreeMap::new();
    let mut out = Vec::with_capacity(samples.len());
    for s in samples {
        if let Provenance::Perturbation { source_id, spec } = &s.provenance {
            let key = (source_id.clone(), spec.direction);
            let prev = last.insert(key, (spec.ratio, s.label));
            if matches!(prev, Some((r, l)) if r < spec.ratio && l == s.label) {
                continue;
            }
        }
        out.push(s);
    }
    out
}

/// Everything needed to reproduce a generation run, written next to the corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub pool_size: usize,
    pub answerable: usize,
    pub grid_size: usize,
    pub generated: usize,
    pub mismatch_drawn: usize,
    pub balance_target: Option<usize>,
    pub none_deficit: Option<usize>,
    pub pre_balance_counts: BTreeMap<GuidanceLabel, usize>,
    pub class_counts: BTreeMap<GuidanceLabel, usize>,
    pub records: usize,
    pub exclusions: Exclusions,
    pub config: GenConfig,
    pub oracle: String,
    pub rephraser: String,
    pub stopword_list: String,
    pub transcript: Option<String>,
    pub corpus: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRun {
    pub samples: Vec<GuidanceSample>,
    pub report: RunReport,
}

/// Filter → perturb and label → mismatch → balance → letters → corpus + report.
/// `transcript` is only echoed into the report.
pub fn run_generation(
    pool: &DatasetManifest,
    cfg: &GenConfig,
    client: &OracleClient,
    rephraser: &Rephraser<'_>,
    transcript: Option<&str>,
) -> Result<GenerationRun, GenError> {
    cfg.validate()?;
    let grid_size = cfg.grid()?.len();
    let filtered = filter_answerable(pool, client, &cfg.scoring)?;
    let guided = generate_guidance(&filtered.answerable, cfg, client)?;

    let mut exclusions = Exclusions {
        ungrounded: filtered.ungrounded,
        not_answerable: filtered.not_answerable,
        filter_oracle_errors: filtered.oracle_errors,
        decode_errors: guided.decode_errors,
        crop_errors: guided.crop_errors,
        perturb_oracle_errors: guided.oracle_errors,
        dedup_dropped: guided.dedup_dropped,
        mismatch_unavailable: 0,
    };
    let generated = guided.samples.len();
    let mut samples = guided.samples;

    let n_mismatch = cfg.mismatch_count.unwrap_or_else(|| directional_target(&class_counts(&samples)));
    let mismatched = match make_mismatch_samples(pool, n_mismatch, cfg.seed, rephraser) {
        Ok(v) => v,
        Err(GenError::InsufficientPool { available, .. }) => {
            log::warn!("pool has {available} usable samples; no mismatch samples drawn");
            exclusions.mismatch_unavailable = n_mismatch;
            Vec::new()
        }
        Err(e) => return Err(e),
    };
    let mismatch_drawn = mismatched.len();
    samples.extend(mismatched);

    let pre_balance_counts = class_counts(&samples);
    let (samples, balance_target, none_deficit) = if cfg.balance {
        let b = balance(samples, cfg.seed);
        (b.samples, Some(b.target), Some(b.none_deficit))
    } else {
        let mut s = samples;
        s.sort_by(|a, b| a.id.cmp(&b.id));
        (s, None, None)
    };
    let samples = assign_letters(samples, cfg.shuffle_letters, cfg.seed);

    let corpus_path = cfg.out_dir.join(CORPUS_FILE);
    let records = emit_corpus(&samples, &corpus_path)?;
    let report = RunReport {
        seed: cfg.seed,
        pool_size: pool.len(),
        answerable: filtered.answerable.len(),
        grid_size,
        generated,
        mismatch_drawn,
        balance_target,
        none_deficit,
        pre_balance_counts,
        class_counts: class_counts(&samples),
        records,
        exclusions,
        config: cfg.clone(),
        oracle: client.describe(),
        rephraser: rephraser.describe(),
        stopword_list: cfg.scoring.stopword_list_id.clone(),
        transcript: transcript.map(str::to_string),
        corpus: CORPUS_FILE.into(),
    };
    write_json(&cfg.out_dir.join(REPORT_FILE), &report)?;
    Ok(GenerationRun { samples, report })
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), GenError> {
    let text = serde_json::to_string_pretty(value).expect("report serializes") + "\n";
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| GenError::Write { path: path.to_path_buf(), message: e.to_string() })?;
    }
    std::fs::write(path, text).map_err(|e| GenError::Write { path: path.to_path_buf(), message: e.to_string() })
}
