use std::path::PathBuf;

use dirguide::genset::{run_generation, GenConfig, Rephraser};
use dirguide::ingest::load_manifest;
use dirguide::oracle::{OracleClient, OracleRegistry};
use dirguide::scoring::ScoringConfig;
use dirguide::Ratio;

use crate::config::{pick, FileConfig, OracleFlags};
use crate::error::CliError;

pub const TRANSCRIPT_FILE: &str = "transcript.jsonl";

#[derive(Debug, Clone, Default, clap::Args)]
pub struct GenerateArgs {
    /// Grounded VQA manifest (JSON)
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Output directory for images, corpus.jsonl, report.json and transcript.jsonl
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Perturbation ratio range lo:hi, in tenths (default 0.1:0.9)
    #[arg(long)]
    pub range: Option<String>,
    /// Perturbation ratio step, a multiple of 0.1 (default 0.1)
    #[arg(long)]
    pub step: Option<String>,
    /// RNG seed for mismatch pairing, balancing and letter shuffling (default 0)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Answer-precision threshold e in [0,1] (default 0.5)
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Shuffle option letters per sample (default true)
    #[arg(long)]
    pub shuffle_letters: Option<bool>,
    /// Under-sample unchanged and none to the directional mean (default true)
    #[arg(long)]
    pub balance: Option<bool>,
    /// Mismatch samples to draw (default: directional mean)
    #[arg(long)]
    pub mismatch_count: Option<usize>,
    /// Keep only the first sample of each equal-label run per direction (default false)
    #[arg(long)]
    pub dedup_label_runs: Option<bool>,
    /// Question rephrasing for mismatch samples: template or oracle (default template)
    #[arg(long)]
    pub rephrase: Option<String>,
    #[command(flatten)]
    pub oracle: OracleFlags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RephraseMode {
    Template,
    Oracle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerateSettings {
    pub manifest: PathBuf,
    pub gen: GenConfig,
    pub rephrase: RephraseMode,
}

fn parse_ratio(s: &str, what: &str) -> Result<Ratio, CliError> {
    s.parse().map_err(|e| CliError::config(format!("{what}: {e}")))
}

pub fn parse_range(s: &str) -> Result<(Ratio, Ratio), CliError> {
    let (lo, hi) = s.split_once(':').ok_or_else(|| CliError::config(format!("range {s:?} is not lo:hi")))?;
    let (lo, hi) = (parse_ratio(lo, "range")?, parse_ratio(hi, "range")?);
    if lo > hi {
        return Err(CliError::config(format!("range {s:?} is empty")));
    }
    Ok((lo, hi))
}

impl GenerateArgs {
    pub fn resolve(&self, file: &FileConfig) -> Result<GenerateSettings, CliError> {
        let d = GenConfig::default();
        let manifest = self
            .manifest
            .clone()
            .or_else(|| file.manifest.clone())
            .ok_or_else(|| CliError::config("--manifest is required\n\nUsage: dirguide generate --manifest <MANIFEST> [OPTIONS]"))?;
        let (perturb_lo, perturb_hi) = match self.range.as_ref().or(file.range.as_ref()) {
            Some(r) => parse_range(r)?,
            None => (d.perturb_lo, d.perturb_hi),
        };
        let perturb_step = match self.step.as_ref().or(file.step.as_ref()) {
            Some(s) => parse_ratio(s, "step")?.tenths(),
            None => d.perturb_step,
        };
        let threshold = pick(self.threshold, file.threshold, d.scoring.threshold_e);
        let rephrase = match pick(self.rephrase.clone(), file.rephrase.clone(), "template".into()).as_str() {
            "template" => RephraseMode::Template,
            "oracle" => RephraseMode::Oracle,
            other => return Err(CliError::config(format!("unknown rephrase mode {other:?}; expected template or oracle"))),
        };
        let gen = GenConfig {
            perturb_lo,
            perturb_hi,
            perturb_step,
            scoring: ScoringConfig::with_threshold(threshold),
            shuffle_letters: pick(self.shuffle_letters, file.shuffle_letters, d.shuffle_letters),
            balance: pick(self.balance, file.balance, d.balance),
            seed: pick(self.seed, file.seed, d.seed),
            out_dir: pick(self.out.clone(), file.out.clone(), d.out_dir),
            mismatch_count: self.mismatch_count.or(file.mismatch_count),
            dedup_by_label_run: pick(self.dedup_label_runs, file.dedup_label_runs, d.dedup_by_label_run),
        };
        gen.validate().map_err(CliError::config)?;
        Ok(GenerateSettings { manifest, gen, rephrase })
    }
}

pub fn run(args: &GenerateArgs, file: &FileConfig) -> Result<(), CliError> {
    let settings = args.resolve(file)?;
    let pool = load_manifest(&settings.manifest)?;
    let oracle_cfg = args.oracle.resolve(file);
    let oracle = OracleRegistry::default().build(&args.oracle.uri(file), &oracle_cfg)?;
    std::fs::create_dir_all(&settings.gen.out_dir)
        .map_err(|e| CliError::write(format!("{}: {e}", settings.gen.out_dir.display())))?;
    let transcript = settings.gen.out_dir.join(TRANSCRIPT_FILE);
    let client = OracleClient::from_config(oracle, &oracle_cfg)
        .with_transcript(&transcript)
        .map_err(|e| CliError::write(format!("{}: {e}", transcript.display())))?;
    let rephraser = match settings.rephrase {
        RephraseMode::Template => Rephraser::Template,
        RephraseMode::Oracle => Rephraser::Oracle { client: &client, fallback: true },
    };
    let run = run_generation(&pool, &settings.gen, &client, &rephraser, Some(TRANSCRIPT_FILE))?;
    let r = &run.report;
    println!(
        "pool {} answerable {} generated {} mismatch {} records {}",
        r.pool_size, r.answerable, r.generated, r.mismatch_drawn, r.records
    );
    println!("wrote {}", settings.gen.out_dir.display());
    Ok(())
}
