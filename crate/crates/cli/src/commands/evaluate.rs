use std::io::Write;
use std::path::PathBuf;

use dirguide::eval::{run_benchmark, write_report, PromptProtocol, ProtocolMode, PREDICTIONS_FILE};
use dirguide::ingest::read_manifest;
use dirguide::oracle::{OracleClient, OracleRegistry};
use dirguide::GuidanceLabel;

use super::generate::TRANSCRIPT_FILE;
use crate::config::{pick, FileConfig, OracleFlags};
use crate::error::CliError;

#[derive(Debug, Clone, Default, clap::Args)]
pub struct EvaluateArgs {
    /// Labeled benchmark manifest (JSON, every sample carries a label)
    #[arg(long)]
    pub benchmark: Option<PathBuf>,
    /// Output directory for metrics.json, confusion.csv, confusion.svg and predictions.jsonl
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// single-round or two-round (default single-round)
    #[arg(long)]
    pub protocol: Option<String>,
    /// Prompt family: basic, llava, instructblip or gpt (default basic)
    #[arg(long)]
    pub template_family: Option<String>,
    /// Directory of `{family}_{single|round1|round2}.txt` files overriding built-in prompts
    #[arg(long)]
    pub templates_dir: Option<PathBuf>,
    /// Shuffle option letters per sample with this seed (templates that list options only)
    #[arg(long)]
    pub shuffle_seed: Option<u64>,
    #[command(flatten)]
    pub oracle: OracleFlags,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluateSettings {
    pub benchmark: PathBuf,
    pub out: PathBuf,
    pub protocol: PromptProtocol,
    pub shuffle_seed: Option<u64>,
}

impl EvaluateArgs {
    pub fn resolve(&self, file: &FileConfig) -> Result<EvaluateSettings, CliError> {
        let benchmark = self
            .benchmark
            .clone()
            .or_else(|| file.benchmark.clone())
            .ok_or_else(|| CliError::config("--benchmark is required\n\nUsage: dirguide evaluate --benchmark <BENCHMARK> [OPTIONS]"))?;
        let mode: ProtocolMode = pick(self.protocol.clone(), file.protocol.clone(), "single-round".into())
            .parse()
            .map_err(CliError::config)?;
        let family = pick(self.template_family.clone(), file.template_family.clone(), "basic".into());
        let dir = self.templates_dir.clone().or_else(|| file.templates_dir.clone());
        let protocol = PromptProtocol::from_family(&family, mode, dir.as_deref()).map_err(CliError::config)?;
        Ok(EvaluateSettings {
            benchmark,
            out: pick(self.out.clone(), file.out.clone(), "eval_out".into()),
            protocol,
            shuffle_seed: self.shuffle_seed.or(file.shuffle_seed),
        })
    }
}

pub fn run(args: &EvaluateArgs, file: &FileConfig) -> Result<(), CliError> {
    let s = args.resolve(file)?;
    let bench = read_manifest(&s.benchmark)?;
    let oracle_cfg = args.oracle.resolve(file);
    let oracle = OracleRegistry::default().build(&args.oracle.uri(file), &oracle_cfg)?;
    std::fs::create_dir_all(&s.out).map_err(|e| CliError::write(format!("{}: {e}", s.out.display())))?;
    let transcript = s.out.join(TRANSCRIPT_FILE);
    let client = OracleClient::from_config(oracle, &oracle_cfg)
        .with_transcript(&transcript)
        .map_err(|e| CliError::write(format!("{}: {e}", transcript.display())))?;

    let run = run_benchmark(&bench, &s.protocol, &client, s.shuffle_seed)?;
    write_report(&run.report, &s.out)?;
    let pred_path = s.out.join(PREDICTIONS_FILE);
    let mut body = Vec::new();
    for p in &run.predictions {
        serde_json::to_writer(&mut body, p).expect("prediction serializes");
        body.push(b'\n');
    }
    std::fs::File::create(&pred_path)
        .and_then(|mut f| f.write_all(&body))
        .map_err(|e| CliError::write(format!("{}: {e}", pred_path.display())))?;

    let r = &run.report;
    println!("samples {}  scored {}  excluded {} (unparseable {}, oracle errors {})", r.total, r.total - r.excluded, r.excluded, r.unparseable, r.oracle_errors);
    println!("accuracy {:.4}  macro F1 {:.4}  ACC(F) {:.4}", r.accuracy, r.macro_f1, r.acc_f);
    for l in GuidanceLabel::ALL {
        let c = &r.per_class[&l];
        println!("  {:<5} P {:.3}  R {:.3}  F1 {:.3}  support {}", l.short(), c.precision, c.recall, c.f1, c.support);
    }
    if r.degenerate {
        eprintln!("warning: no prediction could be scored; metrics are 0");
    }
    println!("wrote {}", s.out.display());
    Ok(())
}
