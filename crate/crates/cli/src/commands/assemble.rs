use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use dirguide::ingest::{assemble_benchmark, convert_vizwiz, read_manifest, save_manifest, VizwizRecord};

use crate::error::CliError;

#[derive(Debug, Clone, clap::Args)]
pub struct AssembleArgs {
    /// Manifest of human-labeled reframing samples (directional labels)
    #[arg(long)]
    pub reframe: PathBuf,
    /// Manifest of unanswerable samples (label none)
    #[arg(long)]
    pub none: PathBuf,
    /// Grounded pool to draw answerable samples from
    #[arg(long)]
    pub pool: PathBuf,
    /// Answerable samples to draw
    #[arg(long, default_value_t = 300)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output manifest path
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, clap::Args)]
pub struct ConvertArgs {
    /// VizWiz VQA annotation file (JSON array)
    #[arg(long)]
    pub annotations: PathBuf,
    /// Grounding polygons keyed by image file name (JSON object)
    #[arg(long)]
    pub grounding: Option<PathBuf>,
    /// Image directory written into the manifest
    #[arg(long)]
    pub image_root: PathBuf,
    /// Split tag recorded on every sample
    #[arg(long)]
    pub split: Option<String>,
    /// Output manifest path
    #[arg(long)]
    pub out: PathBuf,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

fn save(m: &dirguide::ingest::DatasetManifest, out: &Path) -> Result<(), CliError> {
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::write(format!("{}: {e}", dir.display())))?;
    }
    save_manifest(m, out).map_err(CliError::write)
}

pub fn run_assemble(args: &AssembleArgs) -> Result<(), CliError> {
    let bench = assemble_benchmark(
        &read_manifest(&args.reframe)?,
        &read_manifest(&args.none)?,
        &read_manifest(&args.pool)?,
        args.n,
        args.seed,
    )?;
    save(&bench, &args.out)?;
    println!("{} samples -> {}", bench.len(), args.out.display());
    Ok(())
}

pub fn run_convert(args: &ConvertArgs) -> Result<(), CliError> {
    let records: Vec<VizwizRecord> = read_json(&args.annotations)?;
    let grounding: BTreeMap<String, Vec<[i64; 2]>> = match &args.grounding {
        Some(p) => read_json(p)?,
        None => BTreeMap::new(),
    };
    let m = convert_vizwiz(&records, &grounding, &args.image_root, args.split.as_deref())?;
    save(&m, &args.out)?;
    println!("{} samples -> {}", m.len(), args.out.display());
    Ok(())
}
