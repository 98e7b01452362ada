use std::path::PathBuf;

use dirguide::perturb::{compute_crop, decode, write_crop};
use dirguide::{BBox, Direction, PerturbationSpec, Ratio};

use crate::error::CliError;

#[derive(Debug, Clone, clap::Args)]
pub struct PerturbArgs {
    /// Source image
    #[arg(long)]
    pub image: PathBuf,
    /// Target box as x,y,w,h in pixels
    #[arg(long)]
    pub bbox: String,
    /// left, right, up or down
    #[arg(long)]
    pub direction: String,
    /// Share of the box to cut away, 0.1..0.9 in steps of 0.1
    #[arg(long)]
    pub ratio: String,
    /// Directory for the cropped image
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Output name stem (default: image file stem)
    #[arg(long)]
    pub id: Option<String>,
}

pub fn parse_bbox(s: &str) -> Result<BBox, CliError> {
    let parts: Vec<u32> = s
        .split(',')
        .map(|p| p.trim().parse::<u32>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::config(format!("bbox {s:?}: {e}")))?;
    match parts[..] {
        [x, y, w, h] => Ok(BBox::new(x, y, w, h)),
        _ => Err(CliError::config(format!("bbox {s:?} must be x,y,w,h"))),
    }
}

pub fn run(args: &PerturbArgs) -> Result<(), CliError> {
    let bbox = parse_bbox(&args.bbox)?;
    let direction: Direction = args.direction.parse().map_err(CliError::config)?;
    let ratio: Ratio = args.ratio.parse().map_err(|e| CliError::config(format!("ratio: {e}")))?;
    let spec = PerturbationSpec::new(direction, ratio);
    let img = decode(&args.image)?;
    let rect = compute_crop(img.width(), img.height(), bbox, spec)?;
    let id = args
        .id
        .clone()
        .or_else(|| args.image.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "image".into());
    let written = write_crop(&img, rect, &args.out, &id, spec)?;
    println!("{rect}");
    log::info!("wrote {}", written.display());
    Ok(())
}
