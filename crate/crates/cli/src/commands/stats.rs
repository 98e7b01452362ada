use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use dirguide::genset::{read_corpus, record_label};
use dirguide::ingest::read_manifest;
use dirguide::scoring::{STOPWORDS, STOPWORD_LIST_ID};
use dirguide::GuidanceLabel;
use serde::Serialize;

use crate::error::CliError;

#[derive(Debug, Clone, clap::Args)]
pub struct StatsArgs {
    /// Manifest (JSON) or generated corpus (.jsonl)
    #[arg(required_unless_present = "dump_stopwords")]
    pub input: Option<PathBuf>,
    /// Print JSON instead of a table
    #[arg(long)]
    pub json: bool,
    /// Print the stopword list used by answer scoring and exit
    #[arg(long)]
    pub dump_stopwords: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassStats {
    pub total: usize,
    pub unlabeled: usize,
    pub counts: BTreeMap<GuidanceLabel, usize>,
    /// Percent of all labeled samples.
    pub share: BTreeMap<GuidanceLabel, f64>,
    /// Percent of directional samples, for the four directions.
    pub directional_share: BTreeMap<GuidanceLabel, f64>,
}

fn percent(n: usize, d: usize) -> f64 {
    if d == 0 {
        0.0
    } else {
        100.0 * n as f64 / d as f64
    }
}

pub fn class_stats(labels: impl IntoIterator<Item = Option<GuidanceLabel>>) -> ClassStats {
    let mut counts: BTreeMap<GuidanceLabel, usize> = GuidanceLabel::ALL.iter().map(|&l| (l, 0)).collect();
    let (mut total, mut unlabeled) = (0, 0);
    for l in labels {
        total += 1;
        match l {
            Some(l) => *counts.get_mut(&l).expect("all labels present") += 1,
            None => unlabeled += 1,
        }
    }
    let labeled = total - unlabeled;
    let directional: usize = counts.iter().filter(|(l, _)| l.is_directional()).map(|(_, &c)| c).sum();
    ClassStats {
        total,
        unlabeled,
        share: counts.iter().map(|(&l, &c)| (l, percent(c, labeled))).collect(),
        directional_share: counts
            .iter()
            .filter(|(l, _)| l.is_directional())
            .map(|(&l, &c)| (l, percent(c, directional)))
            .collect(),
        counts,
    }
}

pub fn load_stats(path: &Path) -> Result<ClassStats, CliError> {
    if path.extension().is_some_and(|e| e == "jsonl") {
        let records = read_corpus(path).map_err(CliError::config)?;
        Ok(class_stats(records.iter().map(record_label)))
    } else {
        let m = read_manifest(path)?;
        Ok(class_stats(m.samples.iter().map(|s| s.label)))
    }
}

pub fn render_table(s: &ClassStats) -> String {
    let mut out = format!("{:<10} {:>7} {:>8} {:>13}\n", "class", "count", "share", "directional");
    for l in GuidanceLabel::ALL {
        let dir = s.directional_share.get(&l).map(|p| format!("{p:.1}%")).unwrap_or_else(|| "-".into());
        out.push_str(&format!("{:<10} {:>7} {:>7.1}% {:>13}\n", l.as_str(), s.counts[&l], s.share[&l], dir));
    }
    out.push_str(&format!("{:<10} {:>7}\n", "total", s.total));
    if s.unlabeled > 0 {
        out.push_str(&format!("{:<10} {:>7}\n", "unlabeled", s.unlabeled));
    }
    out
}

pub fn run(args: &StatsArgs) -> Result<(), CliError> {
    if args.dump_stopwords {
        println!("# {STOPWORD_LIST_ID} ({} words)", STOPWORDS.len());
        for w in STOPWORDS {
            println!("{w}");
        }
        return Ok(());
    }
    let input = args.input.as_ref().ok_or_else(|| CliError::config("an input path is required"))?;
    let stats = load_stats(input)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&stats).expect("stats serialize"));
    } else {
        print!("{}", render_table(&stats));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use GuidanceLabel::*;

    #[test]
    fn shares() {
        let labels = [Some(Left), Some(Left), Some(Right), Some(Up), Some(Unchanged), Option::None];
        let s = class_stats(labels);
        assert_eq!(s.total, 6);
        assert_eq!(s.unlabeled, 1);
        assert_eq!(s.directional_share[&Left], 50.0);
        assert_eq!(s.share[&Unchanged], 20.0);
        assert!(!s.directional_share.contains_key(&Unchanged));
    }

    #[test]
    fn empty_is_all_zero() {
        let s = class_stats([]);
        assert!(s.counts.values().all(|&c| c == 0));
        assert!(s.share.values().all(|&p| p == 0.0));
        let t = render_table(&s);
        assert!(t.contains("left"));
        assert!(t.contains("total            0"));
    }
}
