//! Evaluation report: metrics, exclusions and the files written for a run.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::metrics::{scores, Confusion};
use super::EvalError;
use crate::types::GuidanceLabel;

pub const METRICS_FILE: &str = "metrics.json";
pub const CONFUSION_CSV: &str = "confusion.csv";
pub const CONFUSION_SVG: &str = "confusion.svg";
pub const PREDICTIONS_FILE: &str = "predictions.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Benchmark samples with this true label, excluded ones included.
    pub support: u64,
    /// Samples of this label that reached the confusion matrix.
    pub evaluated: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalConfigEcho {
    pub protocol: String,
    pub template_family: String,
    pub templates: Vec<String>,
    pub oracle: String,
    pub shuffle_seed: Option<u64>,
    pub f1_average: String,
    pub excluded_in_denominator: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub acc_f: f64,
    /// Exact values as `num/den`.
    pub exact: BTreeMap<String, String>,
    pub excluded: u64,
    pub unparseable: u64,
    pub oracle_errors: u64,
    pub excluded_per_class: BTreeMap<GuidanceLabel, u64>,
    pub per_class: BTreeMap<GuidanceLabel, ClassReport>,
    pub confusion: Confusion,
    pub total: u64,
    /// Set when nothing reached the confusion matrix; all metrics are then 0.
    pub degenerate: bool,
    pub config: EvalConfigEcho,
}

impl EvalReport {
    /// Builds the report from a confusion matrix and the per-class exclusion counts.
    pub fn from_counts(
        confusion: Confusion,
        excluded_per_class: BTreeMap<GuidanceLabel, u64>,
        unparseable: u64,
        oracle_errors: u64,
        config: EvalConfigEcho,
    ) -> Self {
        let s = scores(&confusion);
        let excluded_per_class: BTreeMap<GuidanceLabel, u64> = GuidanceLabel::ALL
            .iter()
            .map(|&l| (l, excluded_per_class.get(&l).copied().unwrap_or(0)))
            .collect();
        let per_class = GuidanceLabel::ALL
            .iter()
            .map(|&l| {
                let cs = s.per_class[l.index()];
                let evaluated = confusion.row_sum(l);
                (
                    l,
                    ClassReport {
                        precision: cs.precision.to_f64(),
                        recall: cs.recall.to_f64(),
                        f1: cs.f1.to_f64(),
                        support: evaluated + excluded_per_class[&l],
                        evaluated,
                    },
                )
            })
            .collect();
        let excluded: u64 = excluded_per_class.values().sum();
        let exact = BTreeMap::from([
            ("accuracy".to_string(), s.accuracy.to_string()),
            ("macro_f1".to_string(), s.macro_f1.to_string()),
            ("acc_f".to_string(), s.acc_f.to_string()),
        ]);
        EvalReport {
            accuracy: s.accuracy.to_f64(),
            macro_f1: s.macro_f1.to_f64(),
            acc_f: s.acc_f.to_f64(),
            exact,
            excluded,
            unparseable,
            oracle_errors,
            excluded_per_class,
            per_class,
            total: confusion.total() + excluded,
            degenerate: confusion.total() == 0,
            confusion,
            config,
        }
    }
}

/// Renders the matrix with a header row and column of short labels.
pub fn confusion_csv(c: &Confusion) -> String {
    let mut out = String::from("true\\pred");
    for l in GuidanceLabel::ALL {
        out.push(',');
        out.push_str(l.short());
    }
    out.push('\n');
    for t in GuidanceLabel::ALL {
        out.push_str(t.short());
        for p in GuidanceLabel::ALL {
            let _ = write!(out, ",{}", c.get(t, p));
        }
        out.push('\n');
    }
    out
}

/// Heatmap whose cell darkness is proportional to its count.
pub fn confusion_svg(c: &Confusion) -> String {
    const CELL: u32 = 60;
    const MARGIN: u32 = 70;
    let size = MARGIN + CELL * 6 + 10;
    let max = c.max_cell();
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}" font-family="sans-serif" font-size="14">"#
    );
    let _ = writeln!(s, r#"<rect width="{size}" height="{size}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="16" text-anchor="middle">Predicted</text>"#, MARGIN + CELL * 3);
    let _ = writeln!(
        s,
        r#"<text x="14" y="{y}" text-anchor="middle" transform="rotate(-90 14 {y})">True</text>"#,
        y = MARGIN + CELL * 3
    );
    for (i, l) in GuidanceLabel::ALL.iter().enumerate() {
        let mid = MARGIN + CELL * i as u32 + CELL / 2;
        let _ = writeln!(s, r#"<text x="{mid}" y="{}" text-anchor="middle">{}</text>"#, MARGIN - 10, l.short());
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, MARGIN - 8, mid + 5, l.short());
    }
    for (r, t) in GuidanceLabel::ALL.iter().enumerate() {
        for (col, p) in GuidanceLabel::ALL.iter().enumerate() {
            let n = c.get(*t, *p);
            let shade = if max == 0 { 0.0 } else { n as f64 / max as f64 };
            let channel = |full: f64| (255.0 - (255.0 - full) * shade).round() as u8;
            let (x, y) = (MARGIN + CELL * col as u32, MARGIN + CELL * r as u32);
            let _ = writeln!(
                s,
                r##"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="#{:02x}{:02x}{:02x}" stroke="#999" data-count="{n}" data-true="{}" data-pred="{}"/>"##,
                channel(8.0),
                channel(48.0),
                channel(107.0),
                t.short(),
                p.short()
            );
            let ink = if shade > 0.5 { "white" } else { "black" };
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" text-anchor="middle" fill="{ink}">{n}</text>"#,
                x + CELL / 2,
                y + CELL / 2 + 5
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportPaths {
    pub metrics: PathBuf,
    pub confusion_csv: PathBuf,
    pub confusion_svg: PathBuf,
}

pub fn write_report(report: &EvalReport, out_dir: &Path) -> Result<ReportPaths, EvalError> {
    let werr = |p: &Path, e: std::io::Error| EvalError::Write { path: p.to_path_buf(), message: e.to_string() };
    std::fs::create_dir_all(out_dir).map_err(|e| werr(out_dir, e))?;
    let paths = ReportPaths {
        metrics: out_dir.join(METRICS_FILE),
        confusion_csv: out_dir.join(CONFUSION_CSV),
        confusion_svg: out_dir.join(CONFUSION_SVG),
    };
    let json = serde_json::to_string_pretty(report).expect("report serializes") + "\n";
    for (path, body) in [
        (&paths.metrics, json),
        (&paths.confusion_csv, confusion_csv(&report.confusion)),
        (&paths.confusion_svg, confusion_svg(&report.confusion)),
    ] {
        std::fs::write(path, body).map_err(|e| werr(path, e))?;
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use GuidanceLabel::*;

    fn identity() -> Confusion {
        let mut c = Confusion::default();
        for l in GuidanceLabel::ALL {
            c.record(l, l);
        }
        c
    }

    #[test]
    fn identity_csv_is_diagonal() {
        let csv = confusion_csv(&identity());
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 7);
        assert_eq!(lines[0], "true\\pred,Left,Right,Up,Down,O,X");
        assert_eq!(lines[1], "Left,1,0,0,0,0,0");
        assert_eq!(lines[6], "X,0,0,0,0,0,1");
    }

    #[test]
    fn identity_svg_shades_diagonal_only() {
        let svg = confusion_svg(&identity());
        assert_eq!(svg.matches("data-count=\"1\"").count(), 6);
        assert_eq!(svg.matches("data-count=\"0\"").count(), 30);
        assert_eq!(svg.matches("fill=\"#ffffff\"").count(), 30);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn empty_report_writes_zero_files() {
        let dir = tempfile::tempdir().unwrap();
        let r = EvalReport::from_counts(Confusion::default(), BTreeMap::new(), 0, 0, EvalConfigEcho::default());
        assert!(r.degenerate);
        let paths = write_report(&r, dir.path()).unwrap();
        let csv = std::fs::read_to_string(&paths.confusion_csv).unwrap();
        assert!(csv.lines().skip(1).all(|l| l.split(',').skip(1).all(|v| v == "0")));
        let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&paths.metrics).unwrap()).unwrap();
        assert_eq!(m["accuracy"], 0.0);
        assert_eq!(m["excluded"], 0);
        assert!(m["per_class"]["left"].is_object());
        assert!(std::fs::read_to_string(&paths.confusion_svg).unwrap().contains("data-count=\"0\""));
    }

    #[test]
    fn supports_add_up() {
        let mut c = identity();
        c.record(Left, Right);
        let r = EvalReport::from_counts(c, BTreeMap::from([(Left, 2), (None, 1)]), 2, 1, EvalConfigEcho::default());
        assert_eq!(r.per_class[&Left].support, 4);
        assert_eq!(r.per_class[&Left].evaluated, 2);
        assert_eq!(r.excluded, 3);
        assert_eq!(r.total, 10);
    }
}
