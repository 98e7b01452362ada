//! Benchmarking an oracle on six-way guidance classification.

mod metrics;
mod parse;
mod protocol;
mod report;

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use metrics::{scores, ClassScores, Confusion, Ratio64, Scores};
pub use parse::{parse_choice, parse_prediction};
pub use protocol::{Choice, OptionSet, PromptProtocol, PromptTemplate, ProtocolMode};
pub use report::{
    confusion_csv, confusion_svg, write_report, ClassReport, EvalConfigEcho, EvalReport, ReportPaths, CONFUSION_CSV,
    CONFUSION_SVG, METRICS_FILE, PREDICTIONS_FILE,
};

use crate::genset::assign_letters;
use crate::ingest::DatasetManifest;
use crate::oracle::{OracleClient, OracleError, OracleRequest, RequestHints};
use crate::types::{GuidanceLabel, GuidanceSample, LetterMap, Provenance};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("evaluation configuration: {0}")]
    Config(String),
    #[error("benchmark sample {0} has no guidance label")]
    MissingLabel(String),
    #[error("{failed} of {total} oracle queries failed in transport; aborting (first error: {first})")]
    OracleUnreachable { failed: usize, total: usize, first: OracleError },
    #[error("cannot write {path}: {message}")]
    Write { path: PathBuf, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionStatus {
    Ok,
    Unparseable,
    OracleError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub truth: GuidanceLabel,
    pub predicted: Option<GuidanceLabel>,
    pub status: PredictionStatus,
    pub responses: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRun {
    pub report: EvalReport,
    /// One record per benchmark sample, in benchmark order.
    pub predictions: Vec<PredictionRecord>,
}

/// Turns a labeled manifest into guidance samples with absolute image paths.
pub fn benchmark_samples(bench: &DatasetManifest) -> Result<Vec<GuidanceSample>, EvalError> {
    bench
        .samples
        .iter()
        .map(|s| {
            Ok(GuidanceSample {
                id: s.id.clone(),
                image_ref: bench.image_path(s).to_string_lossy().into_owned(),
                question: s.question.clone(),
                label: s.label.ok_or_else(|| EvalError::MissingLabel(s.id.clone()))?,
                letter_map: LetterMap::template(),
                provenance: Provenance::Benchmark { source_id: s.id.clone() },
            })
        })
        .collect()
}

enum Outcome {
    Done(GuidanceLabel),
    Reframe,
    Unparseable,
    Failed(OracleError),
}

struct Tally {
    failed_transport: usize,
    first_transport: Option<OracleError>,
    queries: usize,
}

impl Tally {
    fn note(&mut self, r: &Result<String, OracleError>) {
        self.queries += 1;
        if let Err(e) = r {
            if e.is_transport() {
                self.failed_transport += 1;
                self.first_transport.get_or_insert_with(|| e.clone());
            }
        }
    }
}

fn hints(s: &GuidanceSample, round: u8) -> RequestHints {
    RequestHints { sample_id: s.id.clone(), round, truth: Some(s.label), ..Default::default() }
}

fn options_for(t: &PromptTemplate, map: &LetterMap, fallback: fn(&[(char, Choice)]) -> OptionSet) -> OptionSet {
    if t.renders_options() {
        OptionSet::six_way(map)
    } else {
        fallback(&t.letters)
    }
}

fn six_way_fixed(letters: &[(char, Choice)]) -> OptionSet {
    let mut o = OptionSet::six_way(&LetterMap::template());
    o.letters = letters.to_vec();
    o
}

/// Queries `client` on every sample under `protocol` and scores the parsed
/// predictions. Oracle errors and unparseable replies are excluded from the
/// metrics and counted. Fails only when more than half of all queries fail in
/// transport. `shuffle_seed` permutes option letters per sample for templates
/// that render their options.
pub fn run_benchmark(
    bench: &DatasetManifest,
    protocol: &PromptProtocol,
    client: &OracleClient,
    shuffle_seed: Option<u64>,
) -> Result<EvalRun, EvalError> {
    let samples = assign_letters(benchmark_samples(bench)?, shuffle_seed.is_some(), shuffle_seed.unwrap_or(0));
    let mut tally = Tally { failed_transport: 0, first_transport: None, queries: 0 };
    let first = &protocol.templates[0];

    let reqs: Vec<OracleRequest> = samples
        .iter()
        .map(|s| client.request(&s.image_ref, first.render(&s.question, None, &s.letter_map), hints(s, 1)))
        .collect();
    let round1 = client.answer_batch(&reqs);
    let mut responses: Vec<Vec<String>> = vec![Vec::new(); samples.len()];
    let mut outcomes: Vec<Outcome> = Vec::with_capacity(samples.len());
    for ((s, r), resp) in samples.iter().zip(round1).zip(&mut responses) {
        tally.note(&r);
        outcomes.push(match r {
            Err(e) => Outcome::Failed(e),
            Ok(text) => {
                let opts = match protocol.mode {
                    ProtocolMode::SingleRound => options_for(first, &s.letter_map, six_way_fixed),
                    ProtocolMode::TwoRound => options_for(first, &s.letter_map, OptionSet::first_round),
                };
                let parsed = parse_choice(&text, &opts);
                resp.push(text);
                match parsed {
                    Some(Choice::Label(l)) => Outcome::Done(l),
                    Some(Choice::Reframe) if protocol.mode == ProtocolMode::TwoRound => Outcome::Reframe,
                    _ => Outcome::Unparseable,
                }
            }
        });
    }

    if protocol.mode == ProtocolMode::TwoRound {
        let second = &protocol.templates[1];
        let pending: Vec<usize> = (0..samples.len()).filter(|&i| matches!(outcomes[i], Outcome::Reframe)).collect();
        let reqs: Vec<OracleRequest> = pending
            .iter()
            .map(|&i| {
                let s = &samples[i];
                let prompt = second.render(&s.question, responses[i].first().map(String::as_str), &s.letter_map);
                client.request(&s.image_ref, prompt, hints(s, 2))
            })
            .collect();
        for (&i, r) in pending.iter().zip(client.answer_batch(&reqs)) {
            tally.note(&r);
            outcomes[i] = match r {
                Err(e) => Outcome::Failed(e),
                Ok(text) => {
                    let opts = options_for(second, &samples[i].letter_map, OptionSet::directions);
                    let parsed = parse_choice(&text, &opts);
                    responses[i].push(text);
                    match parsed {
                        Some(Choice::Label(l)) if l.is_directional() => Outcome::Done(l),
                        _ => Outcome::Unparseable,
                    }
                }
            };
        }
    }

    if tally.failed_transport * 2 > tally.queries {
        return Err(EvalError::OracleUnreachable {
            failed: tally.failed_transport,
            total: tally.queries,
            first: tally.first_transport.expect("at least one failure"),
        });
    }

    let mut confusion = Confusion::default();
    let mut excluded: BTreeMap<GuidanceLabel, u64> = BTreeMap::new();
    let (mut unparseable, mut oracle_errors) = (0u64, 0u64);
    let mut predictions = Vec::with_capacity(samples.len());
    for ((s, outcome), responses) in samples.iter().zip(outcomes).zip(responses) {
        let (predicted, status, error) = match outcome {
            Outcome::Done(l) => {
                confusion.record(s.label, l);
                (Some(l), PredictionStatus::Ok, None)
            }
            Outcome::Failed(e) => {
                oracle_errors += 1;
                *excluded.entry(s.label).or_default() += 1;
                (None, PredictionStatus::OracleError, Some(e.to_string()))
            }
            Outcome::Unparseable | Outcome::Reframe => {
                unparseable += 1;
                *excluded.entry(s.label).or_default() += 1;
                (None, PredictionStatus::Unparseable, None)
            }
        };
        predictions.push(PredictionRecord { id: s.id.clone(), truth: s.label, predicted, status, responses, error });
    }

    let config = EvalConfigEcho {
        protocol: protocol.mode.to_string(),
        template_family: protocol.family.clone(),
        templates: protocol.templates.iter().map(|t| t.name.clone()).collect(),
        oracle: client.describe(),
        shuffle_seed,
        f1_average: "macro".into(),
        excluded_in_denominator: false,
    };
    let report = EvalReport::from_counts(confusion, excluded, unparseable, oracle_errors, config);
    if report.degenerate {
        log::warn!("no prediction could be scored; all metrics are reported as 0");
    }
    Ok(EvalRun { report, predictions })
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use super::*;
    use crate::oracle::{AnswerTable, EchoTruth, Oracle};
    use crate::types::VqaSample;
    use GuidanceLabel::{Left, Right};

    fn bench() -> DatasetManifest {
        DatasetManifest {
            image_root: PathBuf::from("/bench"),
            samples: GuidanceLabel::ALL
                .iter()
                .map(|&l| VqaSample {
                    id: format!("s_{l}"),
                    image_ref: format!("{l}.jpg"),
                    question: "What is this?".into(),
                    answers: vec![],
                    bbox: None,
                    split_tag: None,
                    label: Some(l),
                })
                .collect(),
        }
    }

    fn single() -> PromptProtocol {
        PromptProtocol::from_family("basic", ProtocolMode::SingleRound, None).unwrap()
    }

    fn swapped() -> OracleClient {
        let table = GuidanceLabel::ALL
            .iter()
            .map(|&l| {
                let said = match l {
                    Left => Right,
                    Right => Left,
                    o => o,
                };
                (format!("s_{l}"), LetterMap::template().letter_of(said).to_string())
            })
            .collect::<HashMap<_, _>>();
        OracleClient::new(Box::new(AnswerTable::new(table)), 2)
    }

    #[test]
    fn swap_fixture() {
        let run = run_benchmark(&bench(), &single(), &swapped(), None).unwrap();
        let r = &run.report;
        assert_eq!(r.exact["accuracy"], "2/3");
        assert_eq!(r.exact["macro_f1"], "2/3");
        assert_eq!(r.exact["acc_f"], "1/2");
        assert_eq!(r.confusion.get(Left, Right), 1);
        assert_eq!(r.confusion.get(Right, Left), 1);
        assert_eq!(r.excluded, 0);
        assert_eq!(r.config.f1_average, "macro");
    }

    #[test]
    fn perfect_oracle_in_both_protocols() {
        let client = OracleClient::new(Box::new(EchoTruth), 3);
        let one = run_benchmark(&bench(), &single(), &client, None).unwrap().report;
        for family in ["basic", "llava", "instructblip", "gpt"] {
            let two = PromptProtocol::from_family(family, ProtocolMode::TwoRound, None).unwrap();
            let r = run_benchmark(&bench(), &two, &client, None).unwrap().report;
            assert_eq!((r.accuracy, r.macro_f1, r.acc_f, r.excluded), (1.0, 1.0, 1.0, 0), "{family}");
            assert_eq!(r.confusion, one.confusion);
        }
        assert_eq!((one.accuracy, one.macro_f1, one.acc_f, one.excluded), (1.0, 1.0, 1.0, 0));
    }

    #[test]
    fn banana_oracle_is_degenerate() {
        struct Banana;
        impl Oracle for Banana {
            fn describe(&self) -> String {
                "banana".into()
            }
            fn answer(&self, _: &OracleRequest) -> Result<String, OracleError> {
                Ok("banana".into())
            }
        }
        let run = run_benchmark(&bench(), &single(), &OracleClient::new(Box::new(Banana), 1), None).unwrap();
        assert_eq!(run.report.excluded, 6);
        assert_eq!(run.report.unparseable, 6);
        assert!(run.report.degenerate);
        assert_eq!(run.report.accuracy, 0.0);
        assert!(run.predictions.iter().all(|p| p.status == PredictionStatus::Unparseable));
    }

    #[test]
    fn transport_majority_aborts_minority_is_excluded() {
        struct FailSome(usize);
        impl Oracle for FailSome {
            fn describe(&self) -> String {
                "fail-some".into()
            }
            fn answer(&self, req: &OracleRequest) -> Result<String, OracleError> {
                let i = GuidanceLabel::ALL.iter().position(|l| Some(*l) == req.hints.truth).unwrap();
                if i < self.0 {
                    Err(OracleError::Transport { attempts: 4, message: "reset".into() })
                } else {
                    EchoTruth.answer(req)
                }
            }
        }
        let minority = OracleClient::new(Box::new(FailSome(2)), 2);
        let r = run_benchmark(&bench(), &single(), &minority, None).unwrap().report;
        assert_eq!(r.oracle_errors, 2);
        assert_eq!(r.excluded_per_class[&Left], 1);
        assert_eq!(r.confusion.total() + r.excluded, 6);
        let majority = OracleClient::new(Box::new(FailSome(4)), 2);
        assert!(matches!(
            run_benchmark(&bench(), &single(), &majority, None),
            Err(EvalError::OracleUnreachable { failed: 4, total: 6, .. })
        ));
    }

    #[test]
    fn shuffled_letters_still_score_perfect_oracle_letters() {
        struct RightLetter;
        impl Oracle for RightLetter {
            fn describe(&self) -> String {
                "right-letter".into()
            }
            fn answer(&self, req: &OracleRequest) -> Result<String, OracleError> {
                let truth = req.hints.truth.unwrap();
                let marker = format!(".{}.", truth.display());
                let at = req.prompt.find(&marker).unwrap();
                Ok(req.prompt[at - 1..at].to_string())
            }
        }
        let client = OracleClient::new(Box::new(RightLetter), 2);
        let r = run_benchmark(&bench(), &single(), &client, Some(9)).unwrap().report;
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.config.shuffle_seed, Some(9));
    }

    #[test]
    fn unlabeled_benchmark_is_rejected() {
        let mut b = bench();
        b.samples[0].label = None;
        let client = OracleClient::new(Box::new(EchoTruth), 1);
        assert!(matches!(run_benchmark(&b, &single(), &client, None), Err(EvalError::MissingLabel(_))));
    }
}
