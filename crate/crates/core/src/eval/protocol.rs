//! Prompt protocols and the template families that ship with them.
//!
//! A family bundles a single-round template and/or a two-round pair. The first
//! round of a two-round protocol only separates `unchanged`, `reframe` and
//! `none`; the second picks a direction. Template text can be overridden from
//! a directory holding `{family}_{single|round1|round2}.txt`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::types::{GuidanceLabel, LetterMap, LETTERS};

/// What a parsed response can select.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Choice {
    Label(GuidanceLabel),
    /// First-round verdict that the camera should move.
    Reframe,
}

/// Letters and phrases a response may use to select a choice.
#[derive(Debug, Clone, PartialEq)]
pub struct OptionSet {
    pub letters: Vec<(char, Choice)>,
    pub phrases: Vec<(&'static str, Choice)>,
}

const DIRECTION_PHRASES: [(&str, GuidanceLabel); 4] = [
    ("left", GuidanceLabel::Left),
    ("right", GuidanceLabel::Right),
    ("up", GuidanceLabel::Up),
    ("down", GuidanceLabel::Down),
];

impl OptionSet {
    /// All six guidance options, letters taken from `map`.
    pub fn six_way(map: &LetterMap) -> Self {
        OptionSet {
            letters: LETTERS.iter().zip(map.options()).map(|(&l, &o)| (l, Choice::Label(o))).collect(),
            phrases: Self::six_way_phrases(),
        }
    }

    fn six_way_phrases() -> Vec<(&'static str, Choice)> {
        let mut p: Vec<_> = DIRECTION_PHRASES.iter().map(|&(s, l)| (s, Choice::Label(l))).collect();
        p.push(("leave it unchanged", Choice::Label(GuidanceLabel::Unchanged)));
        p.push(("unchanged", Choice::Label(GuidanceLabel::Unchanged)));
        p.push(("none of the other options", Choice::Label(GuidanceLabel::None)));
        p.push(("none", Choice::Label(GuidanceLabel::None)));
        p
    }

    /// First round: unchanged / reframe / none. A bare direction also counts as reframe.
    pub fn first_round(letters: &[(char, Choice)]) -> Self {
        let mut phrases = vec![
            ("leave it unchanged", Choice::Label(GuidanceLabel::Unchanged)),
            ("unchanged", Choice::Label(GuidanceLabel::Unchanged)),
            ("none of the other options", Choice::Label(GuidanceLabel::None)),
            ("none", Choice::Label(GuidanceLabel::None)),
            ("framing", Choice::Reframe),
            ("reframe", Choice::Reframe),
            ("move camera", Choice::Reframe),
        ];
        phrases.extend(DIRECTION_PHRASES.iter().map(|&(s, _)| (s, Choice::Reframe)));
        OptionSet { letters: letters.to_vec(), phrases }
    }

    pub fn directions(letters: &[(char, Choice)]) -> Self {
        OptionSet {
            letters: letters.to_vec(),
            phrases: DIRECTION_PHRASES.iter().map(|&(s, l)| (s, Choice::Label(l))).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProtocolMode {
    SingleRound,
    TwoRound,
}

impl FromStr for ProtocolMode {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "single-round" | "single" => Ok(ProtocolMode::SingleRound),
            "two-round" | "two" => Ok(ProtocolMode::TwoRound),
            other => Err(EvalError::Config(format!("unknown protocol {other:?}; expected single-round or two-round"))),
        }
    }
}

impl fmt::Display for ProtocolMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProtocolMode::SingleRound => "single-round",
            ProtocolMode::TwoRound => "two-round",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptTemplate {
    pub name: String,
    pub text: String,
    /// Letters baked into the template text. Ignored when the text has `{OPTIONS}`.
    pub letters: Vec<(char, Choice)>,
}

impl PromptTemplate {
    pub fn renders_options(&self) -> bool {
        self.text.contains("{OPTIONS}")
    }

    pub fn render(&self, question: &str, result: Option<&str>, map: &LetterMap) -> String {
        self.text
            .replace("{QUESTION}", question.trim())
            .replace("{RESULT}", result.unwrap_or("").trim())
            .replace("{OPTIONS}", &map.render_options())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptProtocol {
    pub mode: ProtocolMode,
    pub family: String,
    pub templates: Vec<PromptTemplate>,
}

impl PromptProtocol {
    pub fn new(mode: ProtocolMode, family: &str, templates: Vec<PromptTemplate>) -> Result<Self, EvalError> {
        let want = match mode {
            ProtocolMode::SingleRound => 1,
            ProtocolMode::TwoRound => 2,
        };
        if templates.len() != want {
            return Err(EvalError::Config(format!("{mode} needs {want} template(s), got {}", templates.len())));
        }
        Ok(PromptProtocol { mode, family: family.to_string(), templates })
    }

    /// Builds a protocol from a built-in family, optionally reading template text from `override_dir`.
    pub fn from_family(family: &str, mode: ProtocolMode, override_dir: Option<&Path>) -> Result<Self, EvalError> {
        let f = FAMILIES
            .iter()
            .find(|f| f.name == family)
            .ok_or_else(|| {
                let known: Vec<&str> = FAMILIES.iter().map(|f| f.name).collect();
                EvalError::Config(format!("unknown template family {family:?}; known: {}", known.join(", ")))
            })?;
        let slots: Vec<&TemplateSlot> = match mode {
            ProtocolMode::SingleRound => f.single.iter().collect(),
            ProtocolMode::TwoRound => f.two_round.iter().flat_map(|(a, b)| [a, b]).collect(),
        };
        if slots.is_empty() {
            return Err(EvalError::Config(format!("template family {family:?} has no {mode} prompt")));
        }
        let templates = slots
            .into_iter()
            .map(|slot| {
                let text = match override_dir.map(|d| d.join(format!("{family}_{}.txt", slot.role))) {
                    Some(p) if p.exists() => std::fs::read_to_string(&p)
                        .map_err(|e| EvalError::Config(format!("{}: {e}", p.display())))?,
                    _ => slot.text.to_string(),
                };
                Ok(PromptTemplate {
                    name: format!("{family}_{}", slot.role),
                    text: text.trim_end().to_string(),
                    letters: slot.letters.to_vec(),
                })
            })
            .collect::<Result<Vec<_>, EvalError>>()?;
        PromptProtocol::new(mode, family, templates)
    }

    pub fn families() -> impl Iterator<Item = &'static str> {
        FAMILIES.iter().map(|f| f.name)
    }
}

struct TemplateSlot {
    role: &'static str,
    text: &'static str,
    letters: &'static [(char, Choice)],
}

struct Family {
    name: &'static str,
    single: Option<TemplateSlot>,
    two_round: Option<(TemplateSlot, TemplateSlot)>,
}

use Choice::{Label, Reframe};
use GuidanceLabel as G;

const INSTRUCTBLIP_R1: &[(char, Choice)] = &[('A', Reframe), ('B', Label(G::Unchanged)), ('C', Label(G::None))];
const INSTRUCTBLIP_R2: &[(char, Choice)] =
    &[('D', Label(G::Left)), ('E', Label(G::Right)), ('F', Label(G::Up)), ('G', Label(G::Down))];
// Letters follow the per-option definitions in the prompt body.
const GPT_SINGLE: &[(char, Choice)] = &[
    ('A', Label(G::Unchanged)),
    ('B', Label(G::None)),
    ('C', Label(G::Up)),
    ('D', Label(G::Left)),
    ('E', Label(G::Right)),
    ('F', Label(G::Down)),
];
const GPT_R1: &[(char, Choice)] = &[('A', Label(G::Unchanged)), ('B', Label(G::None)), ('C', Reframe)];
const GPT_R2: &[(char, Choice)] =
    &[('A', Label(G::Up)), ('B', Label(G::Left)), ('C', Label(G::Down)), ('D', Label(G::Right))];

const FAMILIES: &[Family] = &[
    Family {
        name: "basic",
        single: Some(TemplateSlot { role: "single", text: include_str!("../../templates/basic_single.txt"), letters: &[] }),
        two_round: Some((
            TemplateSlot { role: "round1", text: include_str!("../../templates/instructblip_round1.txt"), letters: INSTRUCTBLIP_R1 },
            TemplateSlot { role: "round2", text: include_str!("../../templates/instructblip_round2.txt"), letters: INSTRUCTBLIP_R2 },
        )),
    },
    Family {
        name: "llava",
        single: Some(TemplateSlot { role: "single", text: include_str!("../../templates/llava_single.txt"), letters: &[] }),
        two_round: Some((
            TemplateSlot { role: "round1", text: include_str!("../../templates/llava_round1.txt"), letters: &[] },
            TemplateSlot { role: "round2", text: include_str!("../../templates/llava_round2.txt"), letters: &[] },
        )),
    },
    Family {
        name: "instructblip",
        single: None,
        two_round: Some((
            TemplateSlot { role: "round1", text: include_str!("../../templates/instructblip_round1.txt"), letters: INSTRUCTBLIP_R1 },
            TemplateSlot { role: "round2", text: include_str!("../../templates/instructblip_round2.txt"), letters: INSTRUCTBLIP_R2 },
        )),
    },
    Family {
        name: "gpt",
        single: Some(TemplateSlot { role: "single", text: include_str!("../../templates/gpt_single.txt"), letters: GPT_SINGLE }),
        two_round: Some((
            TemplateSlot { role: "round1", text: include_str!("../../templates/gpt_round1.txt"), letters: GPT_R1 },
            TemplateSlot { role: "round2", text: include_str!("../../templates/gpt_round2.txt"), letters: GPT_R2 },
        )),
    },
];
