//! Mapping free-form oracle responses onto option choices.

use super::protocol::{Choice, OptionSet};
use crate::types::{GuidanceLabel, LetterMap};

const LEAD_NOISE: &[char] = &['"', '\'', '`', '*', '(', '[', '{', '<', '#', '>', '-', ':'];
const LETTER_TERMINATORS: &[char] = &['.', ':', ')', ']', ',', '-', '\'', '"', '*', '}'];
const PREFIXES: &[&str] = &["the correct answer is", "the answer is", "answer", "option", "choice"];

fn strip_lead(mut s: &str) -> &str {
    loop {
        let before = s.len();
        s = s.trim_start().trim_start_matches(LEAD_NOISE).trim_start();
        for p in PREFIXES {
            if s.len() >= p.len() && s[..p.len()].eq_ignore_ascii_case(p) {
                let rest = &s[p.len()..];
                if rest.chars().next().is_none_or(|c| !c.is_alphanumeric()) {
                    s = rest;
                }
            }
        }
        if s.len() == before {
            return s;
        }
    }
}

fn leading_letter(cleaned: &str) -> Option<char> {
    let mut chars = cleaned.chars();
    let c = chars.next().filter(char::is_ascii_alphabetic)?;
    match chars.next() {
        None => Some(c.to_ascii_uppercase()),
        Some(t) if LETTER_TERMINATORS.contains(&t) => Some(c.to_ascii_uppercase()),
        _ => None,
    }
}

fn words(s: &str) -> Vec<String> {
    s.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_string)
        .collect()
}

fn contains_phrase(hay: &[String], phrase: &str) -> bool {
    let needle: Vec<&str> = phrase.split_whitespace().collect();
    !needle.is_empty() && hay.windows(needle.len()).any(|w| w.iter().zip(&needle).all(|(a, b)| a == b))
}

/// A standalone leading option letter wins; otherwise the response must name
/// exactly one choice by phrase. Anything else is unparseable.
pub fn parse_choice(raw: &str, options: &OptionSet) -> Option<Choice> {
    let cleaned = strip_lead(raw);
    if let Some(letter) = leading_letter(cleaned) {
        if let Some(&(_, choice)) = options.letters.iter().find(|(l, _)| *l == letter) {
            return Some(choice);
        }
    }
    let hay = words(raw);
    let mut found: Option<Choice> = None;
    for &(phrase, choice) in &options.phrases {
        if contains_phrase(&hay, phrase) {
            match found {
                Some(prev) if prev != choice => return None,
                _ => found = Some(choice),
            }
        }
    }
    found
}

/// Six-way parse against a letter map. `None` means unparseable.
pub fn parse_prediction(raw: &str, map: &LetterMap) -> Option<GuidanceLabel> {
    match parse_choice(raw, &OptionSet::six_way(map))? {
        Choice::Label(l) => Some(l),
        Choice::Reframe => None,
    }
}
