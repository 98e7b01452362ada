//! Word-level precision between a prediction and ground-truth answers.
//!
//! Text is lowercased, non-alphanumeric characters are removed, and tokens on
//! the embedded stopword list are dropped. Precision counts matched words as
//! multiset min-counts over the prediction's word count.

use std::collections::{BTreeMap, HashSet};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

pub const STOPWORD_LIST_ID: &str = "en-179-v1";

/// Common English stopwords (179 entries).
pub const STOPWORDS: [&str; 179] = [
    "i", "me", "my", "myself", "we", "our", "ours", "ourselves", "you", "you're", "you've", "you'll",
    "you'd", "your", "yours", "yourself", "yourselves", "he", "him", "his", "himself", "she", "she's",
    "her", "hers", "herself", "it", "it's", "its", "itself", "they", "them", "their", "theirs",
    "themselves", "what", "which", "who", "whom", "this", "that", "that'll", "these", "those", "am",
    "is", "are", "was", "were", "be", "been", "being", "have", "has", "had", "having", "do", "does",
    "did", "doing", "a", "an", "the", "and", "but", "if", "or", "because", "as", "until", "while",
    "of", "at", "by", "for", "with", "about", "against", "between", "into", "through", "during",
    "before", "after", "above", "below", "to", "from", "up", "down", "in", "out", "on", "off", "over",
    "under", "again", "further", "then", "once", "here", "there", "when", "where", "why", "how",
    "all", "any", "both", "each", "few", "more", "most", "other", "some", "such", "no", "nor", "not",
    "only", "own", "same", "so", "than", "too", "very", "s", "t", "can", "will", "just", "don",
    "don't", "should", "should've", "now", "d", "ll", "m", "o", "re", "ve", "y", "ain", "aren",
    "aren't", "couldn", "couldn't", "didn", "didn't", "doesn", "doesn't", "hadn", "hadn't", "hasn",
    "hasn't", "haven", "haven't", "isn", "isn't", "ma", "mightn", "mightn't", "mustn", "mustn't",
    "needn", "needn't", "shan", "shan't", "shouldn", "shouldn't", "wasn", "wasn't", "weren",
    "weren't", "won", "won't", "wouldn", "wouldn't",
];

fn normalize(word: &str) -> String {
    word.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

fn stopword_set() -> &'static HashSet<String> {
    static SET: OnceLock<HashSet<String>> = OnceLock::new();
    SET.get_or_init(|| STOPWORDS.iter().map(|w| normalize(w)).collect())
}

pub fn is_stopword(token: &str) -> bool {
    stopword_set().contains(token)
}

/// Multiset of content words.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenBag {
    counts: BTreeMap<String, u32>,
}

impl TokenBag {
    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.counts.values().map(|&c| c as u64).sum()
    }

    pub fn count(&self, token: &str) -> u32 {
        self.counts.get(token).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u32)> {
        self.counts.iter().map(|(k, &v)| (k.as_str(), v))
    }
}

impl<S: Into<String>> FromIterator<S> for TokenBag {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        let mut counts = BTreeMap::new();
        for t in iter {
            *counts.entry(t.into()).or_insert(0) += 1;
        }
        TokenBag { counts }
    }
}

pub fn tokenize(text: &str) -> TokenBag {
    text.split_whitespace()
        .map(normalize)
        .filter(|t| !t.is_empty() && !is_stopword(t))
        .collect()
}

/// Exact precision as `matched / total`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Precision {
    pub matched: u64,
    pub total: u64,
}

impl Precision {
    pub fn value(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.matched as f64 / self.total as f64
        }
    }

    pub fn at_least(&self, threshold: f64) -> bool {
        self.value() >= threshold
    }
}

pub fn precision(pred: &TokenBag, truth: &TokenBag) -> Precision {
    let matched = pred.iter().map(|(w, c)| c.min(truth.count(w)) as u64).sum();
    Precision { matched, total: pred.total() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum AnswerAggregation {
    #[default]
    MaxOverAnswers,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoringConfig {
    pub threshold_e: f64,
    pub stopword_list_id: String,
    pub answer_aggregation: AnswerAggregation,
}

impl ScoringConfig {
    pub fn with_threshold(threshold_e: f64) -> Self {
        ScoringConfig { threshold_e, ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.threshold_e) {
            return Err(format!("threshold e must lie in [0,1], got {}", self.threshold_e));
        }
        Ok(())
    }
}

impl Default for ScoringConfig {
    fn default() -> Self {
        ScoringConfig {
            threshold_e: 0.5,
            stopword_list_id: STOPWORD_LIST_ID.to_string(),
            answer_aggregation: AnswerAggregation::MaxOverAnswers,
        }
    }
}

/// Best precision of `pred_text` over all answers with at least one content word.
pub fn best_precision(pred_text: &str, answers: &[String]) -> Option<Precision> {
    let pred = tokenize(pred_text);
    answers
        .iter()
        .map(|a| tokenize(a))
        .filter(|t| !t.is_empty())
        .map(|t| precision(&pred, &t))
        .max_by(|a, b| a.value().total_cmp(&b.value()))
}

pub fn is_correct(pred_text: &str, answers: &[String], cfg: &ScoringConfig) -> bool {
    match cfg.answer_aggregation {
        AnswerAggregation::MaxOverAnswers => {
            best_precision(pred_text, answers).is_some_and(|p| p.at_least(cfg.threshold_e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bag(words: &[&str]) -> TokenBag {
        words.iter().copied().collect()
    }

    fn answers(a: &[&str]) -> Vec<String> {
        a.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn stopword_list_has_179_unique_entries() {
        let unique: HashSet<_> = STOPWORDS.iter().collect();
        assert_eq!(unique.len(), 179);
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("A black Laptop."), bag(&["black", "laptop"]));
        assert!(tokenize("the of a").is_empty());
        assert_eq!(tokenize("red red apple"), bag(&["red", "red", "apple"]));
        assert!(tokenize("").is_empty());
        assert!(tokenize("Don't!").is_empty());
    }

    #[test]
    fn precision_examples() {
        let p = precision(&bag(&["black", "laptop", "computer"]), &bag(&["black", "laptop"]));
        assert_eq!(p, Precision { matched: 2, total: 3 });
        let x = bag(&["a1", "b2"]);
        assert_eq!(precision(&x, &x).value(), 1.0);
        assert_eq!(precision(&TokenBag::default(), &x).value(), 0.0);
    }

    #[test]
    fn precision_uses_min_counts() {
        let p = precision(&bag(&["red", "red", "red"]), &bag(&["red"]));
        assert_eq!(p, Precision { matched: 1, total: 3 });
    }

    #[test]
    fn is_correct_examples() {
        let e = ScoringConfig::with_threshold(0.5);
        assert!(is_correct("black laptop", &answers(&["laptop"]), &e));
        assert!(!is_correct("dog", &answers(&["laptop", "computer"]), &e));
        let e6 = ScoringConfig::with_threshold(0.6);
        // precisions against the two answers are 2/3 and 1/3
        assert!(is_correct("red apple pie", &answers(&["apple pie", "cherry pie"]), &e6));
    }

    #[test]
    fn stopword_only_answers_are_skipped() {
        let e = ScoringConfig::default();
        assert!(!is_correct("laptop", &answers(&["the", "of"]), &e));
        assert!(is_correct("laptop", &answers(&["the", "laptop"]), &e));
    }
}
