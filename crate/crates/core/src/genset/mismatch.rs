//! Unanswerable samples made by pairing a rephrased question with someone else's image.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::GenError;
use crate::ingest::DatasetManifest;
use crate::oracle::{OracleClient, RequestHints};
use crate::types::{GuidanceLabel, GuidanceSample, LetterMap, Provenance, VqaSample};

/// How a generic question is rewritten to name its answer object.
pub enum Rephraser<'a> {
    /// `What is the color of this {answer}?`
    Template,
    /// Ask an oracle; on failure use the template when `fallback` is set.
    Oracle { client: &'a OracleClient, fallback: bool },
}

impl Rephraser<'_> {
    pub fn describe(&self) -> String {
        match self {
            Rephraser::Template => "template".into(),
            Rephraser::Oracle { client, fallback } => format!("oracle({}, fallback={fallback})", client.describe()),
        }
    }
}

pub fn template_rephrase(answer: &str) -> String {
    format!("What is the color of this {}?", answer.trim())
}

pub fn rephrase_prompt(question: &str, answer: &str) -> String {
    format!(
        "The question \"{question}\" about this image has the answer \"{answer}\". \
         Rewrite the question so that it names the {answer} explicitly and asks about one of its visual \
         attributes, for example \"What is the color of this {answer}?\". Reply with the rewritten question only."
    )
}

pub fn rephrase_question(
    question: &str,
    answer: &str,
    image: &Path,
    sample_id: &str,
    how: &Rephraser<'_>,
) -> Result<String, GenError> {
    Ok(rephrase_many(&[(question, answer, image, sample_id)], how)?.remove(0))
}

fn rephrase_many(items: &[(&str, &str, &Path, &str)], how: &Rephraser<'_>) -> Result<Vec<String>, GenError> {
    if let Some((_, _, _, id)) = items.iter().find(|(_, a, _, _)| a.trim().is_empty()) {
        return Err(GenError::EmptyAnswer(id.to_string()));
    }
    match how {
        Rephraser::Template => Ok(items.iter().map(|(_, a, _, _)| template_rephrase(a)).collect()),
        Rephraser::Oracle { client, fallback } => {
            let reqs: Vec<_> = items
                .iter()
                .map(|(q, a, img, id)| {
                    client.request(*img, rephrase_prompt(q, a), RequestHints { sample_id: id.to_string(), ..Default::default() })
                })
                .collect();
            client
                .answer_batch(&reqs)
                .into_iter()
                .zip(items)
                .map(|(res, (_, a, _, id))| match res {
                    Ok(text) => Ok(text.trim().to_string()),
                    Err(e) if *fallback => {
                        log::warn!("rephrasing {id} failed ({e}); using template");
                        Ok(template_rephrase(a))
                    }
                    Err(e) => Err(GenError::Oracle(e)),
                })
                .collect()
        }
    }
}

/// Shuffles until no index maps to itself. Needs `n >= 2`.
fn derangement(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    loop {
        p.shuffle(rng);
        if p.iter().enumerate().all(|(i, &j)| i != j) {
            return p;
        }
    }
}

/// Draws `n` (question source, image source) pairs with distinct sources and
/// labels each `None`. Pairs come in rounds; each round is a fresh seeded
/// derangement visited in a fresh seeded order, so `n` may exceed the pool size.
pub fn make_mismatch_samples(
    pool: &DatasetManifest,
    n: usize,
    seed: u64,
    how: &Rephraser<'_>,
) -> Result<Vec<GuidanceSample>, GenError> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let eligible: Vec<&VqaSample> = pool.samples.iter().filter(|s| !s.answers.is_empty()).collect();
    if eligible.len() < 2 {
        return Err(GenError::InsufficientPool { available: eligible.len(), requested: 2 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs: Vec<(usize, usize, usize)> = Vec::with_capacity(n);
    let mut round = 0;
    while pairs.len() < n {
        let der = derangement(eligible.len(), &mut rng);
        let mut order: Vec<usize> = (0..eligible.len()).collect();
        order.shuffle(&mut rng);
        for q in order.into_iter().take(n - pairs.len()) {
            pairs.push((round, q, der[q]));
        }
        round += 1;
    }

    let image_paths: Vec<_> = eligible.iter().map(|s| pool.image_path(s)).collect();
    let items: Vec<(&str, &str, &Path, &str)> = pairs
        .iter()
        .map(|&(_, q, _)| {
            let s = eligible[q];
            (s.question.as_str(), s.answers[0].as_str(), image_paths[q].as_path(), s.id.as_str())
        })
        .collect();
    let questions = rephrase_many(&items, how)?;

    Ok(pairs
        .iter()
        .zip(questions)
        .map(|(&(round, q, img), question)| {
            let (qs, is) = (eligible[q], eligible[img]);
            GuidanceSample {
                id: format!("mm{round}_{}_{}", qs.id, is.id),
                image_ref: image_paths[img].to_string_lossy().into_owned(),
                question,
                label: GuidanceLabel::None,
                letter_map: LetterMap::template(),
                provenance: Provenance::Mismatch { question_source_id: qs.id.clone(), image_source_id: is.id.clone() },
            }
        })
        .collect())
}
