//! Class balancing and option-letter assignment.

use std::collections::BTreeMap;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::types::{GuidanceLabel, GuidanceSample, LetterMap};

#[derive(Debug, Clone, PartialEq)]
pub struct BalanceOutcome {
    pub samples: Vec<GuidanceSample>,
    /// Rounded mean of the four directional class counts.
    pub target: usize,
    /// How many more `None` samples the caller would need to reach `target`.
    pub none_deficit: usize,
}

pub fn class_counts(samples: &[GuidanceSample]) -> BTreeMap<GuidanceLabel, usize> {
    let mut counts: BTreeMap<GuidanceLabel, usize> = GuidanceLabel::ALL.iter().map(|&l| (l, 0)).collect();
    for s in samples {
        *counts.get_mut(&s.label).expect("all labels present") += 1;
    }
    counts
}

/// `round(mean)` of the directional counts, halves away from zero.
pub fn directional_target(counts: &BTreeMap<GuidanceLabel, usize>) -> usize {
    let sum: usize = counts.iter().filter(|(l, _)| l.is_directional()).map(|(_, &c)| c).sum();
    (sum * 2 + 4) / 8
}

/// Under-samples `Unchanged` and `None` to the directional mean; directional
/// classes are kept whole. Nothing is up-sampled. Output is sorted by id.
pub fn balance(samples: Vec<GuidanceSample>, seed: u64) -> BalanceOutcome {
    let counts = class_counts(&samples);
    let target = directional_target(&counts);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut keep = vec![true; samples.len()];
    for label in [GuidanceLabel::Unchanged, GuidanceLabel::None] {
        let members: Vec<usize> = samples.iter().enumerate().filter(|(_, s)| s.label == label).map(|(i, _)| i).collect();
        if members.len() > target {
            for &i in &members {
                keep[i] = false;
            }
            for pick in index::sample(&mut rng, members.len(), target) {
                keep[members[pick]] = true;
            }
        }
    }

    let mut out: Vec<GuidanceSample> = samples.into_iter().zip(keep).filter(|(_, k)| *k).map(|(s, _)| s).collect();
    out.sort_by(|a, b| a.id.cmp(&b.id));
    let none = counts[&GuidanceLabel::None];
    BalanceOutcome { samples: out, target, none_deficit: target.saturating_sub(none) }
}

fn sample_rng(seed: u64, id: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(id.as_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

/// Template order when `shuffle` is off; otherwise a uniform permutation per
/// sample, seeded by `(seed, sample id)` so it does not depend on list order.
pub fn assign_letters(mut samples: Vec<GuidanceSample>, shuffle: bool, seed: u64) -> Vec<GuidanceSample> {
    for s in &mut samples {
        s.letter_map = if shuffle {
            let mut opts = GuidanceLabel::TEMPLATE_ORDER;
            opts.shuffle(&mut sample_rng(seed, &s.id));
            LetterMap::new(opts).expect("a permutation is a bijection")
        } else {
            LetterMap::template()
        };
    }
    samples
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Provenance;

    fn fixture(counts: &[(GuidanceLabel, usize)]) -> Vec<GuidanceSample> {
        counts
            .iter()
            .flat_map(|&(l, n)| {
                (0..n).map(move |i| GuidanceSample {
                    id: format!("{l}_{i:05}"),
                    image_ref: format!("{l}_{i}.jpg"),
                    question: "q".into(),
                    label: l,
                    letter_map: LetterMap::template(),
                    provenance: Provenance::Benchmark { source_id: format!("{l}{i}") },
                })
            })
            .collect()
    }

    use GuidanceLabel::*;

    #[test]
    fn balance_example() {
        let out = balance(fixture(&[(Left, 50), (Right, 40), (Up, 30), (Down, 40), (Unchanged, 500), (None, 40)]), 1);
        assert_eq!(out.target, 40);
        let c = class_counts(&out.samples);
        assert_eq!(c[&Unchanged], 40);
        assert_eq!(c[&None], 40);
        assert_eq!(c[&Left], 50);
        assert_eq!(out.samples.len(), 240);
        assert_eq!(out.none_deficit, 0);
        assert!(out.samples.windows(2).all(|w| w[0].id < w[1].id));
    }

    #[test]
    fn balance_never_upsamples() {
        let out = balance(fixture(&[(Left, 10), (Right, 10), (Up, 10), (Down, 10), (Unchanged, 5), (None, 7)]), 1);
        let c = class_counts(&out.samples);
        assert_eq!(c[&Unchanged], 5);
        assert_eq!(c[&None], 7);
        assert_eq!(out.none_deficit, 3);
    }

    #[test]
    fn balance_empty() {
        let out = balance(Vec::new(), 0);
        assert!(out.samples.is_empty());
        assert_eq!(out.target, 0);
    }

    #[test]
    fn balance_is_seeded() {
        let input = fixture(&[(Left, 3), (Right, 3), (Up, 3), (Down, 3), (Unchanged, 30)]);
        assert_eq!(balance(input.clone(), 5), balance(input.clone(), 5));
        assert_ne!(balance(input.clone(), 5).samples, balance(input, 6).samples);
    }

    #[test]
    fn target_rounds_half_up() {
        let c = class_counts(&fixture(&[(Left, 1), (Right, 1), (Up, 0), (Down, 0)]));
        assert_eq!(directional_target(&c), 1);
        let c = class_counts(&fixture(&[(Left, 1), (Right, 0), (Up, 0), (Down, 0)]));
        assert_eq!(directional_target(&c), 0);
    }

    #[test]
    fn letters_fixed_and_shuffled() {
        let input = fixture(&[(Left, 20), (None, 20)]);
        let fixed = assign_letters(input.clone(), false, 3);
        assert!(fixed.iter().all(|s| s.letter_map == LetterMap::template()));
        assert_eq!(fixed.iter().find(|s| s.label == Left).unwrap().answer_letter(), 'B');
        let a = assign_letters(input.clone(), true, 3);
        let b = assign_letters(input.clone().into_iter().rev().collect(), true, 3);
        for s in &a {
            assert!(s.letter_map.is_bijection());
            let twin = b.iter().find(|t| t.id == s.id).unwrap();
            assert_eq!(twin.letter_map, s.letter_map);
        }
        assert!(a.iter().any(|s| s.letter_map != LetterMap::template()));
    }
}
