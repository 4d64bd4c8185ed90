//! Seeded synthetic corpora for demos, convergence tests, and ablations.
//!
//! Each post carries one category-specific keyword repeated a few times in
//! otherwise neutral filler text, so a working classifier separates the
//! classes quickly. The filler vocabulary deliberately contains no
//! discourse connectives: the rule-based discourse filter reduces every
//! synthetic post to an empty string, which makes "with preprocessing"
//! baselines measurably worse than raw text on this data.

use rand::rngs::StdRng;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};

use crate::corpus::{CausalCategory, Corpus, Post, SplitTag};

/// The keyword that marks each category in generated text.
pub const CLASS_KEYWORDS: [(CausalCategory, &str); 5] = [
    (CausalCategory::BiasOrAbuse, "bullying"),
    (CausalCategory::JobsAndCareer, "unemployment"),
    (CausalCategory::Medication, "dosage"),
    (CausalCategory::Relationship, "breakup"),
    (CausalCategory::Alienation, "outcast"),
];

/// Neutral filler words; none of them is a discourse connective.
const FILLER: &[&str] = &[
    "gray", "morning", "paper", "window", "table", "walls", "light", "dust", "corner", "shelf",
    "room", "floor", "silence", "glass", "door", "stairs", "garden", "stone", "river", "cloud",
    "lamp", "chair", "carpet", "ceiling", "curtain", "kettle", "plate", "spoon", "bottle",
    "basket",
];

/// Generate `n` labeled posts, categories assigned round-robin, texts
/// drawn deterministically from `seed`. Every post has its class keyword
/// in two to four positions inside 8 to 24 filler words.
pub fn separable_corpus(n: usize, seed: u64) -> Corpus {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut posts = Vec::with_capacity(n);
    for i in 0..n {
        let (category, keyword) = CLASS_KEYWORDS[i % CLASS_KEYWORDS.len()];
        let len = rng.random_range(8..=24);
        let mut words: Vec<&str> = (0..len)
            .map(|_| *FILLER.choose(&mut rng).expect("filler pool is non-empty"))
            .collect();
        let mentions = rng.random_range(2..=4usize).min(words.len());
        // Overwrite distinct filler slots with the keyword.
        let mut slots: Vec<usize> = (0..words.len()).collect();
        for _ in 0..mentions {
            let pick = rng.random_range(0..slots.len());
            let slot = slots.swap_remove(pick);
            words[slot] = keyword;
        }
        let text = format!("{}.", words.join(" "));
        posts.push(Post {
            id: format!("syn-{i:04}"),
            text,
            cause_detected: true,
            category: Some(category),
            explanation: None,
        });
    }
    Corpus::new(posts, SplitTag::Unsplit).expect("synthetic ids are unique and consistent")
}
