//! Built-in rule-based part-of-speech tagger.
//!
//! Coarse six-tag scheme (VERB, NOUN, PRON, ADJ, ADV, OTHER) driven by
//! closed-class word lists plus a few suffix rules. It exists to let the
//! discourse rules tell activities (verb-bearing segments) from noun
//! phrases; it is deliberately small and auditable rather than accurate on
//! open-domain text. A different backend can be plugged in through the
//! [`Tagger`] trait.

use std::collections::HashSet;
use std::sync::OnceLock;

use crate::text::tokens_with_punct;

use super::{PosTag, TaggedToken};

/// Pluggable tagging backend.
pub trait Tagger: Send + Sync {
    fn tag_sentence(&self, sentence: &str) -> Vec<TaggedToken>;
}

/// Personal, possessive, demonstrative, relative, and indefinite pronouns.
const PRONOUNS: &[&str] = &[
    "i",
    "me",
    "my",
    "mine",
    "myself",
    "you",
    "your",
    "yours",
    "yourself",
    "yourselves",
    "he",
    "him",
    "his",
    "himself",
    "she",
    "her",
    "hers",
    "herself",
    "it",
    "its",
    "itself",
    "we",
    "us",
    "our",
    "ours",
    "ourselves",
    "they",
    "them",
    "their",
    "theirs",
    "themselves",
    "this",
    "these",
    "those",
    "who",
    "whom",
    "whose",
    "anyone",
    "anybody",
    "anything",
    "everyone",
    "everybody",
    "everything",
    "someone",
    "somebody",
    "something",
    "nobody",
    "nothing",
    "none",
];

/// Determiners, prepositions, conjunctions, and particles, tagged OTHER
/// explicitly so suffix rules never fire on them.
const FUNCTION_WORDS: &[&str] = &[
    "the", "a", "an", "and", "or", "but", "if", "that", "which", "what", "of", "in", "on", "at",
    "by", "for", "with", "about", "against", "between", "into", "through", "during", "before",
    "after", "above", "below", "to", "from", "up", "down", "out", "off", "over", "under", "again",
    "no", "not", "nor", "as", "than", "because", "since", "while", "so", "though", "although",
    "when", "where", "why", "how", "all", "any", "both", "each", "few", "more", "most", "other",
    "some", "such", "only", "own", "same", "then", "once", "here", "there", "per", "via", "till",
    "until", "unless", "upon", "within", "without", "yet", "whether",
];

/// Common verbs, listed with their irregular forms. Regular inflections
/// are recovered by the suffix rules from these stems.
const VERBS: &[&str] = &[
    "be",
    "am",
    "is",
    "are",
    "was",
    "were",
    "been",
    "being",
    "have",
    "has",
    "had",
    "having",
    "do",
    "does",
    "did",
    "done",
    "doing",
    "will",
    "would",
    "shall",
    "should",
    "can",
    "could",
    "may",
    "might",
    "must",
    "go",
    "goes",
    "going",
    "gone",
    "went",
    "get",
    "got",
    "gotten",
    "make",
    "made",
    "know",
    "knew",
    "known",
    "think",
    "thought",
    "take",
    "took",
    "taken",
    "see",
    "saw",
    "seen",
    "come",
    "came",
    "want",
    "look",
    "use",
    "find",
    "found",
    "give",
    "gave",
    "given",
    "tell",
    "told",
    "work",
    "call",
    "try",
    "ask",
    "need",
    "feel",
    "felt",
    "become",
    "became",
    "leave",
    "left",
    "put",
    "mean",
    "meant",
    "keep",
    "kept",
    "let",
    "begin",
    "began",
    "begun",
    "seem",
    "help",
    "talk",
    "turn",
    "start",
    "show",
    "shown",
    "hear",
    "heard",
    "play",
    "run",
    "ran",
    "move",
    "like",
    "live",
    "believe",
    "hold",
    "held",
    "bring",
    "brought",
    "happen",
    "write",
    "wrote",
    "written",
    "sit",
    "sat",
    "stand",
    "stood",
    "lose",
    "lost",
    "pay",
    "paid",
    "meet",
    "met",
    "continue",
    "learn",
    "change",
    "watch",
    "follow",
    "stop",
    "speak",
    "spoke",
    "spoken",
    "read",
    "spend",
    "spent",
    "grow",
    "grew",
    "grown",
    "open",
    "walk",
    "win",
    "won",
    "offer",
    "remember",
    "love",
    "buy",
    "bought",
    "wait",
    "die",
    "send",
    "sent",
    "stay",
    "fall",
    "fell",
    "fallen",
    "cut",
    "reach",
    "kill",
    "remain",
    "cry",
    "fail",
    "hate",
    "quit",
    "eat",
    "ate",
    "eaten",
    "sleep",
    "slept",
    "drink",
    "drank",
    "wish",
    "miss",
    "ignore",
    "respond",
    "apply",
    "improve",
    "struggle",
    "suffer",
    "scream",
    "hurt",
    "force",
    "afford",
    "cope",
    "deal",
    "dealt",
    "care",
    "end",
    "break",
    "broke",
    "broken",
    "ruin",
    "bully",
    "blame",
    "yell",
    "argue",
    "fight",
    "fought",
    "worry",
    "panic",
    "overdose",
    "cheat",
    "text",
    "date",
    "dump",
    "dumped",
    "marry",
    "divorce",
    "graduate",
    "study",
    "teach",
    "taught",
    "earn",
    "fire",
    "fired",
    "hire",
    "resign",
    "retire",
    "owe",
    "prescribe",
    "diagnose",
    "treat",
    "recover",
    "relapse",
    "isolate",
    "withdraw",
    "belong",
    "connect",
    "relate",
    "trust",
    "support",
    "abandon",
    "reject",
    "bother",
    "matter",
    "exist",
    "pretend",
];

/// Frequent nouns from the domain (school, work, health, relationships).
const NOUNS: &[&str] = &[
    "job",
    "career",
    "school",
    "college",
    "university",
    "grade",
    "class",
    "exam",
    "degree",
    "teacher",
    "student",
    "boss",
    "colleague",
    "interview",
    "salary",
    "money",
    "debt",
    "rent",
    "family",
    "friend",
    "parent",
    "mother",
    "father",
    "mom",
    "dad",
    "brother",
    "sister",
    "wife",
    "husband",
    "girlfriend",
    "boyfriend",
    "partner",
    "relationship",
    "marriage",
    "people",
    "person",
    "life",
    "home",
    "house",
    "doctor",
    "hospital",
    "medication",
    "medicine",
    "med",
    "pill",
    "drug",
    "therapy",
    "therapist",
    "depression",
    "anxiety",
    "stress",
    "pain",
    "insomnia",
    "problem",
    "issue",
    "reason",
    "thing",
    "time",
    "day",
    "night",
    "year",
    "month",
    "week",
    "world",
    "place",
    "room",
    "phone",
    "car",
    "game",
    "music",
    "body",
    "head",
    "heart",
    "mind",
    "food",
    "weight",
    "girl",
    "boy",
    "guy",
    "man",
    "woman",
    "kid",
    "child",
    "children",
    "dog",
    "cat",
    "door",
    "way",
    "word",
    "rain",
    "weather",
    "group",
    "party",
    "team",
    "club",
    "town",
    "city",
    "street",
    "literature",
    "subject",
    "book",
];

const ADJECTIVES: &[&str] = &[
    "happy",
    "sad",
    "angry",
    "upset",
    "tired",
    "alone",
    "lonely",
    "depressed",
    "anxious",
    "afraid",
    "scared",
    "worthless",
    "useless",
    "hopeless",
    "helpless",
    "empty",
    "numb",
    "good",
    "bad",
    "better",
    "worse",
    "worst",
    "best",
    "hard",
    "difficult",
    "easy",
    "new",
    "old",
    "young",
    "big",
    "small",
    "little",
    "long",
    "short",
    "high",
    "low",
    "real",
    "fake",
    "sick",
    "ill",
    "cold",
    "hot",
    "dark",
    "blue",
    "beautiful",
    "ugly",
    "fat",
    "thin",
    "poor",
    "rich",
    "unfair",
    "abusive",
    "toxic",
    "stressful",
    "boring",
    "awkward",
    "unattractive",
];

const ADVERBS: &[&str] = &[
    "very",
    "really",
    "always",
    "never",
    "sometimes",
    "often",
    "usually",
    "still",
    "just",
    "even",
    "too",
    "also",
    "maybe",
    "perhaps",
    "almost",
    "already",
    "soon",
    "now",
    "anymore",
    "away",
    "back",
    "anywhere",
    "everywhere",
    "nowhere",
    "somehow",
    "somewhere",
    "together",
    "apart",
    "forever",
    "barely",
    "hardly",
    "nearly",
    "quite",
    "rather",
];

struct Lists {
    pronouns: HashSet<&'static str>,
    function: HashSet<&'static str>,
    verbs: HashSet<&'static str>,
    nouns: HashSet<&'static str>,
    adjectives: HashSet<&'static str>,
    adverbs: HashSet<&'static str>,
}

fn lists() -> &'static Lists {
    static LISTS: OnceLock<Lists> = OnceLock::new();
    LISTS.get_or_init(|| Lists {
        pronouns: PRONOUNS.iter().copied().collect(),
        function: FUNCTION_WORDS.iter().copied().collect(),
        verbs: VERBS.iter().copied().collect(),
        nouns: NOUNS.iter().copied().collect(),
        adjectives: ADJECTIVES.iter().copied().collect(),
        adverbs: ADVERBS.iter().copied().collect(),
    })
}

/// Candidate stems of an inflected form: strip -s/-es/-ies, -ed/-ied,
/// -ing, undoing final-consonant doubling and silent-e dropping.
fn inflection_stems(word: &str) -> Vec<String> {
    fn push_variants(stems: &mut Vec<String>, base: &str) {
        stems.push(base.to_string());
        stems.push(format!("{base}e"));
        let chars: Vec<char> = base.chars().collect();
        if chars.len() >= 2 && chars[chars.len() - 1] == chars[chars.len() - 2] {
            stems.push(base[..base.len() - 1].to_string());
        }
    }
    let mut stems = Vec::new();
    if let Some(base) = word.strip_suffix("ing") {
        if base.len() >= 2 {
            push_variants(&mut stems, base);
        }
    }
    if let Some(base) = word.strip_suffix("ied") {
        if !base.is_empty() {
            stems.push(format!("{base}y"));
        }
    }
    if let Some(base) = word.strip_suffix("ed") {
        if base.len() >= 2 {
            push_variants(&mut stems, base);
        }
    }
    if let Some(base) = word.strip_suffix("ies") {
        if !base.is_empty() {
            stems.push(format!("{base}y"));
        }
    }
    if let Some(base) = word.strip_suffix("es") {
        if base.len() >= 2 {
            stems.push(base.to_string());
        }
    }
    if let Some(base) = word.strip_suffix('s') {
        if base.len() >= 2 {
            stems.push(base.to_string());
        }
    }
    stems
}

fn tag_word(word_lower: &str) -> PosTag {
    let lists = lists();
    if lists.pronouns.contains(word_lower) {
        return PosTag::Pron;
    }
    if lists.function.contains(word_lower) {
        return PosTag::Other;
    }
    if lists.verbs.contains(word_lower) {
        return PosTag::Verb;
    }
    if lists.nouns.contains(word_lower) {
        return PosTag::Noun;
    }
    if lists.adjectives.contains(word_lower) {
        return PosTag::Adj;
    }
    if lists.adverbs.contains(word_lower) {
        return PosTag::Adv;
    }
    // Suffix rules: inflections of known verb stems, then derivational
    // noun/adverb endings.
    for stem in inflection_stems(word_lower) {
        if lists.verbs.contains(stem.as_str()) {
            return PosTag::Verb;
        }
    }
    for stem in inflection_stems(word_lower) {
        if lists.nouns.contains(stem.as_str()) {
            return PosTag::Noun;
        }
    }
    if word_lower.len() > 3 && word_lower.ends_with("ly") {
        return PosTag::Adv;
    }
    if word_lower.len() > 5 && (word_lower.ends_with("ness") || word_lower.ends_with("tion")) {
        return PosTag::Noun;
    }
    PosTag::Other
}

/// The built-in list-plus-suffix tagger.
#[derive(Debug, Default, Clone, Copy)]
pub struct DefaultTagger;

impl Tagger for DefaultTagger {
    fn tag_sentence(&self, sentence: &str) -> Vec<TaggedToken> {
        tokens_with_punct(sentence)
            .into_iter()
            .map(|surface| {
                let tag = if surface.chars().all(|c| !c.is_alphanumeric() && c != '\'') {
                    PosTag::Other
                } else {
                    tag_word(&surface.to_lowercase())
                };
                TaggedToken {
                    surface: surface.to_string(),
                    tag,
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tags(sentence: &str) -> Vec<PosTag> {
        DefaultTagger
            .tag_sentence(sentence)
            .into_iter()
            .map(|t| t.tag)
            .collect()
    }

    #[test]
    fn core_example_tags() {
        assert_eq!(
            tags("I hate jobs"),
            vec![PosTag::Pron, PosTag::Verb, PosTag::Noun]
        );
    }

    #[test]
    fn empty_sentence_yields_no_tokens() {
        assert!(tags("").is_empty());
    }

    #[test]
    fn ing_suffix_marks_verbs() {
        assert_eq!(tags("running"), vec![PosTag::Verb]);
        assert_eq!(tags("crying"), vec![PosTag::Verb]);
        // Silent-e stems: "using" -> "use".
        assert_eq!(tags("using"), vec![PosTag::Verb]);
        // Doubled consonant: "stopping" -> "stop".
        assert_eq!(tags("stopping"), vec![PosTag::Verb]);
    }

    #[test]
    fn ed_and_s_suffixes_mark_verbs() {
        assert_eq!(tags("forced"), vec![PosTag::Verb]);
        assert_eq!(tags("bullies"), vec![PosTag::Verb]);
        assert_eq!(tags("worked"), vec![PosTag::Verb]);
        assert_eq!(tags("hates"), vec![PosTag::Verb]);
        assert_eq!(tags("tried"), vec![PosTag::Verb]);
    }

    #[test]
    fn plural_nouns_resolve_through_stems() {
        assert_eq!(tags("jobs"), vec![PosTag::Noun]);
        assert_eq!(tags("grades"), vec![PosTag::Noun]);
    }

    #[test]
    fn derivational_suffixes() {
        assert_eq!(tags("quietly"), vec![PosTag::Adv]);
        assert_eq!(tags("loneliness"), vec![PosTag::Noun]);
        assert_eq!(tags("frustration"), vec![PosTag::Noun]);
    }

    #[test]
    fn function_words_never_become_verbs() {
        // "during" ends in -ing but is a closed-class word.
        assert_eq!(tags("during"), vec![PosTag::Other]);
        assert_eq!(tags("the"), vec![PosTag::Other]);
        assert_eq!(tags("because"), vec![PosTag::Other]);
    }

    #[test]
    fn noun_phrases_carry_no_verbs() {
        assert!(tags("the rain").iter().all(|&t| t != PosTag::Verb));
        assert!(tags("the cold").iter().all(|&t| t != PosTag::Verb));
    }

    #[test]
    fn punctuation_is_other() {
        let tagged = DefaultTagger.tag_sentence("I cry, daily!");
        let surfaces: Vec<&str> = tagged.iter().map(|t| t.surface.as_str()).collect();
        assert_eq!(surfaces, vec!["I", "cry", ",", "daily", "!"]);
        assert_eq!(tagged[2].tag, PosTag::Other);
        assert_eq!(tagged[4].tag, PosTag::Other);
    }

    #[test]
    fn unknown_words_fall_back_to_other() {
        assert_eq!(tags("xylophone"), vec![PosTag::Other]);
    }

    #[test]
    fn surfaces_are_preserved_verbatim() {
        let tagged = DefaultTagger.tag_sentence("Don't worry");
        assert_eq!(tagged[0].surface, "Don't");
        assert!(tagged.iter().all(|t| !t.surface.is_empty()));
    }
}
