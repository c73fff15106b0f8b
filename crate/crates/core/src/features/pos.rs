//! Coarse part-of-speech tagging from a small bundled lexicon plus suffix
//! rules. Good enough for per-category emphasis analysis; it is not meant
//! to compete with a statistical tagger.

use std::collections::HashMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::{is_decimal_digit, is_punct_char};
use crate::corpus::Slide;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PosTag {
    Noun,
    Verb,
    Adj,
    Det,
    Adv,
    Pron,
    Punct,
    Num,
    Other,
}

impl PosTag {
    /// Fixed tag order used by the one-hot encoding and by reports.
    pub const ALL: [PosTag; 9] = [
        PosTag::Noun,
        PosTag::Verb,
        PosTag::Adj,
        PosTag::Det,
        PosTag::Adv,
        PosTag::Pron,
        PosTag::Punct,
        PosTag::Num,
        PosTag::Other,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PosTag::Noun => "NOUN",
            PosTag::Verb => "VERB",
            PosTag::Adj => "ADJ",
            PosTag::Det => "DET",
            PosTag::Adv => "ADV",
            PosTag::Pron => "PRON",
            PosTag::Punct => "PUNCT",
            PosTag::Num => "NUM",
            PosTag::Other => "OTHER",
        }
    }
}

const DET: &[&str] = &[
    "a", "an", "the", "this", "that", "these", "those", "each", "every", "some", "any", "no",
    "all", "both", "either", "neither", "another", "such", "what", "which", "whose",
];

const PRON: &[&str] = &[
    "i", "me", "my", "mine", "myself", "you", "your", "yours", "yourself", "he", "him", "his",
    "himself", "she", "her", "hers", "herself", "it", "its", "itself", "we", "us", "our",
    "ours", "ourselves", "they", "them", "their", "theirs", "themselves", "who", "whom",
    "someone", "anyone", "everyone", "nobody", "something", "anything", "everything", "nothing",
];

const ADV: &[&str] = &[
    "not", "very", "also", "often", "always", "never", "sometimes", "usually", "here", "there",
    "now", "then", "today", "soon", "still", "already", "again", "too", "just", "only", "even",
    "well", "almost", "quite", "rather", "however", "therefore", "thus", "instead", "together",
    "why", "how", "when", "where", "more", "most", "less", "least", "much", "yet", "ever",
];

const VERB: &[&str] = &[
    "be", "is", "are", "was", "were", "been", "being", "am", "have", "has", "had", "having",
    "do", "does", "did", "done", "make", "makes", "made", "get", "gets", "got", "go", "goes",
    "went", "gone", "take", "takes", "took", "taken", "see", "sees", "saw", "seen", "know",
    "knows", "knew", "known", "use", "uses", "find", "finds", "found", "give", "gives", "gave",
    "given", "show", "shows", "showed", "shown", "can", "could", "will", "would", "shall",
    "should", "may", "might", "must", "need", "needs", "increase", "increases", "reduce",
    "reduces", "measure", "measures", "improve", "improves", "provide", "provides", "include",
    "includes", "create", "creates", "build", "builds", "learn", "learns", "help", "helps",
    "keep", "let", "run", "runs", "say", "says", "said", "think", "want", "work", "works",
    "become", "becomes", "allow", "allows", "require", "requires", "support", "supports",
    "affect", "affects", "compare", "predict", "predicts", "apply", "applies", "test", "tests",
];

const ADJ: &[&str] = &[
    "new", "old", "good", "bad", "great", "high", "low", "large", "small", "big", "long",
    "short", "key", "main", "major", "minor", "important", "different", "same", "other",
    "early", "late", "young", "clear", "real", "full", "free", "best", "better", "worse",
    "worst", "simple", "complex", "strong", "weak", "common", "rare", "general", "specific",
    "social", "human", "local", "global", "public", "private", "open", "available", "likely",
    "possible", "recent", "current", "previous", "next", "first", "last", "fast", "slow",
    "easy", "hard", "true", "false", "total", "average", "significant", "several", "many",
    "few", "various",
];

const NOUN: &[&str] = &[
    "population", "count", "counts", "species", "data", "model", "models", "result", "results",
    "method", "methods", "analysis", "growth", "rate", "rates", "energy", "cell", "cells",
    "protein", "proteins", "network", "networks", "system", "systems", "design", "study",
    "studies", "water", "climate", "soil", "sample", "samples", "effect", "effects", "value",
    "values", "process", "response", "control", "time", "year", "years", "people", "way",
    "day", "man", "woman", "child", "children", "world", "life", "hand", "part", "place",
    "case", "point", "group", "problem", "fact", "number", "area", "student", "students",
    "question", "work", "government", "company", "word", "words", "slide", "slides", "team",
    "goal", "goals", "idea", "ideas", "level", "levels", "research", "information", "example",
    "figure", "table", "market", "health", "school", "history", "program", "project", "plan",
    "risk", "cost", "costs", "change", "changes", "test", "tests", "experiment", "theory",
    "structure", "function", "temperature", "area", "region", "surface", "body", "family",
];

const PREP_CONJ: &[&str] = &[
    "of", "in", "on", "at", "by", "for", "with", "about", "against", "between", "into",
    "through", "during", "before", "after", "above", "below", "to", "from", "up", "down",
    "over", "under", "and", "or", "but", "nor", "so", "because", "if", "while", "as", "than",
    "via", "per", "without", "within",
];

fn lexicon() -> &'static HashMap<&'static str, PosTag> {
    static LEX: OnceLock<HashMap<&'static str, PosTag>> = OnceLock::new();
    LEX.get_or_init(|| {
        let mut m = HashMap::new();
        // later lists win on overlap; nouns and adjectives last so content
        // readings beat function readings for words like "work" or "key"
        for (words, tag) in [
            (PREP_CONJ, PosTag::Other),
            (VERB, PosTag::Verb),
            (ADV, PosTag::Adv),
            (PRON, PosTag::Pron),
            (DET, PosTag::Det),
            (NOUN, PosTag::Noun),
            (ADJ, PosTag::Adj),
        ] {
            for w in words {
                m.insert(*w, tag);
            }
        }
        m
    })
}

const SUFFIXES: &[(&str, PosTag)] = &[
    ("tion", PosTag::Noun),
    ("sion", PosTag::Noun),
    ("ment", PosTag::Noun),
    ("ness", PosTag::Noun),
    ("ity", PosTag::Noun),
    ("ship", PosTag::Noun),
    ("ance", PosTag::Noun),
    ("ence", PosTag::Noun),
    ("ism", PosTag::Noun),
    ("ist", PosTag::Noun),
    ("er", PosTag::Noun),
    ("or", PosTag::Noun),
    ("ly", PosTag::Adv),
    ("ous", PosTag::Adj),
    ("ful", PosTag::Adj),
    ("ive", PosTag::Adj),
    ("able", PosTag::Adj),
    ("ible", PosTag::Adj),
    ("less", PosTag::Adj),
    ("ical", PosTag::Adj),
    ("al", PosTag::Adj),
    ("ic", PosTag::Adj),
    ("ing", PosTag::Verb),
    ("ed", PosTag::Verb),
    ("ize", PosTag::Verb),
    ("ise", PosTag::Verb),
    ("ify", PosTag::Verb),
];

fn is_punct_token(w: &str) -> bool {
    !w.is_empty() && w.chars().all(is_punct_char)
}

fn is_numeric_token(w: &str) -> bool {
    w.chars().any(is_decimal_digit)
        && w
            .chars()
            .all(|c| is_decimal_digit(c) || matches!(c, '.' | ',' | '%' | '-' | '+' | '/' | ':'))
}

/// Tags a single surface form.
pub fn tag_word(w: &str) -> PosTag {
    if is_punct_token(w) {
        return PosTag::Punct;
    }
    if is_numeric_token(w) {
        return PosTag::Num;
    }
    let lower = w.to_lowercase();
    if let Some(&t) = lexicon().get(lower.as_str()) {
        return t;
    }
    if !lower.chars().all(char::is_alphabetic) {
        return PosTag::Other;
    }
    for &(suffix, tag) in SUFFIXES {
        if lower.len() > suffix.len() + 2 && lower.ends_with(suffix) {
            return tag;
        }
    }
    PosTag::Other
}

pub fn pos_tag(slide: &Slide) -> Vec<PosTag> {
    slide.surfaces().map(tag_word).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(tag_word("population"), PosTag::Noun);
        assert_eq!(tag_word(","), PosTag::Punct);
        assert_eq!(tag_word("zzxqv"), PosTag::Other);
        assert_eq!(tag_word("•"), PosTag::Punct);
        assert_eq!(tag_word("2021"), PosTag::Num);
        assert_eq!(tag_word("3.5"), PosTag::Num);
    }

    #[test]
    fn lexicon_and_suffixes() {
        assert_eq!(tag_word("The"), PosTag::Det);
        assert_eq!(tag_word("they"), PosTag::Pron);
        assert_eq!(tag_word("quickly"), PosTag::Adv);
        assert_eq!(tag_word("Have"), PosTag::Verb);
        assert_eq!(tag_word("key"), PosTag::Adj);
        assert_eq!(tag_word("dangerous"), PosTag::Adj);
        assert_eq!(tag_word("normalization"), PosTag::Noun);
        assert_eq!(tag_word("computing"), PosTag::Verb);
        assert_eq!(tag_word("v2"), PosTag::Other);
    }

    #[test]
    fn indices_follow_all_order() {
        for (i, t) in PosTag::ALL.iter().enumerate() {
            assert_eq!(t.index(), i);
        }
    }
}
