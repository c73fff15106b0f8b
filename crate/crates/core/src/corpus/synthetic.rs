//! Seeded synthetic slide corpora with a planted emphasis rule.
//!
//! All-uppercase tokens are tagged B by 6 of 8 simulated annotators (gold
//! 0.75), digit-bearing tokens by 2 of 8 (gold 0.25), everything else O.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AnnotationSet, BioTag, Corpus, Slide, Split, ANNOTATOR_COUNT};

const WORDS: &[&str] = &[
    "population", "counts", "for", "three", "key", "species", "have", "the", "of", "and",
    "model", "data", "results", "method", "analysis", "growth", "rate", "energy", "cell",
    "protein", "network", "system", "design", "we", "is", "are", "with", "using", "new",
    "high", "low", "large", "small", "important", "increase", "reduce", "measure", "study",
    "water", "climate", "soil", "sample", "test", "effect", "value", "process", "in", "on",
    "to", "a", "this", "our", "their", "show", "between", "different", "control", "response",
];

const ACRONYMS: &[&str] = &[
    "DNA", "RNA", "NASA", "GPU", "API", "HTTP", "CPU", "PCR", "MRI", "UV", "CO", "USA", "AI",
    "ATP", "SQL", "GDP",
];

const NUMERIC: &[&str] = &[
    "2021", "10", "3.5", "45%", "100", "1990s", "v2", "x86", "12", "7", "0.05", "2x",
];

const PUNCT: &[&str] = &["•", ",", ".", ":", "-", ";"];

#[derive(Clone, Copy)]
enum Kind {
    Word,
    Acronym,
    Numeric,
    Punct,
}

fn emphasis_votes(kind: Kind) -> usize {
    match kind {
        Kind::Acronym => 6,
        Kind::Numeric => 2,
        Kind::Word | Kind::Punct => 0,
    }
}

fn annotation_for(votes: usize, rng: &mut ChaCha8Rng) -> AnnotationSet {
    let mut tags = vec![BioTag::O; ANNOTATOR_COUNT];
    let mut who: Vec<usize> = (0..ANNOTATOR_COUNT).collect();
    who.shuffle(rng);
    for &a in &who[..votes] {
        tags[a] = BioTag::B;
    }
    AnnotationSet::new(tags).expect("eight tags")
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// Deterministic corpus of `n_slides` slides with `tokens_per_slide` tokens
/// each. Every slide opens with a bullet; sentences break at random.
pub fn generate_synthetic_corpus(seed: u64, n_slides: usize, tokens_per_slide: usize) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut slides = Vec::with_capacity(n_slides);
    for s in 0..n_slides {
        let mut tokens = Vec::with_capacity(tokens_per_slide);
        let mut annotations = Vec::with_capacity(tokens_per_slide);
        let mut sentence = 0;
        let mut sentence_start = true;
        for t in 0..tokens_per_slide {
            let (surface, kind) = if t == 0 {
                ("•".to_string(), Kind::Punct)
            } else {
                let roll: f64 = rng.gen();
                if roll < 0.15 {
                    (ACRONYMS.choose(&mut rng).unwrap().to_string(), Kind::Acronym)
                } else if roll < 0.25 {
                    (NUMERIC.choose(&mut rng).unwrap().to_string(), Kind::Numeric)
                } else if roll < 0.33 {
                    (PUNCT.choose(&mut rng).unwrap().to_string(), Kind::Punct)
                } else {
                    let w = WORDS.choose(&mut rng).unwrap();
                    // single letters stay lowercase so they never read as all-uppercase
                    let w = if sentence_start && w.len() > 1 {
                        capitalize(w)
                    } else {
                        w.to_string()
                    };
                    (w, Kind::Word)
                }
            };
            sentence_start = false;
            annotations.push(annotation_for(emphasis_votes(kind), &mut rng));
            tokens.push((surface, sentence));
            if t > 0 && t + 1 < tokens_per_slide && rng.gen_bool(0.15) {
                sentence += 1;
                sentence_start = true;
            }
        }
        slides.push(
            Slide::new(format!("syn-{seed}-{s:04}"), tokens, Some(annotations))
                .expect("generated slide is valid"),
        );
    }
    Corpus::new(Split::Synthetic, slides).expect("generated ids are unique")
}
