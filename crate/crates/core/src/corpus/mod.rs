//! Slide corpora annotated by eight annotators with BIO tags.
//!
//! A [`Corpus`] is a list of [`Slide`]s; each slide carries its tokens, the
//! index of the sentence each token belongs to, and optionally one
//! [`AnnotationSet`] per token. Gold emphasis is the fraction of annotators
//! that tagged a token `B` or `I`.

mod io;
mod synthetic;

pub use io::{parse_corpus, read_scores, serialize_corpus, write_scores, CorpusFormat};
pub use synthetic::generate_synthetic_corpus;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of annotators behind every annotation set.
pub const ANNOTATOR_COUNT: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BioTag {
    B,
    I,
    O,
}

impl BioTag {
    pub fn is_emphasis(self) -> bool {
        matches!(self, BioTag::B | BioTag::I)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BioTag::B => "B",
            BioTag::I => "I",
            BioTag::O => "O",
        }
    }
}

impl FromStr for BioTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "B" => Ok(BioTag::B),
            "I" => Ok(BioTag::I),
            "O" => Ok(BioTag::O),
            other => Err(Error::Validation(format!(
                "tag {other:?} is not one of B, I, O"
            ))),
        }
    }
}

impl fmt::Display for BioTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The eight annotator tags for one token, in annotator order A1..A8.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AnnotationSet([BioTag; ANNOTATOR_COUNT]);

impl AnnotationSet {
    pub fn new(tags: Vec<BioTag>) -> Result<Self> {
        let len = tags.len();
        let tags: [BioTag; ANNOTATOR_COUNT] = tags.try_into().map_err(|_| {
            Error::Validation(format!(
                "annotation set has {len} tags, expected {ANNOTATOR_COUNT}"
            ))
        })?;
        Ok(AnnotationSet(tags))
    }

    /// Parses tags such as `["O", "I", "B", ...]`.
    pub fn from_strs<S: AsRef<str>>(tags: &[S]) -> Result<Self> {
        let parsed = tags
            .iter()
            .map(|t| t.as_ref().parse())
            .collect::<Result<Vec<BioTag>>>()?;
        Self::new(parsed)
    }

    pub fn tags(&self) -> &[BioTag; ANNOTATOR_COUNT] {
        &self.0
    }

    /// Number of annotators that marked the token as emphasized (B or I).
    pub fn emphasis_count(&self) -> usize {
        self.0.iter().filter(|t| t.is_emphasis()).count()
    }
}

/// Fraction of annotators tagging the token B or I.
pub fn aggregate_annotations(a: &AnnotationSet) -> f64 {
    a.emphasis_count() as f64 / ANNOTATOR_COUNT as f64
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub sentence_index: usize,
    pub token_index: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Slide {
    id: String,
    tokens: Vec<Token>,
    annotations: Option<Vec<AnnotationSet>>,
}

fn validate_text_field(what: &str, s: &str) -> Result<()> {
    if s.is_empty() {
        return Err(Error::Validation(format!("{what} is empty")));
    }
    if s.contains(['\t', '\n', '\r']) {
        return Err(Error::Validation(format!(
            "{what} {s:?} contains a tab or line break"
        )));
    }
    Ok(())
}

impl Slide {
    /// Builds a slide from `(surface, sentence_index)` pairs; token indices
    /// are assigned in order.
    pub fn new(
        id: impl Into<String>,
        tokens: Vec<(String, usize)>,
        annotations: Option<Vec<AnnotationSet>>,
    ) -> Result<Self> {
        let id = id.into();
        validate_text_field("slide id", &id)?;
        if id.trim() != id {
            return Err(Error::Validation(format!(
                "slide id {id:?} has surrounding whitespace"
            )));
        }
        let mut prev_sentence = 0;
        let mut out = Vec::with_capacity(tokens.len());
        for (token_index, (surface, sentence_index)) in tokens.into_iter().enumerate() {
            validate_text_field("token surface", &surface)?;
            if sentence_index < prev_sentence {
                return Err(Error::Validation(format!(
                    "slide {id:?}: sentence index decreases at token {token_index}"
                )));
            }
            prev_sentence = sentence_index;
            out.push(Token {
                surface,
                sentence_index,
                token_index,
            });
        }
        if let Some(ann) = &annotations {
            if ann.len() != out.len() {
                return Err(Error::Validation(format!(
                    "slide {id:?}: {} annotation sets for {} tokens",
                    ann.len(),
                    out.len()
                )));
            }
        }
        Ok(Slide {
            id,
            tokens: out,
            annotations,
        })
    }

    /// Builds a slide from sentences of surfaces; sentence `k` gets index `k`.
    pub fn from_sentences(
        id: impl Into<String>,
        sentences: &[Vec<&str>],
        annotations: Option<Vec<AnnotationSet>>,
    ) -> Result<Self> {
        let tokens = sentences
            .iter()
            .enumerate()
            .flat_map(|(s, words)| words.iter().map(move |w| (w.to_string(), s)))
            .collect();
        Slide::new(id, tokens, annotations)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn annotations(&self) -> Option<&[AnnotationSet]> {
        self.annotations.as_deref()
    }

    pub fn surfaces(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.surface.as_str())
    }

    pub fn sentence_count(&self) -> usize {
        let mut seen: Vec<usize> = self.tokens.iter().map(|t| t.sentence_index).collect();
        seen.dedup();
        seen.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
    Synthetic,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
            Split::Synthetic => "synthetic",
        }
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            "synthetic" => Ok(Split::Synthetic),
            other => Err(Error::Validation(format!("unknown split label {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Corpus {
    split: Split,
    slides: Vec<Slide>,
}

impl Corpus {
    pub fn new(split: Split, slides: Vec<Slide>) -> Result<Self> {
        let mut ids = HashSet::with_capacity(slides.len());
        for s in &slides {
            if !ids.insert(s.id.as_str()) {
                return Err(Error::Validation(format!("duplicate slide id {:?}", s.id)));
            }
        }
        Ok(Corpus { split, slides })
    }

    pub fn empty(split: Split) -> Self {
        Corpus {
            split,
            slides: Vec::new(),
        }
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn slides(&self) -> &[Slide] {
        &self.slides
    }

    pub fn token_count(&self) -> usize {
        self.slides.iter().map(Slide::len).sum()
    }

    pub fn is_annotated(&self) -> bool {
        self.slides.iter().all(|s| s.annotations.is_some())
    }

    /// Gold scores for every slide, in corpus order.
    pub fn gold(&self) -> Result<Vec<EmphasisScores>> {
        self.slides.iter().map(gold_scores).collect()
    }
}

/// Per-token emphasis probabilities for one slide.
#[derive(Clone, Debug, PartialEq)]
pub struct EmphasisScores {
    slide_id: String,
    scores: Vec<f64>,
}

impl EmphasisScores {
    pub fn new(slide_id: impl Into<String>, scores: Vec<f64>) -> Result<Self> {
        let slide_id = slide_id.into();
        if let Some((i, s)) = scores
            .iter()
            .enumerate()
            .find(|(_, s)| !(0.0..=1.0).contains(*s))
        {
            return Err(Error::Validation(format!(
                "score {s} at token {i} of slide {slide_id:?} is outside [0, 1]"
            )));
        }
        Ok(EmphasisScores { slide_id, scores })
    }

    pub fn slide_id(&self) -> &str {
        &self.slide_id
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

pub fn gold_scores(s: &Slide) -> Result<EmphasisScores> {
    let ann = s.annotations().ok_or_else(|| {
        Error::Precondition(format!("slide {:?} has no annotations", s.id()))
    })?;
    EmphasisScores::new(s.id(), ann.iter().map(aggregate_annotations).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub slide_count: usize,
    pub sentence_count: usize,
    pub token_count: usize,
    pub min_tokens: usize,
    pub max_tokens: usize,
    pub mean_tokens: f64,
}

/// Slide, sentence and token counts plus the token-length distribution.
/// `mean_tokens` is the exact mean; callers round for display.
pub fn corpus_stats(c: &Corpus) -> CorpusStats {
    let lengths: Vec<usize> = c.slides.iter().map(Slide::len).collect();
    let token_count: usize = lengths.iter().sum();
    let slide_count = lengths.len();
    CorpusStats {
        slide_count,
        sentence_count: c.slides.iter().map(Slide::sentence_count).sum(),
        token_count,
        min_tokens: lengths.iter().copied().min().unwrap_or(0),
        max_tokens: lengths.iter().copied().max().unwrap_or(0),
        mean_tokens: if slide_count == 0 {
            0.0
        } else {
            token_count as f64 / slide_count as f64
        },
    }
}

/// One output slide per `(slide, sentence_index)` group, id `<slide>#<sentence>`.
///
/// Fails only when a derived id collides with an existing one, e.g. a corpus
/// holding both `a` and `a#0`.
pub fn split_into_sentences(c: &Corpus) -> Result<Corpus> {
    let mut out = Vec::new();
    for slide in &c.slides {
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for t in &slide.tokens {
            groups.entry(t.sentence_index).or_default().push(t.token_index);
        }
        for (sentence, members) in groups {
            let tokens = members
                .iter()
                .map(|&i| (slide.tokens[i].surface.clone(), 0))
                .collect();
            let annotations = slide
                .annotations
                .as_ref()
                .map(|a| members.iter().map(|&i| a[i].clone()).collect());
            let id = format!("{}#{}", slide.id, sentence);
            out.push(Slide::new(id, tokens, annotations).expect("sub-slide of a valid slide"));
        }
    }
    Corpus::new(c.split, out)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    fn ann(s: &str) -> AnnotationSet {
        AnnotationSet::from_strs(&s.split_whitespace().collect::<Vec<_>>()).unwrap()
    }

    pub(crate) fn species_slide() -> Slide {
        let words = [
            ("•", "O O O O O O O O"),
            ("Have", "O O O O O O O O"),
            ("population", "O B O O B O O O"),
            ("counts", "O O O O O O O O"),
            ("for", "O O O O O O O O"),
            ("three", "O B O O O O O B"),
            ("key", "O I O O O O O I"),
            ("species", "O I B O B O O I"),
        ];
        Slide::new(
            "species",
            words.iter().map(|(w, _)| (w.to_string(), 0)).collect(),
            Some(words.iter().map(|(_, a)| ann(a)).collect()),
        )
        .unwrap()
    }

    #[test]
    fn aggregate_examples() {
        assert_eq!(aggregate_annotations(&ann("O O O O O O O O")), 0.0);
        assert_eq!(aggregate_annotations(&ann("O B O O B O O O")), 0.25);
        assert_eq!(aggregate_annotations(&ann("O I B O B O O I")), 0.5);
    }

    #[test]
    fn gold_scores_species_slide() {
        let g = gold_scores(&species_slide()).unwrap();
        assert_eq!(g.scores(), &[0.0, 0.0, 0.25, 0.0, 0.0, 0.25, 0.25, 0.5]);
    }

    #[test]
    fn gold_scores_extremes() {
        let n = 4;
        let toks: Vec<_> = (0..n).map(|i| (format!("w{i}"), 0)).collect();
        let all_o = Slide::new("a", toks.clone(), Some(vec![ann("O O O O O O O O"); n])).unwrap();
        assert!(gold_scores(&all_o).unwrap().scores().iter().all(|&s| s == 0.0));
        let all_b = Slide::new("b", toks, Some(vec![ann("B B B B B B B B"); n])).unwrap();
        assert!(gold_scores(&all_b).unwrap().scores().iter().all(|&s| s == 1.0));
    }

    #[test]
    fn gold_scores_requires_annotations() {
        let s = Slide::new("x", vec![("a".into(), 0)], None).unwrap();
        assert!(matches!(gold_scores(&s), Err(Error::Precondition(_))));
    }

    #[test]
    fn annotation_set_rejects_wrong_length() {
        assert!(matches!(
            AnnotationSet::from_strs(&["O"; 7]),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            AnnotationSet::from_strs(&["O", "O", "O", "O", "O", "O", "O", "X"]),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn slide_invariants() {
        assert!(Slide::new("s", vec![("".into(), 0)], None).is_err());
        assert!(Slide::new("s", vec![("a".into(), 1), ("b".into(), 0)], None).is_err());
        assert!(Slide::new("s", vec![("a".into(), 0)], Some(vec![])).is_err());
        let dup = Slide::new("s", vec![("a".into(), 0)], None).unwrap();
        assert!(Corpus::new(Split::Train, vec![dup.clone(), dup]).is_err());
    }

    #[test]
    fn stats_single_slide() {
        let s = Slide::from_sentences("s", &[vec!["a", "b", "c", "d", "e"]], None).unwrap();
        let c = Corpus::new(Split::Test, vec![s]).unwrap();
        assert_eq!(
            corpus_stats(&c),
            CorpusStats {
                slide_count: 1,
                sentence_count: 1,
                token_count: 5,
                min_tokens: 5,
                max_tokens: 5,
                mean_tokens: 5.0
            }
        );
    }

    #[test]
    fn stats_empty() {
        let st = corpus_stats(&Corpus::empty(Split::Dev));
        assert_eq!(st.slide_count, 0);
        assert_eq!(st.mean_tokens, 0.0);
    }

    #[test]
    fn split_sentences_sizes() {
        let s = Slide::new(
            "s",
            vec![("a".into(), 0), ("b".into(), 0), ("c".into(), 1)],
            None,
        )
        .unwrap();
        let c = Corpus::new(Split::Train, vec![s]).unwrap();
        let out = split_into_sentences(&c).unwrap();
        let sizes: Vec<_> = out.slides().iter().map(Slide::len).collect();
        assert_eq!(sizes, vec![2, 1]);
        assert_eq!(out.slides()[0].id(), "s#0");
        assert_eq!(out.slides()[1].id(), "s#1");
        assert_eq!(out.slides()[1].tokens()[0].token_index, 0);
    }

    #[test]
    fn split_single_sentence_slides_keep_tokens() {
        let c = generate_synthetic_corpus(3, 4, 6);
        let single: Vec<Slide> = c
            .slides()
            .iter()
            .map(|s| {
                Slide::new(
                    s.id(),
                    s.surfaces().map(|w| (w.to_string(), 0)).collect(),
                    s.annotations().map(|a| a.to_vec()),
                )
                .unwrap()
            })
            .collect();
        let c = Corpus::new(Split::Train, single).unwrap();
        let out = split_into_sentences(&c).unwrap();
        assert_eq!(out.slides().len(), c.slides().len());
        for (a, b) in c.slides().iter().zip(out.slides()) {
            assert_eq!(b.id(), format!("{}#0", a.id()));
            assert_eq!(a.tokens(), b.tokens());
            assert_eq!(a.annotations(), b.annotations());
        }
    }

    #[test]
    fn emphasis_scores_range() {
        assert!(EmphasisScores::new("s", vec![0.0, 1.0]).is_ok());
        assert!(EmphasisScores::new("s", vec![1.5]).is_err());
        assert!(EmphasisScores::new("s", vec![f64::NAN]).is_err());
    }
}
