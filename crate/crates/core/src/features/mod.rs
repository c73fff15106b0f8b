//! Token-level features: shape flags, coarse POS and a precomputed keyphrase
//! flag, plus their fixed-width numeric encoding.
//!
//! Character classes come from Unicode general categories: letters are `L*`,
//! uppercase is `Lu`/`Lt`, digits are `Nd`, and punctuation covers `P*` and
//! `S*` (slide bullets such as `•` or `➢` are symbols or punctuation).

mod pos;

pub use pos::{pos_tag, tag_word, PosTag};

use std::collections::HashMap;
use std::io::BufRead;

use serde::Serialize;
use unicode_general_category::{get_general_category, GeneralCategory};

use crate::corpus::{gold_scores, Corpus, Slide};
use crate::error::{Error, Result};

pub(crate) fn is_letter(c: char) -> bool {
    get_general_category(c).abbreviation().starts_with('L')
}

pub(crate) fn is_upper(c: char) -> bool {
    matches!(
        get_general_category(c),
        GeneralCategory::UppercaseLetter | GeneralCategory::TitlecaseLetter
    )
}

pub(crate) fn is_decimal_digit(c: char) -> bool {
    get_general_category(c) == GeneralCategory::DecimalNumber
}

pub(crate) fn is_punct_char(c: char) -> bool {
    let cat = get_general_category(c).abbreviation();
    cat.starts_with('P') || cat.starts_with('S')
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct TokenFeatures {
    pub is_punct: bool,
    pub upper_start: bool,
    pub has_digit: bool,
    pub all_upper: bool,
    pub in_brackets: bool,
    pub keyphrase: bool,
    pub pos: PosTag,
}

impl TokenFeatures {
    pub fn flags(&self) -> [bool; 6] {
        [
            self.is_punct,
            self.upper_start,
            self.has_digit,
            self.all_upper,
            self.in_brackets,
            self.keyphrase,
        ]
    }
}

/// Number of binary flags ahead of the POS one-hot block.
pub const FLAG_COUNT: usize = 6;
/// Length of an encoded feature vector.
pub const FEATURE_DIM: usize = FLAG_COUNT + PosTag::ALL.len();

/// Six flags then a one-hot POS block; every entry is 0.0 or 1.0.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector(pub [f64; FEATURE_DIM]);

impl FeatureVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

pub fn encode_features(f: &TokenFeatures) -> FeatureVector {
    let mut v = [0.0; FEATURE_DIM];
    for (slot, flag) in v.iter_mut().zip(f.flags()) {
        *slot = if flag { 1.0 } else { 0.0 };
    }
    v[FLAG_COUNT + f.pos.index()] = 1.0;
    FeatureVector(v)
}

fn bracket_delta(w: &str) -> Option<i64> {
    let opens = w.chars().filter(|c| matches!(c, '(' | '[' | '{')).count() as i64;
    let closes = w.chars().filter(|c| matches!(c, ')' | ']' | '}')).count() as i64;
    (opens + closes > 0).then_some(opens - closes)
}

/// Shape features for every token of `slide`.
///
/// Bracket tracking keeps a depth counter over the slide: a token is inside
/// brackets when the depth after all preceding tokens is positive. Tokens
/// containing bracket characters are never marked themselves; they only move
/// the counter, which never drops below zero.
pub fn extract_shape_features(
    slide: &Slide,
    keyphrase_flags: Option<&[bool]>,
) -> Result<Vec<TokenFeatures>> {
    if let Some(flags) = keyphrase_flags {
        if flags.len() != slide.len() {
            return Err(Error::Validation(format!(
                "slide {:?}: {} keyphrase flags for {} tokens",
                slide.id(),
                flags.len(),
                slide.len()
            )));
        }
    }
    let mut depth: i64 = 0;
    let mut out = Vec::with_capacity(slide.len());
    for (k, t) in slide.tokens().iter().enumerate() {
        let w = t.surface.as_str();
        let in_brackets = match bracket_delta(w) {
            Some(delta) => {
                depth = (depth + delta).max(0);
                false
            }
            None => depth > 0,
        };
        let is_punct = w.chars().all(is_punct_char);
        let letters = || w.chars().filter(|&c| is_letter(c));
        out.push(TokenFeatures {
            is_punct,
            upper_start: w.chars().next().is_some_and(is_upper),
            has_digit: w.chars().any(is_decimal_digit),
            all_upper: letters().next().is_some() && letters().all(is_upper),
            in_brackets,
            keyphrase: keyphrase_flags.is_some_and(|f| f[k]),
            pos: if is_punct { PosTag::Punct } else { tag_word(w) },
        });
    }
    Ok(out)
}

/// Encoded feature vectors for one slide.
pub fn slide_feature_vectors(
    slide: &Slide,
    keyphrase_flags: Option<&[bool]>,
) -> Result<Vec<FeatureVector>> {
    Ok(extract_shape_features(slide, keyphrase_flags)?
        .iter()
        .map(encode_features)
        .collect())
}

/// Keyphrase flags keyed by slide id, aligned with token indices.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct KeyphraseFlags(HashMap<String, Vec<bool>>);

impl KeyphraseFlags {
    /// Reads TSV rows `slide_id, token_index, flag` with flag 0 or 1.
    pub fn read<R: BufRead>(input: R) -> Result<Self> {
        let mut rows: HashMap<String, Vec<(usize, bool)>> = HashMap::new();
        for (i, line) in input.lines().enumerate() {
            let line_no = i + 1;
            let line = line?;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || (line_no == 1 && line.starts_with("slide_id\t")) {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected 3 tab-separated columns, found {}", cols.len()),
                });
            }
            let idx: usize = cols[1].trim().parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("token index {:?} is not a non-negative integer", cols[1]),
            })?;
            let flag = match cols[2].trim() {
                "0" => false,
                "1" => true,
                other => {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("flag {other:?} is not 0 or 1"),
                    })
                }
            };
            rows.entry(cols[0].to_string()).or_default().push((idx, flag));
        }
        let mut out = HashMap::with_capacity(rows.len());
        for (id, mut r) in rows {
            r.sort_by_key(|&(i, _)| i);
            if r.iter().enumerate().any(|(k, &(i, _))| i != k) {
                return Err(Error::Validation(format!(
                    "slide {id:?}: keyphrase token indices are not 0..{}",
                    r.len()
                )));
            }
            out.insert(id, r.into_iter().map(|(_, f)| f).collect());
        }
        Ok(KeyphraseFlags(out))
    }

    pub fn insert(&mut self, slide_id: impl Into<String>, flags: Vec<bool>) {
        self.0.insert(slide_id.into(), flags);
    }

    pub fn get(&self, slide_id: &str) -> Option<&[bool]> {
        self.0.get(slide_id).map(Vec::as_slice)
    }
}

/// Token features for every slide of a corpus, in corpus order.
pub fn corpus_features(c: &Corpus, flags: Option<&KeyphraseFlags>) -> Result<Vec<Vec<TokenFeatures>>> {
    c.slides()
        .iter()
        .map(|s| extract_shape_features(s, flags.and_then(|f| f.get(s.id()))))
        .collect()
}

/// Encoded feature vectors for every slide of a corpus, in corpus order.
pub fn corpus_feature_vectors(
    c: &Corpus,
    flags: Option<&KeyphraseFlags>,
) -> Result<Vec<Vec<FeatureVector>>> {
    Ok(corpus_features(c, flags)?
        .iter()
        .map(|fs| fs.iter().map(encode_features).collect())
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FeatureReportRow {
    pub feature: &'static str,
    /// `None` when no token carries the feature.
    pub mean_emphasis: Option<f64>,
    pub count: usize,
}

pub const FEATURE_NAMES: [&str; FLAG_COUNT] = [
    "Punctuation",
    "UpperCase start",
    "Contain numbers",
    "All Upper Case",
    "Inside Brackets",
    "Keyphrase Tags",
];

/// Mean gold emphasis and token count per binary feature, plus "Overall".
pub fn feature_emphasis_report(
    c: &Corpus,
    features: &[Vec<TokenFeatures>],
) -> Result<Vec<FeatureReportRow>> {
    if features.len() != c.slides().len() {
        return Err(Error::Validation(format!(
            "features cover {} slides, corpus has {}",
            features.len(),
            c.slides().len()
        )));
    }
    let mut sums = [0.0; FLAG_COUNT + 1];
    let mut counts = [0usize; FLAG_COUNT + 1];
    for (slide, feats) in c.slides().iter().zip(features) {
        let gold = gold_scores(slide)?;
        if feats.len() != gold.len() {
            return Err(Error::Validation(format!(
                "slide {:?}: {} feature rows for {} tokens",
                slide.id(),
                feats.len(),
                gold.len()
            )));
        }
        for (f, &g) in feats.iter().zip(gold.scores()) {
            for (k, flag) in f.flags().into_iter().enumerate() {
                if flag {
                    sums[k] += g;
                    counts[k] += 1;
                }
            }
            sums[FLAG_COUNT] += g;
            counts[FLAG_COUNT] += 1;
        }
    }
    Ok(FEATURE_NAMES
        .iter()
        .copied()
        .chain(std::iter::once("Overall"))
        .enumerate()
        .map(|(k, name)| FeatureReportRow {
            feature: name,
            mean_emphasis: (counts[k] > 0).then(|| sums[k] / counts[k] as f64),
            count: counts[k],
        })
        .collect())
}
