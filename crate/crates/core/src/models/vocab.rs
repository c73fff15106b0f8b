use std::collections::HashMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Slide};
use crate::error::{Error, Result};
use crate::nncore::Tensor;

/// Row 0 of both embedding tables is reserved for unseen items.
pub const UNK: usize = 0;
pub const UNK_WORD: &str = "<unk>";

/// Word and character inventories, in order of first appearance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "VocabRepr", into = "VocabRepr")]
pub struct Vocabularies {
    words: Vec<String>,
    chars: Vec<char>,
    word_index: HashMap<String, usize>,
    char_index: HashMap<char, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabRepr {
    words: Vec<String>,
    chars: String,
}

impl From<VocabRepr> for Vocabularies {
    fn from(r: VocabRepr) -> Self {
        Vocabularies::from_lists(r.words, r.chars.chars().collect())
    }
}

impl From<Vocabularies> for VocabRepr {
    fn from(v: Vocabularies) -> Self {
        VocabRepr {
            words: v.words,
            chars: v.chars.into_iter().collect(),
        }
    }
}

impl Vocabularies {
    /// Builds from explicit lists; index 0 of each is the UNK slot and is
    /// added here, so the lists hold known items only.
    pub fn from_lists(words: Vec<String>, chars: Vec<char>) -> Self {
        let mut v = Vocabularies {
            words: vec![UNK_WORD.to_string()],
            chars: vec!['\u{FFFD}'],
            word_index: HashMap::new(),
            char_index: HashMap::new(),
        };
        for w in words {
            if w != UNK_WORD {
                v.add_word(&w);
            }
        }
        for c in chars {
            if c != '\u{FFFD}' {
                v.add_char(c);
            }
        }
        v
    }

    fn add_word(&mut self, w: &str) {
        if !self.word_index.contains_key(w) {
            self.word_index.insert(w.to_string(), self.words.len());
            self.words.push(w.to_string());
        }
    }

    fn add_char(&mut self, c: char) {
        if let std::collections::hash_map::Entry::Vacant(e) = self.char_index.entry(c) {
            e.insert(self.chars.len());
            self.chars.push(c);
        }
    }

    pub fn from_corpus(c: &Corpus) -> Self {
        let mut v = Vocabularies::from_lists(Vec::new(), Vec::new());
        for slide in c.slides() {
            for t in slide.tokens() {
                v.add_word(&t.surface);
                for ch in t.surface.chars() {
                    v.add_char(ch);
                }
            }
        }
        v
    }

    /// Table sizes including the UNK row.
    pub fn word_count(&self) -> usize {
        self.words.len()
    }

    pub fn char_count(&self) -> usize {
        self.chars.len()
    }

    pub fn word_id(&self, w: &str) -> usize {
        self.word_index.get(w).copied().unwrap_or(UNK)
    }

    pub fn char_ids(&self, w: &str) -> Vec<usize> {
        w.chars()
            .map(|c| self.char_index.get(&c).copied().unwrap_or(UNK))
            .collect()
    }
}

/// Per-token vectors supplied by an external encoder.
///
/// File layout: a header line `dim=<d>`, then one tab-separated row per
/// token: `slide_id`, `token_index`, and `d` space-separated reals.
#[derive(Clone, Debug, PartialEq)]
pub struct ExternalEmbeddings {
    source_id: String,
    dim: usize,
    vectors: HashMap<String, Vec<Option<Vec<f64>>>>,
}

impl ExternalEmbeddings {
    pub fn new(source_id: impl Into<String>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Validation("embedding dim must be positive".into()));
        }
        Ok(ExternalEmbeddings {
            source_id: source_id.into(),
            dim,
            vectors: HashMap::new(),
        })
    }

    pub fn insert(&mut self, slide_id: &str, token_index: usize, v: Vec<f64>) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::Validation(format!(
                "vector for ({slide_id}, {token_index}) has {} values, dim={}",
                v.len(),
                self.dim
            )));
        }
        let row = self.vectors.entry(slide_id.to_string()).or_default();
        if row.len() <= token_index {
            row.resize(token_index + 1, None);
        }
        row[token_index] = Some(v);
        Ok(())
    }

    pub fn read<R: BufRead>(input: R, source_id: impl Into<String>) -> Result<Self> {
        let mut lines = input.lines().enumerate();
        let dim = loop {
            let Some((i, line)) = lines.next() else {
                return Err(Error::Parse {
                    line: 1,
                    message: "missing `dim=<d>` header".into(),
                });
            };
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let d = line
                .strip_prefix("dim=")
                .and_then(|d| d.trim().parse::<usize>().ok())
                .filter(|&d| d > 0)
                .ok_or_else(|| Error::Parse {
                    line: i + 1,
                    message: format!("expected `dim=<d>` header, got {line:?}"),
                })?;
            break d;
        };
        let mut emb = ExternalEmbeddings::new(source_id, dim)?;
        for (i, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse { line: i + 1, message };
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(parse_err(format!("expected 3 tab-separated columns, got {}", cols.len())));
            }
            let idx: usize = cols[1]
                .trim()
                .parse()
                .map_err(|_| parse_err(format!("bad token index {:?}", cols[1])))?;
            let v: Vec<f64> = cols[2]
                .split_whitespace()
                .map(|x| x.parse::<f64>().ok().filter(|v| v.is_finite()))
                .collect::<Option<_>>()
                .ok_or_else(|| parse_err("vector holds a non-numeric value".into()))?;
            if v.len() != dim {
                return Err(parse_err(format!("vector has {} values, header says dim={dim}", v.len())));
            }
            emb.insert(cols[0].trim(), idx, v)?;
        }
        Ok(emb)
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `T × dim` matrix for a slide, failing on the first token without a vector.
    pub fn matrix_for(&self, slide: &Slide) -> Result<Tensor> {
        let row = self.vectors.get(slide.id());
        let mut data = Vec::with_capacity(slide.len() * self.dim);
        for t in 0..slide.len() {
            let v = row
                .and_then(|r| r.get(t))
                .and_then(|v| v.as_ref())
                .ok_or_else(|| Error::Lookup {
                    slide_id: slide.id().to_string(),
                    position: t,
                })?;
            data.extend_from_slice(v);
        }
        Tensor::matrix(slide.len(), self.dim, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Split;

    #[test]
    fn vocab_unk_and_order() {
        let s = Slide::from_sentences("a", &[vec!["ab", "ba", "ab"]], None).unwrap();
        let c = Corpus::new(Split::Train, vec![s]).unwrap();
        let v = Vocabularies::from_corpus(&c);
        assert_eq!(v.word_count(), 3);
        assert_eq!(v.char_count(), 3);
        assert_eq!(v.word_id("ab"), 1);
        assert_eq!(v.word_id("zz"), UNK);
        assert_eq!(v.char_ids("abz"), vec![1, 2, UNK]);
        let json = serde_json::to_string(&v).unwrap();
        let back: Vocabularies = serde_json::from_str(&json).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn embedding_file() {
        let text = "dim=2\na\t1\t0.5 1\na\t0\t-1 2e-1\n";
        let e = ExternalEmbeddings::read(text.as_bytes(), "test").unwrap();
        let s = Slide::from_sentences("a", &[vec!["x", "y"]], None).unwrap();
        assert_eq!(e.matrix_for(&s).unwrap().data(), &[-1.0, 0.2, 0.5, 1.0]);
        let s3 = Slide::from_sentences("a", &[vec!["x", "y", "z"]], None).unwrap();
        assert!(matches!(
            e.matrix_for(&s3),
            Err(Error::Lookup { position: 2, .. })
        ));
        assert!(ExternalEmbeddings::read("dim=2\na\t0\t1\n".as_bytes(), "t").is_err());
        assert!(ExternalEmbeddings::read("a\t0\t1\n".as_bytes(), "t").is_err());
        assert!(ExternalEmbeddings::read("dim=1\na\tx\t1\n".as_bytes(), "t").is_err());
    }
}
