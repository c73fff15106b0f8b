//! TSV and JSON corpus formats and the score-file format.
//!
//! TSV corpus layout (canonical):
//!
//! ```text
//! # split: train
//!
//! # slide: s1
//! Have<TAB>O O O O O O O O<TAB>0
//! species<TAB>O I B O B O O I<TAB>0
//!
//! # slide: s2
//! ...
//! ```
//!
//! The `# split:` line is optional and defaults to `train`. The tag column
//! is `-` for unannotated tokens; a slide must be annotated on all of its
//! tokens or none.
//!
//! Score files are TSV rows `slide_id, token_index, score` with the score
//! printed to 6 decimal places, preceded by a header row.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{AnnotationSet, Corpus, EmphasisScores, Slide, Split};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Tsv,
    Json,
}

impl FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tsv" => Ok(CorpusFormat::Tsv),
            "json" => Ok(CorpusFormat::Json),
            other => Err(Error::Validation(format!("unknown corpus format {other:?}"))),
        }
    }
}

pub fn parse_corpus<R: BufRead>(input: R, format: CorpusFormat) -> Result<Corpus> {
    match format {
        CorpusFormat::Tsv => parse_tsv(input),
        CorpusFormat::Json => parse_json(input),
    }
}

pub fn serialize_corpus<W: Write>(c: &Corpus, mut out: W, format: CorpusFormat) -> Result<()> {
    match format {
        CorpusFormat::Tsv => write_tsv(c, &mut out),
        CorpusFormat::Json => {
            serde_json::to_writer_pretty(&mut out, &JsonCorpus::from(c))?;
            out.write_all(b"\n")?;
            Ok(())
        }
    }
}

const SLIDE_HEADER: &str = "# slide:";
const SPLIT_HEADER: &str = "# split:";

struct PendingSlide {
    id: String,
    line: usize,
    tokens: Vec<(String, usize)>,
    tags: Vec<Option<AnnotationSet>>,
}

impl PendingSlide {
    fn finish(self) -> Result<Slide> {
        let annotated = self.tags.iter().filter(|t| t.is_some()).count();
        let annotations = if annotated == 0 {
            None
        } else if annotated == self.tags.len() {
            Some(self.tags.into_iter().flatten().collect())
        } else {
            return Err(Error::Validation(format!(
                "slide {:?} (line {}) mixes annotated and unannotated tokens",
                self.id, self.line
            )));
        };
        Slide::new(self.id, self.tokens, annotations)
    }
}

fn parse_tsv<R: BufRead>(input: R) -> Result<Corpus> {
    let mut split = Split::Train;
    let mut slides = Vec::new();
    let mut current: Option<PendingSlide> = None;

    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);

        if line.trim().is_empty() {
            if let Some(p) = current.take() {
                slides.push(p.finish()?);
            }
            continue;
        }
        if let Some(label) = line.strip_prefix(SPLIT_HEADER) {
            if current.is_some() || !slides.is_empty() {
                return Err(Error::Parse {
                    line: line_no,
                    message: "split header must precede all slides".into(),
                });
            }
            split = label.trim().parse()?;
            continue;
        }
        if let Some(id) = line.strip_prefix(SLIDE_HEADER) {
            if let Some(p) = current.take() {
                slides.push(p.finish()?);
            }
            current = Some(PendingSlide {
                id: id.trim().to_string(),
                line: line_no,
                tokens: Vec::new(),
                tags: Vec::new(),
            });
            continue;
        }

        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 3 tab-separated columns, found {}", cols.len()),
            });
        }
        let pending = current.as_mut().ok_or_else(|| Error::Parse {
            line: line_no,
            message: "token row outside of a `# slide:` block".into(),
        })?;
        let sentence_index: usize = cols[2].trim().parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("sentence index {:?} is not a non-negative integer", cols[2]),
        })?;
        let tags = match cols[1].trim() {
            "-" => None,
            t => Some(
                AnnotationSet::from_strs(&t.split_whitespace().collect::<Vec<_>>()).map_err(
                    |e| match e {
                        Error::Validation(m) => Error::Validation(format!("line {line_no}: {m}")),
                        other => other,
                    },
                )?,
            ),
        };
        pending.tokens.push((cols[0].to_string(), sentence_index));
        pending.tags.push(tags);
    }
    if let Some(p) = current.take() {
        slides.push(p.finish()?);
    }
    Corpus::new(split, slides)
}

fn write_tsv<W: Write>(c: &Corpus, out: &mut W) -> Result<()> {
    writeln!(out, "{} {}", SPLIT_HEADER, c.split().as_str())?;
    for slide in c.slides() {
        writeln!(out)?;
        writeln!(out, "{} {}", SLIDE_HEADER, slide.id())?;
        for (k, t) in slide.tokens().iter().enumerate() {
            let tags = match slide.annotations() {
                Some(a) => a[k]
                    .tags()
                    .iter()
                    .map(|t| t.as_str())
                    .collect::<Vec<_>>()
                    .join(" "),
                None => "-".to_string(),
            };
            writeln!(out, "{}\t{}\t{}", t.surface, tags, t.sentence_index)?;
        }
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonCorpus {
    split: Split,
    slides: Vec<JsonSlide>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonSlide {
    id: String,
    sentences: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    annotations: Option<Vec<Vec<Vec<String>>>>,
}

impl From<&Corpus> for JsonCorpus {
    fn from(c: &Corpus) -> Self {
        let slides = c
            .slides()
            .iter()
            .map(|s| {
                // gaps in sentence numbering become empty sentence lists
                let n_sent = s.tokens().last().map_or(0, |t| t.sentence_index + 1);
                let mut sentences = vec![Vec::new(); n_sent];
                let mut annotations = vec![Vec::new(); n_sent];
                for (k, t) in s.tokens().iter().enumerate() {
                    sentences[t.sentence_index].push(t.surface.clone());
                    if let Some(a) = s.annotations() {
                        annotations[t.sentence_index]
                            .push(a[k].tags().iter().map(|g| g.to_string()).collect());
                    }
                }
                JsonSlide {
                    id: s.id().to_string(),
                    sentences,
                    annotations: s.annotations().map(|_| annotations),
                }
            })
            .collect();
        JsonCorpus {
            split: c.split(),
            slides,
        }
    }
}

fn parse_json<R: BufRead>(input: R) -> Result<Corpus> {
    let text = std::io::read_to_string(input)?;
    if text.trim().is_empty() {
        return Ok(Corpus::empty(Split::Train));
    }
    let raw: JsonCorpus = serde_json::from_str(&text)?;
    let mut slides = Vec::with_capacity(raw.slides.len());
    for js in raw.slides {
        let tokens: Vec<(String, usize)> = js
            .sentences
            .iter()
            .enumerate()
            .flat_map(|(k, words)| words.iter().map(move |w| (w.clone(), k)))
            .collect();
        let annotations = match js.annotations {
            None => None,
            Some(groups) => {
                if groups.len() != js.sentences.len()
                    || groups
                        .iter()
                        .zip(&js.sentences)
                        .any(|(g, s)| g.len() != s.len())
                {
                    return Err(Error::Validation(format!(
                        "slide {:?}: annotations are not aligned with sentences",
                        js.id
                    )));
                }
                Some(
                    groups
                        .iter()
                        .flatten()
                        .map(|tags| AnnotationSet::from_strs(tags))
                        .collect::<Result<Vec<_>>>()?,
                )
            }
        };
        slides.push(Slide::new(js.id, tokens, annotations)?);
    }
    Corpus::new(raw.split, slides)
}

const SCORE_HEADER: &str = "slide_id\ttoken_index\tscore";

pub fn write_scores<W: Write>(scores: &[EmphasisScores], mut out: W) -> Result<()> {
    writeln!(out, "{SCORE_HEADER}")?;
    for s in scores {
        for (i, v) in s.scores().iter().enumerate() {
            writeln!(out, "{}\t{}\t{:.6}", s.slide_id(), i, v)?;
        }
    }
    Ok(())
}

/// Reads a score file. Rows may come in any order, but every slide must
/// cover token indices `0..n` exactly once. Slides keep first-seen order.
pub fn read_scores<R: BufRead>(input: R) -> Result<Vec<EmphasisScores>> {
    let mut order: Vec<String> = Vec::new();
    let mut rows: HashMap<String, Vec<(usize, f64, usize)>> = HashMap::new();
    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || (line_no == 1 && line == SCORE_HEADER) {
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
        let score: f64 = cols[2].trim().parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("score {:?} is not a number", cols[2]),
        })?;
        let id = cols[0].to_string();
        let entry = rows.entry(id.clone()).or_insert_with(|| {
            order.push(id);
            Vec::new()
        });
        entry.push((idx, score, line_no));
    }

    let mut out = Vec::with_capacity(order.len());
    for id in order {
        let mut r = rows.remove(&id).unwrap_or_default();
        r.sort_by_key(|&(idx, _, _)| idx);
        for (expected, &(idx, _, line)) in r.iter().enumerate() {
            if idx != expected {
                return Err(Error::Validation(format!(
                    "slide {id:?}: token indices are not 0..{} (line {line} has {idx})",
                    r.len()
                )));
            }
        }
        out.push(EmphasisScores::new(id, r.into_iter().map(|(_, s, _)| s).collect())?);
    }
    Ok(out)
}
