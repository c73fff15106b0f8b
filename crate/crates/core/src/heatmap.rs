//! Static HTML heatmaps of per-token emphasis scores.
//!
//! Each token gets a background whose alpha equals its score, so a score of
//! 0 renders with no highlight and 1 renders fully opaque. Output depends
//! only on the inputs; no timestamps or map iteration order leak in.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::corpus::{Corpus, EmphasisScores, Slide};
use crate::error::{Error, Result};

const HIGHLIGHT_RGB: &str = "255, 140, 0";

const STYLE: &str = "body { font-family: sans-serif; margin: 2em; }
section.slide { border: 1px solid #ccc; padding: 0.5em 1em; margin-bottom: 1em; }
section.slide h2 { font-size: 0.9em; color: #666; }
p.sentence { margin: 0.3em 0; line-height: 1.8; }
span.tok { padding: 0.1em 0.15em; border-radius: 3px; }
table.compare { width: 100%; border-collapse: collapse; }
table.compare td { vertical-align: top; width: 50%; padding: 0 0.5em; }
table.compare th { text-align: left; font-size: 0.8em; color: #666; }
";

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            _ => out.push(c),
        }
    }
    out
}

/// One token span. Scores are rounded to three decimals for the alpha, and a
/// rounded alpha of zero gets no background at all.
pub fn token_span(surface: &str, score: f64) -> String {
    let alpha = (score.clamp(0.0, 1.0) * 1000.0).round() / 1000.0;
    if alpha == 0.0 {
        format!(
            "<span class=\"tok\" title=\"{score:.3}\">{}</span>",
            escape(surface)
        )
    } else {
        format!(
            "<span class=\"tok\" style=\"background-color: rgba({HIGHLIGHT_RGB}, {alpha:.3})\" title=\"{score:.3}\">{}</span>",
            escape(surface)
        )
    }
}

fn index_scores<'a>(corpus: &Corpus, scores: &'a [EmphasisScores], what: &str) -> Result<HashMap<&'a str, &'a [f64]>> {
    let by_id: HashMap<&str, &[f64]> = scores.iter().map(|s| (s.slide_id(), s.scores())).collect();
    for slide in corpus.slides() {
        match by_id.get(slide.id()) {
            None => {
                return Err(Error::Validation(format!(
                    "no {what} scores for slide {:?}",
                    slide.id()
                )))
            }
            Some(s) if s.len() != slide.len() => {
                return Err(Error::Validation(format!(
                    "slide {:?}: {} {what} scores for {} tokens",
                    slide.id(),
                    s.len(),
                    slide.len()
                )))
            }
            _ => {}
        }
    }
    Ok(by_id)
}

fn slide_body(slide: &Slide, scores: &[f64], out: &mut String) {
    let tokens = slide.tokens();
    let mut i = 0;
    while i < tokens.len() {
        let sentence = tokens[i].sentence_index;
        let spans: Vec<String> = tokens[i..]
            .iter()
            .zip(&scores[i..])
            .take_while(|(t, _)| t.sentence_index == sentence)
            .map(|(t, &s)| token_span(&t.surface, s))
            .collect();
        i += spans.len();
        let _ = writeln!(out, "<p class=\"sentence\">{}</p>", spans.join(" "));
    }
}

fn document(title: &str, body: &str) -> String {
    format!(
        "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>{}</title>\n<style>\n{STYLE}</style>\n</head>\n<body>\n{body}</body>\n</html>\n",
        escape(title)
    )
}

/// Heatmap of one score set over every slide of `corpus`, in corpus order.
pub fn render_heatmap(corpus: &Corpus, scores: &[EmphasisScores]) -> Result<String> {
    let by_id = index_scores(corpus, scores, "")?;
    let mut body = String::new();
    for slide in corpus.slides() {
        let _ = writeln!(body, "<section class=\"slide\">\n<h2>{}</h2>", escape(slide.id()));
        slide_body(slide, by_id[slide.id()], &mut body);
        body.push_str("</section>\n");
    }
    Ok(document("Emphasis heatmap", &body))
}

/// Gold and predicted heatmaps side by side, one row per slide.
pub fn render_comparison(corpus: &Corpus, gold: &[EmphasisScores], pred: &[EmphasisScores]) -> Result<String> {
    let g = index_scores(corpus, gold, "gold")?;
    let p = index_scores(corpus, pred, "predicted")?;
    let mut body = String::new();
    for slide in corpus.slides() {
        let _ = writeln!(
            body,
            "<section class=\"slide\">\n<h2>{}</h2>\n<table class=\"compare\">\n<tr><th>gold</th><th>predicted</th></tr>\n<tr>",
            escape(slide.id())
        );
        for scores in [g[slide.id()], p[slide.id()]] {
            body.push_str("<td>\n");
            slide_body(slide, scores, &mut body);
            body.push_str("</td>\n");
        }
        body.push_str("</tr>\n</table>\n</section>\n");
    }
    Ok(document("Emphasis heatmap: gold vs predicted", &body))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Slide, Split};

    fn alphas(html: &str) -> Vec<(String, f64)> {
        // (token text, alpha) for every span, in document order
        html.split("<span class=\"tok\"")
            .skip(1)
            .map(|chunk| {
                let alpha = chunk
                    .split_once(&format!("rgba({HIGHLIGHT_RGB}, "))
                    .map(|(_, rest)| rest.split(')').next().unwrap().parse().unwrap())
                    .unwrap_or(0.0);
                let text = chunk.split_once('>').unwrap().1.split("</span>").next().unwrap();
                (text.to_string(), alpha)
            })
            .collect()
    }

    fn corpus(slide: Slide) -> Corpus {
        Corpus::new(Split::Dev, vec![slide]).unwrap()
    }

    #[test]
    fn zero_scores_have_no_highlight() {
        let c = corpus(Slide::from_sentences("a", &[vec!["x", "y"], vec!["z"]], None).unwrap());
        let s = vec![EmphasisScores::new("a", vec![0.0; 3]).unwrap()];
        let html = render_heatmap(&c, &s).unwrap();
        assert!(!html.contains("background-color"));
        assert_eq!(html.matches("<p class=\"sentence\">").count(), 2);
    }

    #[test]
    fn endpoints_and_linearity() {
        assert!(token_span("w", 1.0).contains(&format!("rgba({HIGHLIGHT_RGB}, 1.000)")));
        assert!(token_span("w", 0.25).contains(&format!("rgba({HIGHLIGHT_RGB}, 0.250)")));
        assert!(token_span("<b>", 0.5).contains("&lt;b&gt;"));
    }

    #[test]
    fn species_is_darkest_token() {
        let slide = crate::corpus::tests::species_slide();
        let c = corpus(slide);
        let gold = c.gold().unwrap();
        let html = render_heatmap(&c, &gold).unwrap();
        let a = alphas(&html);
        let darkest = a.iter().max_by(|x, y| x.1.total_cmp(&y.1)).unwrap();
        assert_eq!(darkest.0, "species");
        assert_eq!(darkest.1, 0.5);
    }

    #[test]
    fn comparison_and_determinism() {
        let c = corpus(Slide::from_sentences("a", &[vec!["x", "y"]], None).unwrap());
        let g = vec![EmphasisScores::new("a", vec![1.0, 0.0]).unwrap()];
        let p = vec![EmphasisScores::new("a", vec![0.0, 1.0]).unwrap()];
        let html = render_comparison(&c, &g, &p).unwrap();
        assert_eq!(html, render_comparison(&c, &g, &p).unwrap());
        let a = alphas(&html);
        assert_eq!(a, vec![("x".into(), 1.0), ("y".into(), 0.0), ("x".into(), 0.0), ("y".into(), 1.0)]);
        let short = vec![EmphasisScores::new("a", vec![1.0]).unwrap()];
        assert!(render_heatmap(&c, &short).is_err());
    }
}
