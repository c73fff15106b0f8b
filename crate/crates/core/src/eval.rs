//! Match_m scoring and the corpus analyses built on it.
//!
//! For an instance `x` with gold scores and predicted scores, `S_m` and
//! `Ŝ_m` are the `min(m, |x|)` highest-scoring token positions on each side
//! and the instance score is `|S_m ∩ Ŝ_m| / min(m, |x|)`. Ties inside a
//! ranking go to the lower token index, on both sides, so the sets always
//! have exactly `min(m, |x|)` members.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, EmphasisScores};
use crate::error::{Error, Result};
use crate::features::PosTag;

pub const SLIDE_M_VALUES: [usize; 3] = [1, 5, 10];
pub const SENTENCE_M_VALUES: [usize; 4] = [1, 2, 3, 4];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    #[default]
    LowestIndex,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatchConfig {
    m_values: Vec<usize>,
    #[serde(default)]
    tie_break: TieBreak,
}

impl MatchConfig {
    pub fn new(m_values: Vec<usize>) -> Result<Self> {
        let cfg = MatchConfig {
            m_values,
            tie_break: TieBreak::LowestIndex,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn slide_level() -> Self {
        MatchConfig {
            m_values: SLIDE_M_VALUES.to_vec(),
            tie_break: TieBreak::LowestIndex,
        }
    }

    pub fn sentence_level() -> Self {
        MatchConfig {
            m_values: SENTENCE_M_VALUES.to_vec(),
            tie_break: TieBreak::LowestIndex,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_values.is_empty() {
            return Err(Error::Validation("m_values must not be empty".into()));
        }
        if self.m_values[0] == 0 {
            return Err(Error::Validation("m values must be positive".into()));
        }
        if self.m_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Validation(format!(
                "m_values must be strictly increasing, got {:?}",
                self.m_values
            )));
        }
        Ok(())
    }

    pub fn m_values(&self) -> &[usize] {
        &self.m_values
    }

    pub fn tie_break(&self) -> TieBreak {
        self.tie_break
    }
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig::slide_level()
    }
}

/// Positions of the `min(m, n)` largest scores, returned in ascending order.
pub fn top_m_indices(scores: &[f64], m: usize) -> Result<Vec<usize>> {
    if m == 0 {
        return Err(Error::Validation("m must be at least 1".into()));
    }
    if scores.is_empty() {
        return Err(Error::Validation("cannot rank an empty score list".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    // stable sort keeps lower indices first among equal scores
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order.truncate(m.min(scores.len()));
    order.sort_unstable();
    Ok(order)
}

/// Match_m for a single instance.
pub fn instance_match(gold: &[f64], pred: &[f64], m: usize) -> Result<f64> {
    if gold.len() != pred.len() {
        return Err(Error::Validation(format!(
            "gold has {} tokens, prediction has {}",
            gold.len(),
            pred.len()
        )));
    }
    let s = top_m_indices(gold, m)?;
    let s_hat = top_m_indices(pred, m)?;
    // both lists are sorted, so a merge walk counts the intersection
    let (mut i, mut j, mut hits) = (0, 0, 0usize);
    while i < s.len() && j < s_hat.len() {
        match s[i].cmp(&s_hat[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                hits += 1;
                i += 1;
                j += 1;
            }
        }
    }
    Ok(hits as f64 / s.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MatchResult {
    pub m: usize,
    pub per_instance: Vec<(String, f64)>,
    pub mean: f64,
}

/// Pairs every gold instance with the prediction of the same id.
fn align<'a>(
    gold: &'a [EmphasisScores],
    pred: &'a [EmphasisScores],
) -> Result<Vec<(&'a EmphasisScores, &'a EmphasisScores)>> {
    if gold.is_empty() {
        return Err(Error::Validation("no instances to evaluate".into()));
    }
    let mut by_id: HashMap<&str, &EmphasisScores> = HashMap::with_capacity(pred.len());
    for p in pred {
        if by_id.insert(p.slide_id(), p).is_some() {
            return Err(Error::Validation(format!(
                "prediction repeats slide id {:?}",
                p.slide_id()
            )));
        }
    }
    if pred.len() != gold.len() {
        return Err(Error::Validation(format!(
            "gold has {} instances, prediction has {}",
            gold.len(),
            pred.len()
        )));
    }
    gold.iter()
        .map(|g| {
            let p = by_id.get(g.slide_id()).ok_or_else(|| {
                Error::Validation(format!("no prediction for slide id {:?}", g.slide_id()))
            })?;
            if p.len() != g.len() {
                return Err(Error::Validation(format!(
                    "slide {:?}: gold has {} tokens, prediction has {}",
                    g.slide_id(),
                    g.len(),
                    p.len()
                )));
            }
            Ok((g, *p))
        })
        .collect()
}

/// Per-instance Match_m and its mean over all gold instances.
pub fn match_m(gold: &[EmphasisScores], pred: &[EmphasisScores], m: usize) -> Result<MatchResult> {
    let pairs = align(gold, pred)?;
    let mut per_instance = Vec::with_capacity(pairs.len());
    let mut total = 0.0;
    for (g, p) in pairs {
        let v = instance_match(g.scores(), p.scores(), m)?;
        total += v;
        per_instance.push((g.slide_id().to_string(), v));
    }
    let mean = total / per_instance.len() as f64;
    Ok(MatchResult {
        m,
        per_instance,
        mean,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchScore {
    pub m: usize,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub scores: Vec<MatchScore>,
    pub average: f64,
    pub instance_count: usize,
}

impl EvalReport {
    pub fn score_for(&self, m: usize) -> Option<f64> {
        self.scores.iter().find(|s| s.m == m).map(|s| s.score)
    }
}

pub fn average_match(
    gold: &[EmphasisScores],
    pred: &[EmphasisScores],
    cfg: &MatchConfig,
) -> Result<EvalReport> {
    cfg.validate()?;
    let pairs = align(gold, pred)?;
    let mut scores = Vec::with_capacity(cfg.m_values.len());
    for &m in &cfg.m_values {
        let mut total = 0.0;
        for (g, p) in &pairs {
            total += instance_match(g.scores(), p.scores(), m)?;
        }
        scores.push(MatchScore {
            m,
            score: total / pairs.len() as f64,
        });
    }
    let average = scores.iter().map(|s| s.score).sum::<f64>() / scores.len() as f64;
    Ok(EvalReport {
        scores,
        average,
        instance_count: pairs.len(),
    })
}

/// Expected average Match of uniformly random predictions, estimated by
/// drawing `draws` independent score vectors per instance.
pub fn random_baseline(gold: &[EmphasisScores], cfg: &MatchConfig, draws: usize, seed: u64) -> Result<f64> {
    cfg.validate()?;
    if gold.is_empty() || draws == 0 {
        return Err(Error::Validation("random baseline needs instances and draws".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    let mut buf = Vec::new();
    for _ in 0..draws {
        let mut draw_total = 0.0;
        for &m in &cfg.m_values {
            for g in gold {
                buf.clear();
                buf.extend((0..g.len()).map(|_| rng.gen::<f64>()));
                draw_total += instance_match(g.scores(), &buf, m)?;
            }
        }
        total += draw_total / (gold.len() * cfg.m_values.len()) as f64;
    }
    Ok(total / draws as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LengthBucket {
    Short,
    Medium,
    Long,
}

impl LengthBucket {
    pub const ALL: [LengthBucket; 3] = [LengthBucket::Short, LengthBucket::Medium, LengthBucket::Long];

    pub fn of(token_count: usize) -> Self {
        match token_count {
            0..=40 => LengthBucket::Short,
            41..=90 => LengthBucket::Medium,
            _ => LengthBucket::Long,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            LengthBucket::Short => "Short (<=40)",
            LengthBucket::Medium => "Medium (41-90)",
            LengthBucket::Long => "Long (>90)",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BucketReport {
    pub bucket: LengthBucket,
    pub slide_count: usize,
    /// `None` when no slide falls in the bucket.
    pub report: Option<EvalReport>,
}

pub fn length_bucket_report(
    gold: &[EmphasisScores],
    pred: &[EmphasisScores],
    corpus: &Corpus,
    cfg: &MatchConfig,
) -> Result<Vec<BucketReport>> {
    let lengths: HashMap<&str, usize> = corpus.slides().iter().map(|s| (s.id(), s.len())).collect();
    let mut out = Vec::with_capacity(3);
    for bucket in LengthBucket::ALL {
        let mut g_sel = Vec::new();
        let mut p_sel = Vec::new();
        let pred_by_id: HashMap<&str, &EmphasisScores> = pred.iter().map(|p| (p.slide_id(), p)).collect();
        for g in gold {
            let n = lengths.get(g.slide_id()).copied().ok_or_else(|| {
                Error::Validation(format!("slide {:?} is not in the corpus", g.slide_id()))
            })?;
            if LengthBucket::of(n) != bucket {
                continue;
            }
            g_sel.push(g.clone());
            if let Some(p) = pred_by_id.get(g.slide_id()) {
                p_sel.push((*p).clone());
            }
        }
        let report = if g_sel.is_empty() {
            None
        } else {
            Some(average_match(&g_sel, &p_sel, cfg)?)
        };
        out.push(BucketReport {
            bucket,
            slide_count: g_sel.len(),
            report,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosRow {
    pub pos: PosTag,
    pub count: usize,
    pub mean_gold: f64,
    pub mean_pred: f64,
}

/// Token count and mean gold/predicted score for every POS tag that occurs.
pub fn pos_emphasis_report(
    gold: &[EmphasisScores],
    pred: &[EmphasisScores],
    pos: &[Vec<PosTag>],
    corpus: &Corpus,
) -> Result<Vec<PosRow>> {
    if pos.len() != corpus.slides().len() {
        return Err(Error::Validation(format!(
            "{} POS sequences for {} slides",
            pos.len(),
            corpus.slides().len()
        )));
    }
    let gold_by_id: HashMap<&str, &EmphasisScores> = gold.iter().map(|g| (g.slide_id(), g)).collect();
    let pred_by_id: HashMap<&str, &EmphasisScores> = pred.iter().map(|p| (p.slide_id(), p)).collect();
    let mut sums = [(0usize, 0.0f64, 0.0f64); PosTag::ALL.len()];
    for (slide, tags) in corpus.slides().iter().zip(pos) {
        let lookup = |m: &HashMap<&str, &EmphasisScores>, what: &str| -> Result<Vec<f64>> {
            let s = m.get(slide.id()).ok_or_else(|| {
                Error::Validation(format!("no {what} scores for slide {:?}", slide.id()))
            })?;
            if s.len() != slide.len() {
                return Err(Error::Validation(format!(
                    "slide {:?}: {what} has {} scores for {} tokens",
                    slide.id(),
                    s.len(),
                    slide.len()
                )));
            }
            Ok(s.scores().to_vec())
        };
        let g = lookup(&gold_by_id, "gold")?;
        let p = lookup(&pred_by_id, "predicted")?;
        if tags.len() != slide.len() {
            return Err(Error::Validation(format!(
                "slide {:?}: {} POS tags for {} tokens",
                slide.id(),
                tags.len(),
                slide.len()
            )));
        }
        for ((tag, gs), ps) in tags.iter().zip(g).zip(p) {
            let e = &mut sums[tag.index()];
            e.0 += 1;
            e.1 += gs;
            e.2 += ps;
        }
    }
    Ok(PosTag::ALL
        .iter()
        .zip(sums)
        .filter(|(_, s)| s.0 > 0)
        .map(|(&pos, (count, g, p))| PosRow {
            pos,
            count,
            mean_gold: g / count as f64,
            mean_pred: p / count as f64,
        })
        .collect())
}

fn header_for(scores: &[MatchScore]) -> Vec<String> {
    scores.iter().map(|s| format!("Match_{}", s.m)).collect()
}

fn render_rows(header: &[String], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let line = |cells: &[String], out: &mut String| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, &w))| {
                if i == 0 {
                    format!("{c:<w$}")
                } else {
                    format!("{c:>w$}")
                }
            })
            .collect();
        let _ = writeln!(out, "{}", padded.join("  ").trim_end());
    };
    line(header, &mut out);
    let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
    line(&rule, &mut out);
    for row in rows {
        line(row, &mut out);
    }
    out
}

pub fn render_eval_table(report: &EvalReport) -> String {
    let mut header = vec!["instances".to_string()];
    header.extend(header_for(&report.scores));
    header.push("average".into());
    let mut row = vec![report.instance_count.to_string()];
    row.extend(report.scores.iter().map(|s| format!("{:.4}", s.score)));
    row.push(format!("{:.4}", report.average));
    render_rows(&header, &[row])
}

pub fn render_bucket_table(buckets: &[BucketReport], cfg: &MatchConfig) -> String {
    let mut header = vec!["bucket".to_string(), "slides".to_string()];
    header.extend(cfg.m_values.iter().map(|m| format!("Match_{m}")));
    header.push("average".into());
    let rows: Vec<Vec<String>> = buckets
        .iter()
        .map(|b| {
            let mut row = vec![b.bucket.label().to_string(), b.slide_count.to_string()];
            match &b.report {
                Some(r) => {
                    row.extend(r.scores.iter().map(|s| format!("{:.4}", s.score)));
                    row.push(format!("{:.4}", r.average));
                }
                None => row.extend(std::iter::repeat("-".to_string()).take(cfg.m_values.len() + 1)),
            }
            row
        })
        .collect();
    render_rows(&header, &rows)
}

pub fn render_pos_table(rows: &[PosRow]) -> String {
    let header: Vec<String> = ["POS", "count", "mean gold", "mean pred"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.pos.as_str().to_string(),
                r.count.to_string(),
                format!("{:.4}", r.mean_gold),
                format!("{:.4}", r.mean_pred),
            ]
        })
        .collect();
    render_rows(&header, &body)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Slide;
    use proptest::prelude::*;
    use rand::Rng;

    fn es(id: &str, v: &[f64]) -> EmphasisScores {
        EmphasisScores::new(id, v.to_vec()).unwrap()
    }

    #[test]
    fn top_m_examples() {
        assert_eq!(top_m_indices(&[0.9, 0.1, 0.5], 1).unwrap(), vec![0]);
        assert_eq!(top_m_indices(&[0.3, 0.3], 1).unwrap(), vec![0]);
        assert_eq!(top_m_indices(&[0.1, 0.2, 0.3], 10).unwrap(), vec![0, 1, 2]);
        assert_eq!(top_m_indices(&[0.1, 0.5, 0.5, 0.5], 2).unwrap(), vec![1, 2]);
        assert!(top_m_indices(&[], 1).is_err());
        assert!(top_m_indices(&[0.1], 0).is_err());
    }

    #[test]
    fn match_examples() {
        assert_eq!(instance_match(&[0.9, 0.1, 0.5], &[0.2, 0.8, 0.6], 1).unwrap(), 0.0);
        assert_eq!(instance_match(&[0.9, 0.1], &[0.8, 0.9], 5).unwrap(), 1.0);
        // m=2: S={0,2}, Ŝ={1,2}
        assert_eq!(instance_match(&[0.9, 0.1, 0.5], &[0.2, 0.8, 0.6], 2).unwrap(), 0.5);
    }

    #[test]
    fn corpus_mean_and_alignment() {
        let gold = vec![es("a", &[0.9, 0.1, 0.5]), es("b", &[0.9, 0.1])];
        let pred = vec![es("b", &[0.8, 0.9]), es("a", &[0.2, 0.8, 0.6])];
        let r = match_m(&gold, &pred, 1).unwrap();
        assert_eq!(r.per_instance, vec![("a".into(), 0.0), ("b".into(), 0.0)]);
        assert_eq!(match_m(&gold, &pred, 5).unwrap().mean, 1.0);
        assert_eq!(match_m(&gold, &pred, 2).unwrap().mean, 0.75);

        let wrong_id = vec![es("a", &[0.2, 0.8, 0.6]), es("c", &[0.8, 0.9])];
        assert!(matches!(match_m(&gold, &wrong_id, 1), Err(Error::Validation(_))));
        let wrong_len = vec![es("a", &[0.2, 0.8]), es("b", &[0.8, 0.9])];
        assert!(match_m(&gold, &wrong_len, 1).is_err());
        assert!(match_m(&gold, &pred[..1], 1).is_err());
    }

    #[test]
    fn average_is_mean_of_per_m() {
        let gold = vec![es("a", &[0.9, 0.1, 0.5, 0.3, 0.2, 0.0])];
        let rep = average_match(&gold, &gold, &MatchConfig::slide_level()).unwrap();
        assert_eq!(rep.average, 1.0);
        assert_eq!(rep.instance_count, 1);
        let pred = vec![es("a", &[0.0, 0.9, 0.5, 0.3, 0.2, 0.1])];
        let rep = average_match(&gold, &pred, &MatchConfig::new(vec![1, 2, 3]).unwrap()).unwrap();
        let mean = rep.scores.iter().map(|s| s.score).sum::<f64>() / 3.0;
        assert_eq!(rep.average, mean);
        assert_eq!(rep.score_for(2), Some(0.5));
    }

    #[test]
    fn config_validation() {
        assert!(MatchConfig::new(vec![]).is_err());
        assert!(MatchConfig::new(vec![0, 1]).is_err());
        assert!(MatchConfig::new(vec![5, 1]).is_err());
        assert!(MatchConfig::new(vec![1, 1]).is_err());
        assert_eq!(MatchConfig::sentence_level().m_values(), &[1, 2, 3, 4]);
        let c: MatchConfig = serde_json::from_str(r#"{"m_values":[1,3]}"#).unwrap();
        assert_eq!(c.tie_break(), TieBreak::LowestIndex);
    }

    #[test]
    fn random_baseline_matches_expectation() {
        let gold = vec![es("a", &[0.9, 0.1, 0.5, 0.3]), es("b", &[0.2; 12])];
        let cfg = MatchConfig::slide_level();
        // a uniformly random k-subset overlaps a fixed k-subset of n in k²/n
        // places on average, so each instance contributes min(m, n) / n
        let expected: f64 = cfg
            .m_values()
            .iter()
            .flat_map(|&m| gold.iter().map(move |g| m.min(g.len()) as f64 / g.len() as f64))
            .sum::<f64>()
            / 6.0;
        let est = random_baseline(&gold, &cfg, 10_000, 3).unwrap();
        assert!((est - expected).abs() < 0.01, "{est} vs {expected}");
    }

    fn corpus_of(lengths: &[usize]) -> (Corpus, Vec<EmphasisScores>) {
        let slides: Vec<Slide> = lengths
            .iter()
            .enumerate()
            .map(|(i, &n)| {
                let toks = (0..n).map(|k| (format!("w{k}"), 0)).collect();
                Slide::new(format!("s{i}"), toks, None).unwrap()
            })
            .collect();
        let scores = lengths
            .iter()
            .enumerate()
            .map(|(i, &n)| es(&format!("s{i}"), &(0..n).map(|k| (k % 7) as f64 / 7.0).collect::<Vec<_>>()))
            .collect();
        (Corpus::new(crate::corpus::Split::Dev, slides).unwrap(), scores)
    }

    #[test]
    fn buckets() {
        let (c, g) = corpus_of(&[10, 10, 10]);
        let b = length_bucket_report(&g, &g, &c, &MatchConfig::slide_level()).unwrap();
        assert_eq!(b[0].slide_count, 3);
        assert_eq!(b[0].report.as_ref().unwrap().average, 1.0);
        assert!(b[1].report.is_none() && b[2].report.is_none());

        let (c, g) = corpus_of(&[40, 41, 90, 91]);
        let b = length_bucket_report(&g, &g, &c, &MatchConfig::slide_level()).unwrap();
        let counts: Vec<usize> = b.iter().map(|r| r.slide_count).collect();
        assert_eq!(counts, vec![1, 2, 1]);
        assert!(b.iter().all(|r| r.report.as_ref().unwrap().average == 1.0));
        let table = render_bucket_table(&b, &MatchConfig::slide_level());
        assert!(table.contains("Medium (41-90)"));
    }

    #[test]
    fn pos_report() {
        let slide = Slide::new("s", vec![("population".into(), 0)], None).unwrap();
        let c = Corpus::new(crate::corpus::Split::Dev, vec![slide]).unwrap();
        let g = vec![es("s", &[0.5])];
        let rows = pos_emphasis_report(&g, &g, &[vec![PosTag::Noun]], &c).unwrap();
        assert_eq!(
            rows,
            vec![PosRow {
                pos: PosTag::Noun,
                count: 1,
                mean_gold: 0.5,
                mean_pred: 0.5
            }]
        );
        assert!(pos_emphasis_report(&g, &g, &[vec![]], &c).is_err());
        assert!(render_pos_table(&rows).contains("NOUN"));
    }

    fn scores_strategy() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(
            prop_oneof![(0u8..=8).prop_map(|k| k as f64 / 8.0), 0.0f64..=1.0],
            1..16,
        )
    }

    proptest! {
        #[test]
        fn bounded_and_reflexive(g in scores_strategy(), seed in any::<u64>(), m in 1usize..12) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p: Vec<f64> = g.iter().map(|_| rng.gen()).collect();
            let v = instance_match(&g, &p, m).unwrap();
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert_eq!(instance_match(&g, &g, m).unwrap(), 1.0);
        }

        #[test]
        fn monotone_invariance(g in scores_strategy(), p0 in scores_strategy(), a in 0.01f64..5.0, m in 1usize..12) {
            let n = g.len().min(p0.len());
            let (g, p) = (&g[..n], &p0[..n]);
            let t: Vec<f64> = p.iter().map(|x| (a * x).exp() / (1.0 + (a * x).exp())).collect();
            prop_assert_eq!(instance_match(g, p, m).unwrap(), instance_match(g, &t, m).unwrap());
        }

        #[test]
        fn short_instances_use_length(g in scores_strategy(), p in scores_strategy()) {
            let n = g.len().min(p.len());
            let (g, p) = (&g[..n], &p[..n]);
            let m = n + 3;
            // every index is selected on both sides, so overlap is |x|/|x|
            prop_assert_eq!(instance_match(g, p, m).unwrap(), 1.0);
        }

        #[test]
        fn slide_order_irrelevant(seed in any::<u64>(), k in 2usize..8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut gold = Vec::new();
            let mut pred = Vec::new();
            for i in 0..k {
                let n = rng.gen_range(1..12);
                gold.push(es(&format!("s{i}"), &(0..n).map(|_| rng.gen()).collect::<Vec<f64>>()));
                pred.push(es(&format!("s{i}"), &(0..n).map(|_| rng.gen()).collect::<Vec<f64>>()));
            }
            let cfg = MatchConfig::slide_level();
            let a = average_match(&gold, &pred, &cfg).unwrap();
            gold.reverse();
            pred.rotate_left(1);
            let b = average_match(&gold, &pred, &cfg).unwrap();
            for (x, y) in a.scores.iter().zip(&b.scores) {
                prop_assert!((x.score - y.score).abs() < 1e-12);
            }
        }
    }
}
