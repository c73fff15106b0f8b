use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use emphasis_core::corpus::{
    corpus_stats, generate_synthetic_corpus, parse_corpus, read_scores, serialize_corpus, split_into_sentences,
    write_scores, Corpus, CorpusFormat, EmphasisScores,
};
use emphasis_core::ensemble::{ensemble_scores, EnsembleSpec};
use emphasis_core::eval::{
    average_match, length_bucket_report, pos_emphasis_report, render_bucket_table, render_eval_table,
    render_pos_table, MatchConfig,
};
use emphasis_core::features::{corpus_feature_vectors, corpus_features, feature_emphasis_report, pos_tag, KeyphraseFlags};
use emphasis_core::heatmap::{render_comparison, render_heatmap};
use emphasis_core::models::{
    build_char_word_model, build_external_emb_model, model_grad_checks, train, Architecture, Dataset,
    ExternalEmbConfig, ExternalEmbeddings, TrainedModel, TrainingLog, Vocabularies,
};
use emphasis_core::nncore::{primitive_checks, Checkpoint};
use serde::Serialize;

use crate::config::RunConfig;
use crate::{Cli, Command, InputError};

/// Largest relative error `gradcheck` accepts.
const GRAD_TOLERANCE: f64 = 1e-4;

const SCORE_HEADER_PREFIX: &str = "slide_id\t";

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = cli.out {
        cfg.paths.out = Some(o);
    }
    match (cli.format, cfg.paths.out.as_deref().and_then(|p| p.extension()).and_then(|e| e.to_str())) {
        (Some(f), _) => cfg.format = f.into(),
        (None, Some("json")) => cfg.format = CorpusFormat::Json,
        (None, Some("tsv")) => cfg.format = CorpusFormat::Tsv,
        _ => {}
    }
    match cli.command {
        Command::Stats { corpus } => {
            set(&mut cfg.paths.corpus, corpus);
            stats(&cfg)
        }
        Command::Aggregate { corpus } => {
            set(&mut cfg.paths.corpus, corpus);
            aggregate(&cfg)
        }
        Command::SplitSentences { corpus } => {
            set(&mut cfg.paths.corpus, corpus);
            split(&cfg)
        }
        Command::Features {
            corpus,
            keyphrases,
            report,
        } => {
            set(&mut cfg.paths.corpus, corpus);
            set(&mut cfg.paths.keyphrases, keyphrases);
            features(&cfg, report)
        }
        Command::Train {
            train,
            dev,
            embeddings,
            keyphrases,
            architecture,
            loss,
            epochs,
            learning_rate,
        } => {
            set(&mut cfg.paths.train, train);
            set(&mut cfg.paths.dev, dev);
            set(&mut cfg.paths.embeddings, embeddings);
            set(&mut cfg.paths.keyphrases, keyphrases);
            if let Some(a) = architecture {
                cfg.architecture = a.into();
            }
            if let Some(l) = loss {
                cfg.set_loss(l.into());
            }
            if let Some(e) = epochs {
                cfg.training.epochs = e;
            }
            if let Some(lr) = learning_rate {
                cfg.training.learning_rate = Some(lr);
            }
            train_cmd(&cfg)
        }
        Command::Predict {
            model,
            corpus,
            embeddings,
            keyphrases,
        } => {
            set(&mut cfg.paths.model, model);
            set(&mut cfg.paths.corpus, corpus);
            set(&mut cfg.paths.embeddings, embeddings);
            set(&mut cfg.paths.keyphrases, keyphrases);
            predict(&cfg)
        }
        Command::Evaluate {
            gold,
            pred,
            sentence_level,
        } => {
            set(&mut cfg.paths.gold, gold);
            set(&mut cfg.paths.scores, pred);
            if sentence_level {
                cfg.evaluation = MatchConfig::sentence_level();
            }
            evaluate(&cfg)
        }
        Command::Ensemble { members, weights } => {
            if !members.is_empty() {
                cfg.paths.members = members;
            }
            if weights.is_some() {
                cfg.ensemble_weights = weights;
            }
            ensemble(&cfg)
        }
        Command::Analyze {
            corpus,
            scores,
            sentence_level,
        } => {
            set(&mut cfg.paths.corpus, corpus);
            set(&mut cfg.paths.scores, scores);
            if sentence_level {
                cfg.evaluation = MatchConfig::sentence_level();
            }
            analyze(&cfg)
        }
        Command::Heatmap {
            corpus,
            scores,
            compare,
        } => {
            set(&mut cfg.paths.corpus, corpus);
            set(&mut cfg.paths.scores, scores);
            heatmap(&cfg, compare)
        }
        Command::Gradcheck => gradcheck(&cfg),
        Command::Synth { slides, tokens } => synth(&cfg, slides, tokens),
    }
}

fn set(slot: &mut Option<PathBuf>, value: Option<PathBuf>) {
    if value.is_some() {
        *slot = value;
    }
}

fn required<'a>(p: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| InputError(format!("no {what} given (argument or config paths.{what})")).into())
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(BufReader::new(f))
}

fn input_format(path: &Path) -> CorpusFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => CorpusFormat::Json,
        _ => CorpusFormat::Tsv,
    }
}

fn read_corpus(path: &Path) -> Result<Corpus> {
    parse_corpus(open(path)?, input_format(path)).with_context(|| format!("in corpus {}", path.display()))
}

fn load_scores(path: &Path) -> Result<Vec<EmphasisScores>> {
    read_scores(open(path)?).with_context(|| format!("in score file {}", path.display()))
}

/// Gold scores from a score file or from an annotated corpus.
fn load_gold(path: &Path) -> Result<Vec<EmphasisScores>> {
    let mut first = String::new();
    open(path)?
        .read_line(&mut first)
        .with_context(|| format!("cannot read {}", path.display()))?;
    if first.starts_with(SCORE_HEADER_PREFIX) {
        load_scores(path)
    } else {
        let c = read_corpus(path)?;
        c.gold().with_context(|| format!("gold from {}", path.display()))
    }
}

fn read_keyphrases(cfg: &RunConfig) -> Result<Option<KeyphraseFlags>> {
    cfg.paths
        .keyphrases
        .as_deref()
        .map(|p| KeyphraseFlags::read(open(p)?).with_context(|| format!("in keyphrase file {}", p.display())))
        .transpose()
}

fn read_embeddings(cfg: &RunConfig) -> Result<Option<ExternalEmbeddings>> {
    let Some(p) = cfg.paths.embeddings.as_deref() else {
        return Ok(None);
    };
    let source = cfg.embedding_source.clone().unwrap_or_else(|| {
        p.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "external".into())
    });
    let e = ExternalEmbeddings::read(open(p)?, source).with_context(|| format!("in embeddings {}", p.display()))?;
    Ok(Some(e))
}

/// Writes `bytes` to `paths.out` plus a resolved-config snapshot beside it,
/// or to stdout when no output path is set.
fn emit(cfg: &RunConfig, bytes: &[u8]) -> Result<()> {
    match cfg.paths.out.as_deref() {
        Some(p) => {
            fs::write(p, bytes).with_context(|| format!("cannot write {}", p.display()))?;
            let mut snapshot = p.as_os_str().to_owned();
            snapshot.push(".config.json");
            cfg.write_snapshot(Path::new(&snapshot))
        }
        None => {
            let mut out = io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
            Ok(())
        }
    }
}

fn json<T: Serialize + ?Sized>(v: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s.into_bytes())
}

fn stats(cfg: &RunConfig) -> Result<()> {
    let c = read_corpus(required(&cfg.paths.corpus, "corpus")?)?;
    let s = corpus_stats(&c);
    let bytes = match cfg.format {
        CorpusFormat::Json => json(&s)?,
        CorpusFormat::Tsv => format!(
            "slides\t{}\nsentences\t{}\ntokens\t{}\nmin_tokens\t{}\nmax_tokens\t{}\nmean_tokens\t{:.2}\n",
            s.slide_count, s.sentence_count, s.token_count, s.min_tokens, s.max_tokens, s.mean_tokens
        )
        .into_bytes(),
    };
    emit(cfg, &bytes)
}

fn scores_bytes(scores: &[EmphasisScores]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_scores(scores, &mut buf)?;
    Ok(buf)
}

fn aggregate(cfg: &RunConfig) -> Result<()> {
    let c = read_corpus(required(&cfg.paths.corpus, "corpus")?)?;
    emit(cfg, &scores_bytes(&c.gold()?)?)
}

fn corpus_bytes(c: &Corpus, format: CorpusFormat) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    serialize_corpus(c, &mut buf, format)?;
    Ok(buf)
}

fn split(cfg: &RunConfig) -> Result<()> {
    let c = read_corpus(required(&cfg.paths.corpus, "corpus")?)?;
    emit(cfg, &corpus_bytes(&split_into_sentences(&c)?, cfg.format)?)
}

#[derive(Serialize)]
struct FeatureRow<'a> {
    slide_id: &'a str,
    token_index: usize,
    token: &'a str,
    #[serde(flatten)]
    features: emphasis_core::features::TokenFeatures,
}

fn features(cfg: &RunConfig, report: bool) -> Result<()> {
    let c = read_corpus(required(&cfg.paths.corpus, "corpus")?)?;
    let flags = read_keyphrases(cfg)?;
    let feats = corpus_features(&c, flags.as_ref())?;
    let bytes = if report {
        let rows = feature_emphasis_report(&c, &feats)?;
        match cfg.format {
            CorpusFormat::Json => json(&rows)?,
            CorpusFormat::Tsv => {
                let mut s = String::from("feature\tcount\tmean_emphasis\n");
                for r in &rows {
                    let mean = r.mean_emphasis.map_or("-".to_string(), |m| format!("{m:.3}"));
                    s.push_str(&format!("{}\t{}\t{}\n", r.feature, r.count, mean));
                }
                s.into_bytes()
            }
        }
    } else {
        let rows: Vec<FeatureRow> = c
            .slides()
            .iter()
            .zip(&feats)
            .flat_map(|(s, fs)| {
                s.tokens().iter().zip(fs).map(|(t, f)| FeatureRow {
                    slide_id: s.id(),
                    token_index: t.token_index,
                    token: &t.surface,
                    features: *f,
                })
            })
            .collect();
        match cfg.format {
            CorpusFormat::Json => json(&rows)?,
            CorpusFormat::Tsv => {
                let mut s = String::from(
                    "slide_id\ttoken_index\ttoken\tpunctuation\tupper_start\thas_digit\tall_upper\tin_brackets\tkeyphrase\tpos\n",
                );
                let b = |x: bool| if x { "1" } else { "0" };
                for r in &rows {
                    let f = &r.features;
                    s.push_str(&format!(
                        "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                        r.slide_id,
                        r.token_index,
                        r.token,
                        b(f.is_punct),
                        b(f.upper_start),
                        b(f.has_digit),
                        b(f.all_upper),
                        b(f.in_brackets),
                        b(f.keyphrase),
                        f.pos.as_str()
                    ));
                }
                s.into_bytes()
            }
        }
    };
    emit(cfg, &bytes)
}

fn dataset<'a>(
    c: &'a Corpus,
    flags: Option<&KeyphraseFlags>,
    emb: Option<&ExternalEmbeddings>,
) -> Result<Dataset<'a>> {
    Ok(Dataset::new(c, corpus_feature_vectors(c, flags)?, emb)?)
}

fn write_checkpoint(model: &TrainedModel, path: &Path) -> Result<()> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut w = BufWriter::new(f);
    model.to_checkpoint()?.write(&mut w)?;
    w.flush()?;
    Ok(())
}

fn log_bytes(log: &TrainingLog, format: CorpusFormat) -> Result<Vec<u8>> {
    Ok(match format {
        CorpusFormat::Json => json(log)?,
        CorpusFormat::Tsv => {
            let mut s = String::from("epoch\tmean_loss\tdev_average_match\n");
            for e in &log.epochs {
                let dev = e.dev_average_match.map_or("-".to_string(), |d| format!("{d}"));
                s.push_str(&format!("{}\t{}\t{}\n", e.epoch, e.mean_loss, dev));
            }
            s.into_bytes()
        }
    })
}

fn train_cmd(cfg: &RunConfig) -> Result<()> {
    let out = required(&cfg.paths.out, "out")?;
    let train_c = read_corpus(required(&cfg.paths.train, "train")?)?;
    let dev_c = cfg.paths.dev.as_deref().map(read_corpus).transpose()?;
    let flags = read_keyphrases(cfg)?;
    let emb = read_embeddings(cfg)?;
    let emb_for_data = match cfg.architecture {
        Architecture::CharWord => None,
        Architecture::ExternalEmb => Some(
            emb.as_ref()
                .ok_or_else(|| InputError("external_emb training needs --embeddings".into()))?,
        ),
    };
    let train_d = dataset(&train_c, flags.as_ref(), emb_for_data)?;
    let dev_d = dev_c
        .as_ref()
        .map(|c| dataset(c, flags.as_ref(), emb_for_data))
        .transpose()?;

    let mut cfg = cfg.clone();
    let model = match cfg.architecture {
        Architecture::CharWord => {
            let vocab = Vocabularies::from_corpus(&train_c);
            cfg.char_word = cfg.char_word.clone().with_vocab(&vocab);
            build_char_word_model(&cfg.char_word, vocab, cfg.seed)?
        }
        Architecture::ExternalEmb => {
            let e = emb_for_data.expect("checked above");
            let ext = cfg.external_emb.get_or_insert_with(|| {
                let mut c = ExternalEmbConfig::new(e.dim());
                c.head = cfg.char_word.head;
                c
            });
            build_external_emb_model(ext, e, cfg.seed)?
        }
    };

    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    cfg.write_snapshot(&out.join("config.json"))?;
    let outcome = train(model, &train_d, dev_d.as_ref(), &cfg.training_config())?;
    write_checkpoint(&outcome.final_model, &out.join("model.json"))?;
    if cfg.training.keep_best {
        if let Some(best) = &outcome.best_model {
            write_checkpoint(best, &out.join("best_model.json"))?;
        }
    }
    let ext = match cfg.format {
        CorpusFormat::Tsv => "tsv",
        CorpusFormat::Json => "json",
    };
    let log = outcome.final_model.log();
    let log_path = out.join(format!("training_log.{ext}"));
    fs::write(&log_path, log_bytes(log, cfg.format)?).with_context(|| format!("cannot write {}", log_path.display()))?;
    if let Some(last) = log.epochs.last() {
        eprintln!(
            "trained {} epochs, final mean loss {:.6}{}",
            log.epochs.len(),
            last.mean_loss,
            log.best_epoch.map_or(String::new(), |b| format!(", best dev epoch {b}"))
        );
    }
    Ok(())
}

fn predict(cfg: &RunConfig) -> Result<()> {
    let model_path = required(&cfg.paths.model, "model")?;
    let mut raw = Vec::new();
    open(model_path)?
        .read_to_end(&mut raw)
        .with_context(|| format!("cannot read {}", model_path.display()))?;
    let ck = Checkpoint::read(raw.as_slice()).with_context(|| format!("in checkpoint {}", model_path.display()))?;
    let model = TrainedModel::from_checkpoint(&ck)?;
    let c = read_corpus(required(&cfg.paths.corpus, "corpus")?)?;
    let flags = read_keyphrases(cfg)?;
    let emb = match model.architecture() {
        Architecture::CharWord => None,
        Architecture::ExternalEmb => Some(
            read_embeddings(cfg)?.ok_or_else(|| InputError("this model needs --embeddings".into()))?,
        ),
    };
    let data = dataset(&c, flags.as_ref(), emb.as_ref())?;
    emit(cfg, &scores_bytes(&model.predict(&data)?)?)
}

fn evaluate(cfg: &RunConfig) -> Result<()> {
    let gold = load_gold(required(&cfg.paths.gold, "gold")?)?;
    let pred = load_scores(required(&cfg.paths.scores, "scores")?)?;
    let report = average_match(&gold, &pred, &cfg.evaluation)?;
    let bytes = match cfg.format {
        CorpusFormat::Json => json(&report)?,
        CorpusFormat::Tsv => render_eval_table(&report).into_bytes(),
    };
    emit(cfg, &bytes)
}

fn ensemble(cfg: &RunConfig) -> Result<()> {
    if cfg.paths.members.is_empty() {
        bail!(InputError("ensemble needs at least one score file".into()));
    }
    let sets = cfg
        .paths
        .members
        .iter()
        .map(|p| load_scores(p))
        .collect::<Result<Vec<_>>>()?;
    let spec = EnsembleSpec {
        members: cfg.paths.members.iter().map(|p| p.display().to_string()).collect(),
        weights: cfg.ensemble_weights.clone(),
    };
    emit(cfg, &scores_bytes(&ensemble_scores(&sets, &spec)?)?)
}

#[derive(Serialize)]
struct Analysis {
    length_buckets: Vec<emphasis_core::eval::BucketReport>,
    pos: Vec<emphasis_core::eval::PosRow>,
}

fn analyze(cfg: &RunConfig) -> Result<()> {
    let c = read_corpus(required(&cfg.paths.corpus, "corpus")?)?;
    let pred = load_scores(required(&cfg.paths.scores, "scores")?)?;
    let gold = c.gold()?;
    let buckets = length_bucket_report(&gold, &pred, &c, &cfg.evaluation)?;
    let tags: Vec<_> = c.slides().iter().map(pos_tag).collect();
    let pos = pos_emphasis_report(&gold, &pred, &tags, &c)?;
    let bytes = match cfg.format {
        CorpusFormat::Json => json(&Analysis {
            length_buckets: buckets,
            pos,
        })?,
        CorpusFormat::Tsv => format!(
            "# length buckets\n{}\n# part of speech\n{}",
            render_bucket_table(&buckets, &cfg.evaluation),
            render_pos_table(&pos)
        )
        .into_bytes(),
    };
    emit(cfg, &bytes)
}

fn heatmap(cfg: &RunConfig, compare: bool) -> Result<()> {
    let c = read_corpus(required(&cfg.paths.corpus, "corpus")?)?;
    let scores = load_scores(required(&cfg.paths.scores, "scores")?)?;
    let html = if compare {
        render_comparison(&c, &c.gold()?, &scores)?
    } else {
        render_heatmap(&c, &scores)?
    };
    emit(cfg, html.as_bytes())
}

fn gradcheck(cfg: &RunConfig) -> Result<()> {
    let mut results = primitive_checks(cfg.seed)?;
    results.extend(model_grad_checks(cfg.seed)?);
    let failed: Vec<&str> = results
        .iter()
        .filter(|r| !(r.max_rel_error < GRAD_TOLERANCE))
        .map(|r| r.name.as_str())
        .collect();
    let bytes = match cfg.format {
        CorpusFormat::Json => json(&results)?,
        CorpusFormat::Tsv => {
            let mut s = String::from("check\tmax_rel_error\tstatus\n");
            for r in &results {
                let status = if r.max_rel_error < GRAD_TOLERANCE { "ok" } else { "FAIL" };
                s.push_str(&format!("{}\t{:.3e}\t{}\n", r.name, r.max_rel_error, status));
            }
            s.into_bytes()
        }
    };
    emit(cfg, &bytes)?;
    if !failed.is_empty() {
        bail!("gradient checks above {GRAD_TOLERANCE:e}: {}", failed.join(", "));
    }
    Ok(())
}

fn synth(cfg: &RunConfig, slides: usize, tokens: usize) -> Result<()> {
    if slides == 0 || tokens == 0 {
        bail!(InputError("--slides and --tokens must be positive".into()));
    }
    let c = generate_synthetic_corpus(cfg.seed, slides, tokens);
    emit(cfg, &corpus_bytes(&c, cfg.format)?)
}
