use super::*;
use crate::corpus::{generate_synthetic_corpus, Split};
use crate::eval::{average_match, MatchConfig};
use crate::features::corpus_feature_vectors;

fn dataset(c: &Corpus) -> Dataset<'_> {
    Dataset::new(c, corpus_feature_vectors(c, None).unwrap(), None).unwrap()
}

fn reduced(head: Head, vocab: &Vocabularies) -> CharWordConfig {
    CharWordConfig {
        char_embedding_dim: 16,
        char_hidden: 32,
        word_embedding_dim: 16,
        word_bilstm_hidden: 32,
        head,
        ..CharWordConfig::default()
    }
    .with_vocab(vocab)
}

fn tiny_model(head: Head, c: &Corpus, seed: u64) -> TrainedModel {
    let vocab = Vocabularies::from_corpus(c);
    build_char_word_model(&tiny_char_word_config(head).with_vocab(&vocab), vocab, seed).unwrap()
}

/// Shape accounting for the CharWord layout, layer by layer.
fn char_word_param_count(c: &CharWordConfig) -> usize {
    let lstm = |input: usize, h: usize| input * 4 * h + h * 4 * h + 4 * h;
    let char_dim = 2 * c.char_hidden;
    let attn = 2 * c.word_bilstm_hidden;
    c.word_vocab_size * c.word_embedding_dim
        + c.char_vocab_size * c.char_embedding_dim
        + 2 * lstm(c.char_embedding_dim, c.char_hidden)
        + c.highway_layers * 2 * (char_dim * char_dim + char_dim)
        + 2 * lstm(c.word_embedding_dim + char_dim, c.word_bilstm_hidden)
        + 3 * attn * attn
        + (attn + c.feature_dim) * c.dense_hidden
        + c.dense_hidden
        + c.dense_hidden * c.head.units()
        + c.head.units()
}

#[test]
fn default_parameter_count() {
    let vocab = Vocabularies::from_lists(
        (0..49).map(|i| format!("w{i}")).collect(),
        "abcdefghijklmnopqrstuvwxyz0123".chars().take(29).collect(),
    );
    let cfg = CharWordConfig::default().with_vocab(&vocab);
    assert_eq!((cfg.word_vocab_size, cfg.char_vocab_size), (50, 30));
    let m = build_char_word_model(&cfg, vocab, 0).unwrap();
    let n = m.params().scalar_count();
    assert_eq!(n, char_word_param_count(&cfg));
    assert_eq!(n, 9_821_185);
}

#[test]
fn build_determinism_and_heads() {
    let c = generate_synthetic_corpus(2, 3, 6);
    let a = tiny_model(Head::Softmax, &c, 9);
    let b = tiny_model(Head::Softmax, &c, 9);
    assert_eq!(a.params(), b.params());
    assert_ne!(a.params(), tiny_model(Head::Softmax, &c, 10).params());
    let out = |m: &TrainedModel| {
        let id = m.params().id_of("output.weight").unwrap();
        m.params().get(id).tensor.shape().to_vec()
    };
    assert_eq!(out(&a), vec![5, 2]);
    assert_eq!(out(&tiny_model(Head::Sigmoid, &c, 9)), vec![5, 1]);
    let counted = tiny_char_word_config(Head::Softmax).with_vocab(a.vocab().unwrap());
    assert_eq!(a.params().scalar_count(), char_word_param_count(&counted));

    let bad = CharWordConfig {
        dropout_rate: 1.0,
        ..counted.clone()
    };
    assert!(build_char_word_model(&bad, a.vocab().unwrap().clone(), 0).is_err());
    let wrong_vocab = CharWordConfig {
        word_vocab_size: 3,
        ..counted
    };
    assert!(build_char_word_model(&wrong_vocab, a.vocab().unwrap().clone(), 0).is_err());
}

fn embeddings_for(c: &Corpus, dim: usize, seed: u64) -> ExternalEmbeddings {
    use rand::Rng;
    let mut rng = init_rng(seed);
    let mut e = ExternalEmbeddings::new("random", dim).unwrap();
    for s in c.slides() {
        for t in 0..s.len() {
            e.insert(s.id(), t, (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .unwrap();
        }
    }
    e
}

#[test]
fn external_model_layout_and_errors() {
    let c = generate_synthetic_corpus(3, 2, 5);
    let emb = embeddings_for(&c, 6, 1);
    let cfg = ExternalEmbConfig {
        bilstm_layers: 1,
        dense_layers: 1,
        bilstm_hidden: 4,
        dense_hidden: 3,
        ..ExternalEmbConfig::new(6)
    };
    let m = build_external_emb_model(&cfg, &emb, 0).unwrap();
    let names: Vec<&str> = m.params().iter().map(|(_, p)| p.name.as_str()).collect();
    assert_eq!(
        names,
        vec![
            "bilstm.0.fwd.w_input",
            "bilstm.0.fwd.w_hidden",
            "bilstm.0.fwd.bias",
            "bilstm.0.bwd.w_input",
            "bilstm.0.bwd.w_hidden",
            "bilstm.0.bwd.bias",
            "dense.0.weight",
            "dense.0.bias",
            "output.weight",
            "output.bias"
        ]
    );

    let err = build_external_emb_model(&ExternalEmbConfig::new(7), &emb, 0).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains('7') && msg.contains('6'), "{msg}");

    // default config on a 5-token slide
    let m = build_external_emb_model(&ExternalEmbConfig::new(6), &emb, 0).unwrap();
    let data = Dataset::new(&c, corpus_feature_vectors(&c, None).unwrap(), Some(&emb)).unwrap();
    let out = m.forward(&data.input(0), false, &mut init_rng(0)).unwrap();
    assert_eq!(out.len(), 5);
    assert!(m.predict(&dataset(&c)).is_err());

    let mut partial = ExternalEmbeddings::new("partial", 6).unwrap();
    partial.insert(c.slides()[0].id(), 0, vec![0.0; 6]).unwrap();
    let err = Dataset::new(&c, corpus_feature_vectors(&c, None).unwrap(), Some(&partial)).unwrap_err();
    assert!(matches!(err, Error::Lookup { position: 1, .. }));
}

#[test]
fn forward_contracts() {
    let c = generate_synthetic_corpus(4, 4, 7);
    let data = dataset(&c);
    let m = tiny_model(Head::Softmax, &c, 1);
    for i in 0..data.len() {
        let out = m.forward(&data.input(i), false, &mut init_rng(0)).unwrap();
        for t in 0..out.len() {
            let row = out.probs.row(t);
            assert!((row[0] + row[1] - 1.0).abs() < 1e-9);
        }
    }
    let one = Corpus::new(
        Split::Test,
        vec![Slide::from_sentences("one", &[vec!["Hello"]], None).unwrap()],
    )
    .unwrap();
    let one_data = dataset(&one);
    assert_eq!(m.forward(&one_data.input(0), false, &mut init_rng(0)).unwrap().len(), 1);

    // dropout on: differs between draws; off: ignores the rng
    let x = data.input(0);
    let a = m.forward(&x, true, &mut init_rng(1)).unwrap();
    let b = m.forward(&x, true, &mut init_rng(2)).unwrap();
    assert_ne!(a, b);
    assert_eq!(
        m.forward(&x, false, &mut init_rng(1)).unwrap(),
        m.forward(&x, false, &mut init_rng(2)).unwrap()
    );
}

#[test]
fn forward_golden_value() {
    let c = generate_synthetic_corpus(5, 1, 4);
    let data = dataset(&c);
    let m = tiny_model(Head::Sigmoid, &c, 42);
    let out = m.forward(&data.input(0), false, &mut init_rng(0)).unwrap();
    let golden = [
        0.630_464_450_506_860_3,
        0.570_632_968_064_674_3,
        0.540_785_248_409_569_2,
        0.534_021_353_857_798_7,
    ];
    for (got, want) in out.emphasis_scores().iter().zip(golden) {
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }
}

#[test]
fn softmax_shift_invariance() {
    let c = generate_synthetic_corpus(6, 2, 6);
    let data = dataset(&c);
    let m = tiny_model(Head::Softmax, &c, 3);
    let x = data.input(1);
    let mut tape = Tape::new();
    let mut rng = init_rng(0);
    let z = m.logits_on(m.params(), &mut tape, &x, false, &mut rng).unwrap();
    let p = m.activate(&mut tape, z).unwrap();
    for shift in [-7.5, 0.3, 40.0] {
        let k = tape.leaf(Tensor::matrix(1, 2, vec![shift, shift]).unwrap());
        let shifted = tape.add(z, k).unwrap();
        let q = m.activate(&mut tape, shifted).unwrap();
        for (a, b) in tape.value(p).data().iter().zip(tape.value(q).data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn kld_loss_zero_for_perfect_model() {
    let slide = Slide::from_sentences(
        "z",
        &[vec!["a", "b", "c"]],
        Some(vec![AnnotationSet::from_strs(&["O"; 8]).unwrap(); 3]),
    )
    .unwrap();
    let c = Corpus::new(Split::Train, vec![slide]).unwrap();
    let data = dataset(&c);
    let mut m = tiny_model(Head::Softmax, &c, 0);
    let store = m.params_mut();
    let w = store.id_of("output.weight").unwrap();
    store.get_mut(w).tensor.data_mut().fill(0.0);
    let b = store.id_of("output.bias").unwrap();
    store.get_mut(b).tensor.data_mut().copy_from_slice(&[60.0, -60.0]);
    let mut tape = Tape::new();
    let loss = slide_loss(&m, m.params(), &mut tape, &data.input(0), &[0.0; 3], LossKind::Kld, false, &mut init_rng(0))
        .unwrap();
    // the only residue is the 1 − 1e-7 upper clamp on the predicted mass
    assert!(tape.scalar(loss).abs() < 2e-7);
}

use crate::corpus::AnnotationSet;

#[test]
fn gradients_match_finite_differences() {
    for seed in [0, 1, 2] {
        for r in model_grad_checks(seed).unwrap() {
            assert!(r.max_rel_error < 1e-4, "{} seed {seed}: {}", r.name, r.max_rel_error);
        }
    }
}

fn quick_config(loss: LossKind, epochs: usize) -> TrainingConfig {
    TrainingConfig {
        epochs,
        ..TrainingConfig::new(loss, 1e-3, 11)
    }
}

#[test]
fn training_reduces_loss_and_is_reproducible() {
    let c = generate_synthetic_corpus(1, 50, 12);
    let data = dataset(&c);
    let vocab = Vocabularies::from_corpus(&c);
    let model = build_char_word_model(&reduced(Head::Sigmoid, &vocab), vocab, 5).unwrap();
    let tcfg = quick_config(LossKind::Bce, 30);
    let a = train(model.clone(), &data, None, &tcfg).unwrap();
    let losses = a.final_model.log().losses();
    assert_eq!(losses.len(), 30);
    assert!(losses[29] < losses[0], "{losses:?}");
    assert!(a.best_model.is_none());

    let short = quick_config(LossKind::Bce, 2);
    let b1 = train(model.clone(), &data, None, &short).unwrap();
    let b2 = train(model.clone(), &data, None, &short).unwrap();
    assert_eq!(b1, b2);

    // fixed order: permuting the slides changes the result
    let no_shuffle = TrainingConfig {
        shuffle: false,
        ..short.clone()
    };
    let mut slides = c.slides().to_vec();
    slides.reverse();
    let rc = Corpus::new(c.split(), slides).unwrap();
    let r1 = train(model.clone(), &data, None, &no_shuffle).unwrap();
    let r2 = train(model, &dataset(&rc), None, &no_shuffle).unwrap();
    assert_ne!(r1.final_model.params(), r2.final_model.params());
}

#[test]
fn training_preconditions() {
    let c = generate_synthetic_corpus(1, 3, 5);
    let data = dataset(&c);
    let m = tiny_model(Head::Sigmoid, &c, 0);
    assert!(matches!(
        train(m.clone(), &data, None, &quick_config(LossKind::Kld, 1)),
        Err(Error::Validation(_))
    ));
    let bare = Corpus::new(
        Split::Train,
        vec![Slide::from_sentences("u", &[vec!["x"]], None).unwrap()],
    )
    .unwrap();
    assert!(matches!(
        train(m.clone(), &dataset(&bare), None, &quick_config(LossKind::Bce, 1)),
        Err(Error::Precondition(_))
    ));
    let zero_epochs = quick_config(LossKind::Bce, 0);
    assert!(train(m, &data, None, &zero_epochs).is_err());
}

#[test]
fn trained_model_uses_features_and_round_trips() {
    let c = generate_synthetic_corpus(8, 20, 10);
    let dev = generate_synthetic_corpus(9, 5, 10);
    let data = dataset(&c);
    let dev_data = dataset(&dev);
    let vocab = Vocabularies::from_corpus(&c);
    let model = build_char_word_model(&reduced(Head::Softmax, &vocab), vocab, 1).unwrap();
    let out = train(model, &data, Some(&dev_data), &quick_config(LossKind::Kld, 4)).unwrap();
    let best = out.best_model.as_ref().unwrap();
    let log = out.final_model.log();
    assert!(log.epochs.iter().all(|e| e.dev_average_match.is_some()));
    let best_epoch = log.best_epoch.unwrap();
    let best_score = log.epochs[best_epoch - 1].dev_average_match.unwrap();
    let rescored = average_match(&dev.gold().unwrap(), &best.predict(&dev_data).unwrap(), &MatchConfig::slide_level())
        .unwrap()
        .average;
    assert_eq!(rescored, best_score);

    let m = &out.final_model;
    let p1 = m.predict(&dev_data).unwrap();
    assert_eq!(p1, m.predict(&dev_data).unwrap());
    assert!(p1.iter().flat_map(|s| s.scores()).all(|v| (0.0..=1.0).contains(v)));
    let zeroed = m.predict(&dev_data.with_zero_features()).unwrap();
    assert_ne!(p1, zeroed);

    let raw = m.forward(&dev_data.input(0), false, &mut init_rng(0)).unwrap();
    for (t, s) in raw.emphasis_scores().iter().enumerate() {
        assert!((s + raw.probs.get(t, 0) - 1.0).abs() < 1e-12);
    }

    let ck = m.to_checkpoint().unwrap();
    assert_eq!(ck.architecture, "char_word");
    let mut bytes = Vec::new();
    ck.write(&mut bytes).unwrap();
    let mut again = Vec::new();
    m.to_checkpoint().unwrap().write(&mut again).unwrap();
    assert_eq!(bytes, again);
    let back = TrainedModel::from_checkpoint(&Checkpoint::read(&bytes[..]).unwrap()).unwrap();
    assert_eq!(&back, m);
    assert_eq!(back.predict(&dev_data).unwrap(), p1);
}

#[test]
fn external_checkpoint_round_trip() {
    let c = generate_synthetic_corpus(3, 4, 5);
    let emb = embeddings_for(&c, 4, 2);
    let cfg = ExternalEmbConfig {
        bilstm_hidden: 3,
        dense_hidden: 3,
        head: Head::Softmax,
        ..ExternalEmbConfig::new(4)
    };
    let m = build_external_emb_model(&cfg, &emb, 6).unwrap();
    let data = Dataset::new(&c, corpus_feature_vectors(&c, None).unwrap(), Some(&emb)).unwrap();
    let tcfg = TrainingConfig {
        epochs: 2,
        ..TrainingConfig::new(LossKind::Kld, TrainingConfig::EXTERNAL_EMB_LEARNING_RATE, 0)
    };
    let m = train(m, &data, None, &tcfg).unwrap().final_model;
    let ck = m.to_checkpoint().unwrap();
    assert_eq!(ck.architecture, "external_emb");
    let back = TrainedModel::from_checkpoint(&ck).unwrap();
    assert_eq!(back, m);
    assert_eq!(back.embedding_source(), Some("random"));

    let mut other = ck.clone();
    other.architecture = "transformer".into();
    assert!(TrainedModel::from_checkpoint(&other).is_err());
}
