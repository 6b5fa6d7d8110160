mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use punctrest::batcher::{group_sentences, mark_trivial_finals, plan_dataset, MAX_GROUP, MIN_GROUP};
use punctrest::corpus::{
    dataset_stats, extract_labels_from_text, normalize_text, split_dataset, Dataset, Document, LabeledWord, Sentence,
    SplitConfig,
};
use punctrest::eval::{confusion, debias_batch_final, metrics, ConfusionMatrix4};
use punctrest::humaneval::{cohort_stats, generate_tests_sized, score_annotation, AnnotatedReturn};
use punctrest::tagger::{
    argmax, export_logits, loss_and_grad, predict, read_logit_file, softmax, train,
    write_logit_file, ContextWindowModel, ReplayBackend, TrainingConfig,
};
use punctrest::tokenizer::{apply_tags, encode_compound, wordpiece_tokenize, Encoded, EncodedSequence, UNK};
use punctrest::{PunctClass, MASK_LABEL};

use common::{gradient_check, letter_vocab, random_model, random_sequences};

fn class() -> impl Strategy<Value = PunctClass> {
    prop_oneof![
        6 => Just(PunctClass::Empty),
        2 => Just(PunctClass::Period),
        2 => Just(PunctClass::Comma),
        1 => Just(PunctClass::Question),
    ]
}

const ALPHABET: &[char] = &['a', 'b', 'd', 'e', 'k', 'l', 'n', 'r', 's', 't', 'å', 'ä', 'ö', '2', '7'];

fn plain_word() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(ALPHABET), 1..8).prop_map(|cs| cs.into_iter().collect())
}

fn sentence() -> impl Strategy<Value = Sentence> {
    (prop::collection::vec((plain_word(), class()), 1..8), prop_oneof![Just(PunctClass::Period), Just(PunctClass::Question)])
        .prop_map(|(mut ws, end)| {
            ws.last_mut().unwrap().1 = end;
            Sentence::new(ws.into_iter().map(|(w, l)| LabeledWord::new(w, l)).collect())
        })
}

fn dataset() -> impl Strategy<Value = Dataset> {
    prop::collection::vec(prop::collection::vec(sentence(), 0..30), 1..12).prop_map(|docs| {
        Dataset::new(
            docs.into_iter()
                .enumerate()
                .map(|(i, sentences)| Document { id: format!("doc{i:02}"), sentences })
                .collect(),
        )
    })
}

fn vocab_word() -> impl Strategy<Value = String> {
    prop_oneof![
        20 => "[a-e]{1,12}",
        3 => "[a-ez]{1,6}",
        1 => "[a-e]{99,104}",
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn normalize_is_idempotent(s in any::<String>()) {
        let once = normalize_text(&s);
        prop_assert_eq!(normalize_text(&once), once);
    }

    #[test]
    fn normalize_is_idempotent_on_marked_text(s in "[A-Za-zÅÄÖåäö#;!\"\\- \t\n\r,.?:]{0,60}") {
        let once = normalize_text(&s);
        prop_assert_eq!(normalize_text(&once), once.clone());
        prop_assert!(!once.contains(['#', ';', '!', '"', '-']));
        prop_assert!(!once.contains(" ,") && !once.contains("\t,"));
    }

    #[test]
    fn normalize_leaves_nothing_to_lowercase(s in any::<String>()) {
        let out = normalize_text(&s);
        prop_assert!(!out.contains(['#', ';', '!', '"']));
        for c in out.chars() {
            let lower: String = c.to_lowercase().collect();
            prop_assert_eq!(lower, c.to_string());
        }
    }

    #[test]
    fn extract_inverts_apply_tags(pairs in prop::collection::vec((plain_word(), class()), 1..40)) {
        let words: Vec<&str> = pairs.iter().map(|(w, _)| w.as_str()).collect();
        let tags: Vec<PunctClass> = pairs.iter().map(|(_, t)| *t).collect();
        let text = apply_tags(&words, &tags).unwrap();
        let back: Vec<(String, PunctClass)> = extract_labels_from_text(&normalize_text(&text))
            .words()
            .map(|w| (w.word.clone(), w.label))
            .collect();
        prop_assert_eq!(back, pairs);
    }

    #[test]
    fn encoding_invariants(words in prop::collection::vec((vocab_word(), class()), 25..60), max_len in 8usize..200) {
        let vocab = letter_vocab();
        let labeled: Vec<LabeledWord> = words.iter().map(|(w, l)| LabeledWord::new(w.clone(), *l)).collect();
        for w in &labeled {
            let pieces = wordpiece_tokenize(&w.word, &vocab);
            if pieces.len() == 1 && pieces[0].text == UNK {
                prop_assert!(w.word.contains('z') || w.word.chars().count() > 100);
            } else {
                let joined: String = pieces.iter().map(|p| p.text.trim_start_matches("##")).collect();
                prop_assert_eq!(&joined, &w.word);
            }
        }
        match encode_compound(&labeled, &vocab, max_len).unwrap() {
            Encoded::Sequence(seq) => {
                prop_assert_eq!(seq.len(), max_len);
                prop_assert_eq!(seq.labels.iter().filter(|&&l| l != MASK_LABEL).count(), labeled.len());
                let expected: Vec<PunctClass> = labeled.iter().map(|w| w.label).collect();
                prop_assert_eq!(seq.word_labels(), expected);
                let sep = seq.sep_position();
                prop_assert!(seq.attention_mask[..=sep].iter().all(|&m| m == 1));
                prop_assert!(seq.attention_mask[sep + 1..].iter().all(|&m| m == 0));
            }
            Encoded::Dropped { positions } => prop_assert!(positions > max_len),
        }
    }

    #[test]
    fn softmax_properties(z in prop::array::uniform4(-50.0f64..50.0), shift in -1000.0f64..1000.0) {
        let p = softmax(&z);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let q = softmax(&z.map(|v| v + shift));
        for c in 0..4 {
            prop_assert!((p[c] - q[c]).abs() < 1e-12);
        }
        prop_assert_eq!(argmax(&p), argmax(&q));
    }

    #[test]
    fn debias_never_adds_true_positives(
        pairs in prop::collection::vec((class(), class()), 1..200),
        excluded in prop::collection::btree_set(0usize..200, 0..40),
    ) {
        let gold: Vec<PunctClass> = pairs.iter().map(|p| p.0).collect();
        let pred: Vec<PunctClass> = pairs.iter().map(|p| p.1).collect();
        let full = confusion(&gold, &pred).unwrap();
        prop_assert_eq!(debias_batch_final(&gold, &pred, &[]).unwrap(), full);
        let ex: Vec<usize> = excluded.into_iter().filter(|&i| i < gold.len()).collect();
        let reduced = debias_batch_final(&gold, &pred, &ex).unwrap();
        for c in PunctClass::ALL {
            prop_assert!(reduced.true_positives(c) <= full.true_positives(c));
        }
        prop_assert_eq!(reduced.total() as usize, gold.len() - ex.len());
    }

    #[test]
    fn matrix_identities_and_scale(rows in prop::array::uniform4(prop::array::uniform4(0u64..500)), k in 1u64..50) {
        let m = ConfusionMatrix4::from_rows(rows);
        prop_assume!(m.total() > 0);
        let tp: u64 = PunctClass::ALL.iter().map(|&c| m.true_positives(c)).sum();
        prop_assert_eq!(tp, m.trace());
        for c in PunctClass::ALL {
            prop_assert_eq!(m.true_positives(c) + m.false_positives(c), m.row_sum(c));
            prop_assert_eq!(m.true_positives(c) + m.false_negatives(c), m.col_sum(c));
        }
        let r = metrics(&m).unwrap();
        prop_assert_eq!(r.accuracy, m.trace() as f64 / m.total() as f64);
        let scaled = metrics(&ConfusionMatrix4::from_rows(rows.map(|row| row.map(|v| v * k)))).unwrap();
        for c in PunctClass::ALL {
            let (a, b) = (r.class(c), scaled.class(c));
            prop_assert!((a.precision - b.precision).abs() < 1e-12);
            prop_assert!((a.recall - b.recall).abs() < 1e-12);
            prop_assert!((a.f1 - b.f1).abs() < 1e-12);
        }
        prop_assert!((r.accuracy - scaled.accuracy).abs() < 1e-12);
    }

}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn stats_ignore_document_order(ds in dataset(), seed in any::<u64>()) {
        let mut docs = ds.documents.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rand::seq::SliceRandom::shuffle(&mut docs[..], &mut rng);
        prop_assert_eq!(dataset_stats(&Dataset::new(docs)), dataset_stats(&ds));
    }

    #[test]
    fn split_is_seeded_and_sized(ds in dataset(), seed in any::<u64>()) {
        let cfg = SplitConfig { train_fraction: 0.8, seed };
        let a = split_dataset(&ds, &cfg).unwrap();
        let b = split_dataset(&ds, &cfg).unwrap();
        prop_assert_eq!(&a, &b);
        let n = ds.len() as f64;
        let t = a.train.len() as f64;
        prop_assert!(t == (0.8 * n).floor() || t == (0.8 * n).ceil());
        prop_assert_eq!(a.train.len() + a.test.len(), ds.len());
    }

    #[test]
    fn plans_partition_sentences(ds in dataset(), seed in any::<u64>()) {
        let plan = plan_dataset(&ds, seed);
        let flat: Vec<Sentence> = plan
            .compounds(&ds)
            .unwrap()
            .iter()
            .flat_map(|c| c.sentences.iter().cloned())
            .collect();
        let original: Vec<Sentence> = ds.documents.iter().flat_map(|d| d.sentences.iter().cloned()).collect();
        prop_assert_eq!(flat, original);
        for doc in &ds.documents {
            let groups: Vec<_> = plan.groups.iter().filter(|g| g.doc_id == doc.id).collect();
            for (i, g) in groups.iter().enumerate() {
                if i + 1 < groups.len() {
                    prop_assert!((MIN_GROUP..=MAX_GROUP).contains(&g.size));
                } else {
                    prop_assert!(g.size <= MAX_GROUP && g.size >= 1);
                }
            }
        }
        prop_assert_eq!(mark_trivial_finals(&plan).len(), plan.len());
        prop_assert_eq!(plan_dataset(&ds, seed), plan);
    }

    #[test]
    fn human_tests_partition_the_stream(ds in dataset(), size in 1usize..40) {
        let tests = generate_tests_sized(&ds, size);
        let stream: Vec<String> = ds.words().map(|w| w.word.clone()).collect();
        let joined: Vec<String> = tests.iter().flat_map(|t| t.words.iter().cloned()).collect();
        prop_assert_eq!(joined, stream);
        for (i, t) in tests.iter().enumerate() {
            prop_assert_eq!(t.id, i + 1);
            if i + 1 < tests.len() {
                prop_assert_eq!(t.words.len(), size);
            }
            prop_assert!(t.words.iter().all(|w| !w.contains(['.', ',', '?'])));
        }
    }

    #[test]
    fn scoring_ignores_whitespace_and_pools_by_sum(ds in dataset(), seps in prop::collection::vec(prop_oneof![Just(" "), Just("  "), Just("\n"), Just("\t "), Just("\r\n")], 1..8)) {
        let tests = generate_tests_sized(&ds, 15);
        prop_assume!(!tests.is_empty());
        let mut reports = Vec::new();
        for t in &tests {
            let mut text = String::new();
            for (i, (w, g)) in t.words.iter().zip(&t.gold).enumerate() {
                if i > 0 {
                    text.push_str(seps[i % seps.len()]);
                }
                text.push_str(w);
                if let Some(m) = g.mark() {
                    text.push(m);
                }
            }
            let r = score_annotation(t, &AnnotatedReturn { test_id: t.id, text }).unwrap();
            prop_assert_eq!(r.matrix.trace(), t.words.len() as u64);
            reports.push(r);
        }
        let stats = cohort_stats(&reports).unwrap();
        let pooled: ConfusionMatrix4 = reports.iter().map(|r| r.matrix).sum();
        prop_assert_eq!(stats.pooled, pooled);
        prop_assert_eq!(stats.pooled_report, metrics(&pooled).unwrap());
        prop_assert_eq!(stats.pooled_gold_counts, dataset_stats(&ds));
    }
}

#[test]
fn gradient_matches_central_differences() {
    let g = gradient_check(11, 6, 40);
    assert!(g.coordinates >= 200);
    assert!(g.nonzero >= 100, "too few informative coordinates: {}", g.nonzero);
    assert!(g.max_rel_error < 1e-4, "max relative error {}", g.max_rel_error);
}

#[test]
fn predictions_cover_exactly_the_words() {
    let vocab = letter_vocab();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut model = random_model(&mut rng, 2, 64);
    for seq in random_sequences(&mut rng, &vocab, 50) {
        assert_eq!(predict(&mut model, &seq).unwrap().len(), seq.word_count());
    }
}

#[test]
fn replaying_exported_logits_reproduces_predictions() {
    let vocab = letter_vocab();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let mut model = random_model(&mut rng, 2, 64);
        let seqs = random_sequences(&mut rng, &vocab, 8);
        let records = export_logits(&mut model, &seqs).unwrap();
        let mut buf = Vec::new();
        write_logit_file(&mut buf, &records).unwrap();
        let mut replay = ReplayBackend::new(read_logit_file(&buf[..], "mem").unwrap());
        for seq in &seqs {
            assert_eq!(predict(&mut replay, seq).unwrap(), predict(&mut model, seq).unwrap());
        }
        assert_eq!(replay.remaining(), 0);
    }
}

#[test]
fn full_batch_loss_never_increases_on_separable_data() {
    let vocab = letter_vocab();
    // label is a function of the word itself
    let label_of = |w: &str| match w {
        "a" => PunctClass::Period,
        "b" => PunctClass::Comma,
        "c" => PunctClass::Question,
        _ => PunctClass::Empty,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let data: Vec<EncodedSequence> = (0..20)
        .map(|_| {
            let words: Vec<LabeledWord> = (0..rng.gen_range(2..8))
                .map(|_| {
                    let w = ["a", "b", "c", "d", "e"][rng.gen_range(0..5)];
                    LabeledWord::new(w, label_of(w))
                })
                .collect();
            encode_compound(&words, &vocab, 32).unwrap().sequence().unwrap()
        })
        .collect();
    let cfg = TrainingConfig {
        learning_rate: 0.5,
        momentum: 0.0,
        epochs: 30,
        batch_size: data.len(),
        seed: 1,
        class_weights: None,
    };
    let out = train(ContextWindowModel::new(1, 1024, 0).unwrap(), &data, &cfg).unwrap();
    let mut prev = out.initial_loss;
    for &l in &out.epoch_losses {
        assert!(l <= prev + 1e-12, "loss went up: {prev} -> {l}");
        prev = l;
    }
    assert!(prev < out.initial_loss * 0.5);
    let (loss, _) = loss_and_grad(&out.model, &data).unwrap();
    assert!((loss - prev).abs() < 1e-12);
}

#[test]
fn different_seeds_give_different_plans() {
    let text: String = (0..120).map(|i| format!("ord{i} slut{i}. ")).collect();
    let sentences = extract_labels_from_text(&text).sentences;
    let a = group_sentences("d", &sentences, 1);
    let b = group_sentences("d", &sentences, 2);
    assert_ne!(a, b);
}

#[test]
fn ten_thousand_tokenized_words_round_trip() {
    let vocab = letter_vocab();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let alphabet = ['a', 'b', 'c', 'd', 'e', 'z'];
    let mut unk = 0;
    for _ in 0..10_000 {
        let len = rng.gen_range(1..15);
        let w: String = (0..len).map(|_| alphabet[rng.gen_range(0..6)]).collect();
        let pieces = wordpiece_tokenize(&w, &vocab);
        if w.contains('z') {
            assert_eq!(pieces.len(), 1);
            assert_eq!(pieces[0].text, UNK);
            unk += 1;
        } else {
            let joined: String = pieces.iter().map(|p| p.text.trim_start_matches("##")).collect();
            assert_eq!(joined, w);
            assert!(pieces.iter().skip(1).all(|p| p.is_continuation));
        }
    }
    assert!(unk > 0);
}
