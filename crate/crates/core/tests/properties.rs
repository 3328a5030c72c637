mod common;

use common::*;
use propmatch_core::corpus::{parse_conllu, serialize_conllu, trees_equal, Corpus, Document, Sentence};
use propmatch_core::embedding::{cosine, fit_tfidf, EmbeddingTable};
use propmatch_core::filter::{top_k, FastScorer, FilterKind, PropositionQuery};
use propmatch_core::models::{recast_snli, LRModel, SnliRecord};
use propmatch_core::pipeline::*;
use propmatch_core::tree_edit::*;
use proptest::prelude::*;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const WORDS: [&str; 12] = [
    "storm", "rain", "coast", "market", "price", "bank", "vote", "law", "court", "team", "city", "road",
];

fn table(seed: u64) -> EmbeddingTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entries: Vec<(String, Vec<f32>)> = WORDS
        .iter()
        .map(|w| (w.to_string(), (0..5).map(|_| rng.random_range(-1.0f32..1.0)).collect()))
        .collect();
    EmbeddingTable::from_entries(5, entries).unwrap()
}

fn text(rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(1..6);
    (0..n)
        .map(|_| *WORDS.choose(rng).unwrap())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Parsed sentences in two documents.
fn parsed_corpus(seed: u64, n: usize) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inv = Inventory::with_lemmas(8);
    let docs = (0..2)
        .map(|d| {
            let id = format!("d{d}");
            let sentences = (0..n)
                .map(|p| {
                    let tree = random_tree(5, &inv, &mut rng);
                    let tokens = tree.to_tokens();
                    let words: Vec<&str> = tokens.iter().map(|t| t.form.as_str()).collect();
                    let mut s = Sentence::from_text(format!("{id}:{p}"), p, words.join(" "));
                    s.attach_parse(tokens, tree);
                    s
                })
                .collect();
            Document {
                id,
                date: None,
                source: None,
                sentences,
            }
        })
        .collect();
    Corpus::new(docs).unwrap()
}

fn pair(seed: u64, max: usize) -> (propmatch_core::corpus::DepTree, propmatch_core::corpus::DepTree) {
    let inv = Inventory::with_lemmas(6);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (random_tree(max, &inv, &mut rng), random_tree(max, &inv, &mut rng))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn search_is_sound_and_deterministic(seed in any::<u64>()) {
        let (s, t) = pair(seed, 6);
        let cfg = SearchConfig::default();
        let before = s.canonical_hash();
        let a = find_edit_sequence(&s, &t, &cfg);
        let b = find_edit_sequence(&s, &t, &cfg);
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(s.canonical_hash(), before);
        if a.found {
            prop_assert!(trees_equal(&a.apply_to(&s).unwrap(), &t));
        }
    }

    #[test]
    fn apply_edit_leaves_input_alone(seed in any::<u64>()) {
        let inv = Inventory::small();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tree = random_tree(5, &inv, &mut rng);
        let before = tree.canonical_hash();
        for op in all_edits(&tree, &inv.labels()) {
            let _ = apply_edit(&tree, &op);
            prop_assert_eq!(tree.canonical_hash(), before);
        }
    }

    #[test]
    fn feature_counts_add_up(seed in any::<u64>(), tight in any::<bool>()) {
        let (s, t) = pair(seed, 6);
        let cfg = if tight {
            SearchConfig { beam_width: 2, max_expansions: 4, max_depth: Some(2) }
        } else {
            SearchConfig::default()
        };
        let seq = find_edit_sequence(&s, &t, &cfg);
        let f = extract_features(&seq, &s, &t);
        let v = f.values();
        prop_assert_eq!(v.len(), FEATURE_COUNT);
        prop_assert_eq!(v[0] as usize, seq.ops.len());
        prop_assert_eq!(v[1..10].iter().sum::<u32>(), v[0]);
        prop_assert_eq!(v[32], u32::from(seq.found));
    }

    #[test]
    fn conllu_round_trips(seed in any::<u64>()) {
        let inv = Inventory::with_lemmas(8);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tree = random_tree(8, &inv, &mut rng);
        let tokens = tree.to_tokens();
        let text = serialize_conllu([(Some("s:0"), tokens.as_slice())]);
        let parsed = parse_conllu(text.as_bytes()).unwrap();
        prop_assert_eq!(parsed.len(), 1);
        prop_assert_eq!(&parsed[0].tokens, &tokens);
        prop_assert!(trees_equal(&parsed[0].tree, &tree));
        // surface order is token order
        prop_assert_eq!(parsed[0].tree.in_order(), (0..tokens.len()).collect::<Vec<_>>());
    }

    #[test]
    fn averaging_ignores_word_order(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = table(seed);
        let sentence = text(&mut rng);
        let words: Vec<&str> = sentence.split(' ').collect();
        let mut shuffled = words.clone();
        rand::seq::SliceRandom::shuffle(shuffled.as_mut_slice(), &mut rng);
        let (a, b) = (t.average(words.iter().copied()), t.average(shuffled.iter().copied()));
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        prop_assert!((cosine(&a, &b).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn top_k_is_a_prefix_and_deterministic(seed in any::<u64>(), tfidf in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sentences = (0..30).map(|p| Sentence::from_text(format!("d:{p}"), p, text(&mut rng))).collect();
        let corpus = Corpus::new(vec![Document { id: "d".into(), date: None, source: None, sentences }]).unwrap();
        let t = table(seed);
        let model = fit_tfidf(&corpus).unwrap();
        let scorer = if tfidf { FastScorer::TfIdf(&model) } else { FastScorer::Averaging(&t) };
        let query = PropositionQuery::from_text("q", text(&mut rng)).unwrap();
        let full = top_k(&query, &corpus, scorer, corpus.len()).unwrap();
        prop_assert_eq!(&full, &top_k(&query, &corpus, scorer, corpus.len()).unwrap());
        for w in full.windows(2) {
            prop_assert!(w[0].fast_score >= w[1].fast_score);
        }
        for k in 1..corpus.len() {
            let cut = top_k(&query, &corpus, scorer, k).unwrap();
            prop_assert_eq!(&cut[..], &full[..k]);
        }
        if tfidf {
            for (_, s) in corpus.sentences() {
                let q = PropositionQuery::from_sentence("self", s).unwrap();
                let x = propmatch_core::filter::fast_score(&q, s, scorer);
                prop_assert!((x - 1.0).abs() <= 1e-9, "self score {}", x);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn full_width_cascade_ignores_the_filter(seed in any::<u64>(), n in 1usize..20) {
        let corpus = parsed_corpus(seed, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let t = {
            let inv = Inventory::with_lemmas(8);
            let entries: Vec<(String, Vec<f32>)> =
                inv.lemmas.iter().map(|w| (w.to_string(), (0..4).map(|_| rng.random_range(-1.0f32..1.0)).collect())).collect();
            EmbeddingTable::from_entries(4, entries).unwrap()
        };
        let tfidf = fit_tfidf(&corpus).unwrap();
        let lr = LRModel { weights: (0..FEATURE_COUNT).map(|_| rng.random_range(-0.5..0.5)).collect(), bias: 0.0 };
        let (_, qtree) = pair(seed, 5);
        let query = PropositionQuery::new("q".into(), "q".into(), qtree.to_tokens(), Some(qtree)).unwrap();
        let res = Resources {
            embeddings: Some(&t),
            tfidf: Some(&tfidf),
            lr: Some(&lr),
            lstm: None,
            search: SearchConfig::default(),
        };
        let k = corpus.len();
        let run = |filter, n| {
            let cfg = PipelineConfig { filter, reranker: RerankerKind::Lr, k, n };
            match_query(&query, &corpus, &cfg, &res).unwrap()
        };
        let strip = |ms: Vec<RankedMatch>| ms.into_iter().map(|m| (m.corpus_index, m.rerank_score)).collect::<Vec<_>>();
        let a = run(FilterKind::Averaging, n);
        let b = run(FilterKind::Tfidf, n);
        prop_assert!(a.len() <= n);
        prop_assert_eq!(strip(a.clone()), strip(b));
        let ranks: Vec<usize> = a.iter().map(|m| m.final_rank).collect();
        prop_assert_eq!(ranks, (1..=a.len()).collect::<Vec<_>>());
        // a larger n extends the list
        let longer = run(FilterKind::Averaging, (n + 3).min(k));
        prop_assert_eq!(&longer[..a.len()], &a[..]);
    }

    #[test]
    fn recall_grows_with_n(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let instances: Vec<RecallInstance> = (0..5)
            .map(|i| {
                let m = rng.random_range(1..10);
                let rec = RecallRecord {
                    query: text(&mut rng),
                    sentences: (0..m).map(|_| text(&mut rng)).collect(),
                    relevant: vec![rng.random_range(0..m)],
                };
                RecallInstance::from_record(&format!("r{i}"), rec).unwrap()
            })
            .collect();
        let t = table(seed);
        let rank = |q: &PropositionQuery, c: &Corpus| {
            Ok(top_k(q, c, FastScorer::Averaging(&t), c.len())?.into_iter().map(|s| s.corpus_index).collect())
        };
        let mut last = 0.0;
        for n in 1..12 {
            let r = recall_at_n(&instances, rank, n).unwrap();
            prop_assert!((0.0..=1.0).contains(&r));
            prop_assert!(r >= last);
            last = r;
        }
        prop_assert_eq!(last, 1.0);
    }

    #[test]
    fn recast_drops_only_unlabeled(labels in prop::collection::vec(0usize..4, 0..20)) {
        let names = ["entailment", "contradiction", "neutral", "-"];
        let records: Vec<SnliRecord> = labels
            .iter()
            .enumerate()
            .map(|(i, &l)| SnliRecord {
                gold_label: names[l].into(),
                sentence1: "a b".into(),
                sentence2: "a".into(),
                pair_id: format!("p{i}"),
            })
            .collect();
        let mut conllu = String::new();
        for r in &records {
            for side in ["premise", "hypothesis"] {
                conllu += &format!("# sent_id = {}:{side}\n1\ta\ta\tNOUN\t_\t_\t0\troot\t_\t_\n\n", r.pair_id);
            }
        }
        let pairs = recast_snli(&records, parse_conllu(conllu.as_bytes()).unwrap()).unwrap();
        let kept: Vec<bool> = labels.iter().filter(|&&l| l != 3).map(|&l| l == 0).collect();
        prop_assert_eq!(pairs.iter().map(|p| p.label).collect::<Vec<_>>(), kept);
    }
}
