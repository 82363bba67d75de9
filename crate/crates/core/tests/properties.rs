use std::collections::HashSet;

use ndarray::Array2;
use posprobe_core::analysis::{bigram_surprisal, crossover, head_rel_surprisal, ErrorSet, Smoothing, TagCounts};
use posprobe_core::evaluation::{attachment_scores, tagging_accuracy, PredictedTree};
use posprobe_core::masking::{condition_token, TagScheme};
use posprobe_core::model::{decode_heads, is_tree, Decoder};
use posprobe_core::tags::{TagSymbol, Upos};
use posprobe_core::treebank::{parse_conllu, write_conllu, Sentence, Split, Token, Treebank};
use proptest::prelude::*;

fn upos() -> impl Strategy<Value = Upos> {
    (0..Upos::COUNT).prop_map(|i| Upos::from_index(i).unwrap())
}

/// Heads of a random tree over `n` tokens: token `k` (in a shuffled order)
/// attaches to one of the tokens placed before it, the first to the root.
fn tree(n: usize) -> impl Strategy<Value = Vec<usize>> {
    (Just((1..=n).collect::<Vec<_>>()).prop_shuffle(), prop::collection::vec(any::<prop::sample::Index>(), n)).prop_map(
        move |(order, picks)| {
            let mut heads = vec![0; n];
            for k in 1..n {
                heads[order[k] - 1] = order[picks[k].index(k)];
            }
            heads
        },
    )
}

fn sentence() -> impl Strategy<Value = Sentence> {
    (1usize..10)
        .prop_flat_map(|n| (tree(n), prop::collection::vec((upos(), "[a-z]{1,4}", 0usize..3), n)))
        .prop_map(|(heads, toks)| {
            let tokens = heads
                .iter()
                .zip(toks)
                .enumerate()
                .map(|(i, (&h, (tag, form, rel)))| {
                    let rel = if h == 0 { "root" } else { ["nsubj", "obj", "det"][rel] };
                    Token::new(i + 1, &form, tag, h, rel)
                })
                .collect();
            Sentence::from_tokens("s", tokens)
        })
}

fn treebank() -> impl Strategy<Value = Treebank> {
    prop::collection::vec(sentence(), 1..6).prop_map(|mut s| {
        for (i, sent) in s.iter_mut().enumerate() {
            sent.sent_id = format!("s{i}");
            sent.comments = vec![format!("# sent_id = s{i}")];
        }
        Treebank::new("p", Split::Test, s).unwrap()
    })
}

/// A treebank with predictions replacing each tag with probability ~1/3.
fn with_predictions() -> impl Strategy<Value = (Treebank, Vec<Vec<Upos>>)> {
    treebank().prop_flat_map(|tb| {
        let shape: Vec<usize> = tb.sentences.iter().map(Sentence::len).collect();
        let preds = shape
            .into_iter()
            .map(|n| prop::collection::vec(prop::option::weighted(0.33, upos()), n))
            .collect::<Vec<_>>();
        (Just(tb), preds).prop_map(|(tb, preds)| {
            let tags = tb
                .sentences
                .iter()
                .zip(preds)
                .map(|(s, p)| s.tokens.iter().zip(p).map(|(t, o)| o.unwrap_or(t.upos)).collect())
                .collect();
            (tb, tags)
        })
    })
}

proptest! {
    #[test]
    fn conllu_round_trip(tb in treebank()) {
        let text = write_conllu(&tb, None).unwrap();
        let back = parse_conllu(&text, "p", Split::Test).unwrap();
        prop_assert_eq!(back.sentences, tb.sentences);
    }

    #[test]
    fn crossover_is_set_algebra((tb, a) in with_predictions(), b_seed in any::<u64>()) {
        let b: Vec<Vec<Upos>> = a.iter().enumerate()
            .map(|(i, row)| row.iter().enumerate().map(|(j, &t)| {
                if (b_seed >> ((i * 7 + j) % 64)) & 1 == 1 { Upos::from_index((t.index() + 1) % Upos::COUNT).unwrap() } else { t }
            }).collect())
            .collect();
        let ea = ErrorSet::from_predictions(&tb, &a).unwrap();
        let eb = ErrorSet::from_predictions(&tb, &b).unwrap();
        let x = crossover(&ea, &eb);
        prop_assert_eq!(x.union, ea.len() + eb.len() - x.both);
        prop_assert_eq!(x.only_a + x.both, ea.len());
        prop_assert_eq!(x.only_b + x.both, eb.len());
        let pa: HashSet<_> = ea.positions().collect();
        let pb: HashSet<_> = eb.positions().collect();
        prop_assert_eq!(x.both, pa.intersection(&pb).count());
        let swapped = crossover(&eb, &ea);
        prop_assert_eq!((swapped.only_a, swapped.only_b, swapped.both), (x.only_b, x.only_a, x.both));
    }

    #[test]
    fn micro_f1_equals_accuracy((tb, pred) in with_predictions()) {
        let counts = TagCounts::from_predictions(&pred, &tb).unwrap();
        let acc = tagging_accuracy(&pred, &tb).unwrap();
        prop_assert!((counts.micro_f1().unwrap() - acc).abs() < 1e-12);
        for s in counts.scores().values() {
            prop_assert!((0.0..=1.0).contains(&s.f1));
        }
    }

    #[test]
    fn las_never_exceeds_uas(tb in treebank(), noise in prop::collection::vec(0usize..4, 60)) {
        let mut k = 0;
        let trees: Vec<PredictedTree> = tb.sentences.iter().map(|s| {
            let mut t = PredictedTree { heads: s.heads(), relations: s.tokens.iter().map(|t| t.deprel.clone()).collect() };
            for i in 0..s.len() {
                match noise[k % noise.len()] {
                    1 => t.heads[i] = (t.heads[i] + 1) % (s.len() + 1),
                    2 => t.relations[i] = "dep".into(),
                    _ => {}
                }
                k += 1;
            }
            t
        }).collect();
        let score = attachment_scores(&trees, &tb).unwrap();
        prop_assert!(score.las <= score.uas);
        prop_assert!(score.correct_labeled <= score.correct_heads);
    }

    #[test]
    fn surprisal_ignores_sentence_order(train in treebank(), (target, pred) in with_predictions(), smooth in any::<bool>()) {
        let smoothing = if smooth { Smoothing::AddOne } else { Smoothing::Unsmoothed };
        let errors = ErrorSet::from_predictions(&target, &pred).unwrap();
        let mut rev = target.clone();
        rev.sentences.reverse();
        let mut rev_pred = pred.clone();
        rev_pred.reverse();
        let rev_errors = ErrorSet::from_predictions(&rev, &rev_pred).unwrap();
        let mut rev_train = train.clone();
        rev_train.sentences.reverse();
        if smooth {
            let a = bigram_surprisal(&train, &target, &errors, smoothing).unwrap();
            let b = bigram_surprisal(&rev_train, &rev, &rev_errors, smoothing).unwrap();
            prop_assert_eq!(a.mean_all, b.mean_all);
            prop_assert_eq!(a.mean_errors, b.mean_errors);
        }
        let a = head_rel_surprisal(&target, &target, &errors, smoothing).unwrap();
        let b = head_rel_surprisal(&rev, &rev, &rev_errors, smoothing).unwrap();
        prop_assert_eq!(a.mean_all, b.mean_all);
        prop_assert_eq!(a.mean_errors, b.mean_errors);
        prop_assert!(a.mean_all >= 0.0);
    }

    #[test]
    fn condition_token_follows_table(gold in upos(), pred in upos(), is_error in any::<bool>()) {
        use TagSymbol::{Mask, Tag};
        prop_assert_eq!(condition_token(TagScheme::None, gold, Some(pred), is_error), None);
        prop_assert_eq!(condition_token(TagScheme::Gold, gold, Some(pred), is_error), Some(Tag(gold)));
        prop_assert_eq!(condition_token(TagScheme::Pred, gold, Some(pred), is_error), Some(Tag(pred)));
        let shown = if is_error { Tag(gold) } else { Mask };
        prop_assert_eq!(condition_token(TagScheme::MaskAllButTaggerErrors, gold, Some(pred), is_error), Some(shown));
        prop_assert_eq!(condition_token(TagScheme::MaskAllButProbeErrors, gold, None, is_error), Some(shown));
        let hidden = if is_error { Mask } else { Tag(pred) };
        prop_assert_eq!(condition_token(TagScheme::MaskTaggerErrors, gold, Some(pred), is_error), Some(hidden));
        prop_assert_eq!(condition_token(TagScheme::Pred, gold, None, is_error), None);
    }

    #[test]
    fn decoded_heads_form_a_tree(n in 1usize..14, values in prop::collection::vec(-50.0f64..50.0, 14 * 15)) {
        let scores = Array2::from_shape_fn((n, n + 1), |(i, j)| values[i * 15 + j]);
        let heads = decode_heads(&scores, Decoder::Mst);
        prop_assert_eq!(heads.len(), n);
        prop_assert!(is_tree(&heads));
    }

    #[test]
    fn decoder_keeps_valid_greedy_trees(heads in (1usize..10).prop_flat_map(tree)) {
        let n = heads.len();
        let scores = Array2::from_shape_fn((n, n + 1), |(i, j)| if heads[i] == j { 1.0 } else { 0.0 });
        prop_assert_eq!(decode_heads(&scores, Decoder::Mst), heads.clone());
        prop_assert_eq!(decode_heads(&scores, Decoder::Greedy), heads);
    }
}
