//! Acceptance criteria, one PASS/FAIL line each. Set `ACCEPTANCE_ONLY=3,7`
//! to run a subset.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use ndarray::Array2;
use posprobe_core::analysis::errors::ErrorSet;
use posprobe_core::analysis::stats::{crossover, error_ratio, per_tag_f1};
use posprobe_core::analysis::surprisal::{
    bigram_surprisal, head_rel_surprisal, sentence_contexts, ContextKind, Smoothing, SurprisalModel,
};
use posprobe_core::embeddings::Pca;
use posprobe_core::evaluation::{attachment_scores, tagging_accuracy, PredictedTree};
use posprobe_core::masking::{build_conditioning, run_masking_experiment, Auxiliary, ConditioningInputs, MaskingConfig, Splits, TagScheme};
use posprobe_core::model::decode::chu_liu_edmonds;
use posprobe_core::model::{
    build_examples, parse_treebank, tag_treebank, tree_score, Decoder, EncoderConfig, HeadConfig, HeadKind, ModelConfig,
    ModelState, TrainConfig, Trainer,
};
use posprobe_core::nn::ParamGroup;
use posprobe_core::parallel::Exec;
use posprobe_core::probe::Probe;
use posprobe_core::synthetic::{generate, SyntheticConfig};
use posprobe_core::tags::{TagSymbol, Upos};
use posprobe_core::treebank::{parse_conllu, write_conllu, Sentence, Split, Token, Treebank};
use posprobe_core::vocab::Vocabulary;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = fn() -> Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($msg)+));
        }
    };
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

const RELATIONS: [&str; 6] = ["nsubj", "obj", "det", "amod", "advmod", "punct"];

/// Random tree: each token attaches to an earlier-placed token or the root.
fn random_heads(r: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (1..=n).collect();
    for i in (1..n).rev() {
        order.swap(i, r.random_range(0..=i));
    }
    let mut heads = vec![0; n];
    for k in 1..n {
        heads[order[k] - 1] = order[r.random_range(0..k)];
    }
    heads
}

fn random_treebank(r: &mut ChaCha8Rng, sentences: std::ops::Range<usize>, max_len: usize, tags: &[Upos]) -> Treebank {
    let count = r.random_range(sentences);
    let sents = (0..count)
        .map(|s| {
            let n = r.random_range(1..=max_len);
            let heads = random_heads(r, n);
            let tokens = (0..n)
                .map(|i| {
                    let tag = tags[r.random_range(0..tags.len())];
                    let rel = if heads[i] == 0 { "root" } else { RELATIONS[r.random_range(0..RELATIONS.len())] };
                    Token::new(i + 1, &format!("w{}", r.random_range(0..20)), tag, heads[i], rel)
                })
                .collect();
            Sentence::from_tokens(format!("s{s}"), tokens)
        })
        .collect();
    Treebank::new("rand", Split::Test, sents).unwrap()
}

fn perturb_tags(r: &mut ChaCha8Rng, gold: &Treebank, rate: f64) -> Vec<Vec<Upos>> {
    gold.sentences
        .iter()
        .map(|s| {
            s.tokens
                .iter()
                .map(|t| {
                    if r.random_bool(rate) {
                        Upos::ALL[r.random_range(0..Upos::COUNT)]
                    } else {
                        t.upos
                    }
                })
                .collect()
        })
        .collect()
}

// 1

fn conllu_round_trip() -> Result<String, String> {
    let dir = fixtures().join("conllu");
    let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "conllu"))
        .collect();
    files.sort();
    ensure!(files.len() == 20, "expected 20 fixture files, found {}", files.len());
    let t0 = Instant::now();
    let (mut sentences, mut extra, mut comments) = (0, 0, 0);
    for f in &files {
        let text = std::fs::read_to_string(f).map_err(|e| e.to_string())?;
        let first = parse_conllu(&text, "fx", Split::Test).map_err(|e| format!("{}: {e}", f.display()))?;
        let written = write_conllu(&first, None).map_err(|e| e.to_string())?;
        let second = parse_conllu(&written, "fx", Split::Test).map_err(|e| e.to_string())?;
        ensure!(first.sentences == second.sentences, "{} differs after round trip", f.display());
        sentences += first.sentences.len();
        extra += first.sentences.iter().map(|s| s.extra.len()).sum::<usize>();
        comments += first.sentences.iter().map(|s| s.comments.len()).sum::<usize>();
    }
    let elapsed = t0.elapsed();
    ensure!(extra > 0 && comments > 0, "fixtures lack multiword/empty-node lines or comments");
    ensure!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    Ok(format!("{sentences} sentences, {extra} range/empty lines, {comments} comments in {elapsed:?}"))
}

// 2

/// Cyclic Jacobi eigendecomposition of a symmetric matrix; eigenvectors
/// are the columns of the returned matrix.
#[allow(clippy::needless_range_loop)]
fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vkp, vkq) = (row[p], row[q]);
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i][i]).collect(), v)
}

fn pca_oracle() -> Result<String, String> {
    let mut r = rng(2);
    let mut worst: f64 = 0.0;
    for case in 0..50 {
        let dim = r.random_range(2..=10);
        let rows = r.random_range(dim + 2..=60);
        let k = r.random_range(1..=dim);
        let data = Array2::from_shape_fn((rows, dim), |(_, j)| r.random_range(-1.0..1.0) * (1.0 + j as f64 * 0.3));
        let pca = Pca::fit(&data, k, Exec::Sequential).map_err(|e| e.to_string())?;

        let mut mean = vec![0.0; dim];
        for i in 0..rows {
            for j in 0..dim {
                mean[j] += data[[i, j]] / rows as f64;
            }
        }
        let mut cov = vec![vec![0.0; dim]; dim];
        for i in 0..rows {
            for a in 0..dim {
                for b in 0..dim {
                    cov[a][b] += (data[[i, a]] - mean[a]) * (data[[i, b]] - mean[b]) / (rows as f64 - 1.0);
                }
            }
        }
        let (values, vectors) = jacobi_eigen(cov);
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap());
        for (i, &o) in order.iter().take(k).enumerate() {
            let diff = (values[o] - pca.explained_variance[i]).abs();
            worst = worst.max(diff);
            ensure!(diff < 1e-8, "case {case}: variance {i} differs by {diff:e}");
        }
        let mut residual = 0.0;
        for i in 0..rows {
            let centred: Vec<f64> = (0..dim).map(|j| data[[i, j]] - mean[j]).collect();
            let mut recon = vec![0.0; dim];
            for &o in order.iter().take(k) {
                let proj: f64 = (0..dim).map(|j| centred[j] * vectors[j][o]).sum();
                for j in 0..dim {
                    recon[j] += proj * vectors[j][o];
                }
            }
            residual += (0..dim).map(|j| (centred[j] - recon[j]).powi(2)).sum::<f64>();
        }
        let diff = (residual - pca.reconstruction_error(&data)).abs();
        worst = worst.max(diff);
        ensure!(diff < 1e-8, "case {case}: reconstruction error differs by {diff:e}");
    }
    Ok(format!("50 matrices, max deviation {worst:.2e}"))
}

// 3

fn oracle_is_tree(heads: &[usize]) -> bool {
    let n = heads.len();
    (1..=n).all(|start| {
        let mut node = start;
        for _ in 0..=n {
            if node == 0 {
                return true;
            }
            let h = heads[node - 1];
            if h > n || h == node {
                return false;
            }
            node = h;
        }
        false
    })
}

fn brute_force_best(scores: &Array2<f64>) -> f64 {
    let n = scores.nrows();
    let mut best = f64::NEG_INFINITY;
    let mut heads = vec![0usize; n];
    let total = (n + 1).pow(n as u32);
    for code in 0..total {
        let mut c = code;
        for h in heads.iter_mut() {
            *h = c % (n + 1);
            c /= n + 1;
        }
        if oracle_is_tree(&heads) {
            let s: f64 = heads.iter().enumerate().map(|(i, &h)| scores[[i, h]]).sum();
            best = best.max(s);
        }
    }
    best
}

fn decoder_oracle() -> Result<String, String> {
    let mut r = rng(3);
    for case in 0..200 {
        let integer = case % 2 == 0;
        let scores = Array2::from_shape_fn((4, 5), |_| {
            if integer {
                r.random_range(-5..=5) as f64
            } else {
                r.random_range(-10.0..10.0)
            }
        });
        let heads = chu_liu_edmonds(&scores);
        ensure!(oracle_is_tree(&heads), "case {case}: {heads:?} is not a tree");
        let got = tree_score(&scores, &heads);
        let want = brute_force_best(&scores);
        ensure!(got == want, "case {case}: decoder score {got} but best tree scores {want}");
    }
    for case in 0..1000 {
        let n = r.random_range(1..=12);
        let scores = Array2::from_shape_fn((n, n + 1), |_| r.random_range(-10.0..10.0));
        let heads = chu_liu_edmonds(&scores);
        ensure!(heads.len() == n && oracle_is_tree(&heads), "size case {case} (n = {n}): {heads:?}");
    }
    Ok("200 exact optima, 1000 valid trees".into())
}

// 4

fn small_encoder() -> EncoderConfig {
    EncoderConfig {
        word_dim: 16,
        char_dim: 16,
        char_lstm_input: 8,
        char_lstm_size: 16,
        lstm_layers: 1,
        lstm_size: 32,
        ..EncoderConfig::default()
    }
}

fn small_head() -> HeadConfig {
    HeadConfig {
        tagger_hidden: 32,
        arc_dim: 32,
        rel_dim: 16,
        ..HeadConfig::default()
    }
}

fn freeze_invariant() -> Result<String, String> {
    let toy = generate(
        &SyntheticConfig {
            train: 130,
            dev: 10,
            test: 10,
            ..SyntheticConfig::default()
        },
        4,
    )
    .map_err(|e| e.to_string())?;
    let vocab = Vocabulary::build(&toy.train).map_err(|e| e.to_string())?;
    let cfg = TrainConfig::default();
    let mut source = ModelState::new(ModelConfig::parser(small_encoder(), small_head()), vocab, None, 4).map_err(|e| e.to_string())?;
    let examples = build_examples(&source, &toy.train, None).map_err(|e| e.to_string())?;
    Trainer::new(&source, &cfg).epoch(&mut source, &examples, 1);

    let frozen = [ParamGroup::Embeddings, ParamGroup::CharEncoder, ParamGroup::Bilstm];
    let before: Vec<String> = frozen.iter().map(|&g| source.group_checksum(g)).collect();
    let mut steps_seen = Vec::new();
    for run in 0..10u64 {
        let size = 31 + 10 * run as usize;
        let train = Treebank::new("toy", Split::Train, toy.train.sentences[..size].to_vec()).unwrap();
        let cfg = TrainConfig {
            seed: 100 + run,
            ..TrainConfig::default()
        };
        let probe = Probe::train(&source, &train, &cfg).map_err(|e| e.to_string())?;
        let after: Vec<String> = frozen.iter().map(|&g| probe.state.group_checksum(g)).collect();
        ensure!(after == before, "run {run}: frozen parameters changed");
        ensure!(probe.frozen_checksum_before == probe.state.frozen_checksum(), "run {run}: checksum mismatch");
        let expected = size.div_ceil(30) as u64;
        ensure!(probe.optimizer_steps == expected, "run {run}: {} steps for {size} sentences", probe.optimizer_steps);
        ensure!(probe.state.kind() == HeadKind::Tagger, "run {run}: probe is not a tagger");
        steps_seen.push(probe.optimizer_steps);
    }
    Ok(format!("10 runs, frozen groups unchanged, steps {steps_seen:?}"))
}

// 5

fn context_key(kind: ContextKind, s: &Sentence, i: usize) -> String {
    let tag = |k: usize| s.tokens[k].upos.as_str().to_string();
    match kind {
        ContextKind::Bigram => {
            let p2 = if i >= 2 { tag(i - 2) } else { "BOS".into() };
            let p1 = if i >= 1 { tag(i - 1) } else { "BOS".into() };
            format!("{p2} {p1}")
        }
        ContextKind::HeadRelation => {
            let t = &s.tokens[i];
            let h = if t.head == 0 { "ROOT".into() } else { tag(t.head - 1) };
            format!("{h} {}", t.deprel)
        }
    }
}

/// Mean surprisal over all target tokens and over error tokens, by
/// counting matching (context, tag) events directly.
fn surprisal_oracle(kind: ContextKind, smoothing: Smoothing, train: &Treebank, target: &Treebank, errors: &ErrorSet) -> (f64, Option<f64>) {
    let mut events: HashMap<(String, &str), f64> = HashMap::new();
    let mut contexts: HashMap<String, f64> = HashMap::new();
    for s in &train.sentences {
        for i in 0..s.len() {
            let key = context_key(kind, s, i);
            *events.entry((key.clone(), s.tokens[i].upos.as_str())).or_default() += 1.0;
            *contexts.entry(key).or_default() += 1.0;
        }
    }
    let (mut all, mut n, mut err, mut m) = (0.0, 0.0, 0.0, 0.0);
    for (si, s) in target.sentences.iter().enumerate() {
        for i in 0..s.len() {
            let key = context_key(kind, s, i);
            let c = events.get(&(key.clone(), s.tokens[i].upos.as_str())).copied().unwrap_or(0.0);
            let t = contexts.get(&key).copied().unwrap_or(0.0);
            let p = match smoothing {
                Smoothing::AddOne => (c + 1.0) / (t + 17.0),
                Smoothing::Unsmoothed => c / t,
            };
            let bits = -p.ln() / 2f64.ln();
            all += bits;
            n += 1.0;
            if errors.contains(si, s.tokens[i].index) {
                err += bits;
                m += 1.0;
            }
        }
    }
    (all / n, (m > 0.0).then(|| err / m))
}

fn surprisal_matches() -> Result<String, String> {
    let mut r = rng(5);
    let tags = &Upos::ALL[..8];
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let train = random_treebank(&mut r, 5..40, 12, tags);
        let unsmoothed = case % 2 == 1;
        // Unsmoothed probabilities are only finite on seen events.
        let target = if unsmoothed { train.clone() } else { random_treebank(&mut r, 3..20, 12, tags) };
        let predicted = perturb_tags(&mut r, &target, 0.3);
        let errors = ErrorSet::from_predictions(&target, &predicted).unwrap();
        let smoothing = if unsmoothed { Smoothing::Unsmoothed } else { Smoothing::AddOne };
        for kind in [ContextKind::Bigram, ContextKind::HeadRelation] {
            let got = match kind {
                ContextKind::Bigram => bigram_surprisal(&train, &target, &errors, smoothing),
                ContextKind::HeadRelation => head_rel_surprisal(&train, &target, &errors, smoothing),
            }
            .map_err(|e| e.to_string())?;
            let (all, errs) = surprisal_oracle(kind, smoothing, &train, &target, &errors);
            let d = (got.mean_all - all).abs();
            worst = worst.max(d);
            ensure!(d < 1e-9, "case {case} {kind}: mean {} vs oracle {all}", got.mean_all);
            match (got.mean_errors, errs) {
                (Some(a), Some(b)) => {
                    worst = worst.max((a - b).abs());
                    ensure!((a - b).abs() < 1e-9, "case {case} {kind}: error mean {a} vs oracle {b}");
                }
                (None, None) => {}
                other => return Err(format!("case {case} {kind}: error means {other:?}")),
            }
        }
    }

    // p = 1 and p = 0.25 from counts.
    let sent = |tags: &[Upos]| {
        let toks = tags.iter().enumerate().map(|(i, &t)| Token::new(i + 1, "w", t, 0, "root")).collect();
        Sentence::from_tokens("s", toks)
    };
    let spot = Treebank::new(
        "spot",
        Split::Train,
        vec![
            sent(&[Upos::Det]),
            sent(&[Upos::Det]),
            sent(&[Upos::Noun, Upos::Verb]),
            sent(&[Upos::Noun, Upos::Noun]),
            sent(&[Upos::Noun, Upos::Adj]),
            sent(&[Upos::Noun, Upos::Adv]),
        ],
    )
    .unwrap();
    let model = SurprisalModel::fit(ContextKind::Bigram, Smoothing::Unsmoothed, &spot);
    let first = &sentence_contexts(ContextKind::Bigram, &spot.sentences[2])[1];
    let certain = sentence_contexts(ContextKind::Bigram, &spot.sentences[0])[0].clone();
    // BOS BOS is followed by DET twice and NOUN four times; BOS NOUN by four
    // different tags.
    let p_quarter = model.surprisal(first, Upos::Verb);
    ensure!(p_quarter == 2.0, "p = 0.25 gives {p_quarter} bits");
    let only = SurprisalModel::fit(ContextKind::Bigram, Smoothing::Unsmoothed, &Treebank::new("one", Split::Train, vec![sent(&[Upos::Det])]).unwrap());
    let p_one = only.surprisal(&certain, Upos::Det);
    ensure!(p_one == 0.0 && p_one.is_sign_positive(), "p = 1 gives {p_one} bits");
    Ok(format!("100 corpora, max deviation {worst:.2e}; p=1 -> 0 bits, p=0.25 -> 2 bits"))
}

// 6

fn error_algebra() -> Result<String, String> {
    let mut r = rng(6);
    let mut zero_error_sentences = 0;
    for case in 0..1000 {
        let gold = random_treebank(&mut r, 1..6, 10, &Upos::ALL);
        let rate_a = [0.0, 0.1, 0.3, 0.8][case % 4];
        let pred_a = perturb_tags(&mut r, &gold, rate_a);
        let pred_b = { let rate = r.random_range(0.0..0.5); perturb_tags(&mut r, &gold, rate) };
        let a = ErrorSet::from_predictions(&gold, &pred_a).unwrap();
        let b = ErrorSet::from_predictions(&gold, &pred_b).unwrap();

        let pa: HashSet<(usize, usize)> = a.positions().collect();
        let pb: HashSet<(usize, usize)> = b.positions().collect();
        let x = crossover(&a, &b);
        ensure!(x.union == a.len() + b.len() - x.both, "case {case}: union identity fails");
        ensure!(x.both == pa.intersection(&pb).count(), "case {case}: intersection");
        ensure!(x.only_a == pa.difference(&pb).count() && x.only_b == pb.difference(&pa).count(), "case {case}: differences");
        ensure!(x.union == pa.union(&pb).count(), "case {case}: union");

        let inputs = ConditioningInputs {
            gold: &gold,
            predicted: Some(&pred_a),
            tagger_errors: Some(&a),
            probe_errors: Some(&b),
        };
        for scheme in TagScheme::ALL {
            let cond = build_conditioning(scheme, &inputs).map_err(|e| e.to_string())?;
            let Some(tags) = cond.tags else {
                ensure!(scheme == TagScheme::None, "case {case}: {scheme} produced no tags");
                continue;
            };
            ensure!(scheme != TagScheme::None, "case {case}: NONE produced tags");
            for (si, s) in gold.sentences.iter().enumerate() {
                for (ti, tok) in s.tokens.iter().enumerate() {
                    let pos = (si, tok.index);
                    let g = TagSymbol::Tag(tok.upos);
                    let p = TagSymbol::Tag(pred_a[si][ti]);
                    let want = match scheme {
                        TagScheme::Gold => g,
                        TagScheme::Pred => p,
                        TagScheme::MaskAllButTaggerErrors if pa.contains(&pos) => g,
                        TagScheme::MaskAllButProbeErrors if pb.contains(&pos) => g,
                        TagScheme::MaskAllButTaggerErrors | TagScheme::MaskAllButProbeErrors => TagSymbol::Mask,
                        TagScheme::MaskTaggerErrors if pa.contains(&pos) => TagSymbol::Mask,
                        TagScheme::MaskTaggerErrors => p,
                        TagScheme::None => unreachable!(),
                    };
                    ensure!(tags[si][ti] == want, "case {case} {scheme} at {pos:?}: {} != {}", tags[si][ti], want);
                }
                if scheme == TagScheme::MaskTaggerErrors && !pa.iter().any(|&(x, _)| x == si) {
                    let pred_row: Vec<TagSymbol> = pred_a[si].iter().map(|&t| TagSymbol::Tag(t)).collect();
                    ensure!(tags[si] == pred_row, "case {case}: error-free sentence {si} differs from PRED");
                    zero_error_sentences += 1;
                }
            }
        }
    }
    Ok(format!("1000 fixtures, {zero_error_sentences} error-free sentences checked"))
}

// 7

fn metric_oracles() -> Result<String, String> {
    let mut r = rng(7);
    for case in 0..500 {
        let gold = random_treebank(&mut r, 1..8, 12, &Upos::ALL[..6]);
        let pred = { let rate = r.random_range(0.0..0.6); perturb_tags(&mut r, &gold, rate) };
        let trees: Vec<PredictedTree> = gold
            .sentences
            .iter()
            .map(|s| PredictedTree {
                heads: s.tokens.iter().map(|t| if r.random_bool(0.3) { r.random_range(0..=s.len()) } else { t.head }).collect(),
                relations: s
                    .tokens
                    .iter()
                    .map(|t| if r.random_bool(0.2) { RELATIONS[r.random_range(0..RELATIONS.len())].to_string() } else { t.deprel.clone() })
                    .collect(),
            })
            .collect();

        let mut gold_n: BTreeMap<Upos, usize> = BTreeMap::new();
        let mut pred_n: BTreeMap<Upos, usize> = BTreeMap::new();
        let mut corr_n: BTreeMap<Upos, usize> = BTreeMap::new();
        let (mut total, mut correct, mut heads, mut labeled) = (0usize, 0usize, 0usize, 0usize);
        for (si, s) in gold.sentences.iter().enumerate() {
            for (ti, t) in s.tokens.iter().enumerate() {
                let p = pred[si][ti];
                *gold_n.entry(t.upos).or_default() += 1;
                *pred_n.entry(p).or_default() += 1;
                total += 1;
                if p == t.upos {
                    *corr_n.entry(p).or_default() += 1;
                    correct += 1;
                }
                if trees[si].heads[ti] == t.head {
                    heads += 1;
                    if trees[si].relations[ti] == t.deprel {
                        labeled += 1;
                    }
                }
            }
        }
        let acc = tagging_accuracy(&pred, &gold).map_err(|e| e.to_string())?;
        ensure!(acc == correct as f64 / total as f64, "case {case}: accuracy {acc}");
        let scores = attachment_scores(&trees, &gold).map_err(|e| e.to_string())?;
        ensure!(scores.uas == heads as f64 / total as f64, "case {case}: UAS {}", scores.uas);
        ensure!(scores.las == labeled as f64 / total as f64, "case {case}: LAS {}", scores.las);

        let f1 = per_tag_f1(&pred, &gold).map_err(|e| e.to_string())?;
        let seen: HashSet<Upos> = gold_n.keys().chain(pred_n.keys()).copied().collect();
        ensure!(f1.len() == seen.len(), "case {case}: scored {} tags, expected {}", f1.len(), seen.len());
        for tag in seen {
            let (g, p, c) = (gold_n.get(&tag).copied().unwrap_or(0), pred_n.get(&tag).copied().unwrap_or(0), corr_n.get(&tag).copied().unwrap_or(0));
            let s = &f1[&tag];
            ensure!((s.gold, s.predicted, s.correct) == (g, p, c), "case {case} {tag}: counts");
            let want = if c == 0 { 0.0 } else { 2.0 * c as f64 / (g + p) as f64 };
            ensure!(s.f1 == want, "case {case} {tag}: F1 {} vs {want}", s.f1);
            if c > 0 {
                let (prec, rec) = (c as f64 / p as f64, c as f64 / g as f64);
                let harmonic = 2.0 * prec * rec / (prec + rec);
                ensure!((s.f1 - harmonic).abs() < 1e-12, "case {case} {tag}: harmonic mean {harmonic}");
            }
        }
    }

    let tags = [Upos::X, Upos::X, Upos::X, Upos::Noun];
    let toks = tags.iter().enumerate().map(|(i, &t)| Token::new(i + 1, "w", t, 0, "root")).collect();
    let gold = Treebank::new("hand", Split::Test, vec![Sentence::from_tokens("h", toks)]).unwrap();
    let pred = vec![vec![Upos::X, Upos::Noun, Upos::Noun, Upos::X]];
    let hand = per_tag_f1(&pred, &gold).unwrap()[&Upos::X].f1;
    ensure!(hand == 0.4, "hand case gives {hand}");
    Ok("500 fixtures exact; hand case F1 = 0.4".into())
}

// 8

const FIVE_SENTENCES: &str = "\
1\tthe\t_\tDET\t_\t_\t2\tdet\t_\t_
2\tdog\t_\tNOUN\t_\t_\t3\tnsubj\t_\t_
3\truns\t_\tVERB\t_\t_\t0\troot\t_\t_
4\t.\t_\tPUNCT\t_\t_\t3\tpunct\t_\t_

1\ta\t_\tDET\t_\t_\t2\tdet\t_\t_
2\tcat\t_\tNOUN\t_\t_\t3\tnsubj\t_\t_
3\tsees\t_\tVERB\t_\t_\t0\troot\t_\t_
4\tthe\t_\tDET\t_\t_\t5\tdet\t_\t_
5\tdog\t_\tNOUN\t_\t_\t3\tobj\t_\t_

1\tshe\t_\tPRON\t_\t_\t2\tnsubj\t_\t_
2\tsleeps\t_\tVERB\t_\t_\t0\troot\t_\t_
3\tquietly\t_\tADV\t_\t_\t2\tadvmod\t_\t_

1\tbig\t_\tADJ\t_\t_\t2\tamod\t_\t_
2\tdogs\t_\tNOUN\t_\t_\t3\tnsubj\t_\t_
3\tbark\t_\tVERB\t_\t_\t0\troot\t_\t_
4\tand\t_\tCCONJ\t_\t_\t5\tcc\t_\t_
5\trun\t_\tVERB\t_\t_\t3\tconj\t_\t_

1\tJohn\t_\tPROPN\t_\t_\t2\tnsubj\t_\t_
2\tsaw\t_\tVERB\t_\t_\t0\troot\t_\t_
3\ttwo\t_\tNUM\t_\t_\t4\tnummod\t_\t_
4\tcats\t_\tNOUN\t_\t_\t2\tobj\t_\t_
5\tin\t_\tADP\t_\t_\t7\tcase\t_\t_
6\tthe\t_\tDET\t_\t_\t7\tdet\t_\t_
7\tpark\t_\tNOUN\t_\t_\t2\tobl\t_\t_
";

fn overfit_sanity() -> Result<String, String> {
    let t0 = Instant::now();
    let tb = parse_conllu(FIVE_SENTENCES, "five", Split::Train).map_err(|e| e.to_string())?;
    let vocab = Vocabulary::build(&tb).map_err(|e| e.to_string())?;
    let encoder = EncoderConfig {
        dropout: 0.0,
        ..EncoderConfig::default()
    };
    let cfg = TrainConfig {
        batch_size: 5,
        ..TrainConfig::default()
    };
    let mut report = Vec::new();
    for model in [
        ModelConfig::tagger(encoder.clone(), HeadConfig::default()),
        ModelConfig::parser(encoder.clone(), HeadConfig::default()),
    ] {
        let kind = model.kind;
        let mut state = ModelState::new(model, vocab.clone(), None, 3).map_err(|e| e.to_string())?;
        let examples = build_examples(&state, &tb, None).map_err(|e| e.to_string())?;
        let batch: Vec<_> = examples.iter().collect();
        let mut trainer = Trainer::new(&state, &cfg);
        let mut losses = Vec::new();
        let mut reached = None;
        for step in 1..=200 {
            losses.push(trainer.step(&mut state, &batch, false));
            if step >= 5 && step % 5 == 0 {
                let score = match kind {
                    HeadKind::Tagger => tagging_accuracy(&tag_treebank(&state, &tb, Exec::default()).unwrap(), &tb).unwrap(),
                    HeadKind::Parser => attachment_scores(&parse_treebank(&state, &tb, None, Decoder::Mst, Exec::default()).unwrap(), &tb).unwrap().las,
                };
                if score == 1.0 {
                    reached = Some(step);
                    break;
                }
            }
        }
        ensure!(losses[..5].windows(2).all(|w| w[1] < w[0]), "{kind}: first losses {:?}", &losses[..5]);
        let Some(step) = reached else {
            return Err(format!("{kind} did not reach 100% in 200 steps"));
        };
        report.push(format!("{kind} 100% at step {step}"));
    }
    let elapsed = t0.elapsed();
    ensure!(elapsed < Duration::from_secs(120), "took {elapsed:?}");
    Ok(format!("{} in {elapsed:.1?}", report.join(", ")))
}

// 9

fn toy_directional() -> Result<String, String> {
    let t0 = Instant::now();
    let toy = generate(&SyntheticConfig::default(), 1).map_err(|e| e.to_string())?;
    let splits = Splits {
        name: "toy",
        train: &toy.train,
        dev: &toy.dev,
        test: &toy.test,
    };
    let config = MaskingConfig {
        encoder: EncoderConfig {
            word_dim: 32,
            char_dim: 32,
            char_lstm_input: 16,
            char_lstm_size: 32,
            lstm_layers: 1,
            lstm_size: 64,
            ..EncoderConfig::default()
        },
        head: HeadConfig {
            tagger_hidden: 64,
            arc_dim: 64,
            rel_dim: 32,
            ..HeadConfig::default()
        },
        tag_dim: 16,
        train: TrainConfig {
            max_epochs: 30,
            patience: 5,
            ..TrainConfig::default()
        },
        schemes: TagScheme::ALL.to_vec(),
    };
    let mut totals: BTreeMap<TagScheme, f64> = BTreeMap::new();
    let seeds = [1u64, 2, 3];
    for &seed in &seeds {
        let run = run_masking_experiment(&splits, None, &config, seed, Auxiliary::default(), Exec::default()).map_err(|e| e.to_string())?;
        for res in &run.results {
            *totals.entry(res.scheme).or_default() += res.test.las / seeds.len() as f64;
        }
    }
    let las = |s: TagScheme| totals[&s];
    let summary = TagScheme::ALL
        .iter()
        .map(|&s| format!("{} {:.2}", s.short_label(), 100.0 * las(s)))
        .collect::<Vec<_>>()
        .join(", ");
    let elapsed = t0.elapsed();
    ensure!(las(TagScheme::Gold) > las(TagScheme::None), "GOLD does not beat NONE: {summary}");
    ensure!(las(TagScheme::MaskAllButTaggerErrors) >= las(TagScheme::Pred), "M¬E_T below PRED: {summary}");
    ensure!(elapsed < Duration::from_secs(30 * 60), "took {elapsed:?}");
    Ok(format!("mean test LAS over 3 seeds: {summary} ({elapsed:.0?})"))
}

// 10

fn analysis_golden() -> Result<String, String> {
    for (num, den, want) in [(6434, 15181, "0.42"), (1867, 2816, "0.66"), (336, 429, "0.78")] {
        let ratio = error_ratio(num, den).ok_or("undefined ratio")?;
        ensure!(format!("{ratio:.2}") == want, "{num}/{den} = {ratio}");
    }
    let f = fixtures().join("analysis");
    let run = |out: &Path| -> Result<Vec<u8>, String> {
        let arg = |p: &str| f.join(p).display().to_string();
        let status = Command::new(env!("CARGO_BIN_EXE_posprobe"))
            .args(["analyze", "--name", "fix", "--train", &arg("train.conllu"), "--test", &arg("test.conllu")])
            .args(["--system", &format!("tagger={}", arg("tagger.conllu"))])
            .args(["--system", &format!("probe={}", arg("probe.conllu"))])
            .arg("--out")
            .arg(out)
            .output()
            .map_err(|e| e.to_string())?;
        ensure!(status.status.success(), "analyze failed: {}", String::from_utf8_lossy(&status.stderr));
        std::fs::read(out.join("reports/analysis.json")).map_err(|e| e.to_string())
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = run(a.path())?;
    let second = run(b.path())?;
    ensure!(first == second, "report bytes differ between runs");
    let golden = std::fs::read(f.join("expected/analysis.json")).map_err(|e| e.to_string())?;
    ensure!(first == golden, "report differs from the golden file");

    let v: serde_json::Value = serde_json::from_slice(&first).map_err(|e| e.to_string())?;
    let tb = &v["treebanks"][0];
    let (tagger, probe) = (&tb["systems"][0], &tb["systems"][1]);
    let classes = |s: &serde_json::Value| {
        ["open", "closed", "other"].map(|c| (s["classes"][c]["errors"].as_u64().unwrap(), s["classes"][c]["tokens"].as_u64().unwrap()))
    };
    ensure!(classes(tagger) == [(4, 8), (0, 2), (0, 2)], "tagger classes {:?}", classes(tagger));
    ensure!(classes(probe) == [(4, 8), (0, 2), (1, 2)], "probe classes {:?}", classes(probe));
    let ratio = &tb["comparison"]["class_ratios"];
    ensure!(ratio["total"] == 0.8 && ratio["open"] == 1.0 && ratio["other"] == 0.0 && ratio["closed"].is_null(), "ratios {ratio}");
    let confusions: Vec<String> = tagger["top_confusions"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| format!("{}>{}:{}", c["gold"].as_str().unwrap(), c["predicted"].as_str().unwrap(), c["count"]))
        .collect();
    ensure!(confusions == ["ADJ>ADV:1", "ADV>NOUN:1", "NOUN>PROPN:1", "PROPN>NOUN:1"], "confusions {confusions:?}");
    ensure!(tagger["oov"]["oov_tokens"] == 7 && tagger["oov"]["tokens"] == 12, "oov {}", tagger["oov"]);
    ensure!(tagger["oov"]["among_errors"] == 1.0 && probe["oov"]["among_errors"] == 0.8, "oov shares");
    let x = &tb["comparison"]["crossover"];
    ensure!(x["only_a"] == 2 && x["both"] == 2 && x["only_b"] == 3 && x["union"] == 7, "crossover {x}");
    Ok("ratio formula 6434/15181 = 0.42; counts, ranking and OOV match; JSON byte-stable".into())
}

fn main() {
    let checks: [(&str, Check); 10] = [
        ("CoNLL-U round trip", conllu_round_trip),
        ("PCA oracle", pca_oracle),
        ("decoder oracle", decoder_oracle),
        ("freeze invariant", freeze_invariant),
        ("surprisal oracle", surprisal_matches),
        ("error algebra and scheme definitions", error_algebra),
        ("metric oracles", metric_oracles),
        ("overfit sanity", overfit_sanity),
        ("toy directional masking experiment", toy_directional),
        ("analysis golden test", analysis_golden),
    ];
    let args: Vec<String> = std::env::args().collect();
    if args.iter().any(|a| a == "--list") {
        for (i, (name, _)) in checks.iter().enumerate() {
            println!("criterion {}: {name}: test", i + 1);
        }
        return;
    }
    let only: Option<HashSet<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());

    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let n = i + 1;
        if only.as_ref().is_some_and(|o| !o.contains(&n)) {
            continue;
        }
        let t0 = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS [{n:>2}] {name}: {detail} [{:.1?}]", t0.elapsed()),
            Err(why) => {
                failed += 1;
                println!("FAIL [{n:>2}] {name}: {why} [{:.1?}]", t0.elapsed());
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
