//! Acceptance suite: every criterion runs at its stated tolerance and prints
//! one PASS/FAIL line. Exits nonzero if any criterion fails.
//!
//! Oracles here are deliberately independent of the library internals:
//! exhaustive path enumeration, central finite differences, explicit
//! per-provider concatenation and hand-computed counts.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use seqtag::bootstrap::{bootstrap_cycle, corpus_hash, CycleInputs, Provenance};
use seqtag::corpus::{
    builtin_bis_tagset, parse_column_str, write_column_file, Category, ParseMode, Sentence, Tag, TagSet, TaggedCorpus,
    Token,
};
use seqtag::crf::{log_partition, nll_loss, posterior_marginals, viterbi_decode, Transitions};
use seqtag::embeddings::{
    char_encode, CharEncoder, EmbeddingStack, OovPolicy, PrecomputedContextual, Provider, StackEntry, StaticTable,
};
use seqtag::eval::evaluate;
use seqtag::synthetic::{ambiguous_corpus, bootstrap_scenario, unambiguous_corpus, SyntheticSpec};
use seqtag::training::{load_model, save_model, train, Architecture, SequenceModel, TrainingConfig};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------- oracles

/// Score of one path, written out term by term.
fn brute_score(e: &[Vec<f64>], tr: &Transitions, path: &[usize]) -> f64 {
    let t = tr.num_tags();
    let mut s = tr.start.value[path[0]] + tr.end.value[path[path.len() - 1]];
    for (i, &y) in path.iter().enumerate() {
        s += e[i][y];
        if i > 0 {
            s += tr.matrix.value[path[i - 1] * t + y];
        }
    }
    s
}

fn all_paths(n: usize, t: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..t).map(move |y| {
                    let mut q = p.clone();
                    q.push(y);
                    q
                })
            })
            .collect();
    }
    out
}

struct Enumerated {
    log_z: f64,
    marginals: Vec<Vec<f64>>,
    best: f64,
}

fn enumerate(e: &[Vec<f64>], tr: &Transitions) -> Enumerated {
    let (n, t) = (e.len(), tr.num_tags());
    let paths = all_paths(n, t);
    let scores: Vec<f64> = paths.iter().map(|p| brute_score(e, tr, p)).collect();
    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = scores.iter().map(|s| (s - best).exp()).sum();
    let log_z = best + z.ln();
    let mut marginals = vec![vec![0.0; t]; n];
    for (p, s) in paths.iter().zip(&scores) {
        let w = (s - log_z).exp();
        for (i, &y) in p.iter().enumerate() {
            marginals[i][y] += w;
        }
    }
    Enumerated { log_z, marginals, best }
}

fn random_instance(rng: &mut ChaCha8Rng, n: usize, t: usize, scale: f64) -> (Vec<Vec<f64>>, Transitions) {
    let e = (0..n).map(|_| (0..t).map(|_| rng.gen_range(-scale..scale)).collect()).collect();
    (e, Transitions::uniform(t, scale, rng))
}

fn tiny_tagset(t: usize) -> Arc<TagSet> {
    let tags = (0..t)
        .map(|i| Tag { code: format!("T{i}"), category: Category::ALL[i % 11], type_name: String::new() })
        .collect();
    Arc::new(TagSet::new(tags).unwrap())
}

// ---------------------------------------------------------------- criteria

fn crf_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let instances = 1500;
    for k in 0..instances {
        let n = rng.gen_range(1..=4);
        let t = rng.gen_range(1..=5);
        let (e, tr) = random_instance(&mut rng, n, t, 3.0);
        let oracle = enumerate(&e, &tr);
        let gold: Vec<usize> = (0..n).map(|_| rng.gen_range(0..t)).collect();

        let lz = log_partition(&e, &tr).unwrap();
        let nll = nll_loss(&e, &tr, &gold).unwrap();
        let want_nll = oracle.log_z - brute_score(&e, &tr, &gold);
        let m = posterior_marginals(&e, &tr).unwrap();
        let (path, score) = viterbi_decode(&e, &tr).unwrap();

        let mut err = (lz - oracle.log_z).abs().max((nll - want_nll).abs());
        for (row, want) in m.iter().zip(&oracle.marginals) {
            for (a, b) in row.iter().zip(want) {
                err = err.max((a - b).abs());
            }
        }
        err = err.max((score - oracle.best).abs()).max((brute_score(&e, &tr, &path) - oracle.best).abs());
        worst = worst.max(err);
        ensure(err <= 1e-9, || format!("instance {k} (n={n}, T={t}): error {err:e}"))?;
    }
    Ok(format!("{instances} instances, max abs error {worst:.1e}"))
}

fn random_model(rng: &mut ChaCha8Rng) -> (SequenceModel, Vec<Sentence>) {
    let t = rng.gen_range(2..=5);
    let vocab: Vec<String> = ["ka", "kha", "ga", "gha", "nga"].iter().map(|s| s.to_string()).collect();
    let use_char = rng.gen_bool(0.5);
    let (char_dim, char_hidden) = (rng.gen_range(1..=3), rng.gen_range(1..=2));
    let static_dim = if use_char { rng.gen_range(1..=6 - 2 * char_hidden) } else { rng.gen_range(1..=6) };
    let rows = vocab.iter().map(|_| (0..static_dim).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let table = StaticTable::from_rows(vocab.clone(), rows, OovPolicy::Zero).unwrap();
    let mut entries = vec![StackEntry::new("w", Provider::Static(table), true)];
    if use_char {
        let enc = CharEncoder::new("kagh".chars(), char_dim, char_hidden, 0.8, rng);
        entries.push(StackEntry::new("c", Provider::Char(enc), true));
    }
    let stack = EmbeddingStack::new(entries).unwrap();
    let config = TrainingConfig {
        hidden_size: rng.gen_range(1..=3),
        hidden_layers: rng.gen_range(1..=2),
        init_scale: 0.8,
        seed: rng.gen(),
        ..TrainingConfig::default()
    };
    let model = SequenceModel::new(stack, tiny_tagset(t), config).unwrap();
    let sentences = (0..2)
        .map(|i| {
            let n = rng.gen_range(1..=4);
            // "nya" is out of vocabulary
            let words: Vec<&str> = (0..n).map(|_| ["ka", "kha", "ga", "gha", "nga", "nya"][rng.gen_range(0..6)]).collect();
            let gold: Vec<usize> = (0..n).map(|_| rng.gen_range(0..t)).collect();
            Sentence::from_surfaces(format!("s{i}"), &words).unwrap().with_tags(&gold)
        })
        .collect();
    (model, sentences)
}

fn gradient_fidelity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    let mut checked = 0usize;
    let models = 120;
    for m in 0..models {
        let (mut model, sentences) = random_model(&mut rng);
        let sentence = &sentences[m % 2];
        model.zero_grad();
        model.accumulate_gradients::<ChaCha8Rng>(sentence, None).unwrap();
        let grads: Vec<(String, Vec<f64>)> = model.trainable_params().iter().map(|p| (p.name.clone(), p.grad.clone())).collect();
        for (pi, (name, g)) in grads.iter().enumerate() {
            for k in 0..g.len() {
                let mut plus = model.clone();
                plus.trainable_params_mut()[pi].value[k] += eps;
                let mut minus = model.clone();
                minus.trainable_params_mut()[pi].value[k] -= eps;
                let num = (plus.loss(sentence).unwrap() - minus.loss(sentence).unwrap()) / (2.0 * eps);
                let rel = (num - g[k]).abs() / (num.abs() + g[k].abs()).max(1e-6);
                worst = worst.max(rel);
                checked += 1;
                ensure(rel < 1e-4, || format!("model {m}, {name}[{k}]: analytic {} vs numeric {num} (rel {rel:e})", g[k]))?;
            }
        }
    }
    Ok(format!("{models} models, {checked} coordinates, max rel error {worst:.1e}"))
}

fn marginal_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let eps = 1e-5;
    let (mut worst_fd, mut worst_sum): (f64, f64) = (0.0, 0.0);
    for k in 0..300 {
        let n = rng.gen_range(1..=8);
        let t = rng.gen_range(1..=6);
        let (e, tr) = random_instance(&mut rng, n, t, 2.0);
        let m = posterior_marginals(&e, &tr).unwrap();
        for (i, row) in m.iter().enumerate() {
            let s: f64 = row.iter().sum();
            worst_sum = worst_sum.max((s - 1.0).abs());
            ensure((s - 1.0).abs() <= 1e-9, || format!("instance {k}: row {i} sums to {s}"))?;
            for (y, &p) in row.iter().enumerate() {
                let mut hi = e.clone();
                hi[i][y] += eps;
                let mut lo = e.clone();
                lo[i][y] -= eps;
                let fd = (log_partition(&hi, &tr).unwrap() - log_partition(&lo, &tr).unwrap()) / (2.0 * eps);
                worst_fd = worst_fd.max((fd - p).abs());
                ensure((fd - p).abs() <= 1e-6, || format!("instance {k}: d logZ/d e[{i}][{y}] = {fd}, marginal {p}"))?;
            }
        }
    }
    Ok(format!("300 instances, max |fd - marginal| {worst_fd:.1e}, max |row sum - 1| {worst_sum:.1e}"))
}

fn shift_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for k in 0..1000 {
        let n = rng.gen_range(1..=12);
        let t = rng.gen_range(1..=8);
        let (e, tr) = random_instance(&mut rng, n, t, 3.0);
        let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let shifted: Vec<Vec<f64>> = e.iter().zip(&c).map(|(row, ci)| row.iter().map(|v| v + ci).collect()).collect();
        let (p0, _) = viterbi_decode(&e, &tr).unwrap();
        let (p1, _) = viterbi_decode(&shifted, &tr).unwrap();
        ensure(p0 == p1, || format!("instance {k}: Viterbi path changed"))?;
        let m0 = posterior_marginals(&e, &tr).unwrap();
        let m1 = posterior_marginals(&shifted, &tr).unwrap();
        for (a, b) in m0.iter().flatten().zip(m1.iter().flatten()) {
            worst = worst.max((a - b).abs());
            ensure((a - b).abs() <= 1e-9, || format!("instance {k}: marginal moved by {:e}", (a - b).abs()))?;
        }
        let dz = log_partition(&shifted, &tr).unwrap() - log_partition(&e, &tr).unwrap();
        let want: f64 = c.iter().sum();
        worst = worst.max((dz - want).abs());
        ensure((dz - want).abs() <= 1e-9, || format!("instance {k}: log Z shifted by {dz}, expected {want}"))?;
    }
    Ok(format!("1000 instances, max deviation {worst:.1e}"))
}

fn scaled_config(arch: Architecture, seed: u64) -> TrainingConfig {
    TrainingConfig { hidden_size: 32, hidden_layers: 1, max_epochs: 20, architecture: arch, seed, ..TrainingConfig::default() }
}

fn accuracy(model: &SequenceModel, gold: &TaggedCorpus) -> f64 {
    evaluate(gold, &model.tag_corpus(gold, 1).unwrap()).unwrap().accuracy
}

fn synthetic_convergence() -> Outcome {
    let start = Instant::now();
    let data = unambiguous_corpus(&SyntheticSpec::default());
    let config = scaled_config(Architecture::BiLstmCrf, 1);
    ensure(
        (config.learning_rate, config.word_dropout, config.mini_batch_size) == (0.01, 0.05, 16),
        || "scaled config drifted from the published values".into(),
    )?;
    let model = SequenceModel::new(data.stack(), Arc::clone(&data.train.tagset), config.clone()).unwrap();
    let (best, curve) = train(model, &data.train, &data.dev, &config).unwrap();
    let acc = accuracy(&best, &data.test);
    let elapsed = start.elapsed();
    ensure(curve.records.len() <= 20, || format!("{} epochs", curve.records.len()))?;
    ensure(acc >= 0.99, || format!("test accuracy {acc:.4} < 0.99"))?;
    ensure(elapsed < Duration::from_secs(300), || format!("took {elapsed:?}"))?;
    Ok(format!("test accuracy {:.2}% after {} epochs in {:.1}s", 100.0 * acc, curve.records.len(), elapsed.as_secs_f64()))
}

fn architecture_ordering() -> Outcome {
    let mut details = Vec::new();
    for seed in [11u64, 12, 13] {
        let data = ambiguous_corpus(&SyntheticSpec { seed, ..SyntheticSpec::default() });
        let mut acc = [0.0; 2];
        for (slot, arch) in [Architecture::BiLstmCrf, Architecture::CrfOnly].into_iter().enumerate() {
            let config = scaled_config(arch, seed);
            let model = SequenceModel::new(data.stack(), Arc::clone(&data.train.tagset), config.clone()).unwrap();
            let (best, _) = train(model, &data.train, &data.dev, &config).unwrap();
            acc[slot] = 100.0 * accuracy(&best, &data.test);
        }
        let gap = acc[0] - acc[1];
        details.push(format!("seed {seed}: {:.2} vs {:.2}", acc[0], acc[1]));
        ensure(gap >= 5.0, || format!("seed {seed}: BiLSTM-CRF {:.2} vs CRF {:.2} (gap {gap:.2})", acc[0], acc[1]))?;
    }
    Ok(details.join("; "))
}

type ExplicitLookup = Box<dyn Fn(usize, &str) -> Vec<f64>>;

fn stacking() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let words = ["অসম", "ভাষা", "x", "yz"];
    let sentence = Sentence::from_surfaces("s", &["অসম", "ভাষা", "নতুন"]).unwrap();
    for k in 0..150 {
        let mut entries = Vec::new();
        let mut explicit: Vec<ExplicitLookup> = Vec::new();
        let mut dims = 0;
        for p in 0..rng.gen_range(1..=4) {
            let d = rng.gen_range(1..=7);
            match rng.gen_range(0..3) {
                0 => {
                    let rows = words.iter().map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
                    let table = StaticTable::from_rows(words.iter().map(|w| w.to_string()).collect(), rows, OovPolicy::MeanOfRows).unwrap();
                    let t = table.clone();
                    explicit.push(Box::new(move |_, s| t.lookup(s).to_vec()));
                    entries.push(StackEntry::new(format!("p{p}"), Provider::Static(table), rng.gen()));
                    dims += d;
                }
                1 => {
                    let mut store = PrecomputedContextual::new(d).unwrap();
                    for i in 0..sentence.len() {
                        store.insert("s", i, (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
                    }
                    let st = store.clone();
                    explicit.push(Box::new(move |i, _| st.get("s", i).unwrap().to_vec()));
                    entries.push(StackEntry::new(format!("p{p}"), Provider::Precomputed(store), false));
                    dims += d;
                }
                _ => {
                    let h = rng.gen_range(1..=3);
                    let enc = CharEncoder::new("অসমভাষ".chars(), d, h, 0.5, &mut rng);
                    let e = enc.clone();
                    explicit.push(Box::new(move |_, s| char_encode(&e, s)));
                    entries.push(StackEntry::new(format!("p{p}"), Provider::Char(enc), rng.gen()));
                    dims += 2 * h;
                }
            }
        }
        let stack = EmbeddingStack::new(entries).unwrap();
        ensure(stack.total_dim() == dims, || format!("stack {k}: total_dim {} vs {dims}", stack.total_dim()))?;
        let got = stack.embed_sentence(&sentence).unwrap();
        for (i, (v, surface)) in got.iter().zip(sentence.surfaces()).enumerate() {
            let want: Vec<f64> = explicit.iter().flat_map(|f| f(i, surface)).collect();
            ensure(v.len() == dims, || format!("stack {k}: token {i} has dim {}", v.len()))?;
            ensure(*v == want, || format!("stack {k}: token {i} differs from explicit concatenation"))?;
        }
    }
    Ok("150 random stacks match summed dims and explicit concatenation".into())
}

const REFERENCE_SAMPLE: &str = "দিল্লী\tN_NNP\nভাৰতৰ\tN_NNP\nৰাজধানী\tN_ANN\n।\tRD_PUNC\n\n\
প্ৰধানমন্ত্ৰী\tN_ANN\nদিল্লীত\tN_NNP\nথাকে\tV_VAUX\n।\tRD_PUNC\n\n";

fn corpus_round_trip() -> Outcome {
    let ts = Arc::new(builtin_bis_tagset());
    ensure(ts.len() == 41, || format!("{} tags", ts.len()))?;
    let cats: std::collections::BTreeSet<Category> = ts.tags().iter().map(|t| t.category).collect();
    ensure(cats.len() == 11, || format!("{} categories", cats.len()))?;

    let table = parse_column_str(REFERENCE_SAMPLE, "t1", Arc::clone(&ts), ParseMode::Strict).unwrap().corpus;
    ensure(table.sentence_count() == 2 && table.token_count() == 8, || "reference sample shape".into())?;
    let again = parse_column_str(std::str::from_utf8(&write_column_file(&table)).unwrap(), "t1", Arc::clone(&ts), ParseMode::Strict)
        .unwrap()
        .corpus;
    ensure(again == table, || "reference sample does not round-trip".into())?;
    ensure(write_column_file(&table) == REFERENCE_SAMPLE.as_bytes(), || "reference sample not byte-identical".into())?;

    let published = [
        "N_NNP", "N_CNN", "N_VNN", "N_ANN", "N_MNN", "N_NST", "N_NN", "PR_PRP", "PR_PRF", "PR_PRC", "PR_PRL", "PR_PRQ",
        "PR_PRI", "DM_DMD", "DM_DMR", "DM_DMQ", "DM_DMI", "V_VAUX", "V_VM", "V_VBT", "V_VBI", "J_PJJ", "J_VJJ", "J_JJ",
        "RB", "PSP", "CC_CCD", "CC_CCS", "SUF", "RP_RPD", "RP_INJ", "RP_NEG", "RP_INTF", "QT_QTF", "QT_QTC", "QT_QTO",
        "RD_RDF", "RD_SYM", "RD_PUNC", "RD_ECH", "RD_UNK",
    ];
    for code in published {
        ensure(parse_column_str(&format!("w\t{code}\n"), "c", Arc::clone(&ts), ParseMode::Strict).is_ok(), || {
            format!("strict mode rejected {code}")
        })?;
    }
    let mut probes: Vec<String> = published.iter().map(|c| c.to_lowercase()).collect();
    probes.extend(["NN", "VM", "N_NNPX", "JJ", "RD", "V_VAUX_", "PUNC", "QT", "N"].map(String::from));
    for code in &probes {
        ensure(parse_column_str(&format!("w\t{code}\n"), "c", Arc::clone(&ts), ParseMode::Strict).is_err(), || {
            format!("strict mode accepted {code}")
        })?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let alphabet: Vec<char> = "অআইকখগঘঙচছজঝািীুূৃেৈোৌ্ৰৱ।abcXYZ019#,.\u{0301}".chars().collect();
    let corpora = 1200;
    for k in 0..corpora {
        let sentences = (0..rng.gen_range(0..6))
            .map(|i| {
                let tokens = (0..rng.gen_range(1..8))
                    .map(|_| {
                        let surface: String = (0..rng.gen_range(1..5)).map(|_| alphabet[rng.gen_range(0..alphabet.len())]).collect();
                        // an untagged lone `#` would read back as a comment line
                        let gold = (rng.gen_bool(0.9) || surface == "#").then(|| rng.gen_range(0..41));
                        Token::new(&surface, gold).unwrap()
                    })
                    .collect();
                Sentence::new(format!("r{i}"), tokens).unwrap()
            })
            .collect();
        let c = TaggedCorpus::new(sentences, Arc::clone(&ts));
        let text = String::from_utf8(write_column_file(&c)).unwrap();
        let back = parse_column_str(&text, "r", Arc::clone(&ts), ParseMode::Strict).unwrap().corpus;
        ensure(back == c, || format!("random corpus {k} does not round-trip:\n{text}"))?;
    }
    Ok(format!("41 tags / 11 categories; reference sample and {corpora} random corpora round-trip; strict accepts exactly the 41 codes"))
}

fn determinism_and_persistence() -> Outcome {
    let spec = SyntheticSpec { train: 60, dev: 10, test: 10, embedding_dim: 16, ..SyntheticSpec::default() };
    let data = unambiguous_corpus(&spec);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let chars = CharEncoder::new("w0123456789".chars(), 4, 3, 0.1, &mut rng);
    let stack = EmbeddingStack::new(vec![
        StackEntry::new("words", Provider::Static(data.embeddings.clone()), true),
        StackEntry::new("chars", Provider::Char(chars), true),
    ])
    .unwrap();
    let config = TrainingConfig { hidden_size: 8, hidden_layers: 2, max_epochs: 3, seed: 5, ..TrainingConfig::default() };
    let run = || {
        let model = SequenceModel::new(stack.clone(), Arc::clone(&data.train.tagset), config.clone()).unwrap();
        train(model, &data.train, &data.dev, &config).unwrap()
    };
    let (a, curve_a) = run();
    let (b, curve_b) = run();
    let bits = |m: &SequenceModel| -> Vec<u64> { m.trainable_params().iter().flat_map(|p| p.value.iter().map(|v| v.to_bits())).collect() };
    ensure(bits(&a) == bits(&b), || "weights differ between identical runs".into())?;
    ensure(curve_a == curve_b, || "learning curves differ between identical runs".into())?;

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    save_model(&a, &path).unwrap();
    let loaded = load_model(&path).unwrap();
    ensure(loaded.dev_score == a.dev_score, || "dev score not preserved".into())?;
    let vocab: Vec<String> = data.embeddings.words().iter().cloned().chain(["w999".into(), "zzz".into()]).collect();
    for i in 0..100 {
        let n = rng.gen_range(1..20);
        let words: Vec<&str> = (0..n).map(|_| vocab[rng.gen_range(0..vocab.len())].as_str()).collect();
        let s = Sentence::from_surfaces(format!("q{i}"), &words).unwrap();
        ensure(a.tag_sentence(&s).unwrap() == loaded.tag_sentence(&s).unwrap(), || format!("sentence {i} tagged differently after reload"))?;
    }
    Ok(format!("{} weights bitwise identical; 100 sentences tagged identically after reload", bits(&a).len()))
}

fn evaluation_identities() -> Outcome {
    let ts = Arc::new(builtin_bis_tagset());
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for k in 0..500 {
        let t = rng.gen_range(1..=41);
        let mut gold = Vec::new();
        let mut pred = Vec::new();
        for i in 0..rng.gen_range(1..6) {
            let n = rng.gen_range(1..10);
            let s = Sentence::from_surfaces(format!("e{i}"), &vec!["w"; n]).unwrap();
            let g: Vec<usize> = (0..n).map(|_| rng.gen_range(0..t)).collect();
            let p: Vec<usize> = g.iter().map(|&x| if rng.gen_bool(0.3) { rng.gen_range(0..t) } else { x }).collect();
            gold.push(s.with_tags(&g));
            pred.push(s.with_tags(&p));
        }
        let r = evaluate(&TaggedCorpus::new(gold, Arc::clone(&ts)), &TaggedCorpus::new(pred, Arc::clone(&ts))).unwrap();
        ensure(r.micro_f1 == r.accuracy, || format!("set {k}: micro F1 {} != accuracy {}", r.micro_f1, r.accuracy))?;
    }

    // gold A x5, B x5; predicted A x8 (3 of them wrong), B x2
    let (a, b) = (ts.ordinal("N_NN").unwrap(), ts.ordinal("V_VM").unwrap());
    let s = Sentence::from_surfaces("h", &["w"; 10]).unwrap();
    let gold = TaggedCorpus::new(vec![s.with_tags(&[a, a, a, a, a, b, b, b, b, b])], Arc::clone(&ts));
    let pred = TaggedCorpus::new(vec![s.with_tags(&[a, a, a, a, a, a, a, a, b, b])], Arc::clone(&ts));
    let r = evaluate(&gold, &pred).unwrap();
    let f1 = |code: &str| r.per_tag.iter().find(|x| x.code == code).unwrap().f1;
    ensure(r.accuracy == 0.7, || format!("accuracy {}", r.accuracy))?;
    ensure(f1("N_NN") == 10.0 / 13.0, || format!("F1(A) {}", f1("N_NN")))?;
    ensure(f1("V_VM") == 4.0 / 7.0, || format!("F1(B) {}", f1("V_VM")))?;
    Ok("micro F1 == accuracy on 500 random sets; hand example 0.7, 10/13, 4/7 exact".into())
}

fn bootstrap_contract() -> Outcome {
    let scenario = bootstrap_scenario(&SyntheticSpec { seed: 21, ..SyntheticSpec::default() }, 12, "raw.txt");
    let data = &scenario.data;
    let config = scaled_config(Architecture::BiLstmCrf, 21);
    let model = SequenceModel::new(data.stack(), Arc::clone(&data.train.tagset), config.clone()).unwrap();
    let (incumbent, _) = train(model, &data.train, &data.dev, &config).unwrap();

    let heldout = data.test.clone();
    let hash = corpus_hash(&heldout);
    let retrain = TrainingConfig { max_epochs: 10, ..config };
    let report = bootstrap_cycle(
        &incumbent,
        CycleInputs {
            base: &data.train,
            dev: &data.dev,
            heldout: &heldout,
            raw: &scenario.raw_text,
            provenance: Provenance { source: "raw.txt".into(), model_id: "incumbent".into(), timestamp: 0 },
            corrected: std::slice::from_ref(&scenario.corrected),
        },
        &retrain,
    )
    .unwrap();
    ensure(report.heldout_hash_before == hash && report.heldout_hash_after == hash && corpus_hash(&heldout) == hash, || {
        "held-out set changed".into()
    })?;
    let want_tokens = data.train.token_count() + scenario.corrected.token_count();
    ensure(report.merged_tokens == want_tokens, || format!("merged {} tokens, expected {want_tokens}", report.merged_tokens))?;
    ensure(report.review.corpus.sentence_count() == scenario.corrected.sentence_count(), || "review file lost sentences".into())?;
    let (before, after) = (report.before.accuracy, report.after.accuracy);
    ensure(after >= before, || format!("after {after:.4} < before {before:.4}"))?;
    Ok(format!(
        "held-out hash stable; {} + {} = {} tokens; accuracy {:.2}% -> {:.2}%",
        data.train.token_count(),
        scenario.corrected.token_count(),
        report.merged_tokens,
        100.0 * before,
        100.0 * after
    ))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 11] = [
        ("CRF oracle equivalence", crf_oracle),
        ("gradient fidelity", gradient_fidelity),
        ("marginal identity", marginal_identity),
        ("shift invariance", shift_invariance),
        ("synthetic convergence", synthetic_convergence),
        ("architecture ordering", architecture_ordering),
        ("stacking dimensionality and equivalence", stacking),
        ("corpus round-trip", corpus_round_trip),
        ("determinism and persistence", determinism_and_persistence),
        ("evaluation identities", evaluation_identities),
        ("bootstrap contract", bootstrap_contract),
    ];
    let only: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if only.is_some_and(|n| n != i + 1) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name} ({secs:.1}s): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name} ({secs:.1}s): {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
