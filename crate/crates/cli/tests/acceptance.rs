//! Acceptance checks. Each criterion prints one PASS/FAIL line; the process
//! exits non-zero if any fails.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;
use stackner::corpus::{
    decode_bio, encode_bio, make_folds, write_conll, EntitySpan, Label, LabeledText, Sentence, Tag, TagScheme,
    Token,
};
use stackner::crf::{forward_log_z, nll_and_grad, viterbi, CrfParams, Emissions};
use stackner::embeddings::{read_ctx_file, CtxEmbeddingFile, EmbeddingStackSpec, Provider, StaticVecTable};
use stackner::ensemble::{combine_clf, combine_ner, repair_bio, vote_token};
use stackner::lingfeat::FeatureDims;
use stackner::metrics::{clf_prf, ner_prf};
use stackner::tagger::{train, Providers, Tagger, TaggerConfig};
use stackner::textclf::{
    predict_label, read_sent_file, solve_dual, train_classifier, train_logreg, train_nn, train_svm, Classifier,
    ClfConfig, ClfFamily, ClfModel, LogRegConfig, LogRegModel, MlpModel, NnConfig, SentEmbKind, SentEmbeddingFile,
    SvmConfig,
};
use stackner::Error;

type Rng64 = Xoshiro256StarStar;

fn rng(seed: u64) -> Rng64 {
    Rng64::seed_from_u64(seed)
}

// ---- shared fixtures -------------------------------------------------------

const FILLER: &[&str] = &["i", "took", "some", "today", "and", "felt", "fine", "after", "the", "dose"];
const DRUGS: &[&str] = &["Aspirin", "Ibuprofen", "Xanax", "Lipitor", "Zoloft", "Prozac", "Advil", "Tylenol"];

fn tags(strs: &[&str]) -> Vec<Tag> {
    strs.iter().map(|t| t.parse().unwrap()).collect()
}

/// Lowercase filler with exactly one capitalized drug name per sentence.
fn drug_corpus(n: usize, seed: u64) -> Vec<Sentence> {
    let mut r = rng(seed);
    (0..n)
        .map(|id| {
            let len = r.random_range(3..=6);
            let at = r.random_range(0..len);
            let mut tokens = Vec::new();
            let mut gold = Vec::new();
            for i in 0..len {
                if i == at {
                    tokens.push(Token::new(DRUGS[r.random_range(0..DRUGS.len())]));
                    gold.push("B-DRUG");
                } else {
                    tokens.push(Token::new(FILLER[r.random_range(0..FILLER.len())]));
                    gold.push("O");
                }
            }
            Sentence {
                id,
                tokens,
                gold_tags: Some(tags(&gold)),
            }
        })
        .collect()
}

fn blobs(n: usize, dim: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<Label>) {
    let mut r = rng(seed);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 0..n {
        let pos = i % 3 == 0;
        let c = if pos { 2.0 } else { -2.0 };
        xs.push((0..dim).map(|_| c + r.random_range(-1.0..1.0)).collect());
        ys.push(Label::from_bool(pos));
    }
    (xs, ys)
}

fn all_tags(types: &[&str]) -> Vec<Tag> {
    let mut out = vec![Tag::Outside];
    for t in types {
        out.push(Tag::Begin(t.to_string()));
        out.push(Tag::Inside(t.to_string()));
    }
    out
}

/// Every tag sequence of length `len` over `alphabet`.
fn sequences(alphabet: &[Tag], len: usize) -> Vec<Vec<Tag>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                alphabet.iter().map(move |t| {
                    let mut p = prefix.clone();
                    p.push(t.clone());
                    p
                })
            })
            .collect();
    }
    out
}

/// No `I-t` without a preceding `B-t` or `I-t`.
fn is_valid_bio(seq: &[Tag]) -> bool {
    seq.iter().enumerate().all(|(i, t)| match t {
        Tag::Inside(ty) => i > 0 && seq[i - 1].entity_type() == Some(ty.as_str()),
        _ => true,
    })
}

fn random_valid_tags(r: &mut Rng64, len: usize, types: &[&str]) -> Vec<Tag> {
    let alphabet = all_tags(types);
    let raw: Vec<Tag> = (0..len).map(|_| alphabet[r.random_range(0..alphabet.len())].clone()).collect();
    repair_bio(&raw)
}

// ---- criteria ----------------------------------------------------------------

fn crf_oracle() -> Result<String, String> {
    let start = Instant::now();
    let mut r = rng(11);
    let mut worst = 0.0f64;
    for draw in 0..200 {
        let n = r.random_range(1..=5);
        let k = r.random_range(1..=4);
        let mut v = |m: usize| -> Vec<f64> { (0..m).map(|_| r.random_range(-3.0..3.0)).collect() };
        let params = CrfParams {
            num_tags: k,
            transitions: v(k * k),
            start: v(k),
            stop: v(k),
        };
        let e = Emissions::new(n, k, v(n * k));
        // Exhaustive enumeration in lexicographic order.
        let mut best: Option<(f64, Vec<usize>)> = None;
        let mut scores = Vec::new();
        for code in 0..k.pow(n as u32) {
            let path: Vec<usize> = (0..n).rev().map(|p| code / k.pow(p as u32) % k).collect();
            let mut s = params.start[path[0]] + params.stop[path[n - 1]];
            for t in 0..n {
                s += e.data[t * k + path[t]];
                if t > 0 {
                    s += params.transitions[path[t - 1] * k + path[t]];
                }
            }
            if best.as_ref().is_none_or(|(b, _)| s > *b) {
                best = Some((s, path));
            }
            scores.push(s);
        }
        let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_z = m + scores.iter().map(|s| (s - m).exp()).sum::<f64>().ln();
        let got = forward_log_z(&e, &params);
        if (got - log_z).abs() > 1e-9 {
            return Err(format!("draw {draw}: logZ {got} vs enumerated {log_z}"));
        }
        worst = worst.max((got - log_z).abs());
        let total: f64 = scores.iter().map(|s| (s - got).exp()).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(format!("draw {draw}: path probabilities sum to {total}"));
        }
        let (best_score, best_path) = best.unwrap();
        let (path, score) = viterbi(&e, &params);
        if path != best_path || (score - best_score).abs() > 1e-9 {
            return Err(format!("draw {draw}: viterbi {path:?} ({score}) vs {best_path:?} ({best_score})"));
        }
    }
    // All-zero scores: every path ties, the lowest-index path wins.
    let (path, _) = viterbi(&Emissions::new(4, 3, vec![0.0; 12]), &CrfParams::zeros(3));
    if path != vec![0; 4] {
        return Err(format!("tie-break picked {path:?}"));
    }
    within(start, Duration::from_secs(10))?;
    Ok(format!("200 draws, max |dlogZ| {worst:.1e}"))
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    let took = start.elapsed();
    if took > limit {
        return Err(format!("took {took:?}, limit {limit:?}"));
    }
    Ok(())
}

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

fn tiny_tagger_config(seed: u64) -> TaggerConfig {
    TaggerConfig {
        hidden: 3,
        features: FeatureDims { pos: 2, ortho: 2, cap: 1 },
        stack: EmbeddingStackSpec {
            providers: vec![
                Provider::Static { dim: 2 },
                Provider::Char { char_dim: 3, hidden: 2 },
                Provider::Ctx { dim: 2 },
            ],
            features: true,
        },
        init_range: 0.5,
        seed,
        ..TaggerConfig::default()
    }
}

fn gradient_suite() -> Result<String, String> {
    let start = Instant::now();
    let eps = 1e-6;
    let mut r = rng(21);
    let mut instances = 0;
    let mut worst = 0.0f64;

    // CRF layer alone.
    for i in 0..20 {
        let n = r.random_range(1..=4);
        let k = r.random_range(2..=5);
        let mut v = |m: usize| -> Vec<f64> { (0..m).map(|_| r.random_range(-1.0..1.0)).collect() };
        let params = CrfParams {
            num_tags: k,
            transitions: v(k * k),
            start: v(k),
            stop: v(k),
        };
        let e = Emissions::new(n, k, v(n * k));
        let gold: Vec<usize> = (0..n).map(|_| r.random_range(0..k)).collect();
        let (_, g) = nll_and_grad(&e, &params, &gold).map_err(|e| e.to_string())?;
        let nll = |e: &Emissions, p: &CrfParams| nll_and_grad(e, p, &gold).unwrap().0;
        let mut probes: Vec<(f64, f64)> = Vec::new();
        for j in 0..e.data.len() {
            let (mut up, mut down) = (e.clone(), e.clone());
            up.data[j] += eps;
            down.data[j] -= eps;
            probes.push((g.emissions[j], (nll(&up, &params) - nll(&down, &params)) / (2.0 * eps)));
        }
        for j in 0..k * k {
            let (mut up, mut down) = (params.clone(), params.clone());
            up.transitions[j] += eps;
            down.transitions[j] -= eps;
            probes.push((g.transitions[j], (nll(&e, &up) - nll(&e, &down)) / (2.0 * eps)));
        }
        for j in 0..k {
            let (mut up, mut down) = (params.clone(), params.clone());
            up.start[j] += eps;
            down.start[j] -= eps;
            probes.push((g.start[j], (nll(&e, &up) - nll(&e, &down)) / (2.0 * eps)));
            let (mut up, mut down) = (params.clone(), params.clone());
            up.stop[j] += eps;
            down.stop[j] -= eps;
            probes.push((g.stop[j], (nll(&e, &up) - nll(&e, &down)) / (2.0 * eps)));
        }
        for (a, n) in probes {
            let err = rel_err(a, n);
            worst = worst.max(err);
            if err >= 1e-3 {
                return Err(format!("crf instance {i}: analytic {a} vs numeric {n}"));
            }
        }
        instances += 1;
    }

    // Full tagger: projection, BiLSTM, character encoder, feature tables.
    let scheme = TagScheme::new(["DRUG", "ADE"]).unwrap();
    let words = ["took", "Aspirin", "felt", "dizzy", "x2", "OK"];
    let pos = ["VB", "NN", "JJ"];
    let statics = StaticVecTable::from_entries(2, [("took", vec![0.5, -0.25]), ("aspirin", vec![1.0, 0.75])])
        .map_err(|e| e.to_string())?;
    for i in 0..20u64 {
        let n = r.random_range(1..=4);
        let sentence = Sentence {
            id: 0,
            tokens: (0..n)
                .map(|_| {
                    Token::with_pos(words[r.random_range(0..words.len())], pos[r.random_range(0..pos.len())])
                })
                .collect(),
            gold_tags: Some(random_valid_tags(&mut r, n, &["DRUG", "ADE"])),
        };
        let ctx = CtxEmbeddingFile::new(2, vec![(0..2 * n).map(|_| r.random_range(-1.0f32..1.0)).collect()])
            .map_err(|e| e.to_string())?;
        let providers = Providers {
            static_vecs: Some(statics.clone()),
            bpe: None,
        };
        let data = [sentence];
        let tagger = Tagger::new(tiny_tagger_config(i), scheme.clone(), &data, providers).map_err(|e| e.to_string())?;
        let s = &data[0];
        let at = Some((&ctx, 0));
        let (_, grad) = tagger.loss_and_grad(s, at).map_err(|e| e.to_string())?;
        let named: Vec<(&str, Vec<f64>)> = grad.tensors().into_iter().map(|(n, t)| (n, t.to_vec())).collect();
        for (k, (name, analytic)) in named.iter().enumerate() {
            for (j, &a) in analytic.iter().enumerate() {
                let mut probe = tagger.clone();
                probe.params.tensors_mut()[k][j] += eps;
                let up = probe.loss(s, at).unwrap();
                probe.params.tensors_mut()[k][j] -= 2.0 * eps;
                let down = probe.loss(s, at).unwrap();
                let n = (up - down) / (2.0 * eps);
                let err = rel_err(a, n);
                worst = worst.max(err);
                if err >= 1e-3 {
                    return Err(format!("tagger instance {i}: {name}[{j}] analytic {a} vs numeric {n}"));
                }
            }
        }
        instances += 1;
    }
    within(start, Duration::from_secs(60))?;
    Ok(format!("{instances} instances, max rel err {worst:.1e}"))
}

fn overfit() -> Result<String, String> {
    let start = Instant::now();
    let train_set = drug_corpus(20, 1);
    let dev = drug_corpus(10, 2);
    let scheme = TagScheme::new(["DRUG"]).unwrap();
    let config = TaggerConfig::default();
    let (lr, batch, epochs) = (config.learning_rate, config.batch_size, config.epochs);
    if (lr, batch, epochs) != (0.1, 32, 150) {
        return Err(format!("defaults drifted: lr {lr}, batch {batch}, epochs {epochs}"));
    }
    let (_, report) =
        train(&config, &scheme, &train_set, &dev, Providers::default(), None, None).map_err(|e| e.to_string())?;
    if report.best_dev_f1 != 1.0 {
        return Err(format!("best dev F1 {} at epoch {}", report.best_dev_f1, report.best_epoch));
    }
    within(start, Duration::from_secs(300))?;
    Ok(format!(
        "dev F1 1.0 at epoch {} of {}, {:.0?}",
        report.best_epoch,
        report.epochs.len(),
        start.elapsed()
    ))
}

/// Independent strict matcher: linear scans over span lists.
fn brute_counts(
    gold: &[Vec<EntitySpan>],
    pred: &[Vec<EntitySpan>],
    keep: &dyn Fn(&str) -> bool,
) -> BTreeMap<String, (usize, usize, usize)> {
    let mut out: BTreeMap<String, (usize, usize, usize)> = BTreeMap::new();
    for (g, p) in gold.iter().zip(pred) {
        for s in p.iter().filter(|s| keep(&s.etype)) {
            let hit = g.iter().any(|x| x.start == s.start && x.end == s.end && x.etype == s.etype);
            let c = out.entry(s.etype.clone()).or_default();
            if hit {
                c.0 += 1;
            } else {
                c.1 += 1;
            }
        }
        for s in g.iter().filter(|s| keep(&s.etype)) {
            if !p.iter().any(|x| x.start == s.start && x.end == s.end && x.etype == s.etype) {
                out.entry(s.etype.clone()).or_default().2 += 1;
            }
        }
    }
    out
}

fn bio_suite() -> Result<String, String> {
    let alphabet = all_tags(&["A", "B"]);
    let (mut valid, mut total) = (0, 0);
    for len in 0..=6 {
        for seq in sequences(&alphabet, len) {
            total += 1;
            let repaired = repair_bio(&seq);
            if repair_bio(&repaired) != repaired {
                return Err(format!("repair_bio not idempotent on {seq:?}"));
            }
            if !is_valid_bio(&repaired) {
                return Err(format!("repair_bio left {repaired:?} invalid"));
            }
            if is_valid_bio(&seq) {
                valid += 1;
                if repaired != seq {
                    return Err(format!("repair_bio changed valid {seq:?}"));
                }
                let back = encode_bio(&decode_bio(&seq), len).map_err(|e| e.to_string())?;
                if back != seq {
                    return Err(format!("round trip {seq:?} -> {back:?}"));
                }
            }
        }
    }

    let mut r = rng(31);
    let types = ["A", "B", "C"];
    for corpus in 0..100 {
        let sentences = r.random_range(1..=8);
        let mut gold = Vec::new();
        let mut pred = Vec::new();
        for _ in 0..sentences {
            let len = r.random_range(0..=8);
            gold.push(decode_bio(&random_valid_tags(&mut r, len, &types)));
            pred.push(decode_bio(&random_valid_tags(&mut r, len, &types)));
        }
        let filter: Option<BTreeSet<String>> = if corpus % 3 == 0 {
            Some(["A".to_string(), "C".to_string()].into())
        } else {
            None
        };
        let keep = |t: &str| filter.as_ref().is_none_or(|f| f.contains(t));
        let expected = brute_counts(&gold, &pred, &keep);
        let report = ner_prf(&gold, &pred, filter.as_ref()).map_err(|e| e.to_string())?;
        let got: BTreeMap<String, (usize, usize, usize)> =
            report.per_type.iter().map(|(k, p)| (k.clone(), (p.tp, p.fp, p.fn_))).collect();
        if got != expected {
            return Err(format!("corpus {corpus}: {got:?} vs brute force {expected:?}"));
        }
        let sum = expected
            .values()
            .fold((0, 0, 0), |a, c| (a.0 + c.0, a.1 + c.1, a.2 + c.2));
        if (report.micro.tp, report.micro.fp, report.micro.fn_) != sum {
            return Err(format!("corpus {corpus}: micro counts differ"));
        }
    }
    Ok(format!("{valid} valid of {total} sequences, 100 corpora"))
}

fn ensemble_suite() -> Result<String, String> {
    let mut r = rng(41);
    let types = ["ADE", "DRUG"];
    for _ in 0..200 {
        let lens: Vec<usize> = (0..r.random_range(1..=4)).map(|_| r.random_range(0..=7)).collect();
        let one: Vec<Vec<Tag>> = lens.iter().map(|&n| random_valid_tags(&mut r, n, &types)).collect();
        let same = combine_ner(&[one.clone(), one.clone(), one.clone()], 0).map_err(|e| e.to_string())?;
        if same != one {
            return Err("unanimous members changed".into());
        }
        // Arbitrary (possibly invalid) member outputs still vote to valid BIO.
        let alphabet = all_tags(&types);
        let members: Vec<Vec<Vec<Tag>>> = (0..3)
            .map(|_| {
                lens.iter()
                    .map(|&n| (0..n).map(|_| alphabet[r.random_range(0..alphabet.len())].clone()).collect())
                    .collect()
            })
            .collect();
        let voted = combine_ner(&members, 0).map_err(|e| e.to_string())?;
        for s in &voted {
            if !is_valid_bio(s) || encode_bio(&decode_bio(s), s.len()).map_err(|e| e.to_string())? != *s {
                return Err(format!("voted output {s:?} does not decode to valid spans"));
            }
        }
    }
    let distinct = tags(&["B-ADE", "O", "I-DRUG"]);
    if vote_token(&distinct, &distinct[0]) != distinct[0] {
        return Err("all-distinct vote did not pick the confident tag".into());
    }
    let members: Vec<Vec<Vec<Tag>>> = distinct.iter().map(|t| vec![vec![Tag::Outside, t.clone()]]).collect();
    let voted = combine_ner(&members, 0).map_err(|e| e.to_string())?;
    if voted[0][1] != distinct[0] {
        return Err(format!("all-distinct position voted {}", voted[0][1]));
    }
    for code in 0..8u32 {
        let labels: Vec<Label> = (0..3).map(|b| Label::from_bool(code >> b & 1 == 1)).collect();
        let expect = Label::from_bool(code.count_ones() >= 2);
        let got = combine_clf(&labels.iter().map(|l| vec![*l]).collect::<Vec<_>>()).map_err(|e| e.to_string())?;
        if got != vec![expect] {
            return Err(format!("labels {labels:?} voted {got:?}"));
        }
    }
    Ok("200 random cases, 8 label combinations".into())
}

fn fold_suite() -> Result<String, String> {
    let mut r = rng(51);
    for u in 0..100 {
        let n_train = r.random_range(2..=120);
        let n_dev = r.random_range(1..=60);
        let mut ids: Vec<String> = (0..n_train + n_dev).map(|i| format!("u{u}-{i}-{}", r.random::<u32>())).collect();
        let dev = ids.split_off(n_train);
        let train_ids = ids;
        let seed = r.random::<u64>();
        let plan = make_folds(&train_ids, &dev, seed).map_err(|e| e.to_string())?;
        let all: HashSet<&str> = train_ids.iter().chain(&dev).map(String::as_str).collect();
        if plan.folds.len() != 3 || plan.confident != 0 {
            return Err(format!("universe {u}: {} folds, confident {}", plan.folds.len(), plan.confident));
        }
        if plan.folds[0].train != train_ids || plan.folds[0].dev != dev {
            return Err(format!("universe {u}: fold 0 is not the input split"));
        }
        let mut in_dev: HashSet<&str> = HashSet::new();
        let mut in_train: HashSet<&str> = HashSet::new();
        for (k, f) in plan.folds.iter().enumerate() {
            let tr: HashSet<&str> = f.train.iter().map(String::as_str).collect();
            let dv: HashSet<&str> = f.dev.iter().map(String::as_str).collect();
            if tr.len() != f.train.len() || dv.len() != f.dev.len() {
                return Err(format!("universe {u} fold {k}: duplicate ids"));
            }
            if !tr.is_disjoint(&dv) || tr.union(&dv).copied().collect::<HashSet<_>>() != all {
                return Err(format!("universe {u} fold {k}: not a partition of the ids"));
            }
            in_dev.extend(&dv);
            in_train.extend(&tr);
        }
        if in_dev != all || in_train != all {
            return Err(format!("universe {u}: some id never in dev or never in train"));
        }
        let (h1, h2) = (&plan.folds[1].dev, &plan.folds[2].dev);
        let halves: HashSet<&str> = h1.iter().chain(h2).map(String::as_str).collect();
        let train_set: HashSet<&str> = train_ids.iter().map(String::as_str).collect();
        if halves != train_set || h1.len() + h2.len() != n_train || h1.len().abs_diff(h2.len()) > 1 {
            return Err(format!("universe {u}: folds 1/2 dev sets are not halves of train"));
        }
        if make_folds(&train_ids, &dev, seed).map_err(|e| e.to_string())? != plan {
            return Err(format!("universe {u}: not deterministic"));
        }
    }
    Ok("100 universes".into())
}

fn svm_suite() -> Result<String, String> {
    // Worked example: x1 = 0 (+1), x2 = 1 (-1), gamma 1, C 1.
    let xs = vec![vec![0.0], vec![1.0]];
    let sol = solve_dual(&xs, &[1.0, -1.0], &[1.0, 1.0], 1.0, 1e-10, 1_000_000);
    if sol.alpha.iter().any(|a| (a - 1.0).abs() > 1e-6) {
        return Err(format!("two-point alphas {:?}", sol.alpha));
    }
    let config = SvmConfig::default();
    let mut r = rng(61);
    for round in 0..30u64 {
        let n = r.random_range(4..=40);
        let (xs, labels) = blobs(n, 2, 600 + round);
        let c = [0.1, 1.0, 10.0][round as usize % 3];
        let m = train_svm(&xs, &labels, c, 10.0, &config).map_err(|e| e.to_string())?;
        if m.c_pos != c * 10.0 || m.c_neg != c {
            return Err(format!("box constraints {} / {} for C {c}", m.c_pos, m.c_neg));
        }
        for (x, l) in xs.iter().zip(&labels) {
            let yf = l.sign() * m.decision(x).map_err(|e| e.to_string())?;
            let bound = if l.is_positive() { m.c_pos } else { m.c_neg };
            let alpha = m
                .support_vectors
                .iter()
                .zip(&m.coef)
                .find(|(sv, _)| *sv == x)
                .map_or(0.0, |(_, c)| c.abs());
            let tol = 1e-3;
            let ok = if alpha == 0.0 {
                yf >= 1.0 - tol
            } else if alpha < bound {
                (yf - 1.0).abs() <= tol
            } else {
                yf <= 1.0 + tol && alpha <= bound
            };
            if !ok {
                return Err(format!("round {round}: KKT violated, alpha {alpha}, bound {bound}, y f {yf}"));
            }
        }
    }
    // The weight scales the positive bound: overlapping points pin alphas at 10 C.
    let xs = vec![vec![0.0], vec![0.05], vec![0.1], vec![0.15]];
    let y = [1.0, -1.0, 1.0, -1.0];
    let c = 0.01;
    let sol = solve_dual(&xs, &y, &[10.0 * c, c, 10.0 * c, c], 1.0, 1e-10, 1_000_000);
    let pos_max = sol.alpha[0].max(sol.alpha[2]);
    if pos_max > 10.0 * c || sol.alpha.iter().zip(&y).any(|(a, &yy)| yy < 0.0 && *a > c) {
        return Err(format!("alphas {:?} exceed their boxes", sol.alpha));
    }
    Ok("worked example, 30 KKT rounds".into())
}

fn classifier_suite() -> Result<String, String> {
    let (xs, labels) = blobs(60, 4, 2);
    let f1 = |pred: &[Label]| clf_prf(&labels, pred).unwrap().micro.f1;

    let lr = train_logreg(&xs, &labels, 10.0, &LogRegConfig::default()).map_err(|e| e.to_string())?;
    let pred: Vec<Label> = xs.iter().map(|x| Label::from_bool(lr.probability(x).unwrap() >= 0.5)).collect();
    if f1(&pred) != 1.0 {
        return Err(format!("logistic regression training F1 {}", f1(&pred)));
    }
    let nn_config = NnConfig {
        learning_rate: 1e-3,
        epochs: 40,
        hidden: 32,
        ..NnConfig::default()
    };
    let nn = train_nn(&xs, &labels, 10.0, &nn_config, 4).map_err(|e| e.to_string())?;
    let model = ClfModel::Nn(nn.clone());
    let pred: Vec<Label> = xs.iter().map(|x| predict_label(&model, x).unwrap().0).collect();
    if f1(&pred) != 1.0 {
        return Err(format!("NN training F1 {}", f1(&pred)));
    }

    // Weighted gradient on a single positive example.
    let x = [0.3, -1.2, 0.7, 2.0];
    let mut lm = LogRegModel::zeros(4);
    lm.w = vec![0.1, 0.2, -0.3, 0.05];
    lm.b = -0.2;
    let (l1, w1, b1) = lm.example_loss_grad(&x, Label::Positive, 1.0);
    let (l10, w10, b10) = lm.example_loss_grad(&x, Label::Positive, 10.0);
    if l10 != 10.0 * l1 || b10 != 10.0 * b1 || w10.iter().zip(&w1).any(|(a, b)| *a != 10.0 * b) {
        return Err("logistic-regression weighted gradient is not exactly 10x".into());
    }
    let mlp = MlpModel::init(4, 5, 9);
    let mut g1 = MlpModel::zeros(4, 5);
    let mut g10 = MlpModel::zeros(4, 5);
    let l1 = mlp.example_loss_grad(&x, Label::Positive, 1.0, &mut g1);
    let l10 = mlp.example_loss_grad(&x, Label::Positive, 10.0, &mut g10);
    let exact = g10
        .tensors()
        .iter()
        .zip(g1.tensors())
        .all(|(a, b)| a.1.iter().zip(b.1).all(|(p, q)| *p == 10.0 * q));
    if l10 != 10.0 * l1 || !exact {
        return Err("NN weighted gradient is not exactly 10x".into());
    }

    // Bitwise determinism of every trainer.
    if train_logreg(&xs, &labels, 10.0, &LogRegConfig::default()).unwrap() != lr {
        return Err("logistic regression not deterministic".into());
    }
    if train_nn(&xs, &labels, 10.0, &nn_config, 4).unwrap() != nn {
        return Err("NN not deterministic".into());
    }
    let svm = |seed| {
        let (items, sent) = clf_texts(&xs, &labels);
        let config = ClfConfig {
            family: ClfFamily::Svm,
            seed,
            ..ClfConfig::default()
        };
        train_classifier(&config, &items, None, Some(&sent)).unwrap().model
    };
    if svm(3) != svm(3) {
        return Err("SVM grid search not deterministic".into());
    }
    Ok("logreg and NN fit, 10x exact, deterministic".into())
}

fn clf_texts(xs: &[Vec<f64>], labels: &[Label]) -> (Vec<LabeledText>, SentEmbeddingFile) {
    let items = labels
        .iter()
        .enumerate()
        .map(|(i, &label)| LabeledText {
            id: format!("t{i}"),
            label,
            text: format!("text number {i}"),
        })
        .collect();
    let rows = xs.iter().flatten().map(|&v| v as f32).collect();
    (items, SentEmbeddingFile::new(SentEmbKind::CtxCls, xs[0].len(), rows).unwrap())
}

// ---- persistence and CLI -------------------------------------------------------

fn cli(args: &[&str]) -> Result<std::process::Output, String> {
    Command::new(env!("CARGO_BIN_EXE_stackner"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())
}

fn cli_ok(args: &[&str]) -> Result<std::process::Output, String> {
    let out = cli(args)?;
    if !out.status.success() {
        return Err(format!(
            "`stackner {}` exited {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(out)
}

fn write(path: &Path, text: impl AsRef<[u8]>) -> Result<(), String> {
    std::fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))
}

fn read(path: &Path) -> Result<Vec<u8>, String> {
    std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn persistence_suite() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = dir.path();

    // Library round trips.
    let scheme = TagScheme::new(["DRUG"]).unwrap();
    let config = TaggerConfig {
        hidden: 8,
        epochs: 4,
        ..tiny_tagger_config(5)
    };
    let data = drug_corpus(12, 3);
    let probe = drug_corpus(8, 4);
    let ctx = |s: &[Sentence], seed| {
        let mut r = rng(seed);
        CtxEmbeddingFile::new(2, s.iter().map(|s| (0..2 * s.len()).map(|_| r.random_range(-1.0f32..1.0)).collect()).collect())
            .unwrap()
    };
    let providers = Providers {
        static_vecs: Some(StaticVecTable::from_entries(2, [("took", vec![0.5, -0.25])]).unwrap()),
        bpe: None,
    };
    let (tagger, _) = train(&config, &scheme, &data, &data, providers, Some(&ctx(&data, 1)), Some(&ctx(&data, 1)))
        .map_err(|e| e.to_string())?;
    let tdir = root.join("tagger");
    tagger.save(&tdir).map_err(|e| e.to_string())?;
    let back = Tagger::load(&tdir).map_err(|e| e.to_string())?;
    let probe_ctx = ctx(&probe, 2);
    let bits = |t: &Tagger| -> Vec<u64> {
        t.params.tensors().iter().flat_map(|(_, v)| v.iter().map(|x| x.to_bits())).collect()
    };
    if bits(&back) != bits(&tagger)
        || back.predict(&probe, Some(&probe_ctx)).unwrap() != tagger.predict(&probe, Some(&probe_ctx)).unwrap()
    {
        return Err("tagger save/load changed parameters or predictions".into());
    }
    let emissions = |t: &Tagger| -> Vec<u64> {
        (0..probe.len())
            .flat_map(|i| t.encode(&probe[i], Some((&probe_ctx, i))).unwrap().data.iter().map(|v| v.to_bits()).collect::<Vec<_>>())
            .collect()
    };
    if emissions(&back) != emissions(&tagger) {
        return Err("reloaded tagger emissions differ bitwise".into());
    }
    let (xs, labels) = blobs(30, 3, 6);
    let (items, sent) = clf_texts(&xs, &labels);
    for family in [ClfFamily::Svm, ClfFamily::Logreg, ClfFamily::Nn] {
        let config = ClfConfig {
            family,
            ..ClfConfig::default()
        };
        let clf = train_classifier(&config, &items, None, Some(&sent)).map_err(|e| e.to_string())?;
        let cdir = root.join(format!("clf-{family:?}"));
        clf.save(&cdir).map_err(|e| e.to_string())?;
        let back = Classifier::load(&cdir).map_err(|e| e.to_string())?;
        let a = clf.predict(&items, Some(&sent)).unwrap();
        let b = back.predict(&items, Some(&sent)).unwrap();
        if back.model != clf.model || a.iter().zip(&b).any(|(x, y)| x.0 != y.0 || x.1.to_bits() != y.1.to_bits()) {
            return Err(format!("{family:?} classifier save/load not bitwise identical"));
        }
    }

    // Misaligned embedding files name the offending sentence.
    let mut bad = ctx(&data, 7);
    let mut blocks: Vec<Vec<f32>> = (0..bad.sentence_count())
        .map(|i| (0..bad.token_count(i)).flat_map(|t| bad.vector(i, t).to_vec()).collect())
        .collect();
    blocks[5].extend([0.0, 0.0]);
    bad = CtxEmbeddingFile::new(2, blocks).unwrap();
    match read_ctx_file(&bad.to_bytes().unwrap(), &data) {
        Err(Error::Alignment { sentence: 5, .. }) => {}
        other => return Err(format!("CTXE misalignment not reported at sentence 5: {other:?}")),
    }
    let short = SentEmbeddingFile::new(SentEmbKind::CtxCls, 3, vec![0.0; 3 * 29]).unwrap();
    match read_sent_file(&short.to_bytes().unwrap(), &items) {
        Err(Error::Alignment { sentence: 29, .. }) => {}
        other => return Err(format!("SENT misalignment not reported at sentence 29: {other:?}")),
    }

    cli_suite(root)?;
    Ok("save/load bitwise, CLI byte-identical, misalignment indexed".into())
}

fn cli_suite(root: &Path) -> Result<(), String> {
    let train_path = root.join("train.conll");
    let dev_path = root.join("dev.conll");
    let test_path = root.join("test.conll");
    write(&train_path, write_conll(&drug_corpus(16, 10), None).unwrap())?;
    write(&dev_path, write_conll(&drug_corpus(6, 11), None).unwrap())?;
    let test = drug_corpus(6, 12);
    write(&test_path, write_conll(&test, None).unwrap())?;
    let config = serde_json::json!({
        "task": "ner",
        "seed": 7,
        "train": "train.conll",
        "dev": "dev.conll",
        "test": "test.conll",
        "tagger": {
            "hidden": 8,
            "epochs": 3,
            "stack": { "providers": [{ "kind": "char", "char_dim": 4, "hidden": 4 }], "features": true }
        }
    });
    let config_path = root.join("run.json");
    write(&config_path, config.to_string())?;

    // Two identical runs give byte-identical predictions.
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let model = root.join(format!("model-{run}"));
        let pred = root.join(format!("pred-{run}.conll"));
        cli_ok(&["train-ner", "--config", s(&config_path), "--model-dir", s(&model)])?;
        cli_ok(&["predict", "--model-dir", s(&model), "--input", s(&test_path), "--out", s(&pred)])?;
        outputs.push(read(&pred)?);
        let runs = String::from_utf8(read(&model.join("runs.jsonl"))?).unwrap();
        if runs.lines().count() != 2 || !runs.contains("\"seed\":7") || !runs.contains("xoshiro256**") {
            return Err(format!("reproducibility record incomplete: {runs}"));
        }
    }
    if outputs[0] != outputs[1] {
        return Err("two identical CLI runs wrote different prediction files".into());
    }
    let scheme = TagScheme::new(["DRUG"]).unwrap();
    let reread = stackner::corpus::parse_conll(std::str::from_utf8(&outputs[0]).unwrap(), &scheme, false)
        .map_err(|e| format!("prediction file does not re-read: {e}"))?;
    if reread.iter().map(|s| &s.tokens).ne(test.iter().map(|s| &s.tokens)) {
        return Err("prediction file tokens differ from the input".into());
    }

    // Three copies of one model vote to that model's predictions.
    let model = root.join("model-a");
    let voted = root.join("voted.conll");
    cli_ok(&[
        "ensemble", "--config", s(&config_path), "--model-dir", s(&model), "--model-dir", s(&model), "--model-dir",
        s(&model), "--out", s(&voted),
    ])?;
    if read(&voted)? != outputs[0] {
        return Err("ensemble of identical models differs from predict".into());
    }

    // Evaluate with pred = gold.
    let report_path = root.join("report.json");
    cli_ok(&["evaluate", "--task", "ner", "--gold", s(&dev_path), "--pred", s(&dev_path), "--out", s(&report_path)])?;
    let report: serde_json::Value = serde_json::from_slice(&read(&report_path)?).map_err(|e| e.to_string())?;
    if report["micro"]["f1"].as_f64() != Some(1.0) {
        return Err(format!("evaluate pred=gold gave {}", report["micro"]));
    }

    // Fold plan sizes echo the corpus split.
    let ids = |prefix: &str, n: usize| -> String {
        (0..n).map(|i| format!("{prefix}{i}\t{}\tsome text\n", i % 2)).collect()
    };
    write(&root.join("big-train.tsv"), ids("tr", 14755))?;
    write(&root.join("big-dev.tsv"), ids("dv", 4959))?;
    let split_config = root.join("split.json");
    write(
        &split_config,
        serde_json::json!({ "task": "clf", "train": "big-train.tsv", "dev": "big-dev.tsv" }).to_string(),
    )?;
    let plan_path = root.join("folds.json");
    cli_ok(&["split-folds", "--config", s(&split_config), "--seed", "3", "--out", s(&plan_path)])?;
    let plan = stackner::corpus::FoldPlan::from_json(std::str::from_utf8(&read(&plan_path)?).unwrap())
        .map_err(|e| e.to_string())?;
    if (plan.folds[0].train.len(), plan.folds[0].dev.len()) != (14755, 4959) {
        return Err("fold 0 sizes do not echo 14755/4959".into());
    }

    // Exit statuses: config error 2, data error 3.
    let status = cli(&["train-ner", "--config", s(&root.join("missing.json"))])?.status.code();
    if status != Some(2) {
        return Err(format!("missing config exited {status:?}"));
    }
    let bad_config = root.join("bad.json");
    write(&bad_config, r#"{"task": "ner", "tagger": {"learning_rate": -1}}"#)?;
    let status = cli(&["train-ner", "--config", s(&bad_config)])?.status.code();
    if status != Some(2) {
        return Err(format!("invalid config exited {status:?}"));
    }
    let ctx_bad = root.join("bad.ctxe");
    let blocks: Vec<Vec<f32>> = test.iter().enumerate().map(|(i, s)| vec![0.0; s.len() + usize::from(i == 2)]).collect();
    write(&ctx_bad, CtxEmbeddingFile::new(1, blocks).unwrap().to_bytes().unwrap())?;
    let out = cli(&["predict", "--model-dir", s(&model), "--input", s(&test_path), "--ctx-file", s(&ctx_bad)])?;
    let stderr = String::from_utf8_lossy(&out.stderr);
    if out.status.code() != Some(3) || !stderr.contains("sentence 2") {
        return Err(format!("misaligned CTXE via CLI: exit {:?}, {stderr}", out.status.code()));
    }
    Ok(())
}

// ---- driver ----------------------------------------------------------------------

fn main() {
    let criteria: [(&str, fn() -> Result<String, String>); 9] = [
        ("CRF oracle suite", crf_oracle),
        ("Gradient suite", gradient_suite),
        ("Overfit test", overfit),
        ("BIO/span suite", bio_suite),
        ("Ensemble suite", ensemble_suite),
        ("Fold suite", fold_suite),
        ("SVM suite", svm_suite),
        ("Classifier suite", classifier_suite),
        ("Persistence/CLI suite", persistence_suite),
    ];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, check) in criteria {
        if !only.is_empty() && !only.iter().any(|o| name.to_lowercase().contains(&o.to_lowercase())) {
            continue;
        }
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name} ({detail}; {secs:.1}s)"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why} ({secs:.1}s)");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
