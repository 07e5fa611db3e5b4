//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use indexmap::IndexMap;
use mmhate_cli::config::{PipelineConfig, RUN_A_KEYS, RUN_B_KEYS};
use mmhate_cli::features;
use mmhate_cli::manifest::{load_manifest, ArtifactKind};
use mmhate_cli::pipeline;
use mmhate_core::bow::{self, BowVocab};
use mmhate_core::corpus::{generate_synthetic, Dataset, Split, Task, TaskSchema};
use mmhate_core::ensemble::{self, EnsembleWeights, PredictionSet};
use mmhate_core::entfeat::{self, Gazetteer};
use mmhate_core::fusion::EmbeddingStore;
use mmhate_core::gbdt::{self, GbdtConfig, GbdtModel, TreeNode};
use mmhate_core::matrix::Matrix;
use mmhate_core::metrics::{self, Averaging, ConfusionMatrix};
use mmhate_core::synfeat::{self, SYMBOLS};
use mmhate_core::table::FeatureTable;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;

type Check = Result<String, String>;

/// Name, time limit in seconds, check.
type Criterion = (&'static str, u64, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

// ---------------------------------------------------------------- synfeat

/// Character tally built from regex Unicode classes, in the frozen order.
struct TallyOracle {
    upper: Regex,
    lower: Regex,
    digit: Regex,
    alpha: Regex,
    space: Regex,
    word: Regex,
}

impl TallyOracle {
    fn new() -> Self {
        TallyOracle {
            upper: Regex::new(r"^\p{Uppercase}$").unwrap(),
            lower: Regex::new(r"^\p{Lowercase}$").unwrap(),
            digit: Regex::new(r"^\p{Nd}$").unwrap(),
            alpha: Regex::new(r"^\p{Alphabetic}$").unwrap(),
            space: Regex::new(r"^\p{White_Space}$").unwrap(),
            word: Regex::new(r"\S+").unwrap(),
        }
    }

    fn vector(&self, text: &str) -> Vec<f64> {
        let (mut n, mut up, mut low, mut dig, mut ws, mut special) =
            (0u64, 0u64, 0u64, 0u64, 0u64, 0u64);
        let mut buf = [0u8; 4];
        for c in text.chars() {
            let s: &str = c.encode_utf8(&mut buf);
            n += 1;
            let is_ws = self.space.is_match(s);
            let is_digit = self.digit.is_match(s);
            ws += is_ws as u64;
            dig += is_digit as u64;
            up += self.upper.is_match(s) as u64;
            low += self.lower.is_match(s) as u64;
            if !(is_ws || is_digit || self.alpha.is_match(s)) {
                special += 1;
            }
        }
        let r = |k: u64| if n == 0 { 0.0 } else { k as f64 / n as f64 };
        let sym: Vec<u64> = SYMBOLS
            .iter()
            .map(|&s| text.chars().filter(|&c| c == s).count() as u64)
            .collect();
        let mut v = vec![
            self.word.find_iter(text).count() as f64,
            n as f64,
            r(up),
            r(dig),
            r(special),
            r(ws),
        ];
        v.extend(sym.iter().map(|&k| r(k)));
        v.extend(sym.iter().map(|&k| k as f64));
        v.push(r(low));
        v
    }
}

const HAND_STRINGS: [&str; 20] = [
    "",
    "Ab! c",
    "1234",
    "Hello World",
    "STOP RUSSIAN AGRESSOR ADOLF PUTIN HANDS OFF UKRAINE",
    "!?@%*$&#.:/-=",
    "a-b=c/d:e.f#g&h$i*j%k@l?m!n",
    "   \t\n  ",
    "mIxEd CaSe 42 times!!",
    "email@example.com 50% off *now* $5 & more #deal",
    "Ünïcödé ÀÉÎ straße",
    "Добрый день, МИР!",
    "٣٤٥ ١٢",
    "中文 字符 测试。",
    "emoji 😀🎉 fun",
    "nbsp\u{00A0}and\u{2003}em space",
    "ǅungla ǈ",
    "½ ² Ⅷ",
    "e\u{0301}te\u{0301}",
    "line1\nline2\r\nEND...",
];

const FUZZ_ALPHABET: &[char] = &[
    'a', 'z', 'A', 'Z', '0', '9', ' ', '\t', '\n', '!', '?', '@', '%', '*', '$', '&', '#', '.',
    ':', '/', '-', '=', ',', '_', '~', 'é', 'Ä', 'ß', 'Ω', 'ж', 'Я', '中', '٣', '½', 'ǅ', 'Ⅷ',
    '\u{0301}', '\u{00A0}', '\u{2003}', '😀', '。',
];

fn fuzz_string(rng: &mut ChaCha8Rng, ascii_only: bool) -> String {
    let len = rng.random_range(0..40);
    (0..len)
        .map(|_| {
            if ascii_only {
                char::from(rng.random_range(0x20u8..0x7f))
            } else {
                FUZZ_ALPHABET[rng.random_range(0..FUZZ_ALPHABET.len())]
            }
        })
        .collect()
}

fn check_invariants(text: &str) -> Result<(), String> {
    use synfeat::{CAPITAL_RATIO, DIGIT_RATIO, LOWERCASE_RATIO, SPECIAL_RATIO, WHITESPACE_RATIO};
    let v = synfeat::extract_syntactic(text);
    let vals = v.values();
    ensure!(vals.len() == 33, "{text:?}: length {}", vals.len());
    ensure!(
        synfeat::extract_syntactic(text).values().map(f64::to_bits) == vals.map(f64::to_bits),
        "{text:?}: not pure"
    );
    let n = v.char_count();
    ensure!(n == text.chars().count() as f64, "{text:?}: char_count");
    let ratios = [
        CAPITAL_RATIO,
        DIGIT_RATIO,
        SPECIAL_RATIO,
        WHITESPACE_RATIO,
        LOWERCASE_RATIO,
    ];
    for &i in &ratios {
        ensure!(
            (0.0..=1.0).contains(&vals[i]),
            "{text:?}: ratio {i} = {}",
            vals[i]
        );
    }
    let mut sym_total = 0.0;
    for i in 0..SYMBOLS.len() {
        let (r, c) = (v.symbol_ratio(i), v.symbol_count(i));
        ensure!((0.0..=1.0).contains(&r), "{text:?}: symbol ratio {i}");
        ensure!(
            c >= 0.0 && c.fract() == 0.0,
            "{text:?}: symbol count {i} = {c}"
        );
        let expect = if n == 0.0 { 0.0 } else { c / n };
        ensure!(
            r.to_bits() == expect.to_bits(),
            "{text:?}: ratio x char_count != count for {i}"
        );
        sym_total += c;
    }
    let special = (vals[SPECIAL_RATIO] * n).round();
    ensure!(
        sym_total <= special,
        "{text:?}: symbols {sym_total} > special {special}"
    );
    let five: f64 = ratios.iter().map(|&i| vals[i]).sum();
    ensure!(
        five <= 1.0 + 4.0 * f64::EPSILON,
        "{text:?}: class ratios sum to {five}"
    );
    if text.is_ascii() && !text.is_empty() {
        ensure!(
            (five - 1.0).abs() <= f64::EPSILON,
            "{text:?}: ASCII ratios sum to {five}"
        );
    }
    let mut chars: Vec<char> = text.chars().collect();
    chars.reverse();
    let rev: String = chars.iter().collect();
    ensure!(
        synfeat::extract_syntactic(&rev).values().map(f64::to_bits) == vals.map(f64::to_bits),
        "{text:?}: reversal changed the vector"
    );
    if !text.is_empty() {
        let more = synfeat::extract_syntactic(&format!("{text}!"));
        ensure!(
            more.symbol_count(0) == v.symbol_count(0) + 1.0,
            "{text:?}: '!' count"
        );
        ensure!(
            more.char_count() == n + 1.0,
            "{text:?}: char count after '!'"
        );
    }
    Ok(())
}

fn synfeat_suite() -> Check {
    let oracle = TallyOracle::new();
    for s in HAND_STRINGS {
        let got = synfeat::extract_syntactic(s);
        let want = oracle.vector(s);
        for (i, (g, w)) in got.values().iter().zip(&want).enumerate() {
            ensure!(
                g.to_bits() == w.to_bits(),
                "{s:?} dim {i} ({}): got {g}, oracle {w}",
                synfeat::FEATURE_NAMES[i]
            );
        }
        check_invariants(s)?;
    }
    let ab = synfeat::extract_syntactic("Ab! c");
    let v = ab.values();
    ensure!(
        v[0] == 2.0
            && v[1] == 5.0
            && v[2] == 0.2
            && v[32] == 0.4
            && v[5] == 0.2
            && v[4] == 0.2
            && v[6] == 0.2
            && v[19] == 1.0
            && v[3] == 0.0,
        "\"Ab! c\" fixture mismatch: {v:?}"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(20_000);
    for i in 0..10_000 {
        let s = fuzz_string(&mut rng, i % 4 == 0);
        check_invariants(&s)?;
        let mut chars: Vec<char> = s.chars().collect();
        chars.shuffle(&mut rng);
        let shuffled: String = chars.into_iter().collect();
        let (a, b) = (
            synfeat::extract_syntactic(&s),
            synfeat::extract_syntactic(&shuffled),
        );
        ensure!(
            a.values()[1..]
                .iter()
                .zip(&b.values()[1..])
                .all(|(x, y)| x.to_bits() == y.to_bits()),
            "{s:?}: shuffle changed a character statistic"
        );
    }
    Ok(
        "20 strings match the tally oracle on 33 dims; 10000 fuzz strings hold all invariants"
            .into(),
    )
}

// ---------------------------------------------------------------- entities

fn worked_example() -> Check {
    let gaz = Gazetteer::new(&["putin", "adolf"], &["russian"], &["nato"]).map_err(err)?;
    let text = "STOP RUSSIAN AGRESSOR ADOLF PUTIN HANDS OFF UKRAINE";
    let counts = entfeat::count_entities(&entfeat::gazetteer_recognize("ex", text, &gaz));
    ensure!(
        counts.to_array() == [2, 1, 0],
        "worked sentence gave {:?}",
        counts.to_array()
    );
    let nato = entfeat::count_entities(&entfeat::gazetteer_recognize("ex", "nato nato", &gaz));
    ensure!(
        nato.to_array() == [0, 0, 2],
        "\"nato nato\" gave {:?}",
        nato.to_array()
    );
    Ok("[2,1,0] for the worked sentence".into())
}

// ---------------------------------------------------------------- gbdt

const GAIN_TOL: f64 = 1e-12;

#[derive(Debug, PartialEq)]
enum Stump {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: f64,
        right: f64,
    },
}

#[derive(Clone, Copy)]
struct Reg {
    lambda: f64,
    gamma: f64,
    mcw: f64,
    lr: f64,
}

/// First-round binary stump by direct enumeration of every (feature,
/// midpoint) pair. From logit 0 each row has g = 0.5 - y and h = 0.25.
fn brute_stump(x: &[Vec<f64>], y: &[usize], r: Reg) -> Stump {
    let g: Vec<f64> = y.iter().map(|&l| 0.5 - l as f64).collect();
    let h = 0.25;
    let score = |gs: f64, hs: f64| {
        if hs + r.lambda > 0.0 {
            gs * gs / (hs + r.lambda)
        } else {
            0.0
        }
    };
    let leaf = |gs: f64, hs: f64| {
        if hs + r.lambda > 0.0 {
            r.lr * (-gs / (hs + r.lambda))
        } else {
            0.0
        }
    };
    let g_all: f64 = g.iter().sum();
    let h_all = h * y.len() as f64;
    let mut best: Option<(f64, usize, f64, f64, f64, f64, f64)> = None;
    for f in 0..x[0].len() {
        let mut vals: Vec<f64> = x.iter().map(|row| row[f]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let t = w[0] / 2.0 + w[1] / 2.0;
            let (mut gl, mut hl, mut gr, mut hr) = (0.0, 0.0, 0.0, 0.0);
            for (row, gi) in x.iter().zip(&g) {
                if row[f] < t {
                    gl += gi;
                    hl += h;
                } else {
                    gr += gi;
                    hr += h;
                }
            }
            if hl < r.mcw || hr < r.mcw {
                continue;
            }
            let (sl, sr, sp) = (score(gl, hl), score(gr, hr), score(g_all, h_all));
            let gain = sl + sr - sp - r.gamma;
            if gain <= GAIN_TOL * (sl + sr + sp) {
                continue;
            }
            if best.is_none_or(|b| gain > b.0) {
                best = Some((gain, f, t, gl, hl, gr, hr));
            }
        }
    }
    match best {
        None => Stump::Leaf(leaf(g_all, h_all)),
        Some((_, feature, threshold, gl, hl, gr, hr)) => Stump::Split {
            feature,
            threshold,
            left: leaf(gl, hl),
            right: leaf(gr, hr),
        },
    }
}

fn trained_stump(x: &[Vec<f64>], y: &[usize], r: Reg) -> Result<Stump, String> {
    let cfg = GbdtConfig {
        rounds: 1,
        learning_rate: r.lr,
        max_depth: 1,
        lambda: r.lambda,
        gamma: r.gamma,
        min_child_weight: r.mcw,
        preset_name: "stump".into(),
    };
    let names = (0..x[0].len()).map(|j| format!("f{j}")).collect();
    let m = gbdt::train(
        &Matrix::from_rows(x, x[0].len()).map_err(err)?,
        y,
        &cfg,
        2,
        names,
    )
    .map_err(err)?;
    Ok(match &m.trees[0][0] {
        TreeNode::Leaf { value } => Stump::Leaf(*value),
        TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        } => match (&**left, &**right) {
            (TreeNode::Leaf { value: l }, TreeNode::Leaf { value: rv }) => Stump::Split {
                feature: *feature,
                threshold: *threshold,
                left: *l,
                right: *rv,
            },
            _ => return Err("depth-1 tree has grandchildren".into()),
        },
    })
}

/// Calls `f` on every length-`n` sequence over `alphabet`.
fn for_each_seq<T: Clone>(alphabet: &[T], n: usize, f: &mut impl FnMut(&[T])) {
    let mut idx = vec![0usize; n];
    let mut seq: Vec<T> = vec![alphabet[0].clone(); n];
    loop {
        for (s, &i) in seq.iter_mut().zip(&idx) {
            *s = alphabet[i].clone();
        }
        f(&seq);
        let mut pos = 0;
        loop {
            if pos == n {
                return;
            }
            idx[pos] += 1;
            if idx[pos] < alphabet.len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

fn gbdt_suite() -> Check {
    let regs: Vec<Reg> = [0.0, 1.0]
        .iter()
        .flat_map(|&lambda| {
            [0.0, 0.5].iter().flat_map(move |&mcw| {
                [0.0, 0.15].iter().map(move |&gamma| Reg {
                    lambda,
                    gamma,
                    mcw,
                    lr: 1.0,
                })
            })
        })
        .collect();
    let mut checked = 0usize;
    let mut mismatch: Option<String> = None;
    let mut check = |x: &[Vec<f64>], y: &[usize]| {
        if mismatch.is_some() {
            return;
        }
        for &r in &regs {
            let want = brute_stump(x, y, r);
            match trained_stump(x, y, r) {
                Ok(got) if got == want => {}
                Ok(got) => mismatch = Some(format!(
                    "x={x:?} y={y:?} lambda={} gamma={} mcw={}: trained {got:?}, oracle {want:?}",
                    r.lambda, r.gamma, r.mcw
                )),
                Err(e) => mismatch = Some(e),
            }
            checked += 1;
        }
    };
    // Exhaustive: one feature over {0,1,2}, up to 6 rows.
    let one: Vec<Vec<f64>> = (0..3).map(|v| vec![v as f64]).collect();
    // Exhaustive: two features over {0,1}^2 up to 4 rows, {0,1,2}^2 up to 3.
    let two_small: Vec<Vec<f64>> = (0..4)
        .map(|v| vec![(v & 1) as f64, (v >> 1) as f64])
        .collect();
    let two_wide: Vec<Vec<f64>> = (0..9)
        .map(|v| vec![(v % 3) as f64, (v / 3) as f64])
        .collect();
    for (alphabet, max_n) in [(&one, 6), (&two_small, 4), (&two_wide, 3)] {
        for n in 1..=max_n {
            for_each_seq(alphabet, n, &mut |x: &[Vec<f64>]| {
                for_each_seq(&[0usize, 1], n, &mut |y: &[usize]| check(x, y));
            });
        }
    }
    // Seeded instances up to 8 rows, two features.
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..4000 {
        let n = rng.random_range(5..=8);
        let levels = rng.random_range(2..=5);
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..2)
                    .map(|_| rng.random_range(0..levels) as f64 * 0.5 - 1.0)
                    .collect()
            })
            .collect();
        let y: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();
        check(&x, &y);
    }
    if let Some(m) = mismatch {
        return Err(m);
    }

    let hand = GbdtConfig {
        rounds: 1,
        learning_rate: 1.0,
        max_depth: 1,
        lambda: 0.0,
        gamma: 0.0,
        min_child_weight: 0.0,
        preset_name: "hand".into(),
    };
    let x = Matrix::from_rows(&[[1.0], [2.0], [3.0], [4.0]], 1).map_err(err)?;
    let m = gbdt::train(&x, &[0, 0, 1, 1], &hand, 2, vec!["x".into()]).map_err(err)?;
    let expect_tree = TreeNode::Split {
        feature: 0,
        threshold: 2.5,
        left: Box::new(TreeNode::Leaf { value: -2.0 }),
        right: Box::new(TreeNode::Leaf { value: 2.0 }),
    };
    ensure!(
        m.trees[0][0] == expect_tree,
        "hand stump is {:?}",
        m.trees[0][0]
    );
    let probs = m.predict_proba(&x).map_err(err)?;
    for (row, want) in probs.iter().zip([0.11920, 0.11920, 0.88080, 0.88080]) {
        ensure!(
            (row[1] - want).abs() <= 1e-5,
            "hand probabilities {probs:?}"
        );
    }

    let mut losses_checked = 0;
    for (task, counts) in [(Task::A, vec![150, 150]), (Task::B, vec![80, 80, 80])] {
        let schema = TaskSchema::for_task(task);
        let (ds, _) = generate_synthetic(7, &schema, &counts, 4).map_err(err)?;
        let vocab = bow::fit_vocab(&ds.texts(), 2, 10_000).map_err(err)?;
        let table = FeatureTable::hconcat(&[
            features::syntactic_table(&ds).map_err(err)?,
            features::bow_table(&ds, &vocab).map_err(err)?,
        ])
        .map_err(err)?;
        let y = ds.labels().map_err(err)?;
        let cfg = GbdtConfig::default();
        ensure!(
            cfg.rounds == 100,
            "default preset has {} rounds",
            cfg.rounds
        );
        let model = gbdt::train(
            &table.values,
            &y,
            &cfg,
            schema.n_classes(),
            table.names.clone(),
        )
        .map_err(err)?;
        let loss = model.staged_log_loss(&table.values, &y).map_err(err)?;
        ensure!(loss.len() == 101, "{} staged losses", loss.len());
        for (i, w) in loss.windows(2).enumerate() {
            ensure!(
                w[1] <= w[0] + GAIN_TOL * w[0],
                "{task:?}: training log-loss rose at round {}: {} -> {}",
                i + 1,
                w[0],
                w[1]
            );
        }
        losses_checked += 1;
    }
    Ok(format!(
        "{checked} stump fits equal the brute-force stump; hand stump exact; log-loss non-increasing over 100 rounds ({losses_checked} tasks)"
    ))
}

// ---------------------------------------------------------------- ensemble

fn binary_set(name: &str, p1: &[f64]) -> PredictionSet {
    let ids: Vec<String> = (0..p1.len()).map(|i| format!("e{i}")).collect();
    PredictionSet::from_rows(name, &ids, p1.iter().map(|&p| vec![1.0 - p, p]).collect()).unwrap()
}

fn gold_map(labels: &[usize]) -> IndexMap<String, usize> {
    labels
        .iter()
        .enumerate()
        .map(|(i, &l)| (format!("e{i}"), l))
        .collect()
}

fn weight_bits(w: &EnsembleWeights) -> Vec<u64> {
    w.members.iter().map(|(_, x)| x.to_bits()).collect()
}

fn ensemble_suite() -> Check {
    let ab = vec![
        binary_set("A", &[0.9, 0.2, 0.4]),
        binary_set("B", &[0.45, 0.4, 0.9]),
    ];
    let w = ensemble::fit_weights(&ab, &gold_map(&[1, 0, 1]), 3).map_err(err)?;
    let got: Vec<f64> = w.members.iter().map(|(_, x)| *x).collect();
    ensure!(
        got == vec![2.0 / 3.0, 1.0 / 3.0],
        "A/B fixture weights {got:?}"
    );

    let mut rng = ChaCha8Rng::seed_from_u64(50);
    for inst in 0..50 {
        let n = rng.random_range(5..40);
        let k = rng.random_range(2..=4);
        let m = rng.random_range(2..=6);
        let rounds = rng.random_range(1..=30);
        let ids: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
        let gold: IndexMap<String, usize> = ids
            .iter()
            .map(|id| (id.clone(), rng.random_range(0..k)))
            .collect();
        let sets: Vec<PredictionSet> = (0..m)
            .map(|j| {
                let rows = (0..n)
                    .map(|_| {
                        let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 1e-3).collect();
                        let s: f64 = raw.iter().sum();
                        raw.iter().map(|v| v / s).collect()
                    })
                    .collect();
                PredictionSet::from_rows(format!("m{j}"), &ids, rows).unwrap()
            })
            .collect();
        let w1 = ensemble::fit_weights(&sets, &gold, rounds).map_err(err)?;
        let w2 = ensemble::fit_weights(&sets, &gold, rounds).map_err(err)?;
        ensure!(
            weight_bits(&w1) == weight_bits(&w2) && w1.rounds == w2.rounds,
            "instance {inst}: weights differ across runs"
        );
        let ens = ensemble::ensemble_predict(&sets, &w1).map_err(err)?;
        let ens_acc = ensemble::set_accuracy(&ens, &gold).map_err(err)?;
        let best = sets
            .iter()
            .map(|s| ensemble::set_accuracy(s, &gold).unwrap())
            .fold(0.0, f64::max);
        ensure!(
            ens_acc >= best,
            "instance {inst}: ensemble {ens_acc} < best member {best}"
        );
    }
    Ok("A/B fixture [2/3, 1/3]; 50 random instances dominate their best member and refit bit-identically".into())
}

// ---------------------------------------------------------------- metrics

fn metrics_suite() -> Check {
    // Gold/pred pairs: TP, TP, FP, FN, TN.
    let gold = gold_map(&[1, 1, 0, 1, 0]);
    let pred = gold_map(&[1, 1, 1, 0, 0]);
    let cm = metrics::confusion(&gold, &pred, 2).map_err(err)?;
    ensure!(
        cm == ConfusionMatrix::from_counts(vec![vec![1, 1], vec![1, 2]]).map_err(err)?,
        "confusion {cm:?}"
    );
    let r = metrics::score(&cm, Averaging::Binary, Some(1)).map_err(err)?;
    let third = 2.0 / 3.0;
    ensure!(
        (r.precision - third).abs() < 1e-12
            && (r.recall - third).abs() < 1e-12
            && (r.f1 - third).abs() < 1e-12,
        "P/R/F1 = {}/{}/{}",
        r.precision,
        r.recall,
        r.f1
    );
    ensure!((r.accuracy - 0.6).abs() < 1e-12, "accuracy {}", r.accuracy);

    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for inst in 0..100 {
        let k = rng.random_range(2..=6);
        let n = rng.random_range(1..200);
        let g: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let p: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let cm = metrics::confusion(&gold_map(&g), &gold_map(&p), k).map_err(err)?;
        let r = metrics::score(&cm, Averaging::Weighted, None).map_err(err)?;
        let acc = g.iter().zip(&p).filter(|(a, b)| a == b).count() as f64 / n as f64;
        ensure!(
            (r.recall - acc).abs() <= 1e-12,
            "instance {inst}: weighted recall {} vs accuracy {acc}",
            r.recall
        );
    }
    Ok("fixture P=R=F1=2/3, acc=0.6; weighted recall == accuracy on 100 fixtures".into())
}

// ---------------------------------------------------------------- end to end

fn write_corpus(
    dir: &Path,
    task: Task,
    seed: u64,
    counts: &[usize],
    dim: usize,
) -> Result<(PathBuf, PathBuf), String> {
    let (ds, store) =
        generate_synthetic(seed, &TaskSchema::for_task(task), counts, dim).map_err(err)?;
    let data = dir.join(format!("{task:?}-{seed}.jsonl").to_lowercase());
    let emb = dir.join(format!("{task:?}-{seed}.emb.jsonl").to_lowercase());
    ds.write(&data).map_err(err)?;
    store.write(&emb).map_err(err)?;
    Ok((data, emb))
}

fn settings(pairs: &[(&str, String)]) -> Vec<String> {
    pairs.iter().map(|(k, v)| format!("{k}={v}")).collect()
}

/// Bytes of the manifest and every prediction artifact it lists.
fn run_bytes(manifest: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let root = manifest.parent().unwrap();
    let m = load_manifest(manifest).map_err(err)?;
    let mut out = vec![("manifest.json".to_owned(), fs::read(manifest).map_err(err)?)];
    for a in m
        .artifacts
        .iter()
        .filter(|a| a.kind == ArtifactKind::Predictions)
    {
        out.push((a.path.clone(), fs::read(root.join(&a.path)).map_err(err)?));
    }
    Ok(out)
}

fn end_to_end() -> Check {
    let tmp = tempfile::tempdir().map_err(err)?;
    let dir = tmp.path();
    let (a_train, _) = write_corpus(dir, Task::A, 11, &[250, 250], 8)?;
    let (a_eval, _) = write_corpus(dir, Task::A, 12, &[100, 100], 8)?;
    let (b_train, b_train_emb) = write_corpus(dir, Task::B, 21, &[150, 150, 150], 16)?;
    let (b_eval, b_eval_emb) = write_corpus(dir, Task::B, 22, &[60, 60, 60], 16)?;

    let mut a_runs = Vec::new();
    let mut b_runs = Vec::new();
    for i in 0..2 {
        let cfg = PipelineConfig::resolve(
            RUN_A_KEYS,
            None,
            &settings(&[
                ("train", a_train.display().to_string()),
                ("eval", a_eval.display().to_string()),
                (
                    "out_dir",
                    dir.join(format!("run-a-{i}")).display().to_string(),
                ),
            ]),
        )
        .map_err(err)?;
        a_runs.push(pipeline::run_a(&cfg).map_err(err)?);
        let cfg = PipelineConfig::resolve(
            RUN_B_KEYS,
            None,
            &settings(&[
                ("train", b_train.display().to_string()),
                ("eval", b_eval.display().to_string()),
                (
                    "embeddings",
                    format!("{},{}", b_train_emb.display(), b_eval_emb.display()),
                ),
                (
                    "out_dir",
                    dir.join(format!("run-b-{i}")).display().to_string(),
                ),
            ]),
        )
        .map_err(err)?;
        b_runs.push(pipeline::run_b(&cfg).map_err(err)?);
    }
    for runs in [
        [&a_runs[0].manifest, &a_runs[1].manifest],
        [&b_runs[0].manifest, &b_runs[1].manifest],
    ] {
        let (x, y) = (run_bytes(runs[0])?, run_bytes(runs[1])?);
        ensure!(x.len() == y.len() && x.len() > 1, "artifact lists differ");
        for ((name, a), (_, b)) in x.iter().zip(&y) {
            ensure!(a == b, "{name} differs between identical runs");
        }
    }
    let a = &a_runs[0];
    for (name, acc) in &a.members {
        ensure!(
            a.ensemble_accuracy >= *acc,
            "ensemble {} < member {name} {acc}",
            a.ensemble_accuracy
        );
    }
    let b = &b_runs[0];
    let emb = b
        .embeddings_only
        .as_ref()
        .ok_or("no embeddings-only comparison")?;
    ensure!(
        b.selection.eval_accuracy >= emb.eval_accuracy - 0.02,
        "fusion {} < embeddings-only {} - 0.02",
        b.selection.eval_accuracy,
        emb.eval_accuracy
    );
    let max_candidate = b
        .selection
        .candidates
        .iter()
        .map(|c| c.eval_accuracy)
        .fold(0.0, f64::max);
    ensure!(
        b.selection.eval_accuracy == max_candidate,
        "selected model is not the best candidate"
    );
    Ok(format!(
        "byte-identical reruns; run-a ensemble {:.4} vs members {:?}; run-b fusion {:.4} vs embeddings-only {:.4}",
        a.ensemble_accuracy,
        a.members.iter().map(|(_, x)| (x * 1e4).round() / 1e4).collect::<Vec<_>>(),
        b.selection.eval_accuracy,
        emb.eval_accuracy
    ))
}

// ---------------------------------------------------------------- formats

fn round_trips() -> Check {
    let tmp = tempfile::tempdir().map_err(err)?;
    let dir = tmp.path();
    let schema = TaskSchema::for_task(Task::B);
    let (ds, store) = generate_synthetic(5, &schema, &[20, 20, 20], 6).map_err(err)?;

    let p = dir.join("data.jsonl");
    ds.write(&p).map_err(err)?;
    let back = Dataset::load(&p, &schema, Split::Train).map_err(err)?;
    ensure!(back.examples == ds.examples, "dataset differs after reload");
    let p2 = dir.join("data2.jsonl");
    back.write(&p2).map_err(err)?;
    ensure!(
        fs::read(&p).map_err(err)? == fs::read(&p2).map_err(err)?,
        "dataset bytes differ"
    );

    let vocab = bow::fit_vocab(&ds.texts(), 2, 500).map_err(err)?;
    let p = dir.join("vocab.json");
    vocab.save(&p).map_err(err)?;
    let vback = BowVocab::load(&p).map_err(err)?;
    ensure!(vback == vocab, "vocab differs after reload");
    ensure!(
        bow::vectorize_batch(&ds.texts(), &vback) == bow::vectorize_batch(&ds.texts(), &vocab),
        "vocab reload changes vectors"
    );

    let p = dir.join("emb.jsonl");
    store.write(&p).map_err(err)?;
    let sback = EmbeddingStore::load(&p).map_err(err)?;
    ensure!(
        sback.dim() == store.dim() && sback.len() == store.len(),
        "embedding shape differs"
    );
    for id in store.ids() {
        let (a, b) = (
            store.get(id).unwrap(),
            sback.get(id).ok_or("embedding id lost")?,
        );
        ensure!(
            a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()),
            "embedding {id} differs"
        );
    }

    let table = FeatureTable::hconcat(&[
        features::syntactic_table(&ds).map_err(err)?,
        features::bow_table(&ds, &vocab).map_err(err)?,
    ])
    .map_err(err)?;
    let p = dir.join("feats.csv");
    table.write_csv(&p).map_err(err)?;
    let tback = FeatureTable::read_csv(&p).map_err(err)?;
    ensure!(tback == table, "feature table differs after reload");

    let y = ds.labels().map_err(err)?;
    let model = gbdt::train(
        &table.values,
        &y,
        &GbdtConfig::preset("light").map_err(err)?,
        3,
        table.names.clone(),
    )
    .map_err(err)?;
    let p = dir.join("model.json");
    model.save(&p).map_err(err)?;
    let mback = GbdtModel::load(&p).map_err(err)?;
    ensure!(mback == model, "model differs after reload");
    let (pa, pb) = (
        model.predict_proba(&table.values).map_err(err)?,
        mback.predict_proba(&table.values).map_err(err)?,
    );
    ensure!(
        pa.iter()
            .flatten()
            .zip(pb.iter().flatten())
            .all(|(a, b)| a.to_bits() == b.to_bits()),
        "reloaded model predicts differently"
    );

    let preds = PredictionSet::from_rows("gbdt-light", &table.ids, pa).map_err(err)?;
    let p = dir.join("gbdt-light.jsonl");
    preds.write(&p).map_err(err)?;
    let pback = PredictionSet::load(&p).map_err(err)?;
    ensure!(
        pback.model_name == preds.model_name,
        "prediction name {}",
        pback.model_name
    );
    ensure!(
        pback
            .rows
            .iter()
            .zip(&preds.rows)
            .all(|((i, a), (j, b))| i == j
                && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())),
        "prediction rows differ"
    );

    let other = PredictionSet::new(
        "flat",
        table
            .ids
            .iter()
            .map(|id| (id.clone(), vec![0.2, 0.5, 0.3]))
            .collect(),
    )
    .map_err(err)?;
    let members = [preds, other];
    let weights = ensemble::fit_weights(&members, &ds.gold().map_err(err)?, 7).map_err(err)?;
    let p = dir.join("weights.json");
    weights.save(&p).map_err(err)?;
    let wback = EnsembleWeights::load(&p).map_err(err)?;
    ensure!(wback == weights, "weights differ after reload");
    let (ea, eb) = (
        ensemble::ensemble_predict(&members, &weights).map_err(err)?,
        ensemble::ensemble_predict(&members, &wback).map_err(err)?,
    );
    ensure!(
        ea.rows
            .values()
            .flatten()
            .zip(eb.rows.values().flatten())
            .all(|(a, b)| a.to_bits() == b.to_bits()),
        "reloaded weights predict differently"
    );
    Ok("dataset, vocab, embedding, feature table, model, prediction and weights files reload bit-identically".into())
}

// ---------------------------------------------------------------- runner

fn main() {
    let criteria: [Criterion; 7] = [
        ("syntactic-feature oracle", 5, synfeat_suite),
        ("worked entity example", 1, worked_example),
        ("gbdt oracle equivalence", 30, gbdt_suite),
        ("ensemble dominance", 10, ensemble_suite),
        ("metrics identities", 5, metrics_suite),
        ("end-to-end determinism", 120, end_to_end),
        ("format round-trips", 10, round_trips),
    ];
    let mut failed = 0;
    for (name, limit, run) in criteria {
        let start = Instant::now();
        let outcome = run();
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(msg) if took > Duration::from_secs(limit) => {
                Err(format!("{msg}; but took longer than {limit}s"))
            }
            other => other,
        };
        match outcome {
            Ok(msg) => println!(
                "PASS  {name}: {msg} ({:.2}s, limit {limit}s)",
                took.as_secs_f64()
            ),
            Err(msg) => {
                failed += 1;
                println!(
                    "FAIL  {name}: {msg} ({:.2}s, limit {limit}s)",
                    took.as_secs_f64()
                );
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
