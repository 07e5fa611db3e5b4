//! Seeded synthetic corpora with the label structure of the shared-task data.
//!
//! Texts are short slogan-like token sequences, often shouted in capitals.
//! For the binary task the class shifts the cue vocabulary, casing and
//! punctuation. For the target task each class draws names from its own
//! entity pool (persons, groups, organizations) so entity counts carry signal.
//! Embeddings are Gaussian around fixed class means and are informative on
//! their own but overlap more than the entity cues do.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Dataset, Example, Split, Task, TaskSchema};
use crate::fusion::EmbeddingStore;
use crate::{Error, Result};

pub const PERSON_NAMES: &[&str] = &[
    "putin", "adolf", "zelensky", "biden", "lavrov", "shoigu", "medvedev", "stalin",
];
pub const NORP_NAMES: &[&str] = &[
    "russian",
    "russians",
    "ukrainian",
    "ukrainians",
    "american",
    "europeans",
    "soviet",
    "muslims",
];
pub const ORG_NAMES: &[&str] = &[
    "nato", "kremlin", "gazprom", "wagner", "un", "pentagon", "cia", "eu",
];

const FILLER: &[&str] = &[
    "the", "we", "our", "they", "this", "is", "for", "all", "people", "world", "now", "today",
    "must", "will", "be", "no", "more", "stop", "war", "ukraine", "russia", "time", "go", "home",
    "never", "hands", "off", "agressor",
];
const HATEFUL: &[&str] = &[
    "kill",
    "invaders",
    "scum",
    "nazis",
    "orcs",
    "traitors",
    "burn",
    "die",
    "destroy",
    "vermin",
    "terrorists",
    "filth",
    "enemy",
    "hate",
    "crush",
];
const BENIGN: &[&str] = &[
    "peace",
    "love",
    "help",
    "support",
    "together",
    "hope",
    "pray",
    "solidarity",
    "freedom",
    "humanitarian",
    "donate",
    "unity",
    "refugees",
    "welcome",
    "save",
];

/// Probability that a target-task example mentions a name from its own
/// class's entity pool.
pub(crate) const OWN_ENTITY_RATE: f64 = 0.8;
const CROSS_ENTITY_RATE: f64 = 0.2;
const MEAN_SHIFT: f64 = 0.8;

/// Generates a labeled dataset and matching embedding store.
///
/// `counts[k]` examples are drawn for class `k`; class order is shuffled.
/// Example ids are `"{task}{seed}-{index:05}"` and double as embedding ids.
/// The output is a pure function of the arguments.
pub fn generate_synthetic(
    seed: u64,
    schema: &TaskSchema,
    counts: &[usize],
    embed_dim: usize,
) -> Result<(Dataset, EmbeddingStore)> {
    let k = schema.n_classes();
    if counts.len() != k {
        return Err(Error::InvalidArgument(format!(
            "expected {k} class counts, got {}",
            counts.len()
        )));
    }
    if counts.contains(&0) {
        return Err(Error::InvalidArgument(
            "class counts must be positive".into(),
        ));
    }
    if embed_dim < 2 {
        return Err(Error::InvalidArgument(
            "embedding dimension must be at least 2".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels: Vec<usize> = counts
        .iter()
        .enumerate()
        .flat_map(|(class, &n)| std::iter::repeat_n(class, n))
        .collect();
    labels.shuffle(&mut rng);

    let prefix = match schema.task {
        Task::A => "a",
        Task::B => "b",
    };
    let mut store = EmbeddingStore::new(embed_dim);
    let mut examples = Vec::with_capacity(labels.len());
    for (i, &class) in labels.iter().enumerate() {
        let id = format!("{prefix}{seed}-{i:05}");
        let text = match schema.task {
            Task::A => binary_text(&mut rng, class),
            Task::B => target_text(&mut rng, class),
        };
        let vector: Vec<f64> = (0..embed_dim)
            .map(|j| {
                let mean = if j % k == class { MEAN_SHIFT } else { 0.0 };
                let noise: f64 = StandardNormal.sample(&mut rng);
                mean + noise
            })
            .collect();
        store.insert(id.clone(), vector)?;
        examples.push(Example {
            embedding_id: Some(id.clone()),
            id,
            text,
            label: Some(class),
        });
    }
    let dataset = Dataset {
        schema: schema.clone(),
        examples,
        split: Split::Train,
    };
    Ok((dataset, store))
}

fn pick<'a>(rng: &mut ChaCha8Rng, pool: &[&'a str]) -> &'a str {
    pool.choose(rng).expect("non-empty pool")
}

fn binary_text(rng: &mut ChaCha8Rng, class: usize) -> String {
    let hateful = class == 1;
    let (own, other) = if hateful {
        (HATEFUL, BENIGN)
    } else {
        (BENIGN, HATEFUL)
    };
    let n = rng.random_range(4..=10);
    let mut tokens: Vec<String> = (0..n)
        .map(|_| {
            let roll: f64 = rng.random();
            let word = if roll < 0.35 {
                pick(rng, own)
            } else if roll < 0.47 {
                pick(rng, other)
            } else {
                pick(rng, FILLER)
            };
            word.to_string()
        })
        .collect();
    if rng.random_bool(if hateful { 0.1 } else { 0.25 }) {
        let i = rng.random_range(0..tokens.len());
        tokens[i].insert(0, '#');
    }
    if rng.random_bool(0.15) {
        tokens.push(rng.random_range(2014..=2023).to_string());
    }
    let shout = if hateful { 0.65 } else { 0.35 };
    let mut text = finish(rng, tokens, shout);
    if rng.random_bool(if hateful { 0.55 } else { 0.2 }) {
        let bangs = rng.random_range(1..=3);
        text.extend(std::iter::repeat_n('!', bangs));
    }
    text
}

fn target_text(rng: &mut ChaCha8Rng, class: usize) -> String {
    let pools = [PERSON_NAMES, NORP_NAMES, ORG_NAMES];
    let n = rng.random_range(3..=8);
    let mut tokens: Vec<String> = (0..n)
        .map(|_| {
            let pool = if rng.random_bool(0.3) {
                HATEFUL
            } else {
                FILLER
            };
            pick(rng, pool).to_string()
        })
        .collect();
    let mut mentions = Vec::new();
    if rng.random_bool(OWN_ENTITY_RATE) {
        mentions.push(pick(rng, pools[class]));
        if rng.random_bool(0.3) {
            mentions.push(pick(rng, pools[class]));
        }
    }
    if rng.random_bool(CROSS_ENTITY_RATE) {
        let offset = rng.random_range(1..pools.len());
        mentions.push(pick(rng, pools[(class + offset) % pools.len()]));
    }
    for name in mentions {
        let at = rng.random_range(0..=tokens.len());
        tokens.insert(at, name.to_string());
    }
    finish(rng, tokens, 0.5)
}

/// Joins tokens, upper-casing everything with probability `shout` and
/// otherwise capitalizing words at random.
fn finish(rng: &mut ChaCha8Rng, tokens: Vec<String>, shout: f64) -> String {
    if rng.random_bool(shout) {
        return tokens.join(" ").to_uppercase();
    }
    let words: Vec<String> = tokens
        .into_iter()
        .map(|t| {
            if rng.random_bool(0.3) {
                let mut cs = t.chars();
                match cs.next() {
                    Some(first) => first.to_uppercase().chain(cs).collect(),
                    None => t,
                }
            } else {
                t
            }
        })
        .collect();
    words.join(" ")
}
