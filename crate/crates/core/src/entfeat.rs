//! Person / group / organization mention counts.
//!
//! Spans come either from an external recognizer (annotation JSONL) or from
//! the built-in gazetteer matcher. Every mention counts, so a text naming two
//! people yields a person count of two even if they are the same entity.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bow::tokenize;
use crate::corpus::{NORP_NAMES, ORG_NAMES, PERSON_NAMES};
use crate::{Error, Result};

/// Kept entity classes, in feature order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EntityLabel {
    #[serde(rename = "PER")]
    Person,
    #[serde(rename = "NORP")]
    Group,
    #[serde(rename = "ORG")]
    Organization,
}

impl EntityLabel {
    pub const ALL: [EntityLabel; 3] = [
        EntityLabel::Person,
        EntityLabel::Group,
        EntityLabel::Organization,
    ];

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "PER" => Some(EntityLabel::Person),
            "NORP" => Some(EntityLabel::Group),
            "ORG" => Some(EntityLabel::Organization),
            _ => None,
        }
    }
}

pub const COLUMN_NAMES: [&str; 3] = ["per", "norp", "org"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntitySpan {
    pub example_id: String,
    pub label: EntityLabel,
    pub start_token: usize,
    pub end_token: usize,
    pub surface: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EntityCountVector {
    pub per: u32,
    pub norp: u32,
    pub org: u32,
}

impl EntityCountVector {
    pub fn to_array(self) -> [u32; 3] {
        [self.per, self.norp, self.org]
    }

    pub fn to_f64(self) -> [f64; 3] {
        [self.per as f64, self.norp as f64, self.org as f64]
    }
}

pub fn count_entities(spans: &[EntitySpan]) -> EntityCountVector {
    let mut c = EntityCountVector::default();
    for s in spans {
        match s.label {
            EntityLabel::Person => c.per += 1,
            EntityLabel::Group => c.norp += 1,
            EntityLabel::Organization => c.org += 1,
        }
    }
    c
}

/// Case-insensitive phrase lists, one per entity class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gazetteer {
    phrases: HashMap<Vec<String>, EntityLabel>,
    longest: usize,
}

#[derive(Serialize, Deserialize)]
struct GazetteerFile {
    #[serde(rename = "PER", default)]
    per: Vec<String>,
    #[serde(rename = "NORP", default)]
    norp: Vec<String>,
    #[serde(rename = "ORG", default)]
    org: Vec<String>,
}

impl Gazetteer {
    /// Builds a gazetteer from `(label, phrase)` lists. A phrase listed under
    /// several labels resolves to the earliest label in PER, NORP, ORG order.
    pub fn new(per: &[&str], norp: &[&str], org: &[&str]) -> Result<Self> {
        let mut phrases = HashMap::new();
        let mut longest = 0;
        for (label, list) in EntityLabel::ALL.iter().zip([per, norp, org]) {
            let mut seen = std::collections::HashSet::new();
            for phrase in list {
                let tokens = tokenize(phrase);
                if tokens.is_empty() {
                    return Err(Error::InvalidArgument("empty gazetteer phrase".into()));
                }
                if !seen.insert(tokens.clone()) {
                    return Err(Error::InvalidArgument(format!(
                        "duplicate gazetteer phrase {phrase:?}"
                    )));
                }
                longest = longest.max(tokens.len());
                phrases.entry(tokens).or_insert(*label);
            }
        }
        Ok(Gazetteer { phrases, longest })
    }

    /// Name lists matching the synthetic corpus generator.
    pub fn synthetic() -> Self {
        Self::new(PERSON_NAMES, NORP_NAMES, ORG_NAMES).expect("static lists are valid")
    }

    /// JSON object `{"PER": [...], "NORP": [...], "ORG": [...]}`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: GazetteerFile =
            serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e))?;
        fn refs(v: &[String]) -> Vec<&str> {
            v.iter().map(String::as_str).collect()
        }
        Self::new(&refs(&file.per), &refs(&file.norp), &refs(&file.org))
    }
}

/// Greedy left-to-right longest match over the lowercased token stream.
pub fn gazetteer_recognize(example_id: &str, text: &str, gaz: &Gazetteer) -> Vec<EntitySpan> {
    let tokens = tokenize(text);
    let mut spans = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let max = gaz.longest.min(tokens.len() - i);
        let hit = (1..=max)
            .rev()
            .find_map(|n| gaz.phrases.get(&tokens[i..i + n]).map(|&l| (n, l)));
        match hit {
            Some((n, label)) => {
                spans.push(EntitySpan {
                    example_id: example_id.to_owned(),
                    label,
                    start_token: i,
                    end_token: i + n,
                    surface: tokens[i..i + n].join(" "),
                });
                i += n;
            }
            None => i += 1,
        }
    }
    spans
}

#[derive(Deserialize)]
struct AnnotationRecord {
    example_id: String,
    label: String,
    start_token: i64,
    end_token: i64,
    #[serde(default)]
    surface: String,
}

/// Reads annotation JSONL, grouping spans by example id. Labels other than
/// PER, NORP and ORG are dropped.
pub fn load_annotations(path: impl AsRef<Path>) -> Result<BTreeMap<String, Vec<EntitySpan>>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out: BTreeMap<String, Vec<EntitySpan>> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: AnnotationRecord =
            serde_json::from_str(line).map_err(|e| Error::parse(path, i + 1, e))?;
        if rec.start_token < 0 || rec.end_token < 0 {
            return Err(Error::parse(path, i + 1, "negative token offset"));
        }
        if rec.start_token >= rec.end_token {
            return Err(Error::parse(path, i + 1, "empty or inverted span"));
        }
        let Some(label) = EntityLabel::parse(&rec.label) else {
            continue;
        };
        out.entry(rec.example_id.clone())
            .or_default()
            .push(EntitySpan {
                example_id: rec.example_id,
                label,
                start_token: rec.start_token as usize,
                end_token: rec.end_token as usize,
                surface: rec.surface,
            });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Write;

    pub(crate) fn fixture() -> Gazetteer {
        Gazetteer::new(&["putin", "adolf"], &["russian"], &["nato"]).unwrap()
    }

    fn span(label: EntityLabel) -> EntitySpan {
        EntitySpan {
            example_id: "x".into(),
            label,
            start_token: 0,
            end_token: 1,
            surface: String::new(),
        }
    }

    #[test]
    fn worked_sentence() {
        let spans = gazetteer_recognize(
            "x",
            "STOP RUSSIAN AGRESSOR ADOLF PUTIN HANDS OFF UKRAINE",
            &fixture(),
        );
        assert_eq!(count_entities(&spans).to_array(), [2, 1, 0]);
        let lower = gazetteer_recognize(
            "x",
            "stop russian agressor adolf putin hands off ukraine",
            &fixture(),
        );
        assert_eq!(lower, spans);
        assert_eq!(spans[0].surface, "russian");
        assert_eq!((spans[0].start_token, spans[0].end_token), (1, 2));
    }

    #[test]
    fn repeated_mentions_count() {
        let spans = gazetteer_recognize("x", "nato nato", &fixture());
        assert_eq!(count_entities(&spans).to_array(), [0, 0, 2]);
        assert!(gazetteer_recognize("x", "", &fixture()).is_empty());
    }

    #[test]
    fn direct_counts() {
        assert_eq!(count_entities(&[]).to_array(), [0, 0, 0]);
        let spans = vec![
            span(EntityLabel::Organization),
            span(EntityLabel::Person),
            span(EntityLabel::Organization),
            span(EntityLabel::Organization),
        ];
        assert_eq!(count_entities(&spans).to_array(), [1, 0, 3]);
    }

    #[test]
    fn longest_match_and_priority() {
        let gaz = Gazetteer::new(
            &["united", "vladimir putin"],
            &["united nations"],
            &["united nations"],
        )
        .unwrap();
        let spans = gazetteer_recognize("x", "the United Nations and vladimir putin", &gaz);
        let labels: Vec<_> = spans
            .iter()
            .map(|s| (s.label, s.surface.as_str()))
            .collect();
        assert_eq!(
            labels,
            vec![
                (EntityLabel::Group, "united nations"),
                (EntityLabel::Person, "vladimir putin")
            ]
        );
    }

    #[test]
    fn gazetteer_validation() {
        assert!(Gazetteer::new(&["a", "A"], &[], &[]).is_err());
        assert!(Gazetteer::new(&[" "], &[], &[]).is_err());
    }

    #[test]
    fn annotations_file() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(
            f,
            r#"{{"example_id":"e1","label":"PER","start_token":0,"end_token":1,"surface":"Putin"}}"#
        )
        .unwrap();
        writeln!(
            f,
            r#"{{"example_id":"e1","label":"LOC","start_token":2,"end_token":3,"surface":"Kyiv"}}"#
        )
        .unwrap();
        let m = load_annotations(f.path()).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m["e1"].len(), 1);
        assert_eq!(m["e1"][0].label, EntityLabel::Person);

        let empty = tempfile::NamedTempFile::new().unwrap();
        assert!(load_annotations(empty.path()).unwrap().is_empty());

        let mut neg = tempfile::NamedTempFile::new().unwrap();
        writeln!(
            neg,
            r#"{{"example_id":"e1","label":"PER","start_token":-1,"end_token":1,"surface":""}}"#
        )
        .unwrap();
        assert!(load_annotations(neg.path()).is_err());

        let mut bad = tempfile::NamedTempFile::new().unwrap();
        writeln!(bad, "not json").unwrap();
        assert!(matches!(
            load_annotations(bad.path()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    fn word() -> impl Strategy<Value = String> {
        prop::sample::select(vec![
            "putin", "adolf", "russian", "nato", "stop", "war", "Putin",
        ])
        .prop_map(str::to_owned)
    }

    proptest! {
        #[test]
        fn spans_do_not_overlap(words in prop::collection::vec(word(), 0..12)) {
            let gaz = Gazetteer::new(&["putin", "adolf putin"], &["russian", "russian war"], &["nato", "stop nato"]).unwrap();
            let spans = gazetteer_recognize("x", &words.join(" "), &gaz);
            for w in spans.windows(2) {
                prop_assert!(w[0].end_token <= w[1].start_token);
            }
        }

        #[test]
        fn counts_add_over_separator(a in prop::collection::vec(word(), 0..8), b in prop::collection::vec(word(), 0..8)) {
            let gaz = fixture();
            let joined = format!("{} | {}", a.join(" "), b.join(" "));
            let whole = count_entities(&gazetteer_recognize("x", &joined, &gaz)).to_array();
            let ca = count_entities(&gazetteer_recognize("x", &a.join(" "), &gaz)).to_array();
            let cb = count_entities(&gazetteer_recognize("x", &b.join(" "), &gaz)).to_array();
            prop_assert_eq!(whole, [ca[0] + cb[0], ca[1] + cb[1], ca[2] + cb[2]]);
        }

        #[test]
        fn counting_is_order_free(labels in prop::collection::vec(0usize..3, 0..10)) {
            let mut spans: Vec<_> = labels.iter().map(|&l| span(EntityLabel::ALL[l])).collect();
            let a = count_entities(&spans);
            spans.reverse();
            prop_assert_eq!(a, count_entities(&spans));
        }
    }
}
