//! 33-dimensional surface statistics of a text.
//!
//! Layout (see [`FEATURE_NAMES`]): word count, character count, capital,
//! digit, special-character and whitespace ratios, one ratio per tracked
//! symbol, one count per tracked symbol, lowercase ratio. Characters are
//! Unicode scalar values and every ratio is taken over the character count;
//! an empty text yields all zeros.

use unicode_properties::{GeneralCategory, UnicodeGeneralCategory};

pub const DIM: usize = 33;

/// Tracked symbols, in feature order.
pub const SYMBOLS: [char; 13] = [
    '!', '?', '@', '%', '*', '$', '&', '#', '.', ':', '/', '-', '=',
];

const SYMBOL_NAMES: [&str; 13] = [
    "exclamation",
    "question",
    "at",
    "percent",
    "asterisk",
    "dollar",
    "ampersand",
    "hash",
    "period",
    "colon",
    "slash",
    "hyphen",
    "equals",
];

pub const WORD_COUNT: usize = 0;
pub const CHAR_COUNT: usize = 1;
pub const CAPITAL_RATIO: usize = 2;
pub const DIGIT_RATIO: usize = 3;
pub const SPECIAL_RATIO: usize = 4;
pub const WHITESPACE_RATIO: usize = 5;
pub const SYMBOL_RATIO_START: usize = 6;
pub const SYMBOL_COUNT_START: usize = 19;
pub const LOWERCASE_RATIO: usize = 32;

pub static FEATURE_NAMES: std::sync::LazyLock<Vec<String>> = std::sync::LazyLock::new(|| {
    let mut names: Vec<String> = [
        "word_count",
        "char_count",
        "capital_ratio",
        "digit_ratio",
        "special_char_ratio",
        "whitespace_ratio",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    names.extend(SYMBOL_NAMES.iter().map(|s| format!("{s}_ratio")));
    names.extend(SYMBOL_NAMES.iter().map(|s| format!("{s}_count")));
    names.push("lowercase_ratio".into());
    names
});

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntacticVector(pub [f64; DIM]);

impl SyntacticVector {
    pub fn values(&self) -> &[f64; DIM] {
        &self.0
    }

    pub fn char_count(&self) -> f64 {
        self.0[CHAR_COUNT]
    }

    pub fn symbol_ratio(&self, i: usize) -> f64 {
        self.0[SYMBOL_RATIO_START + i]
    }

    pub fn symbol_count(&self, i: usize) -> f64 {
        self.0[SYMBOL_COUNT_START + i]
    }
}

#[derive(Default)]
struct Tally {
    chars: u64,
    words: u64,
    upper: u64,
    lower: u64,
    digit: u64,
    space: u64,
    special: u64,
    symbols: [u64; 13],
}

pub fn is_decimal_digit(c: char) -> bool {
    c.general_category() == GeneralCategory::DecimalNumber
}

fn tally(text: &str) -> Tally {
    let mut t = Tally::default();
    let mut in_word = false;
    for c in text.chars() {
        t.chars += 1;
        let ws = c.is_whitespace();
        if !ws && !in_word {
            t.words += 1;
        }
        in_word = !ws;
        if ws {
            t.space += 1;
            continue;
        }
        if c.is_uppercase() {
            t.upper += 1;
        } else if c.is_lowercase() {
            t.lower += 1;
        }
        let digit = is_decimal_digit(c);
        if digit {
            t.digit += 1;
        }
        if !(digit || c.is_alphabetic()) {
            t.special += 1;
            if let Some(i) = SYMBOLS.iter().position(|&s| s == c) {
                t.symbols[i] += 1;
            }
        }
    }
    t
}

pub fn extract_syntactic(text: &str) -> SyntacticVector {
    let t = tally(text);
    let mut v = [0.0; DIM];
    v[WORD_COUNT] = t.words as f64;
    v[CHAR_COUNT] = t.chars as f64;
    let ratio = |n: u64| {
        if t.chars == 0 {
            0.0
        } else {
            n as f64 / t.chars as f64
        }
    };
    v[CAPITAL_RATIO] = ratio(t.upper);
    v[DIGIT_RATIO] = ratio(t.digit);
    v[SPECIAL_RATIO] = ratio(t.special);
    v[WHITESPACE_RATIO] = ratio(t.space);
    for (i, &n) in t.symbols.iter().enumerate() {
        v[SYMBOL_RATIO_START + i] = ratio(n);
        v[SYMBOL_COUNT_START + i] = n as f64;
    }
    v[LOWERCASE_RATIO] = ratio(t.lower);
    SyntacticVector(v)
}

/// Extracts features for many texts, in input order.
pub fn extract_batch<S: AsRef<str> + Sync>(texts: &[S]) -> Vec<SyntacticVector> {
    crate::par::map(texts, |t| extract_syntactic(t.as_ref()))
}
