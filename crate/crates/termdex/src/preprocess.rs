//! Cleaning: normalization, tokenization, artifact repair, stopword and
//! length filtering, and per-annotation document construction.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Annotation;
use crate::error::{read_to_string, Error, Result};
use crate::stemmer::StemmerRuleset;

/// Merges adjacent token pairs broken by transcription ("hémato me" back
/// into "hématome"). Keys are the two surface tokens joined by a single
/// space. Applied before stopword removal, so fragments that happen to
/// collide with stopwords still get repaired.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RepairMap {
    merges: BTreeMap<String, String>,
}

impl RepairMap {
    pub fn insert(&mut self, left: &str, right: &str, replacement: &str) -> Result<()> {
        for part in [left, right, replacement] {
            if part.is_empty() || part.split_whitespace().count() != 1 {
                return Err(Error::Validation(format!(
                    "repair entry part {part:?} must be a single token"
                )));
            }
        }
        self.merges
            .insert(format!("{left} {right}"), replacement.to_string());
        Ok(())
    }

    pub fn lookup(&self, left: &str, right: &str) -> Option<&str> {
        self.merges
            .get(&format!("{left} {right}"))
            .map(String::as_str)
    }

    /// Later entries win on key collisions.
    pub fn merge(&mut self, other: RepairMap) {
        self.merges.extend(other.merges);
    }

    pub fn is_empty(&self) -> bool {
        self.merges.is_empty()
    }

    pub fn len(&self) -> usize {
        self.merges.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CleaningConfig {
    pub stopwords: BTreeSet<String>,
    pub repair: RepairMap,
    pub fold_case: bool,
    /// Treat ' and ’ as token separators, so "d'une" becomes ["d", "une"].
    pub split_apostrophes: bool,
    /// Tokens are maximal runs of letters; anything else separates. When
    /// false, tokens are whitespace-separated chunks kept verbatim.
    pub strip_punctuation: bool,
    pub drop_numeric_tokens: bool,
    /// Minimum surviving token length in characters.
    pub min_token_length: usize,
}

impl Default for CleaningConfig {
    fn default() -> Self {
        CleaningConfig {
            stopwords: BTreeSet::new(),
            repair: RepairMap::default(),
            fold_case: true,
            split_apostrophes: true,
            strip_punctuation: true,
            drop_numeric_tokens: true,
            min_token_length: 2,
        }
    }
}

impl CleaningConfig {
    /// A stopword that could never equal a produced token makes the stop
    /// list silently dead, so it is rejected here.
    pub fn validate(&self) -> Result<()> {
        if self.min_token_length < 1 {
            return Err(Error::Validation("min_token_length must be >= 1".into()));
        }
        for word in &self.stopwords {
            let toks = tokenize(word, self);
            if toks.len() != 1 || toks[0] != *word {
                return Err(Error::Validation(format!(
                    "stopword {word:?} would not survive normalization"
                )));
            }
        }
        Ok(())
    }
}

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

fn tokenize(text: &str, config: &CleaningConfig) -> Vec<String> {
    let folded;
    let text = if config.fold_case {
        folded = text.to_lowercase();
        &folded
    } else {
        text
    };

    let mut tokens = Vec::new();
    if config.strip_punctuation {
        let mut current = String::new();
        for c in text.chars() {
            let keep = c.is_alphabetic()
                || (c.is_numeric() && !config.drop_numeric_tokens)
                || (is_apostrophe(c) && !config.split_apostrophes);
            if keep {
                current.push(c);
            } else if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
        }
        if !current.is_empty() {
            tokens.push(current);
        }
    } else {
        for piece in text.split_whitespace() {
            if config.split_apostrophes {
                tokens.extend(
                    piece
                        .split(is_apostrophe)
                        .filter(|s| !s.is_empty())
                        .map(String::from),
                );
            } else {
                tokens.push(piece.to_string());
            }
        }
        if config.drop_numeric_tokens {
            tokens.retain(|t| !t.chars().all(|c| c.is_numeric()));
        }
    }
    tokens
}

/// Cleans raw text into an ordered token list: tokenization per the
/// config, one left-to-right repair pass over adjacent pairs, stopword
/// removal, then the minimum-length filter. Idempotent on its own output.
pub fn clean(text: &str, config: &CleaningConfig) -> Vec<String> {
    let raw = tokenize(text, config);

    let mut repaired = Vec::with_capacity(raw.len());
    let mut i = 0;
    while i < raw.len() {
        if i + 1 < raw.len() {
            if let Some(merged) = config.repair.lookup(&raw[i], &raw[i + 1]) {
                repaired.push(merged.to_string());
                i += 2;
                continue;
            }
        }
        repaired.push(raw[i].clone());
        i += 1;
    }

    repaired
        .into_iter()
        .filter(|t| !config.stopwords.contains(t))
        .filter(|t| t.chars().count() >= config.min_token_length)
        .collect()
}

/// One stopword per line, lowercased on load; '#' starts a comment.
/// Entries containing whitespace cannot match any token and are rejected.
pub fn load_stopwords(path: &Path) -> Result<BTreeSet<String>> {
    let source = read_to_string(path)?;
    parse_stopwords(&source, path)
}

pub fn parse_stopwords(source: &str, path: &Path) -> Result<BTreeSet<String>> {
    let mut set = BTreeSet::new();
    for (idx, raw_line) in source.lines().enumerate() {
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        };
        let entry = line.trim();
        if entry.is_empty() {
            continue;
        }
        if entry.split_whitespace().count() != 1 {
            return Err(Error::DataFormat {
                path: path.to_path_buf(),
                line: idx + 1,
                message: format!("stopword {entry:?} contains whitespace"),
            });
        }
        set.insert(entry.to_lowercase());
    }
    Ok(set)
}

/// Lines of the form "left right => replacement"; '#' starts a comment.
pub fn load_repair_map(path: &Path) -> Result<RepairMap> {
    let source = read_to_string(path)?;
    parse_repair_map(&source, path)
}

pub fn parse_repair_map(source: &str, path: &Path) -> Result<RepairMap> {
    let mut map = RepairMap::default();
    for (idx, raw_line) in source.lines().enumerate() {
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fail = |message: String| Error::DataFormat {
            path: path.to_path_buf(),
            line: idx + 1,
            message,
        };
        let Some((lhs, rhs)) = line.split_once("=>") else {
            return Err(fail(format!("expected \"left right => replacement\", got {line:?}")));
        };
        let pair: Vec<&str> = lhs.split_whitespace().collect();
        let replacement: Vec<&str> = rhs.split_whitespace().collect();
        if pair.len() != 2 || replacement.len() != 1 {
            return Err(fail(format!(
                "expected a two-token left side and one replacement, got {line:?}"
            )));
        }
        map.insert(pair[0], pair[1], replacement[0])
            .map_err(|e| fail(e.to_string()))?;
    }
    Ok(map)
}

/// A preprocessed annotation: stems in original order plus the display
/// bookkeeping needed to print terms the way the corpus spells them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub annotation_id: String,
    pub image_id: String,
    /// Stemmed tokens in annotation order; duplicates retained because
    /// term-frequency counting needs them.
    pub tokens: Vec<String>,
    /// Stem to its most frequent surface form within this document
    /// (ties broken alphabetically).
    pub surface_forms: BTreeMap<String, String>,
    /// Document length in words; always equals `tokens.len()`.
    pub length_words: usize,
}

pub fn preprocess_document(
    annotation: &Annotation,
    config: &CleaningConfig,
    ruleset: &StemmerRuleset,
) -> Document {
    let surfaces = clean(&annotation.text, config);
    let tokens: Vec<String> = surfaces.iter().map(|s| ruleset.stem(s)).collect();

    let mut counts: BTreeMap<&str, BTreeMap<&str, usize>> = BTreeMap::new();
    for (stem, surface) in tokens.iter().zip(&surfaces) {
        *counts
            .entry(stem)
            .or_default()
            .entry(surface)
            .or_insert(0) += 1;
    }
    let surface_forms = counts
        .into_iter()
        .map(|(stem, by_surface)| {
            let best = by_surface
                .into_iter()
                .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(a.0)))
                .expect("stem seen at least once");
            (stem.to_string(), best.0.to_string())
        })
        .collect();

    let length_words = tokens.len();
    Document {
        annotation_id: annotation.annotation_id.clone(),
        image_id: annotation.image_id.clone(),
        tokens,
        surface_forms,
        length_words,
    }
}

/// Corpus-wide display form per stem: each document votes with its own
/// most frequent surface; most votes wins, ties broken alphabetically.
pub fn dominant_surfaces(documents: &[Document]) -> BTreeMap<String, String> {
    let mut votes: BTreeMap<&str, BTreeMap<&str, usize>> = BTreeMap::new();
    for doc in documents {
        for (stem, surface) in &doc.surface_forms {
            *votes
                .entry(stem)
                .or_default()
                .entry(surface)
                .or_insert(0) += 1;
        }
    }
    votes
        .into_iter()
        .map(|(stem, by_surface)| {
            let best = by_surface
                .into_iter()
                .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(a.0)))
                .expect("at least one vote");
            (stem.to_string(), best.0.to_string())
        })
        .collect()
}
