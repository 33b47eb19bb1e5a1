//! Adjacency counting, pointwise mutual information, and the iterative
//! length-n to length-n+1 compound-term construction.
//!
//! MI of a sequence s followed by token t is
//!
//! ```text
//! MI(s, t) = log_base( f(s·t) * W / (f(s) * f(t)) )
//! ```
//!
//! with maximum-likelihood counts over the cleaned, stemmed corpus and
//! W the total number of surviving tokens. Probabilities of multiword
//! sequences use the sequence's own corpus count.
//!
//! Calibration note: the MI values on the sample corpus's hand-scored
//! reference sheet are not reproducible; they disagree with the sheet's
//! own pair counts under any log base. The golden tests freeze this
//! module's outputs instead.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::preprocess::{dominant_surfaces, Document};
use crate::weighting::TermCandidate;

pub const DEFAULT_MI_THRESHOLD: f64 = 0.15;
pub const DEFAULT_MI_LOG_BASE: f64 = 10.0;
pub const DEFAULT_MAX_COMPOUND_LEN: usize = 4;
/// Maximum distance, in tokens, between a sequence and its extension;
/// 1 means immediately adjacent, the classic collocation reading.
pub const DEFAULT_WINDOW: usize = 1;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SequenceCounts {
    /// W: total tokens across all documents.
    pub total_tokens: u64,
    /// Contiguous sequence (length 1..=max_len) to occurrence count;
    /// sequences never span document boundaries.
    seq: BTreeMap<Vec<String>, u64>,
    /// Sequence to (following token within the window, count).
    adj: BTreeMap<Vec<String>, BTreeMap<String, u64>>,
    pub max_len: usize,
    pub window: usize,
}

impl SequenceCounts {
    pub fn unigram(&self, token: &str) -> u64 {
        self.seq
            .get(std::slice::from_ref(&token.to_string()))
            .copied()
            .unwrap_or(0)
    }

    pub fn sequence(&self, seq: &[String]) -> u64 {
        self.seq.get(seq).copied().unwrap_or(0)
    }

    pub fn adjacency(&self, seq: &[String], next: &str) -> u64 {
        self.adj
            .get(seq)
            .and_then(|m| m.get(next))
            .copied()
            .unwrap_or(0)
    }

    /// Tokens observed after `seq`, alphabetically, with their counts.
    pub fn extensions(&self, seq: &[String]) -> impl Iterator<Item = (&str, u64)> {
        self.adj
            .get(seq)
            .into_iter()
            .flat_map(|m| m.iter().map(|(t, c)| (t.as_str(), *c)))
    }
}

pub fn count_sequences(documents: &[Document], max_len: usize, window: usize) -> SequenceCounts {
    debug_assert!(max_len >= 2 && window >= 1);
    let mut counts = SequenceCounts {
        max_len,
        window,
        ..SequenceCounts::default()
    };
    for doc in documents {
        let tokens = &doc.tokens;
        counts.total_tokens += tokens.len() as u64;
        for n in 1..=max_len {
            for window_slice in tokens.windows(n) {
                *counts.seq.entry(window_slice.to_vec()).or_insert(0) += 1;
            }
        }
        for start in 0..tokens.len() {
            for n in 1..max_len {
                if start + n > tokens.len() {
                    break;
                }
                let seq = &tokens[start..start + n];
                for gap in 0..window {
                    let Some(next) = tokens.get(start + n + gap) else { break };
                    *counts
                        .adj
                        .entry(seq.to_vec())
                        .or_default()
                        .entry(next.clone())
                        .or_insert(0) += 1;
                }
            }
        }
    }
    counts
}

/// MI of extending `seq` with `next`. `None` means no cooccurrence (or a
/// count of zero somewhere): there is no signal, not a numeric value.
pub fn mutual_information(
    seq: &[String],
    next: &str,
    counts: &SequenceCounts,
    log_base: f64,
) -> Option<f64> {
    debug_assert!(log_base > 0.0 && log_base != 1.0);
    let joint = counts.adjacency(seq, next);
    let f_seq = counts.sequence(seq);
    let f_next = counts.unigram(next);
    if joint == 0 || f_seq == 0 || f_next == 0 || counts.total_tokens == 0 {
        return None;
    }
    // Integer-valued f64 products stay exact well past any realistic
    // corpus size, so the independence case gives a ratio of exactly 1.
    let ratio =
        (joint as f64 * counts.total_tokens as f64) / (f_seq as f64 * f_next as f64);
    Some(ratio.ln() / log_base.ln())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompoundTerm {
    /// Stemmed tokens, length >= 2.
    pub tokens: Vec<String>,
    /// Dominant surface forms joined by single spaces, for display.
    pub display: String,
    /// MI of the final extension step.
    pub mi_score: f64,
    /// Occurrences of the full contiguous sequence in the corpus.
    pub support: u64,
}

/// Iterative construction: L_1 is the selected simple terms; a sequence
/// s in L_n extends to s·t when t is itself in L_1, s·t was observed,
/// and MI(s, t) strictly exceeds the threshold. Stops at `max_len` or
/// when a level comes up empty. Returns all levels >= 2 sorted by
/// length, then MI descending, then tokens.
pub fn extract_compound_terms(
    simple_terms: &[TermCandidate],
    documents: &[Document],
    mi_threshold: f64,
    log_base: f64,
    max_len: usize,
    window: usize,
) -> Vec<CompoundTerm> {
    let l1: BTreeSet<&str> = simple_terms
        .iter()
        .filter(|c| c.selected)
        .map(|c| c.term.as_str())
        .collect();
    if l1.is_empty() || max_len < 2 {
        return Vec::new();
    }

    let counts = count_sequences(documents, max_len, window);
    let surfaces = dominant_surfaces(documents);
    let display = |tokens: &[String]| -> String {
        tokens
            .iter()
            .map(|t| surfaces.get(t).map(String::as_str).unwrap_or(t))
            .collect::<Vec<_>>()
            .join(" ")
    };

    let mut level: Vec<Vec<String>> = l1.iter().map(|t| vec![t.to_string()]).collect();
    let mut out: Vec<CompoundTerm> = Vec::new();
    for _ in 2..=max_len {
        let grown: Vec<(Vec<String>, f64)> = level
            .par_iter()
            .flat_map_iter(|seq| {
                counts
                    .extensions(seq)
                    .filter(|(t, _)| l1.contains(t))
                    .filter_map(|(t, _)| {
                        let mi = mutual_information(seq, t, &counts, log_base)?;
                        if mi > mi_threshold {
                            let mut tokens = seq.clone();
                            tokens.push(t.to_string());
                            Some((tokens, mi))
                        } else {
                            None
                        }
                    })
                    .collect::<Vec<_>>()
                    .into_iter()
            })
            .collect();
        if grown.is_empty() {
            break;
        }
        for (tokens, mi) in &grown {
            out.push(CompoundTerm {
                display: display(tokens),
                support: counts.sequence(tokens),
                tokens: tokens.clone(),
                mi_score: *mi,
            });
        }
        level = grown.into_iter().map(|(tokens, _)| tokens).collect();
    }

    out.sort_by(|a, b| {
        a.tokens
            .len()
            .cmp(&b.tokens.len())
            .then_with(|| b.mi_score.total_cmp(&a.mi_score))
            .then_with(|| a.tokens.cmp(&b.tokens))
    });
    out
}

/// CSV export with a fixed column order:
/// `compound,length,mi_score,support`.
pub fn write_compounds_csv<W: Write>(writer: W, compounds: &[CompoundTerm]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io_err = |e: csv::Error| Error::Pipeline(format!("writing compound csv: {e}"));
    w.write_record(["compound", "length", "mi_score", "support"])
        .map_err(io_err)?;
    for c in compounds {
        w.write_record([
            c.display.as_str(),
            &c.tokens.len().to_string(),
            &format!("{:.6}", c.mi_score),
            &c.support.to_string(),
        ])
        .map_err(io_err)?;
    }
    w.flush()
        .map_err(|e| Error::Pipeline(format!("writing compound csv: {e}")))?;
    Ok(())
}
