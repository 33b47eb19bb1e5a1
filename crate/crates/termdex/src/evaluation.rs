//! Retrieval evaluation: average precision, MAP and precision/recall
//! curves over whitespace-separated qrels and run files.
//!
//! No externally quoted MAP figures are asserted anywhere in the test
//! suite: the runs behind such figures are not available, so they are
//! not reproducible. The metrics are instead validated against an
//! independently written reference implementation and hand cases.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use crate::error::{read_to_string, Error, Result};

/// Relevance judgments. Only positively judged images are stored.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Qrels {
    relevant: BTreeMap<String, BTreeSet<String>>,
}

impl Qrels {
    pub fn new(relevant: BTreeMap<String, BTreeSet<String>>) -> Result<Qrels> {
        for (query, images) in &relevant {
            if images.is_empty() {
                return Err(Error::Validation(format!(
                    "query {query:?} has no relevant images"
                )));
            }
        }
        Ok(Qrels { relevant })
    }

    pub fn queries(&self) -> impl Iterator<Item = &str> {
        self.relevant.keys().map(String::as_str)
    }

    pub fn relevant_for(&self, query: &str) -> Option<&BTreeSet<String>> {
        self.relevant.get(query)
    }

    pub fn len(&self) -> usize {
        self.relevant.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relevant.is_empty()
    }
}

/// Lines of "query_id image_id relevance" with relevance 0 or 1.
/// A query whose judged images are all non-relevant is rejected: AP is
/// undefined for it.
pub fn load_qrels(path: &Path) -> Result<Qrels> {
    let text = read_to_string(path)?;
    parse_qrels(&text, path)
}

pub fn parse_qrels(text: &str, origin: &Path) -> Result<Qrels> {
    let mut relevant: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let mut judged: BTreeSet<String> = BTreeSet::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fail = |message: String| Error::DataFormat {
            path: origin.to_path_buf(),
            line: lineno + 1,
            message,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [query, image, relevance] = fields[..] else {
            return Err(fail(format!(
                "expected 'query_id image_id relevance', got {} fields",
                fields.len()
            )));
        };
        let is_relevant = match relevance {
            "0" => false,
            "1" => true,
            other => return Err(fail(format!("relevance must be 0 or 1, got {other:?}"))),
        };
        judged.insert(query.to_string());
        if is_relevant {
            relevant
                .entry(query.to_string())
                .or_default()
                .insert(image.to_string());
        }
    }
    for query in &judged {
        if !relevant.contains_key(query) {
            return Err(Error::Validation(format!(
                "query {query:?} in {} has no relevant images",
                origin.display()
            )));
        }
    }
    Qrels::new(relevant)
}

/// Ranked retrieval output, one ranking per query.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunResult {
    rankings: BTreeMap<String, Vec<String>>,
}

impl RunResult {
    /// Rankings must already be ordered; duplicate images within one
    /// query are rejected.
    pub fn new(rankings: BTreeMap<String, Vec<String>>) -> Result<RunResult> {
        for (query, ranking) in &rankings {
            let unique: BTreeSet<&String> = ranking.iter().collect();
            if unique.len() != ranking.len() {
                return Err(Error::Validation(format!(
                    "query {query:?} ranks the same image more than once"
                )));
            }
        }
        Ok(RunResult { rankings })
    }

    pub fn queries(&self) -> impl Iterator<Item = &str> {
        self.rankings.keys().map(String::as_str)
    }

    pub fn ranking_for(&self, query: &str) -> Option<&[String]> {
        self.rankings.get(query).map(Vec::as_slice)
    }
}

/// Lines of "query_id image_id rank score". Entries are ordered by the
/// rank column, ties by file order; the score column is parsed for
/// validity but ranking order wins.
pub fn load_run(path: &Path) -> Result<RunResult> {
    let text = read_to_string(path)?;
    parse_run(&text, path)
}

pub fn parse_run(text: &str, origin: &Path) -> Result<RunResult> {
    let mut staged: BTreeMap<String, Vec<(u64, String)>> = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fail = |message: String| Error::DataFormat {
            path: origin.to_path_buf(),
            line: lineno + 1,
            message,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [query, image, rank, score] = fields[..] else {
            return Err(fail(format!(
                "expected 'query_id image_id rank score', got {} fields",
                fields.len()
            )));
        };
        let rank: u64 = rank
            .parse()
            .map_err(|_| fail(format!("rank must be an integer, got {rank:?}")))?;
        score
            .parse::<f64>()
            .map_err(|_| fail(format!("score must be a number, got {score:?}")))?;
        staged
            .entry(query.to_string())
            .or_default()
            .push((rank, image.to_string()));
    }
    let rankings = staged
        .into_iter()
        .map(|(query, mut entries)| {
            entries.sort_by_key(|(rank, _)| *rank);
            (query, entries.into_iter().map(|(_, image)| image).collect())
        })
        .collect();
    RunResult::new(rankings)
}

/// AP in [0,1]: precision accumulated at each relevant rank, divided by
/// the total number of relevant images. A relevant image counts only at
/// its first appearance.
pub fn average_precision(ranked: &[String], relevant: &BTreeSet<String>) -> Result<f64> {
    if relevant.is_empty() {
        return Err(Error::Domain(
            "average precision needs at least one relevant image".into(),
        ));
    }
    let mut hits = 0usize;
    let mut seen: BTreeSet<&String> = BTreeSet::new();
    let mut sum = 0.0;
    for (position, image) in ranked.iter().enumerate() {
        if !seen.insert(image) {
            continue;
        }
        if relevant.contains(image) {
            hits += 1;
            sum += hits as f64 / (position + 1) as f64;
        }
    }
    Ok(sum / relevant.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// AP per qrels query; queries the run never answered score 0.
    pub per_query: BTreeMap<String, f64>,
    /// Qrels queries absent from the run, in sorted order.
    pub missing_queries: Vec<String>,
    pub map: f64,
}

/// Scores a run against judgments. Every qrels query contributes to the
/// mean; rankings for unjudged queries are ignored.
pub fn evaluate(run: &RunResult, qrels: &Qrels) -> Result<EvalReport> {
    if qrels.is_empty() {
        return Err(Error::Domain("qrels contain no queries".into()));
    }
    let mut per_query = BTreeMap::new();
    let mut missing = Vec::new();
    for query in qrels.queries() {
        let relevant = qrels.relevant_for(query).expect("iterating qrels keys");
        let ap = match run.ranking_for(query) {
            Some(ranking) => average_precision(ranking, relevant)?,
            None => {
                missing.push(query.to_string());
                0.0
            }
        };
        per_query.insert(query.to_string(), ap);
    }
    let map = per_query.values().sum::<f64>() / per_query.len() as f64;
    Ok(EvalReport {
        per_query,
        missing_queries: missing,
        map,
    })
}

pub fn mean_average_precision(run: &RunResult, qrels: &Qrels) -> Result<f64> {
    Ok(evaluate(run, qrels)?.map)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrPoint {
    pub rank: usize,
    pub recall: f64,
    pub precision: f64,
}

/// One point per rank position; recall is non-decreasing.
pub fn pr_curve(ranked: &[String], relevant: &BTreeSet<String>) -> Result<Vec<PrPoint>> {
    if relevant.is_empty() {
        return Err(Error::Domain(
            "a precision/recall curve needs at least one relevant image".into(),
        ));
    }
    let mut hits = 0usize;
    let mut seen: BTreeSet<&String> = BTreeSet::new();
    let mut points = Vec::with_capacity(ranked.len());
    for (position, image) in ranked.iter().enumerate() {
        if seen.insert(image) && relevant.contains(image) {
            hits += 1;
        }
        points.push(PrPoint {
            rank: position + 1,
            recall: hits as f64 / relevant.len() as f64,
            precision: hits as f64 / (position + 1) as f64,
        });
    }
    Ok(points)
}

pub const INTERPOLATION_LEVELS: usize = 11;

/// Precision at recall 0.0, 0.1, ..., 1.0: the maximum precision among
/// points whose recall reaches the level, 0 when none does.
pub fn interpolate_11pt(curve: &[PrPoint]) -> [f64; INTERPOLATION_LEVELS] {
    let mut out = [0.0; INTERPOLATION_LEVELS];
    for (i, slot) in out.iter_mut().enumerate() {
        let level = i as f64 / 10.0;
        *slot = curve
            .iter()
            .filter(|p| p.recall >= level - 1e-12)
            .map(|p| p.precision)
            .fold(0.0, f64::max);
    }
    out
}

/// CSV export: raw per-rank points for each answered qrels query, then a
/// macro-averaged 11-point interpolated curve under the query id
/// "macro" (unanswered queries average in as zeros).
pub fn write_pr_csv<W: Write>(out: W, run: &RunResult, qrels: &Qrels) -> Result<()> {
    if qrels.is_empty() {
        return Err(Error::Domain("qrels contain no queries".into()));
    }
    let mut writer = csv::Writer::from_writer(out);
    let fail = |e: csv::Error| Error::Pipeline(format!("writing curve csv: {e}"));
    writer
        .write_record(["query_id", "recall", "precision"])
        .map_err(fail)?;
    let mut macro_sums = [0.0; INTERPOLATION_LEVELS];
    for query in qrels.queries() {
        let relevant = qrels.relevant_for(query).expect("iterating qrels keys");
        if let Some(ranking) = run.ranking_for(query) {
            let curve = pr_curve(ranking, relevant)?;
            for point in &curve {
                writer
                    .write_record([
                        query,
                        &format!("{:.6}", point.recall),
                        &format!("{:.6}", point.precision),
                    ])
                    .map_err(fail)?;
            }
            for (sum, value) in macro_sums.iter_mut().zip(interpolate_11pt(&curve)) {
                *sum += value;
            }
        }
    }
    for (i, sum) in macro_sums.iter().enumerate() {
        let level = i as f64 / 10.0;
        let mean = sum / qrels.len() as f64;
        writer
            .write_record(["macro", &format!("{level:.1}"), &format!("{mean:.6}")])
            .map_err(fail)?;
    }
    writer.flush().map_err(|e| Error::Pipeline(format!("writing curve csv: {e}")))?;
    Ok(())
}
