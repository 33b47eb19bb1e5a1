//! Pipeline orchestration: run cleaning, stemming, weighting,
//! collocation and thesaurus verification over a corpus, persist the
//! resulting image index, and answer keyword queries against it.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::collocation::{
    extract_compound_terms, DEFAULT_MAX_COMPOUND_LEN, DEFAULT_MI_LOG_BASE, DEFAULT_MI_THRESHOLD,
    DEFAULT_WINDOW,
};
use crate::corpus::{corpus_fingerprint, hex, Corpus};
use crate::error::{Error, Result};
use crate::preprocess::{
    clean, load_repair_map, load_stopwords, preprocess_document, CleaningConfig, Document,
};
use crate::stemmer::{load_ruleset, StemmerRuleset};
use crate::thesaurus::{
    extract_concepts, parse_thesaurus, KeywordKind, MatchPolicy, Thesaurus,
};
use crate::weighting::{compute_stats, select_simple_terms, DEFAULT_TFIDF_THRESHOLD};

pub const INDEX_FORMAT_VERSION: u32 = 1;

/// Numeric pipeline knobs, kept separate from file paths so they can be
/// snapshotted into the index verbatim.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineParams {
    pub tfidf_threshold: f64,
    pub mi_threshold: f64,
    pub mi_log_base: f64,
    pub max_compound_len: usize,
    /// Adjacency window for collocation counting: 1 means strictly
    /// consecutive tokens.
    pub window: usize,
}

impl Default for PipelineParams {
    fn default() -> Self {
        PipelineParams {
            tfidf_threshold: DEFAULT_TFIDF_THRESHOLD,
            mi_threshold: DEFAULT_MI_THRESHOLD,
            mi_log_base: DEFAULT_MI_LOG_BASE,
            max_compound_len: DEFAULT_MAX_COMPOUND_LEN,
            window: DEFAULT_WINDOW,
        }
    }
}

impl PipelineParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tfidf_threshold >= 0.0) {
            return Err(Error::Validation("tfidf_threshold must be >= 0".into()));
        }
        if !(self.mi_threshold >= 0.0) {
            return Err(Error::Validation("mi_threshold must be >= 0".into()));
        }
        if !(self.mi_log_base > 0.0) || self.mi_log_base == 1.0 {
            return Err(Error::Validation(
                "mi_log_base must be positive and not 1".into(),
            ));
        }
        if self.max_compound_len < 2 {
            return Err(Error::Validation("max_compound_len must be >= 2".into()));
        }
        if self.window < 1 {
            return Err(Error::Validation("window must be >= 1".into()));
        }
        Ok(())
    }
}

/// Complete pipeline configuration as read from a config file: numeric
/// parameters, cleaning flags, and the resource files to load. Inline
/// `cleaning.stopwords` entries are merged with the `stopwords_paths`
/// files at resolution time.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    #[serde(flatten)]
    pub params: PipelineParams,
    pub cleaning: CleaningConfig,
    pub stopwords_paths: Vec<PathBuf>,
    pub stemmer_path: Option<PathBuf>,
    pub repair_path: Option<PathBuf>,
    pub thesaurus_path: Option<PathBuf>,
    pub match_policy: MatchPolicy,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.cleaning.validate()
    }

    /// Loads the cleaning resources and stemmer rules, which is all the
    /// scored stages need; thesaurus verification is not involved. The
    /// stemmer has no built-in default, so an unset path is a
    /// configuration error.
    pub fn resolve_text_stages(&self) -> Result<(CleaningConfig, StemmerRuleset)> {
        self.validate()?;
        let stemmer_path = self.stemmer_path.as_deref().ok_or_else(|| {
            Error::Config("no stemmer rule file configured (stemmer_path)".into())
        })?;

        let mut cleaning = self.cleaning.clone();
        for path in &self.stopwords_paths {
            cleaning.stopwords.extend(load_stopwords(path)?);
        }
        if let Some(repair_path) = &self.repair_path {
            cleaning.repair.merge(load_repair_map(repair_path)?);
        }
        cleaning.validate()?;
        Ok((cleaning, load_ruleset(stemmer_path)?))
    }

    /// Loads every referenced resource file, thesaurus included.
    pub fn resolve(&self) -> Result<ResolvedPipeline> {
        let (cleaning, ruleset) = self.resolve_text_stages()?;
        let thesaurus_path = self.thesaurus_path.as_deref().ok_or_else(|| {
            Error::Config("no thesaurus configured (thesaurus_path)".into())
        })?;
        Ok(ResolvedPipeline {
            cleaning,
            ruleset,
            thesaurus: parse_thesaurus(thesaurus_path)?,
            match_policy: self.match_policy,
            params: self.params,
        })
    }
}

/// A pipeline with every resource loaded, ready to index corpora.
#[derive(Debug, Clone)]
pub struct ResolvedPipeline {
    pub cleaning: CleaningConfig,
    pub ruleset: StemmerRuleset,
    pub thesaurus: Thesaurus,
    pub match_policy: MatchPolicy,
    pub params: PipelineParams,
}

/// Everything a reader of the index file needs to reproduce query
/// processing, embedded so search works without the original resource
/// files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSnapshot {
    pub params: PipelineParams,
    pub cleaning: CleaningConfig,
    pub stemmer: StemmerRuleset,
    pub match_policy: MatchPolicy,
    /// Size of the thesaurus the keywords were verified against.
    pub thesaurus_concepts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeywordEntry {
    /// Display phrase in dominant surface forms.
    pub keyword: String,
    /// Stem sequence used for matching; single element for simple terms.
    pub stems: Vec<String>,
    pub kind: KeywordKind,
    /// Average tf.idf for simple terms, final-step MI for compounds.
    pub score: f64,
    /// Witness concept that validated this keyword.
    pub concept_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageIndex {
    pub format_version: u32,
    pub corpus_fingerprint: String,
    pub config: ConfigSnapshot,
    /// Keyword lists per image, compounds first, scores descending.
    pub per_image: BTreeMap<String, Vec<KeywordEntry>>,
    /// Transpose of per_image: keyword to the images that carry it.
    pub inverted: BTreeMap<String, BTreeSet<String>>,
    /// Digest over the canonical serialization of all other fields.
    pub checksum: String,
}

/// The checksummed portion of the file, borrowed so the digest is
/// computed over exactly the same serialization the file uses,
/// independent of pretty-printing.
#[derive(Serialize)]
struct IndexBody<'a> {
    format_version: u32,
    corpus_fingerprint: &'a str,
    config: &'a ConfigSnapshot,
    per_image: &'a BTreeMap<String, Vec<KeywordEntry>>,
    inverted: &'a BTreeMap<String, BTreeSet<String>>,
}

impl ImageIndex {
    fn compute_checksum(&self) -> String {
        let body = IndexBody {
            format_version: self.format_version,
            corpus_fingerprint: &self.corpus_fingerprint,
            config: &self.config,
            per_image: &self.per_image,
            inverted: &self.inverted,
        };
        let canonical =
            serde_json::to_vec(&body).expect("index serialization cannot fail");
        hex(&Sha256::digest(&canonical))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)
            .expect("index serialization cannot fail");
        text.push('\n');
        std::fs::write(path, text).map_err(|source| Error::WriteFile {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<ImageIndex> {
        let text = crate::error::read_to_string(path)?;
        let integrity = |message: String| Error::IndexIntegrity {
            path: path.to_path_buf(),
            message,
        };
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| integrity(format!("not valid JSON: {e}")))?;
        let found = value
            .get("format_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| integrity("format_version field missing".into()))?;
        if found != u64::from(INDEX_FORMAT_VERSION) {
            return Err(Error::IndexVersion {
                path: path.to_path_buf(),
                found,
                expected: u64::from(INDEX_FORMAT_VERSION),
            });
        }
        let index: ImageIndex = serde_json::from_value(value)
            .map_err(|e| integrity(format!("unexpected structure: {e}")))?;
        let expected = index.compute_checksum();
        if index.checksum != expected {
            return Err(integrity(
                "checksum mismatch, the file was truncated or edited".into(),
            ));
        }
        Ok(index)
    }
}

pub fn save_index(index: &ImageIndex, path: &Path) -> Result<()> {
    index.save(path)
}

pub fn load_index(path: &Path) -> Result<ImageIndex> {
    ImageIndex::load(path)
}

/// True when `needle` occurs as a contiguous run inside `haystack`.
fn contains_contiguous(haystack: &[String], needle: &[String]) -> bool {
    !needle.is_empty()
        && needle.len() <= haystack.len()
        && haystack.windows(needle.len()).any(|w| w == needle)
}

/// Convenience entry point: resolve the config, then index.
pub fn index_comments(corpus: &Corpus, config: &PipelineConfig) -> Result<ImageIndex> {
    index_with(corpus, &config.resolve()?)
}

/// The full pipeline. Statistics pool every annotation in the corpus;
/// keyword attribution is per image through its own annotations.
pub fn index_with(corpus: &Corpus, pipeline: &ResolvedPipeline) -> Result<ImageIndex> {
    pipeline.params.validate()?;
    if corpus.is_empty() {
        return Err(Error::Pipeline("the corpus has no annotations".into()));
    }

    let documents: Vec<Document> = corpus
        .annotations
        .par_iter()
        .map(|a| preprocess_document(a, &pipeline.cleaning, &pipeline.ruleset))
        .collect();
    if documents.iter().all(|d| d.tokens.is_empty()) {
        return Err(Error::Pipeline(
            "no content tokens left after cleaning".into(),
        ));
    }

    let stats = compute_stats(&documents)?;
    let candidates = select_simple_terms(&documents, &stats, pipeline.params.tfidf_threshold);
    let compounds = extract_compound_terms(
        &candidates,
        &documents,
        pipeline.params.mi_threshold,
        pipeline.params.mi_log_base,
        pipeline.params.max_compound_len,
        pipeline.params.window,
    );
    let keywords = extract_concepts(
        &candidates,
        &compounds,
        &pipeline.thesaurus,
        &pipeline.match_policy,
        Some(&pipeline.ruleset),
    );

    let mut docs_by_image: BTreeMap<&str, Vec<&Document>> = BTreeMap::new();
    for doc in &documents {
        docs_by_image.entry(&doc.image_id).or_default().push(doc);
    }

    // every corpus image gets an entry, keyworded or not
    let mut per_image: BTreeMap<String, Vec<KeywordEntry>> = corpus
        .images
        .keys()
        .map(|id| (id.clone(), Vec::new()))
        .collect();
    for (image_id, docs) in &docs_by_image {
        let entries = per_image.entry((*image_id).to_string()).or_default();
        for keyword in &keywords {
            let present = match keyword.kind {
                KeywordKind::Compound => docs
                    .iter()
                    .any(|d| contains_contiguous(&d.tokens, &keyword.stems)),
                KeywordKind::Simple => docs
                    .iter()
                    .any(|d| d.tokens.contains(&keyword.stems[0])),
            };
            if present {
                entries.push(KeywordEntry {
                    keyword: keyword.keyword.clone(),
                    stems: keyword.stems.clone(),
                    kind: keyword.kind,
                    score: keyword.score,
                    concept_id: keyword
                        .concept_id
                        .clone()
                        .expect("verified keywords carry a witness"),
                });
            }
        }
        entries.sort_by(|a, b| {
            let rank = |k: KeywordKind| match k {
                KeywordKind::Compound => 0,
                KeywordKind::Simple => 1,
            };
            rank(a.kind)
                .cmp(&rank(b.kind))
                .then_with(|| b.score.total_cmp(&a.score))
                .then_with(|| a.keyword.cmp(&b.keyword))
        });
    }

    let mut inverted: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for (image_id, entries) in &per_image {
        for entry in entries {
            inverted
                .entry(entry.keyword.clone())
                .or_default()
                .insert(image_id.clone());
        }
    }

    let mut index = ImageIndex {
        format_version: INDEX_FORMAT_VERSION,
        corpus_fingerprint: corpus_fingerprint(corpus),
        config: ConfigSnapshot {
            params: pipeline.params,
            cleaning: pipeline.cleaning.clone(),
            stemmer: pipeline.ruleset.clone(),
            match_policy: pipeline.match_policy,
            thesaurus_concepts: pipeline.thesaurus.concept_count(),
        },
        per_image,
        inverted,
        checksum: String::new(),
    };
    index.checksum = index.compute_checksum();
    Ok(index)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SearchOptions {
    pub limit: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchHit {
    pub image_id: String,
    /// Index keywords the query covered, in per-image order.
    pub matched_keywords: Vec<String>,
    /// Sum of the matched keywords' scores; the tie-breaker.
    pub score: f64,
}

impl SearchHit {
    pub fn match_count(&self) -> usize {
        self.matched_keywords.len()
    }
}

/// Cleans and stems the query with the index's own config snapshot,
/// then ranks images by how many of their keywords the query contains
/// as contiguous stem runs. Ties break by summed keyword score, then
/// image id. Zero-match images are omitted.
pub fn search(index: &ImageIndex, query: &str, options: &SearchOptions) -> Vec<SearchHit> {
    let stems: Vec<String> = clean(query, &index.config.cleaning)
        .iter()
        .map(|t| index.config.stemmer.stem(t))
        .collect();
    if stems.is_empty() {
        return Vec::new();
    }

    let mut hits: Vec<SearchHit> = index
        .per_image
        .iter()
        .filter_map(|(image_id, entries)| {
            let matched: Vec<&KeywordEntry> = entries
                .iter()
                .filter(|e| contains_contiguous(&stems, &e.stems))
                .collect();
            if matched.is_empty() {
                return None;
            }
            Some(SearchHit {
                image_id: image_id.clone(),
                score: matched.iter().map(|e| e.score).sum(),
                matched_keywords: matched.iter().map(|e| e.keyword.clone()).collect(),
            })
        })
        .collect();
    hits.sort_by(|a, b| {
        b.match_count()
            .cmp(&a.match_count())
            .then_with(|| b.score.total_cmp(&a.score))
            .then_with(|| a.image_id.cmp(&b.image_id))
    });
    if let Some(limit) = options.limit {
        hits.truncate(limit);
    }
    hits
}

/// Human-readable report, one block per image: a header line, then one
/// "Index Keywords :" line per keyword with the first letter raised.
pub fn keyword_report(index: &ImageIndex, names: &BTreeMap<String, String>) -> String {
    let mut out = String::new();
    for (image_id, entries) in &index.per_image {
        match names.get(image_id) {
            Some(name) => out.push_str(&format!("image {image_id} ({name})\n")),
            None => out.push_str(&format!("image {image_id}\n")),
        }
        for entry in entries {
            let mut chars = entry.keyword.chars();
            let display = match chars.next() {
                Some(first) => first.to_uppercase().collect::<String>() + chars.as_str(),
                None => String::new(),
            };
            out.push_str(&format!("  Index Keywords : {display}.\n"));
        }
    }
    out
}
