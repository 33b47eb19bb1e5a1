//! Browser surface for the demo page: rerun the pipeline on edited
//! annotations and thresholds, query the resulting in-memory index, and
//! trace the stemmer. Every resource file is embedded at compile time,
//! so the page runs from static hosting with no backend.

use std::collections::BTreeMap;
use std::path::Path;

use wasm_bindgen::prelude::*;

use termdex::collocation::extract_compound_terms;
use termdex::corpus::{Annotation, Corpus, ImageMeta};
use termdex::indexer::{
    index_with, keyword_report, search, ImageIndex, ResolvedPipeline, SearchOptions,
};
use termdex::preprocess::{
    parse_repair_map, parse_stopwords, preprocess_document, CleaningConfig, Document,
};
use termdex::stemmer::parse_ruleset;
use termdex::thesaurus::{parse_thesaurus_str, MatchPolicy};
use termdex::weighting::{compute_stats, select_simple_terms};

const STOPWORDS_BASE: &str = include_str!("../../../data/stopwords/fr_base.txt");
const STOPWORDS_EXTENSION: &str = include_str!("../../../data/stopwords/fr_extension.txt");
const STEMMER_RULES: &str = include_str!("../../../data/stemming/fr.rules");
const REPAIR_MAP: &str = include_str!("../../../data/repair/fr_artifacts.map");
const THESAURUS: &str = include_str!("../../../data/thesaurus/mini_mesh.rdf");
const SAMPLE_ANNOTATIONS: &str = include_str!("sample_annotations.txt");

/// The shipped demo corpus, one annotation per line, for prefilling the
/// page.
#[wasm_bindgen]
pub fn sample_annotations() -> String {
    SAMPLE_ANNOTATIONS.to_string()
}

/// Lines starting with `@some-image-id ` attach to that image; plain
/// lines attach to the default one, mirroring the shipped corpus.
fn corpus_from_lines(text: &str) -> Corpus {
    const DEFAULT_IMAGE: &str = "img-001";
    let mut annotations = Vec::new();
    for (i, line) in text.lines().map(str::trim).filter(|l| !l.is_empty()).enumerate() {
        let (image_id, body) = match line.strip_prefix('@') {
            Some(rest) => match rest.split_once(char::is_whitespace) {
                Some((id, tail)) if !id.is_empty() && !tail.trim().is_empty() => {
                    (id.to_string(), tail.trim().to_string())
                }
                _ => (DEFAULT_IMAGE.to_string(), line.to_string()),
            },
            None => (DEFAULT_IMAGE.to_string(), line.to_string()),
        };
        annotations.push(Annotation {
            annotation_id: format!("a{}", i + 1),
            image_id,
            author: None,
            text: body,
        });
    }

    let mut images = BTreeMap::new();
    for a in &annotations {
        images.entry(a.image_id.clone()).or_insert_with(|| ImageMeta {
            image_id: a.image_id.clone(),
            name: (a.image_id == DEFAULT_IMAGE).then(|| "demo image".to_string()),
            path: None,
        });
    }
    Corpus { annotations, images }
}

#[wasm_bindgen]
pub struct Workbench {
    pipeline: ResolvedPipeline,
    index: Option<ImageIndex>,
    image_names: BTreeMap<String, String>,
}

#[wasm_bindgen]
impl Workbench {
    /// Builds the French pipeline from the embedded resources.
    #[wasm_bindgen(constructor)]
    pub fn new() -> Result<Workbench, JsError> {
        let origin = Path::new("embedded");
        let mut cleaning = CleaningConfig::default();
        cleaning.stopwords = parse_stopwords(STOPWORDS_BASE, origin)?;
        cleaning
            .stopwords
            .extend(parse_stopwords(STOPWORDS_EXTENSION, origin)?);
        cleaning.repair = parse_repair_map(REPAIR_MAP, origin)?;

        let pipeline = ResolvedPipeline {
            cleaning,
            ruleset: parse_ruleset(STEMMER_RULES, origin)?,
            thesaurus: parse_thesaurus_str(THESAURUS, origin)?,
            match_policy: MatchPolicy::default(),
            params: Default::default(),
        };
        Ok(Workbench {
            pipeline,
            index: None,
            image_names: BTreeMap::new(),
        })
    }

    /// Reruns the whole pipeline on the given annotations (one per
    /// line) and thresholds. Returns a JSON object with the scored
    /// stages and the final result: `terms`, `compounds`, `keywords`
    /// (per image) and the printable `report`.
    pub fn run(
        &mut self,
        annotations: &str,
        tfidf_threshold: f64,
        mi_threshold: f64,
    ) -> Result<String, JsError> {
        self.pipeline.params.tfidf_threshold = tfidf_threshold;
        self.pipeline.params.mi_threshold = mi_threshold;
        self.pipeline.params.validate()?;

        let corpus = corpus_from_lines(annotations);
        if corpus.is_empty() {
            return Err(JsError::new("enter at least one annotation line"));
        }

        let documents: Vec<Document> = corpus
            .annotations
            .iter()
            .map(|a| preprocess_document(a, &self.pipeline.cleaning, &self.pipeline.ruleset))
            .collect();
        let stats = compute_stats(&documents)?;
        let candidates = select_simple_terms(&documents, &stats, tfidf_threshold);
        let compounds = extract_compound_terms(
            &candidates,
            &documents,
            mi_threshold,
            self.pipeline.params.mi_log_base,
            self.pipeline.params.max_compound_len,
            self.pipeline.params.window,
        );

        let index = index_with(&corpus, &self.pipeline)?;
        self.image_names = corpus
            .images
            .iter()
            .filter_map(|(id, meta)| meta.name.clone().map(|n| (id.clone(), n)))
            .collect();
        let payload = serde_json::json!({
            "terms": candidates,
            "compounds": compounds,
            "keywords": index.per_image,
            "report": keyword_report(&index, &self.image_names),
        });
        self.index = Some(index);
        Ok(payload.to_string())
    }

    /// Queries the index built by the last `run`. Returns a JSON array
    /// of hits with matched keywords and scores.
    pub fn search(&self, query: &str) -> Result<String, JsError> {
        let index = self
            .index
            .as_ref()
            .ok_or_else(|| JsError::new("run the pipeline before searching"))?;
        let hits = search(index, query, &SearchOptions { limit: Some(20) });
        Ok(serde_json::to_string(&hits).expect("hits always serialize"))
    }

    /// Stems one word and returns the per-phase trace as a JSON array
    /// of `{phase, rule, output}` rows.
    pub fn stem_trace(&self, word: &str) -> Result<String, JsError> {
        let token = word.trim().to_lowercase();
        if token.is_empty() {
            return Err(JsError::new("enter a word to stem"));
        }
        let steps = self.pipeline.ruleset.trace(&token);
        Ok(serde_json::to_string(&steps).expect("trace always serializes"))
    }
}
