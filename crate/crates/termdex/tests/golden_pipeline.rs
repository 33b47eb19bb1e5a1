//! End-to-end checks over the shipped resource files and the annotated
//! radiograph corpus in data/examples/radiology. All numeric expectations
//! were derived with an independent implementation of the formulas and
//! frozen here.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use termdex::collocation::{count_sequences, extract_compound_terms};
use termdex::corpus::load_corpus;
use termdex::indexer::{
    index_comments, index_with, search, PipelineConfig, SearchOptions,
};
use termdex::preprocess::{clean, preprocess_document, Document};
use termdex::thesaurus::parse_thesaurus;
use termdex::weighting::{compute_stats, select_simple_terms};

fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(rel)
}

fn golden_config() -> PipelineConfig {
    PipelineConfig {
        stopwords_paths: vec![
            data("stopwords/fr_base.txt"),
            data("stopwords/fr_extension.txt"),
        ],
        stemmer_path: Some(data("stemming/fr.rules")),
        repair_path: Some(data("repair/fr_artifacts.map")),
        thesaurus_path: Some(data("thesaurus/mini_mesh.rdf")),
        ..PipelineConfig::default()
    }
}

fn preprocessed() -> Vec<Document> {
    let corpus = load_corpus(&data("examples/radiology/manifest.json")).unwrap();
    let pipeline = golden_config().resolve().unwrap();
    corpus
        .annotations
        .iter()
        .map(|a| preprocess_document(a, &pipeline.cleaning, &pipeline.ruleset))
        .collect()
}

#[test]
fn corpus_loads_with_eight_annotations() {
    let corpus = load_corpus(&data("examples/radiology/manifest.json")).unwrap();
    assert_eq!(corpus.annotations.len(), 8);
    assert_eq!(corpus.images.len(), 1);
    assert_eq!(
        corpus.images["img-001"].name.as_deref(),
        Some("brain radiograph")
    );
}

#[test]
fn cleaning_matches_the_golden_file() {
    let corpus = load_corpus(&data("examples/radiology/manifest.json")).unwrap();
    let pipeline = golden_config().resolve().unwrap();
    let cleaned: Vec<String> = corpus
        .annotations
        .iter()
        .map(|a| clean(&a.text, &pipeline.cleaning).join(" "))
        .collect();
    let golden = std::fs::read_to_string(
        Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/radiology_cleaned.txt"),
    )
    .unwrap();
    let expected: Vec<&str> = golden.lines().collect();
    assert_eq!(cleaned.len(), expected.len());
    for (i, (got, want)) in cleaned.iter().zip(&expected).enumerate() {
        assert_eq!(got, want, "annotation {}", i + 1);
    }
}

#[test]
fn document_lengths_and_mean() {
    let documents = preprocessed();
    let lengths: Vec<usize> = documents.iter().map(|d| d.length_words).collect();
    assert_eq!(lengths, vec![15, 5, 7, 4, 11, 6, 6, 7]);
    let stats = compute_stats(&documents).unwrap();
    assert_eq!(stats.avg_length, 7.625);
    assert_eq!(stats.n_docs, 8);
}

#[test]
fn selected_terms_and_their_averages() {
    let documents = preprocessed();
    let stats = compute_stats(&documents).unwrap();
    let candidates = select_simple_terms(&documents, &stats, 0.125);
    let selected: BTreeMap<&str, f64> = candidates
        .iter()
        .filter(|c| c.selected)
        .map(|c| (c.term.as_str(), c.avg_score))
        .collect();

    let expected = [
        ("droit", 0.18600883994896888),
        ("dévi", 0.12952313895710327),
        ("engag", 0.18323416298874493),
        ("fronto", 0.3230522622240118),
        ("hématom", 0.365747949772154),
        ("hémorrag", 0.40575045644956736),
        ("inond", 0.23210562084885283),
        ("méning", 0.40575045644956736),
        ("pariétal", 0.3230522622240118),
        ("ventriculair", 0.23210562084885283),
    ];
    assert_eq!(
        selected.keys().copied().collect::<Vec<_>>(),
        expected.iter().map(|(t, _)| *t).collect::<Vec<_>>()
    );
    for (term, want) in expected {
        let got = selected[term];
        assert!((got - want).abs() < 1e-12, "{term}: {got} vs {want}");
    }

    // every rejected term sits at or below the threshold
    for c in candidates.iter().filter(|c| !c.selected) {
        assert!(c.avg_score <= 0.125, "{}: {}", c.term, c.avg_score);
    }
}

#[test]
fn corpus_token_count_and_adjacency() {
    let documents = preprocessed();
    let counts = count_sequences(&documents, 4, 1);
    assert_eq!(counts.total_tokens, 61);
    let seq = vec!["hémorrag".to_string()];
    assert_eq!(counts.adjacency(&seq, "méning"), 8);
}

#[test]
fn compound_scores_match_the_frozen_values() {
    let documents = preprocessed();
    let stats = compute_stats(&documents).unwrap();
    let candidates = select_simple_terms(&documents, &stats, 0.125);
    let compounds = extract_compound_terms(&candidates, &documents, 0.15, 10.0, 4, 1);

    let by_tokens: BTreeMap<Vec<&str>, (f64, u64)> = compounds
        .iter()
        .map(|c| {
            (
                c.tokens.iter().map(String::as_str).collect(),
                (c.mi_score, c.support),
            )
        })
        .collect();

    let expected: [(&[&str], f64, u64); 5] = [
        (&["hémorrag", "méning"], 0.8822398480188234, 8),
        (&["inond", "ventriculair"], 1.1832698436828046, 4),
        (&["hématom", "fronto"], 0.9402317949965102, 6),
        (&["fronto", "pariétal"], 1.0071785846271233, 6),
        (
            &["hématom", "fronto", "pariétal"],
            1.0071785846271233,
            6,
        ),
    ];
    for (tokens, mi, support) in expected {
        let (got_mi, got_support) = by_tokens
            .get(&tokens.to_vec())
            .unwrap_or_else(|| panic!("missing compound {tokens:?}"));
        assert!((got_mi - mi).abs() < 1e-12, "{tokens:?}: {got_mi} vs {mi}");
        assert_eq!(*got_support, support, "{tokens:?}");
    }
}

#[test]
fn golden_index_keywords() {
    let corpus = load_corpus(&data("examples/radiology/manifest.json")).unwrap();
    let index = index_comments(&corpus, &golden_config()).unwrap();

    let keywords: BTreeSet<&str> = index.per_image["img-001"]
        .iter()
        .map(|e| e.keyword.as_str())
        .collect();
    let expected: BTreeSet<&str> = [
        "hématome fronto pariétale",
        "hémorragie méningée",
        "inondation ventriculaire",
    ]
    .into_iter()
    .collect();
    assert_eq!(keywords, expected);

    // score-descending compound order
    let scores: Vec<f64> = index.per_image["img-001"].iter().map(|e| e.score).collect();
    assert!(scores.windows(2).all(|w| w[0] >= w[1]), "{scores:?}");

    // each keyword names its witness concept
    for entry in &index.per_image["img-001"] {
        assert!(entry.concept_id.starts_with("fmesh:"), "{}", entry.concept_id);
    }

    for images in index.inverted.values() {
        assert_eq!(images.iter().collect::<Vec<_>>(), vec!["img-001"]);
    }
}

#[test]
fn golden_index_answers_queries() {
    let corpus = load_corpus(&data("examples/radiology/manifest.json")).unwrap();
    let index = index_comments(&corpus, &golden_config()).unwrap();

    let hits = search(&index, "hémorragie méningée", &SearchOptions::default());
    assert_eq!(hits.len(), 1);
    assert_eq!(hits[0].image_id, "img-001");
    assert_eq!(
        hits[0].matched_keywords,
        vec!["hémorragie méningée".to_string()]
    );

    // inflection-insensitive through stemming
    let inflected = search(&index, "les hémorragies méningées", &SearchOptions::default());
    assert_eq!(inflected.len(), 1);

    assert!(search(&index, "mais de la", &SearchOptions::default()).is_empty());
}

#[test]
fn shipped_thesauri_parse_to_expected_sizes() {
    let mini = parse_thesaurus(&data("thesaurus/mini_mesh.rdf")).unwrap();
    assert_eq!(mini.concept_count(), 5);
    assert_eq!(mini.skipped_concepts, 1);

    let excerpt = parse_thesaurus(&data("thesaurus/mesh_excerpt.rdf")).unwrap();
    assert_eq!(excerpt.concept_count(), 2);
    assert_eq!(excerpt.label_count(), 13);
    assert_eq!(excerpt.skipped_concepts, 0);
}

#[test]
fn determinism_across_thread_counts() {
    let corpus = load_corpus(&data("examples/radiology/manifest.json")).unwrap();
    let pipeline = golden_config().resolve().unwrap();

    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| index_with(&corpus, &pipeline))
        .unwrap();
    let many = rayon::ThreadPoolBuilder::new()
        .num_threads(8)
        .build()
        .unwrap()
        .install(|| index_with(&corpus, &pipeline))
        .unwrap();
    assert_eq!(
        serde_json::to_string(&single).unwrap(),
        serde_json::to_string(&many).unwrap()
    );
}
