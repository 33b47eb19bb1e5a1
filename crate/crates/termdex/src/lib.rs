//! Terminology extraction and image indexing over free-text annotation
//! corpora.
//!
//! The pipeline turns annotations attached to images into verified
//! keyword indexes in five stages: cleaning ([`preprocess`]), rule-based
//! suffix stripping ([`stemmer`]), pivoted tf.idf simple-term selection
//! ([`weighting`]), mutual-information compound-term growth
//! ([`collocation`]) and thesaurus concept verification ([`thesaurus`]).
//! [`indexer`] orchestrates the stages, persists the result and answers
//! keyword queries; [`evaluation`] scores ranked retrieval runs against
//! relevance judgments.
//!
//! ```
//! use termdex::corpus::{Annotation, Corpus, ImageMeta};
//! use termdex::indexer::{index_with, ResolvedPipeline, PipelineParams};
//! use termdex::preprocess::CleaningConfig;
//! use termdex::stemmer::parse_ruleset;
//! use termdex::thesaurus::{MatchPolicy, Thesaurus, Concept};
//!
//! let corpus = Corpus {
//!     images: [("img-1".into(), ImageMeta {
//!         image_id: "img-1".into(), name: None, path: None,
//!     })].into_iter().collect(),
//!     annotations: vec![Annotation {
//!         annotation_id: "a1".into(),
//!         image_id: "img-1".into(),
//!         author: None,
//!         text: "hématome cérébral hématome".into(),
//!     }],
//! };
//! let pipeline = ResolvedPipeline {
//!     cleaning: CleaningConfig::default(),
//!     ruleset: parse_ruleset("phase 1\ns ->  minstem=3\n", std::path::Path::new("<doc>")).unwrap(),
//!     thesaurus: Thesaurus::from_concepts([Concept {
//!         concept_id: "c1".into(),
//!         pref_labels: vec![("Hématome".into(), None)],
//!         alt_labels: vec![], hidden_labels: vec![], scope_note: None,
//!     }], MatchPolicy::default(), 0).unwrap(),
//!     match_policy: MatchPolicy::default(),
//!     params: PipelineParams::default(),
//! };
//! let index = index_with(&corpus, &pipeline).unwrap();
//! assert_eq!(index.per_image["img-1"][0].keyword, "hématome");
//! ```

pub mod collocation;
pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod indexer;
pub mod preprocess;
pub mod stemmer;
pub mod thesaurus;
pub mod weighting;

pub use error::{Error, ErrorClass, Result};
