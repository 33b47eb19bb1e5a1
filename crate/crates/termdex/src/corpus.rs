//! Corpus model and manifest ingestion.
//!
//! A corpus is a set of images and an ordered list of free-text expert
//! annotations, each bound to exactly one image. Annotations are the unit
//! of indexing ("documents"); images only group them.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{read_to_string, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageMeta {
    pub image_id: String,
    pub name: Option<String>,
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub annotation_id: String,
    pub image_id: String,
    pub author: Option<String>,
    pub text: String,
}

/// Immutable after load; annotation order is the manifest order, so
/// document indices are deterministic across runs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    pub annotations: Vec<Annotation>,
    pub images: BTreeMap<String, ImageMeta>,
}

impl Corpus {
    pub fn is_empty(&self) -> bool {
        self.annotations.is_empty()
    }

    /// Annotations attached to one image, in corpus order.
    pub fn annotations_for<'a>(
        &'a self,
        image_id: &'a str,
    ) -> impl Iterator<Item = &'a Annotation> + 'a {
        self.annotations.iter().filter(move |a| a.image_id == image_id)
    }
}

#[derive(Deserialize)]
struct RawManifest {
    #[serde(default)]
    images: Vec<RawImage>,
    #[serde(default)]
    annotations: Vec<RawAnnotation>,
}

#[derive(Deserialize)]
struct RawImage {
    image_id: String,
    name: Option<String>,
    path: Option<PathBuf>,
}

#[derive(Deserialize)]
struct RawAnnotation {
    annotation_id: String,
    image_id: String,
    author: Option<String>,
    text: Option<String>,
    text_path: Option<PathBuf>,
}

/// Loads a corpus manifest (JSON). Annotation text is either inline
/// (`text`) or in a UTF-8 file (`text_path`, resolved relative to the
/// manifest's directory); exactly one of the two must be present.
pub fn load_corpus(manifest_path: &Path) -> Result<Corpus> {
    let raw_text = read_to_string(manifest_path)?;
    let raw: RawManifest = serde_json::from_str(&raw_text).map_err(|e| Error::Manifest {
        path: manifest_path.to_path_buf(),
        message: e.to_string(),
    })?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));

    let mut images = BTreeMap::new();
    for img in raw.images {
        if img.image_id.trim().is_empty() {
            return Err(Error::Validation("image with empty image_id".into()));
        }
        let id = img.image_id.clone();
        let prev = images.insert(
            id.clone(),
            ImageMeta { image_id: img.image_id, name: img.name, path: img.path },
        );
        if prev.is_some() {
            return Err(Error::Validation(format!("duplicate image_id {id:?}")));
        }
    }

    let mut annotations = Vec::with_capacity(raw.annotations.len());
    let mut seen = std::collections::BTreeSet::new();
    for ann in raw.annotations {
        if !seen.insert(ann.annotation_id.clone()) {
            return Err(Error::Validation(format!(
                "duplicate annotation_id {:?}",
                ann.annotation_id
            )));
        }
        if !images.contains_key(&ann.image_id) {
            return Err(Error::Validation(format!(
                "annotation {:?} references unknown image_id {:?}",
                ann.annotation_id, ann.image_id
            )));
        }
        let text = match (ann.text, ann.text_path) {
            (Some(t), None) => t,
            (None, Some(p)) => read_to_string(&base.join(p))?,
            (Some(_), Some(_)) => {
                return Err(Error::Manifest {
                    path: manifest_path.to_path_buf(),
                    message: format!(
                        "annotation {:?} has both text and text_path",
                        ann.annotation_id
                    ),
                })
            }
            (None, None) => {
                return Err(Error::Manifest {
                    path: manifest_path.to_path_buf(),
                    message: format!(
                        "annotation {:?} has neither text nor text_path",
                        ann.annotation_id
                    ),
                })
            }
        };
        if text.trim().is_empty() {
            return Err(Error::Validation(format!(
                "annotation {:?} has empty text",
                ann.annotation_id
            )));
        }
        annotations.push(Annotation {
            annotation_id: ann.annotation_id,
            image_id: ann.image_id,
            author: ann.author,
            text,
        });
    }

    Ok(Corpus { annotations, images })
}

/// Hex digest over annotation ids, image ids and texts, independent of
/// manifest ordering. Authors and image names are display metadata and
/// deliberately excluded.
pub fn corpus_fingerprint(corpus: &Corpus) -> String {
    let mut hasher = Sha256::new();
    for id in corpus.images.keys() {
        hasher.update(b"image\n");
        hasher.update(id.as_bytes());
        hasher.update(b"\n");
    }
    let mut anns: Vec<&Annotation> = corpus.annotations.iter().collect();
    anns.sort_by(|a, b| a.annotation_id.cmp(&b.annotation_id));
    for ann in anns {
        hasher.update(b"annotation\n");
        hasher.update(ann.annotation_id.as_bytes());
        hasher.update(b"\n");
        hasher.update(ann.image_id.as_bytes());
        hasher.update(b"\n");
        // length prefix keeps texts containing newlines unambiguous
        hasher.update(ann.text.len().to_string().as_bytes());
        hasher.update(b"\n");
        hasher.update(ann.text.as_bytes());
        hasher.update(b"\n");
    }
    hex(&hasher.finalize())
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        out.push_str(&format!("{b:02x}"));
    }
    out
}
