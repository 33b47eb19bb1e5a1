//! SKOS/RDF thesaurus parsing and concept verification of extracted
//! terms.
//!
//! The parser accepts the dialect found in real MeSH-style dumps rather
//! than strict RDF/XML: concepts appear both as `skos:Concept` elements
//! and as `rdf:Description` elements, labels appear both as child
//! elements and as XML attributes, and vendor prefixes (for example
//! `mesh:`) may be used without ever being declared. Namespace prefixes
//! are resolved when declarations exist and matched leniently by prefix
//! name when they do not.

use std::borrow::Cow;
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use quick_xml::events::attributes::Attribute;
use quick_xml::events::{BytesStart, Event};
use quick_xml::{Reader, XmlVersion};
use serde::{Deserialize, Serialize};
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use crate::collocation::CompoundTerm;
use crate::error::{read_to_string, Error, Result};
use crate::stemmer::StemmerRuleset;
use crate::weighting::TermCandidate;

const SKOS_NS: &str = "http://www.w3.org/2004/02/skos/core#";
const RDF_NS: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#";
const XML_NS: &str = "http://www.w3.org/XML/1998/namespace";

fn attr_text<'a>(attr: &Attribute<'a>) -> Option<Cow<'a, str>> {
    attr.normalized_value(XmlVersion::Implicit1_0).ok()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Concept {
    /// The rdf:about value.
    pub concept_id: String,
    /// (text, language tag) pairs; attribute-borne labels have no tag.
    pub pref_labels: Vec<(String, Option<String>)>,
    pub alt_labels: Vec<(String, Option<String>)>,
    pub hidden_labels: Vec<(String, Option<String>)>,
    pub scope_note: Option<String>,
}

impl Concept {
    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.pref_labels
            .iter()
            .chain(&self.alt_labels)
            .chain(&self.hidden_labels)
            .map(|(text, _)| text.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchPolicy {
    pub fold_case: bool,
    pub fold_diacritics: bool,
    /// Match on stems instead of surface phrases; needs a ruleset at the
    /// extraction call site.
    pub stem_labels: bool,
    /// Let a compound match a concept when every one of its tokens
    /// appears somewhere in a single label of that concept.
    pub allow_token_subset: bool,
}

impl Default for MatchPolicy {
    fn default() -> Self {
        MatchPolicy {
            fold_case: true,
            fold_diacritics: true,
            stem_labels: false,
            allow_token_subset: false,
        }
    }
}

/// Immutable after parse; lookups only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thesaurus {
    pub concepts: BTreeMap<String, Concept>,
    /// Normalized label to the ids of every concept carrying it, built
    /// under `policy`.
    pub label_index: BTreeMap<String, BTreeSet<String>>,
    /// Concept records skipped for lacking a preferred label or an id.
    pub skipped_concepts: usize,
    pub policy: MatchPolicy,
}

impl Thesaurus {
    pub fn from_concepts<I>(concepts: I, policy: MatchPolicy, skipped: usize) -> Result<Thesaurus>
    where
        I: IntoIterator<Item = Concept>,
    {
        let mut map = BTreeMap::new();
        for concept in concepts {
            let id = concept.concept_id.clone();
            if map.insert(id.clone(), concept).is_some() {
                return Err(Error::Validation(format!("duplicate concept id {id:?}")));
            }
        }
        let label_index = build_label_index(&map, &policy, None);
        Ok(Thesaurus {
            concepts: map,
            label_index,
            skipped_concepts: skipped,
            policy,
        })
    }

    pub fn concept_count(&self) -> usize {
        self.concepts.len()
    }

    pub fn label_count(&self) -> usize {
        self.concepts.values().map(|c| c.labels().count()).sum()
    }
}

fn build_label_index(
    concepts: &BTreeMap<String, Concept>,
    policy: &MatchPolicy,
    stemmer: Option<&StemmerRuleset>,
) -> BTreeMap<String, BTreeSet<String>> {
    let mut index: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for concept in concepts.values() {
        for label in concept.labels() {
            let key = label_key(label, policy, stemmer);
            if key.is_empty() {
                continue;
            }
            index.entry(key).or_default().insert(concept.concept_id.clone());
        }
    }
    index
}

pub fn fold_diacritics(text: &str) -> String {
    text.nfd().filter(|c| !is_combining_mark(*c)).collect()
}

/// Case fold, diacritic fold and whitespace collapse per the policy.
pub fn normalize_label(text: &str, policy: &MatchPolicy) -> String {
    label_key(text, policy, None)
}

fn label_key(text: &str, policy: &MatchPolicy, stemmer: Option<&StemmerRuleset>) -> String {
    let lowered = if policy.fold_case {
        Cow::Owned(text.to_lowercase())
    } else {
        Cow::Borrowed(text)
    };
    let mut tokens: Vec<String> = lowered.split_whitespace().map(String::from).collect();
    if policy.stem_labels {
        if let Some(ruleset) = stemmer {
            // stem before folding: the rules are written with diacritics
            tokens = tokens.iter().map(|t| ruleset.stem(t)).collect();
        }
    }
    if policy.fold_diacritics {
        tokens = tokens.iter().map(|t| fold_diacritics(t)).collect();
    }
    tokens.join(" ")
}

// ---- RDF/XML parsing ----------------------------------------------------

/// Prefix bindings, pushed per element so shadowing works. `None` depth
/// entries come from elements that declared nothing.
struct NsScopes {
    scopes: Vec<Vec<(String, String)>>,
}

impl NsScopes {
    fn new() -> Self {
        NsScopes { scopes: Vec::new() }
    }

    fn push(&mut self, start: &BytesStart) {
        let mut bindings = Vec::new();
        for attr in start.attributes().flatten() {
            let key = String::from_utf8_lossy(attr.key.as_ref()).into_owned();
            if let Some(prefix) = key.strip_prefix("xmlns:") {
                if let Some(value) = attr_text(&attr) {
                    bindings.push((prefix.to_string(), value.into_owned()));
                }
            } else if key == "xmlns" {
                if let Some(value) = attr_text(&attr) {
                    bindings.push((String::new(), value.into_owned()));
                }
            }
        }
        self.scopes.push(bindings);
    }

    fn pop(&mut self) {
        self.scopes.pop();
    }

    fn resolve(&self, prefix: &str) -> Option<&str> {
        if prefix == "xml" {
            return Some(XML_NS);
        }
        self.scopes
            .iter()
            .rev()
            .find_map(|scope| {
                scope
                    .iter()
                    .rev()
                    .find(|(p, _)| p == prefix)
                    .map(|(_, uri)| uri.as_str())
            })
    }

    /// True when the qualified name resolves into `ns`, or, for names
    /// with an undeclared prefix, when the prefix literally matches the
    /// conventional one. This is what lets `mesh:`-prefixed attributes
    /// through without a declaration.
    fn is_in(&self, qname: &[u8], ns: &str, conventional_prefix: &str, local: &str) -> bool {
        let name = String::from_utf8_lossy(qname);
        let (prefix, rest) = match name.split_once(':') {
            Some((p, r)) => (p, r),
            None => ("", name.as_ref()),
        };
        if rest != local {
            return false;
        }
        match self.resolve(prefix) {
            Some(uri) => uri == ns,
            None => prefix == conventional_prefix,
        }
    }

    fn is_skos(&self, qname: &[u8], local: &str) -> bool {
        self.is_in(qname, SKOS_NS, "skos", local)
    }

    fn is_rdf(&self, qname: &[u8], local: &str) -> bool {
        self.is_in(qname, RDF_NS, "rdf", local)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum LabelKind {
    Pref,
    Alt,
    Hidden,
}

struct PartialConcept {
    about: Option<String>,
    is_skos_concept: bool,
    pref: Vec<(String, Option<String>)>,
    alt: Vec<(String, Option<String>)>,
    hidden: Vec<(String, Option<String>)>,
    scope_note: Option<String>,
}

impl PartialConcept {
    fn push_label(&mut self, kind: LabelKind, text: String, lang: Option<String>) {
        let text = text.trim().to_string();
        if text.is_empty() {
            return;
        }
        match kind {
            LabelKind::Pref => self.pref.push((text, lang)),
            LabelKind::Alt => self.alt.push((text, lang)),
            LabelKind::Hidden => self.hidden.push((text, lang)),
        }
    }

    /// `Ok(concept)` when usable; `Err(counts_as_skipped)` otherwise.
    /// A plain rdf:Description without a prefLabel is ordinary RDF
    /// metadata, not a failed concept, so it does not count.
    fn finish(self) -> std::result::Result<Concept, bool> {
        let claims_concepthood = self.is_skos_concept || !self.pref.is_empty();
        match (self.about, self.pref.is_empty()) {
            (Some(about), false) => Ok(Concept {
                concept_id: about,
                pref_labels: self.pref,
                alt_labels: self.alt,
                hidden_labels: self.hidden,
                scope_note: self.scope_note,
            }),
            _ => Err(claims_concepthood),
        }
    }
}

fn scan_concept_attributes(start: &BytesStart, ns: &NsScopes) -> PartialConcept {
    let mut partial = PartialConcept {
        about: None,
        is_skos_concept: ns.is_skos(start.name().as_ref(), "Concept"),
        pref: Vec::new(),
        alt: Vec::new(),
        hidden: Vec::new(),
        scope_note: None,
    };
    for attr in start.attributes().flatten() {
        let key = attr.key.as_ref().to_vec();
        let Some(value) = attr_text(&attr) else { continue };
        let value = value.into_owned();
        if ns.is_rdf(&key, "about") {
            partial.about = Some(value);
        } else if ns.is_skos(&key, "prefLabel") {
            partial.push_label(LabelKind::Pref, value, None);
        } else if ns.is_skos(&key, "altLabel") {
            partial.push_label(LabelKind::Alt, value, None);
        } else if ns.is_skos(&key, "hiddenLabel") {
            partial.push_label(LabelKind::Hidden, value, None);
        } else if ns.is_skos(&key, "scopeNote") {
            partial.scope_note = Some(value.trim().to_string());
        }
        // anything else (mesh:dateCreated, skos:historyNote...) is noise
    }
    partial
}

fn xml_lang(start: &BytesStart) -> Option<String> {
    for attr in start.attributes().flatten() {
        if attr.key.as_ref() == b"xml:lang" {
            if let Some(value) = attr_text(&attr) {
                let v = value.trim().to_string();
                return (!v.is_empty()).then_some(v);
            }
        }
    }
    None
}

pub fn parse_thesaurus(path: &Path) -> Result<Thesaurus> {
    parse_thesaurus_str(&read_to_string(path)?, path)
}

/// Parses RDF/XML from a string; `origin` only labels error messages.
pub fn parse_thesaurus_str(xml: &str, origin: &Path) -> Result<Thesaurus> {
    let mut reader = Reader::from_str(xml);
    let fail = |reader: &Reader<&[u8]>, message: String| Error::ThesaurusParse {
        path: origin.to_path_buf(),
        message: format!("{message} (near byte {})", reader.buffer_position()),
    };

    let mut ns = NsScopes::new();
    let mut concepts: Vec<Concept> = Vec::new();
    let mut skipped = 0usize;

    loop {
        match reader.read_event() {
            Err(e) => return Err(fail(&reader, e.to_string())),
            Ok(Event::Eof) => break,
            Ok(Event::Start(start)) => {
                ns.push(&start);
                let name = start.name().as_ref().to_vec();
                if ns.is_skos(&name, "Concept") || ns.is_rdf(&name, "Description") {
                    let partial = scan_concept_attributes(&start, &ns);
                    let done = read_concept_children(&mut reader, &name, &mut ns, partial)
                        .map_err(|m| fail(&reader, m))?;
                    ns.pop();
                    match done.finish() {
                        Ok(concept) => concepts.push(concept),
                        Err(true) => skipped += 1,
                        Err(false) => {}
                    }
                }
                // other containers (rdf:RDF itself) stay open; keep walking
            }
            Ok(Event::Empty(start)) => {
                ns.push(&start);
                let name = start.name().as_ref().to_vec();
                if ns.is_skos(&name, "Concept") || ns.is_rdf(&name, "Description") {
                    match scan_concept_attributes(&start, &ns).finish() {
                        Ok(concept) => concepts.push(concept),
                        Err(true) => skipped += 1,
                        Err(false) => {}
                    }
                }
                ns.pop();
            }
            Ok(Event::End(_)) => ns.pop(),
            Ok(_) => {}
        }
    }

    Thesaurus::from_concepts(concepts, MatchPolicy::default(), skipped)
}

fn element_text(
    reader: &mut Reader<&[u8]>,
    name: &[u8],
) -> std::result::Result<String, String> {
    let text = reader
        .read_text(quick_xml::name::QName(name))
        .map_err(|e| e.to_string())?;
    let text = text.xml10_content().map_err(|e| e.to_string())?;
    Ok(text.into_owned())
}

/// Consumes events up to and including the concept's end tag. Label
/// children contribute labels; everything else, including any nested
/// concept-shaped element, is skipped wholesale.
fn read_concept_children(
    reader: &mut Reader<&[u8]>,
    concept_name: &[u8],
    ns: &mut NsScopes,
    mut partial: PartialConcept,
) -> std::result::Result<PartialConcept, String> {
    loop {
        match reader.read_event().map_err(|e| e.to_string())? {
            Event::Start(start) => {
                ns.push(&start);
                let name = start.name().as_ref().to_vec();
                let label_kind = if ns.is_skos(&name, "prefLabel") {
                    Some(LabelKind::Pref)
                } else if ns.is_skos(&name, "altLabel") {
                    Some(LabelKind::Alt)
                } else if ns.is_skos(&name, "hiddenLabel") {
                    Some(LabelKind::Hidden)
                } else {
                    None
                };
                let lang = xml_lang(&start);
                if let Some(kind) = label_kind {
                    let text = element_text(reader, &name)?;
                    partial.push_label(kind, text, lang);
                } else if ns.is_skos(&name, "scopeNote") {
                    let text = element_text(reader, &name)?;
                    partial.scope_note = Some(text.trim().to_string());
                } else {
                    // skip the whole subtree: mesh:activeMeSHYear, nested
                    // descriptions, anything unrecognized
                    reader
                        .read_to_end(quick_xml::name::QName(&name))
                        .map_err(|e| e.to_string())?;
                }
                ns.pop();
            }
            Event::Empty(_) => {
                // skos:broader / skos:related and other empty links
            }
            Event::End(end) => {
                if end.name().as_ref() == concept_name {
                    return Ok(partial);
                }
                return Err(format!(
                    "unexpected closing tag {:?}",
                    String::from_utf8_lossy(end.name().as_ref())
                ));
            }
            Event::Eof => return Err("unexpected end of file inside a concept".into()),
            _ => {}
        }
    }
}

// ---- concept verification ------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KeywordKind {
    Compound,
    Simple,
}

/// A term that survived thesaurus verification, ready for indexing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexKeyword {
    /// Display phrase (dominant surface forms).
    pub keyword: String,
    /// The underlying stems; a single element for simple terms.
    pub stems: Vec<String>,
    pub kind: KeywordKind,
    /// Average tf.idf for simple terms, MI for compounds.
    pub score: f64,
    /// Witness concept: the smallest concept_id whose label matched.
    pub concept_id: Option<String>,
}

/// Keeps exactly the candidates whose normalized phrase matches a
/// thesaurus label, compounds first, and drops simple terms that are
/// tokens of a kept compound. Pass the pipeline ruleset when the policy
/// asks for stem matching.
pub fn extract_concepts(
    simple_terms: &[TermCandidate],
    compound_terms: &[CompoundTerm],
    thesaurus: &Thesaurus,
    policy: &MatchPolicy,
    stemmer: Option<&StemmerRuleset>,
) -> Vec<IndexKeyword> {
    let rebuilt;
    let index = if *policy == thesaurus.policy && !policy.stem_labels {
        &thesaurus.label_index
    } else {
        rebuilt = build_label_index(&thesaurus.concepts, policy, stemmer);
        &rebuilt
    };

    let witness = |key: &str, subset_tokens: Option<&[String]>| -> Option<String> {
        if let Some(ids) = index.get(key) {
            return ids.first().cloned();
        }
        let tokens = subset_tokens?;
        if !policy.allow_token_subset {
            return None;
        }
        // a compound may match by having all its tokens inside one label
        let mut best: Option<&String> = None;
        for (label, ids) in index {
            let label_tokens: BTreeSet<&str> = label.split(' ').collect();
            if tokens.iter().all(|t| label_tokens.contains(t.as_str())) {
                let low = ids.first().expect("label sets are never empty");
                if best.is_none_or(|b| low < b) {
                    best = Some(low);
                }
            }
        }
        best.cloned()
    };

    let candidate_key = |stems: &[String], display: &str| -> (String, Vec<String>) {
        if policy.stem_labels {
            let folded: Vec<String> = stems
                .iter()
                .map(|s| if policy.fold_diacritics { fold_diacritics(s) } else { s.clone() })
                .collect();
            (folded.join(" "), folded)
        } else {
            let key = normalize_label(display, policy);
            let tokens = key.split(' ').map(String::from).collect();
            (key, tokens)
        }
    };

    let mut out = Vec::new();
    let mut compound_stems: BTreeSet<&str> = BTreeSet::new();
    for compound in compound_terms {
        let (key, tokens) = candidate_key(&compound.tokens, &compound.display);
        if let Some(id) = witness(&key, Some(&tokens)) {
            compound_stems.extend(compound.tokens.iter().map(String::as_str));
            out.push(IndexKeyword {
                keyword: compound.display.clone(),
                stems: compound.tokens.clone(),
                kind: KeywordKind::Compound,
                score: compound.mi_score,
                concept_id: Some(id),
            });
        }
    }
    for term in simple_terms {
        if !term.selected || compound_stems.contains(term.term.as_str()) {
            continue;
        }
        let (key, _) = candidate_key(
            std::slice::from_ref(&term.term),
            &term.surface_form,
        );
        if let Some(id) = witness(&key, None) {
            out.push(IndexKeyword {
                keyword: term.surface_form.clone(),
                stems: vec![term.term.clone()],
                kind: KeywordKind::Simple,
                score: term.avg_score,
                concept_id: Some(id),
            });
        }
    }
    out
}
