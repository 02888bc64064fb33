//! Document corpora and their JSONL loaders.
//!
//! Two corpus shapes exist: labeled articles (doc id, media source, text,
//! optional class label) and annotated documents carrying gold event mentions
//! plus relation annotations. Loaders validate aggressively and report the
//! offending line on parse failures; duplicate doc ids are rejected.
//! Temporal annotations that touch a time expression arrive in a dedicated
//! `timex_temporal` field and are dropped at load, since only event-event
//! relations are modeled.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{known_raw_labels, RelationFamily};
use crate::tokenize::{tokenize, Token, Tokenizer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassLabel {
    Conspiracy,
    Benign,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 2] = [ClassLabel::Conspiracy, ClassLabel::Benign];

    pub fn name(self) -> &'static str {
        match self {
            ClassLabel::Conspiracy => "conspiracy",
            ClassLabel::Benign => "benign",
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub media_source: String,
    pub text: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<ClassLabel>,
    /// Populated by `tokenize_all`; empty until then.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tokens: Vec<Token>,
}

#[derive(Debug, Clone, Default)]
pub struct Corpus {
    docs: Vec<Document>,
    by_id: BTreeMap<String, usize>,
}

impl Corpus {
    pub fn from_docs(docs: Vec<Document>) -> Result<Self> {
        let mut by_id = BTreeMap::new();
        for (i, doc) in docs.iter().enumerate() {
            if by_id.insert(doc.doc_id.clone(), i).is_some() {
                return Err(Error::validation(format!("duplicate doc_id {:?}", doc.doc_id)));
            }
        }
        Ok(Corpus { docs, by_id })
    }

    pub fn docs(&self) -> &[Document] {
        &self.docs
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn get(&self, doc_id: &str) -> Option<&Document> {
        self.by_id.get(doc_id).map(|&i| &self.docs[i])
    }

    /// Tokenizes every document in place.
    pub fn tokenize_all(&mut self, tokenizer: &dyn Tokenizer) -> Result<()> {
        for doc in &mut self.docs {
            doc.tokens = tokenize(&doc.text, tokenizer)
                .map_err(|e| Error::validation(format!("doc {:?}: {e}", doc.doc_id)))?;
        }
        Ok(())
    }

    /// True when every document carries a class label.
    pub fn fully_labeled(&self) -> bool {
        self.docs.iter().all(|d| d.label.is_some())
    }

    /// Distinct media sources per class, sorted. Errors if a source carries
    /// documents of more than one class or an unlabeled document.
    pub fn sources_by_class(&self) -> Result<BTreeMap<ClassLabel, Vec<String>>> {
        let mut class_of: BTreeMap<&str, ClassLabel> = BTreeMap::new();
        for doc in &self.docs {
            let label = doc.label.ok_or_else(|| {
                Error::validation(format!("doc {:?} has no class label", doc.doc_id))
            })?;
            match class_of.insert(&doc.media_source, label) {
                Some(prev) if prev != label => {
                    return Err(Error::validation(format!(
                        "media source {:?} appears under both classes",
                        doc.media_source
                    )));
                }
                _ => {}
            }
        }
        let mut out: BTreeMap<ClassLabel, Vec<String>> = BTreeMap::new();
        for (source, label) in class_of {
            out.entry(label).or_default().push(source.to_string());
        }
        Ok(out)
    }

    pub fn class_counts(&self) -> BTreeMap<ClassLabel, usize> {
        let mut out = BTreeMap::new();
        for doc in &self.docs {
            if let Some(label) = doc.label {
                *out.entry(label).or_insert(0) += 1;
            }
        }
        out
    }
}

/// Reads a labeled article corpus from JSONL. One object per line with fields
/// `doc_id`, `media_source`, `text`, and optional `label`.
pub fn load_labeled_corpus(path: &Path) -> Result<Corpus> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut docs = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let doc: Document = serde_json::from_str(&line)
            .map_err(|e| Error::parse(lineno, e.to_string()))?;
        if doc.doc_id.is_empty() {
            return Err(Error::parse(lineno, "empty doc_id"));
        }
        docs.push(doc);
    }
    Corpus::from_docs(docs)
}

/// Writes a corpus back out in the load format, one JSON object per line.
pub fn save_labeled_corpus(path: &Path, corpus: &Corpus) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for doc in corpus.docs() {
        serde_json::to_writer(&mut out, doc)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// A gold event mention: an annotation id plus a token index span
/// (start inclusive, end exclusive).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventMention {
    pub id: String,
    pub start: usize,
    pub end: usize,
}

/// A raw relation annotation between two mention ids, as found in the data.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationAnnotation {
    pub a: String,
    pub b: String,
    pub raw: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedDocument {
    pub doc_id: String,
    pub text: String,
    pub tokens: Vec<Token>,
    /// Sorted by (start, end, id).
    pub mentions: Vec<EventMention>,
    /// Full partition of mention ids: annotated clusters plus implicit
    /// singletons for mentions no cluster listed.
    pub clusters: Vec<Vec<String>>,
    pub temporal: Vec<RelationAnnotation>,
    pub causal: Vec<RelationAnnotation>,
    pub subevent: Vec<RelationAnnotation>,
}

impl AnnotatedDocument {
    pub fn mention_index(&self) -> BTreeMap<&str, usize> {
        self.mentions.iter().enumerate().map(|(i, m)| (m.id.as_str(), i)).collect()
    }
}

#[derive(Deserialize)]
struct AnnotatedLine {
    doc_id: String,
    text: String,
    #[serde(default)]
    events: Vec<EventMention>,
    #[serde(default)]
    clusters: Vec<Vec<String>>,
    #[serde(default)]
    temporal: Vec<(String, String, String)>,
    #[serde(default)]
    causal: Vec<(String, String, String)>,
    #[serde(default)]
    subevent: Vec<(String, String, String)>,
    /// Temporal annotations involving time expressions; dropped on load.
    #[serde(default)]
    #[allow(dead_code)]
    timex_temporal: Vec<serde_json::Value>,
}

/// Reads an annotated corpus from JSONL, tokenizing each document and
/// validating mention spans, cluster membership, and relation endpoints.
pub fn load_annotated_corpus(
    path: &Path,
    tokenizer: &dyn Tokenizer,
) -> Result<Vec<AnnotatedDocument>> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut docs = Vec::new();
    let mut seen = BTreeSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let raw: AnnotatedLine =
            serde_json::from_str(&line).map_err(|e| Error::parse(lineno, e.to_string()))?;
        if !seen.insert(raw.doc_id.clone()) {
            return Err(Error::validation(format!("duplicate doc_id {:?}", raw.doc_id)));
        }
        let doc = validate_annotated(raw, tokenizer)
            .map_err(|e| match e {
                Error::Validation(msg) => {
                    Error::Validation(format!("line {lineno}: {msg}"))
                }
                other => other,
            })?;
        docs.push(doc);
    }
    Ok(docs)
}

/// Writes annotated documents in the load format: one JSON object per line
/// with `events`, `clusters`, and relation triples `[a, b, raw]`.
pub fn save_annotated_corpus(path: &Path, docs: &[AnnotatedDocument]) -> Result<()> {
    #[derive(Serialize)]
    struct Line<'a> {
        doc_id: &'a str,
        text: &'a str,
        events: &'a [EventMention],
        clusters: &'a [Vec<String>],
        temporal: Vec<(&'a str, &'a str, &'a str)>,
        causal: Vec<(&'a str, &'a str, &'a str)>,
        subevent: Vec<(&'a str, &'a str, &'a str)>,
    }
    fn triples(annotations: &[RelationAnnotation]) -> Vec<(&str, &str, &str)> {
        annotations.iter().map(|r| (r.a.as_str(), r.b.as_str(), r.raw.as_str())).collect()
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for doc in docs {
        let line = Line {
            doc_id: &doc.doc_id,
            text: &doc.text,
            events: &doc.mentions,
            clusters: &doc.clusters,
            temporal: triples(&doc.temporal),
            causal: triples(&doc.causal),
            subevent: triples(&doc.subevent),
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

fn validate_annotated(
    raw: AnnotatedLine,
    tokenizer: &dyn Tokenizer,
) -> Result<AnnotatedDocument> {
    let tokens = tokenize(&raw.text, tokenizer)
        .map_err(|e| Error::validation(format!("doc {:?}: {e}", raw.doc_id)))?;
    let n = tokens.len();
    let mut mentions = raw.events;
    let mut ids = BTreeSet::new();
    for m in &mentions {
        if m.start >= m.end || m.end > n {
            return Err(Error::validation(format!(
                "doc {:?}: mention {:?} span {}..{} outside token range 0..{n}",
                raw.doc_id, m.id, m.start, m.end
            )));
        }
        if !ids.insert(m.id.clone()) {
            return Err(Error::validation(format!(
                "doc {:?}: duplicate mention id {:?}",
                raw.doc_id, m.id
            )));
        }
    }
    mentions.sort_by(|a, b| (a.start, a.end, &a.id).cmp(&(b.start, b.end, &b.id)));

    let mut clustered = BTreeSet::new();
    let mut clusters = Vec::new();
    for cluster in raw.clusters {
        for id in &cluster {
            if !ids.contains(id) {
                return Err(Error::validation(format!(
                    "doc {:?}: cluster references unknown mention {:?}",
                    raw.doc_id, id
                )));
            }
            if !clustered.insert(id.clone()) {
                return Err(Error::validation(format!(
                    "doc {:?}: mention {:?} appears in more than one cluster",
                    raw.doc_id, id
                )));
            }
        }
        if !cluster.is_empty() {
            clusters.push(cluster);
        }
    }
    // Mentions no cluster listed are singletons; the stored clusters always
    // form a full partition.
    for m in &mentions {
        if !clustered.contains(&m.id) {
            clusters.push(vec![m.id.clone()]);
        }
    }

    let check_relations = |family: RelationFamily,
                           entries: Vec<(String, String, String)>|
     -> Result<Vec<RelationAnnotation>> {
        let mut out = Vec::with_capacity(entries.len());
        for (a, b, label) in entries {
            if !ids.contains(&a) || !ids.contains(&b) {
                return Err(Error::validation(format!(
                    "doc {:?}: {} annotation references unknown mention ({a:?}, {b:?})",
                    raw.doc_id,
                    family.name()
                )));
            }
            if a == b {
                return Err(Error::validation(format!(
                    "doc {:?}: {} annotation relates mention {a:?} to itself",
                    raw.doc_id,
                    family.name()
                )));
            }
            if !known_raw_labels(family).contains(&label.as_str()) {
                return Err(Error::validation(format!(
                    "doc {:?}: unknown raw {} label {label:?}",
                    raw.doc_id,
                    family.name()
                )));
            }
            out.push(RelationAnnotation { a, b, raw: label });
        }
        Ok(out)
    };

    Ok(AnnotatedDocument {
        temporal: check_relations(RelationFamily::Temporal, raw.temporal)?,
        causal: check_relations(RelationFamily::Causal, raw.causal)?,
        subevent: check_relations(RelationFamily::Subevent, raw.subevent)?,
        doc_id: raw.doc_id,
        text: raw.text,
        tokens,
        mentions,
        clusters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokenize::SimpleTokenizer;

    fn write_lines(lines: &[&str]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for line in lines {
            writeln!(f, "{line}").unwrap();
        }
        f.flush().unwrap();
        f
    }

    #[test]
    fn loads_labeled_corpus() {
        let f = write_lines(&[
            r#"{"doc_id":"d1","media_source":"s1","text":"The blast shook town.","label":"conspiracy"}"#,
            r#"{"doc_id":"d2","media_source":"s2","text":"Rain fell.","label":"benign"}"#,
            r#"{"doc_id":"d3","media_source":"s2","text":"No label here."}"#,
        ]);
        let corpus = load_labeled_corpus(f.path()).unwrap();
        assert_eq!(corpus.len(), 3);
        assert_eq!(corpus.get("d1").unwrap().label, Some(ClassLabel::Conspiracy));
        assert_eq!(corpus.get("d3").unwrap().label, None);
        assert!(!corpus.fully_labeled());
    }

    #[test]
    fn duplicate_doc_id_is_rejected() {
        let f = write_lines(&[
            r#"{"doc_id":"d1","media_source":"s1","text":"a b."}"#,
            r#"{"doc_id":"d1","media_source":"s2","text":"c d."}"#,
        ]);
        let err = load_labeled_corpus(f.path()).unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
    }

    #[test]
    fn parse_error_reports_line_number() {
        let f = write_lines(&[
            r#"{"doc_id":"d1","media_source":"s1","text":"a."}"#,
            r#"{"doc_id": nonsense}"#,
        ]);
        match load_labeled_corpus(f.path()).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn bad_label_value_reports_line_number() {
        let f = write_lines(&[
            r#"{"doc_id":"d1","media_source":"s1","text":"a.","label":"satire"}"#,
        ]);
        match load_labeled_corpus(f.path()).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn save_and_reload_round_trips() {
        let f = write_lines(&[
            r#"{"doc_id":"d1","media_source":"s1","text":"The blast shook town.","label":"conspiracy"}"#,
            r#"{"doc_id":"d2","media_source":"s2","text":"Rain fell."}"#,
        ]);
        let corpus = load_labeled_corpus(f.path()).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        save_labeled_corpus(out.path(), &corpus).unwrap();
        let reloaded = load_labeled_corpus(out.path()).unwrap();
        assert_eq!(corpus.docs(), reloaded.docs());
    }

    #[test]
    fn mixed_class_source_is_rejected() {
        let f = write_lines(&[
            r#"{"doc_id":"d1","media_source":"s1","text":"a.","label":"conspiracy"}"#,
            r#"{"doc_id":"d2","media_source":"s1","text":"b.","label":"benign"}"#,
        ]);
        let corpus = load_labeled_corpus(f.path()).unwrap();
        assert!(corpus.sources_by_class().is_err());
    }

    fn annotated_line() -> &'static str {
        // Tokens: The(0) protest(1) grew(2) after(3) the(4) verdict(5) .(6)
        concat!(
            r#"{"doc_id":"a1","text":"The protest grew after the verdict.","#,
            r#""events":[{"id":"e1","start":1,"end":2},{"id":"e2","start":5,"end":6}],"#,
            r#""clusters":[],"#,
            r#""temporal":[["e2","e1","BEFORE"]],"#,
            r#""causal":[["e2","e1","CAUSES"]],"#,
            r#""subevent":[],"#,
            r#""timex_temporal":[["e1","t1","BEFORE"]]}"#
        )
    }

    #[test]
    fn loads_annotated_corpus_and_drops_timex_relations() {
        let f = write_lines(&[annotated_line()]);
        let docs = load_annotated_corpus(f.path(), &SimpleTokenizer).unwrap();
        assert_eq!(docs.len(), 1);
        let doc = &docs[0];
        assert_eq!(doc.tokens.len(), 7);
        assert_eq!(doc.mentions.len(), 2);
        // Only the event-event temporal annotation survives; the timex one is
        // gone even though it used a BEFORE label.
        assert_eq!(doc.temporal.len(), 1);
        assert_eq!(doc.temporal[0].raw, "BEFORE");
        assert_eq!(doc.causal.len(), 1);
        // Unlisted mentions come back as singleton clusters.
        assert_eq!(doc.clusters.len(), 2);
        assert!(doc.clusters.iter().all(|c| c.len() == 1));
    }

    #[test]
    fn annotated_span_outside_tokens_is_rejected() {
        let f = write_lines(&[
            r#"{"doc_id":"a1","text":"Two words.","events":[{"id":"e1","start":2,"end":4}]}"#,
        ]);
        let err = load_annotated_corpus(f.path(), &SimpleTokenizer).unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
    }

    #[test]
    fn relation_with_unknown_mention_is_rejected() {
        let f = write_lines(&[
            r#"{"doc_id":"a1","text":"One event here.","events":[{"id":"e1","start":1,"end":2}],"temporal":[["e1","e9","BEFORE"]]}"#,
        ]);
        let err = load_annotated_corpus(f.path(), &SimpleTokenizer).unwrap_err();
        match err {
            Error::Validation(msg) => assert!(msg.contains("unknown mention"), "{msg}"),
            other => panic!("expected validation error, got {other}"),
        }
    }

    #[test]
    fn unknown_raw_label_is_rejected_at_load() {
        let f = write_lines(&[
            r#"{"doc_id":"a1","text":"Two events met today.","events":[{"id":"e1","start":1,"end":2},{"id":"e2","start":2,"end":3}],"temporal":[["e1","e2","DURING"]]}"#,
        ]);
        assert!(load_annotated_corpus(f.path(), &SimpleTokenizer).is_err());
    }

    #[test]
    fn mention_in_two_clusters_is_rejected() {
        let f = write_lines(&[
            r#"{"doc_id":"a1","text":"Two events met today.","events":[{"id":"e1","start":1,"end":2},{"id":"e2","start":2,"end":3}],"clusters":[["e1","e2"],["e2"]]}"#,
        ]);
        assert!(load_annotated_corpus(f.path(), &SimpleTokenizer).is_err());
    }
}
