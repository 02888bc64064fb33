//! Deterministic synthetic corpora for desk-scale end-to-end runs.
//!
//! Documents are assembled from a fixed vocabulary in which relations follow
//! word-pair rules: an ordered event-word pair inside a rule's rectangle
//! always carries that rule's relation, anywhere in the corpus. Annotations
//! are derived from the rules after assembly, so supervision is globally
//! consistent and the pairwise heads, which score a pair additively from the
//! two word embeddings, can fit it exactly. Each rule therefore uses a
//! single rectangle of word sets per relation class.
//!
//! Trigger words are never adjacent, keeping one event per trigger token
//! after run merging.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{
    AnnotatedDocument, ClassLabel, Corpus, Document, EventMention, RelationAnnotation,
};
use crate::labels::EdgeType;
use crate::tokenize::{tokenize, SimpleTokenizer};

/// Non-event filler words.
pub const FILLERS: &[&str] = &[
    "the", "town", "report", "quiet", "square", "morning", "people", "street", "again", "nearby",
];

/// Every trigger word, one bucket each; see the collision guard test.
pub const TRIGGERS: &[&str] = &[
    "attack", "march", "verdict", "cleanup", "storm", "ceremony", "broadcast", "explosion",
    "leak", "evacuation", "panic", "collapse", "tremor", "festival", "parade", "concert",
    "riot", "crackdown",
];

pub const CONSPIRACY_SOURCES: &[&str] =
    &["eagle-wire", "liberty-post", "truth-beacon", "midnight-sun"];
pub const BENIGN_SOURCES: &[&str] =
    &["daily-ledger", "metro-times", "civic-journal", "harbor-news"];

const CAUSES_SRC: &[&str] = &["explosion", "leak"];
const CAUSES_DST: &[&str] = &["evacuation", "panic"];
const CONTAINS_DST: &[&str] = &["parade", "concert"];

/// The relation an ordered trigger-word pair carries, if any. `first` is the
/// textually earlier word. This is the ground truth the whole fixture obeys.
pub fn pair_rule(first: &str, second: &str) -> Option<EdgeType> {
    if first == "attack" && second == "attack" {
        return Some(EdgeType::Coreference);
    }
    if first == "march" && second == "verdict" {
        return Some(EdgeType::Before);
    }
    if first == "cleanup" && second == "storm" {
        return Some(EdgeType::After);
    }
    if first == "ceremony" && second == "broadcast" {
        return Some(EdgeType::Overlap);
    }
    if CAUSES_SRC.contains(&first) && CAUSES_DST.contains(&second) {
        return Some(EdgeType::Causes);
    }
    if first == "collapse" && second == "tremor" {
        return Some(EdgeType::CausedBy);
    }
    if first == "festival" && CONTAINS_DST.contains(&second) {
        return Some(EdgeType::Contains);
    }
    if first == "riot" && second == "crackdown" {
        return Some(EdgeType::ContainedBy);
    }
    None
}

/// Trigger-word pairs planted together in one document, first word before
/// the second. Cross-motif pairs may hit rules too; annotation derivation
/// runs over the final sequence, so they stay consistent.
const MOTIFS: &[(&str, &str)] = &[
    ("attack", "attack"),
    ("march", "verdict"),
    ("cleanup", "storm"),
    ("ceremony", "broadcast"),
    ("explosion", "evacuation"),
    ("leak", "panic"),
    ("explosion", "panic"),
    ("collapse", "tremor"),
    ("festival", "parade"),
    ("festival", "concert"),
    ("riot", "crackdown"),
];

const CAUSAL_MOTIFS: &[(&str, &str)] =
    &[("explosion", "evacuation"), ("leak", "panic"), ("explosion", "panic")];
const BENIGN_MOTIFS: &[(&str, &str)] = &[
    ("march", "verdict"),
    ("ceremony", "broadcast"),
    ("festival", "parade"),
    ("festival", "concert"),
    ("attack", "attack"),
];

fn pick<'a>(words: &[&'a str], rng: &mut ChaCha8Rng) -> &'a str {
    words[rng.random_range(0..words.len())]
}

/// Lays out motif words with 1..=2 fillers between consecutive triggers and
/// a filler at each end.
fn assemble_text(motifs: &[(&str, &str)], rng: &mut ChaCha8Rng) -> String {
    let mut words: Vec<&str> = vec![pick(FILLERS, rng)];
    for &(a, b) in motifs {
        for trigger in [a, b] {
            words.push(trigger);
            for _ in 0..rng.random_range(1..=2usize) {
                words.push(pick(FILLERS, rng));
            }
        }
    }
    words.join(" ")
}

fn temporal_alias(rng: &mut ChaCha8Rng) -> &'static str {
    let aliases = ["SIMULTANEOUS", "OVERLAP", "BEGINS-ON", "ENDS-ON", "CONTAINS"];
    aliases[rng.random_range(0..aliases.len())]
}

fn causal_alias(rng: &mut ChaCha8Rng) -> &'static str {
    let aliases = ["CAUSES", "CAUSE", "PRECONDITION"];
    aliases[rng.random_range(0..aliases.len())]
}

/// Wraps a text into an annotated document: mentions at trigger tokens,
/// clusters over repeated coreference words, relation annotations derived
/// from the pair rules. Raw label aliases and annotation orientation for
/// symmetric relations vary with the rng.
fn annotate(doc_id: String, text: String, rng: &mut ChaCha8Rng) -> AnnotatedDocument {
    let tokens = tokenize(&text, &SimpleTokenizer).expect("fixture text is non-empty");
    let mut mentions = Vec::new();
    let mut surfaces = Vec::new();
    for (i, token) in tokens.iter().enumerate() {
        if TRIGGERS.contains(&token.surface.as_str()) {
            mentions.push(EventMention {
                id: format!("e{}", mentions.len()),
                start: i,
                end: i + 1,
            });
            surfaces.push(token.surface.clone());
        }
    }
    let coref_ids: Vec<String> = mentions
        .iter()
        .zip(&surfaces)
        .filter(|(_, s)| s.as_str() == "attack")
        .map(|(m, _)| m.id.clone())
        .collect();
    // Loaded documents carry the full partition, so singletons are explicit.
    let grouped = if coref_ids.len() >= 2 { coref_ids } else { vec![] };
    let mut clusters = Vec::new();
    if !grouped.is_empty() {
        clusters.push(grouped.clone());
    }
    for m in &mentions {
        if !grouped.contains(&m.id) {
            clusters.push(vec![m.id.clone()]);
        }
    }
    let mut temporal = Vec::new();
    let mut causal = Vec::new();
    let mut subevent = Vec::new();
    for i in 0..mentions.len() {
        for j in i + 1..mentions.len() {
            let Some(kind) = pair_rule(&surfaces[i], &surfaces[j]) else { continue };
            let (earlier, later) = (mentions[i].id.clone(), mentions[j].id.clone());
            let forward = |raw: &str| RelationAnnotation {
                a: earlier.clone(),
                b: later.clone(),
                raw: raw.to_string(),
            };
            let reverse = |raw: &str| RelationAnnotation {
                a: later.clone(),
                b: earlier.clone(),
                raw: raw.to_string(),
            };
            match kind {
                EdgeType::Coreference => {}
                EdgeType::Before => temporal.push(forward("BEFORE")),
                EdgeType::After => temporal.push(reverse("BEFORE")),
                EdgeType::Overlap => {
                    let raw = temporal_alias(rng);
                    temporal.push(if rng.random_bool(0.5) { forward(raw) } else { reverse(raw) });
                }
                EdgeType::Causes => causal.push(forward(causal_alias(rng))),
                EdgeType::CausedBy => causal.push(reverse(causal_alias(rng))),
                EdgeType::Contains => subevent.push(forward("CONTAINS")),
                EdgeType::ContainedBy => subevent.push(reverse("CONTAINS")),
            }
        }
    }
    AnnotatedDocument { doc_id, text, tokens, mentions, clusters, temporal, causal, subevent }
}

/// Annotated fixture corpus for extractor training, deterministic in seed.
/// Documents cycle through all motifs so every relation class appears once
/// `n` reaches a handful.
pub fn synth_annotated(n: usize, seed: u64) -> Vec<AnnotatedDocument> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let mut motifs = vec![MOTIFS[i % MOTIFS.len()]];
            let extra = rng.random_range(1..=2usize);
            for _ in 0..extra {
                motifs.push(MOTIFS[rng.random_range(0..MOTIFS.len())]);
            }
            let text = assemble_text(&motifs, &mut rng);
            annotate(format!("ann-{i:03}"), text, &mut rng)
        })
        .collect()
}

/// Labeled fixture corpus for classifier training: conspiracy articles carry
/// dense causal structure, benign articles none. Half of each class, at
/// least three media sources per class once `n` reaches a handful.
pub fn synth_labeled(n: usize, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xa5a5_5a5a);
    let mut docs = Vec::with_capacity(n);
    for i in 0..n {
        let conspiracy = i % 2 == 0;
        let mut motifs = Vec::new();
        if conspiracy {
            for _ in 0..rng.random_range(2..=3usize) {
                motifs.push(CAUSAL_MOTIFS[rng.random_range(0..CAUSAL_MOTIFS.len())]);
            }
            if rng.random_bool(0.5) {
                motifs.push(BENIGN_MOTIFS[rng.random_range(0..BENIGN_MOTIFS.len())]);
            }
        } else {
            for _ in 0..rng.random_range(2..=3usize) {
                motifs.push(BENIGN_MOTIFS[rng.random_range(0..BENIGN_MOTIFS.len())]);
            }
        }
        let text = assemble_text(&motifs, &mut rng);
        let sources = if conspiracy { CONSPIRACY_SOURCES } else { BENIGN_SOURCES };
        let tokens = tokenize(&text, &SimpleTokenizer).expect("fixture text is non-empty");
        docs.push(Document {
            doc_id: format!("art-{i:03}"),
            media_source: sources[(i / 2) % sources.len()].to_string(),
            text,
            label: Some(if conspiracy { ClassLabel::Conspiracy } else { ClassLabel::Benign }),
            tokens,
        });
    }
    Corpus::from_docs(docs).expect("fixture ids are unique")
}
