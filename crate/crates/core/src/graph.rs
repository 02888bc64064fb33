//! The per-document event relation graph.
//!
//! Nodes are predicted event mentions plus one implicit document node that
//! connects to every event. Soft labels keep the full probability vectors for
//! the event head and all four relation families; hard edges are always the
//! argmax of the stored soft labels, with ties resolving toward none. That
//! redundancy is deliberate: hard edges drive graph attention, soft labels
//! drive distillation, and keeping both consistent is enforced on load.
//!
//! Coreference edges are stored in both directions. Directional families are
//! stored once, in the direction the label gives relative to textual order
//! (`before` from the earlier mention, `caused_by` from the textually first
//! mention that is the effect, and so on).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{argmax_tie_low, CanonicalRelationLabel, EdgeType, RelationFamily};

pub const GRAPH_SCHEMA_VERSION: u32 = 1;

/// Per-token event probabilities, `[p_not_event, p_event]`.
pub type TokenEventProbs = Vec<[f64; 2]>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventNode {
    pub id: usize,
    /// Token index span of the trigger, end exclusive.
    pub start: usize,
    pub end: usize,
    pub trigger: String,
}

/// Soft relation labels for one event pair, `a` textually before `b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRelationProbs {
    pub a: usize,
    pub b: usize,
    pub coref: Vec<f64>,
    pub temporal: Vec<f64>,
    pub causal: Vec<f64>,
    pub subevent: Vec<f64>,
}

impl PairRelationProbs {
    pub fn family(&self, family: RelationFamily) -> &[f64] {
        match family {
            RelationFamily::Coref => &self.coref,
            RelationFamily::Temporal => &self.temporal,
            RelationFamily::Causal => &self.causal,
            RelationFamily::Subevent => &self.subevent,
        }
    }

    /// Argmax class per family, ties toward none.
    pub fn hard_label(&self, family: RelationFamily) -> CanonicalRelationLabel {
        CanonicalRelationLabel::new(family, argmax_tie_low(self.family(family)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HardEdge(pub usize, pub usize, pub EdgeType);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftLabels {
    pub token_event: TokenEventProbs,
    pub pairs: Vec<PairRelationProbs>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRelationGraph {
    pub schema_version: u32,
    pub doc_id: String,
    pub events: Vec<EventNode>,
    pub soft_labels: SoftLabels,
    pub hard_edges: Vec<HardEdge>,
    /// Event ids linked to the document node; always all of them.
    pub doc_edges: Vec<usize>,
}

impl EventRelationGraph {
    /// Builds a graph from soft labels, deriving hard edges and document
    /// links. A document with zero events yields a graph with only the
    /// document node.
    pub fn from_soft_labels(
        doc_id: impl Into<String>,
        events: Vec<EventNode>,
        token_event: TokenEventProbs,
        pairs: Vec<PairRelationProbs>,
    ) -> Result<Self> {
        let hard_edges = derive_hard_edges(&pairs);
        let graph = EventRelationGraph {
            schema_version: GRAPH_SCHEMA_VERSION,
            doc_id: doc_id.into(),
            doc_edges: events.iter().map(|e| e.id).collect(),
            events,
            soft_labels: SoftLabels { token_event, pairs },
            hard_edges,
        };
        graph.validate()?;
        Ok(graph)
    }

    pub fn n_events(&self) -> usize {
        self.events.len()
    }

    /// Checks every structural invariant; load and construction both run it.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != GRAPH_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                found: self.schema_version,
                expected: GRAPH_SCHEMA_VERSION,
            });
        }
        let n = self.events.len();
        for (i, ev) in self.events.iter().enumerate() {
            if ev.id != i {
                return Err(Error::validation(format!(
                    "graph {:?}: event ids must be 0..{n} in order, found {} at {i}",
                    self.doc_id, ev.id
                )));
            }
            if ev.start >= ev.end || ev.end > self.soft_labels.token_event.len() {
                return Err(Error::validation(format!(
                    "graph {:?}: event {} span {}..{} outside token range",
                    self.doc_id, ev.id, ev.start, ev.end
                )));
            }
            if i > 0 && self.events[i - 1].start >= ev.start {
                return Err(Error::validation(format!(
                    "graph {:?}: event spans must be strictly ordered",
                    self.doc_id
                )));
            }
        }
        for probs in &self.soft_labels.token_event {
            check_distribution(&self.doc_id, "token_event", probs)?;
        }
        let mut prev: Option<(usize, usize)> = None;
        for pair in &self.soft_labels.pairs {
            if pair.a >= pair.b || pair.b >= n {
                return Err(Error::validation(format!(
                    "graph {:?}: pair ({}, {}) is not an ordered pair of event ids",
                    self.doc_id, pair.a, pair.b
                )));
            }
            if let Some(p) = prev {
                if p >= (pair.a, pair.b) {
                    return Err(Error::validation(format!(
                        "graph {:?}: pairs must be sorted and unique",
                        self.doc_id
                    )));
                }
            }
            prev = Some((pair.a, pair.b));
            for family in RelationFamily::ALL {
                let probs = pair.family(family);
                if probs.len() != family.arity() {
                    return Err(Error::validation(format!(
                        "graph {:?}: pair ({}, {}) {} vector has length {}, expected {}",
                        self.doc_id,
                        pair.a,
                        pair.b,
                        family.name(),
                        probs.len(),
                        family.arity()
                    )));
                }
                check_distribution(&self.doc_id, family.name(), probs)?;
            }
        }
        let expected_edges = derive_hard_edges(&self.soft_labels.pairs);
        if self.hard_edges != expected_edges {
            return Err(Error::validation(format!(
                "graph {:?}: hard edges disagree with the argmax of stored soft labels",
                self.doc_id
            )));
        }
        let expected_doc: Vec<usize> = (0..n).collect();
        if self.doc_edges != expected_doc {
            return Err(Error::validation(format!(
                "graph {:?}: document node must link to all and only event nodes",
                self.doc_id
            )));
        }
        Ok(())
    }

    /// Coreference clusters as connected components over corefer hard edges.
    /// Singletons included; clusters and members sorted ascending.
    pub fn coref_clusters(&self) -> Vec<Vec<usize>> {
        let edges = self
            .hard_edges
            .iter()
            .filter(|e| e.2 == EdgeType::Coreference)
            .map(|e| (e.0, e.1));
        connected_components(self.events.len(), edges)
    }

    /// Adjacency per (node, edge type), including the inverse view: an edge
    /// (i, j, before) makes j a `before` neighbor of i and i an `after`
    /// neighbor of j. The relation vocabulary encodes direction through the
    /// inverse types, so both endpoints see the relationship in their own
    /// orientation.
    pub fn neighborhoods(&self) -> Vec<BTreeMap<EdgeType, Vec<usize>>> {
        let mut out: Vec<BTreeMap<EdgeType, Vec<usize>>> =
            vec![BTreeMap::new(); self.events.len()];
        for edge in &self.hard_edges {
            out[edge.0].entry(edge.2).or_default().push(edge.1);
            if edge.2 != EdgeType::Coreference {
                // Coreference is already stored in both directions.
                out[edge.1].entry(edge.2.inverse()).or_default().push(edge.0);
            }
        }
        for per_node in &mut out {
            for list in per_node.values_mut() {
                list.sort_unstable();
                list.dedup();
            }
        }
        out
    }

    pub fn serialize_graph(&self) -> Result<String> {
        self.validate()?;
        Ok(serde_json::to_string(self)?)
    }

    pub fn deserialize_graph(data: &str) -> Result<EventRelationGraph> {
        #[derive(Deserialize)]
        struct VersionProbe {
            schema_version: u32,
        }
        let probe: VersionProbe = serde_json::from_str(data)?;
        if probe.schema_version != GRAPH_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                found: probe.schema_version,
                expected: GRAPH_SCHEMA_VERSION,
            });
        }
        let graph: EventRelationGraph = serde_json::from_str(data)?;
        graph.validate()?;
        Ok(graph)
    }
}

/// Connected components of an undirected graph on nodes 0..n, as sorted
/// clusters of sorted members; isolated nodes become singletons.
pub fn connected_components(n: usize, edges: impl Iterator<Item = (usize, usize)>) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut clusters: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        clusters.entry(root).or_default().push(i);
    }
    clusters.into_values().collect()
}

fn check_distribution(doc_id: &str, what: &str, probs: &[f64]) -> Result<()> {
    let sum: f64 = probs.iter().sum();
    if probs.iter().any(|&p| !(0.0..=1.0 + 1e-9).contains(&p)) || (sum - 1.0).abs() > 1e-6 {
        return Err(Error::validation(format!(
            "graph {doc_id:?}: malformed {what} probability vector {probs:?}"
        )));
    }
    Ok(())
}

/// Hard edges implied by soft labels: one typed edge per non-none argmax,
/// with corefer edges mirrored in both directions. Output order is pair
/// order, then family order, with the mirrored corefer edge directly after
/// its origin.
pub fn derive_hard_edges(pairs: &[PairRelationProbs]) -> Vec<HardEdge> {
    let mut edges = Vec::new();
    for pair in pairs {
        for family in RelationFamily::ALL {
            let label = pair.hard_label(family);
            if label.is_none() {
                continue;
            }
            let kind = EdgeType::from_label(label);
            edges.push(HardEdge(pair.a, pair.b, kind));
            if kind == EdgeType::Coreference {
                edges.push(HardEdge(pair.b, pair.a, kind));
            }
        }
    }
    edges
}

/// Corpus-level structural statistics, as percentages of all events.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelationProfile {
    /// Events whose coreference cluster has size one.
    pub singleton_pct: f64,
    /// Events incident to at least one temporal edge, either direction.
    pub temporal_pct: f64,
    /// Events incident to at least one causal edge, either direction.
    pub causal_pct: f64,
    /// Events on the contained side of at least one subevent edge.
    pub subevent_pct: f64,
}

/// Aggregates a relation profile across graphs. Errors when the graphs carry
/// no events at all, since every statistic is a fraction of the event count.
pub fn relation_profile(graphs: &[EventRelationGraph]) -> Result<RelationProfile> {
    let mut total = 0usize;
    let mut singleton = 0usize;
    let mut temporal = 0usize;
    let mut causal = 0usize;
    let mut subevent = 0usize;
    for graph in graphs {
        let n = graph.n_events();
        total += n;
        for cluster in graph.coref_clusters() {
            if cluster.len() == 1 {
                singleton += 1;
            }
        }
        let mut temporal_hit = vec![false; n];
        let mut causal_hit = vec![false; n];
        let mut contained = vec![false; n];
        for edge in &graph.hard_edges {
            match edge.2.family() {
                RelationFamily::Temporal => {
                    temporal_hit[edge.0] = true;
                    temporal_hit[edge.1] = true;
                }
                RelationFamily::Causal => {
                    causal_hit[edge.0] = true;
                    causal_hit[edge.1] = true;
                }
                RelationFamily::Subevent => match edge.2 {
                    EdgeType::Contains => contained[edge.1] = true,
                    EdgeType::ContainedBy => contained[edge.0] = true,
                    _ => unreachable!(),
                },
                RelationFamily::Coref => {}
            }
        }
        temporal += temporal_hit.iter().filter(|&&b| b).count();
        causal += causal_hit.iter().filter(|&&b| b).count();
        subevent += contained.iter().filter(|&&b| b).count();
    }
    if total == 0 {
        return Err(Error::validation("relation profile over zero events"));
    }
    let pct = |k: usize| 100.0 * k as f64 / total as f64;
    Ok(RelationProfile {
        singleton_pct: pct(singleton),
        temporal_pct: pct(temporal),
        causal_pct: pct(causal),
        subevent_pct: pct(subevent),
    })
}
