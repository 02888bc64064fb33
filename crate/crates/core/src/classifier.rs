//! Classifies articles as conspiracy or benign from the document state of a
//! relation-aware graph attention network run over the event relation graph.
//!
//! Event nodes start from trigger token states, the document node from the
//! article start state, and each directed edge carries a relation embedding
//! seeded from its relation word. Every layer first rewrites each edge
//! embedding from its endpoints, attends per relation type around each event
//! node, averages the eight per-type summaries, then refreshes the document
//! node with standard graph attention over the previous event states. A
//! two-layer head with a sigmoid scores the final document state.
//!
//! Model variants share the encoder-plus-BiLSTM backbone and differ in what
//! sits on top: `baseline` scores the article state directly, `features`
//! appends soft-label aggregate statistics, `soft` swaps in the distilled
//! backbone, `hard` adds the graph network, and `full` combines the distilled
//! backbone with the graph network.

use std::collections::{BTreeMap, BTreeSet};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{ClassLabel, Document};
use crate::distill::{token_states_from, EventAwareEncoder, SupervisionTerm};
use crate::encoder::{init_encoder, token_bucket, EncoderConfig};
use crate::erg::{build_graph, ErgModels};
use crate::error::{Error, Result};
use crate::graph::EventRelationGraph;
use crate::labels::EdgeType;
use crate::metrics::{binary_prf, Prf};
use crate::nn::adam::Adam;
use crate::nn::lstm::init_bilstm;
use crate::nn::params::{load_checkpoint, save_checkpoint, ParamStore};
use crate::nn::tape::{Tape, Var};

pub const CLASSIFIER_MODEL_KIND: &str = "conspiracy-classifier";

/// Number of aggregate soft-label statistics the `features` variant appends
/// to the article state: mean token-event distribution plus the mean of each
/// relation family's pair distribution.
pub const SOFT_FEATURE_WIDTH: usize = 14;

const EDGE_TYPE_COUNT: usize = 8;
const LEAKY_SLOPE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Baseline,
    Features,
    Soft,
    Hard,
    Full,
}

impl Variant {
    pub const ALL: [Variant; 5] =
        [Variant::Baseline, Variant::Features, Variant::Soft, Variant::Hard, Variant::Full];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::Features => "features",
            Variant::Soft => "soft",
            Variant::Hard => "hard",
            Variant::Full => "full",
        }
    }

    /// Whether the variant runs the graph attention network.
    pub fn uses_graph_encoder(self) -> bool {
        matches!(self, Variant::Hard | Variant::Full)
    }

    /// Whether the backbone starts from distilled weights.
    pub fn uses_distilled(self) -> bool {
        matches!(self, Variant::Soft | Variant::Full)
    }

    /// Whether classification needs the document's graph at all.
    pub fn needs_graph(self) -> bool {
        self.uses_graph_encoder() || self == Variant::Features
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub variant: Variant,
    pub encoder: EncoderConfig,
    /// Graph attention layer count L.
    pub layers: usize,
    /// Hidden width of the classification head.
    pub hidden_width: usize,
    /// Adds h and d skip connections around each layer.
    pub residuals: bool,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    /// Supervision terms removed for ablation runs. Relation families drop
    /// their edge types from the graph here; the event-identify term only
    /// affects distillation upstream.
    #[serde(default)]
    pub ablate: BTreeSet<SupervisionTerm>,
}

impl Default for ClassifierConfig {
    fn default() -> ClassifierConfig {
        ClassifierConfig {
            variant: Variant::Full,
            encoder: EncoderConfig::Lookup { width: 16, buckets: 4096 },
            layers: 2,
            hidden_width: 16,
            residuals: false,
            epochs: 40,
            lr: 0.01,
            seed: 13,
            ablate: BTreeSet::new(),
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        if self.layers == 0 {
            return Err(Error::validation("graph attention needs at least one layer"));
        }
        if self.hidden_width == 0 {
            return Err(Error::validation("classification head hidden width must be positive"));
        }
        if self.epochs == 0 {
            return Err(Error::validation("training needs at least one epoch"));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::validation("learning rate must be positive and finite"));
        }
        for term in &self.ablate {
            match term {
                SupervisionTerm::EventIdentify => {
                    if !self.variant.uses_distilled() {
                        return Err(Error::validation(format!(
                            "ablating event_identify needs a distilled backbone, \
                             variant {} has none",
                            self.variant.name()
                        )));
                    }
                }
                _ => {
                    if !self.variant.uses_graph_encoder() {
                        return Err(Error::validation(format!(
                            "ablating {} edges needs the graph network, variant {} has none",
                            term.name(),
                            self.variant.name()
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Width of the classification head input.
    pub fn head_input_width(&self) -> usize {
        match self.variant {
            Variant::Features => self.encoder.width() + SOFT_FEATURE_WIDTH,
            _ => self.encoder.width(),
        }
    }

    /// Edge types surviving the ablation list.
    fn active_edge_types(&self) -> BTreeSet<EdgeType> {
        let ablated: BTreeSet<_> =
            self.ablate.iter().filter_map(|term| term.family()).collect();
        EdgeType::ALL.iter().copied().filter(|k| !ablated.contains(&k.family())).collect()
    }
}

#[derive(Debug, Clone)]
pub struct ClassifierModels {
    pub config: ClassifierConfig,
    pub store: ParamStore,
}

impl ClassifierModels {
    /// Fresh parameters. Variants with a distilled backbone copy its encoder
    /// and BiLSTM weights; everything else draws from the config seed.
    pub fn init(
        config: ClassifierConfig,
        distilled: Option<&EventAwareEncoder>,
    ) -> Result<ClassifierModels> {
        config.validate()?;
        match (config.variant.uses_distilled(), distilled) {
            (true, None) => {
                return Err(Error::validation(format!(
                    "variant {} needs a distilled encoder",
                    config.variant.name()
                )));
            }
            (false, Some(_)) => {
                return Err(Error::validation(format!(
                    "variant {} does not take a distilled encoder",
                    config.variant.name()
                )));
            }
            (true, Some(model)) if model.config.encoder != config.encoder => {
                return Err(Error::dimension(
                    "distilled encoder configuration differs from the classifier's",
                ));
            }
            _ => {}
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut store = ParamStore::new();
        if let Some(model) = distilled {
            for (name, value) in model.store.iter() {
                if name.starts_with("enc.") || name.starts_with("lstm.") {
                    store.insert(name, value.clone())?;
                }
            }
        } else {
            init_encoder(&mut store, &config.encoder, &mut rng)?;
            let width = config.encoder.width();
            init_bilstm(&mut store, "lstm", width, width / 2, &mut rng)?;
        }
        if config.variant.uses_graph_encoder() {
            let width = config.encoder.width();
            let table = store.get("enc.table")?;
            let mut relation_table = Array2::zeros((EDGE_TYPE_COUNT, width));
            for (row, kind) in EdgeType::ALL.iter().enumerate() {
                let word = kind.phrase().split_whitespace().next().expect("non-empty phrase");
                let bucket = token_bucket(word, config.encoder.buckets());
                relation_table.row_mut(row).assign(&table.row(bucket));
            }
            store.insert("gat.rel_table", relation_table)?;
            for l in 1..=config.layers {
                store.insert_xavier(&format!("gat.l{l}.wr"), 3 * width, width, &mut rng)?;
                store.insert_xavier(&format!("gat.l{l}.wq"), width, width, &mut rng)?;
                store.insert_xavier(&format!("gat.l{l}.wk"), width, width, &mut rng)?;
                store.insert_xavier(&format!("gat.l{l}.wv"), width, width, &mut rng)?;
                store.insert_xavier(&format!("gat.l{l}.a"), 2 * width, 1, &mut rng)?;
                store.insert_xavier(&format!("gat.l{l}.w"), width, width, &mut rng)?;
            }
        }
        let head_in = config.head_input_width();
        store.insert_xavier("head.w1", head_in, config.hidden_width, &mut rng)?;
        store.insert_zeros("head.b1", 1, config.hidden_width)?;
        store.insert_xavier("head.w2", config.hidden_width, 1, &mut rng)?;
        store.insert_zeros("head.b2", 1, 1)?;
        let models = ClassifierModels { config, store };
        models.validate()?;
        Ok(models)
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let width = self.config.encoder.width();
        let expect = |name: &str, rows: usize, cols: usize| -> Result<()> {
            let got = self.store.get(name)?.dim();
            if got != (rows, cols) {
                return Err(Error::dimension(format!(
                    "{name} has shape {got:?}, config implies ({rows}, {cols})"
                )));
            }
            Ok(())
        };
        expect("enc.table", self.config.encoder.buckets() + 1, width)?;
        expect("lstm.fwd.u", width / 2, 2 * width)?;
        if self.config.variant.uses_graph_encoder() {
            expect("gat.rel_table", EDGE_TYPE_COUNT, width)?;
            for l in 1..=self.config.layers {
                expect(&format!("gat.l{l}.wr"), 3 * width, width)?;
                expect(&format!("gat.l{l}.wq"), width, width)?;
                expect(&format!("gat.l{l}.wk"), width, width)?;
                expect(&format!("gat.l{l}.wv"), width, width)?;
                expect(&format!("gat.l{l}.a"), 2 * width, 1)?;
                expect(&format!("gat.l{l}.w"), width, width)?;
            }
        }
        expect("head.w1", self.config.head_input_width(), self.config.hidden_width)?;
        expect("head.w2", self.config.hidden_width, 1)?;
        Ok(())
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let header = serde_json::to_value(&self.config)?;
        save_checkpoint(path, CLASSIFIER_MODEL_KIND, &header, &self.store)
    }

    pub fn load(path: &std::path::Path) -> Result<ClassifierModels> {
        let (header, store) = load_checkpoint(path, CLASSIFIER_MODEL_KIND)?;
        let config: ClassifierConfig = serde_json::from_value(header)
            .map_err(|e| Error::Checkpoint(format!("bad header: {e}")))?;
        let models = ClassifierModels { config, store };
        models.validate()?;
        Ok(models)
    }
}

/// Aggregate soft-label statistics for the `features` variant: mean
/// token-event distribution, then the mean pair distribution of each family.
/// A graph without pairs contributes zeros for the pair part.
pub fn soft_label_features(graph: &EventRelationGraph) -> [f64; SOFT_FEATURE_WIDTH] {
    let mut out = [0.0; SOFT_FEATURE_WIDTH];
    let n_tokens = graph.soft_labels.token_event.len();
    if n_tokens > 0 {
        for probs in &graph.soft_labels.token_event {
            out[0] += probs[0];
            out[1] += probs[1];
        }
        out[0] /= n_tokens as f64;
        out[1] /= n_tokens as f64;
    }
    let n_pairs = graph.soft_labels.pairs.len();
    if n_pairs > 0 {
        for pair in &graph.soft_labels.pairs {
            for (slot, v) in pair
                .coref
                .iter()
                .chain(&pair.temporal)
                .chain(&pair.causal)
                .chain(&pair.subevent)
                .enumerate()
            {
                out[2 + slot] += v;
            }
        }
        for v in &mut out[2..] {
            *v /= n_pairs as f64;
        }
    }
    out
}

struct DirectedEdge {
    dst: usize,
    state: Var,
}

pub struct GraphForward {
    pub doc_state: Var,
    pub event_states: Vec<Var>,
    /// True when the graph had no events and the document state passed
    /// through untouched.
    pub doc_passthrough: bool,
}

/// Runs the L graph attention layers over one document's graph. Event and
/// document states start from `token_states` rows; edge embeddings start
/// from the relation-word table and persist across layers.
pub fn graph_forward(
    t: &mut Tape,
    store: &ParamStore,
    config: &ClassifierConfig,
    graph: &EventRelationGraph,
    token_states: Var,
) -> Result<GraphForward> {
    let width = config.encoder.width();
    let (state_rows, state_cols) = t.shape(token_states);
    if state_cols != width {
        return Err(Error::dimension(format!(
            "token states have width {state_cols}, config implies {width}"
        )));
    }
    for event in &graph.events {
        if event.start + 1 >= state_rows || event.end + 1 > state_rows {
            return Err(Error::validation(format!(
                "event span {}..{} lies outside the document's {} tokens",
                event.start,
                event.end,
                state_rows - 1
            )));
        }
    }
    let doc0 = t.rows(token_states, &[0]);
    let n = graph.events.len();
    if n == 0 {
        return Ok(GraphForward { doc_state: doc0, event_states: vec![], doc_passthrough: true });
    }
    let mut h: Vec<Var> = graph
        .events
        .iter()
        .map(|event| t.rows(token_states, &[event.start + 1]))
        .collect();
    let mut d = doc0;

    let active = config.active_edge_types();
    let relation_table = if config.variant.uses_graph_encoder() {
        t.param(store, "gat.rel_table")?
    } else {
        return Err(Error::validation(format!(
            "variant {} does not run the graph network",
            config.variant.name()
        )));
    };
    // One relation embedding per directed edge occurrence; `incidence[i]`
    // maps each edge type to the indices into `edges` seen from node i.
    let mut edges: Vec<DirectedEdge> = Vec::new();
    let mut incidence: Vec<BTreeMap<EdgeType, Vec<usize>>> = vec![BTreeMap::new(); n];
    for (i, per_type) in graph.neighborhoods().into_iter().enumerate() {
        for (kind, neighbors) in per_type {
            if !active.contains(&kind) {
                continue;
            }
            for dst in neighbors {
                let state = t.rows(relation_table, &[kind.index()]);
                incidence[i].entry(kind).or_default().push(edges.len());
                edges.push(DirectedEdge { dst, state });
            }
        }
    }

    for l in 1..=config.layers {
        let wr = t.param(store, &format!("gat.l{l}.wr"))?;
        let wq = t.param(store, &format!("gat.l{l}.wq"))?;
        let wk = t.param(store, &format!("gat.l{l}.wk"))?;
        let wv = t.param(store, &format!("gat.l{l}.wv"))?;
        let a = t.param(store, &format!("gat.l{l}.a"))?;
        let w = t.param(store, &format!("gat.l{l}.w"))?;

        // Edge embeddings pick up their current endpoints first.
        let mut updated = Vec::with_capacity(edges.len());
        for (i, per_type) in incidence.iter().enumerate() {
            for (_, edge_ids) in per_type.iter() {
                for &e in edge_ids {
                    let cat = t.concat_cols(&[h[i], edges[e].state, h[edges[e].dst]]);
                    updated.push((e, t.matmul(cat, wr)));
                }
            }
        }
        for (e, state) in updated {
            edges[e].state = state;
        }

        // Per node: attend within each relation type, then average over the
        // fixed eight types; types without edges contribute zero.
        let mut new_h = Vec::with_capacity(n);
        for i in 0..n {
            let query = t.matmul(h[i], wq);
            let mut per_type_outputs = Vec::new();
            for edge_ids in incidence[i].values() {
                let keys: Vec<Var> =
                    edge_ids.iter().map(|&e| t.matmul(edges[e].state, wk)).collect();
                let keys = t.stack_rows(&keys);
                let keys_t = t.transpose(keys);
                let scores = t.matmul(query, keys_t);
                let alpha = t.softmax(scores);
                let values: Vec<Var> =
                    edge_ids.iter().map(|&e| t.matmul(edges[e].state, wv)).collect();
                let values = t.stack_rows(&values);
                per_type_outputs.push(t.matmul(alpha, values));
            }
            let mut hi = if per_type_outputs.is_empty() {
                t.leaf(Array2::zeros((1, width)))
            } else {
                let summed = t.add_n(&per_type_outputs);
                t.scale(summed, 1.0 / EDGE_TYPE_COUNT as f64)
            };
            if config.residuals {
                hi = t.add(hi, h[i]);
            }
            new_h.push(hi);
        }

        // Document refresh reads the pre-update event states.
        let wd = t.matmul(d, w);
        let projected: Vec<Var> = h.iter().map(|&hi| t.matmul(hi, w)).collect();
        let scores: Vec<Var> = projected
            .iter()
            .map(|&wh| {
                let cat = t.concat_cols(&[wd, wh]);
                let score = t.matmul(cat, a);
                t.leaky_relu(score, LEAKY_SLOPE)
            })
            .collect();
        let scores = t.stack_rows(&scores);
        let scores = t.transpose(scores);
        let alpha = t.softmax(scores);
        let projected = t.stack_rows(&projected);
        let mut new_d = t.matmul(alpha, projected);
        if config.residuals {
            new_d = t.add(new_d, d);
        }

        h = new_h;
        d = new_d;
    }
    Ok(GraphForward { doc_state: d, event_states: h, doc_passthrough: false })
}

fn classification_logit(t: &mut Tape, store: &ParamStore, input: Var) -> Result<Var> {
    let w1 = t.param(store, "head.w1")?;
    let b1 = t.param(store, "head.b1")?;
    let w2 = t.param(store, "head.w2")?;
    let b2 = t.param(store, "head.b2")?;
    let hidden = t.linear(input, w1, b1);
    let hidden = t.tanh(hidden);
    Ok(t.linear(hidden, w2, b2))
}

/// Conspiracy probability node for one document under the configured
/// variant. Variants that consume the graph require `graph`.
pub fn document_probability(
    t: &mut Tape,
    store: &ParamStore,
    config: &ClassifierConfig,
    doc: &Document,
    graph: Option<&EventRelationGraph>,
) -> Result<Var> {
    if doc.tokens.is_empty() {
        return Err(Error::validation(format!("document {} is not tokenized", doc.doc_id)));
    }
    let graph = match (config.variant.needs_graph(), graph) {
        (true, None) => {
            return Err(Error::validation(format!(
                "variant {} needs the document's event relation graph",
                config.variant.name()
            )));
        }
        (true, Some(g)) => Some(g),
        (false, _) => None,
    };
    let states = token_states_from(t, store, &config.encoder, &doc.tokens)?;
    let input = match config.variant {
        Variant::Baseline | Variant::Soft => t.rows(states, &[0]),
        Variant::Features => {
            let article = t.rows(states, &[0]);
            let stats = soft_label_features(graph.expect("checked above"));
            let stats =
                t.leaf(Array2::from_shape_vec((1, SOFT_FEATURE_WIDTH), stats.to_vec()).unwrap());
            t.concat_cols(&[article, stats])
        }
        Variant::Hard | Variant::Full => {
            let forward =
                graph_forward(t, store, config, graph.expect("checked above"), states)?;
            forward.doc_state
        }
    };
    let logit = classification_logit(t, store, input)?;
    Ok(t.sigmoid(logit))
}

/// Frozen-model conspiracy probability in [0, 1].
pub fn classify_probability(
    models: &ClassifierModels,
    doc: &Document,
    graph: Option<&EventRelationGraph>,
) -> Result<f64> {
    let mut t = Tape::new();
    let p = document_probability(&mut t, &models.store, &models.config, doc, graph)?;
    Ok(t.scalar_value(p))
}

pub fn probability_to_label(probability: f64) -> ClassLabel {
    if probability >= 0.5 {
        ClassLabel::Conspiracy
    } else {
        ClassLabel::Benign
    }
}

#[derive(Debug)]
pub struct ClassifierTrainOutcome {
    pub models: ClassifierModels,
    pub epoch_losses: Vec<f64>,
    /// Conspiracy F1 on dev after each epoch; empty when dev is empty.
    pub dev_f1: Vec<f64>,
    /// Epoch whose parameters were kept, when dev selection ran.
    pub selected_epoch: Option<usize>,
}

fn gold_label(doc: &Document) -> Result<ClassLabel> {
    doc.label
        .ok_or_else(|| Error::validation(format!("document {} has no class label", doc.doc_id)))
}

fn graph_for<'a>(
    config: &ClassifierConfig,
    graphs: &'a BTreeMap<String, EventRelationGraph>,
    doc: &Document,
) -> Result<Option<&'a EventRelationGraph>> {
    if !config.variant.needs_graph() {
        return Ok(None);
    }
    graphs
        .get(&doc.doc_id)
        .map(Some)
        .ok_or_else(|| Error::validation(format!("no stored graph for document {}", doc.doc_id)))
}

/// Conspiracy F1 of the frozen model over labeled documents.
pub fn classification_f1(
    models: &ClassifierModels,
    docs: &[Document],
    graphs: &BTreeMap<String, EventRelationGraph>,
) -> Result<Prf> {
    let mut pred = Vec::with_capacity(docs.len());
    let mut gold = Vec::with_capacity(docs.len());
    for doc in docs {
        let graph = graph_for(&models.config, graphs, doc)?;
        pred.push(probability_to_label(classify_probability(models, doc, graph)?));
        gold.push(gold_label(doc)?);
    }
    binary_prf(&pred, &gold, &ClassLabel::Conspiracy)
}

/// Trains the classifier with per-document cross-entropy. When dev is
/// non-empty the returned parameters are the epoch checkpoint with the best
/// dev conspiracy F1, earliest epoch winning ties.
pub fn train_classifier(
    train: &[Document],
    dev: &[Document],
    graphs: &BTreeMap<String, EventRelationGraph>,
    distilled: Option<&EventAwareEncoder>,
    config: &ClassifierConfig,
) -> Result<ClassifierTrainOutcome> {
    if train.is_empty() {
        return Err(Error::validation("cannot train the classifier on an empty corpus"));
    }
    for doc in train.iter().chain(dev) {
        gold_label(doc)?;
        if doc.tokens.is_empty() {
            return Err(Error::validation(format!("document {} is not tokenized", doc.doc_id)));
        }
        if config.variant.needs_graph() && !graphs.contains_key(&doc.doc_id) {
            return Err(Error::validation(format!(
                "no stored graph for document {}",
                doc.doc_id
            )));
        }
    }
    let mut models = ClassifierModels::init(config.clone(), distilled)?;
    let mut optimizer = Adam::new(config.lr);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut dev_f1 = Vec::new();
    let mut best: Option<(f64, usize, ParamStore)> = None;
    for epoch in 0..config.epochs {
        let mut rng =
            ChaCha8Rng::seed_from_u64(config.seed ^ (epoch as u64).wrapping_mul(0x9e3779b97f4a7c15));
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &idx in &order {
            let doc = &train[idx];
            let graph = graph_for(config, graphs, doc)?;
            let mut t = Tape::new();
            let p = document_probability(&mut t, &models.store, config, doc, graph)?;
            let positive = gold_label(doc)? == ClassLabel::Conspiracy;
            let loss = if positive {
                let logp = t.log_clamp(p, 1e-12);
                t.scale(logp, -1.0)
            } else {
                let one = t.leaf(Array2::from_elem((1, 1), 1.0));
                let negp = t.scale(p, -1.0);
                let q = t.add(one, negp);
                let logq = t.log_clamp(q, 1e-12);
                t.scale(logq, -1.0)
            };
            total += t.scalar_value(loss);
            let grads = t.backward(loss)?;
            optimizer.step(&mut models.store, &grads)?;
        }
        epoch_losses.push(total / train.len() as f64);
        if !dev.is_empty() {
            let f1 = classification_f1(&models, dev, graphs)?.f1;
            dev_f1.push(f1);
            if best.as_ref().is_none_or(|(b, _, _)| f1 > *b) {
                best = Some((f1, epoch, models.store.clone()));
            }
        }
    }
    let selected_epoch = match best {
        Some((_, epoch, store)) => {
            models.store = store;
            Some(epoch)
        }
        None => None,
    };
    Ok(ClassifierTrainOutcome { models, epoch_losses, dev_f1, selected_epoch })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub doc_id: String,
    pub label: ClassLabel,
    pub probability: f64,
    pub graph: EventRelationGraph,
}

/// End-to-end prediction: extract the document's event relation graph, then
/// classify. The graph is returned so callers can audit the decision.
pub fn predict(
    erg: &ErgModels,
    models: &ClassifierModels,
    doc: &Document,
) -> Result<Prediction> {
    let graph = build_graph(erg, doc)?;
    let probability = classify_probability(models, doc, Some(&graph))?;
    Ok(Prediction {
        doc_id: doc.doc_id.clone(),
        label: probability_to_label(probability),
        probability,
        graph,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distill::DistillConfig;
    use crate::graph::{EventNode, HardEdge, PairRelationProbs, SoftLabels};
    use crate::nn::gradcheck::finite_difference_check;
    use crate::tokenize::{tokenize, SimpleTokenizer};
    use rand::Rng;

    fn tiny_config(variant: Variant) -> ClassifierConfig {
        ClassifierConfig {
            variant,
            encoder: EncoderConfig::Lookup { width: 8, buckets: 256 },
            layers: 2,
            hidden_width: 8,
            residuals: false,
            epochs: 3,
            lr: 0.02,
            seed: 21,
            ablate: BTreeSet::new(),
        }
    }

    fn doc(id: &str, text: &str, label: ClassLabel) -> Document {
        let tokens = tokenize(text, &SimpleTokenizer).unwrap();
        Document {
            doc_id: id.to_string(),
            media_source: "src".to_string(),
            text: text.to_string(),
            label: Some(label),
            tokens,
        }
    }

    /// Soft labels whose argmax produces exactly the requested typed edges.
    fn graph_with_edges(
        doc: &Document,
        event_positions: &[usize],
        edges: &[(usize, usize, EdgeType)],
    ) -> EventRelationGraph {
        let n = doc.tokens.len();
        let mut token_event = vec![[0.9, 0.1]; n];
        let mut events = Vec::new();
        for (i, &pos) in event_positions.iter().enumerate() {
            token_event[pos] = [0.1, 0.9];
            events.push(EventNode {
                id: i,
                start: pos,
                end: pos + 1,
                trigger: doc.tokens[pos].surface.clone(),
            });
        }
        let mut pairs = Vec::new();
        for a in 0..events.len() {
            for b in a + 1..events.len() {
                let mut probs = PairRelationProbs {
                    a,
                    b,
                    coref: vec![0.8, 0.2],
                    temporal: vec![0.7, 0.1, 0.1, 0.1],
                    causal: vec![0.8, 0.1, 0.1],
                    subevent: vec![0.8, 0.1, 0.1],
                };
                for &(ea, eb, kind) in edges {
                    if (ea, eb) != (a, b) {
                        continue;
                    }
                    match kind {
                        EdgeType::Coreference => probs.coref = vec![0.2, 0.8],
                        EdgeType::Before => probs.temporal = vec![0.1, 0.7, 0.1, 0.1],
                        EdgeType::After => probs.temporal = vec![0.1, 0.1, 0.7, 0.1],
                        EdgeType::Overlap => probs.temporal = vec![0.1, 0.1, 0.1, 0.7],
                        EdgeType::Causes => probs.causal = vec![0.1, 0.8, 0.1],
                        EdgeType::CausedBy => probs.causal = vec![0.1, 0.1, 0.8],
                        EdgeType::Contains => probs.subevent = vec![0.1, 0.8, 0.1],
                        EdgeType::ContainedBy => probs.subevent = vec![0.1, 0.1, 0.8],
                    }
                }
                pairs.push(probs);
            }
        }
        EventRelationGraph::from_soft_labels(doc.doc_id.clone(), events, token_event, pairs)
            .unwrap()
    }

    #[test]
    fn config_rejects_variant_flag_conflicts() {
        let mut config = tiny_config(Variant::Baseline);
        config.ablate.insert(SupervisionTerm::Causal);
        assert!(config.validate().is_err());
        let mut config = tiny_config(Variant::Hard);
        config.ablate.insert(SupervisionTerm::EventIdentify);
        assert!(config.validate().is_err());
        let mut config = tiny_config(Variant::Full);
        config.ablate.insert(SupervisionTerm::EventIdentify);
        config.ablate.insert(SupervisionTerm::Causal);
        assert!(config.validate().is_ok());
        let mut config = tiny_config(Variant::Soft);
        config.ablate.insert(SupervisionTerm::EventIdentify);
        assert!(config.validate().is_ok());
        config.layers = 0;
        assert!(config.validate().is_err());
    }

    #[test]
    fn init_enforces_the_distilled_encoder_pairing() {
        assert!(ClassifierModels::init(tiny_config(Variant::Full), None).is_err());
        let distill_cfg = DistillConfig {
            encoder: EncoderConfig::Lookup { width: 8, buckets: 256 },
            ..DistillConfig::default()
        };
        let distilled = EventAwareEncoder::init(distill_cfg).unwrap();
        assert!(ClassifierModels::init(tiny_config(Variant::Baseline), Some(&distilled)).is_err());
        let mismatched = EventAwareEncoder::init(DistillConfig {
            encoder: EncoderConfig::Lookup { width: 4, buckets: 256 },
            ..DistillConfig::default()
        })
        .unwrap();
        assert!(ClassifierModels::init(tiny_config(Variant::Full), Some(&mismatched)).is_err());
        assert!(ClassifierModels::init(tiny_config(Variant::Full), Some(&distilled)).is_ok());
    }

    #[test]
    fn distilled_backbone_weights_carry_over() {
        let distilled = EventAwareEncoder::init(DistillConfig {
            encoder: EncoderConfig::Lookup { width: 8, buckets: 256 },
            ..DistillConfig::default()
        })
        .unwrap();
        let models = ClassifierModels::init(tiny_config(Variant::Full), Some(&distilled)).unwrap();
        assert_eq!(
            models.store.get("enc.table").unwrap(),
            distilled.store.get("enc.table").unwrap()
        );
        assert_eq!(
            models.store.get("lstm.fwd.w").unwrap(),
            distilled.store.get("lstm.fwd.w").unwrap()
        );
        // Distillation heads stay behind.
        assert!(models.store.get("event.w1").is_err());
        assert!(models.store.get("rel.coref.w1").is_err());
    }

    #[test]
    fn relation_table_rows_come_from_the_token_table() {
        let models = ClassifierModels::init(tiny_config(Variant::Hard), None).unwrap();
        let table = models.store.get("enc.table").unwrap();
        let relation_table = models.store.get("gat.rel_table").unwrap();
        assert_eq!(relation_table.nrows(), 8);
        for (row, kind) in EdgeType::ALL.iter().enumerate() {
            let word = kind.phrase().split_whitespace().next().unwrap();
            let bucket = token_bucket(word, 256);
            assert_eq!(relation_table.row(row), table.row(bucket), "{}", kind.name());
        }
    }

    #[test]
    fn features_head_input_is_a_strict_superset_by_width() {
        let baseline = tiny_config(Variant::Baseline);
        let features = tiny_config(Variant::Features);
        assert_eq!(
            features.head_input_width(),
            baseline.head_input_width() + SOFT_FEATURE_WIDTH
        );
        assert!(features.head_input_width() > baseline.head_input_width());
    }

    #[test]
    fn soft_label_features_match_hand_computation() {
        let d = doc("a", "one two three", ClassLabel::Benign);
        let graph = graph_with_edges(&d, &[0, 2], &[(0, 1, EdgeType::Causes)]);
        let feats = soft_label_features(&graph);
        // Token means over [0.1,0.9], [0.9,0.1], [0.1,0.9].
        assert!((feats[0] - (0.1 + 0.9 + 0.1) / 3.0).abs() < 1e-12);
        assert!((feats[1] - (0.9 + 0.1 + 0.9) / 3.0).abs() < 1e-12);
        // One pair: its distributions are the means.
        assert_eq!(&feats[2..4], &[0.8, 0.2]);
        assert_eq!(&feats[4..8], &[0.7, 0.1, 0.1, 0.1]);
        assert_eq!(&feats[8..11], &[0.1, 0.8, 0.1]);
        assert_eq!(&feats[11..14], &[0.8, 0.1, 0.1]);
        let empty = graph_with_edges(&d, &[], &[]);
        let feats = soft_label_features(&empty);
        assert_eq!(&feats[2..], &[0.0; 12]);
    }

    #[test]
    fn zero_head_parameters_give_exactly_half() {
        let mut models = ClassifierModels::init(tiny_config(Variant::Baseline), None).unwrap();
        for name in ["head.w1", "head.b1", "head.w2", "head.b2"] {
            models.store.get_mut(name).unwrap().fill(0.0);
        }
        let d = doc("a", "whatever text appears here", ClassLabel::Benign);
        assert_eq!(classify_probability(&models, &d, None).unwrap(), 0.5);
    }

    #[test]
    fn probabilities_stay_in_the_unit_interval() {
        let models = ClassifierModels::init(tiny_config(Variant::Hard), None).unwrap();
        let d = doc("a", "storm flood quake fire smoke ash", ClassLabel::Benign);
        let graph = graph_with_edges(&d, &[0, 2, 4], &[(0, 1, EdgeType::Causes)]);
        let p = classify_probability(&models, &d, Some(&graph)).unwrap();
        assert!((0.0..=1.0).contains(&p));
    }

    #[test]
    fn zero_event_graphs_pass_the_document_state_through() {
        let models = ClassifierModels::init(tiny_config(Variant::Hard), None).unwrap();
        let d = doc("a", "plain text with no events", ClassLabel::Benign);
        let graph = graph_with_edges(&d, &[], &[]);
        let mut t = Tape::new();
        let states =
            token_states_from(&mut t, &models.store, &models.config.encoder, &d.tokens).unwrap();
        let forward =
            graph_forward(&mut t, &models.store, &models.config, &graph, states).unwrap();
        assert!(forward.doc_passthrough);
        assert!(forward.event_states.is_empty());
        let d0 = t.rows(states, &[0]);
        assert_eq!(t.value(forward.doc_state), t.value(d0));
        // And classification still runs.
        classify_probability(&models, &d, Some(&graph)).unwrap();
    }

    #[test]
    fn isolated_nodes_collapse_to_zero_after_one_layer() {
        let mut config = tiny_config(Variant::Hard);
        config.layers = 1;
        let models = ClassifierModels::init(config, None).unwrap();
        let d = doc("a", "storm flood quake fire", ClassLabel::Benign);
        // Events 0 and 1 are linked; event 2 is isolated.
        let graph = graph_with_edges(&d, &[0, 1, 2], &[(0, 1, EdgeType::Causes)]);
        let mut t = Tape::new();
        let states =
            token_states_from(&mut t, &models.store, &models.config.encoder, &d.tokens).unwrap();
        let forward =
            graph_forward(&mut t, &models.store, &models.config, &graph, states).unwrap();
        let isolated = t.value(forward.event_states[2]);
        assert!(isolated.iter().all(|v| *v == 0.0));
        let linked = t.value(forward.event_states[0]);
        assert!(linked.iter().any(|v| *v != 0.0));
    }

    #[test]
    fn single_event_document_attention_is_the_projected_event() {
        let mut config = tiny_config(Variant::Hard);
        config.layers = 1;
        let models = ClassifierModels::init(config, None).unwrap();
        let d = doc("a", "storm over town", ClassLabel::Benign);
        let graph = graph_with_edges(&d, &[0], &[]);
        let mut t = Tape::new();
        let states =
            token_states_from(&mut t, &models.store, &models.config.encoder, &d.tokens).unwrap();
        let forward =
            graph_forward(&mut t, &models.store, &models.config, &graph, states).unwrap();
        // With one event the attention weight is 1, so d = W h_1 with h_1
        // taken from before the event update.
        let h0 = t.rows(states, &[1]);
        let w = t.param(&models.store, "gat.l1.w").unwrap();
        let expected = t.matmul(h0, w);
        let got = t.value(forward.doc_state);
        for (x, y) in got.iter().zip(t.value(expected).iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn event_span_outside_token_range_is_an_error() {
        let models = ClassifierModels::init(tiny_config(Variant::Hard), None).unwrap();
        // Graph built against a longer text than the document offered.
        let longer = doc("a", "one two three four five six ghost", ClassLabel::Benign);
        let graph = graph_with_edges(&longer, &[6], &[]);
        let d = doc("a", "two tokens", ClassLabel::Benign);
        let err = classify_probability(&models, &d, Some(&graph)).unwrap_err();
        assert!(err.to_string().contains("outside"), "{err}");
    }

    /// Straightforward loop implementation of the layer equations over plain
    /// arrays, independent of the tape.
    fn dense_reference(
        models: &ClassifierModels,
        graph: &EventRelationGraph,
        h0: &[Array2<f64>],
        d0: &Array2<f64>,
    ) -> (Vec<Array2<f64>>, Array2<f64>) {
        let store = &models.store;
        let config = &models.config;
        let relation_table = store.get("gat.rel_table").unwrap();
        let n = graph.events.len();
        // Directed neighbor map built straight from the stored edges: each
        // stored (a, b, kind) is seen from a as kind and from b as the
        // inverse, with coreference already stored both ways.
        let mut directed: Vec<(usize, usize, EdgeType)> = Vec::new();
        for &HardEdge(a, b, kind) in &graph.hard_edges {
            directed.push((a, b, kind));
            if kind != EdgeType::Coreference {
                directed.push((b, a, kind.inverse()));
            }
        }
        let mut r: BTreeMap<(usize, usize, EdgeType), Array2<f64>> = BTreeMap::new();
        for &(src, dst, kind) in &directed {
            r.insert(
                (src, dst, kind),
                relation_table.row(kind.index()).insert_axis(ndarray::Axis(0)).to_owned(),
            );
        }
        let mut h: Vec<Array2<f64>> = h0.to_vec();
        let mut d = d0.clone();
        for l in 1..=config.layers {
            let wr = store.get(&format!("gat.l{l}.wr")).unwrap();
            let wq = store.get(&format!("gat.l{l}.wq")).unwrap();
            let wk = store.get(&format!("gat.l{l}.wk")).unwrap();
            let wv = store.get(&format!("gat.l{l}.wv")).unwrap();
            let a_vec = store.get(&format!("gat.l{l}.a")).unwrap();
            let w = store.get(&format!("gat.l{l}.w")).unwrap();
            let mut new_r = BTreeMap::new();
            for (&(src, dst, kind), state) in &r {
                let mut cat = Array2::zeros((1, 3 * h[src].ncols()));
                cat.slice_mut(ndarray::s![.., ..h[src].ncols()]).assign(&h[src]);
                cat.slice_mut(ndarray::s![.., h[src].ncols()..2 * h[src].ncols()]).assign(state);
                cat.slice_mut(ndarray::s![.., 2 * h[src].ncols()..]).assign(&h[dst]);
                new_r.insert((src, dst, kind), cat.dot(wr));
            }
            let r_next = new_r;
            let mut new_h = Vec::with_capacity(n);
            for i in 0..n {
                let q = h[i].dot(wq);
                let mut total = Array2::zeros(h[i].dim());
                for kind in EdgeType::ALL {
                    let members: Vec<&Array2<f64>> = r_next
                        .iter()
                        .filter(|(&(src, _, k), _)| src == i && k == kind)
                        .map(|(_, state)| state)
                        .collect();
                    if members.is_empty() {
                        continue;
                    }
                    let scores: Vec<f64> =
                        members.iter().map(|m| q.dot(&m.dot(wk).t())[[0, 0]]).collect();
                    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
                    let z: f64 = exps.iter().sum();
                    let alphas: Vec<f64> = exps.iter().map(|e| e / z).collect();
                    assert!((alphas.iter().sum::<f64>() - 1.0).abs() < 1e-6);
                    for (alpha, m) in alphas.iter().zip(&members) {
                        total = total + m.dot(wv) * *alpha;
                    }
                }
                let mut hi = total / 8.0;
                if config.residuals {
                    hi = hi + &h[i];
                }
                new_h.push(hi);
            }
            let wd = d.dot(w);
            let mut scores = Vec::with_capacity(n);
            for hi in &h {
                let wh = hi.dot(w);
                let mut cat = Array2::zeros((1, 2 * wh.ncols()));
                cat.slice_mut(ndarray::s![.., ..wh.ncols()]).assign(&wd);
                cat.slice_mut(ndarray::s![.., wh.ncols()..]).assign(&wh);
                let e = cat.dot(a_vec)[[0, 0]];
                scores.push(if e >= 0.0 { e } else { LEAKY_SLOPE * e });
            }
            let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
            let z: f64 = exps.iter().sum();
            let mut new_d = Array2::zeros(d.dim());
            for (i, e) in exps.iter().enumerate() {
                new_d = new_d + h[i].dot(w) * (*e / z);
            }
            if config.residuals {
                new_d = new_d + &d;
            }
            r = r_next;
            h = new_h;
            d = new_d;
        }
        (h, d)
    }

    #[test]
    fn layer_outputs_match_a_dense_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for case in 0..20 {
            let residuals = case % 2 == 1;
            let mut config = tiny_config(Variant::Hard);
            config.seed = 1000 + case as u64;
            config.residuals = residuals;
            let models = ClassifierModels::init(config, None).unwrap();
            let d = doc(
                "a",
                "storm flood quake fire smoke ash dust wind",
                ClassLabel::Benign,
            );
            let n_events = rng.random_range(2..=5usize);
            let positions: Vec<usize> = (0..n_events).collect();
            let mut edges = Vec::new();
            for a in 0..n_events {
                for b in a + 1..n_events {
                    if rng.random_bool(0.6) {
                        let kind = EdgeType::ALL[rng.random_range(0..8)];
                        // Stored edges keep textual orientation; inward
                        // variants appear via the inverse traversal anyway.
                        let kind = match kind {
                            EdgeType::After => EdgeType::Before,
                            EdgeType::CausedBy => EdgeType::Causes,
                            EdgeType::ContainedBy => EdgeType::Contains,
                            other => other,
                        };
                        edges.push((a, b, kind));
                    }
                }
            }
            let graph = graph_with_edges(&d, &positions, &edges);
            let mut t = Tape::new();
            let states =
                token_states_from(&mut t, &models.store, &models.config.encoder, &d.tokens)
                    .unwrap();
            let forward =
                graph_forward(&mut t, &models.store, &models.config, &graph, states).unwrap();
            let h0: Vec<Array2<f64>> = graph
                .events
                .iter()
                .map(|event| {
                    let row = t.rows(states, &[event.start + 1]);
                    t.value(row).clone()
                })
                .collect();
            let d0row = t.rows(states, &[0]);
            let d0 = t.value(d0row).clone();
            let (dense_h, dense_d) = dense_reference(&models, &graph, &h0, &d0);
            for (i, hv) in forward.event_states.iter().enumerate() {
                for (x, y) in t.value(*hv).iter().zip(dense_h[i].iter()) {
                    assert!((x - y).abs() < 1e-6, "event {i}: {x} vs {y}");
                }
            }
            for (x, y) in t.value(forward.doc_state).iter().zip(dense_d.iter()) {
                assert!((x - y).abs() < 1e-6, "doc: {x} vs {y}");
            }
        }
    }

    #[test]
    fn classification_is_invariant_to_event_relabeling() {
        let models = ClassifierModels::init(tiny_config(Variant::Hard), None).unwrap();
        let d = doc("a", "storm flood quake fire smoke", ClassLabel::Benign);
        let graph = graph_with_edges(
            &d,
            &[0, 1, 2, 3],
            &[(0, 1, EdgeType::Causes), (1, 2, EdgeType::Before), (0, 3, EdgeType::Coreference)],
        );
        let p = classify_probability(&models, &d, Some(&graph)).unwrap();
        // Relabel nodes with the permutation [2, 0, 3, 1]: position in the
        // events list changes while every index reference is remapped. The
        // result is the same abstract graph, so the probability must agree.
        let perm = [2usize, 0, 3, 1];
        let mut events: Vec<EventNode> = vec![graph.events[0].clone(); 4];
        for (old, &new) in perm.iter().enumerate() {
            events[new] = EventNode { id: new, ..graph.events[old].clone() };
        }
        let pairs: Vec<PairRelationProbs> = graph
            .soft_labels
            .pairs
            .iter()
            .map(|pair| PairRelationProbs { a: perm[pair.a], b: perm[pair.b], ..pair.clone() })
            .collect();
        let hard_edges: Vec<HardEdge> = graph
            .hard_edges
            .iter()
            .map(|&HardEdge(a, b, kind)| HardEdge(perm[a], perm[b], kind))
            .collect();
        let permuted = EventRelationGraph {
            schema_version: graph.schema_version,
            doc_id: graph.doc_id.clone(),
            events,
            soft_labels: SoftLabels {
                token_event: graph.soft_labels.token_event.clone(),
                pairs,
            },
            hard_edges,
            doc_edges: graph.doc_edges.clone(),
        };
        let p2 = classify_probability(&models, &d, Some(&permuted)).unwrap();
        assert!((p - p2).abs() < 1e-9, "{p} vs {p2}");
    }

    #[test]
    fn ablated_families_vanish_from_the_graph_network() {
        let mut config = tiny_config(Variant::Full);
        config.ablate.insert(SupervisionTerm::Causal);
        let distilled = EventAwareEncoder::init(DistillConfig {
            encoder: EncoderConfig::Lookup { width: 8, buckets: 256 },
            ..DistillConfig::default()
        })
        .unwrap();
        let models = ClassifierModels::init(config, Some(&distilled)).unwrap();
        let d = doc("a", "storm flood quake", ClassLabel::Benign);
        let with_causal = graph_with_edges(&d, &[0, 1], &[(0, 1, EdgeType::Causes)]);
        let without = graph_with_edges(&d, &[0, 1], &[]);
        let pa = classify_probability(&models, &d, Some(&with_causal)).unwrap();
        let pb = classify_probability(&models, &d, Some(&without)).unwrap();
        assert_eq!(pa, pb, "causal edges should be invisible when ablated");
        // Sanity: without the ablation the same two graphs differ.
        let plain = ClassifierModels::init(tiny_config(Variant::Hard), None).unwrap();
        let pa = classify_probability(&plain, &d, Some(&with_causal)).unwrap();
        let pb = classify_probability(&plain, &d, Some(&without)).unwrap();
        assert_ne!(pa, pb);
    }

    #[test]
    fn gradients_match_finite_differences_through_the_graph_layers() {
        let mut config = tiny_config(Variant::Hard);
        config.encoder = EncoderConfig::Lookup { width: 4, buckets: 64 };
        config.hidden_width = 4;
        let models = ClassifierModels::init(config.clone(), None).unwrap();
        let d = doc("a", "storm flood quake fire", ClassLabel::Conspiracy);
        let graph = graph_with_edges(
            &d,
            &[0, 1, 2],
            &[(0, 1, EdgeType::Causes), (1, 2, EdgeType::Before)],
        );
        let mut store = models.store.clone();
        let build = |s: &ParamStore| {
            let mut t = Tape::new();
            let p = document_probability(&mut t, s, &config, &d, Some(&graph)).unwrap();
            let logp = t.log_clamp(p, 1e-12);
            let loss = t.scale(logp, -1.0);
            (t, loss)
        };
        let (tape, loss) = build(&store);
        let grads = tape.backward(loss).unwrap();
        let mut forward = |s: &ParamStore| {
            let (t, l) = build(s);
            Ok(t.scalar_value(l))
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let report =
            finite_difference_check(&mut store, &grads, &mut forward, 1e-5, 4, &mut rng).unwrap();
        assert!(report.max_rel_err < 1e-4, "rel err {}", report.max_rel_err);
    }

    #[test]
    fn graph_structure_alone_separates_classes() {
        // Same text everywhere: only the edge structure distinguishes the
        // classes, so separation must come from the graph network.
        let text = "the event report mentions several incidents in the town";
        let mut docs = Vec::new();
        let mut graphs = BTreeMap::new();
        for i in 0..10 {
            let label = if i % 2 == 0 { ClassLabel::Conspiracy } else { ClassLabel::Benign };
            let d = doc(&format!("d{i}"), text, label);
            let edges: &[(usize, usize, EdgeType)] = if label == ClassLabel::Conspiracy {
                &[(0, 1, EdgeType::Causes), (1, 2, EdgeType::Causes)]
            } else {
                &[]
            };
            graphs.insert(d.doc_id.clone(), graph_with_edges(&d, &[1, 3, 5], edges));
            docs.push(d);
        }
        let mut config = tiny_config(Variant::Hard);
        config.epochs = 40;
        config.lr = 0.03;
        let outcome = train_classifier(&docs, &[], &graphs, None, &config).unwrap();
        let f1 = classification_f1(&outcome.models, &docs, &graphs).unwrap();
        assert!(f1.f1 >= 95.0, "train F1 {}", f1.f1);
    }

    #[test]
    fn lexical_signal_alone_separates_classes_for_the_baseline() {
        let mut docs = Vec::new();
        for i in 0..10 {
            let (label, text) = if i % 2 == 0 {
                (ClassLabel::Conspiracy, "they hide the truth from everyone here")
            } else {
                (ClassLabel::Benign, "the council published the budget report today")
            };
            docs.push(doc(&format!("d{i}"), text, label));
        }
        let mut config = tiny_config(Variant::Baseline);
        config.epochs = 40;
        config.lr = 0.03;
        let graphs = BTreeMap::new();
        let outcome = train_classifier(&docs, &[], &graphs, None, &config).unwrap();
        let f1 = classification_f1(&outcome.models, &docs, &graphs).unwrap();
        assert!(f1.f1 >= 95.0, "train F1 {}", f1.f1);
    }

    #[test]
    fn dev_selection_tracks_the_best_epoch() {
        let text = "the report mentions incidents in town";
        let mut docs = Vec::new();
        let mut graphs = BTreeMap::new();
        for i in 0..6 {
            let label = if i % 2 == 0 { ClassLabel::Conspiracy } else { ClassLabel::Benign };
            let d = doc(&format!("d{i}"), text, label);
            let edges: &[(usize, usize, EdgeType)] =
                if label == ClassLabel::Conspiracy { &[(0, 1, EdgeType::Causes)] } else { &[] };
            graphs.insert(d.doc_id.clone(), graph_with_edges(&d, &[1, 3], edges));
            docs.push(d);
        }
        let (train, dev) = docs.split_at(4);
        let mut config = tiny_config(Variant::Hard);
        config.epochs = 8;
        let outcome = train_classifier(train, dev, &graphs, None, &config).unwrap();
        assert_eq!(outcome.dev_f1.len(), config.epochs);
        let selected = outcome.selected_epoch.unwrap();
        let best = outcome.dev_f1.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(outcome.dev_f1[selected], best);
        // Earliest epoch wins ties.
        assert!(outcome.dev_f1[..selected].iter().all(|f| *f < best));
    }

    #[test]
    fn training_is_seeded_and_reproducible() {
        let d1 = doc("a", "they hide the truth", ClassLabel::Conspiracy);
        let d2 = doc("b", "the council met today", ClassLabel::Benign);
        let docs = vec![d1, d2];
        let graphs = BTreeMap::new();
        let config = tiny_config(Variant::Baseline);
        let a = train_classifier(&docs, &[], &graphs, None, &config).unwrap();
        let b = train_classifier(&docs, &[], &graphs, None, &config).unwrap();
        assert_eq!(a.epoch_losses, b.epoch_losses);
        for (name, value) in a.models.store.iter() {
            assert_eq!(b.models.store.get(name).unwrap(), value, "{name} diverged");
        }
    }

    #[test]
    fn missing_graphs_fail_only_when_the_variant_needs_them() {
        let d = doc("a", "some text here", ClassLabel::Benign);
        let empty = BTreeMap::new();
        let baseline = ClassifierModels::init(tiny_config(Variant::Baseline), None).unwrap();
        classify_probability(&baseline, &d, None).unwrap();
        let hard = ClassifierModels::init(tiny_config(Variant::Hard), None).unwrap();
        assert!(classify_probability(&hard, &d, None).is_err());
        let err =
            train_classifier(&[d.clone()], &[], &empty, None, &tiny_config(Variant::Hard))
                .unwrap_err();
        assert!(err.to_string().contains("no stored graph"));
    }

    #[test]
    fn unlabeled_documents_are_rejected_for_training() {
        let mut d = doc("a", "some text", ClassLabel::Benign);
        d.label = None;
        let err = train_classifier(
            &[d],
            &[],
            &BTreeMap::new(),
            None,
            &tiny_config(Variant::Baseline),
        )
        .unwrap_err();
        assert!(err.to_string().contains("no class label"));
    }

    #[test]
    fn checkpoint_round_trips_and_rejects_other_kinds() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("classifier.ckpt.json");
        let models = ClassifierModels::init(tiny_config(Variant::Hard), None).unwrap();
        models.save(&path).unwrap();
        let loaded = ClassifierModels::load(&path).unwrap();
        assert_eq!(loaded.config, models.config);
        for (name, value) in models.store.iter() {
            assert_eq!(loaded.store.get(name).unwrap(), value, "{name} drifted");
        }
        assert!(EventAwareEncoder::load(&path).is_err());
    }

    #[test]
    fn end_to_end_prediction_is_deterministic_and_audited() {
        use crate::erg::{train_erg, ErgConfig};
        let annotated = crate::corpus::AnnotatedDocument {
            doc_id: "t".into(),
            text: "the blast caused panic".into(),
            tokens: tokenize("the blast caused panic", &SimpleTokenizer).unwrap(),
            mentions: vec![
                crate::corpus::EventMention { id: "e1".into(), start: 1, end: 2 },
                crate::corpus::EventMention { id: "e2".into(), start: 3, end: 4 },
            ],
            clusters: vec![],
            temporal: vec![],
            causal: vec![crate::corpus::RelationAnnotation {
                a: "e1".into(),
                b: "e2".into(),
                raw: "CAUSES".into(),
            }],
            subevent: vec![],
        };
        let erg_config = ErgConfig {
            encoder: EncoderConfig::Lookup { width: 8, buckets: 256 },
            epochs: 5,
            ..ErgConfig::default()
        };
        let erg = train_erg(&[annotated], &[], &erg_config).unwrap().models;
        let models = ClassifierModels::init(tiny_config(Variant::Hard), None).unwrap();
        let d = doc("t", "the blast caused panic", ClassLabel::Conspiracy);
        let first = predict(&erg, &models, &d).unwrap();
        let second = predict(&erg, &models, &d).unwrap();
        assert_eq!(first, second);
        assert_eq!(first.label, probability_to_label(first.probability));
        assert_eq!(first.graph.doc_id, "t");
    }
}
