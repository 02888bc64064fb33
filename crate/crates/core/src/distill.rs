//! Trains the event-aware encoder: the classification-side language model
//! whose heads learn to match the soft labels stored in event relation
//! graphs.
//!
//! The student runs the base encoder, a BiLSTM over all positions, a
//! two-layer event head per token, and a two-layer head per relation family
//! over concatenated pair embeddings. Targets come from stored graphs, one
//! distribution per token and per formed pair; the teacher is never run
//! during distillation. Losses are cross-entropies summed over tokens and
//! pairs, then added with unit weights.

use std::collections::{BTreeMap, BTreeSet};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::encoder::{encode, init_encoder, EncoderConfig};
use crate::erg::{init_two_layer_head, two_layer_logits};
use crate::error::{Error, Result};
use crate::graph::EventRelationGraph;
use crate::labels::RelationFamily;
use crate::nn::adam::Adam;
use crate::nn::lstm::{bilstm_forward, init_bilstm};
use crate::nn::params::{load_checkpoint, save_checkpoint, ParamStore};
use crate::nn::tape::{Tape, Var};
use crate::tokenize::Token;

pub const DISTILL_MODEL_KIND: &str = "event-aware-encoder";

/// One supervision signal of the soft-label objective. Ablations drop the
/// matching loss term during distillation and the matching edge types in
/// the downstream graph encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupervisionTerm {
    EventIdentify,
    Coref,
    Temporal,
    Causal,
    Subevent,
}

impl SupervisionTerm {
    pub const ALL: [SupervisionTerm; 5] = [
        SupervisionTerm::EventIdentify,
        SupervisionTerm::Coref,
        SupervisionTerm::Temporal,
        SupervisionTerm::Causal,
        SupervisionTerm::Subevent,
    ];

    pub fn family(self) -> Option<RelationFamily> {
        match self {
            SupervisionTerm::EventIdentify => None,
            SupervisionTerm::Coref => Some(RelationFamily::Coref),
            SupervisionTerm::Temporal => Some(RelationFamily::Temporal),
            SupervisionTerm::Causal => Some(RelationFamily::Causal),
            SupervisionTerm::Subevent => Some(RelationFamily::Subevent),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SupervisionTerm::EventIdentify => "event_identify",
            SupervisionTerm::Coref => "coref",
            SupervisionTerm::Temporal => "temporal",
            SupervisionTerm::Causal => "causal",
            SupervisionTerm::Subevent => "subevent",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistillConfig {
    pub encoder: EncoderConfig,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    /// Cap on graph pairs used per document per epoch; None uses all.
    pub pair_subsample: Option<usize>,
    /// Loss terms to drop, for the ablation study.
    #[serde(default)]
    pub ablate: BTreeSet<SupervisionTerm>,
}

impl Default for DistillConfig {
    fn default() -> DistillConfig {
        DistillConfig {
            encoder: EncoderConfig::Lookup { width: 16, buckets: 4096 },
            epochs: 60,
            lr: 0.02,
            seed: 11,
            pair_subsample: None,
            ablate: BTreeSet::new(),
        }
    }
}

impl DistillConfig {
    /// The BiLSTM splits the encoder width across its two directions, so
    /// token states keep the encoder's width.
    pub fn lstm_hidden(&self) -> usize {
        self.encoder.width() / 2
    }

    pub fn state_width(&self) -> usize {
        self.encoder.width()
    }
}

/// The distilled language model: base encoder, BiLSTM, and the five heads.
/// Heads stay in the checkpoint even though the classifier only consumes
/// the encoder body.
#[derive(Debug, Clone)]
pub struct EventAwareEncoder {
    pub config: DistillConfig,
    pub store: ParamStore,
}

impl EventAwareEncoder {
    pub fn init(config: DistillConfig) -> Result<EventAwareEncoder> {
        config.encoder.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut store = ParamStore::new();
        init_encoder(&mut store, &config.encoder, &mut rng)?;
        init_bilstm(&mut store, "lstm", config.encoder.width(), config.lstm_hidden(), &mut rng)?;
        let width = config.state_width();
        init_two_layer_head(&mut store, "event", width, width, 2, &mut rng)?;
        for family in RelationFamily::ALL {
            init_two_layer_head(
                &mut store,
                &format!("rel.{}", family.name()),
                2 * width,
                width,
                family.arity(),
                &mut rng,
            )?;
        }
        Ok(EventAwareEncoder { config, store })
    }

    pub fn validate(&self) -> Result<()> {
        let width = self.config.state_width();
        let expect = |name: &str, rows: usize, cols: usize| -> Result<()> {
            let got = self.store.get(name)?.dim();
            if got != (rows, cols) {
                return Err(Error::dimension(format!(
                    "{name} has shape {got:?}, config implies ({rows}, {cols})"
                )));
            }
            Ok(())
        };
        expect("enc.table", self.config.encoder.buckets() + 1, self.config.encoder.width())?;
        expect("lstm.fwd.u", self.config.lstm_hidden(), 4 * self.config.lstm_hidden())?;
        expect("event.w1", width, width)?;
        for family in RelationFamily::ALL {
            expect(&format!("rel.{}.w1", family.name()), 2 * width, width)?;
            expect(&format!("rel.{}.w2", family.name()), width, family.arity())?;
        }
        Ok(())
    }

    /// Contextual states for the start marker and every token: rows 0..=N,
    /// each of the encoder width.
    pub fn token_states(&self, t: &mut Tape, tokens: &[Token]) -> Result<Var> {
        token_states_from(t, &self.store, &self.config.encoder, tokens)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let header = serde_json::to_value(&self.config)?;
        save_checkpoint(path, DISTILL_MODEL_KIND, &header, &self.store)
    }

    pub fn load(path: &std::path::Path) -> Result<EventAwareEncoder> {
        let (header, store) = load_checkpoint(path, DISTILL_MODEL_KIND)?;
        let config: DistillConfig = serde_json::from_value(header)
            .map_err(|e| Error::Checkpoint(format!("bad header: {e}")))?;
        let model = EventAwareEncoder { config, store };
        model.validate()?;
        Ok(model)
    }
}

/// Shared forward pass: base encoding, then the BiLSTM over all rows.
/// Callers pass the store so training and frozen inference share one path.
pub fn token_states_from(
    t: &mut Tape,
    store: &ParamStore,
    encoder: &EncoderConfig,
    tokens: &[Token],
) -> Result<Var> {
    let encoded = encode(t, store, encoder, tokens)?;
    let (rows, _) = t.shape(encoded);
    let per_row: Vec<Var> = (0..rows).map(|i| t.rows(encoded, &[i])).collect();
    let states = bilstm_forward(t, store, "lstm", &per_row)?;
    Ok(t.stack_rows(&states))
}

/// Event-head distributions for rows of contextual states.
pub fn event_head_probs(t: &mut Tape, store: &ParamStore, states: Var) -> Result<Var> {
    let logits = two_layer_logits(t, store, "event", states)?;
    Ok(t.softmax(logits))
}

/// Relation-head distributions for rows of concatenated pair embeddings.
pub fn relation_head_probs(
    t: &mut Tape,
    store: &ParamStore,
    family: RelationFamily,
    pair_embeddings: Var,
) -> Result<Var> {
    let expected = 2 * store.get("event.w1")?.nrows();
    let (_, got) = t.shape(pair_embeddings);
    if got != expected {
        return Err(Error::dimension(format!(
            "pair embedding width {got}, relation heads expect {expected}"
        )));
    }
    let logits = two_layer_logits(t, store, &format!("rel.{}", family.name()), pair_embeddings)?;
    Ok(t.softmax(logits))
}

/// Cross entropy −Σ P ln(max(Q, 1e-12)) between two distributions of the
/// same arity.
pub fn soft_cross_entropy(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::dimension(format!(
            "distribution arities differ: {} vs {}",
            p.len(),
            q.len()
        )));
    }
    Ok(p.iter().zip(q).map(|(pi, qi)| -pi * qi.max(1e-12).ln()).sum())
}

/// Unit-weight sum of the five component losses.
pub fn total_distill_loss(components: [f64; 5]) -> f64 {
    components.iter().sum()
}

/// Tape version of the summed cross entropy: targets is (rows x k),
/// `probs` the matching softmaxed head output.
fn soft_ce_sum(t: &mut Tape, targets: Array2<f64>, probs: Var) -> Var {
    debug_assert_eq!(targets.dim(), t.shape(probs));
    let logq = t.log_clamp(probs, 1e-12);
    let p = t.leaf(targets);
    let weighted = t.mul(p, logq);
    let total = t.sum_all(weighted);
    t.scale(total, -1.0)
}

/// The five component losses for one document against its graph's targets,
/// with ablated terms skipped. Returns the scalar loss node.
pub fn document_soft_loss(
    t: &mut Tape,
    store: &ParamStore,
    config: &DistillConfig,
    doc: &Document,
    graph: &EventRelationGraph,
    pair_pick: Option<&[usize]>,
) -> Result<Var> {
    if graph.soft_labels.token_event.len() != doc.tokens.len() {
        return Err(Error::validation(format!(
            "graph for {} has {} token targets but the document has {} tokens",
            doc.doc_id,
            graph.soft_labels.token_event.len(),
            doc.tokens.len()
        )));
    }
    let states = token_states_from(t, store, &config.encoder, &doc.tokens)?;
    let mut components: Vec<Var> = Vec::new();

    if !config.ablate.contains(&SupervisionTerm::EventIdentify) {
        let token_rows: Vec<usize> = (1..=doc.tokens.len()).collect();
        let token_states = t.rows(states, &token_rows);
        let probs = event_head_probs(t, store, token_states)?;
        let mut targets = Array2::zeros((doc.tokens.len(), 2));
        for (i, p) in graph.soft_labels.token_event.iter().enumerate() {
            targets[[i, 0]] = p[0];
            targets[[i, 1]] = p[1];
        }
        components.push(soft_ce_sum(t, targets, probs));
    }

    let pairs: Vec<&crate::graph::PairRelationProbs> = match pair_pick {
        Some(picks) => picks.iter().map(|&i| &graph.soft_labels.pairs[i]).collect(),
        None => graph.soft_labels.pairs.iter().collect(),
    };
    if !pairs.is_empty() {
        let rows_a: Vec<usize> = pairs.iter().map(|p| graph.events[p.a].start + 1).collect();
        let rows_b: Vec<usize> = pairs.iter().map(|p| graph.events[p.b].start + 1).collect();
        let emb_a = t.rows(states, &rows_a);
        let emb_b = t.rows(states, &rows_b);
        let pair_embeddings = t.concat_cols(&[emb_a, emb_b]);
        for family in RelationFamily::ALL {
            let term = SupervisionTerm::ALL
                .into_iter()
                .find(|s| s.family() == Some(family))
                .expect("every family has a term");
            if config.ablate.contains(&term) {
                continue;
            }
            let probs = relation_head_probs(t, store, family, pair_embeddings)?;
            let mut targets = Array2::zeros((pairs.len(), family.arity()));
            for (row, pair) in pairs.iter().enumerate() {
                for (col, v) in pair.family(family).iter().enumerate() {
                    targets[[row, col]] = *v;
                }
            }
            components.push(soft_ce_sum(t, targets, probs));
        }
    }
    if components.is_empty() {
        return Ok(t.leaf(Array2::zeros((1, 1))));
    }
    Ok(t.add_n(&components))
}

#[derive(Debug)]
pub struct DistillOutcome {
    pub model: EventAwareEncoder,
    pub epoch_losses: Vec<f64>,
}

/// Distills the graphs' soft labels into a fresh event-aware encoder.
/// Every document must be tokenized and have a graph under its doc_id.
pub fn train_event_aware_encoder(
    docs: &[Document],
    graphs: &BTreeMap<String, EventRelationGraph>,
    config: &DistillConfig,
) -> Result<DistillOutcome> {
    if docs.is_empty() {
        return Err(Error::validation("cannot distill from an empty document set"));
    }
    for doc in docs {
        if doc.tokens.is_empty() {
            return Err(Error::validation(format!("document {} is not tokenized", doc.doc_id)));
        }
        if !graphs.contains_key(&doc.doc_id) {
            return Err(Error::validation(format!(
                "no stored event relation graph for document {}",
                doc.doc_id
            )));
        }
    }
    let mut model = EventAwareEncoder::init(config.clone())?;
    let mut optimizer = Adam::new(config.lr);
    let mut order: Vec<usize> = (0..docs.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let mut rng =
            ChaCha8Rng::seed_from_u64(config.seed ^ (epoch as u64).wrapping_mul(0x9e3779b97f4a7c15));
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &idx in &order {
            let doc = &docs[idx];
            let graph = &graphs[&doc.doc_id];
            let picks: Option<Vec<usize>> = config.pair_subsample.map(|cap| {
                let n = graph.soft_labels.pairs.len();
                if n <= cap {
                    (0..n).collect()
                } else {
                    let mut sampled = rand::seq::index::sample(&mut rng, n, cap).into_vec();
                    sampled.sort_unstable();
                    sampled
                }
            });
            let mut t = Tape::new();
            let loss =
                document_soft_loss(&mut t, &model.store, config, doc, graph, picks.as_deref())?;
            total += t.scalar_value(loss);
            let grads = t.backward(loss)?;
            optimizer.step(&mut model.store, &grads)?;
        }
        epoch_losses.push(total / docs.len() as f64);
    }
    Ok(DistillOutcome { model, epoch_losses })
}

/// Loss_soft over a document set for a frozen model, without training.
pub fn evaluate_soft_loss(
    model: &EventAwareEncoder,
    docs: &[Document],
    graphs: &BTreeMap<String, EventRelationGraph>,
) -> Result<f64> {
    let mut total = 0.0;
    for doc in docs {
        let graph = graphs
            .get(&doc.doc_id)
            .ok_or_else(|| Error::validation(format!("no graph for {}", doc.doc_id)))?;
        let mut t = Tape::new();
        let loss = document_soft_loss(&mut t, &model.store, &model.config, doc, graph, None)?;
        total += t.scalar_value(loss);
    }
    Ok(total / docs.len() as f64)
}
