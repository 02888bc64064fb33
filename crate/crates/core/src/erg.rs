//! Joint training of the event identifier and the four pairwise relation
//! classifiers, plus graph construction from their predictions.
//!
//! One shared context encoder feeds five heads: a two-layer event head over
//! token embeddings and a two-layer head per relation family over
//! concatenated event-pair embeddings. Training sums the five cross-entropy
//! losses with unit weights. At inference the soft distributions and their
//! argmax hard labels become a per-document event relation graph.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{AnnotatedDocument, Document};
use crate::encoder::{encode, init_encoder, EncoderConfig};
use crate::error::{Error, Result};
use crate::graph::{EventNode, EventRelationGraph, PairRelationProbs, TokenEventProbs};
use crate::labels::{map_annotation_label, RelationFamily};
use crate::metrics::{coref_score, macro_prf, CorefScores, Prf};
use crate::nn::adam::Adam;
use crate::nn::params::{load_checkpoint, save_checkpoint, ParamStore};
use crate::nn::tape::{Tape, Var};
use crate::tokenize::Token;

pub const ERG_MODEL_KIND: &str = "event-relation-extractor";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgConfig {
    pub encoder: EncoderConfig,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    /// Maximum mention-index gap between paired events; None pairs all.
    pub max_pair_distance: Option<usize>,
}

impl Default for ErgConfig {
    fn default() -> ErgConfig {
        ErgConfig {
            encoder: EncoderConfig::Lookup { width: 16, buckets: 4096 },
            epochs: 60,
            lr: 0.05,
            seed: 7,
            max_pair_distance: None,
        }
    }
}

/// The trained extractors: shared encoder plus five heads.
pub struct ErgModels {
    pub config: ErgConfig,
    pub store: ParamStore,
}

fn family_prefix(family: RelationFamily) -> &'static str {
    match family {
        RelationFamily::Coref => "rel.coref",
        RelationFamily::Temporal => "rel.temporal",
        RelationFamily::Causal => "rel.causal",
        RelationFamily::Subevent => "rel.subevent",
    }
}

/// Registers a two-layer head `prefix`: in_dim -> hidden -> out_dim.
pub(crate) fn init_two_layer_head(
    store: &mut ParamStore,
    prefix: &str,
    in_dim: usize,
    hidden: usize,
    out_dim: usize,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    store.insert_xavier(&format!("{prefix}.w1"), in_dim, hidden, rng)?;
    store.insert_zeros(&format!("{prefix}.b1"), 1, hidden)?;
    store.insert_xavier(&format!("{prefix}.w2"), hidden, out_dim, rng)?;
    store.insert_zeros(&format!("{prefix}.b2"), 1, out_dim)?;
    Ok(())
}

/// Two affine layers with no intermediate activation, matching the heads'
/// written form softmax(W2(W1 x + b1) + b2); softmax is applied by callers.
pub(crate) fn two_layer_logits(
    t: &mut Tape,
    store: &ParamStore,
    prefix: &str,
    x: Var,
) -> Result<Var> {
    let w1 = t.param(store, &format!("{prefix}.w1"))?;
    let b1 = t.param(store, &format!("{prefix}.b1"))?;
    let w2 = t.param(store, &format!("{prefix}.w2"))?;
    let b2 = t.param(store, &format!("{prefix}.b2"))?;
    let hidden = t.linear(x, w1, b1);
    Ok(t.linear(hidden, w2, b2))
}

impl ErgModels {
    pub fn init(config: ErgConfig) -> Result<ErgModels> {
        config.encoder.validate()?;
        let width = config.encoder.width();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut store = ParamStore::new();
        init_encoder(&mut store, &config.encoder, &mut rng)?;
        init_two_layer_head(&mut store, "event", width, width, 2, &mut rng)?;
        for family in RelationFamily::ALL {
            init_two_layer_head(
                &mut store,
                family_prefix(family),
                2 * width,
                width,
                family.arity(),
                &mut rng,
            )?;
        }
        Ok(ErgModels { config, store })
    }

    /// Checks that the store holds every expected tensor with the shape the
    /// config implies.
    pub fn validate(&self) -> Result<()> {
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
        expect("event.w1", width, width)?;
        expect("event.w2", width, 2)?;
        for family in RelationFamily::ALL {
            let prefix = family_prefix(family);
            expect(&format!("{prefix}.w1"), 2 * width, width)?;
            expect(&format!("{prefix}.w2"), width, family.arity())?;
        }
        Ok(())
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let header = serde_json::to_value(&self.config)?;
        save_checkpoint(path, ERG_MODEL_KIND, &header, &self.store)
    }

    pub fn load(path: &std::path::Path) -> Result<ErgModels> {
        let (header, store) = load_checkpoint(path, ERG_MODEL_KIND)?;
        let config: ErgConfig = serde_json::from_value(header)
            .map_err(|e| Error::Checkpoint(format!("bad header: {e}")))?;
        let models = ErgModels { config, store };
        models.validate()?;
        Ok(models)
    }
}

/// All ordered pairs (i, j) with i < j and, when capped, j - i within the
/// allowed mention-index distance.
pub fn form_event_pairs(n_events: usize, max_distance: Option<usize>) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for i in 0..n_events {
        for j in i + 1..n_events {
            if max_distance.is_none_or(|cap| j - i <= cap) {
                pairs.push((i, j));
            }
        }
    }
    pairs
}

/// Gold supervision for one annotated document, restricted to the pairs
/// `form_event_pairs` yields under the same distance cap.
#[derive(Debug, PartialEq, Eq)]
pub struct GoldLabels {
    /// 0 = non-event, 1 = event, per token.
    pub token_event: Vec<usize>,
    /// Class index per family for each formed pair, keyed by mention
    /// indices; pairs without annotations carry the none class everywhere.
    pub pair_labels: BTreeMap<(usize, usize), [usize; 4]>,
}

pub fn gold_labels(doc: &AnnotatedDocument, max_distance: Option<usize>) -> Result<GoldLabels> {
    let sorted = doc.mentions.windows(2).all(|w| {
        (w[0].start, w[0].end, w[0].id.as_str()) <= (w[1].start, w[1].end, w[1].id.as_str())
    });
    if !sorted {
        return Err(Error::validation(format!(
            "mentions of {} are not in textual order",
            doc.doc_id
        )));
    }
    let mut token_event = vec![0usize; doc.tokens.len()];
    for mention in &doc.mentions {
        for slot in &mut token_event[mention.start..mention.end] {
            *slot = 1;
        }
    }

    let index = doc.mention_index();
    let mut pair_labels: BTreeMap<(usize, usize), [usize; 4]> =
        form_event_pairs(doc.mentions.len(), max_distance)
            .into_iter()
            .map(|p| (p, [0usize; 4]))
            .collect();

    let mut cluster_of = BTreeMap::new();
    for (ci, cluster) in doc.clusters.iter().enumerate() {
        for id in cluster {
            cluster_of.insert(id.as_str(), ci);
        }
    }
    for (&(a, b), classes) in pair_labels.iter_mut() {
        // Mentions absent from every cluster are singletons.
        let ca = cluster_of.get(doc.mentions[a].id.as_str());
        let cb = cluster_of.get(doc.mentions[b].id.as_str());
        if let (Some(ca), Some(cb)) = (ca, cb) {
            if ca == cb {
                classes[family_slot(RelationFamily::Coref)] = 1;
            }
        }
    }

    for (family, annotations) in [
        (RelationFamily::Temporal, &doc.temporal),
        (RelationFamily::Causal, &doc.causal),
        (RelationFamily::Subevent, &doc.subevent),
    ] {
        for ann in annotations {
            let ia = index[ann.a.as_str()];
            let ib = index[ann.b.as_str()];
            let aligned = ia < ib;
            let key = (ia.min(ib), ia.max(ib));
            let label = map_annotation_label(family, &ann.raw, aligned)?;
            let Some(classes) = pair_labels.get_mut(&key) else {
                // Pair excluded by the distance cap; supervision for it is
                // dropped alongside the pair itself.
                continue;
            };
            let slot = family_slot(family);
            if classes[slot] != 0 && classes[slot] != label.class {
                return Err(Error::validation(format!(
                    "conflicting {} annotations for pair ({}, {}) in {}",
                    family.name(),
                    ann.a,
                    ann.b,
                    doc.doc_id
                )));
            }
            classes[slot] = label.class;
        }
    }
    Ok(GoldLabels { token_event, pair_labels })
}

fn family_slot(family: RelationFamily) -> usize {
    match family {
        RelationFamily::Coref => 0,
        RelationFamily::Temporal => 1,
        RelationFamily::Causal => 2,
        RelationFamily::Subevent => 3,
    }
}

/// Gold mentions as graph-style event nodes, for scoring and pair
/// prediction over known mention spans.
pub fn mentions_to_event_nodes(doc: &AnnotatedDocument) -> Vec<EventNode> {
    doc.mentions
        .iter()
        .enumerate()
        .map(|(i, m)| EventNode {
            id: i,
            start: m.start,
            end: m.end,
            trigger: doc.text[doc.tokens[m.start].start..doc.tokens[m.end - 1].end].to_string(),
        })
        .collect()
}

/// Cross-entropy of gold classes against softmaxed logits, averaged over
/// rows. `gold` holds one class index per row of `logits`.
fn mean_class_cross_entropy(t: &mut Tape, logits: Var, gold: &[usize]) -> Var {
    let (rows, cols) = t.shape(logits);
    debug_assert_eq!(rows, gold.len());
    let mut mask = ndarray::Array2::zeros((rows, cols));
    for (r, &c) in gold.iter().enumerate() {
        mask[[r, c]] = 1.0;
    }
    let probs = t.softmax(logits);
    let logp = t.log_clamp(probs, 1e-12);
    let mask = t.leaf(mask);
    let picked = t.mul(mask, logp);
    let total = t.sum_all(picked);
    t.scale(total, -1.0 / rows as f64)
}

/// Builds the five-component joint loss for one annotated document.
fn document_loss(
    t: &mut Tape,
    store: &ParamStore,
    config: &ErgConfig,
    doc: &AnnotatedDocument,
    gold: &GoldLabels,
) -> Result<Var> {
    let encoded = encode(t, store, &config.encoder, &doc.tokens)?;
    let token_rows: Vec<usize> = (1..=doc.tokens.len()).collect();
    let token_embeddings = t.rows(encoded, &token_rows);
    let event_logits = two_layer_logits(t, store, "event", token_embeddings)?;
    let mut components = vec![mean_class_cross_entropy(t, event_logits, &gold.token_event)];

    let pairs: Vec<(usize, usize)> = gold.pair_labels.keys().copied().collect();
    if !pairs.is_empty() {
        let first_rows = |side: fn(&(usize, usize)) -> usize| -> Vec<usize> {
            pairs.iter().map(|p| doc.mentions[side(p)].start + 1).collect()
        };
        let rows_a = first_rows(|p| p.0);
        let rows_b = first_rows(|p| p.1);
        let emb_a = t.rows(encoded, &rows_a);
        let emb_b = t.rows(encoded, &rows_b);
        let pair_embeddings = t.concat_cols(&[emb_a, emb_b]);
        for family in RelationFamily::ALL {
            let logits = two_layer_logits(t, store, family_prefix(family), pair_embeddings)?;
            let gold_classes: Vec<usize> = pairs
                .iter()
                .map(|p| gold.pair_labels[p][family_slot(family)])
                .collect();
            components.push(mean_class_cross_entropy(t, logits, &gold_classes));
        }
    }
    Ok(t.add_n(&components))
}

/// Pooled dev-set quality of the extractors, computed over gold mentions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErgDevMetrics {
    pub event: Prf,
    pub temporal: Prf,
    pub causal: Prf,
    pub subevent: Prf,
    pub coref: CorefScores,
}

pub struct ErgTrainOutcome {
    pub models: ErgModels,
    pub epoch_losses: Vec<f64>,
    pub dev_metrics: Option<ErgDevMetrics>,
}

/// Trains the extractors jointly. Documents are visited one at a time in a
/// seeded shuffled order; the loss per document is the unit-weight sum of
/// the five component losses.
pub fn train_erg(
    train: &[AnnotatedDocument],
    dev: &[AnnotatedDocument],
    config: &ErgConfig,
) -> Result<ErgTrainOutcome> {
    if train.is_empty() {
        return Err(Error::validation("cannot train on an empty document set"));
    }
    let mut models = ErgModels::init(config.clone())?;
    let gold: Vec<GoldLabels> = train
        .iter()
        .map(|d| gold_labels(d, config.max_pair_distance))
        .collect::<Result<_>>()?;
    let mut optimizer = Adam::new(config.lr);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let mut rng =
            ChaCha8Rng::seed_from_u64(config.seed ^ (epoch as u64).wrapping_mul(0x9e3779b97f4a7c15));
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &idx in &order {
            let mut t = Tape::new();
            let loss = document_loss(&mut t, &models.store, config, &train[idx], &gold[idx])?;
            total += t.scalar_value(loss);
            let grads = t.backward(loss)?;
            optimizer.step(&mut models.store, &grads)?;
        }
        epoch_losses.push(total / train.len() as f64);
    }
    let dev_metrics = if dev.is_empty() {
        None
    } else {
        Some(evaluate_erg(&models, dev)?)
    };
    Ok(ErgTrainOutcome { models, epoch_losses, dev_metrics })
}

/// Scores the extractors on annotated documents: token-level event
/// identification (macro over both classes), per-family relation
/// classification over gold mention pairs (macro over the family's
/// classes), and coreference metrics on the clusters implied by pairwise
/// predictions, pooled across documents.
pub fn evaluate_erg(models: &ErgModels, docs: &[AnnotatedDocument]) -> Result<ErgDevMetrics> {
    if docs.is_empty() {
        return Err(Error::validation("cannot evaluate on an empty document set"));
    }
    let mut event_pred = Vec::new();
    let mut event_gold = Vec::new();
    let mut family_pred: [Vec<usize>; 4] = Default::default();
    let mut family_gold: [Vec<usize>; 4] = Default::default();
    let mut pred_partition: Vec<Vec<usize>> = Vec::new();
    let mut gold_partition: Vec<Vec<usize>> = Vec::new();
    let mut offset = 0usize;

    for doc in docs {
        let gold = gold_labels(doc, models.config.max_pair_distance)?;
        let token_probs = predict_token_events(models, &doc.tokens)?;
        for (probs, &g) in token_probs.iter().zip(&gold.token_event) {
            event_pred.push(crate::labels::argmax_tie_low(probs));
            event_gold.push(g);
        }

        let nodes = mentions_to_event_nodes(doc);
        let predictions = predict_pair_relations(models, &doc.tokens, &nodes)?;
        let mut corefer_edges = Vec::new();
        for probs in &predictions {
            let key = (probs.a, probs.b);
            let gold_classes = &gold.pair_labels[&key];
            for family in RelationFamily::ALL {
                let slot = family_slot(family);
                family_pred[slot].push(probs.hard_label(family).class);
                family_gold[slot].push(gold_classes[slot]);
            }
            if probs.hard_label(RelationFamily::Coref).class == 1 {
                corefer_edges.push(key);
            }
        }

        let n = doc.mentions.len();
        for cluster in crate::graph::connected_components(n, corefer_edges.iter().copied()) {
            pred_partition.push(cluster.into_iter().map(|m| m + offset).collect());
        }
        let index = doc.mention_index();
        for cluster in &doc.clusters {
            gold_partition.push(cluster.iter().map(|id| index[id.as_str()] + offset).collect());
        }
        offset += n;
    }

    let family_metric = |family: RelationFamily| -> Result<Prf> {
        let slot = family_slot(family);
        let classes: Vec<usize> = (0..family.arity()).collect();
        macro_prf(&family_pred[slot], &family_gold[slot], &classes)
    };
    Ok(ErgDevMetrics {
        event: macro_prf(&event_pred, &event_gold, &[0, 1])?,
        temporal: family_metric(RelationFamily::Temporal)?,
        causal: family_metric(RelationFamily::Causal)?,
        subevent: family_metric(RelationFamily::Subevent)?,
        coref: coref_score(&pred_partition, &gold_partition)?,
    })
}

/// Per-token event probabilities for a tokenized document.
pub fn predict_token_events(models: &ErgModels, tokens: &[Token]) -> Result<TokenEventProbs> {
    if tokens.is_empty() {
        return Err(Error::validation("cannot predict events for an untokenized document"));
    }
    models.validate()?;
    let mut t = Tape::new();
    let encoded = encode(&mut t, &models.store, &models.config.encoder, tokens)?;
    let token_rows: Vec<usize> = (1..=tokens.len()).collect();
    let token_embeddings = t.rows(encoded, &token_rows);
    let logits = two_layer_logits(&mut t, &models.store, "event", token_embeddings)?;
    let probs = t.softmax(logits);
    let value = t.value(probs);
    Ok(value.rows().into_iter().map(|r| [r[0], r[1]]).collect())
}

/// Four relation distributions for every formed pair of `events`, which
/// must be in textual order with spans inside the token range.
pub fn predict_pair_relations(
    models: &ErgModels,
    tokens: &[Token],
    events: &[EventNode],
) -> Result<Vec<PairRelationProbs>> {
    models.validate()?;
    for pair in events.windows(2) {
        let ordered = (pair[0].start, pair[0].end) < (pair[1].start, pair[1].end)
            || (pair[0].start, pair[0].end) == (pair[1].start, pair[1].end);
        if !ordered {
            return Err(Error::validation(format!(
                "events {} and {} are not in textual order",
                pair[0].id, pair[1].id
            )));
        }
    }
    if let Some(bad) = events.iter().find(|e| e.end > tokens.len() || e.start >= e.end) {
        return Err(Error::validation(format!(
            "event {} span [{}, {}) is outside the {}-token document",
            bad.id,
            bad.start,
            bad.end,
            tokens.len()
        )));
    }
    let pairs = form_event_pairs(events.len(), models.config.max_pair_distance);
    if pairs.is_empty() {
        return Ok(Vec::new());
    }
    let mut t = Tape::new();
    let encoded = encode(&mut t, &models.store, &models.config.encoder, tokens)?;
    let rows_a: Vec<usize> = pairs.iter().map(|&(a, _)| events[a].start + 1).collect();
    let rows_b: Vec<usize> = pairs.iter().map(|&(_, b)| events[b].start + 1).collect();
    let emb_a = t.rows(encoded, &rows_a);
    let emb_b = t.rows(encoded, &rows_b);
    let pair_embeddings = t.concat_cols(&[emb_a, emb_b]);
    let mut by_family = Vec::new();
    for family in RelationFamily::ALL {
        let logits = two_layer_logits(&mut t, &models.store, family_prefix(family), pair_embeddings)?;
        let probs = t.softmax(logits);
        by_family.push(t.value(probs).clone());
    }
    Ok(pairs
        .iter()
        .enumerate()
        .map(|(row, &(a, b))| PairRelationProbs {
            a,
            b,
            coref: by_family[0].row(row).to_vec(),
            temporal: by_family[1].row(row).to_vec(),
            causal: by_family[2].row(row).to_vec(),
            subevent: by_family[3].row(row).to_vec(),
        })
        .collect())
}

/// Merges maximal runs of consecutive tokens whose hard event label is
/// event into mentions; the run's first token indexes its embedding.
pub fn merge_event_runs(text: &str, tokens: &[Token], token_probs: &TokenEventProbs) -> Vec<EventNode> {
    let mut nodes = Vec::new();
    let mut run_start: Option<usize> = None;
    for i in 0..=token_probs.len() {
        let is_event =
            i < token_probs.len() && crate::labels::argmax_tie_low(&token_probs[i]) == 1;
        match (run_start, is_event) {
            (None, true) => run_start = Some(i),
            (Some(start), false) => {
                nodes.push(EventNode {
                    id: nodes.len(),
                    start,
                    end: i,
                    trigger: text[tokens[start].start..tokens[i - 1].end].to_string(),
                });
                run_start = None;
            }
            _ => {}
        }
    }
    nodes
}

/// Runs the full extraction pipeline on one document and assembles its
/// event relation graph. A document with no predicted events yields a
/// graph with only the document node.
pub fn build_graph(models: &ErgModels, doc: &Document) -> Result<EventRelationGraph> {
    if doc.tokens.is_empty() {
        return Err(Error::validation(format!("document {} is not tokenized", doc.doc_id)));
    }
    let token_probs = predict_token_events(models, &doc.tokens)?;
    let events = merge_event_runs(&doc.text, &doc.tokens, &token_probs);
    let pairs = predict_pair_relations(models, &doc.tokens, &events)?;
    EventRelationGraph::from_soft_labels(doc.doc_id.clone(), events, token_probs, pairs)
}
