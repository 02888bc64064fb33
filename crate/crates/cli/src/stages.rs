//! The pipeline stages behind each subcommand.
//!
//! Stages communicate only through files in the cache directory, so any
//! stage can be rerun in isolation and a missing upstream artifact is
//! reported with the command that produces it. Artifact layout:
//!
//!   corpus.jsonl      normalized labeled corpus       (ingest)
//!   annotated.jsonl   normalized annotated corpus     (ingest)
//!   split.json        train/dev/test manifest         (split)
//!   erg.json          extractor checkpoint            (train-erg)
//!   graphs.jsonl      one event relation graph per doc(build-graphs)
//!   distilled.json    event-aware encoder checkpoint  (distill)
//!   classifier.json   classifier checkpoint           (train-classifier)
//!   predictions.json  per-document labels             (predict)
//!   reports/          one JSON + text report per stage
//!   ablations/        derived configs                 (ablations)

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use erg_core::{
    build_graph, classification_f1, classify_probability, evaluate_erg, load_annotated_corpus,
    load_labeled_corpus, make_media_source_split, make_random_split, probability_to_label,
    relation_profile, save_annotated_corpus, save_labeled_corpus, train_classifier,
    train_erg, train_event_aware_encoder, ClassLabel, ClassifierModels, Corpus, CorefScores,
    Document, ErgModels, EventAwareEncoder, EventRelationGraph, SimpleTokenizer, SplitManifest,
    SplitMode, SplitName,
};

use crate::config::{emit_ablation_suite, PipelineConfig};
use crate::report::{sha256_file, RunReport, Timing};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Ingest,
    Split,
    TrainErg,
    BuildGraphs,
    Profile,
    Distill,
    TrainClassifier,
    Evaluate,
    Predict,
    Synth,
    Ablations,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Split => "split",
            Stage::TrainErg => "train-erg",
            Stage::BuildGraphs => "build-graphs",
            Stage::Profile => "profile",
            Stage::Distill => "distill",
            Stage::TrainClassifier => "train-classifier",
            Stage::Evaluate => "evaluate",
            Stage::Predict => "predict",
            Stage::Synth => "synth",
            Stage::Ablations => "ablations",
        }
    }
}

/// One predicted article label, the unit of the predictions file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictionRow {
    pub doc_id: String,
    pub label: ClassLabel,
    pub probability: f64,
}

struct StageOutcome {
    inputs: BTreeMap<String, String>,
    artifacts: BTreeMap<String, String>,
    metrics: serde_json::Value,
}

impl StageOutcome {
    fn new(metrics: serde_json::Value) -> StageOutcome {
        StageOutcome { inputs: BTreeMap::new(), artifacts: BTreeMap::new(), metrics }
    }
}

pub struct Pipeline {
    config: PipelineConfig,
    cache: PathBuf,
}

impl Pipeline {
    /// Cache directory precedence: config key, ERG_CACHE_DIR, ./erg-cache.
    pub fn new(config: PipelineConfig) -> Pipeline {
        let cache = config
            .data
            .cache_dir
            .clone()
            .map(PathBuf::from)
            .or_else(|| std::env::var_os("ERG_CACHE_DIR").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("erg-cache"));
        Pipeline { config, cache }
    }

    pub fn cache_dir(&self) -> &Path {
        &self.cache
    }

    /// Runs one stage and writes its report pair under reports/.
    pub fn run(&self, stage: Stage) -> Result<RunReport, CliError> {
        let (mut timing, clock) = Timing::start();
        let mut outcome = match stage {
            Stage::Ingest => self.stage_ingest(),
            Stage::Split => self.stage_split(),
            Stage::TrainErg => self.stage_train_erg(),
            Stage::BuildGraphs => self.stage_build_graphs(),
            Stage::Profile => self.stage_profile(),
            Stage::Distill => self.stage_distill(),
            Stage::TrainClassifier => self.stage_train_classifier(),
            Stage::Evaluate => self.stage_evaluate(),
            Stage::Predict => self.stage_predict(),
            Stage::Synth => self.stage_synth(),
            Stage::Ablations => self.stage_ablations(),
        }?;
        timing.wall_ms = clock.elapsed().as_millis();
        let reports = self.cache.join("reports");
        outcome
            .artifacts
            .insert("report".to_string(), display(&reports.join(format!("{}.json", stage.name()))));
        let report = RunReport {
            command: stage.name().to_string(),
            timing,
            config: self.config.clone(),
            inputs: outcome.inputs,
            artifacts: outcome.artifacts,
            metrics: outcome.metrics,
        };
        report.write(&reports)?;
        Ok(report)
    }

    fn corpus_path(&self) -> PathBuf {
        self.cache.join("corpus.jsonl")
    }
    fn annotated_path(&self) -> PathBuf {
        self.cache.join("annotated.jsonl")
    }
    fn split_path(&self) -> PathBuf {
        self.cache.join("split.json")
    }
    fn erg_path(&self) -> PathBuf {
        self.cache.join("erg.json")
    }
    fn graphs_path(&self) -> PathBuf {
        self.cache.join("graphs.jsonl")
    }
    fn distilled_path(&self) -> PathBuf {
        self.cache.join("distilled.json")
    }
    fn classifier_path(&self) -> PathBuf {
        self.cache.join("classifier.json")
    }
    fn predictions_path(&self) -> PathBuf {
        self.cache.join("predictions.json")
    }

    fn ensure_cache(&self) -> Result<(), CliError> {
        std::fs::create_dir_all(&self.cache).map_err(|e| CliError::Run(e.into()))
    }

    fn require(&self, path: &Path, what: &str, produced_by: &str) -> Result<String, CliError> {
        if !path.exists() {
            return Err(CliError::Prerequisite(format!(
                "{what} not found at {}; run `erg {produced_by}` first",
                path.display()
            )));
        }
        sha256_file(path)
    }

    fn load_corpus(&self, tokenized: bool) -> Result<(Corpus, String), CliError> {
        let path = self.corpus_path();
        let hash = self.require(&path, "normalized corpus", "ingest")?;
        let mut corpus = load_labeled_corpus(&path)?;
        if tokenized {
            corpus.tokenize_all(&SimpleTokenizer)?;
        }
        Ok((corpus, hash))
    }

    fn load_split(&self) -> Result<(SplitManifest, String), CliError> {
        let path = self.split_path();
        let hash = self.require(&path, "split manifest", "split")?;
        Ok((SplitManifest::load(&path)?, hash))
    }

    fn load_graphs(&self) -> Result<(BTreeMap<String, EventRelationGraph>, String), CliError> {
        let path = self.graphs_path();
        let hash = self.require(&path, "event relation graphs", "build-graphs")?;
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::Run(e.into()))?;
        let mut graphs = BTreeMap::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let graph = EventRelationGraph::deserialize_graph(line)?;
            if graphs.insert(graph.doc_id.clone(), graph).is_some() {
                return Err(CliError::Run(erg_core::Error::Validation(format!(
                    "duplicate graph in {}",
                    path.display()
                ))));
            }
        }
        Ok((graphs, hash))
    }

    /// Documents of one split, in doc_id order.
    fn split_docs(
        &self,
        corpus: &Corpus,
        manifest: &SplitManifest,
        split: SplitName,
    ) -> Result<Vec<Document>, CliError> {
        manifest
            .doc_ids(split)
            .into_iter()
            .map(|id| {
                corpus.get(id).cloned().ok_or_else(|| {
                    CliError::Prerequisite(format!(
                        "split manifest references unknown document {id}; re-run `erg split`"
                    ))
                })
            })
            .collect()
    }

    fn stage_ingest(&self) -> Result<StageOutcome, CliError> {
        let labeled_path = PathBuf::from(&self.config.data.labeled);
        if !labeled_path.exists() {
            return Err(CliError::Config(format!(
                "data.labeled {} does not exist",
                labeled_path.display()
            )));
        }
        let mut outcome = StageOutcome::new(serde_json::Value::Null);
        outcome.inputs.insert("labeled".to_string(), sha256_file(&labeled_path)?);

        let mut corpus = load_labeled_corpus(&labeled_path)?;
        corpus.tokenize_all(&SimpleTokenizer)?;
        self.ensure_cache()?;
        save_labeled_corpus(&self.corpus_path(), &corpus)?;
        outcome.artifacts.insert("corpus".to_string(), display(&self.corpus_path()));

        let counts = corpus.class_counts();
        let labeled_total: usize = counts.values().sum();
        let mut metrics = json!({
            "documents": corpus.len(),
            "conspiracy": counts.get(&ClassLabel::Conspiracy).copied().unwrap_or(0),
            "benign": counts.get(&ClassLabel::Benign).copied().unwrap_or(0),
            "unlabeled": corpus.len() - labeled_total,
        });

        if let Some(annotated) = &self.config.data.annotated {
            let path = PathBuf::from(annotated);
            if !path.exists() {
                return Err(CliError::Config(format!(
                    "data.annotated {} does not exist",
                    path.display()
                )));
            }
            outcome.inputs.insert("annotated".to_string(), sha256_file(&path)?);
            let docs = load_annotated_corpus(&path, &SimpleTokenizer)?;
            save_annotated_corpus(&self.annotated_path(), &docs)?;
            outcome.artifacts.insert("annotated".to_string(), display(&self.annotated_path()));
            let mentions: usize = docs.iter().map(|d| d.mentions.len()).sum();
            let relations: usize = docs
                .iter()
                .map(|d| d.temporal.len() + d.causal.len() + d.subevent.len())
                .sum();
            metrics["annotated_documents"] = json!(docs.len());
            metrics["event_mentions"] = json!(mentions);
            metrics["relation_annotations"] = json!(relations);
        }
        outcome.metrics = metrics;
        Ok(outcome)
    }

    fn stage_split(&self) -> Result<StageOutcome, CliError> {
        let (corpus, corpus_hash) = self.load_corpus(false)?;
        let manifest = match self.config.data.split_mode {
            SplitMode::MediaSource => {
                let counts = self.config.source_counts()?;
                make_media_source_split(&corpus, &counts, self.config.seed)?
            }
            SplitMode::Random => {
                let fixed = self.load_fixed_test()?;
                make_random_split(
                    &corpus,
                    self.config.data.train_size,
                    self.config.data.dev_size,
                    &fixed,
                    self.config.seed,
                )?
            }
        };
        self.ensure_cache()?;
        manifest.save(&self.split_path())?;

        let sizes: BTreeMap<&str, usize> = SplitName::ALL
            .iter()
            .map(|&s| (s.name(), manifest.doc_ids(s).len()))
            .collect();
        let classes: BTreeMap<&str, BTreeMap<&str, usize>> = manifest
            .class_split_sizes(&corpus)
            .into_iter()
            .map(|(class, by_split)| {
                (class.name(), by_split.into_iter().map(|(s, n)| (s.name(), n)).collect())
            })
            .collect();
        let sources: BTreeMap<&str, usize> = SplitName::ALL
            .iter()
            .map(|&split| {
                let distinct: BTreeSet<&str> = manifest
                    .doc_ids(split)
                    .iter()
                    .filter_map(|id| corpus.get(id))
                    .map(|d| d.media_source.as_str())
                    .collect();
                (split.name(), distinct.len())
            })
            .collect();

        let mut outcome = StageOutcome::new(json!({
            "mode": self.config.data.split_mode,
            "documents": sizes,
            "classes": classes,
            "media_sources": sources,
        }));
        outcome.inputs.insert("corpus".to_string(), corpus_hash);
        outcome.artifacts.insert("split".to_string(), display(&self.split_path()));
        Ok(outcome)
    }

    fn load_fixed_test(&self) -> Result<BTreeSet<String>, CliError> {
        let Some(path) = &self.config.data.fixed_test else {
            return Ok(BTreeSet::new());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read data.fixed_test {path}: {e}")))?;
        let ids: Vec<String> = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("data.fixed_test {path}: {e}")))?;
        Ok(ids.into_iter().collect())
    }

    fn stage_train_erg(&self) -> Result<StageOutcome, CliError> {
        let path = self.annotated_path();
        let hash = self.require(&path, "annotated corpus", "ingest")?;
        let docs = load_annotated_corpus(&path, &SimpleTokenizer)?;
        let (train, dev) = self.annotated_split(&docs)?;
        let config = self.config.erg_config()?;
        let outcome = train_erg(train, dev, &config)?;
        self.ensure_cache()?;
        outcome.models.save(&self.erg_path())?;

        let mut metrics = json!({
            "train_documents": train.len(),
            "dev_documents": dev.len(),
            "epochs": outcome.epoch_losses.len(),
            "first_loss": outcome.epoch_losses.first(),
            "final_loss": outcome.epoch_losses.last(),
        });
        if let Some(dev_metrics) = &outcome.dev_metrics {
            metrics["dev"] = serde_json::to_value(dev_metrics).map_err(erg_core::Error::from)?;
        }
        let mut out = StageOutcome::new(metrics);
        out.inputs.insert("annotated".to_string(), hash);
        out.artifacts.insert("erg".to_string(), display(&self.erg_path()));
        Ok(out)
    }

    /// Trailing `annotated_dev` documents become the extractor dev set.
    fn annotated_split<'d>(
        &self,
        docs: &'d [erg_core::AnnotatedDocument],
    ) -> Result<(&'d [erg_core::AnnotatedDocument], &'d [erg_core::AnnotatedDocument]), CliError>
    {
        let dev = self.config.data.annotated_dev;
        if dev >= docs.len() {
            return Err(CliError::Config(format!(
                "data.annotated_dev = {dev} leaves no training documents out of {}",
                docs.len()
            )));
        }
        Ok(docs.split_at(docs.len() - dev))
    }

    fn stage_build_graphs(&self) -> Result<StageOutcome, CliError> {
        let (corpus, corpus_hash) = self.load_corpus(true)?;
        let erg_hash = self.require(&self.erg_path(), "extractor checkpoint", "train-erg")?;
        let models = ErgModels::load(&self.erg_path())?;

        let mut docs: Vec<&Document> = corpus.docs().iter().collect();
        docs.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
        let graphs: Vec<EventRelationGraph> = docs
            .par_iter()
            .map(|doc| build_graph(&models, doc))
            .collect::<erg_core::Result<_>>()?;

        let mut out = String::new();
        for graph in &graphs {
            out.push_str(&graph.serialize_graph()?);
            out.push('\n');
        }
        self.ensure_cache()?;
        std::fs::write(self.graphs_path(), out).map_err(|e| CliError::Run(e.into()))?;

        let events: usize = graphs.iter().map(|g| g.n_events()).sum();
        let edges: usize = graphs.iter().map(|g| g.hard_edges.len()).sum();
        let mut outcome = StageOutcome::new(json!({
            "graphs": graphs.len(),
            "events": events,
            "hard_edges": edges,
        }));
        outcome.inputs.insert("corpus".to_string(), corpus_hash);
        outcome.inputs.insert("erg".to_string(), erg_hash);
        outcome.artifacts.insert("graphs".to_string(), display(&self.graphs_path()));
        Ok(outcome)
    }

    fn stage_profile(&self) -> Result<StageOutcome, CliError> {
        let (corpus, corpus_hash) = self.load_corpus(false)?;
        let (graph_map, graphs_hash) = self.load_graphs()?;
        let graphs: Vec<EventRelationGraph> = graph_map.into_values().collect();

        let mut metrics = serde_json::Map::new();
        metrics.insert(
            "overall".to_string(),
            serde_json::to_value(relation_profile(&graphs)?).map_err(erg_core::Error::from)?,
        );
        let mut by_class: BTreeMap<ClassLabel, Vec<EventRelationGraph>> = BTreeMap::new();
        for graph in graphs {
            if let Some(label) = corpus.get(&graph.doc_id).and_then(|d| d.label) {
                by_class.entry(label).or_default().push(graph);
            }
        }
        for (class, group) in by_class {
            metrics.insert(
                class.name().to_string(),
                serde_json::to_value(relation_profile(&group)?).map_err(erg_core::Error::from)?,
            );
        }

        let mut outcome = StageOutcome::new(serde_json::Value::Object(metrics));
        outcome.inputs.insert("corpus".to_string(), corpus_hash);
        outcome.inputs.insert("graphs".to_string(), graphs_hash);
        Ok(outcome)
    }

    fn stage_distill(&self) -> Result<StageOutcome, CliError> {
        let (corpus, corpus_hash) = self.load_corpus(true)?;
        let (manifest, split_hash) = self.load_split()?;
        let (graphs, graphs_hash) = self.load_graphs()?;
        let train = self.split_docs(&corpus, &manifest, SplitName::Train)?;
        require_graphs_for(&train, &graphs)?;

        let config = self.config.distill_config()?;
        let outcome = train_event_aware_encoder(&train, &graphs, &config)?;
        self.ensure_cache()?;
        outcome.model.save(&self.distilled_path())?;

        let mut out = StageOutcome::new(json!({
            "documents": train.len(),
            "epochs": outcome.epoch_losses.len(),
            "first_loss": outcome.epoch_losses.first(),
            "final_loss": outcome.epoch_losses.last(),
            "epoch_losses": outcome.epoch_losses,
        }));
        out.inputs.insert("corpus".to_string(), corpus_hash);
        out.inputs.insert("split".to_string(), split_hash);
        out.inputs.insert("graphs".to_string(), graphs_hash);
        out.artifacts.insert("distilled".to_string(), display(&self.distilled_path()));
        Ok(out)
    }

    fn stage_train_classifier(&self) -> Result<StageOutcome, CliError> {
        let config = self.config.classifier_config()?;
        let (corpus, corpus_hash) = self.load_corpus(true)?;
        let (manifest, split_hash) = self.load_split()?;
        let train = self.split_docs(&corpus, &manifest, SplitName::Train)?;
        let dev = self.split_docs(&corpus, &manifest, SplitName::Dev)?;

        let mut inputs = BTreeMap::from([
            ("corpus".to_string(), corpus_hash),
            ("split".to_string(), split_hash),
        ]);
        let graphs = if config.variant.needs_graph() {
            let (graphs, hash) = self.load_graphs()?;
            require_graphs_for(&train, &graphs)?;
            require_graphs_for(&dev, &graphs)?;
            inputs.insert("graphs".to_string(), hash);
            graphs
        } else {
            BTreeMap::new()
        };
        let distilled = if config.variant.uses_distilled() {
            let hash =
                self.require(&self.distilled_path(), "distilled encoder checkpoint", "distill")?;
            inputs.insert("distilled".to_string(), hash);
            Some(EventAwareEncoder::load(&self.distilled_path())?)
        } else {
            None
        };

        let outcome = train_classifier(&train, &dev, &graphs, distilled.as_ref(), &config)?;
        let train_f1 = classification_f1(&outcome.models, &train, &graphs)?;
        self.ensure_cache()?;
        outcome.models.save(&self.classifier_path())?;

        let mut metrics = json!({
            "variant": config.variant,
            "train_documents": train.len(),
            "dev_documents": dev.len(),
            "epochs": outcome.epoch_losses.len(),
            "first_loss": outcome.epoch_losses.first(),
            "final_loss": outcome.epoch_losses.last(),
            "train_f1": train_f1.f1,
            "dev_f1": outcome.dev_f1,
        });
        if let Some(epoch) = outcome.selected_epoch {
            metrics["selected_epoch"] = json!(epoch);
        }
        let mut out = StageOutcome::new(metrics);
        out.inputs = inputs;
        out.artifacts.insert("classifier".to_string(), display(&self.classifier_path()));
        Ok(out)
    }

    fn stage_predict(&self) -> Result<StageOutcome, CliError> {
        let (corpus, corpus_hash) = self.load_corpus(true)?;
        let (manifest, split_hash) = self.load_split()?;
        let classifier_hash =
            self.require(&self.classifier_path(), "classifier checkpoint", "train-classifier")?;
        let models = ClassifierModels::load(&self.classifier_path())?;
        let docs = self.split_docs(&corpus, &manifest, self.config.eval.split)?;

        let mut inputs = BTreeMap::from([
            ("corpus".to_string(), corpus_hash),
            ("split".to_string(), split_hash),
            ("classifier".to_string(), classifier_hash),
        ]);
        let graphs = if models.config.variant.needs_graph() {
            let (graphs, hash) = self.load_graphs()?;
            require_graphs_for(&docs, &graphs)?;
            inputs.insert("graphs".to_string(), hash);
            graphs
        } else {
            BTreeMap::new()
        };

        // docs arrive in doc_id order, so the parallel map preserves it.
        let rows: Vec<PredictionRow> = docs
            .par_iter()
            .map(|doc| -> erg_core::Result<PredictionRow> {
                let probability = classify_probability(&models, doc, graphs.get(&doc.doc_id))?;
                Ok(PredictionRow {
                    doc_id: doc.doc_id.clone(),
                    label: probability_to_label(probability),
                    probability,
                })
            })
            .collect::<erg_core::Result<_>>()?;

        self.ensure_cache()?;
        let mut text =
            serde_json::to_string_pretty(&rows).map_err(erg_core::Error::from)?;
        text.push('\n');
        std::fs::write(self.predictions_path(), text).map_err(|e| CliError::Run(e.into()))?;

        let conspiracy = rows.iter().filter(|r| r.label == ClassLabel::Conspiracy).count();
        let mut out = StageOutcome::new(json!({
            "split": self.config.eval.split,
            "documents": rows.len(),
            "predicted_conspiracy": conspiracy,
            "predicted_benign": rows.len() - conspiracy,
        }));
        out.inputs = inputs;
        out.artifacts.insert("predictions".to_string(), display(&self.predictions_path()));
        Ok(out)
    }

    fn stage_evaluate(&self) -> Result<StageOutcome, CliError> {
        let (corpus, corpus_hash) = self.load_corpus(false)?;
        let (manifest, split_hash) = self.load_split()?;
        let predictions_path = match &self.config.eval.predictions {
            Some(path) => PathBuf::from(path),
            None => self.predictions_path(),
        };
        let predictions_hash = self.require(&predictions_path, "predictions", "predict")?;
        let text =
            std::fs::read_to_string(&predictions_path).map_err(|e| CliError::Run(e.into()))?;
        let rows: Vec<PredictionRow> = serde_json::from_str(&text)
            .map_err(|e| CliError::Run(erg_core::Error::Validation(format!(
                "predictions {}: {e}",
                predictions_path.display()
            ))))?;
        let mut by_id: BTreeMap<&str, ClassLabel> = BTreeMap::new();
        for row in &rows {
            if by_id.insert(&row.doc_id, row.label).is_some() {
                return Err(CliError::Run(erg_core::Error::Validation(format!(
                    "duplicate prediction for document {}",
                    row.doc_id
                ))));
            }
        }

        let docs = self.split_docs(&corpus, &manifest, self.config.eval.split)?;
        let mut pred = Vec::with_capacity(docs.len());
        let mut gold = Vec::with_capacity(docs.len());
        for doc in &docs {
            let label = doc.label.ok_or_else(|| {
                erg_core::Error::Validation(format!("document {} has no gold label", doc.doc_id))
            })?;
            let predicted = by_id.get(doc.doc_id.as_str()).ok_or_else(|| {
                CliError::Prerequisite(format!(
                    "no prediction for document {}; re-run `erg predict`",
                    doc.doc_id
                ))
            })?;
            pred.push(*predicted);
            gold.push(label);
        }

        let binary = erg_core::binary_prf(&pred, &gold, &ClassLabel::Conspiracy)?.rounded();
        let macro_ = erg_core::macro_prf(&pred, &gold, &ClassLabel::ALL)?.rounded();
        let mut metrics = json!({
            "split": self.config.eval.split,
            "documents": docs.len(),
            "binary": binary,
            "macro": macro_,
        });

        let mut inputs = BTreeMap::from([
            ("corpus".to_string(), corpus_hash),
            ("split".to_string(), split_hash),
            ("predictions".to_string(), predictions_hash),
        ]);
        if self.config.eval.coref {
            let annotated_path = self.annotated_path();
            let annotated_hash = self.require(&annotated_path, "annotated corpus", "ingest")?;
            let erg_hash = self.require(&self.erg_path(), "extractor checkpoint", "train-erg")?;
            inputs.insert("annotated".to_string(), annotated_hash);
            inputs.insert("erg".to_string(), erg_hash);
            let docs = load_annotated_corpus(&annotated_path, &SimpleTokenizer)?;
            let (_, dev) = self.annotated_split(&docs)?;
            let scored = if dev.is_empty() { &docs[..] } else { dev };
            let models = ErgModels::load(&self.erg_path())?;
            let coref = evaluate_erg(&models, scored)?.coref;
            let rounded = CorefScores {
                muc: coref.muc.rounded(),
                b3: coref.b3.rounded(),
                ceaf_e: coref.ceaf_e.rounded(),
                blanc: coref.blanc.rounded(),
            };
            metrics["coref"] = serde_json::to_value(rounded).map_err(erg_core::Error::from)?;
        }

        let mut out = StageOutcome::new(metrics);
        out.inputs = inputs;
        Ok(out)
    }

    fn stage_synth(&self) -> Result<StageOutcome, CliError> {
        let annotated_key = self.config.data.annotated.as_ref().ok_or_else(|| {
            CliError::Config("data.annotated must be set to synthesize fixtures".to_string())
        })?;
        let labeled_path = PathBuf::from(&self.config.data.labeled);
        let annotated_path = PathBuf::from(annotated_key);

        let labeled = erg_core::synth_labeled(self.config.data.synth_labeled, self.config.seed);
        let annotated = erg_core::synth_annotated(self.config.data.synth_annotated, self.config.seed);
        for path in [&labeled_path, &annotated_path] {
            if let Some(parent) = path.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent).map_err(|e| CliError::Run(e.into()))?;
                }
            }
        }
        save_labeled_corpus(&labeled_path, &labeled)?;
        save_annotated_corpus(&annotated_path, &annotated)?;

        let counts = labeled.class_counts();
        let mut outcome = StageOutcome::new(json!({
            "labeled_documents": labeled.len(),
            "conspiracy": counts.get(&ClassLabel::Conspiracy).copied().unwrap_or(0),
            "benign": counts.get(&ClassLabel::Benign).copied().unwrap_or(0),
            "annotated_documents": annotated.len(),
        }));
        outcome.artifacts.insert("labeled".to_string(), display(&labeled_path));
        outcome.artifacts.insert("annotated".to_string(), display(&annotated_path));
        Ok(outcome)
    }

    fn stage_ablations(&self) -> Result<StageOutcome, CliError> {
        self.config.erg_config()?;
        self.config.distill_config()?;
        self.config.classifier_config()?;
        let suite = emit_ablation_suite(&self.config);
        let dir = self.cache.join("ablations");
        std::fs::create_dir_all(&dir).map_err(|e| CliError::Run(e.into()))?;

        let mut outcome = StageOutcome::new(serde_json::Value::Null);
        let mut names = Vec::new();
        for (name, config) in &suite {
            let path = dir.join(format!("{name}.toml"));
            std::fs::write(&path, config.render()).map_err(|e| CliError::Run(e.into()))?;
            outcome.artifacts.insert(name.clone(), display(&path));
            names.push(name.clone());
        }
        outcome.metrics = json!({ "configs": suite.len(), "names": names });
        Ok(outcome)
    }
}

fn require_graphs_for(
    docs: &[Document],
    graphs: &BTreeMap<String, EventRelationGraph>,
) -> Result<(), CliError> {
    let missing: Vec<&str> = docs
        .iter()
        .filter(|d| !graphs.contains_key(&d.doc_id))
        .map(|d| d.doc_id.as_str())
        .collect();
    if missing.is_empty() {
        return Ok(());
    }
    let shown = missing.iter().take(3).copied().collect::<Vec<_>>().join(", ");
    Err(CliError::Prerequisite(format!(
        "no stored graphs for {} document(s) ({shown}, ...); re-run `erg build-graphs`",
        missing.len()
    )))
}

fn display(path: &Path) -> String {
    path.display().to_string()
}
