//! Event relation graphs for news article classification.
//!
//! The pipeline has three model stages. A jointly trained extractor predicts
//! event triggers and four families of pairwise event relations, producing a
//! per-document event relation graph with both soft probability labels and
//! argmax hard edges. A distillation stage transfers the soft labels into an
//! event-aware document encoder. A relation-aware graph attention network
//! then propagates event and document states over the typed graph and a
//! two-layer head classifies the article.
//!
//! Supporting modules cover corpora and splits, coreference and
//! precision/recall/F1 metrics, the reverse-mode tape the training code runs
//! on, and a synthetic fixture generator for desk-scale end-to-end tests.

pub mod classifier;
pub mod corpus;
pub mod distill;
pub mod encoder;
pub mod erg;
pub mod error;
pub mod graph;
pub mod labels;
pub mod metrics;
pub mod nn;
pub mod split;
pub mod synth;
pub mod tokenize;

pub use classifier::{
    classification_f1, classify_probability, predict, probability_to_label, soft_label_features,
    train_classifier, ClassifierConfig, ClassifierModels, ClassifierTrainOutcome, Prediction,
    Variant, CLASSIFIER_MODEL_KIND,
};
pub use corpus::{
    load_annotated_corpus, load_labeled_corpus, save_annotated_corpus, save_labeled_corpus,
    AnnotatedDocument, ClassLabel, Corpus, Document, EventMention, RelationAnnotation,
};
pub use distill::{
    soft_cross_entropy, total_distill_loss, train_event_aware_encoder, DistillConfig,
    DistillOutcome, EventAwareEncoder, SupervisionTerm, DISTILL_MODEL_KIND,
};
pub use encoder::EncoderConfig;
pub use erg::{
    build_graph, evaluate_erg, train_erg, ErgConfig, ErgDevMetrics, ErgModels, ErgTrainOutcome,
    ERG_MODEL_KIND,
};
pub use error::{Error, Result};
pub use graph::{
    derive_hard_edges, relation_profile, EventNode, EventRelationGraph, HardEdge,
    PairRelationProbs, RelationProfile, SoftLabels, TokenEventProbs, GRAPH_SCHEMA_VERSION,
};
pub use metrics::{binary_prf, coref_score, macro_prf, round2, CorefScores, Prf};
pub use labels::{
    argmax_tie_low, map_annotation_label, CanonicalRelationLabel, EdgeType, RelationFamily,
};
pub use split::{
    make_media_source_split, make_random_split, SourceCounts, SplitManifest, SplitMode,
    SplitName,
};
pub use synth::{synth_annotated, synth_labeled};
pub use tokenize::{tokenize, SimpleTokenizer, Token, Tokenizer};
