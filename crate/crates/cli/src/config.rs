//! Pipeline configuration: one TOML file with a section per stage group,
//! overridable from the command line with dotted keys.
//!
//! Every key is either consumed here or rejected during deserialization,
//! so a typo never silently falls back to a default. The context encoder
//! is configured once in `[erg]` and shared by the distillation and
//! classifier stages, which keeps the three backbones structurally
//! compatible for weight transfer. The ablation set lives in
//! `[classifier]` and is copied into the distillation stage, since
//! dropping a supervision term affects both.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use erg_core::{
    ClassLabel, ClassifierConfig, DistillConfig, EncoderConfig, ErgConfig, SourceCounts,
    SplitMode, SplitName, SupervisionTerm, Variant,
};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Seed for corpus-level sampling: splits and fixture synthesis.
    /// Stage seeds live in their own sections.
    #[serde(default = "defaults::seed")]
    pub seed: u64,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub erg: ErgSection,
    #[serde(default)]
    pub distill: DistillSection,
    #[serde(default)]
    pub classifier: ClassifierSection,
    #[serde(default)]
    pub eval: EvalSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// Labeled article corpus, JSONL.
    #[serde(default = "defaults::labeled")]
    pub labeled: String,
    /// Event-relation-annotated training corpus, JSONL.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotated: Option<String>,
    /// Cache directory; falls back to ERG_CACHE_DIR, then ./erg-cache.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<String>,
    #[serde(default = "defaults::split_mode")]
    pub split_mode: SplitMode,
    /// Per-class (train, dev, test) media source counts for
    /// media_source splits. Keys are class names.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_counts: Option<BTreeMap<String, [usize; 3]>>,
    /// Article counts for random splits.
    #[serde(default)]
    pub train_size: usize,
    #[serde(default)]
    pub dev_size: usize,
    /// JSON array of doc ids pinned to the test set in random splits.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_test: Option<String>,
    /// Trailing annotated documents held out as the extractor dev set.
    #[serde(default)]
    pub annotated_dev: usize,
    /// Fixture sizes for the synth stage.
    #[serde(default = "defaults::synth_annotated")]
    pub synth_annotated: usize,
    #[serde(default = "defaults::synth_labeled")]
    pub synth_labeled: usize,
}

impl Default for DataSection {
    fn default() -> DataSection {
        DataSection {
            labeled: defaults::labeled(),
            annotated: None,
            cache_dir: None,
            split_mode: defaults::split_mode(),
            source_counts: None,
            train_size: 0,
            dev_size: 0,
            fixed_test: None,
            annotated_dev: 0,
            synth_annotated: defaults::synth_annotated(),
            synth_labeled: defaults::synth_labeled(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErgSection {
    /// Context encoder kind: "lookup" or "transformer".
    #[serde(default = "defaults::encoder")]
    pub encoder: String,
    #[serde(default = "defaults::width")]
    pub width: usize,
    #[serde(default = "defaults::buckets")]
    pub buckets: usize,
    /// Transformer-only keys; rejected under the lookup encoder.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub encoder_layers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    #[serde(default = "defaults::erg_epochs")]
    pub epochs: usize,
    #[serde(default = "defaults::erg_lr")]
    pub lr: f64,
    #[serde(default = "defaults::erg_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_pair_distance: Option<usize>,
}

impl Default for ErgSection {
    fn default() -> ErgSection {
        ErgSection {
            encoder: defaults::encoder(),
            width: defaults::width(),
            buckets: defaults::buckets(),
            encoder_layers: None,
            window: None,
            epochs: defaults::erg_epochs(),
            lr: defaults::erg_lr(),
            seed: defaults::erg_seed(),
            max_pair_distance: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistillSection {
    #[serde(default = "defaults::distill_epochs")]
    pub epochs: usize,
    #[serde(default = "defaults::distill_lr")]
    pub lr: f64,
    #[serde(default = "defaults::distill_seed")]
    pub seed: u64,
    /// Cap on graph pairs per document per epoch; absent uses all.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair_subsample: Option<usize>,
}

impl Default for DistillSection {
    fn default() -> DistillSection {
        DistillSection {
            epochs: defaults::distill_epochs(),
            lr: defaults::distill_lr(),
            seed: defaults::distill_seed(),
            pair_subsample: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierSection {
    #[serde(default = "defaults::variant")]
    pub variant: Variant,
    #[serde(default = "defaults::layers")]
    pub layers: usize,
    #[serde(default = "defaults::hidden_width")]
    pub hidden_width: usize,
    #[serde(default)]
    pub residuals: bool,
    #[serde(default = "defaults::classifier_epochs")]
    pub epochs: usize,
    #[serde(default = "defaults::classifier_lr")]
    pub lr: f64,
    #[serde(default = "defaults::classifier_seed")]
    pub seed: u64,
    /// Supervision terms removed for ablation runs; also applied to the
    /// distillation stage.
    #[serde(default)]
    pub ablate: BTreeSet<SupervisionTerm>,
}

impl Default for ClassifierSection {
    fn default() -> ClassifierSection {
        ClassifierSection {
            variant: defaults::variant(),
            layers: defaults::layers(),
            hidden_width: defaults::hidden_width(),
            residuals: false,
            epochs: defaults::classifier_epochs(),
            lr: defaults::classifier_lr(),
            seed: defaults::classifier_seed(),
            ablate: BTreeSet::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    /// Split evaluated and predicted over.
    #[serde(default = "defaults::eval_split")]
    pub split: SplitName,
    /// Predictions file to score; defaults to the predict stage output.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predictions: Option<String>,
    /// Also score extractor coreference against the annotated dev set.
    #[serde(default)]
    pub coref: bool,
}

impl Default for EvalSection {
    fn default() -> EvalSection {
        EvalSection {
            split: defaults::eval_split(),
            predictions: None,
            coref: false,
        }
    }
}

mod defaults {
    use erg_core::{SplitMode, SplitName, Variant};

    pub fn seed() -> u64 {
        7
    }
    pub fn labeled() -> String {
        "data/labeled.jsonl".to_string()
    }
    pub fn split_mode() -> SplitMode {
        SplitMode::MediaSource
    }
    pub fn synth_annotated() -> usize {
        20
    }
    pub fn synth_labeled() -> usize {
        40
    }
    pub fn encoder() -> String {
        "lookup".to_string()
    }
    pub fn width() -> usize {
        16
    }
    pub fn buckets() -> usize {
        4096
    }
    pub fn erg_epochs() -> usize {
        60
    }
    pub fn erg_lr() -> f64 {
        0.05
    }
    pub fn erg_seed() -> u64 {
        7
    }
    pub fn distill_epochs() -> usize {
        60
    }
    pub fn distill_lr() -> f64 {
        0.02
    }
    pub fn distill_seed() -> u64 {
        11
    }
    pub fn variant() -> Variant {
        Variant::Full
    }
    pub fn layers() -> usize {
        2
    }
    pub fn hidden_width() -> usize {
        16
    }
    pub fn classifier_epochs() -> usize {
        40
    }
    pub fn classifier_lr() -> f64 {
        0.01
    }
    pub fn classifier_seed() -> u64 {
        13
    }
    pub fn eval_split() -> SplitName {
        SplitName::Test
    }
}

impl PipelineConfig {
    /// Reads a config file and applies `key=value` overrides with dotted
    /// keys, then deserializes strictly so unknown keys fail loudly.
    pub fn load(path: &Path, overrides: &[String]) -> Result<PipelineConfig, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        let mut table: toml::Table = text
            .parse()
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        for entry in overrides {
            apply_override(&mut table, entry)?;
        }
        toml::Value::Table(table)
            .try_into()
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// The shared context encoder, configured in `[erg]`.
    pub fn encoder_config(&self) -> Result<EncoderConfig, CliError> {
        let erg = &self.erg;
        let encoder = match erg.encoder.as_str() {
            "lookup" => {
                if erg.encoder_layers.is_some() || erg.window.is_some() {
                    return Err(CliError::Config(
                        "erg.encoder_layers and erg.window require encoder = \"transformer\""
                            .to_string(),
                    ));
                }
                EncoderConfig::Lookup { width: erg.width, buckets: erg.buckets }
            }
            "transformer" => EncoderConfig::Transformer {
                width: erg.width,
                buckets: erg.buckets,
                layers: erg.encoder_layers.unwrap_or(2),
                window: erg.window.unwrap_or(16),
            },
            other => {
                return Err(CliError::Config(format!(
                    "unknown erg.encoder {other:?}; expected \"lookup\" or \"transformer\""
                )))
            }
        };
        encoder.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(encoder)
    }

    pub fn erg_config(&self) -> Result<ErgConfig, CliError> {
        Ok(ErgConfig {
            encoder: self.encoder_config()?,
            epochs: self.erg.epochs,
            lr: self.erg.lr,
            seed: self.erg.seed,
            max_pair_distance: self.erg.max_pair_distance,
        })
    }

    pub fn distill_config(&self) -> Result<DistillConfig, CliError> {
        Ok(DistillConfig {
            encoder: self.encoder_config()?,
            epochs: self.distill.epochs,
            lr: self.distill.lr,
            seed: self.distill.seed,
            pair_subsample: self.distill.pair_subsample,
            ablate: self.classifier.ablate.clone(),
        })
    }

    pub fn classifier_config(&self) -> Result<ClassifierConfig, CliError> {
        let config = ClassifierConfig {
            variant: self.classifier.variant,
            encoder: self.encoder_config()?,
            layers: self.classifier.layers,
            hidden_width: self.classifier.hidden_width,
            residuals: self.classifier.residuals,
            epochs: self.classifier.epochs,
            lr: self.classifier.lr,
            seed: self.classifier.seed,
            ablate: self.classifier.ablate.clone(),
        };
        config.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(config)
    }

    /// Media-source counts keyed by class, for the split stage.
    pub fn source_counts(&self) -> Result<BTreeMap<ClassLabel, SourceCounts>, CliError> {
        let raw = self.data.source_counts.as_ref().ok_or_else(|| {
            CliError::Config(
                "data.source_counts is required for split_mode = \"media_source\"".to_string(),
            )
        })?;
        let mut counts = BTreeMap::new();
        for (name, &[train, dev, test]) in raw {
            let class = match name.as_str() {
                "conspiracy" => ClassLabel::Conspiracy,
                "benign" => ClassLabel::Benign,
                other => {
                    return Err(CliError::Config(format!(
                        "unknown class {other:?} in data.source_counts"
                    )))
                }
            };
            counts.insert(class, SourceCounts { train, dev, test });
        }
        Ok(counts)
    }

    pub fn render(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

/// Sets one dotted key in the parsed table, creating intermediate tables.
/// The value is parsed as TOML so numbers, booleans, and arrays come
/// through typed; anything unparsable is taken as a bare string.
fn apply_override(table: &mut toml::Table, entry: &str) -> Result<(), CliError> {
    let (key, raw) = entry
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override {entry:?} is not KEY=VALUE")))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(CliError::Config(format!("override {entry:?} has an empty key")));
    }
    let value = parse_override_value(raw.trim());
    let mut current = table;
    let parts: Vec<&str> = key.split('.').collect();
    for part in &parts[..parts.len() - 1] {
        let slot = current
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        current = slot.as_table_mut().ok_or_else(|| {
            CliError::Config(format!("override {key:?} descends into non-table key {part:?}"))
        })?;
    }
    current.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn parse_override_value(raw: &str) -> toml::Value {
    let probe = format!("v = {raw}");
    match probe.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("probe key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Derives the ablation study configs from a base config: one per removed
/// supervision term plus the intact row, then one per model variant. Each
/// derived config differs from the base only in that one field.
pub fn emit_ablation_suite(base: &PipelineConfig) -> Vec<(String, PipelineConfig)> {
    let mut suite = Vec::new();
    let mut with_ablate = |name: &str, ablate: BTreeSet<SupervisionTerm>| {
        let mut config = base.clone();
        config.classifier.ablate = ablate;
        suite.push((name.to_string(), config));
    };
    with_ablate("full", BTreeSet::new());
    for term in SupervisionTerm::ALL {
        let name = format!("no-{}", term.name().replace('_', "-"));
        with_ablate(&name, BTreeSet::from([term]));
    }
    for variant in [Variant::Baseline, Variant::Features, Variant::Soft, Variant::Hard] {
        let mut config = base.clone();
        config.classifier.variant = variant;
        suite.push((format!("variant-{}", variant.name()), config));
    }
    suite
}
