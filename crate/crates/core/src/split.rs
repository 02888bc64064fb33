//! Train/dev/test split construction.
//!
//! The media-source split assigns whole sources to partitions so no source
//! leaks across them: per class, the distinct source list is sorted, shuffled
//! with the seed, and consumed as train/dev/test prefixes of the requested
//! sizes. The random split reuses a fixed test set verbatim and shuffles the
//! remaining documents into train and dev. Both modes must assign every
//! document exactly once.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{ClassLabel, Corpus};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Dev,
    Test,
}

impl SplitName {
    pub const ALL: [SplitName; 3] = [SplitName::Train, SplitName::Dev, SplitName::Test];

    pub fn name(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Dev => "dev",
            SplitName::Test => "test",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    MediaSource,
    Random,
}

/// How many sources of one class go to train, dev, and test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceCounts {
    pub train: usize,
    pub dev: usize,
    pub test: usize,
}

impl SourceCounts {
    pub fn total(self) -> usize {
        self.train + self.dev + self.test
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub mode: SplitMode,
    pub seed: u64,
    pub assignment: BTreeMap<String, SplitName>,
}

impl SplitManifest {
    pub fn doc_ids(&self, split: SplitName) -> Vec<&str> {
        self.assignment
            .iter()
            .filter(|(_, &s)| s == split)
            .map(|(id, _)| id.as_str())
            .collect()
    }

    /// Errors unless the assignment covers exactly the corpus doc ids.
    pub fn validate_covers(&self, corpus: &Corpus) -> Result<()> {
        for doc in corpus.docs() {
            if !self.assignment.contains_key(&doc.doc_id) {
                return Err(Error::validation(format!(
                    "manifest does not assign doc {:?}",
                    doc.doc_id
                )));
            }
        }
        for id in self.assignment.keys() {
            if corpus.get(id).is_none() {
                return Err(Error::validation(format!(
                    "manifest assigns unknown doc {id:?}"
                )));
            }
        }
        Ok(())
    }

    /// Document counts per (class, split) for a labeled corpus.
    pub fn class_split_sizes(
        &self,
        corpus: &Corpus,
    ) -> BTreeMap<ClassLabel, BTreeMap<SplitName, usize>> {
        let mut out: BTreeMap<ClassLabel, BTreeMap<SplitName, usize>> = BTreeMap::new();
        for doc in corpus.docs() {
            let (Some(label), Some(&split)) = (doc.label, self.assignment.get(&doc.doc_id))
            else {
                continue;
            };
            *out.entry(label).or_default().entry(split).or_insert(0) += 1;
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn class_rng(seed: u64, class: ClassLabel) -> ChaCha8Rng {
    let salt = match class {
        ClassLabel::Conspiracy => 0x636f6e73u64,
        ClassLabel::Benign => 0x62656e69u64,
    };
    ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

/// Splits a fully labeled corpus by media source so that no source appears in
/// more than one partition. `counts` gives, per class, how many of that
/// class's sources go to each partition; the counts must use up every source.
pub fn make_media_source_split(
    corpus: &Corpus,
    counts: &BTreeMap<ClassLabel, SourceCounts>,
    seed: u64,
) -> Result<SplitManifest> {
    let sources = corpus.sources_by_class()?;
    let mut source_split: BTreeMap<String, SplitName> = BTreeMap::new();
    for (&class, class_sources) in &sources {
        let want = counts.get(&class).ok_or_else(|| {
            Error::validation(format!("no source counts given for class {class}"))
        })?;
        if want.total() != class_sources.len() {
            return Err(Error::infeasible(format!(
                "class {class} has {} sources but counts request {} ({}/{}/{})",
                class_sources.len(),
                want.total(),
                want.train,
                want.dev,
                want.test
            )));
        }
        let mut shuffled = class_sources.clone();
        shuffled.shuffle(&mut class_rng(seed, class));
        for (i, source) in shuffled.into_iter().enumerate() {
            let split = if i < want.train {
                SplitName::Train
            } else if i < want.train + want.dev {
                SplitName::Dev
            } else {
                SplitName::Test
            };
            source_split.insert(source, split);
        }
    }
    for (&class, _) in counts {
        if !sources.contains_key(&class) {
            return Err(Error::infeasible(format!(
                "counts given for class {class} but the corpus has no such documents"
            )));
        }
    }

    let mut assignment = BTreeMap::new();
    for doc in corpus.docs() {
        let split = source_split.get(&doc.media_source).copied().ok_or_else(|| {
            Error::validation(format!("doc {:?}: unassigned media source", doc.doc_id))
        })?;
        assignment.insert(doc.doc_id.clone(), split);
    }
    Ok(SplitManifest { mode: SplitMode::MediaSource, seed, assignment })
}

/// Splits a corpus at the document level while keeping `fixed_test` as the
/// test set verbatim. The remaining documents are shuffled with the seed and
/// consumed as train then dev; the two sizes must cover them exactly.
pub fn make_random_split(
    corpus: &Corpus,
    train_size: usize,
    dev_size: usize,
    fixed_test: &BTreeSet<String>,
    seed: u64,
) -> Result<SplitManifest> {
    for id in fixed_test {
        if corpus.get(id).is_none() {
            return Err(Error::validation(format!(
                "fixed test doc {id:?} is not in the corpus"
            )));
        }
    }
    let mut rest: Vec<&str> = corpus
        .docs()
        .iter()
        .map(|d| d.doc_id.as_str())
        .filter(|id| !fixed_test.contains(*id))
        .collect();
    if train_size + dev_size != rest.len() {
        return Err(Error::infeasible(format!(
            "train {train_size} + dev {dev_size} must cover the {} non-test documents exactly",
            rest.len()
        )));
    }
    rest.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let mut assignment = BTreeMap::new();
    for id in fixed_test {
        assignment.insert(id.clone(), SplitName::Test);
    }
    for (i, id) in rest.into_iter().enumerate() {
        let split = if i < train_size { SplitName::Train } else { SplitName::Dev };
        assignment.insert(id.to_string(), split);
    }
    Ok(SplitManifest { mode: SplitMode::Random, seed, assignment })
}
