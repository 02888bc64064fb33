//! Coreference cluster scoring: MUC, B-cubed, entity CEAF, and BLANC.
//!
//! Both inputs are partitions of the same mention universe: every mention
//! appears in exactly one cluster on each side, singletons included. Mentions
//! are dense ids; callers map span identities to ids before scoring.
//!
//! Degenerate-division conventions follow the reference-implementation
//! lineage: a ratio with a zero denominator scores 0 and flags the result,
//! and BLANC drops a link class entirely only when both sides lack it.
//!
//! `oracle` holds deliberately naive second implementations of all four
//! metrics; tests cross-check the fast paths against them.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::assignment::max_weight_assignment;
use crate::metrics::Prf;

/// Scores for one (pred, gold) partition pair, all in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorefScores {
    pub muc: Prf,
    pub b3: Prf,
    pub ceaf_e: Prf,
    pub blanc: Prf,
}

/// Mention universe size implied by a partition, after validation.
fn validate_partition(clusters: &[Vec<usize>], side: &str) -> Result<BTreeSet<usize>> {
    let mut seen = BTreeSet::new();
    for cluster in clusters {
        if cluster.is_empty() {
            return Err(Error::validation(format!("{side} partition has an empty cluster")));
        }
        for &m in cluster {
            if !seen.insert(m) {
                return Err(Error::validation(format!(
                    "{side} partition repeats mention {m}"
                )));
            }
        }
    }
    Ok(seen)
}

/// Per-mention cluster index, or usize::MAX for mentions absent from the
/// partition (cannot happen after validation; kept total for the oracles).
fn membership(clusters: &[Vec<usize>], universe: usize) -> Vec<usize> {
    let mut owner = vec![usize::MAX; universe];
    for (ci, cluster) in clusters.iter().enumerate() {
        for &m in cluster {
            owner[m] = ci;
        }
    }
    owner
}

fn ratio(num: f64, den: f64, degenerate: &mut bool) -> f64 {
    if den == 0.0 {
        *degenerate = true;
        0.0
    } else {
        num / den
    }
}

fn prf_from_fractions(p: f64, r: f64, degenerate: bool) -> Prf {
    let f1 = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    Prf {
        precision: 100.0 * p,
        recall: 100.0 * r,
        f1: 100.0 * f1,
        degenerate,
    }
}

/// Number of distinct clusters of `partition` that intersect `cluster`.
fn partitions_of(cluster: &[usize], owner: &[usize]) -> usize {
    cluster.iter().map(|&m| owner[m]).collect::<BTreeSet<_>>().len()
}

fn muc(pred: &[Vec<usize>], gold: &[Vec<usize>], universe: usize) -> Prf {
    let pred_owner = membership(pred, universe);
    let gold_owner = membership(gold, universe);
    let recall_num: usize = gold
        .iter()
        .map(|c| c.len() - partitions_of(c, &pred_owner))
        .sum();
    let recall_den: usize = gold.iter().map(|c| c.len() - 1).sum();
    let precision_num: usize = pred
        .iter()
        .map(|c| c.len() - partitions_of(c, &gold_owner))
        .sum();
    let precision_den: usize = pred.iter().map(|c| c.len() - 1).sum();
    let mut degenerate = false;
    let p = ratio(precision_num as f64, precision_den as f64, &mut degenerate);
    let r = ratio(recall_num as f64, recall_den as f64, &mut degenerate);
    prf_from_fractions(p, r, degenerate)
}

fn b_cubed(pred: &[Vec<usize>], gold: &[Vec<usize>], universe: usize) -> Prf {
    let pred_owner = membership(pred, universe);
    let gold_owner = membership(gold, universe);
    let mut p_sum = 0.0;
    let mut r_sum = 0.0;
    for m in 0..universe {
        let pc = &pred[pred_owner[m]];
        let gc = &gold[gold_owner[m]];
        let overlap = pc.iter().filter(|x| gc.contains(x)).count() as f64;
        p_sum += overlap / pc.len() as f64;
        r_sum += overlap / gc.len() as f64;
    }
    let mut degenerate = false;
    let p = ratio(p_sum, universe as f64, &mut degenerate);
    let r = ratio(r_sum, universe as f64, &mut degenerate);
    prf_from_fractions(p, r, degenerate)
}

/// Entity-similarity kernel for CEAF: 2|K∩R| / (|K|+|R|).
fn phi4(a: &[usize], b: &[usize]) -> f64 {
    let overlap = a.iter().filter(|x| b.contains(x)).count() as f64;
    2.0 * overlap / (a.len() + b.len()) as f64
}

fn ceaf_e(pred: &[Vec<usize>], gold: &[Vec<usize>]) -> Prf {
    let weights: Vec<Vec<f64>> = gold
        .iter()
        .map(|g| pred.iter().map(|p| phi4(g, p)).collect())
        .collect();
    let (best, _) = max_weight_assignment(&weights);
    let mut degenerate = false;
    let p = ratio(best, pred.len() as f64, &mut degenerate);
    let r = ratio(best, gold.len() as f64, &mut degenerate);
    prf_from_fractions(p, r, degenerate)
}

/// Pair-level link counts for BLANC: (both, pred-only, gold-only, neither),
/// over all unordered mention pairs.
fn link_counts(pred_owner: &[usize], gold_owner: &[usize]) -> (f64, f64, f64, f64) {
    let n = pred_owner.len();
    let (mut both, mut pred_only, mut gold_only, mut neither) = (0u64, 0u64, 0u64, 0u64);
    for i in 0..n {
        for j in i + 1..n {
            let in_pred = pred_owner[i] == pred_owner[j];
            let in_gold = gold_owner[i] == gold_owner[j];
            match (in_pred, in_gold) {
                (true, true) => both += 1,
                (true, false) => pred_only += 1,
                (false, true) => gold_only += 1,
                (false, false) => neither += 1,
            }
        }
    }
    (both as f64, pred_only as f64, gold_only as f64, neither as f64)
}

fn blanc(pred: &[Vec<usize>], gold: &[Vec<usize>], universe: usize) -> Prf {
    let pred_owner = membership(pred, universe);
    let gold_owner = membership(gold, universe);
    let (both, pred_only, gold_only, neither) = link_counts(&pred_owner, &gold_owner);
    let coref_pred = both + pred_only;
    let coref_gold = both + gold_only;
    let non_pred = neither + gold_only;
    let non_gold = neither + pred_only;

    let mut degenerate = false;
    let coref = {
        let p = ratio(both, coref_pred, &mut degenerate);
        let r = ratio(both, coref_gold, &mut degenerate);
        prf_from_fractions(p, r, false)
    };
    let non = {
        let p = ratio(neither, non_pred, &mut degenerate);
        let r = ratio(neither, non_gold, &mut degenerate);
        prf_from_fractions(p, r, false)
    };

    // A link class absent from both sides drops out instead of averaging in a
    // zero; with no pairs at all the score is 0 and flagged.
    let coref_absent = coref_pred + coref_gold == 0.0;
    let non_absent = non_pred + non_gold == 0.0;
    let (p, r, f1) = if coref_absent && non_absent {
        degenerate = true;
        (0.0, 0.0, 0.0)
    } else if coref_absent {
        degenerate = true;
        (non.precision, non.recall, non.f1)
    } else if non_absent {
        degenerate = true;
        (coref.precision, coref.recall, coref.f1)
    } else {
        (
            (coref.precision + non.precision) / 2.0,
            (coref.recall + non.recall) / 2.0,
            (coref.f1 + non.f1) / 2.0,
        )
    };
    Prf { precision: p, recall: r, f1, degenerate }
}

/// Scores a predicted partition against a gold partition of the same
/// mention universe. Errors if either side repeats a mention, contains an
/// empty cluster, covers a different mention set, or the universe is empty.
pub fn coref_score(pred: &[Vec<usize>], gold: &[Vec<usize>]) -> Result<CorefScores> {
    let pred_universe = validate_partition(pred, "predicted")?;
    let gold_universe = validate_partition(gold, "gold")?;
    if pred_universe != gold_universe {
        return Err(Error::validation(format!(
            "partitions cover different mention universes: predicted has {} mentions, gold has {}",
            pred_universe.len(),
            gold_universe.len()
        )));
    }
    if gold_universe.is_empty() {
        return Err(Error::validation("cannot score an empty mention universe"));
    }
    // Mention ids may be sparse; internal scoring assumes dense 0..n.
    let rank: std::collections::BTreeMap<usize, usize> =
        gold_universe.iter().enumerate().map(|(i, &m)| (m, i)).collect();
    let remap = |clusters: &[Vec<usize>]| -> Vec<Vec<usize>> {
        clusters
            .iter()
            .map(|c| c.iter().map(|m| rank[m]).collect())
            .collect()
    };
    let pred = remap(pred);
    let gold = remap(gold);
    let n = rank.len();
    Ok(CorefScores {
        muc: muc(&pred, &gold, n),
        b3: b_cubed(&pred, &gold, n),
        ceaf_e: ceaf_e(&pred, &gold),
        blanc: blanc(&pred, &gold, n),
    })
}

/// Naive reference implementations, structured differently from the fast
/// paths on purpose. Exposed so integration tests can cross-check. Unlike
/// `coref_score`, these require dense mention ids 0..universe.
pub mod oracle {
    use super::{membership, prf_from_fractions, Prf};
    use std::collections::BTreeSet;

    type Pairs = BTreeSet<(usize, usize)>;

    fn cluster_pairs(clusters: &[Vec<usize>]) -> Pairs {
        let mut pairs = BTreeSet::new();
        for cluster in clusters {
            for (i, &a) in cluster.iter().enumerate() {
                for &b in &cluster[i + 1..] {
                    pairs.insert((a.min(b), a.max(b)));
                }
            }
        }
        pairs
    }

    fn all_pairs(universe: usize) -> Pairs {
        let mut pairs = BTreeSet::new();
        for i in 0..universe {
            for j in i + 1..universe {
                pairs.insert((i, j));
            }
        }
        pairs
    }

    /// MUC via spanning-link counting: a cluster of size k needs k-1 links,
    /// and splitting it across q response clusters loses q-1 of them.
    pub fn muc(pred: &[Vec<usize>], gold: &[Vec<usize>], universe: usize) -> Prf {
        fn half(key: &[Vec<usize>], response_owner: &[usize]) -> (f64, f64) {
            let mut found = 0.0;
            let mut total = 0.0;
            for cluster in key {
                total += (cluster.len() - 1) as f64;
                let touched: BTreeSet<usize> =
                    cluster.iter().map(|&m| response_owner[m]).collect();
                found += (cluster.len() - touched.len()) as f64;
            }
            (found, total)
        }
        let pred_owner = membership(pred, universe);
        let gold_owner = membership(gold, universe);
        let (r_num, r_den) = half(gold, &pred_owner);
        let (p_num, p_den) = half(pred, &gold_owner);
        let degenerate = r_den == 0.0 || p_den == 0.0;
        let p = if p_den == 0.0 { 0.0 } else { p_num / p_den };
        let r = if r_den == 0.0 { 0.0 } else { r_num / r_den };
        prf_from_fractions(p, r, degenerate)
    }

    /// B-cubed by brute-force double loop over mention pairs, using the
    /// identity |pred(m) ∩ gold(m)| = #{m' : same pred cluster and same gold
    /// cluster as m}, counting m itself.
    pub fn b_cubed(pred: &[Vec<usize>], gold: &[Vec<usize>], universe: usize) -> Prf {
        let pred_owner = membership(pred, universe);
        let gold_owner = membership(gold, universe);
        let mut p_sum = 0.0;
        let mut r_sum = 0.0;
        for m in 0..universe {
            let mut overlap = 0.0;
            let mut pred_size = 0.0;
            let mut gold_size = 0.0;
            for other in 0..universe {
                let same_pred = pred_owner[other] == pred_owner[m];
                let same_gold = gold_owner[other] == gold_owner[m];
                if same_pred && same_gold {
                    overlap += 1.0;
                }
                if same_pred {
                    pred_size += 1.0;
                }
                if same_gold {
                    gold_size += 1.0;
                }
            }
            p_sum += overlap / pred_size;
            r_sum += overlap / gold_size;
        }
        let n = universe as f64;
        prf_from_fractions(p_sum / n, r_sum / n, false)
    }

    /// Entity CEAF with the optimal alignment found by trying every
    /// injective mapping from the smaller side into the larger.
    pub fn ceaf_e(pred: &[Vec<usize>], gold: &[Vec<usize>]) -> Prf {
        fn phi4(a: &[usize], b: &[usize]) -> f64 {
            let sa: BTreeSet<usize> = a.iter().copied().collect();
            let overlap = b.iter().filter(|m| sa.contains(m)).count() as f64;
            2.0 * overlap / (a.len() + b.len()) as f64
        }
        fn best(
            small: &[Vec<usize>],
            large: &[Vec<usize>],
            idx: usize,
            used: &mut Vec<bool>,
        ) -> f64 {
            if idx == small.len() {
                return 0.0;
            }
            let mut top = best(small, large, idx + 1, used);
            for j in 0..large.len() {
                if !used[j] {
                    used[j] = true;
                    let s = phi4(&small[idx], &large[j]) + best(small, large, idx + 1, used);
                    used[j] = false;
                    if s > top {
                        top = s;
                    }
                }
            }
            top
        }
        let total = if gold.len() <= pred.len() {
            best(gold, pred, 0, &mut vec![false; pred.len()])
        } else {
            best(pred, gold, 0, &mut vec![false; gold.len()])
        };
        let degenerate = pred.is_empty() || gold.is_empty();
        let p = if pred.is_empty() { 0.0 } else { total / pred.len() as f64 };
        let r = if gold.is_empty() { 0.0 } else { total / gold.len() as f64 };
        prf_from_fractions(p, r, degenerate)
    }

    /// BLANC via explicit pair-set algebra.
    pub fn blanc(pred: &[Vec<usize>], gold: &[Vec<usize>], universe: usize) -> Prf {
        let pred_links = cluster_pairs(pred);
        let gold_links = cluster_pairs(gold);
        let pred_non: Pairs = all_pairs(universe).difference(&pred_links).copied().collect();
        let gold_non: Pairs = all_pairs(universe).difference(&gold_links).copied().collect();

        fn class_prf(pred: &Pairs, gold: &Pairs) -> (f64, f64, f64, bool) {
            let hit = pred.intersection(gold).count() as f64;
            let degenerate = pred.is_empty() || gold.is_empty();
            let p = if pred.is_empty() { 0.0 } else { hit / pred.len() as f64 };
            let r = if gold.is_empty() { 0.0 } else { hit / gold.len() as f64 };
            let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
            (p, r, f, degenerate)
        }
        let (cp, cr, cf, c_degen) = class_prf(&pred_links, &gold_links);
        let (np, nr, nf, n_degen) = class_prf(&pred_non, &gold_non);
        let coref_absent = pred_links.is_empty() && gold_links.is_empty();
        let non_absent = pred_non.is_empty() && gold_non.is_empty();
        let (p, r, f1, degenerate) = if coref_absent && non_absent {
            (0.0, 0.0, 0.0, true)
        } else if coref_absent {
            (np, nr, nf, true)
        } else if non_absent {
            (cp, cr, cf, true)
        } else {
            ((cp + np) / 2.0, (cr + nr) / 2.0, (cf + nf) / 2.0, c_degen || n_degen)
        };
        Prf {
            precision: 100.0 * p,
            recall: 100.0 * r,
            f1: 100.0 * f1,
            degenerate,
        }
    }
}
