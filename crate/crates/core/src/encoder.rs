//! Context encoders that turn a token sequence into a matrix of embeddings.
//!
//! Both variants prepend a start-of-article row at index 0, mirroring the
//! `<s>` token whose embedding later serves as the article embedding; token
//! i lives at row i+1. Tokens map to embedding rows through an FNV-1a hash
//! of the lowercased surface, so the vocabulary needs no external files.
//!
//! The `Lookup` variant is a plain embedding table for fast experiments.
//! The `Transformer` variant adds sinusoidal positions and a stack of
//! windowed self-attention layers where the start row attends and is
//! attended globally, the usual long-document trick.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::params::ParamStore;
use crate::nn::tape::{Tape, Var};
use crate::tokenize::Token;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EncoderConfig {
    Lookup {
        width: usize,
        buckets: usize,
    },
    Transformer {
        width: usize,
        buckets: usize,
        layers: usize,
        /// Half-width of the local attention window in tokens.
        window: usize,
    },
}

impl EncoderConfig {
    pub fn width(&self) -> usize {
        match self {
            EncoderConfig::Lookup { width, .. } => *width,
            EncoderConfig::Transformer { width, .. } => *width,
        }
    }

    pub fn buckets(&self) -> usize {
        match self {
            EncoderConfig::Lookup { buckets, .. } => *buckets,
            EncoderConfig::Transformer { buckets, .. } => *buckets,
        }
    }

    /// Width must be positive and even (downstream recurrent layers split
    /// it across two directions); buckets must be positive.
    pub fn validate(&self) -> Result<()> {
        if self.width() == 0 || self.width() % 2 != 0 {
            return Err(Error::validation(format!(
                "encoder width must be positive and even, got {}",
                self.width()
            )));
        }
        if self.buckets() == 0 {
            return Err(Error::validation("encoder needs at least one bucket"));
        }
        if let EncoderConfig::Transformer { layers, window, .. } = self {
            if *layers == 0 {
                return Err(Error::validation("transformer needs at least one layer"));
            }
            if *window == 0 {
                return Err(Error::validation("transformer window must be positive"));
            }
        }
        Ok(())
    }
}

/// FNV-1a 64-bit over the lowercased surface, reduced to a bucket. The row
/// after the last bucket is reserved for the start-of-article marker.
pub fn token_bucket(surface: &str, buckets: usize) -> usize {
    debug_assert!(buckets > 0);
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in surface.to_lowercase().bytes() {
        hash ^= byte as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    (hash % buckets as u64) as usize
}

fn table_name() -> &'static str {
    "enc.table"
}

/// Registers encoder parameters. The embedding table has buckets+1 rows;
/// the final row is the start-of-article embedding.
pub fn init_encoder<R: Rng>(store: &mut ParamStore, config: &EncoderConfig, rng: &mut R) -> Result<()> {
    config.validate()?;
    let (width, buckets) = (config.width(), config.buckets());
    store.insert_uniform(table_name(), buckets + 1, width, -0.5, 0.5, rng)?;
    if let EncoderConfig::Transformer { layers, .. } = config {
        for l in 0..*layers {
            for mat in ["wq", "wk", "wv", "wo", "ff1", "ff2"] {
                store.insert_xavier(&format!("enc.l{l}.{mat}"), width, width, rng)?;
            }
            store.insert_zeros(&format!("enc.l{l}.bff1"), 1, width)?;
            store.insert_zeros(&format!("enc.l{l}.bff2"), 1, width)?;
        }
    }
    Ok(())
}

/// Sinusoidal position rows for a (positions x width) matrix.
fn positional_rows(positions: usize, width: usize) -> Array2<f64> {
    Array2::from_shape_fn((positions, width), |(pos, i)| {
        let pair = (i / 2) as f64;
        let angle = pos as f64 / 10_000f64.powf(2.0 * pair / width as f64);
        if i % 2 == 0 {
            angle.sin()
        } else {
            angle.cos()
        }
    })
}

/// Attention mask: row 0 is global in both directions, other positions see
/// neighbors within `window`. Blocked entries get a large negative bias.
fn window_mask(positions: usize, window: usize) -> Array2<f64> {
    Array2::from_shape_fn((positions, positions), |(i, j)| {
        let local = i.abs_diff(j) <= window;
        if local || i == 0 || j == 0 {
            0.0
        } else {
            -1e9
        }
    })
}

/// Encodes tokens into a (N+1) x width matrix on the tape; row 0 is the
/// start-of-article embedding.
pub fn encode(
    t: &mut Tape,
    store: &ParamStore,
    config: &EncoderConfig,
    tokens: &[Token],
) -> Result<Var> {
    config.validate()?;
    let buckets = config.buckets();
    let table = t.param(store, table_name())?;
    let mut ids = Vec::with_capacity(tokens.len() + 1);
    ids.push(buckets);
    ids.extend(tokens.iter().map(|tok| token_bucket(&tok.surface, buckets)));
    let gathered = t.rows(table, &ids);
    match config {
        EncoderConfig::Lookup { .. } => Ok(gathered),
        EncoderConfig::Transformer { width, layers, window, .. } => {
            let positions = ids.len();
            let pe = t.leaf(positional_rows(positions, *width));
            let mask = t.leaf(window_mask(positions, *window));
            let scale = 1.0 / (*width as f64).sqrt();
            let mut x = t.add(gathered, pe);
            for l in 0..*layers {
                let wq = t.param(store, &format!("enc.l{l}.wq"))?;
                let wk = t.param(store, &format!("enc.l{l}.wk"))?;
                let wv = t.param(store, &format!("enc.l{l}.wv"))?;
                let wo = t.param(store, &format!("enc.l{l}.wo"))?;
                let q = t.matmul(x, wq);
                let k = t.matmul(x, wk);
                let v = t.matmul(x, wv);
                let kt = t.transpose(k);
                let raw = t.matmul(q, kt);
                let scaled = t.scale(raw, scale);
                let masked = t.add(scaled, mask);
                let alpha = t.softmax(masked);
                let mixed = t.matmul(alpha, v);
                let projected = t.matmul(mixed, wo);
                x = t.add(x, projected);
                let ff1 = t.param(store, &format!("enc.l{l}.ff1"))?;
                let bff1 = t.param(store, &format!("enc.l{l}.bff1"))?;
                let ff2 = t.param(store, &format!("enc.l{l}.ff2"))?;
                let bff2 = t.param(store, &format!("enc.l{l}.bff2"))?;
                let hidden = t.linear(x, ff1, bff1);
                let squashed = t.tanh(hidden);
                let back = t.linear(squashed, ff2, bff2);
                x = t.add(x, back);
            }
            Ok(x)
        }
    }
}
