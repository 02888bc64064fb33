//! Bidirectional LSTM over a sequence of row vectors.
//!
//! Gates are fused into one 4H-wide linear map per direction, laid out as
//! [input, forget, output, candidate]. Output at each position is the
//! concatenation of the forward and backward hidden states, 1 x 2H.

use ndarray::Array2;
use rand::Rng;

use crate::error::Result;
use crate::nn::params::ParamStore;
use crate::nn::tape::{Tape, Var};

/// Registers BiLSTM parameters under `prefix`.
pub fn init_bilstm<R: Rng>(
    store: &mut ParamStore,
    prefix: &str,
    input_dim: usize,
    hidden: usize,
    rng: &mut R,
) -> Result<()> {
    for dir in ["fwd", "bwd"] {
        store.insert_xavier(&format!("{prefix}.{dir}.w"), input_dim, 4 * hidden, rng)?;
        store.insert_xavier(&format!("{prefix}.{dir}.u"), hidden, 4 * hidden, rng)?;
        store.insert_zeros(&format!("{prefix}.{dir}.b"), 1, 4 * hidden)?;
    }
    Ok(())
}

fn run_direction(
    t: &mut Tape,
    store: &ParamStore,
    prefix: &str,
    dir: &str,
    order: &[usize],
    inputs: &[Var],
    hidden: usize,
) -> Result<Vec<Var>> {
    let w = t.param(store, &format!("{prefix}.{dir}.w"))?;
    let u = t.param(store, &format!("{prefix}.{dir}.u"))?;
    let b = t.param(store, &format!("{prefix}.{dir}.b"))?;
    let mut h = t.leaf(Array2::zeros((1, hidden)));
    let mut c = t.leaf(Array2::zeros((1, hidden)));
    let mut states = vec![h; inputs.len()];
    for &pos in order {
        let xw = t.linear(inputs[pos], w, b);
        let hu = t.matmul(h, u);
        let z = t.add(xw, hu);
        let zi = t.cols(z, 0, hidden);
        let zf = t.cols(z, hidden, hidden);
        let zo = t.cols(z, 2 * hidden, hidden);
        let zg = t.cols(z, 3 * hidden, hidden);
        let i = t.sigmoid(zi);
        let f = t.sigmoid(zf);
        let o = t.sigmoid(zo);
        let g = t.tanh(zg);
        let fc = t.mul(f, c);
        let ig = t.mul(i, g);
        c = t.add(fc, ig);
        let ct = t.tanh(c);
        h = t.mul(o, ct);
        states[pos] = h;
    }
    Ok(states)
}

/// Runs the BiLSTM registered under `prefix` over `inputs` (each 1 x d_in),
/// returning one 1 x 2H state per position.
pub fn bilstm_forward(
    t: &mut Tape,
    store: &ParamStore,
    prefix: &str,
    inputs: &[Var],
) -> Result<Vec<Var>> {
    let hidden = store.get(&format!("{prefix}.fwd.u"))?.nrows();
    let forward_order: Vec<usize> = (0..inputs.len()).collect();
    let backward_order: Vec<usize> = (0..inputs.len()).rev().collect();
    let fwd = run_direction(t, store, prefix, "fwd", &forward_order, inputs, hidden)?;
    let bwd = run_direction(t, store, prefix, "bwd", &backward_order, inputs, hidden)?;
    Ok(fwd
        .into_iter()
        .zip(bwd)
        .map(|(f, b)| t.concat_cols(&[f, b]))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::finite_difference_check;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy_inputs(t: &mut Tape, n: usize, d: usize) -> Vec<Var> {
        (0..n)
            .map(|i| {
                t.leaf(Array2::from_shape_fn((1, d), |(_, j)| {
                    ((i * 7 + j * 3) as f64 * 0.13).sin()
                }))
            })
            .collect()
    }

    #[test]
    fn output_shapes_and_determinism() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut store = ParamStore::new();
        init_bilstm(&mut store, "lstm", 3, 2, &mut rng).unwrap();
        let run = |store: &ParamStore| {
            let mut t = Tape::new();
            let inputs = toy_inputs(&mut t, 4, 3);
            let out = bilstm_forward(&mut t, store, "lstm", &inputs).unwrap();
            out.iter().map(|v| t.value(*v).clone()).collect::<Vec<_>>()
        };
        let a = run(&store);
        let b = run(&store);
        assert_eq!(a.len(), 4);
        assert!(a.iter().all(|v| v.dim() == (1, 4)));
        assert_eq!(a, b);
    }

    #[test]
    fn final_states_depend_on_both_directions() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut store = ParamStore::new();
        init_bilstm(&mut store, "lstm", 2, 3, &mut rng).unwrap();
        let mut t = Tape::new();
        let inputs = toy_inputs(&mut t, 3, 2);
        let out = bilstm_forward(&mut t, &store, "lstm", &inputs).unwrap();
        // First position's backward half sees the whole sequence; its
        // forward half sees only position 0, so halves must differ from the
        // last position's.
        let first = t.value(out[0]).clone();
        let last = t.value(out[2]).clone();
        assert_ne!(first, last);
    }

    #[test]
    fn gradients_match_finite_differences() {
        fn build(s: &ParamStore) -> (Tape, Var) {
            let mut t = Tape::new();
            let inputs = toy_inputs(&mut t, 3, 2);
            let out = bilstm_forward(&mut t, s, "lstm", &inputs).unwrap();
            let stacked = t.stack_rows(&out);
            let squashed = t.tanh(stacked);
            let loss = t.sum_all(squashed);
            (t, loss)
        }
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut store = ParamStore::new();
        init_bilstm(&mut store, "lstm", 2, 2, &mut rng).unwrap();
        let (tape, loss) = build(&store);
        let grads = tape.backward(loss).unwrap();
        let mut forward = |s: &ParamStore| {
            let (t, l) = build(s);
            Ok(t.scalar_value(l))
        };
        let report =
            finite_difference_check(&mut store, &grads, &mut forward, 1e-5, 6, &mut rng).unwrap();
        assert!(report.max_rel_err < 1e-6, "rel err {}", report.max_rel_err);
    }
}
