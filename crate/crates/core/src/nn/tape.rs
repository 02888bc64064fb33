//! Reverse-mode automatic differentiation over 2-d float tensors.
//!
//! A `Tape` records every operation applied to `Var` handles; `backward`
//! replays the record in reverse and returns gradients for named parameter
//! leaves. Values use the row-vector convention: a single item is 1 x d and
//! a linear map is `x . W + b` with W of shape d_in x d_out.
//!
//! Node ids grow monotonically, so reverse insertion order is a valid
//! reverse topological order; parents always precede children.

use std::collections::BTreeMap;

use ndarray::{Array2, Axis};

use crate::error::{Error, Result};
use crate::nn::params::ParamStore;

/// Handle to a tape node. Only valid for the tape that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

enum Op {
    Leaf { name: Option<String> },
    Matmul(usize, usize),
    Add(usize, usize),
    /// Broadcast add of a 1 x d row onto every row of an n x d matrix.
    AddRow(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    /// Column-wise concatenation.
    Concat(Vec<usize>),
    /// Row gather; duplicate indices accumulate on the way back.
    Rows { src: usize, idx: Vec<usize> },
    /// Contiguous column slice.
    Cols { src: usize, start: usize, len: usize },
    /// Row-wise softmax.
    Softmax(usize),
    /// ln(max(x, eps)), elementwise.
    LogClamp { src: usize, eps: f64 },
    Sigmoid(usize),
    Tanh(usize),
    LeakyRelu { src: usize, slope: f64 },
    Transpose(usize),
    /// Sum of all entries, to a 1 x 1 scalar.
    SumAll(usize),
    /// Elementwise sum of same-shaped inputs.
    AddN(Vec<usize>),
    /// Stack k inputs of shape 1 x d into k x d.
    StackRows(Vec<usize>),
}

struct Node {
    value: Array2<f64>,
    op: Op,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    param_index: BTreeMap<String, usize>,
}

impl Tape {
    pub fn new() -> Tape {
        Tape::default()
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    pub fn scalar_value(&self, v: Var) -> f64 {
        let val = self.value(v);
        debug_assert_eq!(val.dim(), (1, 1));
        val[[0, 0]]
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.dim()
    }

    /// Constant input; no gradient is reported for it.
    pub fn leaf(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf { name: None })
    }

    /// Parameter leaf backed by `store`. Repeated calls with the same name
    /// return the same node, so shared parameters accumulate gradient.
    pub fn param(&mut self, store: &ParamStore, name: &str) -> Result<Var> {
        if let Some(&id) = self.param_index.get(name) {
            return Ok(Var(id));
        }
        let value = store.get(name)?.clone();
        let var = self.push(value, Op::Leaf { name: Some(name.to_string()) });
        self.param_index.insert(name.to_string(), var.0);
        Ok(var)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (ra, ca) = self.shape(a);
        let (rb, cb) = self.shape(b);
        assert_eq!(ca, rb, "matmul inner dims {ra}x{ca} . {rb}x{cb}");
        let value = self.nodes[a.0].value.dot(&self.nodes[b.0].value);
        self.push(value, Op::Matmul(a.0, b.0))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "add shape mismatch");
        let value = &self.nodes[a.0].value + &self.nodes[b.0].value;
        self.push(value, Op::Add(a.0, b.0))
    }

    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let (_, ca) = self.shape(a);
        let (rr, cr) = self.shape(row);
        assert_eq!((rr, cr), (1, ca), "add_row wants a 1x{ca} row");
        let value = &self.nodes[a.0].value + &self.nodes[row.0].value;
        self.push(value, Op::AddRow(a.0, row.0))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "mul shape mismatch");
        let value = &self.nodes[a.0].value * &self.nodes[b.0].value;
        self.push(value, Op::Mul(a.0, b.0))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let value = &self.nodes[a.0].value * c;
        self.push(value, Op::Scale(a.0, c))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty());
        let rows = self.shape(parts[0]).0;
        assert!(parts.iter().all(|p| self.shape(*p).0 == rows));
        let views: Vec<_> = parts.iter().map(|p| self.nodes[p.0].value.view()).collect();
        let value = ndarray::concatenate(Axis(1), &views).expect("concat shapes checked");
        self.push(value, Op::Concat(parts.iter().map(|p| p.0).collect()))
    }

    pub fn rows(&mut self, src: Var, idx: &[usize]) -> Var {
        let (n, _) = self.shape(src);
        assert!(idx.iter().all(|&i| i < n), "row index out of range");
        let value = self.nodes[src.0].value.select(Axis(0), idx);
        self.push(value, Op::Rows { src: src.0, idx: idx.to_vec() })
    }

    pub fn cols(&mut self, src: Var, start: usize, len: usize) -> Var {
        let (_, c) = self.shape(src);
        assert!(start + len <= c, "column slice out of range");
        let value = self.nodes[src.0]
            .value
            .slice(ndarray::s![.., start..start + len])
            .to_owned();
        self.push(value, Op::Cols { src: src.0, start, len })
    }

    pub fn softmax(&mut self, a: Var) -> Var {
        let x = &self.nodes[a.0].value;
        let mut value = x.clone();
        for mut row in value.rows_mut() {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            row.mapv_inplace(|v| (v - max).exp());
            let sum: f64 = row.sum();
            row.mapv_inplace(|v| v / sum);
        }
        self.push(value, Op::Softmax(a.0))
    }

    pub fn log_clamp(&mut self, a: Var, eps: f64) -> Var {
        assert!(eps > 0.0);
        let value = self.nodes[a.0].value.mapv(|v| v.max(eps).ln());
        self.push(value, Op::LogClamp { src: a.0, eps })
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.nodes[a.0].value.mapv(|v| 1.0 / (1.0 + (-v).exp()));
        self.push(value, Op::Sigmoid(a.0))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.nodes[a.0].value.mapv(f64::tanh);
        self.push(value, Op::Tanh(a.0))
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let value = self.nodes[a.0].value.mapv(|v| if v >= 0.0 { v } else { slope * v });
        self.push(value, Op::LeakyRelu { src: a.0, slope })
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.nodes[a.0].value.t().to_owned();
        self.push(value, Op::Transpose(a.0))
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let value = Array2::from_elem((1, 1), self.nodes[a.0].value.sum());
        self.push(value, Op::SumAll(a.0))
    }

    pub fn add_n(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty());
        let shape = self.shape(parts[0]);
        assert!(parts.iter().all(|p| self.shape(*p) == shape));
        let mut value = self.nodes[parts[0].0].value.clone();
        for p in &parts[1..] {
            value += &self.nodes[p.0].value;
        }
        self.push(value, Op::AddN(parts.iter().map(|p| p.0).collect()))
    }

    pub fn stack_rows(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty());
        let d = self.shape(parts[0]).1;
        assert!(parts.iter().all(|p| self.shape(*p) == (1, d)));
        let mut value = Array2::zeros((parts.len(), d));
        for (i, p) in parts.iter().enumerate() {
            value.row_mut(i).assign(&self.nodes[p.0].value.row(0));
        }
        self.push(value, Op::StackRows(parts.iter().map(|p| p.0).collect()))
    }

    /// `x . w + b` with x n x d_in, w d_in x d_out, b 1 x d_out.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Var {
        let xw = self.matmul(x, w);
        self.add_row(xw, b)
    }

    /// Mean of all rows, to a 1 x d row.
    pub fn mean_rows(&mut self, x: Var) -> Var {
        let (n, _) = self.shape(x);
        assert!(n > 0);
        let weights = self.leaf(Array2::from_elem((1, n), 1.0 / n as f64));
        self.matmul(weights, x)
    }

    /// Gradients of a 1 x 1 `root` with respect to every named parameter
    /// leaf reachable from it.
    pub fn backward(&self, root: Var) -> Result<BTreeMap<String, Array2<f64>>> {
        if self.shape(root) != (1, 1) {
            return Err(Error::dimension(format!(
                "backward root must be 1x1, got {:?}",
                self.shape(root)
            )));
        }
        let mut grads: Vec<Option<Array2<f64>>> = Vec::new();
        grads.resize_with(self.nodes.len(), || None);
        grads[root.0] = Some(Array2::ones((1, 1)));
        let mut out: BTreeMap<String, Array2<f64>> = BTreeMap::new();

        fn acc(slot: &mut Option<Array2<f64>>, delta: Array2<f64>) {
            match slot {
                Some(g) => *g += &delta,
                None => *slot = Some(delta),
            }
        }

        for id in (0..=root.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            match &self.nodes[id].op {
                Op::Leaf { name } => {
                    if let Some(name) = name {
                        match out.get_mut(name) {
                            Some(total) => *total += &g,
                            None => {
                                out.insert(name.clone(), g);
                            }
                        }
                    }
                }
                Op::Matmul(a, b) => {
                    let da = g.dot(&self.nodes[*b].value.t());
                    let db = self.nodes[*a].value.t().dot(&g);
                    acc(&mut grads[*a], da);
                    acc(&mut grads[*b], db);
                }
                Op::Add(a, b) => {
                    acc(&mut grads[*a], g.clone());
                    acc(&mut grads[*b], g);
                }
                Op::AddRow(a, row) => {
                    let drow = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    acc(&mut grads[*a], g);
                    acc(&mut grads[*row], drow);
                }
                Op::Mul(a, b) => {
                    let da = &g * &self.nodes[*b].value;
                    let db = &g * &self.nodes[*a].value;
                    acc(&mut grads[*a], da);
                    acc(&mut grads[*b], db);
                }
                Op::Scale(a, c) => {
                    acc(&mut grads[*a], &g * *c);
                }
                Op::Concat(parts) => {
                    let mut start = 0;
                    for p in parts {
                        let w = self.nodes[*p].value.ncols();
                        let slice = g.slice(ndarray::s![.., start..start + w]).to_owned();
                        acc(&mut grads[*p], slice);
                        start += w;
                    }
                }
                Op::Rows { src, idx } => {
                    let mut dsrc = Array2::zeros(self.nodes[*src].value.dim());
                    for (gi, &si) in idx.iter().enumerate() {
                        let mut row = dsrc.row_mut(si);
                        row += &g.row(gi);
                    }
                    acc(&mut grads[*src], dsrc);
                }
                Op::Cols { src, start, len } => {
                    let mut dsrc = Array2::zeros(self.nodes[*src].value.dim());
                    dsrc.slice_mut(ndarray::s![.., *start..*start + *len]).assign(&g);
                    acc(&mut grads[*src], dsrc);
                }
                Op::Softmax(a) => {
                    let y = &self.nodes[id].value;
                    let mut dx = Array2::zeros(y.dim());
                    for r in 0..y.nrows() {
                        let dot: f64 = (0..y.ncols()).map(|c| g[[r, c]] * y[[r, c]]).sum();
                        for c in 0..y.ncols() {
                            dx[[r, c]] = y[[r, c]] * (g[[r, c]] - dot);
                        }
                    }
                    acc(&mut grads[*a], dx);
                }
                Op::LogClamp { src, eps } => {
                    let x = &self.nodes[*src].value;
                    let mut dx = g;
                    ndarray::Zip::from(&mut dx).and(x).for_each(|d, &xv| {
                        *d = if xv >= *eps { *d / xv } else { 0.0 };
                    });
                    acc(&mut grads[*src], dx);
                }
                Op::Sigmoid(a) => {
                    let y = &self.nodes[id].value;
                    let dx = &g * &y.mapv(|v| v * (1.0 - v));
                    acc(&mut grads[*a], dx);
                }
                Op::Tanh(a) => {
                    let y = &self.nodes[id].value;
                    let dx = &g * &y.mapv(|v| 1.0 - v * v);
                    acc(&mut grads[*a], dx);
                }
                Op::LeakyRelu { src, slope } => {
                    let x = &self.nodes[*src].value;
                    let mut dx = g;
                    ndarray::Zip::from(&mut dx).and(x).for_each(|d, &xv| {
                        if xv < 0.0 {
                            *d *= *slope;
                        }
                    });
                    acc(&mut grads[*src], dx);
                }
                Op::Transpose(a) => {
                    acc(&mut grads[*a], g.t().to_owned());
                }
                Op::SumAll(a) => {
                    let shape = self.nodes[*a].value.dim();
                    acc(&mut grads[*a], Array2::from_elem(shape, g[[0, 0]]));
                }
                Op::AddN(parts) => {
                    for p in parts {
                        acc(&mut grads[*p], g.clone());
                    }
                }
                Op::StackRows(parts) => {
                    for (i, p) in parts.iter().enumerate() {
                        let row = g.row(i).to_owned().insert_axis(Axis(0));
                        acc(&mut grads[*p], row);
                    }
                }
            }
        }
        Ok(out)
    }
}
