//! Minimal reverse-mode differentiation over dense `f64` matrices.
//!
//! A [`Graph`] records every operation of one forward pass. Parameters are
//! borrowed from a [`ParamStore`] rather than copied; [`Graph::backward`]
//! returns a gradient per parameter index.

use std::rc::Rc;

use serde::{Deserialize, Serialize};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "shape {rows}x{cols} vs {} values", data.len());
        Mat { rows, cols, data }
    }

    pub fn row_vector(data: Vec<f64>) -> Self {
        let cols = data.len();
        Mat::from_vec(1, cols, data)
    }

    pub fn scalar(v: f64) -> Self {
        Mat::from_vec(1, 1, vec![v])
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn add_assign(&mut self, other: &Mat) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    /// `self · other`
    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "matmul {:?} x {:?}", self.shape(), other.shape());
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let a_row = self.row(i);
            let o_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in o_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self · otherᵀ`
    pub fn matmul_t(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.cols, "matmul_t {:?} x {:?}ᵀ", self.shape(), other.shape());
        let mut out = Mat::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a_row = self.row(i);
            for j in 0..other.rows {
                out.data[i * other.rows + j] = dot(a_row, other.row(j));
            }
        }
        out
    }

    /// `selfᵀ · other`
    pub fn t_matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.rows, other.rows, "t_matmul {:?}ᵀ x {:?}", self.shape(), other.shape());
        let mut out = Mat::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            let b_row = other.row(k);
            for (i, &a) in self.row(k).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let o_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, &b) in o_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn softmax_row(x: &[f64], out: &mut [f64]) {
    let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &v) in out.iter_mut().zip(x) {
        *o = (v - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// Softmax over a slice.
pub fn softmax(x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    softmax_row(x, &mut out);
    out
}

/// Log-softmax over a slice.
pub fn log_softmax(x: &[f64]) -> Vec<f64> {
    let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + x.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    x.iter().map(|v| v - lse).collect()
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + GELU_A * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

const LN_EPS: f64 = 1e-5;

/// Named parameter matrices.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Mat>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Mat) -> ParamId {
        let name = name.into();
        debug_assert!(!self.names.contains(&name), "duplicate parameter {name}");
        self.names.push(name);
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Mat {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Mat {
        &mut self.values[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Mat)> {
        self.names
            .iter()
            .zip(&self.values)
            .enumerate()
            .map(|(i, (n, v))| (ParamId(i), n.as_str(), v))
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn element_count(&self) -> usize {
        self.values.iter().map(|m| m.data.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(Mat::is_finite)
    }

    pub fn zeros_like(&self) -> Vec<Mat> {
        self.values.iter().map(|m| Mat::zeros(m.rows, m.cols)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

enum Op {
    Input,
    Param(ParamId),
    MatMul(Var, Var),
    MatMulT(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    AddConst(Var),
    Scale(Var, f64),
    Gelu(Var),
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        xhat: Mat,
        inv_std: Vec<f64>,
    },
    Softmax(Var),
    LogSoftmax(Var),
    Rows(Var, Vec<usize>),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols(Var, usize),
    PickSum(Var, Vec<(usize, usize)>),
}

struct Node {
    value: Option<Mat>,
    op: Op,
}

/// One recorded forward pass.
pub struct Graph<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
}

impl<'p> Graph<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Graph {
            params,
            nodes: Vec::with_capacity(256),
        }
    }

    pub fn params(&self) -> &'p ParamStore {
        self.params
    }

    fn push(&mut self, value: Mat, op: Op) -> Var {
        self.nodes.push(Node {
            value: Some(value),
            op,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Mat {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(m), _) => m,
            (None, Op::Param(id)) => self.params.get(*id),
            _ => unreachable!("node without value"),
        }
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.value(v).shape()
    }

    pub fn input(&mut self, value: Mat) -> Var {
        self.push(value, Op::Input)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        self.nodes.push(Node {
            value: None,
            op: Op::Param(id),
        });
        Var(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    /// `a · bᵀ`
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul_t(self.value(b));
        self.push(v, Op::MatMulT(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let mut v = self.value(a).clone();
        v.add_assign(self.value(b));
        self.push(v, Op::Add(a, b))
    }

    /// Adds the `1 × c` row `b` to every row of `a`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Var {
        let bias = self.value(b);
        assert_eq!(bias.rows, 1);
        let mut v = self.value(a).clone();
        assert_eq!(v.cols, bias.cols);
        for r in 0..v.rows {
            for (o, &x) in v.row_mut(r).iter_mut().zip(&bias.data) {
                *o += x;
            }
        }
        self.push(v, Op::AddRow(a, b))
    }

    /// Adds a constant (non-differentiable) matrix, e.g. an attention mask.
    pub fn add_const(&mut self, a: Var, c: &Mat) -> Var {
        let mut v = self.value(a).clone();
        v.add_assign(c);
        self.push(v, Op::AddConst(a))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let mut v = self.value(a).clone();
        v.data.iter_mut().for_each(|x| *x *= s);
        self.push(v, Op::Scale(a, s))
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        let mut v = self.value(a).clone();
        v.data.iter_mut().for_each(|x| *x = gelu(*x));
        self.push(v, Op::Gelu(a))
    }

    /// Row-wise layer normalization with `1 × c` gain and bias.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Var {
        let xv = self.value(x);
        let (rows, cols) = xv.shape();
        let mut xhat = Mat::zeros(rows, cols);
        let mut inv_std = Vec::with_capacity(rows);
        for r in 0..rows {
            let row = xv.row(r);
            let mean = row.iter().sum::<f64>() / cols as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / cols as f64;
            let is = 1.0 / (var + LN_EPS).sqrt();
            for (o, &v) in xhat.row_mut(r).iter_mut().zip(row) {
                *o = (v - mean) * is;
            }
            inv_std.push(is);
        }
        let g = self.value(gain);
        let b = self.value(bias);
        let mut out = xhat.clone();
        for r in 0..rows {
            for ((o, &gv), &bv) in out.row_mut(r).iter_mut().zip(&g.data).zip(&b.data) {
                *o = *o * gv + bv;
            }
        }
        self.push(
            out,
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            },
        )
    }

    pub fn softmax(&mut self, a: Var) -> Var {
        let av = self.value(a);
        let mut v = Mat::zeros(av.rows, av.cols);
        for r in 0..av.rows {
            softmax_row(av.row(r), v.row_mut(r));
        }
        self.push(v, Op::Softmax(a))
    }

    pub fn log_softmax(&mut self, a: Var) -> Var {
        let av = self.value(a);
        let mut v = Mat::zeros(av.rows, av.cols);
        for r in 0..av.rows {
            let ls = log_softmax(av.row(r));
            v.row_mut(r).copy_from_slice(&ls);
        }
        self.push(v, Op::LogSoftmax(a))
    }

    /// Gathers rows of `a` (embedding lookup, state selection).
    pub fn rows(&mut self, a: Var, idx: &[usize]) -> Var {
        let av = self.value(a);
        let mut v = Mat::zeros(idx.len(), av.cols);
        for (r, &i) in idx.iter().enumerate() {
            v.row_mut(r).copy_from_slice(av.row(i));
        }
        self.push(v, Op::Rows(a, idx.to_vec()))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let rows = self.value(parts[0]).rows;
        let cols: usize = parts.iter().map(|&p| self.value(p).cols).sum();
        let mut v = Mat::zeros(rows, cols);
        for r in 0..rows {
            let mut c0 = 0;
            for &p in parts {
                let pv = self.value(p);
                assert_eq!(pv.rows, rows);
                v.row_mut(r)[c0..c0 + pv.cols].copy_from_slice(pv.row(r));
                c0 += pv.cols;
            }
        }
        self.push(v, Op::ConcatCols(parts.to_vec()))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let cols = self.value(parts[0]).cols;
        let mut data = Vec::new();
        for &p in parts {
            let pv = self.value(p);
            assert_eq!(pv.cols, cols);
            data.extend_from_slice(&pv.data);
        }
        let rows = data.len() / cols.max(1);
        self.push(Mat::from_vec(rows, cols, data), Op::ConcatRows(parts.to_vec()))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let av = self.value(a);
        let mut v = Mat::zeros(av.rows, len);
        for r in 0..av.rows {
            v.row_mut(r).copy_from_slice(&av.row(r)[start..start + len]);
        }
        self.push(v, Op::SliceCols(a, start))
    }

    /// Sum of selected `(row, col)` entries, as a `1 × 1` value.
    pub fn pick_sum(&mut self, a: Var, picks: &[(usize, usize)]) -> Var {
        let av = self.value(a);
        let s = picks.iter().map(|&(r, c)| av.at(r, c)).sum();
        self.push(Mat::scalar(s), Op::PickSum(a, picks.to_vec()))
    }

    /// Back-propagates from a `1 × 1` output; returns one gradient slot per
    /// parameter (`None` when the parameter was not used).
    pub fn backward(&self, out: Var) -> Vec<Option<Mat>> {
        assert_eq!(self.shape(out), (1, 1), "backward needs a scalar output");
        let mut grads: Vec<Option<Mat>> = (0..self.nodes.len()).map(|_| None).collect();
        let mut param_grads: Vec<Option<Mat>> = (0..self.params.len()).map(|_| None).collect();
        grads[out.0] = Some(Mat::scalar(1.0));

        for idx in (0..=out.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Input => {}
                Op::Param(id) => accumulate(&mut param_grads[id.0], g),
                Op::MatMul(a, b) => {
                    let da = g.matmul_t(self.value(*b));
                    let db = self.value(*a).t_matmul(&g);
                    accumulate(&mut grads[a.0], da);
                    accumulate(&mut grads[b.0], db);
                }
                Op::MatMulT(a, b) => {
                    // out = a bᵀ: da = g b, db = gᵀ a
                    let da = g.matmul(self.value(*b));
                    let db = g.t_matmul(self.value(*a));
                    accumulate(&mut grads[a.0], da);
                    accumulate(&mut grads[b.0], db);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads[a.0], g.clone());
                    accumulate(&mut grads[b.0], g);
                }
                Op::AddRow(a, b) => {
                    let mut db = Mat::zeros(1, g.cols);
                    for r in 0..g.rows {
                        for (o, &x) in db.data.iter_mut().zip(g.row(r)) {
                            *o += x;
                        }
                    }
                    accumulate(&mut grads[b.0], db);
                    accumulate(&mut grads[a.0], g);
                }
                Op::AddConst(a) => accumulate(&mut grads[a.0], g),
                Op::Scale(a, s) => {
                    let mut da = g;
                    da.data.iter_mut().for_each(|x| *x *= s);
                    accumulate(&mut grads[a.0], da);
                }
                Op::Gelu(a) => {
                    let x = self.value(*a);
                    let mut da = g;
                    for (d, &xv) in da.data.iter_mut().zip(&x.data) {
                        *d *= gelu_grad(xv);
                    }
                    accumulate(&mut grads[a.0], da);
                }
                Op::LayerNorm {
                    x,
                    gain,
                    bias,
                    xhat,
                    inv_std,
                } => {
                    let gv = self.value(*gain);
                    let (rows, cols) = g.shape();
                    let mut dgain = Mat::zeros(1, cols);
                    let mut dbias = Mat::zeros(1, cols);
                    let mut dx = Mat::zeros(rows, cols);
                    let mut dxhat = vec![0.0; cols];
                    for r in 0..rows {
                        let gr = g.row(r);
                        let xr = xhat.row(r);
                        for c in 0..cols {
                            dgain.data[c] += gr[c] * xr[c];
                            dbias.data[c] += gr[c];
                            dxhat[c] = gr[c] * gv.data[c];
                        }
                        let mean_d = dxhat.iter().sum::<f64>() / cols as f64;
                        let mean_dx = dot(&dxhat, xr) / cols as f64;
                        for (c, o) in dx.row_mut(r).iter_mut().enumerate() {
                            *o = inv_std[r] * (dxhat[c] - mean_d - xr[c] * mean_dx);
                        }
                    }
                    accumulate(&mut grads[gain.0], dgain);
                    accumulate(&mut grads[bias.0], dbias);
                    accumulate(&mut grads[x.0], dx);
                }
                Op::Softmax(a) => {
                    let y = node.value.as_ref().expect("softmax value");
                    let mut da = Mat::zeros(y.rows, y.cols);
                    for r in 0..y.rows {
                        let s = dot(g.row(r), y.row(r));
                        for ((o, &gy), &yy) in da.row_mut(r).iter_mut().zip(g.row(r)).zip(y.row(r)) {
                            *o = yy * (gy - s);
                        }
                    }
                    accumulate(&mut grads[a.0], da);
                }
                Op::LogSoftmax(a) => {
                    let y = node.value.as_ref().expect("log_softmax value");
                    let mut da = Mat::zeros(y.rows, y.cols);
                    for r in 0..y.rows {
                        let s: f64 = g.row(r).iter().sum();
                        for ((o, &gy), &ly) in da.row_mut(r).iter_mut().zip(g.row(r)).zip(y.row(r)) {
                            *o = gy - ly.exp() * s;
                        }
                    }
                    accumulate(&mut grads[a.0], da);
                }
                Op::Rows(a, idx) => {
                    let (rows, cols) = self.shape(*a);
                    let mut da = Mat::zeros(rows, cols);
                    for (r, &i) in idx.iter().enumerate() {
                        for (o, &x) in da.row_mut(i).iter_mut().zip(g.row(r)) {
                            *o += x;
                        }
                    }
                    accumulate(&mut grads[a.0], da);
                }
                Op::ConcatCols(parts) => {
                    let mut c0 = 0;
                    for p in parts {
                        let cols = self.shape(*p).1;
                        let mut dp = Mat::zeros(g.rows, cols);
                        for r in 0..g.rows {
                            dp.row_mut(r).copy_from_slice(&g.row(r)[c0..c0 + cols]);
                        }
                        c0 += cols;
                        accumulate(&mut grads[p.0], dp);
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut r0 = 0;
                    for p in parts {
                        let (rows, cols) = self.shape(*p);
                        let dp = Mat::from_vec(rows, cols, g.data[r0 * cols..(r0 + rows) * cols].to_vec());
                        r0 += rows;
                        accumulate(&mut grads[p.0], dp);
                    }
                }
                Op::SliceCols(a, start) => {
                    let (rows, cols) = self.shape(*a);
                    let mut da = Mat::zeros(rows, cols);
                    for r in 0..rows {
                        da.row_mut(r)[*start..*start + g.cols].copy_from_slice(g.row(r));
                    }
                    accumulate(&mut grads[a.0], da);
                }
                Op::PickSum(a, picks) => {
                    let (rows, cols) = self.shape(*a);
                    let mut da = Mat::zeros(rows, cols);
                    let s = g.data[0];
                    for &(r, c) in picks {
                        da.data[r * cols + c] += s;
                    }
                    accumulate(&mut grads[a.0], da);
                }
            }
        }
        param_grads
    }
}

fn accumulate(slot: &mut Option<Mat>, g: Mat) {
    match slot {
        Some(acc) => acc.add_assign(&g),
        None => *slot = Some(g),
    }
}

/// Causal mask: entry `(i, j)` is `-1e9` when `j > i + offset`.
pub fn causal_mask(rows: usize, cols: usize) -> Rc<Mat> {
    let mut m = Mat::zeros(rows, cols);
    for i in 0..rows {
        for j in (i + 1)..cols {
            m.data[i * cols + j] = -1e9;
        }
    }
    Rc::new(m)
}
