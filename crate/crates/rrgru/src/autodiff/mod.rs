//! Minimal reverse-mode differentiable array engine.
//!
//! A [`Graph`] records every [`Value`] created during one forward pass in
//! creation order, which is topological by construction: an operation can
//! only consume values that already exist. [`Graph::backward`] replays the
//! recording in reverse, accumulating adjoints into per-value gradients.
//!
//! All data is dense row-major `f64`. Vectors are column matrices `[d, 1]`.
//! There is no broadcasting; binary operations demand identical shapes.

mod gradcheck;

pub use gradcheck::{grad_check, grad_check_with, GradCheckReport, ParamSpec};

use crate::error::{Error, Result};

/// Handle to a node in a [`Graph`]. Cheap to copy; only valid for the graph
/// that created it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Value(usize);

impl Value {
    pub fn index(self) -> usize {
        self.0
    }
}

/// The producing operation of a non-leaf value.
#[derive(Debug, Clone)]
enum Op {
    MatMul(Value, Value),
    Add(Value, Value),
    Sub(Value, Value),
    Mul(Value, Value),
    Sigmoid(Value),
    Tanh(Value),
    OneMinus(Value),
    Softplus(Value),
    Scale(Value, f64),
    Shift(Value, f64),
    SoftmaxRow(Value),
    Concat(Vec<Value>),
    HStack(Vec<Value>),
    Transpose(Value),
    Col(Value, usize),
    Pick(Value, usize),
    Sum(Value),
    Dropout(Value, Vec<f64>),
}

struct Node {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    recipe: Option<Op>,
}

impl Node {
    fn len(&self) -> usize {
        self.rows * self.cols
    }
}

/// Topologically ordered recording of one forward pass.
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Vec<f64>>,
}

fn shape_str(rows: usize, cols: usize) -> String {
    format!("{}x{}", rows, cols)
}

impl Graph {
    pub fn new() -> Self {
        Graph {
            nodes: Vec::new(),
            grads: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, rows: usize, cols: usize, data: Vec<f64>, recipe: Option<Op>) -> Value {
        debug_assert_eq!(data.len(), rows * cols);
        self.grads.push(vec![0.0; data.len()]);
        self.nodes.push(Node {
            rows,
            cols,
            data,
            recipe,
        });
        Value(self.nodes.len() - 1)
    }

    /// Insert a leaf (parameter or input). Leaves have no recipe.
    pub fn leaf(&mut self, rows: usize, cols: usize, data: &[f64]) -> Result<Value> {
        if data.len() != rows * cols {
            return Err(Error::Contract(format!(
                "leaf data length {} does not match shape {}",
                data.len(),
                shape_str(rows, cols)
            )));
        }
        Ok(self.push(rows, cols, data.to_vec(), None))
    }

    /// Column vector leaf.
    pub fn leaf_vec(&mut self, data: &[f64]) -> Value {
        self.push(data.len(), 1, data.to_vec(), None)
    }

    pub fn shape(&self, v: Value) -> (usize, usize) {
        let n = &self.nodes[v.0];
        (n.rows, n.cols)
    }

    pub fn data(&self, v: Value) -> &[f64] {
        &self.nodes[v.0].data
    }

    pub fn grad(&self, v: Value) -> &[f64] {
        &self.grads[v.0]
    }

    pub fn is_leaf(&self, v: Value) -> bool {
        self.nodes[v.0].recipe.is_none()
    }

    /// Reset every gradient in the graph to exactly 0.0.
    pub fn zero_grad(&mut self) {
        for g in &mut self.grads {
            for x in g.iter_mut() {
                *x = 0.0;
            }
        }
    }

    // ── Operations ───────────────────────────────────────────────────

    /// Standard matrix product `[m,n] x [n,p] -> [m,p]`.
    pub fn matmul(&mut self, a: Value, b: Value) -> Result<Value> {
        let (m, n) = self.shape(a);
        let (n2, p) = self.shape(b);
        if n != n2 {
            return Err(Error::Shape {
                op: "matmul",
                lhs: shape_str(m, n),
                rhs: shape_str(n2, p),
            });
        }
        let mut out = vec![0.0; m * p];
        let ad = &self.nodes[a.0].data;
        let bd = &self.nodes[b.0].data;
        if p == 1 {
            // matrix-vector: contiguous row dot products
            for (o, arow) in out.iter_mut().zip(ad.chunks_exact(n)) {
                *o = arow.iter().zip(bd).map(|(x, y)| x * y).sum();
            }
        } else {
            for i in 0..m {
                let arow = &ad[i * n..(i + 1) * n];
                let orow = &mut out[i * p..(i + 1) * p];
                for (k, &aik) in arow.iter().enumerate() {
                    if aik == 0.0 {
                        continue;
                    }
                    let brow = &bd[k * p..(k + 1) * p];
                    for (o, &bkj) in orow.iter_mut().zip(brow) {
                        *o += aik * bkj;
                    }
                }
            }
        }
        Ok(self.push(m, p, out, Some(Op::MatMul(a, b))))
    }

    fn binary(&mut self, op: &'static str, a: Value, b: Value) -> Result<(usize, usize)> {
        let (ar, ac) = self.shape(a);
        let (br, bc) = self.shape(b);
        if (ar, ac) != (br, bc) {
            return Err(Error::Shape {
                op,
                lhs: shape_str(ar, ac),
                rhs: shape_str(br, bc),
            });
        }
        Ok((ar, ac))
    }

    pub fn add(&mut self, a: Value, b: Value) -> Result<Value> {
        let (r, c) = self.binary("add", a, b)?;
        let data = self.nodes[a.0]
            .data
            .iter()
            .zip(&self.nodes[b.0].data)
            .map(|(x, y)| x + y)
            .collect();
        Ok(self.push(r, c, data, Some(Op::Add(a, b))))
    }

    pub fn sub(&mut self, a: Value, b: Value) -> Result<Value> {
        let (r, c) = self.binary("sub", a, b)?;
        let data = self.nodes[a.0]
            .data
            .iter()
            .zip(&self.nodes[b.0].data)
            .map(|(x, y)| x - y)
            .collect();
        Ok(self.push(r, c, data, Some(Op::Sub(a, b))))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: Value, b: Value) -> Result<Value> {
        let (r, c) = self.binary("mul", a, b)?;
        let data = self.nodes[a.0]
            .data
            .iter()
            .zip(&self.nodes[b.0].data)
            .map(|(x, y)| x * y)
            .collect();
        Ok(self.push(r, c, data, Some(Op::Mul(a, b))))
    }

    fn unary(&mut self, x: Value, f: impl Fn(f64) -> f64, recipe: Op) -> Value {
        let (r, c) = self.shape(x);
        let data = self.nodes[x.0].data.iter().map(|&v| f(v)).collect();
        self.push(r, c, data, Some(recipe))
    }

    pub fn sigmoid(&mut self, x: Value) -> Value {
        self.unary(x, sigmoid, Op::Sigmoid(x))
    }

    pub fn tanh(&mut self, x: Value) -> Value {
        self.unary(x, f64::tanh, Op::Tanh(x))
    }

    /// `1 - x`, elementwise.
    pub fn one_minus(&mut self, x: Value) -> Value {
        self.unary(x, |v| 1.0 - v, Op::OneMinus(x))
    }

    /// `ln(1 + exp(x))`, evaluated without overflow for large `x`.
    pub fn softplus(&mut self, x: Value) -> Value {
        self.unary(x, softplus, Op::Softplus(x))
    }

    pub fn scale(&mut self, x: Value, c: f64) -> Value {
        self.unary(x, |v| c * v, Op::Scale(x, c))
    }

    pub fn shift(&mut self, x: Value, c: f64) -> Value {
        self.unary(x, |v| v + c, Op::Shift(x, c))
    }

    /// Numerically stabilized softmax over a `[1, T]` row vector.
    pub fn softmax_rowvec(&mut self, x: Value) -> Result<Value> {
        let (r, c) = self.shape(x);
        if r != 1 || c == 0 {
            return Err(Error::Contract(format!(
                "softmax_rowvec expects [1, T] with T >= 1, got {}",
                shape_str(r, c)
            )));
        }
        let xd = &self.nodes[x.0].data;
        let max = xd.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = xd.iter().map(|&v| (v - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        let data = exps.iter().map(|&e| e / sum).collect();
        Ok(self.push(1, c, data, Some(Op::SoftmaxRow(x))))
    }

    /// Stack column vectors `[d_i, 1]` into one column vector `[sum d_i, 1]`.
    pub fn concat(&mut self, parts: &[Value]) -> Result<Value> {
        if parts.is_empty() {
            return Err(Error::Contract("concat of zero parts".into()));
        }
        let mut data = Vec::new();
        for &p in parts {
            let (_, c) = self.shape(p);
            if c != 1 {
                let (r, c) = self.shape(p);
                return Err(Error::Contract(format!(
                    "concat expects column vectors, got {}",
                    shape_str(r, c)
                )));
            }
            data.extend_from_slice(&self.nodes[p.0].data);
        }
        let rows = data.len();
        Ok(self.push(rows, 1, data, Some(Op::Concat(parts.to_vec()))))
    }

    /// Stack `T` column vectors `[d, 1]` into a matrix `[d, T]`.
    pub fn hstack(&mut self, cols: &[Value]) -> Result<Value> {
        if cols.is_empty() {
            return Err(Error::Contract("hstack of zero columns".into()));
        }
        let (d, c0) = self.shape(cols[0]);
        if c0 != 1 {
            return Err(Error::Contract(format!(
                "hstack expects column vectors, got {}",
                shape_str(d, c0)
            )));
        }
        let t = cols.len();
        let mut data = vec![0.0; d * t];
        for (j, &v) in cols.iter().enumerate() {
            let (r, c) = self.shape(v);
            if (r, c) != (d, 1) {
                return Err(Error::Shape {
                    op: "hstack",
                    lhs: shape_str(d, 1),
                    rhs: shape_str(r, c),
                });
            }
            for i in 0..d {
                data[i * t + j] = self.nodes[v.0].data[i];
            }
        }
        Ok(self.push(d, t, data, Some(Op::HStack(cols.to_vec()))))
    }

    pub fn transpose(&mut self, x: Value) -> Value {
        let (r, c) = self.shape(x);
        let xd = &self.nodes[x.0].data;
        let mut data = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                data[j * r + i] = xd[i * c + j];
            }
        }
        self.push(c, r, data, Some(Op::Transpose(x)))
    }

    /// Column `j` of a matrix, as a `[rows, 1]` vector. Used for embedding
    /// lookup; backward scatters into that column only.
    pub fn col(&mut self, m: Value, j: usize) -> Result<Value> {
        let (r, c) = self.shape(m);
        if j >= c {
            return Err(Error::Contract(format!(
                "col index {} out of range for {}",
                j,
                shape_str(r, c)
            )));
        }
        let md = &self.nodes[m.0].data;
        let data = (0..r).map(|i| md[i * c + j]).collect();
        Ok(self.push(r, 1, data, Some(Op::Col(m, j))))
    }

    /// Single entry at flat index `i`, as a `[1, 1]` scalar.
    pub fn pick(&mut self, x: Value, i: usize) -> Result<Value> {
        let n = self.nodes[x.0].len();
        if i >= n {
            return Err(Error::Contract(format!(
                "pick index {} out of range for {} entries",
                i, n
            )));
        }
        let v = self.nodes[x.0].data[i];
        Ok(self.push(1, 1, vec![v], Some(Op::Pick(x, i))))
    }

    /// Sum of all entries, as a `[1, 1]` scalar.
    pub fn sum(&mut self, x: Value) -> Value {
        let s: f64 = self.nodes[x.0].data.iter().sum();
        self.push(1, 1, vec![s], Some(Op::Sum(x)))
    }

    /// Multiply by a fixed mask (inverted-dropout scaling baked into the
    /// mask). Backward multiplies by the same mask.
    pub fn dropout(&mut self, x: Value, mask: Vec<f64>) -> Result<Value> {
        let (r, c) = self.shape(x);
        if mask.len() != r * c {
            return Err(Error::Contract(format!(
                "dropout mask length {} does not match {}",
                mask.len(),
                shape_str(r, c)
            )));
        }
        let data = self.nodes[x.0]
            .data
            .iter()
            .zip(&mask)
            .map(|(x, m)| x * m)
            .collect();
        Ok(self.push(r, c, data, Some(Op::Dropout(x, mask))))
    }

    // ── Backward ─────────────────────────────────────────────────────

    /// Reverse sweep from a scalar loss. Every value's gradient receives
    /// `d loss / d value`; repeated calls without [`Graph::zero_grad`]
    /// accumulate.
    pub fn backward(&mut self, loss: Value) -> Result<()> {
        let node = &self.nodes[loss.0];
        if node.len() != 1 {
            return Err(Error::Contract(format!(
                "backward requires a scalar loss, got {}",
                shape_str(node.rows, node.cols)
            )));
        }
        let n = self.nodes.len();
        let mut adj: Vec<Vec<f64>> = Vec::with_capacity(n);
        for nd in &self.nodes {
            adj.push(vec![0.0; nd.len()]);
        }
        let mut live = vec![false; n];
        adj[loss.0][0] = 1.0;
        live[loss.0] = true;

        for i in (0..n).rev() {
            if !live[i] {
                continue;
            }
            let adj_i = std::mem::take(&mut adj[i]);
            for (g, a) in self.grads[i].iter_mut().zip(&adj_i) {
                *g += a;
            }
            let recipe = match &self.nodes[i].recipe {
                None => continue,
                Some(op) => op,
            };
            match recipe {
                Op::MatMul(a, b) => {
                    let (m, k) = (self.nodes[a.0].rows, self.nodes[a.0].cols);
                    let p = self.nodes[b.0].cols;
                    let ad = &self.nodes[a.0].data;
                    let bd = &self.nodes[b.0].data;
                    let (a_idx, b_idx) = (a.0, b.0);
                    if p == 1 {
                        // matvec: rank-one update for a, transposed dot for b
                        {
                            let mut da = std::mem::take(&mut adj[a_idx]);
                            for (row, &g) in da.chunks_exact_mut(k).zip(adj_i.iter()) {
                                if g == 0.0 {
                                    continue;
                                }
                                for (d, &x) in row.iter_mut().zip(bd) {
                                    *d += g * x;
                                }
                            }
                            adj[a_idx] = da;
                        }
                        {
                            let mut db = std::mem::take(&mut adj[b_idx]);
                            for (arow, &g) in ad.chunks_exact(k).zip(adj_i.iter()) {
                                if g == 0.0 {
                                    continue;
                                }
                                for (d, &x) in db.iter_mut().zip(arow) {
                                    *d += g * x;
                                }
                            }
                            adj[b_idx] = db;
                        }
                    } else {
                        // a.grad += out.grad * b^T
                        {
                            let mut da = std::mem::take(&mut adj[a_idx]);
                            for i2 in 0..m {
                                let grow = &adj_i[i2 * p..(i2 + 1) * p];
                                for k2 in 0..k {
                                    let brow = &bd[k2 * p..(k2 + 1) * p];
                                    let mut acc = 0.0;
                                    for (g, b) in grow.iter().zip(brow) {
                                        acc += g * b;
                                    }
                                    da[i2 * k + k2] += acc;
                                }
                            }
                            adj[a_idx] = da;
                        }
                        // b.grad += a^T * out.grad
                        {
                            let mut db = std::mem::take(&mut adj[b_idx]);
                            for i2 in 0..m {
                                let grow = &adj_i[i2 * p..(i2 + 1) * p];
                                for k2 in 0..k {
                                    let aik = ad[i2 * k + k2];
                                    if aik == 0.0 {
                                        continue;
                                    }
                                    let drow = &mut db[k2 * p..(k2 + 1) * p];
                                    for (d, g) in drow.iter_mut().zip(grow) {
                                        *d += aik * g;
                                    }
                                }
                            }
                            adj[b_idx] = db;
                        }
                    }
                    live[a_idx] = true;
                    live[b_idx] = true;
                }
                Op::Add(a, b) => {
                    for (d, g) in adj[a.0].iter_mut().zip(&adj_i) {
                        *d += g;
                    }
                    for (d, g) in adj[b.0].iter_mut().zip(&adj_i) {
                        *d += g;
                    }
                    live[a.0] = true;
                    live[b.0] = true;
                }
                Op::Sub(a, b) => {
                    for (d, g) in adj[a.0].iter_mut().zip(&adj_i) {
                        *d += g;
                    }
                    for (d, g) in adj[b.0].iter_mut().zip(&adj_i) {
                        *d -= g;
                    }
                    live[a.0] = true;
                    live[b.0] = true;
                }
                Op::Mul(a, b) => {
                    let (a_idx, b_idx) = (a.0, b.0);
                    {
                        let bd = &self.nodes[b_idx].data;
                        let mut da = std::mem::take(&mut adj[a_idx]);
                        for ((d, g), x) in da.iter_mut().zip(&adj_i).zip(bd) {
                            *d += g * x;
                        }
                        adj[a_idx] = da;
                    }
                    {
                        let ad = &self.nodes[a_idx].data;
                        let mut db = std::mem::take(&mut adj[b_idx]);
                        for ((d, g), x) in db.iter_mut().zip(&adj_i).zip(ad) {
                            *d += g * x;
                        }
                        adj[b_idx] = db;
                    }
                    live[a_idx] = true;
                    live[b_idx] = true;
                }
                Op::Sigmoid(x) => {
                    // out data holds s; s' = s (1 - s)
                    let out = &self.nodes[i].data;
                    let mut dx = std::mem::take(&mut adj[x.0]);
                    for ((d, g), &s) in dx.iter_mut().zip(&adj_i).zip(out) {
                        *d += g * s * (1.0 - s);
                    }
                    adj[x.0] = dx;
                    live[x.0] = true;
                }
                Op::Tanh(x) => {
                    let out = &self.nodes[i].data;
                    let mut dx = std::mem::take(&mut adj[x.0]);
                    for ((d, g), &t) in dx.iter_mut().zip(&adj_i).zip(out) {
                        *d += g * (1.0 - t * t);
                    }
                    adj[x.0] = dx;
                    live[x.0] = true;
                }
                Op::OneMinus(x) => {
                    for (d, g) in adj[x.0].iter_mut().zip(&adj_i) {
                        *d -= g;
                    }
                    live[x.0] = true;
                }
                Op::Softplus(x) => {
                    let xd = &self.nodes[x.0].data;
                    let mut dx = std::mem::take(&mut adj[x.0]);
                    for ((d, g), &v) in dx.iter_mut().zip(&adj_i).zip(xd) {
                        *d += g * sigmoid(v);
                    }
                    adj[x.0] = dx;
                    live[x.0] = true;
                }
                Op::Scale(x, c) => {
                    let c = *c;
                    for (d, g) in adj[x.0].iter_mut().zip(&adj_i) {
                        *d += g * c;
                    }
                    live[x.0] = true;
                }
                Op::Shift(x, _) => {
                    for (d, g) in adj[x.0].iter_mut().zip(&adj_i) {
                        *d += g;
                    }
                    live[x.0] = true;
                }
                Op::SoftmaxRow(x) => {
                    // dx_j = s_j (g_j - sum_i g_i s_i)
                    let s = &self.nodes[i].data;
                    let dot: f64 = adj_i.iter().zip(s).map(|(g, s)| g * s).sum();
                    let mut dx = std::mem::take(&mut adj[x.0]);
                    for ((d, g), &sj) in dx.iter_mut().zip(&adj_i).zip(s) {
                        *d += sj * (g - dot);
                    }
                    adj[x.0] = dx;
                    live[x.0] = true;
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let len = self.nodes[p.0].len();
                        for (d, g) in adj[p.0].iter_mut().zip(&adj_i[off..off + len]) {
                            *d += g;
                        }
                        live[p.0] = true;
                        off += len;
                    }
                }
                Op::HStack(cols) => {
                    let t = cols.len();
                    for (j, &v) in cols.iter().enumerate() {
                        let d_len = self.nodes[v.0].len();
                        let dv = &mut adj[v.0];
                        for r2 in 0..d_len {
                            dv[r2] += adj_i[r2 * t + j];
                        }
                        live[v.0] = true;
                    }
                }
                Op::Transpose(x) => {
                    let (r, c) = (self.nodes[x.0].rows, self.nodes[x.0].cols);
                    let dx = &mut adj[x.0];
                    for i2 in 0..r {
                        for j2 in 0..c {
                            dx[i2 * c + j2] += adj_i[j2 * r + i2];
                        }
                    }
                    live[x.0] = true;
                }
                Op::Col(m, j) => {
                    let (r, c) = (self.nodes[m.0].rows, self.nodes[m.0].cols);
                    let _ = r;
                    let dm = &mut adj[m.0];
                    for (i2, g) in adj_i.iter().enumerate() {
                        dm[i2 * c + j] += g;
                    }
                    live[m.0] = true;
                }
                Op::Pick(x, idx) => {
                    adj[x.0][*idx] += adj_i[0];
                    live[x.0] = true;
                }
                Op::Sum(x) => {
                    let g = adj_i[0];
                    for d in adj[x.0].iter_mut() {
                        *d += g;
                    }
                    live[x.0] = true;
                }
                Op::Dropout(x, mask) => {
                    let mut dx = std::mem::take(&mut adj[x.0]);
                    for ((d, g), m) in dx.iter_mut().zip(&adj_i).zip(mask) {
                        *d += g * m;
                    }
                    adj[x.0] = dx;
                    live[x.0] = true;
                }
            }
        }
        Ok(())
    }
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}
