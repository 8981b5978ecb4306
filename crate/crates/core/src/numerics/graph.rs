use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{NumericsError, Tensor};

/// Handle to a node recorded on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Constant,
    Param,
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceRows(Var, usize),
    SliceCols(Var, usize),
    Transpose(Var),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Log(Var),
    Softmax(Var, usize),
    LogSoftmax(Var),
    GatherRows(Var, Vec<usize>),
    GatherElems(Var, Vec<(usize, usize)>),
    Dropout(Var, Tensor),
    Sum(Var),
    Mean(Var),
    LogSumExp(Var),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Constant => "constant",
            Op::Param => "param",
            Op::MatMul(..) => "matmul",
            Op::Add(..) => "add",
            Op::AddRow(..) => "add_row",
            Op::Mul(..) => "mul",
            Op::Scale(..) => "scale",
            Op::ConcatCols(_) => "concat_cols",
            Op::ConcatRows(_) => "concat_rows",
            Op::SliceRows(..) => "slice_rows",
            Op::SliceCols(..) => "slice_cols",
            Op::Transpose(_) => "transpose",
            Op::Sigmoid(_) => "sigmoid",
            Op::Tanh(_) => "tanh",
            Op::Relu(_) => "relu",
            Op::Log(_) => "log",
            Op::Softmax(..) => "softmax",
            Op::LogSoftmax(_) => "log_softmax",
            Op::GatherRows(..) => "gather_rows",
            Op::GatherElems(..) => "gather_elems",
            Op::Dropout(..) => "dropout",
            Op::Sum(_) => "sum",
            Op::Mean(_) => "mean",
            Op::LogSumExp(_) => "logsumexp",
        }
    }
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    value: Tensor,
}

/// Append-only record of primitive applications.
///
/// Node ids are insertion indices, so insertion order is a topological
/// order and the graph is acyclic by construction. Parameter leaves are
/// deduplicated by name: asking for the same parameter twice yields the same
/// node, which makes gradient accumulation per parameter automatic.
pub struct Graph {
    nodes: Vec<Node>,
    params: HashMap<String, Var>,
    training: bool,
    rng: ChaCha8Rng,
}

/// Gradient of a scalar loss with respect to every node of a graph.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }
}

fn check_same(op: &'static str, a: &Tensor, b: &Tensor) -> Result<(), NumericsError> {
    if a.shape() != b.shape() {
        return Err(NumericsError::ShapeMismatch {
            op,
            left: a.shape().to_vec(),
            right: b.shape().to_vec(),
        });
    }
    Ok(())
}

fn softmax_row(row: &[f64], out: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, &x) in out.iter_mut().zip(row) {
        *o = (x - max).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

fn logsumexp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

impl Graph {
    /// A graph in evaluation mode (dropout disabled).
    pub fn new(seed: u64) -> Self {
        Graph {
            nodes: Vec::new(),
            params: HashMap::new(),
            training: false,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn training(seed: u64) -> Self {
        let mut g = Graph::new(seed);
        g.training = true;
        g
    }

    pub fn is_training(&self) -> bool {
        self.training
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    fn push(&mut self, op: Op, value: Tensor) -> Result<Var, NumericsError> {
        if !value.is_finite() {
            return Err(NumericsError::NonFinite(op.name()));
        }
        self.nodes.push(Node { op, value });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn constant(&mut self, value: Tensor) -> Result<Var, NumericsError> {
        self.push(Op::Constant, value)
    }

    /// Leaf for a named trainable parameter. Repeated calls with the same
    /// name return the node created by the first call.
    pub fn param(&mut self, name: &str, value: &Tensor) -> Result<Var, NumericsError> {
        if let Some(&v) = self.params.get(name) {
            return Ok(v);
        }
        let v = self.push(Op::Param, value.clone())?;
        self.params.insert(name.to_string(), v);
        Ok(v)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        let out = self.value(a).matmul(self.value(b))?;
        self.push(Op::MatMul(a, b), out)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        let (ta, tb) = (self.value(a), self.value(b));
        check_same("add", ta, tb)?;
        let out = ta.zip_map(tb, |x, y| x + y);
        self.push(Op::Add(a, b), out)
    }

    /// Adds the `1 x c` row `b` to every row of `a`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if tb.rows() != 1 || tb.cols() != ta.cols() {
            return Err(NumericsError::ShapeMismatch {
                op: "add_row",
                left: ta.shape().to_vec(),
                right: tb.shape().to_vec(),
            });
        }
        let mut out = ta.clone();
        let c = ta.cols();
        for (i, v) in out.data_mut().iter_mut().enumerate() {
            *v += tb.data()[i % c];
        }
        self.push(Op::AddRow(a, b), out)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        let (ta, tb) = (self.value(a), self.value(b));
        check_same("mul", ta, tb)?;
        let out = ta.zip_map(tb, |x, y| x * y);
        self.push(Op::Mul(a, b), out)
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var, NumericsError> {
        let out = self.value(a).map(|x| x * factor);
        self.push(Op::Scale(a, factor), out)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        let nb = self.scale(b, -1.0)?;
        self.add(a, nb)
    }

    /// Horizontal concatenation: all inputs share a row count.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, NumericsError> {
        let rows = match parts.first() {
            Some(&p) => self.value(p).rows(),
            None => {
                return Err(NumericsError::ShapeMismatch {
                    op: "concat_cols",
                    left: vec![],
                    right: vec![],
                })
            }
        };
        let mut total = 0;
        for &p in parts {
            let t = self.value(p);
            if t.rows() != rows {
                return Err(NumericsError::ShapeMismatch {
                    op: "concat_cols",
                    left: vec![rows],
                    right: t.shape().to_vec(),
                });
            }
            total += t.cols();
        }
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row_slice(r));
            }
        }
        let out = Tensor::new(rows, total, data)?;
        self.push(Op::ConcatCols(parts.to_vec()), out)
    }

    /// Vertical concatenation: all inputs share a column count.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var, NumericsError> {
        let cols = match parts.first() {
            Some(&p) => self.value(p).cols(),
            None => {
                return Err(NumericsError::ShapeMismatch {
                    op: "concat_rows",
                    left: vec![],
                    right: vec![],
                })
            }
        };
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let t = self.value(p);
            if t.cols() != cols {
                return Err(NumericsError::ShapeMismatch {
                    op: "concat_rows",
                    left: vec![cols],
                    right: t.shape().to_vec(),
                });
            }
            rows += t.rows();
            data.extend_from_slice(t.data());
        }
        let out = Tensor::new(rows, cols, data)?;
        self.push(Op::ConcatRows(parts.to_vec()), out)
    }

    /// Rows `start..end` of `a`.
    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Result<Var, NumericsError> {
        let t = self.value(a);
        if start >= end || end > t.rows() {
            return Err(NumericsError::ShapeMismatch {
                op: "slice_rows",
                left: t.shape().to_vec(),
                right: vec![start, end],
            });
        }
        let c = t.cols();
        let out = Tensor::new(end - start, c, t.data()[start * c..end * c].to_vec())?;
        self.push(Op::SliceRows(a, start), out)
    }

    /// Columns `start..end` of `a`.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var, NumericsError> {
        let t = self.value(a);
        if start >= end || end > t.cols() {
            return Err(NumericsError::ShapeMismatch {
                op: "slice_cols",
                left: t.shape().to_vec(),
                right: vec![start, end],
            });
        }
        let mut data = Vec::with_capacity(t.rows() * (end - start));
        for r in 0..t.rows() {
            data.extend_from_slice(&t.row_slice(r)[start..end]);
        }
        let out = Tensor::new(t.rows(), end - start, data)?;
        self.push(Op::SliceCols(a, start), out)
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var, NumericsError> {
        let out = self.value(a).transpose();
        self.push(Op::Transpose(a), out)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var, NumericsError> {
        let out = self.value(a).map(|x| {
            if x >= 0.0 {
                1.0 / (1.0 + (-x).exp())
            } else {
                let e = x.exp();
                e / (1.0 + e)
            }
        });
        self.push(Op::Sigmoid(a), out)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var, NumericsError> {
        let out = self.value(a).map(f64::tanh);
        self.push(Op::Tanh(a), out)
    }

    pub fn relu(&mut self, a: Var) -> Result<Var, NumericsError> {
        let out = self.value(a).map(|x| x.max(0.0));
        self.push(Op::Relu(a), out)
    }

    pub fn log(&mut self, a: Var) -> Result<Var, NumericsError> {
        let out = self.value(a).map(f64::ln);
        self.push(Op::Log(a), out)
    }

    /// Softmax along `axis`: `1` normalises each row, `0` each column.
    pub fn softmax(&mut self, a: Var, axis: usize) -> Result<Var, NumericsError> {
        let t = self.value(a);
        let out = match axis {
            1 => {
                let mut out = Tensor::zeros(t.rows(), t.cols());
                let c = t.cols();
                for r in 0..t.rows() {
                    softmax_row(t.row_slice(r), &mut out.data_mut()[r * c..(r + 1) * c]);
                }
                out
            }
            0 => {
                let tt = t.transpose();
                let mut out = Tensor::zeros(tt.rows(), tt.cols());
                let c = tt.cols();
                for r in 0..tt.rows() {
                    softmax_row(tt.row_slice(r), &mut out.data_mut()[r * c..(r + 1) * c]);
                }
                out.transpose()
            }
            _ => return Err(NumericsError::BadAxis(axis)),
        };
        self.push(Op::Softmax(a, axis), out)
    }

    /// Row-wise log-softmax.
    pub fn log_softmax(&mut self, a: Var) -> Result<Var, NumericsError> {
        let t = self.value(a);
        let mut out = t.clone();
        let c = t.cols();
        for r in 0..t.rows() {
            let lse = logsumexp(t.row_slice(r));
            for v in &mut out.data_mut()[r * c..(r + 1) * c] {
                *v -= lse;
            }
        }
        self.push(Op::LogSoftmax(a), out)
    }

    /// Rows of `a` selected by `indices` (embedding lookup).
    pub fn gather_rows(&mut self, a: Var, indices: &[usize]) -> Result<Var, NumericsError> {
        let t = self.value(a);
        let c = t.cols();
        let mut data = Vec::with_capacity(indices.len() * c);
        for &i in indices {
            if i >= t.rows() {
                return Err(NumericsError::IndexOutOfRange {
                    op: "gather_rows",
                    index: i,
                    len: t.rows(),
                });
            }
            data.extend_from_slice(t.row_slice(i));
        }
        let out = Tensor::new(indices.len(), c, data)?;
        self.push(Op::GatherRows(a, indices.to_vec()), out)
    }

    pub fn embedding_lookup(&mut self, table: Var, ids: &[usize]) -> Result<Var, NumericsError> {
        self.gather_rows(table, ids)
    }

    /// Individual entries `(row, col)` of `a`, returned as a `1 x k` row.
    pub fn gather_elems(&mut self, a: Var, at: &[(usize, usize)]) -> Result<Var, NumericsError> {
        let t = self.value(a);
        let mut data = Vec::with_capacity(at.len());
        for &(r, c) in at {
            if r >= t.rows() || c >= t.cols() {
                return Err(NumericsError::IndexOutOfRange {
                    op: "gather_elems",
                    index: r * t.cols() + c,
                    len: t.len(),
                });
            }
            data.push(t.get(r, c));
        }
        let out = Tensor::new(1, at.len(), data)?;
        self.push(Op::GatherElems(a, at.to_vec()), out)
    }

    /// Inverted dropout; identity when the graph is not in training mode or
    /// `p == 0`.
    pub fn dropout(&mut self, a: Var, p: f64) -> Result<Var, NumericsError> {
        if !self.training || p <= 0.0 {
            return Ok(a);
        }
        if p >= 1.0 {
            return Err(NumericsError::BadDropout(p));
        }
        let t = self.value(a);
        let (rows, cols) = (t.rows(), t.cols());
        let keep = 1.0 / (1.0 - p);
        let mask: Vec<f64> = (0..rows * cols)
            .map(|_| if self.rng.random::<f64>() < p { 0.0 } else { keep })
            .collect();
        let mask = Tensor::new(rows, cols, mask)?;
        let out = self.value(a).zip_map(&mask, |x, m| x * m);
        self.push(Op::Dropout(a, mask), out)
    }

    pub fn sum(&mut self, a: Var) -> Result<Var, NumericsError> {
        let out = Tensor::scalar(self.value(a).sum());
        self.push(Op::Sum(a), out)
    }

    pub fn mean(&mut self, a: Var) -> Result<Var, NumericsError> {
        let t = self.value(a);
        if t.is_empty() {
            return Err(NumericsError::ShapeMismatch {
                op: "mean",
                left: t.shape().to_vec(),
                right: vec![],
            });
        }
        let out = Tensor::scalar(t.sum() / t.len() as f64);
        self.push(Op::Mean(a), out)
    }

    /// `log(sum(exp(a)))` over all entries.
    pub fn logsumexp(&mut self, a: Var) -> Result<Var, NumericsError> {
        let out = Tensor::scalar(logsumexp(self.value(a).data()));
        self.push(Op::LogSumExp(a), out)
    }

    /// Reverse pass from a scalar node.
    pub fn backward(&self, loss: Var) -> Result<Gradients, NumericsError> {
        let shape = self.value(loss).shape();
        if shape != [1, 1] {
            return Err(NumericsError::NonScalarLoss(shape.to_vec()));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::scalar(1.0));

        fn acc(grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&g),
                slot @ None => *slot = Some(g),
            }
        }

        for id in (0..=loss.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            let y = &node.value;
            match &node.op {
                Op::Constant | Op::Param => {}
                Op::MatMul(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    acc(&mut grads, *a, g.matmul_t(tb));
                    acc(&mut grads, *b, ta.t_matmul(&g));
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *b, g.clone());
                }
                Op::AddRow(a, b) => {
                    let c = g.cols();
                    let mut gb = Tensor::zeros(1, c);
                    for r in 0..g.rows() {
                        for (o, v) in gb.data_mut().iter_mut().zip(g.row_slice(r)) {
                            *o += v;
                        }
                    }
                    acc(&mut grads, *b, gb);
                    acc(&mut grads, *a, g.clone());
                }
                Op::Mul(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    acc(&mut grads, *a, g.zip_map(tb, |x, y| x * y));
                    acc(&mut grads, *b, g.zip_map(ta, |x, y| x * y));
                }
                Op::Scale(a, f) => acc(&mut grads, *a, g.map(|x| x * f)),
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let pc = self.value(p).cols();
                        let mut data = Vec::with_capacity(g.rows() * pc);
                        for r in 0..g.rows() {
                            data.extend_from_slice(&g.row_slice(r)[offset..offset + pc]);
                        }
                        acc(&mut grads, p, Tensor::new(g.rows(), pc, data)?);
                        offset += pc;
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    let c = g.cols();
                    for &p in parts {
                        let pr = self.value(p).rows();
                        let data = g.data()[offset * c..(offset + pr) * c].to_vec();
                        acc(&mut grads, p, Tensor::new(pr, c, data)?);
                        offset += pr;
                    }
                }
                Op::SliceRows(a, start) => {
                    let ta = self.value(*a);
                    let mut ga = Tensor::zeros(ta.rows(), ta.cols());
                    let c = ta.cols();
                    ga.data_mut()[start * c..start * c + g.len()].copy_from_slice(g.data());
                    acc(&mut grads, *a, ga);
                }
                Op::SliceCols(a, start) => {
                    let ta = self.value(*a);
                    let mut ga = Tensor::zeros(ta.rows(), ta.cols());
                    for r in 0..g.rows() {
                        for (j, v) in g.row_slice(r).iter().enumerate() {
                            ga.set(r, start + j, *v);
                        }
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::Transpose(a) => acc(&mut grads, *a, g.transpose()),
                Op::Sigmoid(a) => acc(&mut grads, *a, g.zip_map(y, |d, s| d * s * (1.0 - s))),
                Op::Tanh(a) => acc(&mut grads, *a, g.zip_map(y, |d, t| d * (1.0 - t * t))),
                Op::Relu(a) => {
                    let x = self.value(*a);
                    acc(&mut grads, *a, g.zip_map(x, |d, v| if v > 0.0 { d } else { 0.0 }));
                }
                Op::Log(a) => {
                    let x = self.value(*a);
                    acc(&mut grads, *a, g.zip_map(x, |d, v| d / v));
                }
                Op::Softmax(a, axis) => {
                    let (gg, yy) = if *axis == 1 {
                        (g.clone(), y.clone())
                    } else {
                        (g.transpose(), y.transpose())
                    };
                    let c = yy.cols();
                    let mut ga = Tensor::zeros(yy.rows(), c);
                    for r in 0..yy.rows() {
                        let (gr, yr) = (gg.row_slice(r), yy.row_slice(r));
                        let dot: f64 = gr.iter().zip(yr).map(|(a, b)| a * b).sum();
                        for j in 0..c {
                            ga.set(r, j, yr[j] * (gr[j] - dot));
                        }
                    }
                    let ga = if *axis == 1 { ga } else { ga.transpose() };
                    acc(&mut grads, *a, ga);
                }
                Op::LogSoftmax(a) => {
                    let c = y.cols();
                    let mut ga = Tensor::zeros(y.rows(), c);
                    for r in 0..y.rows() {
                        let gr = g.row_slice(r);
                        let total: f64 = gr.iter().sum();
                        for j in 0..c {
                            ga.set(r, j, gr[j] - y.get(r, j).exp() * total);
                        }
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::GatherRows(a, indices) => {
                    let ta = self.value(*a);
                    let c = ta.cols();
                    let mut ga = Tensor::zeros(ta.rows(), c);
                    for (k, &i) in indices.iter().enumerate() {
                        let row = &mut ga.data_mut()[i * c..(i + 1) * c];
                        for (o, v) in row.iter_mut().zip(g.row_slice(k)) {
                            *o += v;
                        }
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::GatherElems(a, at) => {
                    let ta = self.value(*a);
                    let mut ga = Tensor::zeros(ta.rows(), ta.cols());
                    for (k, &(r, c)) in at.iter().enumerate() {
                        let cur = ga.get(r, c);
                        ga.set(r, c, cur + g.data()[k]);
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::Dropout(a, mask) => acc(&mut grads, *a, g.zip_map(mask, |d, m| d * m)),
                Op::Sum(a) => {
                    let ta = self.value(*a);
                    acc(&mut grads, *a, Tensor::filled(ta.rows(), ta.cols(), g.item()));
                }
                Op::Mean(a) => {
                    let ta = self.value(*a);
                    let v = g.item() / ta.len() as f64;
                    acc(&mut grads, *a, Tensor::filled(ta.rows(), ta.cols(), v));
                }
                Op::LogSumExp(a) => {
                    let ta = self.value(*a);
                    let lse = y.item();
                    let d = g.item();
                    acc(&mut grads, *a, ta.map(|x| d * (x - lse).exp()));
                }
            }
            grads[id] = Some(g);
        }
        Ok(Gradients { grads })
    }

    /// Gradients of every parameter leaf, keyed by parameter name. Parameters
    /// that did not influence the loss map to zero tensors.
    pub fn param_grads(&self, grads: &Gradients) -> BTreeMap<String, Tensor> {
        self.params
            .iter()
            .map(|(name, &v)| {
                let g = grads.get(v).cloned().unwrap_or_else(|| {
                    let t = self.value(v);
                    Tensor::zeros(t.rows(), t.cols())
                });
                (name.clone(), g)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_of_zeros_is_uniform() {
        let mut g = Graph::new(0);
        let x = g.constant(Tensor::zeros(1, 3)).unwrap();
        let y = g.softmax(x, 1).unwrap();
        for &v in g.value(y).data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut g = Graph::new(0);
        let x = g
            .constant(Tensor::from_rows(&[vec![1000.0, -3.0, 2.0], vec![0.1, 0.2, -50.0]]).unwrap())
            .unwrap();
        for axis in [0, 1] {
            let y = g.softmax(x, axis).unwrap();
            let t = g.value(y);
            if axis == 1 {
                for r in 0..t.rows() {
                    assert!((t.row_slice(r).iter().sum::<f64>() - 1.0).abs() < 1e-12);
                }
            } else {
                for c in 0..t.cols() {
                    let s: f64 = (0..t.rows()).map(|r| t.get(r, c)).sum();
                    assert!((s - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn concat_three_vectors() {
        let mut g = Graph::new(0);
        let parts: Vec<Var> = (0..3)
            .map(|i| g.constant(Tensor::filled(1, 3, i as f64)).unwrap())
            .collect();
        let c = g.concat_cols(&parts).unwrap();
        assert_eq!(g.value(c).shape(), [1, 9]);
    }

    #[test]
    fn sum_gradient_is_ones() {
        let mut g = Graph::new(0);
        let p = g.param("p", &Tensor::row(&[0.5, -1.0, 2.0, 3.0])).unwrap();
        let s = g.sum(p).unwrap();
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.get(p).unwrap().data(), &[1.0; 4]);
    }

    #[test]
    fn zero_scaled_loss_has_zero_gradient() {
        let mut g = Graph::new(0);
        let p = g.param("p", &Tensor::row(&[0.5, -1.0])).unwrap();
        let t = g.tanh(p).unwrap();
        let s = g.sum(t).unwrap();
        let z = g.scale(s, 0.0).unwrap();
        let grads = g.backward(z).unwrap();
        assert_eq!(g.param_grads(&grads)["p"].data(), &[0.0, 0.0]);
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let mut g = Graph::new(0);
        let p = g.param("p", &Tensor::row(&[0.5, -1.0])).unwrap();
        assert!(matches!(g.backward(p), Err(NumericsError::NonScalarLoss(_))));
    }

    #[test]
    fn non_finite_values_raise() {
        let mut g = Graph::new(0);
        let p = g.constant(Tensor::row(&[0.0])).unwrap();
        assert!(matches!(g.log(p), Err(NumericsError::NonFinite("log"))));
    }

    #[test]
    fn param_leaves_are_deduplicated() {
        let mut g = Graph::new(0);
        let t = Tensor::row(&[1.0, 2.0]);
        let a = g.param("w", &t).unwrap();
        let b = g.param("w", &t).unwrap();
        assert_eq!(a, b);
        let m = g.mul(a, b).unwrap();
        let s = g.sum(m).unwrap();
        let grads = g.backward(s).unwrap();
        assert_eq!(g.param_grads(&grads)["w"].data(), &[2.0, 4.0]);
    }

    #[test]
    fn dropout_is_identity_in_eval_and_inverted_in_training() {
        let mut g = Graph::new(3);
        let x = g.constant(Tensor::filled(1, 1000, 1.0)).unwrap();
        assert_eq!(g.dropout(x, 0.5).unwrap(), x);

        let mut g = Graph::training(3);
        let x = g.constant(Tensor::filled(1, 1000, 1.0)).unwrap();
        let y = g.dropout(x, 0.5).unwrap();
        let vals = g.value(y).data();
        assert!(vals.iter().all(|&v| v == 0.0 || v == 2.0));
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        assert!((mean - 1.0).abs() < 0.15);
    }
}
