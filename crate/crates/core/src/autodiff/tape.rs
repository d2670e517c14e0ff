use std::fmt;

use super::{AutodiffError, Tensor};

/// ε inside the row-norm square root; keeps the norm differentiable at zero.
pub const L2_NORM_EPS: f64 = 1e-12;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Operation recorded on the tape.
///
/// Binary elementwise ops (`Add`, `Sub`, `Mul`, `Div`) accept a right-hand
/// operand of the same shape as the left, a `1 x 1` scalar, a `1 x k` row
/// (broadcast down the rows) or an `n x 1` column (broadcast across columns).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OpKind {
    Leaf,
    Add,
    Sub,
    Mul,
    Div,
    MatMul,
    Transpose,
    Tanh,
    Sigmoid,
    Exp,
    Log,
    Neg,
    Sum,
    Mean,
    Square,
    Sqrt,
    Clamp { lo: f64, hi: f64 },
    Min,
    L2NormRows,
    ConcatCols,
    SliceCols { start: usize, end: usize },
    Scale(f64),
    /// `[n, k] -> [1, k]`
    SumRows,
    /// `[n, k] -> [n, 1]`
    SumCols,
}

impl OpKind {
    pub fn name(&self) -> &'static str {
        match self {
            OpKind::Leaf => "leaf",
            OpKind::Add => "add",
            OpKind::Sub => "sub",
            OpKind::Mul => "mul",
            OpKind::Div => "div",
            OpKind::MatMul => "matmul",
            OpKind::Transpose => "transpose",
            OpKind::Tanh => "tanh",
            OpKind::Sigmoid => "sigmoid",
            OpKind::Exp => "exp",
            OpKind::Log => "log",
            OpKind::Neg => "neg",
            OpKind::Sum => "sum",
            OpKind::Mean => "mean",
            OpKind::Square => "square",
            OpKind::Sqrt => "sqrt",
            OpKind::Clamp { .. } => "clamp",
            OpKind::Min => "min-elementwise",
            OpKind::L2NormRows => "l2norm-rows",
            OpKind::ConcatCols => "concat-columns",
            OpKind::SliceCols { .. } => "slice-columns",
            OpKind::Scale(_) => "scale",
            OpKind::SumRows => "sum-rows",
            OpKind::SumCols => "sum-cols",
        }
    }

    fn arity(&self) -> Option<usize> {
        match self {
            OpKind::Leaf => Some(0),
            OpKind::Add | OpKind::Sub | OpKind::Mul | OpKind::Div | OpKind::MatMul | OpKind::Min => {
                Some(2)
            }
            OpKind::ConcatCols => None,
            _ => Some(1),
        }
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Broadcast {
    Same,
    Scalar,
    Row,
    Col,
}

impl Broadcast {
    fn of(lhs: [usize; 2], rhs: [usize; 2]) -> Option<Self> {
        if lhs == rhs {
            Some(Broadcast::Same)
        } else if rhs == [1, 1] {
            Some(Broadcast::Scalar)
        } else if rhs[0] == 1 && rhs[1] == lhs[1] {
            Some(Broadcast::Row)
        } else if rhs[1] == 1 && rhs[0] == lhs[0] {
            Some(Broadcast::Col)
        } else {
            None
        }
    }
}

fn binary(a: &Tensor, b: &Tensor, bc: Broadcast, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let [rows, cols] = a.shape();
    let (ad, bd) = (a.data(), b.data());
    let mut out = Vec::with_capacity(ad.len());
    for r in 0..rows {
        for c in 0..cols {
            let bv = match bc {
                Broadcast::Same => bd[r * cols + c],
                Broadcast::Scalar => bd[0],
                Broadcast::Row => bd[c],
                Broadcast::Col => bd[r],
            };
            out.push(f(ad[r * cols + c], bv));
        }
    }
    Tensor::new(rows, cols, out).expect("shape preserved")
}

/// Sum `g` down to `shape`, undoing a broadcast.
fn reduce_to(g: Tensor, shape: [usize; 2]) -> Tensor {
    if g.shape() == shape {
        g
    } else if shape == [1, 1] {
        Tensor::scalar(g.sum())
    } else if shape[0] == 1 {
        g.sum_rows()
    } else {
        g.sum_cols()
    }
}

/// Spread `g` (scalar, row or column) over a `rows x cols` tensor.
fn expand(g: &Tensor, rows: usize, cols: usize) -> Tensor {
    let bc = Broadcast::of([rows, cols], g.shape()).expect("expandable gradient");
    binary(&Tensor::zeros(rows, cols), g, bc, |_, b| b)
}

struct Node {
    kind: OpKind,
    inputs: Vec<Var>,
    value: Tensor,
}

/// Append-only record of a computation.
///
/// Forward values are computed eagerly on [`Tape::record`]. Inputs always
/// reference earlier nodes, so the node list is a topological order and a
/// single reverse sweep visits every node once.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of one scalar with respect to every node of a tape.
pub struct GradMap {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<[usize; 2]>,
}

impl GradMap {
    /// Gradient for `v`, or `None` when `v` does not influence the output.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Gradient for `v`, zero-filled when `v` does not influence the output.
    pub fn wrt(&self, v: Var) -> Tensor {
        match self.get(v) {
            Some(g) => g.clone(),
            None => {
                let [r, c] = self.shapes[v.0];
                Tensor::zeros(r, c)
            }
        }
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Register an input tensor (parameter, data or constant).
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            kind: OpKind::Leaf,
            inputs: Vec::new(),
            value,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn scalar(&mut self, value: f64) -> Var {
        self.leaf(Tensor::scalar(value))
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn kind(&self, v: Var) -> OpKind {
        self.nodes[v.0].kind
    }

    pub fn inputs(&self, v: Var) -> &[Var] {
        &self.nodes[v.0].inputs
    }

    fn check(&self, v: Var) -> Result<(), AutodiffError> {
        if v.0 < self.nodes.len() {
            Ok(())
        } else {
            Err(AutodiffError::UnknownVar(v.0))
        }
    }

    /// Record `kind` applied to `inputs` and compute its value.
    pub fn record(&mut self, kind: OpKind, inputs: &[Var]) -> Result<Var, AutodiffError> {
        if let Some(n) = kind.arity() {
            if n != inputs.len() {
                return Err(AutodiffError::Arity {
                    op: kind.name(),
                    expected: n,
                    got: inputs.len(),
                });
            }
        } else if inputs.is_empty() {
            return Err(AutodiffError::Arity {
                op: kind.name(),
                expected: 1,
                got: 0,
            });
        }
        if kind == OpKind::Leaf {
            return Err(AutodiffError::Arity {
                op: kind.name(),
                expected: 0,
                got: 0,
            });
        }
        for &v in inputs {
            self.check(v)?;
        }
        let value = {
            let vals: Vec<&Tensor> = inputs.iter().map(|v| &self.nodes[v.0].value).collect();
            forward(kind, &vals)?
        };
        self.nodes.push(Node {
            kind,
            inputs: inputs.to_vec(),
            value,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.record(OpKind::Add, &[a, b])
    }
    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.record(OpKind::Sub, &[a, b])
    }
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.record(OpKind::Mul, &[a, b])
    }
    pub fn div(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.record(OpKind::Div, &[a, b])
    }
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.record(OpKind::MatMul, &[a, b])
    }
    pub fn transpose(&mut self, a: Var) -> Result<Var, AutodiffError> {
        self.record(OpKind::Transpose, &[a])
    }
    pub fn tanh(&mut self, a: Var) -> Result<Var, AutodiffError> {
        self.record(OpKind::Tanh, &[a])
    }
    pub fn sigmoid(&mut self, a: Var) -> Result<Var, AutodiffError> {
        self.record(OpKind::Sigmoid, &[a])
    }
    pub fn exp(&mut self, a: Var) -> Result<Var, AutodiffError> {
        self.record(OpKind::Exp, &[a])
    }
    pub fn log(&mut self, a: Var) -> Result<Var, AutodiffError> {
        self.record(OpKind::Log, &[a])
    }
    pub fn neg(&mut self, a: Var) -> Result<Var, AutodiffError> {
        self.record(OpKind::Neg, &[a])
    }
    pub fn sum(&mut self, a: Var) -> Result<Var, AutodiffError> {
        self.record(OpKind::Sum, &[a])
    }
    pub fn mean(&mut self, a: Var) -> Result<Var, AutodiffError> {
        self.record(OpKind::Mean, &[a])
    }
    pub fn square(&mut self, a: Var) -> Result<Var, AutodiffError> {
        self.record(OpKind::Square, &[a])
    }
    pub fn sqrt(&mut self, a: Var) -> Result<Var, AutodiffError> {
        self.record(OpKind::Sqrt, &[a])
    }
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Result<Var, AutodiffError> {
        self.record(OpKind::Clamp { lo, hi }, &[a])
    }
    pub fn minimum(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.record(OpKind::Min, &[a, b])
    }
    pub fn l2norm_rows(&mut self, a: Var) -> Result<Var, AutodiffError> {
        self.record(OpKind::L2NormRows, &[a])
    }
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, AutodiffError> {
        self.record(OpKind::ConcatCols, parts)
    }
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var, AutodiffError> {
        self.record(OpKind::SliceCols { start, end }, &[a])
    }
    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var, AutodiffError> {
        self.record(OpKind::Scale(c), &[a])
    }
    pub fn sum_rows(&mut self, a: Var) -> Result<Var, AutodiffError> {
        self.record(OpKind::SumRows, &[a])
    }
    pub fn sum_cols(&mut self, a: Var) -> Result<Var, AutodiffError> {
        self.record(OpKind::SumCols, &[a])
    }

    /// `a + c` for a constant `c`.
    pub fn add_scalar(&mut self, a: Var, c: f64) -> Result<Var, AutodiffError> {
        let c = self.scalar(c);
        self.add(a, c)
    }

    /// Reverse sweep from a one-element `output`. The tape is left untouched,
    /// so `backward` may be called repeatedly.
    pub fn backward(&self, output: Var) -> Result<GradMap, AutodiffError> {
        self.check(output)?;
        let out_shape = self.nodes[output.0].value.shape();
        if out_shape != [1, 1] {
            return Err(AutodiffError::NotScalar {
                shape: out_shape,
            });
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[output.0] = Some(Tensor::scalar(1.0));
        for idx in (0..=output.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if node.kind != OpKind::Leaf {
                let input_grads = self.vjp(idx, &g);
                for (input, ig) in node.inputs.iter().zip(input_grads) {
                    match &mut grads[input.0] {
                        Some(acc) => acc.add_assign(&ig),
                        slot @ None => *slot = Some(ig),
                    }
                }
            }
            grads[idx] = Some(g);
        }
        Ok(GradMap {
            grads,
            shapes: self.nodes.iter().map(|n| n.value.shape()).collect(),
        })
    }

    fn vjp(&self, idx: usize, g: &Tensor) -> Vec<Tensor> {
        let node = &self.nodes[idx];
        let y = &node.value;
        let x = |i: usize| &self.nodes[node.inputs[i].0].value;
        match node.kind {
            OpKind::Leaf => Vec::new(),
            OpKind::Add => vec![g.clone(), reduce_to(g.clone(), x(1).shape())],
            OpKind::Sub => vec![g.clone(), reduce_to(g.map(|v| -v), x(1).shape())],
            OpKind::Mul => {
                let bc = Broadcast::of(x(0).shape(), x(1).shape()).unwrap();
                let ga = binary(g, x(1), bc, |g, b| g * b);
                let gb = reduce_to(g.zip_map(x(0), |g, a| g * a), x(1).shape());
                vec![ga, gb]
            }
            OpKind::Div => {
                let bc = Broadcast::of(x(0).shape(), x(1).shape()).unwrap();
                let ga = binary(g, x(1), bc, |g, b| g / b);
                let ga_times_a = ga.zip_map(x(0), |q, a| q * a);
                let gb = binary(&ga_times_a, x(1), bc, |q, b| -q / b);
                vec![ga, reduce_to(gb, x(1).shape())]
            }
            OpKind::MatMul => vec![g.matmul(&x(1).transpose()), x(0).transpose().matmul(g)],
            OpKind::Transpose => vec![g.transpose()],
            OpKind::Tanh => vec![g.zip_map(y, |g, y| g * (1.0 - y * y))],
            OpKind::Sigmoid => vec![g.zip_map(y, |g, y| g * y * (1.0 - y))],
            OpKind::Exp => vec![g.zip_map(y, |g, y| g * y)],
            OpKind::Log => vec![g.zip_map(x(0), |g, x| g / x)],
            OpKind::Neg => vec![g.map(|g| -g)],
            OpKind::Sum => {
                let [r, c] = x(0).shape();
                vec![expand(g, r, c)]
            }
            OpKind::Mean => {
                let [r, c] = x(0).shape();
                let n = (r * c) as f64;
                vec![expand(&g.map(|g| g / n), r, c)]
            }
            OpKind::Square => vec![g.zip_map(x(0), |g, x| 2.0 * x * g)],
            OpKind::Sqrt => vec![g.zip_map(y, |g, y| 0.5 * g / y)],
            OpKind::Clamp { lo, hi } => vec![g.zip_map(x(0), |g, x| {
                if (lo..=hi).contains(&x) {
                    g
                } else {
                    0.0
                }
            })],
            OpKind::Min => {
                let mask = x(0).zip_map(x(1), |a, b| if a <= b { 1.0 } else { 0.0 });
                vec![
                    g.zip_map(&mask, |g, m| g * m),
                    g.zip_map(&mask, |g, m| g * (1.0 - m)),
                ]
            }
            OpKind::L2NormRows => {
                let [r, c] = x(0).shape();
                let scaled = g.zip_map(y, |g, y| g / y);
                vec![binary(x(0), &scaled, Broadcast::of([r, c], [r, 1]).unwrap(), |x, s| {
                    x * s
                })]
            }
            OpKind::ConcatCols => {
                let mut off = 0;
                node.inputs
                    .iter()
                    .map(|v| {
                        let w = self.nodes[v.0].value.cols();
                        let part = g.slice_cols(off, off + w);
                        off += w;
                        part
                    })
                    .collect()
            }
            OpKind::SliceCols { start, end } => {
                let [r, c] = x(0).shape();
                let mut out = Tensor::zeros(r, c);
                let w = end - start;
                let data = out.data_mut();
                for row in 0..r {
                    data[row * c + start..row * c + end].copy_from_slice(&g.data()[row * w..(row + 1) * w]);
                }
                vec![out]
            }
            OpKind::Scale(k) => vec![g.map(|g| g * k)],
            OpKind::SumRows | OpKind::SumCols => {
                let [r, c] = x(0).shape();
                vec![expand(g, r, c)]
            }
        }
    }

    /// Gradient of the one-element `output` with respect to `wrt`, built out of
    /// tape operations. The returned node is an ordinary differentiable
    /// expression, so losses formed from it can be passed to [`Tape::backward`]
    /// to obtain second-order terms.
    ///
    /// When `output` does not depend on `wrt` the result is a zero constant.
    pub fn input_gradient_as_node(&mut self, output: Var, wrt: Var) -> Result<Var, AutodiffError> {
        self.check(output)?;
        self.check(wrt)?;
        let out_shape = self.nodes[output.0].value.shape();
        if out_shape != [1, 1] {
            return Err(AutodiffError::NotScalar { shape: out_shape });
        }
        let [wr, wc] = self.nodes[wrt.0].value.shape();
        if output.0 < wrt.0 {
            return Ok(self.leaf(Tensor::zeros(wr, wc)));
        }

        // Nodes on some path from `wrt`; only these carry useful adjoints.
        let span = output.0 - wrt.0 + 1;
        let mut influenced = vec![false; span];
        influenced[0] = true;
        for idx in wrt.0 + 1..=output.0 {
            influenced[idx - wrt.0] = self.nodes[idx]
                .inputs
                .iter()
                .any(|v| v.0 >= wrt.0 && influenced[v.0 - wrt.0]);
        }
        if !influenced[span - 1] {
            return Ok(self.leaf(Tensor::zeros(wr, wc)));
        }

        let mut adjoint: Vec<Option<Var>> = vec![None; span];
        adjoint[span - 1] = Some(self.scalar(1.0));
        for idx in (wrt.0 + 1..=output.0).rev() {
            let Some(g) = adjoint[idx - wrt.0] else { continue };
            let inputs = self.nodes[idx].inputs.clone();
            let needed: Vec<bool> = inputs
                .iter()
                .map(|v| v.0 >= wrt.0 && influenced[v.0 - wrt.0])
                .collect();
            if !needed.iter().any(|&n| n) {
                continue;
            }
            let parts = self.vjp_recorded(Var(idx), g, &needed)?;
            for ((input, part), need) in inputs.iter().zip(parts).zip(needed) {
                if !need {
                    continue;
                }
                let part = part.expect("needed adjoint recorded");
                let slot = &mut adjoint[input.0 - wrt.0];
                *slot = Some(match *slot {
                    Some(acc) => self.add(acc, part)?,
                    None => part,
                });
            }
        }
        Ok(adjoint[0].expect("wrt is influenced by itself"))
    }

    fn ones_like(&mut self, v: Var) -> Var {
        let [r, c] = self.nodes[v.0].value.shape();
        self.leaf(Tensor::filled(r, c, 1.0))
    }

    fn reduce_recorded(&mut self, g: Var, shape: [usize; 2]) -> Result<Var, AutodiffError> {
        let gs = self.nodes[g.0].value.shape();
        if gs == shape {
            Ok(g)
        } else if shape == [1, 1] {
            self.sum(g)
        } else if shape[0] == 1 {
            self.sum_rows(g)
        } else {
            self.sum_cols(g)
        }
    }

    fn vjp_recorded(&mut self, y: Var, g: Var, needed: &[bool]) -> Result<Vec<Option<Var>>, AutodiffError> {
        let kind = self.nodes[y.0].kind;
        let inputs = self.nodes[y.0].inputs.clone();
        let shape = |t: &Tape, v: Var| t.nodes[v.0].value.shape();
        let mut out: Vec<Option<Var>> = vec![None; inputs.len()];
        match kind {
            OpKind::Leaf => {}
            OpKind::Add => {
                if needed[0] {
                    out[0] = Some(g);
                }
                if needed[1] {
                    out[1] = Some(self.reduce_recorded(g, shape(self, inputs[1]))?);
                }
            }
            OpKind::Sub => {
                if needed[0] {
                    out[0] = Some(g);
                }
                if needed[1] {
                    let r = self.reduce_recorded(g, shape(self, inputs[1]))?;
                    out[1] = Some(self.neg(r)?);
                }
            }
            OpKind::Mul => {
                let (a, b) = (inputs[0], inputs[1]);
                if needed[0] {
                    out[0] = Some(self.mul(g, b)?);
                }
                if needed[1] {
                    let ga = self.mul(g, a)?;
                    out[1] = Some(self.reduce_recorded(ga, shape(self, b))?);
                }
            }
            OpKind::Div => {
                let (a, b) = (inputs[0], inputs[1]);
                let q = self.div(g, b)?;
                if needed[0] {
                    out[0] = Some(q);
                }
                if needed[1] {
                    let qa = self.mul(q, a)?;
                    let qab = self.div(qa, b)?;
                    let n = self.neg(qab)?;
                    out[1] = Some(self.reduce_recorded(n, shape(self, b))?);
                }
            }
            OpKind::MatMul => {
                let (a, b) = (inputs[0], inputs[1]);
                if needed[0] {
                    let bt = self.transpose(b)?;
                    out[0] = Some(self.matmul(g, bt)?);
                }
                if needed[1] {
                    let at = self.transpose(a)?;
                    out[1] = Some(self.matmul(at, g)?);
                }
            }
            OpKind::Transpose => out[0] = Some(self.transpose(g)?),
            OpKind::Tanh => {
                let y2 = self.square(y)?;
                let ny2 = self.neg(y2)?;
                let d = self.add_scalar(ny2, 1.0)?;
                out[0] = Some(self.mul(g, d)?);
            }
            OpKind::Sigmoid => {
                let ny = self.neg(y)?;
                let one_minus = self.add_scalar(ny, 1.0)?;
                let d = self.mul(y, one_minus)?;
                out[0] = Some(self.mul(g, d)?);
            }
            OpKind::Exp => out[0] = Some(self.mul(g, y)?),
            OpKind::Log => out[0] = Some(self.div(g, inputs[0])?),
            OpKind::Neg => out[0] = Some(self.neg(g)?),
            OpKind::Sum => {
                let ones = self.ones_like(inputs[0]);
                out[0] = Some(self.mul(ones, g)?);
            }
            OpKind::Mean => {
                let n = self.nodes[inputs[0].0].value.len() as f64;
                let ones = self.ones_like(inputs[0]);
                let spread = self.mul(ones, g)?;
                out[0] = Some(self.scale(spread, 1.0 / n)?);
            }
            OpKind::Square => {
                let two_x = self.scale(inputs[0], 2.0)?;
                out[0] = Some(self.mul(g, two_x)?);
            }
            OpKind::Sqrt => {
                let half = self.scale(g, 0.5)?;
                out[0] = Some(self.div(half, y)?);
            }
            OpKind::Clamp { lo, hi } => {
                let mask = self.nodes[inputs[0].0]
                    .value
                    .map(|x| if (lo..=hi).contains(&x) { 1.0 } else { 0.0 });
                let m = self.leaf(mask);
                out[0] = Some(self.mul(g, m)?);
            }
            OpKind::Min => {
                let mask = self.nodes[inputs[0].0]
                    .value
                    .zip_map(&self.nodes[inputs[1].0].value, |a, b| if a <= b { 1.0 } else { 0.0 });
                let inv = mask.map(|m| 1.0 - m);
                if needed[0] {
                    let m = self.leaf(mask);
                    out[0] = Some(self.mul(g, m)?);
                }
                if needed[1] {
                    let m = self.leaf(inv);
                    out[1] = Some(self.mul(g, m)?);
                }
            }
            OpKind::L2NormRows => {
                let s = self.div(g, y)?;
                out[0] = Some(self.mul(inputs[0], s)?);
            }
            OpKind::ConcatCols => {
                let mut off = 0;
                for (i, v) in inputs.iter().enumerate() {
                    let w = self.nodes[v.0].value.cols();
                    if needed[i] {
                        out[i] = Some(self.slice_cols(g, off, off + w)?);
                    }
                    off += w;
                }
            }
            OpKind::SliceCols { start, end } => {
                let [r, c] = shape(self, inputs[0]);
                let mut parts = Vec::with_capacity(3);
                if start > 0 {
                    parts.push(self.leaf(Tensor::zeros(r, start)));
                }
                parts.push(g);
                if end < c {
                    parts.push(self.leaf(Tensor::zeros(r, c - end)));
                }
                out[0] = Some(if parts.len() == 1 {
                    g
                } else {
                    self.concat_cols(&parts)?
                });
            }
            OpKind::Scale(k) => out[0] = Some(self.scale(g, k)?),
            OpKind::SumRows | OpKind::SumCols => {
                let ones = self.ones_like(inputs[0]);
                out[0] = Some(self.mul(ones, g)?);
            }
        }
        Ok(out)
    }
}

fn shape_err(op: OpKind, lhs: [usize; 2], rhs: [usize; 2]) -> AutodiffError {
    AutodiffError::Shape {
        op: op.name(),
        lhs,
        rhs,
    }
}

fn forward(kind: OpKind, x: &[&Tensor]) -> Result<Tensor, AutodiffError> {
    let elementwise = |f: fn(f64, f64) -> f64| -> Result<Tensor, AutodiffError> {
        let bc = Broadcast::of(x[0].shape(), x[1].shape())
            .ok_or_else(|| shape_err(kind, x[0].shape(), x[1].shape()))?;
        Ok(binary(x[0], x[1], bc, f))
    };
    Ok(match kind {
        OpKind::Leaf => unreachable!("leaves carry no forward computation"),
        OpKind::Add => elementwise(|a, b| a + b)?,
        OpKind::Sub => elementwise(|a, b| a - b)?,
        OpKind::Mul => elementwise(|a, b| a * b)?,
        OpKind::Div => {
            if x[1].data().iter().any(|&b| b == 0.0) {
                return Err(AutodiffError::Domain {
                    op: kind.name(),
                    detail: "division by zero".into(),
                });
            }
            elementwise(|a, b| a / b)?
        }
        OpKind::MatMul => {
            if x[0].cols() != x[1].rows() {
                return Err(shape_err(kind, x[0].shape(), x[1].shape()));
            }
            x[0].matmul(x[1])
        }
        OpKind::Transpose => x[0].transpose(),
        OpKind::Tanh => x[0].map(f64::tanh),
        OpKind::Sigmoid => x[0].map(sigmoid),
        OpKind::Exp => x[0].map(f64::exp),
        OpKind::Log | OpKind::Sqrt => {
            if let Some(&bad) = x[0].data().iter().find(|&&v| v <= 0.0 || v.is_nan()) {
                return Err(AutodiffError::Domain {
                    op: kind.name(),
                    detail: format!("non-positive input {bad}"),
                });
            }
            if kind == OpKind::Log {
                x[0].map(f64::ln)
            } else {
                x[0].map(f64::sqrt)
            }
        }
        OpKind::Neg => x[0].map(|v| -v),
        OpKind::Sum => Tensor::scalar(x[0].sum()),
        OpKind::Mean => {
            if x[0].is_empty() {
                return Err(AutodiffError::Domain {
                    op: kind.name(),
                    detail: "mean of an empty tensor".into(),
                });
            }
            Tensor::scalar(x[0].sum() / x[0].len() as f64)
        }
        OpKind::Square => x[0].map(|v| v * v),
        OpKind::Clamp { lo, hi } => {
            if !(lo <= hi) {
                return Err(AutodiffError::Domain {
                    op: kind.name(),
                    detail: format!("empty interval [{lo}, {hi}]"),
                });
            }
            x[0].map(|v| v.clamp(lo, hi))
        }
        OpKind::Min => {
            if x[0].shape() != x[1].shape() {
                return Err(shape_err(kind, x[0].shape(), x[1].shape()));
            }
            x[0].zip_map(x[1], f64::min)
        }
        OpKind::L2NormRows => {
            let norms: Vec<f64> = (0..x[0].rows())
                .map(|r| {
                    let ss: f64 = x[0].row_slice(r).iter().map(|v| v * v).sum();
                    (ss + L2_NORM_EPS).sqrt()
                })
                .collect();
            Tensor::column(&norms)
        }
        OpKind::ConcatCols => {
            let rows = x[0].rows();
            if let Some(bad) = x.iter().find(|t| t.rows() != rows) {
                return Err(shape_err(kind, x[0].shape(), bad.shape()));
            }
            Tensor::concat_cols(x)
        }
        OpKind::SliceCols { start, end } => {
            if start >= end || end > x[0].cols() {
                return Err(shape_err(kind, x[0].shape(), [start, end]));
            }
            x[0].slice_cols(start, end)
        }
        OpKind::Scale(k) => x[0].map(|v| v * k),
        OpKind::SumRows => x[0].sum_rows(),
        OpKind::SumCols => x[0].sum_cols(),
    })
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
