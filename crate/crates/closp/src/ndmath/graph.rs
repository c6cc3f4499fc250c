use crate::error::{Error, Result};

use super::tensor::{
    as_matrix_dims, l2_normalize_rows_into, log_softmax_into, matmul_acc, matmul_into, Tensor,
};

/// Handle into a [`ComputeGraph`]. Ids are only meaningful for the graph
/// that issued them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    Transpose(NodeId),
    Add(NodeId, NodeId),
    /// Adds a bias vector to every row of a matrix.
    AddRowBias(NodeId, NodeId),
    Scale(NodeId, f64),
    /// Multiplies every element by a single-element node.
    MulScalar(NodeId, NodeId),
    Exp(NodeId),
    Sin(NodeId),
    Relu(NodeId),
    L2NormalizeRows(NodeId),
    LogSoftmaxRows(NodeId),
    /// Main diagonal of a square matrix, as a vector.
    Diag(NodeId),
    Mean(NodeId),
    Sum(NodeId),
    ConcatRows(Vec<NodeId>),
    Conv2d {
        x: NodeId,
        w: NodeId,
        b: NodeId,
        stride: usize,
        pad: usize,
    },
    /// Per-channel spatial mean, emitted as a 1-row matrix.
    GlobalAvgPool(NodeId),
}

struct Node {
    op: Op,
    value: Tensor,
    grad: Option<Vec<f64>>,
    requires_grad: bool,
}

/// Splits one node into its gradient buffer and input values without
/// cloning either.
fn grad_and_input(node: &mut Node) -> (&mut [f64], &[f64]) {
    let Node { grad, value, .. } = node;
    (
        grad.as_mut().expect("requires grad").as_mut_slice(),
        value.values(),
    )
}

/// Define-by-run compute graph. Every operation evaluates eagerly as it is
/// recorded, so construction order is a topological order by definition and
/// the backward pass is a single reverse sweep visiting each node once.
///
/// A backward call overwrites all gradient state from the previous call; it
/// never accumulates across calls.
pub struct ComputeGraph {
    nodes: Vec<Node>,
}

impl Default for ComputeGraph {
    fn default() -> Self {
        Self::new()
    }
}

impl ComputeGraph {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Registers a trainable parameter.
    pub fn leaf(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Leaf, value, true)
    }

    /// Registers a fixed input; no gradient is computed for it or through
    /// subgraphs that depend only on constants.
    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Leaf, value, false)
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    /// Gradient of the most recent backward target with respect to this
    /// node. None when the node does not require gradients or backward has
    /// not run.
    pub fn grad(&self, id: NodeId) -> Option<&[f64]> {
        self.nodes[id.0].grad.as_deref()
    }

    fn push(&mut self, op: Op, value: Tensor, requires_grad: bool) -> NodeId {
        self.nodes.push(Node {
            op,
            value,
            grad: None,
            requires_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn needs_grad(&self, ids: &[NodeId]) -> bool {
        ids.iter().any(|id| self.nodes[id.0].requires_grad)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (m, k) = as_matrix_dims(self.value(a), "matmul left")?;
        let (k2, n) = as_matrix_dims(self.value(b), "matmul right")?;
        if k != k2 {
            return Err(Error::Shape(format!(
                "matmul: inner extents differ, {m}x{k} vs {k2}x{n}"
            )));
        }
        let mut out = vec![0.0; m * n];
        matmul_into(
            self.value(a).values(),
            self.value(b).values(),
            m,
            k,
            n,
            &mut out,
        );
        let rg = self.needs_grad(&[a, b]);
        Ok(self.push(Op::MatMul(a, b), Tensor::new(&[m, n], out)?, rg))
    }

    pub fn transpose(&mut self, a: NodeId) -> Result<NodeId> {
        let value = self.value(a).transposed()?;
        let rg = self.needs_grad(&[a]);
        Ok(self.push(Op::Transpose(a), value, rg))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = self.value(a).add(self.value(b))?;
        let rg = self.needs_grad(&[a, b]);
        Ok(self.push(Op::Add(a, b), value, rg))
    }

    pub fn add_row_bias(&mut self, a: NodeId, bias: NodeId) -> Result<NodeId> {
        let (m, n) = as_matrix_dims(self.value(a), "add_row_bias input")?;
        if self.value(bias).shape() != [n] {
            return Err(Error::Shape(format!(
                "add_row_bias: bias {:?} does not match row width {n}",
                self.value(bias).shape()
            )));
        }
        let mut out = self.value(a).values().to_vec();
        let bvals = self.value(bias).values();
        for r in 0..m {
            for c in 0..n {
                out[r * n + c] += bvals[c];
            }
        }
        let rg = self.needs_grad(&[a, bias]);
        Ok(self.push(Op::AddRowBias(a, bias), Tensor::new(&[m, n], out)?, rg))
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let value = self.value(a).scale(c);
        let rg = self.needs_grad(&[a]);
        self.push(Op::Scale(a, c), value, rg)
    }

    pub fn mul_scalar(&mut self, a: NodeId, s: NodeId) -> Result<NodeId> {
        if self.value(s).len() != 1 {
            return Err(Error::Shape(format!(
                "mul_scalar: scale must hold one element, got {:?}",
                self.value(s).shape()
            )));
        }
        let sv = self.value(s).values()[0];
        let value = self.value(a).scale(sv);
        let rg = self.needs_grad(&[a, s]);
        Ok(self.push(Op::MulScalar(a, s), value, rg))
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        let value = self.map_unary(a, f64::exp);
        let rg = self.needs_grad(&[a]);
        self.push(Op::Exp(a), value, rg)
    }

    pub fn sin(&mut self, a: NodeId) -> NodeId {
        let value = self.map_unary(a, f64::sin);
        let rg = self.needs_grad(&[a]);
        self.push(Op::Sin(a), value, rg)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let value = self.map_unary(a, |v| v.max(0.0));
        let rg = self.needs_grad(&[a]);
        self.push(Op::Relu(a), value, rg)
    }

    fn map_unary(&self, a: NodeId, f: impl Fn(f64) -> f64) -> Tensor {
        let src = self.value(a);
        let values = src.values().iter().map(|&v| f(v)).collect();
        Tensor::new(src.shape(), values).expect("same shape as source")
    }

    pub fn l2_normalize_rows(&mut self, a: NodeId) -> Result<NodeId> {
        let (m, n) = as_matrix_dims(self.value(a), "l2_normalize_rows")?;
        let mut out = vec![0.0; m * n];
        l2_normalize_rows_into(self.value(a).values(), m, n, &mut out)?;
        let rg = self.needs_grad(&[a]);
        Ok(self.push(Op::L2NormalizeRows(a), Tensor::new(&[m, n], out)?, rg))
    }

    pub fn log_softmax_rows(&mut self, a: NodeId) -> Result<NodeId> {
        let (m, n) = as_matrix_dims(self.value(a), "log_softmax_rows")?;
        let av = self.value(a).values();
        let mut out = vec![0.0; m * n];
        for (src, dst) in av.chunks_exact(n).zip(out.chunks_exact_mut(n)) {
            log_softmax_into(src, dst)?;
        }
        let rg = self.needs_grad(&[a]);
        Ok(self.push(Op::LogSoftmaxRows(a), Tensor::new(&[m, n], out)?, rg))
    }

    pub fn diag(&mut self, a: NodeId) -> Result<NodeId> {
        let (m, n) = as_matrix_dims(self.value(a), "diag")?;
        if m != n {
            return Err(Error::Shape(format!("diag of a non-square {m}x{n} matrix")));
        }
        let av = self.value(a).values();
        let out: Vec<f64> = (0..n).map(|i| av[i * n + i]).collect();
        let rg = self.needs_grad(&[a]);
        Ok(self.push(Op::Diag(a), Tensor::new(&[n], out)?, rg))
    }

    pub fn mean(&mut self, a: NodeId) -> NodeId {
        let value = Tensor::scalar(self.value(a).mean());
        let rg = self.needs_grad(&[a]);
        self.push(Op::Mean(a), value, rg)
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let value = Tensor::scalar(self.value(a).sum());
        let rg = self.needs_grad(&[a]);
        self.push(Op::Sum(a), value, rg)
    }

    /// Stacks equal-width matrices on top of each other.
    pub fn concat_rows(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(Error::Shape("concat_rows of zero parts".into()));
        }
        let (_, n) = as_matrix_dims(self.value(parts[0]), "concat_rows part")?;
        let mut rows = 0;
        for &p in parts {
            let (pm, pn) = as_matrix_dims(self.value(p), "concat_rows part")?;
            if pn != n {
                return Err(Error::Shape(format!(
                    "concat_rows: widths differ, {n} vs {pn}"
                )));
            }
            rows += pm;
        }
        let mut out = Vec::with_capacity(rows * n);
        for &p in parts {
            out.extend_from_slice(self.value(p).values());
        }
        let rg = self.needs_grad(parts);
        Ok(self.push(
            Op::ConcatRows(parts.to_vec()),
            Tensor::new(&[rows, n], out)?,
            rg,
        ))
    }

    /// 2-d convolution over a (channels, rows, cols) input with a
    /// (out_channels, in_channels, kh, kw) kernel and per-channel bias.
    pub fn conv2d(
        &mut self,
        x: NodeId,
        w: NodeId,
        b: NodeId,
        stride: usize,
        pad: usize,
    ) -> Result<NodeId> {
        let [ci, h, wd] = match self.value(x).shape() {
            [a, b, c] => [*a, *b, *c],
            other => {
                return Err(Error::Shape(format!(
                    "conv2d input: expected rank 3, got {other:?}"
                )))
            }
        };
        let [co, ci2, kh, kw] = match self.value(w).shape() {
            [a, b, c, d] => [*a, *b, *c, *d],
            other => {
                return Err(Error::Shape(format!(
                    "conv2d kernel: expected rank 4, got {other:?}"
                )))
            }
        };
        if ci != ci2 {
            return Err(Error::Shape(format!(
                "conv2d: input has {ci} channels, kernel expects {ci2}"
            )));
        }
        if self.value(b).shape() != [co] {
            return Err(Error::Shape(format!(
                "conv2d: bias {:?} does not match {co} output channels",
                self.value(b).shape()
            )));
        }
        if stride == 0 || h + 2 * pad < kh || wd + 2 * pad < kw {
            return Err(Error::Shape(format!(
                "conv2d: kernel {kh}x{kw} does not fit {h}x{wd} input with pad {pad}"
            )));
        }
        let oh = (h + 2 * pad - kh) / stride + 1;
        let ow = (wd + 2 * pad - kw) / stride + 1;

        let xv = self.value(x).values();
        let wv = self.value(w).values();
        let bv = self.value(b).values();
        let mut out = vec![0.0; co * oh * ow];
        for c_out in 0..co {
            let kbase = c_out * ci * kh * kw;
            for orow in 0..oh {
                for ocol in 0..ow {
                    let mut acc = bv[c_out];
                    for c_in in 0..ci {
                        let xbase = c_in * h * wd;
                        let kcbase = kbase + c_in * kh * kw;
                        for krow in 0..kh {
                            let irow = (orow * stride + krow) as isize - pad as isize;
                            if irow < 0 || irow as usize >= h {
                                continue;
                            }
                            let xrow = xbase + irow as usize * wd;
                            for kcol in 0..kw {
                                let icol = (ocol * stride + kcol) as isize - pad as isize;
                                if icol < 0 || icol as usize >= wd {
                                    continue;
                                }
                                acc += xv[xrow + icol as usize] * wv[kcbase + krow * kw + kcol];
                            }
                        }
                    }
                    out[(c_out * oh + orow) * ow + ocol] = acc;
                }
            }
        }
        let rg = self.needs_grad(&[x, w, b]);
        Ok(self.push(
            Op::Conv2d {
                x,
                w,
                b,
                stride,
                pad,
            },
            Tensor::new(&[co, oh, ow], out)?,
            rg,
        ))
    }

    pub fn global_avg_pool(&mut self, x: NodeId) -> Result<NodeId> {
        let [c, h, w] = match self.value(x).shape() {
            [a, b, cc] => [*a, *b, *cc],
            other => {
                return Err(Error::Shape(format!(
                    "global_avg_pool: expected rank 3, got {other:?}"
                )))
            }
        };
        let xv = self.value(x).values();
        let inv = 1.0 / (h * w) as f64;
        let out: Vec<f64> = (0..c)
            .map(|ch| xv[ch * h * w..(ch + 1) * h * w].iter().sum::<f64>() * inv)
            .collect();
        let rg = self.needs_grad(&[x]);
        Ok(self.push(Op::GlobalAvgPool(x), Tensor::new(&[1, c], out)?, rg))
    }

    /// Reverse sweep from a scalar node. Gradients land in each node's grad
    /// slot, replacing whatever a previous backward left there. Leaves that
    /// require gradients but cannot reach the target end up with zeros.
    pub fn backward(&mut self, target: NodeId) -> Result<()> {
        if self.value(target).len() != 1 {
            return Err(Error::Contract(format!(
                "backward target must be scalar, got shape {:?}",
                self.value(target).shape()
            )));
        }
        for node in &mut self.nodes {
            node.grad = if node.requires_grad {
                Some(vec![0.0; node.value.len()])
            } else {
                None
            };
        }
        if let Some(g) = self.nodes[target.0].grad.as_mut() {
            g[0] = 1.0;
        }

        // Inputs always precede their consumers, so nothing after the target
        // can feed it and the sweep may start at the target itself. When the
        // target depends on no parameter there is nothing to propagate.
        if self.nodes[target.0].requires_grad {
            for i in (0..=target.0).rev() {
                self.propagate(i)?;
            }
        }

        // Mirror leaf gradients onto the tensors themselves.
        for node in &mut self.nodes {
            if matches!(node.op, Op::Leaf) {
                let g = node.grad.clone();
                node.value.set_grad(g);
            }
        }
        Ok(())
    }

    fn propagate(&mut self, i: usize) -> Result<()> {
        let (before, rest) = self.nodes.split_at_mut(i);
        let node = &mut rest[0];
        if !node.requires_grad {
            return Ok(());
        }
        let gy: &[f64] = node.grad.as_deref().expect("allocated by backward");
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = {
                    let s = before[a.0].value.shape();
                    (s[0], s[1])
                };
                let n = before[b.0].value.shape()[1];
                if before[a.0].requires_grad {
                    let bt = before[b.0].value.transposed()?;
                    let ga = before[a.0].grad.as_mut().expect("requires grad");
                    matmul_acc(gy, bt.values(), m, n, k, ga);
                }
                if before[b.0].requires_grad {
                    let at = before[a.0].value.transposed()?;
                    let gb = before[b.0].grad.as_mut().expect("requires grad");
                    matmul_acc(at.values(), gy, k, m, n, gb);
                }
            }
            Op::Transpose(a) => {
                if before[a.0].requires_grad {
                    let (m, n) = {
                        let s = node.value.shape();
                        (s[0], s[1])
                    };
                    let ga = before[a.0].grad.as_mut().expect("requires grad");
                    for r in 0..m {
                        for c in 0..n {
                            ga[c * m + r] += gy[r * n + c];
                        }
                    }
                }
            }
            Op::Add(a, b) => {
                for src in [*a, *b] {
                    if before[src.0].requires_grad {
                        let g = before[src.0].grad.as_mut().expect("requires grad");
                        for (gi, &gyi) in g.iter_mut().zip(gy) {
                            *gi += gyi;
                        }
                    }
                }
            }
            Op::AddRowBias(a, bias) => {
                let n = node.value.shape()[1];
                if before[a.0].requires_grad {
                    let g = before[a.0].grad.as_mut().expect("requires grad");
                    for (gi, &gyi) in g.iter_mut().zip(gy) {
                        *gi += gyi;
                    }
                }
                if before[bias.0].requires_grad {
                    let g = before[bias.0].grad.as_mut().expect("requires grad");
                    for (idx, &gyi) in gy.iter().enumerate() {
                        g[idx % n] += gyi;
                    }
                }
            }
            Op::Scale(a, c) => {
                if before[a.0].requires_grad {
                    let c = *c;
                    let g = before[a.0].grad.as_mut().expect("requires grad");
                    for (gi, &gyi) in g.iter_mut().zip(gy) {
                        *gi += c * gyi;
                    }
                }
            }
            Op::MulScalar(a, s) => {
                let sv = before[s.0].value.values()[0];
                if before[a.0].requires_grad {
                    let g = before[a.0].grad.as_mut().expect("requires grad");
                    for (gi, &gyi) in g.iter_mut().zip(gy) {
                        *gi += sv * gyi;
                    }
                }
                if before[s.0].requires_grad {
                    let dot: f64 = before[a.0]
                        .value
                        .values()
                        .iter()
                        .zip(gy)
                        .map(|(av, gyi)| av * gyi)
                        .sum();
                    before[s.0].grad.as_mut().expect("requires grad")[0] += dot;
                }
            }
            Op::Exp(a) => {
                if before[a.0].requires_grad {
                    let yv = node.value.values();
                    let g = before[a.0].grad.as_mut().expect("requires grad");
                    for ((gi, &gyi), &yi) in g.iter_mut().zip(gy).zip(yv) {
                        *gi += gyi * yi;
                    }
                }
            }
            Op::Sin(a) => {
                if before[a.0].requires_grad {
                    let (ga, av) = grad_and_input(&mut before[a.0]);
                    for ((gi, &gyi), &ai) in ga.iter_mut().zip(gy).zip(av) {
                        *gi += gyi * ai.cos();
                    }
                }
            }
            Op::Relu(a) => {
                if before[a.0].requires_grad {
                    let (ga, av) = grad_and_input(&mut before[a.0]);
                    for ((gi, &gyi), &ai) in ga.iter_mut().zip(gy).zip(av) {
                        if ai > 0.0 {
                            *gi += gyi;
                        }
                    }
                }
            }
            Op::L2NormalizeRows(a) => {
                if before[a.0].requires_grad {
                    let (m, n) = {
                        let s = node.value.shape();
                        (s[0], s[1])
                    };
                    let yv = node.value.values();
                    let (ga, xv) = grad_and_input(&mut before[a.0]);
                    for r in 0..m {
                        let x = &xv[r * n..(r + 1) * n];
                        let y = &yv[r * n..(r + 1) * n];
                        let gyr = &gy[r * n..(r + 1) * n];
                        let nrm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                        let ydot: f64 = y.iter().zip(gyr).map(|(yi, gi)| yi * gi).sum();
                        let gx = &mut ga[r * n..(r + 1) * n];
                        for j in 0..n {
                            gx[j] += (gyr[j] - y[j] * ydot) / nrm;
                        }
                    }
                }
            }
            Op::LogSoftmaxRows(a) => {
                if before[a.0].requires_grad {
                    let (m, n) = {
                        let s = node.value.shape();
                        (s[0], s[1])
                    };
                    let yv = node.value.values();
                    let ga = before[a.0].grad.as_mut().expect("requires grad");
                    for r in 0..m {
                        let y = &yv[r * n..(r + 1) * n];
                        let gyr = &gy[r * n..(r + 1) * n];
                        let gsum: f64 = gyr.iter().sum();
                        let gx = &mut ga[r * n..(r + 1) * n];
                        for j in 0..n {
                            gx[j] += gyr[j] - y[j].exp() * gsum;
                        }
                    }
                }
            }
            Op::Diag(a) => {
                if before[a.0].requires_grad {
                    let n = node.value.len();
                    let ga = before[a.0].grad.as_mut().expect("requires grad");
                    for (j, &gyj) in gy.iter().enumerate() {
                        ga[j * n + j] += gyj;
                    }
                }
            }
            Op::Mean(a) => {
                if before[a.0].requires_grad {
                    let ga = before[a.0].grad.as_mut().expect("requires grad");
                    let c = gy[0] / ga.len() as f64;
                    for gi in ga.iter_mut() {
                        *gi += c;
                    }
                }
            }
            Op::Sum(a) => {
                if before[a.0].requires_grad {
                    let ga = before[a.0].grad.as_mut().expect("requires grad");
                    for gi in ga.iter_mut() {
                        *gi += gy[0];
                    }
                }
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let len = before[p.0].value.len();
                    if before[p.0].requires_grad {
                        let g = before[p.0].grad.as_mut().expect("requires grad");
                        for (gi, &gyi) in g.iter_mut().zip(&gy[offset..offset + len]) {
                            *gi += gyi;
                        }
                    }
                    offset += len;
                }
            }
            Op::Conv2d {
                x,
                w,
                b,
                stride,
                pad,
            } => {
                conv2d_backward(before, &node.value, gy, *x, *w, *b, *stride, *pad);
            }
            Op::GlobalAvgPool(x) => {
                if before[x.0].requires_grad {
                    let (c, h, w) = {
                        let s = before[x.0].value.shape();
                        (s[0], s[1], s[2])
                    };
                    let inv = 1.0 / (h * w) as f64;
                    let g = before[x.0].grad.as_mut().expect("requires grad");
                    for ch in 0..c {
                        let gc = gy[ch] * inv;
                        for v in g[ch * h * w..(ch + 1) * h * w].iter_mut() {
                            *v += gc;
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

#[allow(clippy::too_many_arguments)]
fn conv2d_backward(
    before: &mut [Node],
    out_value: &Tensor,
    gy: &[f64],
    x: NodeId,
    w: NodeId,
    b: NodeId,
    stride: usize,
    pad: usize,
) {
    let (co, oh, ow) = {
        let s = out_value.shape();
        (s[0], s[1], s[2])
    };
    let (ci, h, wd) = {
        let s = before[x.0].value.shape();
        (s[0], s[1], s[2])
    };
    let (kh, kw) = {
        let s = before[w.0].value.shape();
        (s[2], s[3])
    };

    if before[b.0].requires_grad {
        let gb = before[b.0].grad.as_mut().expect("requires grad");
        for c_out in 0..co {
            gb[c_out] += gy[c_out * oh * ow..(c_out + 1) * oh * ow]
                .iter()
                .sum::<f64>();
        }
    }

    if before[w.0].requires_grad {
        let xv = before[x.0].value.values().to_vec();
        let gw = before[w.0].grad.as_mut().expect("requires grad");
        for c_out in 0..co {
            let kbase = c_out * ci * kh * kw;
            for orow in 0..oh {
                for ocol in 0..ow {
                    let gyo = gy[(c_out * oh + orow) * ow + ocol];
                    if gyo == 0.0 {
                        continue;
                    }
                    for c_in in 0..ci {
                        let xbase = c_in * h * wd;
                        let kcbase = kbase + c_in * kh * kw;
                        for krow in 0..kh {
                            let irow = (orow * stride + krow) as isize - pad as isize;
                            if irow < 0 || irow as usize >= h {
                                continue;
                            }
                            let xrow = xbase + irow as usize * wd;
                            for kcol in 0..kw {
                                let icol = (ocol * stride + kcol) as isize - pad as isize;
                                if icol < 0 || icol as usize >= wd {
                                    continue;
                                }
                                gw[kcbase + krow * kw + kcol] += gyo * xv[xrow + icol as usize];
                            }
                        }
                    }
                }
            }
        }
    }

    if before[x.0].requires_grad {
        let wv = before[w.0].value.values().to_vec();
        let gx = before[x.0].grad.as_mut().expect("requires grad");
        for c_out in 0..co {
            let kbase = c_out * ci * kh * kw;
            for orow in 0..oh {
                for ocol in 0..ow {
                    let gyo = gy[(c_out * oh + orow) * ow + ocol];
                    if gyo == 0.0 {
                        continue;
                    }
                    for c_in in 0..ci {
                        let xbase = c_in * h * wd;
                        let kcbase = kbase + c_in * kh * kw;
                        for krow in 0..kh {
                            let irow = (orow * stride + krow) as isize - pad as isize;
                            if irow < 0 || irow as usize >= h {
                                continue;
                            }
                            let xrow = xbase + irow as usize * wd;
                            for kcol in 0..kw {
                                let icol = (ocol * stride + kcol) as isize - pad as isize;
                                if icol < 0 || icol as usize >= wd {
                                    continue;
                                }
                                gx[xrow + icol as usize] += gyo * wv[kcbase + krow * kw + kcol];
                            }
                        }
                    }
                }
            }
        }
    }
}
