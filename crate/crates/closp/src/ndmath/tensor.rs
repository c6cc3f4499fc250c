use crate::error::{Error, Result};

/// Dense row-major tensor of 64-bit floats.
///
/// Rank is the length of `shape`: vectors are rank 1, matrices rank 2, and
/// images rank 3 (channels, rows, columns). The gradient buffer, when
/// present, always has the same number of elements as `values`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    values: Vec<f64>,
    grad: Option<Vec<f64>>,
}

impl Tensor {
    pub fn new(shape: &[usize], values: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.iter().any(|&e| e == 0) {
            return Err(Error::Shape(format!(
                "extents must be positive, got {shape:?}"
            )));
        }
        let expect: usize = shape.iter().product();
        if expect != values.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} implies {expect} values, got {}",
                values.len()
            )));
        }
        Ok(Self {
            shape: shape.to_vec(),
            values,
            grad: None,
        })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        assert!(
            !shape.is_empty() && shape.iter().all(|&e| e > 0),
            "extents must be positive, got {shape:?}"
        );
        Self {
            shape: shape.to_vec(),
            values: vec![0.0; shape.iter().product()],
            grad: None,
        }
    }

    pub fn scalar(v: f64) -> Self {
        Self {
            shape: vec![1],
            values: vec![v],
            grad: None,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false // positive extents are a construction invariant
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mutable access to the raw buffer. The shape is fixed at construction,
    /// so this cannot break the shape/length invariant.
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn grad(&self) -> Option<&[f64]> {
        self.grad.as_deref()
    }

    pub(crate) fn set_grad(&mut self, g: Option<Vec<f64>>) {
        if let Some(buf) = &g {
            debug_assert_eq!(buf.len(), self.values.len());
        }
        self.grad = g;
    }

    /// Row-major element lookup; panics on a rank/bounds mismatch since that
    /// is always a programming error rather than a data error.
    pub fn at(&self, index: &[usize]) -> f64 {
        assert_eq!(index.len(), self.shape.len(), "rank mismatch in at()");
        let mut flat = 0;
        for (axis, &i) in index.iter().enumerate() {
            assert!(i < self.shape[axis], "index {index:?} out of bounds");
            flat = flat * self.shape[axis] + i;
        }
        self.values[flat]
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!(
                "add: {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Tensor {
            shape: self.shape.clone(),
            values,
            grad: None,
        })
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!(
                "sub: {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Tensor {
            shape: self.shape.clone(),
            values,
            grad: None,
        })
    }

    pub fn scale(&self, c: f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
            grad: None,
        }
    }

    /// Matrix product of two rank-2 tensors.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        let (m, k) = as_matrix_dims(self, "matmul left")?;
        let (k2, n) = as_matrix_dims(other, "matmul right")?;
        if k != k2 {
            return Err(Error::Shape(format!(
                "matmul: inner extents differ, {m}x{k} vs {k2}x{n}"
            )));
        }
        let mut out = vec![0.0; m * n];
        matmul_into(&self.values, &other.values, m, k, n, &mut out);
        Ok(Tensor {
            shape: vec![m, n],
            values: out,
            grad: None,
        })
    }

    pub fn transposed(&self) -> Result<Tensor> {
        let (m, n) = as_matrix_dims(self, "transpose")?;
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = self.values[i * n + j];
            }
        }
        Ok(Tensor {
            shape: vec![n, m],
            values: out,
            grad: None,
        })
    }

    pub fn dot(&self, other: &Tensor) -> Result<f64> {
        if self.shape() != other.shape() {
            return Err(Error::Shape(format!(
                "dot: {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum())
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.values.len() as f64
    }

    /// Euclidean normalization of a rank-1 tensor. The zero vector has no
    /// direction, so it is rejected rather than silently returned.
    pub fn l2_normalized(&self) -> Result<Tensor> {
        if self.rank() != 1 {
            return Err(Error::Shape(format!(
                "l2_normalize expects a vector, got rank {}",
                self.rank()
            )));
        }
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::Degenerate("cannot normalize a zero vector".into()));
        }
        Ok(self.scale(1.0 / n))
    }

    /// Log-softmax of a rank-1 tensor, stable under max-subtraction.
    pub fn log_softmax_row(&self) -> Result<Tensor> {
        if self.rank() != 1 {
            return Err(Error::Shape(format!(
                "log_softmax_row expects a vector, got rank {}",
                self.rank()
            )));
        }
        let mut out = vec![0.0; self.values.len()];
        log_softmax_into(&self.values, &mut out)?;
        Ok(Tensor {
            shape: self.shape.clone(),
            values: out,
            grad: None,
        })
    }
}

pub(crate) fn as_matrix_dims(t: &Tensor, what: &str) -> Result<(usize, usize)> {
    match t.shape() {
        [m, n] => Ok((*m, *n)),
        other => Err(Error::Shape(format!(
            "{what}: expected rank 2, got shape {other:?}"
        ))),
    }
}

/// c += nothing; c is fully overwritten. Loop order keeps the inner walk
/// contiguous in both b and c.
pub(crate) fn matmul_into(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, c: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    c.fill(0.0);
    for i in 0..m {
        let crow = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for j in 0..n {
                crow[j] += aip * brow[j];
            }
        }
    }
}

/// Accumulating variant used by the backward pass.
pub(crate) fn matmul_acc(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, c: &mut [f64]) {
    debug_assert_eq!(c.len(), m * n);
    for i in 0..m {
        let crow = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for j in 0..n {
                crow[j] += aip * brow[j];
            }
        }
    }
}

pub(crate) fn log_softmax_into(row: &[f64], out: &mut [f64]) -> Result<()> {
    if row.is_empty() {
        return Err(Error::Shape("log_softmax of an empty row".into()));
    }
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for &v in row {
        sum += (v - max).exp();
    }
    let log_sum = sum.ln();
    for (o, &v) in out.iter_mut().zip(row) {
        *o = v - max - log_sum;
    }
    Ok(())
}

/// Normalizes each row of a rank-2 buffer in place into `out`, returning the
/// per-row norms (the backward pass needs them).
pub(crate) fn l2_normalize_rows_into(
    x: &[f64],
    rows: usize,
    cols: usize,
    out: &mut [f64],
) -> Result<Vec<f64>> {
    let mut norms = Vec::with_capacity(rows);
    for r in 0..rows {
        let row = &x[r * cols..(r + 1) * cols];
        let n = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n == 0.0 {
            return Err(Error::Degenerate(format!(
                "cannot normalize zero row {r}"
            )));
        }
        for (o, &v) in out[r * cols..(r + 1) * cols].iter_mut().zip(row) {
            *o = v / n;
        }
        norms.push(n);
    }
    Ok(norms)
}
