use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::math;
use super::NumError;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DenseVector {
    data: Vec<f64>,
}

impl DenseVector {
    pub fn zeros(len: usize) -> Self {
        Self {
            data: vec![0.0; len],
        }
    }

    pub fn from_vec(data: Vec<f64>) -> Result<Self, NumError> {
        if data.iter().any(|x| !x.is_finite()) {
            return Err(NumError::NonFinite(String::from("vector")));
        }
        Ok(Self { data })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }
}

impl From<&[f64]> for DenseVector {
    fn from(data: &[f64]) -> Self {
        Self {
            data: data.to_vec(),
        }
    }
}

/// Row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, NumError> {
        if data.len() != rows * cols {
            return Err(NumError::Dimension {
                context: "matrix construction",
                expected: rows * cols,
                found: data.len(),
            });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(NumError::NonFinite(format!("{rows}x{cols} matrix")));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix entry by entry; `f(i, j)` is called in row-major order.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn fill(&mut self, value: f64) {
        self.data.iter_mut().for_each(|x| *x = value);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// `out = self · v`. Panics on shape mismatch; see [`matvec`] for the
    /// checked variant.
    pub fn matvec_into(&self, v: &[f64], out: &mut [f64]) {
        assert_eq!(v.len(), self.cols);
        assert_eq!(out.len(), self.rows);
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            let mut acc = 0.0;
            for j in 0..self.cols {
                acc += row[j] * v[j];
            }
            *o = acc;
        }
    }

    /// `out += selfᵀ · v`.
    pub fn matvec_transpose_acc(&self, v: &[f64], out: &mut [f64]) {
        assert_eq!(v.len(), self.rows);
        assert_eq!(out.len(), self.cols);
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            for (o, &m) in out.iter_mut().zip(row) {
                *o += m * vi;
            }
        }
    }

    /// `self += a · bᵀ`.
    pub fn add_outer(&mut self, a: &[f64], b: &[f64]) {
        assert_eq!(a.len(), self.rows);
        assert_eq!(b.len(), self.cols);
        for (i, &ai) in a.iter().enumerate() {
            if ai == 0.0 {
                continue;
            }
            let row = &mut self.data[i * self.cols..(i + 1) * self.cols];
            for (r, &bj) in row.iter_mut().zip(b) {
                *r += ai * bj;
            }
        }
    }
}

pub fn matvec(m: &DenseMatrix, v: &DenseVector) -> Result<DenseVector, NumError> {
    if m.cols != v.len() {
        return Err(NumError::Dimension {
            context: "matvec",
            expected: m.cols,
            found: v.len(),
        });
    }
    let mut out = DenseVector::zeros(m.rows);
    m.matvec_into(v.as_slice(), out.as_mut_slice());
    Ok(out)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

pub fn relu(v: &DenseVector) -> DenseVector {
    DenseVector {
        data: v.data.iter().map(|&x| if x > 0.0 { x } else { 0.0 }).collect(),
    }
}

/// Subgradient of ReLU, taken as 0 at exactly 0.
pub fn relu_grad(v: &DenseVector) -> DenseVector {
    DenseVector {
        data: v
            .data
            .iter()
            .map(|&x| if x > 0.0 { 1.0 } else { 0.0 })
            .collect(),
    }
}

// Smallest positive subnormal and largest double below one.
const SIGMOID_FLOOR: f64 = 5e-324;
const SIGMOID_CEIL: f64 = 1.0 - f64::EPSILON / 2.0;

/// Logistic function. The result is kept inside the open interval (0, 1):
/// saturated tails are pinned to the nearest representable value.
pub fn sigmoid(x: f64) -> f64 {
    let s = if x >= 0.0 {
        1.0 / (1.0 + math::exp(-x))
    } else {
        let e = math::exp(x);
        e / (1.0 + e)
    };
    s.clamp(SIGMOID_FLOOR, SIGMOID_CEIL)
}

/// A named view of one parameter array.
pub struct TensorRef<'a> {
    pub name: String,
    pub data: &'a [f64],
}

/// A collection of parameter arrays visited in a fixed order.
///
/// `tensors` and `tensors_mut` must yield the same arrays in the same order.
pub trait Parameters {
    fn tensors(&self) -> Vec<TensorRef<'_>>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;
}

impl Parameters for DenseVector {
    fn tensors(&self) -> Vec<TensorRef<'_>> {
        vec![TensorRef {
            name: String::from("vector"),
            data: &self.data,
        }]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.data]
    }
}

impl Parameters for DenseMatrix {
    fn tensors(&self) -> Vec<TensorRef<'_>> {
        vec![TensorRef {
            name: String::from("matrix"),
            data: &self.data,
        }]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.data]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng as _;

    fn triple_loop(m: &DenseMatrix, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; m.rows()];
        for i in 0..m.rows() {
            let mut s = 0.0;
            for j in 0..m.cols() {
                s += m.as_slice()[i * m.cols() + j] * v[j];
            }
            out[i] = s;
        }
        out
    }

    #[test]
    fn identity_matvec() {
        let v = DenseVector::from_vec(vec![1.0, 2.0, 3.0]).unwrap();
        let out = matvec(&DenseMatrix::identity(3), &v).unwrap();
        assert_eq!(out.as_slice(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn zero_matvec() {
        let v = DenseVector::from_vec(vec![5.0, 7.0]).unwrap();
        let out = matvec(&DenseMatrix::zeros(2, 2), &v).unwrap();
        assert_eq!(out.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn matvec_shape_mismatch() {
        let v = DenseVector::zeros(2);
        let err = matvec(&DenseMatrix::zeros(3, 4), &v).unwrap_err();
        assert!(matches!(err, NumError::Dimension { expected: 4, found: 2, .. }));
    }

    #[test]
    fn matvec_matches_loop_oracle() {
        let mut rng = crate::numcore::seeded_rng(11);
        for _ in 0..20 {
            let m = DenseMatrix::from_fn(4, 3, |_, _| rng.gen_range(-2.0..2.0));
            let v: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let got = matvec(&m, &DenseVector::from(v.as_slice())).unwrap();
            assert_eq!(got.as_slice(), triple_loop(&m, &v).as_slice());
        }
    }

    #[test]
    fn from_vec_rejects_nan() {
        assert!(DenseMatrix::from_vec(1, 1, vec![f64::NAN]).is_err());
        assert!(DenseVector::from_vec(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn relu_and_grad() {
        let v = DenseVector::from_vec(vec![-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(relu(&v).as_slice(), &[0.0, 0.0, 2.0]);
        assert_eq!(relu_grad(&v).as_slice(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn sigmoid_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        let tiny = sigmoid(-1000.0);
        assert!(tiny > 0.0 && tiny <= 1e-300);
        let big = sigmoid(1000.0);
        assert!(big < 1.0 && big > 0.999);
        // 1/(1+e^30) at 40 digits: 9.357622968839298953...e-14
        assert!((sigmoid(-30.0) - 9.357_622_968_839_299e-14).abs() < 1e-26);
    }

    #[test]
    fn transpose_and_outer() {
        let m = DenseMatrix::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let mut out = vec![0.0; 3];
        m.matvec_transpose_acc(&[1.0, -1.0], &mut out);
        assert_eq!(out, vec![-3.0, -3.0, -3.0]);
        let mut z = DenseMatrix::zeros(2, 3);
        z.add_outer(&[1.0, 2.0], &[1.0, 0.0, -1.0]);
        assert_eq!(z.as_slice(), &[1.0, 0.0, -1.0, 2.0, 0.0, -2.0]);
    }

    proptest! {
        #[test]
        fn relu_idempotent(xs in proptest::collection::vec(-10.0f64..10.0, 0..16)) {
            let v = DenseVector::from_vec(xs).unwrap();
            prop_assert_eq!(relu(&relu(&v)), relu(&v));
        }

        #[test]
        fn sigmoid_symmetry(x in -700.0f64..700.0) {
            prop_assert!((sigmoid(x) + sigmoid(-x) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn sigmoid_open_interval_and_monotone(x in -1e6f64..1e6, dx in 0.0f64..10.0) {
            let a = sigmoid(x);
            prop_assert!(a > 0.0 && a < 1.0);
            prop_assert!(sigmoid(x + dx) >= a);
        }
    }
}
