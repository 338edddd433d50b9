//! Dense row-major tensors.
//!
//! A [`Tensor`] owns a flat buffer laid out with the last axis fastest. The
//! element type is a type parameter (`f32` for training and inference, `f64`
//! for gradient checks), so mixing dtypes inside one operation is a compile
//! error rather than a runtime one. Binary operations require exactly
//! matching shapes; there is no broadcasting apart from scalar arguments.

use std::fmt::{self, Debug, Display};

use num_traits::Float;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::{flops, parallel};

/// Element type tag, stored in weight files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DType {
    F32,
    F64,
}

impl DType {
    pub fn code(self) -> u8 {
        match self {
            DType::F32 => 0,
            DType::F64 => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(DType::F32),
            1 => Some(DType::F64),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DType::F32 => "float32",
            DType::F64 => "float64",
        }
    }

    pub fn size(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::F64 => 8,
        }
    }
}

impl Display for DType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Floating-point element types a [`Tensor`] can hold.
pub trait Scalar: Float + Default + Debug + Display + Send + Sync + 'static {
    const DTYPE: DType;

    fn from_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;
    fn write_le(self, out: &mut Vec<u8>);
    /// Decodes one value from exactly `DTYPE.size()` little-endian bytes.
    fn read_le(bytes: &[u8]) -> Self;
}

impl Scalar for f32 {
    const DTYPE: DType = DType::F32;

    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn read_le(bytes: &[u8]) -> Self {
        f32::from_le_bytes(bytes.try_into().expect("4 bytes"))
    }
}

impl Scalar for f64 {
    const DTYPE: DType = DType::F64;

    fn from_f64(v: f64) -> Self {
        v
    }
    fn as_f64(self) -> f64 {
        self
    }
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn read_le(bytes: &[u8]) -> Self {
        f64::from_le_bytes(bytes.try_into().expect("8 bytes"))
    }
}

#[derive(Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

fn check_shape(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() {
        return Err(Error::shape("shape must have at least one dimension"));
    }
    if shape.contains(&0) {
        return Err(Error::shape(format!("zero-sized dimension in {shape:?}")));
    }
    shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::shape(format!("element count of {shape:?} overflows")))
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(shape: &[usize]) -> Result<Self> {
        Self::full(shape, T::zero())
    }

    pub fn full(shape: &[usize], value: T) -> Result<Self> {
        let n = check_shape(shape)?;
        Ok(Tensor {
            shape: shape.to_vec(),
            data: vec![value; n],
        })
    }

    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Result<Self> {
        let n = check_shape(shape)?;
        if n != data.len() {
            return Err(Error::shape(format!(
                "shape {shape:?} needs {n} elements, got {}",
                data.len()
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    /// Builds a tensor by evaluating `f` at every flat offset.
    pub fn from_fn(shape: &[usize], f: impl FnMut(usize) -> T) -> Result<Self> {
        let n = check_shape(shape)?;
        Ok(Tensor {
            shape: shape.to_vec(),
            data: (0..n).map(f).collect(),
        })
    }

    pub fn zeros_like(&self) -> Self {
        Tensor {
            shape: self.shape.clone(),
            data: vec![T::zero(); self.data.len()],
        }
    }

    /// `n × n` identity matrix.
    pub fn eye(n: usize) -> Result<Self> {
        Self::from_fn(
            &[n, n],
            |i| {
                if i / n == i % n {
                    T::one()
                } else {
                    T::zero()
                }
            },
        )
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    /// Mutable access to the buffer. The shape cannot change through it.
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.shape.len()];
        for i in (0..self.shape.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.shape[i + 1];
        }
        strides
    }

    pub fn offset(&self, index: &[usize]) -> Result<usize> {
        if index.len() != self.shape.len() {
            return Err(Error::shape(format!(
                "index {index:?} has rank {}, tensor has shape {:?}",
                index.len(),
                self.shape
            )));
        }
        let mut off = 0;
        for (&i, &d) in index.iter().zip(&self.shape) {
            if i >= d {
                return Err(Error::shape(format!(
                    "index {index:?} out of bounds for shape {:?}",
                    self.shape
                )));
            }
            off = off * d + i;
        }
        Ok(off)
    }

    /// Inverse of [`Tensor::offset`].
    pub fn unravel(&self, mut offset: usize) -> Vec<usize> {
        let mut index = vec![0; self.shape.len()];
        for (slot, &d) in index.iter_mut().zip(&self.shape).rev() {
            *slot = offset % d;
            offset /= d;
        }
        index
    }

    pub fn get(&self, index: &[usize]) -> Result<T> {
        Ok(self.data[self.offset(index)?])
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Self> {
        self.clone().into_shape(shape)
    }

    /// Reinterprets the buffer under a new shape without copying.
    pub fn into_shape(self, shape: &[usize]) -> Result<Self> {
        let n = check_shape(shape)?;
        if n != self.data.len() {
            return Err(Error::shape(format!(
                "cannot reshape {:?} into {shape:?}",
                self.shape
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data: self.data,
        })
    }

    fn expect_rank(&self, op: &str, rank: usize) -> Result<()> {
        if self.rank() != rank {
            return Err(Error::shape(format!(
                "{op} expects a rank-{rank} tensor, got shape {:?}",
                self.shape
            )));
        }
        Ok(())
    }

    fn expect_same_shape(&self, op: &str, other: &Self) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::shape(format!(
                "{op}: shape mismatch {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        Ok(())
    }

    /// Matrix product `self[m×k] · other[k×n]`.
    ///
    /// Every output entry accumulates its k products in ascending k order
    /// starting from zero, so results are bitwise reproducible and equal to a
    /// naive triple loop. Records `m·k·n` fully-connected multiplies with the
    /// active [`flops`] counter.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        self.expect_rank("matmul", 2)?;
        other.expect_rank("matmul", 2)?;
        let (m, k) = (self.shape[0], self.shape[1]);
        let (k2, n) = (other.shape[0], other.shape[1]);
        if k != k2 {
            return Err(Error::shape(format!(
                "matmul: inner dimensions differ, {:?} · {:?}",
                self.shape, other.shape
            )));
        }
        flops::record(flops::Kind::Fc, (m * k * n) as u64);

        let mut out = vec![T::zero(); m * n];
        let a = &self.data;
        let b = &other.data;
        let row = |i: usize, out_row: &mut [T]| {
            let a_row = &a[i * k..(i + 1) * k];
            for (kk, &aik) in a_row.iter().enumerate() {
                let b_row = &b[kk * n..(kk + 1) * n];
                for (o, &bkj) in out_row.iter_mut().zip(b_row) {
                    *o = *o + aik * bkj;
                }
            }
        };
        match parallel::pool() {
            Some(pool) if m >= 16 => pool.install(|| {
                out.par_chunks_mut(n)
                    .enumerate()
                    .for_each(|(i, out_row)| row(i, out_row))
            }),
            _ => out
                .chunks_mut(n)
                .enumerate()
                .for_each(|(i, out_row)| row(i, out_row)),
        }
        Ok(Tensor {
            shape: vec![m, n],
            data: out,
        })
    }

    /// Transpose of a rank-2 tensor.
    pub fn transpose(&self) -> Result<Self> {
        self.expect_rank("transpose", 2)?;
        let (r, c) = (self.shape[0], self.shape[1]);
        let mut out = Vec::with_capacity(r * c);
        for j in 0..c {
            out.extend((0..r).map(|i| self.data[i * c + j]));
        }
        Ok(Tensor {
            shape: vec![c, r],
            data: out,
        })
    }

    /// Swaps the last two axes of a rank-3 tensor: `[b, r, c] -> [b, c, r]`.
    pub fn transpose_last2(&self) -> Result<Self> {
        self.expect_rank("transpose_last2", 3)?;
        let (b, r, c) = (self.shape[0], self.shape[1], self.shape[2]);
        let mut out = Vec::with_capacity(b * r * c);
        for bi in 0..b {
            let base = bi * r * c;
            for j in 0..c {
                out.extend((0..r).map(|i| self.data[base + i * c + j]));
            }
        }
        Ok(Tensor {
            shape: vec![b, c, r],
            data: out,
        })
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, op: &str, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.expect_same_shape(op, other)?;
        Ok(Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, "sub", |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, "mul", |a, b| a * b)
    }

    /// In-place `self += other`.
    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        self.expect_same_shape("add_assign", other)?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + b;
        }
        Ok(())
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|x| x * s)
    }

    pub fn add_scalar(&self, s: T) -> Self {
        self.map(|x| x + s)
    }

    /// Sum of all entries, left to right.
    pub fn sum(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, &x| acc + x)
    }

    pub fn mean(&self) -> T {
        self.sum() / T::from_f64(self.data.len() as f64)
    }

    /// Sum along `axis`; the axis is removed from the shape (a rank-1 input
    /// yields shape `[1]`).
    pub fn sum_axis(&self, axis: usize) -> Result<Self> {
        if axis >= self.rank() {
            return Err(Error::shape(format!(
                "axis {axis} out of range for shape {:?}",
                self.shape
            )));
        }
        let outer: usize = self.shape[..axis].iter().product();
        let len = self.shape[axis];
        let inner: usize = self.shape[axis + 1..].iter().product();
        let mut out = vec![T::zero(); outer * inner];
        for o in 0..outer {
            for a in 0..len {
                let src = &self.data[(o * len + a) * inner..(o * len + a + 1) * inner];
                for (dst, &v) in out[o * inner..(o + 1) * inner].iter_mut().zip(src) {
                    *dst = *dst + v;
                }
            }
        }
        let mut shape: Vec<usize> = self.shape.clone();
        shape.remove(axis);
        if shape.is_empty() {
            shape.push(1);
        }
        Tensor::from_vec(&shape, out)
    }

    pub fn mean_axis(&self, axis: usize) -> Result<Self> {
        let len = *self.shape.get(axis).ok_or_else(|| {
            Error::shape(format!(
                "axis {axis} out of range for shape {:?}",
                self.shape
            ))
        })?;
        Ok(self
            .sum_axis(axis)?
            .scale(T::one() / T::from_f64(len as f64)))
    }

    /// Inner product over all entries, accumulated left to right.
    pub fn dot(&self, other: &Self) -> Result<T> {
        self.expect_same_shape("dot", other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |acc, (&a, &b)| acc + a * b))
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<T> {
        self.expect_same_shape("max_abs_diff", other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |acc, (&a, &b)| acc.max((a - b).abs())))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| U::from_f64(x.as_f64())).collect(),
        }
    }

    /// Copies rows `[start, end)` of the leading axis.
    pub fn slice_rows(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.shape[0] {
            return Err(Error::shape(format!(
                "row range {start}..{end} invalid for shape {:?}",
                self.shape
            )));
        }
        let row: usize = self.shape[1..].iter().product();
        let mut shape = self.shape.clone();
        shape[0] = end - start;
        Tensor::from_vec(&shape, self.data[start * row..end * row].to_vec())
    }

    /// Gathers rows of the leading axis in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let row: usize = self.shape[1..].iter().product();
        let mut data = Vec::with_capacity(rows.len() * row);
        for &r in rows {
            if r >= self.shape[0] {
                return Err(Error::shape(format!(
                    "row {r} out of range for shape {:?}",
                    self.shape
                )));
            }
            data.extend_from_slice(&self.data[r * row..(r + 1) * row]);
        }
        let mut shape = self.shape.clone();
        shape[0] = rows.len();
        Tensor::from_vec(&shape, data)
    }
}

impl<T: Debug> Debug for Tensor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.shape)
            .field("data", &self.data)
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Xorshift64Star;
    use proptest::prelude::*;

    fn naive_matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                let mut s = 0.0;
                for kk in 0..k {
                    s += a[i * k + kk] * b[kk * n + j];
                }
                out[i * n + j] = s;
            }
        }
        out
    }

    #[test]
    fn zeros_examples() {
        let z = Tensor::<f32>::zeros(&[2, 3]).unwrap();
        assert_eq!(z.numel(), 6);
        assert!(z.data().iter().all(|&x| x == 0.0));
        assert_eq!(Tensor::<f64>::zeros(&[1]).unwrap().data(), &[0.0]);
        assert_eq!(Tensor::<f64>::zeros(&[4, 4, 4]).unwrap().sum(), 0.0);
    }

    #[test]
    fn invalid_shapes_rejected() {
        assert!(matches!(Tensor::<f32>::zeros(&[]), Err(Error::Shape(_))));
        assert!(Tensor::<f32>::zeros(&[3, 0]).is_err());
        assert!(Tensor::<f32>::from_vec(&[2, 2], vec![1.0; 3]).is_err());
    }

    #[test]
    fn matmul_examples() {
        let x = Tensor::from_vec(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(Tensor::<f64>::eye(2).unwrap().matmul(&x).unwrap(), x);
        let a = Tensor::from_vec(&[1, 2], vec![1.0, 2.0]).unwrap();
        let b = Tensor::from_vec(&[2, 1], vec![3.0, 4.0]).unwrap();
        assert_eq!(a.matmul(&b).unwrap().data(), &[11.0]);
    }

    #[test]
    fn matmul_matches_naive_triple_loop_bitwise() {
        let mut rng = Xorshift64Star::new(11);
        let a: Vec<f64> = (0..35).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let b: Vec<f64> = (0..21).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let expected = naive_matmul(&a, &b, 5, 7, 3);
        let ta = Tensor::from_vec(&[5, 7], a).unwrap();
        let tb = Tensor::from_vec(&[7, 3], b).unwrap();
        assert_eq!(ta.matmul(&tb).unwrap().data(), expected.as_slice());
    }

    #[test]
    fn matmul_mismatch_names_both_shapes() {
        let a = Tensor::<f32>::zeros(&[2, 3]).unwrap();
        let b = Tensor::<f32>::zeros(&[2, 3]).unwrap();
        let msg = a.matmul(&b).unwrap_err().to_string();
        assert!(msg.contains("[2, 3] · [2, 3]"), "{msg}");
    }

    #[test]
    fn elementwise_and_reductions() {
        let x = Tensor::from_vec(&[3], vec![1.0f64, 2.0, 3.0]).unwrap();
        assert_eq!(x.add(&x.zeros_like()).unwrap(), x);
        assert_eq!(x.mean(), 2.0);
        let m = Tensor::from_vec(&[2, 2], vec![1.0f64, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m.sum_axis(0).unwrap().data(), &[4.0, 6.0]);
        assert_eq!(m.sum_axis(1).unwrap().data(), &[3.0, 7.0]);
        assert!(x.add(&m).is_err());
        assert!(m.sum_axis(2).is_err());
    }

    #[test]
    fn offsets_are_row_major() {
        let t = Tensor::<f32>::zeros(&[2, 3, 4]).unwrap();
        assert_eq!(t.strides(), vec![12, 4, 1]);
        assert_eq!(t.offset(&[1, 2, 3]).unwrap(), 23);
        assert_eq!(t.unravel(23), vec![1, 2, 3]);
        assert!(t.offset(&[2, 0, 0]).is_err());
    }

    #[test]
    fn transpose_last2_matches_per_batch_transpose() {
        let t = Tensor::from_fn(&[2, 3, 4], |i| i as f64).unwrap();
        let tt = t.transpose_last2().unwrap();
        for b in 0..2 {
            let slab = t.slice_rows(b, b + 1).unwrap().into_shape(&[3, 4]).unwrap();
            let expect = slab.transpose().unwrap();
            let got = tt
                .slice_rows(b, b + 1)
                .unwrap()
                .into_shape(&[4, 3])
                .unwrap();
            assert_eq!(got, expect);
        }
    }

    proptest! {
        #[test]
        fn reshape_round_trip_is_bitwise(data in proptest::collection::vec(-1e6f64..1e6, 24)) {
            let x = Tensor::from_vec(&[2, 3, 4], data).unwrap();
            let back = x.reshape(&[6, 4]).unwrap().reshape(&[2, 3, 4]).unwrap();
            prop_assert_eq!(back, x);
        }

        #[test]
        fn offset_unravel_bijective(i in 0usize..60) {
            let t = Tensor::<f32>::zeros(&[3, 4, 5]).unwrap();
            let idx = t.unravel(i);
            prop_assert_eq!(t.offset(&idx).unwrap(), i);
        }

        #[test]
        fn identity_matmul_is_bitwise(data in proptest::collection::vec(-1e3f32..1e3, 12)) {
            let x = Tensor::from_vec(&[4, 3], data).unwrap();
            prop_assert_eq!(Tensor::eye(4).unwrap().matmul(&x).unwrap(), x.clone());
            prop_assert_eq!(x.matmul(&x.transpose().unwrap()).unwrap(),
                            x.matmul(&x.transpose().unwrap()).unwrap());
        }
    }
}
