//! Dense real tensors of arbitrary order.
//!
//! Storage is column-major: the first index varies fastest, so the entry at
//! zero-based index `(i_1, ..., i_N)` lives at offset
//! `i_1 + d_1 * (i_2 + d_2 * (i_3 + ...))`.
//!
//! Mode-`k` matricization produces a `d_k x (D / d_k)` matrix whose columns
//! are the mode-`k` fibers. The remaining indices are flattened in increasing
//! mode order with the earliest mode varying fastest, i.e. for order 3 and
//! mode 1 (zero-based) the column of `(i_0, i_2)` is `i_0 + d_0 * i_2`.
//! Matricization and its inverse are pure index permutations.
//!
//! Modes and slice indices are zero-based throughout the crate.

use std::io::{Read, Write};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Dense matrix type used for matricizations and slices.
pub type Matrix = DMatrix<f64>;

const MAGIC: &[u8; 4] = b"TNSR";

#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        check_dims(&dims)?;
        let len: usize = dims.iter().product();
        if data.len() != len {
            return Err(Error::Shape(format!(
                "data length {} does not match dims {:?} (expected {})",
                data.len(),
                dims,
                len
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: &[usize]) -> Self {
        check_dims(dims).expect("zero-sized dimension");
        let len = dims.iter().product();
        Self {
            dims: dims.to_vec(),
            data: vec![0.0; len],
        }
    }

    /// Builds a tensor by evaluating `f` at every zero-based multi-index.
    pub fn from_fn(dims: &[usize], mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let mut out = Self::zeros(dims);
        let mut idx = vec![0; dims.len()];
        for value in out.data.iter_mut() {
            *value = f(&idx);
            for (k, i) in idx.iter_mut().enumerate() {
                *i += 1;
                if *i < dims[k] {
                    break;
                }
                *i = 0;
            }
        }
        out
    }

    /// Outer product `v_1 ⊗ v_2 ⊗ ... ⊗ v_N`.
    pub fn outer(vectors: &[&[f64]]) -> Self {
        let dims: Vec<usize> = vectors.iter().map(|v| v.len()).collect();
        Self::from_fn(&dims, |idx| {
            idx.iter().zip(vectors).map(|(&i, v)| v[i]).product()
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dims.len());
        let mut off = 0;
        let mut stride = 1;
        for (&i, &d) in idx.iter().zip(&self.dims) {
            debug_assert!(i < d);
            off += i * stride;
            stride *= d;
        }
        off
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: f64) {
        let off = self.offset(idx);
        self.data[off] = value;
    }

    /// Sum of elementwise products.
    pub fn inner(&self, other: &DenseTensor) -> Result<f64> {
        self.check_same_dims(other)?;
        Ok(dot(&self.data, &other.data))
    }

    pub fn frobenius_norm(&self) -> f64 {
        dot(&self.data, &self.data).sqrt()
    }

    /// `‖self − other‖_F`.
    pub fn distance(&self, other: &DenseTensor) -> Result<f64> {
        self.check_same_dims(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            dims: self.dims.clone(),
            data: self.data.iter().map(|x| c * x).collect(),
        }
    }

    /// `self += alpha * x`.
    pub fn axpy(&mut self, alpha: f64, x: &DenseTensor) -> Result<()> {
        self.check_same_dims(x)?;
        for (a, b) in self.data.iter_mut().zip(&x.data) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn sub(&self, other: &DenseTensor) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(-1.0, other)?;
        Ok(out)
    }

    pub fn add(&self, other: &DenseTensor) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(1.0, other)?;
        Ok(out)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn check_same_dims(&self, other: &DenseTensor) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::Shape(format!(
                "dims {:?} and {:?} differ",
                self.dims, other.dims
            )));
        }
        Ok(())
    }

    /// Mode-`mode` matricization, see the module docs for the column order.
    pub fn matricize(&self, mode: usize) -> Result<Matrix> {
        let (left, d, right) = self.split_at_mode(mode)?;
        let mut m = Matrix::zeros(d, left * right);
        let out = m.as_mut_slice();
        // out is column-major: entry (i, l + left * rho) at i + d * (l + left * rho).
        for rho in 0..right {
            for i in 0..d {
                let src = &self.data[left * (i + d * rho)..left * (i + d * rho) + left];
                for (l, &x) in src.iter().enumerate() {
                    out[i + d * (l + left * rho)] = x;
                }
            }
        }
        Ok(m)
    }

    /// Inverse of [`DenseTensor::matricize`].
    pub fn dematricize(m: &Matrix, mode: usize, dims: &[usize]) -> Result<Self> {
        check_dims(dims)?;
        if mode >= dims.len() {
            return Err(Error::Argument(format!(
                "mode {} out of range for order {}",
                mode,
                dims.len()
            )));
        }
        let d = dims[mode];
        let left: usize = dims[..mode].iter().product();
        let right: usize = dims[mode + 1..].iter().product();
        if m.nrows() != d || m.ncols() != left * right {
            return Err(Error::Shape(format!(
                "{}x{} matrix is not a mode-{} matricization of {:?}",
                m.nrows(),
                m.ncols(),
                mode,
                dims
            )));
        }
        let src = m.as_slice();
        let mut data = vec![0.0; d * left * right];
        for rho in 0..right {
            for i in 0..d {
                let dst = &mut data[left * (i + d * rho)..left * (i + d * rho) + left];
                for (l, x) in dst.iter_mut().enumerate() {
                    *x = src[i + d * (l + left * rho)];
                }
            }
        }
        Ok(Self {
            dims: dims.to_vec(),
            data,
        })
    }

    /// The `d1 x d2` slice `A[:, :, j3]` of an order-3 tensor.
    pub fn slice(&self, j3: usize) -> Result<Matrix> {
        let (d1, d2, d3) = self.order3_dims()?;
        if j3 >= d3 {
            return Err(Error::Argument(format!(
                "slice index {} out of range (d3 = {})",
                j3, d3
            )));
        }
        let block = d1 * d2;
        Ok(Matrix::from_column_slice(
            d1,
            d2,
            &self.data[j3 * block..(j3 + 1) * block],
        ))
    }

    pub fn set_slice(&mut self, j3: usize, m: &Matrix) -> Result<()> {
        let (d1, d2, d3) = self.order3_dims()?;
        if j3 >= d3 {
            return Err(Error::Argument(format!(
                "slice index {} out of range (d3 = {})",
                j3, d3
            )));
        }
        if m.nrows() != d1 || m.ncols() != d2 {
            return Err(Error::Shape(format!(
                "slice must be {}x{}, got {}x{}",
                d1,
                d2,
                m.nrows(),
                m.ncols()
            )));
        }
        let block = d1 * d2;
        self.data[j3 * block..(j3 + 1) * block].copy_from_slice(m.as_slice());
        Ok(())
    }

    /// Zeroes slice `j3` of an order-3 tensor.
    pub fn clear_slice(&mut self, j3: usize) -> Result<()> {
        let (d1, d2, d3) = self.order3_dims()?;
        if j3 >= d3 {
            return Err(Error::Argument(format!("slice index {} out of range", j3)));
        }
        let block = d1 * d2;
        self.data[j3 * block..(j3 + 1) * block].fill(0.0);
        Ok(())
    }

    pub fn order3_dims(&self) -> Result<(usize, usize, usize)> {
        match self.dims[..] {
            [d1, d2, d3] => Ok((d1, d2, d3)),
            _ => Err(Error::Shape(format!(
                "expected an order-3 tensor, got dims {:?}",
                self.dims
            ))),
        }
    }

    fn split_at_mode(&self, mode: usize) -> Result<(usize, usize, usize)> {
        if mode >= self.dims.len() {
            return Err(Error::Argument(format!(
                "mode {} out of range for order {}",
                mode,
                self.dims.len()
            )));
        }
        let left = self.dims[..mode].iter().product();
        let right = self.dims[mode + 1..].iter().product();
        Ok((left, self.dims[mode], right))
    }

    /// Writes the binary tensor format.
    ///
    /// Layout, all integers and floats little-endian:
    ///
    /// | bytes      | content                                  |
    /// |------------|------------------------------------------|
    /// | 4          | magic `TNSR`                             |
    /// | 4          | `u32` order `N`                          |
    /// | 8 * N      | `u64` dims `d_1 .. d_N`                  |
    /// | 8 * ∏ d_i  | `f64` entries in column-major order      |
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.dims.len() as u32).to_le_bytes())?;
        for &d in &self.dims {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(8 * self.data.len());
        for x in &self.data {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let mut word = [0u8; 4];
        r.read_exact(&mut word)?;
        let order = u32::from_le_bytes(word) as usize;
        if order == 0 || order > 16 {
            return Err(Error::Format(format!("unsupported order {}", order)));
        }
        let mut dims = Vec::with_capacity(order);
        let mut long = [0u8; 8];
        for _ in 0..order {
            r.read_exact(&mut long)?;
            dims.push(u64::from_le_bytes(long) as usize);
        }
        check_dims(&dims).map_err(|e| Error::Format(e.to_string()))?;
        let len: usize = dims.iter().product();
        let mut bytes = vec![0u8; 8 * len];
        r.read_exact(&mut bytes)?;
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::new(dims, data)
    }
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.is_empty() || dims.iter().any(|&d| d == 0) {
        return Err(Error::Shape(format!(
            "dims must be a non-empty list of positive sizes, got {:?}",
            dims
        )));
    }
    Ok(())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Frobenius norm of a matrix, accumulated in storage order.
pub fn matrix_norm(m: &Matrix) -> f64 {
    dot(m.as_slice(), m.as_slice()).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counting(dims: &[usize]) -> DenseTensor {
        let len: usize = dims.iter().product();
        DenseTensor::new(dims.to_vec(), (0..len).map(|x| x as f64 + 1.0).collect()).unwrap()
    }

    #[test]
    fn inner_of_counting_and_ones() {
        let a = counting(&[2, 2, 2]);
        let ones = DenseTensor::from_fn(&[2, 2, 2], |_| 1.0);
        assert_eq!(a.inner(&ones).unwrap(), 36.0);
        assert_eq!(a.inner(&DenseTensor::zeros(&[2, 2, 2])).unwrap(), 0.0);
        assert!((a.inner(&a).unwrap() - a.frobenius_norm().powi(2)).abs() < 1e-12);
    }

    #[test]
    fn inner_rejects_mismatched_dims() {
        let a = counting(&[2, 3]);
        let b = counting(&[3, 2]);
        assert!(matches!(a.inner(&b), Err(Error::Shape(_))));
    }

    #[test]
    fn new_checks_length() {
        assert!(DenseTensor::new(vec![2, 2], vec![0.0; 3]).is_err());
        assert!(DenseTensor::new(vec![2, 0], vec![]).is_err());
    }

    #[test]
    fn layout_is_column_major() {
        let a = counting(&[2, 3, 4]);
        assert_eq!(a.get(&[1, 0, 0]), 2.0);
        assert_eq!(a.get(&[0, 1, 0]), 3.0);
        assert_eq!(a.get(&[0, 0, 1]), 7.0);
    }

    #[test]
    fn matricize_column_convention() {
        let a = counting(&[2, 3, 4]);
        let m1 = a.matricize(1).unwrap();
        assert_eq!((m1.nrows(), m1.ncols()), (3, 8));
        for i0 in 0..2 {
            for i1 in 0..3 {
                for i2 in 0..4 {
                    assert_eq!(m1[(i1, i0 + 2 * i2)], a.get(&[i0, i1, i2]));
                }
            }
        }
        let m2 = a.matricize(2).unwrap();
        assert_eq!(m2[(3, 1 + 2 * 2)], a.get(&[1, 2, 3]));
    }

    #[test]
    fn matricize_invalid_mode() {
        assert!(matches!(
            counting(&[2, 2]).matricize(2),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn dematricize_round_trips() {
        for dims in [vec![3, 4, 5], vec![2, 2, 2, 2]] {
            let a = counting(&dims);
            for mode in 0..dims.len() {
                let m = a.matricize(mode).unwrap();
                assert_eq!(DenseTensor::dematricize(&m, mode, &dims).unwrap(), a);
            }
        }
    }

    #[test]
    fn dematricize_zero_and_bad_shape() {
        let z = Matrix::zeros(3, 20);
        let t = DenseTensor::dematricize(&z, 0, &[3, 4, 5]).unwrap();
        assert!(t.data().iter().all(|&x| x == 0.0));
        assert!(matches!(
            DenseTensor::dematricize(&z, 1, &[3, 4, 5]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn slices_partition_entries() {
        let a = counting(&[3, 2, 4]);
        let total: f64 = (0..4)
            .map(|j| matrix_norm(&a.slice(j).unwrap()).powi(2))
            .sum();
        assert_eq!(total, a.frobenius_norm().powi(2));
        assert_eq!(a.slice(2).unwrap()[(1, 1)], a.get(&[1, 1, 2]));
        assert!(matches!(a.slice(4), Err(Error::Argument(_))));
        let z = DenseTensor::zeros(&[3, 2, 4]);
        assert!(z.slice(0).unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn set_slice_reassembles() {
        let a = counting(&[3, 2, 4]);
        let mut b = DenseTensor::zeros(&[3, 2, 4]);
        for j in 0..4 {
            b.set_slice(j, &a.slice(j).unwrap()).unwrap();
        }
        assert_eq!(a, b);
    }

    #[test]
    fn serialization_round_trip() {
        let a = counting(&[2, 3, 4]).scaled(-0.37);
        let mut buf = Vec::new();
        a.write_to(&mut buf).unwrap();
        assert_eq!(buf.len(), 4 + 4 + 3 * 8 + 24 * 8);
        assert_eq!(&buf[..4], b"TNSR");
        assert_eq!(&buf[4..8], &3u32.to_le_bytes());
        let b = DenseTensor::read_from(&buf[..]).unwrap();
        assert_eq!(a, b);
        assert!(DenseTensor::read_from(&b"XXXX"[..]).is_err());
    }

    #[test]
    fn outer_product_entries() {
        let t = DenseTensor::outer(&[&[1.0, 2.0], &[3.0], &[1.0, -1.0]]);
        assert_eq!(t.dims(), &[2, 1, 2]);
        assert_eq!(t.get(&[1, 0, 1]), -6.0);
    }
}
