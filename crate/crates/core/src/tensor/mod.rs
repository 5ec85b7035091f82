//! Dense tensors with tape-based reverse-mode differentiation.
//!
//! [`Tensor`] is a plain value: a shape, row-major elements and a declared
//! element precision. Differentiation happens on a [`Graph`], which records
//! every operation applied to its [`Var`] handles and replays them backwards
//! in [`Graph::backward`]. Trainable parameters live in a [`ParamStore`] and
//! are bound into a fresh graph for each forward pass.

pub mod checkpoint;
mod graph;
pub mod nn;
pub mod optim;
mod params;
pub mod rng;

pub use graph::{Graph, Var};
pub use params::{Bound, ParamId, ParamStore};

use crate::error::{Error, Result};

/// Storage precision of tensor elements.
///
/// Elements are always held as `f64`; a `Binary32` tensor keeps every element
/// rounded to the nearest representable IEEE 754 binary32 value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Precision {
    Binary32,
    Binary64,
}

impl Precision {
    #[inline]
    pub fn round(self, x: f64) -> f64 {
        match self {
            Precision::Binary32 => x as f32 as f64,
            Precision::Binary64 => x,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
    precision: Precision,
}

impl Tensor {
    pub fn new(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::Contract(format!(
                "shape {shape:?} holds {expected} elements but {} were given",
                data.len()
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
            precision: Precision::Binary64,
        })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; n],
            precision: Precision::Binary64,
        }
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        let mut t = Tensor::zeros(shape);
        t.data.iter_mut().for_each(|x| *x = value);
        t
    }

    pub fn scalar(value: f64) -> Self {
        Tensor {
            shape: vec![],
            data: vec![value],
            precision: Precision::Binary64,
        }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Tensor {
            shape: vec![data.len()],
            data,
            precision: Precision::Binary64,
        }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Tensor::new(&[rows, cols], data)
    }

    /// Re-tags the tensor, rounding every element into the new precision.
    pub fn with_precision(mut self, precision: Precision) -> Self {
        self.precision = precision;
        self.data.iter_mut().for_each(|x| *x = precision.round(*x));
        self
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Mutable element access. Callers that write into a `Binary32` tensor
    /// must call [`Tensor::round_in_place`] afterwards.
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn round_in_place(&mut self) {
        let p = self.precision;
        self.data.iter_mut().for_each(|x| *x = p.round(*x));
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    /// The single element of a one-element tensor.
    pub fn item(&self) -> Result<f64> {
        if self.data.len() != 1 {
            return Err(Error::Contract(format!(
                "item() on tensor of shape {:?}",
                self.shape
            )));
        }
        Ok(self.data[0])
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.data.len() {
            return Err(Error::shape("reshape", &self.shape, shape));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn l2_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// `(rows, cols)` of a rank-2 tensor; a rank-1 tensor is one row.
    pub(crate) fn as_matrix_dims(&self) -> Option<(usize, usize)> {
        match self.shape.as_slice() {
            [n] => Some((1, *n)),
            [r, c] => Some((*r, *c)),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn element_count_must_match_shape() {
        assert!(Tensor::new(&[2, 3], vec![0.0; 6]).is_ok());
        assert!(matches!(
            Tensor::new(&[2, 3], vec![0.0; 5]),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn binary32_tensors_round_their_elements() {
        let t = Tensor::vector(vec![0.1, 1.0 / 3.0]).with_precision(Precision::Binary32);
        assert_eq!(t.data()[0], 0.1f32 as f64);
        assert_eq!(t.data()[1], (1.0f64 / 3.0) as f32 as f64);
    }

    #[test]
    fn item_requires_single_element() {
        assert_eq!(Tensor::scalar(2.5).item().unwrap(), 2.5);
        assert!(Tensor::vector(vec![1.0, 2.0]).item().is_err());
    }
}
