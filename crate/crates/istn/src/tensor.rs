use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense row-major tensor. Image batches are `[N, C, H, W]` (2D) or
/// `[N, C, D, H, W]` (3D).
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![T::zero(); shape.iter().product()],
        }
    }

    pub fn filled(shape: &[usize], value: T) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Shape(format!(
                "shape {:?} holds {} elements, got {}",
                shape,
                n,
                data.len()
            )));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    /// Reinterpret with a new shape of identical element count.
    pub fn reshaped(mut self, shape: &[usize]) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.data.len() {
            return Err(Error::Shape(format!(
                "cannot reshape {} elements into {:?}",
                self.data.len(),
                shape
            )));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    /// Slice of sample `i` for a batched tensor (first axis is batch).
    pub fn sample(&self, i: usize) -> &[T] {
        let per = self.data.len() / self.shape[0];
        &self.data[i * per..(i + 1) * per]
    }

    pub fn sample_mut(&mut self, i: usize) -> &mut [T] {
        let per = self.data.len() / self.shape[0];
        &mut self.data[i * per..(i + 1) * per]
    }

    pub fn fill(&mut self, value: T) {
        self.data.iter_mut().for_each(|v| *v = value);
    }

    pub fn scale(&mut self, a: T) {
        self.data.iter_mut().for_each(|v| *v *= a);
    }

    /// `self += a * other`, shapes must match.
    pub fn add_scaled(&mut self, other: &Self, a: T) {
        debug_assert_eq!(self.shape, other.shape);
        for (x, y) in self.data.iter_mut().zip(other.data.iter()) {
            *x += a * *y;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs().as_f64()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.shape, other.shape);
        self.data
            .iter()
            .zip(other.data.iter())
            .fold(0.0f64, |m, (a, b)| m.max((*a - *b).abs().as_f64()))
    }

    /// Mean absolute difference over all elements.
    pub fn mean_abs_diff(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.shape, other.shape);
        if self.data.is_empty() {
            return 0.0;
        }
        let s: f64 = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (*a - *b).abs().as_f64())
            .sum();
        s / self.data.len() as f64
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            let x = v.as_f64();
            (lo.min(x), hi.max(x))
        })
    }

    /// Convert element type (used to move between f32 storage and f64 math).
    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| U::c(v.as_f64())).collect(),
        }
    }
}
