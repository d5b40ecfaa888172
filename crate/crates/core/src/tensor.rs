//! Dense row-major `f64` tensors and the numeric helpers built on them.
//!
//! Tensors are immutable values from the caller's perspective: operations
//! take references and return fresh tensors. All math goes through
//! [`libm`] so results are identical with and without the `std` feature.

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};

pub(crate) fn exp(x: f64) -> f64 {
    libm::exp(x)
}

pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

pub(crate) fn tanh(x: f64) -> f64 {
    libm::tanh(x)
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-x))
}

/// Dense numeric array with a shape; the substrate for all parameters and
/// activations.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    /// Builds a tensor after validating that the shape matches the data
    /// length and every element is finite.
    pub fn from_vec(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if shape.iter().any(|&d| d == 0) || numel != data.len() {
            return Err(Error::ShapeMismatch {
                context: "Tensor::from_vec",
                expected: format!("{numel} elements for shape {shape:?}"),
                got: data.len().to_string(),
            });
        }
        let t = Tensor { shape, data };
        t.check_finite("Tensor::from_vec")?;
        Ok(t)
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let numel: usize = shape.iter().product();
        Tensor {
            shape,
            data: vec![0.0; numel],
        }
    }

    pub fn zeros_like(other: &Tensor) -> Self {
        Tensor::zeros(other.shape.clone())
    }

    pub fn scalar(v: f64) -> Self {
        Tensor {
            shape: vec![1],
            data: vec![v],
        }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Tensor {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Tensor::from_vec(vec![rows, cols], data)
    }

    /// Uniform values in `[-limit, limit]`.
    pub fn uniform<R: Rng>(shape: Vec<usize>, limit: f64, rng: &mut R) -> Self {
        let numel: usize = shape.iter().product();
        let data = (0..numel)
            .map(|_| rng.random_range(-limit..=limit))
            .collect();
        Tensor { shape, data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn item(&self) -> f64 {
        debug_assert_eq!(self.numel(), 1);
        self.data[0]
    }

    /// Number of rows when viewed as a matrix.
    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    /// Number of columns when viewed as a matrix.
    pub fn cols(&self) -> usize {
        self.shape[1]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let c = self.shape[1];
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn get2(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols() + j]
    }

    pub fn set2(&mut self, i: usize, j: usize, v: f64) {
        let c = self.cols();
        self.data[i * c + j] = v;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn check_finite(&self, what: &str) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(i) => Err(Error::NonFinite {
                what: format!("{what} (element {i})"),
            }),
        }
    }

    pub fn same_shape(&self, other: &Tensor) -> bool {
        self.shape == other.shape
    }

    /// Internal constructor for op outputs; skips finiteness validation.
    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<f64>) -> Tensor {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Tensor { shape, data }
    }

    pub(crate) fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor::from_parts(self.shape.clone(), self.data.iter().map(|&v| f(v)).collect())
    }
}

/// log Σ exp(vᵢ) via the max-shift trick; stable for inputs up to ±1e6.
pub fn logsumexp(v: &[f64]) -> Result<f64> {
    if v.is_empty() {
        return Err(Error::EmptyInput("logsumexp"));
    }
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = v.iter().map(|&x| exp(x - max)).sum();
    Ok(max + ln(sum))
}

/// An inverted-dropout mask: each element is `0` with probability `rate`
/// and `1/(1-rate)` otherwise. Multiplying by the mask is the whole of
/// dropout, so inference needs no rescaling.
pub fn dropout_mask<R: Rng>(len: usize, rate: f64, rng: &mut R) -> Result<Tensor> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidRate(rate));
    }
    let keep = 1.0 / (1.0 - rate);
    let data = (0..len)
        .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
        .collect();
    Ok(Tensor {
        shape: vec![len],
        data,
    })
}

/// Inverted dropout. Identity when `training` is false or `rate` is zero.
pub fn dropout<R: Rng>(x: &Tensor, rate: f64, training: bool, rng: &mut R) -> Result<Tensor> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidRate(rate));
    }
    if !training || rate == 0.0 {
        return Ok(x.clone());
    }
    let mask = dropout_mask(x.numel(), rate, rng)?;
    let data = x
        .data
        .iter()
        .zip(mask.data())
        .map(|(a, m)| a * m)
        .collect();
    Ok(Tensor {
        shape: x.shape.clone(),
        data,
    })
}
