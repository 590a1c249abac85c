use ndarray::ArrayD;
use num_complex::Complex64;

use crate::{Error, Result};

/// Node value: a real or complex array of any rank (rank 0 for scalars).
#[derive(Clone, Debug, PartialEq)]
pub enum Tensor {
    Real(ArrayD<f64>),
    Complex(ArrayD<Complex64>),
}

impl Tensor {
    pub fn scalar(v: f64) -> Self {
        Tensor::Real(ArrayD::from_elem(vec![], v))
    }

    pub fn shape(&self) -> &[usize] {
        match self {
            Tensor::Real(a) => a.shape(),
            Tensor::Complex(a) => a.shape(),
        }
    }

    pub fn is_complex(&self) -> bool {
        matches!(self, Tensor::Complex(_))
    }

    pub fn real(&self, op: &'static str) -> Result<&ArrayD<f64>> {
        match self {
            Tensor::Real(a) => Ok(a),
            Tensor::Complex(_) => Err(Error::DomainError { op }),
        }
    }

    pub fn complex(&self, op: &'static str) -> Result<&ArrayD<Complex64>> {
        match self {
            Tensor::Complex(a) => Ok(a),
            Tensor::Real(_) => Err(Error::DomainError { op }),
        }
    }

    /// In-place `self += other`; both must have the same kind and shape.
    pub(crate) fn accumulate(&mut self, other: &Tensor) {
        match (self, other) {
            (Tensor::Real(a), Tensor::Real(b)) => *a += b,
            (Tensor::Complex(a), Tensor::Complex(b)) => *a += b,
            _ => unreachable!("adjoint kind differs from value kind"),
        }
    }

    /// Finite check over all entries.
    pub fn is_finite(&self) -> bool {
        match self {
            Tensor::Real(a) => a.iter().all(|v| v.is_finite()),
            Tensor::Complex(a) => a.iter().all(|v| v.re.is_finite() && v.im.is_finite()),
        }
    }
}

impl From<ArrayD<f64>> for Tensor {
    fn from(a: ArrayD<f64>) -> Self {
        Tensor::Real(a)
    }
}

impl From<ArrayD<Complex64>> for Tensor {
    fn from(a: ArrayD<Complex64>) -> Self {
        Tensor::Complex(a)
    }
}
