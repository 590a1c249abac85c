//! Operator vocabulary. Every constructor evaluates its output eagerly and
//! records the node; shape and kind errors are reported before anything is
//! appended to the tape.

use ndarray::{Array4, ArrayD, Axis, Ix4, IxDyn, Slice};
use num_complex::Complex64;

use super::graph::{dyn2, dyn3, shape_err, Graph, Op, Var};
use super::layer::conv_layer_forward;
use super::tensor::Tensor;
use crate::optics::convolve::convolve_planes;
use crate::optics::fourier::{fft2_centered, ifft2_centered};
use crate::optics::pupil::embed_cells;
use crate::optics::OpticalConfig;
use crate::{Error, Result};

fn same_shape(op: &str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch(format!("{op}: {:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Graph {
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        same_shape("add", x, y)?;
        let v = match (x, y) {
            (Tensor::Real(x), Tensor::Real(y)) => Tensor::Real(x + y),
            (Tensor::Complex(x), Tensor::Complex(y)) => Tensor::Complex(x + y),
            _ => return Err(Error::DomainError { op: "add" }),
        };
        Ok(self.push(v, Op::Add(a, b), &[a, b]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        same_shape("sub", x, y)?;
        let v = match (x, y) {
            (Tensor::Real(x), Tensor::Real(y)) => Tensor::Real(x - y),
            (Tensor::Complex(x), Tensor::Complex(y)) => Tensor::Complex(x - y),
            _ => return Err(Error::DomainError { op: "sub" }),
        };
        Ok(self.push(v, Op::Sub(a, b), &[a, b]))
    }

    /// Elementwise product of two nodes of the same kind and shape.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        same_shape("mul", x, y)?;
        let v = match (x, y) {
            (Tensor::Real(x), Tensor::Real(y)) => Tensor::Real(x * y),
            (Tensor::Complex(x), Tensor::Complex(y)) => Tensor::Complex(x * y),
            _ => return Err(Error::DomainError { op: "mul" }),
        };
        Ok(self.push(v, Op::Mul(a, b), &[a, b]))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var> {
        let v = match self.value(a) {
            Tensor::Real(x) => Tensor::Real(x * s),
            Tensor::Complex(x) => Tensor::Complex(x.mapv(|v| v * s)),
        };
        Ok(self.push(v, Op::Scale(a, s), &[a]))
    }

    /// Elementwise product with a constant of the same shape (weight maps,
    /// phase screens). A real node times a complex constant is complex.
    pub fn mul_const(&mut self, a: Var, c: impl Into<Tensor>) -> Result<Var> {
        let c = c.into();
        let x = self.value(a);
        same_shape("mul_const", x, &c)?;
        let v = match (x, &c) {
            (Tensor::Real(x), Tensor::Real(c)) => Tensor::Real(x * c),
            (Tensor::Real(x), Tensor::Complex(c)) => {
                Tensor::Complex(ndarray::Zip::from(x).and(c).map_collect(|x, c| c * *x))
            }
            (Tensor::Complex(x), Tensor::Complex(c)) => Tensor::Complex(x * c),
            (Tensor::Complex(x), Tensor::Real(c)) => {
                Tensor::Complex(ndarray::Zip::from(x).and(c).map_collect(|x, c| x * *c))
            }
        };
        Ok(self.push(v, Op::MulConst(a, c), &[a]))
    }

    /// `|z|^2`, complex to real.
    pub fn abs2(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a).complex("abs2")?.mapv(|z| z.norm_sqr());
        Ok(self.push(Tensor::Real(v), Op::Abs2(a), &[a]))
    }

    /// Unitary centered 2-D DFT of a complex matrix.
    pub fn fft2(&mut self, a: Var) -> Result<Var> {
        let x = dyn2(self.value(a).complex("fft2")?, "fft2")?;
        Ok(self.push(Tensor::Complex(fft2_centered(&x).into_dyn()), Op::Fft2(a), &[a]))
    }

    /// Inverse of [`Graph::fft2`].
    pub fn ifft2(&mut self, a: Var) -> Result<Var> {
        let x = dyn2(self.value(a).complex("ifft2")?, "ifft2")?;
        Ok(self.push(Tensor::Complex(ifft2_centered(&x).into_dyn()), Op::Ifft2(a), &[a]))
    }

    /// `exp(i phi)` of a real phase.
    pub fn exp_i(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a).real("exp_i")?.mapv(|p| Complex64::from_polar(1.0, p));
        Ok(self.push(Tensor::Complex(v), Op::ExpI(a), &[a]))
    }

    /// Zero-padded same-size convolution of every channel of `x` (`C x H x W`)
    /// with the odd square kernel `k`.
    pub fn conv2d(&mut self, x: Var, k: Var) -> Result<Var> {
        let xv = dyn3(self.value(x).real("conv2d")?, "conv2d")?;
        let kv = dyn2(self.value(k).real("conv2d")?, "conv2d")?;
        let y = convolve_planes(&xv, kv.view())?;
        Ok(self.push(Tensor::Real(y.into_dyn()), Op::Conv2d(x, k), &[x, k]))
    }

    /// Network layer: `x` is `Ci x H x W`, `w` is `Co x Ci x k x k` (odd `k`),
    /// `b` has `Co` entries. Cross-correlation with zero padding.
    pub fn conv_layer(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let xv = dyn3(self.value(x).real("conv_layer")?, "conv_layer")?;
        let wt = self.value(w).real("conv_layer")?;
        let wv: Array4<f64> =
            wt.clone().into_dimensionality::<Ix4>().map_err(|_| shape_err("conv_layer", wt.shape()))?;
        let bv = self.value(b).real("conv_layer")?;
        let (co, ci, kh, kw) = wv.dim();
        if ci != xv.dim().0 || kh != kw || kh % 2 == 0 || bv.shape() != [co] {
            return Err(Error::ShapeMismatch(format!(
                "conv_layer: input {:?}, weight {:?}, bias {:?}",
                xv.shape(),
                wv.shape(),
                bv.shape()
            )));
        }
        let bv = bv.view().into_dimensionality::<ndarray::Ix1>().expect("checked rank");
        let y = conv_layer_forward(xv.view(), wv.view(), bv);
        Ok(self.push(Tensor::Real(y.into_dyn()), Op::ConvLayer { x, w, b }, &[x, w, b]))
    }

    /// `max(x, 0)`; the subgradient at 0 is 0.
    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a).real("relu")?.mapv(|x| x.max(0.0));
        Ok(self.push(Tensor::Real(v), Op::Relu(a), &[a]))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a).real("sigmoid")?.mapv(sigmoid);
        Ok(self.push(Tensor::Real(v), Op::Sigmoid(a), &[a]))
    }

    /// Concatenation along the leading (channel) axis.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let views = parts
            .iter()
            .map(|p| self.value(*p).real("concat").map(|a| a.view()))
            .collect::<Result<Vec<_>>>()?;
        if views.is_empty() {
            return Err(Error::ShapeMismatch("concat: no inputs".into()));
        }
        let v = ndarray::concatenate(Axis(0), &views)
            .map_err(|e| Error::ShapeMismatch(format!("concat: {e}")))?;
        Ok(self.push(Tensor::Real(v), Op::Concat(parts.to_vec()), parts))
    }

    /// Entries `start..start + len` along the leading axis.
    pub fn narrow(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let x = self.value(a).real("narrow")?;
        if x.ndim() == 0 || start + len > x.shape()[0] || len == 0 {
            return Err(shape_err("narrow", x.shape()));
        }
        let v = x.slice_axis(Axis(0), Slice::from(start..start + len)).to_owned();
        Ok(self.push(Tensor::Real(v), Op::Narrow { x: a, start }, &[a]))
    }

    /// Splits along the leading axis into pieces of `size` entries.
    pub fn split(&mut self, a: Var, size: usize) -> Result<Vec<Var>> {
        let n = self.value(a).shape().first().copied().unwrap_or(0);
        if size == 0 || n % size != 0 {
            return Err(shape_err("split", self.value(a).shape()));
        }
        (0..n / size).map(|i| self.narrow(a, i * size, size)).collect()
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let s = self.value(a).real("sum")?.sum();
        Ok(self.push(Tensor::scalar(s), Op::Sum(a), &[a]))
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a).real("mean")?;
        let m = x.sum() / x.len().max(1) as f64;
        Ok(self.push(Tensor::scalar(m), Op::Mean(a), &[a]))
    }

    /// Elementwise `|a - b|`; the subgradient at equality is 0.
    pub fn l1_distance(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        same_shape("l1_distance", x, y)?;
        let v = (x.real("l1_distance")? - y.real("l1_distance")?).mapv(f64::abs);
        Ok(self.push(Tensor::Real(v), Op::L1(a, b), &[a, b]))
    }

    /// Nearest-neighbour replication of a `g x g` cell map into the pupil grid
    /// of `cfg`.
    pub fn embed(&mut self, a: Var, cfg: &OpticalConfig) -> Result<Var> {
        let x = dyn2(self.value(a).real("embed")?, "embed")?;
        let v = embed_cells(x.view(), cfg)?;
        Ok(self.push(Tensor::Real(v.into_dyn()), Op::Embed { x: a, cfg: *cfg }, &[a]))
    }

    /// Sums `s x s` blocks of a matrix whose sides are multiples of `s`.
    pub fn bin(&mut self, a: Var, s: usize) -> Result<Var> {
        let x = dyn2(self.value(a).real("bin")?, "bin")?;
        let (r, c) = x.dim();
        if s == 0 || r % s != 0 || c % s != 0 {
            return Err(shape_err("bin", &[r, c]));
        }
        let v = crate::optics::psf::bin_pixels(x.view(), s);
        Ok(self.push(Tensor::Real(v.into_dyn()), Op::Bin { x: a, s }, &[a]))
    }

    /// Reverses one axis.
    pub fn flip(&mut self, a: Var, axis: usize) -> Result<Var> {
        let x = self.value(a).real("flip")?;
        if axis >= x.ndim() {
            return Err(shape_err("flip", x.shape()));
        }
        let mut v = x.clone();
        v.invert_axis(Axis(axis));
        let v = v.as_standard_layout().to_owned();
        Ok(self.push(Tensor::Real(v), Op::Flip { x: a, axis }, &[a]))
    }

    /// Convenience: a real constant scalar.
    pub fn scalar_const(&mut self, v: f64) -> Var {
        self.constant(ArrayD::from_elem(IxDyn(&[]), v))
    }
}
