use ndarray::{Array2, Array3, Array4, ArrayD, Axis, Ix2, Ix3, Ix4, IxDyn, Slice};

use super::layer::conv_layer_backward;
use super::tensor::Tensor;
use crate::optics::convolve::{convolve_planes_adjoint_input, convolve_planes_adjoint_kernel};
use crate::optics::fourier::ifft2_centered;
use crate::optics::pupil::pool_cells;
use crate::optics::OpticalConfig;
use crate::{Error, Result};

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

#[derive(Clone, Debug)]
pub(crate) enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    MulConst(Var, Tensor),
    Abs2(Var),
    Fft2(Var),
    Ifft2(Var),
    ExpI(Var),
    Conv2d(Var, Var),
    ConvLayer { x: Var, w: Var, b: Var },
    Relu(Var),
    Sigmoid(Var),
    Concat(Vec<Var>),
    Narrow { x: Var, start: usize },
    Sum(Var),
    Mean(Var),
    L1(Var, Var),
    Embed { x: Var, cfg: OpticalConfig },
    Bin { x: Var, s: usize },
    Flip { x: Var, axis: usize },
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Tape of eagerly evaluated operations.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Tensor>>,
}

pub(crate) fn dyn2<T: Clone>(a: &ArrayD<T>, op: &'static str) -> Result<Array2<T>> {
    a.clone().into_dimensionality::<Ix2>().map_err(|_| shape_err(op, a.shape()))
}

pub(crate) fn dyn3<T: Clone>(a: &ArrayD<T>, op: &'static str) -> Result<Array3<T>> {
    a.clone().into_dimensionality::<Ix3>().map_err(|_| shape_err(op, a.shape()))
}

pub(crate) fn shape_err(op: &str, shape: &[usize]) -> Error {
    Error::ShapeMismatch(format!("{op}: unexpected shape {shape:?}"))
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub(crate) fn push(&mut self, value: Tensor, op: Op, inputs: &[Var]) -> Var {
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node { value, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    /// Differentiable leaf.
    pub fn param(&mut self, value: impl Into<Tensor>) -> Var {
        self.nodes.push(Node { value: value.into(), op: Op::Leaf, requires_grad: true });
        Var(self.nodes.len() - 1)
    }

    /// Constant leaf; never receives an adjoint.
    pub fn constant(&mut self, value: impl Into<Tensor>) -> Var {
        self.nodes.push(Node { value: value.into(), op: Op::Leaf, requires_grad: false });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Real value of `v`; `DomainError` for complex nodes.
    pub fn real(&self, v: Var) -> Result<&ArrayD<f64>> {
        self.nodes[v.0].value.real("value")
    }

    /// Value of a rank-0 real node.
    pub fn scalar(&self, v: Var) -> Result<f64> {
        let a = self.real(v)?;
        if a.ndim() != 0 {
            return Err(Error::NonScalarLoss(a.shape().to_vec()));
        }
        Ok(a[IxDyn(&[])])
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Adjoint of `v` after [`Graph::backward`]; `None` if no gradient reached it.
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Real adjoint of `v`, zeros when the loss does not depend on it.
    pub fn grad_real(&self, v: Var) -> Result<ArrayD<f64>> {
        match self.grad(v) {
            Some(g) => Ok(g.real("grad")?.clone()),
            None => Ok(ArrayD::zeros(self.real(v)?.raw_dim())),
        }
    }

    /// Reverse sweep from a real scalar `loss`. Repeated uses of a node
    /// accumulate. Calling again recomputes from scratch.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let lv = &self.nodes[loss.0].value;
        if !lv.shape().is_empty() {
            return Err(Error::NonScalarLoss(lv.shape().to_vec()));
        }
        lv.real("backward")?;
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::scalar(1.0));
        for i in (0..=loss.0).rev() {
            let Some(gy) = grads[i].take() else { continue };
            if !self.nodes[i].requires_grad {
                continue;
            }
            for (v, g) in self.adjoints(i, &gy)? {
                if !self.nodes[v.0].requires_grad {
                    continue;
                }
                match &mut grads[v.0] {
                    Some(acc) => acc.accumulate(&g),
                    slot @ None => *slot = Some(g),
                }
            }
            grads[i] = Some(gy);
        }
        self.grads = grads;
        Ok(())
    }

    fn val(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Adjoint contributions of node `i` to its inputs given its adjoint `gy`.
    fn adjoints(&self, i: usize, gy: &Tensor) -> Result<Vec<(Var, Tensor)>> {
        let out = match &self.nodes[i].op {
            Op::Leaf => vec![],
            Op::Add(a, b) => vec![(*a, gy.clone()), (*b, gy.clone())],
            Op::Sub(a, b) => {
                let neg = match gy {
                    Tensor::Real(g) => Tensor::Real(-g),
                    Tensor::Complex(g) => Tensor::Complex(g.mapv(|v| -v)),
                };
                vec![(*a, gy.clone()), (*b, neg)]
            }
            Op::Mul(a, b) => match (self.val(*a), self.val(*b), gy) {
                (Tensor::Real(x), Tensor::Real(y), Tensor::Real(g)) => {
                    vec![(*a, Tensor::Real(g * y)), (*b, Tensor::Real(g * x))]
                }
                (Tensor::Complex(x), Tensor::Complex(y), Tensor::Complex(g)) => vec![
                    (*a, Tensor::Complex(ndarray::Zip::from(g).and(y).map_collect(|g, y| g * y.conj()))),
                    (*b, Tensor::Complex(ndarray::Zip::from(g).and(x).map_collect(|g, x| g * x.conj()))),
                ],
                _ => unreachable!("mul kinds checked at construction"),
            },
            Op::Scale(a, s) => match gy {
                Tensor::Real(g) => vec![(*a, Tensor::Real(g * *s))],
                Tensor::Complex(g) => vec![(*a, Tensor::Complex(g.mapv(|v| v * *s)))],
            },
            Op::MulConst(a, c) => {
                let g = match (self.val(*a), c, gy) {
                    (Tensor::Real(_), Tensor::Real(c), Tensor::Real(g)) => Tensor::Real(g * c),
                    (Tensor::Real(_), Tensor::Complex(c), Tensor::Complex(g)) => {
                        Tensor::Real(ndarray::Zip::from(g).and(c).map_collect(|g, c| (g * c.conj()).re))
                    }
                    (Tensor::Complex(_), Tensor::Complex(c), Tensor::Complex(g)) => {
                        Tensor::Complex(ndarray::Zip::from(g).and(c).map_collect(|g, c| g * c.conj()))
                    }
                    (Tensor::Complex(_), Tensor::Real(c), Tensor::Complex(g)) => {
                        Tensor::Complex(ndarray::Zip::from(g).and(c).map_collect(|g, c| g * *c))
                    }
                    _ => unreachable!("mul_const kinds checked at construction"),
                };
                vec![(*a, g)]
            }
            Op::Abs2(a) => {
                let z = self.val(*a).complex("abs2")?;
                let g = gy.real("abs2")?;
                vec![(*a, Tensor::Complex(ndarray::Zip::from(z).and(g).map_collect(|z, g| z * (2.0 * g))))]
            }
            Op::Fft2(a) => {
                let g = dyn2(gy.complex("fft2")?, "fft2")?;
                vec![(*a, Tensor::Complex(ifft2_centered(&g).into_dyn()))]
            }
            Op::Ifft2(a) => {
                let g = dyn2(gy.complex("ifft2")?, "ifft2")?;
                vec![(*a, Tensor::Complex(crate::optics::fourier::fft2_centered(&g).into_dyn()))]
            }
            Op::ExpI(a) => {
                let z = self.nodes[i].value.complex("exp_i")?;
                let g = gy.complex("exp_i")?;
                vec![(*a, Tensor::Real(ndarray::Zip::from(g).and(z).map_collect(|g, z| (g * z.conj()).im)))]
            }
            Op::Conv2d(x, k) => {
                let g = dyn3(gy.real("conv2d")?, "conv2d")?;
                let kv = dyn2(self.val(*k).real("conv2d")?, "conv2d")?;
                let mut out = vec![];
                if self.wants(*x) {
                    out.push((*x, Tensor::Real(convolve_planes_adjoint_input(&g, kv.view())?.into_dyn())));
                }
                if self.wants(*k) {
                    let xv = dyn3(self.val(*x).real("conv2d")?, "conv2d")?;
                    let (kh, kw) = kv.dim();
                    out.push((*k, Tensor::Real(convolve_planes_adjoint_kernel(&xv, &g, kh, kw)?.into_dyn())));
                }
                out
            }
            Op::ConvLayer { x, w, b } => {
                let g = dyn3(gy.real("conv_layer")?, "conv_layer")?;
                let xv = dyn3(self.val(*x).real("conv_layer")?, "conv_layer")?;
                let wv: Array4<f64> = self
                    .val(*w)
                    .real("conv_layer")?
                    .clone()
                    .into_dimensionality::<Ix4>()
                    .map_err(|_| shape_err("conv_layer", self.val(*w).shape()))?;
                let (gx, gw, gb) = conv_layer_backward(xv.view(), wv.view(), g.view());
                vec![
                    (*x, Tensor::Real(gx.into_dyn())),
                    (*w, Tensor::Real(gw.into_dyn())),
                    (*b, Tensor::Real(gb.into_dyn())),
                ]
            }
            Op::Relu(a) => {
                let x = self.val(*a).real("relu")?;
                let g = gy.real("relu")?;
                vec![(*a, Tensor::Real(ndarray::Zip::from(g).and(x).map_collect(|g, x| if *x > 0.0 { *g } else { 0.0 })))]
            }
            Op::Sigmoid(a) => {
                let y = self.nodes[i].value.real("sigmoid")?;
                let g = gy.real("sigmoid")?;
                vec![(*a, Tensor::Real(ndarray::Zip::from(g).and(y).map_collect(|g, y| g * y * (1.0 - y))))]
            }
            Op::Concat(parts) => {
                let g = gy.real("concat")?;
                let mut start = 0;
                let mut out = Vec::with_capacity(parts.len());
                for p in parts {
                    let len = self.val(*p).shape()[0];
                    let piece = g.slice_axis(Axis(0), Slice::from(start..start + len)).to_owned();
                    out.push((*p, Tensor::Real(piece)));
                    start += len;
                }
                out
            }
            Op::Narrow { x, start } => {
                let g = gy.real("narrow")?;
                let len = g.shape()[0];
                let mut full = ArrayD::zeros(self.val(*x).shape());
                full.slice_axis_mut(Axis(0), Slice::from(*start..start + len)).assign(g);
                vec![(*x, Tensor::Real(full))]
            }
            Op::Sum(a) | Op::Mean(a) => {
                let g = gy.real("sum")?[IxDyn(&[])];
                let shape = self.val(*a).shape();
                let n = shape.iter().product::<usize>().max(1) as f64;
                let v = if matches!(self.nodes[i].op, Op::Mean(_)) { g / n } else { g };
                vec![(*a, Tensor::Real(ArrayD::from_elem(shape, v)))]
            }
            Op::L1(a, b) => {
                let (x, y) = (self.val(*a).real("l1")?, self.val(*b).real("l1")?);
                let g = gy.real("l1")?;
                let ga = ndarray::Zip::from(g).and(x).and(y).map_collect(|g, x, y| {
                    let d = x - y;
                    if d > 0.0 {
                        *g
                    } else if d < 0.0 {
                        -g
                    } else {
                        0.0
                    }
                });
                let gb = -&ga;
                vec![(*a, Tensor::Real(ga)), (*b, Tensor::Real(gb))]
            }
            Op::Embed { x, cfg } => {
                let g = dyn2(gy.real("embed")?, "embed")?;
                let cells = self.val(*x).shape()[0];
                vec![(*x, Tensor::Real(pool_cells(g.view(), cells, cfg).into_dyn()))]
            }
            Op::Bin { x, s } => {
                let g = dyn2(gy.real("bin")?, "bin")?;
                let shape = self.val(*x).shape();
                let up = Array2::from_shape_fn((shape[0], shape[1]), |(r, c)| g[(r / s, c / s)]);
                vec![(*x, Tensor::Real(up.into_dyn()))]
            }
            Op::Flip { x, axis } => {
                let mut g = gy.real("flip")?.clone();
                g.invert_axis(Axis(*axis));
                vec![(*x, Tensor::Real(g.as_standard_layout().to_owned()))]
            }
        };
        Ok(out)
    }
}
