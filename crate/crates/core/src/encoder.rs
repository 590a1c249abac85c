//! The light field encoding network: `n` RGB views in, `k` RGB display
//! images out.
//!
//! Channel-concatenated views pass through an input convolution and relu,
//! `blocks` residual blocks (conv, relu, conv, plus the block input, no
//! activation after the sum), an output convolution to `3k` channels and a
//! sigmoid; the result is split into `k` images. All convolutions are
//! zero-padded "same" so resolution is preserved.

use ndarray::{Array1, Array4, ArrayD, Ix1, Ix4};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::autodiff::{Graph, Var};
use crate::{Error, Image, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EncoderConfig {
    /// Input views.
    pub n: usize,
    /// Output images.
    pub k: usize,
    /// Hidden width.
    pub channels: usize,
    pub blocks: usize,
    /// Spatial kernel size (odd).
    pub kernel: usize,
}

impl EncoderConfig {
    pub fn new(n: usize, k: usize) -> Self {
        EncoderConfig { n, k, channels: 64, blocks: 10, kernel: 3 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.k == 0 || self.channels == 0 {
            return Err(Error::InvalidConfig(format!(
                "encoder needs n, k, channels >= 1, got {}, {}, {}",
                self.n, self.k, self.channels
            )));
        }
        if self.kernel % 2 == 0 {
            return Err(Error::InvalidConfig(format!("encoder kernel must be odd, got {}", self.kernel)));
        }
        Ok(())
    }

    /// `(out, in)` channels of every convolution, in parameter order.
    fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let c = self.channels;
        let mut v = vec![(c, 3 * self.n)];
        for _ in 0..self.blocks {
            v.push((c, c));
            v.push((c, c));
        }
        v.push((3 * self.k, c));
        v
    }

    pub fn parameter_count(&self) -> usize {
        let k2 = self.kernel * self.kernel;
        self.layer_shapes().iter().map(|(o, i)| o * i * k2 + o).sum()
    }
}

/// One convolution's kernel (`out x in x k x k`) and bias.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvParams {
    pub weight: Array4<f64>,
    pub bias: Array1<f64>,
}

/// Encoder parameters. `layers[0]` is the input convolution, then two per
/// residual block, and the output convolution last.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderWeights {
    pub config: EncoderConfig,
    pub layers: Vec<ConvParams>,
    pub init_seed: u64,
}

/// He-normal kernels (`std = sqrt(2 / fan_in)`, `fan_in = in * k * k`) and
/// zero biases, drawn from a ChaCha8 stream seeded by `seed`.
pub fn init_weights(config: &EncoderConfig, seed: u64) -> Result<EncoderWeights> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = config.kernel;
    let layers = config
        .layer_shapes()
        .into_iter()
        .map(|(o, i)| {
            let std = (2.0 / (i * k * k) as f64).sqrt();
            let normal = Normal::new(0.0, std).expect("positive std");
            ConvParams {
                weight: Array4::from_shape_simple_fn((o, i, k, k), || normal.sample(&mut rng)),
                bias: Array1::zeros(o),
            }
        })
        .collect();
    Ok(EncoderWeights { config: *config, layers, init_seed: seed })
}

impl EncoderWeights {
    /// All kernels and biases zero.
    pub fn zeros(config: &EncoderConfig) -> Result<Self> {
        config.validate()?;
        let k = config.kernel;
        let layers = config
            .layer_shapes()
            .into_iter()
            .map(|(o, i)| ConvParams { weight: Array4::zeros((o, i, k, k)), bias: Array1::zeros(o) })
            .collect();
        Ok(EncoderWeights { config: *config, layers, init_seed: 0 })
    }

    /// Flattened parameter list: weight, bias per layer.
    pub fn to_arrays(&self) -> Vec<ArrayD<f64>> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.clone().into_dyn(), l.bias.clone().into_dyn()])
            .collect()
    }

    /// Inverse of [`EncoderWeights::to_arrays`].
    pub fn from_arrays(config: &EncoderConfig, arrays: &[ArrayD<f64>], init_seed: u64) -> Result<Self> {
        let shapes = config.layer_shapes();
        if arrays.len() != 2 * shapes.len() {
            return Err(Error::LengthMismatch { left: arrays.len(), right: 2 * shapes.len() });
        }
        let k = config.kernel;
        let layers = shapes
            .iter()
            .zip(arrays.chunks(2))
            .map(|(&(o, i), pair)| {
                let weight = pair[0]
                    .clone()
                    .into_dimensionality::<Ix4>()
                    .ok()
                    .filter(|w| w.dim() == (o, i, k, k))
                    .ok_or_else(|| Error::ShapeMismatch(format!("encoder weight {:?}", pair[0].shape())))?;
                let bias = pair[1]
                    .clone()
                    .into_dimensionality::<Ix1>()
                    .ok()
                    .filter(|b| b.len() == o)
                    .ok_or_else(|| Error::ShapeMismatch(format!("encoder bias {:?}", pair[1].shape())))?;
                Ok(ConvParams { weight, bias })
            })
            .collect::<Result<_>>()?;
        Ok(EncoderWeights { config: *config, layers, init_seed })
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weight.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }
}

/// Builds the network on `graph`. `input` is the `3n x H x W` concatenation
/// of the views and `params` the leaves for [`EncoderWeights::to_arrays`].
/// Returns `k` nodes of shape `3 x H x W`.
pub fn encode_graph(graph: &mut Graph, input: Var, params: &[Var], config: &EncoderConfig) -> Result<Vec<Var>> {
    let layers = 2 + 2 * config.blocks;
    if params.len() != 2 * layers {
        return Err(Error::LengthMismatch { left: params.len(), right: 2 * layers });
    }
    let conv = |g: &mut Graph, x: Var, l: usize| g.conv_layer(x, params[2 * l], params[2 * l + 1]);
    let h = conv(graph, input, 0)?;
    let mut h = graph.relu(h)?;
    for b in 0..config.blocks {
        let t = conv(graph, h, 1 + 2 * b)?;
        let t = graph.relu(t)?;
        let t = conv(graph, t, 2 + 2 * b)?;
        h = graph.add(h, t)?;
    }
    let out = conv(graph, h, layers - 1)?;
    let out = graph.sigmoid(out)?;
    graph.split(out, 3)
}

/// Concatenates `views` along channels; all must share `H x W`.
pub fn stack_views(views: &[Image]) -> Result<ArrayD<f64>> {
    let first = views.first().ok_or_else(|| Error::ShapeMismatch("no input views".into()))?;
    if let Some(v) = views.iter().find(|v| v.dim() != first.dim()) {
        return Err(Error::ShapeMismatch(format!("view {:?} vs {:?}", v.dim(), first.dim())));
    }
    let parts: Vec<_> = views.iter().map(|v| v.view()).collect();
    Ok(ndarray::concatenate(ndarray::Axis(0), &parts).expect("shapes checked").into_dyn())
}

/// Forward pass outside of training.
pub fn encode(views: &[Image], weights: &EncoderWeights) -> Result<Vec<Image>> {
    let cfg = &weights.config;
    if views.len() != cfg.n {
        return Err(Error::ShapeMismatch(format!("encoder expects {} views, got {}", cfg.n, views.len())));
    }
    let mut g = Graph::new();
    let input = g.constant(stack_views(views)?);
    let params: Vec<Var> = weights.to_arrays().into_iter().map(|a| g.constant(a)).collect();
    let outs = encode_graph(&mut g, input, &params, cfg)?;
    outs.into_iter()
        .map(|v| {
            g.real(v)?
                .clone()
                .into_dimensionality::<ndarray::Ix3>()
                .map_err(|e| Error::ShapeMismatch(e.to_string()))
        })
        .collect()
}
