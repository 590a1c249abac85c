//! Binary checkpoint format, little-endian throughout:
//!
//! ```text
//! magic "LUMOSCKP" | u32 version | u64 config length | canonical config text
//! u64 epoch | u64 adam steps | u64 array count | arrays...
//! ```
//!
//! Each array is `u64 ndim`, `ndim` x `u64` dims, then the `f64` values in
//! row-major order. Arrays appear in this order: encoder weight/bias pairs
//! (only when the encoder is learned), aperture logit maps, Adam first
//! moments, Adam second moments, and the loss history as one 1-D array.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, ArrayD, IxDyn};

use super::TrainConfig;
use crate::autodiff::Adam;
use crate::display::ApertureBank;
use crate::encoder::{init_weights, EncoderWeights};
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"LUMOSCKP";
const VERSION: u32 = 1;

/// Complete training state.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    /// Present when the encoder is learned.
    pub encoder: Option<EncoderWeights>,
    pub apertures: ApertureBank,
    /// Moments over the learned parameters, encoder first.
    pub adam: Adam,
    /// Completed epochs.
    pub epoch: usize,
    /// Mean training loss per completed epoch.
    pub loss_history: Vec<f64>,
}

impl Checkpoint {
    /// Untrained state: He-initialized encoder seeded by `config.seed`, zero
    /// logits, zero Adam moments.
    pub fn initial(config: &TrainConfig) -> Result<Self> {
        config.validate()?;
        let encoder = if config.learn_f { Some(init_weights(&config.encoder_config()?, config.seed)?) } else { None };
        let apertures = ApertureBank::new(
            config.k,
            config.optics.aperture_resolution,
            config.aperture_mode,
            config.temperature,
            config.symmetry,
        )?;
        let mut ckpt = Checkpoint {
            config: config.clone(),
            encoder,
            apertures,
            adam: Adam::new(config.adam, &[]),
            epoch: 0,
            loss_history: Vec::new(),
        };
        ckpt.adam = Adam::new(config.adam, &ckpt.learned_parameters());
        Ok(ckpt)
    }

    /// The parameters Adam updates, in order.
    pub fn learned_parameters(&self) -> Vec<ArrayD<f64>> {
        let mut p = Vec::new();
        if let Some(w) = &self.encoder {
            p.extend(w.to_arrays());
        }
        if self.config.learn_apertures {
            p.extend(self.apertures.logits.iter().map(|l| l.clone().into_dyn()));
        }
        p
    }

    /// Inverse of [`Checkpoint::learned_parameters`].
    pub fn set_learned_parameters(&mut self, params: Vec<ArrayD<f64>>) -> Result<()> {
        let mut rest = params;
        if let Some(w) = &self.encoder {
            let count = w.to_arrays().len();
            if rest.len() < count {
                return Err(Error::LengthMismatch { left: rest.len(), right: count });
            }
            let tail = rest.split_off(count);
            self.encoder = Some(EncoderWeights::from_arrays(&w.config, &rest, w.init_seed)?);
            rest = tail;
        }
        if self.config.learn_apertures {
            if rest.len() != self.apertures.logits.len() {
                return Err(Error::LengthMismatch { left: rest.len(), right: self.apertures.logits.len() });
            }
            for (dst, src) in self.apertures.logits.iter_mut().zip(rest) {
                *dst = src
                    .into_dimensionality()
                    .map_err(|e| Error::ShapeMismatch(format!("aperture logits: {e}")))?;
            }
        } else if !rest.is_empty() {
            return Err(Error::LengthMismatch { left: rest.len(), right: 0 });
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        let text = self.config.to_string();
        out.extend_from_slice(&(text.len() as u64).to_le_bytes());
        out.extend_from_slice(text.as_bytes());
        out.extend_from_slice(&(self.epoch as u64).to_le_bytes());
        out.extend_from_slice(&self.adam.step_count.to_le_bytes());
        let mut arrays: Vec<ArrayD<f64>> = Vec::new();
        if let Some(w) = &self.encoder {
            arrays.extend(w.to_arrays());
        }
        arrays.extend(self.apertures.logits.iter().map(|l| l.clone().into_dyn()));
        arrays.extend(self.adam.first_moment.iter().cloned());
        arrays.extend(self.adam.second_moment.iter().cloned());
        arrays.push(Array1::from(self.loss_history.clone()).into_dyn());
        out.extend_from_slice(&(arrays.len() as u64).to_le_bytes());
        for a in &arrays {
            out.extend_from_slice(&(a.ndim() as u64).to_le_bytes());
            for &d in a.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for v in a.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
        }
        let version = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
        }
        let len = r.u64()? as usize;
        let text = std::str::from_utf8(r.take(len)?)
            .map_err(|_| Error::Checkpoint("config text is not UTF-8".into()))?;
        let config = TrainConfig::parse_text(text)?;
        let epoch = r.u64()? as usize;
        let steps = r.u64()?;
        let count = r.u64()? as usize;
        let mut arrays = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let ndim = r.u64()? as usize;
            let shape = (0..ndim).map(|_| Ok(r.u64()? as usize)).collect::<Result<Vec<_>>>()?;
            let len: usize = shape.iter().product();
            let data = r.take(len.checked_mul(8).ok_or_else(|| Error::Checkpoint("array too large".into()))?)?;
            let values = data.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
            arrays.push(ArrayD::from_shape_vec(IxDyn(&shape), values).expect("length matches shape"));
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
        }

        let mut ckpt = Checkpoint::initial(&config)?;
        let mut it = arrays.into_iter();
        let mut next = |what: &str| it.next().ok_or_else(|| Error::Checkpoint(format!("missing {what}")));
        if let Some(w) = &ckpt.encoder {
            let n = w.to_arrays().len();
            let a = (0..n).map(|_| next("encoder weights")).collect::<Result<Vec<_>>>()?;
            ckpt.encoder = Some(EncoderWeights::from_arrays(&w.config, &a, w.init_seed)?);
        }
        for l in ckpt.apertures.logits.iter_mut() {
            let a = next("aperture logits")?;
            if a.shape() != l.shape() {
                return Err(Error::Checkpoint(format!("aperture logits of shape {:?}", a.shape())));
            }
            *l = a.into_dimensionality().expect("shape checked");
        }
        for moment in [&mut ckpt.adam.first_moment, &mut ckpt.adam.second_moment] {
            for m in moment.iter_mut() {
                let a = next("Adam moments")?;
                if a.shape() != m.shape() {
                    return Err(Error::Checkpoint(format!("Adam moment of shape {:?}", a.shape())));
                }
                *m = a;
            }
        }
        let history = next("loss history")?;
        if history.ndim() != 1 {
            return Err(Error::Checkpoint("loss history must be 1-D".into()));
        }
        ckpt.loss_history = history.iter().copied().collect();
        if next("end").is_ok() {
            return Err(Error::Checkpoint("unexpected extra arrays".into()));
        }
        ckpt.adam.step_count = steps;
        ckpt.epoch = epoch;
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::File::create(path)?.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint("truncated checkpoint".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
