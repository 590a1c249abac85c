use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, Axis};

use crate::autodiff::sigmoid;
use crate::{Error, Result};

/// How logits map to transmittance.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ApertureMode {
    /// `sigmoid(logit)`.
    #[default]
    Continuous,
    /// `sigmoid(t * logit)`, a differentiable stand-in for a binary mask.
    BinaryRelaxed,
    /// `1` where `sigmoid(logit) > 0.5`, else `0` (a tie maps to `0`).
    BinaryFrozen,
}

impl fmt::Display for ApertureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ApertureMode::Continuous => "continuous",
            ApertureMode::BinaryRelaxed => "binary-relaxed",
            ApertureMode::BinaryFrozen => "binary-frozen",
        })
    }
}

impl FromStr for ApertureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "continuous" => Ok(ApertureMode::Continuous),
            "binary-relaxed" | "binary" => Ok(ApertureMode::BinaryRelaxed),
            "binary-frozen" => Ok(ApertureMode::BinaryFrozen),
            other => Err(Error::BadMode(format!("unknown aperture mode {other:?}"))),
        }
    }
}

/// Constraint tying the apertures together.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Symmetry {
    #[default]
    Free,
    /// Four apertures: the first, its left-right mirror, its up-down mirror,
    /// and both. Only the first has logits.
    Mirrored4,
}

impl fmt::Display for Symmetry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Symmetry::Free => "free",
            Symmetry::Mirrored4 => "mirrored4",
        })
    }
}

impl FromStr for Symmetry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "free" => Ok(Symmetry::Free),
            "mirrored4" => Ok(Symmetry::Mirrored4),
            other => Err(Error::BadMode(format!("unknown aperture symmetry {other:?}"))),
        }
    }
}

/// `k` coded apertures of `l x l` cells, parameterized by logits.
#[derive(Clone, Debug, PartialEq)]
pub struct ApertureBank {
    /// Independent logit maps: `k` for [`Symmetry::Free`], one for
    /// [`Symmetry::Mirrored4`].
    pub logits: Vec<Array2<f64>>,
    pub mode: ApertureMode,
    pub temperature: f64,
    pub symmetry: Symmetry,
}

impl ApertureBank {
    /// Zero logits (transmittance 0.5 in the continuous mode).
    pub fn new(k: usize, l: usize, mode: ApertureMode, temperature: f64, symmetry: Symmetry) -> Result<Self> {
        let maps = match symmetry {
            Symmetry::Free => k,
            Symmetry::Mirrored4 if k == 4 => 1,
            Symmetry::Mirrored4 => {
                return Err(Error::BadMode(format!("mirrored4 needs exactly 4 apertures, got {k}")))
            }
        };
        let bank = ApertureBank { logits: vec![Array2::zeros((l, l)); maps], mode, temperature, symmetry };
        bank.validate()?;
        Ok(bank)
    }

    pub fn validate(&self) -> Result<()> {
        if self.logits.is_empty() {
            return Err(Error::BadMode("aperture bank is empty".into()));
        }
        if self.symmetry == Symmetry::Mirrored4 && self.logits.len() != 1 {
            return Err(Error::BadMode(format!("mirrored4 stores one logit map, got {}", self.logits.len())));
        }
        if self.mode == ApertureMode::BinaryRelaxed && !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::BadMode(format!("binary-relaxed needs a positive temperature, got {}", self.temperature)));
        }
        let dim = self.logits[0].dim();
        if dim.0 != dim.1 || self.logits.iter().any(|l| l.dim() != dim) {
            return Err(Error::ShapeMismatch("aperture logits must be equal square maps".into()));
        }
        Ok(())
    }

    /// Number of apertures `k`.
    pub fn count(&self) -> usize {
        match self.symmetry {
            Symmetry::Free => self.logits.len(),
            Symmetry::Mirrored4 => 4,
        }
    }

    /// Cells per axis `l`.
    pub fn resolution(&self) -> usize {
        self.logits[0].nrows()
    }

    /// The same logits read in another mode.
    pub fn with_mode(&self, mode: ApertureMode) -> Self {
        ApertureBank { mode, ..self.clone() }
    }

    /// Transmittance maps in `[0, 1]`, one per aperture.
    pub fn effective_apertures(&self) -> Result<Vec<Array2<f64>>> {
        self.validate()?;
        let map = |l: &Array2<f64>| match self.mode {
            ApertureMode::Continuous => l.mapv(sigmoid),
            ApertureMode::BinaryRelaxed => l.mapv(|v| sigmoid(self.temperature * v)),
            ApertureMode::BinaryFrozen => l.mapv(|v| if sigmoid(v) > 0.5 { 1.0 } else { 0.0 }),
        };
        Ok(match self.symmetry {
            Symmetry::Free => self.logits.iter().map(map).collect(),
            Symmetry::Mirrored4 => mirrored4(&map(&self.logits[0])),
        })
    }
}

/// `[a, a mirrored left-right, a mirrored up-down, a rotated 180 degrees]`.
pub(crate) fn mirrored4(a: &Array2<f64>) -> Vec<Array2<f64>> {
    let flip = |a: &Array2<f64>, axis: usize| {
        let mut b = a.clone();
        b.invert_axis(Axis(axis));
        b.as_standard_layout().to_owned()
    };
    let h = flip(a, 1);
    let v = flip(a, 0);
    let both = flip(&v, 1);
    vec![a.clone(), h, v, both]
}
