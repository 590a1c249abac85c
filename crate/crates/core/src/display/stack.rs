use crate::optics::OpticalConfig;
use crate::{Error, Image, Result};

/// Defocus coefficients of the focal slices, ascending.
#[derive(Clone, Debug, PartialEq)]
pub struct FocalStackSpec {
    pub psi: Vec<f64>,
}

impl FocalStackSpec {
    /// `m` values evenly spaced over `[-psi_max, psi_max]`; `m = 1` gives `{0}`.
    pub fn linear(m: usize, psi_max: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidConfig("focal stack needs at least one slice".into()));
        }
        if !(psi_max >= 0.0) {
            return Err(Error::InvalidConfig(format!("psi_max must be non-negative, got {psi_max}")));
        }
        let psi = if m == 1 {
            vec![0.0]
        } else {
            (0..m)
                .map(|j| {
                    // exact 0 at the middle and exact symmetry
                    let t = 2.0 * j as f64 - (m - 1) as f64;
                    psi_max * t / (m - 1) as f64
                })
                .collect()
        };
        Self::new(psi)
    }

    /// Nine slices up to the calibrated extreme of `cfg`.
    pub fn default_for(cfg: &OpticalConfig) -> Self {
        Self::linear(9, cfg.calibrated_psi_max()).expect("valid defaults")
    }

    pub fn new(psi: Vec<f64>) -> Result<Self> {
        if psi.is_empty() {
            return Err(Error::InvalidConfig("focal stack needs at least one slice".into()));
        }
        if psi.windows(2).any(|w| !(w[0] < w[1])) || psi.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidConfig(format!("psi values must be finite and strictly ascending: {psi:?}")));
        }
        Ok(FocalStackSpec { psi })
    }

    pub fn len(&self) -> usize {
        self.psi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psi.is_empty()
    }

    /// Every slice must be sampled without phase aliasing under `cfg`.
    pub fn check(&self, cfg: &OpticalConfig) -> Result<()> {
        let limit = cfg.max_unaliased_psi();
        match self.psi.iter().find(|p| p.abs() >= limit) {
            Some(p) => Err(Error::BadRange(format!("psi {p} aliases the pupil phase (limit {limit})"))),
            None => Ok(()),
        }
    }
}

/// `m` rendered slices, unclamped.
#[derive(Clone, Debug, PartialEq)]
pub struct FocalStack {
    pub slices: Vec<Image>,
    pub spec: FocalStackSpec,
}

impl FocalStack {
    pub fn new(slices: Vec<Image>, spec: FocalStackSpec) -> Result<Self> {
        if slices.len() != spec.len() {
            return Err(Error::LengthMismatch { left: slices.len(), right: spec.len() });
        }
        if let Some(s) = slices.iter().find(|s| s.dim() != slices[0].dim()) {
            return Err(Error::ShapeMismatch(format!("slice {:?} vs {:?}", s.dim(), slices[0].dim())));
        }
        Ok(FocalStack { slices, spec })
    }

    /// `(H, W)` of the slices.
    pub fn spatial(&self) -> (usize, usize) {
        let (_, h, w) = self.slices[0].dim();
        (h, w)
    }

    /// Every slice cropped to `h x w` at `(top, left)`.
    pub fn crop(&self, top: usize, left: usize, h: usize, w: usize) -> Result<FocalStack> {
        let (fh, fw) = self.spatial();
        if top + h > fh || left + w > fw {
            return Err(Error::ShapeMismatch(format!("{h}x{w} crop at ({top}, {left}) of {fh}x{fw}")));
        }
        let slices = self
            .slices
            .iter()
            .map(|s| s.slice(ndarray::s![.., top..top + h, left..left + w]).to_owned())
            .collect();
        Ok(FocalStack { slices, spec: self.spec.clone() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_sweep_is_symmetric_with_zero() {
        let s = FocalStackSpec::linear(9, 60.75).unwrap();
        assert_eq!(s.psi[4], 0.0);
        assert_eq!(s.psi[0], -60.75);
        assert_eq!(s.psi[8], 60.75);
        for j in 0..9 {
            assert_eq!(s.psi[j], -s.psi[8 - j]);
        }
        assert_eq!(FocalStackSpec::linear(1, 5.0).unwrap().psi, vec![0.0]);
    }

    #[test]
    fn rejects_unsorted_and_aliased() {
        assert!(FocalStackSpec::new(vec![1.0, 0.0]).is_err());
        let cfg = OpticalConfig::default();
        let s = FocalStackSpec::new(vec![0.0, cfg.max_unaliased_psi()]).unwrap();
        assert!(s.check(&cfg).is_err());
        FocalStackSpec::default_for(&cfg).check(&cfg).unwrap();
    }
}
