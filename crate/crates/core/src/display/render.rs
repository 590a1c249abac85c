use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, Array3};
use num_complex::Complex64;

use super::stack::{FocalStack, FocalStackSpec};
use crate::data::{LightField, ViewSelection};
use crate::exec::Exec;
use crate::optics::convolve::convolve;
use crate::optics::psf::{defocus_phase, intensity_kernel};
use crate::optics::pupil::rect_pupil;
use crate::optics::{OpticalConfig, PointSpreadFunction};
use crate::{Error, Image, Result};

/// Optics plus focal slices, with the defocus phase screens precomputed.
#[derive(Clone, Debug)]
pub struct OpticsPlan {
    pub cfg: OpticalConfig,
    pub spec: FocalStackSpec,
    phases: Vec<Array2<Complex64>>,
}

impl OpticsPlan {
    pub fn new(cfg: OpticalConfig, spec: FocalStackSpec) -> Result<Self> {
        cfg.validate()?;
        spec.check(&cfg)?;
        let phases = spec.psi.iter().map(|&p| defocus_phase(&cfg, p)).collect();
        Ok(OpticsPlan { cfg, spec, phases })
    }

    /// Phase screen `exp(i pi psi_j rho^2)` of slice `j`.
    pub fn phase(&self, j: usize) -> &Array2<Complex64> {
        &self.phases[j]
    }

    /// Slice count `m`.
    pub fn slices(&self) -> usize {
        self.phases.len()
    }

    /// PSF of a `D x D` transmittance map at slice `j`.
    pub fn psf(&self, transmittance: &Array2<f64>, j: usize) -> PointSpreadFunction {
        PointSpreadFunction::from_kernel(intensity_kernel(transmittance, &self.phases[j], &self.cfg), self.spec.psi[j])
    }

    /// Width of the band at the image border that zero padding corrupts.
    pub fn border(&self) -> usize {
        self.cfg.kernel_size / 2
    }
}

/// How bright each TDM frame is shown.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Exposure {
    /// Every frame at full brightness through its one cell: a sparse
    /// selection of `n` out of `N^2` views collects `n / N^2` of the light.
    #[default]
    Raw,
    /// Frames scaled by `N^2 / n` so the total light matches the dense field.
    /// Identical to `Raw` when all views are shown.
    Matched,
}

impl Exposure {
    /// Frame gain for `shown` of `grid x grid` views.
    pub fn gain(self, grid: usize, shown: usize) -> f64 {
        match self {
            Exposure::Raw => 1.0,
            Exposure::Matched => (grid * grid) as f64 / shown as f64,
        }
    }
}

impl fmt::Display for Exposure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Exposure::Raw => "raw",
            Exposure::Matched => "matched",
        })
    }
}

impl FromStr for Exposure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "raw" => Ok(Exposure::Raw),
            "matched" => Ok(Exposure::Matched),
            other => Err(Error::BadMode(format!("unknown exposure {other:?}"))),
        }
    }
}

/// Single-cell PSFs of an `N x N` view grid at every focal slice.
#[derive(Clone, Debug)]
pub struct CellPsfBank {
    grid: usize,
    psfs: HashMap<(usize, usize), Vec<PointSpreadFunction>>,
}

impl CellPsfBank {
    /// PSFs for `indices` (every cell when `None`). Cell `(s, t)` is the
    /// one-cell rect of the `grid x grid` tiling of the aperture region.
    pub fn new(plan: &OpticsPlan, grid: usize, indices: Option<&[(usize, usize)]>, exec: Exec) -> Result<Self> {
        let all: Vec<(usize, usize)> = match indices {
            Some(ix) => ix.to_vec(),
            None => (0..grid).flat_map(|s| (0..grid).map(move |t| (s, t))).collect(),
        };
        let computed = exec.map(&all, |&ix| -> Result<Vec<PointSpreadFunction>> {
            let pupil = rect_pupil(ix, grid, &plan.cfg, 1)?;
            Ok((0..plan.slices()).map(|j| plan.psf(&pupil.transmittance, j)).collect())
        });
        let mut psfs = HashMap::with_capacity(all.len());
        for (ix, r) in all.into_iter().zip(computed) {
            psfs.insert(ix, r?);
        }
        Ok(CellPsfBank { grid, psfs })
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    /// PSFs of cell `(s, t)` per slice.
    pub fn get(&self, s: usize, t: usize) -> Result<&[PointSpreadFunction]> {
        self.psfs
            .get(&(s, t))
            .map(Vec::as_slice)
            .ok_or_else(|| Error::OutOfPupil(format!("no PSFs computed for cell ({s}, {t})")))
    }

    fn check_field(&self, lf: &LightField) -> Result<()> {
        if lf.angular_resolution() != self.grid {
            return Err(Error::ConfigMismatch(format!(
                "light field has {} views per axis, PSF bank {}",
                lf.angular_resolution(),
                self.grid
            )));
        }
        Ok(())
    }

    /// Every view through its own cell, summed per slice.
    pub fn ground_truth(&self, lf: &LightField, spec: &FocalStackSpec, exec: Exec) -> Result<FocalStack> {
        self.check_field(lf)?;
        let n = self.grid;
        let all: Vec<(usize, usize)> = (0..n).flat_map(|s| (0..n).map(move |t| (s, t))).collect();
        self.render(lf, &all, 1.0, spec, exec)
    }

    /// The selected views through their cells.
    pub fn tdm(
        &self,
        lf: &LightField,
        selection: &ViewSelection,
        exposure: Exposure,
        spec: &FocalStackSpec,
        exec: Exec,
    ) -> Result<FocalStack> {
        self.check_field(lf)?;
        selection.check_grid(self.grid)?;
        self.render(lf, selection.indices(), exposure.gain(self.grid, selection.len()), spec, exec)
    }

    fn render(
        &self,
        lf: &LightField,
        indices: &[(usize, usize)],
        gain: f64,
        spec: &FocalStackSpec,
        exec: Exec,
    ) -> Result<FocalStack> {
        let frames: Vec<&Image> = indices.iter().map(|&(s, t)| lf.view(s, t)).collect();
        let psfs = indices.iter().map(|&(s, t)| self.get(s, t)).collect::<Result<Vec<_>>>()?;
        let slices = render_frames(&frames, &psfs, gain, exec)?;
        FocalStack::new(slices, spec.clone())
    }
}

/// `gain * sum_i convolve(frames[i], psfs[i][j])` for every slice `j`.
/// Frames are accumulated in order, so the result does not depend on `exec`.
pub fn render_frames(
    frames: &[&Image],
    psfs: &[&[PointSpreadFunction]],
    gain: f64,
    exec: Exec,
) -> Result<Vec<Image>> {
    if frames.len() != psfs.len() || frames.is_empty() {
        return Err(Error::LengthMismatch { left: frames.len(), right: psfs.len() });
    }
    let m = psfs[0].len();
    if psfs.iter().any(|p| p.len() != m) {
        return Err(Error::ShapeMismatch("frames have different slice counts".into()));
    }
    let slices: Vec<usize> = (0..m).collect();
    exec.map(&slices, |&j| -> Result<Image> {
        let mut acc = Array3::zeros(frames[0].dim());
        for (frame, p) in frames.iter().zip(psfs) {
            acc += &convolve(frame, &p[j])?;
        }
        if gain != 1.0 {
            acc *= gain;
        }
        Ok(acc)
    })
    .into_iter()
    .collect()
}

/// Dense-field focal stack: every view of `lf` through its own pupil cell.
pub fn ground_truth_stack(lf: &LightField, plan: &OpticsPlan, exec: Exec) -> Result<FocalStack> {
    CellPsfBank::new(plan, lf.angular_resolution(), None, exec)?.ground_truth(lf, &plan.spec, exec)
}

/// Time-division multiplexing over the selected views, each shown through a
/// one-cell aperture at its angular position.
pub fn tdm_forward(
    lf: &LightField,
    selection: &ViewSelection,
    plan: &OpticsPlan,
    exposure: Exposure,
    exec: Exec,
) -> Result<FocalStack> {
    let bank = CellPsfBank::new(plan, lf.angular_resolution(), Some(selection.indices()), exec)?;
    bank.tdm(lf, selection, exposure, &plan.spec, exec)
}
