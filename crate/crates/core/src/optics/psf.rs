use std::f64::consts::PI;

use ndarray::{Array2, ArrayView2};
use num_complex::Complex64;

use super::config::{DefocusSpec, OpticalConfig};
use super::fourier::fft2_centered;
use super::pupil::PupilGrid;
use crate::{Error, Result};

/// Non-negative intensity kernel on the `K x K` pixel grid, origin at the
/// center sample.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSpreadFunction {
    pub kernel: Array2<f64>,
    pub total_energy: f64,
    pub psi: f64,
}

impl PointSpreadFunction {
    pub fn from_kernel(kernel: Array2<f64>, psi: f64) -> Self {
        let total_energy = kernel.sum();
        PointSpreadFunction { kernel, total_energy, psi }
    }

    /// Discrete delta: the identity kernel.
    pub fn delta(size: usize) -> Self {
        let mut k = Array2::zeros((size, size));
        k[(size / 2, size / 2)] = 1.0;
        Self::from_kernel(k, 0.0)
    }

    /// Energy centroid `(row, col)` in pixels relative to the kernel center.
    /// See [`circular_centroid`].
    pub fn centroid(&self) -> (f64, f64) {
        circular_centroid(self.kernel.view())
    }
}

/// `exp(i pi psi rho^2)` over the pupil grid, `rho = 1` at the half-width of
/// the aperture region.
pub fn defocus_phase(cfg: &OpticalConfig, psi: f64) -> Array2<Complex64> {
    let d = cfg.pupil_grid_size();
    let center = (d as f64 - 1.0) / 2.0;
    let half = cfg.aperture_samples() as f64 / 2.0;
    let axis: Vec<f64> = (0..d).map(|i| ((i as f64 - center) / half).powi(2)).collect();
    Array2::from_shape_fn((d, d), |(r, c)| Complex64::from_polar(1.0, PI * psi * (axis[r] + axis[c])))
}

/// Sums `s x s` blocks of the fine intensity into pixels.
pub fn bin_pixels(fine: ArrayView2<f64>, s: usize) -> Array2<f64> {
    let (rows, cols) = fine.dim();
    let mut out = Array2::zeros((rows / s, cols / s));
    for ((r, c), v) in fine.indexed_iter() {
        out[(r / s, c / s)] += v;
    }
    out
}

/// Number of samples in the aperture region; the PSF normalization.
pub fn region_sample_count(cfg: &OpticalConfig) -> f64 {
    let a = cfg.aperture_samples() as f64;
    a * a
}

fn check(pupil: &PupilGrid, defocus: &DefocusSpec) -> Result<()> {
    if pupil.cfg != defocus.cfg {
        return Err(Error::ConfigMismatch("pupil and defocus use different optics".into()));
    }
    let limit = pupil.cfg.max_unaliased_psi();
    if defocus.psi.abs() >= limit {
        return Err(Error::BadRange(format!(
            "|psi| = {} aliases the pupil phase (limit {limit})",
            defocus.psi.abs()
        )));
    }
    let d = pupil.cfg.pupil_grid_size();
    if pupil.transmittance.dim() != (d, d) {
        return Err(Error::ShapeMismatch(format!(
            "pupil {:?} vs grid {d}x{d}",
            pupil.transmittance.dim()
        )));
    }
    Ok(())
}

/// `|U{P W}|^2 / N_A` on the DFT grid, before pixel integration.
pub fn fine_intensity(pupil: &PupilGrid, defocus: &DefocusSpec) -> Result<Array2<f64>> {
    check(pupil, defocus)?;
    let phase = defocus_phase(&pupil.cfg, defocus.psi);
    let field = ndarray::Zip::from(&pupil.transmittance).and(&phase).map_collect(|t, c| c * *t);
    let norm = 1.0 / region_sample_count(&pupil.cfg);
    Ok(fft2_centered(&field).mapv(|v| v.norm_sqr() * norm))
}

/// Pixel kernel of a transmittance map under a precomputed phase screen:
/// `bin(|U{P W}|^2) / N_A`. Same arithmetic, in the same order, as the
/// differentiable pipeline.
pub fn intensity_kernel(transmittance: &Array2<f64>, phase: &Array2<Complex64>, cfg: &OpticalConfig) -> Array2<f64> {
    let field = ndarray::Zip::from(transmittance).and(phase).map_collect(|t, c| c * *t);
    let fine = fft2_centered(&field).mapv(|v| v.norm_sqr());
    bin_pixels(fine.view(), cfg.oversample()) * (1.0 / region_sample_count(cfg))
}

/// Intensity PSF of `pupil` at `defocus`, integrated over image pixels.
pub fn psf(pupil: &PupilGrid, defocus: &DefocusSpec) -> Result<PointSpreadFunction> {
    check(pupil, defocus)?;
    let phase = defocus_phase(&pupil.cfg, defocus.psi);
    Ok(PointSpreadFunction::from_kernel(intensity_kernel(&pupil.transmittance, &phase, &pupil.cfg), defocus.psi))
}

/// Centroid of a periodic non-negative map, in samples relative to the center
/// index `n / 2` of each axis.
///
/// DFT-computed kernels are periodic, so the centroid is taken as the
/// circular mean along each axis; for a map symmetric about some point on the
/// torus this returns that point exactly.
pub fn circular_centroid(map: ArrayView2<f64>) -> (f64, f64) {
    let (rows, cols) = map.dim();
    let mut zr = Complex64::new(0.0, 0.0);
    let mut zc = Complex64::new(0.0, 0.0);
    for ((r, c), v) in map.indexed_iter() {
        let dr = r as f64 - (rows / 2) as f64;
        let dc = c as f64 - (cols / 2) as f64;
        zr += Complex64::from_polar(*v, 2.0 * PI * dr / rows as f64);
        zc += Complex64::from_polar(*v, 2.0 * PI * dc / cols as f64);
    }
    (zr.arg() * rows as f64 / (2.0 * PI), zc.arg() * cols as f64 / (2.0 * PI))
}
