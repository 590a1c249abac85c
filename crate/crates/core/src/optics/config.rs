use crate::{Error, Result};

/// Physical and sampling parameters of the display optics.
///
/// The pupil is sampled on a `D x D` grid (`D` = [`pupil_grid_size`]). The
/// aperture region, `A = l * q` samples wide, sits centered in that grid and
/// is divided into `l x l` shutter cells of `q x q` samples. The intensity PSF
/// is computed on the DFT grid and integrated over `s x s` blocks
/// (`s` = [`oversample`]) into a `K x K` pixel kernel, so `D = K * s`. Both
/// `K` and `s` are odd, which keeps the pixel kernel centered on the optical
/// axis.
///
/// [`pupil_grid_size`]: OpticalConfig::pupil_grid_size
/// [`oversample`]: OpticalConfig::oversample
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OpticalConfig {
    /// Meters.
    pub wavelength: f64,
    /// Meters.
    pub focal_length: f64,
    /// Display panel to lens distance, meters.
    pub object_distance: f64,
    /// Physical width of the aperture region, meters.
    pub pupil_extent: f64,
    /// Coded aperture cells per axis (`l`).
    pub aperture_resolution: usize,
    /// Pupil samples per cell per axis (`q`).
    pub samples_per_cell: usize,
    /// PSF support in image pixels per axis (`K`, odd).
    pub kernel_size: usize,
}

impl Default for OpticalConfig {
    /// 550 nm, f = 50 mm relay at unit magnification, 9 mm pupil split into
    /// 9x9 cells of 33x33 samples, 11x11 pixel PSFs.
    fn default() -> Self {
        OpticalConfig {
            wavelength: 550e-9,
            focal_length: 50e-3,
            object_distance: 100e-3,
            pupil_extent: 9e-3,
            aperture_resolution: 9,
            samples_per_cell: 33,
            kernel_size: 11,
        }
    }
}

impl OpticalConfig {
    /// Same physics with a different cell grid and kernel size.
    pub fn with_grid(aperture_resolution: usize, samples_per_cell: usize, kernel_size: usize) -> Self {
        OpticalConfig { aperture_resolution, samples_per_cell, kernel_size, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("wavelength", self.wavelength),
            ("focal_length", self.focal_length),
            ("object_distance", self.object_distance),
            ("pupil_extent", self.pupil_extent),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if self.object_distance <= self.focal_length {
            return Err(Error::InvalidConfig(
                "object_distance must exceed focal_length for a real intermediate image".into(),
            ));
        }
        let m = self.magnification();
        if (m + 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "magnification must be -1 (object_distance = 2 * focal_length), got {m}"
            )));
        }
        if self.aperture_resolution == 0 || self.samples_per_cell == 0 {
            return Err(Error::InvalidConfig("aperture grid must be non-empty".into()));
        }
        if self.aperture_samples() % 2 == 0 {
            return Err(Error::InvalidConfig(format!(
                "aperture_resolution and samples_per_cell must be odd, got {} and {}",
                self.aperture_resolution, self.samples_per_cell
            )));
        }
        if self.kernel_size % 2 == 0 {
            return Err(Error::InvalidConfig(format!(
                "kernel_size must be odd, got {}",
                self.kernel_size
            )));
        }
        Ok(())
    }

    pub fn nominal_image_distance(&self) -> f64 {
        1.0 / (1.0 / self.focal_length - 1.0 / self.object_distance)
    }

    pub fn magnification(&self) -> f64 {
        -self.nominal_image_distance() / self.object_distance
    }

    /// Aperture region width in pupil samples (`A`).
    pub fn aperture_samples(&self) -> usize {
        self.aperture_resolution * self.samples_per_cell
    }

    /// Pupil samples integrated into one image pixel per axis (`s`, odd).
    pub fn oversample(&self) -> usize {
        let a = self.aperture_samples();
        let k = self.kernel_size;
        let mut s = a.div_ceil(k).max(1);
        // odd s keeps D = K * s odd; with A odd the region centers exactly
        if s % 2 == 0 {
            s += 1;
        }
        s
    }

    /// DFT grid size `D = K * s`.
    pub fn pupil_grid_size(&self) -> usize {
        self.kernel_size * self.oversample()
    }

    /// Index of the first aperture-region sample along each axis.
    pub fn region_offset(&self) -> usize {
        (self.pupil_grid_size() - self.aperture_samples()) / 2
    }

    /// Pupil sample pitch in meters.
    pub fn pupil_sample_pitch(&self) -> f64 {
        self.pupil_extent / self.aperture_samples() as f64
    }

    /// Image pixel pitch at image distance `z_l` (meters).
    pub fn pixel_pitch(&self, image_distance: f64) -> f64 {
        let grid_width = self.pupil_grid_size() as f64 * self.pupil_sample_pitch();
        self.oversample() as f64 * self.wavelength * image_distance / grid_width
    }

    /// PSF displacement in pixels produced by moving a pupil pattern by one
    /// coded cell, at defocus `psi`.
    pub fn shift_per_cell(&self, psi: f64) -> f64 {
        4.0 * psi * self.kernel_size as f64
            / (self.aperture_resolution as f64 * self.aperture_samples() as f64)
    }

    /// Defocus at which one cell of pupil offset shifts the PSF by one pixel.
    pub fn calibrated_psi_max(&self) -> f64 {
        1.0 / self.shift_per_cell(1.0)
    }

    /// Largest |psi| whose quadratic phase is sampled without aliasing at the
    /// pupil edge.
    pub fn max_unaliased_psi(&self) -> f64 {
        self.aperture_samples() as f64 / 4.0
    }

    /// Image distance at which the defocus coefficient equals `psi`.
    pub fn image_distance(&self, psi: f64) -> f64 {
        let r = self.pupil_extent / 2.0;
        let bracket = psi * self.wavelength / (r * r);
        1.0 / (bracket - 1.0 / self.object_distance + 1.0 / self.focal_length)
    }
}

/// Quadratic pupil phase of one focal slice.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DefocusSpec {
    /// Dimensionless: phase at the pupil edge is `pi * psi`.
    pub psi: f64,
    /// Meters.
    pub image_distance: f64,
    pub cfg: OpticalConfig,
}

impl DefocusSpec {
    pub fn from_psi(cfg: &OpticalConfig, psi: f64) -> Self {
        DefocusSpec { psi, image_distance: cfg.image_distance(psi), cfg: *cfg }
    }
}

/// `psi = (1/lambda) (1/z_o + 1/z_l - 1/F) (w_p / 2)^2`.
pub fn defocus_coefficient(cfg: &OpticalConfig, image_distance: f64) -> Result<DefocusSpec> {
    if !(image_distance > 0.0) {
        return Err(Error::NonPositiveDistance(image_distance));
    }
    let r = cfg.pupil_extent / 2.0;
    let bracket = 1.0 / cfg.object_distance + 1.0 / image_distance - 1.0 / cfg.focal_length;
    Ok(DefocusSpec { psi: bracket * r * r / cfg.wavelength, image_distance, cfg: *cfg })
}
