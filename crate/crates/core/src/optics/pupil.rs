use ndarray::{Array2, ArrayView2};

use super::config::OpticalConfig;
use crate::{Error, Result};

/// Transmittance map on the `D x D` pupil grid.
///
/// Values lie in `[0, 1]` and are zero outside the centered aperture region.
#[derive(Clone, Debug, PartialEq)]
pub struct PupilGrid {
    pub transmittance: Array2<f64>,
    pub cfg: OpticalConfig,
}

impl PupilGrid {
    /// Sum of squared transmittance over the grid.
    pub fn power(&self) -> f64 {
        self.transmittance.iter().map(|v| v * v).sum()
    }
}

/// Nearest-neighbour replication of a `g x g` cell map over the aperture
/// region, zero elsewhere. `g` must divide the region width.
pub fn embed_cells(values: ArrayView2<f64>, cfg: &OpticalConfig) -> Result<Array2<f64>> {
    let (g, g2) = values.dim();
    let a = cfg.aperture_samples();
    if g != g2 || g == 0 || a % g != 0 {
        return Err(Error::ConfigMismatch(format!(
            "{g}x{g2} cell map cannot tile a {a}-sample aperture region"
        )));
    }
    let d = cfg.pupil_grid_size();
    let off = cfg.region_offset();
    let cell = a / g;
    let mut out = Array2::zeros((d, d));
    for r in 0..a {
        for c in 0..a {
            out[(off + r, off + c)] = values[(r / cell, c / cell)];
        }
    }
    Ok(out)
}

/// Adjoint of [`embed_cells`]: sums every cell's samples.
pub fn pool_cells(grid: ArrayView2<f64>, cells: usize, cfg: &OpticalConfig) -> Array2<f64> {
    let a = cfg.aperture_samples();
    let off = cfg.region_offset();
    let cell = a / cells;
    let mut out = Array2::zeros((cells, cells));
    for r in 0..a {
        for c in 0..a {
            out[(r / cell, c / cell)] += grid[(off + r, off + c)];
        }
    }
    out
}

/// Open `width x width` block of cells centered on angular index `index` of
/// an `grid x grid` tiling of the aperture region.
pub fn rect_pupil(
    index: (usize, usize),
    grid: usize,
    cfg: &OpticalConfig,
    width: usize,
) -> Result<PupilGrid> {
    if width == 0 {
        return Err(Error::OutOfPupil("zero-width aperture".into()));
    }
    let half = (width as isize - 1) / 2;
    let mut cells = Array2::zeros((grid, grid));
    let (s0, t0) = (index.0 as isize - half, index.1 as isize - half);
    let (s1, t1) = (s0 + width as isize, t0 + width as isize);
    if s0 < 0 || t0 < 0 || s1 > grid as isize || t1 > grid as isize {
        return Err(Error::OutOfPupil(format!(
            "{width}-cell block at {index:?} leaves the {grid}x{grid} grid"
        )));
    }
    for s in s0..s1 {
        for t in t0..t1 {
            cells[(s as usize, t as usize)] = 1.0;
        }
    }
    Ok(PupilGrid { transmittance: embed_cells(cells.view(), cfg)?, cfg: *cfg })
}

/// Embeds an `l x l` coded aperture in the pupil.
pub fn embed_coded_aperture(values: ArrayView2<f64>, cfg: &OpticalConfig) -> Result<PupilGrid> {
    let l = cfg.aperture_resolution;
    if values.dim() != (l, l) {
        return Err(Error::ShapeMismatch(format!(
            "coded aperture is {:?}, configuration expects {l}x{l}",
            values.dim()
        )));
    }
    if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::BadRange(format!("aperture transmittance {v} outside [0, 1]")));
    }
    Ok(PupilGrid { transmittance: embed_cells(values, cfg)?, cfg: *cfg })
}
