use ndarray::s;

use crate::{Error, Image, Result};

/// `N x N` grid of RGB sub-aperture views, row-major in `(s, t)`.
///
/// Immutable after construction.
#[derive(Clone, Debug, PartialEq)]
pub struct LightField {
    views: Vec<Image>,
    n: usize,
    sampling_period: f64,
}

impl LightField {
    /// Validates shapes, value range and grid size. `sampling_period` is the
    /// pupil-plane distance between neighbouring views in millimeters.
    pub fn new(views: Vec<Image>, n: usize, sampling_period: f64) -> Result<Self> {
        if n < 2 || views.len() != n * n {
            return Err(Error::NotSquareGrid { count: views.len() });
        }
        let dim = views[0].dim();
        if dim.0 != 3 {
            return Err(Error::ShapeMismatch(format!("views must have 3 channels, got {}", dim.0)));
        }
        for (i, v) in views.iter().enumerate() {
            if v.dim() != dim {
                return Err(Error::ShapeMismatch(format!(
                    "view ({}, {}) is {:?}, view (0, 0) is {:?}",
                    i / n,
                    i % n,
                    v.dim(),
                    dim
                )));
            }
            if let Some(x) = v.iter().find(|x| !(0.0..=1.0).contains(*x)) {
                return Err(Error::BadRange(format!(
                    "view ({}, {}) has value {x} outside [0, 1]",
                    i / n,
                    i % n
                )));
            }
        }
        if !(sampling_period > 0.0) {
            return Err(Error::InvalidConfig(format!("sampling period must be positive, got {sampling_period}")));
        }
        Ok(LightField { views, n, sampling_period })
    }

    pub fn angular_resolution(&self) -> usize {
        self.n
    }

    /// `(H, W)`.
    pub fn spatial_resolution(&self) -> (usize, usize) {
        let (_, h, w) = self.views[0].dim();
        (h, w)
    }

    pub fn sampling_period(&self) -> f64 {
        self.sampling_period
    }

    pub fn view(&self, s: usize, t: usize) -> &Image {
        &self.views[s * self.n + t]
    }

    pub fn views(&self) -> &[Image] {
        &self.views
    }

    /// Same grid, every view cropped to `h x w` at `(top, left)`.
    pub fn crop(&self, top: usize, left: usize, h: usize, w: usize) -> Result<LightField> {
        let (fh, fw) = self.spatial_resolution();
        if h == 0 || w == 0 || top + h > fh || left + w > fw {
            return Err(Error::ShapeMismatch(format!(
                "{h}x{w} crop at ({top}, {left}) exceeds {fh}x{fw} views"
            )));
        }
        let views = self
            .views
            .iter()
            .map(|v| v.slice(s![.., top..top + h, left..left + w]).to_owned())
            .collect();
        Ok(LightField { views, n: self.n, sampling_period: self.sampling_period })
    }

    /// Centered `h x w` crop.
    pub fn center_crop(&self, h: usize, w: usize) -> Result<LightField> {
        let (fh, fw) = self.spatial_resolution();
        if h > fh || w > fw {
            return Err(Error::ShapeMismatch(format!("{h}x{w} crop of {fh}x{fw} views")));
        }
        self.crop((fh - h) / 2, (fw - w) / 2, h, w)
    }
}
