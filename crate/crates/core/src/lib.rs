//! Simulation and end-to-end optimization of coded time-division multiplexing
//! (CTDM) light field displays.
//!
//! A light field display built on time-division multiplexing shows sub-aperture
//! views one after another, each through a small shutter cell in the pupil of
//! the display optics. The eye integrates the frames into a refocused image.
//! The coded variant shows `k` *encoded* images through `k` learned coded
//! apertures; an encoding network and the aperture patterns are optimized
//! jointly so the perceived focal stack matches the focal stack of a dense
//! light field.
//!
//! Crate layout:
//!
//! * [`data`]: light field loading, view sampling, dataset splits, synthetic scenes.
//! * [`optics`]: pupil functions, defocus, PSF synthesis and convolution.
//! * [`autodiff`]: a small reverse-mode engine, Adam and a gradient checker.
//! * [`encoder`]: the residual convolutional encoding network.
//! * [`display`]: ground truth, TDM and CTDM renderers and coded-aperture banks.
//! * [`metrics`]: focus measure, weighted L1 loss, PSNR and SSIM.
//! * [`trainer`]: configuration, training loop, checkpoints, evaluation, ablations.
//!
//! Images are `ndarray::Array3<f64>` in channel-first `(3, H, W)` layout with
//! linear intensities.

pub mod autodiff;
pub mod data;
pub mod display;
pub mod encoder;
mod error;
pub mod exec;
pub mod metrics;
pub mod optics;
pub mod trainer;

pub use error::{Error, Result};

/// RGB image, channel-first `(3, H, W)`.
pub type Image = ndarray::Array3<f64>;
