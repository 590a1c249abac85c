//! The three renderers (dense ground truth, TDM baseline, coded TDM) and the
//! coded-aperture parameterization.
//!
//! A focal slice is the image perceived when the eye focuses at defocus
//! `psi`: the sum over displayed frames of the frame convolved with the PSF of
//! its pupil at that defocus.

mod aperture;
mod ctdm;
mod render;
mod stack;

pub use aperture::{ApertureBank, ApertureMode, Symmetry};
pub use ctdm::{aperture_graph, ctdm_forward, ctdm_graph};
pub use render::{ground_truth_stack, render_frames, tdm_forward, CellPsfBank, Exposure, OpticsPlan};
pub use stack::{FocalStack, FocalStackSpec};
