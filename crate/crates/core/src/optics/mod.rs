//! Pupil functions, defocus, intensity point spread functions and their
//! application to images.
//!
//! Incoherent image formation: a display frame seen through pupil `P` at
//! defocus `psi` is blurred by `|U{P exp(i pi psi rho^2)}|^2`, with `U` the
//! unitary centered DFT. Frames shown in quick succession add up as
//! intensities.

pub mod config;
pub mod convolve;
pub mod export;
pub mod fourier;
pub mod psf;
pub mod pupil;
pub mod shift_add;

pub use config::{defocus_coefficient, DefocusSpec, OpticalConfig};
pub use convolve::{convolve, refocus_sum};
pub use psf::{psf, PointSpreadFunction};
pub use pupil::{embed_coded_aperture, rect_pupil, PupilGrid};
pub use shift_add::shift_and_add_oracle;
