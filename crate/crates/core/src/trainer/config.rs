use std::fmt;
use std::str::FromStr;

use crate::autodiff::AdamConfig;
use crate::data::{ViewPattern, ViewSelection};
use crate::display::{ApertureMode, Exposure, FocalStackSpec, OpticsPlan, Symmetry};
use crate::encoder::EncoderConfig;
use crate::optics::OpticalConfig;
use crate::{Error, Result};

/// Every training, evaluation and optics parameter of one run.
///
/// Serialized as flat `key = value` lines; see [`TrainConfig::KEYS`].
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub optics: OpticalConfig,
    /// Light field views per axis (`N`).
    pub grid: usize,
    /// Sampled views; their count is `n`.
    pub views: ViewPattern,
    /// Displayed frames.
    pub k: usize,
    /// Focus weighting strength of the loss.
    pub beta: f64,
    /// Focal slices (`m`).
    pub slices: usize,
    /// Extreme slice defocus; `None` uses the calibrated value of the optics.
    pub psi_max: Option<f64>,
    pub aperture_mode: ApertureMode,
    pub temperature: f64,
    pub symmetry: Symmetry,
    pub encoder_channels: usize,
    pub encoder_blocks: usize,
    pub encoder_kernel: usize,
    /// Train the encoder. Without it the frames are the sampled views (`k = n`).
    pub learn_f: bool,
    /// Train the coded apertures. Without it every frame is shown through the
    /// rect cell of its view (`k = n`).
    pub learn_apertures: bool,
    /// Brightness of frames shown through fixed rect cells.
    pub exposure: Exposure,
    pub epochs: usize,
    pub adam: AdamConfig,
    /// Side of the random square training crop.
    pub crop: usize,
    pub seed: u64,
    /// Epochs between intermediate checkpoints; 0 writes only the final one.
    pub checkpoint_every: usize,
    /// Scenes used for training; 0 trains and evaluates on every scene.
    pub train_scenes: usize,
    /// Side of the centered evaluation crop; 0 evaluates full scenes.
    pub eval_crop: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            optics: OpticalConfig::default(),
            grid: 9,
            views: ViewPattern::Corners4,
            k: 4,
            beta: 2.0,
            slices: 9,
            psi_max: None,
            aperture_mode: ApertureMode::Continuous,
            temperature: 10.0,
            symmetry: Symmetry::Free,
            encoder_channels: 64,
            encoder_blocks: 10,
            encoder_kernel: 3,
            learn_f: true,
            learn_apertures: true,
            exposure: Exposure::Raw,
            epochs: 10000,
            adam: AdamConfig::default(),
            crop: 128,
            seed: 0,
            checkpoint_every: 0,
            train_scenes: 0,
            eval_crop: 0,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("invalid value {value:?} for key {key:?}")))
}

impl TrainConfig {
    /// Recognized keys, in canonical order.
    pub const KEYS: [&'static str; 32] = [
        "grid",
        "views",
        "k",
        "beta",
        "slices",
        "psi_max",
        "wavelength",
        "focal_length",
        "object_distance",
        "pupil_extent",
        "cells",
        "cell_samples",
        "kernel_size",
        "aperture_mode",
        "temperature",
        "symmetry",
        "encoder_channels",
        "encoder_blocks",
        "encoder_kernel",
        "learn_f",
        "learn_apertures",
        "exposure",
        "epochs",
        "lr",
        "adam_beta1",
        "adam_beta2",
        "adam_eps",
        "crop",
        "seed",
        "checkpoint_every",
        "train_scenes",
        "eval_crop",
    ];

    /// Sets one key from its text value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "grid" => self.grid = parse(key, v)?,
            "views" => self.views = v.parse()?,
            "k" => self.k = parse(key, v)?,
            "beta" => self.beta = parse(key, v)?,
            "slices" => self.slices = parse(key, v)?,
            "psi_max" => self.psi_max = if v == "auto" { None } else { Some(parse(key, v)?) },
            "wavelength" => self.optics.wavelength = parse(key, v)?,
            "focal_length" => self.optics.focal_length = parse(key, v)?,
            "object_distance" => self.optics.object_distance = parse(key, v)?,
            "pupil_extent" => self.optics.pupil_extent = parse(key, v)?,
            "cells" => self.optics.aperture_resolution = parse(key, v)?,
            "cell_samples" => self.optics.samples_per_cell = parse(key, v)?,
            "kernel_size" => self.optics.kernel_size = parse(key, v)?,
            "aperture_mode" => self.aperture_mode = v.parse()?,
            "temperature" => self.temperature = parse(key, v)?,
            "symmetry" => self.symmetry = v.parse()?,
            "encoder_channels" => self.encoder_channels = parse(key, v)?,
            "encoder_blocks" => self.encoder_blocks = parse(key, v)?,
            "encoder_kernel" => self.encoder_kernel = parse(key, v)?,
            "learn_f" => self.learn_f = parse(key, v)?,
            "learn_apertures" => self.learn_apertures = parse(key, v)?,
            "exposure" => self.exposure = v.parse()?,
            "epochs" => self.epochs = parse(key, v)?,
            "lr" => self.adam.lr = parse(key, v)?,
            "adam_beta1" => self.adam.beta1 = parse(key, v)?,
            "adam_beta2" => self.adam.beta2 = parse(key, v)?,
            "adam_eps" => self.adam.eps = parse(key, v)?,
            "crop" => self.crop = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "checkpoint_every" => self.checkpoint_every = parse(key, v)?,
            "train_scenes" => self.train_scenes = parse(key, v)?,
            "eval_crop" => self.eval_crop = parse(key, v)?,
            other => return Err(Error::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    /// Text value of one key, as written by [`fmt::Display`].
    pub fn get(&self, key: &str) -> Result<String> {
        Ok(match key {
            "grid" => self.grid.to_string(),
            "views" => self.views.to_string(),
            "k" => self.k.to_string(),
            "beta" => self.beta.to_string(),
            "slices" => self.slices.to_string(),
            "psi_max" => self.psi_max.map_or("auto".into(), |p| p.to_string()),
            "wavelength" => self.optics.wavelength.to_string(),
            "focal_length" => self.optics.focal_length.to_string(),
            "object_distance" => self.optics.object_distance.to_string(),
            "pupil_extent" => self.optics.pupil_extent.to_string(),
            "cells" => self.optics.aperture_resolution.to_string(),
            "cell_samples" => self.optics.samples_per_cell.to_string(),
            "kernel_size" => self.optics.kernel_size.to_string(),
            "aperture_mode" => self.aperture_mode.to_string(),
            "temperature" => self.temperature.to_string(),
            "symmetry" => self.symmetry.to_string(),
            "encoder_channels" => self.encoder_channels.to_string(),
            "encoder_blocks" => self.encoder_blocks.to_string(),
            "encoder_kernel" => self.encoder_kernel.to_string(),
            "learn_f" => self.learn_f.to_string(),
            "learn_apertures" => self.learn_apertures.to_string(),
            "exposure" => self.exposure.to_string(),
            "epochs" => self.epochs.to_string(),
            "lr" => self.adam.lr.to_string(),
            "adam_beta1" => self.adam.beta1.to_string(),
            "adam_beta2" => self.adam.beta2.to_string(),
            "adam_eps" => self.adam.eps.to_string(),
            "crop" => self.crop.to_string(),
            "seed" => self.seed.to_string(),
            "checkpoint_every" => self.checkpoint_every.to_string(),
            "train_scenes" => self.train_scenes.to_string(),
            "eval_crop" => self.eval_crop.to_string(),
            other => return Err(Error::UnknownKey(other.to_string())),
        })
    }

    /// Applies `key = value` lines over `self`. Blank lines and `#` comments
    /// are skipped; unknown keys are errors.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("expected `key = value`, got {line:?}")))?;
            self.set(key, value)?;
        }
        Ok(())
    }

    /// Defaults overridden by `text`, validated.
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut cfg = TrainConfig::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn selection(&self) -> Result<ViewSelection> {
        ViewSelection::from_pattern(self.grid, &self.views)
    }

    /// Sampled view count `n`.
    pub fn n(&self) -> Result<usize> {
        Ok(self.selection()?.len())
    }

    pub fn encoder_config(&self) -> Result<EncoderConfig> {
        Ok(EncoderConfig {
            n: self.n()?,
            k: self.k,
            channels: self.encoder_channels,
            blocks: self.encoder_blocks,
            kernel: self.encoder_kernel,
        })
    }

    pub fn psi_max(&self) -> f64 {
        self.psi_max.unwrap_or_else(|| self.optics.calibrated_psi_max())
    }

    pub fn stack_spec(&self) -> Result<FocalStackSpec> {
        FocalStackSpec::linear(self.slices, self.psi_max())
    }

    pub fn plan(&self) -> Result<OpticsPlan> {
        OpticsPlan::new(self.optics, self.stack_spec()?)
    }

    pub fn validate(&self) -> Result<()> {
        self.optics.validate()?;
        let n = self.n()?;
        for (name, v) in [
            ("grid", self.grid),
            ("k", self.k),
            ("slices", self.slices),
            ("crop", self.crop),
            ("encoder_channels", self.encoder_channels),
        ] {
            if v == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if self.optics.aperture_samples() % self.grid != 0 {
            return Err(Error::InvalidConfig(format!(
                "a {}-sample aperture region cannot be split into {} view cells",
                self.optics.aperture_samples(),
                self.grid
            )));
        }
        if (!self.learn_f || !self.learn_apertures) && self.k != n {
            return Err(Error::InvalidConfig(format!(
                "k must equal the {n} sampled views unless both the encoder and the apertures are learned, got k = {}",
                self.k
            )));
        }
        if !(self.beta >= 0.0) {
            return Err(Error::NonNegativeBetaRequired(self.beta));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::InvalidConfig(format!("temperature must be positive, got {}", self.temperature)));
        }
        if self.symmetry == Symmetry::Mirrored4 && self.k != 4 {
            return Err(Error::InvalidConfig(format!("mirrored4 symmetry needs k = 4, got {}", self.k)));
        }
        let AdamConfig { lr, beta1, beta2, eps } = self.adam;
        if !(lr > 0.0 && (0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2) && eps > 0.0) {
            return Err(Error::InvalidConfig(format!("invalid Adam settings {:?}", self.adam)));
        }
        self.encoder_config()?.validate()?;
        self.stack_spec()?.check(&self.optics)?;
        if self.crop <= 2 * (self.optics.kernel_size / 2) {
            return Err(Error::InvalidConfig(format!(
                "crop {} leaves no pixels outside the {}-pixel border",
                self.crop,
                self.optics.kernel_size / 2
            )));
        }
        Ok(())
    }
}

impl fmt::Display for TrainConfig {
    /// Canonical text: every key in [`TrainConfig::KEYS`] order.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for key in Self::KEYS {
            writeln!(f, "{key} = {}", self.get(key).map_err(|_| fmt::Error)?)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_text_round_trips() {
        let mut cfg = TrainConfig::default();
        cfg.apply_text("beta = 0.3\nlr = 1e-2 # fast\nexposure = matched\npsi_max = 12.5\nviews = custom(0:0;8:8)\nk = 2\n").unwrap();
        cfg.validate().unwrap();
        let back = TrainConfig::parse_text(&cfg.to_string()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_string(), cfg.to_string());
    }

    #[test]
    fn unknown_key_is_named() {
        match TrainConfig::parse_text("betta = 2\n") {
            Err(Error::UnknownKey(k)) => assert_eq!(k, "betta"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn fixed_paths_require_k_equal_n() {
        let err = TrainConfig::parse_text("learn_f = false\nk = 3\n").unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)));
        TrainConfig::parse_text("learn_f = false\nk = 4\n").unwrap();
        TrainConfig::parse_text("k = 3\n").unwrap();
    }

    #[test]
    fn bad_values_are_rejected() {
        assert!(TrainConfig::parse_text("k = two\n").is_err());
        assert!(TrainConfig::parse_text("no equals sign\n").is_err());
        assert!(matches!(TrainConfig::parse_text("beta = -1\n"), Err(Error::NonNegativeBetaRequired(_))));
        assert!(TrainConfig::parse_text("psi_max = 1000\n").is_err());
        assert!(TrainConfig::parse_text("grid = 4\n").is_err());
    }
}
