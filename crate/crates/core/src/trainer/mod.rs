//! Training loop, checkpoints, evaluation and ablations.

mod ablate;
mod checkpoint;
mod config;
mod eval;
mod gradcheck;
mod train;

pub use ablate::{ablate, ablation_csv, parse_grid, AblationRow, Variant};
pub use checkpoint::Checkpoint;
pub use config::TrainConfig;
pub use eval::{evaluate, Method, Report, SceneScores};
pub use gradcheck::pipeline_grad_check;
pub use train::{train, Scene, Trainer};

use std::path::Path;

use crate::data::{list_scenes, load_light_field, split_dataset, LightField};
use crate::Result;

/// Named light fields for training and for evaluation.
pub type SceneSet = Vec<(String, LightField)>;

/// Loads every scene directory under `root` and splits them by
/// `config.train_scenes` with `config.seed`. With `train_scenes = 0` every
/// scene is used for both training and evaluation.
pub fn load_dataset(root: &Path, config: &TrainConfig) -> Result<(SceneSet, SceneSet)> {
    let names = list_scenes(root)?;
    let load = |names: &[String]| -> Result<SceneSet> {
        names.iter().map(|n| Ok((n.clone(), load_light_field(&root.join(n))?))).collect()
    };
    if config.train_scenes == 0 {
        if names.is_empty() {
            return Err(crate::Error::BadCount { train: 0, total: 0 });
        }
        let all = load(&names)?;
        return Ok((all.clone(), all));
    }
    let split = split_dataset(&names, config.train_scenes, config.seed)?;
    Ok((load(&split.train_scenes)?, load(&split.test_scenes)?))
}
