//! Light field datasets: loading and saving scene directories, view sampling
//! patterns, train/test splits, synthetic scenes and focal stack export.
//!
//! On disk a scene is a directory of `view_{s}_{t}.png` files, `s` indexing
//! rows and `t` columns of the angular grid. A dataset is a directory of
//! scene directories.

mod io;
mod lightfield;
mod selection;
mod split;
pub mod synth;

pub use io::{list_scenes, load_light_field, read_png, save_light_field, write_png, write_stack, BitDepth};
pub use lightfield::LightField;
pub use selection::{sample_views, ViewPattern, ViewSelection};
pub use split::{split_dataset, DatasetSplit};
