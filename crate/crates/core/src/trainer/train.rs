use ndarray::{Array2, ArrayD};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Checkpoint, TrainConfig};
use crate::autodiff::{Graph, Var};
use crate::data::{LightField, ViewSelection};
use crate::display::{
    aperture_graph, ctdm_forward, ctdm_graph, render_frames, ApertureMode, CellPsfBank, Exposure, FocalStack,
    OpticsPlan,
};
use crate::encoder::{encode, encode_graph, stack_views};
use crate::exec::Exec;
use crate::metrics::{weight_maps, weighted_l1_graph};
use crate::{Error, Image, Result};

/// A light field with its dense-field focal stack.
#[derive(Clone, Debug)]
pub struct Scene {
    pub name: String,
    pub field: LightField,
    pub ground_truth: FocalStack,
}

/// Fixed state shared by training and evaluation of one configuration:
/// optics, sampled views, the rect-cell PSFs of those views and the scenes
/// with their precomputed ground truth.
#[derive(Clone, Debug)]
pub struct Trainer {
    pub config: TrainConfig,
    pub plan: OpticsPlan,
    pub selection: ViewSelection,
    cells: CellPsfBank,
    scenes: Vec<Scene>,
}

impl Trainer {
    /// Validates `config` against the scenes and renders their ground truth.
    pub fn new(config: &TrainConfig, fields: Vec<(String, LightField)>, exec: Exec) -> Result<Self> {
        config.validate()?;
        let plan = config.plan()?;
        let selection = config.selection()?;
        let cells = CellPsfBank::new(&plan, config.grid, Some(selection.indices()), exec)?;
        let mut scenes = Vec::with_capacity(fields.len());
        for (name, field) in fields {
            scenes.push(Self::scene(config, &plan, name, field, exec)?);
        }
        Ok(Trainer { config: config.clone(), plan, selection, cells, scenes })
    }

    fn scene(config: &TrainConfig, plan: &OpticsPlan, name: String, field: LightField, exec: Exec) -> Result<Scene> {
        if field.angular_resolution() != config.grid {
            return Err(Error::ConfigMismatch(format!(
                "scene {name} has {} views per axis, config grid = {}",
                field.angular_resolution(),
                config.grid
            )));
        }
        let ground_truth = CellPsfBank::new(plan, config.grid, None, exec)?.ground_truth(&field, &plan.spec, exec)?;
        Ok(Scene { name, field, ground_truth })
    }

    pub fn scenes(&self) -> &[Scene] {
        &self.scenes
    }

    /// Replaces the scene list, rendering ground truth for the new scenes.
    pub fn with_scenes(&self, fields: Vec<(String, LightField)>, exec: Exec) -> Result<Self> {
        let mut scenes = Vec::with_capacity(fields.len());
        for (name, field) in fields {
            scenes.push(Self::scene(&self.config, &self.plan, name, field, exec)?);
        }
        Ok(Trainer { scenes, ..self.clone() })
    }

    /// Gain of frames shown through fixed rect cells.
    fn rect_gain(&self) -> f64 {
        self.config.exposure.gain(self.config.grid, self.selection.len())
    }

    fn selected_views(&self, field: &LightField) -> Vec<Image> {
        self.selection.indices().iter().map(|&(s, t)| field.view(s, t).clone()).collect()
    }

    /// Differentiable rendering of `views` under `ckpt`. Returns the slice
    /// nodes and the learned-parameter leaves in [`Checkpoint::learned_parameters`] order.
    pub fn build_graph(&self, g: &mut Graph, ckpt: &Checkpoint, views: &[Image]) -> Result<(Vec<Var>, Vec<Var>)> {
        let mut params = Vec::new();
        let frames = match &ckpt.encoder {
            Some(w) => {
                let input = g.constant(stack_views(views)?);
                let leaves: Vec<Var> = w.to_arrays().into_iter().map(|a| g.param(a)).collect();
                params.extend(&leaves);
                encode_graph(g, input, &leaves, &w.config)?
            }
            None => views.iter().map(|v| g.constant(v.clone().into_dyn())).collect(),
        };
        if self.config.learn_apertures {
            let logits: Vec<Var> = ckpt.apertures.logits.iter().map(|l| g.param(l.clone().into_dyn())).collect();
            params.extend(&logits);
            let apertures = aperture_graph(g, &logits, &ckpt.apertures)?;
            return Ok((ctdm_graph(g, &frames, &apertures, &self.plan)?, params));
        }
        let mut slices = Vec::with_capacity(self.plan.slices());
        for j in 0..self.plan.slices() {
            let mut acc: Option<Var> = None;
            for (&frame, &(s, t)) in frames.iter().zip(self.selection.indices()) {
                let kernel = g.constant(self.cells.get(s, t)?[j].kernel.clone().into_dyn());
                let out = g.conv2d(frame, kernel)?;
                acc = Some(match acc {
                    Some(a) => g.add(a, out)?,
                    None => out,
                });
            }
            let sum = acc.ok_or(Error::LengthMismatch { left: 0, right: self.selection.len() })?;
            slices.push(g.scale(sum, self.rect_gain())?);
        }
        Ok((slices, params))
    }

    /// Loss and learned-parameter gradients on a `crop x crop` window of a scene.
    pub fn loss_and_gradients(
        &self,
        ckpt: &Checkpoint,
        scene: &Scene,
        top: usize,
        left: usize,
    ) -> Result<(f64, Vec<ArrayD<f64>>)> {
        let c = self.config.crop;
        let field = scene.field.crop(top, left, c, c)?;
        let gt = scene.ground_truth.crop(top, left, c, c)?;
        let weights = weight_maps(&gt, self.config.beta)?;
        let mut g = Graph::new();
        let (slices, params) = self.build_graph(&mut g, ckpt, &self.selected_views(&field))?;
        let loss = weighted_l1_graph(&mut g, &slices, &gt, &weights, self.plan.border())?;
        let value = g.scalar(loss)?;
        if params.is_empty() {
            return Ok((value, Vec::new()));
        }
        g.backward(loss)?;
        let grads = params.iter().map(|&p| g.grad_real(p)).collect::<Result<Vec<_>>>()?;
        Ok((value, grads))
    }

    /// Crop origins for every training scene in epoch `epoch`, in visiting order.
    pub fn epoch_schedule(&self, epoch: usize) -> Result<Vec<(usize, usize, usize)>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(epoch as u64);
        let mut order: Vec<usize> = (0..self.scenes.len()).collect();
        order.shuffle(&mut rng);
        let c = self.config.crop;
        order
            .into_iter()
            .map(|i| {
                let (h, w) = self.scenes[i].field.spatial_resolution();
                if h < c || w < c {
                    return Err(Error::ImageTooSmall { height: h, width: w, window: c });
                }
                Ok((i, rng.random_range(0..=h - c), rng.random_range(0..=w - c)))
            })
            .collect()
    }

    /// Trains until `ckpt.epoch == epochs`, calling `on_epoch` after each
    /// completed epoch.
    pub fn run(
        &self,
        ckpt: &mut Checkpoint,
        epochs: usize,
        mut on_epoch: impl FnMut(&Checkpoint) -> Result<()>,
    ) -> Result<()> {
        if ckpt.config != self.config {
            return Err(Error::ConfigMismatch("checkpoint was written for another configuration".into()));
        }
        if self.scenes.is_empty() {
            return Err(Error::BadCount { train: 0, total: 0 });
        }
        while ckpt.epoch < epochs {
            let mut total = 0.0;
            let schedule = self.epoch_schedule(ckpt.epoch)?;
            for &(i, top, left) in &schedule {
                let (loss, grads) = self.loss_and_gradients(ckpt, &self.scenes[i], top, left)?;
                if !loss.is_finite() || grads.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
                    return Err(Error::NonFiniteLoss { epoch: ckpt.epoch, diagnostic: diagnostic(ckpt, loss) });
                }
                total += loss;
                if !grads.is_empty() {
                    let mut params = ckpt.learned_parameters();
                    ckpt.adam.step(&mut params, &grads)?;
                    ckpt.set_learned_parameters(params)?;
                }
            }
            ckpt.loss_history.push(total / schedule.len() as f64);
            ckpt.epoch += 1;
            on_epoch(ckpt)?;
        }
        Ok(())
    }

    /// Perceived focal stack of `field` under `ckpt`, as shown at evaluation
    /// time: binary-relaxed apertures are frozen to `{0, 1}`.
    pub fn render(&self, ckpt: &Checkpoint, field: &LightField, exec: Exec) -> Result<FocalStack> {
        let views = self.selected_views(field);
        if self.config.learn_apertures {
            let bank = match ckpt.apertures.mode {
                ApertureMode::BinaryRelaxed => ckpt.apertures.with_mode(ApertureMode::BinaryFrozen),
                _ => ckpt.apertures.clone(),
            };
            return ctdm_forward(&views, ckpt.encoder.as_ref(), &bank, &self.plan);
        }
        let frames = match &ckpt.encoder {
            Some(w) => encode(&views, w)?,
            None => views,
        };
        let refs: Vec<&Image> = frames.iter().collect();
        let psfs = self.selection.indices().iter().map(|&(s, t)| self.cells.get(s, t)).collect::<Result<Vec<_>>>()?;
        FocalStack::new(render_frames(&refs, &psfs, self.rect_gain(), exec)?, self.plan.spec.clone())
    }
}

fn diagnostic(ckpt: &Checkpoint, loss: f64) -> String {
    let range = |a: &Array2<f64>| {
        a.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    };
    let logits: Vec<String> = ckpt
        .apertures
        .logits
        .iter()
        .map(|l| {
            let (lo, hi) = range(l);
            format!("[{lo:.4e}, {hi:.4e}]")
        })
        .collect();
    let encoder = ckpt.encoder.as_ref().map_or("none".to_string(), |w| {
        let max = w
            .layers
            .iter()
            .flat_map(|l| l.weight.iter().chain(l.bias.iter()))
            .fold(0.0f64, |m, v| m.max(v.abs()));
        format!("finite = {}, max |w| = {max:.4e}", w.is_finite())
    });
    format!(
        "loss = {loss}; adam step {}; aperture logit ranges {}; encoder {encoder}",
        ckpt.adam.step_count,
        logits.join(" ")
    )
}

/// Trains a fresh checkpoint on `fields` for `config.epochs` epochs.
pub fn train(config: &TrainConfig, fields: Vec<(String, LightField)>, exec: Exec) -> Result<Checkpoint> {
    let trainer = Trainer::new(config, fields, exec)?;
    let mut ckpt = Checkpoint::initial(config)?;
    trainer.run(&mut ckpt, config.epochs, |_| Ok(()))?;
    Ok(ckpt)
}

impl Trainer {
    /// Plain TDM of the sampled views of `field`.
    pub fn baseline(&self, field: &LightField, exposure: Exposure, exec: Exec) -> Result<FocalStack> {
        self.cells.tdm(field, &self.selection, exposure, &self.plan.spec, exec)
    }
}
