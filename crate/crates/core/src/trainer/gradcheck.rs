use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{grad_check, GradCheck, GradCheckOptions, Var};
use crate::display::{aperture_graph, ctdm_graph, ApertureBank, ApertureMode, FocalStack, FocalStackSpec, OpticsPlan, Symmetry};
use crate::encoder::{encode_graph, init_weights, stack_views, EncoderConfig};
use crate::metrics::{weight_maps, weighted_l1_graph};
use crate::optics::OpticalConfig;
use crate::{Error, Result};

/// Finite-difference check of the full training objective (encoder,
/// continuous apertures, optics, focus-weighted loss) on a random `size x
/// size` instance with `n = k = 2`, `l = 3` and two focal slices. Every
/// encoder weight and aperture logit is checked.
pub fn pipeline_grad_check(size: usize, seed: u64) -> Result<GradCheck> {
    let cfg = OpticalConfig::with_grid(3, 15, 5);
    let plan = OpticsPlan::new(cfg, FocalStackSpec::linear(2, cfg.calibrated_psi_max())?)?;
    if size <= 2 * plan.border() {
        return Err(Error::ImageTooSmall { height: size, width: size, window: 2 * plan.border() + 1 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut image = || Array3::from_shape_simple_fn((3, size, size), || rng.random::<f64>());
    let views = vec![image(), image()];
    let gt = FocalStack::new(vec![image(), image()], plan.spec.clone())?;
    let weights = weight_maps(&gt, 2.0)?;
    let enc = EncoderConfig { channels: 2, blocks: 1, ..EncoderConfig::new(2, 2) };
    let mut point = init_weights(&enc, seed)?.to_arrays();
    let bank = ApertureBank::new(2, 3, ApertureMode::Continuous, 10.0, Symmetry::Free)?;
    let n_encoder = point.len();
    for _ in 0..2 {
        point.push(Array2::from_shape_simple_fn((3, 3), || rng.random_range(-1.0..1.0)).into_dyn());
    }
    let input = stack_views(&views)?;
    let objective = |g: &mut crate::autodiff::Graph, vars: &[Var]| -> Result<Var> {
        let x = g.constant(input.clone());
        let frames = encode_graph(g, x, &vars[..n_encoder], &enc)?;
        let apertures = aperture_graph(g, &vars[n_encoder..], &bank)?;
        let slices = ctdm_graph(g, &frames, &apertures, &plan)?;
        weighted_l1_graph(g, &slices, &gt, &weights, plan.border())
    };
    grad_check(objective, &point, &GradCheckOptions { seed, ..GradCheckOptions::default() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_pipeline_gradients_agree() {
        let r = pipeline_grad_check(6, 3).unwrap();
        assert_eq!(r.checked, 300 + 18);
        assert!(r.max_rel_error < 1e-4, "{r:?}");
        assert!(matches!(pipeline_grad_check(4, 0), Err(Error::ImageTooSmall { .. })));
    }
}
