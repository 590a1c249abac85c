use ndarray::{ArrayD, Ix3};

use super::aperture::{ApertureBank, ApertureMode, Symmetry};
use super::render::OpticsPlan;
use super::stack::FocalStack;
use crate::autodiff::{Graph, Var};
use crate::encoder::{encode_graph, stack_views, EncoderWeights};
use crate::optics::psf::region_sample_count;
use crate::{Error, Image, Result};

/// Transmittance nodes (`l x l`) for the logit leaves of `bank`.
///
/// `logits` holds one node per stored logit map. The frozen binary mode
/// thresholds the current logit values into constants, so no gradient flows.
pub fn aperture_graph(g: &mut Graph, logits: &[Var], bank: &ApertureBank) -> Result<Vec<Var>> {
    if logits.len() != bank.logits.len() {
        return Err(Error::LengthMismatch { left: logits.len(), right: bank.logits.len() });
    }
    let mut base = Vec::with_capacity(logits.len());
    for &l in logits {
        let a = match bank.mode {
            ApertureMode::Continuous => g.sigmoid(l)?,
            ApertureMode::BinaryRelaxed => {
                let s = g.scale(l, bank.temperature)?;
                g.sigmoid(s)?
            }
            ApertureMode::BinaryFrozen => {
                let v = g.real(l)?.mapv(|x| if crate::autodiff::sigmoid(x) > 0.5 { 1.0 } else { 0.0 });
                g.constant(v)
            }
        };
        base.push(a);
    }
    match bank.symmetry {
        Symmetry::Free => Ok(base),
        Symmetry::Mirrored4 => {
            let a = base[0];
            let h = g.flip(a, 1)?;
            let v = g.flip(a, 0)?;
            let both = g.flip(v, 1)?;
            Ok(vec![a, h, v, both])
        }
    }
}

/// Perceived focal stack of `k` frames (`3 x H x W` nodes) shown through `k`
/// apertures (`l x l` transmittance nodes). Returns one node per slice.
pub fn ctdm_graph(g: &mut Graph, images: &[Var], apertures: &[Var], plan: &OpticsPlan) -> Result<Vec<Var>> {
    if images.len() != apertures.len() || images.is_empty() {
        return Err(Error::LengthMismatch { left: images.len(), right: apertures.len() });
    }
    let cfg = &plan.cfg;
    let norm = 1.0 / region_sample_count(cfg);
    let s = cfg.oversample();
    let mut slices: Vec<Option<Var>> = vec![None; plan.slices()];
    for (&img, &ap) in images.iter().zip(apertures) {
        let pupil = g.embed(ap, cfg)?;
        for (j, slot) in slices.iter_mut().enumerate() {
            let field = g.mul_const(pupil, plan.phase(j).clone().into_dyn())?;
            let spectrum = g.fft2(field)?;
            let fine = g.abs2(spectrum)?;
            let binned = g.bin(fine, s)?;
            let kernel = g.scale(binned, norm)?;
            let frame = g.conv2d(img, kernel)?;
            *slot = Some(match *slot {
                Some(acc) => g.add(acc, frame)?,
                None => frame,
            });
        }
    }
    Ok(slices.into_iter().map(|s| s.expect("at least one frame")).collect())
}

/// Coded TDM rendering outside of training. With `weights = None` the views
/// themselves are the frames (the identity encoding, `k = n`).
pub fn ctdm_forward(
    views: &[Image],
    weights: Option<&EncoderWeights>,
    bank: &ApertureBank,
    plan: &OpticsPlan,
) -> Result<FocalStack> {
    bank.validate()?;
    if bank.resolution() != plan.cfg.aperture_resolution {
        return Err(Error::ConfigMismatch(format!(
            "apertures have {} cells per axis, optics {}",
            bank.resolution(),
            plan.cfg.aperture_resolution
        )));
    }
    let mut g = Graph::new();
    let images = match weights {
        Some(w) => {
            if w.config.k != bank.count() {
                return Err(Error::ConfigMismatch(format!(
                    "encoder emits {} images for {} apertures",
                    w.config.k,
                    bank.count()
                )));
            }
            let input = g.constant(stack_views(views)?);
            let params: Vec<Var> = w.to_arrays().into_iter().map(|a| g.constant(a)).collect();
            encode_graph(&mut g, input, &params, &w.config)?
        }
        None => {
            if views.len() != bank.count() {
                return Err(Error::ConfigMismatch(format!(
                    "{} views for {} apertures without an encoder",
                    views.len(),
                    bank.count()
                )));
            }
            views.iter().map(|v| g.constant(v.clone().into_dyn())).collect()
        }
    };
    let logits: Vec<Var> = bank.logits.iter().map(|l| g.constant(l.clone().into_dyn())).collect();
    let apertures = aperture_graph(&mut g, &logits, bank)?;
    let slices = ctdm_graph(&mut g, &images, &apertures, plan)?;
    let images = slices
        .into_iter()
        .map(|s| to_image(g.real(s)?))
        .collect::<Result<Vec<_>>>()?;
    FocalStack::new(images, plan.spec.clone())
}

pub(crate) fn to_image(a: &ArrayD<f64>) -> Result<Image> {
    a.clone().into_dimensionality::<Ix3>().map_err(|e| Error::ShapeMismatch(e.to_string()))
}
