use std::fmt::Write as _;

use super::{Checkpoint, Trainer};
use crate::display::Exposure;
use crate::exec::Exec;
use crate::metrics::{score_stack, StackScores};
use crate::Result;

/// Which renderer produced a row.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    /// The trained configuration.
    Trained,
    /// Rect-cell TDM over the sampled views.
    Baseline,
    /// Rect-cell TDM with frames brightened to the light of the dense field.
    MatchedBaseline,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Trained => "ctdm",
            Method::Baseline => "tdm",
            Method::MatchedBaseline => "tdm-matched",
        }
    }
}

/// Per-slice scores of one scene under one method.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneScores {
    pub scene: String,
    pub method: Method,
    pub scores: StackScores,
}

/// Evaluation of a checkpoint over a scene set, with the TDM baselines on
/// the same scenes.
#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub psi: Vec<f64>,
    pub rows: Vec<SceneScores>,
}

impl Report {
    /// Slice-averaged PSNR and SSIM per scene, averaged over scenes.
    pub fn mean(&self, method: Method) -> (f64, f64) {
        let rows: Vec<&SceneScores> = self.rows.iter().filter(|r| r.method == method).collect();
        let n = rows.len().max(1) as f64;
        let psnr = rows.iter().map(|r| r.scores.mean_psnr()).sum::<f64>() / n;
        let ssim = rows.iter().map(|r| r.scores.mean_ssim()).sum::<f64>() / n;
        (psnr, ssim)
    }

    /// One `key=value` record per scene, method and slice, then per-scene and
    /// overall means.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for r in &self.rows {
            for (j, psi) in self.psi.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "scene={} method={} slice={j} psi={psi} psnr={} ssim={}",
                    r.scene,
                    r.method.label(),
                    r.scores.psnr[j],
                    r.scores.ssim[j]
                );
            }
            let _ = writeln!(
                out,
                "scene={} method={} mean_psnr={} mean_ssim={}",
                r.scene,
                r.method.label(),
                r.scores.mean_psnr(),
                r.scores.mean_ssim()
            );
        }
        for m in [Method::Trained, Method::Baseline, Method::MatchedBaseline] {
            let (p, s) = self.mean(m);
            let _ = writeln!(out, "overall method={} psnr={p} ssim={s}", m.label());
        }
        out
    }

    /// `scene,method,slice,psi,psnr,ssim` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("scene,method,slice,psi,psnr,ssim\n");
        for r in &self.rows {
            for (j, psi) in self.psi.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{},{j},{psi},{},{}",
                    r.scene,
                    r.method.label(),
                    r.scores.psnr[j],
                    r.scores.ssim[j]
                );
            }
        }
        out
    }
}

/// Scores `ckpt` and both TDM baselines on every scene of `trainer`, over the
/// centered `eval_crop` window (whole scenes when 0) minus the PSF border.
pub fn evaluate(trainer: &Trainer, ckpt: &Checkpoint, exec: Exec) -> Result<Report> {
    let border = trainer.plan.border();
    let mut rows = Vec::new();
    for scene in trainer.scenes() {
        let (h, w) = scene.field.spatial_resolution();
        let side = trainer.config.eval_crop;
        let (ch, cw) = if side == 0 { (h, w) } else { (side, side) };
        let (top, left) = ((h.saturating_sub(ch)) / 2, (w.saturating_sub(cw)) / 2);
        let field = scene.field.crop(top, left, ch, cw)?;
        let gt = scene.ground_truth.crop(top, left, ch, cw)?;
        let trained = trainer.render(ckpt, &field, exec)?;
        let raw = trainer.baseline(&field, Exposure::Raw, exec)?;
        let matched = trainer.baseline(&field, Exposure::Matched, exec)?;
        for (method, stack) in [(Method::Trained, trained), (Method::Baseline, raw), (Method::MatchedBaseline, matched)] {
            rows.push(SceneScores { scene: scene.name.clone(), method, scores: score_stack(&stack, &gt, border)? });
        }
    }
    Ok(Report { psi: trainer.plan.spec.psi.clone(), rows })
}
