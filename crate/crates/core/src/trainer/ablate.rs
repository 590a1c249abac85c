use std::fmt::Write as _;

use super::{evaluate, Checkpoint, Method, TrainConfig, Trainer};
use crate::data::LightField;
use crate::exec::Exec;
use crate::{Error, Result};

/// A named set of config overrides.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Variant {
    pub name: String,
    pub overrides: Vec<(String, String)>,
}

/// Parses `name key=value key=value ...` lines; blank lines and `#`
/// comments are skipped.
pub fn parse_grid(text: &str) -> Result<Vec<Variant>> {
    let mut out = Vec::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("").trim();
        let mut words = line.split_whitespace();
        let Some(name) = words.next() else { continue };
        let overrides = words
            .map(|w| {
                w.split_once('=')
                    .map(|(k, v)| (k.to_string(), v.to_string()))
                    .ok_or_else(|| Error::InvalidConfig(format!("expected key=value in variant {name}, got {w:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(Variant { name: name.to_string(), overrides });
    }
    Ok(out)
}

/// One trained and evaluated variant.
#[derive(Clone, Debug, PartialEq)]
pub struct AblationRow {
    pub name: String,
    pub config: TrainConfig,
    pub final_loss: f64,
    pub psnr: f64,
    pub ssim: f64,
    pub baseline_psnr: f64,
    pub baseline_ssim: f64,
    pub matched_psnr: f64,
    pub matched_ssim: f64,
}

/// Trains and evaluates the base configuration followed by every variant of
/// `grid`, all on the same scenes and seed unless a variant overrides it.
pub fn ablate(
    base: &TrainConfig,
    grid: &[Variant],
    train: &[(String, LightField)],
    test: &[(String, LightField)],
    exec: Exec,
) -> Result<Vec<AblationRow>> {
    let mut configs = vec![("base".to_string(), base.clone())];
    for v in grid {
        let mut cfg = base.clone();
        for (k, val) in &v.overrides {
            cfg.set(k, val)?;
        }
        cfg.validate()?;
        configs.push((v.name.clone(), cfg));
    }
    configs
        .into_iter()
        .map(|(name, config)| {
            let trainer = Trainer::new(&config, train.to_vec(), exec)?;
            let mut ckpt = Checkpoint::initial(&config)?;
            trainer.run(&mut ckpt, config.epochs, |_| Ok(()))?;
            let report = evaluate(&trainer.with_scenes(test.to_vec(), exec)?, &ckpt, exec)?;
            let (psnr, ssim) = report.mean(Method::Trained);
            let (baseline_psnr, baseline_ssim) = report.mean(Method::Baseline);
            let (matched_psnr, matched_ssim) = report.mean(Method::MatchedBaseline);
            Ok(AblationRow {
                name,
                final_loss: ckpt.loss_history.last().copied().unwrap_or(f64::NAN),
                config,
                psnr,
                ssim,
                baseline_psnr,
                baseline_ssim,
                matched_psnr,
                matched_ssim,
            })
        })
        .collect()
}

/// `variant,final_loss,psnr,ssim,tdm_psnr,tdm_ssim,tdm_matched_psnr,tdm_matched_ssim` rows.
pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut out = String::from("variant,final_loss,psnr,ssim,tdm_psnr,tdm_ssim,tdm_matched_psnr,tdm_matched_ssim\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.name, r.final_loss, r.psnr, r.ssim, r.baseline_psnr, r.baseline_ssim, r.matched_psnr, r.matched_ssim
        );
    }
    out
}
