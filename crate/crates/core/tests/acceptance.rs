//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use lumos_core::data::synth::SyntheticScene;
use lumos_core::data::{LightField, ViewPattern, ViewSelection};
use lumos_core::display::{ground_truth_stack, tdm_forward, Exposure, FocalStack, FocalStackSpec, OpticsPlan};
use lumos_core::exec::Exec;
use lumos_core::metrics::{l1, psnr, ssim, weight_maps, weighted_l1};
use lumos_core::optics::{convolve, embed_coded_aperture, psf, rect_pupil, DefocusSpec, OpticalConfig, PointSpreadFunction};
use lumos_core::trainer::{evaluate, pipeline_grad_check, Checkpoint, Method, TrainConfig, Trainer};
use lumos_core::Image;
use ndarray::{Array2, Array3, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn energy_conservation() -> Outcome {
    let cfg = OpticalConfig::default();
    let l = cfg.aperture_resolution;
    let a = cfg.aperture_samples() as f64;
    let mut r = rng(1);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let code = Array2::from_shape_simple_fn((l, l), || r.random::<f64>());
        let pupil = embed_coded_aperture(code.view(), &cfg).unwrap();
        let expect = pupil.power() / (a * a);
        for t in [-1.0, -0.5, 0.0, 0.5, 1.0] {
            let h = psf(&pupil, &DefocusSpec::from_psi(&cfg, t * cfg.calibrated_psi_max())).unwrap();
            let total: f64 = h.kernel.sum();
            worst = worst.max((total - expect).abs() / expect);
        }
    }
    outcome(worst <= 1e-9, format!("max relative error {worst:.3e} (<= 1e-9)"))
}

fn in_focus_delta() -> Outcome {
    let cfg = OpticalConfig::default();
    let l = cfg.aperture_resolution;
    let h = psf(&rect_pupil((l / 2, l / 2), l, &cfg, l).unwrap(), &DefocusSpec::from_psi(&cfg, 0.0)).unwrap();
    let c = cfg.kernel_size / 2;
    let share = h.kernel[(c, c)] / h.kernel.sum();
    outcome(share >= 1.0 - 1e-9, format!("central share {share:.12} (>= 1 - 1e-9)"))
}

fn geometric_shift_law() -> Outcome {
    let cfg = OpticalConfig::default();
    let l = cfg.aperture_resolution;
    let mid = l / 2;
    let mut worst = 0.0f64;
    for psi in [-cfg.calibrated_psi_max(), cfg.calibrated_psi_max()] {
        let z_l = cfg.image_distance(psi);
        for s in 0..l {
            let offset = s as f64 - mid as f64;
            let c = offset * cfg.pupil_extent / l as f64;
            let expect = c * z_l * (1.0 / cfg.object_distance + 1.0 / z_l - 1.0 / cfg.focal_length) / cfg.pixel_pitch(z_l);
            let spec = DefocusSpec::from_psi(&cfg, psi);
            let (r, _) = psf(&rect_pupil((s, mid), l, &cfg, 1).unwrap(), &spec).unwrap().centroid();
            let (_, q) = psf(&rect_pupil((mid, s), l, &cfg, 1).unwrap(), &spec).unwrap().centroid();
            worst = worst.max((r - expect).abs()).max((q - expect).abs());
        }
    }
    outcome(worst <= 0.1, format!("max centroid error {worst:.4} px (<= 0.1)"))
}

fn direct_convolution(x: &Image, k: &Array2<f64>) -> Image {
    let (ch, h, w) = x.dim();
    let (kh, kw) = k.dim();
    let (cy, cx) = ((kh / 2) as isize, (kw / 2) as isize);
    let mut out = Array3::zeros((ch, h, w));
    for c in 0..ch {
        for y in 0..h as isize {
            for xx in 0..w as isize {
                let mut acc = 0.0;
                for a in 0..kh as isize {
                    for b in 0..kw as isize {
                        let (sy, sx) = (y + cy - a, xx + cx - b);
                        if sy >= 0 && sx >= 0 && sy < h as isize && sx < w as isize {
                            acc += k[(a as usize, b as usize)] * x[(c, sy as usize, sx as usize)];
                        }
                    }
                }
                out[(c, y as usize, xx as usize)] = acc;
            }
        }
    }
    out
}

fn convolution_oracle() -> Outcome {
    let mut r = rng(4);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let x = Array3::from_shape_simple_fn((3, 32, 32), || r.random::<f64>());
        let k = Array2::from_shape_simple_fn((9, 9), || r.random::<f64>());
        let fast = convolve(&x, &PointSpreadFunction::from_kernel(k.clone(), 0.0)).unwrap();
        let slow = direct_convolution(&x, &k);
        worst = fast.iter().zip(slow.iter()).fold(worst, |m, (p, q)| m.max((p - q).abs()));
    }
    outcome(worst <= 1e-8, format!("max abs diff {worst:.3e} (<= 1e-8)"))
}

fn gradient_fidelity() -> Outcome {
    let check = pipeline_grad_check(8, 5).unwrap();
    outcome(
        check.max_rel_error <= 1e-4,
        format!("max relative error {:.3e} over {} coordinates (<= 1e-4)", check.max_rel_error, check.checked),
    )
}

fn loss_degeneracy() -> Outcome {
    let mut r = rng(6);
    let spec = FocalStackSpec::linear(3, 1.0).unwrap();
    let mut stack = || {
        let slices = (0..3).map(|_| Array3::from_shape_simple_fn((3, 20, 20), || r.random::<f64>())).collect();
        FocalStack::new(slices, spec.clone()).unwrap()
    };
    let (generated, gt) = (stack(), stack());
    let weights = weight_maps(&gt, 0.0).unwrap();
    let ones = weights.maps.iter().all(|m| m.iter().all(|v| *v == 1.0));
    let a = weighted_l1(&generated, &gt, &weights, 2).unwrap();
    let b = l1(&generated, &gt, 2).unwrap();
    let same = a.to_bits() == b.to_bits();
    outcome(ones && same, format!("weights all ones {ones}, weighted {a:e} vs plain {b:e} bit-equal {same}"))
}

fn renderer_consistency() -> Outcome {
    let cfg = OpticalConfig::with_grid(5, 33, 11);
    let plan = OpticsPlan::new(cfg, FocalStackSpec::linear(3, cfg.calibrated_psi_max()).unwrap()).unwrap();
    let lf = SyntheticScene::layered(-0.6, 0.7, 32, 32, 7).render(5, 32, 32).unwrap();
    let all = ViewSelection::from_pattern(5, &ViewPattern::Full).unwrap();
    let tdm = tdm_forward(&lf, &all, &plan, Exposure::Raw, Exec::Sequential).unwrap();
    let gt = ground_truth_stack(&lf, &plan, Exec::Sequential).unwrap();
    let same = tdm.slices == gt.slices;
    outcome(same, format!("{} slices bit-equal {same}", gt.slices.len()))
}

/// Tolerance of the shift-and-add cross-check. The oracle run measures 50.3 dB.
const SHIFT_ADD_MIN_PSNR: f64 = 30.0;

fn shift_and_add_agreement() -> Outcome {
    let cfg = OpticalConfig::default();
    let d = 0.6;
    let n = cfg.aperture_resolution;
    let plan = OpticsPlan::new(cfg, FocalStackSpec::new(vec![-d * cfg.calibrated_psi_max()]).unwrap()).unwrap();
    let lf = SyntheticScene::plane(d, 8).render(n, 96, 96).unwrap();
    let gt = ground_truth_stack(&lf, &plan, Exec::Sequential).unwrap();
    let all = ViewSelection::from_pattern(n, &ViewPattern::Full).unwrap();
    let oracle = lumos_core::optics::shift_and_add_oracle(&lf, &all, d).unwrap();
    let reach = (d * (n as f64 - 1.0) / 2.0).ceil() as usize;
    let border = plan.border() + reach + 1;
    let value = psnr(&gt.slices[0], &oracle, border).unwrap();
    outcome(
        value >= SHIFT_ADD_MIN_PSNR,
        format!("PSNR {value:.2} dB at disparity {d}, border {border} (>= {SHIFT_ADD_MIN_PSNR})"),
    )
}

const TOY: &str = "cells = 9\ncell_samples = 11\nkernel_size = 11\ngrid = 9\nviews = corners4\nk = 4\n\
slices = 5\nbeta = 2\ncrop = 64\nencoder_channels = 8\nencoder_blocks = 1\nlr = 0.003\nepochs = 1000\n";

const SEEDS: [u64; 3] = [1, 2, 3];

struct ToyRun {
    psnr: f64,
    baseline: f64,
    matched: f64,
}

fn toy_scene() -> Vec<(String, LightField)> {
    vec![("layered".into(), SyntheticScene::layered(-0.8, 0.9, 80, 80, 1).render(9, 80, 80).unwrap())]
}

fn toy_run(extra: &str, seed: u64, scene: &[(String, LightField)]) -> ToyRun {
    let cfg = TrainConfig::parse_text(&format!("{TOY}{extra}seed = {seed}\n")).unwrap();
    let trainer = Trainer::new(&cfg, scene.to_vec(), Exec::default()).unwrap();
    let mut ckpt = Checkpoint::initial(&cfg).unwrap();
    trainer.run(&mut ckpt, cfg.epochs, |_| Ok(())).unwrap();
    let report = evaluate(&trainer, &ckpt, Exec::default()).unwrap();
    ToyRun {
        psnr: report.mean(Method::Trained).0,
        baseline: report.mean(Method::Baseline).0,
        matched: report.mean(Method::MatchedBaseline).0,
    }
}

fn toy_runs(extra: &str, scene: &[(String, LightField)]) -> Vec<ToyRun> {
    SEEDS.iter().map(|&s| toy_run(extra, s, scene)).collect()
}

fn fmt_runs(runs: &[ToyRun]) -> String {
    runs.iter().map(|r| format!("{:.2}", r.psnr)).collect::<Vec<_>>().join("/")
}

fn ordering(full: &[ToyRun], apertures: &[ToyRun]) -> Outcome {
    let wins = full
        .iter()
        .zip(apertures)
        .filter(|(f, p)| f.psnr > p.psnr && p.psnr > p.baseline && f.psnr - f.baseline >= 1.0)
        .count();
    let baseline = full[0].baseline;
    outcome(
        wins >= 2,
        format!(
            "f+P {} > P {} > TDM {baseline:.2} dB in {wins}/3 seeds (>= 2, margin >= 1 dB)",
            fmt_runs(full),
            fmt_runs(apertures)
        ),
    )
}

fn binary_vs_continuous(continuous: &[ToyRun], binary: &[ToyRun]) -> Outcome {
    let wins = continuous.iter().zip(binary).filter(|(c, b)| c.psnr >= b.psnr).count();
    outcome(
        wins >= 2,
        format!("continuous {} >= binary-frozen {} dB in {wins}/3 seeds (>= 2)", fmt_runs(continuous), fmt_runs(binary)),
    )
}

/// Direct per-window SSIM: 2-D Gaussian weights, no separable filtering.
fn ssim_reference(a: &Image, b: &Image) -> f64 {
    let gray = |x: &Image| x.mapv(|v| v.clamp(0.0, 1.0)).mean_axis(Axis(0)).unwrap();
    let (x, y) = (gray(a), gray(b));
    let g: Vec<f64> = (0..11).map(|i| (-((i as f64 - 5.0).powi(2)) / 4.5).exp()).collect();
    let total: f64 = g.iter().map(|p| g.iter().map(|q| p * q).sum::<f64>()).sum();
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    let (h, w) = x.dim();
    let mut sum = 0.0;
    for r in 0..h - 10 {
        for c in 0..w - 10 {
            let (mut mx, mut my, mut xx, mut yy, mut xy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in 0..11 {
                for j in 0..11 {
                    let wt = g[i] * g[j] / total;
                    let (p, q) = (x[(r + i, c + j)], y[(r + i, c + j)]);
                    mx += wt * p;
                    my += wt * q;
                    xx += wt * p * p;
                    yy += wt * q * q;
                    xy += wt * p * q;
                }
            }
            let (vx, vy, cov) = (xx - mx * mx, yy - my * my, xy - mx * my);
            sum += (2.0 * mx * my + c1) * (2.0 * cov + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
        }
    }
    sum / ((h - 10) * (w - 10)) as f64
}

fn metric_oracles() -> Outcome {
    let mut r = rng(11);
    let (mut psnr_err, mut ssim_err, mut self_err) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..10 {
        let (h, w) = (16 + i, 24 - i);
        let a = Array3::from_shape_simple_fn((3, h, w), || r.random::<f64>());
        let b = a.mapv(|v| (v + 0.2 * (r.random::<f64>() - 0.5)).clamp(0.0, 1.0));
        let mse = a.iter().zip(b.iter()).map(|(p, q)| (p - q) * (p - q)).sum::<f64>() / a.len() as f64;
        let closed = -10.0 * mse.log10();
        psnr_err = psnr_err.max((psnr(&a, &b, 0).unwrap() - closed).abs());
        ssim_err = ssim_err.max((ssim(&a, &b).unwrap() - ssim_reference(&a, &b)).abs());
        self_err = self_err.max((ssim(&a, &a).unwrap() - 1.0).abs());
    }
    outcome(
        psnr_err <= 1e-9 && ssim_err <= 1e-4 && self_err == 0.0,
        format!("PSNR error {psnr_err:.2e} (<= 1e-9), SSIM error {ssim_err:.2e} (<= 1e-4), |ssim(a,a) - 1| {self_err:e}"),
    )
}

const SMALL: &str = "cells = 3\ncell_samples = 3\nkernel_size = 5\ngrid = 3\nslices = 2\ncrop = 12\n\
encoder_channels = 2\nencoder_blocks = 1\nlr = 0.01\nepochs = 5\nseed = 9\n";

fn deterministic_run() -> (Vec<u8>, String) {
    let cfg = TrainConfig::parse_text(SMALL).unwrap();
    let scenes = (0..2)
        .map(|i| (format!("s{i}"), SyntheticScene::layered(-0.5, 0.6, 16, 16, 20 + i).render(3, 16, 16).unwrap()))
        .collect();
    let trainer = Trainer::new(&cfg, scenes, Exec::Sequential).unwrap();
    let mut ckpt = Checkpoint::initial(&cfg).unwrap();
    trainer.run(&mut ckpt, cfg.epochs, |_| Ok(())).unwrap();
    let report = evaluate(&trainer, &ckpt, Exec::Sequential).unwrap();
    (ckpt.to_bytes(), report.to_text())
}

fn determinism() -> Outcome {
    let (a, b) = (deterministic_run(), deterministic_run());
    let (ckpt, report) = (a.0 == b.0, a.1 == b.1);
    outcome(ckpt && report, format!("checkpoint bytes equal {ckpt}, report text equal {report}"))
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |id: usize, name: &str, start: Instant, o: Outcome| {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("{tag} {id:02} {name}: {} [{:.1?}]", o.detail, start.elapsed());
        if !o.pass {
            failed += 1;
        }
    };
    let t = Instant::now();
    report(1, "energy conservation", t, energy_conservation());
    let t = Instant::now();
    report(2, "in-focus delta", t, in_focus_delta());
    let t = Instant::now();
    report(3, "geometric shift law", t, geometric_shift_law());
    let t = Instant::now();
    report(4, "convolution oracle", t, convolution_oracle());
    let t = Instant::now();
    report(5, "gradient fidelity", t, gradient_fidelity());
    let t = Instant::now();
    report(6, "loss degeneracy", t, loss_degeneracy());
    let t = Instant::now();
    report(7, "renderer consistency", t, renderer_consistency());
    let t = Instant::now();
    report(8, "shift-and-add agreement", t, shift_and_add_agreement());

    let t = Instant::now();
    let scene = toy_scene();
    let full = toy_runs("", &scene);
    let apertures = toy_runs("learn_f = false\n", &scene);
    report(9, "learned component ordering", t, ordering(&full, &apertures));
    let matched = full[0].matched;
    let beats = apertures.iter().filter(|p| p.psnr > p.matched).count();
    println!("INFO 09 exposure-matched TDM {matched:.2} dB; apertures-only above it in {beats}/3 seeds");
    let t = Instant::now();
    let binary = toy_runs("aperture_mode = binary-relaxed\n", &scene);
    report(10, "continuous vs binary apertures", t, binary_vs_continuous(&full, &binary));

    let t = Instant::now();
    report(11, "metric oracles", t, metric_oracles());
    let t = Instant::now();
    report(12, "determinism", t, determinism());

    println!("{} of 12 criteria passed", 12 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
