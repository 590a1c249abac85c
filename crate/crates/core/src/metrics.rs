//! Focus measure, focus-weighted L1 loss, PSNR and SSIM.
//!
//! Metrics clamp to `[0, 1]` and skip a border band of half the PSF support,
//! where zero padding makes rendered content meaningless.

use ndarray::{s, Array2, Array3, ArrayView2, Axis, Zip};

use crate::autodiff::{Graph, Var};
use crate::display::FocalStack;
use crate::{Error, Image, Result};

/// PSNR reported for identical inputs.
pub const PSNR_CAP: f64 = 100.0;

/// `sum_c |d/dx| + |d/dy|` with forward differences; the last column (row)
/// has zero horizontal (vertical) difference.
pub fn focus_measure(image: &Image) -> Array2<f64> {
    let (ch, h, w) = image.dim();
    let mut u = Array2::zeros((h, w));
    for c in 0..ch {
        for y in 0..h {
            for x in 0..w {
                let v = image[(c, y, x)];
                let gx = if x + 1 < w { (image[(c, y, x + 1)] - v).abs() } else { 0.0 };
                let gy = if y + 1 < h { (image[(c, y + 1, x)] - v).abs() } else { 0.0 };
                u[(y, x)] += gx + gy;
            }
        }
    }
    u
}

/// Per-slice weights `exp(beta * normalized focus)` of a ground-truth stack.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightMaps {
    pub maps: Vec<Array2<f64>>,
    pub beta: f64,
}

/// Weight maps from the ground-truth stack. Each slice's focus measure is
/// min-max normalized over all its pixels; a constant slice normalizes to 0.
pub fn weight_maps(gt: &FocalStack, beta: f64) -> Result<WeightMaps> {
    if !(beta >= 0.0) {
        return Err(Error::NonNegativeBetaRequired(beta));
    }
    let maps = gt
        .slices
        .iter()
        .map(|s| {
            let u = focus_measure(s);
            let lo = u.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if hi > lo {
                u.mapv(|v| (beta * (v - lo) / (hi - lo)).exp())
            } else {
                Array2::ones(u.dim())
            }
        })
        .collect();
    Ok(WeightMaps { maps, beta })
}

/// `weights` broadcast over channels with the border band zeroed, plus the
/// number of interior entries.
fn masked(weights: ArrayView2<f64>, border: usize) -> Result<(Array3<f64>, usize)> {
    let (h, w) = weights.dim();
    if 2 * border >= h || 2 * border >= w {
        return Err(Error::ImageTooSmall { height: h, width: w, window: 2 * border + 1 });
    }
    let mut out = Array3::zeros((3, h, w));
    for c in 0..3 {
        out.slice_mut(s![c, border..h - border, border..w - border])
            .assign(&weights.slice(s![border..h - border, border..w - border]));
    }
    Ok((out, 3 * (h - 2 * border) * (w - 2 * border)))
}

fn check_stacks(a: &FocalStack, b: &FocalStack) -> Result<()> {
    if a.slices.len() != b.slices.len() {
        return Err(Error::LengthMismatch { left: a.slices.len(), right: b.slices.len() });
    }
    for (x, y) in a.slices.iter().zip(&b.slices) {
        if x.dim() != y.dim() || x.dim().0 != 3 {
            return Err(Error::ShapeMismatch(format!("slices {:?} vs {:?}", x.dim(), y.dim())));
        }
    }
    Ok(())
}

/// Mean over slices, interior pixels and channels of `W_j |F_c - F_g|`.
pub fn weighted_l1(generated: &FocalStack, gt: &FocalStack, weights: &WeightMaps, border: usize) -> Result<f64> {
    check_stacks(generated, gt)?;
    if weights.maps.len() != gt.slices.len() {
        return Err(Error::LengthMismatch { left: weights.maps.len(), right: gt.slices.len() });
    }
    let mut total = 0.0;
    let mut count = 0;
    for ((c, g), w) in generated.slices.iter().zip(&gt.slices).zip(&weights.maps) {
        if w.dim() != (c.dim().1, c.dim().2) {
            return Err(Error::ShapeMismatch(format!("weight map {:?} for slice {:?}", w.dim(), c.dim())));
        }
        let (mw, n) = masked(w.view(), border)?;
        total += Zip::from(&mw).and(c).and(g).fold(0.0, |acc, w, c, g| acc + w * (c - g).abs());
        count += n;
    }
    Ok(total / count as f64)
}

/// Unweighted mean absolute error over the same entries as [`weighted_l1`].
pub fn l1(generated: &FocalStack, gt: &FocalStack, border: usize) -> Result<f64> {
    let ones = WeightMaps {
        maps: gt.slices.iter().map(|s| Array2::ones((s.dim().1, s.dim().2))).collect(),
        beta: 0.0,
    };
    weighted_l1(generated, gt, &ones, border)
}

/// Differentiable [`weighted_l1`] of rendered slice nodes against a constant
/// ground truth.
pub fn weighted_l1_graph(
    g: &mut Graph,
    slices: &[Var],
    gt: &FocalStack,
    weights: &WeightMaps,
    border: usize,
) -> Result<Var> {
    if slices.len() != gt.slices.len() || weights.maps.len() != gt.slices.len() {
        return Err(Error::LengthMismatch { left: slices.len(), right: gt.slices.len() });
    }
    let mut total: Option<Var> = None;
    let mut count = 0;
    for ((&c, t), w) in slices.iter().zip(&gt.slices).zip(&weights.maps) {
        let (mw, n) = masked(w.view(), border)?;
        let target = g.constant(t.clone().into_dyn());
        let d = g.l1_distance(c, target)?;
        let wd = g.mul_const(d, mw.into_dyn())?;
        let s = g.sum(wd)?;
        total = Some(match total {
            Some(acc) => g.add(acc, s)?,
            None => s,
        });
        count += n;
    }
    let total = total.ok_or(Error::LengthMismatch { left: 0, right: 1 })?;
    g.scale(total, 1.0 / count as f64)
}

fn interior(image: &Image, border: usize) -> Result<Array3<f64>> {
    let (_, h, w) = image.dim();
    if 2 * border >= h || 2 * border >= w {
        return Err(Error::ImageTooSmall { height: h, width: w, window: 2 * border + 1 });
    }
    Ok(image.slice(s![.., border..h - border, border..w - border]).mapv(|v| v.clamp(0.0, 1.0)))
}

/// `10 log10(1 / MSE)` over the clamped interior, capped at [`PSNR_CAP`].
pub fn psnr(a: &Image, b: &Image, border: usize) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::ShapeMismatch(format!("{:?} vs {:?}", a.dim(), b.dim())));
    }
    let (x, y) = (interior(a, border)?, interior(b, border)?);
    let mse = Zip::from(&x).and(&y).fold(0.0, |acc, p, q| acc + (p - q) * (p - q)) / x.len() as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(PSNR_CAP))
}

/// Normalized 11-tap Gaussian, sigma 1.5.
fn gaussian_window() -> [f64; 11] {
    let mut w = [0.0; 11];
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - 5.0;
        *v = (-d * d / (2.0 * 1.5 * 1.5)).exp();
    }
    let s: f64 = w.iter().sum();
    w.map(|v| v / s)
}

/// Valid-mode separable filtering with the Gaussian window.
fn filter_valid(x: &Array2<f64>, w: &[f64; 11]) -> Array2<f64> {
    let (h, wd) = x.dim();
    let rows = Array2::from_shape_fn((h, wd - 10), |(r, c)| (0..11).map(|k| w[k] * x[(r, c + k)]).sum::<f64>());
    Array2::from_shape_fn((h - 10, wd - 10), |(r, c)| (0..11).map(|k| w[k] * rows[(r + k, c)]).sum::<f64>())
}

/// Single-scale SSIM of the channel-mean gray images: 11x11 Gaussian window
/// (sigma 1.5), `K1 = 0.01`, `K2 = 0.03`, dynamic range 1, averaged over all
/// window positions inside the image. Inputs are clamped to `[0, 1]`.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::ShapeMismatch(format!("{:?} vs {:?}", a.dim(), b.dim())));
    }
    let (_, h, w) = a.dim();
    if h < 11 || w < 11 {
        return Err(Error::ImageTooSmall { height: h, width: w, window: 11 });
    }
    let gray = |x: &Image| x.mapv(|v| v.clamp(0.0, 1.0)).mean_axis(Axis(0)).expect("channels");
    ssim_gray(&gray(a), &gray(b))
}

/// [`ssim`] on single-channel images.
pub fn ssim_gray(x: &Array2<f64>, y: &Array2<f64>) -> Result<f64> {
    let (h, w) = x.dim();
    if x.dim() != y.dim() {
        return Err(Error::ShapeMismatch(format!("{:?} vs {:?}", x.dim(), y.dim())));
    }
    if h < 11 || w < 11 {
        return Err(Error::ImageTooSmall { height: h, width: w, window: 11 });
    }
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    let win = gaussian_window();
    let mx = filter_valid(x, &win);
    let my = filter_valid(y, &win);
    let mxx = filter_valid(&(x * x), &win);
    let myy = filter_valid(&(y * y), &win);
    let mxy = filter_valid(&(x * y), &win);
    let map = Zip::from(&mx).and(&my).and(&mxx).and(&myy).and(&mxy).map_collect(|mx, my, xx, yy, xy| {
        let (vx, vy, cxy) = (xx - mx * mx, yy - my * my, xy - mx * my);
        ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
    });
    Ok(map.mean().expect("non-empty"))
}

/// Per-slice PSNR and SSIM of two stacks over the interior.
#[derive(Clone, Debug, PartialEq)]
pub struct StackScores {
    pub psnr: Vec<f64>,
    pub ssim: Vec<f64>,
}

impl StackScores {
    pub fn mean_psnr(&self) -> f64 {
        self.psnr.iter().sum::<f64>() / self.psnr.len() as f64
    }

    pub fn mean_ssim(&self) -> f64 {
        self.ssim.iter().sum::<f64>() / self.ssim.len() as f64
    }
}

pub fn score_stack(generated: &FocalStack, gt: &FocalStack, border: usize) -> Result<StackScores> {
    check_stacks(generated, gt)?;
    let mut out = StackScores { psnr: vec![], ssim: vec![] };
    for (a, b) in generated.slices.iter().zip(&gt.slices) {
        out.psnr.push(psnr(a, b, border)?);
        out.ssim.push(ssim(&interior(a, border)?, &interior(b, border)?)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::display::FocalStackSpec;

    fn stack(slices: Vec<Image>) -> FocalStack {
        let m = slices.len();
        FocalStack::new(slices, FocalStackSpec::linear(m, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn focus_of_constant_and_step() {
        assert!(focus_measure(&Array3::from_elem((3, 4, 4), 0.3)).iter().all(|v| *v == 0.0));
        let mut img = Array3::zeros((3, 4, 6));
        img.slice_mut(s![1, .., 3..]).fill(0.7);
        let u = focus_measure(&img);
        for y in 0..4 {
            for x in 0..6 {
                assert_eq!(u[(y, x)], if x == 2 { 0.7 } else { 0.0 });
            }
        }
    }

    #[test]
    fn focus_of_checkerboard() {
        let img = Array3::from_shape_fn((3, 6, 6), |(_, y, x)| ((y + x) % 2) as f64);
        let u = focus_measure(&img);
        assert_eq!(u[(2, 3)], 6.0);
        assert_eq!(u[(5, 5)], 0.0);
        assert_eq!(u[(5, 2)], 3.0);
    }

    #[test]
    fn weights_at_beta_zero_are_ones_and_bounded_otherwise() {
        let img = Array3::from_shape_fn((3, 8, 8), |(c, y, x)| ((c + y * x) % 5) as f64 / 4.0);
        let gt = stack(vec![img.clone(), Array3::from_elem((3, 8, 8), 0.2)]);
        let w0 = weight_maps(&gt, 0.0).unwrap();
        assert!(w0.maps.iter().all(|m| m.iter().all(|v| *v == 1.0)));
        let w2 = weight_maps(&gt, 2.0).unwrap();
        let e2 = 2f64.exp();
        assert!(w2.maps[0].iter().all(|v| (1.0..=e2).contains(v)));
        assert!(w2.maps[0].iter().any(|v| *v == 1.0) && w2.maps[0].iter().any(|v| (*v - e2).abs() < 1e-12));
        assert!(w2.maps[1].iter().all(|v| *v == 1.0));
        assert!(matches!(weight_maps(&gt, -1.0), Err(Error::NonNegativeBetaRequired(_))));
    }

    #[test]
    fn two_by_two_toy_loss() {
        let gen = Array3::from_shape_fn((3, 2, 2), |(_, y, x)| if y != x { 1.0 } else { 0.0 });
        let gt = Array3::zeros((3, 2, 2));
        let e2 = 2f64.exp();
        let w = WeightMaps { maps: vec![ndarray::arr2(&[[1.0, e2], [1.0, 1.0]])], beta: 2.0 };
        let l = weighted_l1(&stack(vec![gen]), &stack(vec![gt]), &w, 0).unwrap();
        assert!((l - (e2 + 1.0) / 4.0).abs() < 1e-15);
    }

    #[test]
    fn psnr_reference_values() {
        let a = Array3::from_elem((3, 6, 6), 0.5);
        assert_eq!(psnr(&a, &a, 1).unwrap(), PSNR_CAP);
        let b = &a + 0.1;
        assert!((psnr(&a, &b, 1).unwrap() - 20.0).abs() < 1e-9);
    }

    #[test]
    fn ssim_of_constant_images() {
        let zero = Array3::zeros((3, 12, 12));
        let one = Array3::ones((3, 12, 12));
        let c1 = 1e-4;
        assert!((ssim(&zero, &one).unwrap() - c1 / (1.0 + c1)).abs() < 1e-15);
        assert_eq!(ssim(&one, &one).unwrap(), 1.0);
        assert!(matches!(ssim(&Array3::zeros((3, 10, 20)), &Array3::zeros((3, 10, 20))), Err(Error::ImageTooSmall { .. })));
    }

    fn oracle_inputs() -> (Array2<f64>, Array2<f64>, Array2<f64>) {
        let a = Array2::from_shape_fn((24, 20), |(y, x)| ((y * 7 + x * 3) % 17) as f64 / 16.0);
        let b = Array2::from_shape_fn((24, 20), |(y, x)| ((y * 5 + x * 11 + 3) % 13) as f64 / 12.0);
        let c = Array2::from_shape_fn((24, 20), |(y, x)| (a[(y, x)] * 0.8 + 0.1 * (x as f64 / 3.0).sin()).clamp(0.0, 1.0));
        (a, b, c)
    }

    #[test]
    fn ssim_matches_reference_implementation() {
        // scikit-image structural_similarity, gaussian_weights, sigma 1.5,
        // population covariance, data_range 1.
        let (a, b, c) = oracle_inputs();
        assert!((ssim_gray(&a, &b).unwrap() - -0.02077106137859986).abs() < 1e-12);
        assert!((ssim_gray(&a, &c).unwrap() - 0.92946595340736).abs() < 1e-12);
    }

    #[test]
    fn ssim_matches_naive_windows() {
        let (a, _, c) = oracle_inputs();
        let w = gaussian_window();
        let mut total = 0.0;
        let mut n = 0;
        for r in 0..14 {
            for q in 0..10 {
                let (mut mx, mut my, mut xx, mut yy, mut xy) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for i in 0..11 {
                    for j in 0..11 {
                        let k = w[i] * w[j];
                        let (u, v) = (a[(r + i, q + j)], c[(r + i, q + j)]);
                        mx += k * u;
                        my += k * v;
                        xx += k * u * u;
                        yy += k * v * v;
                        xy += k * u * v;
                    }
                }
                let (c1, c2) = (1e-4, 9e-4);
                total += ((2.0 * mx * my + c1) * (2.0 * (xy - mx * my) + c2))
                    / ((mx * mx + my * my + c1) * (xx - mx * mx + yy - my * my + c2));
                n += 1;
            }
        }
        assert!((ssim_gray(&a, &c).unwrap() - total / n as f64).abs() < 1e-12);
    }

    #[test]
    fn graph_loss_matches_direct_loss() {
        let a = Array3::from_shape_fn((3, 7, 7), |(c, y, x)| ((c + 2 * y + 3 * x) % 7) as f64 / 6.0);
        let b = Array3::from_shape_fn((3, 7, 7), |(c, y, x)| ((2 * c + y + x) % 5) as f64 / 4.0);
        let (sa, sb) = (stack(vec![a.clone(), b.clone()]), stack(vec![b.clone(), a.clone()]));
        let w = weight_maps(&sb, 1.5).unwrap();
        let direct = weighted_l1(&sa, &sb, &w, 1).unwrap();
        let mut g = Graph::new();
        let vars = [g.param(a.into_dyn()), g.param(b.into_dyn())];
        let l = weighted_l1_graph(&mut g, &vars, &sb, &w, 1).unwrap();
        assert!((g.scalar(l).unwrap() - direct).abs() < 1e-14);
    }
}
