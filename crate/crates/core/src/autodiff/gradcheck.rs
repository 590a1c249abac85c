use ndarray::ArrayD;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::graph::{Graph, Var};
use crate::Result;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheckOptions {
    /// Central-difference step.
    pub step: f64,
    /// Absolute floor of the relative-error denominator, so coordinates whose
    /// true gradient is ~0 are judged by absolute error against this scale.
    pub floor: f64,
    /// Above this many coordinates, random probe directions are used instead.
    pub max_coordinates: usize,
    pub probes: usize,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions { step: 1e-5, floor: 1e-6, max_coordinates: 20_000, probes: 64, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheck {
    /// `max |a - n| / max(|a|, |n|, floor)` over the checked coordinates or
    /// probe directions.
    pub max_rel_error: f64,
    /// Coordinates or probe directions compared.
    pub checked: usize,
    /// `(parameter, flat index)` of the worst coordinate; `None` in probe mode.
    pub worst: Option<(usize, usize)>,
    pub analytic: f64,
    pub numeric: f64,
}

fn evaluate<F>(f: &F, point: &[ArrayD<f64>]) -> Result<(Graph, Vec<Var>, Var)>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = point.iter().map(|p| g.param(p.clone())).collect();
    let loss = f(&mut g, &vars)?;
    Ok((g, vars, loss))
}

fn loss_at<F>(f: &F, point: &[ArrayD<f64>]) -> Result<f64>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    let (g, _, loss) = evaluate(f, point)?;
    g.scalar(loss)
}

/// Compares reverse-mode gradients of the scalar built by `f` at `point`
/// with central finite differences.
///
/// `f` receives one differentiable leaf per entry of `point`. Non-smooth
/// points (a relu input exactly at 0, an L1 residual exactly 0) legitimately
/// report large errors.
pub fn grad_check<F>(f: F, point: &[ArrayD<f64>], opts: &GradCheckOptions) -> Result<GradCheck>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    let (mut g, vars, loss) = evaluate(&f, point)?;
    g.backward(loss)?;
    let grads = vars.iter().map(|v| g.grad_real(*v)).collect::<Result<Vec<_>>>()?;
    let total: usize = point.iter().map(|p| p.len()).sum();
    let h = opts.step;
    let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(opts.floor);
    let mut report = GradCheck { max_rel_error: 0.0, checked: 0, worst: None, analytic: 0.0, numeric: 0.0 };
    let mut work = point.to_vec();
    if total <= opts.max_coordinates {
        for p in 0..point.len() {
            for idx in 0..point[p].len() {
                let orig = point[p].as_slice_memory_order().expect("contiguous")[idx];
                let flat = |w: &mut Vec<ArrayD<f64>>, v: f64| {
                    w[p].as_slice_memory_order_mut().expect("contiguous")[idx] = v;
                };
                flat(&mut work, orig + h);
                let up = loss_at(&f, &work)?;
                flat(&mut work, orig - h);
                let down = loss_at(&f, &work)?;
                flat(&mut work, orig);
                let n = (up - down) / (2.0 * h);
                let a = grads[p].as_slice_memory_order().expect("contiguous")[idx];
                let e = rel(a, n);
                report.checked += 1;
                if e > report.max_rel_error || report.worst.is_none() {
                    report = GradCheck { max_rel_error: e.max(report.max_rel_error), worst: Some((p, idx)), analytic: a, numeric: n, ..report };
                }
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        for _ in 0..opts.probes {
            let dirs: Vec<ArrayD<f64>> = point
                .iter()
                .map(|p| ArrayD::from_shape_simple_fn(p.raw_dim(), || StandardNormal.sample(&mut rng)))
                .collect();
            let shifted = |s: f64| -> Vec<ArrayD<f64>> {
                point.iter().zip(&dirs).map(|(p, d)| p + &(d * s)).collect()
            };
            let n = (loss_at(&f, &shifted(h))? - loss_at(&f, &shifted(-h))?) / (2.0 * h);
            let a: f64 = grads.iter().zip(&dirs).map(|(g, d)| (g * d).sum()).sum();
            let e = rel(a, n);
            report.checked += 1;
            if e >= report.max_rel_error {
                report.max_rel_error = e;
                report.analytic = a;
                report.numeric = n;
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{Array1, Array2, Array3, Array4};
    use num_complex::Complex64;

    fn quadratic(g: &mut Graph, v: &[Var]) -> Result<Var> {
        let sq = g.mul(v[0], v[0])?;
        let w = g.mul_const(sq, ArrayD::from_shape_fn(vec![5], |i| 1.0 + i[0] as f64))?;
        g.sum(w)
    }

    #[test]
    fn quadratic_form_is_exact() {
        let x = Array1::from_vec(vec![0.3, -1.2, 2.0, 0.5, -0.1]).into_dyn();
        let opts = GradCheckOptions { step: 1e-4, ..Default::default() };
        let r = grad_check(quadratic, &[x], &opts).unwrap();
        assert!(r.max_rel_error < 1e-8, "{r:?}");
        assert_eq!(r.checked, 5);
    }

    #[test]
    fn relu_kink_reports_large_error() {
        let x = Array1::from_vec(vec![0.0]).into_dyn();
        let r = grad_check(
            |g, v| {
                let y = g.relu(v[0])?;
                g.sum(y)
            },
            &[x],
            &GradCheckOptions::default(),
        )
        .unwrap();
        // analytic 0 (subgradient), numeric 1/2
        assert!(r.max_rel_error > 0.5);
    }

    #[test]
    fn probe_mode_agrees_on_smooth_functions() {
        let x = Array1::from_shape_fn(5, |i| i as f64 * 0.3 - 0.5).into_dyn();
        let opts = GradCheckOptions { max_coordinates: 0, probes: 8, ..Default::default() };
        let r = grad_check(quadratic, &[x], &opts).unwrap();
        assert!(r.max_rel_error < 1e-6);
        assert_eq!(r.checked, 8);
    }

    /// Every operator on a randomized smooth point.
    #[test]
    fn every_operator_passes() {
        let cfg = crate::optics::OpticalConfig::with_grid(3, 3, 3);
        let d = cfg.pupil_grid_size();
        let s = cfg.oversample();
        let phase = ArrayD::from_shape_fn(vec![d, d], |i| Complex64::from_polar(1.0, 0.37 * (i[0] * i[1]) as f64));
        let img = Array3::from_shape_fn((3, 6, 5), |(c, y, x)| ((c * 7 + y * 3 + x * 5) % 11) as f64 / 11.0 + 0.03).into_dyn();
        let logits = Array2::from_shape_fn((3, 3), |(r, c)| (r as f64 - 1.0) * 0.7 + c as f64 * 0.31 - 0.2).into_dyn();
        let w = Array4::from_shape_fn((2, 3, 3, 3), |(o, c, a, e)| ((o * 5 + c * 3 + a * 2 + e) % 7) as f64 / 7.0 - 0.4).into_dyn();
        let b = Array1::from_vec(vec![0.1, -0.2]).into_dyn();
        let target = Array3::from_shape_fn((3, 6, 5), |(c, y, x)| ((c + y * 2 + x) % 5) as f64 / 4.0 + 0.013).into_dyn();
        let weights = Array3::from_shape_fn((3, 6, 5), |(_, y, x)| 1.0 + ((y + x) % 3) as f64).into_dyn();
        let f = |g: &mut Graph, v: &[Var]| -> Result<Var> {
            let (x, lg, wv, bv) = (v[0], v[1], v[2], v[3]);
            let a = g.sigmoid(lg)?;
            let af = g.flip(a, 1)?;
            let a2 = g.add(a, af)?;
            let a3 = g.scale(a2, 0.5)?;
            let p = g.embed(a3, &cfg)?;
            let ph = g.scale(p, 0.9)?;
            let e = g.exp_i(ph)?;
            let z = g.mul_const(p, phase.clone())?;
            let z = g.mul(z, e)?;
            let f = g.fft2(z)?;
            let fi = g.ifft2(f)?;
            let f2 = g.fft2(fi)?;
            let fs = g.sub(f2, f)?;
            let f = g.add(f, fs)?;
            let i = g.abs2(f)?;
            let k = g.bin(i, s)?;
            let blurred = g.conv2d(x, k)?;
            let feat = g.conv_layer(blurred, wv, bv)?;
            let feat = g.relu(feat)?;
            let both = g.concat(&[feat, x])?;
            let parts = g.split(both, 1)?;
            let head = g.concat(&[parts[0], parts[1], parts[4]])?;
            let sq = g.mul(head, head)?;
            let mixed = g.add(sq, x)?;
            let c = g.constant(target.clone());
            let d = g.l1_distance(mixed, c)?;
            let dw = g.mul_const(d, weights.clone())?;
            let total = g.sum(dw)?;
            let m = g.mean(blurred)?;
            g.add(total, m)
        };
        let r = grad_check(f, &[img.clone(), logits, w, b], &GradCheckOptions::default()).unwrap();
        assert!(r.max_rel_error < 1e-4, "{r:?}");
    }
}
