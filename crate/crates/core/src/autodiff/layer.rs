//! Multi-channel "same" convolution layer (cross-correlation) on `(C, H, W)`
//! feature maps, written as shifted row AXPYs so the inner loops vectorize.

use ndarray::{Array1, Array3, Array4, ArrayView1, ArrayView3, ArrayView4};

/// Row range `[lo, hi)` of outputs whose tap at offset `d` stays inside `0..n`.
fn valid(n: usize, d: isize) -> (usize, usize) {
    let lo = (-d).max(0) as usize;
    let hi = (n as isize - d).clamp(0, n as isize) as usize;
    (lo, hi.max(lo))
}

/// `y[o, i, j] = b[o] + sum_{c, a, e} w[o, c, a, e] x[c, i + a - p, j + e - p]`,
/// `p = k / 2`, zero outside the map.
pub fn conv_layer_forward(x: ArrayView3<f64>, w: ArrayView4<f64>, b: ArrayView1<f64>) -> Array3<f64> {
    let (ci, h, wd) = x.dim();
    let (co, _, k, _) = w.dim();
    let p = (k / 2) as isize;
    let x = x.as_standard_layout();
    let xs = x.as_slice().expect("standard layout");
    let mut y = Array3::zeros((co, h, wd));
    let ys = y.as_slice_mut().expect("fresh array");
    for o in 0..co {
        let yo = &mut ys[o * h * wd..(o + 1) * h * wd];
        yo.iter_mut().for_each(|v| *v = b[o]);
        for c in 0..ci {
            let xc = &xs[c * h * wd..(c + 1) * h * wd];
            for a in 0..k {
                let dy = a as isize - p;
                let (r0, r1) = valid(h, dy);
                for e in 0..k {
                    let dx = e as isize - p;
                    let (c0, c1) = valid(wd, dx);
                    let wv = w[(o, c, a, e)];
                    if wv == 0.0 || c0 >= c1 {
                        continue;
                    }
                    for i in r0..r1 {
                        let src = ((i as isize + dy) as usize) * wd;
                        let srow = &xc[(src as isize + c0 as isize + dx) as usize..(src as isize + c1 as isize + dx) as usize];
                        let drow = &mut yo[i * wd + c0..i * wd + c1];
                        for (d, s) in drow.iter_mut().zip(srow) {
                            *d += wv * s;
                        }
                    }
                }
            }
        }
    }
    y
}

/// Adjoints of [`conv_layer_forward`]: `(x_bar, w_bar, b_bar)`.
pub fn conv_layer_backward(
    x: ArrayView3<f64>,
    w: ArrayView4<f64>,
    gy: ArrayView3<f64>,
) -> (Array3<f64>, Array4<f64>, Array1<f64>) {
    let (ci, h, wd) = x.dim();
    let (co, _, k, _) = w.dim();
    let p = (k / 2) as isize;
    let x = x.as_standard_layout();
    let gy = gy.as_standard_layout();
    let xs = x.as_slice().expect("standard layout");
    let gs = gy.as_slice().expect("standard layout");
    let mut gx = Array3::zeros((ci, h, wd));
    let mut gw = Array4::zeros(w.dim());
    let gb = Array1::from_shape_fn(co, |o| gs[o * h * wd..(o + 1) * h * wd].iter().sum());
    let gxs = gx.as_slice_mut().expect("fresh array");
    for o in 0..co {
        let go = &gs[o * h * wd..(o + 1) * h * wd];
        for c in 0..ci {
            let xc = &xs[c * h * wd..(c + 1) * h * wd];
            let gxc = &mut gxs[c * h * wd..(c + 1) * h * wd];
            for a in 0..k {
                let dy = a as isize - p;
                let (r0, r1) = valid(h, dy);
                for e in 0..k {
                    let dx = e as isize - p;
                    let (c0, c1) = valid(wd, dx);
                    if c0 >= c1 {
                        continue;
                    }
                    let wv = w[(o, c, a, e)];
                    let mut dot = 0.0;
                    for i in r0..r1 {
                        let src = ((i as isize + dy) as usize) * wd;
                        let lo = (src as isize + c0 as isize + dx) as usize;
                        let hi = (src as isize + c1 as isize + dx) as usize;
                        let grow = &go[i * wd + c0..i * wd + c1];
                        for (s, g) in xc[lo..hi].iter().zip(grow) {
                            dot += s * g;
                        }
                        for (d, g) in gxc[lo..hi].iter_mut().zip(grow) {
                            *d += wv * g;
                        }
                    }
                    gw[(o, c, a, e)] = dot;
                }
            }
        }
    }
    (gx, gw, gb)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(x: &Array3<f64>, w: &Array4<f64>, b: &Array1<f64>) -> Array3<f64> {
        let (ci, h, wd) = x.dim();
        let (co, _, k, _) = w.dim();
        let p = (k / 2) as isize;
        Array3::from_shape_fn((co, h, wd), |(o, i, j)| {
            let mut s = b[o];
            for c in 0..ci {
                for a in 0..k {
                    for e in 0..k {
                        let (r, q) = (i as isize + a as isize - p, j as isize + e as isize - p);
                        if r >= 0 && q >= 0 && r < h as isize && q < wd as isize {
                            s += w[(o, c, a, e)] * x[(c, r as usize, q as usize)];
                        }
                    }
                }
            }
            s
        })
    }

    fn data() -> (Array3<f64>, Array4<f64>, Array1<f64>) {
        let x = Array3::from_shape_fn((3, 5, 7), |(c, i, j)| ((c * 13 + i * 7 + j * 3) % 11) as f64 / 5.0 - 1.0);
        let w = Array4::from_shape_fn((2, 3, 3, 3), |(o, c, a, e)| ((o * 5 + c * 3 + a * 2 + e) % 7) as f64 / 7.0 - 0.4);
        let b = Array1::from_vec(vec![0.25, -0.5]);
        (x, w, b)
    }

    #[test]
    fn forward_matches_naive_loops() {
        let (x, w, b) = data();
        let y = conv_layer_forward(x.view(), w.view(), b.view());
        let r = naive(&x, &w, &b);
        assert!(y.iter().zip(r.iter()).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn backward_is_the_adjoint() {
        let (x, w, b) = data();
        let gy = Array3::from_shape_fn((2, 5, 7), |(o, i, j)| ((o * 3 + i * 5 + j) % 9) as f64 / 4.0 - 1.0);
        let (gx, gw, gb) = conv_layer_backward(x.view(), w.view(), gy.view());
        // <gy, conv(x)> is bilinear in (x, w) plus <gy, b>
        let lhs = (&conv_layer_forward(x.view(), w.view(), Array1::zeros(2).view()) * &gy).sum();
        assert!(((&gx * &x).sum() - lhs).abs() < 1e-10);
        assert!(((&gw * &w).sum() - lhs).abs() < 1e-10);
        let bias_part = (&conv_layer_forward(Array3::zeros(x.dim()).view(), w.view(), b.view()) * &gy).sum();
        assert!(((&gb * &b).sum() - bias_part).abs() < 1e-10);
    }
}
