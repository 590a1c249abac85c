use ndarray::{Array2, Array3, ArrayView2};

use crate::data::{LightField, ViewSelection};
use crate::{Error, Image, Result};

/// Classic light field refocusing: the mean of the selected views, each
/// translated by `-(s - c) * slope` rows and `-(t - c) * slope` columns, where
/// `c` is the grid center. Bilinear interpolation, zero outside the image.
///
/// Independent of the display optics; used to cross-check the simulator.
pub fn shift_and_add_oracle(lf: &LightField, selection: &ViewSelection, slope: f64) -> Result<Image> {
    let n = lf.angular_resolution();
    let (h, w) = lf.spatial_resolution();
    let reach = slope.abs() * (n as f64 - 1.0) / 2.0;
    if !(reach < h.min(w) as f64) {
        return Err(Error::SlopeTooLarge { slope, height: h, width: w });
    }
    selection.check_grid(n)?;
    let c = (n as f64 - 1.0) / 2.0;
    let mut acc = Array3::zeros((3, h, w));
    for &(s, t) in selection.indices() {
        let view = lf.view(s, t);
        let (dy, dx) = ((s as f64 - c) * slope, (t as f64 - c) * slope);
        for ch in 0..3 {
            let moved = sample_shifted(view.index_axis(ndarray::Axis(0), ch), dy, dx);
            acc.index_axis_mut(ndarray::Axis(0), ch).scaled_add(1.0, &moved);
        }
    }
    Ok(acc / selection.len() as f64)
}

/// `out[y, x] = img(y + dy, x + dx)` with bilinear interpolation and zero fill.
pub fn sample_shifted(img: ArrayView2<f64>, dy: f64, dx: f64) -> Array2<f64> {
    let (h, w) = img.dim();
    let at = |r: isize, c: isize| -> f64 {
        if r < 0 || c < 0 || r >= h as isize || c >= w as isize {
            0.0
        } else {
            img[(r as usize, c as usize)]
        }
    };
    let (fy, fx) = (dy.floor(), dx.floor());
    let (ay, ax) = (dy - fy, dx - fx);
    let (oy, ox) = (fy as isize, fx as isize);
    Array2::from_shape_fn((h, w), |(r, c)| {
        let (r, c) = (r as isize + oy, c as isize + ox);
        (1.0 - ay) * ((1.0 - ax) * at(r, c) + ax * at(r, c + 1))
            + ay * ((1.0 - ax) * at(r + 1, c) + ax * at(r + 1, c + 1))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ViewPattern;

    fn field(n: usize, h: usize, w: usize, f: impl Fn(usize, usize, usize, usize, usize) -> f64) -> LightField {
        let views = (0..n * n)
            .map(|i| Array3::from_shape_fn((3, h, w), |(ch, y, x)| f(i / n, i % n, ch, y, x)))
            .collect();
        LightField::new(views, n, 1.0).unwrap()
    }

    #[test]
    fn identical_constant_views_are_reproduced_inside_the_band() {
        let lf = field(5, 20, 20, |_, _, ch, _, _| 0.2 + 0.3 * ch as f64);
        let sel = ViewSelection::from_pattern(5, &ViewPattern::Grid3x3).unwrap();
        let out = shift_and_add_oracle(&lf, &sel, 1.0).unwrap();
        let v = lf.view(0, 0);
        for ch in 0..3 {
            for y in 3..17 {
                for x in 3..17 {
                    assert!((out[(ch, y, x)] - v[(ch, y, x)]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn zero_slope_is_the_plain_mean() {
        let lf = field(3, 6, 7, |s, t, ch, y, x| (s * 3 + t) as f64 * 0.1 + (ch + y + x) as f64 * 0.01);
        let sel = ViewSelection::from_pattern(3, &ViewPattern::Corners4).unwrap();
        let out = shift_and_add_oracle(&lf, &sel, 0.0).unwrap();
        let mut mean = Array3::zeros((3, 6, 7));
        for &(s, t) in sel.indices() {
            mean += lf.view(s, t);
        }
        mean /= 4.0;
        assert!(out.iter().zip(mean.iter()).all(|(a, b)| (a - b).abs() < 1e-15));
    }

    #[test]
    fn large_slope_is_rejected() {
        let lf = field(9, 8, 8, |_, _, _, _, _| 0.5);
        let sel = ViewSelection::from_pattern(9, &ViewPattern::Corners4).unwrap();
        assert!(matches!(shift_and_add_oracle(&lf, &sel, 2.0), Err(Error::SlopeTooLarge { .. })));
    }

    #[test]
    fn integer_shift_moves_samples() {
        let img = Array2::from_shape_fn((4, 4), |(r, c)| (r * 4 + c) as f64);
        let out = sample_shifted(img.view(), 1.0, -1.0);
        assert_eq!(out[(0, 1)], img[(1, 0)]);
        assert_eq!(out[(3, 2)], 0.0);
        assert_eq!(out[(2, 0)], 0.0);
    }
}
