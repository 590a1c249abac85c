//! Zero-padded "same" 2-D convolution, FFT-accelerated, with the two adjoints
//! needed for reverse-mode differentiation.
//!
//! Convention: `y[i, j] = sum_{a, b} k[a, b] * x[i + ck - a, j + ck - b]` with
//! `ck = K / 2`, `x` zero outside the image and odd kernel sizes. The kernel
//! sample at `(ck, ck)` is the origin, so a delta there is the identity.

use ndarray::{Array2, Array3, ArrayView2, Axis};
use num_complex::Complex64;

use super::fourier::fft2_in_place;
use super::psf::PointSpreadFunction;
use crate::{Error, Image, Result};

/// Smallest `2^a 3^b 5^c 7^d` that is `>= n`.
pub fn fast_len(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5, 7] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

struct Padded {
    rows: usize,
    cols: usize,
}

impl Padded {
    fn new(h: usize, w: usize, kh: usize, kw: usize) -> Self {
        Padded { rows: fast_len(h + kh - 1), cols: fast_len(w + kw - 1) }
    }

    fn zeros(&self) -> Vec<Complex64> {
        vec![Complex64::new(0.0, 0.0); self.rows * self.cols]
    }

    /// Packs up to two real planes as `re + i*im` at the origin of the padded grid.
    fn pack(&self, re: ArrayView2<f64>, im: Option<ArrayView2<f64>>) -> Vec<Complex64> {
        let mut buf = self.zeros();
        for ((r, c), v) in re.indexed_iter() {
            buf[r * self.cols + c].re = *v;
        }
        if let Some(im) = im {
            for ((r, c), v) in im.indexed_iter() {
                buf[r * self.cols + c].im = *v;
            }
        }
        buf
    }

    fn forward(&self, buf: &mut [Complex64]) {
        fft2_in_place(buf, self.rows, self.cols, false);
    }

    fn inverse(&self, buf: &mut [Complex64]) {
        fft2_in_place(buf, self.rows, self.cols, true);
        let s = 1.0 / (self.rows * self.cols) as f64;
        buf.iter_mut().for_each(|v| *v *= s);
    }

    /// Reads a `h x w` window whose top-left corner sits at the (possibly
    /// negative) circular offset `(r0, c0)`.
    fn read(&self, buf: &[Complex64], r0: isize, c0: isize, h: usize, w: usize) -> (Array2<f64>, Array2<f64>) {
        let (pr, pc) = (self.rows as isize, self.cols as isize);
        let mut re = Array2::zeros((h, w));
        let mut im = Array2::zeros((h, w));
        for r in 0..h {
            let rr = (r0 + r as isize).rem_euclid(pr) as usize;
            for c in 0..w {
                let cc = (c0 + c as isize).rem_euclid(pc) as usize;
                let v = buf[rr * self.cols + cc];
                re[(r, c)] = v.re;
                im[(r, c)] = v.im;
            }
        }
        (re, im)
    }
}

fn check_kernel(k: ArrayView2<f64>) -> Result<()> {
    let (kh, kw) = k.dim();
    if kh % 2 == 0 || kw % 2 == 0 {
        return Err(Error::ShapeMismatch(format!("kernel {kh}x{kw} must have odd sides")));
    }
    Ok(())
}

/// Planes of a multi-channel array processed two at a time.
fn pairs(channels: usize) -> impl Iterator<Item = (usize, Option<usize>)> {
    (0..channels)
        .step_by(2)
        .map(move |c| (c, if c + 1 < channels { Some(c + 1) } else { None }))
}

/// Same-size convolution of every channel of `x` (`C x H x W`) with `k`.
pub fn convolve_planes(x: &Array3<f64>, k: ArrayView2<f64>) -> Result<Array3<f64>> {
    check_kernel(k)?;
    let (ch, h, w) = x.dim();
    let (kh, kw) = k.dim();
    let pad = Padded::new(h, w, kh, kw);
    let mut kf = pad.pack(k, None);
    pad.forward(&mut kf);
    let mut out = Array3::zeros((ch, h, w));
    for (a, b) in pairs(ch) {
        let mut buf = pad.pack(x.index_axis(Axis(0), a), b.map(|b| x.index_axis(Axis(0), b)));
        pad.forward(&mut buf);
        buf.iter_mut().zip(&kf).for_each(|(v, kv)| *v *= kv);
        pad.inverse(&mut buf);
        let (re, im) = pad.read(&buf, (kh / 2) as isize, (kw / 2) as isize, h, w);
        out.index_axis_mut(Axis(0), a).assign(&re);
        if let Some(b) = b {
            out.index_axis_mut(Axis(0), b).assign(&im);
        }
    }
    Ok(out)
}

/// Adjoint of [`convolve_planes`] with respect to the image: correlation of
/// the upstream gradient with the kernel.
pub fn convolve_planes_adjoint_input(gy: &Array3<f64>, k: ArrayView2<f64>) -> Result<Array3<f64>> {
    check_kernel(k)?;
    let (ch, h, w) = gy.dim();
    let (kh, kw) = k.dim();
    let pad = Padded::new(h, w, kh, kw);
    let mut kf = pad.pack(k, None);
    pad.forward(&mut kf);
    let mut out = Array3::zeros((ch, h, w));
    for (a, b) in pairs(ch) {
        let mut buf = pad.pack(gy.index_axis(Axis(0), a), b.map(|b| gy.index_axis(Axis(0), b)));
        pad.forward(&mut buf);
        buf.iter_mut().zip(&kf).for_each(|(v, kv)| *v *= kv.conj());
        pad.inverse(&mut buf);
        let (re, im) = pad.read(&buf, -((kh / 2) as isize), -((kw / 2) as isize), h, w);
        out.index_axis_mut(Axis(0), a).assign(&re);
        if let Some(b) = b {
            out.index_axis_mut(Axis(0), b).assign(&im);
        }
    }
    Ok(out)
}

/// Adjoint of [`convolve_planes`] with respect to the kernel, summed over channels.
pub fn convolve_planes_adjoint_kernel(
    x: &Array3<f64>,
    gy: &Array3<f64>,
    kh: usize,
    kw: usize,
) -> Result<Array2<f64>> {
    if x.dim() != gy.dim() {
        return Err(Error::ShapeMismatch(format!("{:?} vs {:?}", x.dim(), gy.dim())));
    }
    if kh % 2 == 0 || kw % 2 == 0 {
        return Err(Error::ShapeMismatch(format!("kernel {kh}x{kw} must have odd sides")));
    }
    let (ch, h, w) = x.dim();
    let pad = Padded::new(h, w, kh, kw);
    let mut acc = pad.zeros();
    for c in 0..ch {
        let mut xf = pad.pack(x.index_axis(Axis(0), c), None);
        let mut gf = pad.pack(gy.index_axis(Axis(0), c), None);
        pad.forward(&mut xf);
        pad.forward(&mut gf);
        acc.iter_mut().zip(xf.iter().zip(&gf)).for_each(|(a, (xv, gv))| *a += xv * gv.conj());
    }
    pad.inverse(&mut acc);
    // acc[d] = sum_i gy[i] x[i + d]; the kernel tap a pairs with d = ck - a
    let (ck, cw) = ((kh / 2) as isize, (kw / 2) as isize);
    let (pr, pc) = (pad.rows as isize, pad.cols as isize);
    Ok(Array2::from_shape_fn((kh, kw), |(a, b)| {
        let dr = (ck - a as isize).rem_euclid(pr) as usize;
        let dc = (cw - b as isize).rem_euclid(pc) as usize;
        acc[dr * pad.cols + dc].re
    }))
}

/// Applies an intensity PSF to every channel of an image.
pub fn convolve(image: &Image, psf: &PointSpreadFunction) -> Result<Image> {
    convolve_planes(image, psf.kernel.view())
}

/// Temporal integration of display frames: `sum_i convolve(images[i], psfs[i])`.
/// The result is not clamped.
pub fn refocus_sum(images: &[Image], psfs: &[&PointSpreadFunction]) -> Result<Image> {
    if images.len() != psfs.len() {
        return Err(Error::LengthMismatch { left: images.len(), right: psfs.len() });
    }
    let first = images.first().ok_or(Error::LengthMismatch { left: 0, right: 1 })?;
    let mut acc = Array3::zeros(first.dim());
    for (img, psf) in images.iter().zip(psfs) {
        if img.dim() != first.dim() {
            return Err(Error::ShapeMismatch(format!("{:?} vs {:?}", img.dim(), first.dim())));
        }
        acc += &convolve(img, psf)?;
    }
    Ok(acc)
}
