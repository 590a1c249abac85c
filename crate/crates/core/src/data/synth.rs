//! Procedural light fields of textured fronto-parallel layers.
//!
//! View `(s, t)` of a layer with disparity `d` (pixels per view step) samples
//! its texture at `(y - d (s - c), x - d (t - c))`, `c = (N - 1) / 2`, so the
//! central view of an odd grid is the unshifted texture. Textures and masks
//! are analytic, so every view is exact with no resampling.

use std::f64::consts::PI;
use std::path::Path;

use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{save_light_field, BitDepth, LightField};
use crate::Result;

/// Sum of plane waves around mid-gray, per channel.
#[derive(Clone, Debug, PartialEq)]
pub struct Texture {
    /// `(fy, fx, amplitude, phase per channel)`, frequencies in cycles/pixel.
    pub waves: Vec<(f64, f64, f64, [f64; 3])>,
    pub offset: [f64; 3],
}

impl Texture {
    /// Random texture with frequencies up to `max_freq`, values in `[0, 1]`.
    pub fn random(rng: &mut impl Rng, waves: usize, max_freq: f64) -> Self {
        let mut out = Vec::with_capacity(waves);
        let mut budget = 0.0;
        for i in 0..waves {
            let f = max_freq * (0.15 + 0.85 * rng.random::<f64>());
            let angle = rng.random::<f64>() * PI;
            let amp = 1.0 / (1.0 + i as f64);
            budget += amp;
            let phase = [rng.random::<f64>() * 2.0 * PI, rng.random::<f64>() * 2.0 * PI, rng.random::<f64>() * 2.0 * PI];
            out.push((f * angle.sin(), f * angle.cos(), amp, phase));
        }
        let scale = 0.42 / budget.max(1e-12);
        for w in &mut out {
            w.2 *= scale;
        }
        let offset = [0.5 + 0.05 * (rng.random::<f64>() - 0.5), 0.5, 0.5 + 0.05 * (rng.random::<f64>() - 0.5)];
        Texture { waves: out, offset }
    }

    pub fn value(&self, ch: usize, y: f64, x: f64) -> f64 {
        let v: f64 = self
            .waves
            .iter()
            .map(|(fy, fx, a, ph)| a * (2.0 * PI * (fy * y + fx * x) + ph[ch]).cos())
            .sum();
        (self.offset[ch] + v).clamp(0.0, 1.0)
    }
}

/// Soft-edged disc in layer coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Disc {
    pub cy: f64,
    pub cx: f64,
    pub radius: f64,
    /// Width of the linear edge ramp in pixels.
    pub edge: f64,
}

impl Disc {
    pub fn coverage(&self, y: f64, x: f64) -> f64 {
        let r = ((y - self.cy).powi(2) + (x - self.cx).powi(2)).sqrt();
        (0.5 - (r - self.radius) / self.edge).clamp(0.0, 1.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub disparity: f64,
    pub texture: Texture,
    /// `None` covers the whole view.
    pub mask: Option<Disc>,
}

/// Layers composited back to front.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticScene {
    pub layers: Vec<Layer>,
}

impl SyntheticScene {
    /// One textured plane filling every view.
    pub fn plane(disparity: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SyntheticScene { layers: vec![Layer { disparity, texture: Texture::random(&mut rng, 6, 0.2), mask: None }] }
    }

    /// A background plane and a disc-shaped foreground plane at two
    /// disparities, placed for `h x w` views.
    pub fn layered(background: f64, foreground: f64, h: usize, w: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let back = Texture::random(&mut rng, 6, 0.2);
        let front = Texture::random(&mut rng, 6, 0.25);
        let side = h.min(w) as f64;
        let disc = Disc {
            cy: h as f64 * (0.35 + 0.3 * rng.random::<f64>()),
            cx: w as f64 * (0.35 + 0.3 * rng.random::<f64>()),
            radius: side * (0.2 + 0.1 * rng.random::<f64>()),
            edge: 1.5,
        };
        SyntheticScene {
            layers: vec![
                Layer { disparity: background, texture: back, mask: None },
                Layer { disparity: foreground, texture: front, mask: Some(disc) },
            ],
        }
    }

    /// Renders an `n x n` light field of `h x w` views.
    pub fn render(&self, n: usize, h: usize, w: usize) -> Result<LightField> {
        let c = (n as f64 - 1.0) / 2.0;
        let mut views = Vec::with_capacity(n * n);
        for s in 0..n {
            for t in 0..n {
                let mut v = Array3::zeros((3, h, w));
                for layer in &self.layers {
                    let (oy, ox) = (layer.disparity * (s as f64 - c), layer.disparity * (t as f64 - c));
                    for y in 0..h {
                        for x in 0..w {
                            let (ly, lx) = (y as f64 - oy, x as f64 - ox);
                            let a = layer.mask.map_or(1.0, |m| m.coverage(ly, lx));
                            if a == 0.0 {
                                continue;
                            }
                            for ch in 0..3 {
                                let px = &mut v[(ch, y, x)];
                                *px = a * layer.texture.value(ch, ly, lx) + (1.0 - a) * *px;
                            }
                        }
                    }
                }
                views.push(v);
            }
        }
        LightField::new(views, n, 1.0)
    }
}

/// Writes `count` layered scenes as `scene_{i:03}` under `root`, with
/// disparities drawn from `[-max_disparity, max_disparity]`.
pub fn write_dataset(root: &Path, count: usize, n: usize, size: usize, max_disparity: f64, seed: u64) -> Result<Vec<String>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut names = Vec::with_capacity(count);
    for i in 0..count {
        let back = max_disparity * (2.0 * rng.random::<f64>() - 1.0);
        let front = max_disparity * (2.0 * rng.random::<f64>() - 1.0);
        let scene = SyntheticScene::layered(back, front, size, size, rng.random());
        let name = format!("scene_{i:03}");
        save_light_field(&scene.render(n, size, size)?, &root.join(&name), BitDepth::Sixteen)?;
        names.push(name);
    }
    Ok(names)
}
