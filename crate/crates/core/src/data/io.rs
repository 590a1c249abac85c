use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use image::{DynamicImage, ImageBuffer, Rgb};
use ndarray::Array3;

use super::LightField;
use crate::{Error, Image, Result};

/// Sample depth for PNG output.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BitDepth {
    Eight,
    #[default]
    Sixteen,
}

impl BitDepth {
    fn max(self) -> f64 {
        match self {
            BitDepth::Eight => 255.0,
            BitDepth::Sixteen => 65535.0,
        }
    }
}

/// Decodes a PNG to `(3, H, W)` linear values; 8- and 16-bit samples are
/// divided by the bit-depth maximum.
pub fn read_png(path: &Path) -> Result<Image> {
    let img = image::open(path).map_err(|source| Error::Image { path: path.to_path_buf(), source })?;
    let sixteen = matches!(
        img,
        DynamicImage::ImageLuma16(_)
            | DynamicImage::ImageLumaA16(_)
            | DynamicImage::ImageRgb16(_)
            | DynamicImage::ImageRgba16(_)
    );
    let (w, h) = (img.width() as usize, img.height() as usize);
    if sixteen {
        let buf = img.into_rgb16();
        Ok(Array3::from_shape_fn((3, h, w), |(c, y, x)| buf.get_pixel(x as u32, y as u32)[c] as f64 / 65535.0))
    } else {
        let buf = img.into_rgb8();
        Ok(Array3::from_shape_fn((3, h, w), |(c, y, x)| buf.get_pixel(x as u32, y as u32)[c] as f64 / 255.0))
    }
}

/// Clamps to `[0, 1]` and writes an RGB PNG.
pub fn write_png(path: &Path, image: &Image, depth: BitDepth) -> Result<()> {
    let (ch, h, w) = image.dim();
    if ch != 3 {
        return Err(Error::ShapeMismatch(format!("expected 3 channels, got {ch}")));
    }
    let q = |c: usize, x: u32, y: u32| (image[(c, y as usize, x as usize)].clamp(0.0, 1.0) * depth.max()).round();
    let res = match depth {
        BitDepth::Eight => ImageBuffer::<Rgb<u8>, Vec<u8>>::from_fn(w as u32, h as u32, |x, y| {
            Rgb([q(0, x, y) as u8, q(1, x, y) as u8, q(2, x, y) as u8])
        })
        .save(path),
        BitDepth::Sixteen => ImageBuffer::<Rgb<u16>, Vec<u16>>::from_fn(w as u32, h as u32, |x, y| {
            Rgb([q(0, x, y) as u16, q(1, x, y) as u16, q(2, x, y) as u16])
        })
        .save(path),
    };
    res.map_err(|source| Error::Image { path: path.to_path_buf(), source })
}

fn parse_view_name(name: &str) -> Option<(usize, usize)> {
    let stem = name.strip_prefix("view_")?.strip_suffix(".png")?;
    let (s, t) = stem.split_once('_')?;
    Some((s.parse().ok()?, t.parse().ok()?))
}

/// Loads a scene directory of `view_{s}_{t}.png` files.
///
/// The grid size is inferred from the largest indices present. A complete
/// non-square grid is `NotSquareGrid`; a hole in the grid is `MissingView`.
/// The sampling period defaults to 1 mm per view step.
pub fn load_light_field(dir: &Path) -> Result<LightField> {
    let mut files = HashMap::new();
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        if let Some(ix) = entry.file_name().to_str().and_then(parse_view_name) {
            files.insert(ix, entry.path());
        }
    }
    let ns = files.keys().map(|k| k.0 + 1).max().unwrap_or(0);
    let nt = files.keys().map(|k| k.1 + 1).max().unwrap_or(0);
    if files.len() < 4 || (ns != nt && files.len() == ns * nt) {
        return Err(Error::NotSquareGrid { count: files.len() });
    }
    let n = ns.max(nt);
    let mut views = Vec::with_capacity(n * n);
    for s in 0..n {
        for t in 0..n {
            let path = files.get(&(s, t)).ok_or_else(|| Error::MissingView { dir: dir.to_path_buf(), s, t })?;
            views.push(read_png(path)?);
        }
    }
    LightField::new(views, n, 1.0)
}

/// Writes every view as `view_{s}_{t}.png`.
pub fn save_light_field(lf: &LightField, dir: &Path, depth: BitDepth) -> Result<()> {
    fs::create_dir_all(dir)?;
    let n = lf.angular_resolution();
    for s in 0..n {
        for t in 0..n {
            write_png(&dir.join(format!("view_{s}_{t}.png")), lf.view(s, t), depth)?;
        }
    }
    Ok(())
}

/// Names of the scene subdirectories of a dataset root, sorted.
pub fn list_scenes(root: &Path) -> Result<Vec<String>> {
    let mut names = Vec::new();
    for entry in fs::read_dir(root)? {
        let entry = entry?;
        if entry.file_type()?.is_dir() {
            if let Some(name) = entry.file_name().to_str() {
                names.push(name.to_string());
            }
        }
    }
    names.sort();
    Ok(names)
}

/// Writes `stack_{j}.png` (16-bit, clamped) per slice and a `stack.txt`
/// sidecar: the `metadata` pairs, then one `slice j psi` line per slice.
pub fn write_stack(dir: &Path, slices: &[Image], psi: &[f64], metadata: &[(String, String)]) -> Result<()> {
    if slices.len() != psi.len() {
        return Err(Error::LengthMismatch { left: slices.len(), right: psi.len() });
    }
    fs::create_dir_all(dir)?;
    for (j, img) in slices.iter().enumerate() {
        write_png(&dir.join(format!("stack_{j}.png")), img, BitDepth::Sixteen)?;
    }
    let mut text = Vec::new();
    for (k, v) in metadata {
        writeln!(text, "{k} = {v}")?;
    }
    for (j, p) in psi.iter().enumerate() {
        writeln!(text, "slice {j} psi {p:?}")?;
    }
    fs::write(dir.join("stack.txt"), text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(n: usize) -> LightField {
        let views = (0..n * n)
            .map(|i| Array3::from_shape_fn((3, 5, 6), |(c, y, x)| ((i * 7 + c * 5 + y * 3 + x) % 17) as f64 / 16.0))
            .collect();
        LightField::new(views, n, 1.0).unwrap()
    }

    #[test]
    fn round_trip_within_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let lf = field(3);
        for (depth, step) in [(BitDepth::Eight, 1.0 / 255.0), (BitDepth::Sixteen, 1.0 / 65535.0)] {
            save_light_field(&lf, dir.path(), depth).unwrap();
            let back = load_light_field(dir.path()).unwrap();
            assert_eq!(back.angular_resolution(), 3);
            for (a, b) in lf.views().iter().zip(back.views()) {
                assert!(a.iter().zip(b.iter()).all(|(x, y)| (x - y).abs() <= step));
            }
        }
    }

    #[test]
    fn missing_and_non_square() {
        let dir = tempfile::tempdir().unwrap();
        save_light_field(&field(3), dir.path(), BitDepth::Eight).unwrap();
        fs::remove_file(dir.path().join("view_1_2.png")).unwrap();
        assert!(matches!(
            load_light_field(dir.path()),
            Err(Error::MissingView { s: 1, t: 2, .. })
        ));
        let rect = tempfile::tempdir().unwrap();
        save_light_field(&field(3), rect.path(), BitDepth::Eight).unwrap();
        for t in 0..3 {
            fs::remove_file(rect.path().join(format!("view_2_{t}.png"))).unwrap();
        }
        assert!(matches!(load_light_field(rect.path()), Err(Error::NotSquareGrid { count: 6 })));
    }

    #[test]
    fn stack_sidecar_lists_psi() {
        let dir = tempfile::tempdir().unwrap();
        let img = Array3::from_elem((3, 4, 4), 0.25);
        write_stack(dir.path(), &[img.clone(), img], &[-1.5, 1.5], &[("scene".into(), "x".into())]).unwrap();
        let text = fs::read_to_string(dir.path().join("stack.txt")).unwrap();
        assert!(text.contains("slice 1 psi 1.5"));
        assert!(dir.path().join("stack_0.png").exists());
    }
}
