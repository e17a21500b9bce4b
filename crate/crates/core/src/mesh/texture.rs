use std::path::Path;

use crate::error::{Error, Result};
use crate::math::{Vec2, Vec3};

/// An 8-bit RGB image stored as linear floats in `[0, 1]`, row 0 at the top.
#[derive(Debug, Clone, PartialEq)]
pub struct Texture {
    width: usize,
    height: usize,
    texels: Vec<[f32; 3]>,
}

impl Texture {
    pub fn new(width: usize, height: usize, texels: Vec<[f32; 3]>) -> Result<Self> {
        if width == 0 || height == 0 || texels.len() != width * height {
            return Err(Error::Dimension(format!(
                "{} texels for a {width}x{height} texture",
                texels.len()
            )));
        }
        Ok(Texture { width, height, texels })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let img = image::open(path)
            .map_err(|e| Error::Image {
                path: path.to_owned(),
                msg: e.to_string(),
            })?
            .to_rgb8();
        let (w, h) = img.dimensions();
        let texels = img
            .pixels()
            .map(|p| [p[0] as f32 / 255.0, p[1] as f32 / 255.0, p[2] as f32 / 255.0])
            .collect();
        Self::new(w as usize, h as usize, texels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn texel(&self, x: usize, y: usize) -> [f32; 3] {
        self.texels[y * self.width + x]
    }

    /// Bilinear lookup with clamp-to-edge. `uv = (0, 0)` is the bottom-left
    /// corner of the image; texel centers sit at half-integer positions.
    pub fn sample(&self, uv: &Vec2) -> Vec3 {
        let x = uv.x * self.width as f64 - 0.5;
        let y = (1.0 - uv.y) * self.height as f64 - 0.5;
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let cx = |v: f64| v.clamp(0.0, (self.width - 1) as f64) as usize;
        let cy = |v: f64| v.clamp(0.0, (self.height - 1) as f64) as usize;
        let (xa, xb) = (cx(x0), cx(x0 + 1.0));
        let (ya, yb) = (cy(y0), cy(y0 + 1.0));
        let get = |x: usize, y: usize| {
            let t = self.texel(x, y);
            Vec3::new(t[0] as f64, t[1] as f64, t[2] as f64)
        };
        let top = get(xa, ya) * (1.0 - fx) + get(xb, ya) * fx;
        let bottom = get(xa, yb) * (1.0 - fx) + get(xb, yb) * fx;
        top * (1.0 - fy) + bottom * fy
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bilinear_hits_texel_centers_exactly() {
        let t = Texture::new(
            2,
            2,
            vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 1.0, 1.0]],
        )
        .unwrap();
        // top-left texel is at uv (0.25, 0.75)
        assert_eq!(t.sample(&Vec2::new(0.25, 0.75)), Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(t.sample(&Vec2::new(0.25, 0.25)), Vec3::new(0.0, 0.0, 1.0));
        let mid = t.sample(&Vec2::new(0.5, 0.5));
        assert!((mid - Vec3::new(0.5, 0.5, 0.5)).norm() < 1e-12);
    }
}
