use std::path::Path;

use image::{Rgb, RgbImage};

use super::images::to_byte;
use crate::numerics::Tensor;
use crate::{Error, Result};

/// Tile `[n, 3, R, R]` images row-major, `cols` per row, into one raster.
/// Unfilled cells of the last row stay black.
pub fn render_grid(images: &Tensor<f32>, cols: usize) -> Result<RgbImage> {
    let &[n, 3, h, w] = images.shape() else {
        return Err(Error::shape(format!(
            "grid expects [n, 3, H, W], got {:?}",
            images.shape()
        )));
    };
    let cols = cols.clamp(1, n);
    let rows = n.div_ceil(cols);
    let (gw, gh) = (u32::try_from(cols * w), u32::try_from(rows * h));
    let (Ok(gw), Ok(gh)) = (gw, gh) else {
        return Err(Error::Invalid("grid too large".into()));
    };
    let mut out = RgbImage::new(gw, gh);
    let plane = h * w;
    for i in 0..n {
        let img = &images.data()[i * 3 * plane..(i + 1) * 3 * plane];
        let (ox, oy) = ((i % cols) * w, (i / cols) * h);
        for y in 0..h {
            for x in 0..w {
                let px = [0, 1, 2].map(|c| to_byte(img[c * plane + y * w + x]));
                out.put_pixel((ox + x) as u32, (oy + y) as u32, Rgb(px));
            }
        }
    }
    Ok(out)
}

/// [`render_grid`] saved to `path` (format from the extension, PNG recommended).
pub fn emit_grid(images: &Tensor<f32>, cols: usize, path: &Path) -> Result<()> {
    let grid = render_grid(images, cols)?;
    grid.save(path)?;
    Ok(())
}
