use std::path::{Path, PathBuf};

use image::imageops::FilterType;
use image::{Rgb, RgbImage};

use crate::numerics::Tensor;
use crate::{Error, Result};

/// Images of a directory, resized and mapped to `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct ImageSet {
    /// One `[3, R, R]` tensor per decoded file, in lexicographic filename order.
    pub images: Vec<Tensor<f32>>,
    pub paths: Vec<PathBuf>,
    /// Files that failed to decode.
    pub skipped: Vec<PathBuf>,
}

impl ImageSet {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// All images as one `[N, 3, R, R]` batch.
    pub fn stacked(&self) -> Result<Tensor<f32>> {
        Tensor::stack(&self.images)
    }
}

/// Decode at most `max_images` files of `dir` (sorted by file name), resizing
/// each bilinearly to `resolution × resolution`. Undecodable files are skipped
/// with a warning.
pub fn load_image_dataset(dir: &Path, resolution: usize, max_images: usize) -> Result<ImageSet> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::Dataset(format!("cannot list {}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    paths.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    if paths.is_empty() {
        return Err(Error::Dataset(format!(
            "{} contains no files",
            dir.display()
        )));
    }
    let mut set = ImageSet {
        images: Vec::new(),
        paths: Vec::new(),
        skipped: Vec::new(),
    };
    for path in paths {
        if set.images.len() >= max_images {
            break;
        }
        match image::open(&path) {
            Ok(img) => {
                set.images.push(rgb_to_tensor(&img.to_rgb8(), resolution));
                set.paths.push(path);
            }
            Err(e) => {
                log::warn!("skipping {}: {e}", path.display());
                set.skipped.push(path);
            }
        }
    }
    if set.images.is_empty() {
        return Err(Error::Dataset(format!(
            "no decodable images in {}",
            dir.display()
        )));
    }
    Ok(set)
}

/// Resize (bilinear) and map `[0, 255]` to `[-1, 1]`, channels first.
pub fn rgb_to_tensor(img: &RgbImage, resolution: usize) -> Tensor<f32> {
    let r = resolution as u32;
    let resized;
    let img = if img.dimensions() == (r, r) {
        img
    } else {
        resized = image::imageops::resize(img, r, r, FilterType::Triangle);
        &resized
    };
    let plane = resolution * resolution;
    let mut data = vec![0f32; 3 * plane];
    for (x, y, Rgb(px)) in img.enumerate_pixels() {
        let i = y as usize * resolution + x as usize;
        for c in 0..3 {
            data[c * plane + i] = px[c] as f32 / 127.5 - 1.0;
        }
    }
    Tensor::new(vec![3, resolution, resolution], data).expect("consistent shape")
}

/// `[-1, 1]` to `[0, 255]`, rounding half away from zero.
pub fn to_byte(v: f32) -> u8 {
    let scaled = (v.clamp(-1.0, 1.0) as f64 + 1.0) * 127.5;
    scaled.round() as u8
}
