//! Procedural toy dataset: gradient backgrounds with a few soft-edged shapes.
//! Scenes are defined in continuous coordinates, so one scene renders
//! consistently at any resolution.

use std::path::Path;

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::images::rgb_to_tensor;
use crate::numerics::Tensor;
use crate::Result;

#[derive(Debug, Clone, Copy)]
enum Shape {
    Ellipse {
        cx: f64,
        cy: f64,
        rx: f64,
        ry: f64,
    },
    Rect {
        x0: f64,
        y0: f64,
        x1: f64,
        y1: f64,
    },
    Ring {
        cx: f64,
        cy: f64,
        r: f64,
        thickness: f64,
    },
}

#[derive(Debug, Clone)]
pub struct ToyScene {
    top: [f64; 3],
    bottom: [f64; 3],
    shapes: Vec<(Shape, [f64; 3])>,
}

fn color<R: Rng>(rng: &mut R) -> [f64; 3] {
    [rng.random(), rng.random(), rng.random()]
}

fn smoothstep(edge: f64, x: f64) -> f64 {
    // Coverage from a signed distance (positive inside), `edge` wide.
    (0.5 + x / edge).clamp(0.0, 1.0)
}

impl ToyScene {
    pub fn sample<R: Rng>(rng: &mut R) -> Self {
        let top = color(rng);
        let bottom = color(rng);
        let n = rng.random_range(1..=3);
        let shapes = (0..n)
            .map(|_| {
                let shape = match rng.random_range(0..3) {
                    0 => Shape::Ellipse {
                        cx: rng.random_range(0.2..0.8),
                        cy: rng.random_range(0.2..0.8),
                        rx: rng.random_range(0.08..0.3),
                        ry: rng.random_range(0.08..0.3),
                    },
                    1 => {
                        let (x0, y0) = (rng.random_range(0.05..0.6), rng.random_range(0.05..0.6));
                        Shape::Rect {
                            x0,
                            y0,
                            x1: x0 + rng.random_range(0.15..0.4),
                            y1: y0 + rng.random_range(0.15..0.4),
                        }
                    }
                    _ => Shape::Ring {
                        cx: rng.random_range(0.25..0.75),
                        cy: rng.random_range(0.25..0.75),
                        r: rng.random_range(0.12..0.3),
                        thickness: rng.random_range(0.03..0.08),
                    },
                };
                (shape, color(rng))
            })
            .collect();
        Self {
            top,
            bottom,
            shapes,
        }
    }

    /// Signed distance in scene units (positive inside).
    fn inside(shape: &Shape, x: f64, y: f64) -> f64 {
        match *shape {
            Shape::Ellipse { cx, cy, rx, ry } => {
                let d = (((x - cx) / rx).powi(2) + ((y - cy) / ry).powi(2)).sqrt();
                (1.0 - d) * rx.min(ry)
            }
            Shape::Rect { x0, y0, x1, y1 } => (x - x0).min(x1 - x).min(y - y0).min(y1 - y),
            Shape::Ring {
                cx,
                cy,
                r,
                thickness,
            } => {
                let d = ((x - cx).powi(2) + (y - cy).powi(2)).sqrt();
                thickness / 2.0 - (d - r).abs()
            }
        }
    }

    pub fn render(&self, resolution: usize) -> RgbImage {
        let res = resolution as f64;
        let edge = 1.5 / res;
        RgbImage::from_fn(resolution as u32, resolution as u32, |px, py| {
            let (x, y) = ((px as f64 + 0.5) / res, (py as f64 + 0.5) / res);
            let mut c = [0.0; 3];
            for k in 0..3 {
                c[k] = self.top[k] * (1.0 - y) + self.bottom[k] * y;
            }
            for (shape, col) in &self.shapes {
                let a = smoothstep(edge, Self::inside(shape, x, y));
                for k in 0..3 {
                    c[k] = c[k] * (1.0 - a) + col[k] * a;
                }
            }
            Rgb(c.map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8))
        })
    }
}

/// Scene `index` of the toy dataset with the given seed.
pub fn toy_scene(seed: u64, index: u64) -> ToyScene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    ToyScene::sample(&mut rng)
}

/// Toy images `start..start+count` as `[3, R, R]` tensors in `[-1, 1]`.
pub fn toy_images(seed: u64, start: u64, count: usize, resolution: usize) -> Vec<Tensor<f32>> {
    (0..count as u64)
        .map(|i| rgb_to_tensor(&toy_scene(seed, start + i).render(resolution), resolution))
        .collect()
}

/// Write `count` PNG files `toy_00000.png`, ... into `dir`.
pub fn write_toy_dataset(dir: &Path, count: usize, resolution: usize, seed: u64) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for i in 0..count {
        toy_scene(seed, i as u64)
            .render(resolution)
            .save(dir.join(format!("toy_{i:05}.png")))?;
    }
    Ok(())
}
