//! Procedural stand-ins for two cloud textures.
//!
//! `sugar_like` scatters many small bright discs over dim noise;
//! `flowers_like` places a few wide, moderately bright blobs whose
//! interiors carry darker dimples.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image_io::{save_pgm, AnnotationRecord, BBox, GrayImage};

pub const SUGAR: &str = "sugar";
pub const FLOWERS: &str = "flowers";

fn noise_field(width: u32, height: u32, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..width as usize * height as usize)
        .map(|_| 30.0 + rng.random_range(0.0..20.0))
        .collect()
}

fn quantize(width: u32, height: u32, field: Vec<f64>) -> GrayImage {
    let pixels = field.into_iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect();
    GrayImage::new(width, height, pixels).expect("field has width * height samples")
}

pub fn sugar_like(width: u32, height: u32, seed: u64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut field = noise_field(width, height, &mut rng);
    let count = (width as usize * height as usize) / 50;
    for _ in 0..count {
        let cx = rng.random_range(0.0..width as f64);
        let cy = rng.random_range(0.0..height as f64);
        let r: f64 = rng.random_range(1.0..2.0);
        let value = rng.random_range(200.0..255.0);
        let (x0, x1) = ((cx - r).floor().max(0.0) as u32, ((cx + r).ceil() as u32).min(width - 1));
        let (y0, y1) = ((cy - r).floor().max(0.0) as u32, ((cy + r).ceil() as u32).min(height - 1));
        for y in y0..=y1 {
            for x in x0..=x1 {
                let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
                if dx * dx + dy * dy <= r * r {
                    field[(y * width + x) as usize] = value;
                }
            }
        }
    }
    quantize(width, height, field)
}

pub fn flowers_like(width: u32, height: u32, seed: u64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut field = noise_field(width, height, &mut rng);
    let area = width as f64 * height as f64;
    let count = ((area / 4000.0).round() as usize).max(2);
    for _ in 0..count {
        let cx = rng.random_range(0.0..width as f64);
        let cy = rng.random_range(0.0..height as f64);
        let radius: f64 = rng.random_range(10.0..15.0);
        let peak = rng.random_range(100.0..140.0);
        let dimples: Vec<(f64, f64, f64, f64)> = (0..rng.random_range(2..5))
            .map(|_| {
                let a = rng.random_range(0.0..std::f64::consts::TAU);
                let d = rng.random_range(0.0..radius * 0.5);
                (cx + d * a.cos(), cy + d * a.sin(), rng.random_range(2.5..4.0), rng.random_range(40.0..70.0))
            })
            .collect();
        for y in 0..height {
            for x in 0..width {
                let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
                let r2 = (px - cx).powi(2) + (py - cy).powi(2);
                if r2 >= radius * radius {
                    continue;
                }
                let mut v = 40.0 + peak * (1.0 - r2 / (radius * radius)).sqrt();
                for &(dx, dy, dr, depth) in &dimples {
                    let q2 = (px - dx).powi(2) + (py - dy).powi(2);
                    if q2 < dr * dr {
                        v -= depth * (1.0 - q2 / (dr * dr));
                    }
                }
                let i = (y * width + x) as usize;
                field[i] = field[i].max(v);
            }
        }
    }
    quantize(width, height, field)
}

/// Writes `per_class` images of each family as PGM files under `dir` plus a
/// `manifest.jsonl` whose boxes cover each whole image. Returns the
/// manifest path.
pub fn write_dataset(dir: &Path, per_class: usize, size: u32, seed: u64) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut lines = String::new();
    for i in 0..per_class {
        for (label, make) in [(SUGAR, sugar_like as fn(u32, u32, u64) -> GrayImage), (FLOWERS, flowers_like)] {
            let name = format!("{label}_{i:04}.pgm");
            let img_seed = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ ((i as u64) << 1) ^ (label == FLOWERS) as u64;
            let img = make(size, size, img_seed);
            save_pgm(&img, dir.join(&name))?;
            let rec = AnnotationRecord {
                image_id: name,
                bbox: BBox::full(&img),
                label: label.to_string(),
            };
            lines.push_str(&serde_json::to_string(&rec)?);
            lines.push('\n');
        }
    }
    let path = dir.join("manifest.jsonl");
    std::fs::write(&path, lines).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
