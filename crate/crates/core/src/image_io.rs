//! Grayscale rasters, annotation records and patch sampling.

use std::fmt;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// 8-bit grayscale raster stored row-major.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct GrayImage {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl fmt::Debug for GrayImage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GrayImage")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl GrayImage {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        let expected = width as usize * height as usize;
        if pixels.len() != expected {
            return Err(Error::InvalidImage(format!(
                "{width}x{height} image needs {expected} pixels, got {}",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// Constant image. Panics on zero dimensions.
    pub fn filled(width: u32, height: u32, value: u8) -> Self {
        Self::from_fn(width, height, |_, _| value)
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel. Panics on zero dimensions.
    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> u8) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        let mut pixels = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.height, self.width, |x, y| self.get(y, x))
    }

    pub fn flip_horizontal(&self) -> Self {
        Self::from_fn(self.width, self.height, |x, y| {
            self.get(self.width - 1 - x, y)
        })
    }

    pub fn flip_vertical(&self) -> Self {
        Self::from_fn(self.width, self.height, |x, y| {
            self.get(x, self.height - 1 - y)
        })
    }

    /// Quarter turn clockwise.
    pub fn rotate90(&self) -> Self {
        Self::from_fn(self.height, self.width, |x, y| {
            self.get(y, self.height - 1 - x)
        })
    }

    /// Photometric negative, `255 - v` per pixel.
    pub fn invert(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().map(|&v| 255 - v).collect(),
        }
    }

    /// The eight images obtained under the dihedral symmetry group of the square.
    pub fn dihedral_orbit(&self) -> [GrayImage; 8] {
        let r1 = self.rotate90();
        let r2 = r1.rotate90();
        let r3 = r2.rotate90();
        let t = self.transpose();
        [
            self.clone(),
            r1,
            r2,
            r3,
            t.clone(),
            t.rotate90(),
            self.flip_horizontal(),
            self.flip_vertical(),
        ]
    }
}

/// Luma transform with integer round-half-away-from-zero.
///
/// `299 r + 587 g + 114 b` is the luma sum scaled by 1000, so the rounding is
/// exact without touching floating point.
pub fn rgb_to_gray(r: u8, g: u8, b: u8) -> u8 {
    let scaled = 299 * r as u32 + 587 * g as u32 + 114 * b as u32;
    ((scaled + 500) / 1000).min(255) as u8
}

/// Axis-aligned pixel rectangle `[x0, x1) x [y0, y1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "[u32; 4]", into = "[u32; 4]")]
pub struct BBox {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl BBox {
    pub fn new(x0: u32, y0: u32, x1: u32, y1: u32) -> Result<Self> {
        if x0 >= x1 || y0 >= y1 {
            return Err(Error::InvalidBBox { x0, y0, x1, y1 });
        }
        Ok(Self { x0, y0, x1, y1 })
    }

    pub fn full(img: &GrayImage) -> Self {
        Self {
            x0: 0,
            y0: 0,
            x1: img.width,
            y1: img.height,
        }
    }

    pub fn width(&self) -> u32 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> u32 {
        self.y1 - self.y0
    }
}

impl TryFrom<[u32; 4]> for BBox {
    type Error = Error;

    fn try_from(v: [u32; 4]) -> Result<Self> {
        BBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BBox> for [u32; 4] {
    fn from(b: BBox) -> Self {
        [b.x0, b.y0, b.x1, b.y1]
    }
}

pub fn crop(img: &GrayImage, bbox: BBox) -> Result<GrayImage> {
    if bbox.x1 > img.width {
        return Err(Error::OutOfBounds {
            coordinate: "x1",
            value: bbox.x1,
            limit: img.width,
        });
    }
    if bbox.y1 > img.height {
        return Err(Error::OutOfBounds {
            coordinate: "y1",
            value: bbox.y1,
            limit: img.height,
        });
    }
    let (w, h) = (bbox.width(), bbox.height());
    let mut pixels = Vec::with_capacity(w as usize * h as usize);
    let stride = img.width as usize;
    for y in bbox.y0..bbox.y1 {
        let start = y as usize * stride + bbox.x0 as usize;
        pixels.extend_from_slice(&img.pixels[start..start + w as usize]);
    }
    GrayImage::new(w, h, pixels)
}

/// Top-left corners of `n` square patches drawn uniformly from the valid range.
/// Overlap is allowed.
pub fn sample_patch_positions(
    width: u32,
    height: u32,
    n: usize,
    size: u32,
    seed: u64,
) -> Result<Vec<(u32, u32)>> {
    if size == 0 || width < size || height < size {
        return Err(Error::TooSmall {
            width,
            height,
            size,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| {
            let x = rng.random_range(0..=width - size);
            let y = rng.random_range(0..=height - size);
            (x, y)
        })
        .collect())
}

pub fn sample_patches(img: &GrayImage, n: usize, size: u32, seed: u64) -> Result<Vec<GrayImage>> {
    sample_patch_positions(img.width, img.height, n, size, seed)?
        .into_iter()
        .map(|(x, y)| crop(img, BBox::new(x, y, x + size, y + size)?))
        .collect()
}

/// Per-annotation seed: the global seed mixed with a stable hash of the
/// annotation identity, so the result does not depend on processing order.
pub fn annotation_seed(global: u64, image_id: &str, bbox: BBox) -> u64 {
    let mut h = Sha256::new();
    h.update(global.to_le_bytes());
    h.update((image_id.len() as u64).to_le_bytes());
    h.update(image_id.as_bytes());
    for c in <[u32; 4]>::from(bbox) {
        h.update(c.to_le_bytes());
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// One line of the annotation manifest.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    #[serde(rename = "image")]
    pub image_id: String,
    pub bbox: BBox,
    pub label: String,
}

/// Parses a JSON Lines manifest. Blank lines are ignored; every other line
/// yields either a record or the error for that line (1-based numbering).
pub fn parse_manifest(text: &str) -> Vec<(usize, Result<AnnotationRecord>)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let line = i + 1;
            let rec = serde_json::from_str::<AnnotationRecord>(l)
                .map_err(|e| Error::Manifest {
                    line,
                    message: e.to_string(),
                })
                .and_then(|r| {
                    if r.label.is_empty() {
                        Err(Error::Manifest {
                            line,
                            message: "label must be non-empty".into(),
                        })
                    } else {
                        Ok(r)
                    }
                });
            (line, rec)
        })
        .collect()
}

/// Decodes binary PGM (P5, maxval 255) or any PNG. Color inputs go through
/// [`rgb_to_gray`].
pub fn decode_image(bytes: &[u8]) -> Result<GrayImage> {
    if bytes.starts_with(b"P5") {
        return decode_pgm(bytes);
    }
    let dynimg = image::load_from_memory(bytes).map_err(|e| Error::Decode(e.to_string()))?;
    let (w, h) = (dynimg.width(), dynimg.height());
    let pixels = match dynimg {
        image::DynamicImage::ImageLuma8(buf) => buf.into_raw(),
        other => other
            .to_rgb8()
            .pixels()
            .map(|p| rgb_to_gray(p[0], p[1], p[2]))
            .collect(),
    };
    GrayImage::new(w, h, pixels)
}

pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_image(&bytes)
}

fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    // Header: magic, width, height, maxval, separated by whitespace with
    // optional '#' comments, then exactly one whitespace byte.
    let mut pos = 2;
    let mut fields = [0u32; 3];
    for field in fields.iter_mut() {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&c| c != b'\n') {
                        pos += 1;
                    }
                }
                Some(c) if c.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err(Error::Pgm("truncated header".into())),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Pgm(format!("bad header field at byte {start}")))?;
    }
    let [w, h, maxval] = fields;
    if maxval != 255 {
        return Err(Error::Pgm(format!("unsupported maxval {maxval}")));
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::Pgm("missing whitespace after header".into()));
    }
    pos += 1;
    let n = w as usize * h as usize;
    let data = bytes
        .get(pos..pos + n)
        .ok_or_else(|| Error::Pgm(format!("expected {n} bytes of pixel data")))?;
    GrayImage::new(w, h, data.to_vec())
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

pub fn save_pgm(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&encode_pgm(img)).map_err(|e| Error::io(path, e))
}

/// PNG encoding, used when embedding rasters in figures.
pub fn encode_png(img: &GrayImage) -> Result<Vec<u8>> {
    let buf = image::GrayImage::from_raw(img.width, img.height, img.pixels.clone())
        .ok_or_else(|| Error::InvalidImage("buffer size mismatch".into()))?;
    let mut out = std::io::Cursor::new(Vec::new());
    buf.write_to(&mut out, image::ImageFormat::Png)
        .map_err(|e| Error::Decode(e.to_string()))?;
    Ok(out.into_inner())
}
