//! sRGB to normalized CIE L\*a\*b\* (D65).
//!
//! Normalization is a fixed per-channel affine map: `L/100` and `(v + 128)/255`
//! for `a*` and `b*`, clamped to `[0, 1]`.

use crate::error::{Error, Result};
use crate::par::{self, Parallelism};
use crate::shape::Shape;

/// 8-bit RGB image or volume, row-major then slice-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    shape: Shape,
    data: Vec<[u8; 3]>,
}

impl RgbImage {
    pub fn new(shape: Shape, data: Vec<[u8; 3]>) -> Result<Self> {
        if shape.is_empty() {
            return Err(Error::Config("image must have at least one pixel".into()));
        }
        if shape.len() != data.len() {
            return Err(Error::dims(
                format!("{} pixels for {shape}", shape.len()),
                format!("{} pixels", data.len()),
            ));
        }
        Ok(RgbImage { shape, data })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.data
    }

    pub fn into_pixels(self) -> Vec<[u8; 3]> {
        self.data
    }
}

/// Per-site feature vectors `[L, a, b]`, each component in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabImage {
    shape: Shape,
    data: Vec<[f64; 3]>,
}

impl LabImage {
    /// Wraps precomputed normalized features. Components are clamped to `[0, 1]`.
    pub fn new(shape: Shape, mut data: Vec<[f64; 3]>) -> Result<Self> {
        if shape.is_empty() {
            return Err(Error::Config("image must have at least one pixel".into()));
        }
        if shape.len() != data.len() {
            return Err(Error::dims(
                format!("{} pixels for {shape}", shape.len()),
                format!("{} pixels", data.len()),
            ));
        }
        for v in data.iter_mut().flatten() {
            *v = v.clamp(0.0, 1.0);
        }
        Ok(LabImage { shape, data })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn pixels(&self) -> &[[f64; 3]] {
        &self.data
    }

    /// Flattened `[L0, a0, b0, L1, ...]` features.
    pub fn flat_features(&self) -> Vec<f64> {
        self.data.iter().flatten().copied().collect()
    }
}

// sRGB primaries to XYZ, D65 reference white.
const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.412_456_4, 0.357_576_1, 0.180_437_5],
    [0.212_672_9, 0.715_152_2, 0.072_175_0],
    [0.019_333_9, 0.119_192_0, 0.950_304_1],
];
const WHITE_D65: [f64; 3] = [0.950_47, 1.0, 1.088_83];

const EPSILON: f64 = 216.0 / 24389.0;
const KAPPA: f64 = 24389.0 / 27.0;

fn srgb_to_linear(c: u8) -> f64 {
    let c = c as f64 / 255.0;
    if c <= 0.040_45 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn lab_f(t: f64) -> f64 {
    if t > EPSILON {
        t.cbrt()
    } else {
        (KAPPA * t + 16.0) / 116.0
    }
}

/// Unnormalized CIE L\*a\*b\* of an sRGB triple.
pub fn srgb_to_lab(rgb: [u8; 3]) -> [f64; 3] {
    let lin = rgb.map(srgb_to_linear);
    let xyz: [f64; 3] = std::array::from_fn(|r| {
        RGB_TO_XYZ[r][0] * lin[0] + RGB_TO_XYZ[r][1] * lin[1] + RGB_TO_XYZ[r][2] * lin[2]
    });
    let fx = lab_f(xyz[0] / WHITE_D65[0]);
    let fy = lab_f(xyz[1] / WHITE_D65[1]);
    let fz = lab_f(xyz[2] / WHITE_D65[2]);
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

/// Affine rescale of L\*a\*b\* into `[0, 1]^3`.
pub fn normalize_lab(lab: [f64; 3]) -> [f64; 3] {
    [
        (lab[0] / 100.0).clamp(0.0, 1.0),
        ((lab[1] + 128.0) / 255.0).clamp(0.0, 1.0),
        ((lab[2] + 128.0) / 255.0).clamp(0.0, 1.0),
    ]
}

pub fn rgb_to_lab_normalized(img: &RgbImage) -> LabImage {
    rgb_to_lab_normalized_with(img, Parallelism::default())
}

pub fn rgb_to_lab_normalized_with(img: &RgbImage, mode: Parallelism) -> LabImage {
    let src = img.pixels();
    let mut out = vec![[0.0; 3]; src.len()];
    const CHUNK: usize = 4096;
    par::for_each_chunk_mut(mode, &mut out, CHUNK, |ci, dst| {
        let base = ci * CHUNK;
        for (j, v) in dst.iter_mut().enumerate() {
            *v = normalize_lab(srgb_to_lab(src[base + j]));
        }
    });
    LabImage {
        shape: img.shape(),
        data: out,
    }
}
