#![allow(dead_code)]

use hpcs::imgio::LabelMap;
use hpcs::{RgbImage, Shape};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Natural-looking synthetic scene: Voronoi cells with their own color and
/// linear shading, plus per-pixel noise. Returns the image and the cell map.
pub fn scene(w: usize, h: usize, cells: usize, noise: f64, seed: u64) -> (RgbImage, LabelMap) {
    let mut r = rng(seed);
    struct Cell {
        x: f64,
        y: f64,
        color: [f64; 3],
        grad: [f64; 2],
    }
    let sites: Vec<Cell> = (0..cells)
        .map(|_| Cell {
            x: r.random_range(0.0..w as f64),
            y: r.random_range(0.0..h as f64),
            color: [r.random_range(20.0..235.0), r.random_range(20.0..235.0), r.random_range(20.0..235.0)],
            grad: [r.random_range(-0.4..0.4), r.random_range(-0.4..0.4)],
        })
        .collect();
    let mut ids = Vec::with_capacity(w * h);
    let mut data = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let (fx, fy) = (x as f64, y as f64);
            let (best, c) = sites
                .iter()
                .enumerate()
                .min_by(|a, b| {
                    let da = (a.1.x - fx).powi(2) + (a.1.y - fy).powi(2);
                    let db = (b.1.x - fx).powi(2) + (b.1.y - fy).powi(2);
                    da.total_cmp(&db)
                })
                .unwrap();
            let shade = c.grad[0] * (fx - c.x) + c.grad[1] * (fy - c.y);
            let px = c.color.map(|v| {
                let n = if noise > 0.0 { r.random_range(-noise..noise) } else { 0.0 };
                (v + shade + n).round().clamp(0.0, 255.0) as u8
            });
            ids.push(best as u32);
            data.push(px);
        }
    }
    (
        RgbImage::new(Shape::new_2d(w, h), data).unwrap(),
        LabelMap::new(w, h, ids).unwrap(),
    )
}

pub fn random_image(w: usize, h: usize, seed: u64) -> RgbImage {
    let mut r = rng(seed);
    let data = (0..w * h).map(|_| [r.random(), r.random(), r.random()]).collect();
    RgbImage::new(Shape::new_2d(w, h), data).unwrap()
}

/// Regular grid of `bw x bh` blocks, a stand-in for a foreign superpixel map.
pub fn block_map(w: usize, h: usize, bw: usize, bh: usize) -> LabelMap {
    let cols = w.div_ceil(bw);
    LabelMap::new(w, h, (0..w * h).map(|i| ((i % w) / bw + cols * ((i / w) / bh)) as u32).collect()).unwrap()
}

/// 4-connected components of an id map, numbered by first pixel.
pub fn flood_components(w: usize, h: usize, ids: &[u32]) -> Vec<u32> {
    let mut comp = vec![u32::MAX; w * h];
    let mut next = 0;
    let mut stack = Vec::new();
    for s in 0..w * h {
        if comp[s] != u32::MAX {
            continue;
        }
        comp[s] = next;
        stack.push(s);
        while let Some(u) = stack.pop() {
            let (x, y) = (u % w, u / w);
            let mut push = |v: usize| {
                if comp[v] == u32::MAX && ids[v] == ids[s] {
                    comp[v] = next;
                    stack.push(v);
                }
            };
            if x > 0 {
                push(u - 1);
            }
            if x + 1 < w {
                push(u + 1);
            }
            if y > 0 {
                push(u - w);
            }
            if y + 1 < h {
                push(u + w);
            }
        }
        next += 1;
    }
    comp
}

/// Renumbers ids by first appearance.
pub fn canonical(ids: &[u32]) -> Vec<u32> {
    let mut seen = std::collections::HashMap::new();
    ids.iter()
        .map(|&v| {
            let n = seen.len() as u32;
            *seen.entry(v).or_insert(n)
        })
        .collect()
}
