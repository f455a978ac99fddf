//! Feature palette via sampled k-means with k-means++ seeding.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::par::{self, Parallelism};

/// Lloyd iteration cap.
pub const MAX_ITERATIONS: usize = 300;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizeConfig {
    pub k: usize,
    /// Size of the training sample drawn without replacement.
    pub samples: usize,
    pub restarts: usize,
    pub seed: u64,
    pub parallelism: Parallelism,
}

impl Default for QuantizeConfig {
    fn default() -> Self {
        QuantizeConfig {
            k: 16,
            samples: 10_000,
            restarts: 10,
            seed: 0,
            parallelism: Parallelism::default(),
        }
    }
}

impl QuantizeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if self.samples < self.k {
            return Err(Error::Config(format!(
                "samples ({}) must be at least k ({})",
                self.samples, self.k
            )));
        }
        if self.restarts == 0 {
            return Err(Error::Config("restarts must be at least 1".into()));
        }
        Ok(())
    }
}

/// The quantized features: `K` centers of dimension `dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Palette {
    dim: usize,
    centers: Vec<f64>,
    inertia: f64,
    requested_k: usize,
    restart_inertias: Vec<f64>,
}

impl Palette {
    /// A palette from explicit centers (flattened, `dim` values per center).
    pub fn from_centers(dim: usize, centers: Vec<f64>) -> Result<Self> {
        if dim == 0 || centers.is_empty() || !centers.len().is_multiple_of(dim) {
            return Err(Error::Config(format!(
                "{} center values do not form centers of dimension {dim}",
                centers.len()
            )));
        }
        if centers.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("palette centers must be finite".into()));
        }
        let k = centers.len() / dim;
        Ok(Palette {
            dim,
            centers,
            inertia: 0.0,
            requested_k: k,
            restart_inertias: Vec::new(),
        })
    }

    pub fn k(&self) -> usize {
        self.centers.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn center(&self, i: usize) -> &[f64] {
        &self.centers[i * self.dim..(i + 1) * self.dim]
    }

    pub fn centers(&self) -> impl Iterator<Item = &[f64]> {
        self.centers.chunks_exact(self.dim)
    }

    /// Sum of squared distances of the training samples to their nearest center.
    pub fn inertia(&self) -> f64 {
        self.inertia
    }

    /// The `k` asked for; larger than [`Palette::k`] when the data had fewer
    /// distinct features.
    pub fn requested_k(&self) -> usize {
        self.requested_k
    }

    /// Final inertia of every restart, in restart order.
    pub fn restart_inertias(&self) -> &[f64] {
        &self.restart_inertias
    }

    /// Index of the closest center in squared Euclidean distance; ties go to
    /// the lowest index.
    pub fn nearest(&self, x: &[f64]) -> usize {
        nearest(&self.centers, self.dim, x).0
    }

    /// L1 distance between two centers.
    pub fn l1(&self, a: usize, b: usize) -> f64 {
        self.center(a)
            .iter()
            .zip(self.center(b))
            .map(|(x, y)| (x - y).abs())
            .sum()
    }
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(centers: &[f64], dim: usize, x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centers.chunks_exact(dim).enumerate() {
        let d = sq_dist(c, x);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

pub fn nearest_center(palette: &Palette, x: &[f64]) -> usize {
    palette.nearest(x)
}

/// Fits a palette to `features` (flattened, `dim` values per feature).
///
/// One sample of `cfg.samples` features is drawn without replacement (or all
/// features when there are fewer), then k-means is run `cfg.restarts` times
/// from independent k-means++ seedings and the run with the lowest inertia is
/// kept. `k` is lowered to the number of distinct sampled features if needed.
pub fn fit_palette(features: &[f64], dim: usize, cfg: &QuantizeConfig) -> Result<Palette> {
    cfg.validate()?;
    if dim == 0 || !features.len().is_multiple_of(dim) {
        return Err(Error::Config(format!(
            "{} feature values do not form vectors of dimension {dim}",
            features.len()
        )));
    }
    let n = features.len() / dim;
    if n == 0 {
        return Err(Error::NoFeatures);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let sample: Vec<f64> = if n <= cfg.samples {
        features.to_vec()
    } else {
        let mut idx = index::sample(&mut rng, n, cfg.samples).into_vec();
        idx.sort_unstable();
        idx.iter()
            .flat_map(|&i| features[i * dim..(i + 1) * dim].iter().copied())
            .collect()
    };

    let k = cfg.k.min(count_distinct(&sample, dim));

    let runs = par::map_range(cfg.parallelism, cfg.restarts, |r| {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(r as u64 + 1);
        let mut centers = kmeans_plus_plus(&sample, dim, k, &mut rng);
        let inertia = lloyd(&sample, dim, &mut centers, MAX_ITERATIONS);
        (centers, inertia)
    });

    let restart_inertias: Vec<f64> = runs.iter().map(|r| r.1).collect();
    let best = restart_inertias
        .iter()
        .enumerate()
        .fold(0, |b, (i, &v)| if v < restart_inertias[b] { i } else { b });
    let (mut centers, inertia) = runs.into_iter().nth(best).expect("at least one restart");
    for v in centers.iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }

    Ok(Palette {
        dim,
        centers,
        inertia,
        requested_k: cfg.k,
        restart_inertias,
    })
}

fn count_distinct(sample: &[f64], dim: usize) -> usize {
    let mut rows: Vec<&[f64]> = sample.chunks_exact(dim).collect();
    let cmp = |a: &&[f64], b: &&[f64]| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    };
    rows.sort_unstable_by(cmp);
    rows.dedup_by(|a, b| cmp(&&**a, &&**b).is_eq());
    rows.len()
}

fn kmeans_plus_plus(sample: &[f64], dim: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = sample.len() / dim;
    let row = |i: usize| &sample[i * dim..(i + 1) * dim];
    let mut centers = Vec::with_capacity(k * dim);
    centers.extend_from_slice(row(rng.random_range(0..n)));

    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(row(i), &centers[..dim])).collect();
    while centers.len() < k * dim {
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            break;
        }
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = None;
        for (i, &w) in d2.iter().enumerate() {
            if w > 0.0 {
                pick = Some(i);
                acc += w;
                if acc > target {
                    break;
                }
            }
        }
        let pick = pick.expect("positive total weight");
        let c = row(pick).to_vec();
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(row(i), &c));
        }
        centers.extend_from_slice(&c);
    }
    centers
}

/// Lloyd iterations until no assignment changes. Returns the inertia.
fn lloyd(sample: &[f64], dim: usize, centers: &mut [f64], max_iter: usize) -> f64 {
    let n = sample.len() / dim;
    let k = centers.len() / dim;
    let row = |i: usize| &sample[i * dim..(i + 1) * dim];
    let mut assign = vec![usize::MAX; n];
    let mut dist = vec![0.0; n];
    let mut sums = vec![0.0; k * dim];
    let mut counts = vec![0usize; k];

    let assign_all = |centers: &[f64], assign: &mut [usize], dist: &mut [f64]| {
        let mut changed = 0;
        for i in 0..n {
            let (c, d) = nearest(centers, dim, row(i));
            if assign[i] != c {
                assign[i] = c;
                changed += 1;
            }
            dist[i] = d;
        }
        changed
    };

    let mut converged = false;
    for _ in 0..max_iter {
        if assign_all(centers, &mut assign, &mut dist) == 0 {
            converged = true;
            break;
        }
        sums.iter_mut().for_each(|s| *s = 0.0);
        counts.iter_mut().for_each(|c| *c = 0);
        for (i, &c) in assign.iter().enumerate() {
            counts[c] += 1;
            for (s, v) in sums[c * dim..(c + 1) * dim].iter_mut().zip(row(i)) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for j in 0..dim {
                    centers[c * dim + j] = sums[c * dim + j] / counts[c] as f64;
                }
            }
        }
        for i in 0..n {
            dist[i] = sq_dist(row(i), &centers[assign[i] * dim..(assign[i] + 1) * dim]);
        }
        for c in 0..k {
            if counts[c] == 0 {
                // Re-seed at the sample farthest from its own center.
                let far = (0..n).fold(0, |b, i| if dist[i] > dist[b] { i } else { b });
                centers[c * dim..(c + 1) * dim].copy_from_slice(row(far));
                dist[far] = 0.0;
                assign[far] = usize::MAX;
            }
        }
    }
    if !converged {
        assign_all(centers, &mut assign, &mut dist);
    }
    dist.iter().sum()
}
