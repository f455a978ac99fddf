//! Graphs the MRF is defined over: pixel/voxel lattices and region graphs.

use crate::color::LabImage;
use crate::error::{Error, Result};
use crate::shape::Shape;

/// Lattice neighborhood system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Connectivity {
    Four,
    Eight,
    Six,
    Eighteen,
    TwentySix,
}

impl Connectivity {
    pub fn from_count(n: u32) -> Result<Self> {
        Ok(match n {
            4 => Connectivity::Four,
            8 => Connectivity::Eight,
            6 => Connectivity::Six,
            18 => Connectivity::Eighteen,
            26 => Connectivity::TwentySix,
            _ => {
                return Err(Error::Config(format!(
                    "connectivity must be one of 4, 8, 6, 18, 26; got {n}"
                )))
            }
        })
    }

    pub fn count(self) -> u32 {
        match self {
            Connectivity::Four => 4,
            Connectivity::Eight => 8,
            Connectivity::Six => 6,
            Connectivity::Eighteen => 18,
            Connectivity::TwentySix => 26,
        }
    }

    pub fn is_3d(self) -> bool {
        matches!(
            self,
            Connectivity::Six | Connectivity::Eighteen | Connectivity::TwentySix
        )
    }

    /// Default stencil for a lattice: 4 in 2D, 6 in 3D.
    pub fn default_for(shape: Shape) -> Self {
        if shape.is_volume() {
            Connectivity::Six
        } else {
            Connectivity::Four
        }
    }

    /// Maximum L1 length of a stencil offset (all offsets have Chebyshev length 1).
    fn max_l1(self) -> i64 {
        match self {
            Connectivity::Four | Connectivity::Six => 1,
            Connectivity::Eight | Connectivity::Eighteen => 2,
            Connectivity::TwentySix => 3,
        }
    }

    /// Offsets `(dx, dy, dz)` that point forward in index order, so every
    /// undirected neighbor pair is produced exactly once as `p < q`.
    pub fn forward_offsets(self) -> Vec<(i64, i64, i64)> {
        let dz_range: &[i64] = if self.is_3d() { &[-1, 0, 1] } else { &[0] };
        let mut out = Vec::new();
        for &dz in dz_range {
            for dy in -1..=1i64 {
                for dx in -1..=1i64 {
                    let l1 = dx.abs() + dy.abs() + dz.abs();
                    if l1 == 0 || l1 > self.max_l1() {
                        continue;
                    }
                    if (dz, dy, dx) > (0, 0, 0) {
                        out.push((dx, dy, dz));
                    }
                }
            }
        }
        out
    }
}

/// Nodes with features and sizes, undirected weighted edges.
///
/// Level 0 nodes are pixels; at higher levels each node is a region of base
/// pixels, described by `base_map`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionGraph {
    pub(crate) dim: usize,
    pub(crate) features: Vec<f64>,
    pub(crate) sizes: Vec<u64>,
    pub(crate) edges: Vec<(u32, u32)>,
    pub(crate) weights: Vec<f64>,
    pub(crate) shape: Shape,
    /// Base pixel to node; `None` for lattices where it is the identity.
    pub(crate) base_map: Option<Vec<u32>>,
}

impl RegionGraph {
    /// Builds a graph over explicit nodes. Edges are normalized to `p < q`,
    /// deduplicated and sorted; self-loops are rejected.
    pub fn new(
        dim: usize,
        features: Vec<f64>,
        sizes: Vec<u64>,
        edges: Vec<(u32, u32)>,
        shape: Shape,
        base_map: Option<Vec<u32>>,
    ) -> Result<Self> {
        let n = sizes.len();
        if dim == 0 || features.len() != n * dim {
            return Err(Error::dims(
                format!("{} feature values", n * dim),
                features.len(),
            ));
        }
        let mut edges: Vec<(u32, u32)> = edges
            .into_iter()
            .map(|(p, q)| (p.min(q), p.max(q)))
            .collect();
        if let Some(&(p, q)) = edges.iter().find(|(p, q)| p == q || *q as usize >= n) {
            return Err(Error::Config(format!("invalid edge ({p}, {q})")));
        }
        edges.sort_unstable();
        edges.dedup();
        match &base_map {
            Some(m) => {
                if m.len() != shape.len() {
                    return Err(Error::dims(shape.len(), m.len()));
                }
                if m.iter().any(|&v| v as usize >= n) {
                    return Err(Error::Config("base map refers to missing node".into()));
                }
            }
            None => {
                if n != shape.len() {
                    return Err(Error::dims(shape.len(), n));
                }
            }
        }
        let weights = vec![1.0; edges.len()];
        Ok(RegionGraph {
            dim,
            features,
            sizes,
            edges,
            weights,
            shape,
            base_map,
        })
    }

    pub fn node_count(&self) -> usize {
        self.sizes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn feature(&self, p: usize) -> &[f64] {
        &self.features[p * self.dim..(p + 1) * self.dim]
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn sizes(&self) -> &[u64] {
        &self.sizes
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    /// Total base pixel count `S`.
    pub fn base_len(&self) -> usize {
        self.shape.len()
    }

    /// Node owning each base pixel.
    pub fn base_node(&self, pixel: usize) -> usize {
        match &self.base_map {
            Some(m) => m[pixel] as usize,
            None => pixel,
        }
    }

    /// Compressed adjacency: `(offsets, neighbors)` with neighbors ascending.
    pub fn adjacency(&self) -> (Vec<usize>, Vec<u32>) {
        let n = self.node_count();
        let mut deg = vec![0usize; n + 1];
        for &(p, q) in &self.edges {
            deg[p as usize + 1] += 1;
            deg[q as usize + 1] += 1;
        }
        for i in 0..n {
            deg[i + 1] += deg[i];
        }
        let mut fill = deg.clone();
        let mut nbrs = vec![0u32; deg[n]];
        for &(p, q) in &self.edges {
            nbrs[fill[p as usize]] = q;
            fill[p as usize] += 1;
            nbrs[fill[q as usize]] = p;
            fill[q as usize] += 1;
        }
        for i in 0..n {
            nbrs[deg[i]..deg[i + 1]].sort_unstable();
        }
        (deg, nbrs)
    }

    /// Mean over edges of `||x_p - x_q||^2`.
    pub fn mean_sq_gap(&self) -> Result<f64> {
        if self.edges.is_empty() {
            return Err(Error::NoEdges);
        }
        let total: f64 = self
            .edges
            .iter()
            .map(|&(p, q)| sq_gap(self, p as usize, q as usize))
            .sum();
        Ok(total / self.edges.len() as f64)
    }
}

#[inline]
fn sq_gap(g: &RegionGraph, p: usize, q: usize) -> f64 {
    crate::quantize::sq_dist(g.feature(p), g.feature(q))
}

/// Lattice edges `(p, q)` with `p < q`.
pub fn lattice_edges(shape: Shape, conn: Connectivity) -> Vec<(u32, u32)> {
    let offsets = conn.forward_offsets();
    let (w, h, d) = (
        shape.width as i64,
        shape.height as i64,
        shape.depth as i64,
    );
    let mut edges = Vec::with_capacity(shape.len() * offsets.len());
    for z in 0..d {
        for y in 0..h {
            for x in 0..w {
                let p = shape.index(x as usize, y as usize, z as usize) as u32;
                for &(dx, dy, dz) in &offsets {
                    let (nx, ny, nz) = (x + dx, y + dy, z + dz);
                    if nx < 0 || ny < 0 || nz < 0 || nx >= w || ny >= h || nz >= d {
                        continue;
                    }
                    let q = shape.index(nx as usize, ny as usize, nz as usize) as u32;
                    edges.push((p, q));
                }
            }
        }
    }
    edges.sort_unstable();
    edges
}

fn lattice(img: &LabImage, conn: Connectivity) -> RegionGraph {
    let shape = img.shape();
    let edges = lattice_edges(shape, conn);
    RegionGraph {
        dim: 3,
        features: img.flat_features(),
        sizes: vec![1; shape.len()],
        weights: vec![1.0; edges.len()],
        edges,
        shape,
        base_map: None,
    }
}

/// One node per pixel, lattice edges for a 4- or 8-neighborhood.
pub fn lattice_2d(img: &LabImage, conn: Connectivity) -> Result<RegionGraph> {
    if conn.is_3d() {
        return Err(Error::Config(format!(
            "connectivity {} is a 3D stencil",
            conn.count()
        )));
    }
    if img.shape().is_volume() {
        return Err(Error::Config("lattice_2d on a volume".into()));
    }
    Ok(lattice(img, conn))
}

/// One node per voxel, lattice edges for a 6-, 18- or 26-neighborhood.
pub fn lattice_3d(vol: &LabImage, conn: Connectivity) -> Result<RegionGraph> {
    if !conn.is_3d() {
        return Err(Error::Config(format!(
            "connectivity {} is a 2D stencil",
            conn.count()
        )));
    }
    Ok(lattice(vol, conn))
}

/// Lattice for either kind of input, picking the matching builder.
pub fn lattice_for(img: &LabImage, conn: Connectivity) -> Result<RegionGraph> {
    if conn.is_3d() {
        lattice_3d(img, conn)
    } else {
        lattice_2d(img, conn)
    }
}

/// Sets `w_pq = exp(-gamma ||x_p - x_q||^2)` on every edge.
pub fn compute_weights(g: &mut RegionGraph, gamma: f64) -> Result<()> {
    if !gamma.is_finite() || gamma < 0.0 {
        return Err(Error::NegativeGamma(gamma));
    }
    let weights: Vec<f64> = g
        .edges
        .iter()
        .map(|&(p, q)| (-gamma * sq_gap(g, p as usize, q as usize)).exp())
        .collect();
    g.weights = weights;
    Ok(())
}

/// Contrast-adaptive `gamma = 1 / (2 * mean ||x_p - x_q||^2)`, or 0 for a
/// contrast-free graph.
pub fn auto_gamma(g: &RegionGraph) -> Result<f64> {
    let mean = g.mean_sq_gap()?;
    Ok(if mean > 0.0 { 1.0 / (2.0 * mean) } else { 0.0 })
}
