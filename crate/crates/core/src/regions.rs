//! Split & merge: size-bounded connected components of a labeling, the
//! region adjacency graph over them, and greedy merging of small regions.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeSet, BinaryHeap, VecDeque};

use crate::error::{Error, Result};
use crate::gridgraph::RegionGraph;
use crate::mrf::Labeling;
use crate::quantize::Palette;
use crate::shape::Shape;

const UNSET: u32 = u32::MAX;

/// Region size limits in base pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SizeBounds {
    pub n_target: Option<usize>,
    /// Regions smaller than this are merged.
    pub s_min: f64,
    /// Components are closed once they reach this size.
    pub s_max: f64,
}

impl SizeBounds {
    /// `s = S / N`, `s_min = s / 5`, `s_max = 2 s` (capped at `S`).
    pub fn from_target(n: usize, total: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("target region count must be at least 1".into()));
        }
        if total == 0 {
            return Err(Error::Config("empty image".into()));
        }
        let s = total as f64 / n as f64;
        Ok(SizeBounds {
            n_target: Some(n),
            s_min: s / 5.0,
            s_max: (2.0 * s).min(total as f64),
        })
    }

    /// `s_max = S`, `s_min = 0`: plain connected components.
    pub fn unconstrained(total: usize) -> Self {
        SizeBounds {
            n_target: None,
            s_min: 0.0,
            s_max: total as f64,
        }
    }

    pub fn explicit(s_min: f64, s_max: f64, total: usize) -> Result<Self> {
        let b = SizeBounds {
            n_target: None,
            s_min,
            s_max,
        };
        b.validate(total)?;
        Ok(b)
    }

    pub fn validate(&self, total: usize) -> Result<()> {
        if !(self.s_min >= 0.0 && self.s_min < self.s_max && self.s_max <= total as f64) {
            return Err(Error::Config(format!(
                "size bounds need 0 <= s_min < s_max <= S; got s_min={}, s_max={}, S={total}",
                self.s_min, self.s_max
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    /// Palette index shared by the region's nodes.
    pub label: u32,
    /// Base pixel count.
    pub size: u64,
    /// Mean feature over member base pixels.
    pub mean: Vec<f64>,
}

/// Region adjacency graph plus the base pixel partition it describes.
#[derive(Debug, Clone, PartialEq)]
pub struct Rag {
    pub(crate) shape: Shape,
    pub(crate) dim: usize,
    pub(crate) regions: Vec<Region>,
    pub(crate) adjacency: Vec<(u32, u32)>,
    pub(crate) pixel_map: Vec<u32>,
    /// Node of the graph this Rag was built from, to region.
    pub(crate) node_map: Vec<u32>,
}

impl Rag {
    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn region_count(&self) -> usize {
        self.regions.len()
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    /// Sorted `(p, q)` pairs with `p < q`.
    pub fn adjacency(&self) -> &[(u32, u32)] {
        &self.adjacency
    }

    /// Region id of every base pixel.
    pub fn pixel_map(&self) -> &[u32] {
        &self.pixel_map
    }

    /// Region id of every node of the graph this Rag was extracted from.
    pub fn node_map(&self) -> &[u32] {
        &self.node_map
    }

    pub fn sizes(&self) -> impl Iterator<Item = u64> + '_ {
        self.regions.iter().map(|r| r.size)
    }

    /// Checks the partition, size, mean and adjacency bookkeeping.
    pub fn check_invariants(&self, features: Option<&[f64]>) -> Result<()> {
        let k = self.regions.len();
        if self.pixel_map.len() != self.shape.len() {
            return Err(Error::Invariant("pixel map does not cover the image".into()));
        }
        let mut counts = vec![0u64; k];
        for &r in &self.pixel_map {
            let r = r as usize;
            if r >= k {
                return Err(Error::Invariant(format!("pixel maps to missing region {r}")));
            }
            counts[r] += 1;
        }
        for (i, (reg, c)) in self.regions.iter().zip(&counts).enumerate() {
            if reg.size != *c || *c == 0 {
                return Err(Error::Invariant(format!(
                    "region {i} records size {} but owns {c} pixels",
                    reg.size
                )));
            }
        }
        if self.adjacency.iter().any(|&(p, q)| p >= q || q as usize >= k)
            || self.adjacency.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::Invariant("malformed adjacency".into()));
        }
        if let Some(f) = features {
            let d = self.dim;
            let mut sums = vec![0.0; k * d];
            for (px, &r) in self.pixel_map.iter().enumerate() {
                for j in 0..d {
                    sums[r as usize * d + j] += f[px * d + j];
                }
            }
            for (i, reg) in self.regions.iter().enumerate() {
                for j in 0..d {
                    let m = sums[i * d + j] / reg.size as f64;
                    if (m - reg.mean[j]).abs() > 1e-9 {
                        return Err(Error::Invariant(format!("region {i} mean is stale")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Builds a Rag from a node partition of `g`.
    pub(crate) fn from_node_partition(g: &RegionGraph, node_region: Vec<u32>, labels: Vec<u32>) -> Rag {
        let k = labels.len();
        let d = g.dim();
        let mut sizes = vec![0u64; k];
        let mut sums = vec![0.0; k * d];
        for (p, &r) in node_region.iter().enumerate() {
            let r = r as usize;
            let s = g.sizes()[p];
            sizes[r] += s;
            for (acc, v) in sums[r * d..(r + 1) * d].iter_mut().zip(g.feature(p)) {
                *acc += s as f64 * v;
            }
        }
        let regions = labels
            .into_iter()
            .enumerate()
            .map(|(r, label)| Region {
                label,
                size: sizes[r],
                mean: sums[r * d..(r + 1) * d]
                    .iter()
                    .map(|v| v / sizes[r] as f64)
                    .collect(),
            })
            .collect();
        let mut adjacency: Vec<(u32, u32)> = g
            .edges()
            .iter()
            .filter_map(|&(p, q)| {
                let (a, b) = (node_region[p as usize], node_region[q as usize]);
                (a != b).then(|| (a.min(b), a.max(b)))
            })
            .collect();
        adjacency.sort_unstable();
        adjacency.dedup();
        let pixel_map = (0..g.base_len())
            .map(|px| node_region[g.base_node(px)])
            .collect();
        Rag {
            shape: g.shape(),
            dim: d,
            regions,
            adjacency,
            pixel_map,
            node_map: node_region,
        }
    }
}

/// Breadth-first connected components over same-label neighbors, closing a
/// component once it holds `s_max` base pixels.
///
/// Seeds are taken in ascending node order, the queue is FIFO and neighbors
/// are visited in ascending order. A neighbor that would push the component
/// past `s_max` is left for a later seed.
pub fn split_components(g: &RegionGraph, l: &Labeling, s_max: f64) -> Result<Rag> {
    let n = g.node_count();
    if l.len() != n {
        return Err(Error::dims(n, l.len()));
    }
    let (off, nbrs) = g.adjacency();
    let sizes = g.sizes();
    let mut region = vec![UNSET; n];
    let mut labels = Vec::new();
    let mut queue = VecDeque::new();

    for seed in 0..n {
        if region[seed] != UNSET {
            continue;
        }
        let rid = labels.len() as u32;
        let label = l.0[seed];
        labels.push(label);
        region[seed] = rid;
        let mut size = sizes[seed] as f64;
        queue.clear();
        queue.push_back(seed);
        'flood: while let Some(u) = queue.pop_front() {
            if size >= s_max {
                break;
            }
            for &v in &nbrs[off[u]..off[u + 1]] {
                let v = v as usize;
                if region[v] == UNSET && l.0[v] == label && size + sizes[v] as f64 <= s_max {
                    region[v] = rid;
                    size += sizes[v] as f64;
                    queue.push_back(v);
                    if size >= s_max {
                        break 'flood;
                    }
                }
            }
        }
    }
    Ok(Rag::from_node_partition(g, region, labels))
}

/// Plain connected components of a labeling.
pub fn connected_components(g: &RegionGraph, l: &Labeling) -> Result<Rag> {
    split_components(g, l, f64::INFINITY)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct MergeKey {
    psi: f64,
    a: u32,
    b: u32,
}

impl Eq for MergeKey {}

impl Ord for MergeKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.psi
            .total_cmp(&other.psi)
            .then(self.a.cmp(&other.a))
            .then(self.b.cmp(&other.b))
    }
}

impl PartialOrd for MergeKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Merges regions smaller than `s_min` into neighbors.
///
/// Edges are processed in ascending `||theta_{f_p} - theta_{f_q}||_1`, ties by
/// `(min id, max id)`. A popped pair is merged when either side is below
/// `s_min`; the larger region survives (lower id on ties) and keeps its label,
/// the absorbed region's edges are relinked to it.
pub fn merge_small(rag: &Rag, palette: &Palette, s_min: f64) -> Result<Rag> {
    let k = rag.regions.len();
    if let Some(r) = rag.regions.iter().find(|r| r.label as usize >= palette.k()) {
        return Err(Error::Config(format!(
            "region label {} outside palette of size {}",
            r.label,
            palette.k()
        )));
    }
    let d = rag.dim;
    let mut size: Vec<u64> = rag.regions.iter().map(|r| r.size).collect();
    let label: Vec<u32> = rag.regions.iter().map(|r| r.label).collect();
    let mut sums: Vec<f64> = rag
        .regions
        .iter()
        .flat_map(|r| r.mean.iter().map(move |m| m * r.size as f64))
        .collect();
    let mut nbrs: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); k];
    let mut heap = BinaryHeap::with_capacity(rag.adjacency.len());
    let psi = |a: u32, b: u32| palette.l1(label[a as usize] as usize, label[b as usize] as usize);
    for &(a, b) in &rag.adjacency {
        nbrs[a as usize].insert(b);
        nbrs[b as usize].insert(a);
        heap.push(Reverse(MergeKey { psi: psi(a, b), a, b }));
    }
    let small = |s: u64| (s as f64) < s_min;
    let mut small_count = size.iter().filter(|&&s| small(s)).count();
    let mut parent: Vec<u32> = (0..k as u32).collect();
    let mut alive = vec![true; k];

    while small_count > 0 {
        let Some(Reverse(MergeKey { a, b, .. })) = heap.pop() else {
            break;
        };
        let (ai, bi) = (a as usize, b as usize);
        if !alive[ai] || !alive[bi] || !(small(size[ai]) || small(size[bi])) {
            continue;
        }
        let (keep, gone) = if size[ai] >= size[bi] { (a, b) } else { (b, a) };
        let (ki, gi) = (keep as usize, gone as usize);
        small_count -= usize::from(small(size[ai])) + usize::from(small(size[bi]));
        size[ki] += size[gi];
        small_count += usize::from(small(size[ki]));
        for j in 0..d {
            sums[ki * d + j] += sums[gi * d + j];
        }
        alive[gi] = false;
        parent[gi] = keep;

        let moved = std::mem::take(&mut nbrs[gi]);
        nbrs[ki].remove(&gone);
        for w in moved {
            if w == keep {
                continue;
            }
            nbrs[w as usize].remove(&gone);
            if nbrs[ki].insert(w) {
                nbrs[w as usize].insert(keep);
                heap.push(Reverse(MergeKey {
                    psi: psi(keep, w),
                    a: keep.min(w),
                    b: keep.max(w),
                }));
            }
        }
    }

    // Groups are numbered by their lowest member id, which keeps ids in
    // first-pixel order.
    let root = |mut r: u32| {
        while parent[r as usize] != r {
            r = parent[r as usize];
        }
        r as usize
    };
    let mut new_id = vec![UNSET; k];
    let mut regions = Vec::new();
    for r in 0..k as u32 {
        let g = root(r);
        if new_id[g] == UNSET {
            new_id[g] = regions.len() as u32;
            regions.push(Region {
                label: label[g],
                size: size[g],
                mean: sums[g * d..(g + 1) * d]
                    .iter()
                    .map(|v| v / size[g] as f64)
                    .collect(),
            });
        }
    }
    let find = |r: u32| new_id[root(r)];
    let remap: Vec<u32> = (0..k as u32).map(find).collect();
    let mut adjacency: Vec<(u32, u32)> = rag
        .adjacency
        .iter()
        .filter_map(|&(p, q)| {
            let (a, b) = (remap[p as usize], remap[q as usize]);
            (a != b).then(|| (a.min(b), a.max(b)))
        })
        .collect();
    adjacency.sort_unstable();
    adjacency.dedup();

    Ok(Rag {
        shape: rag.shape,
        dim: d,
        regions,
        adjacency,
        pixel_map: rag.pixel_map.iter().map(|&r| remap[r as usize]).collect(),
        node_map: rag.node_map.iter().map(|&r| remap[r as usize]).collect(),
    })
}

/// Split with `bounds.s_max`, then merge below `bounds.s_min`.
pub fn enforce_count(g: &RegionGraph, l: &Labeling, bounds: &SizeBounds, palette: &Palette) -> Result<Rag> {
    bounds.validate(g.base_len())?;
    let split = split_components(g, l, bounds.s_max)?;
    merge_small(&split, palette, bounds.s_min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::color::LabImage;
    use crate::gridgraph::{lattice_2d, Connectivity};
    use proptest::prelude::*;

    fn grid(w: usize, h: usize) -> RegionGraph {
        let px = (0..w * h).map(|i| [i as f64 / (w * h) as f64, 0.5, 0.5]).collect();
        let img = LabImage::new(Shape::new_2d(w, h), px).unwrap();
        lattice_2d(&img, Connectivity::Four).unwrap()
    }

    fn palette(k: usize) -> Palette {
        Palette::from_centers(1, (0..k).map(|i| i as f64 / k.max(2) as f64).collect()).unwrap()
    }

    /// Independent replay of the split rule on a 4-connected W x H grid.
    fn simulate_split(w: usize, h: usize, l: &[u32], s_max: usize) -> Vec<usize> {
        let mut comp = vec![usize::MAX; w * h];
        let mut sizes = Vec::new();
        for seed in 0..w * h {
            if comp[seed] != usize::MAX {
                continue;
            }
            let id = sizes.len();
            comp[seed] = id;
            let mut members = vec![seed];
            let mut head = 0;
            while head < members.len() && members.len() < s_max {
                let u = members[head];
                head += 1;
                let (x, y) = (u % w, u / w);
                let mut cand = Vec::new();
                if y > 0 { cand.push(u - w); }
                if x > 0 { cand.push(u - 1); }
                if x + 1 < w { cand.push(u + 1); }
                if y + 1 < h { cand.push(u + w); }
                for v in cand {
                    if members.len() < s_max && comp[v] == usize::MAX && l[v] == l[seed] {
                        comp[v] = id;
                        members.push(v);
                    }
                }
            }
            sizes.push(members.len());
        }
        sizes
    }

    #[test]
    fn unconstrained_flood() {
        let g = grid(10, 10);
        let rag = split_components(&g, &Labeling::uniform(100, 0), 200.0).unwrap();
        assert_eq!(rag.region_count(), 1);
        assert_eq!(rag.regions()[0].size, 100);
    }

    #[test]
    fn capped_flood_matches_replay() {
        let g = grid(10, 10);
        let l = Labeling::uniform(100, 0);
        let rag = split_components(&g, &l, 30.0).unwrap();
        let want = simulate_split(10, 10, &l.0, 30);
        let got: Vec<usize> = rag.sizes().map(|s| s as usize).collect();
        assert_eq!(got, want);
        assert_eq!(got.iter().sum::<usize>(), 100);
        assert!(got.iter().all(|&s| s <= 30));
        assert_eq!(got, vec![30, 30, 30, 3, 7]);
    }

    #[test]
    fn halves_give_one_edge() {
        let g = grid(6, 4);
        let l = Labeling((0..24).map(|i| u32::from(i % 6 >= 3)).collect());
        let rag = split_components(&g, &l, 24.0).unwrap();
        assert_eq!(rag.region_count(), 2);
        assert_eq!(rag.adjacency(), &[(0, 1)]);
        rag.check_invariants(Some(g.features())).unwrap();
    }

    fn rag_with_sizes(sizes: &[u64], labels: &[u32], adjacency: Vec<(u32, u32)>) -> Rag {
        let mut pixel_map = Vec::new();
        for (r, &s) in sizes.iter().enumerate() {
            pixel_map.extend(std::iter::repeat_n(r as u32, s as usize));
        }
        let n = pixel_map.len();
        Rag {
            shape: Shape::new_2d(n, 1),
            dim: 1,
            regions: sizes
                .iter()
                .zip(labels)
                .map(|(&size, &label)| Region { label, size, mean: vec![label as f64 / 10.0] })
                .collect(),
            adjacency,
            node_map: (0..sizes.len() as u32).collect(),
            pixel_map,
        }
    }

    #[test]
    fn forced_merge_and_noop() {
        let rag = rag_with_sizes(&[3, 100], &[0, 1], vec![(0, 1)]);
        let out = merge_small(&rag, &palette(2), 5.0).unwrap();
        assert_eq!(out.region_count(), 1);
        assert_eq!(out.regions()[0].size, 103);
        assert_eq!(out.regions()[0].label, 1);
        let mean = (3.0 * 0.0 + 100.0 * 0.1) / 103.0;
        assert!((out.regions()[0].mean[0] - mean).abs() < 1e-12);

        let rag = rag_with_sizes(&[10, 20, 30], &[0, 1, 2], vec![(0, 1), (1, 2)]);
        assert_eq!(merge_small(&rag, &palette(3), 5.0).unwrap(), rag);
    }

    #[test]
    fn chain_follows_priority_rule() {
        // Chain 0 - 1 - 2 with sizes {2, 2, 100}.
        // Palette (1D): theta = [0.0, 0.9, 1.0]; labels 0,1,2.
        // psi(0,1) = 0.9, psi(1,2) = 0.1. Pop (1,2) first: 1 -> 2 (size 102, label 2).
        // Relink (0,2) with psi(0,2) = 1.0; pop it: 0 -> 2. One region of 104.
        let pal = Palette::from_centers(1, vec![0.0, 0.9, 1.0]).unwrap();
        let rag = rag_with_sizes(&[2, 2, 100], &[0, 1, 2], vec![(0, 1), (1, 2)]);
        let out = merge_small(&rag, &pal, 5.0).unwrap();
        assert_eq!(out.region_count(), 1);
        assert_eq!(out.regions()[0].size, 104);
        assert_eq!(out.regions()[0].label, 2);

        // With theta = [0.0, 0.05, 1.0]: psi(0,1) = 0.05 pops first and merges
        // 0 and 1 (tie on size: lower id 0 survives, size 4, label 0). The
        // pair is still small; the relinked edge (0,2) has psi 1.0 and merges
        // into 2.
        let pal = Palette::from_centers(1, vec![0.0, 0.05, 1.0]).unwrap();
        let out = merge_small(&rag, &pal, 5.0).unwrap();
        assert_eq!(out.region_count(), 1);

        // With s_min = 3 the first merge already lifts both to size 4.
        let out = merge_small(&rag, &pal, 3.0).unwrap();
        assert_eq!(out.sizes().collect::<Vec<_>>(), vec![4, 100]);
        assert_eq!(out.regions()[0].label, 0);
        assert_eq!(out.adjacency(), &[(0, 1)]);
    }

    #[test]
    fn size_bounds_from_target() {
        let b = SizeBounds::from_target(4, 400).unwrap();
        assert_eq!((b.s_min, b.s_max), (20.0, 200.0));
        assert!(SizeBounds::from_target(0, 400).is_err());
        assert_eq!(SizeBounds::from_target(1, 400).unwrap().s_max, 400.0);
        assert!(SizeBounds::explicit(5.0, 3.0, 10).is_err());
        assert!(SizeBounds::explicit(0.0, 11.0, 10).is_err());
    }

    #[test]
    fn constant_image_with_target() {
        // S = 400, N = 4: s_max = 200 closes two 200-pixel components; nothing is small.
        let g = grid(20, 20);
        let l = Labeling::uniform(400, 0);
        let b = SizeBounds::from_target(4, 400).unwrap();
        let rag = enforce_count(&g, &l, &b, &palette(1)).unwrap();
        let want = simulate_split(20, 20, &l.0, 200);
        assert_eq!(rag.sizes().map(|s| s as usize).collect::<Vec<_>>(), want);
        assert_eq!(rag.region_count(), 2);
    }

    #[test]
    fn checkerboard_collapses() {
        let g = grid(8, 8);
        let l = Labeling((0..64).map(|i| ((i % 8 + i / 8) % 2) as u32).collect());
        let b = SizeBounds::explicit(4.0, 64.0, 64).unwrap();
        let rag = enforce_count(&g, &l, &b, &palette(2)).unwrap();
        assert!(rag.sizes().all(|s| s >= 4));
        rag.check_invariants(Some(g.features())).unwrap();
    }

    fn flood_connected(w: usize, h: usize, map: &[u32]) -> bool {
        let k = *map.iter().max().unwrap() as usize + 1;
        let mut seen = vec![false; w * h];
        let mut comps = 0;
        for s in 0..w * h {
            if seen[s] {
                continue;
            }
            comps += 1;
            let mut stack = vec![s];
            seen[s] = true;
            while let Some(u) = stack.pop() {
                let (x, y) = (u % w, u / w);
                for (nx, ny) in [(x.wrapping_sub(1), y), (x + 1, y), (x, y.wrapping_sub(1)), (x, y + 1)] {
                    if nx < w && ny < h {
                        let v = ny * w + nx;
                        if !seen[v] && map[v] == map[u] {
                            seen[v] = true;
                            stack.push(v);
                        }
                    }
                }
            }
        }
        comps == k
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn split_merge_invariants(
            w in 1usize..12, h in 1usize..12, k in 1u32..4,
            seed in any::<u64>(), smin_frac in 0.0f64..0.3, smax_frac in 0.05f64..1.0,
        ) {
            let n = w * h;
            let labels: Vec<u32> = (0..n).map(|i| ((seed >> (i % 60)) as u32 ^ (i as u32 / 3)) % k).collect();
            let l = Labeling(labels);
            let g = grid(w, h);
            let s_max = (smax_frac * n as f64).max(1.0);
            let split = split_components(&g, &l, s_max).unwrap();
            split.check_invariants(Some(g.features())).unwrap();
            prop_assert!(flood_connected(w, h, split.pixel_map()));
            prop_assert!(split.sizes().all(|s| s as f64 <= s_max));
            for p in 0..n {
                prop_assert_eq!(split.regions()[split.pixel_map()[p] as usize].label, l.0[p]);
            }
            let s_min = smin_frac * n as f64;
            let merged = merge_small(&split, &palette(k as usize), s_min).unwrap();
            merged.check_invariants(Some(g.features())).unwrap();
            prop_assert!(flood_connected(w, h, merged.pixel_map()));
            prop_assert!(merged.region_count() <= split.region_count());
            if merged.region_count() > 1 {
                prop_assert!(merged.sizes().all(|s| s as f64 >= s_min));
            }
            // deterministic
            prop_assert_eq!(&merge_small(&split, &palette(k as usize), s_min).unwrap(), &merged);
        }
    }
}
