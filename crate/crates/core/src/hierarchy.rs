//! n-th order super-regions.
//!
//! Level 1 runs quantize, lattice, minimize and split/merge on pixels. Each
//! later level treats the previous level's regions as nodes (features are the
//! region mean colors, edges the region adjacency) and repeats the same
//! pass, so every level is a coarsening of the one before.

use crate::color::LabImage;
use crate::error::{Error, Result};
use crate::gridgraph::{self, Connectivity, RegionGraph};
use crate::mrf::{self, EnergyModel, EnergyOptions, Labeling};
use crate::par::Parallelism;
use crate::quantize::{self, Palette, QuantizeConfig};
use crate::regions::{self, Rag, SizeBounds};
use crate::shape::Shape;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gamma {
    /// `1 / (2 * mean squared edge gap)`.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bounds {
    /// No splitting, no merging.
    Unconstrained,
    /// Aim for about `n` regions.
    Target(usize),
    Explicit { s_min: f64, s_max: f64 },
}

impl Bounds {
    pub fn resolve(&self, total: usize) -> Result<SizeBounds> {
        match *self {
            Bounds::Unconstrained => Ok(SizeBounds::unconstrained(total)),
            Bounds::Target(n) => SizeBounds::from_target(n, total),
            Bounds::Explicit { s_min, s_max } => SizeBounds::explicit(s_min, s_max, total),
        }
    }
}

/// Per-level parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelConfig {
    pub k: usize,
    pub lambda: f64,
    pub bounds: Bounds,
    pub gamma: Gamma,
}

impl LevelConfig {
    pub fn new(k: usize, lambda: f64, bounds: Bounds) -> Self {
        LevelConfig {
            k,
            lambda,
            bounds,
            gamma: Gamma::Auto,
        }
    }

    pub fn unconstrained(k: usize, lambda: f64) -> Self {
        Self::new(k, lambda, Bounds::Unconstrained)
    }

    pub fn with_target(k: usize, lambda: f64, n: usize) -> Self {
        Self::new(k, lambda, Bounds::Target(n))
    }
}

impl Default for LevelConfig {
    fn default() -> Self {
        Self::unconstrained(16, mrf::DEFAULT_LAMBDA)
    }
}

/// Settings shared by all levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineOptions {
    /// `None` picks 4 in 2D and 6 in 3D.
    pub connectivity: Option<Connectivity>,
    pub samples: usize,
    pub restarts: usize,
    pub seed: u64,
    pub max_cycles: usize,
    pub size_weighted_unary: bool,
    pub parallelism: Parallelism,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        let q = QuantizeConfig::default();
        PipelineOptions {
            connectivity: None,
            samples: q.samples,
            restarts: q.restarts,
            seed: q.seed,
            max_cycles: mrf::DEFAULT_MAX_CYCLES,
            size_weighted_unary: true,
            parallelism: Parallelism::default(),
        }
    }
}

impl PipelineOptions {
    pub fn connectivity_for(&self, shape: Shape) -> Result<Connectivity> {
        let c = self.connectivity.unwrap_or(Connectivity::default_for(shape));
        if shape.is_volume() != c.is_3d() {
            return Err(Error::Config(format!(
                "connectivity {} does not fit a {} input",
                c.count(),
                if shape.is_volume() { "3D" } else { "2D" }
            )));
        }
        Ok(c)
    }
}

/// One level's output and the values it resolved.
#[derive(Debug, Clone)]
pub struct LevelOutput {
    pub rag: Rag,
    pub config: LevelConfig,
    pub palette: Palette,
    pub gamma: f64,
    pub bounds: SizeBounds,
    pub initial_energy: f64,
    pub energy: f64,
    pub sweeps: usize,
    /// Connected components before the split/merge size bounds.
    pub labeling: Labeling,
}

#[derive(Debug, Clone)]
pub struct HierarchyResult {
    pub levels: Vec<LevelOutput>,
}

impl HierarchyResult {
    /// Every level-i region must be a union of level-(i-1) regions.
    pub fn check_refinement(&self) -> Result<()> {
        for (i, pair) in self.levels.windows(2).enumerate() {
            check_refines(&pair[0].rag, &pair[1].rag)
                .map_err(|e| Error::Invariant(format!("level {}: {e}", i + 2)))?;
        }
        Ok(())
    }
}

/// `fine` refines `coarse`: pixels sharing a fine region share a coarse one.
pub fn check_refines(fine: &Rag, coarse: &Rag) -> Result<()> {
    if fine.pixel_map().len() != coarse.pixel_map().len() {
        return Err(Error::dims(fine.pixel_map().len(), coarse.pixel_map().len()));
    }
    let mut image = vec![u32::MAX; fine.region_count()];
    for (&f, &c) in fine.pixel_map().iter().zip(coarse.pixel_map()) {
        let slot = &mut image[f as usize];
        if *slot == u32::MAX {
            *slot = c;
        } else if *slot != c {
            return Err(Error::Invariant(format!(
                "region {f} is split between coarse regions {slot} and {c}"
            )));
        }
    }
    Ok(())
}

fn quantize_config(k: usize, opts: &PipelineOptions, level: usize) -> QuantizeConfig {
    QuantizeConfig {
        k,
        samples: opts.samples.max(k),
        restarts: opts.restarts,
        seed: opts.seed.wrapping_add(level as u64 - 1),
        parallelism: opts.parallelism,
    }
}

/// Quantize, weight, minimize and split/merge one graph.
fn segment_graph(
    mut graph: RegionGraph,
    cfg: &LevelConfig,
    opts: &PipelineOptions,
    level: usize,
) -> Result<LevelOutput> {
    if cfg.k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    let qcfg = quantize_config(cfg.k, opts, level);
    let palette = quantize::fit_palette(graph.features(), graph.dim(), &qcfg)?;

    let gamma = match cfg.gamma {
        Gamma::Fixed(g) => g,
        Gamma::Auto if graph.edge_count() == 0 => 0.0,
        Gamma::Auto => gridgraph::auto_gamma(&graph)?,
    };
    gridgraph::compute_weights(&mut graph, gamma)?;

    let eopts = EnergyOptions {
        lambda: cfg.lambda,
        size_weighted_unary: opts.size_weighted_unary,
        max_cycles: opts.max_cycles,
        parallelism: opts.parallelism,
    };
    let model = EnergyModel::new(&graph, &palette, eopts)?;
    let init = model.nearest_labeling();
    let result = mrf::minimize(&model, &init)?;

    let bounds = cfg.bounds.resolve(graph.base_len())?;
    let rag = regions::enforce_count(&graph, &result.labeling, &bounds, &palette)?;
    Ok(LevelOutput {
        rag,
        config: *cfg,
        gamma,
        bounds,
        initial_energy: result.initial_energy,
        energy: result.energy,
        sweeps: result.sweep_energies.len(),
        labeling: result.labeling,
        palette,
    })
}

/// First-order super-regions (superpixels or supervoxels) of an image.
pub fn run_pixel_level(img: &LabImage, cfg: &LevelConfig, opts: &PipelineOptions) -> Result<LevelOutput> {
    let conn = opts.connectivity_for(img.shape())?;
    let graph = gridgraph::lattice_for(img, conn)?;
    segment_graph(graph, cfg, opts, 1)
}

/// Region graph whose nodes are `prev`'s regions.
pub fn region_graph(prev: &Rag) -> Result<RegionGraph> {
    RegionGraph::new(
        prev.dim(),
        prev.regions().iter().flat_map(|r| r.mean.iter().copied()).collect(),
        prev.sizes().collect(),
        prev.adjacency().to_vec(),
        prev.shape(),
        Some(prev.pixel_map().to_vec()),
    )
}

/// One more level on top of `prev`. `prev_k` is the previous level's palette
/// size when known; `cfg.k` may not exceed it.
pub fn run_level(
    prev: &Rag,
    cfg: &LevelConfig,
    prev_k: Option<usize>,
    level: usize,
    opts: &PipelineOptions,
) -> Result<LevelOutput> {
    if let Some(prev) = prev_k {
        if cfg.k > prev {
            return Err(Error::PaletteGrowth { k: cfg.k, prev });
        }
    }
    segment_graph(region_graph(prev)?, cfg, opts, level.max(2))
}

pub fn run_hierarchy(img: &LabImage, configs: &[LevelConfig], opts: &PipelineOptions) -> Result<HierarchyResult> {
    let Some(first) = configs.first() else {
        return Err(Error::Config("at least one level is required".into()));
    };
    let mut levels = vec![run_pixel_level(img, first, opts)?];
    for (i, cfg) in configs.iter().enumerate().skip(1) {
        let prev = &levels[i - 1];
        let next = run_level(&prev.rag, cfg, Some(prev.config.k), i + 1, opts)?;
        levels.push(next);
    }
    Ok(HierarchyResult { levels })
}

/// Region adjacency graph of a foreign segmentation.
///
/// Ids that cover several disconnected areas are split into one region per
/// connected area; regions are numbered densely by first pixel. Region labels
/// are placeholders (0) until the next level quantizes the mean colors.
pub fn ingest_label_map(labels: &[u32], img: &LabImage, conn: Connectivity) -> Result<Rag> {
    if labels.len() != img.shape().len() {
        return Err(Error::dims(
            format!("{} labels for {}", img.shape().len(), img.shape()),
            labels.len(),
        ));
    }
    let graph = gridgraph::lattice_for(img, conn)?;
    let mut rag = regions::connected_components(&graph, &Labeling(labels.to_vec()))?;
    for r in rag.regions.iter_mut() {
        r.label = 0;
    }
    Ok(rag)
}

/// Ingests a foreign segmentation and runs one coarsening level over it.
pub fn coarsen(labels: &[u32], img: &LabImage, cfg: &LevelConfig, opts: &PipelineOptions) -> Result<(Rag, LevelOutput)> {
    let conn = opts.connectivity_for(img.shape())?;
    let base = ingest_label_map(labels, img, conn)?;
    let out = run_level(&base, cfg, None, 2, opts)?;
    check_refines(&base, &out.rag)?;
    Ok((base, out))
}
