//! Piecewise-constant denoising energy over a quantized feature palette,
//! minimized with alpha-expansion.
//!
//! ```text
//! E(l) = sum_p s_p ||x_p - theta_{l_p}||^2 + lambda sum_{pq} w_pq ||theta_{l_p} - theta_{l_q}||_1
//! ```
//!
//! `s_p` is the node's base pixel count when size weighting is enabled (it is
//! 1 on pixel lattices either way). Each expansion move is solved exactly by a
//! single s-t min-cut; the L1 pairwise table is a metric, so every move is
//! submodular.

use crate::error::{Error, Result};
use crate::gridgraph::RegionGraph;
use crate::maxflow::{MaxFlow, Segment};
use crate::par::{self, Parallelism};
use crate::quantize::{sq_dist, Palette};

/// Default smoothness strength.
pub const DEFAULT_LAMBDA: f64 = 0.1;
/// Default cap on full alpha sweeps.
pub const DEFAULT_MAX_CYCLES: usize = 5;

/// Slack for floating-point rounding when checking the metric property.
const METRIC_SLACK: f64 = 1e-12;

/// Per-node palette index.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Labeling(pub Vec<u32>);

impl Labeling {
    pub fn uniform(n: usize, label: u32) -> Self {
        Labeling(vec![label; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyOptions {
    pub lambda: f64,
    /// Multiply unaries by node size `s_p`.
    pub size_weighted_unary: bool,
    pub max_cycles: usize,
    pub parallelism: Parallelism,
}

impl Default for EnergyOptions {
    fn default() -> Self {
        EnergyOptions {
            lambda: DEFAULT_LAMBDA,
            size_weighted_unary: true,
            max_cycles: DEFAULT_MAX_CYCLES,
            parallelism: Parallelism::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EnergyModel<'a> {
    graph: &'a RegionGraph,
    palette: &'a Palette,
    opts: EnergyOptions,
    /// `node_count x K`, size weighting applied.
    unary: Vec<f64>,
    /// `K x K` L1 distances between palette entries.
    pairwise: Vec<f64>,
}

impl<'a> EnergyModel<'a> {
    pub fn new(graph: &'a RegionGraph, palette: &'a Palette, opts: EnergyOptions) -> Result<Self> {
        if !opts.lambda.is_finite() || opts.lambda < 0.0 {
            return Err(Error::Config(format!(
                "lambda must be non-negative, got {}",
                opts.lambda
            )));
        }
        if graph.dim() != palette.dim() {
            return Err(Error::dims(
                format!("palette of dimension {}", graph.dim()),
                format!("dimension {}", palette.dim()),
            ));
        }
        let k = palette.k();
        let pairwise: Vec<f64> = (0..k * k).map(|i| palette.l1(i / k, i % k)).collect();
        check_expansion_submodular(&pairwise, k)?;

        let unary: Vec<f64> = par::map_range(opts.parallelism, graph.node_count(), |p| {
            let x = graph.feature(p);
            let scale = if opts.size_weighted_unary {
                graph.sizes()[p] as f64
            } else {
                1.0
            };
            (0..k).map(|l| scale * sq_dist(x, palette.center(l))).collect::<Vec<_>>()
        })
        .into_iter()
        .flatten()
        .collect();

        Ok(EnergyModel {
            graph,
            palette,
            opts,
            unary,
            pairwise,
        })
    }

    pub fn graph(&self) -> &RegionGraph {
        self.graph
    }

    pub fn palette(&self) -> &Palette {
        self.palette
    }

    pub fn options(&self) -> &EnergyOptions {
        &self.opts
    }

    pub fn k(&self) -> usize {
        self.palette.k()
    }

    /// `||x_p - theta_k||^2`, without size weighting.
    pub fn unary_cost(&self, p: usize, k: usize) -> f64 {
        sq_dist(self.graph.feature(p), self.palette.center(k))
    }

    /// `||theta_a - theta_b||_1`.
    #[inline]
    pub fn pairwise_cost(&self, a: usize, b: usize) -> f64 {
        self.pairwise[a * self.k() + b]
    }

    #[inline]
    fn node_unary(&self, p: usize, k: usize) -> f64 {
        self.unary[p * self.k() + k]
    }

    /// Pointwise nearest-center labeling.
    pub fn nearest_labeling(&self) -> Labeling {
        let k = self.k();
        Labeling(
            (0..self.graph.node_count())
                .map(|p| {
                    let row = &self.unary[p * k..(p + 1) * k];
                    row.iter()
                        .enumerate()
                        .fold(0, |b, (i, &v)| if v < row[b] { i } else { b })
                        as u32
                })
                .collect(),
        )
    }

    pub fn check_labeling(&self, l: &Labeling) -> Result<()> {
        if l.len() != self.graph.node_count() {
            return Err(Error::dims(self.graph.node_count(), l.len()));
        }
        if let Some(bad) = l.0.iter().find(|&&v| v as usize >= self.k()) {
            return Err(Error::Config(format!(
                "label {bad} outside palette of size {}",
                self.k()
            )));
        }
        Ok(())
    }

    pub fn unary_energy(&self, l: &Labeling) -> f64 {
        l.0.iter()
            .enumerate()
            .map(|(p, &k)| self.node_unary(p, k as usize))
            .sum()
    }

    /// Unweighted-by-lambda sum of `w_pq * psi_pq`.
    pub fn pairwise_energy(&self, l: &Labeling) -> f64 {
        self.graph
            .edges()
            .iter()
            .zip(self.graph.weights())
            .map(|(&(p, q), &w)| w * self.pairwise_cost(l.0[p as usize] as usize, l.0[q as usize] as usize))
            .sum()
    }

    pub fn total_energy(&self, l: &Labeling) -> f64 {
        self.unary_energy(l) + self.opts.lambda * self.pairwise_energy(l)
    }
}

/// Expansion moves need `V(a, b) + V(alpha, alpha) <= V(a, alpha) + V(alpha, b)`
/// for every `a, b, alpha`.
fn check_expansion_submodular(table: &[f64], k: usize) -> Result<()> {
    for alpha in 0..k {
        let va = table[alpha * k + alpha];
        for a in 0..k {
            for b in 0..k {
                let lhs = table[a * k + b] + va;
                let rhs = table[a * k + alpha] + table[alpha * k + b];
                if lhs > rhs + METRIC_SLACK * (1.0 + rhs.abs()) {
                    return Err(Error::NotSubmodular { a, b, alpha });
                }
            }
        }
    }
    Ok(())
}

/// Reusable buffers for expansion moves.
#[derive(Debug, Default)]
pub struct ExpansionScratch {
    flow: MaxFlow,
    index: Vec<u32>,
}

/// Best labeling reachable from `l` by letting any node switch to `alpha`.
///
/// The binary move is solved exactly by min-cut. Returns the new labeling and
/// its energy; if the move cannot lower the energy the input is returned.
pub fn expansion_move(model: &EnergyModel<'_>, l: &Labeling, alpha: usize) -> Result<(Labeling, f64)> {
    model.check_labeling(l)?;
    if alpha >= model.k() {
        return Err(Error::Config(format!("alpha {alpha} outside palette")));
    }
    let current = model.total_energy(l);
    let mut scratch = ExpansionScratch::default();
    Ok(expand(model, l, current, alpha as u32, &mut scratch))
}

fn expand(
    model: &EnergyModel<'_>,
    l: &Labeling,
    current: f64,
    alpha: u32,
    scratch: &mut ExpansionScratch,
) -> (Labeling, f64) {
    let g = model.graph();
    let n = g.node_count();
    let lambda = model.options().lambda;

    scratch.index.clear();
    scratch.index.resize(n, u32::MAX);
    let mut active = 0u32;
    for p in 0..n {
        if l.0[p] != alpha {
            scratch.index[p] = active;
            active += 1;
        }
    }
    if active == 0 {
        return (l.clone(), current);
    }

    let flow = &mut scratch.flow;
    flow.reset(active as usize, g.edge_count());
    let a = alpha as usize;
    for p in 0..n {
        let i = scratch.index[p];
        if i != u32::MAX {
            // Source side keeps l_p; sink side switches to alpha.
            flow.add_tweights(
                i as usize,
                model.node_unary(p, a),
                model.node_unary(p, l.0[p] as usize),
            );
        }
    }
    for (&(p, q), &w) in g.edges().iter().zip(g.weights()) {
        let c = lambda * w;
        if c == 0.0 {
            continue;
        }
        let (p, q) = (p as usize, q as usize);
        let (ip, iq) = (scratch.index[p], scratch.index[q]);
        let (lp, lq) = (l.0[p] as usize, l.0[q] as usize);
        match (ip != u32::MAX, iq != u32::MAX) {
            (false, false) => {}
            (true, false) => flow.add_tweights(ip as usize, 0.0, c * model.pairwise_cost(lp, a)),
            (false, true) => flow.add_tweights(iq as usize, 0.0, c * model.pairwise_cost(a, lq)),
            (true, true) => {
                let e00 = c * model.pairwise_cost(lp, lq);
                let e01 = c * model.pairwise_cost(lp, a);
                let e10 = c * model.pairwise_cost(a, lq);
                // E = e00 + (e10 - e00) x_p - e10 x_q + (e01 + e10 - e00) (1 - x_p) x_q
                let dp = e10 - e00;
                if dp > 0.0 {
                    flow.add_tweights(ip as usize, dp, 0.0);
                } else {
                    flow.add_tweights(ip as usize, 0.0, -dp);
                }
                flow.add_tweights(iq as usize, 0.0, e10);
                let cap = (e01 + e10 - e00).max(0.0);
                flow.add_edge(ip as usize, iq as usize, cap, 0.0);
            }
        }
    }
    flow.solve();

    let mut next = l.clone();
    let mut changed = false;
    for p in 0..n {
        let i = scratch.index[p];
        if i != u32::MAX && flow.segment(i as usize) == Segment::Sink {
            next.0[p] = alpha;
            changed = true;
        }
    }
    if !changed {
        return (l.clone(), current);
    }
    let e = model.total_energy(&next);
    if e < current {
        (next, e)
    } else {
        (l.clone(), current)
    }
}

/// Result of [`minimize`] with the energy trace.
#[derive(Debug, Clone)]
pub struct Minimized {
    pub labeling: Labeling,
    pub energy: f64,
    pub initial_energy: f64,
    /// Energy after every expansion move, in order.
    pub move_energies: Vec<f64>,
    /// Energy at the end of each full sweep.
    pub sweep_energies: Vec<f64>,
}

/// Alpha-expansion from `init`, sweeping labels in ascending order until a
/// sweep brings no decrease or `max_cycles` sweeps have run.
pub fn minimize(model: &EnergyModel<'_>, init: &Labeling) -> Result<Minimized> {
    model.check_labeling(init)?;
    let mut l = init.clone();
    let initial_energy = model.total_energy(&l);
    let mut energy = initial_energy;
    let mut scratch = ExpansionScratch::default();
    let mut move_energies = Vec::new();
    let mut sweep_energies = Vec::new();

    if model.k() > 1 {
        for _ in 0..model.options().max_cycles {
            let start = energy;
            for alpha in 0..model.k() as u32 {
                let (next, e) = expand(model, &l, energy, alpha, &mut scratch);
                l = next;
                energy = e;
                move_energies.push(e);
            }
            sweep_energies.push(energy);
            if energy >= start {
                break;
            }
        }
    }
    Ok(Minimized {
        labeling: l,
        energy,
        initial_energy,
        move_energies,
        sweep_energies,
    })
}
