//! Boykov-Kolmogorov augmenting-path max-flow.
//!
//! Two search trees grow from the terminals and are reused between
//! augmentations; orphans created by saturation are re-adopted instead of
//! restarting the search. Well suited to the sparse, low-degree graphs built
//! over image lattices.
//!
//! Terminal links are stored per node as a signed residual: positive for
//! source-to-node capacity, negative for node-to-sink capacity.

use std::collections::VecDeque;

const NONE: u32 = u32::MAX;
const TERMINAL: u32 = u32::MAX - 1;
const ORPHAN: u32 = u32::MAX - 2;
const INFINITE_D: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Segment {
    Source,
    Sink,
}

#[derive(Debug, Clone)]
struct Node {
    first: u32,
    parent: u32,
    ts: u32,
    dist: u32,
    is_sink: bool,
    active: bool,
    tr_cap: f64,
}

#[derive(Debug, Clone)]
struct Arc {
    head: u32,
    next: u32,
    r_cap: f64,
}

#[derive(Debug, Clone, Default)]
pub struct MaxFlow {
    nodes: Vec<Node>,
    arcs: Vec<Arc>,
    flow: f64,
    queue: VecDeque<u32>,
    orphans: VecDeque<u32>,
    time: u32,
}

impl MaxFlow {
    pub fn new(node_count: usize, edge_hint: usize) -> Self {
        let mut g = MaxFlow::default();
        g.reset(node_count, edge_hint);
        g
    }

    /// Clears the graph, keeping allocations.
    pub fn reset(&mut self, node_count: usize, edge_hint: usize) {
        self.nodes.clear();
        self.nodes.resize(
            node_count,
            Node {
                first: NONE,
                parent: NONE,
                ts: 0,
                dist: 0,
                is_sink: false,
                active: false,
                tr_cap: 0.0,
            },
        );
        self.arcs.clear();
        self.arcs.reserve(2 * edge_hint);
        self.flow = 0.0;
        self.queue.clear();
        self.orphans.clear();
        self.time = 0;
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Adds capacities `source -> i` and `i -> sink`.
    pub fn add_tweights(&mut self, i: usize, cap_source: f64, cap_sink: f64) {
        debug_assert!(cap_source >= 0.0 && cap_sink >= 0.0);
        let delta = self.nodes[i].tr_cap;
        let (cs, ct) = if delta > 0.0 {
            (cap_source + delta, cap_sink)
        } else {
            (cap_source, cap_sink - delta)
        };
        self.flow += cs.min(ct);
        self.nodes[i].tr_cap = cs - ct;
    }

    /// Adds an arc pair `i -> j` (capacity `cap`) and `j -> i` (`rev_cap`).
    pub fn add_edge(&mut self, i: usize, j: usize, cap: f64, rev_cap: f64) {
        debug_assert!(i != j && cap >= 0.0 && rev_cap >= 0.0);
        let a = self.arcs.len() as u32;
        self.arcs.push(Arc {
            head: j as u32,
            next: self.nodes[i].first,
            r_cap: cap,
        });
        self.nodes[i].first = a;
        self.arcs.push(Arc {
            head: i as u32,
            next: self.nodes[j].first,
            r_cap: rev_cap,
        });
        self.nodes[j].first = a + 1;
    }

    /// Side of the minimum cut. Nodes in neither search tree are on the
    /// source side.
    pub fn segment(&self, i: usize) -> Segment {
        let n = &self.nodes[i];
        if n.parent != NONE && n.is_sink {
            Segment::Sink
        } else {
            Segment::Source
        }
    }

    #[inline]
    fn set_active(&mut self, i: u32) {
        let n = &mut self.nodes[i as usize];
        if !n.active {
            n.active = true;
            self.queue.push_back(i);
        }
    }

    fn next_active(&mut self) -> Option<u32> {
        while let Some(i) = self.queue.pop_front() {
            let n = &mut self.nodes[i as usize];
            n.active = false;
            if n.parent != NONE {
                return Some(i);
            }
        }
        None
    }

    /// Runs to completion and returns the max-flow value (equal to the
    /// min-cut capacity).
    pub fn solve(&mut self) -> f64 {
        self.queue.clear();
        self.orphans.clear();
        self.time = 0;
        for i in 0..self.nodes.len() {
            let n = &mut self.nodes[i];
            n.active = false;
            n.ts = 0;
            if n.tr_cap != 0.0 {
                n.is_sink = n.tr_cap < 0.0;
                n.parent = TERMINAL;
                n.dist = 1;
                self.set_active(i as u32);
            } else {
                n.parent = NONE;
            }
        }

        let mut current: u32 = NONE;
        loop {
            let mut i = NONE;
            if current != NONE {
                self.nodes[current as usize].active = false;
                if self.nodes[current as usize].parent != NONE {
                    i = current;
                }
            }
            if i == NONE {
                match self.next_active() {
                    Some(n) => i = n,
                    None => break,
                }
            }

            let middle = self.grow(i);
            self.time += 1;
            match middle {
                Some(a) => {
                    // Keep `i` as the current node; it may still have more paths.
                    self.nodes[i as usize].active = true;
                    current = i;
                    self.augment(a);
                    while let Some(o) = self.orphans.pop_front() {
                        if self.nodes[o as usize].is_sink {
                            self.process_sink_orphan(o);
                        } else {
                            self.process_source_orphan(o);
                        }
                    }
                }
                None => current = NONE,
            }
        }
        self.flow
    }

    /// Expands node `i`; returns an arc from the source tree into the sink
    /// tree if the trees touch.
    fn grow(&mut self, i: u32) -> Option<u32> {
        let (is_sink, ts, dist) = {
            let n = &self.nodes[i as usize];
            (n.is_sink, n.ts, n.dist)
        };
        let mut a = self.nodes[i as usize].first;
        while a != NONE {
            let arc_cap = if is_sink {
                self.arcs[(a ^ 1) as usize].r_cap
            } else {
                self.arcs[a as usize].r_cap
            };
            let next = self.arcs[a as usize].next;
            if arc_cap > 0.0 {
                let j = self.arcs[a as usize].head;
                let nj = &self.nodes[j as usize];
                if nj.parent == NONE {
                    let nj = &mut self.nodes[j as usize];
                    nj.is_sink = is_sink;
                    nj.parent = a ^ 1;
                    nj.ts = ts;
                    nj.dist = dist + 1;
                    self.set_active(j);
                } else if nj.is_sink != is_sink {
                    return Some(if is_sink { a ^ 1 } else { a });
                } else if nj.ts <= ts && nj.dist > dist {
                    // Shorten the path to the terminal.
                    let nj = &mut self.nodes[j as usize];
                    nj.parent = a ^ 1;
                    nj.ts = ts;
                    nj.dist = dist + 1;
                }
            }
            a = next;
        }
        None
    }

    fn augment(&mut self, middle: u32) {
        // Bottleneck along the source side, middle arc and sink side.
        let mut bottleneck = self.arcs[middle as usize].r_cap;
        let mut i = self.arcs[(middle ^ 1) as usize].head;
        loop {
            let p = self.nodes[i as usize].parent;
            if p == TERMINAL {
                break;
            }
            bottleneck = bottleneck.min(self.arcs[(p ^ 1) as usize].r_cap);
            i = self.arcs[p as usize].head;
        }
        bottleneck = bottleneck.min(self.nodes[i as usize].tr_cap);

        let mut i = self.arcs[middle as usize].head;
        loop {
            let p = self.nodes[i as usize].parent;
            if p == TERMINAL {
                break;
            }
            bottleneck = bottleneck.min(self.arcs[p as usize].r_cap);
            i = self.arcs[p as usize].head;
        }
        bottleneck = bottleneck.min(-self.nodes[i as usize].tr_cap);

        self.arcs[(middle ^ 1) as usize].r_cap += bottleneck;
        self.arcs[middle as usize].r_cap -= bottleneck;

        let mut i = self.arcs[(middle ^ 1) as usize].head;
        loop {
            let p = self.nodes[i as usize].parent;
            if p == TERMINAL {
                break;
            }
            self.arcs[p as usize].r_cap += bottleneck;
            self.arcs[(p ^ 1) as usize].r_cap -= bottleneck;
            if self.arcs[(p ^ 1) as usize].r_cap <= 0.0 {
                self.arcs[(p ^ 1) as usize].r_cap = 0.0;
                self.make_orphan_front(i);
            }
            i = self.arcs[p as usize].head;
        }
        self.nodes[i as usize].tr_cap -= bottleneck;
        if self.nodes[i as usize].tr_cap <= 0.0 {
            self.nodes[i as usize].tr_cap = 0.0;
            self.make_orphan_front(i);
        }

        let mut i = self.arcs[middle as usize].head;
        loop {
            let p = self.nodes[i as usize].parent;
            if p == TERMINAL {
                break;
            }
            self.arcs[(p ^ 1) as usize].r_cap += bottleneck;
            self.arcs[p as usize].r_cap -= bottleneck;
            if self.arcs[p as usize].r_cap <= 0.0 {
                self.arcs[p as usize].r_cap = 0.0;
                self.make_orphan_front(i);
            }
            i = self.arcs[p as usize].head;
        }
        self.nodes[i as usize].tr_cap += bottleneck;
        if self.nodes[i as usize].tr_cap >= 0.0 {
            self.nodes[i as usize].tr_cap = 0.0;
            self.make_orphan_front(i);
        }

        self.flow += bottleneck;
    }

    fn make_orphan_front(&mut self, i: u32) {
        self.nodes[i as usize].parent = ORPHAN;
        self.orphans.push_front(i);
    }

    fn make_orphan_back(&mut self, i: u32) {
        self.nodes[i as usize].parent = ORPHAN;
        self.orphans.push_back(i);
    }

    /// Distance to a terminal through valid parents of `j`, or `INFINITE_D`
    /// if the path ends at an orphan. Marks the path with the current time.
    fn origin_distance(&mut self, start: u32) -> u32 {
        let time = self.time;
        let mut j = start;
        let mut d: u32 = 0;
        loop {
            let n = &self.nodes[j as usize];
            if n.ts == time {
                d += n.dist;
                break;
            }
            let a = n.parent;
            d += 1;
            if a == TERMINAL {
                let n = &mut self.nodes[j as usize];
                n.ts = time;
                n.dist = 1;
                break;
            }
            if a == ORPHAN {
                return INFINITE_D;
            }
            j = self.arcs[a as usize].head;
        }
        let mut dd = d;
        let mut j = start;
        while self.nodes[j as usize].ts != time {
            let n = &mut self.nodes[j as usize];
            n.ts = time;
            n.dist = dd;
            dd -= 1;
            j = self.arcs[n.parent as usize].head;
        }
        d
    }

    fn process_source_orphan(&mut self, i: u32) {
        self.process_orphan(i, false);
    }

    fn process_sink_orphan(&mut self, i: u32) {
        self.process_orphan(i, true);
    }

    fn process_orphan(&mut self, i: u32, sink: bool) {
        let mut best_arc = NONE;
        let mut best_d = INFINITE_D;

        let mut a0 = self.nodes[i as usize].first;
        while a0 != NONE {
            let cap = if sink {
                self.arcs[a0 as usize].r_cap
            } else {
                self.arcs[(a0 ^ 1) as usize].r_cap
            };
            let next = self.arcs[a0 as usize].next;
            if cap > 0.0 {
                let j = self.arcs[a0 as usize].head;
                let nj = &self.nodes[j as usize];
                if nj.is_sink == sink && nj.parent != NONE {
                    let d = self.origin_distance(j);
                    if d < best_d {
                        best_arc = a0;
                        best_d = d;
                    }
                }
            }
            a0 = next;
        }

        if best_arc != NONE {
            let time = self.time;
            let n = &mut self.nodes[i as usize];
            n.parent = best_arc;
            n.ts = time;
            n.dist = best_d + 1;
            return;
        }

        // No valid parent: free the node and re-activate or orphan its tree
        // neighbors.
        let mut a0 = self.nodes[i as usize].first;
        while a0 != NONE {
            let j = self.arcs[a0 as usize].head;
            let next = self.arcs[a0 as usize].next;
            let (j_sink, j_parent) = {
                let nj = &self.nodes[j as usize];
                (nj.is_sink, nj.parent)
            };
            if j_sink == sink && j_parent != NONE {
                let cap = if sink {
                    self.arcs[a0 as usize].r_cap
                } else {
                    self.arcs[(a0 ^ 1) as usize].r_cap
                };
                if cap > 0.0 {
                    self.set_active(j);
                }
                if j_parent != TERMINAL && j_parent != ORPHAN && self.arcs[j_parent as usize].head == i {
                    self.make_orphan_back(j);
                }
            }
            a0 = next;
        }
        self.nodes[i as usize].parent = NONE;
    }
}
