//! Boykov-Kolmogorov augmenting-path max-flow on a graph with terminal
//! links, specialised for pixel grids. Node order is the insertion order, so
//! results are deterministic.

use std::collections::VecDeque;

const NONE: u32 = u32::MAX;
const TERMINAL: u32 = u32::MAX - 1;
const ORPHAN: u32 = u32::MAX - 2;
const INFINITE_DIST: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Segment {
    Source,
    Sink,
}

struct PendingEdge {
    from: u32,
    to: u32,
    cap: f64,
    rev_cap: f64,
}

/// Graph builder. Add all edges, then call [`GraphCut::maxflow`].
pub struct GraphCut {
    n: usize,
    pending: Vec<PendingEdge>,
    tr_cap: Vec<f64>,
    flow: f64,

    // CSR arc storage, populated by `maxflow`
    first: Vec<u32>,
    head: Vec<u32>,
    sister: Vec<u32>,
    r_cap: Vec<f64>,

    parent: Vec<u32>,
    is_sink: Vec<bool>,
    ts: Vec<u32>,
    dist: Vec<u32>,
    active_flag: Vec<bool>,
    time: u32,
}

impl GraphCut {
    pub fn new(nodes: usize) -> Self {
        Self {
            n: nodes,
            pending: Vec::new(),
            tr_cap: vec![0.0; nodes],
            flow: 0.0,
            first: Vec::new(),
            head: Vec::new(),
            sister: Vec::new(),
            r_cap: Vec::new(),
            parent: Vec::new(),
            is_sink: Vec::new(),
            ts: Vec::new(),
            dist: Vec::new(),
            active_flag: Vec::new(),
            time: 0,
        }
    }

    /// Capacities of source->node and node->sink.
    pub fn add_terminal(&mut self, node: usize, to_source: f64, to_sink: f64) {
        debug_assert!(to_source >= 0.0 && to_sink >= 0.0);
        let delta = self.tr_cap[node];
        // Only the difference matters; the common part is cut either way.
        let (source, sink) = if delta > 0.0 { (to_source + delta, to_sink) } else { (to_source, to_sink - delta) };
        self.flow += source.min(sink);
        self.tr_cap[node] = source - sink;
    }

    pub fn add_edge(&mut self, from: usize, to: usize, cap: f64, rev_cap: f64) {
        debug_assert!(from != to && cap >= 0.0 && rev_cap >= 0.0);
        self.pending.push(PendingEdge { from: from as u32, to: to as u32, cap, rev_cap });
    }

    fn build_csr(&mut self) {
        let mut degree = vec![0u32; self.n + 1];
        for e in &self.pending {
            degree[e.from as usize] += 1;
            degree[e.to as usize] += 1;
        }
        self.first = vec![0; self.n + 1];
        for i in 0..self.n {
            self.first[i + 1] = self.first[i] + degree[i];
        }
        let m = self.first[self.n] as usize;
        self.head = vec![0; m];
        self.sister = vec![0; m];
        self.r_cap = vec![0.0; m];
        let mut fill: Vec<u32> = self.first[..self.n].to_vec();
        for e in &self.pending {
            let a = fill[e.from as usize];
            fill[e.from as usize] += 1;
            let b = fill[e.to as usize];
            fill[e.to as usize] += 1;
            self.head[a as usize] = e.to;
            self.r_cap[a as usize] = e.cap;
            self.sister[a as usize] = b;
            self.head[b as usize] = e.from;
            self.r_cap[b as usize] = e.rev_cap;
            self.sister[b as usize] = a;
        }
        self.pending = Vec::new();
    }

    fn arcs(&self, i: usize) -> std::ops::Range<usize> {
        self.first[i] as usize..self.first[i + 1] as usize
    }

    /// Runs max-flow and returns its value (including the terminal-link
    /// constant absorbed by `add_terminal`).
    pub fn maxflow(&mut self) -> f64 {
        self.build_csr();
        let n = self.n;
        self.parent = vec![NONE; n];
        self.is_sink = vec![false; n];
        self.ts = vec![0; n];
        self.dist = vec![0; n];
        self.active_flag = vec![false; n];
        self.time = 0;
        let mut active: VecDeque<u32> = VecDeque::new();
        for i in 0..n {
            if self.tr_cap[i] != 0.0 {
                self.is_sink[i] = self.tr_cap[i] < 0.0;
                self.parent[i] = TERMINAL;
                self.dist[i] = 1;
                self.active_flag[i] = true;
                active.push_back(i as u32);
            }
        }
        let mut orphans: VecDeque<u32> = VecDeque::new();

        loop {
            // Growth stage: find an active node and an arc to the other tree.
            let mut middle: Option<usize> = None;
            while let Some(&front) = active.front() {
                let i = front as usize;
                if self.parent[i] == NONE {
                    active.pop_front();
                    self.active_flag[i] = false;
                    continue;
                }
                for a in self.arcs(i) {
                    let j = self.head[a] as usize;
                    if !self.is_sink[i] {
                        if self.r_cap[a] <= 0.0 {
                            continue;
                        }
                        if self.parent[j] == NONE {
                            self.is_sink[j] = false;
                            self.parent[j] = self.sister[a];
                            self.ts[j] = self.ts[i];
                            self.dist[j] = self.dist[i] + 1;
                            self.activate(&mut active, j);
                        } else if self.is_sink[j] {
                            middle = Some(a);
                            break;
                        } else if self.ts[j] <= self.ts[i] && self.dist[j] > self.dist[i] {
                            self.parent[j] = self.sister[a];
                            self.ts[j] = self.ts[i];
                            self.dist[j] = self.dist[i] + 1;
                        }
                    } else {
                        let s = self.sister[a] as usize;
                        if self.r_cap[s] <= 0.0 {
                            continue;
                        }
                        if self.parent[j] == NONE {
                            self.is_sink[j] = true;
                            self.parent[j] = self.sister[a];
                            self.ts[j] = self.ts[i];
                            self.dist[j] = self.dist[i] + 1;
                            self.activate(&mut active, j);
                        } else if !self.is_sink[j] {
                            middle = Some(s);
                            break;
                        } else if self.ts[j] <= self.ts[i] && self.dist[j] > self.dist[i] {
                            self.parent[j] = self.sister[a];
                            self.ts[j] = self.ts[i];
                            self.dist[j] = self.dist[i] + 1;
                        }
                    }
                }
                if middle.is_some() {
                    break;
                }
                active.pop_front();
                self.active_flag[i] = false;
            }
            let Some(middle) = middle else { break };

            self.time += 1;
            self.augment(middle, &mut orphans);
            self.adopt(&mut orphans, &mut active);
        }
        self.flow
    }

    fn activate(&mut self, active: &mut VecDeque<u32>, j: usize) {
        if !self.active_flag[j] {
            self.active_flag[j] = true;
            active.push_back(j as u32);
        }
    }

    fn augment(&mut self, middle: usize, orphans: &mut VecDeque<u32>) {
        let src_side = self.head[self.sister[middle] as usize] as usize;
        let sink_side = self.head[middle] as usize;

        let mut bottleneck = self.r_cap[middle];
        let mut i = src_side;
        loop {
            let a = self.parent[i];
            if a == TERMINAL {
                bottleneck = bottleneck.min(self.tr_cap[i]);
                break;
            }
            bottleneck = bottleneck.min(self.r_cap[self.sister[a as usize] as usize]);
            i = self.head[a as usize] as usize;
        }
        let mut i = sink_side;
        loop {
            let a = self.parent[i];
            if a == TERMINAL {
                bottleneck = bottleneck.min(-self.tr_cap[i]);
                break;
            }
            bottleneck = bottleneck.min(self.r_cap[a as usize]);
            i = self.head[a as usize] as usize;
        }

        self.r_cap[self.sister[middle] as usize] += bottleneck;
        self.r_cap[middle] -= bottleneck;

        let mut i = src_side;
        loop {
            let a = self.parent[i];
            if a == TERMINAL {
                self.tr_cap[i] -= bottleneck;
                if self.tr_cap[i] <= 0.0 {
                    self.tr_cap[i] = 0.0;
                    self.make_orphan(i, orphans);
                }
                break;
            }
            let a = a as usize;
            let s = self.sister[a] as usize;
            self.r_cap[a] += bottleneck;
            self.r_cap[s] -= bottleneck;
            let next = self.head[a] as usize;
            if self.r_cap[s] <= 0.0 {
                self.r_cap[s] = 0.0;
                self.make_orphan(i, orphans);
            }
            i = next;
        }
        let mut i = sink_side;
        loop {
            let a = self.parent[i];
            if a == TERMINAL {
                self.tr_cap[i] += bottleneck;
                if self.tr_cap[i] >= 0.0 {
                    self.tr_cap[i] = 0.0;
                    self.make_orphan(i, orphans);
                }
                break;
            }
            let a = a as usize;
            let s = self.sister[a] as usize;
            self.r_cap[s] += bottleneck;
            self.r_cap[a] -= bottleneck;
            let next = self.head[a] as usize;
            if self.r_cap[a] <= 0.0 {
                self.r_cap[a] = 0.0;
                self.make_orphan(i, orphans);
            }
            i = next;
        }
        self.flow += bottleneck;
    }

    fn make_orphan(&mut self, i: usize, orphans: &mut VecDeque<u32>) {
        self.parent[i] = ORPHAN;
        orphans.push_front(i as u32);
    }

    fn adopt(&mut self, orphans: &mut VecDeque<u32>, active: &mut VecDeque<u32>) {
        while let Some(o) = orphans.pop_front() {
            let i = o as usize;
            let sink = self.is_sink[i];
            let mut best: Option<(usize, u32)> = None;
            for a0 in self.arcs(i) {
                let cap = if sink { self.r_cap[a0] } else { self.r_cap[self.sister[a0] as usize] };
                if cap <= 0.0 {
                    continue;
                }
                let j = self.head[a0] as usize;
                if self.is_sink[j] != sink || self.parent[j] == NONE {
                    continue;
                }
                // Walk to the root to verify j is still attached to a terminal.
                let mut d: u32 = 0;
                let mut k = j;
                loop {
                    if self.ts[k] == self.time {
                        d = d.saturating_add(self.dist[k]);
                        break;
                    }
                    let a = self.parent[k];
                    d += 1;
                    if a == TERMINAL {
                        self.ts[k] = self.time;
                        self.dist[k] = 1;
                        break;
                    }
                    if a == ORPHAN {
                        d = INFINITE_DIST;
                        break;
                    }
                    k = self.head[a as usize] as usize;
                }
                if d < INFINITE_DIST {
                    if best.is_none_or(|(_, bd)| d < bd) {
                        best = Some((a0, d));
                    }
                    let mut k = j;
                    while self.ts[k] != self.time {
                        self.ts[k] = self.time;
                        self.dist[k] = d;
                        d -= 1;
                        k = self.head[self.parent[k] as usize] as usize;
                    }
                }
            }
            if let Some((a0, d)) = best {
                self.parent[i] = a0 as u32;
                self.ts[i] = self.time;
                self.dist[i] = d + 1;
                continue;
            }
            // No valid parent: i becomes free.
            self.parent[i] = NONE;
            for a0 in self.arcs(i) {
                let j = self.head[a0] as usize;
                if self.is_sink[j] != sink {
                    continue;
                }
                let pj = self.parent[j];
                if pj == NONE {
                    continue;
                }
                let cap = if sink { self.r_cap[a0] } else { self.r_cap[self.sister[a0] as usize] };
                if cap > 0.0 {
                    self.activate(active, j);
                }
                if pj != TERMINAL && pj != ORPHAN && self.head[pj as usize] as usize == i {
                    self.parent[j] = ORPHAN;
                    orphans.push_back(j as u32);
                }
            }
        }
    }

    /// Side of the minimum cut. Nodes not reachable from the source in the
    /// residual graph are on the sink side.
    pub fn segment(&self, node: usize) -> Segment {
        if self.parent[node] != NONE && !self.is_sink[node] {
            Segment::Source
        } else {
            Segment::Sink
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Exhaustive min-cut over all 2^n labelings.
    fn brute_force_min_cut(n: usize, terminals: &[(f64, f64)], edges: &[(usize, usize, f64, f64)]) -> f64 {
        let mut best = f64::INFINITY;
        for mask in 0u32..(1 << n) {
            let src = |i: usize| mask & (1 << i) != 0;
            let mut cost = 0.0;
            for (i, &(s, t)) in terminals.iter().enumerate() {
                cost += if src(i) { t } else { s };
            }
            for &(u, v, c, rc) in edges {
                if src(u) && !src(v) {
                    cost += c;
                }
                if src(v) && !src(u) {
                    cost += rc;
                }
            }
            best = best.min(cost);
        }
        best
    }

    fn cut_cost(g: &GraphCut, terminals: &[(f64, f64)], edges: &[(usize, usize, f64, f64)]) -> f64 {
        let src = |i: usize| g.segment(i) == Segment::Source;
        let mut cost = 0.0;
        for (i, &(s, t)) in terminals.iter().enumerate() {
            cost += if src(i) { t } else { s };
        }
        for &(u, v, c, rc) in edges {
            if src(u) && !src(v) {
                cost += c;
            }
            if src(v) && !src(u) {
                cost += rc;
            }
        }
        cost
    }

    #[test]
    fn two_node_chain() {
        let mut g = GraphCut::new(2);
        g.add_terminal(0, 5.0, 0.0);
        g.add_terminal(1, 0.0, 5.0);
        g.add_edge(0, 1, 3.0, 3.0);
        assert_eq!(g.maxflow(), 3.0);
        assert_eq!(g.segment(0), Segment::Source);
        assert_eq!(g.segment(1), Segment::Sink);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]
        #[test]
        fn matches_exhaustive_min_cut(
            n in 2usize..9,
            raw_terms in proptest::collection::vec((0u8..10, 0u8..10), 9),
            raw_edges in proptest::collection::vec((0usize..9, 0usize..9, 0u8..10, 0u8..10), 0..20),
        ) {
            let terminals: Vec<(f64, f64)> =
                raw_terms[..n].iter().map(|&(s, t)| (s as f64, t as f64)).collect();
            let edges: Vec<(usize, usize, f64, f64)> = raw_edges
                .iter()
                .filter(|e| e.0 % n != e.1 % n)
                .map(|&(u, v, c, rc)| (u % n, v % n, c as f64, rc as f64))
                .collect();
            let mut g = GraphCut::new(n);
            for (i, &(s, t)) in terminals.iter().enumerate() {
                g.add_terminal(i, s, t);
            }
            for &(u, v, c, rc) in &edges {
                g.add_edge(u, v, c, rc);
            }
            let flow = g.maxflow();
            let expected = brute_force_min_cut(n, &terminals, &edges);
            prop_assert!((flow - expected).abs() < 1e-9, "flow {flow} expected {expected}");
            prop_assert!((cut_cost(&g, &terminals, &edges) - expected).abs() < 1e-9);
        }
    }
}
