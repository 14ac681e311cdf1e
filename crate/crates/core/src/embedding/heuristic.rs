//! Chain construction by overuse-weighted shortest paths.
//!
//! Each logical node is placed at the root qubit minimizing its own weight
//! plus the path cost to every already-placed neighbor chain; the chain is
//! the root together with those paths. Qubit weights grow as
//! `base^usage`, so repeated rip-up-and-reroute passes push chains apart
//! until no qubit is shared.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng as _;

use super::EmbedConfig;
use crate::seed::Rng;
use crate::topology::{HardwareGraph, QubitId};

const NONE: u32 = u32::MAX;
/// Growth of the history cost on a qubit for each pass it stays overused.
const HISTORY_FACTOR: f64 = 2.0;

/// Effective hardware graph reindexed to `0..len` in qubit-id order.
pub(super) struct Target {
    pub ids: Vec<QubitId>,
    start: Vec<usize>,
    adj: Vec<u32>,
    /// No qubit within two couplers is disabled in the full hardware graph.
    intact: Vec<bool>,
}

impl Target {
    pub fn new(h: &HardwareGraph) -> Self {
        let ids: Vec<QubitId> = h.effective_qubits().collect();
        let mut local = vec![NONE; h.qubit_count()];
        for (i, &q) in ids.iter().enumerate() {
            local[q] = i as u32;
        }
        let mut start = Vec::with_capacity(ids.len() + 1);
        let mut adj = Vec::new();
        for &q in &ids {
            start.push(adj.len());
            adj.extend(h.active_neighbors(q).map(|r| local[r]));
        }
        start.push(adj.len());
        let intact = ids
            .iter()
            .map(|&q| {
                h.neighbors(q)
                    .iter()
                    .all(|&r| h.is_active(r) && h.neighbors(r).iter().all(|&t| h.is_active(t)))
            })
            .collect();
        Target { ids, start, adj, intact }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    fn neighbors(&self, q: u32) -> &[u32] {
        &self.adj[self.start[q as usize]..self.start[q as usize + 1]]
    }

    /// Sizes of the connected components, largest first.
    pub fn component_sizes(&self) -> Vec<usize> {
        let mut seen = vec![false; self.len()];
        let mut sizes = Vec::new();
        let mut queue = VecDeque::new();
        for s in 0..self.len() {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            queue.push_back(s as u32);
            let mut size = 0;
            while let Some(x) = queue.pop_front() {
                size += 1;
                for &y in self.neighbors(x) {
                    if !seen[y as usize] {
                        seen[y as usize] = true;
                        queue.push_back(y);
                    }
                }
            }
            sizes.push(size);
        }
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        sizes
    }
}

/// Component sizes of a logical graph, largest first.
pub(super) fn source_component_sizes(adj: &[Vec<usize>]) -> Vec<usize> {
    let mut seen = vec![false; adj.len()];
    let mut sizes = Vec::new();
    for s in 0..adj.len() {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut stack = vec![s];
        let mut size = 0;
        while let Some(x) = stack.pop() {
            size += 1;
            for &y in &adj[x] {
                if !seen[y] {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
        sizes.push(size);
    }
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    sizes
}

pub(super) enum TryOutcome {
    Found(Vec<Vec<u32>>),
    Failed,
    TimedOut,
}

pub(super) struct Search<'a> {
    target: &'a Target,
    src: &'a [Vec<usize>],
    cfg: &'a EmbedConfig,
    deadline: Option<Instant>,
    chains: Vec<Vec<u32>>,
    usage: Vec<u32>,
    history: Vec<f64>,
    /// Chain-shortening mode: qubits used by other chains are off limits.
    exclusive: bool,
    weight: Vec<f64>,
    /// Shortest-path field from each node's chain.
    dists: Vec<Vec<f64>>,
    parents: Vec<Vec<u32>>,
    /// Qubits reached by the last search from each chain.
    reached: Vec<Vec<u32>>,
    mark: Vec<u32>,
    stamp: u32,
    /// One frontier per neighbor being searched from.
    heaps: Vec<BinaryHeap<Reverse<(u64, u32)>>>,
    tops: BinaryHeap<Reverse<(u64, u32)>>,
    /// Per qubit: how many searches have settled it and the root cost
    /// accumulated from them, valid when `seen` equals `stamp`.
    settled: Vec<u32>,
    partial: Vec<f64>,
    seen: Vec<u32>,
    touched: Vec<u32>,
}

impl<'a> Search<'a> {
    pub fn new(target: &'a Target, src: &'a [Vec<usize>], cfg: &'a EmbedConfig, deadline: Option<Instant>) -> Self {
        let m = target.len();
        let n = src.len();
        Search {
            target,
            src,
            cfg,
            deadline,
            chains: vec![Vec::new(); src.len()],
            usage: vec![0; m],
            history: vec![1.0; m],
            exclusive: false,
            weight: vec![1.0; m],
            dists: vec![vec![f64::INFINITY; m]; n],
            parents: vec![vec![NONE; m]; n],
            reached: vec![Vec::new(); n],
            mark: vec![0; m],
            stamp: 0,
            heaps: (0..src.iter().map(Vec::len).max().unwrap_or(0)).map(|_| BinaryHeap::new()).collect(),
            tops: BinaryHeap::new(),
            settled: vec![0; m],
            partial: vec![0.0; m],
            seen: vec![0; m],
            touched: Vec::new(),
        }
    }

    fn set_usage(&mut self, q: u32, usage: u32) {
        let i = q as usize;
        self.usage[i] = usage;
        self.weight[i] = if self.exclusive && usage > 0 {
            f64::INFINITY
        } else {
            self.history[i] * self.cfg.weight_base.powi(usage as i32)
        };
    }

    /// Qubits that stay overused across passes get progressively more
    /// expensive, which breaks the fixed points plain overuse weights settle in.
    fn age_overlaps(&mut self) {
        for q in 0..self.usage.len() {
            if self.usage[q] > 1 {
                self.history[q] *= HISTORY_FACTOR;
                self.set_usage(q as u32, self.usage[q]);
            }
        }
    }

    fn rip_up(&mut self, v: usize) {
        for q in std::mem::take(&mut self.chains[v]) {
            self.set_usage(q, self.usage[q as usize] - 1);
        }
    }

    fn commit(&mut self, v: usize, chain: Vec<u32>) {
        for &q in &chain {
            self.set_usage(q, self.usage[q as usize] + 1);
        }
        self.chains[v] = chain;
    }

    /// Find the root qubit minimizing the summed distance to the chains of
    /// `placed`, where a root inside a chain pays its own weight for it.
    ///
    /// One Dijkstra search per neighbor chain, advanced together in order of
    /// distance. A qubit not yet settled by every search costs at least its
    /// settled part plus the current radius for each missing search, so the
    /// searches stop once that bound exceeds the best complete root. Paths
    /// longer than `limit` are not explored.
    fn best_root(&mut self, placed: &[usize], limit: f64) -> u32 {
        let k = placed.len();
        self.stamp += 1;
        let stamp = self.stamp;
        self.touched.clear();
        for (slot, &u) in placed.iter().enumerate() {
            let dist = &mut self.dists[u];
            let parent = &mut self.parents[u];
            for &q in &self.reached[u] {
                dist[q as usize] = f64::INFINITY;
                parent[q as usize] = NONE;
            }
            self.reached[u].clear();
            self.heaps[slot].clear();
            for &q in &self.chains[u] {
                dist[q as usize] = 0.0;
                self.reached[u].push(q);
                self.heaps[slot].push(Reverse((0, q)));
            }
        }
        // Smallest top of each search, keyed by (radius, slot). Entries go
        // stale once their search pops past them and are skipped.
        self.tops.clear();
        for slot in 0..k {
            if let Some(&Reverse((bits, _))) = self.heaps[slot].peek() {
                self.tops.push(Reverse((bits, slot as u32)));
            }
        }
        let mut root = NONE;
        let mut best = f64::INFINITY;
        let mut checked = 0.0;
        // Grow the search with the smallest radius so all of them advance
        // in lockstep.
        while let Some(Reverse((bits, slot))) = self.tops.pop() {
            let slot = slot as usize;
            match self.heaps[slot].peek() {
                Some(&Reverse((top, _))) if top == bits => {}
                _ => continue,
            }
            let r = f64::from_bits(bits);
            // Every qubit not yet settled by all searches costs at least
            // `r` per missing search, so stop once none can beat `best`.
            if root != NONE && r >= checked + 1.0 {
                checked = r;
                let mut bound = k as f64 * r;
                for &q in &self.touched {
                    let c = self.settled[q as usize];
                    if (c as usize) < k {
                        bound = bound.min(self.partial[q as usize] + (k - c as usize) as f64 * r);
                    }
                }
                if bound > best {
                    break;
                }
            }
            let Reverse((_, x)) = self.heaps[slot].pop().expect("peeked");
            let u = placed[slot];
            let d = self.dists[u][x as usize];
            if r > d {
                if let Some(&Reverse((top, _))) = self.heaps[slot].peek() {
                    self.tops.push(Reverse((top, slot as u32)));
                }
                continue;
            }
            let xi = x as usize;
            if self.seen[xi] != stamp {
                self.seen[xi] = stamp;
                self.settled[xi] = 0;
                self.partial[xi] = 0.0;
                self.touched.push(x);
            }
            self.settled[xi] += 1;
            self.partial[xi] += if d == 0.0 { self.weight[xi] } else { d };
            if self.settled[xi] as usize == k {
                let c = self.partial[xi];
                if c < best || (c == best && x < root) {
                    best = c;
                    root = x;
                }
            }
            for &y in self.target.neighbors(x) {
                let yi = y as usize;
                let nd = d + self.weight[yi];
                if nd < self.dists[u][yi] && nd <= limit {
                    if self.dists[u][yi] == f64::INFINITY {
                        self.reached[u].push(y);
                    }
                    self.dists[u][yi] = nd;
                    self.parents[u][yi] = x;
                    // Non-negative floats order like their bit patterns.
                    self.heaps[slot].push(Reverse((nd.to_bits(), y)));
                }
            }
            if let Some(&Reverse((top, _))) = self.heaps[slot].peek() {
                self.tops.push(Reverse((top, slot as u32)));
            }
        }
        root
    }

    /// Cost of the qubits strictly between the chain of `u` and `q`.
    fn interior(&self, u: usize, q: u32) -> f64 {
        let d = self.dists[u][q as usize];
        if d == 0.0 {
            0.0
        } else {
            d - self.weight[q as usize]
        }
    }

    /// Place `v` against its currently placed neighbors, with every path
    /// costing at most `limit`. Returns false when no root reaches all of
    /// them.
    fn place(&mut self, v: usize, rng: &mut Rng, first_free: bool, limit: f64) -> bool {
        let placed: Vec<usize> = self.src[v]
            .iter()
            .copied()
            .filter(|&u| !self.chains[u].is_empty())
            .collect();
        if placed.is_empty() {
            let q = self.free_qubit(rng, first_free);
            self.commit(v, vec![q]);
            return true;
        }
        // The root pays its own weight once per neighbor it has to reach,
        // so sitting on a used qubit is never cheaper than a short detour.
        let root = self.best_root(&placed, limit);
        if root == NONE {
            return false;
        }
        // Grow a tree from the root: each neighbor is reached by the
        // cheapest path into the chain built so far, nearest neighbors first.
        let mut slots = placed;
        slots.sort_by(|&a, &b| self.interior(a, root).total_cmp(&self.interior(b, root)).then(a.cmp(&b)));
        self.stamp += 1;
        let mut chain = vec![root];
        self.mark[root as usize] = self.stamp;
        for slot in slots {
            let mut attach = root;
            let mut cost = self.interior(slot, root);
            for &q in &chain[1..] {
                let c = self.interior(slot, q);
                if c < cost {
                    cost = c;
                    attach = q;
                }
            }
            let parent = &self.parents[slot];
            if parent[attach as usize] == NONE {
                continue;
            }
            let mut x = parent[attach as usize];
            while parent[x as usize] != NONE {
                if self.mark[x as usize] != self.stamp {
                    self.mark[x as usize] = self.stamp;
                    chain.push(x);
                }
                x = parent[x as usize];
            }
        }
        self.commit(v, chain);
        true
    }

    fn free_qubit(&self, rng: &mut Rng, first_free: bool) -> u32 {
        let m = self.target.len();
        if first_free {
            // Prefer open space over pockets left between earlier embeddings.
            let free = |q: &usize| self.usage[*q] == 0;
            return (0..m)
                .filter(free)
                .find(|&q| self.target.intact[q])
                .or_else(|| (0..m).find(free))
                .unwrap_or(0) as u32;
        }
        let free: Vec<u32> = (0..m as u32).filter(|&q| self.usage[q as usize] == 0).collect();
        if free.is_empty() {
            rng.random_range(0..m as u32)
        } else {
            free[rng.random_range(0..free.len())]
        }
    }

    fn overlap(&self) -> u64 {
        self.usage.iter().map(|&u| u.saturating_sub(1) as u64).sum()
    }

    fn timed_out(&self) -> bool {
        self.deadline.is_some_and(|d| Instant::now() >= d)
    }

    /// Breadth-first placement order; try 0 starts from the highest-degree
    /// node and visits neighbors by id, later tries randomize both.
    fn order(&self, rng: &mut Rng, randomize: bool) -> Vec<usize> {
        let n = self.src.len();
        let mut starts: Vec<usize> = (0..n).collect();
        if randomize {
            starts.shuffle(rng);
        } else {
            starts.sort_by_key(|&v| (Reverse(self.src[v].len()), v));
        }
        let mut seen = vec![false; n];
        let mut order = Vec::with_capacity(n);
        let mut queue = VecDeque::new();
        for s in starts {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            queue.push_back(s);
            while let Some(x) = queue.pop_front() {
                order.push(x);
                let mut next: Vec<usize> = self.src[x].iter().copied().filter(|&y| !seen[y]).collect();
                if randomize {
                    next.shuffle(rng);
                }
                for y in next {
                    seen[y] = true;
                    queue.push_back(y);
                }
            }
        }
        order
    }

    pub fn run(mut self, rng: &mut Rng, first_try: bool) -> TryOutcome {
        let mut order = self.order(rng, !first_try);
        for &v in &order {
            if !self.place(v, rng, first_try, f64::INFINITY) {
                return TryOutcome::Failed;
            }
        }
        let mut best = self.overlap();
        let mut stale = 0;
        for _ in 0..self.cfg.max_passes {
            if best == 0 {
                break;
            }
            if self.timed_out() {
                return TryOutcome::TimedOut;
            }
            self.age_overlaps();
            if !first_try {
                order.shuffle(rng);
            }
            for &v in &order {
                self.rip_up(v);
                if !self.place(v, rng, first_try, f64::INFINITY) {
                    return TryOutcome::Failed;
                }
            }
            let now = self.overlap();
            if now < best {
                best = now;
                stale = 0;
            } else {
                stale += 1;
                if stale >= self.cfg.patience {
                    break;
                }
            }
        }
        if best != 0 {
            return TryOutcome::Failed;
        }
        self.shrink(rng, &mut order, first_try);
        let mut chains = self.chains;
        cleanup(self.target, self.src, &mut chains);
        TryOutcome::Found(chains)
    }
}

impl Search<'_> {
    /// With a valid embedding in hand, re-place nodes on unused qubits only,
    /// accepting any chain that is no longer than before. Stops once the
    /// total chain length has not dropped for `patience` passes.
    fn shrink(&mut self, rng: &mut Rng, order: &mut [usize], first_try: bool) {
        self.exclusive = true;
        self.history.fill(1.0);
        for q in 0..self.usage.len() {
            self.set_usage(q as u32, self.usage[q]);
        }
        let mut best: usize = self.chains.iter().map(Vec::len).sum();
        let mut stale = 0;
        for _ in 0..self.cfg.max_passes {
            if self.timed_out() {
                break;
            }
            if !first_try {
                order.shuffle(rng);
            }
            for &v in order.iter() {
                let old = self.chains[v].clone();
                self.rip_up(v);
                if !self.place(v, rng, first_try, old.len() as f64) || self.chains[v].len() > old.len() {
                    self.rip_up(v);
                    self.commit(v, old);
                }
            }
            let now: usize = self.chains.iter().map(Vec::len).sum();
            if now < best {
                best = now;
                stale = 0;
            } else {
                stale += 1;
                if stale >= self.cfg.patience {
                    break;
                }
            }
        }
    }
}

/// Drop chain qubits whose removal keeps the chain connected and every
/// logical edge covered, until no such qubit remains.
fn cleanup(target: &Target, src: &[Vec<usize>], chains: &mut [Vec<u32>]) {
    let mut owner = vec![NONE; target.len()];
    for (v, chain) in chains.iter().enumerate() {
        for &q in chain {
            owner[q as usize] = v as u32;
        }
    }
    loop {
        let mut changed = false;
        for v in 0..chains.len() {
            let mut candidates = chains[v].clone();
            candidates.sort_unstable_by(|a, b| b.cmp(a));
            for q in candidates {
                if chains[v].len() == 1 {
                    break;
                }
                owner[q as usize] = NONE;
                if chain_connected(target, &owner, v as u32, &chains[v], q)
                    && src[v].iter().all(|&u| touches(target, &owner, &chains[v], q, u as u32))
                {
                    chains[v].retain(|&x| x != q);
                    changed = true;
                } else {
                    owner[q as usize] = v as u32;
                }
            }
        }
        if !changed {
            break;
        }
    }
}

fn chain_connected(target: &Target, owner: &[u32], v: u32, chain: &[u32], skip: u32) -> bool {
    let Some(&start) = chain.iter().find(|&&q| q != skip) else {
        return false;
    };
    let mut seen = vec![start];
    let mut stack = vec![start];
    while let Some(x) = stack.pop() {
        for &y in target.neighbors(x) {
            if y != skip && owner[y as usize] == v && !seen.contains(&y) {
                seen.push(y);
                stack.push(y);
            }
        }
    }
    seen.len() == chain.len() - 1
}

fn touches(target: &Target, owner: &[u32], chain: &[u32], skip: u32, u: u32) -> bool {
    chain
        .iter()
        .filter(|&&q| q != skip)
        .any(|&q| target.neighbors(q).iter().any(|&y| owner[y as usize] == u))
}
