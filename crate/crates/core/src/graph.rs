//! Dynamic simple graph with binary opinions.
//!
//! [`OpinionGraph`] keeps the ordered pair counts `N1, N0, N10, N11, N00` and
//! the set of discordant edges up to date under the two mutations the voter
//! dynamics need: [`OpinionGraph::flip`] and [`OpinionGraph::rewire`]. The
//! discordant set is a dense array plus a position map, so a uniform
//! discordant edge is drawn in O(1).
//!
//! Pair counts follow the ordered convention: an edge between two 1's adds 2
//! to `N11`, and a discordant edge adds exactly 1 to `N10`. Hence
//! `N11 + 2 N10 + N00` equals the degree sum at all times.

use rand::seq::SliceRandom;
use rand::Rng;
use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub type Vertex = u32;

/// Default number of whole-pairing restarts when building a regular graph.
pub const DEFAULT_REGULAR_ATTEMPTS: u32 = 1000;

/// Partner re-draws for a single stub before the pairing is restarted.
const PARTNER_TRIES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PairCounts {
    pub n1: u64,
    pub n0: u64,
    pub n10: u64,
    pub n11: u64,
    pub n00: u64,
}

impl PairCounts {
    /// `N11 + 2 N10 + N00`, the number of oriented edges.
    pub fn oriented_total(&self) -> u64 {
        self.n11 + 2 * self.n10 + self.n00
    }
}

/// Ordered path counts `N_ijk`: paths `x ~ y ~ z` with `z != x` and opinions
/// `(i, j, k)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TripleCounts {
    counts: [[[u64; 2]; 2]; 2],
}

impl TripleCounts {
    pub fn get(&self, i: u8, j: u8, k: u8) -> u64 {
        self.counts[i as usize][j as usize][k as usize]
    }

    pub(crate) fn add(&mut self, i: u8, j: u8, k: u8, by: u64) {
        self.counts[i as usize][j as usize][k as usize] += by;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().flatten().sum()
    }

    pub fn n100(&self) -> u64 {
        self.get(1, 0, 0)
    }
    pub fn n001(&self) -> u64 {
        self.get(0, 0, 1)
    }
    pub fn n101(&self) -> u64 {
        self.get(1, 0, 1)
    }
    pub fn n010(&self) -> u64 {
        self.get(0, 1, 0)
    }
    pub fn n110(&self) -> u64 {
        self.get(1, 1, 0)
    }
    pub fn n011(&self) -> u64 {
        self.get(0, 1, 1)
    }
}

/// How initial opinions are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpinionInit {
    /// I.i.d. Bernoulli(p) per vertex.
    #[default]
    Product,
    /// Exactly `round(p n)` ones at uniformly random positions.
    ExactCount,
}

#[inline]
fn edge_key(u: Vertex, v: Vertex) -> u64 {
    let (a, b) = if u < v { (u, v) } else { (v, u) };
    ((a as u64) << 32) | b as u64
}

/// Unordered edges with differing endpoint opinions.
#[derive(Debug, Clone, Default)]
struct DiscordantIndex {
    edges: Vec<(Vertex, Vertex)>,
    pos: FxHashMap<u64, u32>,
}

impl DiscordantIndex {
    fn insert(&mut self, u: Vertex, v: Vertex) {
        let key = edge_key(u, v);
        let (a, b) = if u < v { (u, v) } else { (v, u) };
        let idx = self.edges.len() as u32;
        if self.pos.insert(key, idx).is_none() {
            self.edges.push((a, b));
        } else {
            debug_assert!(false, "edge {a}-{b} already discordant");
        }
    }

    fn remove(&mut self, u: Vertex, v: Vertex) {
        let Some(idx) = self.pos.remove(&edge_key(u, v)) else {
            debug_assert!(false, "edge {u}-{v} not in discordant index");
            return;
        };
        let idx = idx as usize;
        let last = self.edges.len() - 1;
        if idx != last {
            let moved = self.edges[last];
            self.edges[idx] = moved;
            self.pos.insert(edge_key(moved.0, moved.1), idx as u32);
        }
        self.edges.pop();
    }

    fn contains(&self, u: Vertex, v: Vertex) -> bool {
        self.pos.contains_key(&edge_key(u, v))
    }

    fn clear(&mut self) {
        self.edges.clear();
        self.pos.clear();
    }
}

/// Simple undirected graph on `0..n` with a 0/1 opinion per vertex.
#[derive(Debug, Clone)]
pub struct OpinionGraph {
    opinion: Vec<u8>,
    adj: Vec<FxHashSet<Vertex>>,
    ones_nbrs: Vec<u32>,
    members: [Vec<Vertex>; 2],
    member_pos: Vec<u32>,
    discordant: DiscordantIndex,
    counts: PairCounts,
    edge_count: u64,
    degree_hist: Vec<u32>,
    max_degree: usize,
}

impl OpinionGraph {
    /// `n` isolated vertices, all with opinion 0.
    pub fn empty(n: usize) -> Self {
        assert!(n <= u32::MAX as usize, "vertex ids are 32-bit");
        OpinionGraph {
            opinion: vec![0; n],
            adj: vec![FxHashSet::default(); n],
            ones_nbrs: vec![0; n],
            members: [(0..n as Vertex).collect(), Vec::new()],
            member_pos: (0..n as u32).collect(),
            discordant: DiscordantIndex::default(),
            counts: PairCounts {
                n0: n as u64,
                ..PairCounts::default()
            },
            edge_count: 0,
            degree_hist: vec![n as u32],
            max_degree: 0,
        }
    }

    /// Builds a graph from an edge list and opinions, rejecting loops,
    /// parallel edges and out-of-range ids.
    pub fn from_edges(n: usize, edges: &[(Vertex, Vertex)], opinions: &[u8]) -> Result<Self> {
        if opinions.len() != n {
            return Err(invalid(format!(
                "expected {n} opinions, got {}",
                opinions.len()
            )));
        }
        if let Some(&o) = opinions.iter().find(|&&o| o > 1) {
            return Err(invalid(format!("opinion {o} is not 0 or 1")));
        }
        let mut g = OpinionGraph::empty(n);
        for &(u, v) in edges {
            if u as usize >= n || v as usize >= n {
                return Err(invalid(format!("edge {u}-{v} out of range for n = {n}")));
            }
            if u == v {
                return Err(invalid(format!("self-loop at {u}")));
            }
            if g.has_edge(u, v) {
                return Err(invalid(format!("parallel edge {u}-{v}")));
            }
            g.add_edge_unchecked(u, v);
        }
        g.set_opinions(opinions);
        Ok(g)
    }

    /// Random `l`-regular simple graph by configuration-model pairing.
    ///
    /// Stubs are paired one at a time; a pair that would create a loop or a
    /// parallel edge re-draws its partner, and a stub that cannot be placed
    /// restarts the pairing. At most `max_attempts` pairings are tried.
    pub fn regular<R: Rng + ?Sized>(
        n: usize,
        l: usize,
        rng: &mut R,
        max_attempts: u32,
    ) -> Result<Self> {
        if n == 0 {
            return Err(invalid("regular graph needs n > 0"));
        }
        if l >= n {
            return Err(invalid(format!("degree {l} must be below n = {n}")));
        }
        if (n * l) % 2 != 0 {
            return Err(invalid(format!("n*L = {} is odd", n * l)));
        }
        let mut stubs: Vec<Vertex> = Vec::with_capacity(n * l);
        'attempt: for _ in 0..max_attempts {
            stubs.clear();
            for v in 0..n as Vertex {
                stubs.extend(std::iter::repeat_n(v, l));
            }
            stubs.shuffle(rng);
            let mut g = OpinionGraph::empty(n);
            let mut remaining = stubs.len();
            while remaining > 0 {
                let a = stubs[remaining - 1];
                let mut placed = false;
                for _ in 0..PARTNER_TRIES {
                    let j = rng.random_range(0..remaining - 1);
                    let b = stubs[j];
                    if b != a && !g.has_edge(a, b) {
                        stubs.swap(j, remaining - 2);
                        g.add_edge_unchecked(a, b);
                        remaining -= 2;
                        placed = true;
                        break;
                    }
                }
                if !placed {
                    continue 'attempt;
                }
            }
            return Ok(g);
        }
        Err(Error::RetryExhausted {
            what: "regular graph pairing",
            attempts: max_attempts,
        })
    }

    /// Erdős–Rényi graph: each pair independently present with probability
    /// `mean_degree / (n - 1)`.
    pub fn erdos_renyi<R: Rng + ?Sized>(n: usize, mean_degree: f64, rng: &mut R) -> Result<Self> {
        if n < 2 {
            return Err(invalid("Erdős–Rényi graph needs n >= 2"));
        }
        let max = (n - 1) as f64;
        if !(0.0..=max).contains(&mean_degree) {
            return Err(invalid(format!(
                "mean degree {mean_degree} outside [0, {max}]"
            )));
        }
        let prob = mean_degree / max;
        let mut g = OpinionGraph::empty(n);
        if prob <= 0.0 {
            return Ok(g);
        }
        if prob >= 1.0 {
            for v in 1..n as Vertex {
                for w in 0..v {
                    g.add_edge_unchecked(v, w);
                }
            }
            return Ok(g);
        }
        // Geometric skipping over the pairs (v, w), w < v.
        let log_q = (1.0 - prob).ln();
        let (mut v, mut w) = (1usize, -1i64);
        while v < n {
            let r: f64 = rng.random();
            w += 1 + ((1.0 - r).ln() / log_q).floor() as i64;
            while w >= v as i64 && v < n {
                w -= v as i64;
                v += 1;
            }
            if v < n {
                g.add_edge_unchecked(v as Vertex, w as Vertex);
            }
        }
        Ok(g)
    }

    /// Redraws every opinion and rebuilds the derived counts.
    pub fn assign_opinions<R: Rng + ?Sized>(
        &mut self,
        p: f64,
        mode: OpinionInit,
        rng: &mut R,
    ) -> Result<()> {
        if !(0.0..=1.0).contains(&p) {
            return Err(invalid(format!("density {p} outside [0, 1]")));
        }
        let n = self.n();
        let mut ops = vec![0u8; n];
        match mode {
            OpinionInit::Product => {
                for o in ops.iter_mut() {
                    *o = rng.random_bool(p) as u8;
                }
            }
            OpinionInit::ExactCount => {
                let ones = (p * n as f64).round() as usize;
                let mut ids: Vec<usize> = (0..n).collect();
                let (chosen, _) = ids.partial_shuffle(rng, ones);
                for &v in chosen.iter() {
                    ops[v] = 1;
                }
            }
        }
        self.set_opinions(&ops);
        Ok(())
    }

    /// Replaces all opinions and recomputes counts from scratch.
    pub fn set_opinions(&mut self, opinions: &[u8]) {
        assert_eq!(opinions.len(), self.n());
        self.opinion.copy_from_slice(opinions);
        self.rebuild();
    }

    fn rebuild(&mut self) {
        let n = self.n();
        self.members = [Vec::new(), Vec::new()];
        for v in 0..n {
            let s = self.opinion[v] as usize;
            self.member_pos[v] = self.members[s].len() as u32;
            self.members[s].push(v as Vertex);
        }
        self.discordant.clear();
        let mut c = PairCounts {
            n1: self.members[1].len() as u64,
            n0: self.members[0].len() as u64,
            ..PairCounts::default()
        };
        for v in 0..n {
            let mut ones = 0;
            for &w in &self.adj[v] {
                let (a, b) = (self.opinion[v], self.opinion[w as usize]);
                ones += b as u32;
                match (a, b) {
                    (1, 1) => c.n11 += 1,
                    (0, 0) => c.n00 += 1,
                    (1, 0) => {
                        c.n10 += 1;
                        self.discordant.insert(v as Vertex, w);
                    }
                    _ => {}
                }
            }
            self.ones_nbrs[v] = ones;
        }
        self.counts = c;
    }

    pub fn n(&self) -> usize {
        self.opinion.len()
    }

    pub fn opinion(&self, v: Vertex) -> u8 {
        self.opinion[v as usize]
    }

    pub fn opinions(&self) -> &[u8] {
        &self.opinion
    }

    pub fn degree(&self, v: Vertex) -> usize {
        self.adj[v as usize].len()
    }

    pub fn neighbors(&self, v: Vertex) -> impl Iterator<Item = Vertex> + '_ {
        self.adj[v as usize].iter().copied()
    }

    /// Number of neighbors of `v` holding opinion 1.
    pub fn ones_neighbors(&self, v: Vertex) -> usize {
        self.ones_nbrs[v as usize] as usize
    }

    pub fn has_edge(&self, u: Vertex, v: Vertex) -> bool {
        self.adj[u as usize].contains(&v)
    }

    pub fn edge_count(&self) -> u64 {
        self.edge_count
    }

    pub fn degree_sum(&self) -> u64 {
        2 * self.edge_count
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn pair_counts(&self) -> PairCounts {
        self.counts
    }

    pub fn discordant_count(&self) -> usize {
        self.discordant.edges.len()
    }

    pub fn is_discordant(&self, u: Vertex, v: Vertex) -> bool {
        self.discordant.contains(u, v)
    }

    /// Discordant edges in index order, each as `(min, max)`.
    pub fn discordant_edges(&self) -> &[(Vertex, Vertex)] {
        &self.discordant.edges
    }

    /// Vertices currently holding opinion `s`.
    pub fn members(&self, s: u8) -> &[Vertex] {
        &self.members[s as usize]
    }

    /// All edges as `(min, max)`, sorted.
    pub fn edges(&self) -> Vec<(Vertex, Vertex)> {
        let mut out = Vec::with_capacity(self.edge_count as usize);
        for (u, nb) in self.adj.iter().enumerate() {
            for &v in nb {
                if (u as Vertex) < v {
                    out.push((u as Vertex, v));
                }
            }
        }
        out.sort_unstable();
        out
    }

    fn bump_degree(&mut self, v: Vertex, up: bool) {
        let d = self.adj[v as usize].len();
        // `d` is the degree after the change.
        let before = if up { d - 1 } else { d + 1 };
        if self.degree_hist.len() <= d.max(before) {
            self.degree_hist.resize(d.max(before) + 1, 0);
        }
        self.degree_hist[before] -= 1;
        self.degree_hist[d] += 1;
        if up {
            self.max_degree = self.max_degree.max(d);
        } else if before == self.max_degree && self.degree_hist[before] == 0 {
            self.max_degree = d;
        }
    }

    fn add_edge_unchecked(&mut self, u: Vertex, v: Vertex) {
        self.adj[u as usize].insert(v);
        self.adj[v as usize].insert(u);
        self.edge_count += 1;
        self.bump_degree(u, true);
        self.bump_degree(v, true);
        let (a, b) = (self.opinion[u as usize], self.opinion[v as usize]);
        self.ones_nbrs[u as usize] += b as u32;
        self.ones_nbrs[v as usize] += a as u32;
        match (a, b) {
            (1, 1) => self.counts.n11 += 2,
            (0, 0) => self.counts.n00 += 2,
            _ => {
                self.counts.n10 += 1;
                self.discordant.insert(u, v);
            }
        }
    }

    fn remove_edge_unchecked(&mut self, u: Vertex, v: Vertex) {
        self.adj[u as usize].remove(&v);
        self.adj[v as usize].remove(&u);
        self.edge_count -= 1;
        self.bump_degree(u, false);
        self.bump_degree(v, false);
        let (a, b) = (self.opinion[u as usize], self.opinion[v as usize]);
        self.ones_nbrs[u as usize] -= b as u32;
        self.ones_nbrs[v as usize] -= a as u32;
        match (a, b) {
            (1, 1) => self.counts.n11 -= 2,
            (0, 0) => self.counts.n00 -= 2,
            _ => {
                self.counts.n10 -= 1;
                self.discordant.remove(u, v);
            }
        }
    }

    /// Replaces edge `{u, v}` by `{u, z}`.
    pub fn rewire(&mut self, u: Vertex, v: Vertex, z: Vertex) -> Result<()> {
        let n = self.n() as Vertex;
        if u >= n || v >= n || z >= n {
            return Err(Error::Contract(format!(
                "rewire({u}, {v}, {z}) out of range"
            )));
        }
        if !self.has_edge(u, v) {
            return Err(Error::Contract(format!("rewire: {u}-{v} is not an edge")));
        }
        if z == u || self.has_edge(u, z) {
            return Err(Error::Contract(format!(
                "rewire: target {z} is {u} itself or already adjacent"
            )));
        }
        self.remove_edge_unchecked(u, v);
        self.add_edge_unchecked(u, z);
        Ok(())
    }

    /// Toggles the opinion of `v`. Costs O(degree(v)).
    pub fn flip(&mut self, v: Vertex) {
        let vi = v as usize;
        let s = self.opinion[vi];
        let t = 1 - s;
        self.opinion[vi] = t;

        // Membership lists.
        let pos = self.member_pos[vi] as usize;
        let list = &mut self.members[s as usize];
        let last = *list.last().expect("vertex missing from its opinion class");
        list.swap_remove(pos);
        if last != v {
            self.member_pos[last as usize] = pos as u32;
        }
        self.member_pos[vi] = self.members[t as usize].len() as u32;
        self.members[t as usize].push(v);
        if t == 1 {
            self.counts.n1 += 1;
            self.counts.n0 -= 1;
        } else {
            self.counts.n1 -= 1;
            self.counts.n0 += 1;
        }

        let nbrs = std::mem::take(&mut self.adj[vi]);
        for &w in &nbrs {
            let ow = self.opinion[w as usize];
            if t == 1 {
                self.ones_nbrs[w as usize] += 1;
            } else {
                self.ones_nbrs[w as usize] -= 1;
            }
            if ow == s {
                // was s-s, now discordant
                if s == 1 {
                    self.counts.n11 -= 2;
                } else {
                    self.counts.n00 -= 2;
                }
                self.counts.n10 += 1;
                self.discordant.insert(v, w);
            } else {
                // was discordant, now t-t
                self.counts.n10 -= 1;
                if t == 1 {
                    self.counts.n11 += 2;
                } else {
                    self.counts.n00 += 2;
                }
                self.discordant.remove(v, w);
            }
        }
        self.adj[vi] = nbrs;
    }

    /// A uniformly random discordant edge, or `None` when there is none.
    pub fn sample_discordant<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<(Vertex, Vertex)> {
        let edges = &self.discordant.edges;
        if edges.is_empty() {
            None
        } else {
            Some(edges[rng.random_range(0..edges.len())])
        }
    }

    /// Exact `N_ijk` by a per-middle-vertex scan, O(Σ degree).
    pub fn triple_counts(&self) -> TripleCounts {
        let mut t = TripleCounts::default();
        for y in 0..self.n() {
            let j = self.opinion[y];
            let d = self.adj[y].len() as u64;
            let ones = self.ones_nbrs[y] as u64;
            let by_state = [d - ones, ones];
            for i in 0..2u8 {
                for k in 0..2u8 {
                    let ci = by_state[i as usize];
                    let ck = by_state[k as usize];
                    let paths = if i == k { ci * ck - ci } else { ci * ck };
                    t.add(i, j, k, paths);
                }
            }
        }
        t
    }

    /// Recounts pair statistics from the adjacency alone.
    pub fn recount(&self) -> PairCounts {
        let mut c = PairCounts::default();
        for v in 0..self.n() {
            if self.opinion[v] == 1 {
                c.n1 += 1;
            } else {
                c.n0 += 1;
            }
            for &w in &self.adj[v] {
                match (self.opinion[v], self.opinion[w as usize]) {
                    (1, 1) => c.n11 += 1,
                    (0, 0) => c.n00 += 1,
                    (1, 0) => c.n10 += 1,
                    _ => {}
                }
            }
        }
        c
    }

    /// Checks every maintained quantity against a from-scratch recount.
    pub fn check_consistency(&self) -> Result<()> {
        let fresh = self.recount();
        if fresh != self.counts {
            return Err(Error::Contract(format!(
                "pair counts drifted: maintained {:?}, recount {fresh:?}",
                self.counts
            )));
        }
        if self.counts.oriented_total() != self.degree_sum() {
            return Err(Error::Contract("N11 + 2 N10 + N00 != degree sum".into()));
        }
        if self.discordant.edges.len() as u64 != self.counts.n10 {
            return Err(Error::Contract("discordant index size != N10".into()));
        }
        for &(u, v) in &self.discordant.edges {
            if !self.has_edge(u, v) || self.opinion(u) == self.opinion(v) {
                return Err(Error::Contract(format!("stale discordant edge {u}-{v}")));
            }
        }
        for v in 0..self.n() {
            let ones = self.adj[v]
                .iter()
                .filter(|&&w| self.opinion[w as usize] == 1)
                .count();
            if ones != self.ones_nbrs[v] as usize {
                return Err(Error::Contract(format!("ones-neighbor count stale at {v}")));
            }
            if self.adj[v].contains(&(v as Vertex)) {
                return Err(Error::Contract(format!("self-loop at {v}")));
            }
        }
        let true_max = self.adj.iter().map(|a| a.len()).max().unwrap_or(0);
        if true_max != self.max_degree {
            return Err(Error::Contract("max degree stale".into()));
        }
        Ok(())
    }
}
