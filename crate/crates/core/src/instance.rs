//! Sorting instances and the query-counting comparison oracle.
//!
//! An instance is an undirected graph over `n` vertices together with a
//! hidden total order. The order's consecutive pairs are always edges (the
//! planted Hamiltonian path); every other pair is an edge independently with
//! probability `p`. The graph structure is public; only edge directions are
//! hidden, and they can be learned solely through [`CountingOracle::query`],
//! which memoizes answers and counts distinct pairs queried.

use std::collections::{HashMap, HashSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng;
use crate::{Error, Result};

pub type Vertex = u32;

/// Outcome of comparing two vertices: `Before` means the first argument
/// precedes the second in the hidden order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Before,
    After,
}

impl Direction {
    pub fn flipped(self) -> Self {
        match self {
            Direction::Before => Direction::After,
            Direction::After => Direction::Before,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Deterministic,
    Stochastic,
}

/// Canonical unordered-pair key.
#[inline]
pub fn pair_key(u: Vertex, v: Vertex) -> (Vertex, Vertex) {
    if u < v {
        (u, v)
    } else {
        (v, u)
    }
}

#[derive(Debug, Clone)]
pub struct SortingInstance {
    n: usize,
    p: f64,
    seed: u64,
    /// `hidden_rank[v]` is v's 1-based position in the hidden order.
    hidden_rank: Vec<u32>,
    /// Sorted canonical pairs `(u, v)` with `u < v`.
    edges: Vec<(Vertex, Vertex)>,
    edge_set: HashSet<(Vertex, Vertex)>,
    adjacency: Vec<Vec<Vertex>>,
}

impl SortingInstance {
    /// Generates an instance: a uniform hidden order, the planted path, and
    /// each non-consecutive pair kept independently with probability `p`.
    /// Identical `(n, p, seed)` yield identical instances.
    pub fn generate(n: usize, p: f64, seed: u64) -> Result<Self> {
        validate_n_p(n, p)?;
        let mut perm_rng = rng::stream(seed, "instance.perm");
        let mut order: Vec<Vertex> = (0..n as Vertex).collect();
        // Fisher-Yates
        for i in (1..n).rev() {
            let j = perm_rng.random_range(0..=i);
            order.swap(i, j);
        }
        Self::generate_with_order(&order, p, seed)
    }

    /// Generates an instance around a fixed hidden order, resampling only the
    /// stochastic pairs. Lets tests and fixtures hold the order constant
    /// while re-rolling the graph.
    pub fn generate_with_order(order: &[Vertex], p: f64, seed: u64) -> Result<Self> {
        let n = order.len();
        validate_n_p(n, p)?;
        validate_order(order)?;
        let mut edges: Vec<(Vertex, Vertex)> = Vec::new();
        for w in order.windows(2) {
            edges.push(pair_key(w[0], w[1]));
        }
        let mut rank = vec![0u32; n];
        for (pos, &v) in order.iter().enumerate() {
            rank[v as usize] = pos as u32 + 1;
        }
        let mut edge_rng = rng::stream(seed, "instance.edges");
        for u in 0..n as Vertex {
            for v in u + 1..n as Vertex {
                if rank[u as usize].abs_diff(rank[v as usize]) == 1 {
                    continue; // path edge, already present
                }
                if p > 0.0 && edge_rng.random_bool(p) {
                    edges.push((u, v));
                }
            }
        }
        Self::from_edges_unchecked(n, p, seed, rank, edges)
    }

    /// Builds an instance from an explicit hidden order and edge list, for
    /// adversarial fixtures. The consecutive pairs of `order` are added if
    /// missing; `p` is recorded as a label only.
    pub fn from_edges(
        order: &[Vertex],
        extra_edges: &[(Vertex, Vertex)],
        p: f64,
        seed: u64,
    ) -> Result<Self> {
        let n = order.len();
        validate_n_p(n, p)?;
        validate_order(order)?;
        let mut rank = vec![0u32; n];
        for (pos, &v) in order.iter().enumerate() {
            rank[v as usize] = pos as u32 + 1;
        }
        let mut edges: Vec<(Vertex, Vertex)> = Vec::new();
        for w in order.windows(2) {
            edges.push(pair_key(w[0], w[1]));
        }
        for &(u, v) in extra_edges {
            if u == v || u as usize >= n || v as usize >= n {
                return Err(Error::InvalidArgument(format!("bad edge ({u}, {v})")));
            }
            edges.push(pair_key(u, v));
        }
        Self::from_edges_unchecked(n, p, seed, rank, edges)
    }

    fn from_edges_unchecked(
        n: usize,
        p: f64,
        seed: u64,
        hidden_rank: Vec<u32>,
        mut edges: Vec<(Vertex, Vertex)>,
    ) -> Result<Self> {
        edges.sort_unstable();
        edges.dedup();
        let edge_set: HashSet<(Vertex, Vertex)> = edges.iter().copied().collect();
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in &edges {
            adjacency[u as usize].push(v);
            adjacency[v as usize].push(u);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok(Self {
            n,
            p,
            seed,
            hidden_rank,
            edges,
            edge_set,
            adjacency,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(Vertex, Vertex)] {
        &self.edges
    }

    pub fn is_edge(&self, u: Vertex, v: Vertex) -> bool {
        u != v && self.edge_set.contains(&pair_key(u, v))
    }

    /// All vertices adjacent to `v` (ascending ids). Consults only public
    /// structure; performs no queries.
    pub fn neighbors(&self, v: Vertex) -> Result<&[Vertex]> {
        self.adjacency
            .get(v as usize)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown vertex {v}")))
    }

    pub fn edge_kind(&self, u: Vertex, v: Vertex) -> Result<EdgeKind> {
        if !self.is_edge(u, v) {
            return Err(Error::ForbiddenComparison { u, v });
        }
        Ok(self.kind_of_pair(u, v))
    }

    fn kind_of_pair(&self, u: Vertex, v: Vertex) -> EdgeKind {
        if self.hidden_rank[u as usize].abs_diff(self.hidden_rank[v as usize]) == 1 {
            EdgeKind::Deterministic
        } else {
            EdgeKind::Stochastic
        }
    }

    /// The hidden 1-based rank of each vertex. Test and diagnostic surface;
    /// sorting algorithms must go through an oracle instead.
    pub fn hidden_rank(&self) -> &[u32] {
        &self.hidden_rank
    }

    /// Vertices listed in hidden order (the ground-truth answer).
    pub fn hidden_order(&self) -> Vec<Vertex> {
        let mut order: Vec<Vertex> = (0..self.n as Vertex).collect();
        order.sort_unstable_by_key(|&v| self.hidden_rank[v as usize]);
        order
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&InstanceJson::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: InstanceJson = serde_json::from_str(text)?;
        raw.try_into()
    }
}

fn validate_n_p(n: usize, p: f64) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "n must be at least 2, got {n}"
        )));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!(
            "p must be in [0, 1], got {p}"
        )));
    }
    Ok(())
}

fn validate_order(order: &[Vertex]) -> Result<()> {
    let n = order.len();
    let mut seen = vec![false; n];
    for &v in order {
        if v as usize >= n || seen[v as usize] {
            return Err(Error::InvalidArgument("order is not a permutation".into()));
        }
        seen[v as usize] = true;
    }
    Ok(())
}

/// Serialized form: `{n, p, seed, hidden_rank, edges, kinds}`.
#[derive(Serialize, Deserialize)]
struct InstanceJson {
    n: usize,
    p: f64,
    seed: u64,
    hidden_rank: Vec<u32>,
    edges: Vec<(Vertex, Vertex)>,
    kinds: Vec<EdgeKind>,
}

impl From<&SortingInstance> for InstanceJson {
    fn from(inst: &SortingInstance) -> Self {
        InstanceJson {
            n: inst.n,
            p: inst.p,
            seed: inst.seed,
            hidden_rank: inst.hidden_rank.clone(),
            edges: inst.edges.clone(),
            kinds: inst
                .edges
                .iter()
                .map(|&(u, v)| inst.kind_of_pair(u, v))
                .collect(),
        }
    }
}

impl TryFrom<InstanceJson> for SortingInstance {
    type Error = Error;

    fn try_from(raw: InstanceJson) -> Result<Self> {
        validate_n_p(raw.n, raw.p)?;
        if raw.hidden_rank.len() != raw.n {
            return Err(Error::InvalidArgument("hidden_rank length mismatch".into()));
        }
        let mut seen = vec![false; raw.n];
        for &r in &raw.hidden_rank {
            if r < 1 || r as usize > raw.n || seen[r as usize - 1] {
                return Err(Error::InvalidArgument(
                    "hidden_rank is not a bijection".into(),
                ));
            }
            seen[r as usize - 1] = true;
        }
        if raw.kinds.len() != raw.edges.len() {
            return Err(Error::InvalidArgument("kinds length mismatch".into()));
        }
        let inst = SortingInstance::from_edges_unchecked(
            raw.n,
            raw.p,
            raw.seed,
            raw.hidden_rank,
            raw.edges.clone(),
        )?;
        if inst.edges.len() != raw.edges.len() {
            return Err(Error::InvalidArgument(
                "duplicate or malformed edges".into(),
            ));
        }
        // Path promise plus kind tags must agree with the hidden order.
        let order = inst.hidden_order();
        for w in order.windows(2) {
            if !inst.is_edge(w[0], w[1]) {
                return Err(Error::InvalidArgument(format!(
                    "missing path edge ({}, {})",
                    w[0], w[1]
                )));
            }
        }
        for (&(u, v), &kind) in raw.edges.iter().zip(&raw.kinds) {
            if inst.kind_of_pair(u, v) != kind {
                return Err(Error::InvalidArgument(format!(
                    "kind mismatch on edge ({u}, {v})"
                )));
            }
        }
        Ok(inst)
    }
}

/// One first-time query: the canonical pair `(u, v)` with `u < v` and the
/// direction of that canonical orientation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryEvent {
    pub u: Vertex,
    pub v: Vertex,
    pub direction: Direction,
}

/// The only gateway to edge directions. Memoizes answers; `query_count` is
/// the number of distinct pairs ever queried, the cost unit the lab measures.
pub struct CountingOracle<'a> {
    instance: &'a SortingInstance,
    answered: HashMap<(Vertex, Vertex), Direction>,
    trace: Vec<QueryEvent>,
}

impl<'a> CountingOracle<'a> {
    pub fn new(instance: &'a SortingInstance) -> Self {
        Self {
            instance,
            answered: HashMap::new(),
            trace: Vec::new(),
        }
    }

    pub fn instance(&self) -> &'a SortingInstance {
        self.instance
    }

    /// Ordered log of first-time queries (repeats never re-appear).
    pub fn trace(&self) -> &[QueryEvent] {
        &self.trace
    }

    pub fn into_trace(self) -> Vec<QueryEvent> {
        self.trace
    }
}

/// Comparison access as the sorting algorithms see it. [`ReversedOracle`]
/// wraps any implementation with flipped polarity, which is how the second
/// half of a sort reuses the same underlying query budget.
pub trait DirectionOracle {
    fn query(&mut self, u: Vertex, v: Vertex) -> Result<Direction>;
    fn query_count(&self) -> usize;
}

impl DirectionOracle for CountingOracle<'_> {
    fn query(&mut self, u: Vertex, v: Vertex) -> Result<Direction> {
        if u == v {
            return Err(Error::InvalidArgument(format!(
                "cannot compare {u} with itself"
            )));
        }
        if !self.instance.is_edge(u, v) {
            return Err(Error::ForbiddenComparison { u, v });
        }
        let key = pair_key(u, v);
        let canonical = match self.answered.get(&key) {
            Some(&dir) => dir,
            None => {
                let rank = self.instance.hidden_rank();
                let dir = if rank[key.0 as usize] < rank[key.1 as usize] {
                    Direction::Before
                } else {
                    Direction::After
                };
                self.answered.insert(key, dir);
                self.trace.push(QueryEvent {
                    u: key.0,
                    v: key.1,
                    direction: dir,
                });
                dir
            }
        };
        Ok(if u == key.0 {
            canonical
        } else {
            canonical.flipped()
        })
    }

    fn query_count(&self) -> usize {
        self.answered.len()
    }
}

/// View of an oracle with Before/After swapped.
pub struct ReversedOracle<'a, O: DirectionOracle>(pub &'a mut O);

impl<O: DirectionOracle> DirectionOracle for ReversedOracle<'_, O> {
    fn query(&mut self, u: Vertex, v: Vertex) -> Result<Direction> {
        Ok(self.0.query(u, v)?.flipped())
    }

    fn query_count(&self) -> usize {
        self.0.query_count()
    }
}
