//! The leveled elimination sorter for stochastic instances.
//!
//! Vertices live in nested levels `L_1 ⊆ L_2 ⊆ … ⊆ L_{q+c}` with target size
//! `s_i = 2^i / p` for level `i`. A vertex is kept out of level `L_i` when
//! some earlier undiscovered vertex `u ∈ L_{i+c}` shares an `E_i` edge with
//! it; the blocker is recorded so the vertex can re-advance once the blocker
//! is discovered. Discovery alternates with incremental level updates and a
//! doubling rebuild schedule; each next vertex is found by eliminating
//! candidates (bottom-level neighbors of the last discovery) against the
//! levels from the bottom up.
//!
//! The sorter recovers the first half of the order, then re-runs the same
//! pipeline through a direction-reversed oracle view to recover the second
//! half; memoization makes re-asked pairs free, so the two passes share one
//! query budget.

use crate::edge_partition::{default_q, EdgePartition};
use crate::instance::{
    CountingOracle, Direction, DirectionOracle, QueryEvent, ReversedOracle, SortingInstance, Vertex,
};
use crate::rng;
use crate::{Error, Result};

/// Tuning knobs; `None` picks the defaults derived from the instance.
#[derive(Debug, Clone, PartialEq)]
pub struct SortParams {
    /// Promotion look-ahead: blocking for level `i` consults `L_{i+c}`.
    pub c: usize,
    /// Level count; defaults to `ceil(log2(max(2, n*p)))`.
    pub q: Option<usize>,
    /// Rebuild stride; defaults to `1 / (16 p)`.
    pub rebuild_base: Option<f64>,
}

impl Default for SortParams {
    fn default() -> Self {
        Self {
            c: 8,
            q: None,
            rebuild_base: None,
        }
    }
}

impl SortParams {
    fn resolve(&self, n: usize, p: f64) -> Result<Resolved> {
        if self.c < 1 {
            return Err(Error::InvalidArgument("c must be at least 1".into()));
        }
        let q = self.q.unwrap_or_else(|| default_q(n, p));
        if q < 1 {
            return Err(Error::InvalidArgument("q must be at least 1".into()));
        }
        let rebuild_base = match self.rebuild_base {
            Some(b) if b > 0.0 => b,
            Some(b) => {
                return Err(Error::InvalidArgument(format!(
                    "rebuild_base must be positive, got {b}"
                )))
            }
            None if p > 0.0 => 1.0 / (16.0 * p),
            None => f64::INFINITY, // p = 0: never rebuild on schedule
        };
        Ok(Resolved {
            c: self.c,
            q,
            rebuild_base,
        })
    }
}

#[derive(Debug, Clone, Copy)]
struct Resolved {
    c: usize,
    q: usize,
    rebuild_base: f64,
}

/// Nested level assignment plus blocker bookkeeping.
///
/// `low[v]` is the lowest level containing `v`; nesting makes that a full
/// description. Undiscovered vertices always sit in the top levels
/// (`low <= q+1`); discovered vertices leave every level.
#[derive(Debug, Clone)]
pub struct LevelState {
    q: usize,
    c: usize,
    low: Vec<u32>,
    elim: Vec<Option<Vertex>>,
    discovered: Vec<Vertex>,
    is_discovered: Vec<bool>,
}

impl LevelState {
    const NO_LEVEL: u32 = u32::MAX;

    pub fn new(n: usize, q: usize, c: usize) -> Self {
        Self {
            q,
            c,
            low: vec![q as u32 + 1; n],
            elim: vec![None; n],
            discovered: Vec::new(),
            is_discovered: vec![false; n],
        }
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn c(&self) -> usize {
        self.c
    }

    pub fn top_level(&self) -> usize {
        self.q + self.c
    }

    #[inline]
    pub fn in_level(&self, v: Vertex, i: usize) -> bool {
        self.low[v as usize] as usize <= i
    }

    /// Lowest level containing `v`, `None` once discovered.
    pub fn lowest_level(&self, v: Vertex) -> Option<usize> {
        let low = self.low[v as usize];
        (low != Self::NO_LEVEL).then_some(low as usize)
    }

    /// Members of `L_i`, ascending by id.
    pub fn members(&self, i: usize) -> Vec<Vertex> {
        (0..self.low.len() as Vertex)
            .filter(|&v| self.in_level(v, i))
            .collect()
    }

    pub fn blocker(&self, v: Vertex) -> Option<Vertex> {
        self.elim[v as usize]
    }

    pub fn is_discovered(&self, v: Vertex) -> bool {
        self.is_discovered[v as usize]
    }

    pub fn discovered(&self) -> &[Vertex] {
        &self.discovered
    }

    fn mark_discovered(&mut self, v: Vertex) {
        self.low[v as usize] = Self::NO_LEVEL;
        self.elim[v as usize] = None;
        self.is_discovered[v as usize] = true;
        self.discovered.push(v);
    }
}

/// Hooks for diagnostics and trace logging; every callback defaults to a
/// no-op.
pub trait SortObserver {
    fn on_pass(&mut self, _direction: PassDirection) {}
    fn on_discover(&mut self, _ell: usize, _vertex: Vertex, _queries: usize) {}
    fn on_rebuild(&mut self, _top_level: usize, _ell: usize, _state: &LevelState, _queries: usize) {
    }
}

/// Observer that ignores everything.
pub struct NullObserver;

impl SortObserver for NullObserver {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PassDirection {
    Forward,
    Reverse,
}

/// Finds the overall minimum by walking edges downward from an arbitrary
/// start, keeping the best vertex seen and the set of vertices known to come
/// after it. Uses at most `n` queries and never touches levels.
pub fn find_first<O: DirectionOracle>(
    instance: &SortingInstance,
    oracle: &mut O,
) -> Result<Vertex> {
    let (a, b) = *instance
        .edges()
        .first()
        .ok_or_else(|| Error::Internal("instance has no edges".into()))?;
    let mut after = vec![false; instance.n()];
    let mut best = match oracle.query(a, b)? {
        Direction::Before => {
            after[b as usize] = true;
            a
        }
        Direction::After => {
            after[a as usize] = true;
            b
        }
    };
    'walk: loop {
        for &u in instance.neighbors(best)? {
            if after[u as usize] {
                continue;
            }
            if oracle.query(u, best)? == Direction::Before {
                after[best as usize] = true;
                best = u;
            } else {
                after[u as usize] = true;
            }
            continue 'walk;
        }
        return Ok(best);
    }
}

/// Rebuilds `L_i` from the current `L_{i+1}` and then every level below it,
/// top-down. A vertex stays out of `L_i` when some `u ∈ L_{i+c}` with an
/// `E_i` edge to it answers `u ≺ v`; the first such blocker in id order is
/// recorded.
pub fn create_level<O: DirectionOracle>(
    state: &mut LevelState,
    partition: &EdgePartition,
    oracle: &mut O,
    i: usize,
) -> Result<()> {
    if i < 1 || i > state.q {
        return Err(Error::InvalidArgument(format!(
            "rebuild level {i} out of 1..={}",
            state.q
        )));
    }
    for level in (1..=i).rev() {
        let members = state.members(level + 1);
        for &v in &members {
            state.elim[v as usize] = None;
            let mut blocked_by = None;
            for &u in partition.level_neighbors(level, v) {
                if state.in_level(u, level + state.c) && oracle.query(u, v)? == Direction::Before {
                    blocked_by = Some(u);
                    break;
                }
            }
            state.low[v as usize] = match blocked_by {
                Some(u) => {
                    state.elim[v as usize] = Some(u);
                    level as u32 + 1
                }
                None => level as u32,
            };
        }
    }
    Ok(())
}

/// Removes a just-discovered vertex from every level and lets each vertex it
/// was blocking drop level by level until re-blocked or at the bottom.
pub fn increment<O: DirectionOracle>(
    state: &mut LevelState,
    partition: &EdgePartition,
    oracle: &mut O,
    discovered: Vertex,
) -> Result<()> {
    state.mark_discovered(discovered);
    let freed: Vec<Vertex> = (0..state.low.len() as Vertex)
        .filter(|&v| state.elim[v as usize] == Some(discovered))
        .collect();
    for v in freed {
        state.elim[v as usize] = None;
        let mut current = state.low[v as usize] as usize;
        'descend: while current > 1 {
            let target = current - 1;
            for &u in partition.level_neighbors(target, v) {
                if state.in_level(u, target + state.c) && oracle.query(u, v)? == Direction::Before {
                    state.elim[v as usize] = Some(u);
                    break 'descend;
                }
            }
            current = target;
            state.low[v as usize] = current as u32;
        }
    }
    Ok(())
}

/// Identifies the next vertex of the hidden order. Candidates are the
/// bottom-level neighbors of the previous discovery; sweeping levels from the
/// bottom, every queryable edge between a level member and a candidate either
/// eliminates the candidate or narrows nothing, and the single survivor is
/// the answer.
pub fn find_next<O: DirectionOracle>(
    state: &LevelState,
    instance: &SortingInstance,
    oracle: &mut O,
    prev: Vertex,
) -> Result<Vertex> {
    let mut candidates: Vec<Vertex> = instance
        .neighbors(prev)?
        .iter()
        .copied()
        .filter(|&v| state.in_level(v, 1) && !state.is_discovered(v))
        .collect();
    if candidates.is_empty() {
        return Err(Error::Internal(format!(
            "candidate set for successor of {prev} is empty"
        )));
    }
    for level in 1..=state.top_level() {
        if candidates.len() == 1 {
            return Ok(candidates[0]);
        }
        let snapshot = candidates.clone();
        for v in snapshot {
            if !candidates.contains(&v) {
                continue;
            }
            for &u in instance.neighbors(v)? {
                if !state.in_level(u, level) {
                    continue;
                }
                if oracle.query(u, v)? == Direction::Before {
                    candidates.retain(|&w| w != v);
                    break;
                }
            }
            if candidates.len() == 1 {
                return Ok(candidates[0]);
            }
        }
    }
    if candidates.len() == 1 {
        Ok(candidates[0])
    } else {
        Err(Error::Internal(format!(
            "candidate set not singleton after full sweep: {candidates:?}"
        )))
    }
}

/// Largest power of two dividing `x`.
fn nu2(x: usize) -> usize {
    debug_assert!(x > 0);
    x.trailing_zeros() as usize
}

/// Levels to rebuild after the `ell`-th discovery: one per integer `ell'`
/// with `floor(ell' * base) == ell`, at level `1 + nu2(ell')` capped at `q`.
fn qualifying_rebuilds(ell: usize, base: f64, q: usize) -> Vec<usize> {
    if !base.is_finite() || base <= 0.0 {
        return Vec::new();
    }
    let lo = ((ell as f64 / base).floor() as i64 - 2).max(1);
    let hi = (((ell + 1) as f64) / base).ceil() as i64 + 2;
    (lo..=hi)
        .filter(|&lp| (lp as f64 * base).floor() as usize == ell)
        .map(|lp| (1 + nu2(lp as usize)).min(q))
        .collect()
}

/// Result of a full sort: the recovered order, the distinct-pair query count,
/// and the ordered first-query trace.
#[derive(Debug, Clone)]
pub struct SortRun {
    pub order: Vec<Vertex>,
    pub queries: usize,
    pub trace: Vec<QueryEvent>,
}

/// Sorts the instance exactly. Two mirrored passes over one memoizing
/// oracle: the forward pass recovers the first `n/2` vertices, the reversed
/// pass the rest.
pub fn stochastic_sort(
    instance: &SortingInstance,
    params: &SortParams,
    seed: u64,
) -> Result<SortRun> {
    stochastic_sort_observed(instance, params, seed, &mut NullObserver)
}

pub fn stochastic_sort_observed(
    instance: &SortingInstance,
    params: &SortParams,
    seed: u64,
    observer: &mut dyn SortObserver,
) -> Result<SortRun> {
    let n = instance.n();
    let resolved = params.resolve(n, instance.p())?;
    let mut oracle = CountingOracle::new(instance);

    let front_count = n / 2;
    observer.on_pass(PassDirection::Forward);
    let front = run_pass(
        instance,
        &mut oracle,
        resolved,
        rng::derive_seed(seed, &["pass", "forward"]),
        front_count,
        observer,
    )?;

    observer.on_pass(PassDirection::Reverse);
    let mut reversed_view = ReversedOracle(&mut oracle);
    let back = run_pass(
        instance,
        &mut reversed_view,
        resolved,
        rng::derive_seed(seed, &["pass", "reverse"]),
        n - front_count,
        observer,
    )?;

    let mut order = front;
    order.extend(back.into_iter().rev());
    let mut seen = vec![false; n];
    for &v in &order {
        if seen[v as usize] {
            return Err(Error::Internal(format!("vertex {v} recovered twice")));
        }
        seen[v as usize] = true;
    }
    if order.len() != n {
        return Err(Error::Internal(
            "recovered order is not a permutation".into(),
        ));
    }
    let queries = oracle.query_count();
    Ok(SortRun {
        order,
        queries,
        trace: oracle.into_trace(),
    })
}

fn run_pass<O: DirectionOracle>(
    instance: &SortingInstance,
    oracle: &mut O,
    resolved: Resolved,
    partition_seed: u64,
    count: usize,
    observer: &mut dyn SortObserver,
) -> Result<Vec<Vertex>> {
    let partition = EdgePartition::build(instance, resolved.q, partition_seed)?;
    let mut state = LevelState::new(instance.n(), resolved.q, resolved.c);
    create_level(&mut state, &partition, oracle, resolved.q)?;
    observer.on_rebuild(resolved.q, 0, &state, oracle.query_count());

    let mut found: Vec<Vertex> = Vec::with_capacity(count);
    for ell in 1..=count {
        let x = if ell == 1 {
            find_first(instance, oracle)?
        } else {
            find_next(&state, instance, oracle, found[ell - 2])?
        };
        observer.on_discover(ell, x, oracle.query_count());
        found.push(x);
        increment(&mut state, &partition, oracle, x)?;
        for level in qualifying_rebuilds(ell, resolved.rebuild_base, resolved.q) {
            create_level(&mut state, &partition, oracle, level)?;
            observer.on_rebuild(level, ell, &state, oracle.query_count());
        }
    }
    Ok(found)
}
