//! Linear-extension machinery over accumulated directed comparisons.
//!
//! [`DirectedKnowledge`] stores the directed pairs an algorithm has learned
//! plus their transitive closure. On top of it sit exact enumeration of the
//! compatible permutations (linear extensions) for small `n`, a lazy
//! adjacent-transposition Markov chain for near-uniform sampling at larger
//! `n`, and average-rank computation in both modes. Compatibility here is
//! deliberately weaker than path-consistency: it only asks that a permutation
//! respect every known directed pair.

use std::collections::BTreeSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::instance::Vertex;
use crate::rng;
use crate::{Error, Result};

/// Exact enumeration is capped by default at 10 vertices (10! ~ 3.6M).
pub const DEFAULT_ENUM_CAP: usize = 10;

/// Row-per-vertex bit matrix backing the closure.
#[derive(Debug, Clone, PartialEq, Eq)]
struct BitMatrix {
    n: usize,
    words: usize,
    rows: Vec<u64>,
}

impl BitMatrix {
    fn new(n: usize) -> Self {
        let words = n.div_ceil(64);
        Self {
            n,
            words,
            rows: vec![0; n * words],
        }
    }

    #[inline]
    fn get(&self, u: usize, v: usize) -> bool {
        self.rows[u * self.words + v / 64] & (1 << (v % 64)) != 0
    }

    #[inline]
    fn set(&mut self, u: usize, v: usize) {
        self.rows[u * self.words + v / 64] |= 1 << (v % 64);
    }

    fn or_row_into(&mut self, src: usize, dst: usize) {
        let (s, d) = (src * self.words, dst * self.words);
        for k in 0..self.words {
            let bits = self.rows[s + k];
            self.rows[d + k] |= bits;
        }
    }

    fn row_count(&self, u: usize) -> usize {
        self.rows[u * self.words..(u + 1) * self.words]
            .iter()
            .map(|w| w.count_ones() as usize)
            .sum()
    }
}

/// Directed comparison results plus their transitive closure.
#[derive(Debug, Clone)]
pub struct DirectedKnowledge {
    n: usize,
    known: BTreeSet<(Vertex, Vertex)>,
    succ: BitMatrix,
    pred: BitMatrix,
}

impl DirectedKnowledge {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            known: BTreeSet::new(),
            succ: BitMatrix::new(n),
            pred: BitMatrix::new(n),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Directly recorded pairs (not the closure).
    pub fn known_pairs(&self) -> impl Iterator<Item = (Vertex, Vertex)> + '_ {
        self.known.iter().copied()
    }

    pub fn known_len(&self) -> usize {
        self.known.len()
    }

    /// True iff the closure orders `u` before `v`.
    pub fn implies(&self, u: Vertex, v: Vertex) -> bool {
        u != v && self.succ.get(u as usize, v as usize)
    }

    /// Records `u` before `v` and extends the closure. Re-adding a known or
    /// implied pair is a no-op; a pair contradicting the closure is an error,
    /// since answers are supposed to come from one true total order.
    pub fn add_directed(&mut self, u: Vertex, v: Vertex) -> Result<()> {
        let (ui, vi) = (u as usize, v as usize);
        if u == v || ui >= self.n || vi >= self.n {
            return Err(Error::InvalidArgument(format!(
                "bad directed pair ({u}, {v})"
            )));
        }
        if self.succ.get(vi, ui) {
            return Err(Error::Inconsistency { u, v });
        }
        self.known.insert((u, v));
        if self.succ.get(ui, vi) {
            return Ok(()); // already implied
        }
        let mut ancestors: Vec<usize> = (0..self.n).filter(|&a| self.succ.get(a, ui)).collect();
        ancestors.push(ui);
        let mut descendants: Vec<usize> = (0..self.n).filter(|&d| self.succ.get(vi, d)).collect();
        descendants.push(vi);
        for &a in &ancestors {
            self.succ.or_row_into(vi, a);
            self.succ.set(a, vi);
        }
        for &d in &descendants {
            self.pred.or_row_into(ui, d);
            self.pred.set(d, ui);
        }
        Ok(())
    }

    /// True iff exactly one linear extension exists, decided structurally:
    /// the closure must make every vertex pair comparable.
    pub fn unique_extension(&self) -> bool {
        (0..self.n).all(|v| self.succ.row_count(v) + self.pred.row_count(v) == self.n - 1)
    }

    /// The single extension when [`Self::unique_extension`] holds.
    pub fn unique_order(&self) -> Option<Vec<Vertex>> {
        if !self.unique_extension() {
            return None;
        }
        let mut order: Vec<Vertex> = (0..self.n as Vertex).collect();
        order.sort_unstable_by_key(|&v| self.pred.row_count(v as usize));
        Some(order)
    }

    /// Visits every linear extension in ascending lexicographic order.
    pub fn for_each_extension<F: FnMut(&[Vertex])>(&self, cap: usize, mut f: F) -> Result<()> {
        if self.n > cap {
            return Err(Error::CapacityExceeded { n: self.n, cap });
        }
        let mut unplaced_pred: Vec<usize> = (0..self.n).map(|v| self.pred.row_count(v)).collect();
        let mut placed = vec![false; self.n];
        let mut prefix: Vec<Vertex> = Vec::with_capacity(self.n);
        self.visit(&mut unplaced_pred, &mut placed, &mut prefix, &mut f);
        Ok(())
    }

    fn visit<F: FnMut(&[Vertex])>(
        &self,
        unplaced_pred: &mut [usize],
        placed: &mut [bool],
        prefix: &mut Vec<Vertex>,
        f: &mut F,
    ) {
        if prefix.len() == self.n {
            f(prefix);
            return;
        }
        for v in 0..self.n {
            if placed[v] || unplaced_pred[v] > 0 {
                continue;
            }
            placed[v] = true;
            prefix.push(v as Vertex);
            for (d, count) in unplaced_pred.iter_mut().enumerate() {
                if self.succ.get(v, d) {
                    *count -= 1;
                }
            }
            self.visit(unplaced_pred, placed, prefix, f);
            for (d, count) in unplaced_pred.iter_mut().enumerate() {
                if self.succ.get(v, d) {
                    *count += 1;
                }
            }
            prefix.pop();
            placed[v] = false;
        }
    }

    /// All permutations compatible with the recorded pairs (`n <= cap`).
    pub fn enumerate_compatible(&self, cap: usize) -> Result<Vec<Vec<Vertex>>> {
        let mut out = Vec::new();
        self.for_each_extension(cap, |perm| out.push(perm.to_vec()))?;
        Ok(out)
    }

    /// Number of linear extensions (`n <= cap`).
    pub fn count_extensions(&self, cap: usize) -> Result<u64> {
        let mut count = 0u64;
        self.for_each_extension(cap, |_| count += 1)?;
        Ok(count)
    }

    /// Average 1-based rank of every vertex over the compatible permutations,
    /// exactly (enumeration) or by MCMC sampling.
    pub fn average_ranks(&self, mode: &RankMode, seed: u64) -> Result<Vec<f64>> {
        match *mode {
            RankMode::Exact { cap } => {
                let mut sums = vec![0u64; self.n];
                let mut count = 0u64;
                self.for_each_extension(cap, |perm| {
                    count += 1;
                    for (pos, &v) in perm.iter().enumerate() {
                        sums[v as usize] += pos as u64 + 1;
                    }
                })?;
                Ok(sums.iter().map(|&s| s as f64 / count as f64).collect())
            }
            RankMode::Sampled { samples, ref mcmc } => {
                if samples == 0 {
                    return Err(Error::InvalidArgument(
                        "sample count must be positive".into(),
                    ));
                }
                let mut chain = ExtensionChain::new(self, rng::stream(seed, "poset.ranks"), mcmc);
                let mut sums = vec![0u64; self.n];
                for _ in 0..samples {
                    chain.advance_thinning();
                    for (pos, &v) in chain.state().iter().enumerate() {
                        sums[v as usize] += pos as u64 + 1;
                    }
                }
                Ok(sums.iter().map(|&s| s as f64 / samples as f64).collect())
            }
        }
    }

    /// One near-uniform linear extension.
    pub fn sample_extension(&self, seed: u64, mcmc: &McmcParams) -> Vec<Vertex> {
        let chain = ExtensionChain::new(self, rng::stream(seed, "poset.sample"), mcmc);
        chain.state().to_vec()
    }
}

/// How average ranks are computed.
#[derive(Debug, Clone)]
pub enum RankMode {
    Exact { cap: usize },
    Sampled { samples: usize, mcmc: McmcParams },
}

/// Chain tuning; `None` means the standard heuristics `n^3 ln n` burn-in and
/// `n^2` thinning.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct McmcParams {
    pub burn_in: Option<usize>,
    pub thinning: Option<usize>,
}

impl McmcParams {
    fn burn_in_for(&self, n: usize) -> usize {
        self.burn_in
            .unwrap_or_else(|| ((n * n * n) as f64 * (n.max(2) as f64).ln()).ceil() as usize)
    }

    fn thinning_for(&self, n: usize) -> usize {
        self.thinning.unwrap_or(n * n).max(1)
    }
}

/// Lazy adjacent-transposition chain over linear extensions: pick a random
/// adjacent position, flip a fair coin, and swap if the pair is incomparable.
/// The stationary distribution is uniform over the extensions.
struct ExtensionChain<'a> {
    knowledge: &'a DirectedKnowledge,
    rng: ChaCha8Rng,
    state: Vec<Vertex>,
    thinning: usize,
}

impl<'a> ExtensionChain<'a> {
    fn new(knowledge: &'a DirectedKnowledge, rng: ChaCha8Rng, params: &McmcParams) -> Self {
        // Deterministic initial extension: repeatedly take the smallest
        // vertex with no unplaced predecessor.
        let n = knowledge.n;
        let mut unplaced_pred: Vec<usize> = (0..n).map(|v| knowledge.pred.row_count(v)).collect();
        let mut placed = vec![false; n];
        let mut state = Vec::with_capacity(n);
        for _ in 0..n {
            let v = (0..n)
                .find(|&v| !placed[v] && unplaced_pred[v] == 0)
                .expect("acyclic knowledge always has a minimal vertex");
            placed[v] = true;
            state.push(v as Vertex);
            for (d, count) in unplaced_pred.iter_mut().enumerate() {
                if knowledge.succ.get(v, d) {
                    *count -= 1;
                }
            }
        }
        let mut chain = Self {
            knowledge,
            rng,
            state,
            thinning: params.thinning_for(n),
        };
        chain.advance(params.burn_in_for(n));
        chain
    }

    fn advance(&mut self, steps: usize) {
        let n = self.state.len();
        if n < 2 {
            return;
        }
        for _ in 0..steps {
            let pos = self.rng.random_range(0..n - 1);
            if self.rng.random_bool(0.5) {
                let (a, b) = (self.state[pos], self.state[pos + 1]);
                if !self.knowledge.implies(a, b) {
                    self.state.swap(pos, pos + 1);
                }
            }
        }
    }

    fn advance_thinning(&mut self) {
        self.advance(self.thinning);
    }

    fn state(&self) -> &[Vertex] {
        &self.state
    }
}
