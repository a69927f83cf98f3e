//! Overlapping edge subsets `E_1..E_q` with calibrated marginals.
//!
//! Each edge receives a length-`q` bit tuple drawn from the product law
//! "bit i set with probability `alpha*p / 2^i`" conditioned on at least one
//! bit being set, with `alpha` chosen so that an absent tuple has probability
//! exactly `1 - p`. Unconditioned, this makes bit `i` of a non-path pair a
//! plain Bernoulli(`alpha*p / 2^i`) independent of everything else, while the
//! union of the subsets always recovers the full edge set.

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::instance::{pair_key, SortingInstance, Vertex};
use crate::rng;
use crate::{Error, Result};

/// Solves `prod_{i=1..q} (1 - alpha*p/2^i) = 1 - p` for `alpha` by bisection
/// on `[1, 2]`; the left side is strictly decreasing in `alpha` and the root
/// always lies in that range.
pub fn solve_alpha(p: f64, q: usize, tol: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::DegenerateParameter(format!(
            "alpha is defined for 0 < p < 1, got p = {p}"
        )));
    }
    if q < 1 {
        return Err(Error::InvalidArgument("q must be at least 1".into()));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidArgument("tol must be positive".into()));
    }
    let residual = |alpha: f64| product(alpha, p, q) - (1.0 - p);
    let (mut lo, mut hi) = (1.0f64, 2.0f64);
    let mut mid = 1.5;
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        let r = residual(mid);
        if r.abs() < tol {
            return Ok(mid);
        }
        if r > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Bisection exhausts only when tol is below f64 resolution at the root.
    if residual(mid).abs() < tol * 16.0 {
        Ok(mid)
    } else {
        Err(Error::Internal(format!(
            "alpha bisection failed for p={p}, q={q}"
        )))
    }
}

fn product(alpha: f64, p: f64, q: usize) -> f64 {
    (1..=q)
        .map(|i| 1.0 - alpha * p / (1u64 << i) as f64)
        .product()
}

/// Default level count: `ceil(log2(max(2, n*p)))`, so the top target size
/// `2^q / p` is about `n`.
pub fn default_q(n: usize, p: f64) -> usize {
    let np = (n as f64 * p).max(2.0);
    (np.log2().ceil() as usize).max(1)
}

/// Per-edge membership tuples across the subsets `E_1..E_q`.
#[derive(Debug, Clone)]
pub struct EdgePartition {
    q: usize,
    alpha: f64,
    /// Bit `i-1` of the mask is the `E_i` membership indicator.
    membership: HashMap<(Vertex, Vertex), u32>,
    /// `level_adj[i-1][v]` lists the `E_i`-neighbors of `v`, ascending.
    level_adj: Vec<Vec<Vec<Vertex>>>,
}

impl EdgePartition {
    /// Samples a partition of the instance's edges. Deterministic given
    /// `(instance, q, seed)`.
    pub fn build(instance: &SortingInstance, q: usize, seed: u64) -> Result<Self> {
        Self::build_with_rng(instance, q, &mut rng::stream(seed, "partition"))
    }

    pub fn build_with_rng(
        instance: &SortingInstance,
        q: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        if !(1..=31).contains(&q) {
            return Err(Error::InvalidArgument(format!(
                "q must be in 1..=31, got {q}"
            )));
        }
        let sampler = TupleSampler::new(instance.n(), instance.p(), q)?;
        let n = instance.n();
        let mut membership = HashMap::with_capacity(instance.edge_count());
        let mut level_adj = vec![vec![Vec::new(); n]; q];
        for &(u, v) in instance.edges() {
            let mask = sampler.sample(rng);
            membership.insert((u, v), mask);
            for (i, adj) in level_adj.iter_mut().enumerate() {
                if mask & (1 << i) != 0 {
                    adj[u as usize].push(v);
                    adj[v as usize].push(u);
                }
            }
        }
        Ok(Self {
            q,
            alpha: sampler.alpha,
            membership,
            level_adj,
        })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// The `E_i(u, v)` indicator. Pure lookup, never queries.
    pub fn membership(&self, i: usize, u: Vertex, v: Vertex) -> Result<bool> {
        if i < 1 || i > self.q {
            return Err(Error::InvalidArgument(format!(
                "level index {i} out of 1..={}",
                self.q
            )));
        }
        Ok(self.tuple(u, v) & (1 << (i - 1)) != 0)
    }

    /// Raw membership mask of a pair; all-zero for non-edges.
    pub fn tuple(&self, u: Vertex, v: Vertex) -> u32 {
        self.membership.get(&pair_key(u, v)).copied().unwrap_or(0)
    }

    /// `E_i`-neighbors of `v`, ascending. Levels above `q` are empty.
    pub fn level_neighbors(&self, i: usize, v: Vertex) -> &[Vertex] {
        if i < 1 || i > self.q {
            return &[];
        }
        &self.level_adj[i - 1][v as usize]
    }

    /// Fixture dump: sorted `[u, v, mask]` rows.
    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Dump {
            q: usize,
            alpha: f64,
            members: Vec<(Vertex, Vertex, u32)>,
        }
        let mut members: Vec<(Vertex, Vertex, u32)> = self
            .membership
            .iter()
            .map(|(&(u, v), &m)| (u, v, m))
            .collect();
        members.sort_unstable();
        Ok(serde_json::to_string_pretty(&Dump {
            q: self.q,
            alpha: self.alpha,
            members,
        })?)
    }
}

/// Exact sampler for the conditioned tuple law. Works in O(q) per edge by
/// drawing the smallest set index from its closed-form law and the remaining
/// bits unconditionally; rejection sampling would need ~1/p retries per path
/// edge, ruinous at p = Theta(log n / n).
struct TupleSampler {
    q: usize,
    alpha: f64,
    /// `first_cdf[k]` = Pr[smallest set index <= k+1 | tuple nonzero].
    first_cdf: Vec<f64>,
    /// `bit_prob[i-1]` = unconditional Pr[bit i] = alpha*p_eff / 2^i.
    bit_prob: Vec<f64>,
}

impl TupleSampler {
    fn new(n: usize, p: f64, q: usize) -> Result<Self> {
        // p = 0 leaves only path edges; a small floor keeps the conditional
        // law defined. p = 1 pins alpha at the exact root 2 (the i = 1
        // factor vanishes there).
        let (p_eff, alpha) = if p == 0.0 {
            let floor = 1.0 / (n as f64 * n as f64);
            (floor, solve_alpha(floor, q, 1e-12)?)
        } else if p == 1.0 {
            (1.0, 2.0)
        } else {
            (p, solve_alpha(p, q, 1e-12)?)
        };
        let bit_prob: Vec<f64> = (1..=q)
            .map(|i| alpha * p_eff / (1u64 << i) as f64)
            .collect();
        let nonzero = 1.0 - bit_prob.iter().map(|b| 1.0 - b).product::<f64>();
        let mut first_cdf = Vec::with_capacity(q);
        let mut prefix = 1.0; // prod_{j<i} (1 - alpha*p/2^j)
        let mut cum = 0.0;
        for &b in &bit_prob {
            cum += prefix * b / nonzero;
            first_cdf.push(cum);
            prefix *= 1.0 - b;
        }
        Ok(Self {
            q,
            alpha,
            first_cdf,
            bit_prob,
        })
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> u32 {
        let x: f64 = rng.random();
        let mut first = self.q - 1;
        for (k, &cdf) in self.first_cdf.iter().enumerate() {
            if x < cdf {
                first = k;
                break;
            }
        }
        let mut mask = 1u32 << first;
        for j in first + 1..self.q {
            if rng.random_bool(self.bit_prob[j]) {
                mask |= 1 << j;
            }
        }
        mask
    }
}
