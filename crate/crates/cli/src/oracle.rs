//! Monte Carlo oracles: literal replays of the protocol rules on rings
//! sampled from the inter-node distance distribution, kept independent of the
//! closed forms they validate.

use chord_churn_core::analytics::ChurnParams;
use chord_churn_core::ring::{Ring, RingKey};
use chord_churn_core::rng::Rng;
use chord_churn_core::sim::{lookup, Network};

use crate::stats::proportion_stderr;

/// An estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: u64,
}

impl Estimate {
    fn from_count(hits: u64, n: u64) -> Self {
        let p = hits as f64 / n as f64;
        // Agresti-Coull adjusted uncertainty so all-hit/no-hit counts keep a
        // nonzero standard error.
        let p_adj = (hits as f64 + 2.0) / (n as f64 + 4.0);
        Estimate { value: p, stderr: proportion_stderr(p_adj, n + 4), samples: n }
    }

    /// Whether `reference` lies within `sigmas` standard errors (plus a tiny
    /// absolute floor for degenerate cases). For proportion references the
    /// dispersion is taken under the null (score-test form), so a downside
    /// fluctuation does not shrink its own error bar.
    pub fn agrees_with(&self, reference: f64, sigmas: f64) -> bool {
        (self.value - reference).abs() <= self.band(reference, sigmas)
    }

    /// The agreement band used by [`Estimate::agrees_with`].
    pub fn band(&self, reference: f64, sigmas: f64) -> f64 {
        let mut se = self.stderr;
        if reference > 0.0 && reference < 1.0 {
            se = se.max(proportion_stderr(reference, self.samples));
        }
        sigmas * se + 1e-9
    }
}

/// Geometric gap to the next node: `P(x) = rho^(x-1) (1-rho)`, `x >= 1`.
fn gap(rng: &mut Rng, rho: f64) -> u64 {
    if rho == 0.0 {
        return 1;
    }
    let u = rng.f64_open0();
    1 + (u.ln() / rho.ln()).floor() as u64
}

/// Node positions strictly after an anchor at 0, generated until one lands at
/// or past `stop`.
fn arrivals_past(rng: &mut Rng, rho: f64, stop: u64) -> Vec<u64> {
    let mut out = Vec::with_capacity(16);
    let mut pos = 0u64;
    loop {
        pos += gap(rng, rho);
        out.push(pos);
        if pos >= stop {
            return out;
        }
    }
}

fn first_at_or_after(sorted: &[u64], key: u64) -> u64 {
    match sorted.binary_search(&key) {
        Ok(i) => sorted[i],
        Err(i) => sorted[i], // callers guarantee a position past `key` exists
    }
}

/// Fraction of sampled rings in which the node's `order` nearest predecessors
/// all resolve the same `k`-th finger target as the node itself.
///
/// Replay: place the node at 0, its predecessors at the (negated) partial
/// sums of geometric gaps, generate the nodes above 0 until one passes the
/// finger start `2^(k-1)`, and compare first-node-at-or-after scans.
pub fn share_prob_oracle(k: u32, order: u8, p: &ChurnParams, n: u64, rng: &mut Rng) -> Estimate {
    assert!(k >= 1 && (1..=3).contains(&order));
    let rho = p.rho();
    let start = 1u64 << (k - 1);
    let mut hits = 0u64;
    for _ in 0..n {
        let mut depth = 0u64;
        for _ in 0..order {
            depth += gap(rng, rho);
        }
        if depth >= start {
            continue; // the finger start of that predecessor is at or below 0
        }
        let ups = arrivals_past(rng, rho, start);
        let node_target = first_at_or_after(&ups, start);
        let pred_target = first_at_or_after(&ups, start - depth);
        if pred_target == node_target {
            hits += 1;
        }
    }
    Estimate::from_count(hits, n)
}

/// Fraction of sampled joins in which the join rule picks the successor's
/// `k`-th finger-table slot as the joiner's `k`-th entry.
///
/// Replay: the joiner `u` sits at 0, its successor `v` one geometric gap up;
/// `v`'s finger targets come from a fresh arrival process; the joiner either
/// takes `v` itself (start within `(u, v]`) or the lowest of `v`'s entries at
/// or past its own start.
pub fn join_replication_oracle(k: u32, p: &ChurnParams, n: u64, rng: &mut Rng) -> Estimate {
    assert!(k >= 1);
    let rho = p.rho();
    let span = 1u64 << (k - 1);
    let mut hits = 0u64;
    for _ in 0..n {
        let x = gap(rng, rho); // distance u -> v
        if x >= span {
            continue; // start in (u, v]: the entry is v, not a table slot
        }
        let ups = arrivals_past(rng, rho, span); // v-relative positions
        let own_start = span - x; // u's k-th start in v's frame
        let mut chosen = 0u32;
        for j in 1..=k {
            let target = first_at_or_after(&ups, 1u64 << (j - 1));
            if target >= own_start {
                chosen = j;
                break;
            }
        }
        if chosen == k {
            hits += 1;
        }
    }
    Estimate::from_count(hits, n)
}

/// Fallback-depth histogram for a dead `k`-th finger: per-finger deaths drawn
/// with the given probabilities, sharing read off a sampled ring, and the
/// scan-down rule replayed literally. Entry `i-1`: probability of falling
/// back exactly `i` fingers (`i = k` is the successor-list fall-through).
pub fn fallback_oracle(
    k: u32,
    dead: &[f64],
    p: &ChurnParams,
    n: u64,
    rng: &mut Rng,
) -> Vec<Estimate> {
    assert!(k >= 1 && dead.len() >= k as usize - 1);
    let rho = p.rho();
    let start_k = 1u64 << (k - 1);
    let mut counts = vec![0u64; k as usize];
    for _ in 0..n {
        let ups = arrivals_past(rng, rho, start_k);
        let target_k = first_at_or_after(&ups, start_k);
        let mut depth = k as usize; // fall-through unless a finger works
        for j in (1..k).rev() {
            let target_j = first_at_or_after(&ups, 1u64 << (j - 1));
            if target_j == target_k {
                continue; // shares the dead target: skipped for free
            }
            if rng.chance(dead[j as usize - 1]) {
                continue; // distinct but dead
            }
            depth = (k - j) as usize;
            break;
        }
        counts[depth - 1] += 1;
    }
    counts.into_iter().map(|c| Estimate::from_count(c, n)).collect()
}

/// Mean lookup cost over static failure-free rings sampled from the occupancy
/// model: the origin node sits at key 0 and every other key independently
/// holds a node with probability `N/K` (the analytical table describes the
/// ring as seen from an occupied key). Probes draw uniform target keys; the
/// cost is pure hops. Comparable to the cost table evaluated with all failure
/// probabilities zero.
pub fn static_cost_oracle(
    bits: u32,
    node_count: f64,
    succ_len: usize,
    probes: u64,
    probes_per_ring: u64,
    rng: &mut Rng,
) -> Estimate {
    let ring = Ring::new(bits).unwrap();
    let size = ring.size();
    let density = node_count / size as f64;
    let budget = 4 * bits;
    let origin = RingKey(0);
    // probes on one ring are correlated, so uncertainty is computed over
    // per-ring means
    let mut ring_means = Vec::new();
    let mut done = 0u64;
    while done < probes {
        let keys: Vec<RingKey> = core::iter::once(origin)
            .chain((1..size).filter(|_| rng.chance(density)).map(RingKey))
            .collect();
        if keys.len() < succ_len + 2 {
            continue;
        }
        let net = Network::perfect(ring, succ_len, &keys);
        let batch = probes_per_ring.min(probes - done);
        let mut sum = 0.0;
        for _ in 0..batch {
            let target = RingKey(rng.range(size));
            let res = lookup(&net, origin, target, budget).expect("static lookup cannot fail");
            assert_eq!(res.timeouts, 0);
            sum += res.hops as f64;
        }
        ring_means.push(sum / batch as f64);
        done += batch;
    }
    let m = crate::stats::mean(&ring_means);
    Estimate { value: m, stderr: crate::stats::stderr_of_mean(&ring_means), samples: done }
}
