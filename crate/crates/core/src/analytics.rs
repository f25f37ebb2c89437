//! Steady-state predictions for a Chord-style ring under churn.
//!
//! The model: nodes join and fail at equal per-node rates, stabilizations run
//! at `r` times the failure rate, a fraction `alpha` of them maintaining the
//! successor pointer and the rest re-resolving one random finger. Occupancy of
//! the key space is then memoryless: with `rho = (K - N) / K`, the distance
//! between consecutive nodes is geometric, and every quantity below follows
//! from counting how joins, failures and stabilizations gain or lose broken
//! pointers, balanced at the steady state.
//!
//! Outputs per parameter point (collected in [`TheoryPoint`]):
//! * `w1`, `d1` — fraction of nodes whose first successor pointer is wrong
//!   (incorrect or dead) resp. dead, and the lookup inconsistency `w1 - d1`;
//! * `f_k` — fraction of dead `k`-th fingers, from a per-finger balance
//!   equation whose gain terms weigh how many predecessors share a finger
//!   target and how often a join replicates one;
//! * `C_t` — expected lookup cost (hops plus timeouts) to a target `t` keys
//!   away, by recursion over the closest-preceding-finger decomposition, and
//!   its average `L` over all distances.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

fn powu(base: f64, exp: u64) -> f64 {
    libm::pow(base, exp as f64)
}

fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[derive(Debug, Clone, PartialEq)]
pub enum AnalyticsError {
    /// An argument fell outside its documented domain.
    OutOfRange(&'static str),
    /// The per-finger balance equation has no real root: the chosen rates
    /// cannot sustain a steady state for this finger.
    NoSteadyState { finger: u32 },
    BadParams(&'static str),
}

impl fmt::Display for AnalyticsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnalyticsError::OutOfRange(what) => write!(f, "argument out of range: {what}"),
            AnalyticsError::NoSteadyState { finger } => {
                write!(f, "no steady state for finger {finger} at these parameters")
            }
            AnalyticsError::BadParams(what) => write!(f, "invalid parameters: {what}"),
        }
    }
}

impl core::error::Error for AnalyticsError {}

pub type Result<T> = core::result::Result<T, AnalyticsError>;

/// Churn-process parameterization: everything the closed forms depend on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChurnParams {
    /// Expected node count `N`.
    pub node_count: f64,
    /// `log2` of the key-space size; also the finger-table length `M`.
    pub key_bits: u32,
    /// Fraction of stabilizations devoted to the successor pointer.
    pub alpha: f64,
    /// Ratio of the stabilization rate to the failure rate.
    pub stab_ratio: f64,
    /// Successor-list length `S`.
    pub succ_len: usize,
}

impl ChurnParams {
    pub fn new(
        node_count: f64,
        key_bits: u32,
        alpha: f64,
        stab_ratio: f64,
        succ_len: usize,
    ) -> Result<Self> {
        let p = ChurnParams { node_count, key_bits, alpha, stab_ratio, succ_len };
        if key_bits == 0 || key_bits > 63 {
            return Err(AnalyticsError::BadParams("key_bits must be in 1..=63"));
        }
        if !(node_count > 0.0) || node_count > p.key_space() {
            return Err(AnalyticsError::BadParams("need 0 < N <= K"));
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(AnalyticsError::BadParams("alpha must be in [0, 1]"));
        }
        if !(stab_ratio >= 0.0) {
            return Err(AnalyticsError::BadParams("stab_ratio must be >= 0"));
        }
        if succ_len == 0 {
            return Err(AnalyticsError::BadParams("succ_len must be >= 1"));
        }
        Ok(p)
    }

    /// Key-space size `K`.
    pub fn key_space(&self) -> f64 {
        (1u64 << self.key_bits) as f64
    }

    /// Number of fingers per node, `M = log2 K`.
    pub fn finger_count(&self) -> u32 {
        self.key_bits
    }

    /// Fraction of unoccupied keys, `rho = (K - N) / K`; the parameter of the
    /// geometric inter-node distance distribution.
    pub fn rho(&self) -> f64 {
        (self.key_space() - self.node_count) / self.key_space()
    }
}

/// Probability that two consecutive nodes are `x` keys apart: `rho^(x-1) (1-rho)`.
pub fn interval_pdf(x: u64, p: &ChurnParams) -> Result<f64> {
    if x < 1 {
        return Err(AnalyticsError::OutOfRange("interval length must be >= 1"));
    }
    let rho = p.rho();
    Ok(powu(rho, x - 1) * (1.0 - rho))
}

/// `a(x)`: probability that at least one node sits on `x` consecutive keys.
pub fn at_least_one(x: u64, p: &ChurnParams) -> f64 {
    1.0 - powu(p.rho(), x)
}

/// `b_i`: probability that the first node at or after a key is `i` keys later.
pub fn first_node_at(i: u64, p: &ChurnParams) -> f64 {
    powu(p.rho(), i) * (1.0 - p.rho())
}

/// `bc(i, x) = b_i / a(x)`: position of the first node within a span of `x`
/// keys, given the span is not empty.
pub fn first_node_conditional(i: u64, x: u64, p: &ChurnParams) -> Result<f64> {
    if x == 0 {
        return Err(AnalyticsError::OutOfRange("cannot condition on an empty span"));
    }
    if i >= x {
        return Err(AnalyticsError::OutOfRange("offset must lie inside the span"));
    }
    Ok(first_node_at(i, p) / at_least_one(x, p))
}

/// Probability that at least `order` (1..=3) immediate predecessors of a node
/// resolve the same `k`-th finger target as the node itself.
///
/// A predecessor at combined distance `s` behind the node shares the target
/// exactly when the `s` keys just below the finger start are all empty and
/// `s` stays below the finger span `2^(k-1)`. Summing geometric gap draws
/// against that empty-window probability gives, for `order = o`:
///
/// `sum_{s=o}^{2^(k-1)-1} C(s-1, o-1) (1-rho)^o rho^(s-o) * rho^s`
pub fn share_prob(k: u32, order: u8, p: &ChurnParams) -> Result<f64> {
    if k == 0 || k > p.finger_count() {
        return Err(AnalyticsError::OutOfRange("finger index"));
    }
    if order == 0 || order > 3 {
        return Err(AnalyticsError::OutOfRange("share order must be 1..=3"));
    }
    let rho = p.rho();
    if rho == 0.0 {
        return Ok(0.0);
    }
    let span = 1u64 << (k - 1);
    let o = order as u64;
    if span < o + 1 {
        return Ok(0.0);
    }
    // term(s) = C(s-1, o-1) (1-rho)^o rho^(2s - o), summed for s in o..span.
    let q = rho * rho;
    let mut term = powu(1.0 - rho, o) * powu(rho, o);
    let mut sum = 0.0;
    let mut s = o;
    while s < span {
        sum += term;
        // ratio to the next term: C(s, o-1)/C(s-1, o-1) * rho^2 = s/(s-o+1) * rho^2
        term *= q * s as f64 / (s - o + 1) as f64;
        if term < sum * 1e-18 && s > o + 64 {
            break;
        }
        s += 1;
    }
    Ok(sum.clamp(0.0, 1.0))
}

/// Probability that a joining node adopts the `k`-th finger-table entry of its
/// successor as its own `k`-th entry (rather than a better estimate from a
/// lower entry): `1 - rho^Y - (1-rho) Y rho^Y` with `Y = 2^(k-2) - 2`,
/// clamped to `[0, 1]`; zero for `k <= 3`.
pub fn join_replication_prob(k: u32, p: &ChurnParams) -> Result<f64> {
    if k == 0 || k > p.finger_count() {
        return Err(AnalyticsError::OutOfRange("finger index"));
    }
    if k <= 3 {
        return Ok(0.0);
    }
    let rho = p.rho();
    let y = (1u64 << (k - 2)) - 2;
    let ry = powu(rho, y);
    let val = 1.0 - ry - (1.0 - rho) * y as f64 * ry;
    Ok(val.clamp(0.0, 1.0))
}

/// Steady-state fraction of nodes with a wrong (incorrect or dead) first
/// successor pointer: `2 / (3 + r * alpha)`.
pub fn wrong_s1_fraction(p: &ChurnParams) -> f64 {
    2.0 / (3.0 + p.stab_ratio * p.alpha)
}

/// Steady-state fraction of nodes whose first successor pointer is dead;
/// with equal join and failure rates this is half the wrong fraction.
pub fn dead_s1_fraction(p: &ChurnParams) -> f64 {
    0.5 * wrong_s1_fraction(p)
}

/// Probability that a lookup returns an alive node that is not the true
/// successor of the key: `w1 - d1`.
pub fn lookup_inconsistency(p: &ChurnParams) -> f64 {
    wrong_s1_fraction(p) - dead_s1_fraction(p)
}

/// Total replication weight `P = p1(k) + p2(k) + p3(k)` (three terms suffice).
fn replication_weight(k: u32, p: &ChurnParams) -> Result<f64> {
    Ok(share_prob(k, 1, p)? + share_prob(k, 2, p)? + share_prob(k, 3, p)?)
}

/// Coefficients of the per-finger steady-state balance
/// `(1+P) f^2 - B f + (1+P) = 0` with
/// `B = 2P + 2 - p_join(k) + r (1-alpha) / M`.
fn finger_balance(k: u32, p: &ChurnParams) -> Result<(f64, f64)> {
    let rep = replication_weight(k, p)?;
    let pj = join_replication_prob(k, p)?;
    let b = 2.0 * rep + 2.0 - pj + p.stab_ratio * (1.0 - p.alpha) / p.finger_count() as f64;
    Ok((1.0 + rep, b))
}

/// Steady-state fraction of nodes whose `k`-th finger points to a dead node:
/// the smaller root of the finger balance quadratic, in `[0, 1]`.
pub fn dead_finger_fraction(k: u32, p: &ChurnParams) -> Result<f64> {
    let (a, b) = finger_balance(k, p)?;
    let disc = b * b - 4.0 * a * a;
    if disc < 0.0 {
        return Err(AnalyticsError::NoSteadyState { finger: k });
    }
    let root = (b - sqrt(disc)) / (2.0 * a);
    Ok(root.clamp(0.0, 1.0))
}

/// Residual of the balance equation at `f`; near zero at the steady state.
/// Gains: joins replicating a dead entry plus failures killing 1, 2 or 3
/// pointers at once (weights telescope to `1 + P`); losses: the share of
/// finger stabilizations that evict a dead pointer.
pub fn finger_balance_residual(k: u32, f: f64, p: &ChurnParams) -> Result<f64> {
    let rep = replication_weight(k, p)?;
    let pj = join_replication_prob(k, p)?;
    let gain = pj * f + (1.0 - f) * (1.0 - f) * (1.0 + rep);
    let loss = p.stab_ratio * (1.0 - p.alpha) * f / p.finger_count() as f64;
    Ok(gain - loss)
}

/// Expected cost of looking up the adjacent key through the successor list:
/// `sum_j j * (prod_{i<j} d_i) (1 - d_j)`. The untruncated series with equal
/// death probabilities is `1/(1-d) ~= 1 + d`.
pub fn adjacent_cost(death_probs: &[f64]) -> f64 {
    let mut prefix = 1.0;
    let mut cost = 0.0;
    for (j, &d) in death_probs.iter().enumerate() {
        cost += (j + 1) as f64 * prefix * (1.0 - d);
        prefix *= d;
    }
    cost
}

/// Fallback distribution for a dead `k`-th finger, given per-finger death
/// probabilities `dead[j-1]` for fingers `j < k`.
///
/// Walking down from finger `k-1`, a finger is skipped when it shares the dead
/// target (the whole span between its start and the `k`-th start is empty) or
/// is itself dead; the walk stops at the first alive, distinct finger. Entry
/// `i-1` of the result is the probability the query falls back exactly `i`
/// fingers; entry `k-1` is the fall-through to the successor list. The entries
/// sum to one.
pub fn fallback_profile(k: u32, dead: &[f64], p: &ChurnParams) -> Result<Vec<f64>> {
    if k == 0 || k > p.finger_count() {
        return Err(AnalyticsError::OutOfRange("finger index"));
    }
    let k = k as usize;
    if k == 1 {
        return Ok(vec![1.0]);
    }
    if dead.len() < k - 1 {
        return Err(AnalyticsError::OutOfRange("need a death probability per lower finger"));
    }
    let rho = p.rho();
    let span = 1u64 << (k - 1);

    // share_all[j]: probability that fingers j..k-1 all resolve to the k-th
    // target, i.e. no node on the keys from start_j up to start_k.
    // boundary[j]: probability the sharing run starts exactly at finger j.
    let mut share_all = vec![0.0; k + 1];
    for j in 1..k {
        share_all[j] = powu(rho, span - (1u64 << (j - 1)));
    }
    let mut boundary = vec![0.0; k + 1];
    boundary[1] = share_all[1];
    for j in 2..k {
        boundary[j] = share_all[j] - share_all[j - 1];
    }
    boundary[k] = 1.0 - share_all[k - 1];

    let mut h = vec![0.0; k];
    for i in 1..k {
        let used = k - i; // finger actually used
        let mut acc = 0.0;
        for b in (used + 1)..=k {
            // fingers used+1 .. b-1 are distinct and must be dead
            let mut dead_run = 1.0;
            for j in (used + 1)..b {
                dead_run *= dead[j - 1];
            }
            acc += boundary[b] * dead_run;
        }
        h[i - 1] = acc * (1.0 - dead[used - 1]);
    }
    // fall-through: below the sharing boundary everything distinct is dead
    let mut acc = 0.0;
    for b in 1..=k {
        let mut dead_run = 1.0;
        for j in 1..b {
            dead_run *= dead[j - 1];
        }
        acc += boundary[b] * dead_run;
    }
    h[k - 1] = acc;
    Ok(h)
}

/// `h_k(i)` with death probabilities taken from the steady-state model.
pub fn fallback_prob(k: u32, i: u32, p: &ChurnParams) -> Result<f64> {
    if i == 0 || i > k {
        return Err(AnalyticsError::OutOfRange("fallback depth"));
    }
    let dead = steady_dead_fingers(p)?;
    let h = fallback_profile(k, &dead, p)?;
    Ok(h[i as usize - 1])
}

fn steady_dead_fingers(p: &ChurnParams) -> Result<Vec<f64>> {
    (1..=p.finger_count()).map(|k| dead_finger_fraction(k, p)).collect()
}

/// Expected lookup cost table with explicit failure probabilities.
///
/// Returns `cost` of length `K` with `cost[0] = 0`; `cost[t]` is the expected
/// number of hops plus timeouts to resolve a key `t` steps clockwise.
///
/// A target `t` is decomposed against the closest strictly preceding finger:
/// `t = xi + m` with `xi = 2^(k-1) < t <= 2^k` and `1 <= m <= xi`. Three
/// cases: no node on the `m` keys before the target (cost of resolving `xi`
/// itself, since the finger node is then the answer's own resolver); the
/// finger node intervenes and is alive (one hop plus the remaining distance);
/// or it is dead (a timeout, then the fallback distribution decides which
/// lower finger carries on). Inner sums over earlier costs are maintained as
/// sliding geometric accumulators, so the whole table is `O(K log K)`.
pub fn lookup_cost_table_with(p: &ChurnParams, dead_fingers: &[f64], dead_s1: f64) -> Result<Vec<f64>> {
    let bits = p.key_bits;
    if dead_fingers.len() < bits as usize {
        return Err(AnalyticsError::OutOfRange("need a death probability per finger"));
    }
    let size = 1usize << bits;
    let rho = p.rho();
    let mut cost = vec![0.0; size];
    cost[1] = adjacent_cost(&vec![dead_s1; p.succ_len]);

    for k in 1..=bits {
        let xi = 1usize << (k - 1);
        let f = dead_fingers[k as usize - 1];
        let h = fallback_profile(k, dead_fingers, p)?;
        let fall_through = 2.0 * h[k as usize - 1];
        let base_cost = cost[xi]; // resolved by the previous block (or C_1)

        // per-fallback-depth sliding sums over the candidate landing spots
        let depths = k as usize - 1;
        let mut sub_span = vec![0usize; depths]; // s_i = xi / 2^i
        let mut sub_base = vec![0usize; depths]; // xi_i = xi - s_i
        let mut rho_span = vec![0.0; depths];
        let mut norm = vec![0.0; depths]; // (1 - rho) / a(s_i)
        let mut window = vec![0.0; depths];
        for i in 1..=depths {
            let s_i = xi >> i;
            let base = xi - s_i;
            sub_span[i - 1] = s_i;
            sub_base[i - 1] = base;
            rho_span[i - 1] = powu(rho, s_i as u64);
            norm[i - 1] = (1.0 - rho) / at_least_one(s_i as u64, p);
            // window(1) = sum_{c = base+2-s_i}^{base+1} rho^(base+1-c) cost[c]
            let mut w = 0.0;
            let mut weight = 1.0;
            for c in ((base + 2 - s_i)..=(base + 1)).rev() {
                w += weight * cost[c];
                weight *= rho;
            }
            window[i - 1] = w;
        }

        let mut tail = 0.0; // sum_{j=0}^{m-1} rho^j cost[m-j]
        let mut rho_m = 1.0;
        let top = xi.min(size - 1 - xi); // m <= xi and xi + m <= K-1
        for m in 1..=top {
            let t = xi + m;
            tail = cost[m] + rho * tail;
            rho_m *= rho;
            let a_m = 1.0 - rho_m;

            let mut bracket = 1.0 + fall_through;
            for i in 0..depths {
                if m > 1 {
                    let b = sub_base[i];
                    window[i] =
                        cost[b + m] + rho * window[i] - rho_span[i] * cost[b + m - sub_span[i]];
                }
                bracket += h[i] * (1.0 + norm[i] * window[i]);
            }

            cost[t] = rho_m * base_cost
                + (1.0 - f) * (a_m + (1.0 - rho) * tail)
                + f * a_m * bracket;
        }
    }
    Ok(cost)
}

/// Lookup cost table at the steady state of the model.
pub fn lookup_cost_table(p: &ChurnParams) -> Result<Vec<f64>> {
    let dead = steady_dead_fingers(p)?;
    lookup_cost_table_with(p, &dead, dead_s1_fraction(p))
}

/// Average of the cost table over the whole key space, `sum_t C_t / K`
/// (distance zero contributes nothing).
pub fn mean_cost_of(table: &[f64]) -> f64 {
    table.iter().sum::<f64>() / table.len() as f64
}

/// `L(r, alpha)`: expected cost of a lookup to a uniformly random key.
pub fn mean_lookup_cost(p: &ChurnParams) -> Result<f64> {
    Ok(mean_cost_of(&lookup_cost_table(p)?))
}

/// All predictions at one parameter point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryPoint {
    pub params: ChurnParams,
    pub rho: f64,
    /// Fraction of wrong first-successor pointers.
    pub wrong_s1: f64,
    /// Fraction of dead first-successor pointers.
    pub dead_s1: f64,
    /// Probability that a lookup is inconsistent.
    pub inconsistency: f64,
    /// Dead-finger fraction per finger, index `k-1`.
    pub dead_finger: Vec<f64>,
    /// Join replication probability per finger, index `k-1`.
    pub join_replication: Vec<f64>,
    /// Share probabilities per finger: `[p1, p2, p3]`, index `k-1`.
    pub share: Vec<[f64; 3]>,
    /// Expected lookup cost for distances `1..K-1` (index `t-1`).
    pub cost: Vec<f64>,
    /// Mean lookup cost over the key space.
    pub mean_cost: f64,
}

impl TheoryPoint {
    pub fn compute(p: &ChurnParams) -> Result<Self> {
        let m = p.finger_count();
        let dead_finger = steady_dead_fingers(p)?;
        let join_replication: Vec<f64> =
            (1..=m).map(|k| join_replication_prob(k, p)).collect::<Result<_>>()?;
        let share: Vec<[f64; 3]> = (1..=m)
            .map(|k| -> Result<[f64; 3]> {
                Ok([share_prob(k, 1, p)?, share_prob(k, 2, p)?, share_prob(k, 3, p)?])
            })
            .collect::<Result<_>>()?;
        let table = lookup_cost_table_with(p, &dead_finger, dead_s1_fraction(p))?;
        let mean_cost = mean_cost_of(&table);
        Ok(TheoryPoint {
            params: *p,
            rho: p.rho(),
            wrong_s1: wrong_s1_fraction(p),
            dead_s1: dead_s1_fraction(p),
            inconsistency: lookup_inconsistency(p),
            dead_finger,
            join_replication,
            share,
            cost: table[1..].to_vec(),
            mean_cost,
        })
    }

    /// Cost of resolving a key `t` steps away, `1 <= t < K`.
    pub fn cost_at(&self, t: usize) -> f64 {
        self.cost[t - 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: f64, bits: u32, alpha: f64, r: f64) -> ChurnParams {
        ChurnParams::new(n, bits, alpha, r, 6).unwrap()
    }

    fn headline_point() -> ChurnParams {
        params(1000.0, 20, 0.5, 500.0)
    }

    #[test]
    fn interval_pdf_examples() {
        // full ring: every interval has length 1
        let full = params((1u64 << 10) as f64, 10, 0.5, 100.0);
        assert_eq!(interval_pdf(1, &full).unwrap(), 1.0);
        // sparse ring: direct evaluation
        let p = headline_point();
        let got = interval_pdf(1, &p).unwrap();
        assert!((got - 1000.0 / 1048576.0).abs() < 1e-12, "{got}");
        assert!(interval_pdf(0, &p).is_err());
    }

    #[test]
    fn interval_pdf_normalizes_and_has_mean_k_over_n() {
        let p = headline_point();
        let rho = p.rho();
        // partial sum + analytic tail of the geometric series
        let cut = 40_000u64;
        let mut sum = 0.0;
        let mut mean = 0.0;
        for x in 1..=cut {
            let q = interval_pdf(x, &p).unwrap();
            sum += q;
            mean += x as f64 * q;
        }
        let tail = powu(rho, cut); // P(X > cut)
        assert!((sum + tail - 1.0).abs() < 1e-9);
        // E[X 1{X>cut}] = rho^cut (cut + 1/(1-rho))
        let mean_tail = tail * (cut as f64 + 1.0 / (1.0 - rho));
        let k_over_n = p.key_space() / p.node_count;
        assert!(((mean + mean_tail) / k_over_n - 1.0).abs() < 1e-9);
    }

    #[test]
    fn first_node_identities() {
        let p = headline_point();
        assert_eq!(at_least_one(0, &p), 0.0);
        assert!((first_node_at(0, &p) - (1.0 - p.rho())).abs() < 1e-15);
        assert!((at_least_one(1, &p) - (1.0 - p.rho())).abs() < 1e-15);
        // a(K) with N >= 1 is essentially 1
        assert!(at_least_one(1u64 << 20, &p) > 0.9999);
        // sum of b_i over a span equals a(span)
        for x in [1u64, 2, 7, 100] {
            let sum: f64 = (0..x).map(|i| first_node_at(i, &p)).sum();
            assert!((sum - at_least_one(x, &p)).abs() < 1e-12);
        }
        // conditional normalizes
        for x in [1u64, 2, 9, 333] {
            let sum: f64 = (0..x).map(|i| first_node_conditional(i, x, &p).unwrap()).sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
        assert_eq!(first_node_conditional(0, 1, &p).unwrap(), 1.0);
        // bc(1, 2) = rho (1-rho) / (1 - rho^2)
        let rho = p.rho();
        let want = rho * (1.0 - rho) / (1.0 - rho * rho);
        assert!((first_node_conditional(1, 2, &p).unwrap() - want).abs() < 1e-15);
        assert!(first_node_conditional(0, 0, &p).is_err());
        assert!(first_node_conditional(2, 2, &p).is_err());
    }

    #[test]
    fn dead_zero_rho_first_node() {
        let full = params(16.0, 4, 0.5, 10.0);
        assert_eq!(first_node_at(0, &full), 1.0);
    }

    /// The derived order-1 share sum equals the printed closed form
    /// `rho/(1+rho) (1 - rho^(2^k - 2))`.
    #[test]
    fn share_order1_matches_closed_form() {
        for (n, bits) in [(1000.0, 20u32), (64.0, 12), (100.0, 10)] {
            let p = params(n, bits, 0.5, 500.0);
            let rho = p.rho();
            for k in 1..=bits {
                let want = rho / (1.0 + rho) * (1.0 - powu(rho, (1u64 << k) - 2));
                let got = share_prob(k, 1, &p).unwrap();
                assert!((got - want).abs() < 1e-12, "k={k} got={got} want={want}");
            }
        }
    }

    #[test]
    fn share_prob_examples() {
        let p = headline_point();
        for order in 1..=3u8 {
            assert_eq!(share_prob(1, order, &p).unwrap(), 0.0);
        }
        // saturates near rho/(1+rho) ~ 1/2 for long fingers in a sparse ring
        let p1 = share_prob(18, 1, &p).unwrap();
        assert!((p1 - 0.5).abs() < 0.01, "{p1}");
        // monotone in order
        for k in 1..=20 {
            let a = share_prob(k, 1, &p).unwrap();
            let b = share_prob(k, 2, &p).unwrap();
            let c = share_prob(k, 3, &p).unwrap();
            assert!(a >= b && b >= c && c >= 0.0, "k={k}: {a} {b} {c}");
        }
        assert!(share_prob(0, 1, &p).is_err());
        assert!(share_prob(21, 1, &p).is_err());
        assert!(share_prob(5, 4, &p).is_err());
    }

    #[test]
    fn join_replication_limits() {
        let p = headline_point();
        for k in 1..=3 {
            assert_eq!(join_replication_prob(k, &p).unwrap(), 0.0);
        }
        assert!(join_replication_prob(5, &p).unwrap() < 0.01);
        assert!(join_replication_prob(20, &p).unwrap() > 0.999);
        // monotone ramp in between
        let mut last = 0.0;
        for k in 4..=20 {
            let v = join_replication_prob(k, &p).unwrap();
            assert!(v >= last - 1e-12);
            last = v;
        }
    }

    #[test]
    fn wrong_s1_examples() {
        let p = params(1000.0, 20, 0.5, 200.0);
        assert!((wrong_s1_fraction(&p) - 2.0 / 103.0).abs() < 1e-15);
        assert!((dead_s1_fraction(&p) - 1.0 / 103.0).abs() < 1e-15);
        assert!((lookup_inconsistency(&p) - 1.0 / 103.0).abs() < 1e-15);
        // no stabilization at all: 2/3 of pointers wrong
        let r0 = params(1000.0, 20, 0.5, 0.0);
        assert!((wrong_s1_fraction(&r0) - 2.0 / 3.0).abs() < 1e-15);
        // perfect stabilization
        let hi = params(1000.0, 20, 0.5, 1e12);
        assert!(wrong_s1_fraction(&hi) < 1e-9);
        assert!(dead_s1_fraction(&hi) <= wrong_s1_fraction(&hi));
    }

    #[test]
    fn finger_fraction_root_properties() {
        let p = headline_point();
        for k in 1..=20 {
            let f = dead_finger_fraction(k, &p).unwrap();
            assert!((0.0..=1.0).contains(&f), "k={k} f={f}");
            let residual = finger_balance_residual(k, f, &p).unwrap();
            assert!(residual.abs() < 1e-9, "k={k} residual={residual}");
            // the two roots multiply to 1, so the larger one is 1/f
            let (a, b) = finger_balance(k, &p).unwrap();
            let disc = (b * b - 4.0 * a * a).sqrt();
            let big = (b + disc) / (2.0 * a);
            assert!((big * f - 1.0).abs() < 1e-9, "k={k}");
        }
        // infinite finger stabilization kills all dead fingers
        let hi = params(1000.0, 20, 0.0, 1e9);
        assert!(dead_finger_fraction(10, &hi).unwrap() < 1e-6);
        // alpha = 1 starves fingers: no steady state
        let starved = params(1000.0, 20, 1.0, 500.0);
        assert!(matches!(
            dead_finger_fraction(10, &starved),
            Err(AnalyticsError::NoSteadyState { .. })
        ));
    }

    #[test]
    fn finger_fraction_monotone_in_k() {
        for (alpha, r) in [(0.25, 200.0), (0.5, 500.0), (0.75, 2000.0), (0.5, 200.0)] {
            let p = params(1000.0, 20, alpha, r);
            let mut last = 0.0;
            for k in 5..=20 {
                let f = dead_finger_fraction(k, &p).unwrap();
                assert!(f >= last - 1e-12, "alpha={alpha} r={r} k={k}: {f} < {last}");
                last = f;
            }
        }
    }

    #[test]
    fn adjacent_cost_examples() {
        assert_eq!(adjacent_cost(&[0.0; 6]), 1.0);
        assert_eq!(adjacent_cost(&[0.5, 0.0, 0.0]), 1.5);
        // equal small death prob: cost ~= 1 + d, within the series truncation
        let d = 1.0 / 250.0;
        let c = adjacent_cost(&[d; 6]);
        assert!((c - (1.0 + d)).abs() <= d * d / (1.0 - d) + 1e-12, "c={c}");
    }

    #[test]
    fn fallback_profile_properties() {
        let p = headline_point();
        // k = 1: only the successor list remains
        assert_eq!(fallback_prob(1, 1, &p).unwrap(), 1.0);
        // no deaths, no sharing: always the next finger down
        let empty = params((1u64 << 10) as f64, 10, 0.5, 100.0); // rho = 0
        let h = fallback_profile(7, &[0.0; 10], &empty).unwrap();
        assert!((h[0] - 1.0).abs() < 1e-12);
        assert!(h[1..].iter().all(|&x| x.abs() < 1e-12));
        // sums to one for every finger at a churny point
        let dead = (1..=20).map(|k| dead_finger_fraction(k, &p).unwrap()).collect::<Vec<_>>();
        for k in 1..=20u32 {
            let h = fallback_profile(k, &dead, &p).unwrap();
            let sum: f64 = h.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9, "k={k} sum={sum}");
            assert!(h.iter().all(|&x| (-1e-12..=1.0).contains(&x)));
        }
        assert!(fallback_prob(3, 0, &p).is_err());
        assert!(fallback_prob(3, 4, &p).is_err());
    }

    #[test]
    fn cost_table_structure() {
        let p = params(100.0, 10, 0.5, 500.0);
        let table = lookup_cost_table(&p).unwrap();
        // t = 1 is the successor-list series
        let d1 = dead_s1_fraction(&p);
        assert!((table[1] - adjacent_cost(&[d1; 6])).abs() < 1e-12);
        // every entry costs at least one hop
        for (t, &c) in table.iter().enumerate().skip(1) {
            assert!(c >= 1.0, "t={t} c={c}");
        }
        // each target is decomposed against the closest strictly preceding
        // finger: recompute one mid-block and one block-boundary entry from
        // first principles
        let dead: Vec<f64> = (1..=10).map(|k| dead_finger_fraction(k, &p).unwrap()).collect();
        let rho = p.rho();
        for k in 2..=9u32 {
            let xi = 1usize << (k - 1);
            for m in [1usize, xi] {
                let t = xi + m;
                let f = dead[k as usize - 1];
                let h = fallback_profile(k, &dead, &p).unwrap();
                let mut bracket = 1.0 + 2.0 * h[k as usize - 1];
                for i in 1..k as usize {
                    let s_i = xi >> i;
                    let base = xi - s_i;
                    let mut inner = 0.0;
                    for l in 1..=s_i {
                        inner += first_node_conditional((l - 1) as u64, s_i as u64, &p).unwrap()
                            * (1.0 + table[base + 1 - l + m]);
                    }
                    bracket += h[i - 1] * inner;
                }
                let mut hop_term = at_least_one(m as u64, &p);
                for j in 0..m {
                    hop_term += first_node_at(j as u64, &p) * table[m - j];
                }
                let want = powu(rho, m as u64) * table[xi]
                    + (1.0 - f) * hop_term
                    + f * at_least_one(m as u64, &p) * bracket;
                assert!((table[t] - want).abs() < 1e-9, "k={k} m={m}");
            }
        }
    }

    #[test]
    fn cost_table_no_failures_bounded_by_m() {
        let p = params(64.0, 10, 0.5, 500.0);
        let table = lookup_cost_table_with(&p, &[0.0; 10], 0.0).unwrap();
        assert_eq!(table[1], 1.0);
        for (t, &c) in table.iter().enumerate().skip(1) {
            assert!((1.0..=10.0).contains(&c), "t={t} c={c}");
        }
        // hand-evaluated small cases with no failures:
        // C_2 = rho C_1 + (1-rho)(1 + C_1), C_3 = rho C_2 + (1-rho)(1 + C_1)
        let rho = p.rho();
        assert!((table[2] - (rho + (1.0 - rho) * 2.0)).abs() < 1e-12);
        let c3 = rho * table[2] + (1.0 - rho) * (1.0 + table[1]);
        assert!((table[3] - c3).abs() < 1e-12);
    }

    #[test]
    fn mean_cost_trends() {
        let slow = params(1000.0, 14, 0.5, 200.0);
        let fast = params(1000.0, 14, 0.5, 1000.0);
        let l_slow = mean_lookup_cost(&slow).unwrap();
        let l_fast = mean_lookup_cost(&fast).unwrap();
        assert!(l_slow > l_fast, "{l_slow} vs {l_fast}");
        assert!(l_fast >= 1.0);
    }

    #[test]
    fn theory_point_is_consistent() {
        let p = params(1000.0, 14, 0.5, 500.0);
        let tp = TheoryPoint::compute(&p).unwrap();
        assert!(tp.dead_s1 <= tp.wrong_s1);
        assert!((tp.inconsistency - (tp.wrong_s1 - tp.dead_s1)).abs() < 1e-15);
        assert_eq!(tp.cost.len(), (1usize << 14) - 1);
        assert_eq!(tp.dead_finger.len(), 14);
        assert!((tp.mean_cost - mean_lookup_cost(&p).unwrap()).abs() < 1e-12);
        assert!(tp.dead_finger.iter().all(|f| (0.0..=1.0).contains(f)));
        assert_eq!(tp.cost_at(1), tp.cost[0]);
    }

    #[test]
    fn params_validation() {
        assert!(ChurnParams::new(0.0, 20, 0.5, 500.0, 6).is_err());
        assert!(ChurnParams::new(1000.0, 0, 0.5, 500.0, 6).is_err());
        assert!(ChurnParams::new(1000.0, 20, 1.5, 500.0, 6).is_err());
        assert!(ChurnParams::new(1000.0, 20, 0.5, -1.0, 6).is_err());
        assert!(ChurnParams::new(1000.0, 20, 0.5, 500.0, 0).is_err());
        // N = K is the dense limit and is allowed
        assert!(ChurnParams::new(16.0, 4, 0.5, 500.0, 2).is_ok());
    }
}
