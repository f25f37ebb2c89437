//! Non-mutating measurement probes over the live network.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::ring::RingKey;
use crate::rng::Rng;
use crate::sim::network::Network;
use crate::sim::protocol::lookup;

/// One metrics snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSample {
    pub time: f64,
    pub n_now: u32,
    /// Fraction of alive nodes whose first successor pointer is wrong.
    pub wrong_s1: f64,
    /// Fraction whose first successor pointer is dead.
    pub dead_s1: f64,
    /// Fraction whose `k`-th finger is dead, index `k-1`.
    pub dead_finger: Vec<f64>,
    /// Fraction of successful probe lookups that returned the wrong owner.
    pub probe_inconsistency: f64,
    /// Mean cost (hops + timeouts) over successful probe lookups.
    pub probe_cost_mean: f64,
    /// Probes that exhausted the routing budget; excluded from the numbers
    /// above.
    pub probes_failed: u32,
    pub probes: u32,
}

/// Takes one sample: pointer-state fractions by full scan against the true
/// ring, plus `probes` random lookups (uniform alive origin, uniform target
/// key) from a dedicated random stream.
pub fn sample_metrics(net: &Network, probes: u32, rng: &mut Rng, time: f64) -> MetricsSample {
    let ring = net.ring();
    let m = ring.bits() as usize;
    let keys = net.sorted_keys();
    let n = keys.len();

    let mut wrong = 0usize;
    let mut dead = 0usize;
    let mut dead_fingers = vec![0usize; m];
    for (idx, &key) in keys.iter().enumerate() {
        let st = net.state(key);
        let true_succ = keys[(idx + 1) % n];
        match st.successors.first() {
            Some(&s1) => {
                if s1 != true_succ {
                    wrong += 1;
                }
                if !net.is_alive(s1) {
                    dead += 1;
                }
            }
            None => {
                wrong += 1;
                dead += 1;
            }
        }
        for (k, &f) in st.fingers.iter().enumerate() {
            if !net.is_alive(f) {
                dead_fingers[k] += 1;
            }
        }
    }

    let budget = 4 * ring.bits();
    let mut inconsistent = 0u32;
    let mut cost_sum = 0u64;
    let mut ok = 0u32;
    let mut failed = 0u32;
    for _ in 0..probes {
        let origin = net.nth(rng.range(n as u64) as usize);
        let target = RingKey(rng.range(ring.size()));
        match lookup(net, origin, target, budget) {
            Some(res) => {
                ok += 1;
                cost_sum += res.cost() as u64;
                if res.node != net.first_at_or_after(target) {
                    inconsistent += 1;
                }
            }
            None => failed += 1,
        }
    }

    let nf = n as f64;
    MetricsSample {
        time,
        n_now: n as u32,
        wrong_s1: wrong as f64 / nf,
        dead_s1: dead as f64 / nf,
        dead_finger: dead_fingers.into_iter().map(|c| c as f64 / nf).collect(),
        probe_inconsistency: if ok > 0 { inconsistent as f64 / ok as f64 } else { 0.0 },
        probe_cost_mean: if ok > 0 { cost_sum as f64 / ok as f64 } else { 0.0 },
        probes_failed: failed,
        probes,
    }
}
