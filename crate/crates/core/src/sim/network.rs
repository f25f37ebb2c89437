//! Ground-truth network state: every alive node and its routing tables.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Bound;

use crate::ring::{Ring, RingKey};

/// One participant's routing state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeState {
    pub key: RingKey,
    /// Successor list, `s1` first; no duplicates, never contains `key`.
    pub successors: Vec<RingKey>,
    /// Finger targets; entry `i-1` is the node the `i`-th finger points to.
    /// The start of finger `i` is always `key + 2^(i-1)` and is not stored.
    pub fingers: Vec<RingKey>,
    pub predecessor: Option<RingKey>,
}

/// All alive nodes plus the derived ground-truth views used by metrics and
/// instrumentation. The sorted key set of `nodes` *is* the true ring.
#[derive(Debug, Clone)]
pub struct Network {
    ring: Ring,
    succ_len: usize,
    nodes: BTreeMap<RingKey, NodeState>,
    /// Alive keys in arbitrary order; supports uniform picks in O(1).
    alive: Vec<RingKey>,
    /// Aliveness bitmap over the whole key space for O(1) dead checks.
    bitmap: Vec<u64>,
}

impl Network {
    pub fn new(ring: Ring, succ_len: usize) -> Self {
        let words = ring.size().div_ceil(64) as usize;
        Network { ring, succ_len, nodes: BTreeMap::new(), alive: Vec::new(), bitmap: vec![0; words] }
    }

    /// Builds a globally correct network over the given (distinct) keys:
    /// exact successor lists, predecessors and fingers.
    pub fn perfect(ring: Ring, succ_len: usize, keys: &[RingKey]) -> Self {
        let mut sorted: Vec<RingKey> = keys.to_vec();
        sorted.sort();
        let n = sorted.len();
        let mut net = Network::new(ring, succ_len);
        for (idx, &key) in sorted.iter().enumerate() {
            let take = succ_len.min(n - 1);
            let successors: Vec<RingKey> =
                (1..=take).map(|j| sorted[(idx + j) % n]).collect();
            let predecessor = Some(sorted[(idx + n - 1) % n]);
            let fingers = (1..=ring.bits())
                .map(|i| {
                    let start = ring.finger_start(key, i).expect("finger index in range");
                    *first_at_or_after_in(&sorted, start)
                })
                .collect();
            net.insert(NodeState { key, successors, fingers, predecessor });
        }
        net
    }

    #[inline]
    pub fn ring(&self) -> Ring {
        self.ring
    }

    #[inline]
    pub fn succ_len(&self) -> usize {
        self.succ_len
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.alive.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.alive.is_empty()
    }

    #[inline]
    pub fn is_alive(&self, k: RingKey) -> bool {
        self.bitmap[(k.0 >> 6) as usize] & (1u64 << (k.0 & 63)) != 0
    }

    pub fn state(&self, k: RingKey) -> &NodeState {
        &self.nodes[&k]
    }

    pub fn state_mut(&mut self, k: RingKey) -> &mut NodeState {
        self.nodes.get_mut(&k).expect("node is alive")
    }

    pub fn contains(&self, k: RingKey) -> bool {
        self.is_alive(k)
    }

    /// Key of the alive node at position `idx` of the pick list.
    #[inline]
    pub fn nth(&self, idx: usize) -> RingKey {
        self.alive[idx]
    }

    pub fn insert(&mut self, st: NodeState) {
        let k = st.key;
        debug_assert!(!self.is_alive(k));
        self.nodes.insert(k, st);
        self.alive.push(k);
        self.bitmap[(k.0 >> 6) as usize] |= 1u64 << (k.0 & 63);
    }

    /// Removes the node at pick-list position `idx` with no notifications;
    /// every reference to it elsewhere now dangles.
    pub fn remove_at(&mut self, idx: usize) -> RingKey {
        let k = self.alive.swap_remove(idx);
        self.nodes.remove(&k);
        self.bitmap[(k.0 >> 6) as usize] &= !(1u64 << (k.0 & 63));
        k
    }

    /// True successor of node `n`: the next alive key clockwise.
    pub fn successor_of(&self, n: RingKey) -> RingKey {
        self.nodes
            .range((Bound::Excluded(n), Bound::Unbounded))
            .next()
            .or_else(|| self.nodes.iter().next())
            .map(|(k, _)| *k)
            .expect("network not empty")
    }

    /// True predecessor of key `k` (last alive key strictly before it).
    pub fn predecessor_of(&self, k: RingKey) -> RingKey {
        self.nodes
            .range(..k)
            .next_back()
            .map(|(key, _)| *key)
            .or_else(|| self.nodes.keys().rev().find(|&&key| key != k).copied())
            .expect("network has another node")
    }

    /// First alive node at or after key `k`; the true owner of `k`.
    pub fn first_at_or_after(&self, k: RingKey) -> RingKey {
        self.nodes
            .range(k..)
            .next()
            .or_else(|| self.nodes.iter().next())
            .map(|(key, _)| *key)
            .expect("network not empty")
    }

    /// Whether `n`'s first successor pointer is wrong (incorrect or dead).
    pub fn has_wrong_s1(&self, n: RingKey) -> bool {
        match self.nodes[&n].successors.first() {
            Some(&s1) => s1 != self.successor_of(n),
            None => true,
        }
    }

    /// Whether `n`'s first successor pointer is dead.
    pub fn has_dead_s1(&self, n: RingKey) -> bool {
        match self.nodes[&n].successors.first() {
            Some(&s1) => !self.is_alive(s1),
            None => true,
        }
    }

    /// Alive keys in ring order.
    pub fn sorted_keys(&self) -> Vec<RingKey> {
        self.nodes.keys().copied().collect()
    }

    pub fn states(&self) -> impl Iterator<Item = &NodeState> {
        self.nodes.values()
    }

    /// Inter-node distances around the ring, one per node.
    pub fn intervals(&self) -> Vec<u64> {
        let keys = self.sorted_keys();
        let n = keys.len();
        (0..n).map(|i| self.ring.distance(keys[i], keys[(i + 1) % n])).collect()
    }

    /// Debug coherence check: pick list, map and bitmap agree.
    pub fn check_coherent(&self) {
        debug_assert_eq!(self.alive.len(), self.nodes.len());
        #[cfg(debug_assertions)]
        {
            let bits: u64 = self.bitmap.iter().map(|w| w.count_ones() as u64).sum();
            assert_eq!(bits as usize, self.nodes.len());
            for k in &self.alive {
                assert!(self.nodes.contains_key(k));
            }
        }
    }
}

/// First element of `sorted` at or after `start`, wrapping.
fn first_at_or_after_in(sorted: &[RingKey], start: RingKey) -> &RingKey {
    match sorted.binary_search(&start) {
        Ok(i) => &sorted[i],
        Err(i) => &sorted[i % sorted.len()],
    }
}
