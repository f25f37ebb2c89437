//! Protocol semantics: join, ungraceful failure (in `Network::remove_at`),
//! successor/finger stabilization and the iterative lookup.

use alloc::vec::Vec;

use crate::ring::{KeyInterval, RingKey};
use crate::sim::network::{Network, NodeState};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LookupResult {
    /// First alive node at or past the target, as seen through routing.
    pub node: RingKey,
    pub hops: u32,
    pub timeouts: u32,
}

impl LookupResult {
    pub fn cost(&self) -> u32 {
        self.hops + self.timeouts
    }
}

/// Iterative lookup for `target` starting at `origin`.
///
/// At each node the fingers are scanned from the largest one preceding the
/// target downward; contacting a dead finger costs one timeout (the same dead
/// node is not contacted twice from one table), the first alive finger that
/// makes progress costs one hop. When no finger helps, the successor list is
/// the last resort: dead entries cost timeouts, and the first alive entry
/// either carries the query forward or, if it is at or past the target, is the
/// answer. Returns `None` when the budget is exhausted or a node has no alive
/// successor to offer; never mutates any state.
pub fn lookup(net: &Network, origin: RingKey, target: RingKey, budget: u32) -> Option<LookupResult> {
    let ring = net.ring();
    if ring.distance(origin, target) == 0 {
        return Some(LookupResult { node: origin, hops: 0, timeouts: 0 });
    }
    let mut cur = origin;
    let mut hops = 0u32;
    let mut timeouts = 0u32;
    let mut tried: Vec<RingKey> = Vec::with_capacity(8);

    'route: loop {
        if hops + timeouts > budget {
            return None;
        }
        let st = net.state(cur);
        let dist_target = ring.distance(cur, target);
        tried.clear();

        for &w in st.fingers.iter().rev() {
            let d = ring.distance(cur, w);
            if d == 0 || d >= dist_target {
                continue; // not strictly preceding the target
            }
            if net.is_alive(w) {
                hops += 1;
                cur = w;
                continue 'route;
            }
            if !tried.contains(&w) {
                tried.push(w);
                timeouts += 1;
                if hops + timeouts > budget {
                    return None;
                }
            }
        }

        for &s in &st.successors {
            let d = ring.distance(cur, s);
            if d == 0 {
                continue;
            }
            if !net.is_alive(s) {
                if !tried.contains(&s) {
                    tried.push(s);
                    timeouts += 1;
                    if hops + timeouts > budget {
                        return None;
                    }
                }
                continue;
            }
            hops += 1;
            if d >= dist_target {
                return Some(LookupResult { node: s, hops, timeouts });
            }
            cur = s;
            continue 'route;
        }

        // every successor dead: this node cannot resolve the query
        return None;
    }
}

/// `from` tells `to` it is alive; `to` adopts it as predecessor when it has
/// none, the current one is dead, or `from` is closer.
fn notify(net: &mut Network, from: RingKey, to: RingKey) {
    let ring = net.ring();
    let cur = net.state(to).predecessor;
    let adopt = match cur {
        None => true,
        Some(p) if p == from => false,
        Some(p) => {
            !net.is_alive(p) || ring.in_interval(from, KeyInterval::open_open(p, to))
        }
    };
    if adopt {
        net.state_mut(to).predecessor = Some(from);
    }
}

/// Reconciled successor list: `head` first, then its list, minus `owner` and
/// duplicates, truncated to the configured length.
fn reconcile_list(net: &Network, owner: RingKey, head: RingKey) -> Vec<RingKey> {
    let mut list = Vec::with_capacity(net.succ_len());
    list.push(head);
    for &s in &net.state(head).successors {
        if list.len() >= net.succ_len() {
            break;
        }
        if s != owner && !list.contains(&s) {
            list.push(s);
        }
    }
    list
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JoinOutcome {
    Joined,
    /// The bootstrap lookup could not resolve a successor; nothing changed.
    RoutingFailed,
    /// The key is already taken; nothing changed.
    KeyCollision,
}

/// A new node takes `new_key`, finds its successor `v` through `contact`, and
/// performs a successor stabilization on it. Fingers whose start lies in
/// `(u, v]` are set to `v`; the rest are best estimates resolved through `v`'s
/// finger table, with no correctness guarantee. `v` learns about the joiner;
/// the old predecessor of `v` keeps its now-wrong first successor.
pub fn join(net: &mut Network, new_key: RingKey, contact: RingKey, budget: u32) -> JoinOutcome {
    let ring = net.ring();
    if net.is_alive(new_key) {
        return JoinOutcome::KeyCollision;
    }
    let mut succ = match lookup(net, contact, new_key, budget) {
        Some(r) => r.node,
        None => return JoinOutcome::RoutingFailed,
    };
    // Stabilization against the found successor: adopt any closer alive
    // predecessor it knows of, repeating until none remains.
    for _ in 0..64 {
        match net.state(succ).predecessor {
            Some(p)
                if net.is_alive(p)
                    && ring.in_interval(p, KeyInterval::open_open(new_key, succ)) =>
            {
                succ = p;
            }
            _ => break,
        }
    }

    let successors = reconcile_list(net, new_key, succ);
    let predecessor = match net.state(succ).predecessor {
        Some(p) if p != new_key => Some(p),
        _ => None,
    };

    let m = ring.bits();
    let vstate_fingers: Vec<RingKey> = net.state(succ).fingers.clone();
    let dist_succ = ring.distance(new_key, succ);
    let mut fingers = Vec::with_capacity(m as usize);
    for i in 1..=m {
        let span = 1u64 << (i - 1);
        if span <= dist_succ {
            // start in (u, v]: v is an acceptable finger node
            fingers.push(succ);
        } else {
            fingers.push(estimate_from(&vstate_fingers, ring, new_key, span));
        }
    }

    net.insert(NodeState { key: new_key, successors, fingers, predecessor });
    notify(net, new_key, succ);
    JoinOutcome::Joined
}

/// Resolve a finger start `u + span` through another node's finger entries:
/// the closest entry at or past the start wins; with none, the furthest entry
/// is the best remaining estimate.
fn estimate_from(
    entries: &[RingKey],
    ring: crate::ring::Ring,
    u: RingKey,
    span: u64,
) -> RingKey {
    let mut best: Option<(u64, RingKey)> = None;
    let mut furthest: Option<(u64, RingKey)> = None;
    for &w in entries {
        let d = ring.distance(u, w);
        if d >= span {
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, w));
            }
        } else if furthest.is_none_or(|(fd, _)| d > fd) {
            furthest = Some((d, w));
        }
    }
    best.or(furthest).expect("finger table not empty").1
}

/// Whole successor list dead: the node is isolated and the run cannot
/// continue meaningfully.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Isolated {
    pub node: RingKey,
}

/// One successor stabilization by `n`: skip dead list entries to the first
/// alive successor, adopt its predecessor when that is a closer alive node,
/// reconcile the list, and notify the successor.
pub fn stabilize_successor(net: &mut Network, n: RingKey) -> Result<(), Isolated> {
    let ring = net.ring();
    let v = {
        let st = net.state(n);
        match st.successors.iter().copied().find(|&s| net.is_alive(s)) {
            Some(v) => v,
            None => return Err(Isolated { node: n }),
        }
    };
    let mut list = reconcile_list(net, n, v);
    if let Some(x) = net.state(v).predecessor {
        if x != n
            && net.is_alive(x)
            && ring.in_interval(x, KeyInterval::open_open(n, v))
            && !list.contains(&x)
        {
            list.insert(0, x);
            list.truncate(net.succ_len());
        }
    }
    net.state_mut(n).successors = list;
    notify(net, n, v);
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FingerStab {
    Updated { old: RingKey, new: RingKey },
    /// The lookup for the finger start failed; the entry is left alone.
    LookupFailed,
}

/// Re-resolve finger `i` of node `n` by looking up its start.
pub fn stabilize_finger(net: &mut Network, n: RingKey, i: u32, budget: u32) -> FingerStab {
    let ring = net.ring();
    let start = ring.finger_start(n, i).expect("finger index in range");
    match lookup(net, n, start, budget) {
        Some(res) => {
            let slot = &mut net.state_mut(n).fingers[i as usize - 1];
            let old = *slot;
            *slot = res.node;
            FingerStab::Updated { old, new: res.node }
        }
        None => FingerStab::LookupFailed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::Ring;
    use crate::sim::network::Network;

    fn keys(v: &[u64]) -> Vec<RingKey> {
        v.iter().map(|&x| RingKey(x)).collect()
    }

    fn small_net() -> Network {
        let ring = Ring::new(6).unwrap();
        Network::perfect(ring, 2, &keys(&[5, 20, 33, 50]))
    }

    #[test]
    fn lookup_trivial_cases() {
        let net = small_net();
        // distance zero resolves to the origin at no cost
        let r = lookup(&net, RingKey(20), RingKey(20), 24).unwrap();
        assert_eq!((r.node, r.hops, r.timeouts), (RingKey(20), 0, 0));
        // adjacent key: one hop to the correct alive successor
        let r = lookup(&net, RingKey(5), RingKey(6), 24).unwrap();
        assert_eq!((r.node, r.hops, r.timeouts), (RingKey(20), 1, 0));
    }

    #[test]
    fn lookup_skips_dead_successor_with_timeout() {
        let mut net = small_net();
        let idx = (0..net.len()).find(|&i| net.nth(i) == RingKey(20)).unwrap();
        net.remove_at(idx);
        // 5 still lists 20 first; the adjacent-key lookup times out once and
        // lands on 33: 1 hop + 1 timeout
        let r = lookup(&net, RingKey(5), RingKey(6), 24).unwrap();
        assert_eq!((r.node, r.hops, r.timeouts), (RingKey(33), 1, 1));
    }

    #[test]
    fn lookup_returns_true_owner_on_perfect_net() {
        let ring = Ring::new(10).unwrap();
        let ks: Vec<RingKey> = (0..64).map(|i| RingKey(i * 16 + 3)).collect();
        let net = Network::perfect(ring, 4, &ks);
        for target in [0u64, 100, 511, 512, 1000, 1023] {
            let t = RingKey(target);
            let r = lookup(&net, RingKey(3), t, 40).unwrap();
            assert_eq!(r.node, net.first_at_or_after(t), "target {target}");
            assert_eq!(r.timeouts, 0);
            assert!(r.hops <= 10);
        }
    }

    #[test]
    fn join_into_small_net() {
        let mut net = small_net();
        // 25 joins between 20 and 33
        let out = join(&mut net, RingKey(25), RingKey(50), 24);
        assert_eq!(out, JoinOutcome::Joined);
        let st = net.state(RingKey(25));
        // correct successor, list seeded from it
        assert_eq!(st.successors[0], RingKey(33));
        assert_eq!(st.predecessor, Some(RingKey(20)));
        // 33 learned about the joiner
        assert_eq!(net.state(RingKey(33)).predecessor, Some(RingKey(25)));
        // joiner's s1 correct; exactly one pre-existing node (20) now wrong
        assert!(!net.has_wrong_s1(RingKey(25)));
        let wrong: Vec<RingKey> =
            net.sorted_keys().into_iter().filter(|&k| net.has_wrong_s1(k)).collect();
        assert_eq!(wrong, keys(&[20]));
        // fingers with start in (25, 33] point to 33
        let st = net.state(RingKey(25));
        assert_eq!(st.fingers[0], RingKey(33)); // start 26
        assert_eq!(st.fingers[1], RingKey(33)); // start 27
        assert_eq!(st.fingers[2], RingKey(33)); // start 29
        assert_eq!(st.fingers[3], RingKey(33)); // start 33
        // start 41 and 57: estimated through 33's fingers
        assert_eq!(st.fingers[4], RingKey(50)); // 33's table resolves 41 -> 50
    }

    #[test]
    fn join_collision_rejected() {
        let mut net = small_net();
        assert_eq!(join(&mut net, RingKey(20), RingKey(5), 24), JoinOutcome::KeyCollision);
        assert_eq!(net.len(), 4);
    }

    #[test]
    fn join_when_pred_already_wrong_leaves_w1_unchanged() {
        let mut net = small_net();
        // make 20's s1 wrong by hand: point it past 33
        net.state_mut(RingKey(20)).successors = keys(&[50, 5]);
        let wrong_before: usize =
            net.sorted_keys().iter().filter(|&&k| net.has_wrong_s1(k)).count();
        assert_eq!(wrong_before, 1);
        // 25 joins between 20 and 33; 20 was already wrong and stays wrong
        join(&mut net, RingKey(25), RingKey(5), 24);
        let wrong_after: usize =
            net.sorted_keys().iter().filter(|&&k| net.has_wrong_s1(k)).count();
        assert_eq!(wrong_after, 1);
        assert!(net.has_wrong_s1(RingKey(20)));
        assert!(!net.has_wrong_s1(RingKey(25)));
    }

    #[test]
    fn failure_cases_match_w1_accounting() {
        // three nodes in a row: failing the middle one makes its predecessor
        // wrong (both pointers were correct: +1)
        let mut net = small_net();
        let w = |net: &Network| -> usize {
            net.sorted_keys().iter().filter(|&&k| net.has_wrong_s1(k)).count()
        };
        assert_eq!(w(&net), 0);
        let idx = (0..net.len()).find(|&i| net.nth(i) == RingKey(33)).unwrap();
        net.remove_at(idx);
        assert_eq!(w(&net), 1);
        assert!(net.has_wrong_s1(RingKey(20)));
    }

    #[test]
    fn stabilize_successor_repairs_wrong_pointer() {
        let mut net = small_net();
        join(&mut net, RingKey(25), RingKey(5), 24);
        assert!(net.has_wrong_s1(RingKey(20)));
        // 20 stabilizes: asks 33 (its stale s1), learns of 25, adopts it
        stabilize_successor(&mut net, RingKey(20)).unwrap();
        assert!(!net.has_wrong_s1(RingKey(20)));
        assert_eq!(net.state(RingKey(20)).successors[0], RingKey(25));
        // idempotent once correct
        let before = net.state(RingKey(20)).clone();
        stabilize_successor(&mut net, RingKey(20)).unwrap();
        assert_eq!(net.state(RingKey(20)).successors, before.successors);
    }

    #[test]
    fn stabilize_successor_skips_dead_entries() {
        let mut net = small_net();
        let idx = (0..net.len()).find(|&i| net.nth(i) == RingKey(20)).unwrap();
        net.remove_at(idx);
        assert!(net.has_dead_s1(RingKey(5)));
        stabilize_successor(&mut net, RingKey(5)).unwrap();
        assert!(!net.has_wrong_s1(RingKey(5)));
        assert_eq!(net.state(RingKey(5)).successors[0], RingKey(33));
    }

    #[test]
    fn stabilize_successor_isolated_when_list_all_dead() {
        let ring = Ring::new(6).unwrap();
        let mut net = Network::perfect(ring, 2, &keys(&[5, 20, 33, 50, 60]));
        for dead in [20u64, 33] {
            let idx = (0..net.len()).find(|&i| net.nth(i) == RingKey(dead)).unwrap();
            net.remove_at(idx);
        }
        // 5's whole list (20, 33) is dead
        assert_eq!(stabilize_successor(&mut net, RingKey(5)), Err(Isolated { node: RingKey(5) }));
    }

    #[test]
    fn stabilize_finger_fixes_dead_entry() {
        let mut net = small_net();
        let idx = (0..net.len()).find(|&i| net.nth(i) == RingKey(33)).unwrap();
        net.remove_at(idx);
        // 5's finger 5 (start 21) pointed at 33, now dead
        assert_eq!(net.state(RingKey(5)).fingers[4], RingKey(33));
        let out = stabilize_finger(&mut net, RingKey(5), 5, 24);
        assert_eq!(out, FingerStab::Updated { old: RingKey(33), new: RingKey(50) });
        assert_eq!(net.state(RingKey(5)).fingers[4], RingKey(50));
        // stabilizing a correct finger is idempotent
        let out = stabilize_finger(&mut net, RingKey(5), 5, 24);
        assert_eq!(out, FingerStab::Updated { old: RingKey(50), new: RingKey(50) });
    }

    #[test]
    fn notify_replaces_dead_predecessor() {
        let mut net = small_net();
        let idx = (0..net.len()).find(|&i| net.nth(i) == RingKey(20)).unwrap();
        net.remove_at(idx);
        assert_eq!(net.state(RingKey(33)).predecessor, Some(RingKey(20)));
        // 5 stabilizes: first alive successor is 33; 33's pred is dead, so 5
        // replaces it even though 20 was "closer"
        stabilize_successor(&mut net, RingKey(5)).unwrap();
        assert_eq!(net.state(RingKey(33)).predecessor, Some(RingKey(5)));
    }
}
