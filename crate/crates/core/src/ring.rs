//! Identifier-space arithmetic: keys on a ring of size `K = 2^bits`,
//! clockwise distances, finger starts and wrap-aware interval membership.
//!
//! Everything modular lives here so wrap-around logic is written (and tested)
//! exactly once.

use core::fmt;

use serde::{Deserialize, Serialize};

/// A key on the ring. Only meaningful relative to a [`Ring`], which fixes the
/// modulus; constructors on `Ring` guarantee `0 <= value < K`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[repr(transparent)]
pub struct RingKey(pub u64);

impl fmt::Debug for RingKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

impl fmt::Display for RingKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RingError {
    /// `bits` outside the supported 1..=63 range.
    BadBits(u32),
    /// Finger index outside `1..=bits`.
    FingerIndex(u32),
    /// Key value not reduced modulo `K`.
    KeyOutOfRange(u64),
}

impl fmt::Display for RingError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RingError::BadBits(b) => write!(f, "ring bits {b} not in 1..=63"),
            RingError::FingerIndex(i) => write!(f, "finger index {i} out of range"),
            RingError::KeyOutOfRange(v) => write!(f, "key {v} not below ring size"),
        }
    }
}

impl core::error::Error for RingError {}

/// Which endpoints of a [`KeyInterval`] are included.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Openness {
    OpenOpen,
    OpenClosed,
    ClosedOpen,
}

/// A clockwise arc of the ring from `from` to `to`. `from > to` is the
/// ordinary wrap-around case; membership is defined via clockwise distances
/// so it needs no special handling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyInterval {
    pub from: RingKey,
    pub to: RingKey,
    pub openness: Openness,
}

impl KeyInterval {
    pub fn open_open(from: RingKey, to: RingKey) -> Self {
        KeyInterval { from, to, openness: Openness::OpenOpen }
    }
    pub fn open_closed(from: RingKey, to: RingKey) -> Self {
        KeyInterval { from, to, openness: Openness::OpenClosed }
    }
    pub fn closed_open(from: RingKey, to: RingKey) -> Self {
        KeyInterval { from, to, openness: Openness::ClosedOpen }
    }
}

/// The identifier space: a ring of `K = 2^bits` keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ring {
    bits: u32,
}

impl Ring {
    pub fn new(bits: u32) -> Result<Self, RingError> {
        if bits == 0 || bits > 63 {
            return Err(RingError::BadBits(bits));
        }
        Ok(Ring { bits })
    }

    /// Number of keys `K`.
    #[inline]
    pub fn size(&self) -> u64 {
        1u64 << self.bits
    }

    /// `bits = log2 K`, also the number of fingers per node.
    #[inline]
    pub fn bits(&self) -> u32 {
        self.bits
    }

    #[inline]
    fn mask(&self) -> u64 {
        self.size() - 1
    }

    /// Wraps an arbitrary integer onto the ring.
    #[inline]
    pub fn key(&self, value: u64) -> RingKey {
        RingKey(value & self.mask())
    }

    /// Checked constructor for externally supplied values.
    pub fn try_key(&self, value: u64) -> Result<RingKey, RingError> {
        if value > self.mask() {
            return Err(RingError::KeyOutOfRange(value));
        }
        Ok(RingKey(value))
    }

    /// `(a + d) mod K`.
    #[inline]
    pub fn add(&self, a: RingKey, d: u64) -> RingKey {
        RingKey(a.0.wrapping_add(d) & self.mask())
    }

    /// Number of clockwise steps from `a` to `b`, in `[0, K)`.
    #[inline]
    pub fn distance(&self, a: RingKey, b: RingKey) -> u64 {
        b.0.wrapping_sub(a.0) & self.mask()
    }

    /// Start of the `i`-th finger of node `n`: `n + 2^(i-1)`, for `1 <= i <= bits`.
    pub fn finger_start(&self, n: RingKey, i: u32) -> Result<RingKey, RingError> {
        if i == 0 || i > self.bits {
            return Err(RingError::FingerIndex(i));
        }
        Ok(self.add(n, 1u64 << (i - 1)))
    }

    /// Wrap-aware interval membership.
    #[inline]
    pub fn in_interval(&self, x: RingKey, iv: KeyInterval) -> bool {
        let dx = self.distance(iv.from, x);
        let span = self.distance(iv.from, iv.to);
        match iv.openness {
            Openness::OpenOpen => dx > 0 && dx < span,
            Openness::OpenClosed => dx > 0 && dx <= span,
            Openness::ClosedOpen => dx < span,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ring(bits: u32) -> Ring {
        Ring::new(bits).unwrap()
    }

    #[test]
    fn add_identity_and_wrap() {
        let r = ring(4); // K = 16
        assert_eq!(r.add(RingKey(0), 0), RingKey(0));
        assert_eq!(r.add(RingKey(15), 1), RingKey(0));
        assert_eq!(r.add(RingKey(5), 3), RingKey(8));
    }

    #[test]
    fn distance_examples() {
        let r = ring(3); // K = 8
        assert_eq!(r.distance(RingKey(4), RingKey(4)), 0);
        assert_eq!(r.distance(RingKey(7), RingKey(0)), 1);
        assert_eq!(r.distance(RingKey(3), RingKey(1)), 6);
    }

    #[test]
    fn finger_start_examples() {
        let r = ring(6); // K = 64, M = 6
        assert_eq!(r.finger_start(RingKey(0), 1).unwrap(), RingKey(1));
        assert_eq!(r.finger_start(RingKey(0), 6).unwrap(), RingKey(32));
        assert_eq!(r.finger_start(RingKey(63), 1).unwrap(), RingKey(0));
        assert!(r.finger_start(RingKey(0), 0).is_err());
        assert!(r.finger_start(RingKey(0), 7).is_err());
    }

    #[test]
    fn finger_starts_distinct() {
        let r = ring(8);
        for n in [0u64, 17, 200, 255] {
            let n = RingKey(n);
            let mut starts: Vec<RingKey> =
                (1..=8).map(|i| r.finger_start(n, i).unwrap()).collect();
            starts.sort();
            starts.dedup();
            assert_eq!(starts.len(), 8);
        }
    }

    #[test]
    fn interval_examples() {
        let r = ring(4); // K = 16
        let iv = KeyInterval::open_closed(RingKey(3), RingKey(7));
        assert!(r.in_interval(RingKey(5), iv));
        assert!(!r.in_interval(RingKey(3), iv));
        assert!(r.in_interval(RingKey(7), iv));
        // wrap interval (K-2, 2)
        let wrap = KeyInterval::open_open(RingKey(14), RingKey(2));
        assert!(r.in_interval(RingKey(0), wrap));
        assert!(r.in_interval(RingKey(15), wrap));
        assert!(!r.in_interval(RingKey(2), wrap));
        assert!(!r.in_interval(RingKey(5), wrap));
    }

    /// Brute-force membership: walk clockwise from `from` to `to` and collect
    /// the visited keys according to the openness.
    fn brute_member(r: &Ring, x: RingKey, iv: KeyInterval) -> bool {
        let span = r.distance(iv.from, iv.to);
        let (lo, hi) = match iv.openness {
            Openness::OpenOpen => (1, span.saturating_sub(1)),
            Openness::OpenClosed => (1, span),
            Openness::ClosedOpen => (0, span.saturating_sub(1)),
        };
        if span == 0 {
            return false;
        }
        let mut d = lo;
        while d <= hi {
            if r.add(iv.from, d) == x {
                return true;
            }
            d += 1;
        }
        false
    }

    #[test]
    fn interval_matches_brute_force_exhaustively() {
        // Exhaustive over a small ring; covers every wrap case and openness.
        let r = ring(5); // K = 32
        let all: Vec<RingKey> = (0..32).map(RingKey).collect();
        for &from in &all {
            for &to in &all {
                for openness in [Openness::OpenOpen, Openness::OpenClosed, Openness::ClosedOpen] {
                    let iv = KeyInterval { from, to, openness };
                    for &x in &all {
                        assert_eq!(
                            r.in_interval(x, iv),
                            brute_member(&r, x, iv),
                            "x={x:?} iv={iv:?}"
                        );
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn distances_sum_to_zero_or_k(bits in 1u32..16, a: u64, b: u64) {
            let r = ring(bits);
            let (a, b) = (r.key(a), r.key(b));
            let s = r.distance(a, b) + r.distance(b, a);
            prop_assert!(s == 0 || s == r.size());
        }

        #[test]
        fn add_then_distance_roundtrip(bits in 1u32..16, a: u64, d: u64) {
            let r = ring(bits);
            let a = r.key(a);
            let d = d & (r.size() - 1);
            prop_assert_eq!(r.distance(a, r.add(a, d)), d);
        }
    }
}
