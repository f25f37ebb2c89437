//! The event loop: aggregate-rate exponential clock, event dispatch,
//! extinction guards and per-transition instrumentation.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::ring::{Ring, RingKey};
use crate::rng::Rng;
use crate::sim::config::SimConfig;
use crate::sim::metrics::{sample_metrics, MetricsSample};
use crate::sim::network::Network;
use crate::sim::protocol::{join, stabilize_finger, stabilize_successor, FingerStab, JoinOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    Join,
    Fail,
    StabilizeSuccessor,
    StabilizeFinger,
    /// Metrics snapshot; emitted by the driver at the sampling cadence, not
    /// drawn from the rate process.
    Sample,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
}

/// Draws the next churn/stabilization event. The total rate is
/// `N * lambda_f * (2 + r)`: joins and failures at `lambda_f` per node each,
/// stabilizations at `r * lambda_f` per node split `alpha : 1 - alpha`
/// between successor and finger kinds.
pub fn next_event(rng: &mut Rng, cfg: &SimConfig, n_now: usize, now: f64) -> Event {
    let total_weight = 2.0 + cfg.stab_ratio;
    let total_rate = n_now as f64 * cfg.lambda_f * total_weight;
    let time = now + rng.exp(total_rate);
    let u = rng.f64() * total_weight;
    let kind = if u < 1.0 {
        EventKind::Join
    } else if u < 2.0 {
        EventKind::Fail
    } else if u < 2.0 + cfg.alpha * cfg.stab_ratio {
        EventKind::StabilizeSuccessor
    } else {
        EventKind::StabilizeFinger
    };
    Event { time, kind }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunError {
    Config(&'static str),
    /// Node count left the `[S+2, 2*N0]` corridor.
    Extinct { n_now: usize, events: u64 },
    /// A node's entire successor list was dead.
    Isolated { node: RingKey, events: u64 },
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(msg) => write!(f, "invalid config: {msg}"),
            RunError::Extinct { n_now, events } => {
                write!(f, "population guard tripped at {n_now} nodes after {events} events")
            }
            RunError::Isolated { node, events } => {
                write!(f, "node {node} lost its whole successor list after {events} events")
            }
        }
    }
}

impl core::error::Error for RunError {}

/// Transition classes of the wrong-successor count, keyed by the state of the
/// affected pointers *before* the event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransitionClass {
    /// Join where the joiner's predecessor had a correct s1 (expected +1).
    JoinPredCorrect,
    /// Join where it was already wrong (expected 0).
    JoinPredWrong,
    /// Failure with predecessor and victim both correct (expected +1).
    FailBothCorrect,
    /// Failure with both wrong (expected -1).
    FailBothWrong,
    /// Failure, predecessor wrong / victim correct (expected 0).
    FailPredWrong,
    /// Failure, predecessor correct / victim wrong (expected 0).
    FailVictimWrong,
    /// Successor stabilization by a node with a wrong s1 (expected -1).
    StabWrong,
    /// Successor stabilization by a correct node (expected 0).
    StabCorrect,
}

pub const TRANSITION_CLASSES: [TransitionClass; 8] = [
    TransitionClass::JoinPredCorrect,
    TransitionClass::JoinPredWrong,
    TransitionClass::FailBothCorrect,
    TransitionClass::FailBothWrong,
    TransitionClass::FailPredWrong,
    TransitionClass::FailVictimWrong,
    TransitionClass::StabWrong,
    TransitionClass::StabCorrect,
];

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClassStats {
    pub events: u64,
    /// Observed change of the wrong-s1 count, histogrammed.
    pub delta_hist: BTreeMap<i64, u64>,
}

impl ClassStats {
    fn record(&mut self, delta: i64) {
        self.events += 1;
        *self.delta_hist.entry(delta).or_insert(0) += 1;
    }

    pub fn count_with_delta(&self, delta: i64) -> u64 {
        self.delta_hist.get(&delta).copied().unwrap_or(0)
    }
}

/// Instrumentation accumulated over a run: per-class wrong-s1 accounting plus
/// finger-stabilization eviction counts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TransitionStats {
    classes: [ClassStats; 8],
    pub joins_routing_failed: u64,
    /// Finger stabilizations by picked index, `k-1`.
    pub finger_picks: Vec<u64>,
    /// Of those, how many replaced a dead entry.
    pub finger_evictions: Vec<u64>,
    pub finger_lookup_failures: u64,
}

impl TransitionStats {
    fn new(m: usize) -> Self {
        TransitionStats {
            finger_picks: vec![0; m],
            finger_evictions: vec![0; m],
            ..Default::default()
        }
    }

    fn idx(class: TransitionClass) -> usize {
        TRANSITION_CLASSES.iter().position(|&c| c == class).expect("class listed")
    }

    pub fn class(&self, class: TransitionClass) -> &ClassStats {
        &self.classes[Self::idx(class)]
    }

    fn record(&mut self, class: TransitionClass, delta: i64) {
        self.classes[Self::idx(class)].record(delta);
    }

    pub fn joins(&self) -> u64 {
        self.class(TransitionClass::JoinPredCorrect).events
            + self.class(TransitionClass::JoinPredWrong).events
    }

    pub fn failures(&self) -> u64 {
        self.class(TransitionClass::FailBothCorrect).events
            + self.class(TransitionClass::FailBothWrong).events
            + self.class(TransitionClass::FailPredWrong).events
            + self.class(TransitionClass::FailVictimWrong).events
    }

    pub fn successor_stabs(&self) -> u64 {
        self.class(TransitionClass::StabWrong).events
            + self.class(TransitionClass::StabCorrect).events
    }
}

/// Everything a finished run reports.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub samples: Vec<MetricsSample>,
    pub transitions: TransitionStats,
    /// Inter-node distances at the end of the measurement phase.
    pub final_intervals: Vec<u64>,
    pub final_n: usize,
    pub events: u64,
    pub sim_time: f64,
}

/// One live run: network, clock and the two random streams (churn and
/// probes), advanced event by event.
pub struct Simulation {
    cfg: SimConfig,
    ring: Ring,
    pub net: Network,
    churn_rng: Rng,
    probe_rng: Rng,
    pub clock: f64,
    pub events_done: u64,
    pub stats: TransitionStats,
}

impl Simulation {
    pub fn new(cfg: SimConfig) -> Result<Self, RunError> {
        cfg.validate().map_err(|e| RunError::Config(e.0))?;
        let ring = Ring::new(cfg.bits).map_err(|_| RunError::Config("bits out of range"))?;
        let mut churn_rng = Rng::stream(cfg.seed, 0);
        let probe_rng = Rng::stream(cfg.seed, 1);
        let net = bootstrap(&cfg, ring, &mut churn_rng);
        Ok(Simulation {
            cfg,
            ring,
            net,
            churn_rng,
            probe_rng,
            clock: 0.0,
            events_done: 0,
            stats: TransitionStats::new(cfg.bits as usize),
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    fn budget(&self) -> u32 {
        4 * self.cfg.bits
    }

    fn draw_unused_key(&mut self) -> RingKey {
        loop {
            let k = RingKey(self.churn_rng.range(self.ring.size()));
            if !self.net.is_alive(k) {
                return k;
            }
        }
    }

    fn guard_population(&self) -> Result<(), RunError> {
        let n = self.net.len();
        if n < self.cfg.succ_len + 2 || n > 2 * self.cfg.n0 as usize {
            return Err(RunError::Extinct { n_now: n, events: self.events_done });
        }
        Ok(())
    }

    /// Processes one churn/stabilization event.
    pub fn step(&mut self) -> Result<EventKind, RunError> {
        let n_now = self.net.len();
        let ev = next_event(&mut self.churn_rng, &self.cfg, n_now, self.clock);
        self.clock = ev.time;
        match ev.kind {
            EventKind::Join => {
                let new_key = self.draw_unused_key();
                let contact = self.net.nth(self.churn_rng.range(n_now as u64) as usize);
                let pred = self.net.predecessor_of(new_key);
                let pred_was_wrong = self.net.has_wrong_s1(pred);
                let budget = self.budget();
                match join(&mut self.net, new_key, contact, budget) {
                    JoinOutcome::Joined => {
                        let delta = self.net.has_wrong_s1(pred) as i64 - pred_was_wrong as i64
                            + self.net.has_wrong_s1(new_key) as i64;
                        let class = if pred_was_wrong {
                            TransitionClass::JoinPredWrong
                        } else {
                            TransitionClass::JoinPredCorrect
                        };
                        self.stats.record(class, delta);
                    }
                    JoinOutcome::RoutingFailed => self.stats.joins_routing_failed += 1,
                    JoinOutcome::KeyCollision => unreachable!("key drawn unused"),
                }
                self.events_done += 1;
                self.guard_population()?;
            }
            EventKind::Fail => {
                let idx = self.churn_rng.range(n_now as u64) as usize;
                let victim = self.net.nth(idx);
                let pred = self.net.predecessor_of(victim);
                let pred_was_wrong = self.net.has_wrong_s1(pred);
                let victim_was_wrong = self.net.has_wrong_s1(victim);
                self.net.remove_at(idx);
                let delta = self.net.has_wrong_s1(pred) as i64
                    - pred_was_wrong as i64
                    - victim_was_wrong as i64;
                let class = match (pred_was_wrong, victim_was_wrong) {
                    (false, false) => TransitionClass::FailBothCorrect,
                    (true, true) => TransitionClass::FailBothWrong,
                    (true, false) => TransitionClass::FailPredWrong,
                    (false, true) => TransitionClass::FailVictimWrong,
                };
                self.stats.record(class, delta);
                self.events_done += 1;
                self.guard_population()?;
            }
            EventKind::StabilizeSuccessor => {
                let n = self.net.nth(self.churn_rng.range(n_now as u64) as usize);
                let was_wrong = self.net.has_wrong_s1(n);
                stabilize_successor(&mut self.net, n)
                    .map_err(|iso| RunError::Isolated { node: iso.node, events: self.events_done })?;
                let delta = self.net.has_wrong_s1(n) as i64 - was_wrong as i64;
                let class =
                    if was_wrong { TransitionClass::StabWrong } else { TransitionClass::StabCorrect };
                self.stats.record(class, delta);
                self.events_done += 1;
            }
            EventKind::StabilizeFinger => {
                let n = self.net.nth(self.churn_rng.range(n_now as u64) as usize);
                let i = self.churn_rng.range(self.cfg.bits as u64) as u32 + 1;
                self.stats.finger_picks[i as usize - 1] += 1;
                let budget = self.budget();
                match stabilize_finger(&mut self.net, n, i, budget) {
                    FingerStab::Updated { old, .. } => {
                        if !self.net.is_alive(old) {
                            self.stats.finger_evictions[i as usize - 1] += 1;
                        }
                    }
                    FingerStab::LookupFailed => self.stats.finger_lookup_failures += 1,
                }
                self.events_done += 1;
            }
            EventKind::Sample => unreachable!("sample events are driver-generated"),
        }
        Ok(ev.kind)
    }

    /// Clears accumulated instrumentation (used at the burn-in boundary so
    /// transition statistics describe the measurement phase only).
    pub fn reset_stats(&mut self) {
        self.stats = TransitionStats::new(self.cfg.bits as usize);
    }

    /// Takes a metrics snapshot using the probe stream.
    pub fn sample(&mut self) -> MetricsSample {
        self.net.check_coherent();
        sample_metrics(
            &self.net,
            self.cfg.probe_lookups_per_sample,
            &mut self.probe_rng,
            self.clock,
        )
    }
}

fn bootstrap(cfg: &SimConfig, ring: Ring, rng: &mut Rng) -> Network {
    let mut picked = alloc::collections::BTreeSet::new();
    while picked.len() < cfg.n0 as usize {
        picked.insert(RingKey(rng.range(ring.size())));
    }
    let keys: Vec<RingKey> = picked.into_iter().collect();
    Network::perfect(ring, cfg.succ_len, &keys)
}

/// Runs a full configuration: bootstrap, burn-in, then the measurement phase
/// emitting one sample every `N_now` events. `on_sample` sees each sample as
/// it is taken.
pub fn run_with(
    cfg: &SimConfig,
    mut on_sample: impl FnMut(&MetricsSample),
) -> Result<RunOutput, RunError> {
    let mut sim = Simulation::new(*cfg)?;
    for _ in 0..cfg.burnin_events {
        sim.step()?;
    }
    sim.reset_stats();
    let mut samples = Vec::new();
    let mut until_sample = sim.net.len() as u64;
    for _ in 0..cfg.measure_events {
        sim.step()?;
        until_sample -= 1;
        if until_sample == 0 {
            let s = sim.sample();
            on_sample(&s);
            samples.push(s);
            until_sample = sim.net.len() as u64;
        }
    }
    Ok(RunOutput {
        final_intervals: sim.net.intervals(),
        final_n: sim.net.len(),
        events: sim.events_done,
        sim_time: sim.clock,
        samples,
        transitions: sim.stats,
    })
}

/// [`run_with`] without a sample observer.
pub fn run(cfg: &SimConfig) -> Result<RunOutput, RunError> {
    run_with(cfg, |_| {})
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_cfg() -> SimConfig {
        SimConfig {
            n0: 60,
            bits: 12,
            succ_len: 4,
            stab_ratio: 100.0,
            alpha: 0.5,
            lambda_f: 1.0,
            seed: 77,
            burnin_events: 2_000,
            measure_events: 6_000,
            probe_lookups_per_sample: 10,
        }
    }

    #[test]
    fn bootstrap_is_perfect() {
        let cfg = tiny_cfg();
        let sim = Simulation::new(cfg).unwrap();
        assert_eq!(sim.net.len(), 60);
        for k in sim.net.sorted_keys() {
            assert!(!sim.net.has_wrong_s1(k));
        }
    }

    #[test]
    fn config_rejected_below_minimum() {
        let cfg = SimConfig { n0: 1, ..tiny_cfg() };
        assert!(matches!(Simulation::new(cfg), Err(RunError::Config(_))));
        let cfg = SimConfig { n0: 5000, bits: 12, ..tiny_cfg() };
        // n0 >= K
        assert!(matches!(Simulation::new(cfg), Err(RunError::Config(_))));
    }

    #[test]
    fn event_kind_rates_match_proportions() {
        let cfg = SimConfig { stab_ratio: 1000.0, alpha: 0.5, ..tiny_cfg() };
        let mut rng = Rng::seed_from_u64(5);
        let draws = 1_000_000u64;
        let mut counts = [0u64; 4];
        let mut t = 0.0;
        for _ in 0..draws {
            let ev = next_event(&mut rng, &cfg, 100, t);
            t = ev.time;
            let i = match ev.kind {
                EventKind::Join => 0,
                EventKind::Fail => 1,
                EventKind::StabilizeSuccessor => 2,
                EventKind::StabilizeFinger => 3,
                EventKind::Sample => unreachable!(),
            };
            counts[i] += 1;
        }
        let total_weight = 2.0 + cfg.stab_ratio;
        let expected = [
            1.0 / total_weight,
            1.0 / total_weight,
            cfg.alpha * cfg.stab_ratio / total_weight,
            (1.0 - cfg.alpha) * cfg.stab_ratio / total_weight,
        ];
        for (i, &c) in counts.iter().enumerate() {
            let e = expected[i] * draws as f64;
            let sd = (draws as f64 * expected[i] * (1.0 - expected[i])).sqrt();
            assert!((c as f64 - e).abs() < 3.0 * sd, "kind {i}: {c} vs {e}");
        }
        // clock advances with the right mean increment: 1/(N lambda (2+r))
        let mean_dt = t / draws as f64;
        let want = 1.0 / (100.0 * total_weight);
        assert!((mean_dt / want - 1.0).abs() < 0.01, "{mean_dt} vs {want}");
    }

    #[test]
    fn degenerate_rates() {
        // r = 0: only joins and failures
        let cfg = SimConfig { stab_ratio: 0.0, ..tiny_cfg() };
        let mut rng = Rng::seed_from_u64(6);
        for _ in 0..10_000 {
            let ev = next_event(&mut rng, &cfg, 50, 0.0);
            assert!(matches!(ev.kind, EventKind::Join | EventKind::Fail));
        }
        // alpha = 1: no finger stabilizations
        let cfg = SimConfig { alpha: 1.0, ..tiny_cfg() };
        for _ in 0..10_000 {
            let ev = next_event(&mut rng, &cfg, 50, 0.0);
            assert!(ev.kind != EventKind::StabilizeFinger);
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let cfg = tiny_cfg();
        let a = run(&cfg).unwrap();
        let b = run(&cfg).unwrap();
        assert_eq!(a.samples, b.samples);
        assert_eq!(a.transitions, b.transitions);
        assert_eq!(a.final_intervals, b.final_intervals);
        // a different seed gives a different stream
        let c = run(&SimConfig { seed: 78, ..cfg }).unwrap();
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn population_guard_trips_without_joins() {
        // joins disabled indirectly: n0 tiny and lambda asymmetry is not
        // configurable, so force extinction with a tiny corridor instead
        let cfg = SimConfig { n0: 6, succ_len: 4, burnin_events: 100_000, ..tiny_cfg() };
        match run(&cfg) {
            Err(RunError::Extinct { n_now, .. }) => {
                assert!(!(6..=12).contains(&n_now));
            }
            other => panic!("expected extinction, got {other:?}"),
        }
    }

    #[test]
    fn burnin_removes_initial_transient() {
        // from the perfect bootstrap state, a short cold-start measurement
        // underestimates the steady-state wrongness; after a long burn-in the
        // same window sits on it
        let base = SimConfig {
            n0: 1000,
            bits: 14,
            succ_len: 6,
            stab_ratio: 150.0,
            alpha: 0.5,
            lambda_f: 1.0,
            seed: 21,
            burnin_events: 0,
            measure_events: 4_000,
            probe_lookups_per_sample: 0,
        };
        let theory = 2.0 / (3.0 + base.alpha * base.stab_ratio);
        let w1_avg = |out: &RunOutput| {
            out.samples.iter().map(|s| s.wrong_s1).sum::<f64>() / out.samples.len() as f64
        };
        let cold = w1_avg(&run(&base).unwrap());
        let warm = w1_avg(&run(&SimConfig { burnin_events: 60_000, ..base }).unwrap());
        assert!(
            (warm - theory).abs() < (cold - theory).abs(),
            "cold {cold} vs warm {warm} vs theory {theory}"
        );
        assert!(cold < theory, "cold start must undershoot");
    }

    #[test]
    fn samples_are_emitted_at_cadence() {
        let cfg = tiny_cfg();
        let out = run(&cfg).unwrap();
        // about one sample per N events
        let approx = cfg.measure_events / cfg.n0 as u64;
        assert!(out.samples.len() as u64 >= approx / 2);
        assert!(out.samples.len() as u64 <= approx * 2);
        for s in &out.samples {
            assert!(s.wrong_s1 >= s.dead_s1 - 1e-12);
            assert!(s.n_now >= 6);
        }
        assert_eq!(out.events, cfg.burnin_events + cfg.measure_events);
        assert_eq!(out.final_intervals.len(), out.final_n);
        let span: u64 = out.final_intervals.iter().sum();
        assert_eq!(span, 1u64 << cfg.bits);
    }
}
