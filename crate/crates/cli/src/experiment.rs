//! Replicated parameter sweeps: run the simulator over an `(r, alpha)` grid,
//! time-average each replicate, pool across replicates and pair every metric
//! with its analytical prediction.

use chord_churn_core::analytics::{ChurnParams, TheoryPoint};
use chord_churn_core::sim::{run, RunOutput, SimConfig, TransitionStats};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::stats::{mean, median, stderr_of_mean};

/// Floor for relative-error denominators.
pub const REL_ERROR_EPS: f64 = 1e-12;

/// Per-metric acceptance tolerances on the relative error.
pub const TOL_W1: f64 = 0.15;
pub const TOL_D1: f64 = 0.20;
pub const TOL_INCONSISTENCY: f64 = 0.20;
pub const TOL_DEAD_FINGER: f64 = 0.20;
pub const TOL_MEAN_COST: f64 = 0.10;
/// Dead-finger rows are held to tolerance only from this finger index up...
pub const DEAD_FINGER_MIN_K: u32 = 8;
/// ...and only when the predicted fraction is above this floor.
pub const DEAD_FINGER_MIN_THEORY: f64 = 0.002;

/// A sweep: the grid, the per-run schedule and the replication plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub stab_ratios: Vec<f64>,
    pub alphas: Vec<f64>,
    pub n0: u32,
    pub bits: u32,
    pub succ_len: usize,
    pub replicates: u32,
    pub base_seed: u64,
    pub burnin_events: u64,
    pub measure_events: u64,
    pub probe_lookups_per_sample: u32,
}

impl Default for SweepSpec {
    fn default() -> Self {
        let n0 = 1000u32;
        SweepSpec {
            stab_ratios: vec![500.0],
            alphas: vec![0.5],
            n0,
            bits: 20,
            succ_len: 6,
            replicates: 10,
            base_seed: 42,
            burnin_events: 300 * n0 as u64,
            measure_events: 600 * n0 as u64,
            probe_lookups_per_sample: 50,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), String> {
        if self.stab_ratios.is_empty() || self.alphas.is_empty() {
            return Err("parameter grids must be non-empty".into());
        }
        if self.replicates == 0 {
            return Err("need at least one replicate".into());
        }
        self.sim_config(self.stab_ratios[0], self.alphas[0], 0)
            .validate()
            .map_err(|e| e.to_string())
    }

    pub fn sim_config(&self, stab_ratio: f64, alpha: f64, replicate: u32) -> SimConfig {
        SimConfig {
            n0: self.n0,
            bits: self.bits,
            succ_len: self.succ_len,
            stab_ratio,
            alpha,
            lambda_f: 1.0,
            seed: self.base_seed + replicate as u64,
            burnin_events: self.burnin_events,
            measure_events: self.measure_events,
            probe_lookups_per_sample: self.probe_lookups_per_sample,
        }
    }

    pub fn churn_params(&self, stab_ratio: f64, alpha: f64) -> ChurnParams {
        ChurnParams::new(self.n0 as f64, self.bits, alpha, stab_ratio, self.succ_len)
            .expect("validated spec")
    }
}

/// Time-averaged metrics of one replicate (equal weight per sample).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub replicate: u32,
    pub wrong_s1: f64,
    pub dead_s1: f64,
    pub inconsistency: f64,
    pub probe_cost: f64,
    pub dead_finger: Vec<f64>,
    pub probes_failed: u64,
    pub samples: usize,
    pub final_n: usize,
    pub final_intervals: Vec<u64>,
    #[serde(skip)]
    pub transitions: Option<TransitionStats>,
}

pub fn summarize_run(replicate: u32, out: &RunOutput) -> RunStats {
    let n = out.samples.len().max(1) as f64;
    let m = out.samples.first().map_or(0, |s| s.dead_finger.len());
    let mut dead_finger = vec![0.0; m];
    let mut wrong = 0.0;
    let mut dead = 0.0;
    let mut inc = 0.0;
    let mut cost = 0.0;
    let mut failed = 0u64;
    for s in &out.samples {
        wrong += s.wrong_s1;
        dead += s.dead_s1;
        inc += s.probe_inconsistency;
        cost += s.probe_cost_mean;
        failed += s.probes_failed as u64;
        for (k, f) in s.dead_finger.iter().enumerate() {
            dead_finger[k] += f;
        }
    }
    for f in &mut dead_finger {
        *f /= n;
    }
    RunStats {
        replicate,
        wrong_s1: wrong / n,
        dead_s1: dead / n,
        inconsistency: inc / n,
        probe_cost: cost / n,
        dead_finger,
        probes_failed: failed,
        samples: out.samples.len(),
        final_n: out.final_n,
        final_intervals: out.final_intervals.clone(),
        transitions: Some(out.transitions.clone()),
    }
}

/// One grid point: surviving replicates plus any abort diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointOutcome {
    pub stab_ratio: f64,
    pub alpha: f64,
    pub runs: Vec<RunStats>,
    pub failed_replicates: Vec<(u32, String)>,
}

impl PointOutcome {
    pub fn degraded(&self) -> bool {
        !self.failed_replicates.is_empty()
    }

    fn pooled(&self, f: impl Fn(&RunStats) -> f64) -> (f64, f64) {
        let xs: Vec<f64> = self.runs.iter().map(f).collect();
        (mean(&xs), stderr_of_mean(&xs))
    }
}

/// One theory-vs-simulation comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub r: f64,
    pub alpha: f64,
    pub n0: u32,
    pub bits: u32,
    pub metric: String,
    pub k: Option<u32>,
    pub theory: f64,
    pub sim_mean: f64,
    pub sim_stderr: f64,
    pub rel_error: f64,
}

impl ComparisonRow {
    fn new(
        spec: &SweepSpec,
        r: f64,
        alpha: f64,
        metric: &str,
        k: Option<u32>,
        theory: f64,
        (sim_mean, sim_stderr): (f64, f64),
    ) -> Self {
        ComparisonRow {
            r,
            alpha,
            n0: spec.n0,
            bits: spec.bits,
            metric: metric.into(),
            k,
            theory,
            sim_mean,
            sim_stderr,
            rel_error: (sim_mean - theory).abs() / theory.max(REL_ERROR_EPS),
        }
    }

    /// Tolerance this row is held to, when it is held to one at all.
    pub fn tolerance(&self) -> Option<f64> {
        match self.metric.as_str() {
            "w1" => Some(TOL_W1),
            "d1" => Some(TOL_D1),
            "I" => Some(TOL_INCONSISTENCY),
            "L" => Some(TOL_MEAN_COST),
            "f_k" => {
                let k = self.k.unwrap_or(0);
                (k >= DEAD_FINGER_MIN_K && self.theory > DEAD_FINGER_MIN_THEORY)
                    .then_some(TOL_DEAD_FINGER)
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub spec: SweepSpec,
    pub rows: Vec<ComparisonRow>,
    pub points: Vec<PointOutcome>,
}

impl SweepOutcome {
    pub fn point(&self, stab_ratio: f64, alpha: f64) -> Option<&PointOutcome> {
        self.points
            .iter()
            .find(|p| p.stab_ratio == stab_ratio && p.alpha == alpha)
    }

    pub fn row(&self, metric: &str, r: f64, alpha: f64, k: Option<u32>) -> Option<&ComparisonRow> {
        self.rows.iter().find(|row| {
            row.metric == metric && row.r == r && row.alpha == alpha && row.k == k
        })
    }
}

/// Runs the whole grid. Replicates execute in parallel; aggregation is keyed
/// and sorted, so the outcome does not depend on completion order. Aborted
/// replicates degrade their grid point instead of failing the sweep.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepOutcome, String> {
    spec.validate()?;
    let grid: Vec<(usize, f64, f64)> = spec
        .stab_ratios
        .iter()
        .enumerate()
        .flat_map(|(ri, &r)| {
            spec.alphas
                .iter()
                .enumerate()
                .map(move |(ai, &a)| (ri * 1000 + ai, r, a))
        })
        .collect();

    let tasks: Vec<(usize, u32, f64, f64)> = grid
        .iter()
        .flat_map(|&(key, r, a)| (0..spec.replicates).map(move |rep| (key, rep, r, a)))
        .collect();

    let mut results: Vec<(usize, u32, Result<RunStats, String>)> = tasks
        .par_iter()
        .map(|&(key, rep, r, a)| {
            let cfg = spec.sim_config(r, a, rep);
            let res = run(&cfg)
                .map(|out| summarize_run(rep, &out))
                .map_err(|e| e.to_string());
            (key, rep, res)
        })
        .collect();
    results.sort_by_key(|(key, rep, _)| (*key, *rep));

    let mut points = Vec::new();
    let mut rows = Vec::new();
    for &(key, r, a) in &grid {
        let mut point = PointOutcome {
            stab_ratio: r,
            alpha: a,
            runs: Vec::new(),
            failed_replicates: Vec::new(),
        };
        for (_, rep, res) in results.iter().filter(|(k2, _, _)| *k2 == key) {
            match res {
                Ok(stats) => point.runs.push(stats.clone()),
                Err(e) => point.failed_replicates.push((*rep, e.clone())),
            }
        }
        if !point.runs.is_empty() {
            let params = spec.churn_params(r, a);
            let theory = TheoryPoint::compute(&params).map_err(|e| e.to_string())?;
            rows.push(ComparisonRow::new(spec, r, a, "w1", None, theory.wrong_s1,
                point.pooled(|s| s.wrong_s1)));
            rows.push(ComparisonRow::new(spec, r, a, "d1", None, theory.dead_s1,
                point.pooled(|s| s.dead_s1)));
            rows.push(ComparisonRow::new(spec, r, a, "I", None, theory.inconsistency,
                point.pooled(|s| s.inconsistency)));
            for k in 1..=spec.bits {
                let idx = k as usize - 1;
                rows.push(ComparisonRow::new(spec, r, a, "f_k", Some(k),
                    theory.dead_finger[idx],
                    point.pooled(|s| s.dead_finger[idx])));
            }
            rows.push(ComparisonRow::new(spec, r, a, "L", None, theory.mean_cost,
                point.pooled(|s| s.probe_cost)));
        }
        points.push(point);
    }
    Ok(SweepOutcome { spec: spec.clone(), rows, points })
}

/// Worst/median relative error per metric plus the rows that exceed their
/// tolerance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricDigest {
    pub metric: String,
    pub rows: usize,
    pub worst_rel_error: f64,
    pub median_rel_error: f64,
    /// Indices into the row list of rows over their tolerance.
    pub flagged: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub metrics: Vec<MetricDigest>,
    pub degraded_points: Vec<(f64, f64, usize)>,
    pub flagged_total: usize,
}

pub fn summarize(rows: &[ComparisonRow], points: &[PointOutcome]) -> Summary {
    let mut metrics = Vec::new();
    for name in ["w1", "d1", "I", "f_k", "L"] {
        let idxs: Vec<usize> =
            (0..rows.len()).filter(|&i| rows[i].metric == name).collect();
        if idxs.is_empty() {
            continue;
        }
        let errs: Vec<f64> = idxs.iter().map(|&i| rows[i].rel_error).collect();
        let flagged: Vec<usize> = idxs
            .iter()
            .copied()
            .filter(|&i| rows[i].tolerance().is_some_and(|t| rows[i].rel_error > t))
            .collect();
        metrics.push(MetricDigest {
            metric: name.into(),
            rows: idxs.len(),
            worst_rel_error: errs.iter().copied().fold(0.0, f64::max),
            median_rel_error: median(&errs),
            flagged,
        });
    }
    let degraded_points = points
        .iter()
        .filter(|p| p.degraded())
        .map(|p| (p.stab_ratio, p.alpha, p.failed_replicates.len()))
        .collect();
    let flagged_total = metrics.iter().map(|m| m.flagged.len()).sum();
    Summary { metrics, degraded_points, flagged_total }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_spec() -> SweepSpec {
        SweepSpec {
            stab_ratios: vec![200.0],
            alphas: vec![0.5],
            n0: 80,
            bits: 12,
            succ_len: 4,
            replicates: 2,
            base_seed: 7,
            burnin_events: 10_000,
            measure_events: 20_000,
            probe_lookups_per_sample: 10,
        }
    }

    #[test]
    fn sweep_is_deterministic() {
        let spec = tiny_spec();
        let a = run_sweep(&spec).unwrap();
        let b = run_sweep(&spec).unwrap();
        assert_eq!(a.rows, b.rows);
        assert!(a.points.iter().all(|p| !p.degraded()));
    }

    #[test]
    fn rows_replicate_theory_exactly() {
        let spec = tiny_spec();
        let out = run_sweep(&spec).unwrap();
        let params = spec.churn_params(200.0, 0.5);
        let theory = TheoryPoint::compute(&params).unwrap();
        let w1 = out.row("w1", 200.0, 0.5, None).unwrap();
        assert_eq!(w1.theory, theory.wrong_s1);
        let f3 = out.row("f_k", 200.0, 0.5, Some(3)).unwrap();
        assert_eq!(f3.theory, theory.dead_finger[2]);
        let l = out.row("L", 200.0, 0.5, None).unwrap();
        assert_eq!(l.theory, theory.mean_cost);
        // rel_error definition
        assert!((w1.rel_error
            - (w1.sim_mean - w1.theory).abs() / w1.theory.max(REL_ERROR_EPS))
        .abs()
            < 1e-15);
    }

    #[test]
    fn summary_flags_only_out_of_tolerance_rows() {
        let spec = tiny_spec();
        let mut rows = vec![ComparisonRow {
            r: 200.0,
            alpha: 0.5,
            n0: 80,
            bits: 12,
            metric: "w1".into(),
            k: None,
            theory: 0.01,
            sim_mean: 0.0101,
            sim_stderr: 0.0,
            rel_error: 0.01,
        }];
        let s = summarize(&rows, &[]);
        assert_eq!(s.flagged_total, 0);
        rows[0].sim_mean = 0.02;
        rows[0].rel_error = 1.0;
        let s = summarize(&rows, &[]);
        assert_eq!(s.flagged_total, 1);
        let _ = spec;
    }

    #[test]
    fn stderr_shrinks_with_replicates() {
        // SE over 16 replicates should be about half the average SE over the
        // four disjoint quadruples; the band accounts for the noisy variance
        // estimates (df = 3 per quadruple, averaged over four of them).
        let spec = SweepSpec { replicates: 16, measure_events: 12_000, ..tiny_spec() };
        let out = run_sweep(&spec).unwrap();
        let point = &out.points[0];
        assert_eq!(point.runs.len(), 16);
        let w: Vec<f64> = point.runs.iter().map(|s| s.wrong_s1).collect();
        let se16 = stderr_of_mean(&w);
        let se4s: Vec<f64> = (0..4).map(|q| stderr_of_mean(&w[q * 4..q * 4 + 4])).collect();
        let ratio = mean(&se4s) / se16;
        assert!(ratio > 0.8 && ratio < 5.0, "ratio {ratio}");
    }
}
