//! The validation suite: Monte Carlo oracle agreement for every derived
//! probability formula, plus the analytical invariants. Used by the
//! `validate` subcommand and the acceptance tests.

use chord_churn_core::analytics::{self, ChurnParams};
use chord_churn_core::rng::Rng;

use crate::oracle;

#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    fn record(&mut self, name: impl Into<String>, pass: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), pass, detail: detail.into() });
    }
}

pub struct ValidateOptions {
    pub quick: bool,
    pub samples: u64,
    pub seed: u64,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        ValidateOptions { quick: false, samples: 100_000, seed: 0xC0FFEE }
    }
}

fn headline_params() -> ChurnParams {
    ChurnParams::new(1000.0, 20, 0.5, 500.0, 6).unwrap()
}

fn small_params() -> ChurnParams {
    ChurnParams::new(64.0, 12, 0.5, 500.0, 6).unwrap()
}

/// Runs the whole suite; every check is deterministic given the options.
pub fn run_suite(opts: &ValidateOptions) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut rng = Rng::stream(opts.seed, 99);

    interval_checks(&mut report);
    share_monotonicity(&mut report);
    share_vs_oracle(&mut report, opts, &mut rng);
    join_replication_vs_oracle(&mut report, opts, &mut rng);
    fallback_checks(&mut report, opts, &mut rng);
    finger_fraction_checks(&mut report);
    cost_table_checks(&mut report);
    static_cost_vs_oracle(&mut report, opts, &mut rng);
    successor_closed_forms(&mut report);
    report
}

fn interval_checks(report: &mut ValidationReport) {
    let p = headline_params();
    let rho = p.rho();
    let cut = 40_000u64;
    let mut sum = 0.0;
    let mut mean = 0.0;
    for x in 1..=cut {
        let q = analytics::interval_pdf(x, &p).unwrap();
        sum += q;
        mean += x as f64 * q;
    }
    let tail = rho.powf(cut as f64);
    let total = sum + tail;
    report.record(
        "interval-pdf-normalization",
        (total - 1.0).abs() < 1e-9,
        format!("partial sum + analytic tail = {total:.12}"),
    );
    let mean_tail = tail * (cut as f64 + 1.0 / (1.0 - rho));
    let k_over_n = p.key_space() / p.node_count;
    let rel = ((mean + mean_tail) / k_over_n - 1.0).abs();
    report.record(
        "interval-pdf-mean",
        rel < 1e-9,
        format!("mean/(K/N) - 1 = {rel:.3e}"),
    );
}

fn share_monotonicity(report: &mut ValidationReport) {
    let p = headline_params();
    let mut ok = true;
    let mut detail = String::new();
    for k in 1..=p.finger_count() {
        let p1 = analytics::share_prob(k, 1, &p).unwrap();
        let p2 = analytics::share_prob(k, 2, &p).unwrap();
        let p3 = analytics::share_prob(k, 3, &p).unwrap();
        if !(p1 >= p2 && p2 >= p3 && p3 >= 0.0) {
            ok = false;
            detail = format!("violated at k={k}: {p1} {p2} {p3}");
            break;
        }
    }
    report.record("share-order-monotonicity", ok, if ok { "p1 >= p2 >= p3 >= 0".into() } else { detail });
}

fn share_vs_oracle(report: &mut ValidationReport, opts: &ValidateOptions, rng: &mut Rng) {
    let mut cases: Vec<(ChurnParams, &str, Vec<u32>)> =
        vec![(small_params(), "n64-k12", vec![2, 5, 8])];
    if !opts.quick {
        cases.push((headline_params(), "n1000-k20", vec![8, 12, 16, 20]));
    }
    for (p, label, ks) in cases {
        for k in ks {
            for order in 1..=3u8 {
                let closed = analytics::share_prob(k, order, &p).unwrap();
                let est = oracle::share_prob_oracle(k, order, &p, opts.samples, rng);
                let pass = est.agrees_with(closed, 3.0);
                report.record(
                    format!("share-vs-mc[{label},k={k},order={order}]"),
                    pass,
                    format!("closed {closed:.6} vs mc {:.6} (se {:.2e})", est.value, est.stderr),
                );
            }
        }
    }
}

fn join_replication_vs_oracle(report: &mut ValidationReport, opts: &ValidateOptions, rng: &mut Rng) {
    // The printed formula carries window-size approximations of order 1/N
    // relative, so it is validated at the sparse headline scale where those
    // vanish against the Monte Carlo resolution.
    let p = headline_params();
    let ks: Vec<u32> = if opts.quick { vec![10, 12, 14] } else { vec![5, 8, 10, 11, 12, 13, 14, 16, 18, 20] };
    for k in ks {
        let closed = analytics::join_replication_prob(k, &p).unwrap();
        let est = oracle::join_replication_oracle(k, &p, opts.samples, rng);
        let pass = est.agrees_with(closed, 3.0);
        report.record(
            format!("join-replication-vs-mc[k={k}]"),
            pass,
            format!("closed {closed:.6} vs mc {:.6} (se {:.2e})", est.value, est.stderr),
        );
    }
}

fn fallback_checks(report: &mut ValidationReport, opts: &ValidateOptions, rng: &mut Rng) {
    let p = headline_params();
    // profile sums to one at steady-state death probabilities
    let dead: Vec<f64> =
        (1..=p.finger_count()).map(|k| analytics::dead_finger_fraction(k, &p).unwrap()).collect();
    let mut worst: f64 = 0.0;
    for k in 1..=p.finger_count() {
        let h = analytics::fallback_profile(k, &dead, &p).unwrap();
        worst = worst.max((h.iter().sum::<f64>() - 1.0).abs());
    }
    report.record(
        "fallback-sums-to-one",
        worst < 1e-9,
        format!("worst |sum - 1| = {worst:.3e}"),
    );

    let ks: Vec<u32> = if opts.quick { vec![8] } else { vec![4, 8, 12] };
    for k in ks {
        let h = analytics::fallback_profile(k, &dead, &p).unwrap();
        let ests = oracle::fallback_oracle(k, &dead, &p, opts.samples, rng);
        let mut pass = true;
        let mut worst_dev = 0.0f64;
        for (i, est) in ests.iter().enumerate() {
            if !est.agrees_with(h[i], 3.0) {
                pass = false;
            }
            worst_dev = worst_dev.max((est.value - h[i]).abs());
        }
        report.record(
            format!("fallback-vs-mc[k={k}]"),
            pass,
            format!("worst |mc - closed| = {worst_dev:.5}"),
        );
    }
}

fn finger_fraction_checks(report: &mut ValidationReport) {
    let mut worst_residual: f64 = 0.0;
    let mut monotone = true;
    let mut detail = String::new();
    for &r in &[200.0, 500.0, 1000.0, 2000.0] {
        for &alpha in &[0.25, 0.5, 0.75] {
            let p = ChurnParams::new(1000.0, 20, alpha, r, 6).unwrap();
            let mut last = 0.0;
            for k in 1..=20u32 {
                let f = analytics::dead_finger_fraction(k, &p).unwrap();
                let res = analytics::finger_balance_residual(k, f, &p).unwrap();
                worst_residual = worst_residual.max(res.abs());
                if k >= 5 {
                    if k > 5 && f < last - 1e-12 {
                        monotone = false;
                        detail = format!("f_k not monotone at r={r} alpha={alpha} k={k}");
                    }
                    last = f;
                }
            }
        }
    }
    report.record(
        "finger-balance-residual",
        worst_residual < 1e-9,
        format!("worst |residual| = {worst_residual:.3e}"),
    );
    report.record(
        "finger-fraction-monotone",
        monotone,
        if monotone { "non-decreasing over k = 5..M".into() } else { detail },
    );
}

fn cost_table_checks(report: &mut ValidationReport) {
    let p = ChurnParams::new(1000.0, 14, 0.5, 500.0, 6).unwrap();
    let table = analytics::lookup_cost_table(&p).unwrap();
    let min = table.iter().skip(1).copied().fold(f64::INFINITY, f64::min);
    report.record(
        "cost-table-at-least-one-hop",
        min >= 1.0,
        format!("min C_t = {min:.6}"),
    );
    let d1 = analytics::dead_s1_fraction(&p);
    let c1 = table[1];
    let trunc_bound = d1 * d1 / (1.0 - d1) + 1e-12;
    report.record(
        "adjacent-cost-approximation",
        (c1 - (1.0 + d1)).abs() <= trunc_bound,
        format!("C_1 = {c1:.8} vs 1 + d1 = {:.8}", 1.0 + d1),
    );
    let slow = ChurnParams::new(1000.0, 14, 0.5, 200.0, 6).unwrap();
    let fast = ChurnParams::new(1000.0, 14, 0.5, 1000.0, 6).unwrap();
    let l_slow = analytics::mean_lookup_cost(&slow).unwrap();
    let l_fast = analytics::mean_lookup_cost(&fast).unwrap();
    report.record(
        "mean-cost-decreases-with-stabilization",
        l_slow > l_fast && l_fast >= 1.0,
        format!("L(r=200) = {l_slow:.4} > L(r=1000) = {l_fast:.4}"),
    );
}

fn static_cost_vs_oracle(report: &mut ValidationReport, opts: &ValidateOptions, rng: &mut Rng) {
    // zero-failure cost table against brute-force routing on sampled rings
    let bits = 10u32;
    let n = 64.0;
    let p = ChurnParams::new(n, bits, 0.5, 500.0, 6).unwrap();
    let table = analytics::lookup_cost_table_with(&p, &vec![0.0; bits as usize], 0.0).unwrap();
    let theory = analytics::mean_cost_of(&table);
    let est = oracle::static_cost_oracle(bits, n, 6, opts.samples, 25, rng);
    report.record(
        "static-cost-vs-mc",
        est.agrees_with(theory, 3.0),
        format!("theory {theory:.4} vs mc {:.4} (se {:.2e})", est.value, est.stderr),
    );
}

fn successor_closed_forms(report: &mut ValidationReport) {
    let p = ChurnParams::new(1000.0, 20, 0.5, 200.0, 6).unwrap();
    let w1 = analytics::wrong_s1_fraction(&p);
    let ok = (w1 - 2.0 / 103.0).abs() < 1e-15
        && (analytics::dead_s1_fraction(&p) - w1 / 2.0).abs() < 1e-15
        && (analytics::lookup_inconsistency(&p) - w1 / 2.0).abs() < 1e-15;
    report.record(
        "successor-closed-forms",
        ok,
        format!("w1(200, 0.5) = {w1:.9}"),
    );
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_suite_passes() {
        let opts = ValidateOptions { quick: true, samples: 30_000, seed: 7 };
        let report = run_suite(&opts);
        for c in &report.checks {
            assert!(c.pass, "{}: {}", c.name, c.detail);
        }
    }
}
