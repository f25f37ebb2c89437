//! Command-line front end: theory evaluation, single simulations, comparison
//! sweeps and the validation suite.
//!
//! Data goes to standard output or files; progress chatter goes to standard
//! error. Exit codes: 0 success, 1 failed validation or aborted runs, 2 bad
//! arguments.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use chord_churn_cli::experiment::{self, SweepSpec};
use chord_churn_cli::output;
use chord_churn_cli::validate::{run_suite, ValidateOptions};
use chord_churn_core::analytics::{ChurnParams, TheoryPoint};
use chord_churn_core::sim::{self, SimConfig};
use clap::{Args, Parser, Subcommand, ValueEnum};

const OUT_DIR_ENV: &str = "CHORD_CHURN_OUT_DIR";

#[derive(Parser)]
#[command(
    name = "chord-churn",
    about = "Chord-style ring maintenance under churn: analytics, simulation and comparison",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// Stabilization-to-failure rate ratio.
    #[arg(long, default_value_t = 500.0)]
    r: f64,
    /// Fraction of stabilizations devoted to the successor pointer.
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Key-space bits (ring size 2^bits, also the finger count).
    #[arg(long, default_value_t = 20)]
    bits: u32,
    /// Successor list length.
    #[arg(long, default_value_t = 6)]
    succ: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the analytical model at one parameter point.
    Theory {
        #[command(flatten)]
        model: ModelArgs,
        /// Expected node count.
        #[arg(long, default_value_t = 1000.0)]
        n: f64,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        /// Keep every stride-th entry of the lookup-cost table (1 = all).
        #[arg(long, default_value_t = 1)]
        cost_stride: usize,
        /// Write to a file instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one simulation and stream metric samples as CSV.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        /// Initial node count.
        #[arg(long, default_value_t = 1000)]
        n0: u32,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Churn/stabilization events before measuring starts.
        #[arg(long)]
        burnin_events: Option<u64>,
        /// Events processed while measuring.
        #[arg(long)]
        measure_events: Option<u64>,
        /// Probe lookups per metrics sample.
        #[arg(long, default_value_t = 50)]
        probes: u32,
        /// Directory for samples.csv and summary.json (default: stream to
        /// standard output, no summary file).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep an (r, alpha) grid and compare simulation with theory.
    Compare {
        /// Comma-separated stabilization ratios.
        #[arg(long, value_delimiter = ',', default_value = "500")]
        r: Vec<f64>,
        /// Comma-separated alpha values.
        #[arg(long, value_delimiter = ',', default_value = "0.5")]
        alpha: Vec<f64>,
        #[arg(long, default_value_t = 1000)]
        n0: u32,
        #[arg(long, default_value_t = 20)]
        bits: u32,
        #[arg(long, default_value_t = 6)]
        succ: usize,
        #[arg(long, default_value_t = 10)]
        replicates: u32,
        /// Use the full-scale replication count (100).
        #[arg(long)]
        paper_scale: bool,
        #[arg(long, default_value_t = 42)]
        base_seed: u64,
        #[arg(long)]
        burnin_events: Option<u64>,
        #[arg(long)]
        measure_events: Option<u64>,
        #[arg(long, default_value_t = 50)]
        probes: u32,
        /// Worker threads for replicates (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
        /// Output directory (default: $CHORD_CHURN_OUT_DIR or ./out).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the Monte Carlo oracle suite and invariant checks.
    Validate {
        /// Fewer oracle points.
        #[arg(long)]
        quick: bool,
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
        #[arg(long, default_value_t = 0xC0FFEE)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn bad_args(msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

fn dispatch(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Theory { model, n, format, cost_stride, out } => {
            if cost_stride == 0 {
                return Ok(bad_args("--cost-stride must be at least 1"));
            }
            let params = match ChurnParams::new(n, model.bits, model.alpha, model.r, model.succ) {
                Ok(p) => p,
                Err(e) => return Ok(bad_args(&e.to_string())),
            };
            eprintln!("evaluating model at r={}, alpha={}, N={n}, bits={}", model.r, model.alpha, model.bits);
            let mut point = TheoryPoint::compute(&params)?;
            let body = match format {
                Format::Json => {
                    if cost_stride > 1 {
                        point.cost = point
                            .cost
                            .iter()
                            .copied()
                            .step_by(cost_stride)
                            .collect();
                    }
                    serde_json::to_string_pretty(&point)?
                }
                Format::Csv => output::theory_csv(&point),
            };
            emit(out.as_deref(), &body)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate { model, n0, seed, burnin_events, measure_events, probes, out } => {
            let cfg = SimConfig {
                n0,
                bits: model.bits,
                succ_len: model.succ,
                stab_ratio: model.r,
                alpha: model.alpha,
                lambda_f: 1.0,
                seed,
                burnin_events: burnin_events.unwrap_or(20 * n0 as u64),
                measure_events: measure_events.unwrap_or(200 * n0 as u64),
                probe_lookups_per_sample: probes,
            };
            if let Err(e) = cfg.validate() {
                return Ok(bad_args(&e.to_string()));
            }
            eprintln!(
                "simulating n0={n0} bits={} r={} alpha={} seed={seed} ({} + {} events)",
                cfg.bits, cfg.stab_ratio, cfg.alpha, cfg.burnin_events, cfg.measure_events
            );
            let header = output::sample_csv_header(cfg.bits as usize);
            let outcome = if let Some(dir) = out {
                let mut body = header;
                body.push('\n');
                let res = sim::run_with(&cfg, |s| {
                    body.push_str(&output::sample_csv_row(s));
                    body.push('\n');
                });
                match res {
                    Ok(run) => {
                        output::write_atomic(&dir.join("samples.csv"), body.as_bytes())?;
                        let summary = serde_json::json!({
                            "config": cfg,
                            "samples": run.samples.len(),
                            "events": run.events,
                            "sim_time": run.sim_time,
                            "final_n": run.final_n,
                            "mean": {
                                "w1": mean_of(&run, |s| s.wrong_s1),
                                "d1": mean_of(&run, |s| s.dead_s1),
                                "probe_inconsistency": mean_of(&run, |s| s.probe_inconsistency),
                                "probe_cost": mean_of(&run, |s| s.probe_cost_mean),
                            },
                        });
                        output::write_atomic(
                            &dir.join("summary.json"),
                            serde_json::to_string_pretty(&summary)?.as_bytes(),
                        )?;
                        eprintln!("wrote {}", dir.display());
                        Ok(())
                    }
                    Err(e) => Err(e),
                }
            } else {
                let stdout = std::io::stdout();
                let mut w = stdout.lock();
                writeln!(w, "{header}")?;
                sim::run_with(&cfg, |s| {
                    let _ = writeln!(w, "{}", output::sample_csv_row(s));
                })
                .map(|_| ())
            };
            match outcome {
                Ok(()) => Ok(ExitCode::SUCCESS),
                Err(e) => {
                    eprintln!("run aborted: {e}");
                    Ok(ExitCode::from(1))
                }
            }
        }
        Command::Compare {
            r,
            alpha,
            n0,
            bits,
            succ,
            replicates,
            paper_scale,
            base_seed,
            burnin_events,
            measure_events,
            probes,
            jobs,
            out,
        } => {
            if let Some(j) = jobs {
                rayon::ThreadPoolBuilder::new().num_threads(j).build_global().ok();
            }
            let spec = SweepSpec {
                stab_ratios: r,
                alphas: alpha,
                n0,
                bits,
                succ_len: succ,
                replicates: if paper_scale { 100 } else { replicates },
                base_seed,
                burnin_events: burnin_events.unwrap_or(300 * n0 as u64),
                measure_events: measure_events.unwrap_or(600 * n0 as u64),
                probe_lookups_per_sample: probes,
            };
            if let Err(e) = spec.validate() {
                return Ok(bad_args(&e));
            }
            let dir = out
                .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("out"));
            eprintln!(
                "sweeping {} grid point(s) x {} replicate(s) into {}",
                spec.stab_ratios.len() * spec.alphas.len(),
                spec.replicates,
                dir.display()
            );
            let outcome = experiment::run_sweep(&spec).map_err(anyhow::Error::msg)?;
            let summary = experiment::summarize(&outcome.rows, &outcome.points);
            output::write_atomic(
                &dir.join("rows.csv"),
                output::comparison_csv(&outcome.rows).as_bytes(),
            )?;
            let report = output::Report { spec: &spec, rows: &outcome.rows, summary: &summary };
            output::write_atomic(
                &dir.join("report.json"),
                output::report_json(&report).as_bytes(),
            )?;
            output::write_plot_data(&dir.join("plots"), &outcome)?;
            for m in &summary.metrics {
                eprintln!(
                    "  {:>4}: {} row(s), worst rel err {:.4}, median {:.4}, {} flagged",
                    m.metric,
                    m.rows,
                    m.worst_rel_error,
                    m.median_rel_error,
                    m.flagged.len()
                );
            }
            if !summary.degraded_points.is_empty() {
                for (r, a, n) in &summary.degraded_points {
                    eprintln!("  degraded point r={r} alpha={a}: {n} aborted replicate(s)");
                }
                return Ok(ExitCode::from(1));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { quick, samples, seed } => {
            if samples == 0 {
                return Ok(bad_args("--samples must be positive"));
            }
            let report = run_suite(&ValidateOptions { quick, samples, seed });
            let stdout = std::io::stdout();
            let mut w = stdout.lock();
            for c in &report.checks {
                writeln!(w, "{} {} - {}", if c.pass { "ok  " } else { "FAIL" }, c.name, c.detail)?;
            }
            writeln!(
                w,
                "{}/{} checks passed",
                report.checks.iter().filter(|c| c.pass).count(),
                report.checks.len()
            )?;
            Ok(if report.all_pass() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
    }
}

fn mean_of(run: &sim::RunOutput, f: impl Fn(&sim::MetricsSample) -> f64) -> f64 {
    if run.samples.is_empty() {
        return 0.0;
    }
    run.samples.iter().map(&f).sum::<f64>() / run.samples.len() as f64
}

fn emit(path: Option<&std::path::Path>, body: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => {
            output::write_atomic(p, body.as_bytes())?;
            eprintln!("wrote {}", p.display());
        }
        None => println!("{body}"),
    }
    Ok(())
}
