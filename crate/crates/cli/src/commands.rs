//! Subcommand bodies. Each writes its CSV files under `out` and returns the
//! paths written.

use std::path::{Path, PathBuf};

use adpqis_core::example1::{histogram, mass_near, reference_objective, run_example1, Example1Config, ValueSource};
use adpqis_core::{argmin_action, run, Problem, StageIndex};

use crate::config::ExperimentSpec;
use crate::error::CliResult;
use crate::experiment::{execute, solve_oracle, Benchmark, SummaryRow};
use crate::output::{num, shares, CsvOut};
use crate::report::aggregate;

const PAIRED_NOTE: &str = "seeds are base_seed + replication, shared by every cell for paired comparisons";
const TIMING_NOTE: &str = "wall-clock seconds; differs between runs";

pub fn train(spec: &ExperimentSpec, out: &Path) -> CliResult<Vec<PathBuf>> {
    let instance = spec.instance()?;
    let outcome = run(&instance, &spec.run)?;
    let hash = spec.hash();
    let report = &outcome.report;

    let mut f = CsvOut::create(
        out,
        "report.csv",
        &hash,
        &[],
        &["iteration", "stage1_q_normalized", "stage1_q", "q_min_1", "q_max_1", "cumulative_proposals"],
    )?;
    for (rec, norm) in report.iterations.iter().zip(report.normalized_stage1_trace()) {
        f.row([
            rec.iteration.to_string(),
            num(norm),
            num(rec.stage1_optimal_q),
            num(rec.q_min_1),
            num(rec.q_max_1),
            rec.cumulative_proposals.to_string(),
        ])?;
    }
    let mut paths = vec![f.finish()?];

    let mut f = CsvOut::create(out, "coeffs.csv", &hash, &[], &["stage", "index", "theta"])?;
    for q in &outcome.approximations {
        for (i, t) in q.theta().iter().enumerate() {
            f.row([q.stage().get().to_string(), i.to_string(), num(*t)])?;
        }
    }
    paths.push(f.finish()?);

    let mut f = CsvOut::create(
        out,
        "archive.csv",
        &hash,
        &[],
        &["stage", "records", "cost_mean", "cost_min", "cost_max", "proposals", "q_min", "q_max"],
    )?;
    for t in 1..=instance.horizon() {
        let stage = StageIndex::new(t, instance.horizon())?;
        let recs = outcome.archive.stage(stage);
        let n = recs.len() as f64;
        let mean = recs.iter().map(|r| r.reward).sum::<f64>() / n;
        let lo = recs.iter().map(|r| r.reward).fold(f64::INFINITY, f64::min);
        let hi = recs.iter().map(|r| r.reward).fold(f64::NEG_INFINITY, f64::max);
        let b = &report.final_bounds[t - 1];
        f.row([
            t.to_string(),
            recs.len().to_string(),
            num(mean),
            num(lo),
            num(hi),
            report.proposals_per_stage[t - 1].to_string(),
            num(b.q_min),
            num(b.q_max),
        ])?;
    }
    paths.push(f.finish()?);

    let tm = report.timing;
    let mut f = CsvOut::create(
        out,
        "timings.csv",
        &hash,
        &[TIMING_NOTE],
        &["sampling_secs", "evaluation_secs", "other_secs", "total_secs"],
    )?;
    f.row([num(tm.sampling_secs), num(tm.evaluation_secs), num(tm.other_secs), num(tm.total())])?;
    paths.push(f.finish()?);

    if let Some(q) = outcome.approximations.first() {
        let (a, v) = argmin_action(q, &instance.initial_state(), &spec.run.argmin)?;
        println!("stage-1 policy {} with q {}", shares(a.shares()), num(v));
    }
    println!(
        "timing: sampling {:.3}s, evaluation {:.3}s, other {:.3}s",
        tm.sampling_secs, tm.evaluation_secs, tm.other_secs
    );
    Ok(paths)
}

fn write_oracle(bench: &Benchmark, spec: &ExperimentSpec, out: &Path, hash: &str) -> CliResult<Vec<PathBuf>> {
    let sol = &bench.solution;
    let mut f = CsvOut::create(
        out,
        "oracle.csv",
        hash,
        &[],
        &["expected_cost", "stage1_shares", "grid_step", "shares_step", "scenario_paths", "policy_entries"],
    )?;
    f.row([
        num(sol.expected_cost),
        shares(sol.first_stage_shares.shares()),
        num(spec.oracle.grid_step),
        num(spec.oracle.shares_step),
        bench.tree.path_count().to_string(),
        sol.policy_len().to_string(),
    ])?;
    let mut paths = vec![f.finish()?];

    let mut f = CsvOut::create(out, "oracle_stage1.csv", hash, &[], &["stage1_shares", "expected_cost"])?;
    for (a, v) in &sol.first_stage_values {
        f.row([shares(a.shares()), num(*v)])?;
    }
    paths.push(f.finish()?);
    Ok(paths)
}

pub fn oracle(spec: &ExperimentSpec, out: &Path) -> CliResult<Vec<PathBuf>> {
    let instance = spec.instance()?;
    let bench = solve_oracle(&instance, spec)?;
    println!(
        "oracle cost {} with stage-1 shares {}",
        num(bench.solution.expected_cost),
        shares(bench.solution.first_stage_shares.shares())
    );
    write_oracle(&bench, spec, out, &spec.hash())
}

fn write_summary(rows: &[SummaryRow], out: &Path, hash: &str) -> CliResult<Vec<PathBuf>> {
    let mut f = CsvOut::create(
        out,
        "summary.csv",
        hash,
        &[PAIRED_NOTE],
        &[
            "cell",
            "algorithm",
            "parameters",
            "replication",
            "seed",
            "status",
            "percent_gap",
            "policy_cost",
            "oracle_cost",
            "stage1_shares",
        ],
    )?;
    for r in rows {
        let head = [
            r.cell.to_string(),
            r.algorithm.to_string(),
            r.parameters.clone(),
            r.replication.to_string(),
            r.seed.to_string(),
        ];
        let tail = match &r.outcome {
            Ok(e) => [
                "ok".to_string(),
                num(e.percent_gap),
                num(e.policy_cost),
                num(r.oracle_cost),
                shares(&e.stage1_shares),
            ],
            Err(msg) => [format!("failed: {msg}"), String::new(), String::new(), num(r.oracle_cost), String::new()],
        };
        f.row(head.iter().chain(tail.iter()))?;
    }
    let mut paths = vec![f.finish()?];

    let mut f = CsvOut::create(
        out,
        "timings.csv",
        hash,
        &[TIMING_NOTE],
        &["cell", "replication", "seed", "sampling_secs", "evaluation_secs", "other_secs", "total_secs"],
    )?;
    for r in rows {
        let t = r.timing;
        f.row([
            r.cell.to_string(),
            r.replication.to_string(),
            r.seed.to_string(),
            num(t.sampling_secs),
            num(t.evaluation_secs),
            num(t.other_secs),
            num(t.total()),
        ])?;
    }
    paths.push(f.finish()?);
    Ok(paths)
}

/// Sweeps the configured cells (or the base run alone) against the oracle.
pub fn sweep(spec: &ExperimentSpec, out: &Path, jobs: Option<usize>) -> CliResult<Vec<PathBuf>> {
    let instance = spec.instance()?;
    let bench = solve_oracle(&instance, spec)?;
    let hash = spec.hash();
    let rows = execute(&instance, &bench, spec, jobs)?;
    let failed = rows.iter().filter(|r| r.outcome.is_err()).count();
    if failed > 0 {
        log::warn!("{failed} of {} replications failed", rows.len());
    }
    let mut paths = write_oracle(&bench, spec, out, &hash)?;
    paths.extend(write_summary(&rows, out, &hash)?);
    println!("{} rows, {failed} failed", rows.len());
    Ok(paths)
}

/// The base configuration's replications against the oracle.
pub fn evaluate(spec: &ExperimentSpec, out: &Path, jobs: Option<usize>) -> CliResult<Vec<PathBuf>> {
    let base = ExperimentSpec {
        sweep: Default::default(),
        ..spec.clone()
    };
    sweep(&base, out, jobs)
}

pub fn example1(spec: &ExperimentSpec, out: &Path) -> CliResult<Vec<PathBuf>> {
    let e = &spec.example1;
    let cfg = Example1Config {
        samples: e.samples,
        iterations: e.iterations,
        seed: spec.run.seed,
        source: if e.learn {
            ValueSource::Learned { lambda: e.lambda }
        } else {
            ValueSource::TrueFunction
        },
        ..Default::default()
    };
    let result = run_example1(&cfg, reference_objective)?;
    let (lo, hi) = cfg.domain;
    let first = histogram(result.first(), lo, hi, e.bins);
    let last = histogram(result.last(), lo, hi, e.bins);
    let width = (hi - lo) / e.bins as f64;
    let mut f = CsvOut::create(
        out,
        "example1.csv",
        &spec.hash(),
        &[],
        &["bin_lo", "bin_hi", "first_iteration", "last_iteration"],
    )?;
    for (b, (c1, ck)) in first.iter().zip(&last).enumerate() {
        f.row([
            num(lo + b as f64 * width),
            num(lo + (b + 1) as f64 * width),
            c1.to_string(),
            ck.to_string(),
        ])?;
    }
    println!(
        "mass within 1 of x=5: first {:.3}, last {:.3}",
        mass_near(result.first(), 5.0, 1.0),
        mass_near(result.last(), 5.0, 1.0)
    );
    Ok(vec![f.finish()?])
}

/// Aggregates a summary file into per-cell statistics and box-plot data.
pub fn report(spec: &ExperimentSpec, summary: &Path, out: &Path) -> CliResult<Vec<PathBuf>> {
    let agg = aggregate(summary)?;
    if agg.skipped > 0 {
        eprintln!("warning: skipped {} malformed rows in {}", agg.skipped, summary.display());
    }
    let hash = spec.hash();
    let mut table = CsvOut::create(
        out,
        "aggregate.csv",
        &hash,
        &[],
        &["cell", "algorithm", "parameters", "n", "failed", "min", "median", "max"],
    )?;
    let mut boxes = CsvOut::create(
        out,
        "boxplot.csv",
        &hash,
        &["whiskers at the 5th and 95th percentiles, box at the quartiles"],
        &["cell", "algorithm", "parameters", "whisker_lo", "q1", "median", "q3", "whisker_hi"],
    )?;
    for c in &agg.cells {
        let id = [c.cell.to_string(), c.algorithm.clone(), c.parameters.clone()];
        match &c.gap {
            Some(b) => {
                let stats = [b.n.to_string(), c.failed.to_string(), num(b.min), num(b.median), num(b.max)];
                table.row(id.iter().chain(stats.iter()))?;
                let whisk = [num(b.p05), num(b.q1), num(b.median), num(b.q3), num(b.p95)];
                boxes.row(id.iter().chain(whisk.iter()))?;
            }
            None => {
                let stats = ["0".to_string(), c.failed.to_string(), String::new(), String::new(), String::new()];
                table.row(id.iter().chain(stats.iter()))?;
            }
        }
        if let Some(b) = &c.gap {
            println!(
                "cell {} {} {}: min {:.3}% med {:.3}% max {:.3}%",
                c.cell, c.algorithm, c.parameters, b.min, b.median, b.max
            );
        }
    }
    Ok(vec![table.finish()?, boxes.finish()?])
}
