//! The experiment commands. Each returns its CSV text; nothing here touches
//! the terminal, and apart from the timing command and the optional
//! `seconds` column the output is a pure function of the spec.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use stotiht::analysis::{self, eta_hosvd, kappa, sample_bound_check, sigma_estimate, EtaMethod, Kappa};
use stotiht::io::{read_tensor, write_tensor};
use stotiht::sensing::trip_estimate;
use stotiht::{run, BatchPartition, DenseTensor, RankTuple, RunStatus, RunTrace, SensingOperator, SolverConfig};

use crate::error::{invalid, HarnessError, Result};
use crate::problem::{solver_seed, Instance};
use crate::spec::{rank_label, ExperimentSpec, Kind};

pub const TRACE_HEADER: &str = "algorithm,batch,epoch,cost,rel_error,seconds";
pub const PHASE_HEADER: &str = "m,rank,algorithm,batch,trials,successes,success_fraction";
pub const EPOCHS_HEADER: &str = "m,rank,algorithm,batch,trials,successes,mean_epochs_to_success";
pub const TIMING_HEADER: &str = "algorithm,batch,iterations_per_epoch,min_seconds_per_epoch,median_seconds_per_epoch,seconds_per_iteration,bound_seconds_per_iteration,within_bound";
pub const PROBE_HEADER: &str = "quantity,value";

/// `{:.16e}`: 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn algorithm(batch: usize, m: usize) -> &'static str {
    if batch == m {
        "TIHT"
    } else {
        "StoTIHT"
    }
}

/// Summary of one seeded recovery.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRecord {
    pub m: usize,
    pub rank: RankTuple,
    pub batch: usize,
    pub trial: usize,
    /// `final_rel_error < tol`.
    pub success: bool,
    /// First epoch with relative error below `tol`, or `max_epochs + 1`.
    pub epochs_to_success: usize,
    pub final_rel_error: f64,
    pub seconds: f64,
    pub status: RunStatus,
}

impl ResultRecord {
    fn from_trace(spec: &ExperimentSpec, m: usize, rank: &RankTuple, batch: usize, trial: usize, trace: &RunTrace) -> Self {
        let final_rel_error = trace.final_rel_error().unwrap_or(f64::NAN);
        Self {
            m,
            rank: rank.clone(),
            batch,
            trial,
            success: final_rel_error < spec.tol,
            epochs_to_success: trace.first_epoch_below(spec.tol).unwrap_or(spec.max_epochs + 1),
            final_rel_error,
            seconds: trace.last().map_or(0.0, |r| r.seconds),
            status: trace.status,
        }
    }
}

fn solve(
    spec: &ExperimentSpec,
    inst: &Instance,
    rank: &RankTuple,
    batch: usize,
    trial: usize,
    stop_on_success: bool,
) -> Result<(DenseTensor, RunTrace)> {
    let m = inst.op.m();
    let mut cfg = SolverConfig::new(rank.clone(), spec.mu.resolve(m), batch);
    cfg.max_epochs = spec.max_epochs;
    cfg.success_tol = if stop_on_success { spec.tol } else { f64::MIN_POSITIVE };
    cfg.seed = solver_seed(spec.seed, trial, m, rank);
    Ok(run(&inst.op, &inst.y, &cfg, Some(&inst.truth))?)
}

/// One trial of a synthetic run at one batch size, run for the full epoch
/// budget.
#[derive(Clone, Debug)]
pub struct SyntheticTrial {
    pub trial: usize,
    pub batch: usize,
    pub initial_cost: f64,
    pub trace: RunTrace,
    pub record: ResultRecord,
}

/// Runs every (trial, batch size) pair of a synthetic experiment. Within a
/// trial all batch sizes share the target and the operator.
pub fn synthetic_trials(spec: &ExperimentSpec) -> Result<Vec<SyntheticTrial>> {
    spec.validate()?;
    let (m, rank) = (spec.ms[0], &spec.ranks[0]);
    let batches: Vec<usize> = spec.batches.iter().map(|b| b.batch_size(m)).collect::<Result<_>>()?;
    let per_trial = (0..spec.trials)
        .into_par_iter()
        .map(|trial| {
            let inst = Instance::generate(&spec.shape, rank, m, spec.noise, spec.seed, trial)?;
            let initial_cost = inst.op.cost_full(&inst.y, &DenseTensor::zeros(spec.shape.clone()))?;
            batches
                .iter()
                .map(|&b| {
                    let (_, trace) = solve(spec, &inst, rank, b, trial, false)?;
                    let record = ResultRecord::from_trace(spec, m, rank, b, trial, &trace);
                    Ok(SyntheticTrial {
                        trial,
                        batch: b,
                        initial_cost,
                        trace,
                        record,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_trial.into_iter().flatten().collect())
}

/// Mean cost and relative-error curves per batch size.
///
/// Rows: `algorithm,batch,epoch,cost,rel_error,seconds` for epochs
/// `0..=max_epochs`. Epoch 0 is the starting point `X⁰ = 0`. A run that
/// stopped early contributes its last record to the remaining epochs. The
/// `seconds` column is empty unless `wall_clock` is set.
pub fn cmd_synthetic_run(spec: &ExperimentSpec) -> Result<String> {
    let trials = synthetic_trials(spec)?;
    let m = spec.ms[0];
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    let mut batches: Vec<usize> = Vec::new();
    for t in &trials {
        if !batches.contains(&t.batch) {
            batches.push(t.batch);
        }
    }
    for b in batches {
        let group: Vec<&SyntheticTrial> = trials.iter().filter(|t| t.batch == b).collect();
        let n = group.len() as f64;
        for epoch in 0..=spec.max_epochs {
            let (mut cost, mut rel, mut secs) = (0.0, 0.0, 0.0);
            for t in &group {
                let (c, r, s) = if epoch == 0 {
                    (t.initial_cost, 1.0, 0.0)
                } else {
                    match t.trace.records.get(epoch.min(t.trace.records.len()).wrapping_sub(1)) {
                        Some(rec) => (rec.cost, rec.rel_error.unwrap_or(f64::NAN), rec.seconds),
                        None => (f64::NAN, f64::NAN, f64::NAN),
                    }
                };
                cost += c / n;
                rel += r / n;
                secs += s / n;
            }
            let secs = if spec.wall_clock { fmt_f64(secs) } else { String::new() };
            writeln!(out, "{},{b},{epoch},{},{},{secs}", algorithm(b, m), fmt_f64(cost), fmt_f64(rel)).expect("string");
        }
    }
    Ok(out)
}

/// Per-trial results of a grid: every (m, rank, batch, trial) combination,
/// with a fresh target and operator per (m, rank, trial).
pub fn grid_records(spec: &ExperimentSpec) -> Result<Vec<ResultRecord>> {
    spec.validate()?;
    let mut jobs = Vec::new();
    for &m in &spec.ms {
        for rank in &spec.ranks {
            for trial in 0..spec.trials {
                jobs.push((m, rank, trial));
            }
        }
    }
    let nested = jobs
        .into_par_iter()
        .map(|(m, rank, trial)| {
            let inst = Instance::generate(&spec.shape, rank, m, spec.noise, spec.seed, trial)?;
            spec.batches
                .iter()
                .map(|b| {
                    let b = b.batch_size(m)?;
                    let (_, trace) = solve(spec, &inst, rank, b, trial, true)?;
                    Ok(ResultRecord::from_trace(spec, m, rank, b, trial, &trace))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(nested.into_iter().flatten().collect())
}

/// Aggregated grid cell.
#[derive(Clone, Debug, PartialEq)]
pub struct GridCell {
    pub m: usize,
    pub rank: RankTuple,
    pub batch: usize,
    pub trials: usize,
    pub successes: usize,
    pub success_fraction: f64,
    pub mean_epochs_to_success: f64,
}

pub fn aggregate(spec: &ExperimentSpec, records: &[ResultRecord]) -> Result<Vec<GridCell>> {
    let mut cells = Vec::new();
    for &m in &spec.ms {
        for rank in &spec.ranks {
            for b in &spec.batches {
                let b = b.batch_size(m)?;
                let group: Vec<&ResultRecord> = records
                    .iter()
                    .filter(|r| r.m == m && &r.rank == rank && r.batch == b)
                    .collect();
                let trials = group.len();
                let successes = group.iter().filter(|r| r.success).count();
                let epochs: usize = group.iter().map(|r| r.epochs_to_success).sum();
                cells.push(GridCell {
                    m,
                    rank: rank.clone(),
                    batch: b,
                    trials,
                    successes,
                    success_fraction: successes as f64 / trials as f64,
                    mean_epochs_to_success: epochs as f64 / trials as f64,
                });
            }
        }
    }
    Ok(cells)
}

/// Rows: `m,rank,algorithm,batch,trials,successes,success_fraction`.
pub fn cmd_phase_grid(spec: &ExperimentSpec) -> Result<String> {
    let cells = aggregate(spec, &grid_records(spec)?)?;
    let mut out = String::from(PHASE_HEADER);
    out.push('\n');
    for c in cells {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            c.m,
            rank_label(&c.rank),
            algorithm(c.batch, c.m),
            c.batch,
            c.trials,
            c.successes,
            fmt_f64(c.success_fraction)
        )
        .expect("string");
    }
    Ok(out)
}

/// Rows: `m,rank,algorithm,batch,trials,successes,mean_epochs_to_success`.
/// Trials that never succeed count as `max_epochs + 1`.
pub fn cmd_epochs_grid(spec: &ExperimentSpec) -> Result<String> {
    let cells = aggregate(spec, &grid_records(spec)?)?;
    let mut out = String::from(EPOCHS_HEADER);
    out.push('\n');
    for c in cells {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            c.m,
            rank_label(&c.rank),
            algorithm(c.batch, c.m),
            c.batch,
            c.trials,
            c.successes,
            fmt_f64(c.mean_epochs_to_success)
        )
        .expect("string");
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimingRow {
    pub batch: usize,
    pub iterations_per_epoch: usize,
    pub min_seconds_per_epoch: f64,
    pub median_seconds_per_epoch: f64,
    /// `min_seconds_per_epoch / iterations_per_epoch`.
    pub seconds_per_iteration: f64,
    /// TIHT seconds per iteration `× (b/m) × 1.5`.
    pub bound_seconds_per_iteration: f64,
}

impl TimingRow {
    pub fn within_bound(&self) -> bool {
        self.seconds_per_iteration <= self.bound_seconds_per_iteration
    }
}

/// Wall time per epoch of every batch size, on the calling thread.
///
/// Each trial runs all batch sizes back to back on one instance for the
/// full epoch budget. Every epoch is timed on its own, cost evaluation
/// included; per batch size the minimum and the median over all timed
/// epochs of all trials are reported. The TIHT row (`b = m`) is always
/// included.
pub fn timing_rows(spec: &ExperimentSpec) -> Result<Vec<TimingRow>> {
    spec.validate()?;
    let (m, rank) = (spec.ms[0], &spec.ranks[0]);
    let mut batches = vec![m];
    for b in &spec.batches {
        let b = b.batch_size(m)?;
        if !batches.contains(&b) {
            batches.push(b);
        }
    }
    let mut per_epoch: Vec<Vec<f64>> = vec![Vec::new(); batches.len()];
    let mut iterations = vec![0; batches.len()];
    for trial in 0..spec.trials {
        let inst = Instance::generate(&spec.shape, rank, m, spec.noise, spec.seed, trial)?;
        for (k, &b) in batches.iter().enumerate() {
            let (_, trace) = solve(spec, &inst, rank, b, trial, false)?;
            let mut prev = 0.0;
            for rec in &trace.records {
                per_epoch[k].push(rec.seconds - prev);
                prev = rec.seconds;
            }
            iterations[k] = trace.iterations_per_epoch;
        }
    }
    let mut rows = Vec::with_capacity(batches.len());
    let mut tiht_per_iteration = f64::NAN;
    for (k, &b) in batches.iter().enumerate() {
        let mut times = per_epoch[k].clone();
        if times.is_empty() {
            return invalid(format!("no completed epochs at batch size {b}"));
        }
        times.sort_by(f64::total_cmp);
        let min = times[0];
        let median = times[times.len() / 2];
        let per_iteration = min / iterations[k] as f64;
        if k == 0 {
            tiht_per_iteration = per_iteration;
        }
        rows.push(TimingRow {
            batch: b,
            iterations_per_epoch: iterations[k],
            min_seconds_per_epoch: min,
            median_seconds_per_epoch: median,
            seconds_per_iteration: per_iteration,
            bound_seconds_per_iteration: tiht_per_iteration * (b as f64 / m as f64) * 1.5,
        });
    }
    Ok(rows)
}

pub fn cmd_timing(spec: &ExperimentSpec) -> Result<String> {
    let m = spec.ms[0];
    let mut out = String::from(TIMING_HEADER);
    out.push('\n');
    for r in timing_rows(spec)? {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            algorithm(r.batch, m),
            r.batch,
            r.iterations_per_epoch,
            fmt_f64(r.min_seconds_per_epoch),
            fmt_f64(r.median_seconds_per_epoch),
            fmt_f64(r.seconds_per_iteration),
            fmt_f64(r.bound_seconds_per_iteration),
            r.within_bound()
        )
        .expect("string");
    }
    Ok(out)
}

/// Recovery of a tensor read from `input` (TNSR or CSV).
///
/// Returns the trace CSV (same schema as synthetic runs, single trial) and
/// the recovered tensor, which is also written to `recovered` when given.
pub fn cmd_real_tensor(spec: &ExperimentSpec, input: &Path, recovered: Option<&Path>) -> Result<(String, DenseTensor)> {
    let truth = read_tensor(input).map_err(|e| HarnessError::file(input, e))?;
    let mut spec = spec.clone();
    spec.shape = truth.shape().clone();
    spec.validate()?;
    let (m, rank) = (spec.ms[0], spec.ranks[0].clone());
    let b = spec.batches[0].batch_size(m)?;
    let inst = Instance::from_target(truth, &rank, m, spec.noise, spec.seed, 0)?;
    let initial_cost = inst.op.cost_full(&inst.y, &DenseTensor::zeros(spec.shape.clone()))?;
    let (x, trace) = solve(&spec, &inst, &rank, b, 0, true)?;

    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    let alg = algorithm(b, m);
    let blank = |s: f64| if spec.wall_clock { fmt_f64(s) } else { String::new() };
    let rel0 = if inst.truth.frobenius_norm() > 0.0 { 1.0 } else { 0.0 };
    writeln!(out, "{alg},{b},0,{},{},{}", fmt_f64(initial_cost), fmt_f64(rel0), blank(0.0)).expect("string");
    for r in &trace.records {
        writeln!(
            out,
            "{alg},{b},{},{},{},{}",
            r.epoch,
            fmt_f64(r.cost),
            fmt_f64(r.rel_error.unwrap_or(f64::NAN)),
            blank(r.seconds)
        )
        .expect("string");
    }
    if let Some(path) = recovered {
        write_tensor(path, &x).map_err(|e| HarnessError::file(path, e))?;
    }
    Ok((out, x))
}

/// Inputs of the TRIP probe beyond the experiment spec.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeOptions {
    /// User value of `δ_{3r}`; the empirical rank-`3r` lower bound otherwise.
    pub delta: Option<f64>,
    /// `√(2d−3)` when absent.
    pub eta: Option<f64>,
    /// Stepsize of the convergence bound; `1/α` when absent.
    pub theory_mu: Option<f64>,
    /// Constant of the sample-complexity bound.
    pub c: f64,
    /// Random tensors per TRIP estimate and batch draws for `σ`.
    pub samples: usize,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        Self {
            delta: None,
            eta: None,
            theory_mu: None,
            c: 1.0,
            samples: 200,
        }
    }
}

/// Rows of `quantity,value`.
///
/// The restricted isometry is probed on `√(mN)·A`, the unit-variance
/// rescaling of the normalized Gaussian operator, with measurements scaled
/// alike; `κ` and `σ` refer to that operator.
pub fn cmd_trip_probe(spec: &ExperimentSpec, opts: &ProbeOptions) -> Result<String> {
    spec.validate()?;
    if opts.samples == 0 {
        return invalid("probe samples must be at least 1");
    }
    let (m, rank) = (spec.ms[0], &spec.ranks[0]);
    let b = spec.batches[0].batch_size(m)?;
    let part = BatchPartition::uniform(m, b)?;
    let inst = Instance::generate(&spec.shape, rank, m, spec.noise, spec.seed, 0)?;
    let n = spec.shape.len();
    let scale = ((m * n) as f64).sqrt();
    let rows: Vec<f64> = (0..m).flat_map(|i| inst.op.row(i).iter().map(move |v| v * scale)).collect();
    let op = SensingOperator::from_rows(spec.shape.clone(), m, rows)?;
    // Same truth measured by the rescaled operator, plus the rescaled noise;
    // noiseless measurements stay exactly consistent.
    let clean = inst.op.apply(&inst.truth)?;
    let y: Vec<f64> = op
        .apply(&inst.truth)?
        .into_iter()
        .zip(inst.y.iter().zip(&clean))
        .map(|(a, (y, c))| a + scale * (y - c))
        .collect();

    let rank3 = rank.scaled_clipped(3, &spec.shape);
    let est_r = trip_estimate(&op, &part, rank, opts.samples, spec.seed)?;
    // Rank-r tensors lie in the rank-3r class, so their deviations also
    // bound δ_3r from below.
    let mut est_3r = trip_estimate(&op, &part, &rank3, opts.samples, spec.seed)?;
    est_3r.delta_lower_full = est_3r.delta_lower_full.max(est_r.delta_lower_full);
    est_3r.delta_lower_batch = est_3r.delta_lower_batch.max(est_r.delta_lower_batch);
    let (delta, source) = match opts.delta {
        Some(d) => (d, "user"),
        None => (est_3r.delta_lower_full.max(est_3r.delta_lower_batch), "estimate"),
    };
    let d = spec.shape.order();
    let eta = match opts.eta {
        Some(e) => e,
        None if d >= 2 => eta_hosvd(d, EtaMethod::Sqrt2dMinus3)?,
        None => 1.0,
    };

    let mut rows: Vec<(&str, String)> = vec![
        ("shape", spec.shape.dims().iter().map(|v| v.to_string()).collect::<Vec<_>>().join("x")),
        ("rank", rank_label(rank)),
        ("rank_3r", rank_label(&rank3)),
        ("m", m.to_string()),
        ("batch", b.to_string()),
        ("batches", part.count().to_string()),
        ("probe_samples", opts.samples.to_string()),
        ("probe_scaling", fmt_f64(scale)),
        ("delta_lower_full_r", fmt_f64(est_r.delta_lower_full)),
        ("delta_lower_batch_r", fmt_f64(est_r.delta_lower_batch)),
        ("delta_lower_full_3r", fmt_f64(est_3r.delta_lower_full)),
        ("delta_lower_batch_3r", fmt_f64(est_3r.delta_lower_batch)),
        ("delta_3r", fmt_f64(delta)),
        ("delta_source", source.to_string()),
        ("eta", fmt_f64(eta)),
        ("bound_constant", fmt_f64(opts.c)),
    ];
    let na = || "n/a".to_string();
    match sample_bound_check(m, b, delta, spec.shape.max_dim(), rank.max_rank(), d, opts.c) {
        Ok(bc) => {
            rows.push(("bound_threshold", fmt_f64(bc.threshold)));
            rows.push(("bound_full_ok", bc.full_ok.to_string()));
            rows.push(("bound_batch_ok", bc.batch_ok.to_string()));
        }
        Err(_) => {
            rows.push(("bound_threshold", na()));
            rows.push(("bound_full_ok", na()));
            rows.push(("bound_batch_ok", na()));
        }
    }
    let theory = if (0.0..1.0).contains(&delta) {
        let alpha = analysis::alpha(delta, part.count(), part.p_min())?;
        let mu = opts.theory_mu.unwrap_or(1.0 / alpha);
        let tp = analysis::TheoryParams::uniform(delta, eta, mu, part.count());
        let k = kappa(&tp)?;
        let sigma = sigma_estimate(&op, &part, &y, &inst.truth, mu, eta, opts.samples, spec.seed)?;
        Some((alpha, mu, k, sigma))
    } else {
        None
    };
    match theory {
        Some((alpha, mu, k, sigma)) => {
            rows.push(("rho_plus", fmt_f64(analysis::rho_plus(delta)?)));
            rows.push(("rho_minus", fmt_f64(analysis::rho_minus(delta)?)));
            rows.push(("alpha", fmt_f64(alpha)));
            rows.push(("theory_mu", fmt_f64(mu)));
            match k {
                Kappa::Feasible(v) => rows.push(("kappa", fmt_f64(v))),
                Kappa::Infeasible { .. } => rows.push(("kappa", na())),
            }
            rows.push(("kappa_contraction", k.is_contraction().to_string()));
            rows.push(("sigma", fmt_f64(sigma)));
        }
        None => {
            for q in ["rho_plus", "rho_minus", "alpha", "theory_mu", "kappa", "kappa_contraction", "sigma"] {
                rows.push((q, na()));
            }
        }
    }
    rows.push(("noise", fmt_f64(spec.noise)));

    let mut out = String::from(PROBE_HEADER);
    out.push('\n');
    for (q, v) in rows {
        writeln!(out, "{q},{v}").expect("string");
    }
    Ok(out)
}

/// Dispatches on `spec.kind` for the commands that need no extra inputs.
pub fn run_spec(spec: &ExperimentSpec) -> Result<String> {
    match spec.kind {
        Kind::SyntheticRun => cmd_synthetic_run(spec),
        Kind::PhaseGrid => cmd_phase_grid(spec),
        Kind::EpochsGrid => cmd_epochs_grid(spec),
        Kind::Timing => cmd_timing(spec),
        Kind::TripProbe => cmd_trip_probe(spec, &ProbeOptions::default()),
        Kind::RealTensor => invalid("the real command needs an input tensor file"),
    }
}
