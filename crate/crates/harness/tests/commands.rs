use stotiht::hosvd::random_tucker;
use stotiht::io::{read_tensor, write_tensor};
use stotiht::{reconstruct, rng, RankTuple, Shape};
use stotiht_harness::commands::{self, ProbeOptions};
use stotiht_harness::spec::{ExperimentSpec, Kind, Scaled};

fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn rank(r: &[usize]) -> RankTuple {
    RankTuple::new(r.to_vec()).unwrap()
}

fn probe_value(csv: &str, key: &str) -> String {
    rows(csv).into_iter().find(|r| r[0] == key).unwrap_or_else(|| panic!("no {key}"))[1].clone()
}

#[test]
fn zero_stepsize_leaves_error_at_one() {
    let mut spec = ExperimentSpec::defaults(Kind::SyntheticRun);
    spec.mu = Scaled::Absolute(0.0);
    spec.trials = 2;
    spec.max_epochs = 5;
    let csv = commands::cmd_synthetic_run(&spec).unwrap();
    let rows = rows(&csv);
    assert_eq!(rows.len(), 3 * 6);
    for r in rows {
        assert_eq!(r[4].parse::<f64>().unwrap(), 1.0);
        assert_eq!(r[5], "");
    }
}

#[test]
fn unreachable_cells_report_sentinel() {
    let mut spec = ExperimentSpec::defaults(Kind::EpochsGrid);
    spec.ms = vec![200];
    spec.trials = 3;
    spec.max_epochs = 2;
    let records = commands::grid_records(&spec).unwrap();
    assert!(!records.is_empty());
    for r in &records {
        assert!(!r.success);
        assert_eq!(r.epochs_to_success, 3);
    }
    let csv = commands::cmd_epochs_grid(&spec).unwrap();
    for r in rows(&csv) {
        assert_eq!(r[6].parse::<f64>().unwrap(), 3.0);
    }
}

#[test]
fn too_few_measurements_never_succeed() {
    // r^d + sum n_i r_i = 8 + 32 = 40 > 30.
    let mut spec = ExperimentSpec::defaults(Kind::PhaseGrid);
    spec.ranks = vec![rank(&[2, 2, 2])];
    spec.ms = vec![30];
    spec.trials = 5;
    spec.max_epochs = 100;
    let cells = commands::aggregate(&spec, &commands::grid_records(&spec).unwrap()).unwrap();
    assert_eq!(cells.len(), 1);
    assert_eq!(cells[0].successes, 0);
}

#[test]
fn rank_one_with_many_measurements_always_succeeds() {
    let mut spec = ExperimentSpec::defaults(Kind::PhaseGrid);
    spec.ranks = vec![rank(&[1, 1, 1])];
    spec.ms = vec![300];
    let cells = commands::aggregate(&spec, &commands::grid_records(&spec).unwrap()).unwrap();
    assert_eq!(cells[0].trials, 20);
    assert_eq!(cells[0].success_fraction, 1.0);
}

#[test]
fn larger_budget_keeps_epochs_to_success() {
    let mut spec = ExperimentSpec::defaults(Kind::EpochsGrid);
    spec.ms = vec![300];
    spec.trials = 5;
    spec.max_epochs = 20;
    let short = commands::grid_records(&spec).unwrap();
    spec.max_epochs = 40;
    let long = commands::grid_records(&spec).unwrap();
    assert_eq!(short.len(), long.len());
    let mut successes = 0;
    for (a, b) in short.iter().zip(&long) {
        assert_eq!((a.m, &a.rank, a.batch, a.trial), (b.m, &b.rank, b.batch, b.trial));
        if a.success {
            successes += 1;
            assert!(b.epochs_to_success <= a.epochs_to_success);
        }
    }
    assert!(successes > 0);
}

#[test]
fn success_flags_match_final_errors() {
    let mut spec = ExperimentSpec::defaults(Kind::PhaseGrid);
    spec.ms = vec![100, 400];
    spec.trials = 4;
    for r in commands::grid_records(&spec).unwrap() {
        assert_eq!(r.success, r.final_rel_error < spec.tol);
        assert_eq!(r.success, r.epochs_to_success <= spec.max_epochs);
    }
}

#[test]
fn single_cell_rerun_reproduces_its_rows() {
    let mut spec = ExperimentSpec::defaults(Kind::PhaseGrid);
    spec.ms = vec![100, 200];
    spec.trials = 4;
    spec.seed = 9;
    let full = commands::cmd_phase_grid(&spec).unwrap();
    spec.ms = vec![200];
    spec.ranks = vec![rank(&[1, 2, 2])];
    let single = commands::cmd_phase_grid(&spec).unwrap();
    let row = single.lines().nth(1).unwrap();
    assert!(full.lines().any(|l| l == row), "{row}");
}

#[test]
fn grids_do_not_depend_on_thread_count() {
    let mut spec = ExperimentSpec::defaults(Kind::EpochsGrid);
    spec.ms = vec![200, 300];
    spec.trials = 4;
    spec.max_epochs = 30;
    let on = |n: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .unwrap()
            .install(|| commands::cmd_epochs_grid(&spec).unwrap())
    };
    assert_eq!(on(1), on(4));
}

fn exact_rank_file(dir: &std::path::Path, name: &str) -> std::path::PathBuf {
    let shape = Shape::new(vec![5, 5, 6]).unwrap();
    let x = reconstruct(&random_tucker(&shape, &rank(&[1, 2, 2]), &mut rng::from_seed(3)).unwrap()).unwrap();
    let path = dir.join(name);
    write_tensor(&path, &x).unwrap();
    path
}

#[test]
fn real_path_recovers_exact_rank_tensor() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["target.tnsr", "target.csv"] {
        let input = exact_rank_file(dir.path(), name);
        let truth = read_tensor(&input).unwrap();
        let out = dir.path().join(format!("{name}.recovered.tnsr"));
        let spec = ExperimentSpec::defaults(Kind::RealTensor);
        let (csv, x) = commands::cmd_real_tensor(&spec, &input, Some(&out)).unwrap();
        let rows = rows(&csv);
        assert_eq!(rows[0][2], "0");
        let last: f64 = rows.last().unwrap()[4].parse().unwrap();
        assert!(last < 1e-5, "{last}");
        assert!(x.distance(&truth).unwrap() < 1e-5 * truth.frobenius_norm());
        assert_eq!(read_tensor(&out).unwrap(), x);
    }
}

#[test]
fn recovered_tensor_round_trips_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let input = exact_rank_file(dir.path(), "t.tnsr");
    let mut spec = ExperimentSpec::defaults(Kind::RealTensor);
    spec.max_epochs = 3;
    for ext in ["tnsr", "csv"] {
        let out = dir.path().join(format!("rec.{ext}"));
        let (_, x) = commands::cmd_real_tensor(&spec, &input, Some(&out)).unwrap();
        let back = read_tensor(&out).unwrap();
        assert_eq!(back.shape(), x.shape());
        for (a, b) in back.data().iter().zip(x.data()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}

#[test]
fn real_path_reports_file_errors() {
    let dir = tempfile::tempdir().unwrap();
    let spec = ExperimentSpec::defaults(Kind::RealTensor);
    let missing = dir.path().join("missing.tnsr");
    let err = commands::cmd_real_tensor(&spec, &missing, None).unwrap_err();
    assert_eq!(err.exit_code(), 3);
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "2,2\n1,2,3\n").unwrap();
    let err = commands::cmd_real_tensor(&spec, &bad, None).unwrap_err();
    assert!(err.to_string().contains("byte"), "{err}");
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn trip_probe_bounds_and_noiseless_sigma() {
    let spec = ExperimentSpec::defaults(Kind::TripProbe);
    let opts = ProbeOptions {
        samples: 60,
        ..ProbeOptions::default()
    };
    let csv = commands::cmd_trip_probe(&spec, &opts).unwrap();
    assert_eq!(csv, commands::cmd_trip_probe(&spec, &opts).unwrap());
    for kind in ["full", "batch"] {
        let r: f64 = probe_value(&csv, &format!("delta_lower_{kind}_r")).parse().unwrap();
        let r3: f64 = probe_value(&csv, &format!("delta_lower_{kind}_3r")).parse().unwrap();
        assert!(r <= r3, "{kind}: {r} > {r3}");
    }
    assert_eq!(probe_value(&csv, "rank_3r"), "3x5x6");
    assert_eq!(probe_value(&csv, "eta").parse::<f64>().unwrap(), 3f64.sqrt());
    assert_eq!(probe_value(&csv, "sigma").parse::<f64>().unwrap(), 0.0);
}

#[test]
fn trip_probe_with_user_constants() {
    let spec = ExperimentSpec::defaults(Kind::TripProbe);
    let opts = ProbeOptions {
        delta: Some(0.0),
        eta: Some(1.0),
        theory_mu: Some(0.5),
        samples: 10,
        ..ProbeOptions::default()
    };
    let csv = commands::cmd_trip_probe(&spec, &opts).unwrap();
    // M = 4 uniform batches: alpha = 2, kappa = 2 sqrt(1 - (2 - 1) 0.5).
    assert_eq!(probe_value(&csv, "alpha").parse::<f64>().unwrap(), 2.0);
    let k: f64 = probe_value(&csv, "kappa").parse().unwrap();
    assert!((k - 2.0 * 0.5f64.sqrt()).abs() <= 1e-12);
    assert_eq!(probe_value(&csv, "bound_threshold"), "n/a");
    let mut noisy = spec.clone();
    noisy.noise = 0.1;
    let csv = commands::cmd_trip_probe(&noisy, &opts).unwrap();
    assert!(probe_value(&csv, "sigma").parse::<f64>().unwrap() > 0.0);
}

#[test]
fn timing_rows_cover_every_batch() {
    let mut spec = ExperimentSpec::defaults(Kind::Timing);
    spec.trials = 2;
    spec.max_epochs = 3;
    spec.batches = vec![Scaled::TimesM(0.25)];
    let rows = commands::timing_rows(&spec).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!((rows[0].batch, rows[0].iterations_per_epoch), (360, 1));
    assert_eq!((rows[1].batch, rows[1].iterations_per_epoch), (90, 4));
    for r in &rows {
        assert!(r.min_seconds_per_epoch > 0.0);
        assert!(r.min_seconds_per_epoch <= r.median_seconds_per_epoch);
    }
}
