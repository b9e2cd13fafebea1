use std::path::Path;
use std::process::{Command, Output};

fn stotiht(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stotiht")).args(args).output().expect("spawn")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

const SMALL: &[&str] = &["--trials", "3", "--epochs", "10"];

#[test]
fn reruns_are_byte_identical() {
    for cmd in ["synth-run", "phase-grid", "epochs-grid"] {
        let mut args = vec![cmd, "--seed", "5"];
        args.extend_from_slice(SMALL);
        let a = stotiht(&args);
        let b = stotiht(&args);
        assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
        assert!(!a.stdout.is_empty());
        assert_eq!(a.stdout, b.stdout, "{cmd}");
    }
    let a = stotiht(&["trip-probe", "--samples", "20"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, stotiht(&["trip-probe", "--samples", "20"]).stdout);
}

#[test]
fn seeds_change_output() {
    let a = stotiht(&["synth-run", "--seed", "1", "--trials", "2", "--epochs", "3"]);
    let b = stotiht(&["synth-run", "--seed", "2", "--trials", "2", "--epochs", "3"]);
    assert_ne!(a.stdout, b.stdout);
}

#[test]
fn threads_flag_does_not_change_output() {
    let run = |t: &str| stotiht(&["phase-grid", "--trials", "4", "--epochs", "30", "--threads", t]).stdout;
    assert_eq!(run("1"), run("3"));
}

#[test]
fn headers_and_float_format() {
    let out = stotiht(&["synth-run", "--trials", "1", "--epochs", "2", "--batch", "0.5m"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("algorithm,batch,epoch,cost,rel_error,seconds"));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&first[..3], &["StoTIHT", "180", "0"]);
    assert_eq!(first[4], "1.0000000000000000e0");
    let out = stotiht(&["phase-grid", "--m", "100", "--rank", "1,1,1", "--trials", "2", "--epochs", "5"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("m,rank,algorithm,batch,trials,successes,success_fraction\n100,1x1x1,StoTIHT,50,2,"));
}

#[test]
fn writes_csv_and_gnuplot_script() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("curves.csv");
    let o = stotiht(&[
        "synth-run",
        "--trials",
        "1",
        "--epochs",
        "2",
        "--out",
        out.to_str().unwrap(),
        "--gnuplot",
    ]);
    assert_eq!(code(&o), 0);
    assert!(o.stdout.is_empty());
    assert!(std::fs::read_to_string(&out).unwrap().starts_with("algorithm,"));
    let gp = std::fs::read_to_string(out.with_extension("gp")).unwrap();
    assert!(gp.contains("set datafile separator ','"));
}

#[test]
fn real_command_writes_recovered_tensor() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("x.csv");
    let shape = stotiht::Shape::new(vec![4, 4, 3]).unwrap();
    let x = stotiht::DenseTensor::random_gaussian(shape, &mut stotiht::rng::from_seed(1));
    stotiht::io::write_tensor(&input, &x).unwrap();
    let out = dir.path().join("trace.csv");
    let o = stotiht(&[
        "real",
        "--input",
        input.to_str().unwrap(),
        "--rank",
        "2,2,2",
        "--m",
        "100",
        "--epochs",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rec = stotiht::io::read_tensor(&dir.path().join("trace.recovered.tnsr")).unwrap();
    assert_eq!(rec.shape().dims(), &[4, 4, 3]);
}

fn assert_exit(args: &[&str], expected: i32) {
    let o = stotiht(args);
    assert_eq!(code(&o), expected, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
}

#[test]
fn invalid_arguments_exit_2() {
    assert_exit(&["synth-run", "--batch", "2.5"], 2);
    assert_exit(&["synth-run", "--batch", "0.5x"], 2);
    assert_exit(&["synth-run", "--batch", "2m"], 2);
    assert_exit(&["synth-run", "--rank", "6,1,1"], 2);
    assert_exit(&["synth-run", "--shape", "5,,6"], 2);
    assert_exit(&["synth-run", "--trials", "0"], 2);
    assert_exit(&["synth-run", "--m", "100,200"], 2);
    assert_exit(&["synth-run", "--threads", "0"], 2);
    assert_exit(&["synth-run", "--tol", "0"], 2);
    assert_exit(&["synth-run", "--gnuplot"], 2);
    assert_exit(&["phase-grid", "--unknown"], 2);
    assert_exit(&["trip-probe", "--samples", "0"], 2);
    assert_exit(&["nonsense"], 2);
}

#[test]
fn file_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("none.tnsr");
    assert_exit(&["real", "--input", missing.to_str().unwrap()], 3);

    let bad = dir.path().join("bad.tnsr");
    std::fs::write(&bad, b"TNSR\x01garbage").unwrap();
    let o = stotiht(&["real", "--input", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("byte"));

    let unwritable = Path::new("/nonexistent-dir/out.csv");
    assert_exit(&["synth-run", "--trials", "1", "--epochs", "1", "--out", unwritable.to_str().unwrap()], 3);
}
