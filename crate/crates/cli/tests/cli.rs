use std::fs;
use std::path::Path;
use std::process::Command;

fn dpirs() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dpirs"))
}

const TINY: &str = "\
sweep_axis = n
sweep_values = 2, 4
schemes = sdr_full, no_irs, random_phases
realizations = 2
";

fn write_experiment(dir: &Path) -> std::path::PathBuf {
    let p = dir.join("tiny.txt");
    fs::write(&p, TINY).unwrap();
    p
}

#[test]
fn missing_experiment_file_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let status = dpirs()
        .args(["run", "--spec"])
        .arg(dir.path().join("absent.txt"))
        .arg("--out")
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn unknown_figure_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let status = dpirs()
        .args(["figure", "fig10", "--out"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn bad_override_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_experiment(dir.path());
    let status = dpirs()
        .args(["run", "--spec"])
        .arg(&spec)
        .arg("--out")
        .arg(dir.path())
        .args(["--override", "realizations=zero"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn tiny_experiment_writes_csv_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_experiment(dir.path());
    let out = dir.path().join("out");
    let status = dpirs()
        .args(["run", "--spec"])
        .arg(&spec)
        .arg("--out")
        .arg(&out)
        .args(["--workers", "2"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    assert!(csv.starts_with("sweep_value,scheme,mean_se,std_se,mean_iters,mean_runtime_ms\n"));
    assert!(csv.ends_with('\n') && !csv.contains('\r'));
    assert_eq!(csv.lines().count(), 1 + 2 * 3);
    let svg = fs::read_to_string(out.join("plot.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 3);
    assert!(svg.trim_end().ends_with("</svg>"));
}

#[test]
fn override_changes_realization_count() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_experiment(dir.path());
    let run = |extra: &[&str], out: &str| {
        let out = dir.path().join(out);
        let status = dpirs()
            .args(["run", "--spec"])
            .arg(&spec)
            .arg("--out")
            .arg(&out)
            .args(["--override", "schemes=no_irs", "--override", "sweep_values=4"])
            .args(extra)
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0));
        // drop the wall-clock column, which differs between runs
        fs::read_to_string(out.join("results.csv"))
            .unwrap()
            .lines()
            .map(|l| l.rsplit_once(',').unwrap().0.to_string())
            .collect::<Vec<_>>()
    };
    let five = run(&["--override", "realizations=5"], "five");
    let two = run(&[], "two");
    // std over 5 samples differs from std over 2 samples of the same stream
    assert_ne!(five, two);
    let with_flag = run(&["--realizations", "5"], "flag");
    assert_eq!(five, with_flag);
}
