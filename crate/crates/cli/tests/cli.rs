use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn stark(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stark")).args(args).output().expect("run stark")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// File contents without the leading timestamp line.
fn body(path: &Path) -> String {
    let text = fs::read_to_string(path).unwrap();
    assert!(text.starts_with("# generated"), "missing timestamp line in {}", path.display());
    text.split_once('\n').unwrap().1.to_string()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.conf");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

const SWEEP: &str = "gamma = 1,2\nL = 21,41\nh = log:1e-8:1e-1:15\n";

#[test]
fn worker_count_does_not_change_output() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = write_config(tmp.path(), SWEEP);
    let one = tmp.path().join("one");
    let eight = tmp.path().join("eight");
    for (dir, w) in [(&one, "1"), (&eight, "8")] {
        let o = stark(&["qfi-sweep", "--config", &conf, "--out", dir.to_str().unwrap(), "--workers", w]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(body(&one.join("qfi_sweep.csv")), body(&eight.join("qfi_sweep.csv")));
    let rows = body(&one.join("qfi_sweep.csv")).lines().count() - 2;
    assert_eq!(rows, 2 * 2 * 15);
}

#[test]
fn rerun_and_interrupted_run_resume_by_key() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = write_config(tmp.path(), SWEEP);
    let out = tmp.path().join("out");
    let args = ["qfi-sweep", "--config", &conf, "--out", out.to_str().unwrap(), "--workers", "2"];
    let first = stark(&args);
    assert!(first.status.success(), "{}", stderr(&first));
    assert!(stdout(&first).contains("60 rows computed, 0 reused"));
    let table = out.join("qfi_sweep.csv");
    let complete = body(&table);

    let again = stark(&args);
    assert!(stdout(&again).contains("0 rows computed, 60 reused"), "{}", stdout(&again));
    assert_eq!(body(&table), complete);

    // leave a partial file holding the metadata line and the first 25 rows
    let lines: Vec<&str> = complete.lines().collect();
    let mut partial = String::from(lines[0]);
    partial.push('\n');
    for l in &lines[2..27] {
        partial.push_str(l);
        partial.push('\n');
    }
    fs::remove_file(&table).unwrap();
    fs::write(out.join("qfi_sweep.csv.partial"), partial).unwrap();
    let resumed = stark(&args);
    assert!(stdout(&resumed).contains("35 rows computed, 25 reused"), "{}", stdout(&resumed));
    assert_eq!(body(&table), complete);
    assert!(!out.join("qfi_sweep.csv.partial").exists());
}

#[test]
fn changed_physics_invalidates_old_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let conf = write_config(tmp.path(), SWEEP);
    assert!(stark(&["qfi-sweep", "--config", &conf, "--out", out.to_str().unwrap()]).status.success());
    let conf = write_config(tmp.path(), "gamma = 1,2\nL = 21,41\nh = log:1e-8:1e-1:8\n");
    let o = stark(&["qfi-sweep", "--config", &conf, "--out", out.to_str().unwrap()]);
    assert!(stdout(&o).contains("32 rows computed, 0 reused"), "{}", stdout(&o));
}

#[test]
fn invalid_config_lists_every_problem() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = write_config(tmp.path(), "h = log:-1:1:10\nbogus = 3\nL = 101\n");
    let o = stark(&["qfi-sweep", "--config", &conf]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("log grid requires positive endpoints"), "{err}");
    assert!(err.contains("unknown key `bogus`"), "{err}");
}

#[test]
fn scenario_mismatch_and_unknown_figure_are_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = write_config(tmp.path(), "scenario = gap-sweep\n");
    assert_eq!(stark(&["qfi-sweep", "--config", &conf]).status.code(), Some(1));
    let o = stark(&["reproduce", "fig4", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("unknown figure"));
}

#[test]
fn empty_directory_has_nothing_to_report() {
    let tmp = tempfile::tempdir().unwrap();
    let o = stark(&["report", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nothing to report"));
}

#[test]
fn beta_gamma_report_line_and_byte_identical_regeneration() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let conf = write_config(
        tmp.path(),
        "gamma = 1,2,3\nL = 21,41,61,81\nh = log:1e-10:1e-1:46\nresamples = 20\n",
    );
    let o = stark(&["fit-beta-gamma", "--config", &conf, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = stark(&["report", "--out", out.to_str().unwrap()]);
    assert!(report.status.success(), "{}", stderr(&report));
    let text = fs::read_to_string(out.join("report.txt")).unwrap();
    let line = text
        .lines()
        .find(|l| l.starts_with("single-particle beta(gamma): a = "))
        .expect("beta(gamma) line");
    assert!(line.contains("target (1.99, 3.97): "), "{line}");
    assert!(line.ends_with("PASS") || line.ends_with("FAIL"));

    let snapshot: Vec<(String, Vec<u8>)> = ["report.txt", "plot_beta_gamma.csv"]
        .iter()
        .map(|n| (n.to_string(), fs::read(out.join(n)).unwrap()))
        .collect();
    assert!(stark(&["report", "--out", out.to_str().unwrap()]).status.success());
    for (name, bytes) in snapshot {
        assert_eq!(fs::read(out.join(&name)).unwrap(), bytes, "{name} changed");
    }
}

#[test]
fn gap_sweep_writes_fits() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let conf = write_config(tmp.path(), "h1 = 5.5e-10\nh2 = 1e-12\nL = 51,101,151,201\n");
    let o = stark(&["gap-sweep", "--config", &conf, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let fits = fs::read_to_string(out.join("fits.json")).unwrap();
    assert_eq!(fits.matches("\"scenario\"").count(), 1);
    assert!(fits.contains("\"scenario\": \"gap:single-particle:h1=5.5e-10,h2=1e-12\""), "{fits}");
}
