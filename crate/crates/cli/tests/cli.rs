use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn soen(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_soen"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("run soen")
}

const RC_NETLIST: &str = "\
* RL decay
L1 1 0 10n
R1 1 0 1
I1 0 1 dc(1u)
.probe I(L1)
.tran 10p 5n
";

#[test]
fn missing_netlist_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = soen(&["sim", "nope.cir"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.cir"));
}

#[test]
fn corrupt_netlist_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.cir"), "L1 1 0 10q\n").unwrap();
    let out = soen(&["sim", "bad.cir"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
}

#[test]
fn bad_config_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), "[run]\nexperiment = 'fig3'\n[fig3]\nbogus = 1\n").unwrap();
    let out = soen(&["experiment", "--config", "c.toml"], dir.path());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn sim_writes_outputs_only_under_out() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("rl.cir"), RC_NETLIST).unwrap();
    let out = soen(&["sim", "rl.cir", "--out", "run", "--tstop", "2n"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let mut entries: Vec<String> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    entries.sort();
    assert_eq!(entries, ["rl.cir", "run"]);
    let trace = fs::read_to_string(dir.path().join("run/trace.csv")).unwrap();
    assert!(trace.starts_with("time,I(L1)\n"));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("run/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["t_stop"], 2e-9);
    assert_eq!(manifest["artifacts"].as_array().unwrap().len(), 2);
}

#[test]
fn experiment_rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for o in ["a", "b"] {
        let out = soen(&["experiment", "fig3", "--out", o], dir.path());
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    }
    for f in ["levels.csv", "slow_trace.csv", "fast_trace.csv", "plot.json", "manifest.json"] {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        let b = fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
}

#[test]
fn retention_sweep_is_identical_across_jobs() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("s.toml"),
        "[sweep]\ntarget = 'retention'\nseed = 3\n[retention]\nlevels = [4, 1, 2]\nbound = ['soft', 'hard']\npopulation = 1000\nt_max = 200.0\npoints = 40\n",
    )
    .unwrap();
    for (o, j) in [("j1", "1"), ("j4", "4")] {
        let out = soen(&["sweep", "--config", "s.toml", "--out", o, "--jobs", j], dir.path());
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = fs::read_to_string(dir.path().join("j1/sweep.csv")).unwrap();
    let b = fs::read_to_string(dir.path().join("j4/sweep.csv")).unwrap();
    assert_eq!(a, b);
    let lines: Vec<&str> = a.lines().collect();
    assert_eq!(lines[0], "bound,levels,lifetime,snr0,status");
    // Axes sorted by name, each ascending.
    let keys: Vec<String> = lines[1..].iter().map(|l| l.split(',').take(2).collect::<Vec<_>>().join(",")).collect();
    assert_eq!(keys, ["hard,1", "hard,2", "hard,4", "soft,1", "soft,2", "soft,4"]);
    assert!(lines[1..].iter().all(|l| l.ends_with(",ok")));
}

#[test]
fn failing_row_is_reported_in_status() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("s.toml"),
        "[sweep]\ntarget = 'retention'\n[retention]\nf_plus = [0.5, 0.9]\npopulation = 1000\nt_max = 10.0\npoints = 5\n",
    )
    .unwrap();
    let out = soen(&["sweep", "--config", "s.toml", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let csv = fs::read_to_string(dir.path().join("o/sweep.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert!(rows[0].ends_with(",ok"));
    assert!(rows[1].contains("error"));
}
