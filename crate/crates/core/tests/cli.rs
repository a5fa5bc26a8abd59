use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn plcnoise(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plcnoise")).args(args).output().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn synth_then_analyse() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.csv");
    let o = plcnoise(&["synth", "-o", p(&trace), "--ticks", "2000", "--set", "synth.frequencies=40,400,700"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(&trace).unwrap().lines().count(), 1 + 3 * 2000);

    let out = dir.path().join("fitout");
    let o = plcnoise(&["fit", p(&trace), "--output", p(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("fit.json").is_file());
    assert!(!out.join("bursts.json").exists());

    // the fitted model feeds straight back into synthesis
    let again = dir.path().join("again.plnz");
    let o = plcnoise(&["synth", "-o", p(&again), "--model", p(&out.join("fit.json")), "--ticks", "5"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::metadata(&again).unwrap().len(), 16 + 12 * 5 * 776);
}

#[test]
fn subcommands_select_stages() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.plnz");
    plcnoise(&["synth", "-o", p(&trace), "--ticks", "800", "--set", "synth.frequencies=10,500"]);
    for (cmd, file) in [
        ("qa", "qa.json"),
        ("spectrum", "spectrum.json"),
        ("stationarity", "stationarity.json"),
        ("dependence", "dependence.json"),
        ("bursts", "bursts.json"),
    ] {
        let out = dir.path().join(cmd);
        let o = plcnoise(&[cmd, p(&trace), "-o", p(&out), "--set", "moving.window=100"]);
        assert_eq!(o.status.code(), Some(0), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(out.join(file).is_file());
        assert!(out.join("manifest.json").is_file());
    }
}

#[test]
fn exit_code_two_on_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r");
    assert_eq!(plcnoise(&["all", "x.csv", "-o", p(&out), "--set", "no.such.key=1"]).status.code(), Some(2));
    assert_eq!(plcnoise(&["all", "x.csv", "-o", p(&out), "--set", "acf.alpha=2"]).status.code(), Some(2));
    let cfg = dir.path().join("bad.conf");
    fs::write(&cfg, "seed = 1\nstages = qa, nonsense\n").unwrap();
    let o = plcnoise(&["all", "x.csv", "--config", p(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
    // no input at all
    assert_eq!(plcnoise(&["qa", "-o", p(&out)]).status.code(), Some(2));
    // unparsable flags
    assert_eq!(plcnoise(&["qa", "--threads", "many"]).status.code(), Some(2));
}

#[test]
fn exit_code_three_on_ingest_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r");
    let o = plcnoise(&["all", p(&dir.path().join("missing.plnz")), "-o", p(&out)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(out.join("manifest.json").is_file());

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "timestamp_s,freq_index,level_dbuv\n0,1,50\n1,9999,50\n").unwrap();
    assert_eq!(plcnoise(&["all", p(&bad), "-o", p(&out)]).status.code(), Some(3));
}

#[test]
fn exit_code_four_on_stage_failure() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.csv");
    plcnoise(&["synth", "-o", p(&trace), "--ticks", "50", "--set", "synth.frequencies=3"]);
    let out = dir.path().join("r");
    let o = plcnoise(&["stationarity", p(&trace), "-o", p(&out), "--set", "stationarity.chunk_lengths=100"]);
    assert_eq!(o.status.code(), Some(4));
    let manifest = fs::read_to_string(out.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"failed\""));
}

#[test]
fn thread_override_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.csv");
    plcnoise(&["synth", "-o", p(&trace), "--ticks", "100", "--set", "synth.frequencies=3"]);
    let out = dir.path().join("r");
    let o = Command::new(env!("CARGO_BIN_EXE_plcnoise"))
        .args(["qa", p(&trace), "-o", p(&out)])
        .env("PLCNOISE_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["threads"], 2);

    let o = Command::new(env!("CARGO_BIN_EXE_plcnoise"))
        .args(["qa", p(&trace), "-o", p(&out)])
        .env("PLCNOISE_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}
