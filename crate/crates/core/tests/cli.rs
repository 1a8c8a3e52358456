use std::path::Path;
use std::process::Command;

const TINY: &str = r#"{
  "streams": 2, "tx_atoms": 4, "rx_atoms": 4, "tx_layers": 2, "rx_layers": 2,
  "trials": 2, "layer_axis": [1, 2], "thickness_axis": [0.05, 0.1],
  "rmax": {"max_outer_iters": 5}
}"#;

fn simrate(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_simrate")).args(args).output().unwrap()
}

fn write_config(dir: &Path) -> String {
    let path = dir.join("tiny.json");
    std::fs::write(&path, TINY).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn sweep_output_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let mut outputs = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let out = dir.path().join(name);
        let status = simrate(&["sweep-layers", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "9"]);
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        outputs.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let text = String::from_utf8(outputs[0].clone()).unwrap();
    assert!(text.starts_with("axis_name,axis_value,trial,seed,algo,rate_bps_hz,interference,outer_iters,wall_ms\n"));
    assert_eq!(text.lines().count(), 1 + 2 * 2 * 3);
    let agg = std::fs::read_to_string(dir.path().join("a_aggregate.csv")).unwrap();
    assert!(agg.starts_with("axis_value,algo,mean_rate,std_rate,n\n"));
}

#[test]
fn different_seed_changes_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let a = simrate(&["sweep-thickness", "--config", &cfg, "--seed", "1", "--algo", "imin"]);
    let b = simrate(&["sweep-thickness", "--config", &cfg, "--seed", "2", "--algo", "imin"]);
    assert!(a.status.success() && b.status.success());
    assert_ne!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.lines().skip(1).all(|l| l.starts_with("thickness,") && l.contains(",imin,")));
}

#[test]
fn run_once_writes_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let trace = dir.path().join("trace.csv");
    let out = simrate(&["run-once", "--config", &cfg, "--algo", "hybrid", "--trace", trace.to_str().unwrap(), "--threads", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(trace).unwrap();
    assert!(text.starts_with("iter,rate,grad_norm_tx,grad_norm_rx,g\n"));
    assert!(text.lines().count() >= 2);
}

#[test]
fn self_check_passes() {
    let out = simrate(&["self-check"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.lines().all(|l| l.starts_with("ok")));
}

#[test]
fn bad_config_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"layers": 3}"#).unwrap();
    let out = simrate(&["run-once", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown field"));
    let out = simrate(&["run-once", "--algo", "pg"]);
    assert!(!out.status.success());
}
