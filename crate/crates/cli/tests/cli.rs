use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenario(name: &str) -> PathBuf {
    [env!("CARGO_MANIFEST_DIR"), "..", "..", "scenarios", &format!("{name}.toml")]
        .iter()
        .collect()
}

fn radloc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_radloc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn small_localize(out: &Path, seed: &str) -> Output {
    radloc(&[
        "localize",
        "--scenario",
        s(&scenario("lsi_c02")),
        "--frames",
        "15",
        "--n-particles",
        "200",
        "--seed",
        seed,
        "--history",
        "--out",
        s(out),
    ])
}

#[test]
fn localize_is_reproducible_and_echoes_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(small_localize(&a, "7").status.success());
    assert!(small_localize(&b, "7").status.success());
    let pa = fs::read(a.join("particles.csv")).unwrap();
    assert_eq!(pa, fs::read(b.join("particles.csv")).unwrap());
    // 15 steps of 200 particles plus a header.
    assert_eq!(String::from_utf8(pa).unwrap().lines().count(), 15 * 200 + 1);

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["seed"], 7);
    assert_eq!(summary["r_series"].as_array().unwrap().len(), 15);
    assert!(a.join("scatter.svg").exists());
    assert!(!a.join("detectors.csv").exists());

    let c = dir.path().join("c");
    assert!(small_localize(&c, "8").status.success());
    assert_ne!(fs::read(a.join("particles.csv")).unwrap(), fs::read(c.join("particles.csv")).unwrap());
}

#[test]
fn mobile_localize_writes_tracks() {
    let dir = tempfile::tempdir().unwrap();
    let out = radloc(&[
        "localize",
        "--scenario",
        s(&scenario("lsi_c02")),
        "--frames",
        "5",
        "--n-particles",
        "100",
        "--mobility",
        "mean-pursuit",
        "--out",
        s(dir.path()),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let tracks = fs::read_to_string(dir.path().join("detectors.csv")).unwrap();
    assert!(tracks.starts_with("step,detector_id,x,y"));
}

#[test]
fn simulate_then_replay_with_background() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    let out = radloc(&[
        "simulate",
        "--scenario",
        s(&scenario("lsi_a04")),
        "--seed",
        "3",
        "--background",
        "40",
        "--out",
        s(&sim),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = dir.path().join("run");
    let out = radloc(&[
        "replay",
        "--scenario",
        s(&scenario("lsi_a04")),
        "--counts",
        s(&sim.join("counts.csv")),
        "--background",
        s(&sim.join("background.csv")),
        "--seed",
        "3",
        "--out",
        s(&run),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run.join("summary.json")).unwrap()).unwrap();
    let err = summary["final_error_m"].as_f64().unwrap();
    assert!(err < 1.5, "replay error {err}");
}

#[test]
fn diagnose_reports_zero_mse_for_constant() {
    let out = radloc(&[
        "diagnose",
        "--scenario",
        s(&scenario("lsi_c02")),
        "--frames",
        "3",
        "--phi",
        "one",
        "--n",
        "10,20",
        "--seeds",
        "2",
        "--reference-n",
        "50",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["mse_values"], serde_json::json!([0.0, 0.0]));
    assert!(report["loglog_slope"].is_null());
}

#[test]
fn exit_codes_follow_error_class() {
    let dir = tempfile::tempdir().unwrap();

    let bad = dir.path().join("bad.toml");
    let text = fs::read_to_string(scenario("lsi_c02")).unwrap().replace("n_particles = ", "n_particles = -");
    fs::write(&bad, text).unwrap();
    let out = radloc(&["localize", "--scenario", s(&bad), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));

    let out = radloc(&["localize", "--scenario", s(&scenario("lsi_c02")), "--n-particles", "0", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));

    let counts = dir.path().join("gap.csv");
    let mut rows = String::from("time_s,detector_id,counts\n");
    for (t, ids) in [(1, 1..=22), (2, 1..=21)] {
        for id in ids {
            rows.push_str(&format!("{t},{id},5\n"));
        }
    }
    fs::write(&counts, rows).unwrap();
    let out = radloc(&[
        "replay",
        "--scenario",
        s(&scenario("lsi_c02")),
        "--counts",
        s(&counts),
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));

    let out = radloc(&["localize", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}
