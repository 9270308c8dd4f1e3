use std::path::Path;
use std::process::{Command, Output};

fn funcmark(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_funcmark"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = funcmark(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn embed_sphere(dir: &Path) {
    ok(
        dir,
        &[
            "embed", "--primitive", "sphere", "--message", "b5a3", "--delta", "0.004", "--bake-dims", "64",
            "--out", "wm.fmgd", "--report", "bake.json",
        ],
    );
}

#[test]
fn embed_extract_detect_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    embed_sphere(d);
    assert!(d.join("wm.fmgd.layout.json").exists());
    let bake: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("bake.json")).unwrap()).unwrap();
    assert_eq!(bake["failures"], 0);
    assert!(bake["version"].as_str().unwrap().starts_with("funcmark"));
    assert_eq!(bake["config"]["command"]["embed"]["message"], "b5a3");

    ok(d, &["extract", "--field", "wm.fmgd", "--res", "64", "--out", "m.obj"]);
    ok(d, &["--seed", "4", "sample", "--field", "wm.fmgd", "-n", "300", "--out", "p.ply"]);

    ok(d, &["detect", "--layout", "wm.fmgd.layout.json", "--points", "p.ply", "--report", "det.json"]);
    let det: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("det.json")).unwrap()).unwrap();
    for key in ["n_points", "matches", "z_score", "threshold", "verdict", "bit_accuracy", "decoded_message_hex", "undecodable_partitions"] {
        assert!(det.get(key).is_some(), "missing {key}");
    }
    assert_eq!(det["verdict"], "reject");
    assert_eq!(det["n_points"], 300);

    let out = ok(d, &["decode", "--layout", "wm.fmgd.layout.json", "--mesh", "m.obj"]);
    let dec: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(dec["bit_accuracy"].as_f64().unwrap() > 0.8, "{dec}");
    assert_eq!(dec["decoded_message_hex"], "b5a3");
}

#[test]
fn unwatermarked_mesh_accepts_null() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    embed_sphere(d);
    ok(d, &["bake", "--primitive", "sphere", "--dims", "32", "--out", "plain.fmgd"]);
    ok(d, &["sample", "--field", "plain.fmgd", "-n", "200", "--out", "plain.ply"]);
    let out = funcmark(d, &["detect", "--layout", "wm.fmgd.layout.json", "--points", "plain.ply"]);
    // A plain grid of the sphere should not look watermarked, except by chance.
    let rep: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let expected = if rep["verdict"] == "accept" { 3 } else { 0 };
    assert_eq!(code(&out), expected);
}

#[test]
fn embed_from_grid_checks_fingerprint() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["bake", "--primitive", "torus", "--dims", "64", "--out", "orig.fmgd"]);
    ok(d, &["bake", "--primitive", "sphere", "--dims", "16", "--out", "other.fmgd"]);
    ok(
        d,
        &[
            "embed", "--field", "orig.fmgd", "--message", "b:1100", "--ns", "16", "--delta", "0.004", "--bake-dims", "64",
            "--out", "wm.fmgd", "--layout", "secret.json",
        ],
    );
    ok(d, &["extract", "--field", "wm.fmgd", "--res", "64", "--iso", "dc", "--out", "m.obj"]);
    ok(d, &["decode", "--original", "orig.fmgd", "--layout", "secret.json", "--mesh", "m.obj"]);
    let out = funcmark(d, &["decode", "--original", "other.fmgd", "--layout", "secret.json", "--mesh", "m.obj"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("fingerprint"));
    // No original at all: the secret records none for grid inputs.
    let out = funcmark(d, &["decode", "--layout", "secret.json", "--mesh", "m.obj"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn attack_and_sample_are_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["bake", "--primitive", "sphere", "--dims", "32", "--out", "s.fmgd"]);
    ok(d, &["extract", "--field", "s.fmgd", "--res", "32", "--out", "s.obj"]);
    for name in ["a", "b"] {
        ok(d, &["--seed", "9", "attack", "--mesh", "s.obj", "--spec", "gaussian:0.005", "--out", &format!("{name}.obj")]);
        ok(d, &["--seed", "9", "sample", "--field", "s.fmgd", "-n", "100", "--out", &format!("{name}.ply")]);
    }
    assert_eq!(std::fs::read(d.join("a.obj")).unwrap(), std::fs::read(d.join("b.obj")).unwrap());
    assert_eq!(std::fs::read(d.join("a.ply")).unwrap(), std::fs::read(d.join("b.ply")).unwrap());
    ok(d, &["--seed", "10", "attack", "--mesh", "s.obj", "--spec", "gaussian:0.005", "--out", "c.obj"]);
    assert_ne!(std::fs::read(d.join("a.obj")).unwrap(), std::fs::read(d.join("c.obj")).unwrap());
}

#[test]
fn align_recovers_rotation() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(
        d,
        &[
            "embed", "--primitive", "blob", "--message", "b5a3", "--delta", "0.004", "--bake-dims", "64",
            "--out", "wm.fmgd",
        ],
    );
    ok(d, &["extract", "--field", "wm.fmgd", "--res", "64", "--out", "m.obj"]);
    ok(d, &["attack", "--mesh", "m.obj", "--spec", "combined:rotate:70:1,2,0;scale:1.1", "--out", "r.obj"]);
    ok(d, &["align", "--wm", "wm.fmgd", "--mesh", "r.obj", "--out", "a.obj", "--report", "al.json"]);
    let out = ok(d, &["metrics", "--a", "m.obj", "--b", "a.obj", "--samples", "2000"]);
    let m: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(m["chamfer"].as_f64().unwrap() < 1e-3, "{m}");
    let al: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("al.json")).unwrap()).unwrap();
    let s = al["transform"]["scale"].as_f64().unwrap();
    assert!((s - 1.0 / 1.1).abs() < 1e-2, "{al}");
}

#[test]
fn metrics_keys() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["bake", "--primitive", "sphere", "--dims", "32", "--out", "s.fmgd"]);
    ok(d, &["extract", "--field", "s.fmgd", "--res", "32", "--out", "a.obj"]);
    ok(d, &["extract", "--field", "s.fmgd", "--res", "48", "--out", "b.obj"]);
    ok(d, &["metrics", "--a", "a.obj", "--b", "b.obj", "--samples", "500", "--out", "m.json"]);
    let m: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("m.json")).unwrap()).unwrap();
    for key in ["chamfer", "p2s_a_to_b", "p2s_b_to_a", "normal_diff", "version", "config"] {
        assert!(m.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn invalid_input_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    assert_eq!(code(&funcmark(d, &["extract", "--field", "missing.fmgd", "--out", "x.obj"])), 2);
    assert_eq!(code(&funcmark(d, &["bake", "--primitive", "cube", "--out", "x.fmgd"])), 2);
    assert_eq!(code(&funcmark(d, &["frobnicate"])), 2);
    std::fs::write(d.join("junk.fmgd"), b"not a grid").unwrap();
    assert_eq!(code(&funcmark(d, &["extract", "--field", "junk.fmgd", "--out", "x.obj"])), 2);
    std::fs::write(d.join("bad.obj"), "v 0 0 0\nf 1 2 3\n").unwrap();
    let out = funcmark(d, &["attack", "--mesh", "bad.obj", "--spec", "smooth:1", "--out", "x.obj"]);
    assert_eq!(code(&out), 2);
    ok(d, &["bake", "--primitive", "sphere", "--dims", "16", "--out", "s.fmgd"]);
    let out = funcmark(d, &["embed", "--field", "s.fmgd", "--message", "zz", "--out", "w.fmgd"]);
    assert_eq!(code(&out), 2);
    let out = funcmark(d, &["embed", "--field", "s.fmgd", "--message", "ab", "--delta", "-1", "--out", "w.fmgd"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn numerical_failure_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    // The whole domain is inside this sphere, so there is no surface to sample.
    ok(d, &["bake", "--primitive", "sphere:3", "--dims", "8", "--out", "inside.fmgd"]);
    let out = funcmark(d, &["sample", "--field", "inside.fmgd", "-n", "10", "--out", "p.ply"]);
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
    let out = funcmark(d, &["extract", "--field", "inside.fmgd", "--res", "16", "--out", "m.obj"]);
    assert_eq!(code(&out), 4);
}

#[test]
fn bench_quick_writes_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    std::fs::write(
        d.join("sc.json"),
        r#"{"shapes": ["sphere"], "bake_dims": 48, "resolutions": [32], "message_lengths": [16],
            "deltas": [0.004], "delta": 0.004, "attacks": ["quantize:8"], "attack_resolution": 32,
            "detection_points": [20], "detection_deltas": [0.004], "trials": 3, "z_points": [10, 50]}"#,
    )
    .unwrap();
    ok(d, &["bench", "--scenario", "sc.json", "--out-dir", "out"]);
    let z = std::fs::read_to_string(d.join("out/z_curve.csv")).unwrap();
    assert!(z.starts_with("shape,n_points,trials,mean_z,std_z"));
    let rep: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("out/report.json")).unwrap()).unwrap();
    assert_eq!(rep["scenario"]["trials"], 3);
    assert_eq!(code(&funcmark(d, &["bench", "--scenario", "missing.json", "--out-dir", "o"])), 2);
}
