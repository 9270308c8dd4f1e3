use funcmark::bench::{run_bench, BenchScenario};

#[test]
fn quick_scenario_is_deterministic_and_sane() {
    let sc = BenchScenario::quick();
    let a = run_bench(&sc).unwrap();
    let b = run_bench(&sc).unwrap();
    assert_eq!(a.csv_tables().unwrap(), b.csv_tables().unwrap());
    for (name, csv) in a.csv_tables().unwrap() {
        println!("== {name}\n{csv}");
    }

    assert_eq!(a.scenario, sc);
    assert!(a.version.starts_with("funcmark "));

    // z grows with the number of sampled points.
    let z: Vec<f64> = a.z_curve.iter().map(|r| r.mean_z).collect();
    assert!(z.windows(2).all(|w| w[1] > w[0]), "{z:?}");

    // Stronger watermark decodes better.
    let acc: Vec<f64> = a.accuracy_vs_delta.iter().map(|r| r.bit_accuracy).collect();
    assert!(acc.windows(2).all(|w| w[1] >= w[0]), "{acc:?}");

    assert_eq!(a.accuracy_vs_isosurfacer.len(), 2 * sc.resolutions.len());
    assert_eq!(a.accuracy_vs_attack.len(), sc.attacks.len() + 1);
    assert_eq!(a.detection.len(), sc.detection_points.len() * sc.detection_deltas.len());
}

#[test]
fn report_files_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let sc = BenchScenario {
        resolutions: vec![32],
        deltas: vec![0.004],
        attacks: vec!["smooth:1".into()],
        attack_resolution: 32,
        detection_points: vec![20],
        z_points: vec![10, 100],
        trials: 4,
        ..BenchScenario::quick()
    };
    run_bench(&sc).unwrap().write(dir.path()).unwrap();
    for f in ["accuracy_vs_resolution", "detection", "accuracy_vs_delta", "accuracy_vs_isosurfacer", "accuracy_vs_attack", "z_curve"] {
        let text = std::fs::read_to_string(dir.path().join(format!("{f}.csv"))).unwrap();
        assert!(text.lines().count() >= 2, "{f}: {text}");
    }
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(json["scenario"]["trials"], 4);
    assert!(json["version"].as_str().unwrap().starts_with("funcmark"));
}
