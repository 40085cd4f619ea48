use std::fs;

use contact_wave::experiments::{flag_registry, run_scenario, Scenario, ScenarioKind};
use contact_wave::io::{emit_series, params_hash, IoError, SnapshotFile, SCHEMA_VERSION};

fn short_wave() -> Scenario {
    let mut s = Scenario::preset(ScenarioKind::PerturbedWave);
    s.t_final = 1.0;
    s.sweep.extension = 1.0;
    s.grid = contact_wave::experiments::GridSpec::Auto { dx: 0.4 };
    s.snapshot_times = vec![0.0, 1.0];
    s
}

#[test]
fn stationary_series_are_zero() {
    let dir = tempfile::tempdir().unwrap();
    let rec = run_scenario(&Scenario::preset(ScenarioKind::Stationary));
    let out = emit_series(&rec, dir.path()).unwrap();
    for key in ["l2", "h1", "linf", "rel_entropy", "dissipation_accum"] {
        let path = dir.path().join("series").join(format!("{key}.csv"));
        assert!(out.series.contains(&path));
        let text = fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,value"));
        let mut rows = 0;
        for line in lines {
            let (_, v) = line.split_once(',').unwrap();
            assert_eq!(v.parse::<f64>().unwrap(), 0.0, "{key}: {line}");
            rows += 1;
        }
        assert!(rows > 10);
    }
}

#[test]
fn summary_lists_every_flag_once() {
    let dir = tempfile::tempdir().unwrap();
    let s = short_wave();
    let rec = run_scenario(&s);
    let out = emit_series(&rec, dir.path()).unwrap();
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.summary).unwrap()).unwrap();
    assert_eq!(summary["schema_version"], SCHEMA_VERSION);
    assert_eq!(summary["params_hash"], params_hash(&s));
    let ids: Vec<&str> = summary["flags"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["id"].as_str().unwrap())
        .collect();
    let expected: Vec<&str> = flag_registry(s.kind).iter().map(|f| f.id).collect();
    assert_eq!(ids, expected);
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let s = short_wave();
    let ea = emit_series(&run_scenario(&s), a.path()).unwrap();
    let eb = emit_series(&run_scenario(&s), b.path()).unwrap();
    assert_eq!(ea.series.len(), eb.series.len());
    assert_eq!(ea.snapshots.len(), 2);
    let files = ea.series.iter().chain(&ea.snapshots).chain([&ea.summary]);
    for pa in files {
        let pb = b.path().join(pa.strip_prefix(a.path()).unwrap());
        assert_eq!(
            fs::read(pa).unwrap(),
            fs::read(&pb).unwrap(),
            "{}",
            pa.display()
        );
    }
}

#[test]
fn snapshot_round_trips_and_checks_version() {
    let dir = tempfile::tempdir().unwrap();
    let s = short_wave();
    let rec = run_scenario(&s);
    let out = emit_series(&rec, dir.path()).unwrap();
    let file = SnapshotFile::read(&out.snapshots[1]).unwrap();
    let snap = &rec.snapshots[1];
    assert_eq!(file.t, snap.t);
    assert_eq!(file.params_hash, params_hash(&s));
    assert_eq!(file.column("theta").unwrap(), snap.state.theta.as_slice());
    assert_eq!(
        file.column("zeta").unwrap(),
        snap.perturbation.zeta.as_slice()
    );
    assert_eq!(file.column("U").unwrap(), snap.profile.u.as_slice());

    let text = fs::read_to_string(&out.snapshots[1]).unwrap();
    let bumped = text.replacen("# schema_version=1", "# schema_version=2", 1);
    match SnapshotFile::parse(&bumped, &out.snapshots[1]) {
        Err(IoError::SchemaMismatch {
            found: 2,
            expected: 1,
            ..
        }) => {}
        other => panic!("expected a schema mismatch, got {other:?}"),
    }
}

#[test]
fn write_errors_carry_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let rec = run_scenario(&Scenario::preset(ScenarioKind::Stationary));
    let err = emit_series(&rec, &blocker).unwrap_err();
    assert!(err.to_string().contains("file"), "{err}");
}
