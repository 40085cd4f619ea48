use contact_wave::experiments::{
    far_field_entropy_bounds, geometric_times, nonlinear_linear_gap, run_coupled, run_scenario,
    GridSpec, Scenario, ScenarioKind,
};
use contact_wave::lagrangian::InitialData;
use contact_wave::{Grid, PhysParams};

#[test]
fn stationary_state_stays_exact() {
    let rec = run_scenario(&Scenario::preset(ScenarioKind::Stationary));
    assert!(rec.passed(), "{:?}", rec.failed_flags().collect::<Vec<_>>());
    assert_eq!(rec.steps, 10_000);
}

#[test]
fn identical_scenarios_give_identical_records() {
    let mut s = Scenario::preset(ScenarioKind::PerturbedWave);
    s.t_final = 2.0;
    s.sweep.extension = 1.0;
    s.grid = GridSpec::Auto { dx: 0.4 };
    s.initial = InitialData {
        shape: contact_wave::lagrangian::PerturbationShape::RandomSmooth,
        ..s.initial
    };
    s.seed = 42;
    let a = run_scenario(&s);
    let b = run_scenario(&s);
    assert!(a.failure.is_none(), "{:?}", a.failure);
    assert_eq!(a, b);
    for (fa, fb) in a.flags.iter().zip(&b.flags) {
        assert_eq!(fa.measured.to_bits(), fb.measured.to_bits());
    }
    s.seed = 43;
    assert_ne!(run_scenario(&s).energy, a.energy);
}

#[test]
fn residual_converges_at_second_order() {
    let rec = run_scenario(&Scenario::preset(ScenarioKind::ResidualCheck));
    assert!(rec.passed(), "{:?}", rec.failed_flags().collect::<Vec<_>>());
    let table = &rec.tables["convergence"];
    let r = table.column("residual").unwrap();
    assert!(r.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn gap_shrinks_faster_than_amplitude() {
    let p = PhysParams::default();
    let (big, _) = nonlinear_linear_gap(&p, 1e-2, 2.0, 0.1, 1_000_000).unwrap();
    let (small, _) = nonlinear_linear_gap(&p, 1e-3, 2.0, 0.1, 1_000_000).unwrap();
    // gap is quadratic in the wave strength
    assert!(big / small > 50.0, "{big} vs {small}");
}

#[test]
fn coupled_run_lands_on_requested_times() {
    let p = PhysParams::default();
    let grid = Grid::new(30.0, 301).unwrap();
    let times = geometric_times(0.5, 2.0, 3.0);
    let run = run_coupled(
        &p,
        &grid,
        &InitialData::gaussian([0.02; 3], 0.0, 1.0),
        &times,
        &[3.0],
        100_000,
    )
    .unwrap();
    let got: Vec<f64> = run.samples.iter().map(|s| s.report.t).collect();
    assert_eq!(got, times);
    assert_eq!(run.snapshots.len(), 1);
    assert_eq!(run.snapshots[0].t, 3.0);
    let (c1, c2) = far_field_entropy_bounds(&p);
    for s in &run.samples {
        let ratio = s.report.rel_entropy / s.report.l2;
        assert!(ratio > c1 * 0.9 && ratio < c2, "{ratio}");
    }
}

#[test]
fn step_budget_is_reported() {
    let mut s = Scenario::preset(ScenarioKind::ProfileOnly);
    s.max_steps = 5;
    let rec = run_scenario(&s);
    assert!(rec.failure.is_some());
    assert!(rec.flags.iter().all(|f| !f.passed || !f.measured.is_nan()));
}
