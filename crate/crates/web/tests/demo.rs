use contact_wave_web::{nodes, theta0_curve, ProfileDemo, WaveDemo};

#[test]
fn curve_spans_far_field_states() {
    let x = nodes(200.0, 401).unwrap();
    let theta = theta0_curve(0.5, 9, 200.0, 401).unwrap();
    assert_eq!(x.len(), theta.len());
    assert!(theta.windows(2).all(|w| w[1] >= w[0]));
    assert!((theta[0] - 0.5).abs() < 0.05 && (theta[400] - 1.0).abs() < 0.05);
}

#[test]
fn profile_tracks_linear_approximation() {
    let mut demo = ProfileDemo::new(0.9, 9, 60.0, 481).unwrap();
    let before = demo.log_norms();
    demo.advance_to(5.0).unwrap();
    assert_eq!(demo.t(), 5.0);
    let after = demo.log_norms();
    assert!(after[0] < before[0]);
    let gap = demo
        .theta()
        .iter()
        .zip(demo.linear())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(gap < 0.02, "{gap}");
}

#[test]
fn wave_perturbation_decays() {
    let mut demo = WaveDemo::new(0.5, 0.05, 1.0, 40.0, 401).unwrap();
    let mut last = 0.0;
    for k in 1..=8 {
        last = demo.advance_to(k as f64 * 2.5).unwrap();
    }
    let h = demo.history();
    assert_eq!(h.len(), 18);
    let peak = h.iter().skip(1).step_by(2).cloned().fold(0.0, f64::max);
    assert!(last < 0.5 * peak, "{last} vs {peak}");
    assert_eq!(demo.perturbation_fields().unwrap().len(), 3 * 401);
}
