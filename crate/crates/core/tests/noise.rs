use mnslab::noise::generate_path;

#[test]
fn quadratic_variation_over_many_paths() {
    let horizon: f64 = 2.0;
    let dt = 1.0 / 256.0;
    let steps = horizon / dt;
    // Σ ΔB² has mean T and variance 2 T dt per path
    let se = (2.0 * horizon * dt / 100.0).sqrt();
    for q in 0..2 {
        let mean = (0..100)
            .map(|seed| generate_path(seed, horizon, dt, 2).unwrap().quadratic_variation()[q])
            .sum::<f64>()
            / 100.0;
        assert!((mean - horizon).abs() < 3.0 * se, "axis {q}: {mean} vs {horizon} (se {se}, steps {steps})");
    }
}

#[test]
fn restrictions_are_consistent() {
    let p = generate_path(9, 1.0, 1.0 / 64.0, 2).unwrap();
    let a = p.restrict(1.0 / 16.0).unwrap();
    let b = p.restrict(1.0 / 32.0).unwrap().restrict(1.0 / 16.0).unwrap();
    // regrouping the fine sums changes only round-off
    for k in 0..a.steps() {
        for q in 0..2 {
            assert!((a.increment(k)[q] - b.increment(k)[q]).abs() < 1e-15);
        }
    }
    let (ea, ep) = (a.value_at(a.steps()), p.value_at(p.steps()));
    assert!((ea[0] - ep[0]).abs() < 1e-14 && (ea[1] - ep[1]).abs() < 1e-14);
    assert!(p.restrict(3.0 / 64.0).is_err());
}
