use smd_wasm::Landscape;

#[test]
fn grid_marks_outside_points() {
    let l = Landscape::new("phase-retrieval", 12, 1).unwrap();
    let g = l.stationarity_grid(9, 10.0).unwrap();
    assert_eq!(g.len(), 81);
    // corners lie outside the feasible ball
    assert!(g[0].is_nan() && g[80].is_nan());
    let inner: Vec<f64> = g.iter().copied().filter(|v| v.is_finite()).collect();
    assert!(!inner.is_empty());
    assert!(inner.iter().all(|&v| v >= 0.0));
}

#[test]
fn prox_of_minimiser_is_itself() {
    let l = Landscape::new("quadratic", 4, 3).unwrap();
    // one prox step from the prox point cannot increase the measure
    let p = l.prox(0.3, -0.2).unwrap();
    assert!(p.delta >= 0.0);
    let q = l.prox(p.prox_point[0], p.prox_point[1]).unwrap();
    assert!(q.delta <= p.delta + 1e-12);
}

#[test]
fn trajectory_is_reproducible() {
    let l = Landscape::new("phase-retrieval", 12, 1).unwrap();
    let a = l.trajectory(0.5, 0.5, 300, 0.2, 7).unwrap();
    let b = l.trajectory(0.5, 0.5, 300, 0.2, 7).unwrap();
    assert_eq!(a.points, b.points);
    assert_eq!(a.points.len(), 600);
    assert!(a.r < 300);
    assert!(a.delta_r.is_finite());
}

#[test]
fn rejects_simplex_benchmark_and_bad_input() {
    assert!(Landscape::new("entropy-toy", 3, 1).is_err());
    assert!(Landscape::new("nope", 3, 1).is_err());
    let l = Landscape::new("phase-retrieval", 12, 1).unwrap();
    assert!(l.stationarity_grid(1, 1.0).is_err());
    assert!(l.trajectory(0.0, 0.0, 0, 0.2, 0).is_err());
}
