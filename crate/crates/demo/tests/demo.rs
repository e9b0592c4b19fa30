use ductwave_demo::{dispersion, field, reflections};

#[test]
fn dispersion_rows() {
    let t = dispersion(0.3, 5.0, 6).unwrap();
    assert_eq!(t.len(), 30);
    let kinds: Vec<f64> = t.chunks(5).map(|r| r[4]).collect();
    assert_eq!(kinds, vec![1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    // mode 0 at M = 0.3, k = 5: β± = k/(±1 + M)
    assert!((t[0] - 5.0 / 1.3).abs() < 1e-12 && (t[2] + 5.0 / 0.7).abs() < 1e-12);
    assert!(dispersion(1.2, 5.0, 3).unwrap_err().contains("0 <= M < 1"));
}

#[test]
fn reflections_shrink_with_layer() {
    let short = reflections(0.3, 5.0, 5.0, 0.5, 4).unwrap();
    let long = reflections(0.3, 5.0, 5.0, 1.5, 4).unwrap();
    for n in 0..4 {
        assert!(long[3 * n] < short[3 * n], "mode {n}");
        let bound = long[3 * n + 2];
        assert!(bound.is_nan() || long[3 * n + 1] <= bound);
    }
}

#[test]
fn field_decays_through_layer() {
    let (nx1, nx2) = (41, 5);
    let p = field(0.3, 5.0, 20.0, 1.0, nx1, nx2).unwrap();
    assert_eq!(p.len(), nx1 * nx2);
    let column_max = |i: usize| (0..nx2).map(|j| p[j * nx1 + i]).fold(0.0, f64::max);
    // window centre against the Dirichlet ends of the layer
    assert!(column_max(nx1 / 2) > 0.01);
    assert!(column_max(0) < 1e-12 && column_max(nx1 - 1) < 1e-12);
    assert!(field(0.3, 5.0, 20.0, 0.7, nx1, nx2).is_err());
}
