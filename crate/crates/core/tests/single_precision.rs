use mintime_core::{
    compute_gradient, integrate_forward, BlochVector, ControlBounds, ControlGrid, FixedTimeProblem, SystemParams,
};

fn problem<S: mintime_core::Scalar>() -> FixedTimeProblem<S> {
    let l = S::lit;
    FixedTimeProblem {
        params: SystemParams::new(l(1.0), l(2e-3), l(1e-2)).unwrap(),
        bounds: ControlBounds::new(l(-10.0), l(10.0), l(1.0)).unwrap(),
        x0: BlochVector::new(l(0.0), l(0.0), l(-1.0)).unwrap(),
        x_target: BlochVector::new(l(0.0), l(0.0), l(0.5)).unwrap(),
        t_final: l(20.0),
        intervals: 40,
        substeps: 25,
    }
}

fn controls<S: mintime_core::Scalar>() -> ControlGrid<S> {
    let v = (0..40).map(|i| S::lit((i as f64 * 0.7).sin() * 8.0)).collect();
    let n = (0..40).map(|i| S::lit(0.5 + 0.5 * (i as f64 * 0.3).cos())).collect();
    ControlGrid::new(S::lit(20.0), v, n).unwrap()
}

#[test]
fn f32_tracks_f64() {
    let (p32, p64) = (problem::<f32>(), problem::<f64>());
    let (u32_, u64_) = (controls::<f32>(), controls::<f64>());
    let t32 = integrate_forward(&p32.x0, &u32_, &p32.params, p32.substeps).unwrap();
    let t64 = integrate_forward(&p64.x0, &u64_, &p64.params, p64.substeps).unwrap();
    for (a, b) in t32.final_state().as_array().iter().zip(t64.final_state().as_array()) {
        assert!((f64::from(*a) - b).abs() < 1e-4, "{a} vs {b}");
    }
    let (g32, g64) = (compute_gradient(&u32_, &p32).unwrap(), compute_gradient(&u64_, &p64).unwrap());
    assert!((f64::from(g32.cost) - g64.cost).abs() < 1e-4);
    let scale = g64.gv.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    for (a, b) in g32.gv.iter().zip(&g64.gv) {
        assert!((f64::from(*a) - b).abs() <= 1e-3 * scale);
    }
}
