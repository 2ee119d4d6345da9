use mintime_core::{bloch_rhs, default_substeps, integrate_forward, rk4_step, Bloch, Controls, Params, StepMap};
use proptest::prelude::*;

fn paper() -> Params {
    Params::new(1.0, 2e-3, 1e-2).unwrap()
}

fn ball_point() -> impl Strategy<Value = [f64; 3]> {
    (0.0..=1.0f64, -1.0..=1.0f64, 0.0..std::f64::consts::TAU).prop_map(|(r, c, phi)| {
        let s = (1.0 - c * c).sqrt();
        [r * s * phi.cos(), r * s * phi.sin(), r * c]
    })
}

fn sphere_point() -> impl Strategy<Value = [f64; 3]> {
    ball_point().prop_map(|x| {
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        if r < 1e-3 {
            [0.0, 0.0, -1.0]
        } else {
            [x[0] / r, x[1] / r, x[2] / r]
        }
    })
}

fn controls(max_intervals: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1..=max_intervals).prop_flat_map(|k| {
        (
            prop::collection::vec(-10.0..=10.0f64, k),
            prop::collection::vec(0.0..=1.0f64, k),
        )
    })
}

/// Free evolution in closed form.
fn free(x0: [f64; 3], t: f64, p: &Params) -> [f64; 3] {
    let (w, g) = (p.omega(), p.gamma());
    let decay = (-g / 2.0 * t).exp();
    let (s, c) = (w * t).sin_cos();
    [
        decay * (c * x0[0] + s * x0[1]),
        decay * (c * x0[1] - s * x0[0]),
        1.0 + (x0[2] - 1.0) * (-g * t).exp(),
    ]
}

fn max_err(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trajectories_stay_in_the_ball(x0 in ball_point(), (v, n) in controls(40), t in 1.0..200.0f64) {
        let u = Controls::new(t, v, n).unwrap();
        let steps = default_substeps(u.dt());
        let traj = integrate_forward(&Bloch::try_from_array(x0).unwrap(), &u, &paper(), steps).unwrap();
        prop_assert!(traj.max_norm() <= 1.0 + 1e-6);
    }

    #[test]
    fn purity_decays_no_faster_than_the_contraction_bound(x0 in sphere_point(), (v, n) in controls(40), t in 1.0..400.0f64) {
        let p = paper();
        let u = Controls::new(t, v, n).unwrap();
        let steps = default_substeps(u.dt());
        let traj = integrate_forward(&Bloch::try_from_array(x0).unwrap(), &u, &p, steps).unwrap();
        for (time, x) in traj.times.iter().zip(&traj.states) {
            let bound = 4.0 / 3.0 * (-3.0 * p.gamma() * time).exp() - 1.0 / 3.0;
            prop_assert!(x.norm() >= bound - 1e-9, "t = {time}: {} < {bound}", x.norm());
        }
    }

    #[test]
    fn free_dynamics_follow_the_closed_form(x0 in ball_point(), t in 1.0..400.0f64) {
        let p = paper();
        let intervals = (t / 0.25).ceil() as usize;
        let u = Controls::constant(t, intervals, 0.0, 0.0).unwrap();
        let traj = integrate_forward(&Bloch::try_from_array(x0).unwrap(), &u, &p, 50).unwrap();
        for (time, x) in traj.times.iter().zip(&traj.states).step_by(37) {
            prop_assert!(max_err(x.as_array(), &free(x0, *time, &p)) <= 1e-8);
        }
    }

    #[test]
    fn step_map_is_one_rk4_step(x0 in ball_point(), v in -10.0..=10.0f64, n in 0.0..=1.0f64, h in 1e-3..0.5f64) {
        let p = paper();
        let map = StepMap::rk4(v, n, &p, h);
        let direct = rk4_step(|y: &[f64; 3]| bloch_rhs(&Bloch::try_from_array(*y).unwrap(), v, n, &p), &x0, h);
        prop_assert!(max_err(&map.forward(&x0), &direct) <= 1e-14);
    }

    #[test]
    fn observed_rk4_order_is_four(x0 in sphere_point(), v in -10.0..=10.0f64, n in 0.0..=1.0f64) {
        let p = paper();
        let x = Bloch::try_from_array(x0).unwrap();
        let u = Controls::constant(20.0, 1, v, n).unwrap();
        let run = |steps| *integrate_forward(&x, &u, &p, steps).unwrap().final_state().as_array();
        let reference = run(5120);
        let coarse = max_err(&run(40), &reference);
        let fine = max_err(&run(80), &reference);
        prop_assume!(fine > 1e-11);
        let order = (coarse / fine).log2();
        prop_assert!((3.5..=4.5).contains(&order), "order {order}");
    }
}
