use mintime_core::{adjoint_rhs, bloch_rhs, pontryagin_h, switching_functions, Adjoint, Bloch, Params};
use proptest::prelude::*;

fn ball_point() -> impl Strategy<Value = [f64; 3]> {
    (0.0..=1.0f64, -1.0..=1.0f64, 0.0..std::f64::consts::TAU).prop_map(|(r, c, phi)| {
        let s = (1.0 - c * c).sqrt();
        [r * s * phi.cos(), r * s * phi.sin(), r * c]
    })
}

fn sphere_point() -> impl Strategy<Value = [f64; 3]> {
    (-1.0..=1.0f64, 0.0..std::f64::consts::TAU).prop_map(|(c, phi)| {
        let s = (1.0 - c * c).sqrt();
        [s * phi.cos(), s * phi.sin(), c]
    })
}

fn costate() -> impl Strategy<Value = [f64; 3]> {
    prop::array::uniform3(-3.0..3.0f64)
}

fn paper() -> Params {
    Params::new(1.0, 2e-3, 1e-2).unwrap()
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn h_is_costate_dot_field(x in ball_point(), p in costate(), v in -10.0..=10.0f64, n in 0.0..=1.0f64) {
        let (b, q) = (Bloch::try_from_array(x).unwrap(), Adjoint::try_from_array(p).unwrap());
        let h = pontryagin_h(&q, &b, v, n, &paper());
        let direct = dot(&p, &bloch_rhs(&b, v, n, &paper()));
        prop_assert!((h - direct).abs() <= 1e-12 * (1.0 + direct.abs()));
    }

    #[test]
    fn switching_functions_are_control_derivatives_of_h(
        x in ball_point(), p in costate(), v in -9.0..=9.0f64, n in 0.1..=0.9f64,
    ) {
        let (b, q) = (Bloch::try_from_array(x).unwrap(), Adjoint::try_from_array(p).unwrap());
        let params = paper();
        let h = |v: f64, n: f64| pontryagin_h(&q, &b, v, n, &params);
        let step = 1e-6;
        let dv = (h(v + step, n) - h(v - step, n)) / (2.0 * step);
        let dn = (h(v, n + step) - h(v, n - step)) / (2.0 * step);
        let (kv, kn) = switching_functions(&q, &b, &params);
        // H is affine in each control, so only rounding separates the two.
        let noise = 1e-15 * h(v, n).abs().max(1.0) / step;
        prop_assert!((dv - kv).abs() <= 1e-6 * kv.abs() + noise, "{dv} vs {kv}");
        prop_assert!((dn - kn).abs() <= 1e-6 * kn.abs() + noise, "{dn} vs {kn}");
    }

    #[test]
    fn costate_equation_is_minus_state_gradient_of_h(p in costate(), v in -10.0..=10.0f64, n in 0.0..=1.0f64) {
        let q = Adjoint::try_from_array(p).unwrap();
        let params = paper();
        // H is affine in x; read off dH/dx from unit differences.
        let h = |y: [f64; 3]| pontryagin_h(&q, &Bloch::try_from_array(y).unwrap(), v, n, &params);
        let origin = h([0.0; 3]);
        let unit = |k: usize| {
            let mut e = [0.0; 3];
            e[k] = 0.5;
            2.0 * (h(e) - origin)
        };
        let rhs = adjoint_rhs(&q, v, n, &params);
        for (k, r) in rhs.iter().enumerate() {
            prop_assert!((r + unit(k)).abs() <= 1e-12, "component {k}");
        }
    }

    #[test]
    fn pairing_of_state_and_costate_grows_at_rate_gamma_p3(
        x in ball_point(), p in costate(), v in -10.0..=10.0f64, n in 0.0..=1.0f64,
    ) {
        let (b, q) = (Bloch::try_from_array(x).unwrap(), Adjoint::try_from_array(p).unwrap());
        let params = paper();
        let rate = dot(&adjoint_rhs(&q, v, n, &params), &x) + dot(&p, &bloch_rhs(&b, v, n, &params));
        prop_assert!((rate - params.gamma() * p[2]).abs() <= 1e-12);
    }

    #[test]
    fn boundary_dissipativity(x in sphere_point(), v in -10.0..=10.0f64, n in 0.0..=1.0f64) {
        let params = paper();
        let g = params.gamma();
        let f = bloch_rhs(&Bloch::try_from_array(x).unwrap(), v, n, &params);
        let expected = -g / 2.0 * (1.0 - x[2]).powi(2) - g * n * (1.0 + x[2] * x[2]);
        prop_assert!((dot(&x, &f) - expected).abs() <= 1e-12);
        prop_assert!(dot(&x, &f) <= 1e-15);
    }
}
