use proptest::prelude::*;

use thermovisc::{
    build_mesh, f_star, lq_norm, truncate, truncate_field, Nonlinearity, ScalarField64,
};

fn field(n: usize, values: Vec<f64>) -> ScalarField64 {
    ScalarField64::new(build_mesh(n).unwrap(), values).unwrap()
}

fn values(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50.0..50.0f64, (n + 1) * (n + 1))
}

proptest! {
    #[test]
    fn truncation_is_bounded_and_idempotent(r in -1e3..1e3f64, k in 1e-3..1e2f64) {
        let t = truncate(r, k);
        prop_assert!(t.abs() <= k);
        prop_assert_eq!(truncate(t, k), t);
        prop_assert!(t * r >= 0.0);
    }

    #[test]
    fn truncated_field_is_bounded(v in values(4), k in 0.1..20.0f64) {
        let t = truncate_field(&field(4, v), k).unwrap();
        prop_assert!(t.max_abs() <= k);
    }

    #[test]
    fn lq_norm_is_homogeneous(v in values(4), s in -10.0..10.0f64, q in 1.0..6.0f64) {
        let f = field(4, v);
        let a = lq_norm(&f.scaled(s), q).unwrap();
        let b = s.abs() * lq_norm(&f, q).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * (1.0 + b));
    }

    #[test]
    fn lq_norm_grows_with_q_on_unit_area(v in values(4), q in 1.0..5.0f64, dq in 0.0..3.0f64) {
        let f = field(4, v);
        let lo = lq_norm(&f, q).unwrap();
        let hi = lq_norm(&f, q + dq).unwrap();
        prop_assert!(lo <= hi * (1.0 + 1e-12));
    }

    #[test]
    fn envelope_is_monotone(m in 0.1..5.0f64, alpha in 0.1..1.0f64, r in 0.0..10.0f64, dr in 0.0..10.0f64) {
        let f = Nonlinearity::power(m, alpha, 0);
        let a = f_star(&f, r).unwrap().value;
        let b = f_star(&f, r + dr).unwrap().value;
        prop_assert!(a <= b);
        prop_assert!(a >= f.eval(r).norm() * (1.0 - 1e-12));
    }
}
