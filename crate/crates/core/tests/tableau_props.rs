use proptest::prelude::*;
use stabpoly::exec::Exec;
use stabpoly::polynomial::{disk_polynomial_pe, StabilityPolynomial};
use stabpoly::rk::{
    boundary_samples, build_tableau, default_anchor, deserialize_tableau, internal_stability_polynomials,
    internal_stability_with, scalar_stability_function, serialize_tableau, ssp_coefficient, BuildOptions,
};
use stabpoly::Complex64;

fn poly(half: usize, order: u8, scale: f64) -> StabilityPolynomial {
    let pe = disk_polynomial_pe(2 * half, order).unwrap().scaled(scale);
    StabilityPolynomial::new(pe, order, 0.01).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn tableau_reproduces_polynomial(
        half in 2usize..14,
        order in 1u8..=2,
        scale in 0.5f64..2.0,
        negative in any::<bool>(),
        grouping in any::<bool>(),
        re in -1.0f64..0.0,
        im in -1.0f64..1.0,
    ) {
        let p = poly(half, order, scale);
        let opts = BuildOptions { allow_negative_beta: negative, lebedev_grouping: grouping, ..Default::default() };
        let t = build_tableau(&p, &opts).unwrap();
        let z = Complex64::new(re, im) * (2 * half) as f64 * scale;
        let (a, b) = (scalar_stability_function(&t, z), p.eval(z));
        prop_assert!((a - b).norm() <= 1e-9 * b.norm().max(1.0));
        prop_assert!((internal_stability_polynomials(&t, z)[0] - b).norm() <= 1e-9 * b.norm().max(1.0));
        prop_assert_eq!(ssp_coefficient(&t), 0.0);
    }

    #[test]
    fn rows_are_convex_in_alpha(half in 2usize..14, order in 1u8..=2) {
        let t = build_tableau(&poly(half, order, 1.0), &BuildOptions::default()).unwrap();
        for (row, v) in t.rows().iter().zip(t.v()) {
            let sum: f64 = v + row.iter().map(|c| c.alpha).sum::<f64>();
            prop_assert!((sum - 1.0).abs() <= 1e-12);
            prop_assert!(row.iter().all(|c| (0.0..=1.0).contains(&c.alpha)));
        }
    }

    #[test]
    fn serialization_round_trips(half in 2usize..14, order in 1u8..=2) {
        let t = build_tableau(&poly(half, order, 1.0), &BuildOptions::default()).unwrap();
        let back = deserialize_tableau(&serialize_tableau(&t)).unwrap();
        prop_assert_eq!(back, t);
    }
}

#[test]
fn internal_stability_is_execution_independent() {
    let p = poly(16, 2, 1.0);
    let t = build_tableau(&p, &BuildOptions::default()).unwrap();
    let samples = boundary_samples(&p, default_anchor(&p), 300).unwrap();
    let a = internal_stability_with(&t, &samples, Exec::Sequential);
    let b = internal_stability_with(&t, &samples, Exec::Parallel);
    assert_eq!(a.m_tilde.to_bits(), b.m_tilde.to_bits());
    assert_eq!(a.per_stage, b.per_stage);
}
