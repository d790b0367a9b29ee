//! Property tests for the weighted Fourier algebra: norm axioms,
//! homogeneity, domain monotonicity and reality preservation under
//! randomized mode content.

use num_complex::Complex64;
use proptest::prelude::*;

use symlab_core::{DomainSpec, FourierGenFunction, PolyCoeff};

fn genfun(dom: &DomainSpec, modes: &[(i64, f64, f64)], k_rep: i64) -> FourierGenFunction {
    let c = dom.center();
    let mut f = FourierGenFunction::integrable(PolyCoeff::zero(1, 0, c.clone()), k_rep, dom.clone())
        .expect("valid genfun");
    for &(k, cos_amp, sin_amp) in modes {
        f.add_cos(&[k], &PolyCoeff::constant(1, Complex64::new(cos_amp, 0.0), c.clone()))
            .expect("cos mode");
        f.add_sin(&[k], &PolyCoeff::constant(1, Complex64::new(sin_amp, 0.0), c.clone()))
            .expect("sin mode");
    }
    f
}

fn mode_strategy() -> impl Strategy<Value = Vec<(i64, f64, f64)>> {
    proptest::collection::vec(
        (1i64..=4, -1e-3..1e-3f64, -1e-3..1e-3f64),
        1..4,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn triangle_inequality(a in mode_strategy(), b in mode_strategy(), rho2 in 0.5..2.0f64) {
        let dom = DomainSpec::new(vec![(0.5, 1.5)], 0.3, rho2).unwrap();
        let fa = genfun(&dom, &a, 4);
        let fb = genfun(&dom, &b, 4);
        let sum = fa.add_pert(&fb);
        let na = fa.weighted_norm(&dom);
        let nb = fb.weighted_norm(&dom);
        let ns = sum.weighted_norm(&dom);
        prop_assert!(ns <= na + nb + 1e-12 * (na + nb));
    }

    #[test]
    fn homogeneity(a in mode_strategy(), s in -3.0..3.0f64) {
        let dom = DomainSpec::new(vec![(0.5, 1.5)], 0.3, 1.0).unwrap();
        let f = genfun(&dom, &a, 4);
        let n = f.weighted_norm(&dom);
        let ns = f.scale_pert(s).weighted_norm(&dom);
        prop_assert!((ns - s.abs() * n).abs() <= 1e-12 * (1.0 + n));
    }

    #[test]
    fn monotone_in_rho2(a in mode_strategy(), lo in 0.5..1.0f64, step in 0.1..1.0f64) {
        let small = DomainSpec::new(vec![(0.5, 1.5)], 0.3, lo).unwrap();
        let large = DomainSpec::new(vec![(0.5, 1.5)], 0.3, lo + step).unwrap();
        let f = genfun(&large, &a, 4);
        prop_assert!(f.weighted_norm(&small) <= f.weighted_norm(&large) + 1e-15);
    }

    #[test]
    fn vectorfield_norm_monotone_in_c(a in mode_strategy(), c1 in 0.05..0.5f64, dc in 0.01..0.5f64) {
        let dom = DomainSpec::new(vec![(0.5, 1.5)], 0.3, 1.0).unwrap();
        let f = genfun(&dom, &a, 4);
        prop_assert!(f.vectorfield_norm(&dom, c1) <= f.vectorfield_norm(&dom, c1 + dc) + 1e-15);
    }

    #[test]
    fn reality_on_real_states(a in mode_strategy(), x in 0.6..1.4f64, y in 0.0..6.28f64) {
        let dom = DomainSpec::new(vec![(0.5, 1.5)], 0.3, 1.0).unwrap();
        let f = genfun(&dom, &a, 4);
        let v = f.eval_pert(
            &[Complex64::new(x, 0.0)],
            &[Complex64::new(y, 0.0)],
        );
        prop_assert!(v.im.abs() <= 1e-14);
    }

    #[test]
    fn projections_partition_the_norm(a in mode_strategy()) {
        let dom = DomainSpec::new(vec![(0.5, 1.5)], 0.3, 1.0).unwrap();
        let f = genfun(&dom, &a, 4);
        let cut = 2;
        let low = f.project_low(cut);
        let tail = f.project_tail(cut);
        let n = f.weighted_norm(&dom);
        let split = low.weighted_norm(&dom) + tail.weighted_norm(&dom);
        prop_assert!((n - split).abs() <= 1e-12 * (1.0 + n));
    }
}
