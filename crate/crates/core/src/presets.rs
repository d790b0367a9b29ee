//! Frozen, reproducible test problems: small-twist normal-form inputs in one
//! and two degrees of freedom, the quadratic integrable oscillator for drift
//! runs, the standard map, and canonical resonance-geometry setups.
//!
//! The frequency offsets were found by numerical search maximising the
//! smallest denominator |1 - e^{i k.omega}| over the mode cutoff, then frozen
//! so every run sees identical inputs.

use num_complex::Complex64;

use crate::domain::{DomainSpec, FrequencyMap};
use crate::error::Result;
use crate::fourier::FourierGenFunction;
use crate::genmap::ImplicitMap;
use crate::geometry::{ResonanceGeometry, Schedule};
use crate::lattice::Lattice;
use crate::normalform::NormalFormParams;
use crate::poly::PolyCoeff;
use crate::stability::IntegrableSystem;

/// A ready-to-run normal-form problem: generating function, frequency map
/// and validated parameters.
#[derive(Debug, Clone)]
pub struct NormalFormPreset {
    pub name: &'static str,
    pub f: FourierGenFunction,
    pub omega: FrequencyMap,
    pub params: NormalFormParams,
    pub epsilon: f64,
}

/// Nonresonant frequency for the 1-D preset (cutoff K = 6): smallest
/// denominator 2|sin(k w/2)| is 0.75 over 1 <= k <= 6.
pub const OMEGA_NONRES1: f64 = 4.48799;

/// Nonresonant pair for the 2-D preset (cutoff K = 8): smallest denominator
/// 0.1531 over 0 < |k|_1 <= 8.
pub const OMEGA_NONRES2: [f64; 2] = [1.3792356, 6.4364329];

/// 1-D small-twist preset: F0 = w0 x + lambda x^2/2 on (0.5, 1.5) with
/// rho = (0.4, 4), cutoff K = 6, alpha = 0.25, beta = lambda = 0.01 and the
/// perturbation eps (cos y + cos 2y / 2), eps = 1e-8.
pub fn nonres1() -> Result<NormalFormPreset> {
    let dom = DomainSpec::new(vec![(0.5, 1.5)], 0.4, 4.0)?;
    let c = dom.center();
    let lambda = 0.01;
    let epsilon = 1e-8;
    let f0 = PolyCoeff::from_terms(
        1,
        2,
        c.clone(),
        [
            (vec![1u32], Complex64::new(OMEGA_NONRES1, 0.0)),
            (vec![2u32], Complex64::new(lambda / 2.0, 0.0)),
        ],
    )?;
    let mut f = FourierGenFunction::integrable(f0, 6, dom.clone())?;
    f.add_cos(&[1], &PolyCoeff::constant(1, Complex64::new(epsilon, 0.0), c.clone()))?;
    f.add_cos(&[2], &PolyCoeff::constant(1, Complex64::new(epsilon / 2.0, 0.0), c.clone()))?;
    let omega = FrequencyMap::new(
        vec![PolyCoeff::from_terms(
            1,
            1,
            c.clone(),
            [
                (vec![0u32], Complex64::new(OMEGA_NONRES1, 0.0)),
                (vec![1u32], Complex64::new(lambda, 0.0)),
            ],
        )?],
        lambda,
        lambda,
    )?;
    let params = NormalFormParams::new(Lattice::trivial(1), 6, 0.25, lambda, &dom)?;
    Ok(NormalFormPreset {
        name: "nonres1",
        f,
        omega,
        params,
        epsilon,
    })
}

/// 2-D small-twist preset: box (0.5, 1.5)^2, rho = (0.25, 3), cutoff K = 8,
/// alpha = 0.12, beta = lambda = 0.005, perturbation
/// eps (cos y1 + cos y2 + cos(y1+y2)/2), eps = 1e-8.
pub fn nonres2() -> Result<NormalFormPreset> {
    let dom = DomainSpec::new(vec![(0.5, 1.5), (0.5, 1.5)], 0.25, 3.0)?;
    let c = dom.center();
    let lambda = 0.005;
    let epsilon = 1e-8;
    let f0 = PolyCoeff::from_terms(
        2,
        2,
        c.clone(),
        [
            (vec![1u32, 0], Complex64::new(OMEGA_NONRES2[0], 0.0)),
            (vec![0u32, 1], Complex64::new(OMEGA_NONRES2[1], 0.0)),
            (vec![2u32, 0], Complex64::new(lambda / 2.0, 0.0)),
            (vec![0u32, 2], Complex64::new(lambda / 2.0, 0.0)),
        ],
    )?;
    let mut f = FourierGenFunction::integrable(f0, 8, dom.clone())?;
    let amp = |v: f64| PolyCoeff::constant(2, Complex64::new(v, 0.0), c.clone());
    f.add_cos(&[1, 0], &amp(epsilon))?;
    f.add_cos(&[0, 1], &amp(epsilon))?;
    f.add_cos(&[1, 1], &amp(epsilon / 2.0))?;
    let comp = |w0: f64, axis: u32| {
        let exps = if axis == 0 { vec![1u32, 0] } else { vec![0u32, 1] };
        PolyCoeff::from_terms(
            2,
            1,
            c.clone(),
            [
                (vec![0u32, 0], Complex64::new(w0, 0.0)),
                (exps, Complex64::new(lambda, 0.0)),
            ],
        )
    };
    let omega = FrequencyMap::new(
        vec![comp(OMEGA_NONRES2[0], 0)?, comp(OMEGA_NONRES2[1], 1)?],
        lambda,
        lambda,
    )?;
    let params = NormalFormParams::new(Lattice::trivial(2), 8, 0.12, lambda, &dom)?;
    Ok(NormalFormPreset {
        name: "nonres2",
        f,
        omega,
        params,
        epsilon,
    })
}

/// H(I) = I^2/2 + I, the quadratic oscillator used for the drift scaling
/// study (omega = I + 1).
pub fn quad1() -> IntegrableSystem {
    let h = PolyCoeff::from_terms(
        1,
        2,
        vec![0.0],
        [
            (vec![2u32], Complex64::new(0.5, 0.0)),
            (vec![1u32], Complex64::new(1.0, 0.0)),
        ],
    )
    .expect("static coefficients");
    IntegrableSystem::new("quad1", h)
}

/// The standard map as an implicitly generated map, F = x^2/2 + eps cos y
/// on (-2, 2).
pub fn standard_map(eps: f64, tol: f64, max_iter: usize) -> Result<ImplicitMap> {
    let dom = DomainSpec::new(vec![(-2.0, 2.0)], 0.2, 1.0)?;
    let c = dom.center();
    let f0 = PolyCoeff::from_terms(1, 2, c.clone(), [(vec![2u32], Complex64::new(0.5, 0.0))])?;
    let mut f = FourierGenFunction::integrable(f0, 1, dom)?;
    f.add_cos(&[1], &PolyCoeff::constant(1, Complex64::new(eps, 0.0), c))?;
    ImplicitMap::new(f, 0.2, (0.1, 0.1), tol, max_iter)
}

/// Closed form of the same map: x^ = x + eps sin y, y^ = y + x^.
pub fn standard_map_explicit(eps: f64, x: f64, y: f64) -> (f64, f64) {
    let x_new = x + eps * y.sin();
    (x_new, y + x_new)
}

/// Identity frequency map omega(x) = x on [lo, hi]^n with the canonical
/// zone schedule (m = M = 1).
pub fn geometry_identity(
    n: usize,
    k: i64,
    sigma1: f64,
    interval: (f64, f64),
) -> Result<ResonanceGeometry> {
    let dom = DomainSpec::new(vec![interval; n], 0.0, 0.0)?;
    let comps = (0..n)
        .map(|j| PolyCoeff::coordinate(n, j, dom.center()))
        .collect();
    let omega = FrequencyMap::new(comps, 1.0, 1.0)?;
    let schedule = Schedule::canonical(n, k, 1.0, 1.0, sigma1)?;
    ResonanceGeometry::new(omega, dom, schedule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normalform::{nonresonance_margin, normal_form, sample_states};

    fn complex_samples(dom: &DomainSpec, per_axis: usize) -> Vec<Vec<Complex64>> {
        dom.real_grid(per_axis)
            .into_iter()
            .map(|x| x.into_iter().map(|v| Complex64::new(v, 0.0)).collect())
            .collect()
    }

    #[test]
    fn nonres1_margin_clears_alpha() {
        let p = nonres1().unwrap();
        let m = nonresonance_margin(
            &p.omega,
            &complex_samples(p.f.dom(), 41),
            &p.params.lattice,
            p.params.k,
        );
        assert!(m > p.params.alpha + 0.05, "margin {m}");
    }

    #[test]
    fn nonres2_margin_clears_alpha() {
        let p = nonres2().unwrap();
        let m = nonresonance_margin(
            &p.omega,
            &complex_samples(p.f.dom(), 21),
            &p.params.lattice,
            p.params.k,
        );
        assert!(m > p.params.alpha + 0.01, "margin {m}");
    }

    #[test]
    fn nonres_presets_fit_smallness() {
        for p in [nonres1().unwrap(), nonres2().unwrap()] {
            let n = p.f.dom().dim();
            let norm = p.f.vectorfield_norm(p.f.dom(), p.params.c);
            let bound = p.params.alpha * p.f.dom().rho1
                / (NormalFormParams::c_tilde(n)
                    * p.params.a_factor(p.f.dom().rho1)
                    * p.params.k as f64
                    * p.f.dom().rho2);
            assert!(norm > 0.0 && norm <= bound, "{}: {norm:.3e} vs {bound:.3e}", p.name);
            assert_eq!(p.params.n_steps, 2, "{}", p.name);
        }
    }

    #[test]
    fn nonres1_normal_form_contracts() {
        let p = nonres1().unwrap();
        let res = normal_form(&p.f, &p.omega, &p.params).unwrap();
        for rec in &res.step_log {
            assert!(rec.norm_r_new <= rec.norm_r / std::f64::consts::E * (1.0 + 1e-9));
        }
        let last = res.step_log.last().unwrap();
        assert!(last.norm_r_new <= res.remainder_bound(p.params.k, p.f.dom().rho2));
        let _ = sample_states(p.f.dom(), 3, 4);
    }

    #[test]
    #[ignore = "several-second run; covered again by the acceptance suite"]
    fn nonres2_normal_form_contracts() {
        let p = nonres2().unwrap();
        let res = normal_form(&p.f, &p.omega, &p.params).unwrap();
        for rec in &res.step_log {
            eprintln!("{rec:?}");
            assert!(rec.norm_r_new <= rec.norm_r / std::f64::consts::E * (1.0 + 1e-9));
        }
        let last = res.step_log.last().unwrap();
        assert!(last.norm_r_new <= res.remainder_bound(p.params.k, p.f.dom().rho2));
    }

    #[test]
    fn standard_map_matches_closed_form() {
        let eps = 1e-3;
        let map = standard_map(eps, 1e-15, 200).unwrap();
        let (mut x, mut y) = (0.21, 1.3);
        for _ in 0..200 {
            let (xi, yi) = map.apply_raw(&[x], &[y]).unwrap();
            let (xe, ye) = standard_map_explicit(eps, x, y);
            assert!((xi[0] - xe).abs() < 1e-14 && (yi[0] - ye).abs() < 1e-14);
            x = xe;
            y = ye.rem_euclid(std::f64::consts::TAU);
        }
    }

    #[test]
    fn quad1_frequency() {
        let sys = quad1();
        let w = sys.omega(&[0.7]);
        assert!((w[0] - 1.7).abs() < 1e-15);
    }

    #[test]
    fn geometry_identity_builds() {
        let geo = geometry_identity(1, 3, 0.1, (5.8, 6.8)).unwrap();
        assert!(geo.schedule.nonoverlap_ok());
        let label = geo.classify_point(&[std::f64::consts::TAU]);
        assert_eq!(label.rank(), 1);
    }
}
