//! Symplectic maps defined implicitly by generating functions, near-identity
//! transformations, and the numerically recovered generating function of a
//! conjugated map.
//!
//! A generating function F(x^, y) = F0(x^) + f(x^, y) defines the map
//!   x^ = x - d_y f(x^, y),    y^ = y + omega(x^) + d_x f(x^, y),
//! solved by plain Picard iteration inside the contraction regime
//! |Df| <= delta_hat_c / 2, which is verified once at construction.

use num_complex::Complex64;
use rayon::prelude::*;
use std::collections::BTreeMap;

use crate::domain::{wrap_angle, ActionAngleState, DomainSpec};
use crate::error::{Error, Result};
use crate::fourier::FourierGenFunction;
use crate::poly::{ChebFit, PolyCoeff};

/// Picard iteration with stagnation detection: returns the best iterate and
/// its residual, erroring only if the best residual never reaches `tol`.
pub(crate) fn picard(
    initial: Vec<f64>,
    step: impl Fn(&[f64]) -> Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let mut cur = initial;
    let mut best = cur.clone();
    let mut best_res = f64::INFINITY;
    let mut stalled = 0;
    for _ in 0..max_iter {
        let next = step(&cur);
        let res: f64 = next
            .iter()
            .zip(&cur)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if res < best_res {
            best_res = res;
            best = next.clone();
            stalled = 0;
        } else {
            stalled += 1;
        }
        cur = next;
        if best_res <= tol && stalled >= 1 {
            // one extra confirming sweep after reaching tol
            break;
        }
        if stalled >= 4 {
            break;
        }
    }
    if best_res <= tol {
        Ok(best)
    } else {
        Err(Error::Divergence {
            iters: max_iter,
            residual: best_res,
            tol,
        })
    }
}

fn to_c(v: &[f64]) -> Vec<Complex64> {
    v.iter().map(|&x| Complex64::new(x, 0.0)).collect()
}

/// Per-component exact derivatives of a generating function, cached so hot
/// evaluation loops never re-differentiate.
#[derive(Debug, Clone)]
struct GradCache {
    d_action: Vec<FourierGenFunction>,
    d_angle: Vec<FourierGenFunction>,
    omega: Vec<PolyCoeff>,
}

impl GradCache {
    fn new(f: &FourierGenFunction) -> Self {
        let n = f.dim();
        Self {
            d_action: (0..n).map(|j| f.d_action(j).perturbation()).collect(),
            d_angle: (0..n).map(|j| f.d_angle(j)).collect(),
            omega: (0..n).map(|j| f.f0().derivative(j)).collect(),
        }
    }

    fn grad_action(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let xc = to_c(x);
        let yc = to_c(y);
        self.d_action
            .iter()
            .map(|g| g.eval_pert(&xc, &yc).re)
            .collect()
    }

    fn grad_angle(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let xc = to_c(x);
        let yc = to_c(y);
        self.d_angle
            .iter()
            .map(|g| g.eval_pert(&xc, &yc).re)
            .collect()
    }

    fn omega(&self, x: &[f64]) -> Vec<f64> {
        let xc = to_c(x);
        self.omega.iter().map(|w| w.eval(&xc).re).collect()
    }
}

/// The symplectic map generated by F(x^, y), valid on the construction
/// domain shrunk by the margin delta1.
#[derive(Debug, Clone)]
pub struct ImplicitMap {
    f: FourierGenFunction,
    grads: GradCache,
    pub tol: f64,
    pub max_iter: usize,
    margin: f64,
}

impl ImplicitMap {
    /// Verifies the contraction hypothesis |Df|_{G,rho,c} <= delta_hat_c / 2
    /// with delta_hat_c = min(delta1, c * delta2) before accepting the map.
    pub fn new(
        f: FourierGenFunction,
        c: f64,
        delta: (f64, f64),
        tol: f64,
        max_iter: usize,
    ) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(Error::parameter("tol", "must be > 0"));
        }
        if max_iter == 0 {
            return Err(Error::parameter("max_iter", "must be >= 1"));
        }
        if !(c > 0.0) {
            return Err(Error::parameter("c", "must be > 0"));
        }
        let (d1, d2) = delta;
        if !(d1 > 0.0 && d2 > 0.0 && d1 <= f.dom().rho1 && d2 <= f.dom().rho2) {
            return Err(Error::parameter(
                "delta",
                "must satisfy 0 < delta <= (rho1, rho2)",
            ));
        }
        let delta_hat = d1.min(c * d2);
        let norm = f.vectorfield_norm(f.dom(), c);
        if norm > delta_hat / 2.0 {
            return Err(Error::hypothesis(
                "contraction",
                format!("|Df| = {norm:.3e} exceeds delta_hat_c/2 = {:.3e}", delta_hat / 2.0),
            ));
        }
        let grads = GradCache::new(&f);
        Ok(Self {
            f,
            grads,
            tol,
            max_iter,
            margin: d1,
        })
    }

    pub fn genfun(&self) -> &FourierGenFunction {
        &self.f
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn omega_at(&self, x: &[f64]) -> Vec<f64> {
        self.grads.omega(x)
    }

    fn check_domain(&self, x: &[f64]) -> Result<()> {
        if !self.f.dom().contains_with_margin(x, self.margin) {
            return Err(Error::Domain(format!(
                "action point {x:?} outside the map's box shrunk by {:.3e}",
                self.margin
            )));
        }
        Ok(())
    }

    /// Forward map without angle wrapping (needed for finite-difference
    /// Jacobians and generating-function recovery).
    pub fn apply_raw(&self, x: &[f64], y: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_domain(x)?;
        let x_new = picard(
            x.to_vec(),
            |xh| {
                let g = self.grads.grad_angle(xh, y);
                x.iter().zip(&g).map(|(xi, gi)| xi - gi).collect()
            },
            self.tol,
            self.max_iter,
        )?;
        self.check_domain(&x_new)?;
        let omega = self.grads.omega(&x_new);
        let gx = self.grads.grad_action(&x_new, y);
        let y_new = y
            .iter()
            .zip(omega.iter().zip(&gx))
            .map(|(yi, (wi, gi))| yi + wi + gi)
            .collect();
        Ok((x_new, y_new))
    }

    /// Inverse map without wrapping: given (x^, y^) recover (x, y).
    pub fn apply_inverse_raw(&self, x_new: &[f64], y_new: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_domain(x_new)?;
        let omega = self.grads.omega(x_new);
        let y = picard(
            y_new
                .iter()
                .zip(&omega)
                .map(|(yi, wi)| yi - wi)
                .collect(),
            |y| {
                let gx = self.grads.grad_action(x_new, y);
                y_new
                    .iter()
                    .zip(omega.iter().zip(&gx))
                    .map(|(yi, (wi, gi))| yi - wi - gi)
                    .collect()
            },
            self.tol,
            self.max_iter,
        )?;
        let gy = self.grads.grad_angle(x_new, &y);
        let x = x_new.iter().zip(&gy).map(|(xi, gi)| xi + gi).collect();
        Ok((x, y))
    }

    pub fn apply_map(&self, s: &ActionAngleState) -> Result<ActionAngleState> {
        let (x, y) = self.apply_raw(s.actions(), s.angles())?;
        ActionAngleState::new(x, y)
    }

    pub fn apply_inverse(&self, s: &ActionAngleState) -> Result<ActionAngleState> {
        let (x, y) = self.apply_inverse_raw(s.actions(), s.angles())?;
        ActionAngleState::new(x, y)
    }
}

/// Near-identity canonical transformation generated by chi(a, y):
///   x = a + d_a chi(a, y),  phi = y + d_y chi(a, y)  ... written in the
/// mixed-variable convention x = a + d2 chi, phi = y + d1 chi with
/// chi = chi(action, angle). apply() maps (a, phi) -> (x, y).
#[derive(Debug, Clone)]
pub struct NearIdentityTransform {
    chi: FourierGenFunction,
    grads: GradCache,
    pub tol: f64,
    pub max_iter: usize,
}

impl NearIdentityTransform {
    /// Verifies |Dchi|_{G,rho,c} <= delta_hat_c / 2 at construction.
    pub fn new(
        chi: FourierGenFunction,
        c: f64,
        delta: (f64, f64),
        tol: f64,
        max_iter: usize,
    ) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(Error::parameter("tol", "must be > 0"));
        }
        let (d1, d2) = delta;
        if !(d1 > 0.0 && d2 > 0.0 && d1 <= chi.dom().rho1 && d2 <= chi.dom().rho2) {
            return Err(Error::parameter(
                "delta",
                "must satisfy 0 < delta <= (rho1, rho2)",
            ));
        }
        let delta_hat = d1.min(c * d2);
        let norm = chi.vectorfield_norm(chi.dom(), c);
        if norm > delta_hat / 2.0 {
            return Err(Error::hypothesis(
                "contraction",
                format!(
                    "|Dchi| = {norm:.3e} exceeds delta_hat_c/2 = {:.3e}",
                    delta_hat / 2.0
                ),
            ));
        }
        let grads = GradCache::new(&chi);
        Ok(Self {
            chi,
            grads,
            tol,
            max_iter,
        })
    }

    /// Identity transform (chi = 0) over the given domain.
    pub fn identity(dom: DomainSpec, tol: f64, max_iter: usize) -> Result<Self> {
        let f0 = PolyCoeff::zero(dom.dim(), 0, dom.center());
        let chi = FourierGenFunction::integrable(f0, 0, dom)?;
        let grads = GradCache::new(&chi);
        Ok(Self {
            chi,
            grads,
            tol,
            max_iter,
        })
    }

    pub fn genfun(&self) -> &FourierGenFunction {
        &self.chi
    }

    pub fn is_identity(&self) -> bool {
        self.chi.modes().is_empty()
    }

    /// Forward transform (a, phi) -> (x, y), unwrapped angles.
    pub fn apply_raw(&self, a: &[f64], phi: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        // v := phi - y solves v = d1 chi(a, phi - v)
        let n = a.len();
        let v = picard(
            vec![0.0; n],
            |v| {
                let y: Vec<f64> = phi.iter().zip(v).map(|(p, vi)| p - vi).collect();
                self.grads.grad_action(a, &y)
            },
            self.tol,
            self.max_iter,
        )?;
        let y: Vec<f64> = phi.iter().zip(&v).map(|(p, vi)| p - vi).collect();
        let gy = self.grads.grad_angle(a, &y);
        let x = a.iter().zip(&gy).map(|(ai, gi)| ai + gi).collect();
        Ok((x, y))
    }

    /// Inverse transform (x, y) -> (a, phi), unwrapped angles.
    pub fn apply_inverse_raw(&self, x: &[f64], y: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let a = picard(
            x.to_vec(),
            |a| {
                let gy = self.grads.grad_angle(a, y);
                x.iter().zip(&gy).map(|(xi, gi)| xi - gi).collect()
            },
            self.tol,
            self.max_iter,
        )?;
        let gx = self.grads.grad_action(&a, y);
        let phi = y.iter().zip(&gx).map(|(yi, gi)| yi + gi).collect();
        Ok((a, phi))
    }

    pub fn apply_transform(&self, s: &ActionAngleState) -> Result<ActionAngleState> {
        let (x, y) = self.apply_raw(s.actions(), s.angles())?;
        ActionAngleState::new(x, y)
    }

    pub fn apply_transform_inverse(&self, s: &ActionAngleState) -> Result<ActionAngleState> {
        let (a, phi) = self.apply_inverse_raw(s.actions(), s.angles())?;
        ActionAngleState::new(a, phi)
    }
}

/// Diagnostics from a generating-function recovery.
#[derive(Debug, Clone)]
pub struct RecoveryReport {
    /// max over (mode, action node) of |fit(node) - sampled value|
    pub fit_residual: f64,
    /// weighted-norm mass of angle modes beyond the retained cutoff
    pub discarded_tail: f64,
}

/// Recover the generating function of the conjugated map Phi^{-1} . T . Phi
/// on the given (shrunk-width) domain.
///
/// For each action Chebyshev node a^ and uniform angle node phi, the chain
///   (a, phi) --Phi--> (x, y) --T--> (x^, y^) --Phi^{-1}--> (a^, phi^)
/// is solved for the input action a producing the prescribed output action
/// a^ (outer Picard), and the new generating function value is assembled in
/// a cancellation-free regrouping: writing F~ = F0(a^) + G~,
///   G~ = [F0(x^) - F0(a^)] + (a - x^).d1 chi(a, y)
///        - d2 chi(a^, y^).(y^ - phi) + f(x^, y) + chi(a^, y^) - chi(a, y)
/// where every bracket is evaluated from quantities that are small products
/// (never differences of O(1) evaluations), and F0(x^) - F0(a^) uses the
/// exact gradient line integral with displacement d2 chi(a^, y^).
/// Modes are then recovered by discrete angle quadrature (4 k_out + 1 nodes
/// per axis) and Chebyshev least squares per mode.
pub fn conjugate_genfun(
    map: &ImplicitMap,
    phi: &NearIdentityTransform,
    new_dom: &DomainSpec,
    k_out: i64,
    degree: u32,
) -> Result<(FourierGenFunction, RecoveryReport)> {
    let n = new_dom.dim();
    let f = map.genfun();
    let chi = phi.genfun();
    let chain_tol = (map.tol.min(phi.tol)).min(1e-13);

    let fit = ChebFit::new(new_dom.intervals(), degree)?;
    let m = (4 * k_out + 1) as usize; // angle nodes per axis: exact modes to 2 k_out
    let angle_axes: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            (0..m)
                .map(|i| crate::domain::TAU * i as f64 / m as f64)
                .collect()
        })
        .collect();
    let angle_nodes = crate::domain::cartesian_product(&angle_axes);

    let f_grads = GradCache::new(f);
    let chi_grads = GradCache::new(chi);

    // G~ values: rows = action nodes, cols = angle nodes
    let values: Vec<Result<Vec<f64>>> = fit
        .nodes()
        .par_iter()
        .map(|a_hat| {
            angle_nodes
                .iter()
                .map(|phi_node| {
                    chain_value(
                        map, phi, &f_grads, &chi_grads, a_hat, phi_node, chain_tol,
                    )
                })
                .collect()
        })
        .collect();
    let mut rows = Vec::with_capacity(values.len());
    for row in values {
        rows.push(row?);
    }

    // discrete Fourier transform in the angles per action node
    let total_modes = angle_nodes.len();
    let freq_range: Vec<i64> = (-(2 * k_out)..=2 * k_out).collect();
    let mut freq_axes: Vec<Vec<i64>> = Vec::with_capacity(n);
    for _ in 0..n {
        freq_axes.push(freq_range.clone());
    }
    let freqs = cartesian_i64(&freq_axes);

    let mut modes = BTreeMap::new();
    let mut fit_residual: f64 = 0.0;
    let mut discarded_tail = 0.0;

    let coeffs: Vec<(Vec<i64>, Vec<Complex64>)> = freqs
        .par_iter()
        .map(|k| {
            let per_node: Vec<Complex64> = rows
                .iter()
                .map(|row| {
                    let mut sum = Complex64::ZERO;
                    for (val, y) in row.iter().zip(&angle_nodes) {
                        let phase: f64 = k
                            .iter()
                            .zip(y)
                            .map(|(&kj, &yj)| kj as f64 * yj)
                            .sum();
                        sum += Complex64::from_polar(*val, -phase);
                    }
                    sum / total_modes as f64
                })
                .collect();
            (k.clone(), per_node)
        })
        .collect();

    for (k, per_node) in coeffs {
        let l1: i64 = k.iter().map(|c| c.abs()).sum();
        if l1 <= k_out {
            let (p, res) = fit.fit(&per_node);
            fit_residual = fit_residual.max(res);
            if !p.is_zero() {
                modes.insert(k, p);
            }
        } else {
            let sup = per_node.iter().map(|c| c.norm()).fold(0.0, f64::max);
            discarded_tail += sup * (l1 as f64 * new_dom.rho2).exp();
        }
    }

    if fit_residual > 1e-8 {
        return Err(Error::Representation(format!(
            "mode fit residual {fit_residual:.3e} exceeds 1e-8; raise the polynomial degree or mode cutoff"
        )));
    }
    let out = FourierGenFunction::new(f.f0().clone(), modes, k_out, new_dom.clone())?;
    Ok((
        out,
        RecoveryReport {
            fit_residual,
            discarded_tail,
        },
    ))
}

/// One chain solve + stable evaluation of G~ at (a^, phi).
#[allow(clippy::too_many_arguments)]
fn chain_value(
    map: &ImplicitMap,
    phi_t: &NearIdentityTransform,
    f_grads: &GradCache,
    chi_grads: &GradCache,
    a_hat: &[f64],
    phi: &[f64],
    tol: f64,
) -> Result<f64> {
    let f = map.genfun();
    let chi = phi_t.genfun();

    // outer Picard on the input action a: the chain below sends a to an
    // output action a_hat'(a); correct a by the mismatch (the derivative of
    // a_hat' with respect to a is 1 + O(eps))
    let mut a = a_hat.to_vec();
    let mut chain = ChainState::default();
    let mut best_err = f64::INFINITY;
    for _ in 0..60 {
        chain = solve_inner_chain(f_grads, chi_grads, &a, phi, tol)?;
        let err: f64 = chain
            .a_hat_out
            .iter()
            .zip(a_hat)
            .map(|(p, q)| (p - q) * (p - q))
            .sum::<f64>()
            .sqrt();
        if err < best_err {
            best_err = err;
        }
        if err <= tol {
            break;
        }
        for (ai, (out, target)) in a.iter_mut().zip(chain.a_hat_out.iter().zip(a_hat)) {
            *ai += target - out;
        }
    }
    if best_err > tol.max(1e-11) {
        return Err(Error::Divergence {
            iters: 60,
            residual: best_err,
            tol,
        });
    }

    let ChainState {
        y,
        x_hat,
        y_hat,
        a_hat_out: _,
    } = chain;

    // stable regrouping; see the function-level comment
    let d2chi_at_new = chi_grads.grad_angle(a_hat, &y_hat); // d2 chi(a^, y^)
    let d1chi_at_old = chi_grads.grad_action(&a, &y); // d1 chi(a, y)
    let d2chi_old = chi_grads.grad_angle(&a, &y); // d2 chi(a, y)
    let d2f = f_grads.grad_angle(&x_hat, &y); // d2 f(x^, y)
    let d1f = f_grads.grad_action(&x_hat, &y); // d1 f(x^, y)
    let omega = f_grads.omega(&x_hat);

    // F0(x^) - F0(a^) via the exact line integral with the analytic
    // displacement x^ - a^ = d2 chi(a^, y^)
    let u = to_c(&d2chi_at_new);
    let base = to_c(a_hat);
    let tip: Vec<Complex64> = base.iter().zip(&u).map(|(b, du)| b + du).collect();
    let term_f0 = f.f0().eval_difference(&tip, &base).re;

    // (a - x^) . d1 chi(a, y) with a - x^ = d2 f(x^, y) - d2 chi(a, y)
    let term_cross1: f64 = d2f
        .iter()
        .zip(&d2chi_old)
        .zip(&d1chi_at_old)
        .map(|((df, dc), g)| (df - dc) * g)
        .sum();

    // -d2 chi(a^, y^) . (y^ - phi) with y^ - phi = omega(x^) + d1 f - d1 chi
    let term_cross2: f64 = -d2chi_at_new
        .iter()
        .zip(omega.iter().zip(d1f.iter().zip(&d1chi_at_old)))
        .map(|(dc, (w, (df, dchi)))| dc * (w + df - dchi))
        .sum::<f64>();

    let xc = to_c(&x_hat);
    let yc = to_c(&y);
    let term_pert = f.eval_pert(&xc, &yc).re;
    let term_chi_new = chi.eval_pert(&to_c(a_hat), &to_c(&y_hat)).re;
    let term_chi_old = chi.eval_pert(&to_c(&a), &yc).re;

    Ok(term_f0 + term_cross1 + term_cross2 + term_pert + term_chi_new - term_chi_old)
}

#[derive(Debug, Default, Clone)]
struct ChainState {
    y: Vec<f64>,
    x_hat: Vec<f64>,
    y_hat: Vec<f64>,
    a_hat_out: Vec<f64>,
}

/// Given the input action a and input angle phi, run (a, phi) through
/// Phi, T, Phi^{-1} with unwrapped angles, returning the intermediates.
fn solve_inner_chain(
    grads_f: &GradCache,
    grads_chi: &GradCache,
    a: &[f64],
    phi: &[f64],
    tol: f64,
) -> Result<ChainState> {
    // Phi: (a, phi) -> (x, y)
    let n = a.len();
    let v = picard(
        vec![0.0; n],
        |v| {
            let y: Vec<f64> = phi.iter().zip(v).map(|(p, vi)| p - vi).collect();
            grads_chi.grad_action(a, &y)
        },
        tol,
        60,
    )?;
    let y: Vec<f64> = phi.iter().zip(&v).map(|(p, vi)| p - vi).collect();
    let gy = grads_chi.grad_angle(a, &y);
    let x: Vec<f64> = a.iter().zip(&gy).map(|(ai, gi)| ai + gi).collect();

    // T: (x, y) -> (x^, y^)
    let x_hat = picard(
        x.clone(),
        |xh| {
            let g = grads_f.grad_angle(xh, &y);
            x.iter().zip(&g).map(|(xi, gi)| xi - gi).collect()
        },
        tol,
        60,
    )?;
    let omega = grads_f.omega(&x_hat);
    let gx = grads_f.grad_action(&x_hat, &y);
    let y_hat: Vec<f64> = y
        .iter()
        .zip(omega.iter().zip(&gx))
        .map(|(yi, (wi, gi))| yi + wi + gi)
        .collect();

    // Phi^{-1} action part: a^ = x^ - d2 chi(a^, y^)
    let a_hat_out = picard(
        x_hat.clone(),
        |ah| {
            let g = grads_chi.grad_angle(ah, &y_hat);
            x_hat.iter().zip(&g).map(|(xi, gi)| xi - gi).collect()
        },
        tol,
        60,
    )?;

    Ok(ChainState {
        y,
        x_hat,
        y_hat,
        a_hat_out,
    })
}

fn cartesian_i64(axes: &[Vec<i64>]) -> Vec<Vec<i64>> {
    let mut out: Vec<Vec<i64>> = vec![vec![]];
    for axis in axes {
        let mut next = Vec::with_capacity(out.len() * axis.len());
        for prefix in &out {
            for &v in axis {
                let mut p = prefix.clone();
                p.push(v);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

/// Maximum entry of J^T Omega J - Omega for the finite-difference Jacobian of
/// a raw (unwrapped) map at (x, y), with central differences of size `step`.
pub fn symplecticity_defect(
    map_raw: impl Fn(&[f64], &[f64]) -> Result<(Vec<f64>, Vec<f64>)>,
    x: &[f64],
    y: &[f64],
    step: f64,
) -> Result<f64> {
    let n = x.len();
    let dim = 2 * n;
    let mut jac = nalgebra::DMatrix::zeros(dim, dim);
    for j in 0..dim {
        let mut xp = x.to_vec();
        let mut yp = y.to_vec();
        let mut xm = x.to_vec();
        let mut ym = y.to_vec();
        if j < n {
            xp[j] += step;
            xm[j] -= step;
        } else {
            yp[j - n] += step;
            ym[j - n] -= step;
        }
        let (fxp, fyp) = map_raw(&xp, &yp)?;
        let (fxm, fym) = map_raw(&xm, &ym)?;
        for i in 0..n {
            jac[(i, j)] = (fxp[i] - fxm[i]) / (2.0 * step);
            jac[(n + i, j)] = (fyp[i] - fym[i]) / (2.0 * step);
        }
    }
    let mut omega = nalgebra::DMatrix::zeros(dim, dim);
    for i in 0..n {
        omega[(i, n + i)] = 1.0;
        omega[(n + i, i)] = -1.0;
    }
    let defect = jac.transpose() * &omega * &jac - omega;
    Ok(defect.iter().fold(0.0f64, |m, v| m.max(v.abs())))
}

/// Convenience: wrap a state's angles (used by tests comparing raw outputs).
pub fn wrap_all(y: &[f64]) -> Vec<f64> {
    y.iter().map(|&v| wrap_angle(v)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::TAU;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// F0 = x^2/2 on a box around x0, perturbation eps cos y: the implicit
    /// equation is explicit (standard map).
    fn standard_map(eps: f64, box_: (f64, f64)) -> ImplicitMap {
        let dom = DomainSpec::new(vec![box_], 0.5, 2.0).unwrap();
        let x = PolyCoeff::coordinate(1, 0, dom.center());
        let (mut f0, _) = x.mul_truncated(&x, 2);
        f0.scale(Complex64::new(0.5, 0.0));
        let mut f = FourierGenFunction::new(f0, BTreeMap::new(), 4, dom.clone()).unwrap();
        let c = PolyCoeff::constant(1, Complex64::new(eps, 0.0), dom.center());
        f.add_cos(&[1], &c).unwrap();
        ImplicitMap::new(f, 0.25, (0.1, 0.5), 1e-13, 100).unwrap()
    }

    #[test]
    fn integrable_map_is_rotation() {
        let map = standard_map(0.0, (0.0, 2.0));
        let s = ActionAngleState::new(vec![1.3], vec![0.7]).unwrap();
        let t = map.apply_map(&s).unwrap();
        assert_relative_eq!(t.actions()[0], 1.3, max_relative = 1e-14);
        assert_relative_eq!(t.angles()[0], wrap_angle(0.7 + 1.3), max_relative = 1e-14);
    }

    #[test]
    fn standard_map_matches_closed_form() {
        let eps = 1e-3;
        let map = standard_map(eps, (0.0, 2.0));
        let (mut x, mut y) = (1.0f64, 0.3f64);
        let mut s = ActionAngleState::new(vec![x], vec![y]).unwrap();
        for _ in 0..500 {
            // closed form: x' = x + eps sin y, y' = y + x'
            x += eps * y.sin();
            y = wrap_angle(y + x);
            s = map.apply_map(&s).unwrap();
            assert!((s.actions()[0] - x).abs() < 1e-14, "action drift");
            assert!(
                (s.angles()[0] - y).abs() < 1e-12 || (TAU - (s.angles()[0] - y).abs()) < 1e-12,
                "angle drift"
            );
        }
    }

    #[test]
    fn inverse_round_trip() {
        let map = standard_map(5e-3, (0.0, 2.0));
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let s = ActionAngleState::new(
                vec![rng.gen_range(0.3..1.7)],
                vec![rng.gen_range(0.0..TAU)],
            )
            .unwrap();
            let t = map.apply_map(&s).unwrap();
            let back = map.apply_inverse(&t).unwrap();
            assert!(back.action_distance(&s) < 1e-12);
            assert!(back.angle_distance(&s) < 1e-12);
        }
    }

    #[test]
    fn map_refuses_margin_violation() {
        let map = standard_map(1e-3, (0.0, 2.0));
        let s = ActionAngleState::new(vec![0.01], vec![0.0]).unwrap();
        assert!(matches!(map.apply_map(&s), Err(Error::Domain(_))));
    }

    #[test]
    fn contraction_hypothesis_rejected() {
        let dom = DomainSpec::new(vec![(0.0, 2.0)], 0.5, 2.0).unwrap();
        let x = PolyCoeff::coordinate(1, 0, dom.center());
        let (mut f0, _) = x.mul_truncated(&x, 2);
        f0.scale(Complex64::new(0.5, 0.0));
        let mut f = FourierGenFunction::new(f0, BTreeMap::new(), 4, dom.clone()).unwrap();
        let c = PolyCoeff::constant(1, Complex64::new(0.5, 0.0), dom.center());
        f.add_cos(&[1], &c).unwrap();
        // |Df| ~ 0.5 e^2 far above delta_hat/2
        assert!(matches!(
            ImplicitMap::new(f, 0.25, (0.1, 0.5), 1e-13, 100),
            Err(Error::Hypothesis { .. })
        ));
    }

    fn sin_transform(eps: f64) -> NearIdentityTransform {
        let dom = DomainSpec::new(vec![(0.0, 2.0)], 0.5, 2.0).unwrap();
        let f0 = PolyCoeff::zero(1, 0, dom.center());
        let mut chi = FourierGenFunction::integrable(f0, 4, dom).unwrap();
        let c = PolyCoeff::constant(1, Complex64::new(eps, 0.0), chi.dom().center());
        chi.add_sin(&[1], &c).unwrap();
        NearIdentityTransform::new(chi, 0.25, (0.1, 0.5), 1e-13, 100).unwrap()
    }

    #[test]
    fn x_independent_chi_shifts_actions_only() {
        // chi = eps sin y: d1 chi = 0 so v* = 0, x = a + eps cos y, y = phi
        let eps = 1e-3;
        let t = sin_transform(eps);
        let s = ActionAngleState::new(vec![1.0], vec![0.9]).unwrap();
        let out = t.apply_transform(&s).unwrap();
        assert_relative_eq!(
            out.actions()[0],
            1.0 + eps * (0.9f64).cos(),
            max_relative = 1e-14
        );
        assert_relative_eq!(out.angles()[0], 0.9, max_relative = 1e-14);
        let back = t.apply_transform_inverse(&out).unwrap();
        assert!(back.action_distance(&s) < 1e-13);
        assert!(back.angle_distance(&s) < 1e-13);
    }

    #[test]
    fn identity_transform_is_identity() {
        let dom = DomainSpec::new(vec![(0.0, 2.0)], 0.5, 2.0).unwrap();
        let t = NearIdentityTransform::identity(dom, 1e-13, 100).unwrap();
        assert!(t.is_identity());
        let s = ActionAngleState::new(vec![1.2], vec![2.2]).unwrap();
        let out = t.apply_transform(&s).unwrap();
        assert_eq!(out.actions(), s.actions());
        assert_eq!(out.angles(), s.angles());
    }

    #[test]
    fn symplecticity_of_map_and_transform() {
        let map = standard_map(5e-3, (0.0, 2.0));
        let t = sin_transform(2e-3);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let x = vec![rng.gen_range(0.4..1.6)];
            let y = vec![rng.gen_range(0.0..TAU)];
            let d1 = symplecticity_defect(|a, b| map.apply_raw(a, b), &x, &y, 1e-5).unwrap();
            assert!(d1 < 1e-6, "map defect {d1}");
            let d2 = symplecticity_defect(|a, b| t.apply_raw(a, b), &x, &y, 1e-5).unwrap();
            assert!(d2 < 1e-6, "transform defect {d2}");
            let d3 =
                symplecticity_defect(|a, b| map.apply_inverse_raw(a, b), &x, &y, 1e-5).unwrap();
            assert!(d3 < 1e-6, "inverse defect {d3}");
        }
    }

    #[test]
    fn conjugation_by_identity_recovers_f() {
        let eps = 1e-5;
        let map = standard_map(eps, (0.0, 2.0));
        let dom = map.genfun().dom().clone();
        let new_dom = dom.shrink(0.3, 1.2).unwrap();
        let id = NearIdentityTransform::identity(dom, 1e-13, 100).unwrap();
        let (recovered, report) = conjugate_genfun(&map, &id, &new_dom, 4, 6).unwrap();
        assert!(report.fit_residual < 1e-10, "residual {}", report.fit_residual);
        // recovered perturbation should match eps cos y
        let diff = recovered.sub_pert(&map.genfun().perturbation());
        assert!(
            diff.weighted_norm(&new_dom) < 1e-12,
            "norm {}",
            diff.weighted_norm(&new_dom)
        );
    }

    #[test]
    fn two_path_oracle_integrable_plus_chi() {
        // f = 0: the conjugate of the twist by Phi, recovered as a generating
        // function, must generate Phi^{-1} . T . Phi
        let map = standard_map(0.0, (0.0, 2.0));
        let t = sin_transform(1e-4);
        let dom = map.genfun().dom().clone();
        let new_dom = dom.shrink(0.3, 1.2).unwrap();
        let (recovered, _) = conjugate_genfun(&map, &t, &new_dom, 4, 6).unwrap();
        let conj_map = ImplicitMap::new(recovered, 0.25, (0.05, 0.2), 1e-13, 100).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..200 {
            let s = ActionAngleState::new(
                vec![rng.gen_range(0.5..1.5)],
                vec![rng.gen_range(0.0..TAU)],
            )
            .unwrap();
            let direct = conj_map.apply_map(&s).unwrap();
            let composed = t
                .apply_transform_inverse(
                    &map.apply_map(&t.apply_transform(&s).unwrap()).unwrap(),
                )
                .unwrap();
            assert!(
                direct.action_distance(&composed) < 1e-8,
                "actions differ {}",
                direct.action_distance(&composed)
            );
            assert!(
                direct.angle_distance(&composed) < 1e-8,
                "angles differ {}",
                direct.angle_distance(&composed)
            );
        }
    }

    #[test]
    fn two_path_oracle_general() {
        let map = standard_map(5e-5, (0.0, 2.0));
        let t = sin_transform(1e-4);
        let dom = map.genfun().dom().clone();
        let new_dom = dom.shrink(0.3, 1.2).unwrap();
        let (recovered, _) = conjugate_genfun(&map, &t, &new_dom, 4, 6).unwrap();
        let conj_map = ImplicitMap::new(recovered, 0.25, (0.05, 0.2), 1e-13, 100).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..200 {
            let s = ActionAngleState::new(
                vec![rng.gen_range(0.5..1.5)],
                vec![rng.gen_range(0.0..TAU)],
            )
            .unwrap();
            let direct = conj_map.apply_map(&s).unwrap();
            let composed = t
                .apply_transform_inverse(
                    &map.apply_map(&t.apply_transform(&s).unwrap()).unwrap(),
                )
                .unwrap();
            assert!(direct.action_distance(&composed) < 1e-7);
            assert!(direct.angle_distance(&composed) < 1e-7);
        }
    }
}
