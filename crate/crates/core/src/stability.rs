//! Effective-stability laboratory: closed-form constants of the main
//! stability theorem, integrable test systems with per-axis polar charts,
//! symplectic integrators of orders 1, 2 and 4, long-run action-drift
//! measurements with scaling fits, small-twist maps, and block-confinement
//! diagnostics along trajectories.

use num_complex::Complex64;

use crate::domain::{ActionAngleState, DomainSpec};
use crate::error::{Error, Result};
use crate::fourier::FourierGenFunction;
use crate::genmap::{picard, ImplicitMap};
use crate::geometry::{BlockLabel, ResonanceGeometry};
use crate::poly::PolyCoeff;

/// Closed-form constants of the stability theorem for a perturbation of
/// size epsilon: the stability radius Delta and the exponentially long
/// time T, plus the admissibility threshold epsilon_0.
#[derive(Debug, Clone)]
pub struct StabilityBounds {
    pub n: usize,
    pub b: u32,
    pub epsilon0: f64,
    pub c0: f64,
    pub c1: f64,
    pub t0: f64,
    pub delta: f64,
    pub t: f64,
    pub epsilon: f64,
    /// epsilon <= min(epsilon0, sigma2^b)
    pub admissible: bool,
}

/// b = 2(n^2+n+2); epsilon_0 = M^2 sigma1^4 / (pi^2 (21n+30)^2 [(2M/m)^n n!]^4);
/// c0 = (8nM/3m)(3n+2) sigma1; c1 = sigma2/24; T0 = (m/2M)^n sigma1 sigma2 / (2^7 n!);
/// Delta = c0 eps^{1/b}; T = T0 eps^{-3/4} e^{c1 eps^{-1/b}}.
pub fn theorem1_bounds(
    n: usize,
    m_lower: f64,
    m_upper: f64,
    sigma1: f64,
    sigma2: f64,
    epsilon: f64,
) -> Result<StabilityBounds> {
    if n == 0 {
        return Err(Error::parameter("n", "must be >= 1"));
    }
    if !(m_lower > 0.0 && m_upper >= m_lower) {
        return Err(Error::parameter("m/M", "need 0 < m <= M"));
    }
    if !(sigma1 > 0.0 && sigma2 > 0.0) {
        return Err(Error::parameter("sigma", "must be > 0"));
    }
    if sigma1 >= 1.0 / (4.0 * m_upper) {
        return Err(Error::hypothesis(
            "sigma1",
            format!(
                "sigma1 = {sigma1:.3e} must be below 1/(4M) = {:.3e}",
                1.0 / (4.0 * m_upper)
            ),
        ));
    }
    if !(epsilon > 0.0) {
        return Err(Error::parameter("epsilon", "must be > 0"));
    }
    let nf = n as f64;
    let b = 2 * (n * n + n + 2) as u32;
    let fact: f64 = (1..=n).map(|i| i as f64).product();
    let pi = std::f64::consts::PI;
    let epsilon0 = m_upper * m_upper * sigma1.powi(4)
        / (pi * pi
            * ((21 * n + 30) as f64).powi(2)
            * ((2.0 * m_upper / m_lower).powi(n as i32) * fact).powi(4));
    let c0 = 8.0 * nf * m_upper / (3.0 * m_lower) * (3.0 * nf + 2.0) * sigma1;
    let c1 = sigma2 / 24.0;
    let t0 = (m_lower / (2.0 * m_upper)).powi(n as i32) * sigma1 * sigma2 / (128.0 * fact);
    let delta = c0 * epsilon.powf(1.0 / b as f64);
    let t = t0 * epsilon.powf(-0.75) * (c1 * epsilon.powf(-1.0 / b as f64)).exp();
    let admissible = epsilon <= epsilon0.min(sigma2.powi(b as i32));
    Ok(StabilityBounds {
        n,
        b,
        epsilon0,
        c0,
        c1,
        t0,
        delta,
        t,
        epsilon,
        admissible,
    })
}

/// Integrable Hamiltonian H(I) with the per-axis polar chart
/// I_i = (p_i^2 + q_i^2)/2, theta_i = atan2(q_i, p_i). States in Cartesian
/// form are stored as [p_1..p_n, q_1..q_n].
#[derive(Debug, Clone)]
pub struct IntegrableSystem {
    pub id: String,
    h_of_i: PolyCoeff,
    omega_polys: Vec<PolyCoeff>,
}

impl IntegrableSystem {
    pub fn new(id: impl Into<String>, h_of_i: PolyCoeff) -> Self {
        let omega_polys = (0..h_of_i.dim()).map(|j| h_of_i.derivative(j)).collect();
        Self {
            id: id.into(),
            h_of_i,
            omega_polys,
        }
    }

    pub fn dim(&self) -> usize {
        self.h_of_i.dim()
    }

    pub fn h_of_i(&self) -> &PolyCoeff {
        &self.h_of_i
    }

    pub fn omega(&self, actions: &[f64]) -> Vec<f64> {
        self.omega_polys
            .iter()
            .map(|p| p.eval_real(actions).re)
            .collect()
    }

    pub fn to_cartesian(&self, s: &ActionAngleState) -> Vec<f64> {
        let n = self.dim();
        let mut pq = vec![0.0; 2 * n];
        for i in 0..n {
            let r = (2.0 * s.actions()[i]).sqrt();
            pq[i] = r * s.angles()[i].cos();
            pq[n + i] = r * s.angles()[i].sin();
        }
        pq
    }

    pub fn from_cartesian(&self, pq: &[f64]) -> Result<ActionAngleState> {
        let n = self.dim();
        let mut actions = Vec::with_capacity(n);
        let mut angles = Vec::with_capacity(n);
        for i in 0..n {
            actions.push(0.5 * (pq[i] * pq[i] + pq[n + i] * pq[n + i]));
            angles.push(pq[n + i].atan2(pq[i]));
        }
        ActionAngleState::new(actions, angles)
    }

    pub fn actions_of(&self, pq: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| 0.5 * (pq[i] * pq[i] + pq[n + i] * pq[n + i]))
            .collect()
    }

    pub fn hamiltonian(&self, pq: &[f64]) -> f64 {
        self.h_of_i.eval_real(&self.actions_of(pq)).re
    }

    /// dH/dp_i = omega_i p_i, dH/dq_i = omega_i q_i (chain rule through I).
    pub fn grad_p(&self, pq: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let w = self.omega(&self.actions_of(pq));
        (0..n).map(|i| w[i] * pq[i]).collect()
    }

    pub fn grad_q(&self, pq: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let w = self.omega(&self.actions_of(pq));
        (0..n).map(|i| w[i] * pq[n + i]).collect()
    }
}

/// Integrator menu. Orders: symplectic Euler 1, Stormer-Verlet 2, Yoshida's
/// fourth-order composition 4. The exact flow serves as the h-independent
/// reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    SymplecticEuler,
    StormerVerlet,
    Yoshida4,
    ExactFlow,
}

impl Method {
    pub fn order(&self) -> u32 {
        match self {
            Method::SymplecticEuler => 1,
            Method::StormerVerlet => 2,
            Method::Yoshida4 => 4,
            Method::ExactFlow => 0,
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            Method::SymplecticEuler => "symplectic-euler",
            Method::StormerVerlet => "stormer-verlet",
            Method::Yoshida4 => "yoshida4",
            Method::ExactFlow => "exact-flow",
        }
    }

    pub fn from_id(id: &str) -> Result<Self> {
        match id {
            "symplectic-euler" => Ok(Method::SymplecticEuler),
            "stormer-verlet" => Ok(Method::StormerVerlet),
            "yoshida4" => Ok(Method::Yoshida4),
            "exact-flow" => Ok(Method::ExactFlow),
            other => Err(Error::parameter("method", format!("unknown method `{other}`"))),
        }
    }
}

const STEP_TOL: f64 = 1e-14;
const STEP_MAX_ITER: usize = 60;

fn euler_step(sys: &IntegrableSystem, h: f64, pq: &[f64]) -> Result<Vec<f64>> {
    let n = sys.dim();
    let (p, q) = pq.split_at(n);
    // p^ = p - h H_q(p^, q), implicit in p^
    let p_new = picard(
        p.to_vec(),
        |ph| {
            let mut state: Vec<f64> = ph.to_vec();
            state.extend_from_slice(q);
            let gq = sys.grad_q(&state);
            (0..n).map(|i| p[i] - h * gq[i]).collect()
        },
        STEP_TOL,
        STEP_MAX_ITER,
    )?;
    let mut state: Vec<f64> = p_new.clone();
    state.extend_from_slice(q);
    let gp = sys.grad_p(&state);
    let mut out = p_new;
    out.extend((0..n).map(|i| q[i] + h * gp[i]));
    Ok(out)
}

fn verlet_step(sys: &IntegrableSystem, h: f64, pq: &[f64]) -> Result<Vec<f64>> {
    let n = sys.dim();
    let (p, q) = pq.split_at(n);
    // p_half = p - h/2 H_q(p_half, q)
    let p_half = picard(
        p.to_vec(),
        |ph| {
            let mut state: Vec<f64> = ph.to_vec();
            state.extend_from_slice(q);
            let gq = sys.grad_q(&state);
            (0..n).map(|i| p[i] - 0.5 * h * gq[i]).collect()
        },
        STEP_TOL,
        STEP_MAX_ITER,
    )?;
    let mut half_state: Vec<f64> = p_half.clone();
    half_state.extend_from_slice(q);
    let gp_old = sys.grad_p(&half_state);
    // q^ = q + h/2 [H_p(p_half, q) + H_p(p_half, q^)]
    let q_new = picard(
        q.to_vec(),
        |qh| {
            let mut state: Vec<f64> = p_half.clone();
            state.extend_from_slice(qh);
            let gp = sys.grad_p(&state);
            (0..n).map(|i| q[i] + 0.5 * h * (gp_old[i] + gp[i])).collect()
        },
        STEP_TOL,
        STEP_MAX_ITER,
    )?;
    let mut state: Vec<f64> = p_half.clone();
    state.extend_from_slice(&q_new);
    let gq = sys.grad_q(&state);
    let mut out: Vec<f64> = (0..n).map(|i| p_half[i] - 0.5 * h * gq[i]).collect();
    out.extend(q_new);
    Ok(out)
}

fn exact_step(sys: &IntegrableSystem, h: f64, pq: &[f64]) -> Vec<f64> {
    let n = sys.dim();
    let w = sys.omega(&sys.actions_of(pq));
    let mut out = vec![0.0; 2 * n];
    for i in 0..n {
        let (c, s) = ((h * w[i]).cos(), (h * w[i]).sin());
        // rotation by h omega_i in the (p_i, q_i) plane (theta advances)
        out[i] = c * pq[i] - s * pq[n + i];
        out[n + i] = s * pq[i] + c * pq[n + i];
    }
    out
}

/// One step of the chosen method on Hamilton's equations of H(I) in
/// Cartesian variables.
pub fn integrator_step(
    sys: &IntegrableSystem,
    method: Method,
    h: f64,
    pq: &[f64],
) -> Result<Vec<f64>> {
    if !(h.is_finite()) {
        return Err(Error::parameter("h", "must be finite"));
    }
    match method {
        Method::SymplecticEuler => euler_step(sys, h, pq),
        Method::StormerVerlet => verlet_step(sys, h, pq),
        Method::Yoshida4 => {
            let w1 = 1.0 / (2.0 - 2f64.powf(1.0 / 3.0));
            let w0 = 1.0 - 2.0 * w1;
            let s1 = verlet_step(sys, w1 * h, pq)?;
            let s2 = verlet_step(sys, w0 * h, &s1)?;
            verlet_step(sys, w1 * h, &s2)
        }
        Method::ExactFlow => Ok(exact_step(sys, h, pq)),
    }
}

/// One drift checkpoint.
#[derive(Debug, Clone)]
pub struct DriftRecord {
    pub system: String,
    pub method: &'static str,
    pub order: u32,
    pub h: f64,
    pub step: u64,
    /// running max of |I(t) - I(0)|_2
    pub max_dev: f64,
    /// deviation at this checkpoint
    pub dev_now: f64,
    pub energy_err: f64,
}

/// Result of a long integration: geometrically spaced checkpoints (ratio 2)
/// plus the final state, and whether the run left the action box early.
#[derive(Debug, Clone)]
pub struct DriftRun {
    pub records: Vec<DriftRecord>,
    pub exited_domain: bool,
    pub final_state: Vec<f64>,
}

/// Initial actions must stay clear of the polar-chart singularity.
pub const CHART_MARGIN: f64 = 0.05;

pub fn drift_experiment(
    sys: &IntegrableSystem,
    method: Method,
    h: f64,
    total_steps: u64,
    initial: &ActionAngleState,
    action_box: Option<&DomainSpec>,
) -> Result<DriftRun> {
    if initial.actions().iter().any(|&a| a < CHART_MARGIN) {
        return Err(Error::Domain(format!(
            "initial actions {:?} too close to the polar-chart singularity (need >= {CHART_MARGIN})",
            initial.actions()
        )));
    }
    let mut pq = sys.to_cartesian(initial);
    let i0 = sys.actions_of(&pq);
    let e0 = sys.hamiltonian(&pq);
    let mut max_dev = 0.0f64;
    let mut records = Vec::new();
    let mut exited = false;
    let mut next_checkpoint = 1u64;

    let mut push = |step: u64, pq: &[f64], max_dev: f64| {
        let i = sys.actions_of(pq);
        let dev_now = i
            .iter()
            .zip(&i0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        records.push(DriftRecord {
            system: sys.id.clone(),
            method: method.id(),
            order: method.order(),
            h,
            step,
            max_dev,
            dev_now,
            energy_err: (sys.hamiltonian(pq) - e0).abs(),
        });
    };

    if total_steps == 0 {
        push(0, &pq, 0.0);
        return Ok(DriftRun {
            records,
            exited_domain: false,
            final_state: pq,
        });
    }

    let mut step = 0u64;
    while step < total_steps {
        pq = integrator_step(sys, method, h, &pq)?;
        step += 1;
        let i = sys.actions_of(&pq);
        let dev = i
            .iter()
            .zip(&i0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        max_dev = max_dev.max(dev);
        if let Some(dom) = action_box {
            if !dom.contains(&i) {
                exited = true;
                push(step, &pq, max_dev);
                break;
            }
        }
        if step == next_checkpoint || step == total_steps {
            push(step, &pq, max_dev);
            next_checkpoint = next_checkpoint.saturating_mul(2);
        }
    }
    Ok(DriftRun {
        records,
        exited_domain: exited,
        final_state: pq,
    })
}

/// Least-squares fit of log(max_dev) against log(h).
#[derive(Debug, Clone)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    /// max |log(max_dev) - fit| over the points
    pub residual: f64,
    /// does max_dev <= c0 h^{r/b} hold at every h (when bounds are given)?
    pub theorem_envelope_ok: Option<bool>,
}

pub fn scaling_fit(
    records: &[DriftRecord],
    bounds: Option<&StabilityBounds>,
) -> Result<ScalingFit> {
    let mut points: Vec<(f64, f64)> = records
        .iter()
        .map(|r| (r.h.ln(), r.max_dev.max(1e-300).ln()))
        .collect();
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    points.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-12);
    if points.len() < 3 {
        return Err(Error::parameter("records", "need >= 3 distinct step sizes"));
    }
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    let residual = points
        .iter()
        .map(|p| (p.1 - slope * p.0 - intercept).abs())
        .fold(0.0f64, f64::max);
    let theorem_envelope_ok = bounds.map(|bd| {
        records.iter().all(|r| {
            r.max_dev <= bd.c0 * r.h.powf(r.order as f64 / bd.b as f64)
        })
    });
    Ok(ScalingFit {
        slope,
        intercept,
        residual,
        theorem_envelope_ok,
    })
}

/// Small-twist generating function H_s = s H0(I) + s h(I, theta), as an
/// implicitly generated symplectic map.
pub fn small_twist_map(
    h0: &PolyCoeff,
    h_pert: &FourierGenFunction,
    s: f64,
    c: f64,
    delta: (f64, f64),
    tol: f64,
    max_iter: usize,
) -> Result<ImplicitMap> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::parameter("s", "must lie in (0, 1]"));
    }
    let mut f0 = h0.clone();
    f0.scale(Complex64::new(s, 0.0));
    let scaled = h_pert.scale_pert(s);
    let f = FourierGenFunction::new(
        f0,
        scaled.modes().clone(),
        h_pert.k_rep(),
        h_pert.dom().clone(),
    )?;
    ImplicitMap::new(f, c, delta, tol, max_iter)
}

/// A block-label change along a trajectory of action snapshots.
#[derive(Debug, Clone)]
pub struct ConfinementEvent {
    pub step: usize,
    pub old: BlockLabel,
    pub new: BlockLabel,
    /// |x(t+1) - x(t)|_2 at the transition
    pub jump: f64,
    /// escape budget rho1^{(r)} / 4 for the departed block's rank
    pub budget: f64,
    pub within_budget: bool,
}

/// rho1^{(r)} = min(alpha_r / (4 K beta), 1), with rank 0 using alpha_1.
pub fn rho1_of_rank(geo: &ResonanceGeometry, r: usize) -> f64 {
    let s = &geo.schedule;
    let alpha = s.alpha[r.max(1) - 1];
    (alpha / (4.0 * s.k as f64 * s.beta)).min(1.0)
}

/// Classify every snapshot and report label transitions with their action
/// jumps against the escape budget.
pub fn confinement_diagnostic(
    trajectory: &[Vec<f64>],
    geo: &ResonanceGeometry,
) -> Result<Vec<ConfinementEvent>> {
    if !geo.schedule.nonoverlap_ok() {
        return Err(Error::hypothesis(
            "schedule nonoverlap",
            format!("margins {:?}", geo.schedule.nonoverlap_margins()),
        ));
    }
    let mut events = Vec::new();
    if trajectory.is_empty() {
        return Ok(events);
    }
    let mut prev = geo.classify_point(&trajectory[0]);
    for (i, window) in trajectory.windows(2).enumerate() {
        let next = geo.classify_point(&window[1]);
        if next != prev {
            let jump = window[0]
                .iter()
                .zip(&window[1])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let budget = rho1_of_rank(geo, prev.rank()) / 4.0;
            events.push(ConfinementEvent {
                step: i,
                old: prev.clone(),
                new: next.clone(),
                jump,
                budget,
                within_budget: jump <= budget,
            });
        }
        prev = next;
    }
    Ok(events)
}
