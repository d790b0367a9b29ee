//! Core state and domain types: points in action-angle coordinates, box
//! domains with analyticity widths, and bi-Lipschitz frequency maps.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::poly::PolyCoeff;

pub const TAU: f64 = 2.0 * std::f64::consts::PI;

/// Wrap a single angle into [0, 2pi).
pub fn wrap_angle(theta: f64) -> f64 {
    let w = theta.rem_euclid(TAU);
    // rem_euclid can round up to exactly 2pi for tiny negative inputs
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// A point (I, theta) in actions x angles. Angles are stored wrapped to
/// [0, 2pi); every constructor and map application re-wraps.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionAngleState {
    actions: Vec<f64>,
    angles: Vec<f64>,
}

impl ActionAngleState {
    pub fn new(actions: Vec<f64>, angles: Vec<f64>) -> Result<Self> {
        if actions.len() != angles.len() {
            return Err(Error::parameter(
                "state",
                format!(
                    "actions ({}) and angles ({}) must have equal length",
                    actions.len(),
                    angles.len()
                ),
            ));
        }
        if actions.iter().any(|a| !a.is_finite()) {
            return Err(Error::parameter("actions", "all actions must be finite"));
        }
        if angles.iter().any(|a| !a.is_finite()) {
            return Err(Error::parameter("angles", "all angles must be finite"));
        }
        Ok(Self {
            actions,
            angles: angles.into_iter().map(wrap_angle).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.actions.len()
    }

    pub fn actions(&self) -> &[f64] {
        &self.actions
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    /// Euclidean distance between the action parts.
    pub fn action_distance(&self, other: &Self) -> f64 {
        self.actions
            .iter()
            .zip(&other.actions)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Distance on the torus for the angle parts (max over axes).
    pub fn angle_distance(&self, other: &Self) -> f64 {
        self.angles
            .iter()
            .zip(&other.angles)
            .map(|(a, b)| {
                let d = (a - b).rem_euclid(TAU);
                d.min(TAU - d)
            })
            .fold(0.0, f64::max)
    }
}

/// An axis-aligned action box together with the analyticity widths
/// (rho1 in actions, rho2 in angles) of the complex neighborhood it carries.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    intervals: Vec<(f64, f64)>,
    pub rho1: f64,
    pub rho2: f64,
}

impl DomainSpec {
    pub fn new(intervals: Vec<(f64, f64)>, rho1: f64, rho2: f64) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::parameter("box", "at least one axis required"));
        }
        for &(lo, hi) in &intervals {
            if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                return Err(Error::parameter(
                    "box",
                    format!("invalid interval [{lo}, {hi}]"),
                ));
            }
        }
        if rho1 < 0.0 || rho2 < 0.0 {
            return Err(Error::parameter("rho", "analyticity widths must be >= 0"));
        }
        Ok(Self {
            intervals,
            rho1,
            rho2,
        })
    }

    pub fn dim(&self) -> usize {
        self.intervals.len()
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn center(&self) -> Vec<f64> {
        self.intervals.iter().map(|(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn half_widths(&self) -> Vec<f64> {
        self.intervals.iter().map(|(a, b)| 0.5 * (b - a)).collect()
    }

    pub fn volume(&self) -> f64 {
        self.intervals.iter().map(|(a, b)| b - a).product()
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dim()
            && point
                .iter()
                .zip(&self.intervals)
                .all(|(x, &(a, b))| *x >= a && *x <= b)
    }

    /// Membership with a margin kept from every face.
    pub fn contains_with_margin(&self, point: &[f64], margin: f64) -> bool {
        point.len() == self.dim()
            && point
                .iter()
                .zip(&self.intervals)
                .all(|(x, &(a, b))| *x >= a + margin && *x <= b - margin)
    }

    /// Same box with analyticity widths reduced by (d1, d2).
    pub fn shrink(&self, d1: f64, d2: f64) -> Result<Self> {
        if d1 > self.rho1 + 1e-15 || d2 > self.rho2 + 1e-15 {
            return Err(Error::parameter(
                "delta",
                format!(
                    "shrink ({d1}, {d2}) exceeds widths ({}, {})",
                    self.rho1, self.rho2
                ),
            ));
        }
        Ok(Self {
            intervals: self.intervals.clone(),
            rho1: (self.rho1 - d1).max(0.0),
            rho2: (self.rho2 - d2).max(0.0),
        })
    }

    /// Uniform real grid over the box, `per_axis` nodes per axis.
    pub fn real_grid(&self, per_axis: usize) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = self
            .intervals
            .iter()
            .map(|&(a, b)| {
                (0..per_axis)
                    .map(|i| {
                        if per_axis == 1 {
                            0.5 * (a + b)
                        } else {
                            a + (b - a) * i as f64 / (per_axis - 1) as f64
                        }
                    })
                    .collect()
            })
            .collect();
        cartesian_product(&axes)
    }

    /// Sample cloud probing the complex neighborhood of the box: the real grid
    /// plus per-axis imaginary offsets of magnitude up to rho1/sqrt(n).
    pub fn complex_samples(&self, per_axis: usize) -> Vec<Vec<Complex64>> {
        let n = self.dim();
        let grid = self.real_grid(per_axis);
        let off = self.rho1 / (n as f64).sqrt();
        let mut out = Vec::new();
        for node in &grid {
            let base: Vec<Complex64> = node.iter().map(|&x| Complex64::new(x, 0.0)).collect();
            out.push(base.clone());
            if off > 0.0 {
                for axis in 0..n {
                    for sign in [-1.0, 1.0] {
                        let mut p = base.clone();
                        p[axis].im = sign * off;
                        out.push(p);
                    }
                }
            }
        }
        out
    }
}

pub fn cartesian_product(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = vec![vec![]];
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

/// A frequency map with declared bi-Lipschitz constants: each component is an
/// exact polynomial (the action gradient of the integrable part), so complex
/// evaluation and differentiation are exact.
#[derive(Debug, Clone)]
pub struct FrequencyMap {
    components: Vec<PolyCoeff>,
    pub m_lower: f64,
    pub m_upper: f64,
}

impl FrequencyMap {
    pub fn new(components: Vec<PolyCoeff>, m_lower: f64, m_upper: f64) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::parameter("omega", "empty component list"));
        }
        if !(m_lower > 0.0) {
            return Err(Error::parameter("m_lower", "must be > 0"));
        }
        if m_upper < m_lower {
            return Err(Error::parameter("m_upper", "must be >= m_lower"));
        }
        Ok(Self {
            components,
            m_lower,
            m_upper,
        })
    }

    /// Gradient of the integrable generating function.
    pub fn from_integrable(f0: &PolyCoeff, m_lower: f64, m_upper: f64) -> Result<Self> {
        let comps = (0..f0.dim()).map(|j| f0.derivative(j)).collect();
        Self::new(comps, m_lower, m_upper)
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[PolyCoeff] {
        &self.components
    }

    pub fn eval(&self, point: &[Complex64]) -> Vec<Complex64> {
        self.components.iter().map(|c| c.eval(point)).collect()
    }

    pub fn eval_real(&self, point: &[f64]) -> Vec<f64> {
        let z: Vec<Complex64> = point.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.components.iter().map(|c| c.eval(&z).re).collect()
    }
}

/// Empirical estimate of the bi-Lipschitz extremes of a frequency map over a
/// box: min/max of |w(I1)-w(I2)| / |I1-I2| over sampled pairs. Diagnostic
/// only; no relation to the declared constants is asserted.
pub fn lipschitz_probe(
    omega: &FrequencyMap,
    dom: &DomainSpec,
    samples: usize,
    rng: &mut impl Rng,
) -> Result<(f64, f64)> {
    if samples < 2 {
        return Err(Error::parameter("samples", "need at least 2"));
    }
    if dom.volume() == 0.0 {
        return Err(Error::parameter("box", "degenerate (zero volume) box"));
    }
    let n = dom.dim();
    let mut m_hat = f64::INFINITY;
    let mut big_m_hat: f64 = 0.0;

    let mut record = |p: &[f64], q: &[f64]| {
        let dist: f64 = p
            .iter()
            .zip(q)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if dist < 1e-12 {
            return;
        }
        let wp = omega.eval_real(p);
        let wq = omega.eval_real(q);
        let wdist: f64 = wp
            .iter()
            .zip(&wq)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let ratio = wdist / dist;
        m_hat = m_hat.min(ratio);
        big_m_hat = big_m_hat.max(ratio);
    };

    // Random pairs.
    let draw = |rng: &mut dyn rand::RngCore| -> Vec<f64> {
        dom.intervals()
            .iter()
            .map(|&(a, b)| rng.gen_range(a..=b))
            .collect()
    };
    for _ in 0..samples {
        let p = draw(rng);
        let q = draw(rng);
        record(&p, &q);
    }
    // Short displacements in a deterministic fan of directions, from sampled
    // base points: catches the extreme singular directions that random pairs
    // only approach slowly.
    let dirs = unit_directions(n, 720);
    let half = dom.half_widths();
    let step = 1e-4 * half.iter().cloned().fold(f64::INFINITY, f64::min).max(1e-6);
    let bases: Vec<Vec<f64>> = (0..samples.min(16)).map(|_| draw(rng)).collect();
    for base in &bases {
        for d in &dirs {
            let q: Vec<f64> = base.iter().zip(d).map(|(x, u)| x + step * u).collect();
            record(base, &q);
        }
    }
    Ok((m_hat, big_m_hat))
}

fn unit_directions(n: usize, count: usize) -> Vec<Vec<f64>> {
    match n {
        1 => vec![vec![1.0]],
        2 => (0..count)
            .map(|i| {
                let t = std::f64::consts::PI * i as f64 / count as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        _ => {
            // Fibonacci-style sweep on the sphere for n = 3; coarser but enough
            // for a diagnostic.
            let m = count.max(64);
            (0..m)
                .map(|i| {
                    let z = -1.0 + 2.0 * i as f64 / (m - 1) as f64;
                    let r = (1.0 - z * z).max(0.0).sqrt();
                    let phi = 2.399963229728653 * i as f64;
                    vec![r * phi.cos(), r * phi.sin(), z]
                })
                .collect()
        }
    }
}
