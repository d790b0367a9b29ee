//! Truncated multivariate polynomials with complex coefficients, centered at
//! a reference point, plus Chebyshev-node least-squares fitting.
//!
//! These are the action-coefficient functions of the Fourier algebra: exact
//! derivatives, certified coefficient-sum sup bounds, and degree-truncated
//! products with the discarded remainder reported rather than dropped.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type MultiIndex = Vec<u32>;

/// Drop coefficients below this magnitude when normalizing; keeps maps sparse
/// without affecting certified bounds at the working precision.
const COEFF_EPS: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq)]
pub struct PolyCoeff {
    n: usize,
    degree_bound: u32,
    coefficients: BTreeMap<MultiIndex, Complex64>,
    reference_point: Vec<f64>,
}

impl PolyCoeff {
    pub fn zero(n: usize, degree_bound: u32, reference_point: Vec<f64>) -> Self {
        assert_eq!(reference_point.len(), n);
        Self {
            n,
            degree_bound,
            coefficients: BTreeMap::new(),
            reference_point,
        }
    }

    pub fn constant(n: usize, value: Complex64, reference_point: Vec<f64>) -> Self {
        let mut p = Self::zero(n, 0, reference_point);
        if value.norm() > COEFF_EPS {
            p.coefficients.insert(vec![0; n], value);
        }
        p
    }

    /// The coordinate function x_axis (as a polynomial centered at the
    /// reference point).
    pub fn coordinate(n: usize, axis: usize, reference_point: Vec<f64>) -> Self {
        let mut p = Self::zero(n, 1, reference_point);
        let c = p.reference_point[axis];
        if c.abs() > 0.0 {
            p.coefficients.insert(vec![0; n], Complex64::new(c, 0.0));
        }
        let mut idx = vec![0u32; n];
        idx[axis] = 1;
        p.coefficients.insert(idx, Complex64::new(1.0, 0.0));
        p
    }

    pub fn from_terms(
        n: usize,
        degree_bound: u32,
        reference_point: Vec<f64>,
        terms: impl IntoIterator<Item = (MultiIndex, Complex64)>,
    ) -> Result<Self> {
        let mut p = Self::zero(n, degree_bound, reference_point);
        for (idx, c) in terms {
            if idx.len() != n {
                return Err(Error::parameter("multi-index", "wrong arity"));
            }
            if idx.iter().sum::<u32>() > degree_bound {
                return Err(Error::parameter(
                    "multi-index",
                    format!("total degree exceeds bound {degree_bound}"),
                ));
            }
            if c.norm() > COEFF_EPS {
                *p.coefficients.entry(idx).or_insert(Complex64::ZERO) += c;
            }
        }
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn degree_bound(&self) -> u32 {
        self.degree_bound
    }

    pub fn reference_point(&self) -> &[f64] {
        &self.reference_point
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &Complex64)> {
        self.coefficients.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn constant_term(&self) -> Complex64 {
        self.coefficients
            .get(&vec![0u32; self.n])
            .copied()
            .unwrap_or(Complex64::ZERO)
    }

    /// Evaluate at a complex point (absolute coordinates).
    pub fn eval(&self, point: &[Complex64]) -> Complex64 {
        debug_assert_eq!(point.len(), self.n);
        // powers[axis][k] = (x_axis - ref_axis)^k
        let d = self.degree_bound as usize;
        let mut powers: Vec<Vec<Complex64>> = Vec::with_capacity(self.n);
        for axis in 0..self.n {
            let dx = point[axis] - Complex64::new(self.reference_point[axis], 0.0);
            let mut col = Vec::with_capacity(d + 1);
            let mut acc = Complex64::new(1.0, 0.0);
            col.push(acc);
            for _ in 0..d {
                acc *= dx;
                col.push(acc);
            }
            powers.push(col);
        }
        let mut sum = Complex64::ZERO;
        for (idx, c) in &self.coefficients {
            let mut term = *c;
            for (axis, &e) in idx.iter().enumerate() {
                if e > 0 {
                    term *= powers[axis][e as usize];
                }
            }
            sum += term;
        }
        sum
    }

    pub fn eval_real(&self, point: &[f64]) -> Complex64 {
        let z: Vec<Complex64> = point.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.eval(&z)
    }

    /// Exact partial derivative along `axis`.
    pub fn derivative(&self, axis: usize) -> PolyCoeff {
        let mut out = PolyCoeff::zero(
            self.n,
            self.degree_bound.saturating_sub(1),
            self.reference_point.clone(),
        );
        for (idx, c) in &self.coefficients {
            let e = idx[axis];
            if e == 0 {
                continue;
            }
            let mut di = idx.clone();
            di[axis] -= 1;
            let v = *c * e as f64;
            if v.norm() > COEFF_EPS {
                *out.coefficients.entry(di).or_insert(Complex64::ZERO) += v;
            }
        }
        out
    }

    pub fn add_assign(&mut self, other: &PolyCoeff) {
        debug_assert_eq!(self.reference_point, other.reference_point);
        self.degree_bound = self.degree_bound.max(other.degree_bound);
        for (idx, c) in &other.coefficients {
            let entry = self.coefficients.entry(idx.clone()).or_insert(Complex64::ZERO);
            *entry += *c;
            if entry.norm() <= COEFF_EPS {
                self.coefficients.remove(idx);
            }
        }
    }

    pub fn sub_assign(&mut self, other: &PolyCoeff) {
        debug_assert_eq!(self.reference_point, other.reference_point);
        self.degree_bound = self.degree_bound.max(other.degree_bound);
        for (idx, c) in &other.coefficients {
            let entry = self.coefficients.entry(idx.clone()).or_insert(Complex64::ZERO);
            *entry -= *c;
            if entry.norm() <= COEFF_EPS {
                self.coefficients.remove(idx);
            }
        }
    }

    pub fn scale(&mut self, factor: Complex64) {
        if factor == Complex64::ZERO {
            self.coefficients.clear();
            return;
        }
        for c in self.coefficients.values_mut() {
            *c *= factor;
        }
    }

    /// Product truncated to `degree_bound`; the coefficient l1-mass of the
    /// discarded high-degree part is returned so callers can report it.
    pub fn mul_truncated(&self, other: &PolyCoeff, degree_bound: u32) -> (PolyCoeff, f64) {
        debug_assert_eq!(self.reference_point, other.reference_point);
        let mut out = PolyCoeff::zero(self.n, degree_bound, self.reference_point.clone());
        let mut discarded = 0.0;
        for (ia, ca) in &self.coefficients {
            for (ib, cb) in &other.coefficients {
                let idx: MultiIndex = ia.iter().zip(ib).map(|(a, b)| a + b).collect();
                let c = ca * cb;
                if idx.iter().sum::<u32>() <= degree_bound {
                    *out.coefficients.entry(idx).or_insert(Complex64::ZERO) += c;
                } else {
                    discarded += c.norm();
                }
            }
        }
        out.coefficients.retain(|_, c| c.norm() > COEFF_EPS);
        (out, discarded)
    }

    pub fn conjugate(&self) -> PolyCoeff {
        let mut out = self.clone();
        for c in out.coefficients.values_mut() {
            *c = c.conj();
        }
        out
    }

    /// Certified upper bound for sup |p| over the complex tube of per-axis
    /// radius `radii`: the l1 coefficient sum weighted by radii powers. Valid
    /// whenever |x_axis - ref_axis| <= radii[axis] on the probed set.
    pub fn sup_bound(&self, radii: &[f64]) -> f64 {
        debug_assert_eq!(radii.len(), self.n);
        let mut sum = 0.0;
        for (idx, c) in &self.coefficients {
            let mut w = c.norm();
            for (axis, &e) in idx.iter().enumerate() {
                for _ in 0..e {
                    w *= radii[axis];
                }
            }
            sum += w;
        }
        sum
    }

    /// Max |im p(x)| over a real sample grid; diagnostic for reality checks.
    pub fn max_imag_on(&self, nodes: &[Vec<f64>]) -> f64 {
        nodes
            .iter()
            .map(|x| self.eval_real(x).im.abs())
            .fold(0.0, f64::max)
    }

    /// The polynomial x -> p(gamma x)/gamma, recentered at ref/gamma: the
    /// coefficient of multi-index alpha picks up a factor gamma^(|alpha|-1).
    pub fn affine_scale(&self, gamma: f64) -> PolyCoeff {
        let mut out = PolyCoeff::zero(
            self.n,
            self.degree_bound,
            self.reference_point.iter().map(|c| c / gamma).collect(),
        );
        for (idx, c) in &self.coefficients {
            let total: u32 = idx.iter().sum();
            let factor = gamma.powi(total as i32 - 1);
            let v = *c * factor;
            if v.norm() > COEFF_EPS {
                out.coefficients.insert(idx.clone(), v);
            }
        }
        out
    }

    /// Stable evaluation of p(a) - p(b) via the exact gradient line integral
    /// with Gauss-Legendre nodes; avoids the cancellation of two large
    /// direct evaluations when |a - b| is tiny.
    pub fn eval_difference(&self, a: &[Complex64], b: &[Complex64]) -> Complex64 {
        let grads: Vec<PolyCoeff> = (0..self.n).map(|j| self.derivative(j)).collect();
        let u: Vec<Complex64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        // Gauss-Legendre exact for polynomial integrands of the occurring
        // degree (degree_bound - 1 along the segment).
        let nodes = gauss_legendre_01(((self.degree_bound as usize) / 2 + 1).max(1));
        let mut sum = Complex64::ZERO;
        for &(t, w) in &nodes {
            let p: Vec<Complex64> = b.iter().zip(&u).map(|(y, du)| y + du * t).collect();
            let mut dot = Complex64::ZERO;
            for (g, du) in grads.iter().zip(&u) {
                dot += g.eval(&p) * du;
            }
            sum += dot * w;
        }
        sum
    }
}

/// Gauss-Legendre nodes/weights on [0, 1].
fn gauss_legendre_01(m: usize) -> Vec<(f64, f64)> {
    // Newton iteration on Legendre polynomials over [-1, 1], then affine map.
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(m, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre(m, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push(((x + 1.0) / 2.0, w / 2.0));
    }
    out
}

fn legendre(m: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if m == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=m {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Precomputed Chebyshev-node least-squares fitter for one (box, degree)
/// combination; reused across all modes of a recovery pass.
pub struct ChebFit {
    n: usize,
    degree: u32,
    center: Vec<f64>,
    half_widths: Vec<f64>,
    nodes: Vec<Vec<f64>>,
    indices: Vec<MultiIndex>,
    // pseudo-inverse of the scaled design matrix
    pinv: DMatrix<f64>,
}

impl ChebFit {
    pub fn new(intervals: &[(f64, f64)], degree: u32) -> Result<Self> {
        let n = intervals.len();
        let per_axis = degree as usize + 2;
        let center: Vec<f64> = intervals.iter().map(|(a, b)| 0.5 * (a + b)).collect();
        let half_widths: Vec<f64> = intervals.iter().map(|(a, b)| 0.5 * (b - a)).collect();
        if half_widths.iter().any(|&h| h <= 0.0) {
            return Err(Error::parameter("box", "fit requires positive widths"));
        }
        let axes: Vec<Vec<f64>> = intervals
            .iter()
            .map(|&(a, b)| {
                (0..per_axis)
                    .map(|j| {
                        let t = (std::f64::consts::PI * (2.0 * j as f64 + 1.0)
                            / (2.0 * per_axis as f64))
                            .cos();
                        0.5 * (a + b) + 0.5 * (b - a) * t
                    })
                    .collect()
            })
            .collect();
        let nodes = crate::domain::cartesian_product(&axes);
        let indices = multi_indices(n, degree);
        let mut a = DMatrix::zeros(nodes.len(), indices.len());
        for (r, node) in nodes.iter().enumerate() {
            let scaled: Vec<f64> = node
                .iter()
                .zip(&center)
                .zip(&half_widths)
                .map(|((x, c), h)| (x - c) / h)
                .collect();
            for (col, idx) in indices.iter().enumerate() {
                let mut v = 1.0;
                for (axis, &e) in idx.iter().enumerate() {
                    for _ in 0..e {
                        v *= scaled[axis];
                    }
                }
                a[(r, col)] = v;
            }
        }
        let svd = a.clone().svd(true, true);
        let pinv = svd
            .pseudo_inverse(1e-13)
            .map_err(|e| Error::Representation(format!("fit pseudo-inverse failed: {e}")))?;
        Ok(Self {
            n,
            degree,
            center,
            half_widths,
            nodes,
            indices,
            pinv,
        })
    }

    pub fn nodes(&self) -> &[Vec<f64>] {
        &self.nodes
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    /// Fit complex nodal values; returns the polynomial and the max residual
    /// |p(node) - value| over the nodes.
    pub fn fit(&self, values: &[Complex64]) -> (PolyCoeff, f64) {
        assert_eq!(values.len(), self.nodes.len());
        let re = DVector::from_iterator(values.len(), values.iter().map(|v| v.re));
        let im = DVector::from_iterator(values.len(), values.iter().map(|v| v.im));
        let cre = &self.pinv * re;
        let cim = &self.pinv * im;
        let mut p = PolyCoeff::zero(self.n, self.degree, self.center.clone());
        for (col, idx) in self.indices.iter().enumerate() {
            // unscale: divide by half_width^e per axis
            let mut c = Complex64::new(cre[col], cim[col]);
            for (axis, &e) in idx.iter().enumerate() {
                for _ in 0..e {
                    c /= self.half_widths[axis];
                }
            }
            if c.norm() > COEFF_EPS {
                p.coefficients.insert(idx.clone(), c);
            }
        }
        let mut residual: f64 = 0.0;
        for (node, v) in self.nodes.iter().zip(values) {
            residual = residual.max((p.eval_real(node) - v).norm());
        }
        (p, residual)
    }
}

/// All multi-indices in `n` variables of total degree <= `degree`.
pub fn multi_indices(n: usize, degree: u32) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; n];
    fn rec(axis: usize, remaining: u32, cur: &mut MultiIndex, out: &mut Vec<MultiIndex>) {
        if axis == cur.len() {
            out.push(cur.clone());
            return;
        }
        for e in 0..=remaining {
            cur[axis] = e;
            rec(axis + 1, remaining - e, cur, out);
        }
        cur[axis] = 0;
    }
    rec(0, degree, &mut cur, &mut out);
    out.sort();
    out
}
