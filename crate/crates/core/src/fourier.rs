//! Truncated Fourier series in the angles with polynomial action
//! coefficients, together with the exponentially weighted norms, exact
//! partial derivatives, mode projections, and Cauchy-estimate checks that
//! drive the normal-form iteration.
//!
//! The weighted norm of a perturbation f(x, y) = sum_k f_k(x) e^{i k.y} is
//! sum_k |f_k| e^{|k|_1 rho2}, where |f_k| is a certified upper bound for the
//! sup of the coefficient over the complex action tube (l1 coefficient sum
//! with per-axis radius half-width + rho1). The vectorfield norm is
//! max(|df/dtheta|_1, c |df/dI|_inf) with the same weighting per component.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_complex::Complex64;

use crate::domain::DomainSpec;
use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::poly::PolyCoeff;

pub type ModeKey = Vec<i64>;

/// Generating function F(x, y) = F0(x) + sum_k f_k(x) e^{i k.y} with
/// polynomial action coefficients and a hard representation cutoff
/// |k|_1 <= K_rep. Real on real arguments: f_{-k} = conj(f_k), F0 real.
#[derive(Debug, Clone)]
pub struct FourierGenFunction {
    f0: PolyCoeff,
    modes: BTreeMap<ModeKey, PolyCoeff>,
    k_rep: i64,
    dom: DomainSpec,
}

fn l1(k: &[i64]) -> i64 {
    k.iter().map(|c| c.abs()).sum()
}

impl FourierGenFunction {
    /// Build and validate: mode keys within the cutoff, reality invariant.
    /// Tiny asymmetries (relative 1e-7) are symmetrized; larger ones are a
    /// representation error.
    pub fn new(
        f0: PolyCoeff,
        modes: BTreeMap<ModeKey, PolyCoeff>,
        k_rep: i64,
        dom: DomainSpec,
    ) -> Result<Self> {
        let n = dom.dim();
        if f0.dim() != n {
            return Err(Error::parameter("F0", "dimension mismatch with domain"));
        }
        if k_rep < 0 {
            return Err(Error::parameter("K_rep", "must be >= 0"));
        }
        for (k, p) in &modes {
            if k.len() != n || p.dim() != n {
                return Err(Error::parameter("modes", "dimension mismatch"));
            }
            if l1(k) > k_rep {
                return Err(Error::parameter(
                    "modes",
                    format!("mode {k:?} exceeds cutoff K_rep = {k_rep}"),
                ));
            }
        }
        let mut f = Self {
            f0,
            modes,
            k_rep,
            dom,
        };
        f.symmetrize()?;
        Ok(f)
    }

    /// Purely integrable function (no angle dependence beyond F0).
    pub fn integrable(f0: PolyCoeff, k_rep: i64, dom: DomainSpec) -> Result<Self> {
        Self::new(f0, BTreeMap::new(), k_rep, dom)
    }

    /// Enforce f_{-k} = conj(f_k) by averaging; error if the asymmetry is
    /// beyond floating-point noise relative to the pair's magnitude.
    fn symmetrize(&mut self) -> Result<()> {
        // canonical representative per {k, -k} pair, so pairs with only the
        // larger key stored are still visited
        let keys: std::collections::BTreeSet<ModeKey> = self
            .modes
            .keys()
            .map(|k| {
                let neg: ModeKey = k.iter().map(|c| -c).collect();
                k.clone().min(neg)
            })
            .collect();
        let scale = self
            .modes
            .values()
            .map(|p| p.sup_bound(&self.radii()))
            .fold(0.0, f64::max)
            .max(1e-300);
        for k in keys {
            let neg: ModeKey = k.iter().map(|c| -c).collect();
            let pk = self.modes.get(&k).cloned();
            let pn = self.modes.get(&neg).cloned();
            match (pk, pn) {
                (Some(a), Some(b)) => {
                    let mut sym = a.clone();
                    sym.add_assign(&b.conjugate());
                    sym.scale(Complex64::new(0.5, 0.0));
                    let mut defect = a.clone();
                    defect.sub_assign(&b.conjugate());
                    if defect.sup_bound(&self.radii()) > 1e-7 * scale {
                        return Err(Error::Representation(
                            "reality invariant violated: f_{-k} != conj(f_k)".into(),
                        ));
                    }
                    if k == neg {
                        // k = 0: symmetrized value is the real part
                        self.modes.insert(k.clone(), sym);
                    } else {
                        self.modes.insert(k.clone(), sym.clone());
                        self.modes.insert(neg, sym.conjugate());
                    }
                }
                (Some(a), None) | (None, Some(a)) => {
                    if a.sup_bound(&self.radii()) > 1e-7 * scale {
                        return Err(Error::Representation(
                            "reality invariant violated: unpaired mode".into(),
                        ));
                    }
                    self.modes.remove(&k);
                    self.modes.remove(&neg);
                }
                (None, None) => {}
            }
        }
        self.modes.retain(|_, p| !p.is_zero());
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dom.dim()
    }

    pub fn f0(&self) -> &PolyCoeff {
        &self.f0
    }

    pub fn modes(&self) -> &BTreeMap<ModeKey, PolyCoeff> {
        &self.modes
    }

    pub fn k_rep(&self) -> i64 {
        self.k_rep
    }

    pub fn dom(&self) -> &DomainSpec {
        &self.dom
    }

    /// Certified sup radii for the action coefficients: per-axis half-width
    /// plus rho1.
    fn radii(&self) -> Vec<f64> {
        self.dom
            .half_widths()
            .iter()
            .map(|h| h + self.dom.rho1)
            .collect()
    }

    /// Add c(x) cos(k.y) to the perturbation part (c real polynomial).
    pub fn add_cos(&mut self, k: &[i64], coeff: &PolyCoeff) -> Result<()> {
        self.add_pair(k, coeff, Complex64::new(0.5, 0.0))
    }

    /// Add c(x) sin(k.y).
    pub fn add_sin(&mut self, k: &[i64], coeff: &PolyCoeff) -> Result<()> {
        self.add_pair(k, coeff, Complex64::new(0.0, -0.5))
    }

    fn add_pair(&mut self, k: &[i64], coeff: &PolyCoeff, half: Complex64) -> Result<()> {
        if l1(k) > self.k_rep {
            return Err(Error::parameter("mode", "exceeds K_rep"));
        }
        let mut plus = coeff.clone();
        plus.scale(half);
        let mut minus = coeff.clone();
        minus.scale(half.conj());
        let neg: ModeKey = k.iter().map(|c| -c).collect();
        entry_add(&mut self.modes, k.to_vec(), &plus);
        entry_add(&mut self.modes, neg, &minus);
        Ok(())
    }

    /// Per-axis powers of e^{i y_j} for exponents -k_rep..k_rep.
    fn angle_powers(&self, y: &[Complex64]) -> Vec<Vec<Complex64>> {
        let k = self.k_rep as usize;
        y.iter()
            .map(|&yj| {
                let base = (Complex64::i() * yj).exp();
                let inv = (-Complex64::i() * yj).exp();
                let mut col = vec![Complex64::new(1.0, 0.0); 2 * k + 1];
                for e in 1..=k {
                    col[k + e] = col[k + e - 1] * base;
                    col[k - e] = col[k - e + 1] * inv;
                }
                col
            })
            .collect()
    }

    fn phase(&self, powers: &[Vec<Complex64>], k: &[i64]) -> Complex64 {
        let off = self.k_rep;
        let mut p = Complex64::new(1.0, 0.0);
        for (j, &kj) in k.iter().enumerate() {
            p *= powers[j][(kj + off) as usize];
        }
        p
    }

    /// Perturbation part f(x, y) at a complex point.
    pub fn eval_pert(&self, x: &[Complex64], y: &[Complex64]) -> Complex64 {
        let powers = self.angle_powers(y);
        let mut sum = Complex64::ZERO;
        for (k, p) in &self.modes {
            sum += p.eval(x) * self.phase(&powers, k);
        }
        sum
    }

    /// Full value F0(x) + f(x, y).
    pub fn eval_full(&self, x: &[Complex64], y: &[Complex64]) -> Complex64 {
        self.f0.eval(x) + self.eval_pert(x, y)
    }

    /// Gradient of the perturbation with respect to actions.
    pub fn pert_grad_action(&self, x: &[Complex64], y: &[Complex64]) -> Vec<Complex64> {
        let powers = self.angle_powers(y);
        let n = self.dim();
        let mut grad = vec![Complex64::ZERO; n];
        for (k, p) in &self.modes {
            let phase = self.phase(&powers, k);
            for (j, g) in grad.iter_mut().enumerate() {
                *g += p.derivative(j).eval(x) * phase;
            }
        }
        grad
    }

    /// Gradient of the perturbation with respect to angles.
    pub fn pert_grad_angle(&self, x: &[Complex64], y: &[Complex64]) -> Vec<Complex64> {
        let powers = self.angle_powers(y);
        let n = self.dim();
        let mut grad = vec![Complex64::ZERO; n];
        for (k, p) in &self.modes {
            let v = p.eval(x) * self.phase(&powers, k);
            for (j, g) in grad.iter_mut().enumerate() {
                *g += Complex64::i() * k[j] as f64 * v;
            }
        }
        grad
    }

    /// Exact partial derivative of the perturbation with respect to action j.
    pub fn d_action(&self, j: usize) -> FourierGenFunction {
        let modes = self
            .modes
            .iter()
            .map(|(k, p)| (k.clone(), p.derivative(j)))
            .filter(|(_, p)| !p.is_zero())
            .collect();
        FourierGenFunction {
            f0: self.f0.derivative(j),
            modes,
            k_rep: self.k_rep,
            dom: self.dom.clone(),
        }
    }

    /// Exact partial derivative of the perturbation with respect to angle j
    /// (mode k picks up a factor i k_j; F0 drops out).
    pub fn d_angle(&self, j: usize) -> FourierGenFunction {
        let modes = self
            .modes
            .iter()
            .filter(|(k, _)| k[j] != 0)
            .map(|(k, p)| {
                let mut q = p.clone();
                q.scale(Complex64::i() * k[j] as f64);
                (k.clone(), q)
            })
            .collect();
        FourierGenFunction {
            f0: PolyCoeff::zero(self.dim(), 0, self.f0.reference_point().to_vec()),
            modes,
            k_rep: self.k_rep,
            dom: self.dom.clone(),
        }
    }

    /// Copy with the integrable part zeroed.
    pub fn perturbation(&self) -> FourierGenFunction {
        FourierGenFunction {
            f0: PolyCoeff::zero(self.dim(), 0, self.f0.reference_point().to_vec()),
            modes: self.modes.clone(),
            k_rep: self.k_rep,
            dom: self.dom.clone(),
        }
    }

    /// Certified weighted norm of the perturbation part on `dom`:
    /// sum_k sup-bound(f_k) e^{|k|_1 rho2}.
    pub fn weighted_norm(&self, dom: &DomainSpec) -> f64 {
        let radii: Vec<f64> = dom.half_widths().iter().map(|h| h + dom.rho1).collect();
        self.modes
            .iter()
            .map(|(k, p)| p.sup_bound(&radii) * (l1(k) as f64 * dom.rho2).exp())
            .sum()
    }

    /// Sampled lower estimate of the weighted norm: per-mode max |f_k| over a
    /// complex sample cloud, with the same exponential weights.
    pub fn weighted_norm_sampled(&self, dom: &DomainSpec, per_axis: usize) -> f64 {
        let samples = dom.complex_samples(per_axis);
        self.modes
            .iter()
            .map(|(k, p)| {
                let sup = samples
                    .iter()
                    .map(|z| p.eval(z).norm())
                    .fold(0.0, f64::max);
                sup * (l1(k) as f64 * dom.rho2).exp()
            })
            .sum()
    }

    /// Pointwise sup estimate |f|: max |f(x, y)| over sampled real points
    /// (diagnostic; always <= weighted_norm).
    pub fn sup_estimate(&self, dom: &DomainSpec, per_axis: usize, angle_nodes: usize) -> f64 {
        let grid = dom.real_grid(per_axis);
        let n = self.dim();
        let mut sup: f64 = 0.0;
        for node in &grid {
            let x: Vec<Complex64> = node.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            let mut angle_axes = Vec::with_capacity(n);
            for _ in 0..n {
                angle_axes.push(
                    (0..angle_nodes)
                        .map(|i| crate::domain::TAU * i as f64 / angle_nodes as f64)
                        .collect::<Vec<f64>>(),
                );
            }
            for y in crate::domain::cartesian_product(&angle_axes) {
                let yc: Vec<Complex64> = y.iter().map(|&v| Complex64::new(v, 0.0)).collect();
                sup = sup.max(self.eval_pert(&x, &yc).norm());
            }
        }
        sup
    }

    /// Certified vectorfield norm of the perturbation:
    /// max(|df/dtheta|_{l1 over components}, c |df/dI|_{max over components}).
    pub fn vectorfield_norm(&self, dom: &DomainSpec, c: f64) -> f64 {
        let n = self.dim();
        let angle_part: f64 = (0..n).map(|j| self.d_angle(j).weighted_norm(dom)).sum();
        let action_part: f64 = (0..n)
            .map(|j| self.d_action(j).weighted_norm(dom))
            .fold(0.0, f64::max);
        angle_part.max(c * action_part)
    }

    /// Modes with |k|_1 > K (the tail discarded by truncation).
    pub fn project_tail(&self, k_cut: i64) -> FourierGenFunction {
        self.filter_modes(|k| l1(k) > k_cut)
    }

    /// Modes with |k|_1 <= K.
    pub fn project_low(&self, k_cut: i64) -> FourierGenFunction {
        self.filter_modes(|k| l1(k) <= k_cut)
    }

    /// Modes in the lattice with |k|_1 <= K (the resonant part P_M T_K f).
    pub fn project_resonant(&self, m: &Lattice, k_cut: i64) -> FourierGenFunction {
        self.filter_modes(|k| l1(k) <= k_cut && m.contains(k))
    }

    /// Modes outside the lattice with |k|_1 <= K.
    pub fn project_nonresonant(&self, m: &Lattice, k_cut: i64) -> FourierGenFunction {
        self.filter_modes(|k| l1(k) <= k_cut && !m.contains(k))
    }

    fn filter_modes(&self, keep: impl Fn(&[i64]) -> bool) -> FourierGenFunction {
        FourierGenFunction {
            f0: PolyCoeff::zero(self.dim(), 0, self.f0.reference_point().to_vec()),
            modes: self
                .modes
                .iter()
                .filter(|(k, _)| keep(k))
                .map(|(k, p)| (k.clone(), p.clone()))
                .collect(),
            k_rep: self.k_rep,
            dom: self.dom.clone(),
        }
    }

    /// Sum of perturbation parts (F0 taken from self).
    pub fn add_pert(&self, other: &FourierGenFunction) -> FourierGenFunction {
        let mut modes = self.modes.clone();
        for (k, p) in &other.modes {
            entry_add(&mut modes, k.clone(), p);
        }
        modes.retain(|_, p| !p.is_zero());
        FourierGenFunction {
            f0: self.f0.clone(),
            modes,
            k_rep: self.k_rep.max(other.k_rep),
            dom: self.dom.clone(),
        }
    }

    /// Difference of perturbation parts (F0 taken from self).
    pub fn sub_pert(&self, other: &FourierGenFunction) -> FourierGenFunction {
        let mut modes = self.modes.clone();
        for (k, p) in &other.modes {
            let mut neg = p.clone();
            neg.scale(Complex64::new(-1.0, 0.0));
            entry_add(&mut modes, k.clone(), &neg);
        }
        modes.retain(|_, p| !p.is_zero());
        FourierGenFunction {
            f0: self.f0.clone(),
            modes,
            k_rep: self.k_rep.max(other.k_rep),
            dom: self.dom.clone(),
        }
    }

    /// Scale the perturbation part by a real factor.
    pub fn scale_pert(&self, factor: f64) -> FourierGenFunction {
        let mut out = self.clone();
        for p in out.modes.values_mut() {
            p.scale(Complex64::new(factor, 0.0));
        }
        out
    }

    /// Truncated product of perturbation parts: mode orders above K_rep and
    /// polynomial degrees above the operands' bound are discarded, and the
    /// discarded remainder's weighted norm is reported alongside the result.
    pub fn mul_truncated(&self, other: &FourierGenFunction) -> (FourierGenFunction, f64) {
        let k_rep = self.k_rep.max(other.k_rep);
        let degree = self.degree_bound().max(other.degree_bound());
        let radii = self.radii();
        let mut modes: BTreeMap<ModeKey, PolyCoeff> = BTreeMap::new();
        let mut discarded = 0.0;
        for (ka, pa) in &self.modes {
            for (kb, pb) in &other.modes {
                let k: ModeKey = ka.iter().zip(kb).map(|(a, b)| a + b).collect();
                let (prod, poly_lost) = pa.mul_truncated(pb, degree);
                let weight = (l1(&k) as f64 * self.dom.rho2).exp();
                if l1(&k) <= k_rep {
                    entry_add(&mut modes, k, &prod);
                    discarded += poly_lost * weight;
                } else {
                    discarded += (prod.sup_bound(&radii) + poly_lost) * weight;
                }
            }
        }
        modes.retain(|_, p| !p.is_zero());
        let out = FourierGenFunction {
            f0: PolyCoeff::zero(self.dim(), 0, self.f0.reference_point().to_vec()),
            modes,
            k_rep,
            dom: self.dom.clone(),
        };
        (out, discarded)
    }

    pub fn degree_bound(&self) -> u32 {
        self.modes
            .values()
            .map(|p| p.degree_bound())
            .fold(self.f0.degree_bound(), u32::max)
    }

    /// The partial stretching x -> gamma x: returns F'(x, y) = F(gamma x, y)
    /// / gamma on the box scaled by 1/gamma (angle widths unchanged).
    pub fn rescale(&self, gamma: f64) -> Result<FourierGenFunction> {
        if !(gamma > 0.0) {
            return Err(Error::parameter("gamma", "must be > 0"));
        }
        let intervals = self
            .dom
            .intervals()
            .iter()
            .map(|&(a, b)| {
                let (a, b) = (a / gamma, b / gamma);
                if a <= b {
                    (a, b)
                } else {
                    (b, a)
                }
            })
            .collect();
        let dom = DomainSpec::new(intervals, self.dom.rho1 / gamma, self.dom.rho2)?;
        let mut scaled_modes = BTreeMap::new();
        for (k, p) in &self.modes {
            scaled_modes.insert(k.clone(), p.affine_scale(gamma));
        }
        Ok(FourierGenFunction {
            f0: self.f0.affine_scale(gamma),
            modes: scaled_modes,
            k_rep: self.k_rep,
            dom,
        })
    }

    /// Serialize to the flat text format: header, then one record per stored
    /// coefficient `<tag or k-vector> ; <multi-index> ; <re> ; <im>` with 17
    /// significant digits (exact f64 round trip).
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let n = self.dim();
        writeln!(s, "fouriergen v1").unwrap();
        writeln!(s, "n {n}").unwrap();
        writeln!(s, "k_rep {}", self.k_rep).unwrap();
        // v + 0.0 canonicalizes negative zero so symmetrization noise cannot
        // flip the printed sign of a zero
        let fmt = |v: f64| format!("{:.16e}", v + 0.0);
        let joined = |xs: &[f64]| {
            xs.iter()
                .map(|&v| fmt(v))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let (los, his): (Vec<f64>, Vec<f64>) = self.dom.intervals().iter().cloned().unzip();
        writeln!(s, "box_lo {}", joined(&los)).unwrap();
        writeln!(s, "box_hi {}", joined(&his)).unwrap();
        writeln!(s, "rho {} {}", fmt(self.dom.rho1), fmt(self.dom.rho2)).unwrap();
        writeln!(s, "f0_degree {}", self.f0.degree_bound()).unwrap();
        writeln!(s, "f0_ref {}", joined(self.f0.reference_point())).unwrap();
        let write_terms = |s: &mut String, tag: &str, p: &PolyCoeff| {
            for (idx, c) in p.terms() {
                let mi = idx
                    .iter()
                    .map(|e| e.to_string())
                    .collect::<Vec<_>>()
                    .join(" ");
                writeln!(s, "{tag} ; {mi} ; {} ; {}", fmt(c.re), fmt(c.im)).unwrap();
            }
        };
        write_terms(&mut s, "F0", &self.f0);
        for (k, p) in &self.modes {
            let tag = k
                .iter()
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
                .join(" ");
            writeln!(s, "mode_degree {tag} ; {}", p.degree_bound()).unwrap();
            write_terms(&mut s, &tag, p);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let parse_err = |msg: &str| Error::Parse(msg.to_string());
        let header = lines.next().ok_or_else(|| parse_err("empty input"))?;
        if header.trim() != "fouriergen v1" {
            return Err(parse_err("unrecognized header"));
        }
        let mut n = 0usize;
        let mut k_rep = 0i64;
        let mut box_lo: Vec<f64> = vec![];
        let mut box_hi: Vec<f64> = vec![];
        let mut rho = (0.0, 0.0);
        let mut f0_degree = 0u32;
        let mut f0_ref: Vec<f64> = vec![];
        let mut f0_terms: Vec<(Vec<u32>, Complex64)> = vec![];
        let mut mode_degrees: BTreeMap<ModeKey, u32> = BTreeMap::new();
        let mut mode_terms: BTreeMap<ModeKey, Vec<(Vec<u32>, Complex64)>> = BTreeMap::new();
        let parse_f64s = |s: &str| -> Result<Vec<f64>> {
            s.split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| Error::Parse(e.to_string())))
                .collect()
        };
        for line in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("n ") {
                n = rest.trim().parse().map_err(|_| parse_err("bad n"))?;
            } else if let Some(rest) = line.strip_prefix("k_rep ") {
                k_rep = rest.trim().parse().map_err(|_| parse_err("bad k_rep"))?;
            } else if let Some(rest) = line.strip_prefix("box_lo ") {
                box_lo = parse_f64s(rest)?;
            } else if let Some(rest) = line.strip_prefix("box_hi ") {
                box_hi = parse_f64s(rest)?;
            } else if let Some(rest) = line.strip_prefix("rho ") {
                let v = parse_f64s(rest)?;
                if v.len() != 2 {
                    return Err(parse_err("rho needs two values"));
                }
                rho = (v[0], v[1]);
            } else if let Some(rest) = line.strip_prefix("f0_degree ") {
                f0_degree = rest.trim().parse().map_err(|_| parse_err("bad degree"))?;
            } else if let Some(rest) = line.strip_prefix("f0_ref ") {
                f0_ref = parse_f64s(rest)?;
            } else if let Some(rest) = line.strip_prefix("mode_degree ") {
                let (tag, deg) = rest
                    .split_once(';')
                    .ok_or_else(|| parse_err("bad mode_degree record"))?;
                let k: ModeKey = tag
                    .split_whitespace()
                    .map(|t| t.parse().map_err(|_| parse_err("bad mode key")))
                    .collect::<Result<_>>()?;
                mode_degrees.insert(
                    k,
                    deg.trim().parse().map_err(|_| parse_err("bad degree"))?,
                );
            } else {
                // coefficient record: tag ; multi-index ; re ; im
                let parts: Vec<&str> = line.split(';').map(str::trim).collect();
                if parts.len() != 4 {
                    return Err(parse_err("bad coefficient record"));
                }
                let idx: Vec<u32> = parts[1]
                    .split_whitespace()
                    .map(|t| t.parse().map_err(|_| parse_err("bad multi-index")))
                    .collect::<Result<_>>()?;
                let re: f64 = parts[2].parse().map_err(|_| parse_err("bad real part"))?;
                let im: f64 = parts[3].parse().map_err(|_| parse_err("bad imag part"))?;
                let c = Complex64::new(re, im);
                if parts[0] == "F0" {
                    f0_terms.push((idx, c));
                } else {
                    let k: ModeKey = parts[0]
                        .split_whitespace()
                        .map(|t| t.parse().map_err(|_| parse_err("bad mode key")))
                        .collect::<Result<_>>()?;
                    mode_terms.entry(k).or_default().push((idx, c));
                }
            }
        }
        if box_lo.len() != n || box_hi.len() != n || f0_ref.len() != n {
            return Err(parse_err("inconsistent dimensions"));
        }
        let dom = DomainSpec::new(
            box_lo.into_iter().zip(box_hi).collect(),
            rho.0,
            rho.1,
        )?;
        let f0 = PolyCoeff::from_terms(n, f0_degree, f0_ref.clone(), f0_terms)?;
        let mut modes = BTreeMap::new();
        for (k, terms) in mode_terms {
            let deg = mode_degrees
                .get(&k)
                .copied()
                .unwrap_or_else(|| terms.iter().map(|(i, _)| i.iter().sum()).max().unwrap_or(0));
            modes.insert(k.clone(), PolyCoeff::from_terms(n, deg, f0_ref.clone(), terms)?);
        }
        Self::new(f0, modes, k_rep, dom)
    }
}

fn entry_add(modes: &mut BTreeMap<ModeKey, PolyCoeff>, k: ModeKey, p: &PolyCoeff) {
    match modes.get_mut(&k) {
        Some(q) => q.add_assign(p),
        None => {
            modes.insert(k, p.clone());
        }
    }
}

/// Result of a certified-inequality check: both sides plus the verdict.
/// `inconclusive` marks the case where the certified left side exceeds the
/// right side but a sampled lower estimate does not — the slack of the
/// coefficient bound inverted the comparison, which is not a counterexample.
#[derive(Debug, Clone)]
pub struct InequalityReport {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
    pub inconclusive: bool,
}

/// Cauchy estimate |Df|_{G, rho - delta, c} <= (c / min(d1, c d2)) |f|_{G, rho}
/// with exact derivatives and certified norms on both sides.
pub fn cauchy_check(
    f: &FourierGenFunction,
    dom: &DomainSpec,
    delta: (f64, f64),
    c: f64,
) -> Result<InequalityReport> {
    let (d1, d2) = delta;
    if !(d1 > 0.0 && d2 > 0.0 && d1 <= dom.rho1 && d2 <= dom.rho2) {
        return Err(Error::parameter(
            "delta",
            "must satisfy 0 < delta <= (rho1, rho2)",
        ));
    }
    let shrunk = dom.shrink(d1, d2)?;
    let lhs = f.vectorfield_norm(&shrunk, c);
    let delta_hat = d1.min(c * d2);
    let rhs = (c / delta_hat) * f.weighted_norm(dom);
    verdict(f, &shrunk, c, lhs, rhs)
}

/// Tail estimate |D f^{>K}|_{G, rho - delta, c} <= e^{-K d2} |Df|_{G, rho, c}.
pub fn tail_check(
    f: &FourierGenFunction,
    dom: &DomainSpec,
    k_cut: i64,
    delta: (f64, f64),
    c: f64,
) -> Result<InequalityReport> {
    let (d1, d2) = delta;
    if !(d1 >= 0.0 && d2 > 0.0 && d1 <= dom.rho1 && d2 <= dom.rho2) {
        return Err(Error::parameter(
            "delta",
            "must satisfy 0 <= d1 <= rho1, 0 < d2 <= rho2",
        ));
    }
    let shrunk = dom.shrink(d1, d2)?;
    let tail = f.project_tail(k_cut);
    let lhs = tail.vectorfield_norm(&shrunk, c);
    let rhs = (-(k_cut as f64) * d2).exp() * f.vectorfield_norm(dom, c);
    verdict(&tail, &shrunk, c, lhs, rhs)
}

fn verdict(
    f: &FourierGenFunction,
    shrunk: &DomainSpec,
    c: f64,
    lhs: f64,
    rhs: f64,
) -> Result<InequalityReport> {
    if lhs <= rhs {
        return Ok(InequalityReport {
            lhs,
            rhs,
            pass: true,
            inconclusive: false,
        });
    }
    // certified lhs exceeded: fall back to a sampled lower estimate before
    // declaring a counterexample
    let n = f.dim();
    let sampled_angle: f64 = (0..n)
        .map(|j| f.d_angle(j).weighted_norm_sampled(shrunk, 5))
        .sum();
    let sampled_action: f64 = (0..n)
        .map(|j| f.d_action(j).weighted_norm_sampled(shrunk, 5))
        .fold(0.0, f64::max);
    let sampled_lhs = sampled_angle.max(c * sampled_action);
    Ok(InequalityReport {
        lhs,
        rhs,
        pass: false,
        inconclusive: sampled_lhs <= rhs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn dom1(rho1: f64, rho2: f64) -> DomainSpec {
        DomainSpec::new(vec![(-0.5, 0.5)], rho1, rho2).unwrap()
    }

    /// f = cos(y) on a width-1 box (n = 1).
    fn cos_y(dom: &DomainSpec, k_rep: i64) -> FourierGenFunction {
        let f0 = PolyCoeff::zero(1, 0, dom.center());
        let mut f = FourierGenFunction::integrable(f0, k_rep, dom.clone()).unwrap();
        let one = PolyCoeff::constant(1, Complex64::new(1.0, 0.0), dom.center());
        f.add_cos(&[1], &one).unwrap();
        f
    }

    #[test]
    fn weighted_norm_constant() {
        let dom = DomainSpec::new(vec![(-0.5, 0.5)], 0.3, 1.0).unwrap();
        let f0 = PolyCoeff::zero(1, 0, dom.center());
        let mut f = FourierGenFunction::integrable(f0, 2, dom.clone()).unwrap();
        let c = PolyCoeff::constant(1, Complex64::new(3.0, 0.0), dom.center());
        f.add_cos(&[0], &c).unwrap();
        assert_relative_eq!(f.weighted_norm(&dom), 3.0, max_relative = 1e-14);
    }

    #[test]
    fn weighted_norm_cos_is_e() {
        // cos y = (1/2)e^{iy} + (1/2)e^{-iy}: norm = e at rho2 = 1
        let dom = dom1(0.0, 1.0);
        let f = cos_y(&dom, 2);
        assert_relative_eq!(
            f.weighted_norm(&dom),
            std::f64::consts::E,
            max_relative = 1e-14
        );
    }

    #[test]
    fn sup_dominated_by_weighted_norm() {
        let dom = dom1(0.1, 0.7);
        let mut f = cos_y(&dom, 3);
        let mut x = PolyCoeff::coordinate(1, 0, dom.center());
        x.scale(Complex64::new(0.25, 0.0));
        f.add_sin(&[2], &x).unwrap();
        let norm = f.weighted_norm(&dom);
        assert!(f.sup_estimate(&dom, 11, 32) <= norm + 1e-12);
    }

    #[test]
    fn vectorfield_norm_cos() {
        // df/dtheta = -sin y, norm e; df/dI = 0
        let dom = dom1(0.0, 1.0);
        let f = cos_y(&dom, 2).scale_pert(1e-3);
        let vf = f.vectorfield_norm(&dom, 1.0);
        assert_relative_eq!(vf, 1e-3 * std::f64::consts::E, max_relative = 1e-14);
    }

    #[test]
    fn vectorfield_homogeneity() {
        let dom = dom1(0.2, 0.5);
        let mut f = cos_y(&dom, 3);
        let x = PolyCoeff::coordinate(1, 0, dom.center());
        f.add_sin(&[3], &x).unwrap();
        let a = f.vectorfield_norm(&dom, 0.3);
        let b = f.scale_pert(2.5).vectorfield_norm(&dom, 0.3);
        assert_relative_eq!(b, 2.5 * a, max_relative = 1e-13);
    }

    #[test]
    fn partials_of_cos_give_sin() {
        let dom = dom1(0.0, 1.0);
        let f = cos_y(&dom, 2);
        let df = f.d_angle(0);
        // -sin(y) at y = 0.7
        let x = [Complex64::new(0.0, 0.0)];
        let y = [Complex64::new(0.7, 0.0)];
        assert_relative_eq!(
            df.eval_pert(&x, &y).re,
            -(0.7f64).sin(),
            max_relative = 1e-14
        );
        assert!(df.eval_pert(&x, &y).im.abs() < 1e-15);
    }

    #[test]
    fn mixed_partials_commute() {
        let dom = dom1(0.3, 0.8);
        let mut f = cos_y(&dom, 3);
        let mut xsq = PolyCoeff::coordinate(1, 0, dom.center());
        let (sq, _) = xsq.mul_truncated(&xsq.clone(), 4);
        xsq = sq;
        f.add_cos(&[2], &xsq).unwrap();
        let a = f.d_action(0).d_angle(0);
        let b = f.d_angle(0).d_action(0);
        let x = [Complex64::new(0.2, 0.05)];
        let y = [Complex64::new(1.1, -0.1)];
        assert!((a.eval_pert(&x, &y) - b.eval_pert(&x, &y)).norm() < 1e-14);
    }

    #[test]
    fn projection_partition_is_exact() {
        let dom = DomainSpec::new(vec![(-0.5, 0.5), (-0.5, 0.5)], 0.1, 0.5).unwrap();
        let f0 = PolyCoeff::zero(2, 0, dom.center());
        let mut f = FourierGenFunction::integrable(f0, 4, dom.clone()).unwrap();
        let one = PolyCoeff::constant(2, Complex64::new(1.0, 0.0), dom.center());
        f.add_sin(&[1, 0], &one).unwrap();
        f.add_sin(&[1, 1], &one).unwrap();
        f.add_cos(&[0, 3], &one).unwrap();
        let m = Lattice::from_basis(2, &[vec![1, 0]]).unwrap();
        let k = 2;
        let res = f.project_resonant(&m, k);
        let nonres = f.project_nonresonant(&m, k);
        let tail = f.project_tail(k);
        // partition: sin y1 resonant; sin(y1+y2) nonresonant ((1,1) not in M);
        // cos(3 y2) tail (|k|=3 > 2)
        assert_eq!(res.modes().len(), 2);
        assert_eq!(nonres.modes().len(), 2);
        assert_eq!(tail.modes().len(), 2);
        let total = res.add_pert(&nonres.add_pert(&tail).perturbation());
        let diff = f.sub_pert(&total);
        assert!(diff.weighted_norm(&dom) < 1e-15);
    }

    #[test]
    fn full_lattice_has_no_nonresonant_part() {
        let dom = dom1(0.0, 0.5);
        let f = cos_y(&dom, 2);
        let full = Lattice::full(1);
        assert!(f.project_nonresonant(&full, 2).modes().is_empty());
    }

    #[test]
    fn cauchy_check_single_mode() {
        let dom = dom1(0.4, 1.0);
        let f = cos_y(&dom, 2).scale_pert(1e-3);
        let rep = cauchy_check(&f, &dom, (0.2, 0.5), 0.4).unwrap();
        assert!(rep.pass, "lhs {} rhs {}", rep.lhs, rep.rhs);
    }

    #[test]
    fn cauchy_check_constant_trivial() {
        let dom = dom1(0.4, 1.0);
        let f0 = PolyCoeff::zero(1, 0, dom.center());
        let mut f = FourierGenFunction::integrable(f0, 2, dom.clone()).unwrap();
        let c = PolyCoeff::constant(1, Complex64::new(2.0, 0.0), dom.center());
        f.add_cos(&[0], &c).unwrap();
        let rep = cauchy_check(&f, &dom, (0.1, 0.3), 1.0).unwrap();
        assert!(rep.pass);
        assert_eq!(rep.lhs, 0.0);
    }

    #[test]
    fn tail_estimate_holds() {
        let dom = dom1(0.3, 1.2);
        let mut f = cos_y(&dom, 6);
        let one = PolyCoeff::constant(1, Complex64::new(0.3, 0.0), dom.center());
        let x = PolyCoeff::coordinate(1, 0, dom.center());
        f.add_cos(&[3], &one).unwrap();
        f.add_sin(&[5], &x).unwrap();
        f.add_sin(&[6], &one).unwrap();
        let rep = tail_check(&f, &dom, 2, (0.1, 0.4), 0.25).unwrap();
        assert!(rep.pass, "lhs {} rhs {}", rep.lhs, rep.rhs);
    }

    #[test]
    fn reality_violation_rejected() {
        let dom = dom1(0.0, 0.5);
        let mut modes = BTreeMap::new();
        modes.insert(
            vec![1],
            PolyCoeff::constant(1, Complex64::new(1.0, 0.0), dom.center()),
        );
        // missing conjugate partner of comparable size
        let f0 = PolyCoeff::zero(1, 0, dom.center());
        assert!(FourierGenFunction::new(f0, modes, 2, dom).is_err());
    }

    #[test]
    fn rescale_identity_and_roundtrip() {
        let dom = dom1(0.4, 1.0);
        let mut f0 = PolyCoeff::coordinate(1, 0, dom.center());
        let (sq, _) = f0.mul_truncated(&f0.clone(), 4);
        f0 = sq;
        f0.scale(Complex64::new(0.5, 0.0));
        let mut f = FourierGenFunction::new(f0, BTreeMap::new(), 2, dom.clone()).unwrap();
        let one = PolyCoeff::constant(1, Complex64::new(1e-3, 0.0), dom.center());
        f.add_cos(&[1], &one).unwrap();

        let same = f.rescale(1.0).unwrap();
        let x = [Complex64::new(0.3, 0.0)];
        let y = [Complex64::new(0.9, 0.0)];
        assert!((same.eval_full(&x, &y) - f.eval_full(&x, &y)).norm() < 1e-15);

        let twice = f.rescale(2.0).unwrap();
        // F'(x, y) = F(2x, y)/2
        let x2 = [Complex64::new(0.15, 0.0)];
        assert_relative_eq!(
            twice.eval_full(&x2, &y).re,
            f.eval_full(&x, &y).re / 2.0,
            max_relative = 1e-14
        );
        let back = twice.rescale(0.5).unwrap();
        assert!((back.eval_full(&x, &y) - f.eval_full(&x, &y)).norm() < 1e-14);
        // perturbation norm scales as eps/gamma
        assert_relative_eq!(
            twice.weighted_norm(twice.dom()),
            f.weighted_norm(f.dom()) / 2.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn text_round_trip_is_exact() {
        let dom = dom1(0.4, 1.0);
        let mut f0 = PolyCoeff::coordinate(1, 0, dom.center());
        let (sq, _) = f0.mul_truncated(&f0.clone(), 6);
        f0 = sq;
        f0.scale(Complex64::new(0.5, 0.0));
        let mut f = FourierGenFunction::new(f0, BTreeMap::new(), 3, dom).unwrap();
        let c = PolyCoeff::constant(
            1,
            Complex64::new(0.1234567890123456, 0.0),
            f.dom().center(),
        );
        let x = PolyCoeff::coordinate(1, 0, f.dom().center());
        f.add_cos(&[1], &c).unwrap();
        f.add_sin(&[3], &x).unwrap();
        let text = f.to_text();
        let g = FourierGenFunction::from_text(&text).unwrap();
        assert_eq!(g.to_text(), text);
        assert_eq!(g.k_rep(), f.k_rep());
        let xs = [Complex64::new(0.37, 0.02)];
        let ys = [Complex64::new(2.1, -0.3)];
        assert!((g.eval_full(&xs, &ys) - f.eval_full(&xs, &ys)).norm() < 1e-16);
    }
}
