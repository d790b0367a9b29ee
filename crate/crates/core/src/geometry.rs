//! Resonance geometry: zones, blocks, and cylinders indexed by K-lattices,
//! the alpha/delta parameter schedule with its nonoverlap condition, the
//! small-denominator lower bound, and the projected-frequency bound for
//! lattice-constrained vectors.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::domain::{DomainSpec, FrequencyMap, TAU};
use crate::error::{Error, Result};
use crate::lattice::{
    enumerate_k_generated_lattices, integer_vectors_l1, lattice_vectors_l1, Lattice,
};

/// The resonance-zone widths alpha_1..alpha_n and cylinder thicknesses
/// delta_1..delta_n, tied together by delta_r = alpha_r / (3 K beta) and the
/// growth law alpha_r = (2/mu)^r r! K^{r(r-1)/2} alpha_1 for r >= 2.
#[derive(Debug, Clone)]
pub struct Schedule {
    pub alpha: Vec<f64>,
    pub delta: Vec<f64>,
    pub k: i64,
    pub beta: f64,
    pub mu: f64,
}

impl Schedule {
    pub fn new(n: usize, alpha1: f64, k: i64, beta: f64, mu: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::parameter("n", "must be >= 1"));
        }
        if !(alpha1 > 0.0 && alpha1 < 1.0) {
            return Err(Error::parameter("alpha1", "must lie in (0, 1)"));
        }
        if k < 1 {
            return Err(Error::parameter("K", "must be >= 1"));
        }
        if !(beta > 0.0 && mu > 0.0 && mu <= 1.0) {
            return Err(Error::parameter("beta/mu", "need beta > 0, 0 < mu <= 1"));
        }
        let mut alpha = Vec::with_capacity(n);
        for r in 1..=n {
            let a = if r == 1 {
                alpha1
            } else {
                (2.0 / mu).powi(r as i32)
                    * factorial(r)
                    * (k as f64).powf(0.5 * (r * (r - 1)) as f64)
                    * alpha1
            };
            alpha.push(a);
        }
        if alpha[n - 1] >= 1.0 {
            return Err(Error::parameter(
                "alpha1",
                format!("alpha_n = {:.3e} must stay below 1", alpha[n - 1]),
            ));
        }
        let delta = alpha
            .iter()
            .map(|a| a / (3.0 * k as f64 * beta))
            .collect();
        Ok(Self {
            alpha,
            delta,
            k,
            beta,
            mu,
        })
    }

    /// The canonical parameter choice: alpha_n = 4 M K^{-n} sigma_1, beta =
    /// min alpha_i = alpha_1, mu = m/M.
    pub fn canonical(n: usize, k: i64, m_lower: f64, m_upper: f64, sigma1: f64) -> Result<Self> {
        if !(sigma1 > 0.0 && sigma1 < 1.0 / (4.0 * m_upper)) {
            return Err(Error::hypothesis(
                "sigma1",
                format!("need 0 < sigma1 < 1/(4M) = {:.3e}", 1.0 / (4.0 * m_upper)),
            ));
        }
        let mu = m_lower / m_upper;
        let alpha_n = 4.0 * m_upper * (k as f64).powi(-(n as i32)) * sigma1;
        let alpha1 = if n == 1 {
            alpha_n
        } else {
            alpha_n
                / ((2.0 / mu).powi(n as i32)
                    * factorial(n)
                    * (k as f64).powf(0.5 * (n * (n - 1)) as f64))
        };
        Self::new(n, alpha1, k, alpha1, mu)
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    /// The sufficient condition for nonoverlapping of resonances:
    /// alpha_{r+1} - K beta (delta_r + 4 delta_r / mu
    ///                       + 2 r K^{r-1} alpha_r / (beta mu)) >= alpha_r
    /// for r = 1..n-1; returns the per-r margins (lhs - rhs).
    pub fn nonoverlap_margins(&self) -> Vec<f64> {
        let n = self.dim();
        let kf = self.k as f64;
        (1..n)
            .map(|r| {
                let dr = self.delta[r - 1];
                let ar = self.alpha[r - 1];
                let reach = dr
                    + 4.0 * dr / self.mu
                    + 2.0 * r as f64 * kf.powi(r as i32 - 1) * ar / (self.beta * self.mu);
                self.alpha[r] - kf * self.beta * reach - ar
            })
            .collect()
    }

    pub fn nonoverlap_ok(&self) -> bool {
        self.nonoverlap_margins().iter().all(|&m| m >= 0.0)
    }

    /// Diameter bound for rank-r cylinders.
    pub fn cylinder_diameter_bound(&self, r: usize) -> f64 {
        let kf = self.k as f64;
        4.0 * self.delta[r - 1] / self.mu
            + 2.0 * r as f64 * kf.powi(r as i32 - 1) * self.alpha[r - 1] / (self.beta * self.mu)
    }
}

fn factorial(r: usize) -> f64 {
    (1..=r).map(|i| i as f64).product()
}

/// A point's resonant block: the lattice (trivial for the nonresonant block
/// B_0) and the integer offsets l, one per canonical basis vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockLabel {
    pub lattice: Lattice,
    pub basis: Vec<Vec<i64>>,
    pub l: Vec<i64>,
}

impl BlockLabel {
    pub fn rank(&self) -> usize {
        self.lattice.rank()
    }

    pub fn nonresonant(n: usize) -> Self {
        Self {
            lattice: Lattice::trivial(n),
            basis: vec![],
            l: vec![],
        }
    }
}

/// One enumerated lattice with its canonical K-basis (ordering / tie-break
/// key) and its sign-normalized short vectors (zone membership candidates).
struct LatticeEntry {
    lat: Lattice,
    canonical: Vec<Vec<i64>>,
    shorts: Vec<Vec<i64>>,
}

/// Classification context: the frequency map over a box, a schedule, and the
/// enumerated K-lattices of every rank with canonical K-bases. The lattice
/// family includes non-maximal K-generated lattices: these label
/// period-multiplying resonances (k.omega near an odd multiple of pi),
/// without which the zones would not satisfy the block-covering properties.
pub struct ResonanceGeometry {
    omega: FrequencyMap,
    dom: DomainSpec,
    pub schedule: Schedule,
    /// ranks[r-1] = rank-r lattices, sorted by canonical basis
    ranks: Vec<Vec<LatticeEntry>>,
    pub l_bound: i64,
}

impl ResonanceGeometry {
    pub fn new(omega: FrequencyMap, dom: DomainSpec, schedule: Schedule) -> Result<Self> {
        let n = dom.dim();
        if omega.dim() != n || schedule.dim() != n {
            return Err(Error::parameter(
                "geometry",
                "omega, box, and schedule dimensions must agree",
            ));
        }
        let k = schedule.k;
        let mut ranks = Vec::with_capacity(n);
        for r in 1..=n {
            let mut list = Vec::new();
            for lat in enumerate_k_generated_lattices(n, k, r)? {
                let canonical = canonical_k_basis(&lat, k).ok_or_else(|| {
                    Error::Representation(format!(
                        "no K-basis found for enumerated lattice {:?}",
                        lat.basis()
                    ))
                })?;
                let shorts = sign_normalized(lattice_vectors_l1(&lat, k));
                list.push(LatticeEntry {
                    lat,
                    canonical,
                    shorts,
                });
            }
            list.sort_by(|a, b| a.canonical.cmp(&b.canonical));
            ranks.push(list);
        }
        // |2 pi l| <= |k . omega| + alpha <= K sup|omega|_inf + 1
        let half = dom.half_widths();
        let sup_omega = omega
            .components()
            .iter()
            .map(|c| c.sup_bound(&half))
            .fold(0.0, f64::max);
        let l_bound = ((k as f64 * sup_omega + 1.0) / TAU).ceil() as i64;
        Ok(Self {
            omega,
            dom,
            schedule,
            ranks,
            l_bound,
        })
    }

    pub fn omega(&self) -> &FrequencyMap {
        &self.omega
    }

    pub fn dom(&self) -> &DomainSpec {
        &self.dom
    }

    pub fn lattice_count(&self, r: usize) -> usize {
        self.ranks[r - 1].len()
    }

    /// Zone membership for one lattice, existential over its K-bases: the
    /// lexicographically smallest r of the lattice's short vectors that
    /// generate it exactly and each satisfy |k.omega + 2 pi l| <= alpha_r
    /// (l uniquely the nearest offset, alpha_r < pi). Returns (basis, l).
    fn zone_basis(
        &self,
        entry: &LatticeEntry,
        w: &[f64],
        alpha_r: f64,
    ) -> Option<(Vec<Vec<i64>>, Vec<i64>)> {
        let r = entry.lat.rank();
        let mut resonant: Vec<(Vec<i64>, i64)> = Vec::new();
        for kvec in &entry.shorts {
            let dot: f64 = kvec.iter().zip(w).map(|(&ki, wi)| ki as f64 * wi).sum();
            let lj = (-dot / TAU).round() as i64;
            if (dot + TAU * lj as f64).abs() <= alpha_r {
                resonant.push((kvec.clone(), lj));
            }
        }
        if resonant.len() < r {
            return None;
        }
        let candidates: Vec<Vec<i64>> = resonant.iter().map(|(k, _)| k.clone()).collect();
        let basis = smallest_generating_subset(&entry.lat, &candidates)?;
        let l = basis
            .iter()
            .map(|k| resonant.iter().find(|(c, _)| c == k).unwrap().1)
            .collect();
        Some((basis, l))
    }

    /// Is x in some rank-r zone (membership in Z*_r)?
    pub fn in_zone_star(&self, x: &[f64], r: usize) -> bool {
        if r == 0 {
            return true;
        }
        if r > self.dom.dim() {
            return false;
        }
        let w = self.omega.eval_real(x);
        let alpha_r = self.schedule.alpha[r - 1];
        self.ranks[r - 1]
            .iter()
            .any(|entry| self.zone_basis(entry, &w, alpha_r).is_some())
    }

    /// Resonant-block classification: the highest rank r with x in a rank-r
    /// zone wins; ties broken by the (sorted) canonical basis order. Never
    /// fails — the nonresonant block B_0 is the fallback.
    pub fn classify_point(&self, x: &[f64]) -> BlockLabel {
        let n = self.dom.dim();
        let w = self.omega.eval_real(x);
        for r in (1..=n).rev() {
            let alpha_r = self.schedule.alpha[r - 1];
            for entry in &self.ranks[r - 1] {
                if let Some((basis, l)) = self.zone_basis(entry, &w, alpha_r) {
                    return BlockLabel {
                        lattice: entry.lat.clone(),
                        basis,
                        l,
                    };
                }
            }
        }
        BlockLabel::nonresonant(n)
    }

    /// Covering / consistency check over a grid: every point classifies, the
    /// claimed rank r is confirmed by independent zone-star membership
    /// (in Z*_r, not in Z*_{r+1}), matching the block set identities.
    pub fn covering_check(&self, grid: &[Vec<f64>]) -> bool {
        grid.iter().all(|x| {
            let label = self.classify_point(x);
            let r = label.rank();
            self.in_zone_star(x, r) && !self.in_zone_star(x, r + 1)
        })
    }

    /// Gap property at a sample: if x classifies to rank r < n, then
    /// every k in Z^n_K outside the lattice keeps |k.omega + 2 pi l0| above
    /// alpha_{r+1}. Returns the violation count.
    pub fn resonance_gap_violations(&self, points: &[Vec<f64>]) -> usize {
        let n = self.dom.dim();
        let kvecs = integer_vectors_l1(n, self.schedule.k);
        points
            .iter()
            .filter(|x| {
                let label = self.classify_point(x);
                let r = label.rank();
                if r >= n {
                    return false;
                }
                let w = self.omega.eval_real(x);
                let alpha_next = self.schedule.alpha[r];
                kvecs
                    .iter()
                    .filter(|k| !label.lattice.contains(k))
                    .any(|k| {
                        let dot: f64 =
                            k.iter().zip(&w).map(|(&ki, wi)| ki as f64 * wi).sum();
                        let frac = dist_to_multiple(dot, TAU);
                        frac <= alpha_next
                    })
            })
            .count()
    }

    /// Zone disjointness in l: at each grid point and for each lattice, at
    /// most one l satisfies the zone condition. Returns violations.
    pub fn zone_l_disjointness_violations(&self, grid: &[Vec<f64>]) -> usize {
        let n = self.dom.dim();
        let mut bad = 0;
        for x in grid {
            let w = self.omega.eval_real(x);
            for r in 1..=n {
                let alpha_r = self.schedule.alpha[r - 1];
                for entry in &self.ranks[r - 1] {
                    // count admissible l vectors per canonical basis vector
                    for kvec in &entry.canonical {
                        let dot: f64 =
                            kvec.iter().zip(&w).map(|(&ki, wi)| ki as f64 * wi).sum();
                        let hits = (-self.l_bound..=self.l_bound)
                            .filter(|&lj| (dot + TAU * lj as f64).abs() <= alpha_r)
                            .count();
                        if hits > 1 {
                            bad += 1;
                        }
                    }
                }
            }
        }
        bad
    }

    /// Flat block-atlas records for a grid (for export/plotting).
    pub fn block_atlas(&self, grid: &[Vec<f64>]) -> Vec<(Vec<f64>, BlockLabel)> {
        grid.iter()
            .map(|x| (x.clone(), self.classify_point(x)))
            .collect()
    }

    /// Distance from x to the hyperplane through `base` parallel to the
    /// lattice span (the l2 norm of the orthogonal component of x - base).
    pub fn dist_to_lattice_plane(&self, basis: &[Vec<i64>], base: &[f64], x: &[f64]) -> f64 {
        let n = base.len();
        let d: Vec<f64> = x.iter().zip(base).map(|(a, b)| a - b).collect();
        if basis.is_empty() {
            return (d.iter().map(|v| v * v).sum::<f64>()).sqrt();
        }
        let r = basis.len();
        let b = DMatrix::from_fn(r, n, |i, j| basis[i][j] as f64);
        let g = &b * b.transpose();
        let rhs = &b * DVector::from_column_slice(&d);
        let coeffs = g
            .lu()
            .solve(&rhs)
            .expect("lattice basis is independent, Gram matrix invertible");
        let proj = b.transpose() * coeffs;
        d.iter()
            .enumerate()
            .map(|(i, v)| (v - proj[i]) * (v - proj[i]))
            .sum::<f64>()
            .sqrt()
    }

    /// Cylinder membership: in the zone Z^l_M and within delta_r of the
    /// lattice plane through the base point.
    pub fn in_cylinder(
        &self,
        basis: &[Vec<i64>],
        l: &[i64],
        base: &[f64],
        x: &[f64],
    ) -> bool {
        let r = basis.len();
        let alpha_r = self.schedule.alpha[r - 1];
        let delta_r = self.schedule.delta[r - 1];
        let w = self.omega.eval_real(x);
        let in_zone = basis.iter().zip(l).all(|(kvec, &lj)| {
            let dot: f64 = kvec.iter().zip(&w).map(|(&ki, wi)| ki as f64 * wi).sum();
            (dot + TAU * lj as f64).abs() <= alpha_r
        });
        in_zone && self.dist_to_lattice_plane(basis, base, x) <= delta_r
    }
}

/// Distance of t to the nearest integer multiple of `period`.
pub fn dist_to_multiple(t: f64, period: f64) -> f64 {
    let d = t.rem_euclid(period);
    d.min(period - d)
}

/// |1 - e^{i phi}| together with its certified lower bound
/// (2/pi) dist(phi, 2 pi Z); the bound holds for every real phi.
pub fn small_denominator_bound(phi: f64) -> (f64, f64) {
    let value = (1.0 - num_complex::Complex64::from_polar(1.0, phi)).norm();
    let lower = (2.0 / std::f64::consts::PI) * dist_to_multiple(phi, TAU);
    (value, lower)
}

/// Keep one sign per direction: first nonzero component positive.
fn sign_normalized(vectors: Vec<Vec<i64>>) -> Vec<Vec<i64>> {
    vectors
        .into_iter()
        .filter(|v| v.iter().find(|&&c| c != 0).is_some_and(|&c| c > 0))
        .collect()
}

/// Lexicographically smallest rank-many subset of `candidates` (assumed
/// sorted) generating the lattice exactly, if any.
fn smallest_generating_subset(lat: &Lattice, candidates: &[Vec<i64>]) -> Option<Vec<Vec<i64>>> {
    let r = lat.rank();
    if r == 0 {
        return Some(vec![]);
    }
    fn rec(
        candidates: &[Vec<i64>],
        start: usize,
        chosen: &mut Vec<Vec<i64>>,
        lat: &Lattice,
        r: usize,
    ) -> Option<Vec<Vec<i64>>> {
        if chosen.len() == r {
            let candidate = Lattice::from_basis(lat.ambient_dim(), chosen).ok()?;
            return if &candidate == lat {
                Some(chosen.clone())
            } else {
                None
            };
        }
        for i in start..candidates.len() {
            chosen.push(candidates[i].clone());
            if let Some(found) = rec(candidates, i + 1, chosen, lat, r) {
                return Some(found);
            }
            chosen.pop();
        }
        None
    }
    rec(candidates, 0, &mut Vec::new(), lat, r)
}

/// Lexicographically smallest K-basis of the lattice (first spanning r-subset
/// of the sign-normalized short lattice vectors in sorted order).
pub fn canonical_k_basis(lat: &Lattice, k_max: i64) -> Option<Vec<Vec<i64>>> {
    let short = sign_normalized(
        integer_vectors_l1(lat.ambient_dim(), k_max)
            .into_iter()
            .filter(|v| lat.contains(v))
            .collect(),
    );
    smallest_generating_subset(lat, &short)
}

/// Report of the projected-frequency bound check: for omega in the span of
/// the basis with |omega . k^(i)| <= alpha, the claim is
/// |omega|_2 < r K^{r-1} alpha with K = max |k^(i)|_1.
#[derive(Debug, Clone)]
pub struct ProjectedBoundReport {
    pub bound: f64,
    pub sampled_max: f64,
    pub exact_max: Option<f64>,
    pub pass: bool,
}

pub fn projected_bound_check(
    basis: &[Vec<i64>],
    alpha: f64,
    trials: usize,
    rng: &mut impl Rng,
) -> Result<ProjectedBoundReport> {
    let r = basis.len();
    if r == 0 {
        return Err(Error::parameter("basis", "must be nonempty"));
    }
    let n = basis[0].len();
    let k_max = basis
        .iter()
        .map(|v| v.iter().map(|c| c.abs()).sum::<i64>())
        .max()
        .unwrap() as f64;
    let bound = r as f64 * k_max.powi(r as i32 - 1) * alpha;
    if alpha == 0.0 {
        // only omega = 0 is admissible; the strict bound is vacuous
        return Ok(ProjectedBoundReport {
            bound,
            sampled_max: 0.0,
            exact_max: Some(0.0),
            pass: true,
        });
    }
    let b = DMatrix::from_fn(r, n, |i, j| basis[i][j] as f64);
    let g = &b * b.transpose();
    let g_inv = g
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::parameter("basis", "vectors must be linearly independent"))?;
    // |omega|_2^2 = t^T G^{-1} t where t_i = omega . k^(i)
    let norm_sq = |t: &DVector<f64>| (t.transpose() * &g_inv * t)[(0, 0)];
    let mut sampled_max: f64 = 0.0;
    for _ in 0..trials {
        let t = DVector::from_fn(r, |_, _| rng.gen_range(-alpha..=alpha));
        sampled_max = sampled_max.max(norm_sq(&t).max(0.0).sqrt());
    }
    // exact worst case: the quadratic form is convex, so the maximum over the
    // cube [-alpha, alpha]^r sits at a vertex
    let exact_max = if r <= 3 {
        let mut best: f64 = 0.0;
        for mask in 0..(1u32 << r) {
            let t = DVector::from_fn(r, |i, _| {
                if mask >> i & 1 == 1 {
                    alpha
                } else {
                    -alpha
                }
            });
            best = best.max(norm_sq(&t).max(0.0).sqrt());
        }
        Some(best)
    } else {
        None
    };
    let worst = exact_max.unwrap_or(sampled_max);
    // the strict bound is over the open cube |k.omega| < alpha; its closure
    // attains equality (e.g. the unimodular basis), so equality passes
    Ok(ProjectedBoundReport {
        bound,
        sampled_max,
        exact_max,
        pass: worst <= bound * (1.0 + 1e-12),
    })
}

/// Sampled cylinder-diameter check: pairs of points verified inside the
/// cylinder around `base` must be closer than the diameter bound.
#[derive(Debug, Clone)]
pub struct CylinderReport {
    pub pairs_checked: usize,
    pub max_distance: f64,
    pub bound: f64,
    pub pass: bool,
}

pub fn cylinder_diameter_check(
    geo: &ResonanceGeometry,
    label: &BlockLabel,
    base: &[f64],
    trials: usize,
    rng: &mut impl Rng,
) -> Result<CylinderReport> {
    let r = label.rank();
    if r == 0 {
        return Err(Error::parameter("label", "cylinders need rank >= 1"));
    }
    let bound = geo.schedule.cylinder_diameter_bound(r);
    let mut members: Vec<Vec<f64>> = vec![base.to_vec()];
    for _ in 0..trials {
        let x: Vec<f64> = geo
            .dom()
            .intervals()
            .iter()
            .map(|&(a, b)| rng.gen_range(a..=b))
            .collect();
        if geo.in_cylinder(&label.basis, &label.l, base, &x) {
            members.push(x);
        }
    }
    let mut max_distance: f64 = 0.0;
    let mut pairs_checked = 0;
    for i in 0..members.len() {
        for j in i + 1..members.len() {
            let d: f64 = members[i]
                .iter()
                .zip(&members[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            max_distance = max_distance.max(d);
            pairs_checked += 1;
        }
    }
    Ok(CylinderReport {
        pairs_checked,
        max_distance,
        bound,
        pass: max_distance <= bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::PolyCoeff;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn linear_omega_1d(dom: &DomainSpec) -> FrequencyMap {
        FrequencyMap::new(vec![PolyCoeff::coordinate(1, 0, dom.center())], 1.0, 1.0).unwrap()
    }

    #[test]
    fn schedule_formulas() {
        let s = Schedule::new(3, 1e-5, 4, 1e-5, 0.5).unwrap();
        // alpha_2 = (2/mu)^2 2! K^1 alpha_1 = 16 * 2 * 4 * 1e-5
        assert!((s.alpha[1] - 16.0 * 2.0 * 4.0 * 1e-5).abs() < 1e-17);
        // alpha_3 = (2/mu)^3 3! K^3 alpha_1
        assert!((s.alpha[2] - 64.0 * 6.0 * 64.0 * 1e-5).abs() < 1e-14);
        for (a, d) in s.alpha.iter().zip(&s.delta) {
            assert!((d - a / (3.0 * 4.0 * 1e-5)).abs() < 1e-12 * d.abs());
        }
    }

    #[test]
    fn canonical_schedule_nonoverlap() {
        for n in 1..=2 {
            let s = Schedule::canonical(n, 4, 1.0, 1.0, 0.1).unwrap();
            assert!(s.nonoverlap_ok(), "margins {:?}", s.nonoverlap_margins());
            assert!((s.alpha[n - 1] - 4.0 * 0.1 * (4f64).powi(-(n as i32))).abs() < 1e-15);
        }
    }

    #[test]
    fn all_points_nonresonant_when_far_from_resonance() {
        // omega(x) = x on [3.0, 3.3], K = 1, alpha1 = 0.1: pi is outside the
        // box and 2 pi unreachable, so everything is B_0
        let dom = DomainSpec::new(vec![(3.0, 3.3)], 0.0, 0.0).unwrap();
        let omega = linear_omega_1d(&dom);
        let s = Schedule::new(1, 0.1, 1, 0.1, 1.0).unwrap();
        let geo = ResonanceGeometry::new(omega, dom.clone(), s).unwrap();
        for x in dom.real_grid(100) {
            let label = geo.classify_point(&x);
            assert_eq!(label.rank(), 0, "point {x:?} misclassified");
        }
        assert!(geo.covering_check(&dom.real_grid(100)));
    }

    #[test]
    fn exact_resonance_classifies_resonant() {
        // omega(x) = x near 2 pi: k = 1, l = -1 gives k.omega + 2 pi l = 0
        let dom = DomainSpec::new(vec![(6.0, 6.5)], 0.0, 0.0).unwrap();
        let omega = linear_omega_1d(&dom);
        let s = Schedule::new(1, 0.1, 1, 0.1, 1.0).unwrap();
        let geo = ResonanceGeometry::new(omega, dom, s).unwrap();
        let label = geo.classify_point(&[TAU]);
        assert_eq!(label.rank(), 1);
        assert_eq!(label.l, vec![-1]);
    }

    #[test]
    fn small_denominator_extremes() {
        let (v, l) = small_denominator_bound(std::f64::consts::PI);
        assert!((v - 2.0).abs() < 1e-14);
        assert!((l - 2.0).abs() < 1e-14);
        let (v0, l0) = small_denominator_bound(TAU);
        assert!(v0 < 1e-15 && l0 < 1e-15);
    }

    #[test]
    fn small_denominator_sweep() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10000 {
            let phi = rng.gen_range(-10.0..10.0);
            let (v, l) = small_denominator_bound(phi);
            assert!(v >= l - 1e-14, "phi = {phi}: {v} < {l}");
        }
    }

    #[test]
    fn projected_bound_single_constraint() {
        // k = (1,1), alpha = 0.2: admissible omega = t (1,1) with |2t| <= 0.2
        // so |omega|_2 <= 0.1 sqrt(2) < 0.2
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rep = projected_bound_check(&[vec![1, 1]], 0.2, 1000, &mut rng).unwrap();
        assert!(rep.pass);
        let exact = rep.exact_max.unwrap();
        assert!((exact - 0.1 * 2f64.sqrt()).abs() < 1e-12);
        assert!((rep.bound - 0.2).abs() < 1e-15);
    }

    #[test]
    fn projected_bound_standard_basis() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let rep =
            projected_bound_check(&[vec![1, 0, 0], vec![0, 1, 0]], 0.3, 1000, &mut rng).unwrap();
        // diagonal Gram: exact max = sqrt(2) alpha < 2 K alpha = 0.6
        assert!(rep.pass);
        assert!((rep.exact_max.unwrap() - 0.3 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn projected_bound_degenerate_alpha() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rep = projected_bound_check(&[vec![1, 0]], 0.0, 10, &mut rng).unwrap();
        assert!(rep.pass);
    }

    #[test]
    fn projected_bound_randomized_bases() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let bases: Vec<Vec<Vec<i64>>> = vec![
            vec![vec![2, -1]],
            vec![vec![1, 1], vec![1, -2]],
            vec![vec![3, 1, 0], vec![0, 2, -1], vec![1, 0, 1]],
        ];
        for basis in &bases {
            let rep = projected_bound_check(basis, 0.05, 2000, &mut rng).unwrap();
            assert!(rep.pass, "basis {basis:?}: {rep:?}");
            assert!(rep.sampled_max <= rep.exact_max.unwrap() + 1e-12);
        }
    }

    #[test]
    fn cylinder_diameter_1d() {
        // n = 1, the lattice plane is all of R so the cylinder is the zone
        // slab; its width 2 alpha_1 / beta is below the diameter bound
        let dom = DomainSpec::new(vec![(5.9, 6.7)], 0.0, 0.0).unwrap();
        let omega = linear_omega_1d(&dom);
        let s = Schedule::new(1, 0.05, 1, 1.0, 1.0).unwrap();
        let geo = ResonanceGeometry::new(omega, dom, s).unwrap();
        let base = vec![TAU];
        let label = geo.classify_point(&base);
        assert_eq!(label.rank(), 1);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let rep = cylinder_diameter_check(&geo, &label, &base, 4000, &mut rng).unwrap();
        assert!(rep.pairs_checked > 100, "too few members: {rep:?}");
        assert!(rep.pass, "{rep:?}");
        // zone width is 2 alpha / beta = 0.1; the sampled diameter approaches
        // it and the bound exceeds it
        assert!(rep.max_distance <= 0.1 + 1e-12);
        assert!(rep.bound >= 0.1);
    }

    #[test]
    fn covering_and_gap_2d() {
        // two-dimensional frequency map with clustered resonances
        let dom = DomainSpec::new(vec![(5.8, 6.8), (5.8, 6.8)], 0.0, 0.0).unwrap();
        let c = dom.center();
        let comps = vec![
            PolyCoeff::coordinate(2, 0, c.clone()),
            PolyCoeff::coordinate(2, 1, c),
        ];
        let omega = FrequencyMap::new(comps, 1.0, 1.0).unwrap();
        let s = Schedule::new(2, 0.02, 3, 0.02, 1.0).unwrap();
        let geo = ResonanceGeometry::new(omega, dom.clone(), s).unwrap();
        let grid = dom.real_grid(40);
        assert!(geo.covering_check(&grid));
        assert_eq!(geo.resonance_gap_violations(&grid), 0);
        assert_eq!(geo.zone_l_disjointness_violations(&grid), 0);
        // the grid crosses omega = 2 pi resonances, so ranks 1 and 2 occur
        let atlas = geo.block_atlas(&grid);
        let max_rank = atlas.iter().map(|(_, l)| l.rank()).max().unwrap();
        assert_eq!(max_rank, 2);
    }

    #[test]
    fn classification_canonical_under_basis_relabeling() {
        let lat = Lattice::from_basis(2, &[vec![1, 1]]).unwrap();
        let b1 = canonical_k_basis(&lat, 3).unwrap();
        let lat2 = Lattice::from_basis(2, &[vec![-1, -1]]).unwrap();
        let b2 = canonical_k_basis(&lat2, 3).unwrap();
        assert_eq!(lat, lat2);
        assert_eq!(b1, b2);
        assert_eq!(b1, vec![vec![1, 1]]);
    }
}
