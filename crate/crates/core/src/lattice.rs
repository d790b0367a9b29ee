//! Maximal integer sublattices of Z^n with l1-bounded bases, canonicalized by
//! Hermite normal form. These index the resonant modules of the normal-form
//! construction and the resonance-zone classification.

use std::collections::BTreeSet;

use crate::error::{Error, Result};

/// A maximal rank-r sublattice of Z^n, stored as the rows of its Hermite
/// normal form (unique per lattice, so equality of the stored basis is
/// equality of lattices). Rank 0 is the trivial lattice {0}.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Lattice {
    n: usize,
    basis: Vec<Vec<i64>>,
}

impl Lattice {
    /// The trivial lattice {0}.
    pub fn trivial(n: usize) -> Self {
        Self { n, basis: vec![] }
    }

    /// The full lattice Z^n.
    pub fn full(n: usize) -> Self {
        let basis = (0..n)
            .map(|i| {
                let mut row = vec![0i64; n];
                row[i] = 1;
                row
            })
            .collect();
        Self { n, basis }
    }

    /// Build from a spanning set of integer vectors. The input need not be
    /// independent or reduced; the span's Hermite normal form is stored.
    /// Errors on arity mismatch or an empty ambient dimension.
    pub fn from_basis(n: usize, vectors: &[Vec<i64>]) -> Result<Self> {
        if n == 0 {
            return Err(Error::parameter("lattice", "ambient dimension 0"));
        }
        for v in vectors {
            if v.len() != n {
                return Err(Error::parameter("lattice", "basis vector arity mismatch"));
            }
        }
        let basis = hnf(vectors.to_vec(), n);
        Ok(Self { n, basis })
    }

    pub fn ambient_dim(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    /// The canonical (Hermite normal form) basis rows.
    pub fn basis(&self) -> &[Vec<i64>] {
        &self.basis
    }

    /// Membership: k is in the lattice iff adjoining it changes nothing.
    pub fn contains(&self, k: &[i64]) -> bool {
        if k.len() != self.n {
            return false;
        }
        if k.iter().all(|&c| c == 0) {
            return true;
        }
        let mut rows = self.basis.clone();
        rows.push(k.to_vec());
        hnf(rows, self.n) == self.basis
    }

    /// Maximality (saturation): no integer vector outside the lattice lies in
    /// its rational span. Equivalent to the gcd of all r x r minors of the
    /// basis matrix being 1. The trivial lattice is maximal by convention.
    pub fn is_maximal(&self) -> bool {
        let r = self.rank();
        if r == 0 {
            return true;
        }
        let mut g: i64 = 0;
        for cols in combinations(self.n, r) {
            let d = minor_det(&self.basis, &cols);
            g = gcd(g, d.abs());
            if g == 1 {
                return true;
            }
        }
        g == 1
    }

    /// True iff the lattice admits a basis of vectors with l1-norm <= K.
    /// Searched by brute force over short lattice vectors; intended for the
    /// small instances of the enumeration below.
    pub fn has_k_basis(&self, k_max: i64) -> bool {
        let r = self.rank();
        if r == 0 {
            return true;
        }
        let short: Vec<Vec<i64>> = lattice_vectors_l1(self, k_max);
        // any r independent short vectors spanning the same lattice
        subsets_span(&short, r, &self.basis, self.n)
    }
}

/// Row-style Hermite normal form: returns the nonzero rows, pivots positive,
/// entries above each pivot reduced into [0, pivot).
fn hnf(mut m: Vec<Vec<i64>>, n: usize) -> Vec<Vec<i64>> {
    m.retain(|row| row.iter().any(|&c| c != 0));
    let mut pivot_row = 0;
    for col in 0..n {
        if pivot_row >= m.len() {
            break;
        }
        // eliminate below pivot_row in this column by gcd steps
        loop {
            let mut best: Option<usize> = None;
            for (i, row) in m.iter().enumerate().skip(pivot_row) {
                if row[col] != 0 {
                    best = match best {
                        None => Some(i),
                        Some(j) if m[j][col].abs() > row[col].abs() => Some(i),
                        keep => keep,
                    };
                }
            }
            let Some(p) = best else { break };
            m.swap(pivot_row, p);
            let mut any = false;
            for i in pivot_row + 1..m.len() {
                if m[i][col] != 0 {
                    let q = m[i][col].div_euclid(m[pivot_row][col]);
                    for j in 0..n {
                        m[i][j] -= q * m[pivot_row][j];
                    }
                    any = any || m[i][col] != 0;
                }
            }
            if !any {
                break;
            }
        }
        if m[pivot_row][col] != 0 {
            if m[pivot_row][col] < 0 {
                for j in 0..n {
                    m[pivot_row][j] = -m[pivot_row][j];
                }
            }
            // reduce entries above the pivot into [0, pivot)
            for i in 0..pivot_row {
                let q = m[i][col].div_euclid(m[pivot_row][col]);
                if q != 0 {
                    for j in 0..n {
                        m[i][j] -= q * m[pivot_row][j];
                    }
                }
            }
            pivot_row += 1;
        }
    }
    m.truncate(pivot_row);
    m
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// All r-element column subsets of 0..n.
fn combinations(n: usize, r: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(r);
    fn rec(start: usize, n: usize, r: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == r {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, r, cur, out);
            cur.pop();
        }
    }
    rec(0, n, r, &mut cur, &mut out);
    out
}

/// Determinant of the square submatrix picking the given columns (r <= 3).
fn minor_det(rows: &[Vec<i64>], cols: &[usize]) -> i64 {
    match cols.len() {
        1 => rows[0][cols[0]],
        2 => {
            let (a, b) = (rows[0][cols[0]], rows[0][cols[1]]);
            let (c, d) = (rows[1][cols[0]], rows[1][cols[1]]);
            a * d - b * c
        }
        3 => {
            let m = |i: usize, j: usize| rows[i][cols[j]];
            m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1))
                - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0))
                + m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0))
        }
        r => unreachable!("minor size {r} out of supported range"),
    }
}

/// All nonzero lattice vectors with l1-norm <= k_max (both signs).
pub fn lattice_vectors_l1(lat: &Lattice, k_max: i64) -> Vec<Vec<i64>> {
    integer_vectors_l1(lat.ambient_dim(), k_max)
        .into_iter()
        .filter(|v| lat.contains(v))
        .collect()
}

/// All nonzero integer vectors in Z^n with l1-norm <= k_max.
pub fn integer_vectors_l1(n: usize, k_max: i64) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    let mut cur = vec![0i64; n];
    fn rec(axis: usize, budget: i64, cur: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        if axis == cur.len() {
            if cur.iter().any(|&c| c != 0) {
                out.push(cur.clone());
            }
            return;
        }
        for v in -budget..=budget {
            cur[axis] = v;
            rec(axis + 1, budget - v.abs(), cur, out);
        }
        cur[axis] = 0;
    }
    rec(0, k_max, &mut cur, &mut out);
    out.sort();
    out
}

/// Does some r-subset of `vectors` span exactly the target lattice?
fn subsets_span(vectors: &[Vec<i64>], r: usize, target: &[Vec<i64>], n: usize) -> bool {
    let mut idx = vec![0usize; r];
    fn rec(
        start: usize,
        vectors: &[Vec<i64>],
        depth: usize,
        idx: &mut Vec<usize>,
        target: &[Vec<i64>],
        n: usize,
    ) -> bool {
        if depth == idx.len() {
            let rows: Vec<Vec<i64>> = idx.iter().map(|&i| vectors[i].clone()).collect();
            return hnf(rows, n) == target;
        }
        for i in start..vectors.len() {
            idx[depth] = i;
            if rec(i + 1, vectors, depth + 1, idx, target, n) {
                return true;
            }
        }
        false
    }
    rec(0, vectors, 0, &mut idx, target, n)
}

/// Enumerate all maximal rank-r sublattices of Z^n admitting a basis of
/// vectors with l1-norm <= k_max. Brute force over sign-normalized vector
/// tuples with HNF deduplication; refused outside small instances.
pub fn enumerate_k_lattices(n: usize, k_max: i64, r: usize) -> Result<Vec<Lattice>> {
    enumerate_impl(n, k_max, r, true)
}

/// Like [`enumerate_k_lattices`] but without the maximality filter: every
/// rank-r lattice generated by r independent vectors of l1-norm <= k_max.
/// Non-maximal lattices label period-multiplying resonances (k.omega near an
/// odd multiple of pi), which the zone covering cannot do without.
pub fn enumerate_k_generated_lattices(n: usize, k_max: i64, r: usize) -> Result<Vec<Lattice>> {
    enumerate_impl(n, k_max, r, false)
}

fn enumerate_impl(n: usize, k_max: i64, r: usize, require_maximal: bool) -> Result<Vec<Lattice>> {
    if n == 0 || n > 3 {
        return Err(Error::parameter("n", "enumeration supports 1 <= n <= 3"));
    }
    if !(1..=6).contains(&k_max) {
        return Err(Error::parameter("k_max", "enumeration supports 1 <= K <= 6"));
    }
    if r == 0 || r > n {
        return Err(Error::parameter("r", "need 1 <= r <= n"));
    }
    // negating a basis vector preserves the lattice: keep one sign per line
    let vectors: Vec<Vec<i64>> = integer_vectors_l1(n, k_max)
        .into_iter()
        .filter(|v| v.iter().find(|&&c| c != 0).is_some_and(|&c| c > 0))
        .collect();
    let mut seen: BTreeSet<Vec<Vec<i64>>> = BTreeSet::new();
    let mut idx = vec![0usize; r];
    let mut stack = vec![(0usize, 0usize)]; // (depth, start)
    // iterative r-subset enumeration to avoid a recursive closure
    while let Some((depth, start)) = stack.pop() {
        if depth == r {
            let rows: Vec<Vec<i64>> = idx.iter().map(|&i| vectors[i].clone()).collect();
            let h = hnf(rows, n);
            if h.len() == r && !seen.contains(&h) {
                let lat = Lattice {
                    n,
                    basis: h.clone(),
                };
                if !require_maximal || lat.is_maximal() {
                    seen.insert(h);
                }
            }
            continue;
        }
        if start < vectors.len() {
            // branch 1: skip vectors[start] at this depth
            stack.push((depth, start + 1));
            // branch 2: take it
            idx[depth] = start;
            stack.push((depth + 1, start + 1));
        }
    }
    Ok(seen
        .into_iter()
        .map(|basis| Lattice { n, basis })
        .collect())
}
