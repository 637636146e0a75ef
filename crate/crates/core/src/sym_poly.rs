//! Homogeneous polynomials of degree `d` in `n` variables.
//!
//! Elements are coefficient vectors in the plain monomial basis (no
//! multinomial weights), ordered graded-lexicographically: for `n = 2, d = 3`
//! the basis is `x³, x²y, xy², y³`.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::metric::MetricField;

/// The space `Sᵈ(ℝⁿ)` with its monomial basis.
#[derive(Debug, Clone)]
pub struct SymPolySpace {
    n: usize,
    d: usize,
    basis: Arc<Vec<Vec<u32>>>,
    index: Arc<HashMap<Vec<u32>, usize>>,
}

impl PartialEq for SymPolySpace {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.d == other.d
    }
}

fn exponents(n: usize, d: usize) -> Vec<Vec<u32>> {
    fn fill(slot: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        let n = cur.len();
        if slot == n - 1 {
            cur[slot] = left;
            out.push(cur.clone());
            return;
        }
        for e in (0..=left).rev() {
            cur[slot] = e;
            fill(slot + 1, left - e, cur, out);
        }
    }
    let mut out = Vec::new();
    let mut cur = vec![0u32; n];
    fill(0, d as u32, &mut cur, &mut out);
    out
}

/// `C(n + d − 1, d)`.
pub fn dimension(n: usize, d: usize) -> usize {
    let mut acc: u128 = 1;
    for k in 0..d {
        acc = acc * (n + k) as u128 / (k + 1) as u128;
    }
    acc as usize
}

impl SymPolySpace {
    pub fn new(n: usize, d: usize) -> Self {
        assert!(n >= 1, "need at least one variable");
        let basis = exponents(n, d);
        let index = basis.iter().enumerate().map(|(i, e)| (e.clone(), i)).collect();
        Self {
            n,
            d,
            basis: Arc::new(basis),
            index: Arc::new(index),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.d
    }

    /// Number of monomials, `N = C(n + d − 1, d)`.
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Vec<u32>] {
        &self.basis
    }

    pub fn index_of(&self, exps: &[u32]) -> Option<usize> {
        self.index.get(exps).copied()
    }

    /// Human-readable monomial, e.g. `x1^2*x2`.
    pub fn monomial_name(&self, i: usize) -> String {
        let parts: Vec<String> = self.basis[i]
            .iter()
            .enumerate()
            .filter(|(_, e)| **e > 0)
            .map(|(k, e)| if *e == 1 { format!("x{}", k + 1) } else { format!("x{}^{}", k + 1, e) })
            .collect();
        if parts.is_empty() {
            "1".into()
        } else {
            parts.join("*")
        }
    }

    /// Veronese map: the vector of all degree-`d` monomials of `v`.
    pub fn veronese(&self, v: &[f64]) -> DVector<f64> {
        assert_eq!(v.len(), self.n);
        // powers[k][e] = v_k^e
        let powers: Vec<Vec<f64>> = v
            .iter()
            .map(|x| {
                let mut p = Vec::with_capacity(self.d + 1);
                let mut acc = 1.0;
                for _ in 0..=self.d {
                    p.push(acc);
                    acc *= x;
                }
                p
            })
            .collect();
        DVector::from_iterator(
            self.dim(),
            self.basis
                .iter()
                .map(|e| e.iter().enumerate().map(|(k, &p)| powers[k][p as usize]).product::<f64>()),
        )
    }

    pub fn zero(&self) -> SymPolyElement {
        SymPolyElement {
            space: self.clone(),
            coeffs: DVector::zeros(self.dim()),
        }
    }

    pub fn element(&self, coeffs: DVector<f64>) -> SymPolyElement {
        assert_eq!(coeffs.len(), self.dim(), "coefficient vector length must equal N");
        SymPolyElement { space: self.clone(), coeffs }
    }

    /// Matrix whose rows are the Veronese images of `vectors`.
    pub fn veronese_matrix(&self, vectors: &[DVector<f64>]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(vectors.len(), self.dim());
        for (r, v) in vectors.iter().enumerate() {
            m.row_mut(r).copy_from(&self.veronese(v.as_slice()).transpose());
        }
        m
    }

    /// Decide whether `N` vectors are `d`-decisive: the stacked Veronese
    /// matrix must have 2-norm condition number at most `cond_max`.
    pub fn is_decisive(&self, vectors: &[DVector<f64>], cond_max: f64) -> (bool, f64) {
        assert_eq!(vectors.len(), self.dim(), "decisiveness needs exactly N vectors");
        let cond = condition_number(&self.veronese_matrix(vectors));
        (cond <= cond_max, cond)
    }

    /// Matrix of the pull-back `p ↦ p ∘ σᵀ`, i.e. `eval(M·p, v) = eval(p, σᵀ v)`.
    pub fn induced_map(&self, sigma: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(sigma.nrows(), self.n);
        assert_eq!(sigma.ncols(), self.n);
        let linear = SymPolySpace::new(self.n, 1);
        // ℓ_a(v) = (σᵀ v)_a = Σ_b σ_{ba} v_b
        let forms: Vec<SymPolyElement> = (0..self.n)
            .map(|a| linear.element(DVector::from_iterator(self.n, (0..self.n).map(|b| sigma[(b, a)]))))
            .collect();
        let mut m = DMatrix::zeros(self.dim(), self.dim());
        for (col, exps) in self.basis.iter().enumerate() {
            let mut prod = SymPolySpace::new(self.n, 0).element(DVector::from_element(1, 1.0));
            for (a, &e) in exps.iter().enumerate() {
                for _ in 0..e {
                    prod = prod.mul(&forms[a]);
                }
            }
            m.column_mut(col).copy_from(&prod.coeffs);
        }
        m
    }

    /// `(½ g_ij(x) v^i v^j)^q` expanded in the basis of this space (`d = 2q`).
    pub fn hamiltonian_power_restriction(&self, m: &MetricField, x: &[f64]) -> Result<SymPolyElement> {
        assert!(self.d.is_multiple_of(2), "Hamiltonian powers live in even degree");
        let g = m.eval(x)?;
        Ok(self.quadratic_form_power(&(g * 0.5)))
    }

    /// `(vᵀ Q v)^q` for symmetric `Q`, `d = 2q`.
    pub fn quadratic_form_power(&self, q: &DMatrix<f64>) -> SymPolyElement {
        assert!(self.d.is_multiple_of(2));
        let quad = quadratic_element(self.n, q);
        let mut out = SymPolySpace::new(self.n, 0).element(DVector::from_element(1, 1.0));
        for _ in 0..self.d / 2 {
            out = out.mul(&quad);
        }
        out
    }
}

fn quadratic_element(n: usize, q: &DMatrix<f64>) -> SymPolyElement {
    let s2 = SymPolySpace::new(n, 2);
    let mut c = DVector::zeros(s2.dim());
    for i in 0..n {
        for j in 0..n {
            let mut e = vec![0u32; n];
            e[i] += 1;
            e[j] += 1;
            c[s2.index_of(&e).unwrap()] += q[(i, j)];
        }
    }
    s2.element(c)
}

/// 2-norm condition number; infinite for singular matrices.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 || !min.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

/// An element of `Sᵈ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymPolyElement {
    pub space: SymPolySpace,
    pub coeffs: DVector<f64>,
}

impl SymPolyElement {
    pub fn eval(&self, v: &[f64]) -> f64 {
        self.coeffs.dot(&self.space.veronese(v))
    }

    /// Product in `S^{a+b}`.
    pub fn mul(&self, other: &SymPolyElement) -> SymPolyElement {
        let n = self.space.n;
        assert_eq!(n, other.space.n);
        let out = SymPolySpace::new(n, self.space.d + other.space.d);
        let mut c = DVector::zeros(out.dim());
        let mut e = vec![0u32; n];
        for (i, ea) in self.space.basis.iter().enumerate() {
            if self.coeffs[i] == 0.0 {
                continue;
            }
            for (j, eb) in other.space.basis.iter().enumerate() {
                if other.coeffs[j] == 0.0 {
                    continue;
                }
                for k in 0..n {
                    e[k] = ea[k] + eb[k];
                }
                c[out.index_of(&e).unwrap()] += self.coeffs[i] * other.coeffs[j];
            }
        }
        out.element(c)
    }

    /// `∂/∂v_k`, landing in `S^{d−1}`.
    pub fn partial(&self, k: usize) -> SymPolyElement {
        let d = self.space.d;
        assert!(d >= 1);
        let out = SymPolySpace::new(self.space.n, d - 1);
        let mut c = DVector::zeros(out.dim());
        for (i, e) in self.space.basis.iter().enumerate() {
            if e[k] == 0 {
                continue;
            }
            let mut lowered = e.clone();
            lowered[k] -= 1;
            c[out.index_of(&lowered).unwrap()] += e[k] as f64 * self.coeffs[i];
        }
        out.element(c)
    }

    /// Apply a linear map on coefficients (e.g. an induced map).
    pub fn transform(&self, m: &DMatrix<f64>) -> SymPolyElement {
        self.space.element(m * &self.coeffs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::catalog_default;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(xs)
    }

    fn brute_force_count(n: usize, d: usize) -> usize {
        // enumerate all exponent tuples in [0, d]^n with total degree d
        let mut count = 0;
        let total = (d + 1).pow(n as u32);
        for idx in 0..total {
            let mut rest = idx;
            let mut s = 0;
            for _ in 0..n {
                s += rest % (d + 1);
                rest /= d + 1;
            }
            if s == d {
                count += 1;
            }
        }
        count
    }

    #[test]
    fn dimension_matches_enumeration() {
        for n in 1..=5 {
            for d in 0..=6 {
                let s = SymPolySpace::new(n, d);
                assert_eq!(s.dim(), brute_force_count(n, d));
                assert_eq!(s.dim(), dimension(n, d));
            }
        }
    }

    #[test]
    fn veronese_examples() {
        assert_eq!(SymPolySpace::new(2, 1).veronese(&[3.0, 5.0]), v(&[3.0, 5.0]));
        assert_eq!(SymPolySpace::new(2, 2).veronese(&[1.0, 1.0]), v(&[1.0, 1.0, 1.0]));
        assert_eq!(SymPolySpace::new(2, 3).veronese(&[2.0, 1.0]), v(&[8.0, 4.0, 2.0, 1.0]));
    }

    #[test]
    fn basis_is_graded_lex() {
        let s = SymPolySpace::new(3, 2);
        let names: Vec<String> = (0..s.dim()).map(|i| s.monomial_name(i)).collect();
        assert_eq!(names, ["x1^2", "x1*x2", "x1*x3", "x2^2", "x2*x3", "x3^2"]);
    }

    #[test]
    fn eval_examples() {
        let s = SymPolySpace::new(2, 2);
        assert_eq!(s.zero().eval(&[1.3, -2.0]), 0.0);
        let p = s.element(v(&[1.0, 0.0, 0.0]));
        assert_eq!(p.eval(&[2.0, 3.0]), 4.0);
    }

    #[test]
    fn decisive_examples() {
        let s1 = SymPolySpace::new(2, 1);
        let (ok, cond) = s1.is_decisive(&[v(&[1.0, 0.0]), v(&[0.0, 1.0])], 1e8);
        assert!(ok);
        assert!((cond - 1.0).abs() < 1e-14);

        let s2 = SymPolySpace::new(2, 2);
        let m = s2.veronese_matrix(&[v(&[1.0, 0.0]), v(&[0.0, 1.0]), v(&[1.0, 1.0])]);
        // hand determinant of [[1,0,0],[0,0,1],[1,1,1]] = 1·(0·1 − 1·1) = −1
        assert!((m.determinant() + 1.0).abs() < 1e-14);
        assert!(s2.is_decisive(&[v(&[1.0, 0.0]), v(&[0.0, 1.0]), v(&[1.0, 1.0])], 1e8).0);

        let (ok, cond) = s2.is_decisive(&[v(&[1.0, 0.0]), v(&[2.0, 0.0]), v(&[0.0, 1.0])], 1e8);
        assert!(!ok);
        assert!(cond > 1e8);
    }

    #[test]
    fn induced_map_examples() {
        for d in 1..=4 {
            let s = SymPolySpace::new(2, d);
            let id = s.induced_map(&DMatrix::identity(2, 2));
            assert!((id.clone() - DMatrix::identity(s.dim(), s.dim())).amax() < 1e-15);
            let neg = s.induced_map(&(-DMatrix::identity(2, 2)));
            let sign = if d % 2 == 1 { -1.0 } else { 1.0 };
            assert!((neg - DMatrix::identity(s.dim(), s.dim()) * sign).amax() < 1e-15);
        }
    }

    #[test]
    fn induced_map_is_functorial() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = SymPolySpace::new(2, 3);
        for _ in 0..20 {
            let a = DMatrix::from_fn(2, 2, |_, _| rng.gen_range(-1.0..1.0));
            let b = DMatrix::from_fn(2, 2, |_, _| rng.gen_range(-1.0..1.0));
            let lhs = s.induced_map(&(&a * &b));
            let rhs = s.induced_map(&a) * s.induced_map(&b);
            assert!((lhs - rhs).amax() < 1e-12);
        }
    }

    #[test]
    fn hamiltonian_powers_on_flat() {
        let m = catalog_default("flat", 2).unwrap();
        let h1 = SymPolySpace::new(2, 2).hamiltonian_power_restriction(&m, &[0.1, 0.2]).unwrap();
        assert_eq!(h1.coeffs, v(&[0.5, 0.0, 0.5]));
        let h2 = SymPolySpace::new(2, 4).hamiltonian_power_restriction(&m, &[0.1, 0.2]).unwrap();
        assert_eq!(h2.coeffs, v(&[0.25, 0.0, 0.5, 0.0, 0.25]));
    }

    #[test]
    fn hamiltonian_power_defining_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let m = catalog_default("sphere_cap", 2).unwrap();
        let x = [0.3, -0.4];
        let g = m.eval(&x).unwrap();
        for q in 1..=3 {
            let h = SymPolySpace::new(2, 2 * q).hamiltonian_power_restriction(&m, &x).unwrap();
            for _ in 0..100 {
                let vv: Vec<f64> = (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let exact = (0.5 * crate::metric::quadratic(&g, &vv, &vv)).powi(q as i32);
                assert!((h.eval(&vv) - exact).abs() <= 1e-12 * (1.0 + exact.abs()));
            }
        }
    }

    #[test]
    fn partial_derivative_matches_difference() {
        let s = SymPolySpace::new(3, 3);
        let p = s.element(DVector::from_fn(s.dim(), |i, _| (i as f64 * 0.37).sin()));
        let x = [0.4, -0.7, 1.1];
        let h = 1e-5;
        for k in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let fd = (p.eval(&xp) - p.eval(&xm)) / (2.0 * h);
            assert!((p.partial(k).eval(&x) - fd).abs() < 1e-8);
        }
    }

    #[test]
    fn random_unit_vectors_are_usually_decisive() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for n in 2..=3 {
            for d in 1..=3 {
                let s = SymPolySpace::new(n, d);
                let mut good = 0;
                for _ in 0..100 {
                    let vecs: Vec<DVector<f64>> = (0..s.dim())
                        .map(|_| {
                            let w = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
                            let norm = w.norm();
                            w / norm
                        })
                        .collect();
                    if s.is_decisive(&vecs, 1e6).0 {
                        good += 1;
                    }
                }
                assert!(good >= 95, "n={n} d={d}: {good}/100");
            }
        }
    }

    #[test]
    fn decisive_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = SymPolySpace::new(2, 3);
        for _ in 0..50 {
            let vecs: Vec<DVector<f64>> = (0..s.dim()).map(|_| DVector::from_fn(2, |_, _| rng.gen_range(-1.0..1.0))).collect();
            let (ok, cond) = s.is_decisive(&vecs, 1e8);
            if !ok {
                continue;
            }
            let p = DVector::from_fn(s.dim(), |_, _| rng.gen_range(-1.0..1.0));
            let values = s.veronese_matrix(&vecs) * &p;
            let rec = s.veronese_matrix(&vecs).lu().solve(&values).unwrap();
            assert!((rec - &p).norm() <= cond * 1e-14 * p.norm());
        }
    }

    proptest! {
        #[test]
        fn homogeneity(coeffs in proptest::collection::vec(-1.0f64..1.0, 10), x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0) {
            let s = SymPolySpace::new(3, 2);
            let p = s.element(DVector::from_row_slice(&coeffs[..s.dim()]));
            let lambda: f64 = 1.7;
            let base = p.eval(&[x, y, z]);
            let scaled = p.eval(&[lambda * x, lambda * y, lambda * z]);
            prop_assert!((scaled - lambda.powi(2) * base).abs() <= 1e-12 * (1.0 + scaled.abs()));
        }

        #[test]
        fn pullback_identity(
            coeffs in proptest::collection::vec(-1.0f64..1.0, 4),
            sig in proptest::collection::vec(-1.0f64..1.0, 4),
            a in -1.0f64..1.0, b in -1.0f64..1.0,
        ) {
            let s = SymPolySpace::new(2, 3);
            let p = s.element(DVector::from_row_slice(&coeffs));
            let sigma = DMatrix::from_row_slice(2, 2, &sig);
            let pulled = p.transform(&s.induced_map(&sigma));
            let st_v = sigma.transpose() * DVector::from_row_slice(&[a, b]);
            prop_assert!((pulled.eval(&[a, b]) - p.eval(st_v.as_slice())).abs() < 1e-12);
        }

        #[test]
        fn veronese_is_pure(a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let s = SymPolySpace::new(2, 4);
            let first = s.veronese(&[a, b]);
            let second = SymPolySpace::new(2, 4).veronese(&[a, b]);
            prop_assert_eq!(first, second);
        }
    }
}
