//! Coefficient fields `x ↦ K(x)` of candidate integrals, and the closed-form
//! integrals of the catalog metrics.
//!
//! Coefficients are in the coordinate velocity basis: `F(x, v) = K(x)(v, …, v)`
//! is the polynomial `K(x)` of [`SymPolySpace`] evaluated at `v`.

use std::sync::Arc;

use nalgebra::DVector;

use crate::error::Result;
use crate::metric::{Base, MetricField};
use crate::sym_poly::{SymPolyElement, SymPolySpace};

/// Anything that produces a degree-`d` polynomial in velocities at each point.
pub trait CoefficientField: Sync {
    fn space(&self) -> &SymPolySpace;
    fn coefficients(&self, x: &[f64]) -> Result<SymPolyElement>;
}

type FieldFn = dyn Fn(&[f64]) -> DVector<f64> + Send + Sync;

/// A closed-form coefficient field.
#[derive(Clone)]
pub struct KnownIntegral {
    pub label: String,
    space: SymPolySpace,
    field: Arc<FieldFn>,
}

impl std::fmt::Debug for KnownIntegral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "KnownIntegral({}, d = {})", self.label, self.space.degree())
    }
}

impl KnownIntegral {
    pub fn new(label: impl Into<String>, space: SymPolySpace, field: impl Fn(&[f64]) -> DVector<f64> + Send + Sync + 'static) -> Self {
        Self {
            label: label.into(),
            space,
            field: Arc::new(field),
        }
    }

    /// Degree-one integral from a covector field.
    pub fn covector(label: impl Into<String>, n: usize, field: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        Self::new(label, SymPolySpace::new(n, 1), move |x| DVector::from_vec(field(x)))
    }

    /// Symmetric product; the label joins the factors with `·`.
    pub fn product(&self, other: &KnownIntegral) -> KnownIntegral {
        let (a, b) = (self.clone(), other.clone());
        let space = SymPolySpace::new(self.space.n(), self.space.degree() + other.space.degree());
        KnownIntegral::new(format!("{}·{}", self.label, other.label), space, move |x| {
            a.element_at(x).mul(&b.element_at(x)).coeffs
        })
    }

    fn element_at(&self, x: &[f64]) -> SymPolyElement {
        self.space.element((self.field)(x))
    }
}

impl CoefficientField for KnownIntegral {
    fn space(&self) -> &SymPolySpace {
        &self.space
    }

    fn coefficients(&self, x: &[f64]) -> Result<SymPolyElement> {
        Ok(self.element_at(x))
    }
}

/// `(½ g(v, v))^q` for `d = 2q`.
pub fn hamiltonian_power(m: &MetricField, d: usize) -> KnownIntegral {
    let metric = m.clone();
    let space = SymPolySpace::new(m.dim(), d);
    let s = space.clone();
    KnownIntegral::new(format!("H^{}", d / 2), space, move |x| {
        s.quadratic_form_power(&(metric.value_unchecked(x) * 0.5)).coeffs
    })
}

fn signs(m: &MetricField) -> Vec<f64> {
    m.signature().iter().map(|s| *s as f64).collect()
}

/// Linear integrals `g(X, v)` for the Killing fields `X` of the flat and
/// constant-curvature catalog metrics.
fn linear_integrals(m: &MetricField) -> Vec<KnownIntegral> {
    let n = m.dim();
    let mut out = Vec::new();
    match m.base() {
        Base::Constant(_) => {
            let s = signs(m);
            for k in 0..n {
                out.push(KnownIntegral::covector(format!("P{}", k + 1), n, move |_| {
                    let mut c = vec![0.0; n];
                    c[k] = 1.0;
                    c
                }));
            }
            for a in 0..n {
                for b in a + 1..n {
                    let s = s.clone();
                    // x_a v_b − x_b v_a with indices lowered by the constant metric
                    out.push(KnownIntegral::covector(format!("L{}{}", a + 1, b + 1), n, move |x| {
                        let mut c = vec![0.0; n];
                        c[b] += s[a] * s[b] * x[a];
                        c[a] -= s[a] * s[b] * x[b];
                        c
                    }));
                }
            }
        }
        Base::SphereCap { scale } => {
            let a2 = scale * scale;
            let conformal = move |x: &[f64]| {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                4.0 * a2 / (1.0 + r2).powi(2)
            };
            for k in 0..n {
                out.push(KnownIntegral::covector(format!("X{}", k + 1), n, move |x| {
                    let r2: f64 = x.iter().map(|v| v * v).sum();
                    let phi = conformal(x);
                    (0..n)
                        .map(|i| {
                            let delta = if i == k { 1.0 - r2 } else { 0.0 };
                            phi * (delta + 2.0 * x[k] * x[i])
                        })
                        .collect()
                }));
            }
            for a in 0..n {
                for b in a + 1..n {
                    out.push(KnownIntegral::covector(format!("L{}{}", a + 1, b + 1), n, move |x| {
                        let phi = conformal(x);
                        let mut c = vec![0.0; n];
                        c[b] += phi * x[a];
                        c[a] -= phi * x[b];
                        c
                    }));
                }
            }
        }
        Base::Revolution { rho, .. } => {
            let rho = rho.clone();
            out.push(KnownIntegral::covector("clairaut", 2, move |x| {
                let r = rho.value(x[0]);
                vec![0.0, r * r]
            }));
        }
        Base::Liouville { .. } => {}
    }
    out
}

fn multisets(k: usize, d: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, k: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            out.push(cur.clone());
            return;
        }
        for i in start..k {
            cur.push(i);
            rec(i, k, left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, k, d, &mut Vec::new(), &mut out);
    out
}

/// Known degree-`d` integrals of `m`: symmetric products of the linear
/// integrals, the Liouville quadratic integral, and powers of `H` for even `d`.
/// Perturbed metrics only get the powers of `H`. The list may be linearly
/// dependent.
pub fn known_integrals(m: &MetricField, d: usize) -> Vec<KnownIntegral> {
    let mut out = Vec::new();
    if d.is_multiple_of(2) && d > 0 {
        out.push(hamiltonian_power(m, d));
    }
    if !m.is_unperturbed() || d == 0 {
        return out;
    }
    let linear = linear_integrals(m);
    for combo in multisets(linear.len(), d) {
        let mut acc = linear[combo[0]].clone();
        for &i in &combo[1..] {
            acc = acc.product(&linear[i]);
        }
        out.push(acc);
    }
    if let Base::Liouville { f, h, .. } = m.base() {
        if d == 2 {
            let (f, h) = (f.clone(), h.clone());
            // (f + h)(h v₁² − f v₂²)
            out.push(KnownIntegral::new("liouville", SymPolySpace::new(2, 2), move |x| {
                let (fv, hv) = (f.value(x[0]), h.value(x[1]));
                let l = fv + hv;
                DVector::from_vec(vec![l * hv, 0.0, -l * fv])
            }));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesic::{integrate_ivp, Tolerances};
    use crate::metric::catalog_default;

    fn max_drift(m: &MetricField, k: &KnownIntegral) -> f64 {
        let starts = [([0.1, -0.2], [0.3, 0.25]), ([-0.3, 0.1], [-0.1, 0.4]), ([0.2, 0.3], [0.35, -0.2])];
        let mut worst: f64 = 0.0;
        for (x0, v0) in starts {
            let seg = integrate_ivp(m, &x0, &v0, 1.0, &Tolerances { ivp_tol: 1e-12, ..Default::default() }).unwrap();
            let f0 = k.coefficients(&seg.samples[0].x).unwrap().eval(&seg.samples[0].v);
            for s in &seg.samples {
                let f = k.coefficients(&s.x).unwrap().eval(&s.v);
                worst = worst.max((f - f0).abs());
            }
        }
        worst
    }

    #[test]
    fn catalog_integrals_are_conserved() {
        for name in ["flat", "lorentz_flat", "sphere_cap", "revolution", "liouville"] {
            let m = catalog_default(name, 2).unwrap();
            for d in 1..=3 {
                for k in known_integrals(&m, d) {
                    let drift = max_drift(&m, &k);
                    assert!(drift < 1e-9, "{name} {}: {drift}", k.label);
                }
            }
        }
    }

    #[test]
    fn counts() {
        let flat = catalog_default("flat", 2).unwrap();
        assert_eq!(known_integrals(&flat, 1).len(), 3);
        assert_eq!(known_integrals(&flat, 2).len(), 7);
        assert_eq!(known_integrals(&catalog_default("flat", 3).unwrap(), 1).len(), 6);
        assert_eq!(known_integrals(&catalog_default("liouville", 2).unwrap(), 2).len(), 2);
        assert_eq!(known_integrals(&catalog_default("random_analytic", 2).unwrap(), 1).len(), 0);
        assert_eq!(multisets(3, 2).len(), 6);
    }

    #[test]
    fn sphere_killing_fields_in_three_dimensions() {
        let m = catalog_default("sphere_cap", 3).unwrap();
        let tol = Tolerances { ivp_tol: 1e-12, ..Default::default() };
        let seg = integrate_ivp(&m, &[0.1, -0.2, 0.05], &[0.3, 0.25, -0.1], 1.0, &tol).unwrap();
        for k in known_integrals(&m, 1) {
            let f0 = k.coefficients(&seg.start).unwrap().eval(&seg.v_start);
            let f1 = k.coefficients(&seg.end).unwrap().eval(&seg.v_end);
            assert!((f1 - f0).abs() < 1e-9, "{}", k.label);
        }
    }
}
