//! Independent checks on the obstruction kernel: Killing-equation
//! collocation with a polynomial ansatz, a conservation audit along fresh
//! geodesics, the holonomy of the first prolongation connection for `d = 1`,
//! and the closed-form bundle rank.

use nalgebra::{DMatrix, DVector};
use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesic::{integrate_ivp, Tolerances};
use crate::integrals::CoefficientField;
use crate::kernel::{kernel_analysis, Floor, KernelAnalysis, KernelDim, RankRule};
use crate::metric::MetricField;
use crate::ode::Dopri5;
use crate::sym_poly::{SymPolyElement, SymPolySpace};

/// Offset in the relative drift denominator.
pub const DRIFT_EPS: f64 = 1e-12;
/// Samples are drawn inside this fraction of the disc radius.
const COLLOCATION_RADIUS: f64 = 0.8;

/// Index position of the coefficient field in the collocation ansatz.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnsatzForm {
    /// `K_{i₁…i_d}(x) v^{i₁}⋯v^{i_d}`, polynomial in `x`.
    Lower,
    /// `K^{i₁…i_d}(x) p_{i₁}⋯p_{i_d}`, polynomial in `x`.
    Upper,
}

/// Multi-indices `β ∈ ℕⁿ` with `|β| ≤ m`, graded.
fn multi_indices(n: usize, m: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for total in 0..=m {
        for e in SymPolySpace::new(n, total).basis() {
            out.push(e.iter().map(|&k| k as usize).collect());
        }
    }
    out
}

/// Legendre values `P_0 … P_m` and derivatives at `t`.
fn legendre(m: usize, t: f64) -> (Vec<f64>, Vec<f64>) {
    let mut p = vec![1.0; m + 1];
    let mut dp = vec![0.0; m + 1];
    if m >= 1 {
        p[1] = t;
        dp[1] = 1.0;
    }
    for k in 1..m {
        let kf = k as f64;
        p[k + 1] = ((2.0 * kf + 1.0) * t * p[k] - kf * p[k - 1]) / (kf + 1.0);
        dp[k + 1] = dp[k - 1] + (2.0 * kf + 1.0) * p[k];
    }
    (p, dp)
}

/// Tensor Legendre basis in `x / R`: values and gradients of every `φ_β`.
fn position_basis(x: &[f64], radius: f64, betas: &[Vec<usize>], m: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let tables: Vec<(Vec<f64>, Vec<f64>)> = x.iter().map(|xi| legendre(m, xi / radius)).collect();
    let n = x.len();
    let mut values = Vec::with_capacity(betas.len());
    let mut grads = Vec::with_capacity(betas.len());
    for beta in betas {
        values.push((0..n).map(|i| tables[i].0[beta[i]]).product());
        grads.push(
            (0..n)
                .map(|j| {
                    (0..n)
                        .map(|i| if i == j { tables[i].1[beta[i]] / radius } else { tables[i].0[beta[i]] })
                        .product()
                })
                .collect(),
        );
    }
    (values, grads)
}

fn quadratic_element(n: usize, q: &DMatrix<f64>) -> SymPolyElement {
    let s2 = SymPolySpace::new(n, 2);
    let mut c = DVector::zeros(s2.dim());
    for i in 0..n {
        for j in 0..n {
            let mut e = vec![0u32; n];
            e[i] += 1;
            e[j] += 1;
            c[s2.index_of(&e).expect("degree-two monomial")] += q[(i, j)];
        }
    }
    s2.element(c)
}

/// Rows of the collocation system at `x`: coefficients in `S^{d+1}` of
/// `dF/dt` along the flow, one column per unknown `(monomial a, φ_β)`.
fn collocation_rows(
    m: &MetricField,
    space: &SymPolySpace,
    form: AnsatzForm,
    betas: &[Vec<usize>],
    x_degree: usize,
    x: &[f64],
) -> Result<DMatrix<f64>> {
    let n = space.n();
    let s1 = SymPolySpace::new(n, 1);
    // dF/dt = Σ_j ℓ_j ∂_j K + Σ_k ∂K/∂ξ_k · a_k, with ℓ_j linear and a_k quadratic in ξ
    let (lin, acc): (Vec<SymPolyElement>, Vec<SymPolyElement>) = match form {
        AnsatzForm::Lower => {
            let gamma = m.christoffel(x)?;
            let lin = (0..n)
                .map(|j| s1.element(DVector::from_fn(n, |i, _| if i == j { 1.0 } else { 0.0 })))
                .collect();
            let acc = (0..n)
                .map(|k| quadratic_element(n, &DMatrix::from_fn(n, n, |i, j| -gamma.get(k, i, j))))
                .collect();
            (lin, acc)
        }
        AnsatzForm::Upper => {
            let g_inv = m.inverse(x)?;
            let dg = m.gradient(x)?;
            let lin = (0..n).map(|j| s1.element(g_inv.row(j).transpose())).collect();
            let acc = (0..n)
                .map(|k| quadratic_element(n, &(&g_inv * &dg[k] * &g_inv * 0.5)))
                .collect();
            (lin, acc)
        }
    };
    let (phi, dphi) = position_basis(x, m.domain_radius(), betas, x_degree);
    let big_n = space.dim();
    let rows = dimension_next(space);
    let mut out = DMatrix::zeros(rows, big_n * betas.len());
    for a in 0..big_n {
        let mut e = DVector::zeros(big_n);
        e[a] = 1.0;
        let mono = space.element(e);
        let mut transport = DVector::zeros(rows);
        for k in 0..n {
            transport += mono.partial(k).mul(&acc[k]).coeffs;
        }
        let advect: Vec<DVector<f64>> = lin.iter().map(|l| mono.mul(l).coeffs).collect();
        for (b, (p, dp)) in phi.iter().zip(&dphi).enumerate() {
            let mut col = &transport * *p;
            for j in 0..n {
                col += &advect[j] * dp[j];
            }
            out.column_mut(a * betas.len() + b).copy_from(&col);
        }
    }
    Ok(out)
}

fn dimension_next(space: &SymPolySpace) -> usize {
    crate::sym_poly::dimension(space.n(), space.degree() + 1)
}

fn disc_points(rng: &mut ChaCha8Rng, n: usize, count: usize, radius: f64) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-radius..radius)).collect();
        if x.iter().map(|v| v * v).sum::<f64>() < radius * radius {
            out.push(x);
        }
    }
    out
}

/// One collocation solve.
#[derive(Debug, Clone)]
pub struct Collocation {
    pub form: AnsatzForm,
    pub x_degree: usize,
    pub unknowns: usize,
    pub samples: usize,
    pub analysis: KernelAnalysis,
}

/// Number of ansatz unknowns `N · C(n + m, m)`.
pub fn unknown_count(space: &SymPolySpace, x_degree: usize) -> usize {
    space.dim() * crate::sym_poly::dimension(space.n() + 1, x_degree)
}

/// Impose the Killing equation at `sample_count` seeded points on a
/// degree-`x_degree` polynomial ansatz and return the numerical kernel of the
/// stacked system. Columns are scaled to unit norm before the SVD.
pub fn collocation(
    m: &MetricField,
    space: &SymPolySpace,
    form: AnsatzForm,
    x_degree: usize,
    sample_count: usize,
    seed: u64,
    rule: &RankRule,
) -> Result<Collocation> {
    let unknowns = unknown_count(space, x_degree);
    if sample_count < 3 * unknowns {
        return Err(Error::InvalidParameter(format!(
            "collocation needs at least {} samples, got {sample_count}",
            3 * unknowns
        )));
    }
    if space.n() != m.dim() || space.degree() == 0 {
        return Err(Error::InvalidParameter("space must match the metric and have d >= 1".into()));
    }
    let betas = multi_indices(m.dim(), x_degree);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = disc_points(&mut rng, m.dim(), sample_count, COLLOCATION_RADIUS * m.domain_radius());
    let blocks = points
        .par_iter()
        .map(|x| collocation_rows(m, space, form, &betas, x_degree, x))
        .collect::<Result<Vec<_>>>()?;
    let per = blocks[0].nrows();
    let mut system = DMatrix::zeros(per * blocks.len(), unknowns);
    for (i, b) in blocks.iter().enumerate() {
        system.rows_mut(i * per, per).copy_from(b);
    }
    for mut col in system.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        }
    }
    Ok(Collocation {
        form,
        x_degree,
        unknowns,
        samples: sample_count,
        analysis: kernel_analysis(&system, rule),
    })
}

/// Both ansatz forms.
#[derive(Debug, Clone)]
pub struct CollocationOutcome {
    pub lower: Collocation,
    pub upper: Collocation,
}

impl CollocationOutcome {
    /// Larger of the two determinate dimensions; indeterminate only when both are.
    /// Each form is a lower bound, so the larger one is the better bound.
    pub fn dim(&self) -> KernelDim {
        match (self.lower.analysis.dim.value(), self.upper.analysis.dim.value()) {
            (Some(a), Some(b)) => KernelDim::Determinate(a.max(b)),
            (Some(a), None) | (None, Some(a)) => KernelDim::Determinate(a),
            (None, None) => KernelDim::Indeterminate,
        }
    }
}

/// Count of degree-`d` integrals whose coefficients are polynomials of degree
/// `≤ x_degree` in either index position, using `3 ×` the unknown count of
/// sample points.
pub fn collocation_kernel_dim(
    m: &MetricField,
    space: &SymPolySpace,
    x_degree: usize,
    seed: u64,
    gap_min: f64,
) -> Result<CollocationOutcome> {
    let samples = 3 * unknown_count(space, x_degree);
    let rule = RankRule { gap_min, ..RankRule::default() };
    Ok(CollocationOutcome {
        lower: collocation(m, space, AnsatzForm::Lower, x_degree, samples, seed, &rule)?,
        upper: collocation(m, space, AnsatzForm::Upper, x_degree, samples, seed, &rule)?,
    })
}

/// Seeded test geodesics: start within half the disc radius, unit-free
/// direction, coordinate speed `0.4 R` over unit time.
fn audit_geodesics(m: &MetricField, trials: usize, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = m.domain_radius();
    let n = m.dim();
    let mut out = Vec::with_capacity(trials);
    while out.len() < trials {
        let x = disc_points(&mut rng, n, 1, 0.5 * r).pop().expect("one point");
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm < 0.1 {
            continue;
        }
        let energy = m.inner(&x, &v, &v).unwrap_or(0.0);
        if energy.abs() < 1e-2 * norm * norm {
            continue;
        }
        out.push((x, v.iter().map(|c| 0.4 * r * c / norm).collect()));
    }
    out
}

/// Largest `|F(t) − F(0)| / (|F(0)| + ε₀)` over `trials` seeded geodesics,
/// evaluated at every sample.
pub fn conservation_residual(m: &MetricField, k: &dyn CoefficientField, trials: usize, seed: u64) -> Result<f64> {
    conservation_residual_at(m, k, trials, seed, crate::geodesic::SAMPLE_INTERVALS + 1)
}

/// As [`conservation_residual`], evaluating `F` at `checkpoints` evenly
/// spaced samples per geodesic (endpoints included). Useful when the field is
/// expensive to evaluate.
pub fn conservation_residual_at(
    m: &MetricField,
    k: &dyn CoefficientField,
    trials: usize,
    seed: u64,
    checkpoints: usize,
) -> Result<f64> {
    if k.space().n() != m.dim() {
        return Err(Error::InvalidParameter("field dimension does not match metric".into()));
    }
    let tol = Tolerances { ivp_tol: 1e-12, ..Tolerances::default() };
    let drifts = audit_geodesics(m, trials, seed)
        .par_iter()
        .map(|(x, v)| -> Result<f64> {
            let seg = integrate_ivp(m, x, v, 1.0, &tol)?;
            let last = seg.samples.len() - 1;
            let count = checkpoints.clamp(2, last + 1);
            let picks: Vec<usize> = (0..count).map(|i| (i * last + (count - 1) / 2) / (count - 1)).collect();
            let f0 = k.coefficients(&seg.samples[0].x)?.eval(&seg.samples[0].v);
            let mut worst: f64 = 0.0;
            for &i in &picks[1..] {
                let s = &seg.samples[i];
                let f = k.coefficients(&s.x)?.eval(&s.v);
                worst = worst.max((f - f0).abs() / (f0.abs() + DRIFT_EPS));
            }
            Ok(worst)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(drifts.into_iter().fold(0.0, f64::max))
}

/// Fibre coordinates `(K_c, L_bc for b < c)` of the first prolongation.
fn fibre_dim(n: usize) -> usize {
    n * (n + 1) / 2
}

fn pair_index(n: usize, b: usize, c: usize) -> usize {
    // strictly upper triangle, row-major, after the n entries of K
    n + b * n - b * (b + 1) / 2 + (c - b - 1)
}

/// `dY/dt = A(x(t), ẋ) Y` for the prolongation connection on a straight
/// segment; `y` holds `fibre × fibre` columns.
fn prolongation_rhs<'a>(
    m: &'a MetricField,
    from: &'a [f64],
    to: &'a [f64],
) -> impl FnMut(f64, &[f64], &mut [f64]) -> Result<()> + 'a {
    let n = m.dim();
    let f = fibre_dim(n);
    let dx: Vec<f64> = from.iter().zip(to).map(|(a, b)| b - a).collect();
    move |t, y, dy| {
        let x: Vec<f64> = from.iter().zip(&dx).map(|(a, d)| a + t * d).collect();
        let gamma = m.christoffel(&x)?;
        let riem = m.riemann(&x)?;
        let r = |d: usize, a: usize, b: usize, c: usize| riem[((d * n + a) * n + b) * n + c];
        for col in 0..f {
            let yc = &y[col * f..(col + 1) * f];
            let kv = &yc[..n];
            let l = |b: usize, c: usize| -> f64 {
                if b == c {
                    0.0
                } else if b < c {
                    yc[pair_index(n, b, c)]
                } else {
                    -yc[pair_index(n, c, b)]
                }
            };
            let out = &mut dy[col * f..(col + 1) * f];
            for c in 0..n {
                let mut acc = 0.0;
                for a in 0..n {
                    let mut inner = l(a, c);
                    for mm in 0..n {
                        inner += gamma.get(mm, a, c) * kv[mm];
                    }
                    acc += dx[a] * inner;
                }
                out[c] = acc;
            }
            for b in 0..n {
                for c in b + 1..n {
                    let mut acc = 0.0;
                    for a in 0..n {
                        let mut inner = 0.0;
                        for d in 0..n {
                            inner += r(d, a, b, c) * kv[d];
                        }
                        for mm in 0..n {
                            inner += gamma.get(mm, a, b) * l(mm, c) + gamma.get(mm, a, c) * l(b, mm);
                        }
                        acc += dx[a] * inner;
                    }
                    out[pair_index(n, b, c)] = acc;
                }
            }
        }
        Ok(())
    }
}

/// Transport matrix of the prolongation connection along a polygon.
pub fn polygon_transport(m: &MetricField, vertices: &[Vec<f64>], tol: f64) -> Result<DMatrix<f64>> {
    let f = fibre_dim(m.dim());
    let mut y = DMatrix::<f64>::identity(f, f).as_slice().to_vec();
    let solver = Dopri5::new(tol);
    for w in vertices.windows(2) {
        for p in w {
            if !m.contains(p) {
                return Err(Error::LeftDomain { t: 0.0 });
            }
        }
        let mut t = 0.0;
        let mut h = 0.0;
        solver.advance(&mut prolongation_rhs(m, &w[0], &w[1]), &mut t, &mut y, 1.0, &mut h)?;
    }
    Ok(DMatrix::from_column_slice(f, f, &y))
}

/// Axis-aligned rectangle based at the origin, as a closed vertex list.
fn rectangle(n: usize, axes: (usize, usize), sides: (f64, f64)) -> Vec<Vec<f64>> {
    let mut p1 = vec![0.0; n];
    p1[axes.0] = sides.0;
    let mut p2 = p1.clone();
    p2[axes.1] = sides.1;
    let mut p3 = vec![0.0; n];
    p3[axes.1] = sides.1;
    vec![vec![0.0; n], p1, p2, p3, vec![0.0; n]]
}

/// Seeded rectangular loops based at the origin with side lengths in
/// `[0.1, 0.5] R` and random orientation.
pub fn holonomy_loops(m: &MetricField, loop_count: usize, seed: u64) -> Vec<Vec<Vec<f64>>> {
    let n = m.dim();
    let r = m.domain_radius();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..loop_count)
        .map(|_| {
            let a = rng.gen_range(0..n);
            let mut b = rng.gen_range(0..n - 1);
            if b >= a {
                b += 1;
            }
            let side = |rng: &mut ChaCha8Rng| {
                let s = rng.gen_range(0.1..0.5) * r;
                if rng.gen_bool(0.5) {
                    s
                } else {
                    -s
                }
            };
            let sides = (side(&mut rng), side(&mut rng));
            rectangle(n, (a, b), sides)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Holonomy {
    pub loops: usize,
    pub fibre_dim: usize,
    /// `max ‖Hol − I‖` over the loops, entrywise.
    pub max_deviation: f64,
    pub analysis: KernelAnalysis,
}

/// Absolute zero threshold for the stacked `Hol − I`; the transport runs at
/// `1e-12` and the curvature carries finite-difference error near `1e-11`.
pub const HOLONOMY_FLOOR: f64 = 1e-8;

/// Dimension of the space of Killing vector fields near the origin, as the
/// common fixed space of the prolongation holonomy around `loop_count` loops.
pub fn holonomy_kernel_dim_d1(m: &MetricField, loop_count: usize, seed: u64, gap_min: f64) -> Result<Holonomy> {
    let n = m.dim();
    if n < 2 {
        return Err(Error::InvalidParameter("holonomy needs n >= 2".into()));
    }
    if loop_count == 0 {
        return Err(Error::InvalidParameter("loop_count must be positive".into()));
    }
    let f = fibre_dim(n);
    let hols = holonomy_loops(m, loop_count, seed)
        .par_iter()
        .map(|lp| polygon_transport(m, lp, 1e-12))
        .collect::<Result<Vec<_>>>()?;
    let mut stack = DMatrix::zeros(f * loop_count, f);
    let mut max_deviation: f64 = 0.0;
    for (i, h) in hols.iter().enumerate() {
        let dev = h - DMatrix::identity(f, f);
        max_deviation = max_deviation.max(dev.amax());
        stack.rows_mut(i * f, f).copy_from(&dev);
    }
    let rule = RankRule { gap_min, floor: Floor::Absolute(HOLONOMY_FLOOR) };
    Ok(Holonomy {
        loops: loop_count,
        fibre_dim: f,
        max_deviation,
        analysis: kernel_analysis(&stack, &rule),
    })
}

fn factorial(k: u64) -> BigUint {
    (1..=k).fold(BigUint::from(1u32), |acc, i| acc * i)
}

/// Rank `(n+d−1)!(n+d)! / ((n−1)! n! d! (d+1)!)` of the prolongation bundle,
/// and the jet order `N(n, d) = d + 1 + rank`.
pub fn rank_formula(n: u64, d: u64) -> Result<(BigUint, BigUint)> {
    if n < 2 || d < 1 {
        return Err(Error::InvalidParameter("rank formula needs n >= 2 and d >= 1".into()));
    }
    let rank = factorial(n + d - 1) * factorial(n + d) / (factorial(n - 1) * factorial(n) * factorial(d) * factorial(d + 1));
    let jet = BigUint::from(d + 1) + &rank;
    Ok((rank, jet))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrals::{hamiltonian_power, known_integrals, KnownIntegral};
    use crate::metric::{catalog_default, perturb, PerturbationSpec};

    fn perturbed() -> MetricField {
        perturb(&catalog_default("flat", 2).unwrap(), &PerturbationSpec::global(1e-2, 2, 1)).unwrap()
    }

    #[test]
    fn legendre_matches_closed_forms() {
        let t = 0.37;
        let (p, dp) = legendre(3, t);
        assert!((p[2] - 0.5 * (3.0 * t * t - 1.0)).abs() < 1e-15);
        assert!((p[3] - 0.5 * (5.0 * t.powi(3) - 3.0 * t)).abs() < 1e-15);
        assert!((dp[3] - 0.5 * (15.0 * t * t - 3.0)).abs() < 1e-14);
    }

    #[test]
    fn pair_indices_are_dense() {
        for n in 2..5 {
            let mut seen = vec![false; fibre_dim(n)];
            seen[..n].iter_mut().for_each(|s| *s = true);
            for b in 0..n {
                for c in b + 1..n {
                    seen[pair_index(n, b, c)] = true;
                }
            }
            assert!(seen.iter().all(|s| *s));
        }
    }

    #[test]
    fn collocation_flat_counts() {
        let m = catalog_default("flat", 2).unwrap();
        let d1 = collocation_kernel_dim(&m, &SymPolySpace::new(2, 1), 1, 0, 1e6).unwrap();
        assert_eq!(d1.dim(), KernelDim::Determinate(3));
        let d2 = collocation_kernel_dim(&m, &SymPolySpace::new(2, 2), 2, 0, 1e6).unwrap();
        assert_eq!(d2.dim(), KernelDim::Determinate(6));
        let m3 = catalog_default("flat", 3).unwrap();
        let c = collocation_kernel_dim(&m3, &SymPolySpace::new(3, 1), 1, 0, 1e6).unwrap();
        assert_eq!(c.dim(), KernelDim::Determinate(6));
        // higher x-degree finds nothing new
        let d1m3 = collocation_kernel_dim(&m, &SymPolySpace::new(2, 1), 3, 0, 1e6).unwrap();
        assert_eq!(d1m3.dim(), KernelDim::Determinate(3));
    }

    #[test]
    fn collocation_catalog_counts() {
        let cases = [("sphere_cap", 1, 3, 3), ("sphere_cap", 2, 4, 6), ("revolution", 1, 3, 1), ("liouville", 2, 8, 2)];
        for (name, d, x_degree, want) in cases {
            let m = catalog_default(name, 2).unwrap();
            let c = collocation_kernel_dim(&m, &SymPolySpace::new(2, d), x_degree, 1, 1e6).unwrap();
            assert_eq!(c.dim(), KernelDim::Determinate(want), "{name} d={d}");
        }
        let m = catalog_default("liouville", 2).unwrap();
        let low = collocation_kernel_dim(&m, &SymPolySpace::new(2, 2), 4, 1, 1e6).unwrap();
        assert_eq!(low.dim(), KernelDim::Determinate(1));
    }

    #[test]
    fn collocation_perturbed_is_empty() {
        let c = collocation_kernel_dim(&perturbed(), &SymPolySpace::new(2, 1), 4, 0, 1e6).unwrap();
        assert_eq!(c.dim(), KernelDim::Determinate(0));
    }

    #[test]
    fn collocation_sample_count_is_checked() {
        let m = catalog_default("flat", 2).unwrap();
        let r = collocation(&m, &SymPolySpace::new(2, 1), AnsatzForm::Lower, 1, 10, 0, &RankRule::default());
        assert!(matches!(r, Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn conservation_separates_integrals() {
        let m = catalog_default("sphere_cap", 2).unwrap();
        assert!(conservation_residual(&m, &hamiltonian_power(&m, 2), 20, 0).unwrap() < 1e-9);
        for k in known_integrals(&m, 1) {
            assert!(conservation_residual(&m, &k, 20, 0).unwrap() < 1e-8, "{}", k.label);
        }
        let constant = KnownIntegral::covector("const", 2, |_| vec![1.0, 0.3]);
        assert!(conservation_residual(&m, &constant, 20, 0).unwrap() > 1e-3);

        let rev = catalog_default("revolution", 2).unwrap();
        let clairaut = known_integrals(&rev, 1).pop().unwrap();
        assert!(conservation_residual(&rev, &clairaut, 20, 0).unwrap() < 1e-8);
        let sparse = conservation_residual_at(&rev, &clairaut, 20, 0, 9).unwrap();
        assert!(sparse < 1e-8);
    }

    #[test]
    fn holonomy_counts() {
        let flat = holonomy_kernel_dim_d1(&catalog_default("flat", 2).unwrap(), 12, 0, 1e6).unwrap();
        assert_eq!(flat.analysis.dim, KernelDim::Determinate(3));
        assert!(flat.max_deviation < 1e-10);
        let sphere = holonomy_kernel_dim_d1(&catalog_default("sphere_cap", 2).unwrap(), 12, 0, 1e6).unwrap();
        assert_eq!(sphere.analysis.dim, KernelDim::Determinate(3), "{:?}", sphere.analysis.singular_values);
        let rev = holonomy_kernel_dim_d1(&catalog_default("revolution", 2).unwrap(), 12, 0, 1e6).unwrap();
        assert_eq!(rev.analysis.dim, KernelDim::Determinate(1), "{:?}", rev.analysis.singular_values);
        let pert = holonomy_kernel_dim_d1(&perturbed(), 12, 0, 1e6).unwrap();
        assert_eq!(pert.analysis.dim, KernelDim::Determinate(0), "{:?}", pert.analysis.singular_values);
        let sphere3 = holonomy_kernel_dim_d1(&catalog_default("sphere_cap", 3).unwrap(), 12, 0, 1e6).unwrap();
        assert_eq!(sphere3.analysis.dim, KernelDim::Determinate(6));
    }

    #[test]
    fn loop_and_reverse_compose_to_identity() {
        let m = catalog_default("liouville", 2).unwrap();
        let lp = &holonomy_loops(&m, 1, 3)[0];
        let mut back = lp.clone();
        back.reverse();
        let h = polygon_transport(&m, lp, 1e-12).unwrap();
        let hb = polygon_transport(&m, &back, 1e-12).unwrap();
        let f = h.nrows();
        assert!((hb * h - DMatrix::identity(f, f)).amax() < 1e-8);
    }

    #[test]
    fn rank_formula_table() {
        let jets: Vec<u64> = (2..=6)
            .map(|n| rank_formula(n, 1).unwrap().1.try_into().unwrap())
            .collect();
        assert_eq!(jets, vec![5, 8, 12, 17, 23]);
        let (rank, jet) = rank_formula(2, 2).unwrap();
        assert_eq!((rank, jet), (BigUint::from(6u32), BigUint::from(9u32)));
        assert!(rank_formula(1, 1).is_err());
        // exact for sizes that overflow u64 intermediates
        let (big, _) = rank_formula(30, 30).unwrap();
        assert!(big.bits() > 64);
    }
}
