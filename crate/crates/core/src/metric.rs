//! Metrics on a disc `|x| < R` in ℝⁿ.
//!
//! A [`MetricField`] is a closed-form base metric from the catalog plus any
//! number of trigonometric perturbation terms. Coefficients, first derivatives
//! (analytic or finite-difference), Christoffel symbols, curvature and
//! orthonormal frames are all evaluated pointwise from the closed form.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum admissible `|det g|` on the disc.
pub const DET_MARGIN: f64 = 1e-6;
/// Grid resolution per axis for nondegeneracy certificates.
pub const CERT_GRID: usize = 64;
/// Finite-difference step relative to the disc radius.
pub const FD_STEP_REL: f64 = 1e-4;

/// Names accepted by [`catalog`].
pub const CATALOG_NAMES: [&str; 6] = [
    "flat",
    "lorentz_flat",
    "sphere_cap",
    "liouville",
    "revolution",
    "random_analytic",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivMode {
    Analytic,
    FiniteDifference { step: f64 },
}

/// A catalog parameter: either a scalar or a list (polynomial coefficients,
/// centres, ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Scalar(f64),
    List(Vec<f64>),
}

pub type Params = BTreeMap<String, ParamValue>;

fn scalar(params: &Params, key: &str, default: f64) -> Result<f64> {
    match params.get(key) {
        None => Ok(default),
        Some(ParamValue::Scalar(v)) => Ok(*v),
        Some(ParamValue::List(_)) => Err(Error::InvalidParameter(format!("`{key}` must be a number"))),
    }
}

fn list(params: &Params, key: &str, default: &[f64]) -> Result<Vec<f64>> {
    match params.get(key) {
        None => Ok(default.to_vec()),
        Some(ParamValue::List(v)) => Ok(v.clone()),
        Some(ParamValue::Scalar(v)) => Ok(vec![*v]),
    }
}

/// Univariate polynomial with ascending coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly1(pub Vec<f64>);

impl Poly1 {
    pub fn value(&self, t: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }

    pub fn derivative(&self) -> Poly1 {
        Poly1(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| k as f64 * c)
                .collect(),
        )
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Base {
    Constant(DMatrix<f64>),
    /// `4 a² / (1 + |x|²)² δ`: round sphere of radius `a` in a stereographic chart.
    SphereCap { scale: f64 },
    /// `(f(x¹) + h(x²)) (dx¹² + dx²²)`.
    Liouville { f: Poly1, df: Poly1, h: Poly1, dh: Poly1 },
    /// `dr² + ρ(r)² dθ²` with chart coordinates `(x¹, x²) = (r, θ)`.
    Revolution { rho: Poly1, drho: Poly1 },
}

impl Base {
    fn value(&self, n: usize, x: &[f64]) -> DMatrix<f64> {
        match self {
            Base::Constant(g) => g.clone(),
            Base::SphereCap { scale } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                DMatrix::identity(n, n) * (4.0 * scale * scale / (1.0 + r2).powi(2))
            }
            Base::Liouville { f, h, .. } => DMatrix::identity(2, 2) * (f.value(x[0]) + h.value(x[1])),
            Base::Revolution { rho, .. } => {
                let r = rho.value(x[0]);
                DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, r * r]))
            }
        }
    }

    fn gradient(&self, n: usize, x: &[f64]) -> Vec<DMatrix<f64>> {
        match self {
            Base::Constant(_) => vec![DMatrix::zeros(n, n); n],
            Base::SphereCap { scale } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                let c = -16.0 * scale * scale / (1.0 + r2).powi(3);
                (0..n).map(|k| DMatrix::identity(n, n) * (c * x[k])).collect()
            }
            Base::Liouville { df, dh, .. } => vec![
                DMatrix::identity(2, 2) * df.value(x[0]),
                DMatrix::identity(2, 2) * dh.value(x[1]),
            ],
            Base::Revolution { rho, drho } => {
                let mut d1 = DMatrix::zeros(2, 2);
                d1[(1, 1)] = 2.0 * rho.value(x[0]) * drho.value(x[0]);
                vec![d1, DMatrix::zeros(2, 2)]
            }
        }
    }
}

/// Spatial support of a perturbation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Support {
    Global,
    Bump { center: Vec<f64>, radius: f64 },
}

/// Request for a seeded, C²-small trigonometric perturbation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub amplitude: f64,
    pub frequency_cutoff: u32,
    pub seed: u64,
    #[serde(default = "default_support")]
    pub support: Support,
}

fn default_support() -> Support {
    Support::Global
}

impl PerturbationSpec {
    pub fn global(amplitude: f64, frequency_cutoff: u32, seed: u64) -> Self {
        Self {
            amplitude,
            frequency_cutoff,
            seed,
            support: Support::Global,
        }
    }

    /// Closed-form bound on the C² norm (entrywise sup of δg and its first
    /// and second partial derivatives) of the generated perturbation.
    pub fn c2_bound(&self) -> f64 {
        self.amplitude * (1.0 + self.frequency_cutoff as f64).powi(2)
    }
}

/// A realized perturbation `δg_ij(x) = A·s·ψ(x)·Σ_k (a cos(k·x) + b sin(k·x))`
/// with integer wave vectors `|k|_∞ ≤ cutoff` and `Σ_k (|a| + |b|) = 1` per
/// component.
#[derive(Debug, Clone)]
struct TrigPerturbation {
    n: usize,
    amplitude: f64,
    wavevectors: Vec<Vec<f64>>,
    // [component][wavevector], components packed over i <= j
    cos: Vec<Vec<f64>>,
    sin: Vec<Vec<f64>>,
    support: Support,
}

fn packed(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * n - i * (i + 1) / 2 + j
}

impl TrigPerturbation {
    fn generate(n: usize, spec: &PerturbationSpec) -> Self {
        let cutoff = spec.frequency_cutoff as i64;
        // Half of the integer lattice box: k and -k give the same trig functions.
        let mut wavevectors = Vec::new();
        let side = (2 * cutoff + 1) as usize;
        let total = side.pow(n as u32);
        for idx in 0..total {
            let mut rest = idx;
            let mut k = vec![0i64; n];
            for slot in k.iter_mut() {
                *slot = (rest % side) as i64 - cutoff;
                rest /= side;
            }
            match k.iter().find(|c| **c != 0) {
                None => wavevectors.push(k),
                Some(first) if *first > 0 => wavevectors.push(k),
                _ => {}
            }
        }
        wavevectors.sort();
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let comps = n * (n + 1) / 2;
        let mut cos = Vec::with_capacity(comps);
        let mut sin = Vec::with_capacity(comps);
        for _ in 0..comps {
            let mut c: Vec<f64> = Vec::with_capacity(wavevectors.len());
            let mut s: Vec<f64> = Vec::with_capacity(wavevectors.len());
            for k in &wavevectors {
                c.push(rng.gen_range(-1.0..1.0));
                let b = rng.gen_range(-1.0..1.0);
                // sin(0·x) vanishes identically
                s.push(if k.iter().all(|v| *v == 0) { 0.0 } else { b });
            }
            let l1: f64 = c.iter().chain(s.iter()).map(|v| v.abs()).sum();
            let norm = if l1 > 0.0 { 1.0 / l1 } else { 0.0 };
            c.iter_mut().for_each(|v| *v *= norm);
            s.iter_mut().for_each(|v| *v *= norm);
            cos.push(c);
            sin.push(s);
        }
        let scale = match &spec.support {
            Support::Global => 1.0,
            Support::Bump { radius, .. } => bump_scale(spec.frequency_cutoff as f64, *radius),
        };
        Self {
            n,
            amplitude: spec.amplitude * scale,
            wavevectors: wavevectors
                .into_iter()
                .map(|k| k.into_iter().map(|v| v as f64).collect())
                .collect(),
            cos,
            sin,
            support: spec.support.clone(),
        }
    }

    /// Bump factor ψ and its gradient.
    fn bump(&self, x: &[f64]) -> (f64, Vec<f64>) {
        match &self.support {
            Support::Global => (1.0, vec![0.0; self.n]),
            Support::Bump { center, radius } => {
                let rr = radius * radius;
                let s: f64 = x.iter().zip(center).map(|(a, c)| (a - c).powi(2)).sum::<f64>() / rr;
                if s >= 1.0 {
                    (0.0, vec![0.0; self.n])
                } else {
                    let one = 1.0 - s;
                    let grad = x
                        .iter()
                        .zip(center)
                        .map(|(a, c)| -8.0 * one.powi(3) * (a - c) / rr)
                        .collect();
                    (one.powi(4), grad)
                }
            }
        }
    }

    fn add_value(&self, x: &[f64], g: &mut DMatrix<f64>) {
        let (psi, _) = self.bump(x);
        if psi == 0.0 || self.amplitude == 0.0 {
            return;
        }
        let trig: Vec<(f64, f64)> = self
            .wavevectors
            .iter()
            .map(|k| k.iter().zip(x).map(|(a, b)| a * b).sum::<f64>().sin_cos())
            .collect();
        for i in 0..self.n {
            for j in i..self.n {
                let c = packed(self.n, i, j);
                let mut acc = 0.0;
                for (w, (s, co)) in trig.iter().enumerate() {
                    acc += self.cos[c][w] * co + self.sin[c][w] * s;
                }
                let v = self.amplitude * psi * acc;
                g[(i, j)] += v;
                if i != j {
                    g[(j, i)] += v;
                }
            }
        }
    }

    fn add_gradient(&self, x: &[f64], dg: &mut [DMatrix<f64>]) {
        let (psi, dpsi) = self.bump(x);
        if self.amplitude == 0.0 || (psi == 0.0 && dpsi.iter().all(|v| *v == 0.0)) {
            return;
        }
        let trig: Vec<(f64, f64)> = self
            .wavevectors
            .iter()
            .map(|k| k.iter().zip(x).map(|(a, b)| a * b).sum::<f64>().sin_cos())
            .collect();
        for i in 0..self.n {
            for j in i..self.n {
                let c = packed(self.n, i, j);
                let mut value = 0.0;
                let mut grad = vec![0.0; self.n];
                for (w, (s, co)) in trig.iter().enumerate() {
                    let (a, b) = (self.cos[c][w], self.sin[c][w]);
                    value += a * co + b * s;
                    let slope = -a * s + b * co;
                    for (p, gp) in grad.iter_mut().enumerate() {
                        *gp += self.wavevectors[w][p] * slope;
                    }
                }
                for p in 0..self.n {
                    let v = self.amplitude * (dpsi[p] * value + psi * grad[p]);
                    dg[p][(i, j)] += v;
                    if i != j {
                        dg[p][(j, i)] += v;
                    }
                }
            }
        }
    }
}

/// Normalization keeping a bump-supported perturbation within the global C² bound.
fn bump_scale(cutoff: f64, radius: f64) -> f64 {
    // sup|ψ| = 1, sup|∇ψ| <= 2/ρ, sup|∇²ψ| <= 16/ρ² for ψ = (1 - |x-c|²/ρ²)⁴
    let target = (1.0 + cutoff).powi(2);
    let c1 = 2.0 / radius + cutoff;
    let c2 = 16.0 / (radius * radius) + 4.0 * cutoff / radius + cutoff * cutoff;
    (target / target.max(c1).max(c2)).min(1.0)
}

/// Christoffel symbols `Γ^k_{ij}`, stored as `[k][i][j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel {
    pub n: usize,
    pub data: Vec<f64>,
}

impl Christoffel {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n * n] }
    }

    #[inline]
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[(k * self.n + i) * self.n + j]
    }

    #[inline]
    fn set(&mut self, k: usize, i: usize, j: usize, v: f64) {
        self.data[(k * self.n + i) * self.n + j] = v;
    }

    /// `Γ^k_{ij} v^i v^j` for every `k`.
    pub fn contract(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|k| {
                let mut acc = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        acc += self.get(k, i, j) * v[i] * v[j];
                    }
                }
                acc
            })
            .collect()
    }

    pub fn max_abs_diff(&self, other: &Christoffel) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Orthonormal frame at a point: columns of `e` are an orthonormal basis for
/// `g`, i.e. `eᵀ g e = diag(signs)` with negative signs first.
#[derive(Debug, Clone)]
pub struct Frame {
    pub e: DMatrix<f64>,
    pub e_inv: DMatrix<f64>,
    pub signs: Vec<f64>,
}

impl Frame {
    /// Frame components of a coordinate vector.
    pub fn to_frame(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.e_inv * v
    }
}

/// A smooth metric on the open disc of radius `domain_radius`.
#[derive(Debug, Clone)]
pub struct MetricField {
    dim: usize,
    signature: Vec<i8>,
    domain_radius: f64,
    label: String,
    deriv_mode: DerivMode,
    base: Base,
    perturbations: Vec<TrigPerturbation>,
}

impl fmt::Display for MetricField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (n = {}, R = {})", self.label, self.dim, self.domain_radius)
    }
}

impl MetricField {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn signature(&self) -> &[i8] {
        &self.signature
    }

    pub fn domain_radius(&self) -> f64 {
        self.domain_radius
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub(crate) fn base(&self) -> &Base {
        &self.base
    }

    /// True when no perturbation has been added on top of the catalog base.
    pub fn is_unperturbed(&self) -> bool {
        self.perturbations.is_empty()
    }

    pub fn deriv_mode(&self) -> DerivMode {
        self.deriv_mode
    }

    pub fn is_riemannian(&self) -> bool {
        self.signature.iter().all(|s| *s > 0)
    }

    pub fn with_deriv_mode(mut self, mode: DerivMode) -> Self {
        self.deriv_mode = mode;
        self
    }

    pub fn with_domain_radius(mut self, radius: f64) -> Self {
        self.domain_radius = radius;
        self
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().map(|v| v * v).sum::<f64>().sqrt() < self.domain_radius
    }

    fn check_domain(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::InvalidInput(format!(
                "point has {} components, metric dimension is {}",
                x.len(),
                self.dim
            )));
        }
        if !self.contains(x) {
            return Err(Error::OutOfDomain {
                point: x.to_vec(),
                radius: self.domain_radius,
            });
        }
        Ok(())
    }

    /// `g_ij(x)`.
    pub fn eval(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_domain(x)?;
        Ok(self.value_unchecked(x))
    }

    /// Closed-form coefficients without the domain check. The closed forms
    /// extend smoothly past the disc, which finite-difference stencils rely on.
    pub(crate) fn value_unchecked(&self, x: &[f64]) -> DMatrix<f64> {
        let mut g = self.base.value(self.dim, x);
        for p in &self.perturbations {
            p.add_value(x, &mut g);
        }
        g
    }

    fn analytic_gradient(&self, x: &[f64]) -> Vec<DMatrix<f64>> {
        let mut dg = self.base.gradient(self.dim, x);
        for p in &self.perturbations {
            p.add_gradient(x, &mut dg);
        }
        dg
    }

    /// Fourth-order central differences of the coefficients.
    pub fn fd_gradient(&self, x: &[f64], h: f64) -> Vec<DMatrix<f64>> {
        let mut y = x.to_vec();
        (0..self.dim)
            .map(|k| {
                let x0 = x[k];
                let mut at = |offset: f64| {
                    y[k] = x0 + offset;
                    self.value_unchecked(&y)
                };
                let d = (at(-2.0 * h) - at(-h) * 8.0 + at(h) * 8.0 - at(2.0 * h)) / (12.0 * h);
                y[k] = x0;
                d
            })
            .collect()
    }

    /// `∂_k g_ij(x)` as a list over `k`, honouring the derivative mode.
    pub fn gradient_unchecked(&self, x: &[f64]) -> Vec<DMatrix<f64>> {
        match self.deriv_mode {
            DerivMode::Analytic => self.analytic_gradient(x),
            DerivMode::FiniteDifference { step } => self.fd_gradient(x, step),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        self.check_domain(x)?;
        Ok(self.gradient_unchecked(x))
    }

    /// `g^{ij}(x)`.
    pub fn inverse(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_domain(x)?;
        invert(self.value_unchecked(x), x)
    }

    /// `Γ^k_{ij} = ½ g^{kl}(∂_i g_jl + ∂_j g_il − ∂_l g_ij)`.
    pub fn christoffel(&self, x: &[f64]) -> Result<Christoffel> {
        self.check_domain(x)?;
        self.christoffel_unchecked(x)
    }

    pub(crate) fn christoffel_unchecked(&self, x: &[f64]) -> Result<Christoffel> {
        let g = self.value_unchecked(x);
        let dg = self.gradient_unchecked(x);
        christoffel_from(&invert(g, x)?, &dg)
    }

    /// Christoffel symbols built from finite-difference coefficient derivatives
    /// (independent of the analytic gradient).
    pub fn christoffel_fd(&self, x: &[f64]) -> Result<Christoffel> {
        self.check_domain(x)?;
        let g = self.value_unchecked(x);
        let dg = self.fd_gradient(x, FD_STEP_REL * self.domain_radius);
        christoffel_from(&invert(g, x)?, &dg)
    }

    /// `∂_l Γ^k_{ij}` by fourth-order central differences, indexed `[l]`.
    pub fn christoffel_gradient(&self, x: &[f64]) -> Result<Vec<Christoffel>> {
        self.check_domain(x)?;
        let h = FD_STEP_REL * self.domain_radius;
        let mut y = x.to_vec();
        let mut out = Vec::with_capacity(self.dim);
        for l in 0..self.dim {
            let x0 = x[l];
            let mut at = |offset: f64| -> Result<Christoffel> {
                y[l] = x0 + offset;
                self.christoffel_unchecked(&y)
            };
            let (m2, m1, p1, p2) = (at(-2.0 * h)?, at(-h)?, at(h)?, at(2.0 * h)?);
            y[l] = x0;
            let mut d = Christoffel::zeros(self.dim);
            for idx in 0..d.data.len() {
                d.data[idx] = (m2.data[idx] - 8.0 * m1.data[idx] + 8.0 * p1.data[idx] - p2.data[idx]) / (12.0 * h);
            }
            out.push(d);
        }
        Ok(out)
    }

    /// Riemann tensor `R^d_{abc} = ∂_b Γ^d_{ca} − ∂_c Γ^d_{ba} + Γ^d_{be} Γ^e_{ca} − Γ^d_{ce} Γ^e_{ba}`,
    /// so that `[∇_b, ∇_c] V^d = R^d_{abc} V^a`. Stored `[d][a][b][c]`.
    pub fn riemann(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim;
        let gamma = self.christoffel(x)?;
        let dgamma = self.christoffel_gradient(x)?;
        let mut r = vec![0.0; n * n * n * n];
        for d in 0..n {
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        let mut v = dgamma[b].get(d, c, a) - dgamma[c].get(d, b, a);
                        for e in 0..n {
                            v += gamma.get(d, b, e) * gamma.get(e, c, a) - gamma.get(d, c, e) * gamma.get(e, b, a);
                        }
                        r[((d * n + a) * n + b) * n + c] = v;
                    }
                }
            }
        }
        Ok(r)
    }

    /// `g(u, v)` at `x`.
    pub fn inner(&self, x: &[f64], u: &[f64], v: &[f64]) -> Result<f64> {
        let g = self.eval(x)?;
        Ok(quadratic(&g, u, v))
    }

    /// Orthonormal frame at `x`, built from the eigen-decomposition of `g(x)`.
    pub fn frame(&self, x: &[f64]) -> Result<Frame> {
        let g = self.eval(x)?;
        let n = self.dim;
        let eig = g.clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|a, b| eig.eigenvalues[*a].total_cmp(&eig.eigenvalues[*b]));
        let mut e = DMatrix::zeros(n, n);
        let mut e_inv = DMatrix::zeros(n, n);
        let mut signs = Vec::with_capacity(n);
        for (col, &src) in order.iter().enumerate() {
            let lambda = eig.eigenvalues[src];
            if lambda.abs() < 1e-300 {
                return Err(Error::SingularMetric { point: x.to_vec(), det: 0.0 });
            }
            let s = lambda.abs().sqrt();
            let q = eig.eigenvectors.column(src);
            for row in 0..n {
                e[(row, col)] = q[row] / s;
                e_inv[(col, row)] = q[row] * s;
            }
            signs.push(lambda.signum());
        }
        Ok(Frame { e, e_inv, signs })
    }

    /// Scan a `res^n` grid of the disc, checking `|det g| ≥ DET_MARGIN` and the
    /// declared signature. Returns the smallest `|det g|` seen.
    pub fn certify_nondegenerate(&self, res: usize) -> Result<f64> {
        let n = self.dim;
        let r = self.domain_radius;
        let mut min_det = f64::INFINITY;
        let total = res.pow(n as u32);
        let mut x = vec![0.0; n];
        for idx in 0..total {
            let mut rest = idx;
            for slot in x.iter_mut() {
                let k = rest % res;
                rest /= res;
                *slot = -r + (k as f64 + 0.5) * 2.0 * r / res as f64;
            }
            if !self.contains(&x) {
                continue;
            }
            let g = self.value_unchecked(&x);
            let det = g.determinant();
            min_det = min_det.min(det.abs());
            if det.abs() < DET_MARGIN {
                return Err(Error::DegenerateResult {
                    point: x.clone(),
                    reason: format!("|det g| = {:e} below margin", det.abs()),
                });
            }
            let negatives = g.symmetric_eigenvalues().iter().filter(|l| **l < 0.0).count();
            let declared = self.signature.iter().filter(|s| **s < 0).count();
            if negatives != declared {
                return Err(Error::DegenerateResult {
                    point: x.clone(),
                    reason: format!("signature changed: {negatives} negative directions, expected {declared}"),
                });
            }
        }
        Ok(min_det)
    }
}

pub(crate) fn quadratic(g: &DMatrix<f64>, u: &[f64], v: &[f64]) -> f64 {
    let n = u.len();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += g[(i, j)] * u[i] * v[j];
        }
    }
    acc
}

fn invert(g: DMatrix<f64>, x: &[f64]) -> Result<DMatrix<f64>> {
    let det = g.determinant();
    if det.abs() < DET_MARGIN {
        return Err(Error::SingularMetric { point: x.to_vec(), det });
    }
    g.try_inverse().ok_or(Error::SingularMetric { point: x.to_vec(), det })
}

pub(crate) fn christoffel_from(ginv: &DMatrix<f64>, dg: &[DMatrix<f64>]) -> Result<Christoffel> {
    let n = ginv.nrows();
    let mut gamma = Christoffel::zeros(n);
    // lowered: Γ_{l,ij} = ½ (∂_i g_jl + ∂_j g_il − ∂_l g_ij)
    let mut lowered = vec![0.0; n * n * n];
    for l in 0..n {
        for i in 0..n {
            for j in 0..n {
                lowered[(l * n + i) * n + j] = 0.5 * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]);
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in i..n {
                let mut acc = 0.0;
                for l in 0..n {
                    acc += ginv[(k, l)] * lowered[(l * n + i) * n + j];
                }
                gamma.set(k, i, j, acc);
                gamma.set(k, j, i, acc);
            }
        }
    }
    Ok(gamma)
}

/// Build a catalog metric.
///
/// | name | parameters | coefficients |
/// |------|------------|--------------|
/// | `flat` | `n` (2) | `δ_ij` |
/// | `lorentz_flat` | `n` (2) | `diag(−1, 1, …, 1)` |
/// | `sphere_cap` | `n` (2), `radius` (1) | `4 a² / (1 + \|x\|²)² δ_ij` |
/// | `liouville` | `f` ([1,0,1]), `h` ([1,0,0,0,1]) | `(f(x¹) + h(x²)) δ_ij` |
/// | `revolution` | `rho` ([1,0,0.25]) | `diag(1, ρ(x¹)²)` |
/// | `random_analytic` | `n` (2), `amplitude` (0.05), `cutoff` (2), `seed` (0) | `δ_ij` + trigonometric terms |
///
/// All accept `domain_radius` (1). Polynomial parameters list ascending coefficients.
pub fn catalog(name: &str, params: &Params) -> Result<MetricField> {
    let radius = scalar(params, "domain_radius", 1.0)?;
    if !(radius > 0.0) {
        return Err(Error::InvalidParameter("domain_radius must be positive".into()));
    }
    let dim_param = scalar(params, "n", 2.0)?;
    if dim_param < 2.0 || dim_param.fract() != 0.0 {
        return Err(Error::InvalidParameter("n must be an integer >= 2".into()));
    }
    let n = dim_param as usize;
    let two_d = |what: &str| -> Result<()> {
        if n != 2 {
            Err(Error::InvalidParameter(format!("{what} is only defined for n = 2")))
        } else {
            Ok(())
        }
    };
    let mut perturbations = Vec::new();
    let (base, signature) = match name {
        "flat" => (Base::Constant(DMatrix::identity(n, n)), vec![1; n]),
        "lorentz_flat" => {
            let mut g = DMatrix::identity(n, n);
            g[(0, 0)] = -1.0;
            let mut sig = vec![1; n];
            sig[0] = -1;
            (Base::Constant(g), sig)
        }
        "sphere_cap" => {
            let scale = scalar(params, "radius", 1.0)?;
            if !(scale > 0.0) {
                return Err(Error::InvalidParameter("radius must be positive".into()));
            }
            (Base::SphereCap { scale }, vec![1; n])
        }
        "liouville" => {
            two_d("liouville")?;
            let f = Poly1(list(params, "f", &[1.0, 0.0, 1.0])?);
            let h = Poly1(list(params, "h", &[1.0, 0.0, 0.0, 0.0, 1.0])?);
            let (df, dh) = (f.derivative(), h.derivative());
            (Base::Liouville { f, df, h, dh }, vec![1, 1])
        }
        "revolution" => {
            two_d("revolution")?;
            let rho = Poly1(list(params, "rho", &[1.0, 0.0, 0.25])?);
            let drho = rho.derivative();
            (Base::Revolution { rho, drho }, vec![1, 1])
        }
        "random_analytic" => {
            let spec = PerturbationSpec::global(
                scalar(params, "amplitude", 0.05)?,
                scalar(params, "cutoff", 2.0)? as u32,
                scalar(params, "seed", 0.0)? as u64,
            );
            perturbations.push(TrigPerturbation::generate(n, &spec));
            (Base::Constant(DMatrix::identity(n, n)), vec![1; n])
        }
        other => return Err(Error::UnknownMetric(other.to_string())),
    };
    let metric = MetricField {
        dim: n,
        signature,
        domain_radius: radius,
        label: name.to_string(),
        deriv_mode: DerivMode::Analytic,
        base,
        perturbations,
    };
    if !matches!(metric.base, Base::Constant(_)) || !metric.perturbations.is_empty() {
        metric.certify_nondegenerate(CERT_GRID)?;
    }
    Ok(metric)
}

/// Catalog metric with default parameters in dimension `n`.
pub fn catalog_default(name: &str, n: usize) -> Result<MetricField> {
    let mut params = Params::new();
    params.insert("n".into(), ParamValue::Scalar(n as f64));
    catalog(name, &params)
}

/// Add a seeded trigonometric perturbation to `m`.
pub fn perturb(m: &MetricField, spec: &PerturbationSpec) -> Result<MetricField> {
    if !(spec.amplitude >= 0.0) || !spec.amplitude.is_finite() {
        return Err(Error::InvalidParameter("amplitude must be non-negative".into()));
    }
    if let Support::Bump { center, radius } = &spec.support {
        if center.len() != m.dim || !(*radius > 0.0) {
            return Err(Error::InvalidParameter("bump needs an n-dimensional center and positive radius".into()));
        }
    }
    let mut out = m.clone();
    if spec.amplitude == 0.0 {
        return Ok(out);
    }
    out.perturbations.push(TrigPerturbation::generate(m.dim, spec));
    out.label = format!("{}+perturbation(a={:e},k={},seed={})", m.label, spec.amplitude, spec.frequency_cutoff, spec.seed);
    out.certify_nondegenerate(CERT_GRID)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_interior(rng: &mut ChaCha8Rng, n: usize, r: f64) -> Vec<f64> {
        loop {
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-r..r)).collect();
            if x.iter().map(|v| v * v).sum::<f64>().sqrt() < 0.9 * r {
                return x;
            }
        }
    }

    fn all_catalog() -> Vec<MetricField> {
        let mut v: Vec<MetricField> = CATALOG_NAMES.iter().map(|n| catalog_default(n, 2).unwrap()).collect();
        v.push(catalog_default("flat", 3).unwrap());
        v.push(catalog_default("sphere_cap", 3).unwrap());
        v
    }

    #[test]
    fn flat_and_lorentz_values() {
        let flat = catalog_default("flat", 2).unwrap();
        assert_eq!(flat.eval(&[0.3, 0.4]).unwrap(), DMatrix::identity(2, 2));
        let lor = catalog_default("lorentz_flat", 2).unwrap();
        let g = lor.eval(&[0.1, -0.5]).unwrap();
        assert_eq!(g, DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0]));
        assert_eq!(lor.signature(), &[-1, 1]);
    }

    #[test]
    fn sphere_cap_at_origin_is_four() {
        let m = catalog_default("sphere_cap", 2).unwrap();
        let g = m.eval(&[0.0, 0.0]).unwrap();
        assert_eq!(g, DMatrix::identity(2, 2) * 4.0);
    }

    #[test]
    fn liouville_at_origin() {
        let m = catalog_default("liouville", 2).unwrap();
        assert_eq!(m.eval(&[0.0, 0.0]).unwrap(), DMatrix::identity(2, 2) * 2.0);
    }

    #[test]
    fn out_of_domain_and_unknown() {
        let m = catalog_default("flat", 2).unwrap();
        assert!(matches!(m.eval(&[1.0, 0.0]), Err(Error::OutOfDomain { .. })));
        assert!(matches!(catalog_default("torus", 2), Err(Error::UnknownMetric(_))));
        assert!(matches!(catalog_default("liouville", 3), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn flat_christoffels_vanish() {
        let m = catalog_default("flat", 3).unwrap();
        let g = m.christoffel(&[0.2, -0.1, 0.3]).unwrap();
        assert!(g.data.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn sphere_christoffels_match_finite_differences() {
        let m = catalog_default("sphere_cap", 2).unwrap();
        let a = m.christoffel(&[0.2, 0.0]).unwrap();
        let b = m.christoffel_fd(&[0.2, 0.0]).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-8, "{}", a.max_abs_diff(&b));
    }

    #[test]
    fn christoffel_consistency_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for m in all_catalog() {
            for _ in 0..100 {
                let x = random_interior(&mut rng, m.dim(), m.domain_radius());
                let a = m.christoffel(&x).unwrap();
                let b = m.christoffel_fd(&x).unwrap();
                assert!(a.max_abs_diff(&b) < 1e-7, "{}: {}", m.label(), a.max_abs_diff(&b));
                for k in 0..m.dim() {
                    for i in 0..m.dim() {
                        for j in 0..m.dim() {
                            assert_eq!(a.get(k, i, j), a.get(k, j, i));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn analytic_gradient_fd_agreement_is_fourth_order() {
        let m = catalog_default("random_analytic", 2).unwrap();
        let x = [0.31, -0.22];
        let exact = m.gradient(&x).unwrap();
        let err = |h: f64| {
            m.fd_gradient(&x, h)
                .iter()
                .zip(&exact)
                .map(|(a, b)| (a - b).amax())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(0.02), err(0.01));
        // halving h shrinks the error by ~2⁴
        assert!(e1 / e2 > 12.0, "ratio {}", e1 / e2);
    }

    #[test]
    fn symmetric_coefficients() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let metrics = all_catalog();
        for trial in 0..1000 {
            let m = &metrics[trial % metrics.len()];
            let x = random_interior(&mut rng, m.dim(), m.domain_radius());
            let g = m.eval(&x).unwrap();
            assert_eq!(g, g.transpose());
        }
    }

    #[test]
    fn zero_amplitude_is_identity_operation() {
        let m = catalog_default("sphere_cap", 2).unwrap();
        let p = perturb(&m, &PerturbationSpec::global(0.0, 2, 3)).unwrap();
        assert_eq!(m.eval(&[0.1, 0.2]).unwrap(), p.eval(&[0.1, 0.2]).unwrap());
    }

    #[test]
    fn perturbation_is_deterministic() {
        let m = catalog_default("flat", 2).unwrap();
        let spec = PerturbationSpec::global(1e-2, 2, 99);
        let a = perturb(&m, &spec).unwrap();
        let b = perturb(&m, &spec).unwrap();
        for x in [[0.1, 0.2], [-0.5, 0.3], [0.0, -0.7]] {
            let (ga, gb) = (a.eval(&x).unwrap(), b.eval(&x).unwrap());
            assert!(ga.iter().zip(gb.iter()).all(|(u, v)| u.to_bits() == v.to_bits()));
        }
        let c = perturb(&m, &PerturbationSpec::global(1e-2, 2, 100)).unwrap();
        assert_ne!(a.eval(&[0.1, 0.2]).unwrap(), c.eval(&[0.1, 0.2]).unwrap());
    }

    #[test]
    fn perturbation_grid_bound() {
        let m = catalog_default("flat", 2).unwrap();
        let spec = PerturbationSpec::global(1e-2, 2, 7);
        let p = perturb(&m, &spec).unwrap();
        let mut max = 0.0f64;
        for i in 0..50 {
            for j in 0..50 {
                let x = [-1.0 + (i as f64 + 0.5) / 25.0, -1.0 + (j as f64 + 0.5) / 25.0];
                if !p.contains(&x) {
                    continue;
                }
                let d = p.eval(&x).unwrap() - DMatrix::identity(2, 2);
                max = max.max(d.amax());
                // first derivatives obey the cutoff bound too
                for dk in p.gradient(&x).unwrap() {
                    assert!(dk.amax() <= spec.c2_bound());
                }
            }
        }
        assert!(max > 0.0);
        assert!(max <= 1e-2 * 9.0);
        assert!(max <= 1e-2);
    }

    #[test]
    fn bump_perturbation_vanishes_outside_support() {
        let m = catalog_default("flat", 2).unwrap();
        let spec = PerturbationSpec {
            amplitude: 1e-2,
            frequency_cutoff: 2,
            seed: 1,
            support: Support::Bump { center: vec![0.2, 0.1], radius: 0.3 },
        };
        let p = perturb(&m, &spec).unwrap();
        assert_eq!(p.eval(&[-0.5, -0.5]).unwrap(), DMatrix::identity(2, 2));
        assert_ne!(p.eval(&[0.2, 0.1]).unwrap(), DMatrix::identity(2, 2));
        let x = [0.25, 0.05];
        let a = p.christoffel(&x).unwrap();
        let b = p.christoffel_fd(&x).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-7);
    }

    #[test]
    fn perturbed_catalog_keeps_signature() {
        for name in CATALOG_NAMES {
            let m = catalog_default(name, 2).unwrap();
            for seed in 0..3 {
                let p = perturb(&m, &PerturbationSpec::global(1e-2, 2, seed)).unwrap();
                assert_eq!(p.signature(), m.signature());
                assert!(p.certify_nondegenerate(32).is_ok());
            }
        }
    }

    #[test]
    fn frames_orthonormalize() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for m in all_catalog() {
            let x = random_interior(&mut rng, m.dim(), m.domain_radius());
            let f = m.frame(&x).unwrap();
            let g = m.eval(&x).unwrap();
            let eta = f.e.transpose() * &g * &f.e;
            let expected = DMatrix::from_diagonal(&DVector::from_vec(f.signs.clone()));
            assert!((eta - expected).amax() < 1e-12);
            assert!((&f.e * &f.e_inv - DMatrix::identity(m.dim(), m.dim())).amax() < 1e-12);
            let neg = f.signs.iter().filter(|s| **s < 0.0).count();
            assert_eq!(neg, m.signature().iter().filter(|s| **s < 0).count());
        }
    }

    #[test]
    fn sphere_has_constant_curvature_one() {
        let m = catalog_default("sphere_cap", 2).unwrap();
        let x = [0.3, -0.2];
        let r = m.riemann(&x).unwrap();
        let g = m.eval(&x).unwrap();
        // in two dimensions R^0_{101} = K g_11; index (0, 1, 0, 1) in base 2
        let r0101 = r[0b0101];
        assert!((r0101 - g[(1, 1)]).abs() < 1e-7, "{} vs {}", r0101, g[(1, 1)]);
    }
}
