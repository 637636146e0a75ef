//! Geodesic initial- and boundary-value problems.
//!
//! Geodesics solve `ẍ^k + Γ^k_{ij} ẋ^i ẋ^j = 0`. Boundary-value problems are
//! solved by shooting on the initial velocity with a damped Newton iteration
//! whose Jacobian comes from central differences of the endpoint map.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{quadratic, MetricField};
use crate::ode::Dopri5;

/// Number of uniform sample intervals recorded on every segment.
pub const SAMPLE_INTERVALS: usize = 64;
const MAX_HALVINGS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Local error tolerance of the Runge–Kutta pair.
    pub ivp_tol: f64,
    /// Maximum endpoint miss `|γ(1) − target|` of a solved boundary-value problem.
    pub bvp_tol: f64,
    pub max_iter: usize,
    pub energy_drift_tol: f64,
    /// `|g(v,v)| < light_tol·|v|²` is rejected as light-like (indefinite metrics).
    pub light_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            ivp_tol: 1e-10,
            bvp_tol: 1e-8,
            max_iter: 50,
            energy_drift_tol: 1e-9,
            light_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

/// A solved geodesic on `[0, t_end]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicSegment {
    pub start: Vec<f64>,
    pub end: Vec<f64>,
    pub v_start: Vec<f64>,
    pub v_end: Vec<f64>,
    /// `g(γ̇, γ̇)` at `t = 0`.
    pub energy: f64,
    pub samples: Vec<Sample>,
    /// `|γ(1) − target|`; zero for initial-value solutions.
    pub bvp_residual: f64,
    /// `max_t |g(γ̇, γ̇) − energy|` over the samples.
    pub energy_drift: f64,
}

impl GeodesicSegment {
    pub fn t_end(&self) -> f64 {
        self.samples.last().map(|s| s.t).unwrap_or(0.0)
    }

    /// Dense output: cubic Hermite interpolation of the position between
    /// samples, linear interpolation of the velocity.
    pub fn interpolate(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let s = &self.samples;
        let t = t.clamp(0.0, self.t_end());
        let mut i = s.partition_point(|p| p.t <= t).saturating_sub(1);
        if i + 1 >= s.len() {
            i = s.len() - 2;
        }
        let (a, b) = (&s[i], &s[i + 1]);
        let h = b.t - a.t;
        let u = (t - a.t) / h;
        let (h00, h10, h01, h11) = (
            2.0 * u.powi(3) - 3.0 * u * u + 1.0,
            u.powi(3) - 2.0 * u * u + u,
            -2.0 * u.powi(3) + 3.0 * u * u,
            u.powi(3) - u * u,
        );
        let x = (0..a.x.len())
            .map(|k| h00 * a.x[k] + h10 * h * a.v[k] + h01 * b.x[k] + h11 * h * b.v[k])
            .collect();
        let v = (0..a.v.len()).map(|k| (1.0 - u) * a.v[k] + u * b.v[k]).collect();
        (x, v)
    }

    /// The same geodesic traversed backwards, `t ↦ γ(T − t)`.
    pub fn reversed(&self) -> GeodesicSegment {
        let t_end = self.t_end();
        let neg = |v: &[f64]| v.iter().map(|c| -c).collect::<Vec<f64>>();
        GeodesicSegment {
            start: self.end.clone(),
            end: self.start.clone(),
            v_start: neg(&self.v_end),
            v_end: neg(&self.v_start),
            energy: self.energy,
            samples: self
                .samples
                .iter()
                .rev()
                .map(|s| Sample { t: t_end - s.t, x: s.x.clone(), v: neg(&s.v) })
                .collect(),
            bvp_residual: self.bvp_residual,
            energy_drift: self.energy_drift,
        }
    }

    /// Relative energy drift `drift / (1 + |E|)`.
    pub fn relative_drift(&self) -> f64 {
        self.energy_drift / (1.0 + self.energy.abs())
    }
}

fn geodesic_rhs<'a>(m: &'a MetricField) -> impl FnMut(f64, &[f64], &mut [f64]) -> Result<()> + 'a {
    let n = m.dim();
    move |t: f64, y: &[f64], dy: &mut [f64]| {
        let x = &y[..n];
        let v = &y[n..];
        if !m.contains(x) {
            return Err(Error::LeftDomain { t });
        }
        let gamma = m.christoffel_unchecked(x)?;
        let acc = gamma.contract(v);
        for k in 0..n {
            dy[k] = v[k];
            dy[n + k] = -acc[k];
        }
        Ok(())
    }
}

fn validate_point(m: &MetricField, x: &[f64]) -> Result<()> {
    if x.len() != m.dim() {
        return Err(Error::InvalidInput(format!(
            "expected {} components, got {}",
            m.dim(),
            x.len()
        )));
    }
    if !m.contains(x) {
        return Err(Error::OutOfDomain {
            point: x.to_vec(),
            radius: m.domain_radius(),
        });
    }
    Ok(())
}

/// Endpoint of the geodesic with initial data `(x0, v0)` at `t_end`, without sampling.
pub fn shoot(m: &MetricField, x0: &[f64], v0: &[f64], t_end: f64, ivp_tol: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = m.dim();
    let mut y: Vec<f64> = x0.iter().chain(v0.iter()).cloned().collect();
    let mut t = 0.0;
    let mut h = 0.0;
    Dopri5::new(ivp_tol).advance(&mut geodesic_rhs(m), &mut t, &mut y, t_end, &mut h)?;
    Ok((y[..n].to_vec(), y[n..].to_vec()))
}

/// Integrate the geodesic equation from `(x0, v0)` up to `t_end`, recording
/// `SAMPLE_INTERVALS + 1` uniformly spaced samples.
pub fn integrate_ivp(m: &MetricField, x0: &[f64], v0: &[f64], t_end: f64, tol: &Tolerances) -> Result<GeodesicSegment> {
    validate_point(m, x0)?;
    if v0.len() != m.dim() || v0.iter().all(|c| *c == 0.0) {
        return Err(Error::InvalidInput("initial velocity must be a nonzero n-vector".into()));
    }
    if !(t_end > 0.0) {
        return Err(Error::InvalidInput("t_end must be positive".into()));
    }
    let n = m.dim();
    let mut y: Vec<f64> = x0.iter().chain(v0.iter()).cloned().collect();
    let mut rhs = geodesic_rhs(m);
    let solver = Dopri5::new(tol.ivp_tol);
    let mut t = 0.0;
    let mut h = 0.0;
    let mut samples = Vec::with_capacity(SAMPLE_INTERVALS + 1);
    samples.push(Sample { t: 0.0, x: x0.to_vec(), v: v0.to_vec() });
    for k in 1..=SAMPLE_INTERVALS {
        let target = t_end * k as f64 / SAMPLE_INTERVALS as f64;
        solver.advance(&mut rhs, &mut t, &mut y, target, &mut h)?;
        samples.push(Sample {
            t: target,
            x: y[..n].to_vec(),
            v: y[n..].to_vec(),
        });
    }
    let g0 = m.eval(x0)?;
    let energy = quadratic(&g0, v0, v0);
    let mut energy_drift: f64 = 0.0;
    for s in &samples {
        let g = m.value_unchecked(&s.x);
        energy_drift = energy_drift.max((quadratic(&g, &s.v, &s.v) - energy).abs());
    }
    let last = samples.last().unwrap();
    Ok(GeodesicSegment {
        start: x0.to_vec(),
        end: last.x.clone(),
        v_start: v0.to_vec(),
        v_end: last.v.clone(),
        energy,
        samples,
        bvp_residual: 0.0,
        energy_drift,
    })
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt()
}

/// Geodesic from `xa` (t = 0) to `xb` (t = 1) by damped Newton shooting.
pub fn solve_bvp(m: &MetricField, xa: &[f64], xb: &[f64], tol: &Tolerances) -> Result<GeodesicSegment> {
    let guess: Vec<f64> = xb.iter().zip(xa).map(|(b, a)| b - a).collect();
    solve_bvp_from(m, xa, xb, &guess, tol)
}

/// [`solve_bvp`] with an explicit initial velocity guess.
pub fn solve_bvp_from(m: &MetricField, xa: &[f64], xb: &[f64], guess: &[f64], tol: &Tolerances) -> Result<GeodesicSegment> {
    validate_point(m, xa)?;
    validate_point(m, xb)?;
    let n = m.dim();
    let sep = distance(xa, xb);
    if sep == 0.0 {
        return Err(Error::InvalidInput("boundary points coincide".into()));
    }
    let target = DVector::from_row_slice(xb);
    let miss = |v: &DVector<f64>| -> Result<DVector<f64>> {
        let (end, _) = shoot(m, xa, v.as_slice(), 1.0, tol.ivp_tol)?;
        Ok(DVector::from_vec(end) - &target)
    };

    if guess.len() != n {
        return Err(Error::InvalidInput("velocity guess has the wrong dimension".into()));
    }
    let mut v = DVector::from_row_slice(guess);
    let mut f = miss(&v)?;
    let mut res = f.norm();
    // Newton keeps going well past bvp_tol: endpoint velocities feed linear solves.
    let goal = (1e-4 * tol.bvp_tol).min(0.1 * tol.ivp_tol).max(1e-15) * (1.0 + sep);
    let mut iterations = 0;
    while res > goal && iterations < tol.max_iter {
        iterations += 1;
        let fd = 1e-6 * (1.0 + v.norm());
        let mut jac = DMatrix::zeros(n, n);
        for k in 0..n {
            let mut vp = v.clone();
            let mut vm = v.clone();
            vp[k] += fd;
            vm[k] -= fd;
            let col = (miss(&vp)? - miss(&vm)?) / (2.0 * fd);
            jac.set_column(k, &col);
        }
        let step = match jac.lu().solve(&(-&f)) {
            Some(s) => s,
            None => break,
        };
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let trial = &v + &step * lambda;
            if let Ok(ft) = miss(&trial) {
                let rt = ft.norm();
                if rt < res {
                    v = trial;
                    f = ft;
                    res = rt;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if !(res <= tol.bvp_tol) {
        return Err(Error::NoConvergence { iterations, residual: res });
    }
    let mut seg = integrate_ivp(m, xa, v.as_slice(), 1.0, tol)?;
    seg.bvp_residual = distance(&seg.end, xb);
    if !m.is_riemannian() {
        let vv: f64 = seg.v_start.iter().map(|c| c * c).sum();
        if seg.energy.abs() < tol.light_tol * vv {
            return Err(Error::LightLike { energy: seg.energy });
        }
    }
    Ok(seg)
}

/// Solve every `(source i, target j)` boundary-value problem. Solves run in
/// parallel on the current rayon pool; the output is positional.
pub fn batch_connect(
    m: &MetricField,
    sources: &[Vec<f64>],
    targets: &[Vec<f64>],
    tol: &Tolerances,
) -> Result<Vec<Vec<GeodesicSegment>>> {
    let pairs: Vec<(usize, usize)> = (0..sources.len())
        .flat_map(|i| (0..targets.len()).map(move |j| (i, j)))
        .collect();
    let solved: Vec<Result<GeodesicSegment>> = pairs
        .par_iter()
        .map(|&(i, j)| solve_bvp(m, &sources[i], &targets[j], tol))
        .collect();
    let mut out: Vec<Vec<GeodesicSegment>> = (0..sources.len()).map(|_| Vec::with_capacity(targets.len())).collect();
    for ((i, j), r) in pairs.into_iter().zip(solved) {
        match r {
            Ok(seg) => out[i].push(seg),
            Err(e) => {
                return Err(Error::PairFailed {
                    source_index: i,
                    target_index: j,
                    cause: Box::new(e),
                })
            }
        }
    }
    Ok(out)
}
