//! Dormand–Prince 5(4) integrator with adaptive step control.
//!
//! The integrator works on flat `f64` slices so that geodesic states, fibre
//! transport matrices and anything else can share it. The right-hand side may
//! fail (e.g. when the state leaves the disc); the error is propagated as-is.

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// Difference between the 5th and 4th order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Adaptive embedded Runge–Kutta pair of order 5(4).
#[derive(Debug, Clone)]
pub struct Dopri5 {
    /// Mixed absolute/relative local error tolerance.
    pub tol: f64,
    pub max_steps: usize,
    pub h_max: f64,
}

impl Dopri5 {
    pub fn new(tol: f64) -> Self {
        Self {
            tol,
            max_steps: 200_000,
            h_max: f64::INFINITY,
        }
    }

    /// Advance `y` from `*t` to `t_end`. `h` carries the step size between
    /// calls; pass `0.0` to let the integrator pick a starting step.
    pub fn advance<F>(&self, rhs: &mut F, t: &mut f64, y: &mut [f64], t_end: f64, h: &mut f64) -> Result<usize>
    where
        F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    {
        let dim = y.len();
        let span = t_end - *t;
        if span == 0.0 {
            return Ok(0);
        }
        let dir = span.signum();
        let mut k1 = vec![0.0; dim];
        let mut k2 = vec![0.0; dim];
        let mut k3 = vec![0.0; dim];
        let mut k4 = vec![0.0; dim];
        let mut k5 = vec![0.0; dim];
        let mut k6 = vec![0.0; dim];
        let mut k7 = vec![0.0; dim];
        let mut stage = vec![0.0; dim];
        let mut y_new = vec![0.0; dim];

        rhs(*t, y, &mut k1)?;
        if *h <= 0.0 || !h.is_finite() {
            *h = initial_step(y, &k1, self.tol).min(span.abs());
        }
        let mut step = (*h).min(self.h_max).min(span.abs());
        let mut steps = 0usize;

        loop {
            let remaining = (t_end - *t) * dir;
            if remaining <= 1e-14 * t_end.abs().max(1.0) {
                *t = t_end;
                return Ok(steps);
            }
            if steps >= self.max_steps {
                return Err(Error::StepFailure { t: *t, h: step });
            }
            let mut last = false;
            if step >= remaining {
                step = remaining;
                last = true;
            }
            let hs = step * dir;
            let t0 = *t;

            for i in 0..dim {
                stage[i] = y[i] + hs * A21 * k1[i];
            }
            rhs(t0 + C2 * hs, &stage, &mut k2)?;
            for i in 0..dim {
                stage[i] = y[i] + hs * (A31 * k1[i] + A32 * k2[i]);
            }
            rhs(t0 + C3 * hs, &stage, &mut k3)?;
            for i in 0..dim {
                stage[i] = y[i] + hs * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            rhs(t0 + C4 * hs, &stage, &mut k4)?;
            for i in 0..dim {
                stage[i] = y[i] + hs * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            rhs(t0 + C5 * hs, &stage, &mut k5)?;
            for i in 0..dim {
                stage[i] = y[i]
                    + hs * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            rhs(t0 + hs, &stage, &mut k6)?;
            for i in 0..dim {
                y_new[i] = y[i]
                    + hs * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
            }
            rhs(t0 + hs, &y_new, &mut k7)?;

            let mut err_sq = 0.0;
            for i in 0..dim {
                let e = hs
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let scale = self.tol * (1.0 + y[i].abs().max(y_new[i].abs()));
                err_sq += (e / scale).powi(2);
            }
            let err = (err_sq / dim as f64).sqrt();
            steps += 1;

            if err <= 1.0 {
                *t = if last { t_end } else { t0 + hs };
                y.copy_from_slice(&y_new);
                std::mem::swap(&mut k1, &mut k7);
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                // Keep the natural step for the next call rather than the clipped one.
                if !last || fac < 1.0 {
                    *h = (step * fac).min(self.h_max);
                }
                step = (step * fac).min(self.h_max);
                if last {
                    return Ok(steps);
                }
            } else {
                let fac = (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
                step *= fac;
                if step < 1e-13 * t0.abs().max(1.0) {
                    return Err(Error::StepFailure { t: t0, h: step });
                }
            }
            if !step.is_finite() {
                return Err(Error::StepFailure { t: *t, h: step });
            }
        }
    }
}

fn initial_step(y: &[f64], f: &[f64], tol: f64) -> f64 {
    let d0 = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    let d1 = f.iter().map(|v| v * v).sum::<f64>().sqrt();
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-3 } else { 0.01 * d0 / d1 };
    h.min(tol.powf(0.2)).max(1e-6)
}
