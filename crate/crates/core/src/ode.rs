//! Explicit ODE integration: an adaptive embedded Dormand–Prince 5(4) pair
//! and a fixed-step classical 4th-order method for cross-checks.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OdeMethod {
    /// Adaptive embedded pair (Dormand–Prince 5(4)).
    AdaptiveEmbedded,
    /// Fixed-step classical Runge–Kutta 4.
    FixedStep4,
}

/// Step and tolerance controls; defaults are tight enough that integrator
/// error is negligible against the 1e-6 envelope slack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub h_init: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub method: OdeMethod,
}

impl Default for OdeConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            h_init: 1e-3,
            h_min: 1e-13,
            h_max: 1.0,
            method: OdeMethod::AdaptiveEmbedded,
        }
    }
}

impl OdeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(CoreError::Validation("tolerances must be positive".into()));
        }
        if !(0.0 < self.h_min && self.h_min <= self.h_max) {
            return Err(CoreError::Validation(
                "step bounds must satisfy 0 < h_min <= h_max".into(),
            ));
        }
        Ok(())
    }
}

/// Integration statistics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct OdeStats {
    pub steps: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

// Dormand-Prince 5(4) tableau.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const C: [f64; 6] = [0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
// difference between 5th- and 4th-order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrate `y' = rhs(t, y)` from `(t0, y0)` to `t1`, calling `observe`
/// after every accepted step. The state is modified in place.
pub fn integrate<F, O>(
    rhs: &F,
    t0: f64,
    t1: f64,
    y: &mut Vec<f64>,
    cfg: &OdeConfig,
    mut observe: O,
) -> Result<OdeStats>
where
    F: Fn(f64, &[f64], &mut [f64]),
    O: FnMut(f64, &[f64]),
{
    cfg.validate()?;
    match cfg.method {
        OdeMethod::AdaptiveEmbedded => dopri5(rhs, t0, t1, y, cfg, &mut observe),
        OdeMethod::FixedStep4 => rk4(rhs, t0, t1, y, cfg, &mut observe),
    }
}

fn dopri5<F, O>(
    rhs: &F,
    t0: f64,
    t1: f64,
    y: &mut Vec<f64>,
    cfg: &OdeConfig,
    observe: &mut O,
) -> Result<OdeStats>
where
    F: Fn(f64, &[f64], &mut [f64]),
    O: FnMut(f64, &[f64]),
{
    let n = y.len();
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let span = (t1 - t0).abs();
    if span == 0.0 {
        return Ok(OdeStats::default());
    }
    let mut stats = OdeStats::default();
    let mut t = t0;
    let mut h = cfg.h_init.min(cfg.h_max).min(span) * dir;
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    let mut ytmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    rhs(t, y, &mut k[0]);
    stats.rhs_evals += 1;

    while (t1 - t) * dir > 1e-15 * span.max(1.0) {
        if h.abs() > (t1 - t).abs() {
            h = t1 - t;
        }
        // stages 2..7
        for s in 0..6 {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s + 1) {
                    acc += A[s][j] * kj[i];
                }
                ytmp[i] = y[i] + h * acc;
            }
            rhs(t + C[s] * h, &ytmp, &mut k[s + 1]);
            stats.rhs_evals += 1;
        }
        // the 6th stage row of A holds the 5th-order weights (FSAL)
        ynew.copy_from_slice(&ytmp);
        // error estimate
        let mut err = 0.0f64;
        for i in 0..n {
            let mut e = 0.0;
            for (j, kj) in k.iter().enumerate() {
                e += E[j] * kj[i];
            }
            e *= h;
            let sc = cfg.abs_tol + cfg.rel_tol * y[i].abs().max(ynew[i].abs());
            err += (e / sc) * (e / sc);
        }
        err = (err / n as f64).sqrt();

        if !err.is_finite() {
            // state exploded inside the step; shrink hard
            h *= 0.1;
            stats.rejected += 1;
            if h.abs() < cfg.h_min {
                return Err(CoreError::Integration {
                    last_t: t,
                    message: "step-size underflow (blowup or stiffness)".into(),
                });
            }
            continue;
        }

        if err <= 1.0 {
            t += h;
            y.copy_from_slice(&ynew);
            k.swap(0, 6); // FSAL: k7 of this step is k1 of the next
            stats.steps += 1;
            observe(t, y);
        } else {
            stats.rejected += 1;
        }

        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
        if h.abs() > cfg.h_max {
            h = cfg.h_max * dir;
        }
        if h.abs() < cfg.h_min {
            return Err(CoreError::Integration {
                last_t: t,
                message: format!(
                    "step-size underflow at h = {h:e} (local error cannot reach tolerance)"
                ),
            });
        }
    }
    Ok(stats)
}

fn rk4<F, O>(
    rhs: &F,
    t0: f64,
    t1: f64,
    y: &mut Vec<f64>,
    cfg: &OdeConfig,
    observe: &mut O,
) -> Result<OdeStats>
where
    F: Fn(f64, &[f64], &mut [f64]),
    O: FnMut(f64, &[f64]),
{
    let n = y.len();
    let span = t1 - t0;
    if span == 0.0 {
        return Ok(OdeStats::default());
    }
    let steps = (span.abs() / cfg.h_init).ceil().max(1.0) as usize;
    let h = span / steps as f64;
    let mut stats = OdeStats::default();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let mut t = t0;
    for _ in 0..steps {
        rhs(t, y, &mut k1);
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        rhs(t + 0.5 * h, &tmp, &mut k2);
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        rhs(t + 0.5 * h, &tmp, &mut k3);
        for i in 0..n {
            tmp[i] = y[i] + h * k3[i];
        }
        rhs(t + h, &tmp, &mut k4);
        for i in 0..n {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        t += h;
        stats.steps += 1;
        stats.rhs_evals += 4;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::Integration {
                last_t: t,
                message: "state became non-finite".into(),
            });
        }
        observe(t, y);
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_matches_exact() {
        let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = -y[0];
        };
        let mut y = vec![1.0];
        integrate(&rhs, 0.0, 1.0, &mut y, &OdeConfig::default(), |_, _| {}).unwrap();
        assert!((y[0] - (-1.0f64).exp()).abs() < 1e-11);
    }

    #[test]
    fn cubic_decay_matches_bernoulli_solution() {
        // y' = -y^3, y(0)=1 -> y(t) = (1+2t)^{-1/2}
        let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = -y[0] * y[0] * y[0];
        };
        let mut y = vec![1.0];
        integrate(&rhs, 0.0, 1.0, &mut y, &OdeConfig::default(), |_, _| {}).unwrap();
        assert!((y[0] - 3.0f64.powf(-0.5)).abs() < 1e-10);
    }

    #[test]
    fn blowup_reports_integration_error() {
        // y' = y^2 blows up at t = 1 for y(0) = 1
        let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[0] * y[0];
        };
        let mut y = vec![1.0];
        let err = integrate(&rhs, 0.0, 2.0, &mut y, &OdeConfig::default(), |_, _| {});
        match err {
            Err(CoreError::Integration { last_t, .. }) => {
                assert!((last_t - 1.0).abs() < 0.05, "last_t = {last_t}");
            }
            other => panic!("expected integration error, got {other:?}"),
        }
    }

    #[test]
    fn fixed_step_cross_check() {
        let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = -2.0 * y[0];
        };
        let cfg = OdeConfig {
            method: OdeMethod::FixedStep4,
            h_init: 1e-3,
            ..OdeConfig::default()
        };
        let mut y = vec![1.0];
        integrate(&rhs, 0.0, 1.0, &mut y, &cfg, |_, _| {}).unwrap();
        assert!((y[0] - (-2.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn backward_integration() {
        let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[0];
        };
        let mut y = vec![1.0];
        integrate(&rhs, 0.0, -1.0, &mut y, &OdeConfig::default(), |_, _| {}).unwrap();
        assert!((y[0] - (-1.0f64).exp()).abs() < 1e-10);
    }
}
