//! Closed-form flows of the diagonal families and their derivatives.
//!
//! Everything here is componentwise: the linear flow `x e^{alpha t}`, the
//! monomial flow `x (1 - m beta t x^m)^{-1/m}`, the Bernoulli (binomial)
//! flow, the recurrence for the coefficients of the k-th monomial-flow
//! derivative, and fixed-point (Picard) evaluation of the implicit perturbed
//! flow representations.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::field::{eval_perturbation, FieldFamily, FieldSpec};
use crate::tensor::check_vector;

/// Per-axis parameters of a scalar closed-form flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarFlowParams {
    pub alpha: f64,
    pub beta: f64,
    pub m: u32,
}

impl ScalarFlowParams {
    pub fn new(alpha: f64, beta: f64, m: u32) -> Result<Self> {
        if m == 0 || m % 2 != 0 {
            return Err(CoreError::Validation(format!(
                "exponent m = {m} must be a positive even integer"
            )));
        }
        if !alpha.is_finite() || !beta.is_finite() {
            return Err(CoreError::Validation("non-finite flow parameter".into()));
        }
        Ok(Self { alpha, beta, m })
    }
}

/// Linear flow `x_i e^{alpha_i t}`, defined for all real `t`.
pub fn linear_flow(alpha: &[f64], x: &[f64], t: f64) -> Result<Vec<f64>> {
    check_vector(x, alpha.len())?;
    if !t.is_finite() {
        return Err(CoreError::Domain("non-finite time".into()));
    }
    Ok(alpha
        .iter()
        .zip(x)
        .map(|(&a, &xi)| xi * (a * t).exp())
        .collect())
}

/// Monomial flow `x_i (1 - m beta t x_i^m)^{-1/m}` (the `alpha = 0` case).
///
/// Semi-complete for `beta <= 0`, `t >= 0`; for `t < 0` the blowup guard
/// `1 - m beta t x_i^m > 0` applies and the offending axis is reported.
pub fn monomial_flow(p: ScalarFlowParams, x: &[f64], t: f64) -> Result<Vec<f64>> {
    check_vector(x, x.len())?;
    if !t.is_finite() {
        return Err(CoreError::Domain("non-finite time".into()));
    }
    let m = p.m as f64;
    let mut out = Vec::with_capacity(x.len());
    for (i, &xi) in x.iter().enumerate() {
        let w = 1.0 - m * p.beta * t * xi.powi(p.m as i32);
        if w <= 0.0 {
            return Err(CoreError::Domain(format!(
                "monomial flow leaves its domain on axis {i}: 1 - m*beta*t*x^m = {w}"
            )));
        }
        out.push(xi * w.powf(-1.0 / m));
    }
    Ok(out)
}

/// Bernoulli flow
/// `x_i e^{alpha t} (1 + (beta/alpha) x_i^m (1 - e^{alpha m t}))^{-1/m}`.
///
/// Requires `alpha != 0` (the degenerate case routes to [`monomial_flow`]
/// rather than taking limits inside the formula).
pub fn bernoulli_flow(p: ScalarFlowParams, x: &[f64], t: f64) -> Result<Vec<f64>> {
    check_vector(x, x.len())?;
    if p.alpha == 0.0 {
        return Err(CoreError::Usage(
            "bernoulli_flow requires alpha != 0; use monomial_flow".into(),
        ));
    }
    if !t.is_finite() {
        return Err(CoreError::Domain("non-finite time".into()));
    }
    let m = p.m as f64;
    let ratio = p.beta / p.alpha;
    let decay = 1.0 - (p.alpha * m * t).exp();
    let mut out = Vec::with_capacity(x.len());
    for (i, &xi) in x.iter().enumerate() {
        let w = 1.0 + ratio * xi.powi(p.m as i32) * decay;
        if w <= 0.0 {
            return Err(CoreError::Domain(format!(
                "bernoulli flow leaves its domain on axis {i}: radicand = {w}"
            )));
        }
        out.push(xi * (p.alpha * t).exp() * w.powf(-1.0 / m));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// k-th derivative of the monomial flow
// ---------------------------------------------------------------------------

/// Coefficients `a_1^k .. a_k^k` of the k-th monomial-flow derivative
/// `x^{1-k} w^{-1/m} sum_j a_j^k / w^j`, kept in integer arithmetic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DerivCoeffTable {
    pub k: usize,
    pub m: u32,
    pub coeffs: Vec<i64>,
}

impl DerivCoeffTable {
    /// `sum_j a_j^k`, exactly.
    #[must_use]
    pub fn sum(&self) -> i64 {
        self.coeffs.iter().sum()
    }
}

/// Build the coefficient table by the recurrence
/// `a_j^k = a_j^{k-1} (1 - k - j m) + a_{j-1}^{k-1} (1 + (j-1) m)`,
/// seeded with `a_1^1 = 1`.
pub fn monomial_deriv_coeffs(k: usize, m: u32) -> Result<DerivCoeffTable> {
    if k == 0 {
        return Err(CoreError::Usage("derivative order k must be >= 1".into()));
    }
    let mi = i64::from(m);
    let mut prev: Vec<i64> = vec![1]; // a_1^1
    for kk in 2..=k {
        let kk_i = kk as i64;
        let mut next = vec![0i64; kk];
        for j in 1..=kk {
            let ji = j as i64;
            let from_same = if j <= prev.len() {
                prev[j - 1] * (1 - kk_i - ji * mi)
            } else {
                0
            };
            let from_below = if j >= 2 && j - 1 <= prev.len() {
                prev[j - 2] * (1 + (ji - 1) * mi)
            } else {
                0
            };
            next[j - 1] = from_same + from_below;
        }
        prev = next;
    }
    Ok(DerivCoeffTable {
        k,
        m,
        coeffs: prev,
    })
}

/// k-th derivative of the scalar monomial flow at `(x, t)`:
/// `x^{1-k} w^{-1/m} sum_j a_j^k w^{-j}` with `w = 1 - m beta t x^m`.
///
/// Near `x = 0` the prefactor `x^{1-k}` and the vanishing coefficient sum
/// cancel; below `|x| = 1e-3` the sum is expanded in powers of
/// `u = w - 1 = -m beta t x^m` and the cancellation is done analytically
/// (three powers of `x^m` retained).
pub fn monomial_kth_derivative(p: ScalarFlowParams, x: f64, t: f64, k: usize) -> Result<f64> {
    if p.alpha != 0.0 {
        return Err(CoreError::Usage(
            "monomial_kth_derivative applies to the alpha = 0 flow".into(),
        ));
    }
    let table = monomial_deriv_coeffs(k, p.m)?;
    let m = p.m as f64;
    let u = -m * p.beta * t * x.powi(p.m as i32);
    let w = 1.0 + u;
    if w <= 0.0 {
        return Err(CoreError::Domain(format!(
            "monomial flow derivative outside its domain: w = {w}"
        )));
    }
    if k == 1 {
        return Ok(w.powf(-1.0 - 1.0 / m));
    }
    if x.abs() >= 1e-3 {
        let mut sum = 0.0;
        for (j, &a) in table.coeffs.iter().enumerate() {
            sum += a as f64 / w.powi(j as i32 + 1);
        }
        return Ok(x.powi(1 - k as i32) * w.powf(-1.0 / m) * sum);
    }
    // series branch: sum_j a_j (1+u)^{-j} = sum_p s_p u^p with
    // s_p = (-1)^p sum_j C(j+p-1, p) a_j; the first nonzero power p0
    // satisfies 1 - k + p0 m >= 0, so x^{1-k} u^p = (-m beta t)^p x^{1-k+pm}
    // stays finite.
    let p0 = (k - 1).div_ceil(p.m as usize);
    let mut total = 0.0;
    for p_pow in p0..p0 + 3 {
        let mut s = 0.0f64;
        for (jm1, &a) in table.coeffs.iter().enumerate() {
            let j = jm1 + 1;
            s += binom(j + p_pow - 1, p_pow) * a as f64;
        }
        if p_pow % 2 == 1 {
            s = -s;
        }
        let coeff = (-m * p.beta * t).powi(p_pow as i32);
        let xpow = 1 - k as i32 + (p_pow * p.m as usize) as i32;
        total += s * coeff * x.powi(xpow);
    }
    Ok(total * w.powf(-1.0 / m))
}

fn binom(n: usize, k: usize) -> f64 {
    let mut v = 1.0;
    for i in 0..k {
        v = v * (n - i) as f64 / (i + 1) as f64;
    }
    v
}

/// First (`k = 1`) and second (`k = 2`) derivative of the Bernoulli flow.
/// Higher orders are not available in closed form.
pub fn binomial_derivative(p: ScalarFlowParams, x: f64, t: f64, k: usize) -> Result<f64> {
    if p.alpha == 0.0 {
        return Err(CoreError::Usage(
            "binomial_derivative requires alpha != 0; use monomial_kth_derivative".into(),
        ));
    }
    let m = p.m as f64;
    let ratio = p.beta / p.alpha;
    let decay = 1.0 - (p.alpha * m * t).exp();
    let w = 1.0 + ratio * x.powi(p.m as i32) * decay;
    if w <= 0.0 {
        return Err(CoreError::Domain(format!(
            "bernoulli flow derivative outside its domain: radicand = {w}"
        )));
    }
    match k {
        1 => Ok((p.alpha * t).exp() * w.powf(-1.0 - 1.0 / m)),
        2 => Ok(-(1.0 + m)
            * ratio
            * x.powi(p.m as i32 - 1)
            * (p.alpha * t).exp()
            * decay
            * w.powf(-2.0 - 1.0 / m)),
        _ => Err(CoreError::Capability(
            "closed-form binomial derivatives are available for k = 1, 2 only".into(),
        )),
    }
}

// ---------------------------------------------------------------------------
// Picard evaluation of the implicit perturbed flows
// ---------------------------------------------------------------------------

/// Convergence report of [`picard_flow`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicardReport {
    pub iterations: usize,
    pub residual: f64,
    pub residual_history: Vec<f64>,
}

/// Evaluate the implicit integral representation of the `Y2`/`Y3` flow by
/// undamped fixed-point iteration on a uniform time grid (Simpson
/// quadrature), initialized at the unperturbed closed form.
///
/// The iteration is a representation, not an algorithm: contraction can fail
/// for large `t ||x||^m`, in which case the convergence error carries the
/// residual history rather than silently integrating.
pub fn picard_flow(
    f: &FieldSpec,
    x: &[f64],
    t: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, PicardReport)> {
    if !matches!(f.family(), FieldFamily::Y2 | FieldFamily::Y3) {
        return Err(CoreError::Usage(
            "picard_flow evaluates the implicit Y2/Y3 representations".into(),
        ));
    }
    check_vector(x, f.n())?;
    if t < 0.0 {
        return Err(CoreError::Domain(
            "the perturbed monomial families are semi-complete: t >= 0".into(),
        ));
    }
    let n = f.n();
    let profile = f.profile();
    let with_linear = f.family() == FieldFamily::Y3;

    // quadrature grid: even number of Simpson panels
    let steps = ((t * 200.0).ceil() as usize).clamp(64, 4000);
    let steps = steps + steps % 2;
    let dt = if t > 0.0 { t / steps as f64 } else { 0.0 };
    let times: Vec<f64> = (0..=steps).map(|q| q as f64 * dt).collect();

    // initialize at the unperturbed closed form
    let mut traj: Vec<Vec<f64>> = Vec::with_capacity(times.len());
    for &s in &times {
        let mut state = Vec::with_capacity(n);
        for i in 0..n {
            let p = ScalarFlowParams::new(profile.alpha()[i], profile.beta()[i], profile.m()[i])?;
            let v = if with_linear && p.alpha != 0.0 {
                bernoulli_flow(p, &[x[i]], s)?[0]
            } else {
                monomial_flow(ScalarFlowParams { alpha: 0.0, ..p }, &[x[i]], s)?[0]
            };
            state.push(v);
        }
        traj.push(state);
    }

    let mut history = Vec::new();
    for iter in 1..=max_iter {
        // integrand g_i(s) = psi_i(s)^{-1-m_i} Z_i(psi(s)) [* e^{alpha_i m_i s} for Y3]
        let mut integrand: Vec<Vec<f64>> = Vec::with_capacity(times.len());
        for (q, &s) in times.iter().enumerate() {
            let z = eval_perturbation(&f.perturbation().kind, profile, &traj[q]);
            let mut g = Vec::with_capacity(n);
            for i in 0..n {
                let psi = traj[q][i];
                let gi = if psi.abs() < 1e-13 {
                    // |Z_i| <= c |psi_i|^{1+m_i} near an equilibrium axis, so
                    // the ratio vanishes with psi_i
                    0.0
                } else {
                    z[i] * psi.powi(-1 - profile.m()[i] as i32)
                };
                let gi = if with_linear {
                    gi * (profile.alpha()[i] * profile.m()[i] as f64 * s).exp()
                } else {
                    gi
                };
                g.push(gi);
            }
            integrand.push(g);
        }
        // cumulative Simpson integral per pair of panels
        let mut cumulative = vec![vec![0.0; n]; times.len()];
        for q in (2..=steps).step_by(2) {
            for i in 0..n {
                let inc = dt / 3.0
                    * (integrand[q - 2][i] + 4.0 * integrand[q - 1][i] + integrand[q][i]);
                cumulative[q][i] = cumulative[q - 2][i] + inc;
            }
            // odd node: three-point half-panel rule keeps full order midway
            for i in 0..n {
                cumulative[q - 1][i] = cumulative[q - 2][i]
                    + dt / 12.0
                        * (5.0 * integrand[q - 2][i] + 8.0 * integrand[q - 1][i]
                            - integrand[q][i]);
            }
        }

        // apply the representation
        let mut max_delta = 0.0f64;
        for (q, &s) in times.iter().enumerate() {
            for i in 0..n {
                let mi = profile.m()[i];
                let mf = mi as f64;
                let xi = x[i];
                let xm = xi.powi(mi as i32);
                let alpha = profile.alpha()[i];
                let w = if with_linear && alpha != 0.0 {
                    let ratio = profile.beta()[i] / alpha;
                    1.0 + ratio * xm * (1.0 - (alpha * mf * s).exp())
                        - mf * xm * cumulative[q][i]
                } else {
                    1.0 - mf * profile.beta()[i] * s * xm - mf * xm * cumulative[q][i]
                };
                if w <= 0.0 {
                    return Err(CoreError::Domain(format!(
                        "picard iteration left the flow domain on axis {i} at s = {s}"
                    )));
                }
                let scale = if with_linear { (alpha * s).exp() } else { 1.0 };
                let new = xi * scale * w.powf(-1.0 / mf);
                max_delta = max_delta.max((new - traj[q][i]).abs());
                traj[q][i] = new;
            }
        }
        history.push(max_delta);
        if max_delta <= tol {
            return Ok((
                traj[steps].clone(),
                PicardReport {
                    iterations: iter,
                    residual: max_delta,
                    residual_history: history,
                },
            ));
        }
    }
    Err(CoreError::Convergence {
        iterations: max_iter,
        residual: *history.last().unwrap_or(&f64::NAN),
        message: format!("picard iteration did not reach tol {tol:e}; history {history:?}"),
    })
}
