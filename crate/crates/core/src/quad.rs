//! Adaptive Gauss–Kronrod quadrature for vector-valued integrands.
//!
//! 15-point Kronrod rule with the embedded 7-point Gauss rule as error
//! estimate, bisected recursively until the componentwise error estimate
//! meets the tolerance.

use crate::error::{CoreError, Result};

// Gauss 7 / Kronrod 15 nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

struct Panel {
    value: Vec<f64>,
    error: f64,
}

fn gk15<F>(f: &F, a: f64, b: f64) -> Result<Panel>
where
    F: Fn(f64) -> Result<Vec<f64>>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center)?;
    let dim = fc.len();
    let mut kronrod = fc.iter().map(|v| v * WGK[7]).collect::<Vec<_>>();
    let mut gauss = fc.iter().map(|v| v * WG[3]).collect::<Vec<_>>();
    for j in 0..7 {
        let x = half * XGK[j];
        let f1 = f(center - x)?;
        let f2 = f(center + x)?;
        for i in 0..dim {
            kronrod[i] += WGK[j] * (f1[i] + f2[i]);
        }
        if j % 2 == 1 {
            let g = (j - 1) / 2;
            for i in 0..dim {
                gauss[i] += WG[g] * (f1[i] + f2[i]);
            }
        }
    }
    let mut error = 0.0f64;
    for i in 0..dim {
        kronrod[i] *= half;
        gauss[i] *= half;
        error = error.max((kronrod[i] - gauss[i]).abs());
    }
    if kronrod.iter().any(|v| !v.is_finite()) {
        return Err(CoreError::Numerical(
            "non-finite integrand in quadrature panel".into(),
        ));
    }
    // the raw |K15 - G7| gap overestimates the Kronrod error for smooth
    // integrands, so this stays conservative
    Ok(Panel {
        value: kronrod,
        error,
    })
}

/// Adaptively integrate a vector-valued function over `[a, b]` to the given
/// absolute tolerance. Returns the value and an error estimate.
pub fn integrate_vec<F>(f: &F, a: f64, b: f64, tol: f64) -> Result<(Vec<f64>, f64)>
where
    F: Fn(f64) -> Result<Vec<f64>>,
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(CoreError::Usage("quadrature limits must be finite".into()));
    }
    if a == b {
        let probe = f(a)?;
        return Ok((vec![0.0; probe.len()], 0.0));
    }
    let mut stack = vec![(a, b, 0usize)];
    let mut total: Option<Vec<f64>> = None;
    let mut total_err = 0.0;
    let span = (b - a).abs();
    while let Some((lo, hi, depth)) = stack.pop() {
        let panel = gk15(f, lo, hi)?;
        let local_tol = tol * ((hi - lo).abs() / span).max(1e-6);
        if panel.error <= local_tol || depth >= 40 {
            if depth >= 40 && panel.error > local_tol {
                return Err(CoreError::Numerical(format!(
                    "quadrature did not converge on [{lo}, {hi}]: error {:e} > {local_tol:e}",
                    panel.error
                )));
            }
            match &mut total {
                None => total = Some(panel.value),
                Some(t) => {
                    for (ti, vi) in t.iter_mut().zip(&panel.value) {
                        *ti += vi;
                    }
                }
            }
            total_err += panel.error;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, depth + 1));
            stack.push((mid, hi, depth + 1));
        }
    }
    Ok((total.unwrap_or_default(), total_err))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let f = |x: f64| Ok(vec![x * x * x - 2.0 * x + 1.0]);
        let (v, _) = integrate_vec(&f, 0.0, 2.0, 1e-12).unwrap();
        // x^4/4 - x^2 + x over [0,2] = 4 - 4 + 2
        assert!((v[0] - 2.0).abs() < 1e-13);
    }

    #[test]
    fn exponential_tail() {
        let f = |x: f64| Ok(vec![(-x).exp()]);
        let (v, err) = integrate_vec(&f, 0.0, 40.0, 1e-10).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-9, "value {v:?}, err {err}");
    }

    #[test]
    fn vector_components_integrate_together() {
        let f = |x: f64| Ok(vec![x.sin(), x.cos()]);
        let (v, _) = integrate_vec(&f, 0.0, std::f64::consts::PI, 1e-11).unwrap();
        assert!((v[0] - 2.0).abs() < 1e-10);
        assert!(v[1].abs() < 1e-10);
    }

    #[test]
    fn zero_length_interval() {
        let f = |_x: f64| Ok(vec![1.0, 2.0]);
        let (v, e) = integrate_vec(&f, 1.0, 1.0, 1e-10).unwrap();
        assert_eq!(v, vec![0.0, 0.0]);
        assert_eq!(e, 0.0);
    }

    #[test]
    fn integrand_error_propagates() {
        let f = |x: f64| {
            if x > 0.5 {
                Err(CoreError::Domain("boom".into()))
            } else {
                Ok(vec![x])
            }
        };
        assert!(integrate_vec(&f, 0.0, 1.0, 1e-8).is_err());
    }
}
