//! Univariate truncated Taylor arithmetic.
//!
//! `Taylor1` carries the coefficients of `f(x0 + h)` in powers of `h` up to a
//! fixed truncation order. The k-th derivative at `x0` is `k! * coeff[k]`.
//! This is what the perturbation catalog uses to produce exact componentwise
//! derivative values for its scalar profiles.

/// Truncated Taylor series `sum_k c[k] h^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Taylor1 {
    pub c: Vec<f64>,
}

impl Taylor1 {
    /// Constant series.
    #[must_use]
    pub fn constant(v: f64, order: usize) -> Self {
        let mut c = vec![0.0; order + 1];
        c[0] = v;
        Self { c }
    }

    /// The identity seeded at `x0`: `x0 + h`.
    #[must_use]
    pub fn variable(x0: f64, order: usize) -> Self {
        let mut c = vec![0.0; order + 1];
        c[0] = x0;
        if order >= 1 {
            c[1] = 1.0;
        }
        Self { c }
    }

    #[must_use]
    pub fn order(&self) -> usize {
        self.c.len() - 1
    }

    /// k-th derivative value at the expansion point.
    #[must_use]
    pub fn derivative(&self, k: usize) -> f64 {
        let mut fact = 1.0;
        for i in 2..=k {
            fact *= i as f64;
        }
        self.c[k] * fact
    }

    #[must_use]
    pub fn add(&self, other: &Self) -> Self {
        let c = self.c.iter().zip(&other.c).map(|(a, b)| a + b).collect();
        Self { c }
    }

    #[must_use]
    pub fn scale(&self, s: f64) -> Self {
        Self {
            c: self.c.iter().map(|a| a * s).collect(),
        }
    }

    #[must_use]
    pub fn mul(&self, other: &Self) -> Self {
        let n = self.order();
        let mut c = vec![0.0; n + 1];
        for (k, ck) in c.iter_mut().enumerate() {
            for j in 0..=k {
                *ck += self.c[j] * other.c[k - j];
            }
        }
        Self { c }
    }

    /// Integer power by repeated multiplication.
    #[must_use]
    pub fn powi(&self, p: usize) -> Self {
        let mut out = Self::constant(1.0, self.order());
        for _ in 0..p {
            out = out.mul(self);
        }
        out
    }

    /// Reciprocal; requires a nonzero constant term.
    #[must_use]
    pub fn recip(&self) -> Self {
        let n = self.order();
        let mut c = vec![0.0; n + 1];
        c[0] = 1.0 / self.c[0];
        for k in 1..=n {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += self.c[j] * c[k - j];
            }
            c[k] = -acc / self.c[0];
        }
        Self { c }
    }

    /// Square root; requires a positive constant term.
    #[must_use]
    pub fn sqrt(&self) -> Self {
        let n = self.order();
        let mut c = vec![0.0; n + 1];
        c[0] = self.c[0].sqrt();
        for k in 1..=n {
            let mut acc = 0.0;
            for j in 1..k {
                acc += c[j] * c[k - j];
            }
            c[k] = (self.c[k] - acc) / (2.0 * c[0]);
        }
        Self { c }
    }

    /// Simultaneous sine and cosine via the coupled recurrence
    /// `s' = g' c`, `c' = -g' s`.
    #[must_use]
    pub fn sin_cos(&self) -> (Self, Self) {
        let n = self.order();
        let mut s = vec![0.0; n + 1];
        let mut c = vec![0.0; n + 1];
        s[0] = self.c[0].sin();
        c[0] = self.c[0].cos();
        for k in 1..=n {
            let mut sa = 0.0;
            let mut ca = 0.0;
            for j in 1..=k {
                let gj = j as f64 * self.c[j];
                sa += gj * c[k - j];
                ca += gj * s[k - j];
            }
            s[k] = sa / k as f64;
            c[k] = -ca / k as f64;
        }
        (Self { c: s }, Self { c })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var(x0: f64) -> Taylor1 {
        Taylor1::variable(x0, 4)
    }

    #[test]
    fn polynomial_derivatives() {
        // f(x) = x^3: f'(2)=12, f''(2)=12, f'''(2)=6
        let f = var(2.0).powi(3);
        assert!((f.derivative(0) - 8.0).abs() < 1e-12);
        assert!((f.derivative(1) - 12.0).abs() < 1e-12);
        assert!((f.derivative(2) - 12.0).abs() < 1e-12);
        assert!((f.derivative(3) - 6.0).abs() < 1e-12);
        assert!(f.derivative(4).abs() < 1e-12);
    }

    #[test]
    fn reciprocal_matches_analytic() {
        // 1/(1+x^2) at x=0.5: value 0.8, derivative -2x/(1+x^2)^2 = -0.64
        let x = var(0.5);
        let f = Taylor1::constant(1.0, 4).add(&x.powi(2)).recip();
        assert!((f.derivative(0) - 0.8).abs() < 1e-12);
        assert!((f.derivative(1) + 0.64).abs() < 1e-12);
    }

    #[test]
    fn sqrt_of_square_is_identity() {
        let x = var(1.7);
        let f = x.powi(2).sqrt();
        assert!((f.derivative(0) - 1.7).abs() < 1e-12);
        assert!((f.derivative(1) - 1.0).abs() < 1e-12);
        assert!(f.derivative(2).abs() < 1e-10);
    }

    #[test]
    fn sin_cos_derivative_cycle() {
        let (s, c) = var(0.9).sin_cos();
        assert!((s.derivative(0) - 0.9f64.sin()).abs() < 1e-12);
        assert!((s.derivative(1) - 0.9f64.cos()).abs() < 1e-12);
        assert!((s.derivative(2) + 0.9f64.sin()).abs() < 1e-12);
        assert!((s.derivative(3) + 0.9f64.cos()).abs() < 1e-12);
        assert!((c.derivative(1) + 0.9f64.sin()).abs() < 1e-12);
    }

    #[test]
    fn finite_difference_cross_check() {
        // f(x) = x^4 / sqrt(1+x^2), third derivative vs central differences
        let eval = |x: f64| x.powi(4) / (1.0 + x * x).sqrt();
        let x0 = 0.8;
        let h = 1e-2;
        let fd3 = (eval(x0 + 2.0 * h) - 2.0 * eval(x0 + h) + 2.0 * eval(x0 - h)
            - eval(x0 - 2.0 * h))
            / (2.0 * h * h * h);
        let x = var(x0);
        let f = x
            .powi(4)
            .mul(&Taylor1::constant(1.0, 4).add(&x.powi(2)).sqrt().recip());
        assert!((f.derivative(3) - fd3).abs() < 1e-3 * fd3.abs().max(1.0));
    }
}
