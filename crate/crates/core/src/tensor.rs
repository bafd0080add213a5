//! Dense derivative tensors.
//!
//! An order-`l` tensor here is the l-th derivative of a map `R^n -> R^n`:
//! entries `T[i; j1..jl] = d^l F_i / dx_{j1}..dx_{jl}`, stored flat with the
//! output index `i` major and the `l` lower indices in base-`n` order. Desk
//! scale (`n <= 8`, `l <= 4`) keeps everything dense.

use crate::error::{CoreError, Result};

/// Order-`l` derivative tensor of a map `R^n -> R^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivTensor {
    n: usize,
    order: usize,
    data: Vec<f64>,
}

impl DerivTensor {
    #[must_use]
    pub fn zeros(n: usize, order: usize) -> Self {
        Self {
            n,
            order,
            data: vec![0.0; n * n.pow(order as u32)],
        }
    }

    /// Identity matrix as an order-1 tensor.
    #[must_use]
    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(n, 1);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    #[must_use]
    pub fn n(&self) -> usize {
        self.n
    }

    #[must_use]
    pub fn order(&self) -> usize {
        self.order
    }

    #[must_use]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    fn flat(&self, idx: &[usize]) -> usize {
        let mut f = 0;
        for &j in idx {
            f = f * self.n + j;
        }
        f
    }

    /// Entry `T[i; idx]`; `idx.len()` must equal the order.
    #[must_use]
    pub fn get(&self, i: usize, idx: &[usize]) -> f64 {
        debug_assert_eq!(idx.len(), self.order);
        self.data[i * self.n.pow(self.order as u32) + self.flat(idx)]
    }

    pub fn set(&mut self, i: usize, idx: &[usize], v: f64) {
        debug_assert_eq!(idx.len(), self.order);
        let f = i * self.n.pow(self.order as u32) + self.flat(idx);
        self.data[f] = v;
    }

    pub fn add_at(&mut self, i: usize, idx: &[usize], v: f64) {
        let f = i * self.n.pow(self.order as u32) + self.flat(idx);
        self.data[f] += v;
    }

    pub fn scale_in_place(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    pub fn add_in_place(&mut self, other: &Self) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    #[must_use]
    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Average over all permutations of the lower indices.
    #[must_use]
    pub fn symmetrized(&self) -> Self {
        if self.order <= 1 {
            return self.clone();
        }
        let n = self.n;
        let perms = permutations(self.order);
        let inv = 1.0 / perms.len() as f64;
        let mut out = Self::zeros(n, self.order);
        let block = n.pow(self.order as u32);
        let mut idx = vec![0usize; self.order];
        for i in 0..n {
            for f in 0..block {
                unflatten(f, n, &mut idx);
                let mut acc = 0.0;
                for p in &perms {
                    let mut g = 0;
                    for &pos in p {
                        g = g * n + idx[pos];
                    }
                    acc += self.data[i * block + g];
                }
                out.data[i * block + f] = acc * inv;
            }
        }
        out
    }

    /// Largest absolute deviation from the symmetrized tensor.
    #[must_use]
    pub fn symmetry_residual(&self) -> f64 {
        let sym = self.symmetrized();
        self.data
            .iter()
            .zip(&sym.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Apply the tensor to `order` copies of `v`: `T(v,...,v) in R^n`.
    #[must_use]
    pub fn apply_uniform(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.n);
        let n = self.n;
        let block = n.pow(self.order as u32);
        let mut idx = vec![0usize; self.order];
        let mut out = vec![0.0; n];
        for f in 0..block {
            unflatten(f, n, &mut idx);
            let mut w = 1.0;
            for &j in &idx {
                w *= v[j];
            }
            if w == 0.0 {
                continue;
            }
            for (i, o) in out.iter_mut().enumerate() {
                *o += self.data[i * block + f] * w;
            }
        }
        out
    }

    /// Contract the last `order - 1` lower indices with copies of `v`,
    /// leaving an `n x n` matrix `M[i][a] = T(v,..,v,e_a)[i]` (row-major).
    #[must_use]
    pub fn contract_all_but_one(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n;
        let block = n.pow(self.order as u32);
        let mut idx = vec![0usize; self.order];
        let mut m = vec![0.0; n * n];
        for f in 0..block {
            unflatten(f, n, &mut idx);
            let mut w = 1.0;
            for &j in &idx[..self.order - 1] {
                w *= v[j];
            }
            if w == 0.0 {
                continue;
            }
            let a = idx[self.order - 1];
            for i in 0..n {
                m[i * n + a] += self.data[i * block + f] * w;
            }
        }
        m
    }

    /// Injective operator norm `sup_{||v||=1} ||T(v,..,v)||`.
    ///
    /// Order 0 is the Euclidean norm, order 1 the spectral norm (power
    /// iteration on `A^T A`), higher orders a multi-start symmetric power
    /// method. Exact for diagonal tensors, which is what the unperturbed
    /// families produce.
    #[must_use]
    pub fn operator_norm(&self) -> f64 {
        match self.order {
            0 => self.data.iter().map(|v| v * v).sum::<f64>().sqrt(),
            1 => spectral_norm(&self.data, self.n),
            _ => self.higher_order_norm(),
        }
    }

    fn higher_order_norm(&self) -> f64 {
        let n = self.n;
        let mut best = 0.0f64;
        let mut starts: Vec<Vec<f64>> = Vec::new();
        for i in 0..n {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            starts.push(e);
        }
        starts.push(vec![1.0 / (n as f64).sqrt(); n]);
        let mut s = crate::rng::Sampler::new(0x7e4_50_75);
        for _ in 0..16.max(4 * n) {
            starts.push(s.unit_vector(n));
        }
        for mut v in starts {
            for _ in 0..80 {
                let u = self.apply_uniform(&v);
                let un = norm(&u);
                best = best.max(un);
                if un < 1e-300 {
                    break;
                }
                // ascent direction: M(v)^T u, the gradient of ||T(v^k)||^2 / 2k
                let m = self.contract_all_but_one(&v);
                let mut g = vec![0.0; n];
                for i in 0..n {
                    for a in 0..n {
                        g[a] += m[i * n + a] * u[i];
                    }
                }
                let gn = norm(&g);
                if gn < 1e-300 {
                    break;
                }
                let mut moved = 0.0;
                for a in 0..n {
                    let nv = g[a] / gn;
                    moved += (nv - v[a]).abs();
                    v[a] = nv;
                }
                if moved < 1e-14 {
                    break;
                }
            }
            best = best.max(norm(&self.apply_uniform(&v)));
        }
        best
    }
}

/// Euclidean norm of a slice.
#[must_use]
pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Spectral norm of a row-major `n x n` matrix.
#[must_use]
pub fn spectral_norm(a: &[f64], n: usize) -> f64 {
    let mv = |v: &[f64], out: &mut [f64]| {
        for i in 0..n {
            out[i] = (0..n).map(|j| a[i * n + j] * v[j]).sum();
        }
    };
    let mtv = |v: &[f64], out: &mut [f64]| {
        for j in 0..n {
            out[j] = (0..n).map(|i| a[i * n + j] * v[i]).sum();
        }
    };
    // deterministic multistart: ones + each axis
    let mut best = 0.0f64;
    let mut starts: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            e
        })
        .collect();
    starts.push(vec![1.0 / (n as f64).sqrt(); n]);
    let mut av = vec![0.0; n];
    let mut atav = vec![0.0; n];
    for mut v in starts {
        let mut prev = 0.0;
        for _ in 0..200 {
            mv(&v, &mut av);
            let s = norm(&av);
            best = best.max(s);
            if s < 1e-300 {
                break;
            }
            mtv(&av, &mut atav);
            let gn = norm(&atav);
            if gn < 1e-300 {
                break;
            }
            for j in 0..n {
                v[j] = atav[j] / gn;
            }
            if (s - prev).abs() <= 1e-15 * s.max(1.0) {
                break;
            }
            prev = s;
        }
    }
    best
}

fn unflatten(mut f: usize, n: usize, idx: &mut [usize]) {
    for slot in idx.iter_mut().rev() {
        *slot = f % n;
        f /= n;
    }
}

/// All permutations of `0..len` (len <= 4 in practice).
fn permutations(len: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut items: Vec<usize> = (0..len).collect();
    permute(&mut items, 0, &mut out);
    out
}

fn permute(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == items.len() {
        out.push(items.clone());
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, out);
        items.swap(k, i);
    }
}

/// Ordered compositions of `k` into parts `>= 1` (used by the prolongation
/// source term).
#[must_use]
pub fn ordered_compositions(k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(rem: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if rem == 0 {
            out.push(cur.clone());
            return;
        }
        for part in 1..=rem {
            cur.push(part);
            rec(rem - part, cur, out);
            cur.pop();
        }
    }
    rec(k, &mut cur, &mut out);
    out
}

/// Validate that a vector is finite and of expected dimension.
pub fn check_vector(x: &[f64], n: usize) -> Result<()> {
    if x.len() != n {
        return Err(CoreError::Validation(format!(
            "dimension mismatch: expected {n}, got {}",
            x.len()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(CoreError::Domain("non-finite input vector".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_norm_of_diagonal() {
        let a = vec![3.0, 0.0, 0.0, -5.0];
        assert!((spectral_norm(&a, 2) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn spectral_norm_of_rotation_scaled() {
        // 2x scaled rotation has spectral norm 2
        let c = 0.6f64;
        let s = 0.8f64;
        let a = vec![2.0 * c, -2.0 * s, 2.0 * s, 2.0 * c];
        assert!((spectral_norm(&a, 2) - 2.0).abs() < 1e-10);
    }

    #[test]
    fn injective_norm_diagonal_order3() {
        let mut t = DerivTensor::zeros(2, 3);
        t.set(0, &[0, 0, 0], 2.0);
        t.set(1, &[1, 1, 1], -7.0);
        assert!((t.operator_norm() - 7.0).abs() < 1e-10);
    }

    #[test]
    fn symmetrization_fixes_asymmetric_entries() {
        let mut t = DerivTensor::zeros(2, 2);
        t.set(0, &[0, 1], 2.0);
        let s = t.symmetrized();
        assert!((s.get(0, &[0, 1]) - 1.0).abs() < 1e-15);
        assert!((s.get(0, &[1, 0]) - 1.0).abs() < 1e-15);
        assert!(t.symmetry_residual() > 0.5);
        assert!(s.symmetry_residual() < 1e-15);
    }

    #[test]
    fn apply_uniform_matches_manual_quadratic() {
        // T[0; jk] = [[1,2],[2,0]]: T(v,v) = v1^2 + 4 v1 v2
        let mut t = DerivTensor::zeros(2, 2);
        t.set(0, &[0, 0], 1.0);
        t.set(0, &[0, 1], 2.0);
        t.set(0, &[1, 0], 2.0);
        let v = vec![1.5, -0.5];
        let got = t.apply_uniform(&v);
        assert!((got[0] - (1.5 * 1.5 + 4.0 * 1.5 * -0.5)).abs() < 1e-14);
        assert!(got[1].abs() < 1e-14);
    }

    #[test]
    fn compositions_of_three() {
        let c = ordered_compositions(3);
        assert_eq!(c.len(), 4); // (1,1,1), (1,2), (2,1), (3)
    }
}
