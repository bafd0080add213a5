//! Flow and prolongation integration.
//!
//! The order-k prolongation is integrated as an explicit variational ODE
//! system: the base flow `y` together with the derivative tensors
//! `T^l = D^l phi_t(x)` for `l = 1..k`, where
//!
//! ```text
//! d/dt T^l = DF(y) T^l + G^l,
//! ```
//!
//! and `G^l` is the chain-rule source built from the field jets `D^2..D^l F`
//! and the lower-order flow jets. The source enumerates ordered compositions
//! `i_1 + .. + i_p = l` (all parts positive) over consecutive index blocks;
//! each composition carries the weight `l! / (p! prod i_q!)` so that after
//! one final symmetrization the sum equals the set-partition chain rule —
//! plain enumeration undercounts repeated block sizes, which the
//! finite-difference oracle detects.

use serde::{Deserialize, Serialize};

use crate::closed_form::{bernoulli_flow, linear_flow, monomial_flow, ScalarFlowParams};
use crate::error::{CoreError, Result};
use crate::field::{FieldFamily, FieldSpec};
use crate::ode::{integrate, OdeConfig, OdeStats};
use crate::tensor::{check_vector, ordered_compositions, DerivTensor};
use crate::K_MAX;

/// Integration controls (re-exported integrator configuration).
pub type IntegratorConfig = OdeConfig;

/// Flow value plus symmetric derivative tensors `D^1..D^k` at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub value: Vec<f64>,
    /// tensors[l-1] has order l.
    pub tensors: Vec<DerivTensor>,
}

impl Jet {
    /// Jet of the identity map: value `x`, order-1 identity, higher zero.
    #[must_use]
    pub fn identity(x: &[f64], k: usize) -> Self {
        let n = x.len();
        let tensors = (1..=k)
            .map(|l| {
                if l == 1 {
                    DerivTensor::identity(n)
                } else {
                    DerivTensor::zeros(n, l)
                }
            })
            .collect();
        Self {
            value: x.to_vec(),
            tensors,
        }
    }

    #[must_use]
    pub fn order(&self) -> usize {
        self.tensors.len()
    }

    /// Tensor of a given order (1-based); order 0 is the value.
    #[must_use]
    pub fn tensor(&self, order: usize) -> Option<&DerivTensor> {
        if order == 0 || order > self.tensors.len() {
            None
        } else {
            Some(&self.tensors[order - 1])
        }
    }

    /// Norm of the requested derivative order (0 = flow value norm).
    #[must_use]
    pub fn order_norm(&self, order: usize) -> Option<f64> {
        if order == 0 {
            Some(crate::tensor::norm(&self.value))
        } else {
            self.tensor(order).map(DerivTensor::operator_norm)
        }
    }

    #[must_use]
    pub fn is_finite(&self) -> bool {
        self.value.iter().all(|v| v.is_finite()) && self.tensors.iter().all(DerivTensor::is_finite)
    }
}

/// Time grid with per-time jets and integrator statistics.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// initial condition the trajectory was launched from
    pub x0: Vec<f64>,
    pub times: Vec<f64>,
    pub states: Vec<Jet>,
    pub meta: TrajectoryMeta,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub stats: OdeStats,
    pub rel_tol: f64,
    pub abs_tol: f64,
}

impl Trajectory {
    fn validate(&self) -> Result<()> {
        if self.times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CoreError::Validation(
                "trajectory times must be strictly increasing".into(),
            ));
        }
        if self.states.iter().any(|s| !s.is_finite()) {
            return Err(CoreError::Validation(
                "trajectory contains non-finite states".into(),
            ));
        }
        Ok(())
    }

    #[must_use]
    pub fn len(&self) -> usize {
        self.times.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Jet order carried by the trajectory (0 when only the flow is tracked).
    #[must_use]
    pub fn jet_order(&self) -> usize {
        self.states.first().map_or(0, Jet::order)
    }
}

// ---------------------------------------------------------------------------
// Flow integration
// ---------------------------------------------------------------------------

/// Integrate the flow of `f` from `x0`, recording states at `times`
/// (strictly increasing, `times[0] >= 0`; `t = 0` entries reuse `x0`).
pub fn integrate_flow(
    f: &FieldSpec,
    x0: &[f64],
    times: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    integrate_prolongation(f, x0, 0, times, cfg)
}

/// Integrate the flow together with its prolongations up to order `k`,
/// recording jets at `times`.
pub fn integrate_prolongation(
    f: &FieldSpec,
    x0: &[f64],
    k: usize,
    times: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    check_vector(x0, f.n())?;
    if k > K_MAX {
        return Err(CoreError::Capability(format!(
            "prolongations are available up to order {K_MAX}, requested {k}"
        )));
    }
    if times.is_empty() {
        return Err(CoreError::Usage("empty output time grid".into()));
    }
    if times[0] < 0.0 {
        return Err(CoreError::Domain(
            "semi-complete families are integrated forward: t >= 0".into(),
        ));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CoreError::Usage(
            "output times must be strictly increasing".into(),
        ));
    }

    let n = f.n();
    let mut state = pack(&Jet::identity(x0, k), n, k);
    let rhs = make_rhs(f, n, k);

    let mut out_times = Vec::with_capacity(times.len());
    let mut out_states = Vec::with_capacity(times.len());
    let mut stats = OdeStats::default();
    let mut t = 0.0;
    for &target in times {
        if target > t {
            let s = integrate(&rhs, t, target, &mut state, cfg, |_, _| {})?;
            stats.steps += s.steps;
            stats.rejected += s.rejected;
            stats.rhs_evals += s.rhs_evals;
            t = target;
        }
        out_times.push(target);
        out_states.push(unpack(&state, n, k));
    }
    let traj = Trajectory {
        x0: x0.to_vec(),
        times: out_times,
        states: out_states,
        meta: TrajectoryMeta {
            stats,
            rel_tol: cfg.rel_tol,
            abs_tol: cfg.abs_tol,
        },
    };
    traj.validate()?;
    Ok(traj)
}

fn state_len(n: usize, k: usize) -> usize {
    (0..=k).map(|l| n * n.pow(l as u32)).sum()
}

fn pack(jet: &Jet, n: usize, k: usize) -> Vec<f64> {
    let mut state = Vec::with_capacity(state_len(n, k));
    state.extend_from_slice(&jet.value);
    for l in 1..=k {
        state.extend_from_slice(jet.tensors[l - 1].data());
    }
    state
}

fn unpack(state: &[f64], n: usize, k: usize) -> Jet {
    let mut offset = n;
    let value = state[..n].to_vec();
    let mut tensors = Vec::with_capacity(k);
    for l in 1..=k {
        let len = n * n.pow(l as u32);
        let mut t = DerivTensor::zeros(n, l);
        t.data_mut().copy_from_slice(&state[offset..offset + len]);
        offset += len;
        tensors.push(t);
    }
    Jet { value, tensors }
}

fn make_rhs(f: &FieldSpec, n: usize, k: usize) -> impl Fn(f64, &[f64], &mut [f64]) + '_ {
    move |_t: f64, state: &[f64], dstate: &mut [f64]| {
        let jet = unpack(state, n, k);
        let field_jets = match f.eval_jet(&jet.value, k) {
            Ok(j) => j,
            Err(_) => {
                // signal the step controller instead of panicking mid-step
                dstate.fill(f64::NAN);
                return;
            }
        };
        // dy = F(y)
        for i in 0..n {
            dstate[i] = field_jets[0].get(i, &[]);
        }
        // dT^l = DF T^l + G^l
        let df = &field_jets[1];
        let mut offset = n;
        for l in 1..=k {
            let block = n.pow(l as u32);
            let t_l = &jet.tensors[l - 1];
            let source = if l >= 2 {
                Some(chain_source_term(&field_jets, &jet.tensors[..l - 1], l))
            } else {
                None
            };
            for i in 0..n {
                for fidx in 0..block {
                    let mut v = 0.0;
                    for a in 0..n {
                        v += df.get(i, &[a]) * t_l.data()[a * block + fidx];
                    }
                    if let Some(g) = &source {
                        v += g.data()[i * block + fidx];
                    }
                    dstate[offset + i * block + fidx] = v;
                }
            }
            offset += n * block;
        }
    }
}

/// Order-k chain-rule source `G^k` from field jets `D^2..D^k F` at the
/// current flow point and flow jets `T^1..T^{k-1}`.
///
/// `field_jets[p]` must hold `D^p F` and `flow_jets[l-1]` the order-l flow
/// tensor; the result is symmetrized.
#[must_use]
pub fn chain_source_term(
    field_jets: &[DerivTensor],
    flow_jets: &[DerivTensor],
    k: usize,
) -> DerivTensor {
    let n = field_jets[0].n();
    let mut g = DerivTensor::zeros(n, k);
    if k < 2 {
        return g;
    }
    let block = n.pow(k as u32);
    let mut jidx = vec![0usize; k];
    for comp in ordered_compositions(k) {
        let p = comp.len();
        if p < 2 || p >= field_jets.len() {
            continue;
        }
        let weight = factorial(k) / (factorial(p) * comp.iter().map(|&i| factorial(i)).product::<f64>());
        let dpf = &field_jets[p];
        let parts: Vec<&DerivTensor> = comp.iter().map(|&iq| &flow_jets[iq - 1]).collect();
        // consecutive block boundaries of the k lower indices
        let mut bounds = vec![0usize];
        for &iq in &comp {
            bounds.push(bounds.last().unwrap() + iq);
        }
        let ablock = n.pow(p as u32);
        for fidx in 0..block {
            let mut ff = fidx;
            for slot in jidx.iter_mut().rev() {
                *slot = ff % n;
                ff /= n;
            }
            // pre-flatten each block's sub-index
            let mut sub = Vec::with_capacity(p);
            for q in 0..p {
                let mut s = 0usize;
                for &j in &jidx[bounds[q]..bounds[q + 1]] {
                    s = s * n + j;
                }
                sub.push(s);
            }
            for aidx in 0..ablock {
                // a_q digits of aidx, big-endian
                let mut prod = 1.0;
                let mut aa = aidx;
                for q in (0..p).rev() {
                    let a_q = aa % n;
                    aa /= n;
                    let t_q = parts[q];
                    let qblock = n.pow(comp[q] as u32);
                    prod *= t_q.data()[a_q * qblock + sub[q]];
                    if prod == 0.0 {
                        break;
                    }
                }
                if prod == 0.0 {
                    continue;
                }
                for i in 0..n {
                    let d = dpf.data()[i * ablock + aidx];
                    if d != 0.0 {
                        g.data_mut()[i * block + fidx] += weight * d * prod;
                    }
                }
            }
        }
    }
    g.symmetrized()
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

// ---------------------------------------------------------------------------
// Finite-difference oracle
// ---------------------------------------------------------------------------

/// Evaluate the time-`t` flow map of `f` at `x` — closed form for the
/// X-families, tight adaptive integration otherwise.
pub fn flow_map(f: &FieldSpec, x: &[f64], t: f64, cfg: &IntegratorConfig) -> Result<Vec<f64>> {
    match f.family() {
        FieldFamily::X1 => linear_flow(f.profile().alpha(), x, t),
        FieldFamily::X2 => {
            let mut out = Vec::with_capacity(x.len());
            for i in 0..x.len() {
                let p = ScalarFlowParams::new(0.0, f.profile().beta()[i], f.profile().m()[i])?;
                out.push(monomial_flow(p, &x[i..=i], t)?[0]);
            }
            Ok(out)
        }
        FieldFamily::X3 => {
            let mut out = Vec::with_capacity(x.len());
            for i in 0..x.len() {
                let alpha = f.profile().alpha()[i];
                let p =
                    ScalarFlowParams::new(alpha, f.profile().beta()[i], f.profile().m()[i])?;
                let v = if alpha == 0.0 {
                    monomial_flow(p, &x[i..=i], t)?[0]
                } else {
                    bernoulli_flow(p, &x[i..=i], t)?[0]
                };
                out.push(v);
            }
            Ok(out)
        }
        _ => {
            if t == 0.0 {
                check_vector(x, f.n())?;
                return Ok(x.to_vec());
            }
            let traj = integrate_flow(f, x, &[t], cfg)?;
            Ok(traj.states.last().unwrap().value.clone())
        }
    }
}

/// Central-difference derivative tensors of the time-`t` flow map around
/// `x0`, orders `1..=k`, with one Richardson extrapolation step `(h, h/2)`.
pub fn finite_difference_jet(
    f: &FieldSpec,
    x0: &[f64],
    t: f64,
    k: usize,
    h: f64,
) -> Result<Jet> {
    check_vector(x0, f.n())?;
    if k > K_MAX {
        return Err(CoreError::Capability(format!(
            "finite differences supported up to order {K_MAX}"
        )));
    }
    if h <= 0.0 {
        return Err(CoreError::Usage("step h must be positive".into()));
    }
    let n = f.n();
    let cfg = IntegratorConfig {
        rel_tol: 1e-12,
        abs_tol: 1e-14,
        ..IntegratorConfig::default()
    };

    // memoized flow evaluations keyed by the offset in h/2 units
    let mut cache: std::collections::HashMap<Vec<i64>, Vec<f64>> =
        std::collections::HashMap::new();
    let mut eval = |offsets: &[i64]| -> Result<Vec<f64>> {
        if let Some(v) = cache.get(offsets) {
            return Ok(v.clone());
        }
        let mut x = x0.to_vec();
        for (xi, &o) in x.iter_mut().zip(offsets) {
            *xi += o as f64 * h / 2.0;
        }
        let v = flow_map(f, &x, t, &cfg)?;
        cache.insert(offsets.to_vec(), v.clone());
        Ok(v)
    };

    let value = eval(&vec![0; n])?;
    let mut tensors = Vec::with_capacity(k);
    for l in 1..=k {
        let mut coarse = DerivTensor::zeros(n, l);
        let mut fine = DerivTensor::zeros(n, l);
        let block = n.pow(l as u32);
        let mut jidx = vec![0usize; l];
        for fidx in 0..block {
            let mut ff = fidx;
            for slot in jidx.iter_mut().rev() {
                *slot = ff % n;
                ff /= n;
            }
            // only compute sorted representatives, mirror to the rest
            if jidx.windows(2).any(|w| w[1] < w[0]) {
                continue;
            }
            for (tensor, unit) in [(&mut coarse, 2i64), (&mut fine, 1i64)] {
                let step = unit as f64 * h / 2.0;
                let mut acc = vec![0.0; n];
                for signs in 0..(1usize << l) {
                    let mut offsets = vec![0i64; n];
                    let mut parity = 1.0;
                    for (q, &j) in jidx.iter().enumerate() {
                        if signs & (1 << q) != 0 {
                            offsets[j] += unit;
                        } else {
                            offsets[j] -= unit;
                            parity = -parity;
                        }
                    }
                    let v = eval(&offsets)?;
                    for i in 0..n {
                        acc[i] += parity * v[i];
                    }
                }
                let denom = (2.0 * step).powi(l as i32);
                for i in 0..n {
                    tensor.set(i, &jidx, acc[i] / denom);
                }
            }
        }
        // Richardson: error ~ c h^2, eliminate the leading term
        let mut result = DerivTensor::zeros(n, l);
        for (r, (cv, fv)) in result
            .data_mut()
            .iter_mut()
            .zip(coarse.data().iter().zip(fine.data()))
        {
            *r = (4.0 * fv - cv) / 3.0;
        }
        // mirror sorted representatives onto all permutations
        let mut full = DerivTensor::zeros(n, l);
        let mut idx = vec![0usize; l];
        for fidx in 0..block {
            let mut ff = fidx;
            for slot in idx.iter_mut().rev() {
                *slot = ff % n;
                ff /= n;
            }
            let mut sorted = idx.clone();
            sorted.sort_unstable();
            for i in 0..n {
                let v = result.get(i, &sorted);
                full.set(i, &idx, v);
            }
        }
        tensors.push(full);
    }
    Ok(Jet { value, tensors })
}

/// Default finite-difference steps per derivative order (truncation /
/// rounding tradeoff).
#[must_use]
pub fn default_fd_step(k: usize) -> f64 {
    match k {
        0 | 1 => 1e-5,
        2 => 1e-3,
        _ => 1e-2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{build_field, FieldConfig, PerturbationKind};
    use crate::rng::Sampler;

    fn x1(alpha: Vec<f64>) -> FieldSpec {
        let n = alpha.len();
        build_field(&FieldConfig {
            family: FieldFamily::X1,
            n,
            alpha,
            beta: vec![],
            m: vec![],
            perturbation: PerturbationKind::Zero,
        })
        .unwrap()
    }

    fn x2(beta: Vec<f64>, m: Vec<u32>) -> FieldSpec {
        let n = beta.len();
        build_field(&FieldConfig {
            family: FieldFamily::X2,
            n,
            alpha: vec![],
            beta,
            m,
            perturbation: PerturbationKind::Zero,
        })
        .unwrap()
    }

    #[test]
    fn linear_flow_integrates_exactly() {
        let f = x1(vec![-1.0]);
        let traj = integrate_flow(&f, &[1.0], &[1.0], &IntegratorConfig::default()).unwrap();
        let expect = (-1.0f64).exp();
        assert!((traj.states[0].value[0] - expect).abs() < 1e-9 * expect);
    }

    #[test]
    fn monomial_flow_integrates_to_closed_form() {
        let f = x2(vec![-1.0], vec![2]);
        let traj = integrate_flow(&f, &[1.0], &[1.0], &IntegratorConfig::default()).unwrap();
        let expect = 3.0f64.powf(-0.5);
        assert!((traj.states[0].value[0] - expect).abs() < 1e-8 * expect);
    }

    #[test]
    fn equilibrium_stays_zero() {
        let f = x2(vec![-1.0, -0.5], vec![2, 4]);
        let traj = integrate_flow(
            &f,
            &[0.0, 0.0],
            &[0.5, 1.0, 2.0],
            &IntegratorConfig::default(),
        )
        .unwrap();
        for s in &traj.states {
            assert!(s.value.iter().all(|v| v.abs() < 1e-14));
        }
    }

    #[test]
    fn linear_prolongation_is_exponential_diag() {
        let f = x1(vec![-1.0, -2.0]);
        let traj = integrate_prolongation(
            &f,
            &[0.3, 0.4],
            2,
            &[0.7],
            &IntegratorConfig::default(),
        )
        .unwrap();
        let jet = &traj.states[0];
        let d1 = jet.tensor(1).unwrap();
        assert!((d1.get(0, &[0]) - (-0.7f64).exp()).abs() < 1e-9);
        assert!((d1.get(1, &[1]) - (-1.4f64).exp()).abs() < 1e-9);
        assert!(d1.get(0, &[1]).abs() < 1e-11);
        let d2 = jet.tensor(2).unwrap();
        assert!(d2.data().iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn monomial_first_prolongation_matches_closed_form() {
        let f = x2(vec![-1.0], vec![2]);
        let x0 = 0.7;
        let t = 1.0;
        let traj = integrate_prolongation(
            &f,
            &[x0],
            1,
            &[t],
            &IntegratorConfig::default(),
        )
        .unwrap();
        let w: f64 = 1.0 + 2.0 * t * x0 * x0;
        let expect = w.powf(-1.5);
        let got = traj.states[0].tensor(1).unwrap().get(0, &[0]);
        assert!(
            (got - expect).abs() < 1e-8 * expect,
            "got {got}, expect {expect}"
        );
    }

    #[test]
    fn identity_at_t_tiny() {
        let f = x2(vec![-1.0], vec![2]);
        let traj = integrate_prolongation(
            &f,
            &[0.9],
            3,
            &[1e-12],
            &IntegratorConfig::default(),
        )
        .unwrap();
        let jet = &traj.states[0];
        assert!((jet.tensor(1).unwrap().get(0, &[0]) - 1.0).abs() < 1e-9);
        assert!(jet.tensor(2).unwrap().get(0, &[0, 0]).abs() < 1e-9);
        assert!(jet.tensor(3).unwrap().get(0, &[0, 0, 0]).abs() < 1e-9);
    }

    #[test]
    fn chain_source_vanishes_at_order_one() {
        let f = x2(vec![-1.0, -1.0], vec![2, 2]);
        let jets = f.eval_jet(&[0.5, 0.6], 3).unwrap();
        let flow = Jet::identity(&[0.5, 0.6], 2);
        let g = chain_source_term(&jets, &flow.tensors, 1);
        assert!(g.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn chain_source_second_order_single_composition() {
        // 1-D: G^2 = F''(y) (Dphi)^2
        let f = x2(vec![-1.0], vec![2]);
        let y = [0.8];
        let jets = f.eval_jet(&y, 2).unwrap();
        let mut flow = Jet::identity(&y, 1);
        flow.tensors[0].set(0, &[0], 0.9); // pretend Dphi = 0.9
        let g = chain_source_term(&jets, &flow.tensors, 2);
        let f2 = jets[2].get(0, &[0, 0]); // F'' = -6x
        assert!((g.get(0, &[0, 0]) - f2 * 0.81).abs() < 1e-14);
    }

    #[test]
    fn chain_source_third_order_weights() {
        // 1-D: G^3 = 3 F'' Dphi D2phi + F''' (Dphi)^3
        let f = x2(vec![-1.0], vec![4]);
        let y = [0.6];
        let jets = f.eval_jet(&y, 3).unwrap();
        let mut t1 = DerivTensor::zeros(1, 1);
        t1.set(0, &[0], 0.7);
        let mut t2 = DerivTensor::zeros(1, 2);
        t2.set(0, &[0, 0], -0.3);
        let g = chain_source_term(&jets, &[t1, t2], 3);
        let f2 = jets[2].get(0, &[0, 0]);
        let f3 = jets[3].get(0, &[0, 0, 0]);
        let expect = 3.0 * f2 * 0.7 * -0.3 + f3 * 0.7f64.powi(3);
        assert!(
            (g.get(0, &[0, 0, 0]) - expect).abs() < 1e-12,
            "got {}, expect {expect}",
            g.get(0, &[0, 0, 0])
        );
    }

    #[test]
    fn fd_jet_linear_field_exact() {
        let f = x1(vec![-0.8, -1.3]);
        let jet = finite_difference_jet(&f, &[0.5, -0.4], 1.2, 2, 1e-4).unwrap();
        let d1 = jet.tensor(1).unwrap();
        assert!((d1.get(0, &[0]) - (-0.96f64).exp()).abs() < 1e-10);
        assert!((d1.get(1, &[1]) - (-1.56f64).exp()).abs() < 1e-10);
        // order 2 of a linear flow vanishes
        assert!(jet
            .tensor(2)
            .unwrap()
            .data()
            .iter()
            .all(|v| v.abs() < 1e-8));
    }

    #[test]
    fn fd_jet_third_order_matches_coeff_formula() {
        let f = x2(vec![-1.0], vec![2]);
        let x0 = 0.7;
        let t = 1.0;
        let jet = finite_difference_jet(&f, &[x0], t, 3, 1e-2).unwrap();
        let p = ScalarFlowParams::new(0.0, -1.0, 2).unwrap();
        let expect = crate::closed_form::monomial_kth_derivative(p, x0, t, 3).unwrap();
        let got = jet.tensor(3).unwrap().get(0, &[0, 0, 0]);
        assert!(
            (got - expect).abs() < 1e-4 * expect.abs().max(1.0),
            "got {got}, expect {expect}"
        );
    }

    #[test]
    fn variational_consistency_on_catalog() {
        // order-1 block of the prolongation vs finite differences
        let fields = vec![
            x1(vec![-1.0, -0.5]),
            x2(vec![-1.0, -0.7], vec![2, 2]),
            build_field(&FieldConfig {
                family: FieldFamily::Y2,
                n: 2,
                alpha: vec![],
                beta: vec![-1.0, -0.5],
                m: vec![2, 2],
                perturbation: PerturbationKind::ComponentPower { gamma: 0.05 },
            })
            .unwrap(),
        ];
        let cfg = IntegratorConfig::default();
        let mut s = Sampler::new(31);
        for f in &fields {
            for _ in 0..6 {
                let x0 = s.point_in_box(f.n(), 1.0);
                let t = s.uniform_in(0.1, 3.0);
                let traj = integrate_prolongation(&f.clone(), &x0, 1, &[t], &cfg).unwrap();
                let fd = finite_difference_jet(f, &x0, t, 1, 1e-5).unwrap();
                let a = traj.states[0].tensor(1).unwrap();
                let b = fd.tensor(1).unwrap();
                for (va, vb) in a.data().iter().zip(b.data()) {
                    assert!(
                        (va - vb).abs() < 1e-6_f64.max(10.0 * cfg.rel_tol),
                        "family {:?}: {va} vs {vb}",
                        f.family()
                    );
                }
            }
        }
    }

    #[test]
    fn jet_tensors_stay_symmetric_and_decoupled() {
        let f = build_field(&FieldConfig {
            family: FieldFamily::Y2,
            n: 2,
            alpha: vec![],
            beta: vec![-1.0, -0.5],
            m: vec![2, 4],
            perturbation: PerturbationKind::Zero,
        })
        .unwrap();
        let cfg = IntegratorConfig::default();
        let traj =
            integrate_prolongation(&f, &[0.8, -0.6], 3, &[0.5, 1.5], &cfg).unwrap();
        for jet in &traj.states {
            for tensor in &jet.tensors {
                assert!(tensor.symmetry_residual() < 1e-12);
            }
            // Zero perturbation: diagonal field, off-diagonal jet entries stay 0
            let d1 = jet.tensor(1).unwrap();
            assert!(d1.get(0, &[1]).abs() <= 10.0 * cfg.abs_tol);
            assert!(d1.get(1, &[0]).abs() <= 10.0 * cfg.abs_tol);
        }
    }

    #[test]
    fn prolongation_order_cap() {
        let f = x1(vec![-1.0]);
        assert!(matches!(
            integrate_prolongation(&f, &[1.0], K_MAX + 1, &[1.0], &IntegratorConfig::default()),
            Err(CoreError::Capability(_))
        ));
    }
}
