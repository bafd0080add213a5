//! Vector-field families and the perturbation catalog.
//!
//! Six families on `R^n`: the diagonal linear field `X1`, the diagonal
//! odd-monomial field `X2`, their binomial combination `X3`, and the
//! perturbed variants `Y1 = X1 + Z`, `Y2 = X2 + Z`, `Y3 = X3 + Z`.
//!
//! Perturbations come from a closed catalog of five kinds so that their
//! growth constants can be machine-certified: for each hypothesis class the
//! certifier computes the supremum of `||D^l Z(x)|| / weight(x)` over a grid
//! covering the unit ball and an annulus outside it, inflates grid maxima by
//! a declared safety factor, and records which classes the perturbation
//! satisfies (with a witness point when a ratio diverges).
//!
//! Sign conventions: profiles store raw `alpha_i`, `beta_i` only; every
//! consumer recomputes extrema (`min`/`max`, magnitudes) on demand.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::taylor1::Taylor1;
use crate::tensor::{check_vector, norm, DerivTensor};
use crate::{K_MAX, N_MAX};

/// Safety factor applied to grid-oracle constants (grid maxima undercount
/// suprema).
pub const GRID_SAFETY: f64 = 1.05;

// ---------------------------------------------------------------------------
// Families and profiles
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FieldFamily {
    X1,
    X2,
    X3,
    Y1,
    Y2,
    Y3,
}

impl FieldFamily {
    #[must_use]
    pub fn has_linear_part(self) -> bool {
        matches!(self, Self::X1 | Self::X3 | Self::Y1 | Self::Y3)
    }

    #[must_use]
    pub fn has_monomial_part(self) -> bool {
        matches!(self, Self::X2 | Self::X3 | Self::Y2 | Self::Y3)
    }

    #[must_use]
    pub fn is_perturbed(self) -> bool {
        matches!(self, Self::Y1 | Self::Y2 | Self::Y3)
    }

    /// Unperturbed counterpart (the closed-form family).
    #[must_use]
    pub fn base(self) -> Self {
        match self {
            Self::Y1 => Self::X1,
            Self::Y2 => Self::X2,
            Self::Y3 => Self::X3,
            other => other,
        }
    }
}

impl std::fmt::Display for FieldFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Per-axis coefficients of a field family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientProfile {
    n: usize,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    m: Vec<u32>,
}

impl CoefficientProfile {
    /// Build a validated profile. `alpha`/`beta` may be empty when the
    /// consuming family has no such part; they are then stored as zeros.
    pub fn new(n: usize, alpha: Vec<f64>, beta: Vec<f64>, m: Vec<u32>) -> Result<Self> {
        if n == 0 || n > N_MAX {
            return Err(CoreError::Validation(format!(
                "dimension must be in 1..={N_MAX}, got {n}"
            )));
        }
        let alpha = if alpha.is_empty() { vec![0.0; n] } else { alpha };
        let beta = if beta.is_empty() { vec![0.0; n] } else { beta };
        let m = if m.is_empty() { vec![2; n] } else { m };
        if alpha.len() != n || beta.len() != n || m.len() != n {
            return Err(CoreError::Validation(format!(
                "coefficient vectors must have length {n} (alpha {}, beta {}, m {})",
                alpha.len(),
                beta.len(),
                m.len()
            )));
        }
        if alpha.iter().chain(beta.iter()).any(|v| !v.is_finite()) {
            return Err(CoreError::Validation("non-finite coefficient".into()));
        }
        for &mi in &m {
            if mi == 0 || mi % 2 != 0 {
                return Err(CoreError::Validation(format!(
                    "exponent m = {mi} must be a positive even integer"
                )));
            }
        }
        Ok(Self { n, alpha, beta, m })
    }

    #[must_use]
    pub fn n(&self) -> usize {
        self.n
    }

    #[must_use]
    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    #[must_use]
    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    #[must_use]
    pub fn m(&self) -> &[u32] {
        &self.m
    }

    /// min alpha_i (recomputed, never stored).
    #[must_use]
    pub fn alpha_min(&self) -> f64 {
        self.alpha.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// max alpha_i.
    #[must_use]
    pub fn alpha_max(&self) -> f64 {
        self.alpha.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// max |beta_i| for nonpositive beta, i.e. -min beta_i.
    #[must_use]
    pub fn beta_mag_max(&self) -> f64 {
        -self.beta.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// min |beta_i| for nonpositive beta, i.e. -max beta_i.
    #[must_use]
    pub fn beta_mag_min(&self) -> f64 {
        -self.beta.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    #[must_use]
    pub fn m_min(&self) -> u32 {
        self.m.iter().copied().min().unwrap_or(2)
    }

    #[must_use]
    pub fn m_max(&self) -> u32 {
        self.m.iter().copied().max().unwrap_or(2)
    }
}

// ---------------------------------------------------------------------------
// Perturbation catalog
// ---------------------------------------------------------------------------

/// The closed catalog of perturbation shapes.
///
/// * `Zero` — no perturbation.
/// * `Bounded` — `Z_i = (gamma/sqrt(n)) sin(x_i)`; globally bounded with all
///   derivatives bounded.
/// * `LinearGrowth` — `Z_i = gamma x_i cos(x_i)`; `||Z|| <= gamma ||x||`.
/// * `PowerInBall` — `Z_i = gamma x_i ||x||^p / (1 + ||x||^p)` (p even);
///   power growth near zero, linear saturation outside. Couples all
///   coordinates.
/// * `ComponentPower` — `Z_i = gamma x_i^{2+m_i} / sqrt(1 + x_i^2)`;
///   componentwise power behaviour matched to the profile exponents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PerturbationKind {
    Zero,
    Bounded { gamma: f64 },
    LinearGrowth { gamma: f64 },
    PowerInBall { gamma: f64, power: u32 },
    ComponentPower { gamma: f64 },
}

impl PerturbationKind {
    #[must_use]
    pub fn is_zero(&self) -> bool {
        matches!(self, Self::Zero)
    }

    /// Whether `Z_i` depends on coordinates other than `x_i`.
    #[must_use]
    pub fn coupling(&self) -> bool {
        matches!(self, Self::PowerInBall { .. })
    }

    /// The inherent power of the perturbation, when it has one: the `m`
    /// entering norm-power hypotheses (`||Z|| <= c ||x||^{1+m}`).
    #[must_use]
    pub fn power(&self, profile: &CoefficientProfile) -> Option<u32> {
        match self {
            Self::PowerInBall { power, .. } => Some(*power),
            Self::ComponentPower { .. } => {
                let m0 = profile.m_min();
                (m0 == profile.m_max()).then_some(m0)
            }
            _ => None,
        }
    }

    fn gamma(&self) -> f64 {
        match *self {
            Self::Zero => 0.0,
            Self::Bounded { gamma }
            | Self::LinearGrowth { gamma }
            | Self::PowerInBall { gamma, .. }
            | Self::ComponentPower { gamma } => gamma,
        }
    }

    fn validate(&self) -> Result<()> {
        let g = self.gamma();
        if !g.is_finite() || g < 0.0 {
            return Err(CoreError::Validation(format!(
                "perturbation amplitude must be finite and nonnegative, got {g}"
            )));
        }
        if let Self::PowerInBall { power, .. } = self {
            if !matches!(power, 2 | 4) {
                return Err(CoreError::Validation(format!(
                    "PowerInBall power must be 2 or 4, got {power}"
                )));
            }
        }
        Ok(())
    }
}

/// Hypothesis class a perturbation can be certified for. Each class is the
/// effective (global) inequality a lemma's comparison argument consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GrowthClass {
    /// `||D^l Z(x)|| <= c` globally.
    Const(usize),
    /// `||Z(x)|| <= c ||x||` globally.
    Linear,
    /// `||D^l Z(x)|| <= c ||x||^{1+p-l}` globally, `p` the perturbation power.
    NormPower(usize),
    /// `|D^l Z_i(x)| <= c |x_i|^{1-l+m_i}` componentwise, globally.
    CompPower(usize),
}

impl std::fmt::Display for GrowthClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Const(l) => write!(f, "const[l={l}]"),
            Self::Linear => write!(f, "linear"),
            Self::NormPower(l) => write!(f, "norm-power[l={l}]"),
            Self::CompPower(l) => write!(f, "component-power[l={l}]"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CertMethod {
    Analytic,
    GridOracle,
}

/// Certified constant for one class: `sup ratio` over the grid split into
/// the unit-ball part and the annulus part, with `c = max` of the two,
/// inflated by the safety factor when grid-derived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassCertificate {
    pub class: GrowthClass,
    pub c: f64,
    pub c_ball: f64,
    pub c_annulus: f64,
    pub method: CertMethod,
}

/// Outcome of certifying one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ClassVerdict {
    Satisfied(ClassCertificate),
    /// The ratio diverges (toward 0 or outward); `witness` is a grid point
    /// demonstrating the failure.
    Violated { class: GrowthClass, witness: Vec<f64> },
}

impl ClassVerdict {
    #[must_use]
    pub fn class(&self) -> GrowthClass {
        match self {
            Self::Satisfied(c) => c.class,
            Self::Violated { class, .. } => *class,
        }
    }

    #[must_use]
    pub fn constant(&self) -> Option<f64> {
        match self {
            Self::Satisfied(c) => Some(c.c),
            Self::Violated { .. } => None,
        }
    }
}

/// A perturbation together with its certified growth constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub kind: PerturbationKind,
    pub coupling: bool,
    pub certified: Vec<ClassVerdict>,
}

impl PerturbationSpec {
    /// Certified constant for a class, or an error naming the failed class.
    pub fn constant(&self, class: GrowthClass) -> Result<f64> {
        for v in &self.certified {
            if v.class() == class {
                return v.constant().ok_or_else(|| {
                    CoreError::Hypothesis(format!(
                        "perturbation does not satisfy class {class}"
                    ))
                });
            }
        }
        Err(CoreError::Hypothesis(format!(
            "class {class} was not certified"
        )))
    }

    #[must_use]
    pub fn satisfies(&self, class: GrowthClass) -> bool {
        self.certified
            .iter()
            .any(|v| v.class() == class && matches!(v, ClassVerdict::Satisfied(_)))
    }
}

// ---------------------------------------------------------------------------
// FieldSpec
// ---------------------------------------------------------------------------

/// Plain configuration for [`build_field`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldConfig {
    pub family: FieldFamily,
    pub n: usize,
    #[serde(default)]
    pub alpha: Vec<f64>,
    #[serde(default)]
    pub beta: Vec<f64>,
    #[serde(default)]
    pub m: Vec<u32>,
    pub perturbation: PerturbationKind,
}

/// A validated field: family, coefficient profile and certified perturbation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    family: FieldFamily,
    profile: CoefficientProfile,
    perturbation: PerturbationSpec,
}

impl FieldSpec {
    #[must_use]
    pub fn family(&self) -> FieldFamily {
        self.family
    }

    #[must_use]
    pub fn profile(&self) -> &CoefficientProfile {
        &self.profile
    }

    #[must_use]
    pub fn perturbation(&self) -> &PerturbationSpec {
        &self.perturbation
    }

    #[must_use]
    pub fn n(&self) -> usize {
        self.profile.n
    }

    /// Evaluate the field at `x`.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_vector(x, self.n())?;
        let mut out = vec![0.0; self.n()];
        if self.family.has_linear_part() {
            for (o, (&a, &xi)) in out.iter_mut().zip(self.profile.alpha.iter().zip(x)) {
                *o += a * xi;
            }
        }
        if self.family.has_monomial_part() {
            for i in 0..self.n() {
                out[i] += self.profile.beta[i] * x[i].powi(1 + self.profile.m[i] as i32);
            }
        }
        if self.family.is_perturbed() {
            let z = eval_perturbation(&self.perturbation.kind, &self.profile, x);
            for (o, zi) in out.iter_mut().zip(z) {
                *o += zi;
            }
        }
        Ok(out)
    }

    /// Derivative tensors `D^0..D^k` of the field at `x`. `D^0` equals
    /// [`FieldSpec::eval`]; all tensors are symmetric.
    pub fn eval_jet(&self, x: &[f64], k: usize) -> Result<Vec<DerivTensor>> {
        check_vector(x, self.n())?;
        if k > K_MAX {
            return Err(CoreError::Capability(format!(
                "field jets are available up to order {K_MAX}, requested {k}"
            )));
        }
        let n = self.n();
        let mut jets: Vec<DerivTensor> = (0..=k).map(|l| DerivTensor::zeros(n, l)).collect();

        // diagonal polynomial part: only entries [i; i,..,i]
        for i in 0..n {
            let a = self.profile.alpha[i];
            let b = self.profile.beta[i];
            let p = 1 + self.profile.m[i] as usize;
            for (l, jet) in jets.iter_mut().enumerate() {
                let mut v = 0.0;
                if self.family.has_linear_part() {
                    v += match l {
                        0 => a * x[i],
                        1 => a,
                        _ => 0.0,
                    };
                }
                if self.family.has_monomial_part() && l <= p {
                    let mut ff = 1.0;
                    for q in 0..l {
                        ff *= (p - q) as f64;
                    }
                    v += b * ff * x[i].powi((p - l) as i32);
                }
                if v != 0.0 {
                    let idx = vec![i; l];
                    jet.add_at(i, &idx, v);
                }
            }
        }

        if self.family.is_perturbed() {
            let zjets = perturbation_jet(&self.perturbation.kind, &self.profile, x, k);
            for (jet, zjet) in jets.iter_mut().zip(&zjets) {
                jet.add_in_place(zjet);
            }
        }
        Ok(jets)
    }
}

/// Build and validate a [`FieldSpec`]; Y-families get their perturbation
/// certified on the default grid.
pub fn build_field(config: &FieldConfig) -> Result<FieldSpec> {
    let profile = CoefficientProfile::new(
        config.n,
        config.alpha.clone(),
        config.beta.clone(),
        config.m.clone(),
    )?;
    if config.family.has_monomial_part() {
        if let Some(bad) = profile.beta.iter().find(|&&b| b > 0.0) {
            return Err(CoreError::Validation(format!(
                "monomial families require beta_i <= 0, got {bad}"
            )));
        }
    }
    if !config.family.is_perturbed() && !config.perturbation.is_zero() {
        return Err(CoreError::Validation(
            "X-families carry the Zero perturbation".into(),
        ));
    }
    config.perturbation.validate()?;
    let certified = certify_constants(
        &config.perturbation,
        &profile,
        K_MAX,
        &CertGrid::default(),
    )?;
    Ok(FieldSpec {
        family: config.family,
        profile,
        perturbation: PerturbationSpec {
            kind: config.perturbation,
            coupling: config.perturbation.coupling(),
            certified,
        },
    })
}

// ---------------------------------------------------------------------------
// Perturbation evaluation and jets
// ---------------------------------------------------------------------------

/// Evaluate the catalog perturbation at `x`.
#[must_use]
pub fn eval_perturbation(
    kind: &PerturbationKind,
    profile: &CoefficientProfile,
    x: &[f64],
) -> Vec<f64> {
    let n = profile.n;
    match *kind {
        PerturbationKind::Zero => vec![0.0; n],
        PerturbationKind::Bounded { gamma } => {
            let g = gamma / (n as f64).sqrt();
            x.iter().map(|&xi| g * xi.sin()).collect()
        }
        PerturbationKind::LinearGrowth { gamma } => {
            x.iter().map(|&xi| gamma * xi * xi.cos()).collect()
        }
        PerturbationKind::PowerInBall { gamma, power } => {
            let s: f64 = x.iter().map(|v| v * v).sum();
            let sq = s.powi((power / 2) as i32);
            let g = gamma * sq / (1.0 + sq);
            x.iter().map(|&xi| xi * g).collect()
        }
        PerturbationKind::ComponentPower { gamma } => x
            .iter()
            .zip(&profile.m)
            .map(|(&xi, &mi)| gamma * xi.powi(2 + mi as i32) / (1.0 + xi * xi).sqrt())
            .collect(),
    }
}

/// Derivative tensors `D^0..D^k` of the perturbation at `x`.
#[must_use]
pub fn perturbation_jet(
    kind: &PerturbationKind,
    profile: &CoefficientProfile,
    x: &[f64],
    k: usize,
) -> Vec<DerivTensor> {
    let n = profile.n;
    match *kind {
        PerturbationKind::Zero => (0..=k).map(|l| DerivTensor::zeros(n, l)).collect(),
        PerturbationKind::Bounded { gamma } => {
            diagonal_jet(n, k, |i| {
                let t = Taylor1::variable(x[i], k);
                t.sin_cos().0.scale(gamma / (n as f64).sqrt())
            })
        }
        PerturbationKind::LinearGrowth { gamma } => diagonal_jet(n, k, |i| {
            let t = Taylor1::variable(x[i], k);
            t.mul(&t.sin_cos().1).scale(gamma)
        }),
        PerturbationKind::ComponentPower { gamma } => diagonal_jet(n, k, |i| {
            let t = Taylor1::variable(x[i], k);
            let denom = Taylor1::constant(1.0, k).add(&t.powi(2)).sqrt().recip();
            t.powi(2 + profile.m[i] as usize).mul(&denom).scale(gamma)
        }),
        PerturbationKind::PowerInBall { gamma, power } => {
            radial_jet(n, k, x, |s| {
                let sv = Taylor1::variable(s, k);
                let sq = sv.powi((power / 2) as usize);
                sq.mul(&Taylor1::constant(1.0, k).add(&sq).recip())
                    .scale(gamma)
            })
        }
    }
}

/// Jets of a componentwise map `Z_i(x) = f_i(x_i)`: the order-`l` tensor has
/// only the `[i; i,..,i]` entries.
fn diagonal_jet(
    n: usize,
    k: usize,
    component: impl Fn(usize) -> Taylor1,
) -> Vec<DerivTensor> {
    let mut jets: Vec<DerivTensor> = (0..=k).map(|l| DerivTensor::zeros(n, l)).collect();
    for i in 0..n {
        let series = component(i);
        for (l, jet) in jets.iter_mut().enumerate() {
            let idx = vec![i; l];
            jet.set(i, &idx, series.derivative(l));
        }
    }
    jets
}

/// Jets of a radial map `Z_i(x) = x_i g(s)` with `s = ||x||^2`.
///
/// Derivatives of `g(s(x))` expand over partitions of the index set into
/// singletons (factor `2 x_j`) and pairs (factor `2 delta_{jk}`), one `g`
/// derivative per block; the outer `x_i` factor adds one delta term per
/// index position.
fn radial_jet(
    n: usize,
    k: usize,
    x: &[f64],
    g_series: impl Fn(f64) -> Taylor1,
) -> Vec<DerivTensor> {
    let s: f64 = x.iter().map(|v| v * v).sum();
    let g = g_series(s);
    let gd: Vec<f64> = (0..=k).map(|r| g.derivative(r)).collect();

    // h_r(idx) = d^r g(s(x)) / dx_idx
    let h = |idx: &[usize]| -> f64 {
        let parts = pair_partitions(idx.len());
        let mut acc = 0.0;
        for part in &parts {
            let mut factor = 1.0;
            for block in part {
                match block[..] {
                    [a] => factor *= 2.0 * x[idx[a]],
                    [a, b] => {
                        if idx[a] == idx[b] {
                            factor *= 2.0;
                        } else {
                            factor = 0.0;
                            break;
                        }
                    }
                    _ => unreachable!(),
                }
            }
            if factor != 0.0 {
                acc += factor * gd[part.len()];
            }
        }
        acc
    };

    let mut jets: Vec<DerivTensor> = (0..=k).map(|l| DerivTensor::zeros(n, l)).collect();
    let mut idx = vec![0usize; k];
    for (l, jet) in jets.iter_mut().enumerate() {
        let block = n.pow(l as u32);
        for f in 0..block {
            let mut ff = f;
            for slot in idx[..l].iter_mut().rev() {
                *slot = ff % n;
                ff /= n;
            }
            let hl = h(&idx[..l]);
            for i in 0..n {
                let mut v = x[i] * hl;
                for q in 0..l {
                    if idx[q] == i {
                        let mut rest: Vec<usize> = Vec::with_capacity(l - 1);
                        rest.extend_from_slice(&idx[..q]);
                        rest.extend_from_slice(&idx[q + 1..l]);
                        v += h(&rest);
                    }
                }
                if v != 0.0 {
                    jet.data_mut()[i * block + f] = v;
                }
            }
        }
    }
    jets
}

/// Partitions of `{0..len}` into blocks of size 1 or 2.
fn pair_partitions(len: usize) -> Vec<Vec<Vec<usize>>> {
    fn rec(remaining: &[usize], cur: &mut Vec<Vec<usize>>, out: &mut Vec<Vec<Vec<usize>>>) {
        match remaining.split_first() {
            None => out.push(cur.clone()),
            Some((&first, rest)) => {
                cur.push(vec![first]);
                rec(rest, cur, out);
                cur.pop();
                for (j, &other) in rest.iter().enumerate() {
                    let mut next: Vec<usize> = rest.to_vec();
                    next.remove(j);
                    cur.push(vec![first, other]);
                    rec(&next, cur, out);
                    cur.pop();
                }
            }
        }
    }
    let items: Vec<usize> = (0..len).collect();
    let mut out = Vec::new();
    rec(&items, &mut Vec::new(), &mut out);
    out
}

// ---------------------------------------------------------------------------
// Certification
// ---------------------------------------------------------------------------

/// Certification grid: tensor-product grid on `[-radius, radius]^n` plus
/// shells shrinking toward the origin (divergence detection).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertGrid {
    pub radius: f64,
    /// Points per axis; `None` picks a dimension-dependent default keeping
    /// the total point count at desk scale.
    pub per_axis: Option<usize>,
}

impl Default for CertGrid {
    fn default() -> Self {
        Self {
            radius: 3.0,
            per_axis: None,
        }
    }
}

impl CertGrid {
    fn axis_count(&self, n: usize) -> usize {
        self.per_axis.unwrap_or(match n {
            1 => 2001,
            2 => 101,
            3 => 25,
            4 => 13,
            _ => 7,
        })
    }

    /// All grid points (excluding the origin).
    fn points(&self, n: usize) -> Vec<Vec<f64>> {
        let per = self.axis_count(n);
        let mut pts = Vec::new();
        let mut idx = vec![0usize; n];
        let total = per.pow(n as u32);
        for f in 0..total {
            let mut ff = f;
            for slot in idx.iter_mut().rev() {
                *slot = ff % per;
                ff /= per;
            }
            let p: Vec<f64> = idx
                .iter()
                .map(|&i| -self.radius + 2.0 * self.radius * i as f64 / (per - 1) as f64)
                .collect();
            if norm(&p) > 1e-12 {
                pts.push(p);
            }
        }
        // shells toward the origin along axes and diagonals
        for &r in &[1e-1, 1e-2, 1e-3, 1e-4, 1e-5] {
            for i in 0..n {
                for sign in [-1.0, 1.0] {
                    let mut p = vec![0.0; n];
                    p[i] = sign * r;
                    pts.push(p);
                }
            }
            pts.push(vec![r / (n as f64).sqrt(); n]);
        }
        pts
    }
}

/// Whether a (kind, class) pair is satisfiable at all; the catalog is closed
/// so this is analytic knowledge. `None` means "satisfiable, quantify on the
/// grid"; `Some(c)` means the exact constant is known analytically.
fn analytic_status(
    kind: &PerturbationKind,
    profile: &CoefficientProfile,
    class: GrowthClass,
) -> Option<Option<f64>> {
    use GrowthClass::*;
    use PerturbationKind::*;
    let n = profile.n as f64;
    match (kind, class) {
        (Zero, _) => Some(Some(0.0)),
        (Bounded { gamma }, Const(0)) => Some(Some(*gamma)),
        (Bounded { gamma }, Const(_)) => Some(Some(gamma / n.sqrt())),
        // |sin u| <= |u| componentwise
        (Bounded { gamma }, Linear) => Some(Some(gamma / n.sqrt())),
        (Bounded { .. }, NormPower(_) | CompPower(_)) => None?,
        (LinearGrowth { gamma }, Linear) => Some(Some(*gamma)),
        (LinearGrowth { .. }, _) => None?,
        // g(s) = gamma s^q/(1+s^q) < gamma
        (PowerInBall { gamma, .. }, Linear) => Some(Some(*gamma)),
        (PowerInBall { gamma, .. }, NormPower(0)) => Some(Some(*gamma)),
        (PowerInBall { .. }, NormPower(1)) => Some(None),
        (PowerInBall { .. }, _) => None?,
        (ComponentPower { .. }, CompPower(_)) => Some(None),
        (ComponentPower { .. }, NormPower(l)) => {
            // only meaningful when all profile exponents agree
            if profile.m_min() == profile.m_max() && l <= 1 {
                Some(None)
            } else {
                None?
            }
        }
        (ComponentPower { .. }, _) => None?,
    }
}

/// Ratio `measurement / weight` for one class at one point; `None` when the
/// weight underflows (too close to zero to divide).
fn class_ratio(
    class: GrowthClass,
    kind: &PerturbationKind,
    profile: &CoefficientProfile,
    x: &[f64],
) -> Option<f64> {
    let r = norm(x);
    match class {
        GrowthClass::Const(l) => {
            let jets = perturbation_jet(kind, profile, x, l);
            Some(jets[l].operator_norm())
        }
        GrowthClass::Linear => {
            if r < 1e-9 {
                return None;
            }
            let z = eval_perturbation(kind, profile, x);
            Some(norm(&z) / r)
        }
        GrowthClass::NormPower(l) => {
            let p = kind.power(profile)?;
            let w = r.powi(1 + p as i32 - l as i32);
            if w < 1e-200 {
                return None;
            }
            let jets = perturbation_jet(kind, profile, x, l);
            Some(jets[l].operator_norm() / w)
        }
        GrowthClass::CompPower(l) => {
            // componentwise: worst ratio |d^l Z_i / dx_i^l| / |x_i|^{1-l+m_i}
            let jets = perturbation_jet(kind, profile, x, l);
            let mut worst: Option<f64> = None;
            for i in 0..profile.n {
                let e = 1 + profile.m[i] as i32 - l as i32;
                let w = if e <= 0 { 1.0 } else { x[i].abs().powi(e) };
                if w < 1e-200 {
                    continue;
                }
                let idx = vec![i; l];
                let v = jets[l].get(i, &idx).abs() / w;
                worst = Some(worst.map_or(v, |b: f64| b.max(v)));
            }
            worst
        }
    }
}

/// Certify the perturbation constants `c_0..c_{k_max}` for every hypothesis
/// class, on a grid covering the unit ball and an annulus outside it.
///
/// Grid-oracle constants are the grid supremum of `||D^l Z|| / weight`
/// inflated by [`GRID_SAFETY`]; for classes the closed catalog satisfies
/// analytically the exact constant is recorded instead. A ratio that keeps
/// growing along the shrinking shells yields a `Violated` verdict with the
/// witness point.
pub fn certify_constants(
    kind: &PerturbationKind,
    profile: &CoefficientProfile,
    k_max: usize,
    grid: &CertGrid,
) -> Result<Vec<ClassVerdict>> {
    kind.validate()?;
    if grid.radius <= 1.0 {
        return Err(CoreError::Usage(
            "certification grid must cover the unit ball and an annulus outside it".into(),
        ));
    }
    let mut classes = vec![GrowthClass::Linear];
    for l in 0..=k_max.min(K_MAX) {
        classes.push(GrowthClass::Const(l));
        classes.push(GrowthClass::CompPower(l));
        if l <= 1 {
            classes.push(GrowthClass::NormPower(l));
        }
    }
    let pts = grid.points(profile.n);
    let mut out = Vec::new();
    for class in classes {
        out.push(certify_class(kind, profile, class, &pts)?);
    }
    Ok(out)
}

fn certify_class(
    kind: &PerturbationKind,
    profile: &CoefficientProfile,
    class: GrowthClass,
    pts: &[Vec<f64>],
) -> Result<ClassVerdict> {
    match analytic_status(kind, profile, class) {
        Some(Some(c)) => Ok(ClassVerdict::Satisfied(ClassCertificate {
            class,
            c,
            c_ball: c,
            c_annulus: c,
            method: CertMethod::Analytic,
        })),
        Some(None) => {
            let mut c_ball = 0.0f64;
            let mut c_annulus = 0.0f64;
            for p in pts {
                if let Some(ratio) = class_ratio(class, kind, profile, p) {
                    if !ratio.is_finite() {
                        return Err(CoreError::Classification {
                            class: class.to_string(),
                            witness: p.clone(),
                        });
                    }
                    if norm(p) <= 1.0 {
                        c_ball = c_ball.max(ratio);
                    } else {
                        c_annulus = c_annulus.max(ratio);
                    }
                }
            }
            Ok(ClassVerdict::Satisfied(ClassCertificate {
                class,
                c: c_ball.max(c_annulus) * GRID_SAFETY,
                c_ball: c_ball * GRID_SAFETY,
                c_annulus: c_annulus * GRID_SAFETY,
                method: CertMethod::GridOracle,
            }))
        }
        None => {
            // known-unsatisfiable: locate the worst ratio as witness
            let mut witness = pts
                .first()
                .cloned()
                .unwrap_or_else(|| vec![1.0; profile.n]);
            let mut worst = 0.0f64;
            for p in pts {
                if let Some(ratio) = class_ratio(class, kind, profile, p) {
                    if ratio > worst {
                        worst = ratio;
                        witness = p.clone();
                    }
                }
            }
            Ok(ClassVerdict::Violated { class, witness })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Sampler;

    fn y2_component_power(n: usize, gamma: f64) -> FieldSpec {
        build_field(&FieldConfig {
            family: FieldFamily::Y2,
            n,
            alpha: vec![],
            beta: vec![-1.0; n],
            m: vec![2; n],
            perturbation: PerturbationKind::ComponentPower { gamma },
        })
        .unwrap()
    }

    #[test]
    fn x1_min_max_derived() {
        let f = build_field(&FieldConfig {
            family: FieldFamily::X1,
            n: 2,
            alpha: vec![-1.0, -2.0],
            beta: vec![],
            m: vec![],
            perturbation: PerturbationKind::Zero,
        })
        .unwrap();
        assert_eq!(f.profile().alpha_min(), -2.0);
        assert_eq!(f.profile().alpha_max(), -1.0);
    }

    #[test]
    fn odd_exponent_rejected() {
        let err = build_field(&FieldConfig {
            family: FieldFamily::X2,
            n: 1,
            alpha: vec![],
            beta: vec![-1.0],
            m: vec![3],
            perturbation: PerturbationKind::Zero,
        })
        .unwrap_err();
        assert!(matches!(err, CoreError::Validation(_)));
    }

    #[test]
    fn positive_beta_rejected_for_monomial() {
        let err = build_field(&FieldConfig {
            family: FieldFamily::X2,
            n: 1,
            alpha: vec![],
            beta: vec![0.5],
            m: vec![2],
            perturbation: PerturbationKind::Zero,
        })
        .unwrap_err();
        assert!(matches!(err, CoreError::Validation(_)));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let err = build_field(&FieldConfig {
            family: FieldFamily::X1,
            n: 3,
            alpha: vec![-1.0, -2.0],
            beta: vec![],
            m: vec![],
            perturbation: PerturbationKind::Zero,
        })
        .unwrap_err();
        assert!(matches!(err, CoreError::Validation(_)));
    }

    #[test]
    fn x_family_must_be_unperturbed() {
        let err = build_field(&FieldConfig {
            family: FieldFamily::X1,
            n: 1,
            alpha: vec![-1.0],
            beta: vec![],
            m: vec![],
            perturbation: PerturbationKind::Bounded { gamma: 0.1 },
        })
        .unwrap_err();
        assert!(matches!(err, CoreError::Validation(_)));
    }

    #[test]
    fn eval_examples() {
        let x1 = build_field(&FieldConfig {
            family: FieldFamily::X1,
            n: 2,
            alpha: vec![-1.0, -2.0],
            beta: vec![],
            m: vec![],
            perturbation: PerturbationKind::Zero,
        })
        .unwrap();
        assert_eq!(x1.eval(&[1.0, 1.0]).unwrap(), vec![-1.0, -2.0]);

        let x2 = build_field(&FieldConfig {
            family: FieldFamily::X2,
            n: 1,
            alpha: vec![],
            beta: vec![-1.0],
            m: vec![2],
            perturbation: PerturbationKind::Zero,
        })
        .unwrap();
        assert_eq!(x2.eval(&[2.0]).unwrap(), vec![-8.0]);

        let y3 = build_field(&FieldConfig {
            family: FieldFamily::Y3,
            n: 1,
            alpha: vec![-1.0],
            beta: vec![-1.0],
            m: vec![2],
            perturbation: PerturbationKind::Zero,
        })
        .unwrap();
        assert_eq!(y3.eval(&[1.0]).unwrap(), vec![-2.0]);
    }

    #[test]
    fn non_finite_input_rejected() {
        let f = y2_component_power(1, 0.1);
        assert!(matches!(
            f.eval(&[f64::NAN]),
            Err(CoreError::Domain(_))
        ));
    }

    #[test]
    fn jet_order_exceeding_kmax_rejected() {
        let f = y2_component_power(1, 0.1);
        assert!(matches!(
            f.eval_jet(&[0.5], K_MAX + 1),
            Err(CoreError::Capability(_))
        ));
    }

    #[test]
    fn linear_field_jet_is_diag_alpha() {
        let f = build_field(&FieldConfig {
            family: FieldFamily::X1,
            n: 2,
            alpha: vec![-1.0, -2.0],
            beta: vec![],
            m: vec![],
            perturbation: PerturbationKind::Zero,
        })
        .unwrap();
        let jets = f.eval_jet(&[0.3, -0.7], 2).unwrap();
        assert!((jets[1].get(0, &[0]) + 1.0).abs() < 1e-15);
        assert!((jets[1].get(1, &[1]) + 2.0).abs() < 1e-15);
        assert!(jets[1].get(0, &[1]).abs() < 1e-15);
        assert!(jets[2].data().iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn monomial_first_derivative() {
        let f = build_field(&FieldConfig {
            family: FieldFamily::X2,
            n: 1,
            alpha: vec![],
            beta: vec![-1.0],
            m: vec![2],
            perturbation: PerturbationKind::Zero,
        })
        .unwrap();
        let jets = f.eval_jet(&[0.5], 1).unwrap();
        // (1+m) beta x^m = 3 * (-1) * 0.25 = -0.75
        assert!((jets[1].get(0, &[0]) + 0.75).abs() < 1e-15);
    }

    #[test]
    fn jet_order_zero_equals_eval_on_random_points() {
        let fields = catalog_for_tests();
        let mut s = Sampler::new(11);
        for f in &fields {
            for _ in 0..100 {
                let x = s.point_in_box(f.n(), 2.0);
                let e = f.eval(&x).unwrap();
                let j = f.eval_jet(&x, 0).unwrap();
                for i in 0..f.n() {
                    assert_eq!(e[i], j[0].get(i, &[]), "family {:?}", f.family());
                }
            }
        }
    }

    #[test]
    fn field_jets_match_finite_differences() {
        let fields = catalog_for_tests();
        let h = 1e-4;
        let mut s = Sampler::new(5);
        for f in &fields {
            let n = f.n();
            let x = s.point_in_box(n, 1.0);
            let jets = f.eval_jet(&x, 3).unwrap();
            // first derivative
            for j in 0..n {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[j] += h;
                xm[j] -= h;
                let fp = f.eval(&xp).unwrap();
                let fm = f.eval(&xm).unwrap();
                for i in 0..n {
                    let fd = (fp[i] - fm[i]) / (2.0 * h);
                    assert!(
                        (jets[1].get(i, &[j]) - fd).abs() < 1e-6,
                        "D1 mismatch family {:?} entry ({i},{j}): {} vs {}",
                        f.family(),
                        jets[1].get(i, &[j]),
                        fd
                    );
                }
            }
            // second derivative (mixed)
            for j in 0..n {
                for l in 0..n {
                    let ev = |dj: f64, dl: f64| {
                        let mut xx = x.clone();
                        xx[j] += dj;
                        xx[l] += dl;
                        f.eval(&xx).unwrap()
                    };
                    let fpp = ev(h, h);
                    let fpm = ev(h, -h);
                    let fmp = ev(-h, h);
                    let fmm = ev(-h, -h);
                    for i in 0..n {
                        let fd = (fpp[i] - fpm[i] - fmp[i] + fmm[i]) / (4.0 * h * h);
                        assert!(
                            (jets[2].get(i, &[j, l]) - fd).abs() < 2e-4,
                            "D2 mismatch family {:?} entry ({i},{j},{l})",
                            f.family()
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn perturbation_jets_are_symmetric() {
        let f = build_field(&FieldConfig {
            family: FieldFamily::Y2,
            n: 3,
            alpha: vec![],
            beta: vec![-1.0, -0.5, -1.5],
            m: vec![2, 2, 4],
            perturbation: PerturbationKind::PowerInBall {
                gamma: 0.2,
                power: 2,
            },
        })
        .unwrap();
        let jets = f.eval_jet(&[0.4, -0.6, 0.9], 4).unwrap();
        for jet in &jets {
            assert!(jet.symmetry_residual() < 1e-12);
        }
    }

    #[test]
    fn x_family_eval_is_odd() {
        let fields = catalog_for_tests();
        let mut s = Sampler::new(23);
        for f in fields.iter().filter(|f| !f.family().is_perturbed()) {
            for _ in 0..20 {
                let x = s.point_in_box(f.n(), 2.0);
                let neg: Vec<f64> = x.iter().map(|v| -v).collect();
                let fx = f.eval(&x).unwrap();
                let fneg = f.eval(&neg).unwrap();
                for i in 0..f.n() {
                    assert!((fx[i] + fneg[i]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn zero_perturbation_certifies_everything_at_zero() {
        let profile = CoefficientProfile::new(2, vec![-1.0, -1.0], vec![], vec![]).unwrap();
        let verdicts =
            certify_constants(&PerturbationKind::Zero, &profile, 4, &CertGrid::default())
                .unwrap();
        for v in verdicts {
            match v {
                ClassVerdict::Satisfied(c) => assert_eq!(c.c, 0.0),
                ClassVerdict::Violated { .. } => panic!("zero perturbation must satisfy all"),
            }
        }
    }

    #[test]
    fn bounded_amplitude_is_c0() {
        let profile = CoefficientProfile::new(2, vec![-1.0, -1.0], vec![], vec![]).unwrap();
        let verdicts = certify_constants(
            &PerturbationKind::Bounded { gamma: 0.3 },
            &profile,
            1,
            &CertGrid::default(),
        )
        .unwrap();
        let c0 = verdicts
            .iter()
            .find(|v| v.class() == GrowthClass::Const(0))
            .unwrap()
            .constant()
            .unwrap();
        assert_eq!(c0, 0.3);
    }

    #[test]
    fn component_power_certifies_near_gamma() {
        // spec example: gamma = 0.1, m = 2 -> c0 about 0.1 by grid oracle
        let profile = CoefficientProfile::new(1, vec![], vec![-1.0], vec![2]).unwrap();
        let verdicts = certify_constants(
            &PerturbationKind::ComponentPower { gamma: 0.1 },
            &profile,
            1,
            &CertGrid::default(),
        )
        .unwrap();
        let c0 = verdicts
            .iter()
            .find(|v| v.class() == GrowthClass::CompPower(0))
            .unwrap()
            .constant()
            .unwrap();
        assert!((c0 - 0.1).abs() < 0.01, "c0 = {c0}");
    }

    #[test]
    fn bounded_fails_power_class_with_witness() {
        let profile = CoefficientProfile::new(1, vec![-1.0], vec![], vec![]).unwrap();
        let f = PerturbationKind::Bounded { gamma: 0.3 };
        let verdicts = certify_constants(&f, &profile, 1, &CertGrid::default()).unwrap();
        let v = verdicts
            .iter()
            .find(|v| v.class() == GrowthClass::CompPower(0))
            .unwrap();
        assert!(matches!(v, ClassVerdict::Violated { .. }));
    }

    #[test]
    fn certified_inequalities_hold_on_fresh_samples() {
        // fresh random points disjoint from the certification grid
        let cases = vec![
            (
                PerturbationKind::Bounded { gamma: 0.3 },
                CoefficientProfile::new(2, vec![-1.0, -2.0], vec![], vec![]).unwrap(),
            ),
            (
                PerturbationKind::LinearGrowth { gamma: 0.2 },
                CoefficientProfile::new(2, vec![-1.0, -2.0], vec![], vec![]).unwrap(),
            ),
            (
                PerturbationKind::PowerInBall {
                    gamma: 0.15,
                    power: 2,
                },
                CoefficientProfile::new(2, vec![-1.0, -2.0], vec![-1.0, -0.5], vec![2, 2])
                    .unwrap(),
            ),
            (
                PerturbationKind::ComponentPower { gamma: 0.1 },
                CoefficientProfile::new(2, vec![], vec![-1.0, -0.5], vec![2, 4]).unwrap(),
            ),
        ];
        let mut s = Sampler::new(9001);
        for (kind, profile) in cases {
            let verdicts =
                certify_constants(&kind, &profile, K_MAX, &CertGrid::default()).unwrap();
            for v in &verdicts {
                let ClassVerdict::Satisfied(cert) = v else {
                    continue;
                };
                for _ in 0..1000 {
                    let x = s.point_in_box(profile.n(), 3.0);
                    if let Some(ratio) = class_ratio(cert.class, &kind, &profile, &x) {
                        assert!(
                            ratio <= cert.c * (1.0 + 1e-9),
                            "class {} violated at {:?}: ratio {} > c {}",
                            cert.class,
                            x,
                            ratio,
                            cert.c
                        );
                    }
                }
            }
        }
    }

    fn catalog_for_tests() -> Vec<FieldSpec> {
        vec![
            build_field(&FieldConfig {
                family: FieldFamily::X1,
                n: 2,
                alpha: vec![-1.0, -2.0],
                beta: vec![],
                m: vec![],
                perturbation: PerturbationKind::Zero,
            })
            .unwrap(),
            build_field(&FieldConfig {
                family: FieldFamily::X2,
                n: 2,
                alpha: vec![],
                beta: vec![-1.0, -0.5],
                m: vec![2, 4],
                perturbation: PerturbationKind::Zero,
            })
            .unwrap(),
            build_field(&FieldConfig {
                family: FieldFamily::X3,
                n: 1,
                alpha: vec![-1.0],
                beta: vec![-1.0],
                m: vec![2],
                perturbation: PerturbationKind::Zero,
            })
            .unwrap(),
            build_field(&FieldConfig {
                family: FieldFamily::Y1,
                n: 2,
                alpha: vec![-2.0, -1.0],
                beta: vec![],
                m: vec![],
                perturbation: PerturbationKind::Bounded { gamma: 0.3 },
            })
            .unwrap(),
            build_field(&FieldConfig {
                family: FieldFamily::Y2,
                n: 2,
                alpha: vec![],
                beta: vec![-1.0, -0.5],
                m: vec![2, 2],
                perturbation: PerturbationKind::ComponentPower { gamma: 0.05 },
            })
            .unwrap(),
            build_field(&FieldConfig {
                family: FieldFamily::Y3,
                n: 2,
                alpha: vec![-1.0, -1.5],
                beta: vec![-1.0, -0.5],
                m: vec![2, 2],
                perturbation: PerturbationKind::ComponentPower { gamma: 0.05 },
            })
            .unwrap(),
        ]
    }
}
