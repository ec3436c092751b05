//! Domain types shared across the crate: instances, regularizers, hypothesis
//! classes and offline datasets.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::{Policy, Table};

/// Tolerance on user-supplied probability vectors.
pub const PROB_TOL: f64 = 1e-12;

/// Reward noise around the mean table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Noise {
    /// Rewards in `{0, 1}` with mean `r(s,a)`.
    #[default]
    Bernoulli,
    Gaussian { sigma: f64 },
}

/// Finite contextual bandit `(ρ, r, π_ref, noise)`.
///
/// Fields are public so malformed instances can be constructed and inspected
/// with [`validate_instance`]; [`BanditInstance::new`] refuses them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditInstance {
    pub num_states: usize,
    pub num_actions: usize,
    pub context_dist: Vec<f64>,
    pub mean_reward: Table,
    pub ref_policy: Table,
    #[serde(default)]
    pub noise: Noise,
}

impl BanditInstance {
    pub fn new(context_dist: Vec<f64>, mean_reward: Table, ref_policy: Table, noise: Noise) -> Result<Self> {
        let inst = Self {
            num_states: mean_reward.states(),
            num_actions: mean_reward.actions(),
            context_dist,
            mean_reward,
            ref_policy,
            noise,
        };
        inst.validated()
    }

    pub fn validated(self) -> Result<Self> {
        let violations = validate_instance(&self);
        if violations.is_empty() {
            Ok(self)
        } else {
            Err(Error::InvalidInstance(violations))
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.num_states, self.num_actions)
    }

    /// The reference (and behavior) policy.
    pub fn reference_policy(&self) -> Policy {
        Policy::from_table_unchecked(self.ref_policy.clone())
    }

    /// Same instance with a different mean reward table.
    pub fn with_reward(&self, mean_reward: Table) -> Self {
        Self {
            mean_reward,
            ..self.clone()
        }
    }
}

/// Lists every violated [`BanditInstance`] invariant; empty iff valid.
pub fn validate_instance(inst: &BanditInstance) -> Vec<String> {
    let mut out = Vec::new();
    let (s_n, a_n) = (inst.num_states, inst.num_actions);
    if s_n == 0 {
        out.push("num_states must be positive".to_string());
    }
    if a_n == 0 {
        out.push("num_actions must be positive".to_string());
    }
    if inst.context_dist.len() != s_n {
        out.push(format!(
            "context_dist has {} entries, expected {s_n}",
            inst.context_dist.len()
        ));
    } else {
        for (s, &p) in inst.context_dist.iter().enumerate() {
            if !(p >= 0.0) || !p.is_finite() {
                out.push(format!("context_dist[{s}] = {p} is negative or not finite"));
            }
        }
        let sum: f64 = inst.context_dist.iter().sum();
        if (sum - 1.0).abs() > PROB_TOL {
            out.push(format!("context_dist sums to {sum}"));
        }
    }
    if inst.mean_reward.shape() != (s_n, a_n) {
        out.push(format!(
            "mean_reward has shape {:?}, expected ({s_n}, {a_n})",
            inst.mean_reward.shape()
        ));
    } else {
        for s in 0..s_n {
            for a in 0..a_n {
                let r = inst.mean_reward.get(s, a);
                if !(0.0..=1.0).contains(&r) {
                    out.push(format!("mean_reward({s},{a}) = {r} outside [0,1]"));
                }
            }
        }
    }
    if inst.ref_policy.shape() != (s_n, a_n) {
        out.push(format!(
            "ref_policy has shape {:?}, expected ({s_n}, {a_n})",
            inst.ref_policy.shape()
        ));
    } else {
        for (s, row) in inst.ref_policy.rows().enumerate() {
            for (a, &p) in row.iter().enumerate() {
                if !(p >= 0.0) || !p.is_finite() {
                    out.push(format!("ref_policy({s},{a}) = {p} is negative or not finite"));
                }
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > PROB_TOL {
                out.push(format!("ref_policy row {s} sums to {sum}"));
            }
        }
    }
    if let Noise::Gaussian { sigma } = inst.noise {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            out.push(format!("noise sigma {sigma} must be nonnegative"));
        }
    }
    out
}

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Generator `f` of an f-divergence, with its first two derivatives.
///
/// `f` must accept `x = 0` (its right limit), which is where policies leave
/// the support of the reference.
#[derive(Clone)]
pub struct FDivergence {
    name: String,
    f: RealFn,
    f_prime: RealFn,
    f_second: RealFn,
    f_prime_inverse: Option<RealFn>,
    alpha: f64,
}

impl fmt::Debug for FDivergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FDivergence")
            .field("name", &self.name)
            .field("alpha", &self.alpha)
            .field("closed_form_inverse", &self.f_prime_inverse.is_some())
            .finish()
    }
}

impl FDivergence {
    /// User-supplied generator. `(f')⁻¹` is found by bisection when solving.
    pub fn custom(
        name: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        f_prime: impl Fn(f64) -> f64 + Send + Sync + 'static,
        f_second: impl Fn(f64) -> f64 + Send + Sync + 'static,
        alpha: f64,
    ) -> Self {
        Self {
            name: name.into(),
            f: Arc::new(f),
            f_prime: Arc::new(f_prime),
            f_second: Arc::new(f_second),
            f_prime_inverse: None,
            alpha,
        }
    }

    /// Registers a closed-form inverse of `f'`, returning values in `[0, ∞)`
    /// (zero below the range of `f'`).
    pub fn with_inverse(mut self, inv: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.f_prime_inverse = Some(Arc::new(inv));
        self
    }

    /// `f(x) = α(x−1)²/2`, the α-scaled χ² divergence.
    pub fn chi_squared(alpha: f64) -> Self {
        Self::custom(
            format!("chi2(alpha={alpha})"),
            move |x| 0.5 * alpha * (x - 1.0) * (x - 1.0),
            move |x| alpha * (x - 1.0),
            move |_| alpha,
            alpha,
        )
        .with_inverse(move |y| (1.0 + y / alpha).max(0.0))
    }

    /// `f(x) = x log x`, which yields the KL divergence. Only locally
    /// strongly convex; the recorded modulus is `f''` at the top of the
    /// convexity check grid.
    pub fn x_log_x() -> Self {
        Self::custom(
            "xlogx",
            |x| if x > 0.0 { x * x.ln() } else { 0.0 },
            |x| x.ln() + 1.0,
            |x| 1.0 / x,
            1.0 / CONVEXITY_GRID_MAX,
        )
        .with_inverse(|y| (y - 1.0).exp())
    }

    /// `f(x) = α(x−1)²/2 + x log x`; α-strongly convex with no registered
    /// inverse, so solves go through nested bisection.
    pub fn chi_squared_plus_kl(alpha: f64) -> Self {
        Self::custom(
            format!("chi2+kl(alpha={alpha})"),
            move |x| 0.5 * alpha * (x - 1.0) * (x - 1.0) + if x > 0.0 { x * x.ln() } else { 0.0 },
            move |x| alpha * (x - 1.0) + x.ln() + 1.0,
            move |x| alpha + 1.0 / x,
            alpha,
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    #[inline]
    pub fn f(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    #[inline]
    pub fn f_prime(&self, x: f64) -> f64 {
        (self.f_prime)(x)
    }

    #[inline]
    pub fn f_second(&self, x: f64) -> f64 {
        (self.f_second)(x)
    }

    pub fn closed_form_inverse(&self) -> Option<&(dyn Fn(f64) -> f64 + Send + Sync)> {
        self.f_prime_inverse.as_deref()
    }

    /// `D_f(p ‖ q) = Σ_a q(a) f(p(a)/q(a))`; `None` if `p` leaves `q`'s support.
    pub fn divergence(&self, p: &[f64], q: &[f64]) -> Option<f64> {
        let mut total = 0.0;
        for (&pa, &qa) in p.iter().zip(q) {
            if qa > 0.0 {
                total += qa * self.f(pa / qa);
            } else if pa > 0.0 {
                return None;
            }
        }
        Some(total)
    }
}

const CONVEXITY_GRID_MIN: f64 = 1e-3;
const CONVEXITY_GRID_MAX: f64 = 1e3;

/// Which divergence penalizes departures from the reference policy.
#[derive(Debug, Clone)]
pub enum Divergence {
    Kl,
    F(FDivergence),
}

/// `η` together with the divergence it scales (the objective subtracts `η⁻¹ D`).
#[derive(Debug, Clone)]
pub struct Regularizer {
    pub eta: f64,
    pub kind: Divergence,
}

impl Regularizer {
    pub fn kl(eta: f64) -> Self {
        Self { eta, kind: Divergence::Kl }
    }

    pub fn f_div(eta: f64, f: FDivergence) -> Self {
        Self { eta, kind: Divergence::F(f) }
    }

    pub fn chi_squared(eta: f64, alpha: f64) -> Self {
        Self::f_div(eta, FDivergence::chi_squared(alpha))
    }

    pub fn alpha(&self) -> Option<f64> {
        match &self.kind {
            Divergence::Kl => None,
            Divergence::F(f) => Some(f.alpha()),
        }
    }

    /// Checks `η > 0`, and for f-divergences `f(1) = 0` and `f'' ≥ α` on a
    /// log-spaced grid over `[1e-3, 1e3]`.
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::InvalidRegularizer(format!("eta = {} must be positive", self.eta)));
        }
        if let Divergence::F(f) = &self.kind {
            if !(f.alpha() > 0.0) {
                return Err(Error::InvalidRegularizer(format!("alpha = {} must be positive", f.alpha())));
            }
            let at_one = f.f(1.0);
            if at_one.abs() > 1e-12 {
                return Err(Error::InvalidRegularizer(format!("f(1) = {at_one}, expected 0")));
            }
            let steps = 400;
            let (lo, hi) = (CONVEXITY_GRID_MIN.ln(), CONVEXITY_GRID_MAX.ln());
            for i in 0..=steps {
                let x = (lo + (hi - lo) * i as f64 / steps as f64).exp();
                let curv = f.f_second(x);
                if curv < f.alpha() * (1.0 - 1e-12) {
                    return Err(Error::InvalidRegularizer(format!(
                        "f''({x}) = {curv} below alpha = {}",
                        f.alpha()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Finite hypothesis class of reward tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionClass {
    pub members: Vec<Table>,
    #[serde(default)]
    pub realizable_index: Option<usize>,
}

impl FunctionClass {
    pub fn new(members: Vec<Table>, realizable_index: Option<usize>) -> Result<Self> {
        let class = Self { members, realizable_index };
        class.check()?;
        Ok(class)
    }

    pub fn singleton(member: Table) -> Self {
        Self {
            members: vec![member],
            realizable_index: Some(0),
        }
    }

    fn check(&self) -> Result<()> {
        let first = self.members.first().ok_or(Error::EmptyClass)?;
        for (i, m) in self.members.iter().enumerate() {
            if m.shape() != first.shape() {
                return Err(Error::InvalidClass(format!(
                    "member {i} has shape {:?}, expected {:?}",
                    m.shape(),
                    first.shape()
                )));
            }
            if let Some(x) = m.as_slice().iter().find(|x| !(0.0..=1.0).contains(*x)) {
                return Err(Error::InvalidClass(format!("member {i} has entry {x} outside [0,1]")));
            }
        }
        if let Some(k) = self.realizable_index {
            if k >= self.members.len() {
                return Err(Error::InvalidClass(format!("realizable index {k} out of range")));
            }
        }
        Ok(())
    }

    /// Checks shape compatibility with `inst` and, when a realizable index is
    /// set, exact equality of that member with the instance's mean reward.
    pub fn validate_against(&self, inst: &BanditInstance) -> Result<()> {
        self.check()?;
        if self.members[0].shape() != inst.shape() {
            return Err(Error::InvalidClass(format!(
                "class shape {:?} does not match instance {:?}",
                self.members[0].shape(),
                inst.shape()
            )));
        }
        if let Some(k) = self.realizable_index {
            if self.members[k] != inst.mean_reward {
                return Err(Error::InvalidClass(format!(
                    "member {k} is not the instance's mean reward"
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.members.first().map(Table::shape).unwrap_or((0, 0))
    }

    pub fn member(&self, i: usize) -> &Table {
        &self.members[i]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Table> {
        self.members.iter()
    }

    pub fn truth(&self) -> Option<&Table> {
        self.realizable_index.map(|k| &self.members[k])
    }
}

/// One absolute-feedback sample `(s, a, r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BanditSample {
    #[serde(rename = "s")]
    pub state: usize,
    #[serde(rename = "a")]
    pub action: usize,
    #[serde(rename = "r")]
    pub reward: f64,
}

/// One preference sample `(s, a¹, a², y)`; `y = 1` means `a¹ ≻ a²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferenceSample {
    #[serde(rename = "s")]
    pub state: usize,
    #[serde(rename = "a1")]
    pub action1: usize,
    #[serde(rename = "a2")]
    pub action2: usize,
    #[serde(rename = "y")]
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Dataset {
    pub rows: Vec<BanditSample>,
}

impl Dataset {
    pub fn new(rows: Vec<BanditSample>) -> Self {
        Self { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn validate(&self, states: usize, actions: usize) -> Result<()> {
        for (i, row) in self.rows.iter().enumerate() {
            if row.state >= states || row.action >= actions {
                return Err(Error::IndexOutOfRange(format!(
                    "row {i}: ({}, {}) outside {states}×{actions}",
                    row.state, row.action
                )));
            }
            if !row.reward.is_finite() {
                return Err(Error::InvalidParameter(format!("row {i}: reward is not finite")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PreferenceDataset {
    pub rows: Vec<PreferenceSample>,
}

impl PreferenceDataset {
    pub fn new(rows: Vec<PreferenceSample>) -> Self {
        Self { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn validate(&self, states: usize, actions: usize) -> Result<()> {
        for (i, row) in self.rows.iter().enumerate() {
            if row.state >= states || row.action1 >= actions || row.action2 >= actions {
                return Err(Error::IndexOutOfRange(format!(
                    "row {i}: ({}, {}, {}) outside {states}×{actions}",
                    row.state, row.action1, row.action2
                )));
            }
            if row.label > 1 {
                return Err(Error::InvalidParameter(format!("row {i}: label {} not in {{0,1}}", row.label)));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_instance() -> BanditInstance {
        BanditInstance {
            num_states: 2,
            num_actions: 2,
            context_dist: vec![0.5, 0.5],
            mean_reward: Table::filled(2, 2, 0.5),
            ref_policy: Table::filled(2, 2, 0.5),
            noise: Noise::Bernoulli,
        }
    }

    #[test]
    fn well_formed_instance_has_no_violations() {
        assert!(validate_instance(&uniform_instance()).is_empty());
    }

    #[test]
    fn context_sum_violation_is_reported_once() {
        let mut inst = uniform_instance();
        inst.context_dist = vec![0.6, 0.6];
        let v = validate_instance(&inst);
        assert_eq!(v, vec!["context_dist sums to 1.2".to_string()]);
    }

    #[test]
    fn reward_range_violation_names_the_cell() {
        let mut inst = uniform_instance();
        inst.mean_reward.set(1, 0, 1.5);
        let v = validate_instance(&inst);
        assert_eq!(v.len(), 1);
        assert!(v[0].contains("(1,0)"), "{v:?}");
    }

    #[test]
    fn ref_row_violation() {
        let mut inst = uniform_instance();
        inst.ref_policy.set(0, 0, 0.7);
        let v = validate_instance(&inst);
        assert_eq!(v.len(), 1);
        assert!(v[0].contains("row 0"));
    }

    #[test]
    fn instance_json_uses_documented_keys() {
        let inst = BanditInstance {
            noise: Noise::Gaussian { sigma: 0.5 },
            ..uniform_instance()
        };
        let v: serde_json::Value = serde_json::to_value(&inst).unwrap();
        for key in ["num_states", "num_actions", "context_dist", "mean_reward", "ref_policy", "noise"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["noise"]["kind"], "gaussian");
        assert_eq!(v["noise"]["sigma"], 0.5);
        assert_eq!(v["mean_reward"][1][0], 0.5);
        let back: BanditInstance = serde_json::from_value(v).unwrap();
        assert_eq!(back, inst);
    }

    #[test]
    fn regularizer_checks() {
        assert!(Regularizer::chi_squared(2.0, 1.0).validate().is_ok());
        assert!(Regularizer::chi_squared(0.0, 1.0).validate().is_err());
        assert!(Regularizer::kl(1.0).validate().is_ok());
        assert!(Regularizer::f_div(1.0, FDivergence::chi_squared_plus_kl(0.5)).validate().is_ok());
        assert!(Regularizer::f_div(1.0, FDivergence::x_log_x()).validate().is_ok());
        let shifted = FDivergence::custom("bad", |x| (x - 1.0).powi(2) + 1.0, |x| 2.0 * (x - 1.0), |_| 2.0, 2.0);
        assert!(Regularizer::f_div(1.0, shifted).validate().is_err());
        let weak = FDivergence::custom("weak", |x| (x - 1.0).powi(2), |x| 2.0 * (x - 1.0), |_| 2.0, 3.0);
        assert!(Regularizer::f_div(1.0, weak).validate().is_err());
    }

    #[test]
    fn class_realizability_is_exact() {
        let inst = uniform_instance();
        let mut other = inst.mean_reward.clone();
        other.set(0, 0, 0.5 + 1e-15);
        let class = FunctionClass::new(vec![other, inst.mean_reward.clone()], Some(0)).unwrap();
        assert!(class.validate_against(&inst).is_err());
        let class = FunctionClass::new(class.members, Some(1)).unwrap();
        assert!(class.validate_against(&inst).is_ok());
        assert!(FunctionClass::new(vec![], None).is_err());
    }
}
