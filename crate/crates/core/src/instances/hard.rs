//! Lower-bound instance families over two actions `{−1, +1}` (indices 0, 1).

use serde::{Deserialize, Serialize};

use super::gv::{gv_code, hamming, SignVector};
use crate::error::{Error, Result};
use crate::model::{BanditInstance, FunctionClass, Noise, Regularizer};
use crate::table::Table;

/// Largest `S` for which all `2^S` sign vectors are materialized.
pub const MAX_SIGN_STATES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    KlBandit,
    Chi2Bandit,
    KlDueling,
    Chi2Dueling,
}

impl FamilyKind {
    pub fn is_dueling(self) -> bool {
        matches!(self, Self::KlDueling | Self::Chi2Dueling)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyParams {
    pub c_star: Option<f64>,
    pub eta: f64,
    pub alpha: Option<f64>,
    pub delta: f64,
    pub n_target: usize,
}

/// Instances indexed by sign vectors (or codewords) sharing `S`, `A`, `ρ`, `π_ref`.
#[derive(Debug, Clone, PartialEq)]
pub struct HardFamily {
    pub kind: FamilyKind,
    pub labels: Vec<SignVector>,
    pub instances: Vec<BanditInstance>,
    pub shared_function_class: FunctionClass,
    pub params: FamilyParams,
}

impl HardFamily {
    fn assemble(
        kind: FamilyKind,
        labels: Vec<SignVector>,
        reference: [f64; 2],
        reward: impl Fn(&[i8], usize) -> [f64; 2],
        params: FamilyParams,
    ) -> Result<Self> {
        let s = labels[0].len();
        let rho = vec![1.0 / s as f64; s];
        let ref_policy = Table::from_fn(s, 2, |_, a| reference[a]);
        let instances = labels
            .iter()
            .map(|tau| {
                let mean = Table::from_fn(s, 2, |state, a| reward(tau, state)[a]);
                BanditInstance::new(rho.clone(), mean, ref_policy.clone(), Noise::Bernoulli)
            })
            .collect::<Result<Vec<_>>>()?;
        let shared_function_class = FunctionClass::new(instances.iter().map(|i| i.mean_reward.clone()).collect(), None)?;
        Ok(Self { kind, labels, instances, shared_function_class, params })
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// The family's regularizer: KL, or χ² with the recorded `α`.
    pub fn regularizer(&self) -> Regularizer {
        match self.params.alpha {
            Some(alpha) if matches!(self.kind, FamilyKind::Chi2Bandit | FamilyKind::Chi2Dueling) => {
                Regularizer::chi_squared(self.params.eta, alpha)
            }
            _ => Regularizer::kl(self.params.eta),
        }
    }

    /// Pairs `(i, j, s)` with `i < j` whose labels differ only at state `s`.
    pub fn adjacent_pairs(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.labels.len() {
            for j in i + 1..self.labels.len() {
                if hamming(&self.labels[i], &self.labels[j]) == 1 {
                    let s = (0..self.labels[i].len())
                        .find(|&s| self.labels[i][s] != self.labels[j][s])
                        .unwrap_or(0);
                    out.push((i, j, s));
                }
            }
        }
        out
    }
}

/// All of `{±1}^S` in lexicographic order, `+1` first.
pub fn sign_vectors(s: usize) -> Vec<SignVector> {
    (0..1usize << s)
        .map(|i| (0..s).map(|k| if (i >> (s - 1 - k)) & 1 == 1 { -1 } else { 1 }).collect())
        .collect()
}

fn require(cond: bool, what: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter(what()))
    }
}

fn check_states(s: usize) -> Result<()> {
    require((1..=MAX_SIGN_STATES).contains(&s), || {
        format!("S = {s} must lie in [1, {MAX_SIGN_STATES}] for a sign-vector family")
    })
}

/// KL family: `π_ref(−1|s) = 1/C`, `r_τ(s,−1) = ½ + τ_s δ`, `r_τ(s,+1) = ½ − α`
/// with `C − 1 = e^{ηα}` and `δ = √(S·C/n)`.
pub fn kl_hard_family(s: usize, c_star: f64, eta: f64, n_target: usize) -> Result<HardFamily> {
    kl_family(FamilyKind::KlBandit, s, c_star, eta, n_target)
}

fn kl_family(kind: FamilyKind, s: usize, c_star: f64, eta: f64, n_target: usize) -> Result<HardFamily> {
    check_states(s)?;
    require(eta > 4.0 * std::f64::consts::LN_2, || format!("eta = {eta} must exceed 4·ln 2"))?;
    require(c_star > 2.0 && c_star <= (eta / 4.0).exp(), || {
        format!("C* = {c_star} must lie in (2, exp(eta/4)] = (2, {}]", (eta / 4.0).exp())
    })?;
    require(n_target as f64 >= 16.0 * s as f64 * c_star, || {
        format!("n_target = {n_target} must be at least 16·S·C* = {}", 16.0 * s as f64 * c_star)
    })?;
    let alpha = (c_star - 1.0).ln() / eta;
    let delta = (s as f64 * c_star / n_target as f64).sqrt();
    let params = FamilyParams { c_star: Some(c_star), eta, alpha: Some(alpha), delta, n_target };
    HardFamily::assemble(
        kind,
        sign_vectors(s),
        [1.0 / c_star, 1.0 - 1.0 / c_star],
        |tau, state| [0.5 + tau[state] as f64 * delta, 0.5 - alpha],
        params,
    )
}

/// χ² family over a greedy code: `r_v(s,−1) = ½ + v_s δ`, `r_v(s,+1) = ½ − v_s δ`,
/// uniform reference and `δ = 16√(α/(ηn))`.
pub fn chi2_hard_family(s: usize, alpha: f64, eta: f64, n_target: usize) -> Result<HardFamily> {
    require(s as f64 >= 32.0 * std::f64::consts::LN_2, || format!("S = {s} must be at least 32·ln 2"))?;
    require(alpha > 0.0 && eta > 0.0, || "alpha and eta must be positive".into())?;
    let floor = s as f64 * f64::max(16.0, (eta / alpha).powi(2));
    require(n_target as f64 >= floor, || format!("n_target = {n_target} must be at least S·max(16, η²/α²) = {floor}"))?;
    let delta = 16.0 * (alpha / (eta * n_target as f64)).sqrt();
    require(delta <= 0.5, || format!("gap delta = {delta} puts mean rewards outside [0,1]"))?;
    let labels = gv_code(s)?;
    let params = FamilyParams { c_star: None, eta, alpha: Some(alpha), delta, n_target };
    HardFamily::assemble(
        FamilyKind::Chi2Bandit,
        labels,
        [0.5, 0.5],
        |v, state| [0.5 + v[state] as f64 * delta, 0.5 - v[state] as f64 * delta],
        params,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DuelingKind {
    Kl,
    Chi2,
}

/// Preference-feedback families. `Kl` reuses [`kl_hard_family`]'s tables;
/// `Chi2` sets `r_τ(s,a) = ½ + a τ_s δ` with `δ = √(S/n) ≤ ¼`.
pub fn dueling_hard_family(
    s: usize,
    c_star: f64,
    eta: f64,
    n_target: usize,
    kind: DuelingKind,
    alpha: Option<f64>,
) -> Result<HardFamily> {
    match kind {
        DuelingKind::Kl => kl_family(FamilyKind::KlDueling, s, c_star, eta, n_target),
        DuelingKind::Chi2 => {
            check_states(s)?;
            let alpha = alpha.ok_or_else(|| Error::InvalidParameter("chi2 dueling family needs alpha".into()))?;
            require(alpha > 0.0 && eta > 0.0, || "alpha and eta must be positive".into())?;
            let floor = s as f64 * f64::max(16.0, (eta / alpha).powi(2));
            require(n_target as f64 >= floor, || {
                format!("n_target = {n_target} must be at least S·max(16, η²/α²) = {floor}")
            })?;
            let delta = (s as f64 / n_target as f64).sqrt();
            require(delta <= 0.25, || format!("delta = {delta} exceeds 1/4"))?;
            let params = FamilyParams { c_star: None, eta, alpha: Some(alpha), delta, n_target };
            // action −1 is index 0
            HardFamily::assemble(
                FamilyKind::Chi2Dueling,
                sign_vectors(s),
                [0.5, 0.5],
                |tau, state| {
                    let t = tau[state] as f64;
                    [0.5 - t * delta, 0.5 + t * delta]
                },
                params,
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kl_family_parameters() {
        let fam = kl_hard_family(1, 4.0, 8.0, 64).unwrap();
        let alpha = fam.params.alpha.unwrap();
        assert!((alpha - 3f64.ln() / 8.0).abs() < 1e-15);
        assert!((alpha - 0.1373).abs() < 1e-4);
        assert_eq!(fam.instances[0].ref_policy.get(0, 0), 0.25);
        assert_eq!(fam.len(), 2);
        assert!(fam.params.delta <= 0.25);
    }

    #[test]
    fn kl_family_rejects_bad_ranges() {
        assert!(kl_hard_family(2, 2.0, 8.0, 512).is_err());
        assert!(kl_hard_family(2, 8.0, 8.0, 512).is_err());
        assert!(kl_hard_family(2, 4.0, 2.0, 512).is_err());
        assert!(kl_hard_family(2, 4.0, 8.0, 100).is_err());
    }

    #[test]
    fn chi2_family_rejects_invalid_means() {
        let err = chi2_hard_family(32, 1.0, 1.0, 512).unwrap_err();
        assert!(err.to_string().contains("outside [0,1]"), "{err}");
    }

    #[test]
    fn adjacent_pairs_differ_in_one_state() {
        let fam = kl_hard_family(3, 4.0, 8.0, 512).unwrap();
        let pairs = fam.adjacent_pairs();
        assert_eq!(pairs.len(), 3 * 4);
        for (i, j, s) in pairs {
            assert_ne!(fam.labels[i][s], fam.labels[j][s]);
        }
    }

    #[test]
    fn chi2_dueling_gap() {
        let fam = dueling_hard_family(2, 0.0, 1.0, 64, DuelingKind::Chi2, Some(1.0)).unwrap();
        assert!((fam.params.delta - 0.176_776_695_296_636_9).abs() < 1e-15);
        assert!(dueling_hard_family(2, 0.0, 1.0, 16, DuelingKind::Chi2, Some(1.0)).is_err());
    }
}
