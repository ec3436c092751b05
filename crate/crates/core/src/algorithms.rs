//! End-to-end offline learners: estimate a reward member, optionally subtract
//! a pessimism bonus, then solve the regularized policy problem.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{fit_least_squares, fit_mle_bt};
use crate::model::{Dataset, Divergence, FunctionClass, PreferenceDataset, Regularizer};
use crate::solvers::{f_dual_policy, kl_softmax_policy, DualSolveReport};
use crate::table::{Policy, Table};
use crate::uncertainty::{beta_radius, bonus_table, cached_covering_number, Variant};

/// Confidence level used when none is given.
pub const DEFAULT_DELTA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    KlPcb,
    FCb,
    KlPcdb,
    FCdb,
    LsSoftmaxBaseline,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [Self::KlPcb, Self::FCb, Self::KlPcdb, Self::FCdb, Self::LsSoftmaxBaseline];

    pub fn name(self) -> &'static str {
        match self {
            Self::KlPcb => "kl_pcb",
            Self::FCb => "f_cb",
            Self::KlPcdb => "kl_pcdb",
            Self::FCdb => "f_cdb",
            Self::LsSoftmaxBaseline => "ls_softmax_baseline",
        }
    }

    /// Learns from preference labels rather than rewards.
    pub fn is_dueling(self) -> bool {
        matches!(self, Self::KlPcdb | Self::FCdb)
    }

    /// Uses an f-divergence regularizer rather than KL.
    pub fn uses_f_divergence(self) -> bool {
        matches!(self, Self::FCb | Self::FCdb)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown algorithm `{s}`")))
    }
}

/// How the pessimism bonus is sized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pessimism {
    /// `β = beta_radius(n, δ, 1/n, N_F(1/n))`.
    Confidence { delta: f64 },
    /// `Γ ≡ 0`.
    Off,
}

/// Offline data of either feedback type.
#[derive(Debug, Clone, PartialEq)]
pub enum OfflineData {
    Rewards(Dataset),
    Preferences(PreferenceDataset),
}

impl OfflineData {
    pub fn len(&self) -> usize {
        match self {
            Self::Rewards(d) => d.len(),
            Self::Preferences(d) => d.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    /// Index of the fitted member.
    pub estimator_index: usize,
    /// Achieved SSE or negative log-likelihood.
    pub loss: f64,
    pub beta: Option<f64>,
    pub cover_n: Option<usize>,
    /// Whether the confidence event held; known only when the class has a
    /// realizable index.
    pub event_e: Option<bool>,
    /// Per-state bias aligning the preference estimate to the truth.
    pub bias: Option<Vec<f64>>,
    pub bonus: Option<Table>,
    /// The reward table handed to the policy solver.
    pub f_pess: Table,
    pub dual: Vec<DualSolveReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgoOutput {
    pub policy: Policy,
    pub diagnostics: Diagnostics,
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("delta = {delta} outside (0,1)")))
    }
}

fn check_shapes(class: &FunctionClass, pi_ref: &Policy, rho: &[f64]) -> Result<()> {
    if class.is_empty() {
        return Err(Error::EmptyClass);
    }
    if class.shape() != pi_ref.shape() || rho.len() != pi_ref.states() {
        return Err(Error::Shape(format!(
            "class {:?}, reference {:?}, context distribution of length {}",
            class.shape(),
            pi_ref.shape(),
            rho.len()
        )));
    }
    Ok(())
}

struct Pessimistic {
    f_pess: Table,
    bonus: Option<Table>,
    beta: Option<f64>,
    cover_n: Option<usize>,
}

fn pessimize(
    class: &FunctionClass,
    estimate: &Table,
    pi_ref: &Policy,
    rho: &[f64],
    n: usize,
    pessimism: Pessimism,
    variant: Variant,
) -> Result<Pessimistic> {
    let Pessimism::Confidence { delta } = pessimism else {
        return Ok(Pessimistic { f_pess: estimate.clone(), bonus: None, beta: None, cover_n: None });
    };
    check_delta(delta)?;
    let eps_c = 1.0 / n as f64;
    let cover_n = cached_covering_number(class, eps_c);
    let beta = beta_radius(n, delta, eps_c, cover_n);
    let bonus = bonus_table(class, pi_ref, rho, beta, variant).values;
    let (states, actions) = bonus.shape();
    for s in 0..states {
        for a in 0..actions {
            if pi_ref.prob(s, a) > 0.0 && bonus.get(s, a).is_infinite() {
                return Err(Error::NotCovered { state: s, action: a });
            }
        }
    }
    Ok(Pessimistic { f_pess: estimate.sub(&bonus), bonus: Some(bonus), beta: Some(beta), cover_n: Some(cover_n) })
}

/// `g* ∈ [f_pess, f_pess + 2Γ]` everywhere, i.e. `|ĝ − g*| ≤ Γ`.
fn bandit_event(truth: &Table, estimate: &Table, bonus: &Table) -> bool {
    (0..truth.states()).all(|s| {
        (0..truth.actions()).all(|a| {
            let (g, t, b) = (estimate.get(s, a), truth.get(s, a), bonus.get(s, a));
            g - b <= t && t <= g + b
        })
    })
}

/// Per state, the feasible biases `b ∈ [−1,1]` with `|ĝ − g* − b| ≤ Γ` form
/// the interval `[max_a(d − Γ), min_a(d + Γ)] ∩ [−1,1]`, `d = ĝ − g*`.
/// Returns its midpoint per state and whether every interval is non-empty.
pub fn dueling_bias(truth: &Table, estimate: &Table, bonus: &Table) -> (Vec<f64>, bool) {
    let mut held = true;
    let bias = (0..truth.states())
        .map(|s| {
            let (mut lo, mut hi) = (-1.0f64, 1.0f64);
            for a in 0..truth.actions() {
                let d = estimate.get(s, a) - truth.get(s, a);
                lo = lo.max(d - bonus.get(s, a));
                hi = hi.min(d + bonus.get(s, a));
            }
            if lo > hi {
                held = false;
            }
            0.5 * (lo + hi)
        })
        .collect();
    (bias, held)
}

/// KL-regularized pessimistic learner from reward feedback.
pub fn run_kl_pcb(
    class: &FunctionClass,
    data: &Dataset,
    pi_ref: &Policy,
    rho: &[f64],
    eta: f64,
    delta: f64,
) -> Result<AlgoOutput> {
    run_kl_pcb_with(class, data, pi_ref, rho, eta, Pessimism::Confidence { delta })
}

/// Least squares followed by the KL softmax, with no bonus.
pub fn run_ls_softmax(class: &FunctionClass, data: &Dataset, pi_ref: &Policy, rho: &[f64], eta: f64) -> Result<AlgoOutput> {
    run_kl_pcb_with(class, data, pi_ref, rho, eta, Pessimism::Off)
}

pub fn run_kl_pcb_with(
    class: &FunctionClass,
    data: &Dataset,
    pi_ref: &Policy,
    rho: &[f64],
    eta: f64,
    pessimism: Pessimism,
) -> Result<AlgoOutput> {
    check_shapes(class, pi_ref, rho)?;
    let fit = fit_least_squares(class, data)?;
    let estimate = class.member(fit.index);
    let p = pessimize(class, estimate, pi_ref, rho, data.len(), pessimism, Variant::Bandit)?;
    let event_e = class.truth().map(|truth| match &p.bonus {
        Some(bonus) => bandit_event(truth, estimate, bonus),
        None => estimate == truth,
    });
    let policy = kl_softmax_policy(&p.f_pess, pi_ref, eta);
    Ok(AlgoOutput {
        policy,
        diagnostics: Diagnostics {
            estimator_index: fit.index,
            loss: fit.sse,
            beta: p.beta,
            cover_n: p.cover_n,
            event_e,
            bias: None,
            bonus: p.bonus,
            f_pess: p.f_pess,
            dual: Vec::new(),
        },
    })
}

/// Least squares followed by the f-regularized dual solve.
pub fn run_f_cb(class: &FunctionClass, data: &Dataset, pi_ref: &Policy, rho: &[f64], reg: &Regularizer) -> Result<AlgoOutput> {
    check_shapes(class, pi_ref, rho)?;
    let fit = fit_least_squares(class, data)?;
    let estimate = class.member(fit.index).clone();
    let (policy, dual) = f_dual_policy(&estimate, pi_ref, reg)?;
    Ok(AlgoOutput {
        policy,
        diagnostics: Diagnostics {
            estimator_index: fit.index,
            loss: fit.sse,
            beta: None,
            cover_n: None,
            event_e: None,
            bias: None,
            bonus: None,
            f_pess: estimate,
            dual,
        },
    })
}

/// KL-regularized pessimistic learner from Bradley–Terry preference labels.
pub fn run_kl_pcdb(
    class: &FunctionClass,
    data: &PreferenceDataset,
    pi_ref: &Policy,
    rho: &[f64],
    eta: f64,
    delta: f64,
) -> Result<AlgoOutput> {
    run_kl_pcdb_with(class, data, pi_ref, rho, eta, Pessimism::Confidence { delta })
}

pub fn run_kl_pcdb_with(
    class: &FunctionClass,
    data: &PreferenceDataset,
    pi_ref: &Policy,
    rho: &[f64],
    eta: f64,
    pessimism: Pessimism,
) -> Result<AlgoOutput> {
    check_shapes(class, pi_ref, rho)?;
    let fit = fit_mle_bt(class, data)?;
    let estimate = class.member(fit.index);
    let p = pessimize(class, estimate, pi_ref, rho, data.len(), pessimism, Variant::Dueling)?;
    let zeros = Table::zeros(estimate.states(), estimate.actions());
    let (bias, event_e) = match class.truth() {
        Some(truth) => {
            let (bias, held) = dueling_bias(truth, estimate, p.bonus.as_ref().unwrap_or(&zeros));
            (Some(bias), Some(held))
        }
        None => (None, None),
    };
    let policy = kl_softmax_policy(&p.f_pess, pi_ref, eta);
    Ok(AlgoOutput {
        policy,
        diagnostics: Diagnostics {
            estimator_index: fit.index,
            loss: fit.nll,
            beta: p.beta,
            cover_n: p.cover_n,
            event_e,
            bias,
            bonus: p.bonus,
            f_pess: p.f_pess,
            dual: Vec::new(),
        },
    })
}

/// Bradley–Terry MLE followed by the f-regularized dual solve.
pub fn run_f_cdb(
    class: &FunctionClass,
    data: &PreferenceDataset,
    pi_ref: &Policy,
    rho: &[f64],
    reg: &Regularizer,
) -> Result<AlgoOutput> {
    check_shapes(class, pi_ref, rho)?;
    let fit = fit_mle_bt(class, data)?;
    let estimate = class.member(fit.index).clone();
    let (policy, dual) = f_dual_policy(&estimate, pi_ref, reg)?;
    Ok(AlgoOutput {
        policy,
        diagnostics: Diagnostics {
            estimator_index: fit.index,
            loss: fit.nll,
            beta: None,
            cover_n: None,
            event_e: None,
            bias: None,
            bonus: None,
            f_pess: estimate,
            dual,
        },
    })
}

/// Runs `algo` on matching data. KL learners require a KL regularizer and
/// f learners an f-divergence one.
pub fn run_algorithm(
    algo: Algorithm,
    class: &FunctionClass,
    data: &OfflineData,
    pi_ref: &Policy,
    rho: &[f64],
    reg: &Regularizer,
    delta: f64,
) -> Result<AlgoOutput> {
    let is_kl = matches!(reg.kind, Divergence::Kl);
    if is_kl == algo.uses_f_divergence() {
        return Err(Error::InvalidParameter(format!(
            "{algo} needs a {} regularizer",
            if is_kl { "f-divergence" } else { "KL" }
        )));
    }
    match (algo, data) {
        (Algorithm::KlPcb, OfflineData::Rewards(d)) => run_kl_pcb(class, d, pi_ref, rho, reg.eta, delta),
        (Algorithm::LsSoftmaxBaseline, OfflineData::Rewards(d)) => run_ls_softmax(class, d, pi_ref, rho, reg.eta),
        (Algorithm::FCb, OfflineData::Rewards(d)) => run_f_cb(class, d, pi_ref, rho, reg),
        (Algorithm::KlPcdb, OfflineData::Preferences(d)) => run_kl_pcdb(class, d, pi_ref, rho, reg.eta, delta),
        (Algorithm::FCdb, OfflineData::Preferences(d)) => run_f_cdb(class, d, pi_ref, rho, reg),
        _ => Err(Error::InvalidParameter(format!("{algo} does not accept this feedback type"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::optimal_policy;
    use crate::instances::{sample_bandit_data, sample_preference_data, ScenarioSpec};
    use crate::rng::RngSeed;

    fn assert_close(p: &Policy, q: &Policy, tol: f64) {
        let d = p.table().max_abs_diff(q.table());
        assert!(d <= tol, "policies differ by {d}");
    }

    #[test]
    fn singleton_class_recovers_optimum() {
        let sc = ScenarioSpec::Ladder.build().unwrap();
        let inst = sc.instance;
        let class = FunctionClass::singleton(inst.mean_reward.clone());
        let pi_ref = inst.reference_policy();
        let data = sample_bandit_data(&inst, 50, RngSeed(1)).unwrap();
        let out = run_kl_pcb(&class, &data, &pi_ref, &inst.context_dist, 2.0, 0.05).unwrap();
        assert_close(&out.policy, &optimal_policy(&inst, &Regularizer::kl(2.0)).unwrap(), 1e-14);
        assert_eq!(out.diagnostics.event_e, Some(true));

        let reg = Regularizer::chi_squared(2.0, 1.0);
        let out = run_f_cb(&class, &data, &pi_ref, &inst.context_dist, &reg).unwrap();
        assert_close(&out.policy, &optimal_policy(&inst, &reg).unwrap(), 1e-10);

        let prefs = sample_preference_data(&inst, 50, RngSeed(2)).unwrap();
        let out = run_kl_pcdb(&class, &prefs, &pi_ref, &inst.context_dist, 2.0, 0.05).unwrap();
        assert_close(&out.policy, &optimal_policy(&inst, &Regularizer::kl(2.0)).unwrap(), 1e-14);
        let out = run_f_cdb(&class, &prefs, &pi_ref, &inst.context_dist, &reg).unwrap();
        assert_close(&out.policy, &optimal_policy(&inst, &reg).unwrap(), 1e-10);
    }

    #[test]
    fn pessimism_off_is_plain_softmax() {
        let sc = ScenarioSpec::Ladder.build().unwrap();
        let pi_ref = sc.instance.reference_policy();
        let data = sample_bandit_data(&sc.instance, 200, RngSeed(3)).unwrap();
        let out = run_ls_softmax(&sc.class, &data, &pi_ref, &sc.instance.context_dist, 1.5).unwrap();
        let fit = fit_least_squares(&sc.class, &data).unwrap();
        assert_eq!(out.policy, kl_softmax_policy(sc.class.member(fit.index), &pi_ref, 1.5));
    }

    #[test]
    fn event_implies_pessimistic_rewards() {
        let sc = ScenarioSpec::Ladder.build().unwrap();
        let pi_ref = sc.instance.reference_policy();
        let truth = &sc.instance.mean_reward;
        for seed in 0..20 {
            let data = sample_bandit_data(&sc.instance, 256, RngSeed(seed)).unwrap();
            let out = run_kl_pcb(&sc.class, &data, &pi_ref, &sc.instance.context_dist, 1.0, 0.05).unwrap();
            if out.diagnostics.event_e == Some(true) {
                for (f, t) in out.diagnostics.f_pess.as_slice().iter().zip(truth.as_slice()) {
                    assert!(f <= t);
                }
            }
        }
    }

    #[test]
    fn dueling_bias_midpoint() {
        let truth = Table::from_rows(vec![vec![0.5, 0.2]]).unwrap();
        let est = Table::from_rows(vec![vec![0.7, 0.5]]).unwrap();
        let bonus = Table::filled(1, 2, 0.1);
        let (b, held) = dueling_bias(&truth, &est, &bonus);
        assert!(held);
        assert!((b[0] - 0.25).abs() < 1e-12);
        let (_, held) = dueling_bias(&truth, &est, &Table::zeros(1, 2));
        assert!(!held);
    }

    #[test]
    fn mismatched_regularizer_is_rejected() {
        let sc = ScenarioSpec::Ladder.build().unwrap();
        let data = OfflineData::Rewards(sample_bandit_data(&sc.instance, 10, RngSeed(0)).unwrap());
        let pi_ref = sc.instance.reference_policy();
        let rho = &sc.instance.context_dist;
        assert!(run_algorithm(Algorithm::FCb, &sc.class, &data, &pi_ref, rho, &Regularizer::kl(1.0), 0.05).is_err());
        assert!(run_algorithm(Algorithm::KlPcdb, &sc.class, &data, &pi_ref, rho, &Regularizer::kl(1.0), 0.05).is_err());
        assert!(run_algorithm(Algorithm::KlPcb, &sc.class, &data, &pi_ref, rho, &Regularizer::kl(1.0), 1.0).is_err());
    }

    #[test]
    fn algorithm_names_round_trip() {
        for algo in Algorithm::ALL {
            assert_eq!(algo.name().parse::<Algorithm>().unwrap(), algo);
        }
    }
}
