//! Exact finite-sum evaluation of regularized objectives and diagnostics.

use crate::error::{Error, Result};
use crate::model::{BanditInstance, Divergence, Regularizer};
use crate::solvers::{f_dual_policy, kl_softmax_policy};
use crate::table::{Policy, Table};

const FLOOR_TOL: f64 = 1e-12;

/// `KL(p ‖ q)` with `0·log 0 = 0`; `Err(a)` names the first action leaving
/// `q`'s support.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> std::result::Result<f64, usize> {
    let mut total = 0.0;
    for (a, (&pa, &qa)) in p.iter().zip(q).enumerate() {
        if pa > 0.0 {
            if qa <= 0.0 {
                return Err(a);
            }
            total += pa * (pa / qa).ln();
        }
    }
    Ok(total)
}

/// Divergence of one row from the reference row under `reg`.
fn row_divergence(reg: &Regularizer, p: &[f64], q: &[f64], state: usize) -> Result<f64> {
    let violation = |action| Error::SupportViolation { state, action };
    match &reg.kind {
        Divergence::Kl => kl_divergence(p, q).map_err(violation),
        Divergence::F(f) => f.divergence(p, q).ok_or_else(|| {
            violation(p.iter().zip(q).position(|(&pa, &qa)| pa > 0.0 && qa <= 0.0).unwrap_or(0))
        }),
    }
}

/// Per-state objective `⟨π(·|s), r(s,·)⟩ − η⁻¹ D(π(·|s) ‖ π_ref(·|s))`.
pub fn state_objectives(inst: &BanditInstance, reg: &Regularizer, pi: &Policy) -> Result<Vec<f64>> {
    check_shape(inst, pi)?;
    (0..inst.num_states)
        .map(|s| {
            let p = pi.row(s);
            let reward: f64 = p.iter().zip(inst.mean_reward.row(s)).map(|(x, r)| x * r).sum();
            let div = row_divergence(reg, p, inst.ref_policy.row(s), s)?;
            Ok(reward - div / reg.eta)
        })
        .collect()
}

fn check_shape(inst: &BanditInstance, pi: &Policy) -> Result<()> {
    if pi.shape() != inst.shape() {
        return Err(Error::Shape(format!(
            "policy {:?} vs instance {:?}",
            pi.shape(),
            inst.shape()
        )));
    }
    Ok(())
}

/// `J(π) = E_{ρ×π}[r] − η⁻¹ E_ρ[D(π ‖ π_ref)]`. Leaving the reference
/// support is reported as [`Error::SupportViolation`] (the `−∞` value).
pub fn objective(inst: &BanditInstance, reg: &Regularizer, pi: &Policy) -> Result<f64> {
    let per_state = state_objectives(inst, reg, pi)?;
    Ok(per_state.iter().zip(&inst.context_dist).map(|(j, w)| w * j).sum())
}

/// Maximizer of [`objective`] for the true mean reward.
pub fn optimal_policy(inst: &BanditInstance, reg: &Regularizer) -> Result<Policy> {
    let reference = inst.reference_policy();
    match reg.kind {
        Divergence::Kl => Ok(kl_softmax_policy(&inst.mean_reward, &reference, reg.eta)),
        Divergence::F(_) => f_dual_policy(&inst.mean_reward, &reference, reg).map(|(pi, _)| pi),
    }
}

fn floor(x: f64) -> f64 {
    if x.abs() <= FLOOR_TOL {
        x.max(0.0)
    } else {
        x
    }
}

/// `J(π*) − J(π)`, with values within `1e-12` of zero floored at 0.
pub fn suboptimality(inst: &BanditInstance, reg: &Regularizer, pi: &Policy) -> Result<f64> {
    let best = optimal_policy(inst, reg)?;
    suboptimality_against(inst, reg, &best, pi)
}

/// As [`suboptimality`] with a precomputed optimal policy.
pub fn suboptimality_against(inst: &BanditInstance, reg: &Regularizer, best: &Policy, pi: &Policy) -> Result<f64> {
    Ok(floor(objective(inst, reg, best)? - objective(inst, reg, pi)?))
}

/// Unweighted per-state gaps `J_s(π*) − J_s(π)`.
pub fn state_suboptimality(inst: &BanditInstance, reg: &Regularizer, pi: &Policy) -> Result<Vec<f64>> {
    let best = optimal_policy(inst, reg)?;
    let top = state_objectives(inst, reg, &best)?;
    let mine = state_objectives(inst, reg, pi)?;
    Ok(top.iter().zip(&mine).map(|(a, b)| floor(a - b)).collect())
}

/// `η⁻¹ E_ρ[KL(π ‖ π*)]` for the KL-regularized problem.
pub fn kl_subopt_identity(inst: &BanditInstance, eta: f64, pi: &Policy) -> Result<f64> {
    check_shape(inst, pi)?;
    let best = kl_softmax_policy(&inst.mean_reward, &inst.reference_policy(), eta);
    let mut total = 0.0;
    for s in 0..inst.num_states {
        let kl = kl_divergence(pi.row(s), best.row(s))
            .map_err(|action| Error::SupportViolation { state: s, action })?;
        total += inst.context_dist[s] * kl;
    }
    Ok(total / eta)
}

/// `η⁻¹ E_ρ[log Σ_a π_ref(a|s) e^{η r(s,a)}]`, the KL-optimal value.
pub fn kl_optimal_value(inst: &BanditInstance, eta: f64) -> f64 {
    (0..inst.num_states)
        .map(|s| {
            let reward = inst.mean_reward.row(s);
            let reference = inst.ref_policy.row(s);
            let top = reward
                .iter()
                .zip(reference)
                .filter(|(_, &q)| q > 0.0)
                .map(|(&r, _)| eta * r)
                .fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = reward
                .iter()
                .zip(reference)
                .map(|(&r, &q)| q * (eta * r - top).exp())
                .sum();
            inst.context_dist[s] * (top + z.ln()) / eta
        })
        .sum()
}

/// `G(γ) = E_{ρ×π_γ}[(f_pess − g*)²]` with `π_γ` the softmax policy of
/// `γ f_pess + (1−γ) g*`.
pub fn g_curve(inst: &BanditInstance, f_pess: &Table, eta: f64, gamma_grid: &[f64]) -> Vec<f64> {
    let truth = &inst.mean_reward;
    let reference = inst.reference_policy();
    let sq = f_pess.zip_map(truth, |x, y| (x - y) * (x - y));
    gamma_grid
        .iter()
        .map(|&gamma| {
            let mixed = f_pess.zip_map(truth, |x, y| gamma * x + (1.0 - gamma) * y);
            kl_softmax_policy(&mixed, &reference, eta).expectation(&inst.context_dist, &sq)
        })
        .collect()
}

/// `E[X³] − E[X²]·E[X]` under the discrete law `(values, weights)`.
pub fn moment_check(values: &[f64], weights: &[f64]) -> f64 {
    let (mut m1, mut m2, mut m3) = (0.0, 0.0, 0.0);
    for (&x, &w) in values.iter().zip(weights) {
        m1 += w * x;
        m2 += w * x * x;
        m3 += w * x * x * x;
    }
    m3 - m2 * m1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Noise;

    fn two_arm(r: [f64; 2]) -> BanditInstance {
        BanditInstance::new(
            vec![1.0],
            Table::from_rows(vec![r.to_vec()]).unwrap(),
            Table::from_rows(vec![vec![0.5, 0.5]]).unwrap(),
            Noise::Bernoulli,
        )
        .unwrap()
    }

    #[test]
    fn hand_computed_objective() {
        let inst = two_arm([1.0, 0.0]);
        let j = objective(&inst, &Regularizer::kl(1.0), &Policy::uniform(1, 2)).unwrap();
        assert_eq!(j, 0.5);
    }

    #[test]
    fn log_partition_value() {
        let inst = two_arm([0.9, 0.2]);
        let reg = Regularizer::kl(3.0);
        let best = optimal_policy(&inst, &reg).unwrap();
        let direct = objective(&inst, &reg, &best).unwrap();
        let expected = ((0.5 * (2.7f64).exp() + 0.5 * (0.6f64).exp()).ln()) / 3.0;
        assert!((direct - expected).abs() < 1e-14);
        assert!((kl_optimal_value(&inst, 3.0) - expected).abs() < 1e-14);
    }

    #[test]
    fn support_violation_is_flagged() {
        let inst = BanditInstance::new(
            vec![1.0],
            Table::from_rows(vec![vec![0.3, 0.6]]).unwrap(),
            Table::from_rows(vec![vec![1.0, 0.0]]).unwrap(),
            Noise::Bernoulli,
        )
        .unwrap();
        let err = objective(&inst, &Regularizer::kl(1.0), &Policy::uniform(1, 2));
        assert!(matches!(err, Err(Error::SupportViolation { state: 0, action: 1 })));
        let err = objective(&inst, &Regularizer::chi_squared(1.0, 1.0), &Policy::uniform(1, 2));
        assert!(matches!(err, Err(Error::SupportViolation { state: 0, action: 1 })));
    }

    #[test]
    fn moment_examples() {
        assert_eq!(moment_check(&[-1.0], &[1.0]), 0.0);
        assert!((moment_check(&[0.0, -1.0], &[0.5, 0.5]) + 0.25).abs() < 1e-15);
    }

    #[test]
    fn g_curve_constant_offset() {
        let inst = two_arm([0.7, 0.4]);
        let pess = inst.mean_reward.map(|x| x - 0.1);
        for v in g_curve(&inst, &pess, 2.0, &[0.0, 0.5, 1.0]) {
            assert!((v - 0.01).abs() < 1e-15);
        }
    }

    #[test]
    fn optimal_policy_has_zero_gap() {
        let inst = two_arm([0.7, 0.4]);
        for reg in [Regularizer::kl(2.0), Regularizer::chi_squared(2.0, 1.0)] {
            let best = optimal_policy(&inst, &reg).unwrap();
            assert_eq!(suboptimality(&inst, &reg, &best).unwrap(), 0.0);
        }
    }
}
