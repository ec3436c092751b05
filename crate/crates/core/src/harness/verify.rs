//! Invariant and lemma checks with measured values, grouped into suites.

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use serde::Serialize;

use crate::algorithms::run_kl_pcb;
use crate::error::{Error, Result};
use crate::evaluation::{
    g_curve, kl_subopt_identity, moment_check, objective, optimal_policy, state_suboptimality, suboptimality,
};
use crate::instances::gv::{min_distance, required_size};
use crate::instances::{
    dueling_hard_family, gv_code, hamming, kl_hard_family, random_class, random_instance, random_policy,
    sample_bandit_with, DuelingKind, HardFamily,
};
use crate::model::{FDivergence, FunctionClass, Regularizer};
use crate::rng::{Rng, RngSeed};
use crate::solvers::{chi2_closed_form, f_dual_policy, kl_softmax_policy};
use crate::table::Table;
use crate::uncertainty::{d2_concentrability, d2_dueling_table, density_ratio_concentrability, Mode, Variant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Solvers,
    Uncertainty,
    Evaluation,
    Lemmas,
    LowerBounds,
    All,
}

impl Suite {
    const NAMES: [(&'static str, Suite); 6] = [
        ("solvers", Suite::Solvers),
        ("uncertainty", Suite::Uncertainty),
        ("evaluation", Suite::Evaluation),
        ("lemmas", Suite::Lemmas),
        ("lower_bounds", Suite::LowerBounds),
        ("all", Suite::All),
    ];
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = Self::NAMES.iter().find(|(_, s)| s == self).map(|(n, _)| *n).unwrap_or("?");
        f.write_str(name)
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::NAMES
            .iter()
            .find(|(n, _)| *n == s)
            .map(|(_, suite)| *suite)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown suite `{s}`")))
    }
}

/// One check: `passed` iff `measured` is on the right side of `threshold`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub suite: Suite,
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub threshold: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

fn at_most(suite: Suite, name: &str, measured: f64, threshold: f64, detail: String) -> CheckResult {
    CheckResult { suite, name: name.into(), passed: measured <= threshold, measured, threshold, detail }
}

fn at_least(suite: Suite, name: &str, measured: f64, threshold: f64, detail: String) -> CheckResult {
    CheckResult { suite, name: name.into(), passed: measured >= threshold, measured, threshold, detail }
}

fn failed(suite: Suite, name: &str, err: Error) -> CheckResult {
    CheckResult { suite, name: name.into(), passed: false, measured: f64::NAN, threshold: f64::NAN, detail: err.to_string() }
}

fn record(suite: Suite, name: &str, result: Result<CheckResult>) -> CheckResult {
    result.unwrap_or_else(|e| failed(suite, name, e))
}

/// Runs the requested suite (or all of them) from `seed`.
pub fn verify(suite: Suite, seed: RngSeed) -> VerifyReport {
    let mut checks = Vec::new();
    let want = |s: Suite| suite == Suite::All || suite == s;
    if want(Suite::Solvers) {
        checks.extend(solver_checks(seed));
    }
    if want(Suite::Uncertainty) {
        checks.extend(uncertainty_checks(seed));
    }
    if want(Suite::Evaluation) {
        checks.extend(evaluation_checks(seed));
    }
    if want(Suite::Lemmas) {
        checks.extend(lemma_checks(seed));
    }
    if want(Suite::LowerBounds) {
        checks.extend(lower_bound_checks());
    }
    VerifyReport { passed: checks.iter().all(|c| c.passed), checks }
}

/// A random instance with `S, A ∈ [1, 6]` and a random reward table on `[−1, 2]`.
pub fn random_case(rng: &mut Rng) -> Result<(crate::model::BanditInstance, Table, f64)> {
    let states = rng.random_range(1..=6);
    let actions = rng.random_range(1..=6);
    let skew = rng.random::<f64>();
    let inst = random_instance(states, actions, RngSeed(rng.random()), skew)?;
    let g = Table::from_fn(states, actions, |_, _| 3.0 * rng.random::<f64>() - 1.0);
    let eta = (rng.random_range(-2.0..2.5f64)).exp();
    Ok((inst, g, eta))
}

pub fn solver_checks(seed: RngSeed) -> Vec<CheckResult> {
    let suite = Suite::Solvers;
    let mut rng = seed.stream(1);
    let mut out = Vec::new();

    out.push(record(suite, "kl_dual_matches_softmax", (|| {
        let mut worst = 0.0f64;
        for _ in 0..200 {
            let (inst, g, eta) = random_case(&mut rng)?;
            let pi_ref = inst.reference_policy();
            let (dual, _) = f_dual_policy(&g, &pi_ref, &Regularizer::f_div(eta, FDivergence::x_log_x()))?;
            worst = worst.max(dual.table().max_abs_diff(kl_softmax_policy(&g, &pi_ref, eta).table()));
        }
        Ok(at_most(suite, "kl_dual_matches_softmax", worst, 1e-8, "200 random cases".into()))
    })()));

    out.push(record(suite, "chi2_dual_matches_closed_form", (|| {
        let mut worst = 0.0f64;
        for _ in 0..200 {
            let (inst, g, eta) = random_case(&mut rng)?;
            let alpha = rng.random_range(0.2..3.0);
            let pi_ref = inst.reference_policy();
            let (dual, _) = f_dual_policy(&g, &pi_ref, &Regularizer::chi_squared(eta, alpha))?;
            worst = worst.max(dual.table().max_abs_diff(chi2_closed_form(&g, &pi_ref, eta, alpha).table()));
        }
        Ok(at_most(suite, "chi2_dual_matches_closed_form", worst, 1e-8, "200 random cases".into()))
    })()));

    out.push(record(suite, "shift_invariance", (|| {
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let (inst, g, eta) = random_case(&mut rng)?;
            let pi_ref = inst.reference_policy();
            let shift: Vec<f64> = (0..g.states()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let h = g.shift_rows(&shift);
            worst = worst.max(kl_softmax_policy(&g, &pi_ref, eta).table().max_abs_diff(kl_softmax_policy(&h, &pi_ref, eta).table()));
            let reg = Regularizer::chi_squared(eta, 1.0);
            let (a, _) = f_dual_policy(&g, &pi_ref, &reg)?;
            let (b, _) = f_dual_policy(&h, &pi_ref, &reg)?;
            worst = worst.max(a.table().max_abs_diff(b.table()));
        }
        Ok(at_most(suite, "shift_invariance", worst, 1e-10, "100 random per-state shifts".into()))
    })()));

    out.push(record(suite, "optimality", (|| {
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..20 {
            let (inst, _, eta) = random_case(&mut rng)?;
            for reg in [Regularizer::kl(eta), Regularizer::chi_squared(eta, 1.0)] {
                let best = objective(&inst, &reg, &optimal_policy(&inst, &reg)?)?;
                for _ in 0..100 {
                    let pi = random_policy(inst.num_states, inst.num_actions, &mut rng);
                    worst = worst.max(objective(&inst, &reg, &pi)? - best);
                }
            }
        }
        Ok(at_most(suite, "optimality", worst, 1e-9, "max J(π′) − J(π*) over 4000 random policies".into()))
    })()));
    out
}

pub fn uncertainty_checks(seed: RngSeed) -> Vec<CheckResult> {
    let suite = Suite::Uncertainty;
    let mut rng = seed.stream(2);
    let mut out = Vec::new();
    out.push(record(suite, "single_le_all", (|| {
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..50 {
            let (inst, _, _) = random_case(&mut rng)?;
            let class = random_class(&inst.mean_reward, 8, 0.2, &mut rng)?;
            let pi_ref = inst.reference_policy();
            let pi = random_policy(inst.num_states, inst.num_actions, &mut rng);
            for variant in [Variant::Bandit, Variant::Dueling] {
                let single = d2_concentrability(&class, &pi, &pi_ref, &inst.context_dist, Mode::Single, variant);
                let all = d2_concentrability(&class, &pi, &pi_ref, &inst.context_dist, Mode::All, variant);
                if all.is_finite() {
                    worst = worst.max(single - all);
                }
            }
        }
        Ok(at_most(suite, "single_le_all", worst, 0.0, "50 random classes, both variants".into()))
    })()));
    out.push(record(suite, "dueling_ignores_state_constants", (|| {
        let mut worst = 0.0f64;
        for _ in 0..50 {
            let (inst, g, _) = random_case(&mut rng)?;
            let base = g.map(|x| (x + 1.0) / 3.0);
            let shift: Vec<f64> = (0..g.states()).map(|_| rng.random_range(-0.2..0.2)).collect();
            let shifted = base.shift_rows(&shift).map(|x| x.clamp(0.0, 1.0));
            let clamped = shifted.zip_map(&base, |s, b| s - b);
            // Skip pairs whose shift was distorted by clamping.
            let constant = (0..g.states()).all(|s| clamped.row(s).iter().all(|&d| (d - clamped.get(s, 0)).abs() < 1e-15));
            if !constant {
                continue;
            }
            let class = FunctionClass::new(vec![base, shifted], None)?;
            let d2 = d2_dueling_table(&class, &inst.reference_policy(), &inst.context_dist);
            worst = worst.max(d2.as_slice().iter().copied().fold(0.0, f64::max));
        }
        Ok(at_most(suite, "dueling_ignores_state_constants", worst, 0.0, "per-state shifted pairs".into()))
    })()));
    out
}

pub fn evaluation_checks(seed: RngSeed) -> Vec<CheckResult> {
    let suite = Suite::Evaluation;
    let mut rng = seed.stream(3);
    let mut out = Vec::new();
    out.push(record(suite, "kl_suboptimality_identity", (|| {
        let mut worst = 0.0f64;
        for _ in 0..500 {
            let (inst, _, eta) = random_case(&mut rng)?;
            let pi = random_policy(inst.num_states, inst.num_actions, &mut rng);
            let direct = suboptimality(&inst, &Regularizer::kl(eta), &pi)?;
            worst = worst.max((direct - kl_subopt_identity(&inst, eta, &pi)?).abs());
        }
        Ok(at_most(suite, "kl_suboptimality_identity", worst, 1e-10, "500 random pairs".into()))
    })()));
    out.push(record(suite, "suboptimality_nonnegative", (|| {
        let mut lowest = f64::INFINITY;
        for _ in 0..200 {
            let (inst, _, eta) = random_case(&mut rng)?;
            let pi = random_policy(inst.num_states, inst.num_actions, &mut rng);
            for reg in [Regularizer::kl(eta), Regularizer::chi_squared(eta, 1.0)] {
                lowest = lowest.min(suboptimality(&inst, &reg, &pi)?);
            }
        }
        Ok(at_least(suite, "suboptimality_nonnegative", lowest, 0.0, "400 evaluations".into()))
    })()));
    out
}

/// Largest increase `G(γ_{k+1}) − G(γ_k)` on a uniform grid of `points`.
pub fn g_curve_max_increase(inst: &crate::model::BanditInstance, f_pess: &Table, eta: f64, points: usize) -> f64 {
    let grid: Vec<f64> = (0..points).map(|k| k as f64 / (points - 1) as f64).collect();
    g_curve(inst, f_pess, eta, &grid).windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max)
}

pub fn lemma_checks(seed: RngSeed) -> Vec<CheckResult> {
    let suite = Suite::Lemmas;
    let mut rng = seed.stream(4);
    let mut out = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..10_000 {
        let k = rng.random_range(1..=8);
        let values: Vec<f64> = (0..k).map(|_| -rng.random::<f64>()).collect();
        let weights = random_policy(1, k, &mut rng).into_table();
        worst = worst.max(moment_check(&values, weights.row(0)));
    }
    out.push(at_most(suite, "moment_inequality", worst, 1e-12, "10^4 random laws on [−1,0]".into()));

    out.push(record(suite, "g_curve_monotone", (|| {
        let (mut worst, mut runs) = (f64::NEG_INFINITY, 0);
        let mut attempt = 0u64;
        while runs < 200 && attempt < 1000 {
            attempt += 1;
            let inst = random_instance(3, 3, sub_seed(seed, 5, attempt), 0.5)?;
            let class = random_class(&inst.mean_reward, 16, 0.1, &mut rng)?;
            let data = sample_bandit_with(&inst, 256, &mut rng)?;
            let eta = 2.0;
            let run = run_kl_pcb(&class, &data, &inst.reference_policy(), &inst.context_dist, eta, 0.05)?;
            if run.diagnostics.event_e == Some(true) {
                runs += 1;
                worst = worst.max(g_curve_max_increase(&inst, &run.diagnostics.f_pess, eta, 21));
            }
        }
        Ok(at_most(suite, "g_curve_monotone", worst, 1e-12, format!("{runs} runs with the event")))
    })()));

    out.push(record(suite, "confidence_event_frequency", (|| {
        let delta = 0.1;
        let inst = random_instance(2, 2, sub_seed(seed, 6, 0), 0.3)?;
        let class = random_class(&inst.mean_reward, 16, 0.15, &mut rng)?;
        let runs = 200;
        let mut held = 0;
        for _ in 0..runs {
            let data = sample_bandit_with(&inst, 1024, &mut rng)?;
            let run = run_kl_pcb(&class, &data, &inst.reference_policy(), &inst.context_dist, 1.0, delta)?;
            held += usize::from(run.diagnostics.event_e == Some(true));
        }
        let rate = held as f64 / runs as f64;
        Ok(at_least(suite, "confidence_event_frequency", rate, 1.0 - delta, format!("{held}/{runs} datasets")))
    })()));
    out
}

/// Smallest `SubOpt_s(π;τ) + SubOpt_s(π;τ′) − floor` over adjacent pairs
/// and `policies` random policies.
pub fn pairwise_floor_margin(family: &HardFamily, floor: f64, policies: usize, rng: &mut Rng) -> Result<f64> {
    let reg = family.regularizer();
    let pairs = family.adjacent_pairs();
    let (states, actions) = family.instances[0].shape();
    let mut margin = f64::INFINITY;
    for _ in 0..policies {
        let pi = random_policy(states, actions, rng);
        let per: Vec<Vec<f64>> = family
            .instances
            .iter()
            .map(|inst| state_suboptimality(inst, &reg, &pi))
            .collect::<Result<_>>()?;
        for &(i, j, s) in &pairs {
            margin = margin.min(per[i][s] + per[j][s] - floor);
        }
    }
    Ok(margin)
}

pub fn lower_bound_checks() -> Vec<CheckResult> {
    let suite = Suite::LowerBounds;
    let mut rng = RngSeed(7).rng();
    let mut out = Vec::new();
    out.push(record(suite, "kl_pairwise_floor", (|| {
        let fam = kl_hard_family(2, 4.0, 8.0, 512)?;
        let (eta, delta) = (fam.params.eta, fam.params.delta);
        let floor = f64::min(eta * delta * delta / 8.0, 0.3 * delta);
        let margin = pairwise_floor_margin(&fam, floor, 1000, &mut rng)?;
        Ok(at_least(suite, "kl_pairwise_floor", margin, -1e-9, format!("floor {floor}")))
    })()));
    out.push(record(suite, "chi2_dueling_pairwise_floor", (|| {
        let fam = dueling_hard_family(2, 0.0, 1.0, 64, DuelingKind::Chi2, Some(1.0))?;
        let alpha = fam.params.alpha.unwrap_or(1.0);
        let floor = fam.params.eta * fam.params.delta.powi(2) / alpha;
        let margin = pairwise_floor_margin(&fam, floor, 1000, &mut rng)?;
        Ok(at_least(suite, "chi2_dueling_pairwise_floor", margin, -1e-9, format!("floor {floor}")))
    })()));
    for s in [8, 16, 32] {
        let name = format!("gv_code_{s}");
        out.push(record(suite, &name, (|| {
            let code = gv_code(s)?;
            let mut closest = s;
            for i in 0..code.len() {
                for j in i + 1..code.len() {
                    closest = closest.min(hamming(&code[i], &code[j]));
                }
            }
            let ok = code.len() >= required_size(s) && closest as u32 >= min_distance(s);
            Ok(CheckResult {
                suite,
                name: name.clone(),
                passed: ok,
                measured: code.len() as f64,
                threshold: required_size(s) as f64,
                detail: format!("min distance {closest}, required {}", min_distance(s)),
            })
        })()));
    }
    out.push(record(suite, "kl_construction_identities", (|| {
        let fam = kl_hard_family(3, 4.0, 8.0, 1024)?;
        let (eta, delta, c_star) = (fam.params.eta, fam.params.delta, fam.params.c_star.unwrap_or(f64::NAN));
        let alpha = fam.params.alpha.unwrap_or(f64::NAN);
        let (mut worst, mut ratio) = (0.0f64, 0.0f64);
        for (inst, tau) in fam.instances.iter().zip(&fam.labels) {
            let pi = optimal_policy(inst, &fam.regularizer())?;
            for (s, &t) in tau.iter().enumerate() {
                let e = (eta * (alpha + t as f64 * delta)).exp();
                worst = worst.max((pi.prob(s, 0) - e / (e + c_star - 1.0)).abs());
            }
            ratio = ratio.max(density_ratio_concentrability(&pi, &inst.reference_policy()));
        }
        let passed = worst <= 1e-12 && ratio <= c_star;
        Ok(CheckResult {
            suite,
            name: "kl_construction_identities".into(),
            passed,
            measured: worst,
            threshold: 1e-12,
            detail: format!("max density ratio {ratio} vs C* {c_star}"),
        })
    })()));
    out
}

fn sub_seed(seed: RngSeed, major: u64, minor: u64) -> RngSeed {
    RngSeed(seed.0 ^ RngSeed::cell_stream(major, minor))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for (name, suite) in Suite::NAMES {
            assert_eq!(name.parse::<Suite>().unwrap(), suite);
            assert_eq!(suite.to_string(), name);
        }
    }

    #[test]
    fn lower_bounds_pass() {
        let checks = lower_bound_checks();
        for c in &checks {
            assert!(c.passed, "{c:?}");
        }
    }
}
