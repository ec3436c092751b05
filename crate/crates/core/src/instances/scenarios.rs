//! Named benchmark scenarios: an instance paired with a realizable class.
//!
//! The ladder scenarios use one-parameter classes `{g* + t·v}` whose offsets
//! grow geometrically by `√2`, scaled by the per-sample standard deviation of
//! the unrestricted estimate of `t`. Doubling `n` then moves the estimate by
//! one rung, so quantization does not distort log-log rate fits.

use serde::{Deserialize, Serialize};

use super::{alternating_offsets, ladder_class, random_class, random_instance};
use crate::error::{Error, Result};
use crate::estimation::sigmoid;
use crate::model::{BanditInstance, FunctionClass, Noise};
use crate::rng::RngSeed;
use crate::table::Table;

/// Ladder rungs besides the truth.
pub const LADDER_RUNGS: usize = 15;

/// Smallest rung as a multiple of the estimator's per-sample deviation.
pub const LADDER_SCALE: f64 = 0.002;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScenarioSpec {
    /// Two states and actions, uniform reference, ladder direction with
    /// unequal magnitudes across actions.
    Ladder,
    /// Two states and actions with `π_ref(·|s) = (0.05, 0.95)` and the rare
    /// action best.
    SkewedLadder,
    /// Preference-feedback ladder with `π_ref(·|s) = (0.35, 0.65)`.
    DuelingLadder,
    /// A rarely sampled better action whose class members are mostly
    /// optimistic about it.
    Undercovered { n_target: usize },
    /// [`random_instance`] with a [`random_class`] around its rewards.
    Random { states: usize, actions: usize, class_size: usize, radius: f64, ref_skew: f64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub instance: BanditInstance,
    pub class: FunctionClass,
}

impl ScenarioSpec {
    pub fn build(&self) -> Result<Scenario> {
        match *self {
            Self::Ladder => ladder(),
            Self::SkewedLadder => skewed_ladder(),
            Self::DuelingLadder => dueling_ladder(),
            Self::Undercovered { n_target } => undercovered(n_target),
            Self::Random { states, actions, class_size, radius, ref_skew, seed } => {
                let instance = random_instance(states, actions, RngSeed(seed), ref_skew)?;
                let class = random_class(&instance.mean_reward, class_size, radius, &mut RngSeed(seed).stream(1))?;
                Ok(Scenario { instance, class })
            }
        }
    }
}

fn two_by_two(mean: [[f64; 2]; 2], reference: [f64; 2]) -> Result<BanditInstance> {
    BanditInstance::new(
        vec![0.5, 0.5],
        Table::from_fn(2, 2, |s, a| mean[s][a]),
        Table::from_fn(2, 2, |_, a| reference[a]),
        Noise::Bernoulli,
    )
}

/// Per-sample deviation of the least-squares estimate of `t` along `v`.
pub fn ls_deviation(inst: &BanditInstance, v: &Table) -> f64 {
    let (mut second, mut weighted) = (0.0, 0.0);
    for s in 0..inst.num_states {
        for a in 0..inst.num_actions {
            let w = inst.context_dist[s] * inst.ref_policy.get(s, a);
            let r = inst.mean_reward.get(s, a);
            let noise = match inst.noise {
                Noise::Bernoulli => r * (1.0 - r),
                Noise::Gaussian { sigma } => sigma * sigma,
            };
            second += w * v.get(s, a).powi(2);
            weighted += w * v.get(s, a).powi(2) * noise;
        }
    }
    weighted.sqrt() / second
}

/// Per-sample deviation of the Bradley–Terry estimate of `t` along `v`.
pub fn mle_deviation(inst: &BanditInstance, v: &Table) -> f64 {
    let mut info = 0.0;
    for s in 0..inst.num_states {
        for a1 in 0..inst.num_actions {
            for a2 in 0..inst.num_actions {
                let w = inst.context_dist[s] * inst.ref_policy.get(s, a1) * inst.ref_policy.get(s, a2);
                let p = sigmoid(inst.mean_reward.get(s, a1) - inst.mean_reward.get(s, a2));
                info += w * p * (1.0 - p) * (v.get(s, a1) - v.get(s, a2)).powi(2);
            }
        }
    }
    1.0 / info.sqrt()
}

fn ladder_scenario(instance: BanditInstance, v: Table, deviation: f64) -> Result<Scenario> {
    let offsets = alternating_offsets(LADDER_SCALE * deviation, LADDER_RUNGS);
    let class = ladder_class(&instance.mean_reward, &v, &offsets)?;
    Ok(Scenario { instance, class })
}

fn ladder() -> Result<Scenario> {
    let instance = two_by_two([[0.5, 0.45], [0.6, 0.4]], [0.5, 0.5])?;
    let v = Table::from_fn(2, 2, |_, a| [1.0, -0.8][a]);
    let dev = ls_deviation(&instance, &v);
    ladder_scenario(instance, v, dev)
}

fn skewed_ladder() -> Result<Scenario> {
    let instance = two_by_two([[0.6, 0.4], [0.65, 0.45]], [0.05, 0.95])?;
    let v = Table::from_fn(2, 2, |_, a| [1.0, -1.0][a]);
    let dev = ls_deviation(&instance, &v);
    ladder_scenario(instance, v, dev)
}

fn dueling_ladder() -> Result<Scenario> {
    let instance = two_by_two([[0.55, 0.45], [0.5, 0.42]], [0.35, 0.65])?;
    let v = Table::from_fn(2, 2, |_, a| [1.0, -1.0][a]);
    let dev = mle_deviation(&instance, &v);
    ladder_scenario(instance, v, dev)
}

fn undercovered(n_target: usize) -> Result<Scenario> {
    if n_target < 2 {
        return Err(Error::InvalidParameter("undercovered scenario needs n_target >= 2".into()));
    }
    let instance = BanditInstance::new(
        vec![0.5, 0.5],
        Table::from_rows(vec![vec![0.5, 0.4], vec![0.5, 0.6]])?,
        Table::from_rows(vec![vec![0.5, 0.5], vec![0.998, 0.002]])?,
        Noise::Bernoulli,
    )?;
    // State-0 shifts on the scale of that state's sampling noise leave the
    // state-0 policy unchanged but make the fitted member data dependent.
    let spread = 0.5 / (0.5 * n_target as f64).sqrt();
    let truth = &instance.mean_reward;
    let mut members = vec![truth.clone()];
    for j in 0..LADDER_RUNGS {
        let q = (j as f64 + 0.5) / LADDER_RUNGS as f64;
        let shift = spread * 2.0 * (q - 0.5) * 2.0;
        let bump = 0.15 + 0.05 * j as f64 / (LADDER_RUNGS - 1) as f64;
        let mut g = truth.clone();
        for a in 0..2 {
            g.set(0, a, truth.get(0, a) + shift);
        }
        g.set(1, 1, truth.get(1, 1) + bump);
        members.push(g);
    }
    let class = FunctionClass::new(members, Some(0))?;
    Ok(Scenario { instance, class })
}
