//! Instance, hypothesis-class and dataset generation.

pub mod gv;
pub mod hard;
pub mod sampling;
pub mod scenarios;

pub use gv::{gv_code, gv_code_seeded, hamming, SignVector};
pub use hard::{chi2_hard_family, dueling_hard_family, kl_hard_family, DuelingKind, FamilyKind, FamilyParams, HardFamily};
pub use sampling::{sample_bandit_data, sample_bandit_with, sample_preference_data, sample_preference_with};
pub use scenarios::{Scenario, ScenarioSpec};

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::model::{BanditInstance, FunctionClass, Noise};
use crate::rng::{Rng, RngSeed};
use crate::table::{Policy, Table};

/// Smallest reference probability produced by [`random_instance`].
pub const MIN_REF_PROB: f64 = 1e-4;

/// Uniform `ρ`, i.i.d. `U[0,1]` rewards and a reference policy mixing the
/// uniform row (weight `1 − ref_skew`) with a random near-degenerate row.
pub fn random_instance(states: usize, actions: usize, seed: RngSeed, ref_skew: f64) -> Result<BanditInstance> {
    if states == 0 || actions == 0 {
        return Err(Error::InvalidParameter("S and A must be positive".into()));
    }
    if !(0.0..=1.0).contains(&ref_skew) {
        return Err(Error::InvalidParameter(format!("ref_skew = {ref_skew} outside [0,1]")));
    }
    let mut rng = seed.rng();
    let mean = Table::from_fn(states, actions, |_, _| rng.random::<f64>());
    let uniform = 1.0 / actions as f64;
    let mut reference = Table::zeros(states, actions);
    for s in 0..states {
        // Raising uniforms to a high power concentrates mass on few actions.
        let raw: Vec<f64> = (0..actions).map(|_| rng.random::<f64>().powi(8)).collect();
        let total: f64 = raw.iter().sum::<f64>().max(f64::MIN_POSITIVE);
        let row = reference.row_mut(s);
        for a in 0..actions {
            let degenerate = MIN_REF_PROB + (1.0 - actions as f64 * MIN_REF_PROB) * raw[a] / total;
            row[a] = (1.0 - ref_skew) * uniform + ref_skew * degenerate;
        }
        let z: f64 = row.iter().sum();
        row.iter_mut().for_each(|p| *p /= z);
    }
    BanditInstance::new(vec![1.0 / states as f64; states], mean, reference, Noise::Bernoulli)
}

/// A realizable class of `size` members: the truth (at a random index) and
/// perturbations with entries `truth + U[−radius, radius]` clamped to `[0,1]`.
pub fn random_class(truth: &Table, size: usize, radius: f64, rng: &mut Rng) -> Result<FunctionClass> {
    if size == 0 {
        return Err(Error::EmptyClass);
    }
    let mut members: Vec<Table> = (1..size)
        .map(|_| {
            Table::from_fn(truth.states(), truth.actions(), |s, a| {
                (truth.get(s, a) + radius * (2.0 * rng.random::<f64>() - 1.0)).clamp(0.0, 1.0)
            })
        })
        .collect();
    members.push(truth.clone());
    members.shuffle(rng);
    let index = members.iter().position(|m| m == truth);
    FunctionClass::new(members, index)
}

/// Rows drawn uniformly from the simplex (flat Dirichlet).
pub fn random_policy(states: usize, actions: usize, rng: &mut Rng) -> Policy {
    let weights = Table::from_fn(states, actions, |_, _| -(1.0 - rng.random::<f64>()).ln());
    Policy::from_weights(weights).expect("exponential weights are positive")
}

/// `{truth + t·direction : t ∈ {0} ∪ offsets}` with the truth first.
pub fn ladder_class(truth: &Table, direction: &Table, offsets: &[f64]) -> Result<FunctionClass> {
    let mut members = vec![truth.clone()];
    members.extend(offsets.iter().map(|&t| truth.zip_map(direction, |g, v| g + t * v)));
    FunctionClass::new(members, Some(0))
}

/// Offsets `a·√2^k` for `k < count`, with signs alternating from `+`.
pub fn alternating_offsets(a: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sign * a * std::f64::consts::SQRT_2.powi(k as i32)
        })
        .collect()
}
