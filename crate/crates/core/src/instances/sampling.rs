//! I.i.d. offline data: `s ∼ ρ`, actions from `π_ref`, rewards or Bradley–Terry labels.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng as _;
use rand_distr::Normal;

use crate::error::{Error, Result};
use crate::estimation::sigmoid;
use crate::model::{BanditInstance, BanditSample, Dataset, Noise, PreferenceDataset, PreferenceSample};
use crate::rng::{Rng, RngSeed};

struct Sampler {
    states: WeightedIndex<f64>,
    actions: Vec<WeightedIndex<f64>>,
}

impl Sampler {
    fn new(inst: &BanditInstance) -> Result<Self> {
        let bad = |e: rand::distr::weighted::Error| Error::InvalidInstance(vec![e.to_string()]);
        let states = WeightedIndex::new(&inst.context_dist).map_err(bad)?;
        let actions = inst
            .ref_policy
            .rows()
            .map(|row| WeightedIndex::new(row).map_err(bad))
            .collect::<Result<_>>()?;
        Ok(Self { states, actions })
    }

    fn draw(&self, rng: &mut Rng) -> (usize, usize) {
        let s = self.states.sample(rng);
        (s, self.actions[s].sample(rng))
    }
}

fn require_rows(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("sample size must be at least 1".into()));
    }
    Ok(())
}

/// `n` rows `(s, a, r)` drawn from `rng`.
pub fn sample_bandit_with(inst: &BanditInstance, n: usize, rng: &mut Rng) -> Result<Dataset> {
    require_rows(n)?;
    let sampler = Sampler::new(inst)?;
    let normal = match inst.noise {
        Noise::Gaussian { sigma } => Some(
            Normal::new(0.0, sigma).map_err(|e| Error::InvalidParameter(format!("noise sigma: {e}")))?,
        ),
        Noise::Bernoulli => None,
    };
    let rows = (0..n)
        .map(|_| {
            let (state, action) = sampler.draw(rng);
            let mean = inst.mean_reward.get(state, action);
            let reward = match &normal {
                Some(noise) => mean + noise.sample(rng),
                None => f64::from(u8::from(rng.random::<f64>() < mean)),
            };
            BanditSample { state, action, reward }
        })
        .collect();
    Ok(Dataset::new(rows))
}

/// `n` rows `(s, a¹, a², y)` with `P[y = 1] = σ(r(s,a¹) − r(s,a²))`.
pub fn sample_preference_with(inst: &BanditInstance, n: usize, rng: &mut Rng) -> Result<PreferenceDataset> {
    require_rows(n)?;
    let sampler = Sampler::new(inst)?;
    let rows = (0..n)
        .map(|_| {
            let (state, action1) = sampler.draw(rng);
            let action2 = sampler.actions[state].sample(rng);
            let p = sigmoid(inst.mean_reward.get(state, action1) - inst.mean_reward.get(state, action2));
            let label = u8::from(rng.random::<f64>() < p);
            PreferenceSample { state, action1, action2, label }
        })
        .collect();
    Ok(PreferenceDataset::new(rows))
}

pub fn sample_bandit_data(inst: &BanditInstance, n: usize, seed: RngSeed) -> Result<Dataset> {
    sample_bandit_with(inst, n, &mut seed.rng())
}

pub fn sample_preference_data(inst: &BanditInstance, n: usize, seed: RngSeed) -> Result<PreferenceDataset> {
    sample_preference_with(inst, n, &mut seed.rng())
}
