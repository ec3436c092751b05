//! D²-divergences, confidence radii, pessimism bonuses and concentrability.
//!
//! D² values are `f64` with `f64::INFINITY` as the in-band flag for a pair
//! that disagrees at `(s,a)` but never under the behavior distribution.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::Hasher;
use std::sync::{Arc, OnceLock, RwLock};

use serde::{Deserialize, Serialize};

use crate::estimation::covering_number;
use crate::model::FunctionClass;
use crate::table::{Policy, Table};

/// Centered differences below this magnitude are treated as exact zeros in
/// the dueling variant, so per-state constant gaps vanish despite rounding.
const CENTER_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Bandit,
    Dueling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Single,
    All,
}

/// `Γ_n(s,a) = β·√D²(s,a)` together with `β`.
#[derive(Debug, Clone, PartialEq)]
pub struct BonusTable {
    pub values: Table,
    pub beta: f64,
}

/// `√(128·log(2N/δ)/(3n) + 18·ε_c)`.
pub fn beta_radius(n: usize, delta: f64, eps_c: f64, cover_n: usize) -> f64 {
    (128.0 * (2.0 * cover_n as f64 / delta).ln() / (3.0 * n as f64) + 18.0 * eps_c).sqrt()
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else if num > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// Full bandit D² table: entry `(s,a)` is `sup_{g,h} (g−h)²(s,a) / E_{ρ×π}[(g−h)²]`.
pub fn d2_bandit_table(class: &FunctionClass, pi: &Policy, rho: &[f64]) -> Table {
    let (states, actions) = class.shape();
    let mut out = Table::zeros(states, actions);
    let mut diff = vec![0.0; states * actions];
    for i in 0..class.len() {
        for j in i + 1..class.len() {
            let (g, h) = (class.member(i).as_slice(), class.member(j).as_slice());
            let mut den = 0.0;
            for k in 0..diff.len() {
                let d = g[k] - h[k];
                diff[k] = d * d;
                den += rho[k / actions] * pi.table().as_slice()[k] * diff[k];
            }
            for (k, &num) in diff.iter().enumerate() {
                let (s, a) = (k / actions, k % actions);
                let v = ratio(num, den);
                if v > out.get(s, a) {
                    out.set(s, a, v);
                }
            }
        }
    }
    out
}

/// Full dueling D² table with the π-mean centering `b(s) = clamp(E_π[(g−h)(s,·)], −1, 1)`.
pub fn d2_dueling_table(class: &FunctionClass, pi: &Policy, rho: &[f64]) -> Table {
    let (states, actions) = class.shape();
    let mut out = Table::zeros(states, actions);
    let mut centered = vec![0.0; states * actions];
    let mut offset = vec![0.0; states];
    for i in 0..class.len() {
        for j in i + 1..class.len() {
            let (g, h) = (class.member(i), class.member(j));
            let mut den = 0.0;
            for s in 0..states {
                let probs = pi.row(s);
                let d = |a: usize| g.get(s, a) - h.get(s, a);
                let mean: f64 = (0..actions).map(|a| probs[a] * d(a)).sum();
                let b = mean.clamp(-1.0, 1.0);
                offset[s] = b - mean;
                for a in 0..actions {
                    let c = d(a) - mean;
                    let scale = 1.0 + d(a).abs();
                    centered[s * actions + a] = if c.abs() <= CENTER_TOL * scale { 0.0 } else { c };
                }
                let var: f64 = (0..actions).map(|a| probs[a] * centered[s * actions + a].powi(2)).sum();
                den += rho[s] * (var + offset[s] * offset[s]);
            }
            for s in 0..states {
                for a in 0..actions {
                    let c = centered[s * actions + a] - offset[s];
                    let v = ratio(c * c, den);
                    if v > out.get(s, a) {
                        out.set(s, a, v);
                    }
                }
            }
        }
    }
    out
}

/// Bandit D² at a single `(s,a)`.
pub fn d2_bandit(class: &FunctionClass, pi: &Policy, rho: &[f64], s: usize, a: usize) -> f64 {
    d2_tables(class, pi, rho).bandit.get(s, a)
}

/// Dueling D² at a single `(s,a)`.
pub fn d2_dueling(class: &FunctionClass, pi: &Policy, rho: &[f64], s: usize, a: usize) -> f64 {
    d2_tables(class, pi, rho).dueling.get(s, a)
}

#[derive(Debug)]
pub struct D2Tables {
    pub bandit: Table,
    pub dueling: Table,
}

impl D2Tables {
    pub fn get(&self, variant: Variant) -> &Table {
        match variant {
            Variant::Bandit => &self.bandit,
            Variant::Dueling => &self.dueling,
        }
    }
}

fn content_key(class: &FunctionClass, pi: &Policy, rho: &[f64]) -> u64 {
    let mut hasher = DefaultHasher::new();
    hasher.write_usize(class.len());
    for m in class.iter() {
        m.bits_hash(&mut hasher);
    }
    pi.table().bits_hash(&mut hasher);
    for x in rho {
        hasher.write_u64(x.to_bits());
    }
    hasher.finish()
}

type Cache<V> = RwLock<HashMap<u64, V>>;

fn d2_cache() -> &'static Cache<Arc<D2Tables>> {
    static CACHE: OnceLock<Cache<Arc<D2Tables>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

fn cover_cache() -> &'static Cache<usize> {
    static CACHE: OnceLock<Cache<usize>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// Both D² tables for `(F, π, ρ)`, memoized by a content hash of the inputs.
pub fn d2_tables(class: &FunctionClass, pi: &Policy, rho: &[f64]) -> Arc<D2Tables> {
    let key = content_key(class, pi, rho);
    if let Some(hit) = d2_cache().read().expect("d2 cache poisoned").get(&key) {
        return Arc::clone(hit);
    }
    let tables = Arc::new(D2Tables {
        bandit: d2_bandit_table(class, pi, rho),
        dueling: d2_dueling_table(class, pi, rho),
    });
    let mut cache = d2_cache().write().expect("d2 cache poisoned");
    Arc::clone(cache.entry(key).or_insert(tables))
}

/// [`covering_number`] memoized by class content and radius.
pub fn cached_covering_number(class: &FunctionClass, eps: f64) -> usize {
    let mut hasher = DefaultHasher::new();
    for m in class.iter() {
        m.bits_hash(&mut hasher);
    }
    hasher.write_u64(eps.to_bits());
    let key = hasher.finish();
    if let Some(&hit) = cover_cache().read().expect("cover cache poisoned").get(&key) {
        return hit;
    }
    let value = covering_number(class, eps);
    cover_cache().write().expect("cover cache poisoned").insert(key, value);
    value
}

/// `Γ(s,a) = β·√D²(s,a)` under the behavior policy `pi_ref`.
pub fn bonus_table(class: &FunctionClass, pi_ref: &Policy, rho: &[f64], beta: f64, variant: Variant) -> BonusTable {
    let tables = d2_tables(class, pi_ref, rho);
    let values = tables.get(variant).map(|d2| if beta == 0.0 { 0.0 } else { beta * d2.sqrt() });
    BonusTable { values, beta }
}

/// `sup_{s,a} π(a|s)/π_ref(a|s)` with `0/0 = 0` and `x/0 = ∞`.
pub fn density_ratio_concentrability(pi: &Policy, pi_ref: &Policy) -> f64 {
    pi.table()
        .as_slice()
        .iter()
        .zip(pi_ref.table().as_slice())
        .map(|(&p, &q)| ratio(p, q))
        .fold(0.0, f64::max)
}

/// D²-based concentrability of `pi_eval` relative to `pi_ref`: the sup of
/// D² over all `(s,a)` or its mean under `ρ × pi_eval`.
pub fn d2_concentrability(
    class: &FunctionClass,
    pi_eval: &Policy,
    pi_ref: &Policy,
    rho: &[f64],
    mode: Mode,
    variant: Variant,
) -> f64 {
    let tables = d2_tables(class, pi_ref, rho);
    let d2 = tables.get(variant);
    match mode {
        Mode::All => d2.as_slice().iter().copied().fold(0.0, f64::max),
        Mode::Single => {
            let (states, actions) = d2.shape();
            let mut total = 0.0;
            for s in 0..states {
                for a in 0..actions {
                    let w = rho[s] * pi_eval.prob(s, a);
                    if w > 0.0 {
                        total += w * d2.get(s, a);
                    }
                }
            }
            total
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(g: Vec<Vec<f64>>, h: Vec<Vec<f64>>) -> FunctionClass {
        FunctionClass::new(vec![Table::from_rows(g).unwrap(), Table::from_rows(h).unwrap()], None).unwrap()
    }

    #[test]
    fn beta_reference_value() {
        let b = beta_radius(1000, 0.1, 0.001, 100);
        let expected = (128.0 * 2000f64.ln() / 3000.0 + 0.018).sqrt();
        assert!((b - expected).abs() < 1e-15);
        assert!((b - 0.585_068_5).abs() < 1e-6);
    }

    #[test]
    fn beta_halves_squared_when_n_doubles() {
        let b1 = beta_radius(1000, 0.05, 0.0, 7);
        let b2 = beta_radius(2000, 0.05, 0.0, 7);
        assert!((b1 * b1 / (b2 * b2) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn indicator_pair() {
        let class = pair(vec![vec![0.6, 0.2]], vec![vec![0.2, 0.2]]);
        let pi = Policy::uniform(1, 2);
        assert!((d2_bandit(&class, &pi, &[1.0], 0, 0) - 2.0).abs() < 1e-12);
        assert_eq!(d2_bandit(&class, &pi, &[1.0], 0, 1), 0.0);
        assert!((d2_dueling(&class, &pi, &[1.0], 0, 0) - 1.0).abs() < 1e-12);
        assert!((d2_dueling(&class, &pi, &[1.0], 0, 1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_difference() {
        let class = pair(vec![vec![0.7, 0.5], vec![0.1, 0.3]], vec![vec![0.4, 0.2], vec![0.0, 0.2]]);
        let pi = Policy::uniform(2, 2);
        let rho = [0.5, 0.5];
        let bandit = d2_bandit_table(&class, &pi, &rho);
        let dueling = d2_dueling_table(&class, &pi, &rho);
        for s in 0..2 {
            for a in 0..2 {
                assert!(bandit.get(s, a) > 0.0);
                assert_eq!(dueling.get(s, a), 0.0);
            }
        }
    }

    #[test]
    fn unseen_disagreement_is_infinite() {
        let class = pair(vec![vec![0.6, 0.2]], vec![vec![0.2, 0.2]]);
        let pi = Policy::new(Table::from_rows(vec![vec![0.0, 1.0]]).unwrap()).unwrap();
        assert_eq!(d2_bandit(&class, &pi, &[1.0], 0, 0), f64::INFINITY);
        let bonus = bonus_table(&class, &pi, &[1.0], 0.3, Variant::Bandit);
        assert_eq!(bonus.values.get(0, 0), f64::INFINITY);
        assert_eq!(bonus.values.get(0, 1), 0.0);
    }

    #[test]
    fn density_ratio_examples() {
        let reference = Policy::new(Table::from_rows(vec![vec![0.25, 0.75]]).unwrap()).unwrap();
        assert_eq!(density_ratio_concentrability(&reference, &reference), 1.0);
        let greedy = Policy::deterministic(2, &[0]);
        assert_eq!(density_ratio_concentrability(&greedy, &reference), 4.0);
    }
}
