//! Reward estimation over a finite hypothesis class.
//!
//! Both estimators enumerate the class exactly. Losses are computed from
//! per-cell sufficient statistics, so a fit costs `O(|F|·S·A²)` regardless
//! of the dataset size. Members whose loss is within a relative `1e-12` of
//! the minimum count as tied, and the lowest index wins.

use crate::error::{Error, Result};
use crate::model::{Dataset, FunctionClass, PreferenceDataset};
use crate::table::Table;

const TIE_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LsFit {
    pub index: usize,
    pub sse: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleFit {
    pub index: usize,
    pub nll: f64,
}

/// Lowest index among the (near-)minimal losses.
fn argmin_lowest(losses: &[f64]) -> (usize, f64) {
    let min = losses.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = TIE_RTOL * min.abs().max(1.0);
    let index = losses.iter().position(|&l| l <= min + tol).unwrap_or(0);
    (index, losses[index])
}

/// Per-cell counts, reward sums and squared-reward sums.
#[derive(Debug, Clone)]
pub struct RewardStats {
    count: Table,
    sum: Table,
    sum_sq: f64,
}

impl RewardStats {
    pub fn from_data(shape: (usize, usize), data: &Dataset) -> Self {
        let mut count = Table::zeros(shape.0, shape.1);
        let mut sum = Table::zeros(shape.0, shape.1);
        let mut sum_sq = 0.0;
        for row in &data.rows {
            let (s, a) = (row.state, row.action);
            count.set(s, a, count.get(s, a) + 1.0);
            sum.set(s, a, sum.get(s, a) + row.reward);
            sum_sq += row.reward * row.reward;
        }
        Self { count, sum, sum_sq }
    }

    /// `Σᵢ (g(sᵢ,aᵢ) − rᵢ)²`.
    pub fn sse(&self, g: &Table) -> f64 {
        let mut total = self.sum_sq;
        for ((&n, &s1), &v) in self.count.as_slice().iter().zip(self.sum.as_slice()).zip(g.as_slice()) {
            if n > 0.0 {
                total += n * v * v - 2.0 * v * s1;
            }
        }
        total.max(0.0)
    }
}

/// Least-squares member `argmin_g Σᵢ (g(sᵢ,aᵢ) − rᵢ)²`.
pub fn fit_least_squares(class: &FunctionClass, data: &Dataset) -> Result<LsFit> {
    if class.is_empty() {
        return Err(Error::EmptyClass);
    }
    if data.is_empty() {
        return Err(Error::NoData);
    }
    let shape = class.shape();
    data.validate(shape.0, shape.1)?;
    let stats = RewardStats::from_data(shape, data);
    let losses: Vec<f64> = class.iter().map(|g| stats.sse(g)).collect();
    let (index, sse) = argmin_lowest(&losses);
    Ok(LsFit { index, sse })
}

/// `−log σ(x) = log(1 + e^{−x})`, evaluated stably.
#[inline]
pub fn neg_log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Label counts per `(s, a¹, a²)`.
#[derive(Debug, Clone)]
pub struct PreferenceStats {
    actions: usize,
    // (state, a1, a2, wins for a1, wins for a2)
    cells: Vec<(usize, usize, usize, f64, f64)>,
}

impl PreferenceStats {
    pub fn from_data(shape: (usize, usize), data: &PreferenceDataset) -> Self {
        let (states, actions) = shape;
        let mut wins = vec![[0.0f64; 2]; states * actions * actions];
        for row in &data.rows {
            let k = (row.state * actions + row.action1) * actions + row.action2;
            wins[k][if row.label == 1 { 0 } else { 1 }] += 1.0;
        }
        let mut cells = Vec::new();
        for s in 0..states {
            for a1 in 0..actions {
                for a2 in 0..actions {
                    let [w1, w2] = wins[(s * actions + a1) * actions + a2];
                    if w1 + w2 > 0.0 {
                        cells.push((s, a1, a2, w1, w2));
                    }
                }
            }
        }
        Self { actions, cells }
    }

    /// Bradley–Terry negative log-likelihood of `g`.
    pub fn nll(&self, g: &Table) -> f64 {
        debug_assert_eq!(g.actions(), self.actions);
        self.cells
            .iter()
            .map(|&(s, a1, a2, w1, w2)| {
                let diff = g.get(s, a1) - g.get(s, a2);
                let mut v = 0.0;
                if w1 > 0.0 {
                    v += w1 * neg_log_sigmoid(diff);
                }
                if w2 > 0.0 {
                    v += w2 * neg_log_sigmoid(-diff);
                }
                v
            })
            .sum()
    }
}

/// Bradley–Terry maximum-likelihood member.
pub fn fit_mle_bt(class: &FunctionClass, data: &PreferenceDataset) -> Result<MleFit> {
    if class.is_empty() {
        return Err(Error::EmptyClass);
    }
    if data.is_empty() {
        return Err(Error::NoData);
    }
    let shape = class.shape();
    data.validate(shape.0, shape.1)?;
    let stats = PreferenceStats::from_data(shape, data);
    let losses: Vec<f64> = class.iter().map(|g| stats.nll(g)).collect();
    let (index, nll) = argmin_lowest(&losses);
    Ok(MleFit { index, nll })
}

/// Size of a greedy sup-norm `eps`-net of the class with centers drawn
/// from the class.
///
/// Greedy set cover gives an upper bound on the minimal net. It is
/// evaluated at `eps` and at every pairwise distance below `eps` (a net at
/// a smaller radius is also an `eps`-net) and the smallest result is
/// returned, which keeps the bound non-increasing in `eps`.
pub fn covering_number(class: &FunctionClass, eps: f64) -> usize {
    let n = class.len();
    if n <= 1 {
        return n.max(1);
    }
    let dist = pairwise_sup_distances(class);
    let mut radii: Vec<f64> = dist
        .iter()
        .enumerate()
        .flat_map(|(i, row)| row[i + 1..].iter().copied())
        .filter(|&d| d <= eps)
        .collect();
    radii.push(eps);
    radii.sort_by(f64::total_cmp);
    radii.dedup();
    radii
        .into_iter()
        .map(|r| greedy_cover_size(&dist, r))
        .min()
        .unwrap_or(n)
}

pub(crate) fn pairwise_sup_distances(class: &FunctionClass) -> Vec<Vec<f64>> {
    let n = class.len();
    let mut dist = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = class.member(i).sup_distance(class.member(j));
            dist[i][j] = d;
            dist[j][i] = d;
        }
    }
    dist
}

fn greedy_cover_size(dist: &[Vec<f64>], radius: f64) -> usize {
    let n = dist.len();
    let mut covered = vec![false; n];
    let mut remaining = n;
    let mut picked = 0;
    while remaining > 0 {
        let (best, gain) = (0..n)
            .map(|c| (c, (0..n).filter(|&j| !covered[j] && dist[c][j] <= radius).count()))
            .fold((0, 0), |acc, x| if x.1 > acc.1 { x } else { acc });
        debug_assert!(gain > 0);
        for j in 0..n {
            if !covered[j] && dist[best][j] <= radius {
                covered[j] = true;
                remaining -= 1;
            }
        }
        picked += 1;
    }
    picked
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BanditSample, PreferenceSample};

    fn constant(v: f64) -> Table {
        Table::filled(2, 2, v)
    }

    fn rows(cells: &[(usize, usize, f64)]) -> Dataset {
        Dataset::new(
            cells
                .iter()
                .map(|&(state, action, reward)| BanditSample { state, action, reward })
                .collect(),
        )
    }

    #[test]
    fn noiseless_realizable_fit() {
        let class = FunctionClass::new(vec![constant(0.2), constant(0.8)], None).unwrap();
        let data = rows(&[(0, 0, 0.8), (1, 1, 0.8), (0, 1, 0.8)]);
        let fit = fit_least_squares(&class, &data).unwrap();
        assert_eq!(fit.index, 1);
        assert!(fit.sse.abs() < 1e-15);
    }

    #[test]
    fn symmetric_tie_goes_to_lowest_index() {
        let class = FunctionClass::new(vec![constant(0.0), constant(1.0)], None).unwrap();
        let data = rows(&[(0, 0, 0.0), (0, 0, 1.0)]);
        let fit = fit_least_squares(&class, &data).unwrap();
        assert_eq!(fit.index, 0);
        assert_eq!(fit.sse, 1.0);
    }

    #[test]
    fn empty_inputs_are_errors() {
        let class = FunctionClass::singleton(constant(0.5));
        assert!(matches!(fit_least_squares(&class, &Dataset::default()), Err(Error::NoData)));
        assert!(matches!(fit_mle_bt(&class, &PreferenceDataset::default()), Err(Error::NoData)));
        let empty = FunctionClass { members: vec![], realizable_index: None };
        let data = rows(&[(0, 0, 1.0)]);
        assert!(matches!(fit_least_squares(&empty, &data), Err(Error::EmptyClass)));
    }

    #[test]
    fn bt_singleton_and_shift_tie() {
        let g = Table::from_rows(vec![vec![0.2, 0.6], vec![0.5, 0.1]]).unwrap();
        let shifted = g.shift_rows(&[0.3, 0.05]);
        let data = PreferenceDataset::new(vec![
            PreferenceSample { state: 0, action1: 0, action2: 1, label: 0 },
            PreferenceSample { state: 1, action1: 0, action2: 1, label: 1 },
            PreferenceSample { state: 1, action1: 1, action2: 0, label: 1 },
        ]);
        let single = FunctionClass::singleton(g.clone());
        assert_eq!(fit_mle_bt(&single, &data).unwrap().index, 0);
        let pair = FunctionClass::new(vec![g, shifted], None).unwrap();
        assert_eq!(fit_mle_bt(&pair, &data).unwrap().index, 0);
    }

    #[test]
    fn neg_log_sigmoid_is_stable() {
        assert!((neg_log_sigmoid(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((neg_log_sigmoid(-800.0) - 800.0).abs() < 1e-9);
        assert!(neg_log_sigmoid(800.0) >= 0.0);
        assert!((sigmoid(2.0) + sigmoid(-2.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn covering_small_cases() {
        let g = constant(0.4);
        assert_eq!(covering_number(&FunctionClass::singleton(g.clone()), 1e-6), 1);
        let class = FunctionClass::new(vec![g.clone(), g.map(|x| x + 0.001)], None).unwrap();
        assert_eq!(covering_number(&class, 0.01), 1);
        assert_eq!(covering_number(&class, 0.0001), 2);
    }
}
