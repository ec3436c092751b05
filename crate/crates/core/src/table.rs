//! Dense `S × A` tables and row-stochastic policies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row tolerance for computed policies.
pub const POLICY_TOL: f64 = 1e-10;

/// Row-major `S × A` matrix of reals, indexed by `(state, action)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Table {
    states: usize,
    actions: usize,
    data: Vec<f64>,
}

impl Table {
    pub fn zeros(states: usize, actions: usize) -> Self {
        Self::filled(states, actions, 0.0)
    }

    pub fn filled(states: usize, actions: usize, value: f64) -> Self {
        Self {
            states,
            actions,
            data: vec![value; states * actions],
        }
    }

    pub fn from_fn(states: usize, actions: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(states * actions);
        for s in 0..states {
            for a in 0..actions {
                data.push(f(s, a));
            }
        }
        Self { states, actions, data }
    }

    /// Builds a table from nested rows; all rows must share one length.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let states = rows.len();
        if states == 0 {
            return Err(Error::Shape("table has no rows".into()));
        }
        let actions = rows[0].len();
        if actions == 0 {
            return Err(Error::Shape("table has no columns".into()));
        }
        let mut data = Vec::with_capacity(states * actions);
        for (s, row) in rows.into_iter().enumerate() {
            if row.len() != actions {
                return Err(Error::Shape(format!(
                    "row {s} has {} entries, expected {actions}",
                    row.len()
                )));
            }
            data.extend(row);
        }
        Ok(Self { states, actions, data })
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.states, self.actions)
    }

    #[inline]
    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.data[s * self.actions + a]
    }

    #[inline]
    pub fn set(&mut self, s: usize, a: usize, value: f64) {
        self.data[s * self.actions + a] = value;
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.data[s * self.actions..(s + 1) * self.actions]
    }

    pub fn row_mut(&mut self, s: usize) -> &mut [f64] {
        &mut self.data[s * self.actions..(s + 1) * self.actions]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.actions)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            states: self.states,
            actions: self.actions,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    /// Entrywise combination of two tables of equal shape.
    pub fn zip_map(&self, other: &Table, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.shape(), other.shape(), "table shapes differ");
        Self {
            states: self.states,
            actions: self.actions,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&x, &y)| f(x, y))
                .collect(),
        }
    }

    pub fn sub(&self, other: &Table) -> Self {
        self.zip_map(other, |x, y| x - y)
    }

    pub fn add(&self, other: &Table) -> Self {
        self.zip_map(other, |x, y| x + y)
    }

    /// Adds `offsets[s]` to every entry of row `s`.
    pub fn shift_rows(&self, offsets: &[f64]) -> Self {
        assert_eq!(offsets.len(), self.states);
        Self::from_fn(self.states, self.actions, |s, a| self.get(s, a) + offsets[s])
    }

    pub fn sup_distance(&self, other: &Table) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Table) -> f64 {
        self.sup_distance(other)
    }

    pub fn bits_hash(&self, hasher: &mut impl std::hash::Hasher) {
        hasher.write_usize(self.states);
        hasher.write_usize(self.actions);
        for x in &self.data {
            hasher.write_u64(x.to_bits());
        }
    }
}

impl TryFrom<Vec<Vec<f64>>> for Table {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Table::from_rows(rows)
    }
}

impl From<Table> for Vec<Vec<f64>> {
    fn from(t: Table) -> Self {
        t.to_rows()
    }
}

/// A row-stochastic `S × A` table `π(a|s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Table", into = "Table")]
pub struct Policy(Table);

impl Policy {
    /// Validates rows against [`POLICY_TOL`].
    pub fn new(probs: Table) -> Result<Self> {
        Self::with_tolerance(probs, POLICY_TOL)
    }

    pub fn with_tolerance(probs: Table, tol: f64) -> Result<Self> {
        for (s, row) in probs.rows().enumerate() {
            if let Some(a) = row.iter().position(|&p| !(p >= 0.0) || !p.is_finite()) {
                return Err(Error::InvalidPolicy(format!(
                    "entry ({s},{a}) = {} is not a nonnegative finite probability",
                    row[a]
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > tol {
                return Err(Error::InvalidPolicy(format!("row {s} sums to {sum}")));
            }
        }
        Ok(Self(probs))
    }

    /// Normalizes each nonnegative row by its sum.
    pub fn from_weights(mut weights: Table) -> Result<Self> {
        for s in 0..weights.states() {
            let row = weights.row_mut(s);
            let sum: f64 = row.iter().sum();
            if !(sum > 0.0) || !sum.is_finite() {
                return Err(Error::InvalidPolicy(format!(
                    "row {s} has non-normalizable weight sum {sum}"
                )));
            }
            row.iter_mut().for_each(|p| *p /= sum);
        }
        Self::new(weights)
    }

    /// Wraps a table without validation; callers guarantee row-stochasticity.
    pub(crate) fn from_table_unchecked(probs: Table) -> Self {
        Self(probs)
    }

    pub fn uniform(states: usize, actions: usize) -> Self {
        Self(Table::filled(states, actions, 1.0 / actions as f64))
    }

    /// Deterministic policy playing `choice[s]` in state `s`.
    pub fn deterministic(actions: usize, choice: &[usize]) -> Self {
        Self(Table::from_fn(choice.len(), actions, |s, a| {
            if a == choice[s] {
                1.0
            } else {
                0.0
            }
        }))
    }

    #[inline]
    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.0.get(s, a)
    }

    pub fn row(&self, s: usize) -> &[f64] {
        self.0.row(s)
    }

    pub fn table(&self) -> &Table {
        &self.0
    }

    pub fn into_table(self) -> Table {
        self.0
    }

    pub fn states(&self) -> usize {
        self.0.states()
    }

    pub fn actions(&self) -> usize {
        self.0.actions()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    /// Per-state expectation `E_{a∼π(·|s)}[f(s,a)]`.
    pub fn row_mean(&self, s: usize, values: &Table) -> f64 {
        self.row(s)
            .iter()
            .zip(values.row(s))
            .map(|(p, v)| p * v)
            .sum()
    }

    /// `E_{s∼ρ, a∼π}[f(s,a)]`.
    pub fn expectation(&self, rho: &[f64], values: &Table) -> f64 {
        rho.iter()
            .enumerate()
            .map(|(s, w)| w * self.row_mean(s, values))
            .sum()
    }

    /// Whether every positive entry lies inside `reference`'s support.
    pub fn supported_by(&self, reference: &Policy) -> bool {
        self.0
            .as_slice()
            .iter()
            .zip(reference.0.as_slice())
            .all(|(&p, &q)| p == 0.0 || q > 0.0)
    }
}

impl TryFrom<Table> for Policy {
    type Error = Error;

    fn try_from(t: Table) -> Result<Self> {
        Policy::new(t)
    }
}

impl From<Policy> for Table {
    fn from(p: Policy) -> Self {
        p.0
    }
}
