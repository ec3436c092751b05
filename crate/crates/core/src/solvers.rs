//! Per-state maximizers of `⟨π, g⟩ − η⁻¹ D(π ‖ π_ref)` over the simplex.
//!
//! The general solver works on the KKT system
//! `π(a) = π_ref(a) · max{0, (f')⁻¹(η (g(a) − λ))}` and finds the scalar
//! multiplier `λ` by bisection on the (non-increasing) normalization map.
//! The χ² case also has an exact water-filling solution, reported with the
//! water level `λ_w = λ − α/η` so that `π = π_ref · (η/α)(g − λ_w)₊`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Divergence, FDivergence, Regularizer};
use crate::table::{Policy, Table};

const NORM_TOL: f64 = 1e-12;
const MAX_ITERS: usize = 200;
const MAX_EXPANSIONS: usize = 64;

/// Outcome of one state's dual solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DualSolveReport {
    pub lambda: f64,
    pub iterations: usize,
    pub kkt_residual: f64,
    pub normalization_residual: f64,
}

/// `π(a|s) ∝ π_ref(a|s) exp(η g(s,a))`.
pub fn kl_softmax_policy(g: &Table, pi_ref: &Policy, eta: f64) -> Policy {
    assert_eq!(g.shape(), pi_ref.shape(), "reward and reference shapes differ");
    let (states, actions) = g.shape();
    let mut out = Table::zeros(states, actions);
    for s in 0..states {
        let reference = pi_ref.row(s);
        let top = (0..actions)
            .filter(|&a| reference[a] > 0.0)
            .map(|a| eta * g.get(s, a))
            .fold(f64::NEG_INFINITY, f64::max);
        let row = out.row_mut(s);
        for a in 0..actions {
            if reference[a] > 0.0 {
                row[a] = reference[a] * (eta * g.get(s, a) - top).exp();
            }
        }
        let z: f64 = row.iter().sum();
        row.iter_mut().for_each(|p| *p /= z);
    }
    Policy::from_table_unchecked(out)
}

/// `max{0, (f')⁻¹(y)}`, by the registered closed form or by bisection on `f'`.
pub fn f_prime_inverse(f: &FDivergence, y: f64) -> f64 {
    if let Some(inv) = f.closed_form_inverse() {
        return inv(y).max(0.0);
    }
    if y <= f.f_prime(0.0) {
        return 0.0;
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while f.f_prime(hi) < y {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return f64::INFINITY;
        }
    }
    for _ in 0..MAX_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f.f_prime(mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Solves every state of the f-regularized problem.
pub fn f_dual_policy(g: &Table, pi_ref: &Policy, reg: &Regularizer) -> Result<(Policy, Vec<DualSolveReport>)> {
    let f = match &reg.kind {
        Divergence::F(f) => f,
        Divergence::Kl => {
            return Err(Error::InvalidRegularizer(
                "dual solver needs an f-divergence regularizer".into(),
            ))
        }
    };
    if !(reg.eta > 0.0) || !reg.eta.is_finite() {
        return Err(Error::InvalidRegularizer(format!("eta = {} must be positive", reg.eta)));
    }
    if g.shape() != pi_ref.shape() {
        return Err(Error::Shape(format!(
            "reward {:?} vs reference {:?}",
            g.shape(),
            pi_ref.shape()
        )));
    }
    let (states, actions) = g.shape();
    let mut out = Table::zeros(states, actions);
    let mut reports = Vec::with_capacity(states);
    for s in 0..states {
        let report = solve_state(f, reg.eta, g.row(s), pi_ref.row(s), out.row_mut(s), s)?;
        reports.push(report);
    }
    Ok((Policy::from_table_unchecked(out), reports))
}

fn solve_state(
    f: &FDivergence,
    eta: f64,
    g: &[f64],
    reference: &[f64],
    out: &mut [f64],
    state: usize,
) -> Result<DualSolveReport> {
    let mass = |lambda: f64| -> f64 {
        g.iter()
            .zip(reference)
            .filter(|(_, &q)| q > 0.0)
            .map(|(&ga, &q)| q * f_prime_inverse(f, eta * (ga - lambda)))
            .sum()
    };

    let support = g.iter().zip(reference).filter(|(_, &q)| q > 0.0).map(|(&ga, _)| ga);
    let (g_min, g_max) = support.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
    let shift = f.f_prime(1.0) / eta;
    // At λ_lo every ratio is ≥ 1, at λ_hi every ratio is ≤ 1.
    let mut lo = g_min - shift;
    let mut hi = g_max - shift;
    let mut h_lo = mass(lo);
    let mut h_hi = mass(hi);
    let mut width = (hi - lo).max(1.0 / eta).max(1e-12);
    let mut expansions = 0;
    while !(h_lo >= 1.0 && h_hi <= 1.0) {
        if expansions == MAX_EXPANSIONS || !h_lo.is_finite() && h_lo < 1.0 {
            return Err(Error::DualBracket { state });
        }
        if h_lo < 1.0 {
            lo -= width;
            h_lo = mass(lo);
        }
        if h_hi > 1.0 {
            hi += width;
            h_hi = mass(hi);
        }
        width *= 2.0;
        expansions += 1;
    }

    let mut lambda = if (h_lo - 1.0).abs() <= (h_hi - 1.0).abs() { lo } else { hi };
    let mut h = if lambda == lo { h_lo } else { h_hi };
    let mut iterations = 0;
    while (h - 1.0).abs() > NORM_TOL && iterations < MAX_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let h_mid = mass(mid);
        let slack = 1e-12 * h_lo.max(1.0);
        if h_mid > h_lo + slack || h_mid < h_hi - slack {
            return Err(Error::NotStrictlyConvex { state });
        }
        iterations += 1;
        lambda = mid;
        h = h_mid;
        if h_mid > 1.0 {
            lo = mid;
            h_lo = h_mid;
        } else {
            hi = mid;
            h_hi = h_mid;
        }
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::DualBracket { state });
    }

    for ((p, &ga), &q) in out.iter_mut().zip(g).zip(reference) {
        *p = if q > 0.0 {
            q * f_prime_inverse(f, eta * (ga - lambda)) / h
        } else {
            0.0
        };
    }

    let f_prime_zero = f.f_prime(0.0);
    let kkt_residual = out
        .iter()
        .zip(g)
        .zip(reference)
        .filter(|(_, &q)| q > 0.0)
        .map(|((&p, &ga), &q)| {
            let target = eta * (ga - lambda);
            if p > 0.0 {
                (f.f_prime(p / q) - target).abs()
            } else {
                (target - f_prime_zero).max(0.0)
            }
        })
        .fold(0.0, f64::max);
    let total: f64 = out.iter().sum();
    Ok(DualSolveReport {
        lambda,
        iterations,
        kkt_residual,
        normalization_residual: (total - 1.0).abs().max((h - 1.0).abs()),
    })
}

/// Water level `λ_w` of one χ² row: the unique value with
/// `Σ_a π_ref(a)(η/α)(g(a) − λ_w)₊ = 1`.
pub fn chi2_water_level(g: &[f64], reference: &[f64], eta: f64, alpha: f64) -> f64 {
    let mut order: Vec<usize> = (0..g.len()).filter(|&a| reference[a] > 0.0).collect();
    order.sort_by(|&x, &y| g[y].total_cmp(&g[x]).then(x.cmp(&y)));
    let budget = alpha / eta;
    let (mut weight, mut weighted) = (0.0, 0.0);
    let mut level = f64::NAN;
    for (k, &a) in order.iter().enumerate() {
        weight += reference[a];
        weighted += reference[a] * g[a];
        let candidate = (weighted - budget) / weight;
        level = candidate;
        let next = order.get(k + 1).map(|&b| g[b]);
        if next.is_none_or(|gn| gn <= candidate) {
            break;
        }
    }
    level
}

/// Exact χ² solution for `f(x) = α(x−1)²/2` by water-filling.
pub fn chi2_closed_form(g: &Table, pi_ref: &Policy, eta: f64, alpha: f64) -> Policy {
    assert_eq!(g.shape(), pi_ref.shape(), "reward and reference shapes differ");
    let (states, actions) = g.shape();
    let scale = eta / alpha;
    let mut out = Table::zeros(states, actions);
    for s in 0..states {
        let reference = pi_ref.row(s);
        let level = chi2_water_level(g.row(s), reference, eta, alpha);
        let row = out.row_mut(s);
        for a in 0..actions {
            if reference[a] > 0.0 {
                row[a] = reference[a] * scale * (g.get(s, a) - level).max(0.0);
            }
        }
    }
    Policy::from_table_unchecked(out)
}
