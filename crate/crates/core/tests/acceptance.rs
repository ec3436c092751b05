//! Acceptance suite: thirteen criteria, one PASS/FAIL line each. Every
//! criterion also has a wall-clock budget that counts toward its verdict.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::Rng as _;
use regbandit::algorithms::{run_kl_pcb, Algorithm};
use regbandit::evaluation::{
    g_curve, kl_subopt_identity, moment_check, objective, optimal_policy, state_suboptimality, suboptimality,
};
use regbandit::harness::{rate_fit, run_sweep, summarize, InstanceSource, RateFit, Statistic, SweepConfig, SweepRow};
use regbandit::instances::gv::{min_distance, required_size};
use regbandit::instances::{
    dueling_hard_family, gv_code, hamming, kl_hard_family, random_class, random_instance, random_policy,
    sample_bandit_with, DuelingKind, HardFamily, ScenarioSpec,
};
use regbandit::rng::Rng;
use regbandit::solvers::{chi2_closed_form, f_dual_policy, kl_softmax_policy};
use regbandit::uncertainty::density_ratio_concentrability;
use regbandit::{BanditInstance, FDivergence, Policy, Regularizer, Result, RngSeed, Table};

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Result<Verdict> {
    Ok(Verdict { passed, detail })
}

/// Random instance with `S, A ≤ 6`, a reward table on `[−1, 2]` and `η ∈ [e⁻², e^{2.5}]`.
fn random_case(rng: &mut Rng) -> Result<(BanditInstance, Table, f64)> {
    let states = rng.random_range(1..=6);
    let actions = rng.random_range(1..=6);
    let inst = random_instance(states, actions, RngSeed(rng.random()), rng.random())?;
    let g = Table::from_fn(states, actions, |_, _| 3.0 * rng.random::<f64>() - 1.0);
    let eta = rng.random_range(-2.0..2.5f64).exp();
    Ok((inst, g, eta))
}

fn solver_agreement() -> Result<Verdict> {
    let mut rng = RngSeed(101).rng();
    let (mut kl_gap, mut chi2_gap) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let (inst, g, eta) = random_case(&mut rng)?;
        let pi_ref = inst.reference_policy();
        let (dual, _) = f_dual_policy(&g, &pi_ref, &Regularizer::f_div(eta, FDivergence::x_log_x()))?;
        kl_gap = kl_gap.max(dual.table().max_abs_diff(kl_softmax_policy(&g, &pi_ref, eta).table()));
        let alpha = rng.random_range(0.2..3.0);
        let (dual, _) = f_dual_policy(&g, &pi_ref, &Regularizer::chi_squared(eta, alpha))?;
        chi2_gap = chi2_gap.max(dual.table().max_abs_diff(chi2_closed_form(&g, &pi_ref, eta, alpha).table()));
    }
    verdict(
        kl_gap <= 1e-8 && chi2_gap <= 1e-8,
        format!("max entry gap: x·log x vs softmax {kl_gap:.2e}, chi2 dual vs closed form {chi2_gap:.2e}"),
    )
}

fn optimality() -> Result<Verdict> {
    let mut rng = RngSeed(102).rng();
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..20 {
        let (inst, _, eta) = random_case(&mut rng)?;
        for reg in [Regularizer::kl(eta), Regularizer::chi_squared(eta, 1.0)] {
            let best = objective(&inst, &reg, &optimal_policy(&inst, &reg)?)?;
            for _ in 0..1000 {
                let pi = random_policy(inst.num_states, inst.num_actions, &mut rng);
                worst = worst.max(objective(&inst, &reg, &pi)? - best);
            }
        }
    }
    verdict(worst <= 1e-9, format!("max J(π′) − J(π*) = {worst:.2e} over 40000 policies"))
}

fn kl_identity() -> Result<Verdict> {
    let mut rng = RngSeed(103).rng();
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let (inst, _, eta) = random_case(&mut rng)?;
        let pi = random_policy(inst.num_states, inst.num_actions, &mut rng);
        let direct = suboptimality(&inst, &Regularizer::kl(eta), &pi)?;
        worst = worst.max((direct - kl_subopt_identity(&inst, eta, &pi)?).abs());
    }
    verdict(worst <= 1e-10, format!("max |SubOpt − η⁻¹E KL(π‖π*)| = {worst:.2e}"))
}

fn moment_fuzz() -> Result<Verdict> {
    let mut rng = RngSeed(104).rng();
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..10_000 {
        let k = rng.random_range(1..=10);
        let values: Vec<f64> = (0..k).map(|_| -rng.random::<f64>()).collect();
        let weights = random_policy(1, k, &mut rng).into_table();
        worst = worst.max(moment_check(&values, weights.row(0)));
    }
    verdict(worst <= 1e-12, format!("max E[X³] − E[X²]E[X] = {worst:.2e} over 10^4 laws"))
}

fn g_monotone() -> Result<Verdict> {
    let mut rng = RngSeed(105).rng();
    let grid: Vec<f64> = (0..21).map(|k| k as f64 / 20.0).collect();
    let (mut runs, mut attempts, mut worst) = (0, 0, f64::NEG_INFINITY);
    while runs < 200 && attempts < 2000 {
        attempts += 1;
        let inst = random_instance(3, 3, RngSeed(rng.random()), 0.5)?;
        let class = random_class(&inst.mean_reward, 16, 0.1, &mut rng)?;
        let data = sample_bandit_with(&inst, 256, &mut rng)?;
        let eta = rng.random_range(0.5..8.0);
        let out = run_kl_pcb(&class, &data, &inst.reference_policy(), &inst.context_dist, eta, 0.05)?;
        if out.diagnostics.event_e != Some(true) {
            continue;
        }
        runs += 1;
        let g = g_curve(&inst, &out.diagnostics.f_pess, eta, &grid);
        worst = worst.max(g.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max));
    }
    verdict(runs == 200 && worst <= 1e-12, format!("{runs} runs with the event, max G increase {worst:.2e}"))
}

/// Wilson score lower bound at 99% confidence.
fn wilson_lower(successes: usize, trials: usize) -> f64 {
    let z = 2.575_829_303_548_900_4f64;
    let n = trials as f64;
    let p = successes as f64 / n;
    let centre = p + z * z / (2.0 * n);
    let spread = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt();
    (centre - spread) / (1.0 + z * z / n)
}

fn event_frequency() -> Result<Verdict> {
    let delta = 0.1;
    let inst = random_instance(2, 2, RngSeed(106), 0.3)?;
    let mut rng = RngSeed(106).stream(1);
    let class = random_class(&inst.mean_reward, 16, 0.15, &mut rng)?;
    let pi_ref = inst.reference_policy();
    let mut held = 0;
    for _ in 0..500 {
        let data = sample_bandit_with(&inst, 1024, &mut rng)?;
        let out = run_kl_pcb(&class, &data, &pi_ref, &inst.context_dist, 1.0, delta)?;
        held += usize::from(out.diagnostics.event_e == Some(true));
    }
    let rate = held as f64 / 500.0;
    let lower = wilson_lower(held, 500);
    verdict(
        rate >= 1.0 - delta || lower >= 0.86,
        format!("event held in {held}/500 datasets ({rate:.3}), 99% lower bound {lower:.3}"),
    )
}

fn sweep(spec: ScenarioSpec, algo: Algorithm, eta: f64, n_grid: Vec<usize>) -> Result<Vec<SweepRow>> {
    let mut cfg = SweepConfig::new(InstanceSource::Scenario(spec), algo, eta);
    cfg.n_grid = n_grid;
    cfg.seeds = 100;
    let rows = run_sweep(&cfg)?;
    if let Some(bad) = rows.iter().find(|r| !r.is_ok()) {
        return Err(regbandit::Error::InvalidParameter(format!("cell failed: {}", bad.status)));
    }
    Ok(rows)
}

fn describe(fit: &RateFit) -> String {
    format!("slope {:.3}, r² {:.3}", fit.slope, fit.r2)
}

fn full_grid() -> Vec<usize> {
    (7..=14).map(|k| 1 << k).collect()
}

fn kl_pcb_rate() -> Result<Verdict> {
    let rows = sweep(ScenarioSpec::Ladder, Algorithm::KlPcb, 1.0, full_grid())?;
    let fit = rate_fit(&rows, Statistic::Median)?;
    verdict((-1.25..=-0.80).contains(&fit.slope) && fit.r2 >= 0.95, describe(&fit))
}

fn f_cb_rate() -> Result<Verdict> {
    let sc = ScenarioSpec::SkewedLadder.build()?;
    let greedy: Vec<usize> = (0..sc.instance.num_states)
        .map(|s| {
            let row = sc.instance.mean_reward.row(s);
            (0..row.len()).fold(0, |best, a| if row[a] > row[best] { a } else { best })
        })
        .collect();
    let ratio = density_ratio_concentrability(
        &Policy::deterministic(sc.instance.num_actions, &greedy),
        &sc.instance.reference_policy(),
    );
    let rows = sweep(ScenarioSpec::SkewedLadder, Algorithm::FCb, 1.0, full_grid())?;
    let fit = rate_fit(&rows, Statistic::Median)?;
    verdict(
        ratio > 10.0 && (-1.25..=-0.80).contains(&fit.slope),
        format!("{}, greedy density ratio {ratio:.1}", describe(&fit)),
    )
}

fn dueling_rates() -> Result<Verdict> {
    let kl = rate_fit(&sweep(ScenarioSpec::DuelingLadder, Algorithm::KlPcdb, 0.5, full_grid())?, Statistic::Median)?;
    let f = rate_fit(&sweep(ScenarioSpec::DuelingLadder, Algorithm::FCdb, 1.0, full_grid())?, Statistic::Median)?;
    let ok = |fit: &RateFit| (-1.25..=-0.75).contains(&fit.slope);
    verdict(ok(&kl) && ok(&f), format!("kl_pcdb {}; f_cdb {}", describe(&kl), describe(&f)))
}

fn floor_margin(family: &HardFamily, floor: f64, rng: &mut Rng) -> Result<f64> {
    let reg = family.regularizer();
    let pairs = family.adjacent_pairs();
    let (states, actions) = family.instances[0].shape();
    let mut margin = f64::INFINITY;
    for _ in 0..1000 {
        let pi = random_policy(states, actions, rng);
        let per: Vec<Vec<f64>> =
            family.instances.iter().map(|inst| state_suboptimality(inst, &reg, &pi)).collect::<Result<_>>()?;
        for &(i, j, s) in &pairs {
            margin = margin.min(per[i][s] + per[j][s] - floor);
        }
    }
    Ok(margin)
}

fn lower_bound_floors() -> Result<Verdict> {
    let mut rng = RngSeed(110).rng();
    let kl = kl_hard_family(2, 4.0, 8.0, 512)?;
    let (eta, delta) = (kl.params.eta, kl.params.delta);
    let kl_floor = f64::min(eta * delta * delta / 8.0, 3.0 * delta / 10.0);
    let kl_margin = floor_margin(&kl, kl_floor, &mut rng)?;
    let chi2 = dueling_hard_family(2, 0.0, 1.0, 64, DuelingKind::Chi2, Some(1.0))?;
    let chi2_floor = chi2.params.eta * chi2.params.delta.powi(2) / chi2.params.alpha.unwrap_or(f64::NAN);
    let chi2_margin = floor_margin(&chi2, chi2_floor, &mut rng)?;
    verdict(
        kl_margin >= -1e-9 && chi2_margin >= -1e-9,
        format!(
            "KL floor {kl_floor:.4e} min margin {kl_margin:.3e}; chi2 dueling floor {chi2_floor:.4e} min margin {chi2_margin:.3e}"
        ),
    )
}

fn gv_codes() -> Result<Verdict> {
    let mut passed = true;
    let mut parts = Vec::new();
    for s in [8, 16, 32] {
        let code = gv_code(s)?;
        let mut closest = s;
        for i in 0..code.len() {
            for j in i + 1..code.len() {
                closest = closest.min(hamming(&code[i], &code[j]));
            }
        }
        passed &= code.len() >= required_size(s) && 2 * closest >= s && closest as u32 >= min_distance(s);
        parts.push(format!("S={s}: {} words (need {}), min distance {closest}", code.len(), required_size(s)));
    }
    verdict(passed, parts.join("; "))
}

fn construction_identities() -> Result<Verdict> {
    let (mut worst, mut tightest) = (0.0f64, 0.0f64);
    for (s, c, eta, n) in [(1, 4.0, 8.0, 64), (3, 4.0, 8.0, 1024), (2, 3.0, 6.0, 512)] {
        let fam = kl_hard_family(s, c, eta, n)?;
        let alpha = (c - 1.0f64).ln() / eta;
        let delta = (s as f64 * c / n as f64).sqrt();
        for (inst, tau) in fam.instances.iter().zip(&fam.labels) {
            let pi = optimal_policy(inst, &Regularizer::kl(eta))?;
            for (state, &t) in tau.iter().enumerate() {
                let e = (eta * (alpha + t as f64 * delta)).exp();
                worst = worst.max((pi.prob(state, 0) - e / (e + c - 1.0)).abs());
            }
            let r = density_ratio_concentrability(&pi, &inst.reference_policy());
            tightest = tightest.max(r / c);
            if r > c {
                return verdict(false, format!("density ratio {r} exceeds C* = {c}"));
            }
        }
    }
    verdict(worst <= 1e-12, format!("max closed-form gap {worst:.2e}; largest C^π*/C* {tightest:.3}"))
}

fn pessimism_benefit() -> Result<Verdict> {
    let spec = ScenarioSpec::Undercovered { n_target: 4096 };
    let eta = 10.0;
    let pess = summarize(&sweep(spec.clone(), Algorithm::KlPcb, eta, vec![4096])?, Statistic::Median)[0].1;
    let base = summarize(&sweep(spec, Algorithm::LsSoftmaxBaseline, eta, vec![4096])?, Statistic::Median)[0].1;
    verdict(pess <= base, format!("median suboptimality: kl_pcb {pess:.3e}, baseline {base:.3e}"))
}

type Criterion = (&'static str, Duration, fn() -> Result<Verdict>);

fn main() -> ExitCode {
    let criteria: [Criterion; 13] = [
        ("solver agreement", Duration::from_secs(10), solver_agreement),
        ("optimality of the regularized solvers", Duration::from_secs(30), optimality),
        ("KL suboptimality identity", Duration::from_secs(10), kl_identity),
        ("moment inequality fuzz", Duration::from_secs(5), moment_fuzz),
        ("G(γ) grid monotonicity", Duration::from_secs(60), g_monotone),
        ("confidence event frequency", Duration::from_secs(120), event_frequency),
        ("KL-PCB rate", Duration::from_secs(300), kl_pcb_rate),
        ("f-CB coverage-free rate", Duration::from_secs(300), f_cb_rate),
        ("dueling rates", Duration::from_secs(600), dueling_rates),
        ("lower-bound floors", Duration::from_secs(120), lower_bound_floors),
        ("GV code guarantees", Duration::from_secs(10), gv_codes),
        ("construction identities", Duration::from_secs(10), construction_identities),
        ("pessimism benefit", Duration::from_secs(120), pessimism_benefit),
    ];
    let only: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failures = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        if only.is_some_and(|k| k != i + 1) {
            continue;
        }
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let (passed, detail) = match outcome {
            Ok(v) => (v.passed && elapsed < *budget, v.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        failures += usize::from(!passed);
        println!(
            "[{}] {:>2}. {name}: {detail} ({:.2}s of {}s)",
            if passed { "PASS" } else { "FAIL" },
            i + 1,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("acceptance: {} failed", failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
