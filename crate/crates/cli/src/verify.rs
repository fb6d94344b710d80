use std::fs;
use std::str::FromStr;

use anyhow::Context;
use dnop_core::fd::{build_grid, price_american, price_european, PutPayoff};
use dnop_core::oracles::{bs_call, bs_put, crr_american_put, crr_european_put, BsQuote};
use dnop_core::pou::{
    approx_mul, mul_accuracy, partition_sum, path_approx_error, piecewise_bound, piecewise_const_approx, CenterGrid,
};
use dnop_core::sde::{
    discounted_terminal_mean, empirical_sup_moment, fit_tail, lipschitz_gap_check, mc_european_put, simulate_gbm,
};
use dnop_core::seed::derive_seed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{AssertionFailure, RunConfig, UsageError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Assumptions,
    Approximation,
    Lipschitz,
    Oracles,
}

pub const SUITES: &str = "assumptions, approximation, lipschitz, oracles";

impl FromStr for Suite {
    type Err = UsageError;

    fn from_str(s: &str) -> Result<Self, UsageError> {
        match s {
            "assumptions" => Ok(Suite::Assumptions),
            "approximation" => Ok(Suite::Approximation),
            "lipschitz" => Ok(Suite::Lipschitz),
            "oracles" => Ok(Suite::Oracles),
            other => Err(UsageError(format!("unknown suite {other:?}; valid suites: {SUITES}"))),
        }
    }
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Assumptions => "assumptions",
            Suite::Approximation => "approximation",
            Suite::Lipschitz => "lipschitz",
            Suite::Oracles => "oracles",
        }
    }
}

/// One named assertion: `value` compared against `threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            passed: value <= threshold,
        }
    }

    pub fn below(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            passed: value < threshold,
        }
    }

    pub fn within(name: impl Into<String>, value: f64, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold: hi,
            passed: value >= lo && value <= hi,
        }
    }

    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Self {
            name: name.into(),
            value: f64::from(u8::from(ok)),
            threshold: 1.0,
            passed: ok,
        }
    }
}

/// Row of the approximation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxRow {
    pub dim: usize,
    pub n_per_dim: usize,
    pub radius: f64,
    pub m: Option<usize>,
    pub interior_error: f64,
    pub tail_error: f64,
    pub bound: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub suite: Suite,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub table: Vec<ApproxRow>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub tail_table: Vec<(f64, f64)>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn first_failure(&self) -> Option<&Check> {
        self.checks.iter().find(|c| !c.passed)
    }
}

/// Runs a suite, writes its JSON report and fails naming the first broken check.
pub fn cmd_verify(cfg: &RunConfig, suite: Suite) -> anyhow::Result<VerifyReport> {
    let report = run_suite(cfg, suite)?;
    let dir = cfg.out_dir.join("verify");
    fs::create_dir_all(&dir)?;
    let path = dir.join(format!("{}.json", suite.name()));
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    for c in &report.checks {
        log::info!("{} {}: {:e} (threshold {:e})", if c.passed { "ok  " } else { "FAIL" }, c.name, c.value, c.threshold);
    }
    if let Some(c) = report.first_failure() {
        return Err(AssertionFailure(format!("{}: {:e} vs threshold {:e}", c.name, c.value, c.threshold)).into());
    }
    Ok(report)
}

pub fn run_suite(cfg: &RunConfig, suite: Suite) -> anyhow::Result<VerifyReport> {
    let mut report = VerifyReport {
        suite,
        checks: Vec::new(),
        table: Vec::new(),
        tail_table: Vec::new(),
    };
    match suite {
        Suite::Oracles => oracles(cfg, &mut report)?,
        Suite::Assumptions => assumptions(cfg, &mut report)?,
        Suite::Lipschitz => lipschitz(cfg, &mut report)?,
        Suite::Approximation => approximation(cfg, &mut report)?,
    }
    Ok(report)
}

fn oracles(cfg: &RunConfig, out: &mut VerifyReport) -> anyhow::Result<()> {
    let m = cfg.market()?;
    let t = cfg.grid.maturity;
    let mut parity: f64 = 0.0;
    for spot in [60.0, 80.0, 90.0, 100.0, 110.0, 120.0, 150.0] {
        for tau in [0.1, 0.5, 1.0, 2.0] {
            let q = BsQuote::new(spot, 100.0, m.rate, m.volatility, tau);
            let lhs = bs_call(&q)? - bs_put(&q)?;
            parity = parity.max((lhs - (spot - 100.0 * (-m.rate * tau).exp())).abs());
        }
    }
    out.checks.push(Check::below("put_call_parity_max_error", parity, 1e-10));

    let n = cfg.verify.crr_steps;
    let tree = |steps| crr_american_put(100.0, 100.0, &m, t, steps);
    let gap = (tree(n)? - tree(n / 2)?).abs();
    out.checks.push(Check::below("crr_step_halving_gap", gap, 0.01));
    let euro_gap = (crr_european_put(100.0, 100.0, &m, t, n)? - bs_put(&BsQuote::new(100.0, 100.0, m.rate, m.volatility, t))?).abs();
    out.checks.push(Check::below("crr_european_vs_closed_form", euro_gap, 0.01));
    let mut dominance = f64::INFINITY;
    for s in [80.0, 90.0, 100.0, 110.0, 120.0] {
        dominance = dominance.min(crr_american_put(s, 100.0, &m, t, 1000)? - crr_european_put(s, 100.0, &m, t, 1000)?);
    }
    out.checks.push(Check::holds("crr_american_dominates_european", dominance >= 0.0));

    let grid = cfg.grid()?;
    let payoff = PutPayoff::new(100.0)?;
    let euro = price_european(&m, &grid, &payoff)?;
    let xs = grid.x_nodes();
    let mut worst: f64 = 0.0;
    for (j, &x) in xs.iter().enumerate() {
        if (70.0..=160.0).contains(&x) {
            let bs = bs_put(&BsQuote::new(x, 100.0, m.rate, m.volatility, t))?;
            worst = worst.max((euro.values[[0, j]] - bs).abs());
        }
    }
    out.checks.push(Check::below("fd_european_vs_black_scholes", worst, 0.15));
    let atm_error = |n_time: usize| -> anyhow::Result<f64> {
        let g = build_grid(grid.x_min, grid.x_max, grid.n_space, t, n_time)?;
        let s = price_european(&m, &g, &payoff)?;
        Ok((s.interpolate(0.0, 100.0) - bs_put(&BsQuote::new(100.0, 100.0, m.rate, m.volatility, t))?).abs())
    };
    let ratio = atm_error(grid.n_time)? / atm_error(2 * grid.n_time)?;
    out.checks.push(Check::within("fd_time_refinement_ratio", ratio, 1.6, 2.4));

    let amer = price_american(&m, &grid, &payoff, &cfg.obstacle)?;
    let mut worst: f64 = 0.0;
    for s in [90.0, 100.0, 110.0] {
        worst = worst.max((amer.interpolate(0.0, s) - crr_american_put(s, 100.0, &m, t, n)?).abs());
    }
    out.checks.push(Check::below("fd_american_vs_crr", worst, 0.10));
    Ok(())
}

fn assumptions(cfg: &RunConfig, out: &mut VerifyReport) -> anyhow::Result<()> {
    let m = cfg.market()?;
    let v = &cfg.verify;
    let t = cfg.grid.maturity;
    let batch = simulate_gbm(v.x0, &m, t, v.path_steps, v.mc_paths, derive_seed(cfg.seed, "verify/assumptions"), false)?;
    let (mean, se) = discounted_terminal_mean(&batch, m.rate);
    out.checks.push(Check::at_most("martingale_mean_in_se", (mean - v.x0).abs() / se, 4.0));
    let (put, put_se) = mc_european_put(&batch, &PutPayoff::new(v.x0)?, m.rate);
    let exact = bs_put(&BsQuote::new(v.x0, v.x0, m.rate, m.volatility, t))?;
    out.checks.push(Check::at_most("mc_put_vs_closed_form_in_se", (put - exact).abs() / put_se, 4.0));
    let m1 = empirical_sup_moment(&batch, 1.0)?;
    let envelope = 3.0 * v.x0 * (m.rate * t).exp() * (m.volatility * m.volatility * t).exp();
    out.checks.push(Check::below("sup_moment_p1", m1, envelope));
    let unit = simulate_gbm(1.0, &m, t, v.path_steps, v.mc_paths, derive_seed(cfg.seed, "verify/unit"), false)?;
    let m2 = empirical_sup_moment(&unit, 2.0)?;
    let m4 = empirical_sup_moment(&unit, 4.0)?;
    out.checks.push(Check::holds("sup_moment_jensen_p4_vs_p2", m4 >= m2 * m2));
    let fit = fit_tail(&batch, &v.tail_radii)?;
    out.tail_table = fit.radii.iter().copied().zip(fit.probabilities.iter().copied()).collect();
    let decreasing = fit.probabilities.windows(2).all(|w| w[1] < w[0]);
    out.checks.push(Check::holds("tail_probabilities_strictly_decreasing", decreasing));
    out.checks.push(Check::below("tail_slope_vs_radius_squared", fit.slope.unwrap_or(f64::NAN), 0.0));
    let g = &cfg.grid;
    out.checks.push(Check::below("grid_exit_fraction", batch.exit_fraction(g.x_min, g.x_max), 0.01));
    Ok(())
}

/// Lipschitz pairs over the configured strike ladder.
pub fn lipschitz_checks(cfg: &RunConfig) -> anyhow::Result<Vec<Check>> {
    let m = cfg.market()?;
    let v = &cfg.verify;
    let grid = cfg.grid()?;
    let batch = simulate_gbm(
        v.x0,
        &m,
        grid.maturity,
        grid.n_time,
        v.lipschitz_paths,
        derive_seed(cfg.seed, "verify/lipschitz"),
        false,
    )?;
    let mut checks = Vec::new();
    for &k1 in &v.lipschitz_strikes {
        for &k2 in &v.lipschitz_strikes {
            let gap = lipschitz_gap_check(&m, &grid, &PutPayoff::new(k1)?, &PutPayoff::new(k2)?, &batch)?;
            let ratio = if gap.rhs > 0.0 { gap.lhs / gap.rhs } else { gap.lhs };
            checks.push(Check {
                name: format!("lipschitz_K{k1}_K{k2}"),
                value: ratio,
                threshold: 1.0 + v.lipschitz_margin,
                passed: gap.holds(v.lipschitz_margin),
            });
        }
    }
    Ok(checks)
}

fn lipschitz(cfg: &RunConfig, out: &mut VerifyReport) -> anyhow::Result<()> {
    out.checks = lipschitz_checks(cfg)?;
    Ok(())
}

fn approximation(cfg: &RunConfig, out: &mut VerifyReport) -> anyhow::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "verify/approximation"));
    let mut pou: f64 = 0.0;
    for (d, n, r) in [(1, 5, 1.0), (1, 41, 80.0), (2, 6, 2.0), (2, 11, 0.5)] {
        let g = CenterGrid::new(r, n, d)?;
        for _ in 0..1000 {
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-r..=r)).collect();
            pou = pou.max((partition_sum(&x, &g) - 1.0).abs());
        }
    }
    out.checks.push(Check::below("partition_of_unity_max_error", pou, 1e-12));

    type TestFn = (&'static str, f64, fn(&[f64]) -> f64);
    let functions: [TestFn; 3] = [
        ("constant", 0.0, |_| 7.0),
        ("linear", 1.0, |x| x.iter().sum::<f64>() / (x.len() as f64).sqrt()),
        ("put", 1.0, |x| (0.25 - x[0]).max(0.0)),
    ];
    for d in [1usize, 2] {
        for n in [5usize, 9, 17] {
            let g = CenterGrid::new(1.0, n, d)?;
            let pts = if d == 1 { 10_000 } else { 200 };
            for (name, lip, f) in functions {
                let approx = piecewise_const_approx(f, &g);
                let mut worst: f64 = 0.0;
                let coord = |i: usize| -1.0 + 2.0 * i as f64 / (pts - 1) as f64;
                if d == 1 {
                    for i in 0..pts {
                        worst = worst.max((f(&[coord(i)]) - approx(&[coord(i)])).abs());
                    }
                } else {
                    for i in 0..pts {
                        for j in 0..pts {
                            let x = [coord(i), coord(j)];
                            worst = worst.max((f(&x) - approx(&x)).abs());
                        }
                    }
                }
                let bound = piecewise_bound(1.0, lip, d, n) + 1e-12;
                let check = Check::at_most(format!("piecewise_{name}_d{d}_N{n}"), worst, bound);
                out.table.push(ApproxRow {
                    dim: d,
                    n_per_dim: n,
                    radius: 1.0,
                    m: None,
                    interior_error: worst,
                    tail_error: 0.0,
                    bound,
                    passed: check.passed,
                });
                out.checks.push(check);
            }
        }
    }

    let m = cfg.market()?;
    let v = &cfg.verify;
    let batch = simulate_gbm(v.x0, &m, cfg.grid.maturity, v.path_steps, 4000, derive_seed(cfg.seed, "verify/paths"), false)?
        .recentered(0.0);
    let strike = v.x0;
    let put = move |z: &[f64]| (strike - (z[0] + v.x0)).max(0.0);
    let radius = (v.x0 - cfg.grid.x_min).max(cfg.grid.x_max - v.x0);
    let mut interiors = Vec::new();
    for n in [21usize, 41] {
        let g = CenterGrid::new(radius, n, 1)?;
        let e = path_approx_error(put, &g, &batch)?;
        let bound = piecewise_bound(radius, 1.0, 1, n).powi(2);
        out.table.push(ApproxRow {
            dim: 1,
            n_per_dim: n,
            radius,
            m: None,
            interior_error: e.interior,
            tail_error: e.tail,
            bound,
            passed: e.interior <= bound,
        });
        interiors.push(e.interior);
    }
    out.checks.push(Check::within("path_interior_ratio_N_doubled", interiors[0] / interiors[1], 3.0, 5.0));
    let narrow = path_approx_error(put, &CenterGrid::new(20.0, 11, 1)?, &batch)?;
    let wide = path_approx_error(put, &CenterGrid::new(40.0, 21, 1)?, &batch)?;
    out.checks.push(Check::holds("path_tail_shrinks_with_radius", wide.tail < narrow.tail));

    for mm in [6usize, 8, 10] {
        let eps = mul_accuracy(mm, 1.0);
        let mut worst: f64 = 0.0;
        for i in 0..200 {
            for j in 0..200 {
                let x = -1.0 + 2.0 * i as f64 / 199.0;
                let y = -1.0 + 2.0 * j as f64 / 199.0;
                worst = worst.max((approx_mul(x, y, mm, 1.0)?.value - x * y).abs());
            }
        }
        let check = Check::at_most(format!("approx_mul_m{mm}"), worst, eps);
        out.table.push(ApproxRow {
            dim: 2,
            n_per_dim: 200,
            radius: 1.0,
            m: Some(mm),
            interior_error: worst,
            tail_error: 0.0,
            bound: eps,
            passed: check.passed,
        });
        out.checks.push(check);
    }
    Ok(())
}
