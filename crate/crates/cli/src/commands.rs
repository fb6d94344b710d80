use std::fs;
use std::io::BufWriter;
use std::path::Path;

use anyhow::Context;
use dnop_core::boundary::{clip_to_payoff, compare_boundaries, extract_boundary, ExerciseBoundary};
use dnop_core::fd::{price_american, surface_to_csv, PutPayoff};
use dnop_core::operator::{
    build_dataset, load_dataset, predict_surface, read_operator, relative_l2, save_dataset, train,
    write_operator, DatasetManifest, OperatorModel, TrainReport,
};
use dnop_core::oracles::{bs_call, bs_put, crr_american_put, crr_european_put, BsQuote};
use serde::{Deserialize, Serialize};

use crate::{RunConfig, UsageError};

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_config(cfg: &RunConfig, dir: &Path) -> anyhow::Result<()> {
    fs::write(dir.join("run_config.toml"), cfg.to_toml()).with_context(|| format!("writing config into {}", dir.display()))
}

fn warn_out_of_range(cfg: &RunConfig, strikes: &[f64]) {
    for &k in strikes {
        if k < cfg.strikes.valid_min || k > cfg.strikes.valid_max {
            log::warn!(
                "strike {k} is outside the trained range [{}, {}]",
                cfg.strikes.valid_min,
                cfg.strikes.valid_max
            );
        }
    }
}

/// Prices the strike family and writes the dataset with its manifest.
pub fn cmd_gen_data(cfg: &RunConfig) -> anyhow::Result<DatasetManifest> {
    warn_out_of_range(cfg, &cfg.strikes.list);
    let data = build_dataset(&cfg.strikes.list, &cfg.market()?, &cfg.grid()?, &cfg.obstacle, &cfg.split())?;
    let dir = cfg.dataset_dir();
    let manifest = save_dataset(&data, &dir)?;
    write_config(cfg, &dir)?;
    log::info!(
        "wrote {} surfaces ({} train, {} test) to {}",
        manifest.surfaces.len(),
        manifest.train_strikes.len(),
        manifest.test_strikes.len(),
        dir.display()
    );
    Ok(manifest)
}

/// Trains the operator on the saved dataset; writes the checkpoint, report and loss curve.
pub fn cmd_train(cfg: &RunConfig) -> anyhow::Result<TrainReport> {
    let data = load_dataset::<f64>(&cfg.dataset_dir())?;
    let train_cfg = cfg.train_config();
    let mut model = OperatorModel::new(&cfg.operator, &data.grid, data.max_strike(), cfg.seed)?;
    let start = std::time::Instant::now();
    let report = train(&mut model, &data, &train_cfg)?;
    log::info!(
        "trained {} epochs in {:.1}s, train MSE {:.3e}",
        train_cfg.epochs,
        start.elapsed().as_secs_f64(),
        report.final_train_loss
    );
    let dir = cfg.model_dir();
    fs::create_dir_all(&dir)?;
    let mut out = BufWriter::new(fs::File::create(cfg.checkpoint_path())?);
    write_operator(&model, &mut out)?;
    drop(out);
    write_json(&dir.join("train_report.json"), &report)?;
    let mut curve = String::from("epoch,loss\n");
    for (i, l) in report.epoch_losses.iter().enumerate() {
        curve += &format!("{i},{l:?}\n");
    }
    fs::write(dir.join("loss_curve.csv"), curve)?;
    write_config(cfg, &dir)?;
    Ok(report)
}

pub fn load_model(cfg: &RunConfig) -> anyhow::Result<OperatorModel<f64>> {
    let path = cfg.checkpoint_path();
    let file = fs::File::open(&path).map_err(|e| UsageError(format!("cannot open checkpoint {}: {e}", path.display())))?;
    Ok(read_operator(&mut std::io::BufReader::new(file))?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrikeEval {
    pub strike: f64,
    pub split: String,
    pub relative_l2: f64,
    pub negative_fraction: f64,
    pub boundary_node_distance: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub strikes: Vec<StrikeEval>,
    pub worst_test_relative_l2: Option<f64>,
    pub worst_test_boundary_distance: Option<usize>,
    /// Smallest `u(K₂) − u(K₁)` over nodes and predicted strike pairs `K₁ < K₂`.
    pub min_strike_monotonicity_gap: Option<f64>,
}

/// Scores the checkpoint against every dataset surface and writes test-strike predictions.
pub fn cmd_eval(cfg: &RunConfig) -> anyhow::Result<EvalReport> {
    let data = load_dataset::<f64>(&cfg.dataset_dir())?;
    let model = load_model(cfg)?;
    let dir = cfg.out_dir.join("eval");
    fs::create_dir_all(&dir)?;
    let mut strikes = Vec::new();
    let mut preds = Vec::new();
    for (i, (&k, fd)) in data.strikes.iter().zip(&data.surfaces).enumerate() {
        let payoff = PutPayoff::new(k)?;
        let pred = predict_surface(&model, &payoff, &data.grid)?;
        let b_fd = extract_boundary(fd, &payoff, cfg.boundary.tol)?;
        let b_model = extract_boundary(&clip_to_payoff(&pred.surface, &payoff), &payoff, cfg.boundary.tol)?;
        let test = data.test.contains(&i);
        if test {
            fs::write(dir.join(format!("predicted_K{k}.csv")), surface_to_csv(&pred.surface))?;
        }
        strikes.push(StrikeEval {
            strike: k,
            split: if test { "test" } else { "train" }.into(),
            relative_l2: relative_l2(&pred.surface, fd),
            negative_fraction: pred.negative_fraction,
            boundary_node_distance: compare_boundaries(&b_fd, &b_model)?,
        });
        preds.push((k, pred.surface));
    }
    preds.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut gap: Option<f64> = None;
    for (i, (_, lo)) in preds.iter().enumerate() {
        for (_, hi) in &preds[i + 1..] {
            let g = hi.values.iter().zip(lo.values.iter()).map(|(h, l)| h - l).fold(f64::INFINITY, f64::min);
            gap = Some(gap.map_or(g, |v| v.min(g)));
        }
    }
    let tests: Vec<&StrikeEval> = strikes.iter().filter(|s| s.split == "test").collect();
    let report = EvalReport {
        worst_test_relative_l2: tests.iter().map(|s| s.relative_l2).reduce(f64::max),
        worst_test_boundary_distance: tests.iter().map(|s| s.boundary_node_distance).max(),
        min_strike_monotonicity_gap: gap,
        strikes,
    };
    write_json(&dir.join("eval_report.json"), &report)?;
    write_config(cfg, &dir)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryReport {
    pub strike: f64,
    pub max_node_distance: usize,
    pub fd: ExerciseBoundary<f64>,
    pub model: ExerciseBoundary<f64>,
}

/// FD and learned exercise boundaries for one strike, as CSV `t,b_fd,b_model,node_distance`.
pub fn cmd_boundary(cfg: &RunConfig, strike: f64) -> anyhow::Result<BoundaryReport> {
    let (lo, hi) = (cfg.strikes.valid_min, cfg.strikes.valid_max);
    if !(strike >= lo && strike <= hi) {
        return Err(UsageError(format!("strike {strike} outside the supported range [{lo}, {hi}]")).into());
    }
    let model = load_model(cfg)?;
    let grid = cfg.grid()?;
    let payoff = PutPayoff::new(strike)?;
    let fd = price_american(&cfg.market()?, &grid, &payoff, &cfg.obstacle)?;
    let pred = predict_surface(&model, &payoff, &grid)?;
    let b_fd = extract_boundary(&fd, &payoff, cfg.boundary.tol)?;
    let b_model = extract_boundary(&clip_to_payoff(&pred.surface, &payoff), &payoff, cfg.boundary.tol)?;
    let max_node_distance = compare_boundaries(&b_fd, &b_model)?;
    let dir = cfg.out_dir.join("boundary");
    fs::create_dir_all(&dir)?;
    let mut csv = String::from("t,b_fd,b_model,node_distance\n");
    for n in 0..b_fd.len() {
        csv += &format!(
            "{:?},{:?},{:?},{}\n",
            b_fd.times[n],
            b_fd.critical_prices[n],
            b_model.critical_prices[n],
            b_fd.node_indices[n].abs_diff(b_model.node_indices[n])
        );
    }
    fs::write(dir.join(format!("boundary_K{strike}.csv")), csv)?;
    let report = BoundaryReport {
        strike,
        max_node_distance,
        fd: b_fd,
        model: b_model,
    };
    write_json(&dir.join(format!("boundary_K{strike}.json")), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quote {
    pub model: String,
    pub spot: f64,
    pub strike: f64,
    pub rate: f64,
    pub volatility: f64,
    pub tau: f64,
    pub put: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub call: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub european_put: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
}

pub fn cmd_bs_price(cfg: &RunConfig, spot: f64, strike: f64, tau: f64) -> anyhow::Result<Quote> {
    let m = cfg.market()?;
    let q = BsQuote::new(spot, strike, m.rate, m.volatility, tau);
    Ok(Quote {
        model: "black-scholes".into(),
        spot,
        strike,
        rate: m.rate,
        volatility: m.volatility,
        tau,
        put: bs_put(&q)?,
        call: Some(bs_call(&q)?),
        european_put: None,
        steps: None,
    })
}

pub fn cmd_crr_price(cfg: &RunConfig, spot: f64, strike: f64, tau: f64, steps: usize) -> anyhow::Result<Quote> {
    let m = cfg.market()?;
    Ok(Quote {
        model: "crr-american".into(),
        spot,
        strike,
        rate: m.rate,
        volatility: m.volatility,
        tau,
        put: crr_american_put(spot, strike, &m, tau, steps)?,
        call: None,
        european_put: Some(crr_european_put(spot, strike, &m, tau, steps)?),
        steps: Some(steps),
    })
}
