use std::path::{Path, PathBuf};

use anyhow::Context;
use dnop_core::fd::{build_grid, GridSpec, MarketParams, ObstacleMethod};
use dnop_core::neural::TrainConfig;
use dnop_core::operator::{Architecture, SplitRule};
use serde::{Deserialize, Serialize};

use crate::UsageError;

/// Everything a run depends on. Written next to every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Root seed; every random stream is derived from it by label.
    pub seed: u64,
    pub out_dir: PathBuf,
    pub market: MarketSection,
    pub grid: GridSection,
    pub strikes: StrikeSection,
    pub obstacle: ObstacleMethod,
    pub operator: Architecture,
    pub train: TrainSection,
    pub boundary: BoundarySection,
    pub verify: VerifySection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            out_dir: PathBuf::from("out"),
            market: MarketSection::default(),
            grid: GridSection::default(),
            strikes: StrikeSection::default(),
            obstacle: ObstacleMethod::default(),
            operator: Architecture::default(),
            train: TrainSection::default(),
            boundary: BoundarySection::default(),
            verify: VerifySection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarketSection {
    pub rate: f64,
    pub volatility: f64,
}

impl Default for MarketSection {
    fn default() -> Self {
        Self { rate: 0.1, volatility: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub x_min: f64,
    pub x_max: f64,
    pub n_space: usize,
    pub maturity: f64,
    pub n_time: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            x_min: 45.0,
            x_max: 180.0,
            n_space: 300,
            maturity: 1.0,
            n_time: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrikeSection {
    pub list: Vec<f64>,
    pub test: Vec<f64>,
    /// Strikes accepted by `boundary`.
    pub valid_min: f64,
    pub valid_max: f64,
}

impl Default for StrikeSection {
    fn default() -> Self {
        Self {
            list: (90..=120).map(f64::from).collect(),
            test: SplitRule::default().test_strikes,
            valid_min: 90.0,
            valid_max: 120.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub final_learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_stability: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            learning_rate: t.learning_rate,
            final_learning_rate: t.final_learning_rate,
            epochs: t.epochs,
            batch_size: t.batch_size,
            beta1: t.beta1,
            beta2: t.beta2,
            eps_stability: t.eps_stability,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundarySection {
    pub tol: f64,
}

impl Default for BoundarySection {
    fn default() -> Self {
        Self {
            tol: dnop_core::boundary::DEFAULT_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    pub x0: f64,
    pub mc_paths: usize,
    pub path_steps: usize,
    pub lipschitz_paths: usize,
    pub lipschitz_strikes: Vec<f64>,
    pub lipschitz_margin: f64,
    pub tail_radii: Vec<f64>,
    pub crr_steps: usize,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            x0: 100.0,
            mc_paths: 100_000,
            path_steps: 50,
            lipschitz_paths: 10_000,
            lipschitz_strikes: vec![90.0, 97.5, 105.0, 112.5, 120.0],
            lipschitz_margin: 0.05,
            tail_radii: vec![20.0, 40.0, 60.0],
            crr_steps: 5000,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| UsageError(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let bad = |m: String| -> anyhow::Result<()> { Err(UsageError(m).into()) };
        if let Err(e) = self.market() {
            return bad(e.to_string());
        }
        if let Err(e) = self.grid() {
            return bad(e.to_string());
        }
        if let Err(e) = self.obstacle.validate() {
            return bad(e.to_string());
        }
        if let Err(e) = self.train_config().validate() {
            return bad(e.to_string());
        }
        if self.strikes.list.is_empty() {
            return bad("strike list is empty".into());
        }
        if self.strikes.list.iter().any(|k| !(*k > 0.0)) {
            return bad("strikes must be positive".into());
        }
        if !(self.boundary.tol > 0.0) {
            return bad("boundary tolerance must be positive".into());
        }
        Ok(())
    }

    pub fn market(&self) -> dnop_core::Result<MarketParams<f64>> {
        MarketParams::new(self.market.rate, self.market.volatility)
    }

    pub fn grid(&self) -> dnop_core::Result<GridSpec<f64>> {
        let g = &self.grid;
        build_grid(g.x_min, g.x_max, g.n_space, g.maturity, g.n_time)
    }

    pub fn split(&self) -> SplitRule {
        SplitRule {
            test_strikes: self.strikes.test.clone(),
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            learning_rate: t.learning_rate,
            final_learning_rate: t.final_learning_rate,
            epochs: t.epochs,
            batch_size: t.batch_size,
            seed: self.seed,
            beta1: t.beta1,
            beta2: t.beta2,
            eps_stability: t.eps_stability,
        }
    }

    pub fn dataset_dir(&self) -> PathBuf {
        self.out_dir.join("dataset")
    }

    pub fn model_dir(&self) -> PathBuf {
        self.out_dir.join("model")
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.model_dir().join("operator.ckpt")
    }
}
