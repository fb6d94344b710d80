use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::fd::{
    build_grid, price_american, read_surface_bin, write_surface_bin, GridSpec, MarketParams, ObstacleMethod,
    PriceSurface, PutPayoff,
};
use crate::seed::sha256_hex;
use crate::Scalar;

/// Strikes listed here (to within 1e-9) go to the test split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRule {
    pub test_strikes: Vec<f64>,
}

impl Default for SplitRule {
    fn default() -> Self {
        Self {
            test_strikes: vec![95.0, 105.0, 113.0, 117.0],
        }
    }
}

impl SplitRule {
    fn is_test(&self, k: f64) -> bool {
        self.test_strikes.iter().any(|t| (t - k).abs() <= 1e-9)
    }
}

/// American FD surfaces for a strike family on one grid, split into train and test.
#[derive(Debug, Clone)]
pub struct SurfaceDataset<T> {
    pub grid: GridSpec<T>,
    pub market: MarketParams<T>,
    pub method: ObstacleMethod,
    pub strikes: Vec<T>,
    pub surfaces: Vec<PriceSurface<T>>,
    /// Indices into `strikes`.
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl<T: Scalar> SurfaceDataset<T> {
    pub fn len(&self) -> usize {
        self.strikes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strikes.is_empty()
    }

    pub fn train_strikes(&self) -> Vec<T> {
        self.train.iter().map(|&i| self.strikes[i]).collect()
    }

    pub fn test_strikes(&self) -> Vec<T> {
        self.test.iter().map(|&i| self.strikes[i]).collect()
    }

    pub fn max_strike(&self) -> T {
        self.strikes.iter().copied().fold(T::neg_infinity(), T::max)
    }

    /// Assembles a dataset from precomputed surfaces, checking the invariants.
    pub fn from_parts(
        grid: GridSpec<T>,
        market: MarketParams<T>,
        method: ObstacleMethod,
        strikes: Vec<T>,
        surfaces: Vec<PriceSurface<T>>,
        split: &SplitRule,
    ) -> Result<Self> {
        if strikes.is_empty() {
            return domain("dataset needs at least one strike");
        }
        if strikes.len() != surfaces.len() {
            return Err(Error::Shape(format!("{} strikes, {} surfaces", strikes.len(), surfaces.len())));
        }
        for (i, k) in strikes.iter().enumerate() {
            if strikes[..i].iter().any(|o| (*o - *k).abs() <= T::lit(1e-9)) {
                return domain(format!("strike {k} listed twice"));
            }
        }
        for s in &surfaces {
            if s.grid != grid || s.values.dim() != (grid.n_time + 1, grid.n_space) {
                return Err(Error::GridMismatch("surfaces must share the dataset grid".into()));
            }
        }
        let (mut test, mut train): (Vec<usize>, Vec<usize>) =
            (0..strikes.len()).partition(|&i| split.is_test(strikes[i].as_f64()));
        if train.is_empty() {
            log::warn!("every strike is in the test list; training on all of them");
            train = std::mem::take(&mut test);
        }
        Ok(Self {
            grid,
            market,
            method,
            strikes,
            surfaces,
            train,
            test,
        })
    }
}

/// Prices every strike with the American FD solver (in parallel) and splits the family.
pub fn build_dataset<T: Scalar>(
    strikes: &[T],
    market: &MarketParams<T>,
    grid: &GridSpec<T>,
    method: &ObstacleMethod,
    split: &SplitRule,
) -> Result<SurfaceDataset<T>> {
    let surfaces = strikes
        .par_iter()
        .map(|&k| {
            price_american(market, grid, &PutPayoff::new(k)?, method).map_err(|e| Error::AtStrike {
                strike: k.as_f64(),
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    SurfaceDataset::from_parts(grid.clone(), *market, method.clone(), strikes.to_vec(), surfaces, split)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub n_space: usize,
    pub maturity: f64,
    pub n_time: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestMarket {
    pub rate: f64,
    pub volatility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceEntry {
    pub strike: f64,
    pub file: String,
    pub sha256: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format: String,
    pub grid: ManifestGrid,
    pub market: ManifestMarket,
    pub method: ObstacleMethod,
    pub strikes: Vec<f64>,
    pub train_strikes: Vec<f64>,
    pub test_strikes: Vec<f64>,
    pub surfaces: Vec<SurfaceEntry>,
}

pub const MANIFEST_NAME: &str = "manifest.json";
const FORMAT_TAG: &str = "dnop-dataset-1";

fn surface_file_name(strike: f64) -> String {
    format!("surface_K{strike:.6}.bin")
}

/// Writes `manifest.json` and one binary surface per strike into `dir`.
pub fn save_dataset<T: Scalar>(data: &SurfaceDataset<T>, dir: &Path) -> Result<DatasetManifest> {
    fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(data.len());
    for (k, s) in data.strikes.iter().zip(&data.surfaces) {
        let file = surface_file_name(k.as_f64());
        let mut bytes = Vec::new();
        write_surface_bin(&s.values, MANIFEST_NAME, &mut bytes)?;
        fs::write(dir.join(&file), &bytes)?;
        entries.push(SurfaceEntry {
            strike: k.as_f64(),
            sha256: sha256_hex(&bytes),
            file,
            rows: s.values.nrows(),
            cols: s.values.ncols(),
        });
    }
    let g = &data.grid;
    let manifest = DatasetManifest {
        format: FORMAT_TAG.into(),
        grid: ManifestGrid {
            x_min: g.x_min.as_f64(),
            x_max: g.x_max.as_f64(),
            n_space: g.n_space,
            maturity: g.maturity.as_f64(),
            n_time: g.n_time,
        },
        market: ManifestMarket {
            rate: data.market.rate.as_f64(),
            volatility: data.market.volatility.as_f64(),
        },
        method: data.method.clone(),
        strikes: data.strikes.iter().map(|k| k.as_f64()).collect(),
        train_strikes: data.train_strikes().iter().map(|k| k.as_f64()).collect(),
        test_strikes: data.test_strikes().iter().map(|k| k.as_f64()).collect(),
        surfaces: entries,
    };
    let mut json = serde_json::to_string_pretty(&manifest)?;
    json.push('\n');
    fs::write(dir.join(MANIFEST_NAME), json)?;
    Ok(manifest)
}

/// Reads a dataset written by [`save_dataset`], verifying every blob hash.
pub fn load_dataset<T: Scalar>(dir: &Path) -> Result<SurfaceDataset<T>> {
    let path = dir.join(MANIFEST_NAME);
    let text = fs::read_to_string(&path)
        .map_err(|e| Error::Format(format!("cannot read dataset manifest {}: {e}", path.display())))?;
    let m: DatasetManifest = serde_json::from_str(&text)?;
    if m.format != FORMAT_TAG {
        return Err(Error::Format(format!("unknown dataset format {:?}", m.format)));
    }
    let grid = build_grid(
        T::lit(m.grid.x_min),
        T::lit(m.grid.x_max),
        m.grid.n_space,
        T::lit(m.grid.maturity),
        m.grid.n_time,
    )?;
    let market = MarketParams::new(T::lit(m.market.rate), T::lit(m.market.volatility))?;
    let mut strikes = Vec::new();
    let mut surfaces = Vec::new();
    for e in &m.surfaces {
        let bytes = fs::read(dir.join(&e.file))?;
        if sha256_hex(&bytes) != e.sha256 {
            return Err(Error::Format(format!("hash mismatch for {}", e.file)));
        }
        let (_, values) = read_surface_bin::<T, _>(&mut bytes.as_slice())?;
        if values.dim() != (e.rows, e.cols) {
            return Err(Error::Format(format!("{} has shape {:?}", e.file, values.dim())));
        }
        strikes.push(T::lit(e.strike));
        surfaces.push(PriceSurface {
            grid: grid.clone(),
            values,
            style: crate::fd::ExerciseStyle::American,
        });
    }
    let split = SplitRule {
        test_strikes: m.test_strikes.clone(),
    };
    let data = SurfaceDataset::from_parts(grid, market, m.method, strikes, surfaces, &split)?;
    if data.train_strikes().iter().map(|k| k.as_f64()).collect::<Vec<_>>() != m.train_strikes {
        return Err(Error::Format("manifest split is inconsistent".into()));
    }
    Ok(data)
}
