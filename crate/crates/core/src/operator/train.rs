use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::SurfaceDataset;
use super::model::{encode_payoff, grid_trunk_inputs, operator_forward, predict_with_basis, OperatorModel};
use crate::error::{domain, Error, Result};
use crate::fd::{PriceSurface, PutPayoff};
use crate::neural::{adam_step, AdamState, TrainConfig};
use crate::seed::derive_seed;
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrikeMetric {
    pub strike: f64,
    pub relative_l2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Train objective of the initial model.
    pub initial_loss: f64,
    /// Mean tuple loss seen during each epoch.
    pub epoch_losses: Vec<f64>,
    pub final_train_loss: f64,
    pub final_test_loss: Option<f64>,
    pub points_per_batch: usize,
    pub steps: usize,
    pub train_metrics: Vec<StrikeMetric>,
    pub test_metrics: Vec<StrikeMetric>,
}

/// `‖p − u‖₂ / ‖u‖₂` over every node.
pub fn relative_l2<T: Scalar>(pred: &PriceSurface<T>, truth: &PriceSurface<T>) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (p, u) in pred.values.iter().zip(truth.values.iter()) {
        let (p, u) = (p.as_f64(), u.as_f64());
        num += (p - u) * (p - u);
        den += u * u;
    }
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

/// Normalized mean squared error over every node of the selected surfaces.
pub fn objective<T: Scalar>(model: &OperatorModel<T>, data: &SurfaceDataset<T>, which: &[usize]) -> Result<f64> {
    if which.is_empty() {
        return domain("objective over no surfaces");
    }
    let basis = model.trunk.forward_batch(grid_trunk_inputs(&model.norm, &data.grid).view())?;
    let scale = model.norm.u_scale;
    let mut total = T::zero();
    let mut count = 0usize;
    for &k in which {
        let enc = encode_payoff(&PutPayoff::new(data.strikes[k])?, &model.sensors, scale);
        let coeffs = Array1::from(model.branch.forward(&enc)?);
        let pred = basis.dot(&coeffs);
        for (p, u) in pred.iter().zip(data.surfaces[k].values.iter()) {
            let r = *p - *u / scale;
            total += r * r;
        }
        count += pred.len();
    }
    Ok(total.as_f64() / count as f64)
}

/// The same objective assembled one `(strike, t, x)` tuple at a time through [`operator_forward`].
pub fn objective_by_tuples<T: Scalar>(
    model: &OperatorModel<T>,
    data: &SurfaceDataset<T>,
    which: &[usize],
) -> Result<f64> {
    let xs = data.grid.x_nodes();
    let scale = model.norm.u_scale;
    let mut total = 0.0;
    let mut count = 0usize;
    for &k in which {
        let payoff = PutPayoff::new(data.strikes[k])?;
        for n in 0..=data.grid.n_time {
            for (j, &x) in xs.iter().enumerate() {
                let p = operator_forward(model, &payoff, data.grid.time(n), x)? / scale;
                let r = (p - data.surfaces[k].values[[n, j]] / scale).as_f64();
                total += r * r;
                count += 1;
            }
        }
    }
    Ok(total / count as f64)
}

fn strike_metrics<T: Scalar>(
    model: &OperatorModel<T>,
    data: &SurfaceDataset<T>,
    which: &[usize],
    basis: &Array2<T>,
) -> Result<Vec<StrikeMetric>> {
    which
        .iter()
        .map(|&k| {
            let pred = predict_with_basis(model, &PutPayoff::new(data.strikes[k])?, &data.grid, basis.view())?;
            Ok(StrikeMetric {
                strike: data.strikes[k].as_f64(),
                relative_l2: relative_l2(&pred.surface, &data.surfaces[k]),
            })
        })
        .collect()
}

/// Adam on the normalized squared error over `(strike, t, x)` tuples of the train split.
///
/// Each mini-batch pairs every train strike with a block of
/// `⌈batch_size / train strikes⌉` grid nodes; an epoch visits every node once,
/// in an order drawn from the seeded stream.
pub fn train<T: Scalar>(
    model: &mut OperatorModel<T>,
    data: &SurfaceDataset<T>,
    config: &TrainConfig,
) -> Result<TrainReport> {
    config.validate()?;
    if data.train.is_empty() {
        return domain("dataset has no training surfaces");
    }
    let scale = model.norm.u_scale;
    let inputs = grid_trunk_inputs(&model.norm, &data.grid);
    let n_points = inputs.nrows();
    let n_strikes = data.train.len();

    let mut enc = Array2::zeros((n_strikes, model.sensors.len()));
    let mut targets = Array2::zeros((n_strikes, n_points));
    for (row, &k) in data.train.iter().enumerate() {
        let e = encode_payoff(&PutPayoff::new(data.strikes[k])?, &model.sensors, scale);
        enc.row_mut(row).assign(&Array1::from(e));
        for (dst, src) in targets.row_mut(row).iter_mut().zip(data.surfaces[k].values.iter()) {
            *dst = *src / scale;
        }
    }

    let per_batch = config.batch_size.div_ceil(n_strikes).clamp(1, n_points);
    let mut order: Vec<usize> = (0..n_points).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "batch-order"));
    let mut branch_state = AdamState::new(&model.branch);
    let mut trunk_state = AdamState::new(&model.trunk);

    let initial_loss = objective(model, data, &data.train)?;
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut steps = 0usize;
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let lr = config.learning_rate_at(epoch);
        let mut sum = 0.0;
        for chunk in order.chunks(per_batch) {
            let x = inputs.select(Axis(0), chunk);
            let y = targets.select(Axis(1), chunk);
            let bt = model.branch.forward_trace(enc.view())?;
            let tt = model.trunk.forward_trace(x.view())?;
            let resid = bt.output.dot(&tt.output.t()) - &y;
            let count = T::from_usize_lossy(resid.len());
            sum += resid.iter().map(|r| *r * *r).sum::<T>().as_f64();
            let d_pred = resid * (T::lit(2.0) / count);
            let d_branch = d_pred.dot(&tt.output);
            let d_trunk = d_pred.t().dot(&bt.output);
            let (gb, _) = model.branch.backprop(&bt, d_branch);
            let (gt, _) = model.trunk.backprop(&tt, d_trunk);
            adam_step(&mut model.branch, &gb, &mut branch_state, config, lr)?;
            adam_step(&mut model.trunk, &gt, &mut trunk_state, config, lr)?;
            steps += 1;
        }
        let loss = sum / (n_points * n_strikes) as f64;
        if !loss.is_finite() || loss > 10.0 * initial_loss.max(f64::MIN_POSITIVE) {
            return Err(Error::Divergence {
                epoch,
                loss,
                initial: initial_loss,
            });
        }
        if epoch % 25 == 0 || epoch + 1 == config.epochs {
            log::info!("epoch {epoch:4}  lr {lr:.2e}  loss {loss:.3e}");
        }
        epoch_losses.push(loss);
    }

    let basis = model.trunk.forward_batch(inputs.view())?;
    Ok(TrainReport {
        initial_loss,
        epoch_losses,
        final_train_loss: objective(model, data, &data.train)?,
        final_test_loss: if data.test.is_empty() {
            None
        } else {
            Some(objective(model, data, &data.test)?)
        },
        points_per_batch: per_batch,
        steps,
        train_metrics: strike_metrics(model, data, &data.train, &basis)?,
        test_metrics: strike_metrics(model, data, &data.test, &basis)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fd::{build_grid, ExerciseStyle, MarketParams, ObstacleMethod};
    use crate::operator::{build_dataset, Architecture, SplitRule};

    fn arch() -> Architecture {
        Architecture {
            n_sensors: 16,
            latent: 8,
            branch_hidden: vec![16],
            trunk_hidden: vec![16],
        }
    }

    fn small_data() -> SurfaceDataset<f64> {
        let grid = build_grid(45.0, 180.0, 30, 1.0, 5).unwrap();
        let market = MarketParams::new(0.1, 0.2).unwrap();
        let split = SplitRule { test_strikes: vec![105.0] };
        build_dataset(&[95.0, 100.0, 105.0, 110.0], &market, &grid, &ObstacleMethod::default(), &split).unwrap()
    }

    #[test]
    fn objective_matches_tuple_assembly() {
        let d = small_data();
        let m = OperatorModel::new(&arch(), &d.grid, 120.0, 4).unwrap();
        let a = objective(&m, &d, &d.train).unwrap();
        let b = objective_by_tuples(&m, &d, &d.train).unwrap();
        assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
    }

    #[test]
    fn epoch_loss_with_tiny_lr_equals_objective() {
        let d = small_data();
        let mut m = OperatorModel::new(&arch(), &d.grid, 120.0, 4).unwrap();
        let before = objective_by_tuples(&m, &d, &d.train).unwrap();
        let cfg = TrainConfig {
            learning_rate: 1e-300,
            final_learning_rate: 1e-300,
            epochs: 1,
            batch_size: 40,
            ..TrainConfig::default()
        };
        let r = train(&mut m, &d, &cfg).unwrap();
        assert!((r.epoch_losses[0] - before).abs() <= 1e-12);
    }

    #[test]
    fn zero_surface_is_learned() {
        let grid = build_grid(45.0, 180.0, 20, 1.0, 4).unwrap();
        let market = MarketParams::new(0.1, 0.2).unwrap();
        let zero = PriceSurface {
            grid: grid.clone(),
            values: Array2::zeros((5, 20)),
            style: ExerciseStyle::American,
        };
        let d = SurfaceDataset::from_parts(
            grid.clone(),
            market,
            ObstacleMethod::default(),
            vec![100.0],
            vec![zero],
            &SplitRule::default(),
        )
        .unwrap();
        let mut m = OperatorModel::new(&arch(), &grid, 120.0, 2).unwrap();
        let cfg = TrainConfig {
            epochs: 200,
            batch_size: 8,
            learning_rate: 1e-2,
            final_learning_rate: 1e-5,
            ..TrainConfig::default()
        };
        let r = train(&mut m, &d, &cfg).unwrap();
        assert!(r.final_train_loss < 1e-8, "{}", r.final_train_loss);
        assert_eq!(r.final_test_loss, None);
    }

    #[test]
    fn deterministic_and_decreasing() {
        let d = small_data();
        let cfg = TrainConfig {
            epochs: 60,
            batch_size: 64,
            ..TrainConfig::default()
        };
        let mut a = OperatorModel::new(&arch(), &d.grid, 120.0, 9).unwrap();
        let mut b = a.clone();
        let ra = train(&mut a, &d, &cfg).unwrap();
        let rb = train(&mut b, &d, &cfg).unwrap();
        assert_eq!(ra, rb);
        assert_eq!(a, b);
        let windows: Vec<f64> = ra.epoch_losses.chunks(10).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
        assert!(windows.windows(2).all(|w| w[1] <= w[0]), "{windows:?}");
        assert!(ra.final_train_loss < ra.initial_loss);
        assert_eq!(ra.test_metrics.len(), 1);
    }

    #[test]
    fn divergence_reported() {
        let d = small_data();
        let mut m = OperatorModel::new(&arch(), &d.grid, 120.0, 9).unwrap();
        let cfg = TrainConfig {
            learning_rate: 50.0,
            final_learning_rate: 50.0,
            epochs: 30,
            batch_size: 16,
            ..TrainConfig::default()
        };
        assert!(matches!(train(&mut m, &d, &cfg), Err(Error::Divergence { .. })));
    }
}
