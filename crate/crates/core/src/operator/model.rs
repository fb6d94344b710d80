use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::fd::{ExerciseStyle, GridSpec, PriceSurface, PutPayoff};
use crate::neural::Mlp;
use crate::seed::derive_seed;
use crate::Scalar;

/// Equispaced sensor prices on `[x_min, x_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorSet<T> {
    points: Vec<T>,
}

impl<T: Scalar> SensorSet<T> {
    pub fn equispaced(x_min: T, x_max: T, count: usize) -> Result<Self> {
        if count < 2 || !(x_max > x_min) {
            return domain(format!("need ≥ 2 sensors on a nonempty interval, got {count}"));
        }
        let h = (x_max - x_min) / T::from_usize_lossy(count - 1);
        let mut points: Vec<T> = (0..count).map(|i| x_min + T::from_usize_lossy(i) * h).collect();
        points[count - 1] = x_max;
        Ok(Self { points })
    }

    pub fn from_points(points: Vec<T>) -> Result<Self> {
        if points.len() < 2 || points.windows(2).any(|w| !(w[1] > w[0])) {
            return domain("sensor points must be strictly increasing");
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[T] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Affine input maps `t/T`, `(x − x_min)/(x_max − x_min)` and the output scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization<T> {
    pub maturity: T,
    pub x_min: T,
    pub x_max: T,
    /// Prices are divided by this (the largest strike of the family).
    pub u_scale: T,
}

impl<T: Scalar> Normalization<T> {
    pub fn trunk_input(&self, t: T, x: T) -> [T; 2] {
        [t / self.maturity, (x - self.x_min) / (self.x_max - self.x_min)]
    }
}

/// Hidden layer widths and latent size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub n_sensors: usize,
    pub latent: usize,
    pub branch_hidden: Vec<usize>,
    pub trunk_hidden: Vec<usize>,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            n_sensors: 64,
            latent: 64,
            branch_hidden: vec![128, 128],
            trunk_hidden: vec![128, 128],
        }
    }
}

impl Architecture {
    pub fn branch_dims(&self) -> Vec<usize> {
        let mut d = vec![self.n_sensors];
        d.extend(&self.branch_hidden);
        d.push(self.latent);
        d
    }

    pub fn trunk_dims(&self) -> Vec<usize> {
        let mut d = vec![2];
        d.extend(&self.trunk_hidden);
        d.push(self.latent);
        d
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorModel<T> {
    pub branch: Mlp<T>,
    pub trunk: Mlp<T>,
    pub sensors: SensorSet<T>,
    pub norm: Normalization<T>,
}

impl<T: Scalar> OperatorModel<T> {
    /// Fresh model on `grid` with branch and trunk seeded from labeled streams of `seed`.
    pub fn new(arch: &Architecture, grid: &GridSpec<T>, u_scale: T, seed: u64) -> Result<Self> {
        let sensors = SensorSet::equispaced(grid.x_min, grid.x_max, arch.n_sensors)?;
        let branch = Mlp::init(&arch.branch_dims(), derive_seed(seed, "branch-init"))?;
        let trunk = Mlp::init(&arch.trunk_dims(), derive_seed(seed, "trunk-init"))?;
        Self::from_parts(
            branch,
            trunk,
            sensors,
            Normalization {
                maturity: grid.maturity,
                x_min: grid.x_min,
                x_max: grid.x_max,
                u_scale,
            },
        )
    }

    pub fn from_parts(
        branch: Mlp<T>,
        trunk: Mlp<T>,
        sensors: SensorSet<T>,
        norm: Normalization<T>,
    ) -> Result<Self> {
        if branch.output_dim() != trunk.output_dim() {
            return Err(Error::Shape(format!(
                "branch emits {} channels, trunk {}",
                branch.output_dim(),
                trunk.output_dim()
            )));
        }
        if branch.input_dim() != sensors.len() || trunk.input_dim() != 2 {
            return Err(Error::Shape("branch must read the sensors, trunk (t, x)".into()));
        }
        if !(norm.u_scale > T::zero()) || !(norm.maturity > T::zero()) || !(norm.x_max > norm.x_min) {
            return domain("degenerate normalization");
        }
        Ok(Self { branch, trunk, sensors, norm })
    }

    pub fn latent(&self) -> usize {
        self.branch.output_dim()
    }

    /// Branch coefficients for an arbitrary payoff sampled at the sensors.
    pub fn coefficients_for(&self, payoff: impl Fn(T) -> T) -> Result<Vec<T>> {
        let enc: Vec<T> = self
            .sensors
            .points()
            .iter()
            .map(|&x| payoff(x) / self.norm.u_scale)
            .collect();
        self.branch.forward(&enc)
    }

    /// Trunk basis at every grid node, rows ordered `(n, j)` row-major.
    pub fn trunk_basis(&self, grid: &GridSpec<T>) -> Result<Array2<T>> {
        self.trunk.forward_batch(grid_trunk_inputs(&self.norm, grid).view())
    }
}

/// Normalized trunk inputs for all nodes, rows ordered `(n, j)` row-major.
pub(crate) fn grid_trunk_inputs<T: Scalar>(norm: &Normalization<T>, grid: &GridSpec<T>) -> Array2<T> {
    let xs = grid.x_nodes();
    let ts = grid.times();
    let mut inputs = Array2::zeros((ts.len() * xs.len(), 2));
    for (n, &t) in ts.iter().enumerate() {
        for (j, &x) in xs.iter().enumerate() {
            let [a, b] = norm.trunk_input(t, x);
            inputs[[n * xs.len() + j, 0]] = a;
            inputs[[n * xs.len() + j, 1]] = b;
        }
    }
    inputs
}

/// Payoff at each sensor, divided by the model's output scale.
pub fn encode_payoff<T: Scalar>(payoff: &PutPayoff<T>, sensors: &SensorSet<T>, u_scale: T) -> Vec<T> {
    sensors.points().iter().map(|&x| payoff.eval(x) / u_scale).collect()
}

/// `Σ_k branch_k(ḡ)·trunk_k(t̄, x̄)` in price units.
pub fn operator_forward<T: Scalar>(model: &OperatorModel<T>, payoff: &PutPayoff<T>, t: T, x: T) -> Result<T> {
    let n = &model.norm;
    let tol = T::lit(1e-12);
    if !(t >= -tol && t <= n.maturity * (T::one() + tol)) {
        return domain(format!("time {t} outside [0, {}]", n.maturity));
    }
    if !(x >= n.x_min * (T::one() - tol) && x <= n.x_max * (T::one() + tol)) {
        return domain(format!("price {x} outside [{}, {}]", n.x_min, n.x_max));
    }
    let a = model.branch.forward(&encode_payoff(payoff, &model.sensors, n.u_scale))?;
    let q = model.trunk.forward(&n.trunk_input(t, x))?;
    Ok(a.iter().zip(&q).map(|(a, q)| *a * *q).sum::<T>() * n.u_scale)
}

#[derive(Debug, Clone)]
pub struct PredictedSurface<T> {
    /// Clipped at zero; American style.
    pub surface: PriceSurface<T>,
    pub negative_fraction: f64,
}

/// Evaluates the operator at every node of the training grid.
pub fn predict_surface<T: Scalar>(
    model: &OperatorModel<T>,
    payoff: &PutPayoff<T>,
    grid: &GridSpec<T>,
) -> Result<PredictedSurface<T>> {
    let basis = model.trunk_basis(grid)?;
    predict_with_basis(model, payoff, grid, basis.view())
}

pub(crate) fn predict_with_basis<T: Scalar>(
    model: &OperatorModel<T>,
    payoff: &PutPayoff<T>,
    grid: &GridSpec<T>,
    basis: ArrayView2<'_, T>,
) -> Result<PredictedSurface<T>> {
    let n = &model.norm;
    let close = |a: T, b: T| (a - b).abs() <= T::lit(1e-9) * (T::one() + b.abs());
    if !close(grid.x_min, n.x_min) || !close(grid.x_max, n.x_max) || !close(grid.maturity, n.maturity) {
        return Err(Error::GridMismatch(format!(
            "model trained on [{}, {}]×[0, {}], asked for [{}, {}]×[0, {}]",
            n.x_min, n.x_max, n.maturity, grid.x_min, grid.x_max, grid.maturity
        )));
    }
    let coeffs = Array1::from(model.branch.forward(&encode_payoff(payoff, &model.sensors, n.u_scale))?);
    let flat = basis.dot(&coeffs) * n.u_scale;
    let mut negatives = 0usize;
    let values = Array2::from_shape_fn((grid.n_time + 1, grid.n_space), |(i, j)| {
        let v = flat[i * grid.n_space + j];
        if v < T::zero() {
            negatives += 1;
            T::zero()
        } else {
            v
        }
    });
    Ok(PredictedSurface {
        surface: PriceSurface {
            grid: grid.clone(),
            values,
            style: ExerciseStyle::American,
        },
        negative_fraction: negatives as f64 / flat.len() as f64,
    })
}
