//! Fully implicit finite differences for the Black–Scholes put in log price.
//!
//! The PDE `∂t v + ½σ² v_yy + μ v_y − r v = 0` with `y = ln x`, `μ = r − ½σ²`
//! is marched backward from the payoff row with backward Euler. American
//! surfaces solve a linear complementarity problem against the payoff at
//! every step, so exercise is allowed at grid times only.

mod grid;
mod io;
mod lcp;
mod pricer;
mod tridiag;

pub use grid::{build_grid, GridSpec};
pub use io::{read_surface_bin, surface_to_csv, write_surface_bin, write_surface_csv};
pub use lcp::{psor_step, ObstacleMethod};
pub use pricer::{
    assemble_implicit_system, price_american, price_european, ExerciseStyle, MarketParams,
    PriceSurface, PutPayoff,
};
pub use tridiag::{thomas_solve, TridiagonalSystem};
