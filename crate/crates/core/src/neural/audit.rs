use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::mlp::Mlp;
use crate::Scalar;

/// Size and magnitude limits of a ReLU network class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkClassSpec {
    pub d_in: usize,
    pub d_out: usize,
    /// Maximum number of affine layers.
    pub depth_l: usize,
    pub width_p: usize,
    /// Maximum count of nonzero weights and biases.
    pub sparsity_k: usize,
    pub weight_bound_kappa: f64,
    pub output_bound_r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub depth: usize,
    pub max_width: usize,
    pub nonzero_params: usize,
    pub max_abs_param: f64,
    pub max_abs_output: f64,
    pub dims_ok: bool,
    pub depth_ok: bool,
    pub width_ok: bool,
    pub sparsity_ok: bool,
    pub kappa_ok: bool,
    pub output_ok: bool,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.dims_ok && self.depth_ok && self.width_ok && self.sparsity_ok && self.kappa_ok && self.output_ok
    }
}

/// Checks a network against a class; output magnitudes are taken over `domain_sample` rows.
pub fn audit_class<T: Scalar>(
    net: &Mlp<T>,
    spec: &NetworkClassSpec,
    domain_sample: ArrayView2<'_, T>,
) -> AuditReport {
    let dims = net.dims();
    let max_width = dims.iter().copied().max().unwrap_or(0);
    let params = net.flat_params();
    let nonzero_params = params.iter().filter(|p| **p != T::zero()).count();
    let max_abs_param = params.iter().map(|p| p.abs().as_f64()).fold(0.0, f64::max);
    let max_abs_output = if domain_sample.nrows() == 0 || domain_sample.ncols() != net.input_dim() {
        f64::INFINITY
    } else {
        net.forward_batch(domain_sample)
            .map(|out| out.iter().map(|v| v.abs().as_f64()).fold(0.0, f64::max))
            .unwrap_or(f64::INFINITY)
    };
    AuditReport {
        depth: net.depth(),
        max_width,
        nonzero_params,
        max_abs_param,
        max_abs_output,
        dims_ok: net.input_dim() == spec.d_in && net.output_dim() == spec.d_out,
        depth_ok: net.depth() <= spec.depth_l,
        width_ok: max_width <= spec.width_p,
        sparsity_ok: nonzero_params <= spec.sparsity_k,
        kappa_ok: max_abs_param <= spec.weight_bound_kappa,
        output_ok: max_abs_output <= spec.output_bound_r,
    }
}
