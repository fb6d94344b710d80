//! Dense ReLU networks with hand-written reverse mode and Adam.

mod adam;
mod audit;
mod build;
pub(crate) mod checkpoint;
mod mlp;

pub use adam::{adam_step, AdamState, TrainConfig};
pub use audit::{audit_class, AuditReport, NetworkClassSpec};
pub use checkpoint::{read_mlp, read_mlp_body, write_mlp, write_mlp_body, MAGIC, VERSION};
pub use mlp::{mlp_backward, Grads, Mlp, Trace};
