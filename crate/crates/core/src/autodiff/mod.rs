//! Dense-tensor tape with reverse-mode gradients, forward-mode directional
//! derivatives and their composition into Hessian-vector products.

mod diff;
mod params;
mod scalar;
mod tape;
mod tensor;

pub use diff::{evaluate, finite_diff_grad, grad, hvp, hvp_with_grad, jvp, value_and_grad, Objective};
pub use params::{dot, Block, BlockSel, FlatVector, ParamEntry, ParamRecord, ParamSet};
pub use scalar::{Dual, Scalar};
pub use tape::{Tape, Var, LAYER_NORM_EPS};
pub use tensor::Tensor;
