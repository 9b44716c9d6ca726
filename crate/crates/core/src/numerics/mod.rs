//! Dense tensor math, seeded random streams and gradient verification.

mod gradcheck;
mod ops;
mod rng;
mod tensor;

pub use gradcheck::{grad_check, FD_STEP};
pub use ops::{
    add_bias_rows, col_sums_into, conv2d_same, conv2d_same_backward, dropout, dropout_mask,
    ensure_finite, im2col_3x3, layer_norm, layer_norm_rows, layer_norm_rows_backward, matmul,
    matmul_a_bt_into, matmul_at_b_into, matmul_into, relu_in_place, softmax, softmax_in_place,
    LayerNormCache, LAYER_NORM_EPS,
};
pub use rng::Rng;
pub use tensor::Tensor;

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive};

/// Floating-point element type: `f32` for training, `f64` for verification.
pub trait Real:
    Float
    + FromPrimitive
    + Default
    + Debug
    + Display
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Send
    + Sync
    + 'static
{
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 converts to every Real")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("every Real converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}
