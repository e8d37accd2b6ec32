//! Scalar abstraction for the pure-math layers.

use std::fmt::Debug;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

/// Floating scalar usable by the generic special-function and kernel code.
pub trait Real: Float + FloatConst + NumAssign + FromPrimitive + Debug + 'static {
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant must convert")
    }
    fn of_i(n: i64) -> Self {
        Self::from_i64(n).expect("integer constant must convert")
    }
}

impl<T> Real for T where T: Float + FloatConst + NumAssign + FromPrimitive + Debug + 'static {}
