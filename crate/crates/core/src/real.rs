//! Scalar abstraction for the math modules.
//!
//! Link models, geometry, storage and formation control are written against
//! [`Real`] so they can run at `f32` or `f64`. The simulation engine and all
//! serialized outputs are fixed to `f64` (see the crate root for aliases).

use nalgebra::RealField;
use num_traits::FromPrimitive;

/// Floating-point scalar usable by the math modules.
///
/// Combines nalgebra's [`RealField`] (transcendental functions, constants,
/// vector algebra) with [`FromPrimitive`] for lossy conversion of literal
/// constants.
pub trait Real: RealField + FromPrimitive + Copy {
    /// Converts an `f64` literal into this scalar type.
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("finite literal")
    }
}

impl Real for f32 {}
impl Real for f64 {}
