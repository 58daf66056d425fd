//! Scalar abstraction for the kinematic layer.
//!
//! World geometry and kinematics are written once over [`Scalar`] and used at
//! `f64` by the rest of the crate (see the aliases at the crate root). `f32`
//! works too, which the kinematics tests use to cross-check the arithmetic.

use std::fmt::Debug;

use num_traits::{Float, FromPrimitive};

/// Floating-point type usable for world state.
pub trait Scalar: Float + FromPrimitive + Debug + Default + Send + Sync + 'static {
    /// Converts an `f64` constant into this scalar.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("finite constant representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Scalar for T where T: Float + FromPrimitive + Debug + Default + Send + Sync + 'static {}

/// km/h per m/s.
pub const KMH_PER_MPS: f64 = 3.6;

pub fn kmh_to_mps<T: Scalar>(kmh: T) -> T {
    kmh / T::lit(KMH_PER_MPS)
}

pub fn mps_to_kmh<T: Scalar>(mps: T) -> T {
    mps * T::lit(KMH_PER_MPS)
}
