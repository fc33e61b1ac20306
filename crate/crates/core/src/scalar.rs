//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! All theory and simulation code is written against [`Real`], so the same
//! routines run in `f64` (the default, used by the CLI and every tolerance in
//! the test-suite) or `f32` for memory-bound exploratory runs.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal, Poisson};

/// Floating point scalar usable for cascade simulation and spectrum theory.
///
/// Besides the arithmetic supertraits this carries the three sampling kernels
/// the built-in weight laws need; `rand_distr` provides them for `f32` and
/// `f64`. Parameters are validated by the caller, so the kernels panic on
/// invalid input rather than returning errors.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Sum
    + Send
    + Sync
    + 'static
{
    /// Fills `out` with i.i.d. normal draws.
    fn fill_normal<R: Rng + ?Sized>(rng: &mut R, mean: Self, std_dev: Self, out: &mut [Self]);

    /// Fills `out` with i.i.d. Gamma draws of density
    /// `rate^shape x^(shape-1) e^(-rate x) / Γ(shape)`.
    fn fill_gamma<R: Rng + ?Sized>(rng: &mut R, shape: Self, rate: Self, out: &mut [Self]);

    /// Fills `out` with i.i.d. Poisson counts (as floats).
    fn fill_poisson<R: Rng + ?Sized>(rng: &mut R, mean: Self, out: &mut [Self]);

    /// Converts an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

macro_rules! impl_real {
    ($t:ty) => {
        impl Real for $t {
            fn fill_normal<R: Rng + ?Sized>(rng: &mut R, mean: Self, std_dev: Self, out: &mut [Self]) {
                let dist = Normal::new(mean, std_dev).expect("valid normal parameters");
                for x in out.iter_mut() {
                    *x = dist.sample(rng);
                }
            }

            fn fill_gamma<R: Rng + ?Sized>(rng: &mut R, shape: Self, rate: Self, out: &mut [Self]) {
                let dist = Gamma::new(shape, 1.0 / rate).expect("valid gamma parameters");
                for x in out.iter_mut() {
                    *x = dist.sample(rng);
                }
            }

            fn fill_poisson<R: Rng + ?Sized>(rng: &mut R, mean: Self, out: &mut [Self]) {
                let dist = Poisson::new(mean).expect("valid poisson mean");
                for x in out.iter_mut() {
                    *x = dist.sample(rng);
                }
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);

/// Pairwise (tree) summation.
///
/// Splits at the largest power of two below the length, so for power-of-two
/// lengths the association order is exactly that of adjacent-pair dyadic
/// aggregation. Results depend only on the input order.
pub fn pairwise_sum<F: Real>(xs: &[F]) -> F {
    match xs.len() {
        0 => F::zero(),
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n.next_power_of_two() / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}
