//! Real branches of the Lambert W function, `w e^w = x`.

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// `W_0`, defined on `[−1/e, ∞)`, values `≥ −1`.
    Principal,
    /// `W_{−1}`, defined on `[−1/e, 0)`, values `≤ −1`.
    Secondary,
}

/// Solves `w e^w = x` on the requested branch by Halley iteration.
pub fn lambert_w<F: Real>(branch: Branch, x: F) -> Result<F> {
    let one = F::one();
    let e = F::E();
    let branch_point = -e.recip();
    let slack = F::epsilon() * F::lit(4.0) * branch_point.abs();
    let domain = |what| Error::Domain { what, value: x.as_f64() };
    if x.is_nan() {
        return Err(domain("lambert W"));
    }
    if x < branch_point - slack {
        return Err(domain("lambert W"));
    }
    if x <= branch_point {
        return Ok(-one);
    }
    let near_branch = x < F::lit(-0.25);
    let mut w = match branch {
        Branch::Principal => {
            if x == F::zero() {
                return Ok(F::zero());
            }
            if x.is_infinite() {
                return Ok(x);
            }
            if near_branch {
                branch_series(x, one)
            } else {
                // Winitzki's approximation
                let l = x.ln_1p();
                l * (one - l.ln_1p() / (F::lit(2.0) + l))
            }
        }
        Branch::Secondary => {
            if x >= F::zero() {
                return Err(domain("lambert W (secondary branch)"));
            }
            if near_branch {
                branch_series(x, -one)
            } else {
                let l1 = (-x).ln();
                let l2 = (-l1).ln();
                l1 - l2 + l2 / l1
            }
        }
    };
    for _ in 0..64 {
        let ew = w.exp();
        let f = w * ew - x;
        if f == F::zero() {
            break;
        }
        let wp1 = w + one;
        let denom = ew * wp1 - (w + F::lit(2.0)) * f / (wp1 + wp1);
        if denom == F::zero() || !denom.is_finite() {
            break;
        }
        let step = f / denom;
        let next = match branch {
            Branch::Principal => (w - step).max(-one),
            Branch::Secondary => (w - step).min(-one),
        };
        let done = (next - w).abs() <= F::epsilon() * F::lit(4.0) * (one + next.abs());
        w = next;
        if done {
            break;
        }
    }
    Ok(w)
}

/// Series about the branch point: `w ≈ −1 ± q − q²/3 + 11q³/72`, `q = √(2(ex+1))`.
fn branch_series<F: Real>(x: F, sign: F) -> F {
    let q = sign * (F::lit(2.0) * (F::E() * x + F::one())).max(F::zero()).sqrt();
    -F::one() + q - q * q / F::lit(3.0) + F::lit(11.0 / 72.0) * q * q * q
}
