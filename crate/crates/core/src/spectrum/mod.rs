//! Theoretical scaling quantities: the mixed-asymptotic exponent `τ_χ`, the
//! critical exponents where it turns linear, the Legendre spectrum and Besov
//! frontiers.

mod lambert;

pub use lambert::{lambert_w, Branch};

use crate::error::{Error, Result};
use crate::generators::{FamilyKind, GeneratorSpec};
use crate::scalar::Real;

/// Exponents `p⁻ < 0 < 1 < p⁺` solving `p τ'(p) − τ(p) = −χ`, with the
/// slopes `h± = τ'(p±)` of the linear branches of `τ_χ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalExponents<F> {
    pub chi: F,
    /// `+∞` when no root exists.
    pub p_plus: F,
    /// `−∞` when no root exists.
    pub p_minus: F,
    pub h_plus: Option<F>,
    pub h_minus: Option<F>,
    /// `τ(p⁺) > 0`, or `p⁺` infinite: the moment hypothesis under which the
    /// partition function scales as `τ_χ`.
    pub moment_condition: bool,
}

impl<F: Real> CriticalExponents<F> {
    /// `τ_χ(p)`: `τ(p) − χ` between the critical exponents, linear outside.
    pub fn tau_chi(&self, spec: &GeneratorSpec<F>, p: F) -> Result<F> {
        match (self.h_plus, self.h_minus) {
            (Some(h), _) if p >= self.p_plus => Ok(h * p),
            (_, Some(h)) if p <= self.p_minus => Ok(h * p),
            _ => Ok(spec.tau(p)? - self.chi),
        }
    }
}

/// `p τ'(p) − τ(p) + χ`; decreasing for `p > 0`, increasing for `p < 0`.
fn legendre_gap<F: Real>(spec: &GeneratorSpec<F>, chi: F, p: F) -> F {
    match (spec.tau(p), spec.tau_prime(p)) {
        (Ok(t), Ok(d)) => p * d - t + chi,
        _ => F::nan(),
    }
}

/// Bisects a sign change of `f` on `[lo, hi]`, `f(lo) > 0 ≥ f(hi)` or the
/// reverse, down to adjacent floats.
fn bisect<F: Real>(mut lo: F, mut hi: F, f: impl Fn(F) -> F) -> F {
    if f(lo) == F::zero() {
        return lo;
    }
    if f(hi) == F::zero() {
        return hi;
    }
    let lo_positive = f(lo) > F::zero();
    for _ in 0..4096 {
        let mid = lo + (hi - lo) / F::lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        if (f(mid) > F::zero()) == lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if f(lo).abs() <= f(hi).abs() {
        lo
    } else {
        hi
    }
}

const P_BRACKET: f64 = 1e3;
const P_NUDGE: f64 = 1e-9;

fn positive_bracket_end<F: Real>(spec: &GeneratorSpec<F>) -> F {
    let sup = spec.tau_domain_sup();
    if sup.is_finite() {
        let nudge = F::lit(P_NUDGE).max(sup * F::epsilon() * F::lit(16.0));
        sup - nudge
    } else {
        F::lit(P_BRACKET)
    }
}

/// Critical exponents by bisection; cross-checked against the closed form
/// when the family has one (a mismatch is logged, bisection wins).
pub fn critical_exponents<F: Real>(spec: &GeneratorSpec<F>, chi: F) -> Result<CriticalExponents<F>> {
    if !(chi.is_finite() && chi >= F::zero()) {
        return Err(Error::InvalidParameter(format!("chi must be >= 0, got {chi}")));
    }
    let f = |p| legendre_gap(spec, chi, p);
    let nudge = F::lit(P_NUDGE);

    let (lo, hi) = (F::one() + nudge, positive_bracket_end(spec));
    let p_plus = if f(hi) > F::zero() { F::infinity() } else { bisect(lo, hi, f) };
    let (lo, hi) = (-F::lit(P_BRACKET), -nudge);
    let p_minus = if f(lo) > F::zero() { F::neg_infinity() } else { bisect(lo, hi, f) };

    let h_plus = p_plus.is_finite().then(|| spec.tau_prime(p_plus)).transpose()?;
    let h_minus = p_minus.is_finite().then(|| spec.tau_prime(p_minus)).transpose()?;
    let moment_condition = !p_plus.is_finite() || spec.tau(p_plus)? > F::zero();
    if !moment_condition {
        log::warn!("tau(p+) <= 0 at chi = {chi}: linear-branch scaling is not guaranteed");
    }

    if let Ok((cp, cm)) = critical_exponents_closed_form(spec, chi) {
        for (num, closed) in [(p_plus, cp), (p_minus, cm)] {
            let agree = (num.is_infinite() && num == closed)
                || (num - closed).abs() <= F::lit(1e-8) * (F::one() + num.abs());
            if !agree {
                log::warn!("closed-form critical exponent {closed} differs from bisection root {num}");
            }
        }
    }
    Ok(CriticalExponents { chi, p_plus, p_minus, h_plus, h_minus, moment_condition })
}

/// Closed-form critical exponents `(p⁺, p⁻)`.
///
/// Log-normal: `±√(2(1+χ)/λ²)`. Log-Poisson: `(W(z)+1)/δ` with
/// `z = (δ²(1+χ) − λ²)/(eλ²)`, one branch per sign. Log-Gamma:
/// `β(1 + 1/W(−e^{−1−c}))` with `c = (1+χ)/(λ²β²)`, the secondary branch
/// giving `p⁺`.
pub fn critical_exponents_closed_form<F: Real>(spec: &GeneratorSpec<F>, chi: F) -> Result<(F, F)> {
    let l2 = spec.lambda2();
    let one = F::one();
    match spec.kind() {
        FamilyKind::LogNormal => {
            let p = (F::lit(2.0) * (one + chi) / l2).sqrt();
            Ok((p, -p))
        }
        FamilyKind::LogPoisson => {
            let delta = spec.delta().expect("log-Poisson has delta");
            let z = (delta * delta * (one + chi) - l2) / (F::E() * l2);
            let mut plus = F::infinity();
            let mut minus = F::neg_infinity();
            let mut assign = |w: F| {
                let p = (w + one) / delta;
                if p > F::zero() {
                    plus = p;
                } else if p < F::zero() {
                    minus = p;
                }
            };
            assign(lambert_w(Branch::Principal, z)?);
            if z < F::zero() {
                assign(lambert_w(Branch::Secondary, z)?);
            }
            Ok((plus, minus))
        }
        FamilyKind::LogGamma => {
            let beta = spec.beta().expect("log-Gamma has beta");
            let c = (one + chi) / (l2 * beta * beta);
            let x = -(-one - c).exp();
            let plus = beta * (one + lambert_w(Branch::Secondary, x)?.recip());
            let minus = beta * (one + lambert_w(Branch::Principal, x)?.recip());
            Ok((plus, minus))
        }
    }
}

/// `τ_χ(p)` for a single `p`; see [`CriticalExponents::tau_chi`].
pub fn theoretical_tau_chi<F: Real>(spec: &GeneratorSpec<F>, chi: F, p: F) -> Result<F> {
    critical_exponents(spec, chi)?.tau_chi(spec, p)
}

/// Open range `(inf τ', sup τ')` of attainable Hölder exponents.
fn holder_range<F: Real>(spec: &GeneratorSpec<F>) -> (F, F) {
    let one = F::one();
    match spec.kind() {
        FamilyKind::LogNormal => (F::neg_infinity(), F::infinity()),
        FamilyKind::LogPoisson => {
            let delta = spec.delta().expect("log-Poisson has delta");
            let edge = one + spec.poisson_gamma().expect("log-Poisson has rate") * delta.exp_m1();
            if delta < F::zero() {
                (edge, F::infinity())
            } else {
                (F::neg_infinity(), edge)
            }
        }
        FamilyKind::LogGamma => {
            let beta = spec.beta().expect("log-Gamma has beta");
            let alpha = spec.gamma_alpha().expect("log-Gamma has shape");
            (F::neg_infinity(), one - alpha * (-beta.recip()).ln_1p())
        }
    }
}

/// Singularity spectrum `D(h) = min_p (p h − τ(p))`.
///
/// Returns `−∞` for `h` outside the range of `τ'`.
pub fn legendre<F: Real>(spec: &GeneratorSpec<F>, h: F) -> F {
    let one = F::one();
    if !h.is_finite() {
        return F::neg_infinity();
    }
    if spec.kind() == FamilyKind::LogNormal {
        let l2 = spec.lambda2();
        let d = h - one - l2 / F::lit(2.0);
        return one - d * d / (F::lit(2.0) * l2);
    }
    let (lo_h, hi_h) = holder_range(spec);
    if !(h > lo_h && h < hi_h) {
        return F::neg_infinity();
    }
    // τ' is decreasing: find lo with τ'(lo) ≥ h and hi with τ'(hi) ≤ h
    let dtau = |p: F| spec.tau_prime(p).unwrap_or(F::neg_infinity());
    let sup = spec.tau_domain_sup();
    let mut lo = -one;
    let mut hi = one;
    let mut expanded = false;
    for _ in 0..2048 {
        let lo_ok = dtau(lo) >= h;
        let hi_ok = dtau(hi) <= h;
        if lo_ok && hi_ok {
            expanded = true;
            break;
        }
        if !lo_ok {
            lo = lo * F::lit(2.0);
        }
        if !hi_ok {
            hi = if sup.is_finite() { hi + (sup - hi) / F::lit(2.0) } else { hi * F::lit(2.0) };
        }
        if !lo.is_finite() || !hi.is_finite() {
            break;
        }
    }
    if !expanded {
        return F::neg_infinity();
    }
    let p = bisect(lo, hi, |p| dtau(p) - h);
    match spec.tau(p) {
        Ok(t) => p * h - t,
        Err(_) => F::neg_infinity(),
    }
}

/// Besov frontier `s(1/p)` of the mixed measure: `(τ(p)+1)/p` below `p⁺`,
/// `h⁺ + (1+χ)/p` above.
pub fn besov_frontier<F: Real>(spec: &GeneratorSpec<F>, chi: F, inv_p: F) -> Result<F> {
    besov_with(spec, &critical_exponents(spec, chi)?, inv_p)
}

fn besov_with<F: Real>(spec: &GeneratorSpec<F>, crit: &CriticalExponents<F>, inv_p: F) -> Result<F> {
    if !(inv_p.is_finite() && inv_p > F::zero()) {
        return Err(Error::InvalidParameter(format!("1/p must be positive, got {inv_p}")));
    }
    let p = inv_p.recip();
    match crit.h_plus {
        Some(h) if p >= crit.p_plus => Ok(h + (F::one() + crit.chi) * inv_p),
        _ => Ok((spec.tau(p)? + F::one()) * inv_p),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauRow<F> {
    pub p: F,
    /// `None` outside the domain of `τ`.
    pub tau: Option<F>,
    pub tau_chi: Option<F>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegendreRow<F> {
    pub h: F,
    pub d: F,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesovRow<F> {
    pub inv_p: F,
    pub s: F,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport<F> {
    pub family: FamilyKind,
    pub exponents: CriticalExponents<F>,
    pub tau: Vec<TauRow<F>>,
    pub legendre: Vec<LegendreRow<F>>,
    pub besov: Vec<BesovRow<F>>,
}

/// Evaluates every theoretical curve on the given grids.
pub fn spectrum_report<F: Real>(
    spec: &GeneratorSpec<F>,
    chi: F,
    p_grid: &[F],
    h_grid: &[F],
    inv_p_grid: &[F],
) -> Result<SpectrumReport<F>> {
    let exponents = critical_exponents(spec, chi)?;
    let tau = p_grid
        .iter()
        .map(|&p| TauRow { p, tau: spec.tau(p).ok(), tau_chi: exponents.tau_chi(spec, p).ok() })
        .collect();
    let legendre = h_grid.iter().map(|&h| LegendreRow { h, d: legendre(spec, h) }).collect();
    let besov = inv_p_grid
        .iter()
        .filter_map(|&inv_p| besov_with(spec, &exponents, inv_p).ok().map(|s| BesovRow { inv_p, s }))
        .collect();
    Ok(SpectrumReport { family: spec.kind(), exponents, tau, legendre, besov })
}
