//! Cascade weight laws and their cumulant functions.
//!
//! A generator `W = exp(ω)` has `E[W] = 1`; its scaling function is
//! `τ(p) = p − log2 E[W^p] − 1`. Three families are built in, all
//! parameterized by the intermittency coefficient `λ² = −τ''(0)`:
//!
//! | family      | `ω`                                   | extra parameter |
//! |-------------|---------------------------------------|-----------------|
//! | log-normal  | `N(−λ² ln2 / 2, λ² ln2)`              | none            |
//! | log-Poisson | `m₀ ln2 + δ n`, `n ~ Poisson(γ ln2)`  | jump size `δ`   |
//! | log-Gamma   | `m₀ ln2 + x`, `x ~ Gamma(α ln2, β)`   | rate `β > 1`    |
//!
//! with `γ = λ²/δ²` and `α = λ²β²`. The Gamma law uses the *rate*
//! convention: density `β^{α ln2} x^{α ln2 − 1} e^{−βx} / Γ(α ln2)`.
//! `m₀` is fixed by `E[W] = 1`, which is the same as `τ(1) = 0`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FamilyKind {
    LogNormal,
    LogPoisson,
    LogGamma,
}

impl FamilyKind {
    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::LogNormal => "lognormal",
            FamilyKind::LogPoisson => "logpoisson",
            FamilyKind::LogGamma => "loggamma",
        }
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FamilyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "lognormal" => Ok(FamilyKind::LogNormal),
            "logpoisson" => Ok(FamilyKind::LogPoisson),
            "loggamma" => Ok(FamilyKind::LogGamma),
            other => Err(Error::InvalidParameter(format!("unknown generator family '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[allow(clippy::enum_variant_names)]
enum Law<F> {
    LogNormal,
    /// `ω = m0 ln2 + delta n`, `n ~ Poisson(rate ln2)`.
    LogPoisson { delta: F, rate: F, m0: F },
    /// `ω = m0 ln2 + x`, `x ~ Gamma(shape ln2, beta)`.
    LogGamma { beta: F, shape: F, m0: F },
}

/// Law of the cascade weight together with its closed-form `τ`.
///
/// Immutable once built; share it freely across workers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorSpec<F> {
    lambda2: F,
    law: Law<F>,
}

impl<F: Real> GeneratorSpec<F> {
    pub fn log_normal(lambda2: F) -> Result<Self> {
        check_lambda2(lambda2)?;
        Self { lambda2, law: Law::LogNormal }.validated()
    }

    pub fn log_poisson(lambda2: F, delta: F) -> Result<Self> {
        check_lambda2(lambda2)?;
        if !delta.is_finite() || delta == F::zero() {
            return Err(Error::InvalidParameter(format!(
                "log-Poisson jump size must be finite and non-zero, got {delta}"
            )));
        }
        let rate = lambda2 / (delta * delta);
        let m0 = -rate * delta.exp_m1();
        Self { lambda2, law: Law::LogPoisson { delta, rate, m0 } }.validated()
    }

    pub fn log_gamma(lambda2: F, beta: F) -> Result<Self> {
        check_lambda2(lambda2)?;
        if !beta.is_finite() || beta <= F::one() {
            return Err(Error::InvalidParameter(format!(
                "log-Gamma rate must exceed 1 so that τ(1) exists, got {beta}"
            )));
        }
        let shape = lambda2 * beta * beta;
        let m0 = shape * (-beta.recip()).ln_1p();
        Self { lambda2, law: Law::LogGamma { beta, shape, m0 } }.validated()
    }

    /// Builds a spec from a family tag and its optional extra parameter
    /// (`δ` for log-Poisson, `β` for log-Gamma).
    pub fn new(kind: FamilyKind, lambda2: F, param: Option<F>) -> Result<Self> {
        let need = |name: &str| {
            param.ok_or_else(|| Error::InvalidParameter(format!("{kind} generator requires {name}")))
        };
        match kind {
            FamilyKind::LogNormal => Self::log_normal(lambda2),
            FamilyKind::LogPoisson => Self::log_poisson(lambda2, need("delta")?),
            FamilyKind::LogGamma => Self::log_gamma(lambda2, need("beta")?),
        }
    }

    fn validated(self) -> Result<Self> {
        let e = self.e_w_log2_w();
        if !(e < F::one()) {
            return Err(Error::DegenerateGenerator { e_w_log2_w: e.as_f64() });
        }
        Ok(self)
    }

    pub fn kind(&self) -> FamilyKind {
        match self.law {
            Law::LogNormal => FamilyKind::LogNormal,
            Law::LogPoisson { .. } => FamilyKind::LogPoisson,
            Law::LogGamma { .. } => FamilyKind::LogGamma,
        }
    }

    pub fn lambda2(&self) -> F {
        self.lambda2
    }

    /// Log-Poisson jump size `δ`.
    pub fn delta(&self) -> Option<F> {
        match self.law {
            Law::LogPoisson { delta, .. } => Some(delta),
            _ => None,
        }
    }

    /// Log-Gamma rate `β`.
    pub fn beta(&self) -> Option<F> {
        match self.law {
            Law::LogGamma { beta, .. } => Some(beta),
            _ => None,
        }
    }

    /// Log-Poisson `γ` (the Poisson mean is `γ ln2`).
    pub fn poisson_gamma(&self) -> Option<F> {
        match self.law {
            Law::LogPoisson { rate, .. } => Some(rate),
            _ => None,
        }
    }

    /// Log-Gamma `α` (the Gamma shape is `α ln2`).
    pub fn gamma_alpha(&self) -> Option<F> {
        match self.law {
            Law::LogGamma { shape, .. } => Some(shape),
            _ => None,
        }
    }

    /// Location offset `m₀` of `ω / ln2` for the log-Poisson and log-Gamma laws.
    pub fn m0(&self) -> Option<F> {
        match self.law {
            Law::LogNormal => None,
            Law::LogPoisson { m0, .. } | Law::LogGamma { m0, .. } => Some(m0),
        }
    }

    /// Supremum of the domain of `τ` (`β` for log-Gamma, `+∞` otherwise).
    pub fn tau_domain_sup(&self) -> F {
        match self.law {
            Law::LogGamma { beta, .. } => beta,
            _ => F::infinity(),
        }
    }

    pub fn in_domain(&self, p: F) -> bool {
        p.is_finite() && p < self.tau_domain_sup()
    }

    fn check_domain(&self, p: F, what: &'static str) -> Result<()> {
        if self.in_domain(p) {
            Ok(())
        } else {
            Err(Error::Domain { what, value: p.as_f64() })
        }
    }

    /// `τ(p) = p − log2 E[W^p] − 1`, arranged so that `τ(0) = −1` and
    /// `τ(1) = 0` hold exactly in floating point.
    pub fn tau(&self, p: F) -> Result<F> {
        self.check_domain(p, "tau")?;
        let one = F::one();
        Ok(match self.law {
            Law::LogNormal => (p - one) + self.lambda2 / F::lit(2.0) * p * (one - p),
            Law::LogPoisson { delta, rate, .. } => {
                (p - one) + rate * (p * delta.exp_m1() - (p * delta).exp_m1())
            }
            Law::LogGamma { beta, shape, .. } => {
                (p - one) + shape * ((-p / beta).ln_1p() - p * (-beta.recip()).ln_1p())
            }
        })
    }

    pub fn tau_prime(&self, p: F) -> Result<F> {
        self.check_domain(p, "tau'")?;
        let one = F::one();
        Ok(match self.law {
            Law::LogNormal => one + self.lambda2 * (F::lit(0.5) - p),
            Law::LogPoisson { delta, rate, .. } => {
                one + rate * (delta.exp_m1() - delta * (p * delta).exp())
            }
            Law::LogGamma { beta, shape, .. } => {
                one - shape * (-beta.recip()).ln_1p() - shape / (beta - p)
            }
        })
    }

    pub fn tau_second(&self, p: F) -> Result<F> {
        self.check_domain(p, "tau''")?;
        Ok(match self.law {
            Law::LogNormal => -self.lambda2,
            Law::LogPoisson { delta, rate, .. } => -rate * delta * delta * (p * delta).exp(),
            Law::LogGamma { beta, shape, .. } => -shape / ((beta - p) * (beta - p)),
        })
    }

    /// `E[W log2 W] = 1 − τ'(1)`.
    pub fn e_w_log2_w(&self) -> F {
        F::one() - self.tau_prime(F::one()).expect("p = 1 lies in every domain")
    }

    /// Draws `count` i.i.d. weights.
    pub fn sample_weights<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<F> {
        let mut out = vec![F::zero(); count];
        self.fill_weights(rng, &mut out);
        out
    }
}

fn check_lambda2<F: Real>(lambda2: F) -> Result<()> {
    if lambda2.is_finite() && lambda2 > F::zero() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("lambda2 must be positive and finite, got {lambda2}")))
    }
}

/// A law that can supply i.i.d. cascade weights.
///
/// The built-in families implement it through [`GeneratorSpec`]; custom laws
/// (see [`EmpiricalLaw`]) plug into cascade construction the same way.
pub trait WeightLaw<F: Real>: Sync {
    /// Overwrites `out` with i.i.d. positive weights of unit mean.
    fn fill_weights<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [F]);
}

impl<F: Real> WeightLaw<F> for GeneratorSpec<F> {
    fn fill_weights<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [F]) {
        let ln2 = F::LN_2();
        match self.law {
            Law::LogNormal => {
                let var = self.lambda2 * ln2;
                F::fill_normal(rng, -var / F::lit(2.0), var.sqrt(), out);
                for w in out.iter_mut() {
                    *w = w.exp();
                }
            }
            Law::LogPoisson { delta, rate, m0 } => {
                F::fill_poisson(rng, rate * ln2, out);
                let offset = m0 * ln2;
                for w in out.iter_mut() {
                    *w = (offset + delta * *w).exp();
                }
            }
            Law::LogGamma { beta, shape, m0 } => {
                F::fill_gamma(rng, shape * ln2, beta, out);
                let offset = m0 * ln2;
                for w in out.iter_mut() {
                    *w = (offset + *w).exp();
                }
            }
        }
    }
}

/// Resampling law built from observed positive weights.
///
/// The pool is rescaled to unit mean; `τ` is available only as a Monte Carlo
/// estimate over the pool.
#[derive(Debug, Clone)]
pub struct EmpiricalLaw<F> {
    pool: Vec<F>,
}

impl<F: Real> EmpiricalLaw<F> {
    pub fn new(samples: Vec<F>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidParameter("empirical law needs at least one sample".into()));
        }
        if samples.iter().any(|w| !(w.is_finite() && *w > F::zero())) {
            return Err(Error::InvalidParameter("empirical weights must be positive and finite".into()));
        }
        let mean = crate::scalar::pairwise_sum(&samples) / F::from_usize_lossy(samples.len());
        let pool: Vec<F> = samples.into_iter().map(|w| w / mean).collect();
        let law = Self { pool };
        let e = law.e_w_log2_w();
        if !(e < F::one()) {
            return Err(Error::DegenerateGenerator { e_w_log2_w: e.as_f64() });
        }
        Ok(law)
    }

    pub fn len(&self) -> usize {
        self.pool.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pool.is_empty()
    }

    /// Plug-in estimate `p − log2(mean W^p) − 1`.
    pub fn tau_estimate(&self, p: F) -> F {
        let powers: Vec<F> = self.pool.iter().map(|w| w.powf(p)).collect();
        let mean = crate::scalar::pairwise_sum(&powers) / F::from_usize_lossy(self.pool.len());
        p - mean.log2() - F::one()
    }

    pub fn e_w_log2_w(&self) -> F {
        let terms: Vec<F> = self.pool.iter().map(|w| *w * w.log2()).collect();
        crate::scalar::pairwise_sum(&terms) / F::from_usize_lossy(self.pool.len())
    }
}

impl<F: Real> WeightLaw<F> for EmpiricalLaw<F> {
    fn fill_weights<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [F]) {
        let n = self.pool.len();
        for w in out.iter_mut() {
            *w = self.pool[rng.random_range(0..n)];
        }
    }
}
