//! Dyadic cascade realizations and their concatenation into a mixed measure.
//!
//! A [`CascadeSample`] stores only the finest cells of one cascade on `[0, T]`,
//! `T = 2^t_log2`. Coarser levels are derived by adjacent-pair aggregation,
//! which is the same association order as [`pairwise_sum`], so every level of
//! the pyramid sums to the same bits.
//!
//! A [`MixedMeasure`] patches independent cascades end to end. At analysis
//! level `j` it exposes the first `N_T(j) = max(1, ⌊2^{jχ}⌋)` pool members.

use std::io::{Read, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::generators::WeightLaw;
use crate::rng::TrialStream;
use crate::scalar::{pairwise_sum, Real};

/// Ceiling on allocated cells, checked before any allocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResourceLimits {
    pub max_cells: u64,
}

impl Default for ResourceLimits {
    fn default() -> Self {
        Self { max_cells: 1 << 28 }
    }
}

impl ResourceLimits {
    pub fn check(&self, cells: u128) -> Result<()> {
        if cells > self.max_cells as u128 {
            Err(Error::ResourceLimit { requested: cells, cap: self.max_cells })
        } else {
            Ok(())
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeSample<F> {
    t_log2: u32,
    level: u32,
    masses: Vec<F>,
}

impl<F: Real> CascadeSample<F> {
    /// Wraps finest-level masses; the length must be `2^level`.
    pub fn from_masses(t_log2: u32, level: u32, masses: Vec<F>) -> Result<Self> {
        if level >= usize::BITS || masses.len() != 1usize << level {
            return Err(Error::InvalidParameter(format!(
                "expected 2^{level} masses, got {}",
                masses.len()
            )));
        }
        Ok(Self { t_log2, level, masses })
    }

    pub fn t_log2(&self) -> u32 {
        self.t_log2
    }

    /// Integral scale `T`.
    pub fn integral_scale(&self) -> F {
        F::lit(2.0).powi(self.t_log2 as i32)
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn masses(&self) -> &[F] {
        &self.masses
    }

    pub fn total_mass(&self) -> F {
        pairwise_sum(&self.masses)
    }

    /// Cell masses at level `j`: entry `k` aggregates the `2^{level-j}` finest
    /// cells of `I_{j,k}`.
    pub fn coarse_grain(&self, j: u32) -> Result<Vec<F>> {
        if j > self.level {
            return Err(Error::LevelOutOfRange { j, level: self.level });
        }
        let mut cells = self.masses.clone();
        for _ in j..self.level {
            cells = halve(&cells);
        }
        Ok(cells)
    }

    /// All levels `0..=level`, indexed by level.
    pub fn pyramid(&self) -> Vec<Vec<F>> {
        let mut levels = Vec::with_capacity(self.level as usize + 1);
        levels.push(self.masses.clone());
        while levels.last().map_or(1, Vec::len) > 1 {
            let next = halve(levels.last().unwrap());
            levels.push(next);
        }
        levels.reverse();
        levels
    }
}

fn halve<F: Real>(cells: &[F]) -> Vec<F> {
    cells.chunks_exact(2).map(|c| c[0] + c[1]).collect()
}

/// Builds one cascade down to `level`.
///
/// `masses[k] = T 2^{-level} ∏_{i=1..level} W_{r|i}` with `r` the binary
/// expansion of `k`. Weights are drawn level by level, left to right, so a
/// deeper build from the same stream refines a shallower one.
pub fn build_cascade<F, L, R>(
    law: &L,
    t_log2: u32,
    level: u32,
    rng: &mut R,
    limits: &ResourceLimits,
) -> Result<CascadeSample<F>>
where
    F: Real,
    L: WeightLaw<F> + ?Sized,
    R: rand::Rng + ?Sized,
{
    if level >= 48 {
        return Err(Error::ResourceLimit { requested: 1u128 << level, cap: limits.max_cells });
    }
    limits.check(1u128 << level)?;
    let half = F::lit(0.5);
    let mut masses = vec![F::lit(2.0).powi(t_log2 as i32)];
    let mut weights: Vec<F> = Vec::new();
    for _ in 0..level {
        weights.resize(masses.len() * 2, F::zero());
        law.fill_weights(rng, &mut weights);
        masses = weights
            .chunks_exact(2)
            .zip(&masses)
            .flat_map(|(w, &m)| [m * half * w[0], m * half * w[1]])
            .collect();
    }
    Ok(CascadeSample { t_log2, level, masses })
}

/// `N_T(j) = max(1, ⌊2^{jχ}⌋)`.
pub fn n_integral_scales(j: u32, chi: f64) -> usize {
    let x = (j as f64 * chi).exp2() * (1.0 + 1e-12);
    (x.floor() as usize).max(1)
}

/// Independent cascades patched end to end, sized for mixed asymptotics.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedMeasure<F> {
    chi: f64,
    delta_levels: u32,
    pool: Vec<CascadeSample<F>>,
}

impl<F: Real> MixedMeasure<F> {
    pub fn from_pool(chi: f64, delta_levels: u32, pool: Vec<CascadeSample<F>>) -> Result<Self> {
        if !(chi.is_finite() && chi >= 0.0) {
            return Err(Error::InvalidParameter(format!("chi must be >= 0, got {chi}")));
        }
        let first = pool
            .first()
            .ok_or_else(|| Error::InvalidParameter("empty cascade pool".into()))?;
        if pool.iter().any(|c| c.level != first.level || c.t_log2 != first.t_log2) {
            return Err(Error::InvalidParameter("pool members differ in level or integral scale".into()));
        }
        if delta_levels > first.level {
            return Err(Error::InvalidParameter("delta_levels exceeds construction depth".into()));
        }
        Ok(Self { chi, delta_levels, pool })
    }

    pub fn chi(&self) -> f64 {
        self.chi
    }

    pub fn delta_levels(&self) -> u32 {
        self.delta_levels
    }

    /// Construction depth of every pool member.
    pub fn level(&self) -> u32 {
        self.pool[0].level
    }

    pub fn t_log2(&self) -> u32 {
        self.pool[0].t_log2
    }

    pub fn integral_scale(&self) -> F {
        self.pool[0].integral_scale()
    }

    /// Deepest analysis level the measure was built for.
    pub fn j_max(&self) -> u32 {
        self.level() - self.delta_levels
    }

    pub fn pool(&self) -> &[CascadeSample<F>] {
        &self.pool
    }

    pub fn pool_size(&self) -> usize {
        self.pool.len()
    }

    pub fn n_integral_scales(&self, j: u32) -> usize {
        n_integral_scales(j, self.chi)
    }

    /// Pool prefix serving analysis level `j`.
    pub fn prefix(&self, j: u32) -> Result<&[CascadeSample<F>]> {
        if j > self.level() {
            return Err(Error::LevelOutOfRange { j, level: self.level() });
        }
        let needed = self.n_integral_scales(j);
        if needed > self.pool.len() {
            return Err(Error::InsufficientPool { needed, available: self.pool.len() });
        }
        Ok(&self.pool[..needed])
    }

    /// The `N_T(j) 2^j` cell masses of level `j`, cascade after cascade.
    pub fn window(&self, j: u32) -> Result<Vec<F>> {
        let mut out = Vec::new();
        for c in self.prefix(j)? {
            out.extend(c.coarse_grain(j)?);
        }
        Ok(out)
    }

    /// Writes the binary dump: magic, version, `t_log2`, level, `χ`, pool size,
    /// `delta_levels`, then every cascade's finest masses as little-endian f64.
    pub fn write_dump<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(DUMP_MAGIC)?;
        w.write_all(&DUMP_VERSION.to_le_bytes())?;
        w.write_all(&self.t_log2().to_le_bytes())?;
        w.write_all(&self.level().to_le_bytes())?;
        w.write_all(&self.chi.to_le_bytes())?;
        w.write_all(&(self.pool.len() as u64).to_le_bytes())?;
        w.write_all(&self.delta_levels.to_le_bytes())?;
        for c in &self.pool {
            for m in &c.masses {
                w.write_all(&m.as_f64().to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_dump<R: Read>(mut r: R, limits: &ResourceLimits) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != DUMP_MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let version = read_u32(&mut r)?;
        if version != DUMP_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let t_log2 = read_u32(&mut r)?;
        let level = read_u32(&mut r)?;
        let chi = f64::from_le_bytes(read_array(&mut r)?);
        let pool_size = u64::from_le_bytes(read_array(&mut r)?);
        let delta_levels = read_u32(&mut r)?;
        if level >= 48 || pool_size == 0 {
            return Err(Error::Format(format!("implausible header: level {level}, pool {pool_size}")));
        }
        limits.check(pool_size as u128 * (1u128 << level))?;
        let cells = 1usize << level;
        let mut pool = Vec::with_capacity(pool_size as usize);
        let mut buf = vec![0u8; cells * 8];
        for _ in 0..pool_size {
            r.read_exact(&mut buf)?;
            let masses = buf
                .chunks_exact(8)
                .map(|b| F::lit(f64::from_le_bytes(b.try_into().unwrap())))
                .collect();
            pool.push(CascadeSample { t_log2, level, masses });
        }
        Self::from_pool(chi, delta_levels, pool).map_err(|e| Error::Format(e.to_string()))
    }
}

pub const DUMP_MAGIC: &[u8; 8] = b"MXCASCAD";
pub const DUMP_VERSION: u32 = 1;

fn read_array<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)?;
    Ok(b)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    Ok(u32::from_le_bytes(read_array(r)?))
}

/// Cell count a mixed build would allocate.
pub fn mixed_cell_count(j_max: u32, chi: f64, delta_levels: u32) -> u128 {
    let level = j_max + delta_levels;
    if level >= 100 {
        return u128::MAX;
    }
    n_integral_scales(j_max, chi) as u128 * (1u128 << level)
}

/// Builds the pool for analysis levels up to `j_max`: `N_T(j_max)` cascades,
/// each `j_max + delta_levels` deep, cascade `m` drawing from
/// `stream.cascade(m)`. Members are built in parallel; output does not depend
/// on the worker count.
pub fn build_mixed<F, L>(
    law: &L,
    t_log2: u32,
    j_max: u32,
    chi: f64,
    delta_levels: u32,
    stream: TrialStream,
    limits: &ResourceLimits,
) -> Result<MixedMeasure<F>>
where
    F: Real,
    L: WeightLaw<F> + ?Sized,
{
    if !(chi.is_finite() && chi >= 0.0) {
        return Err(Error::InvalidParameter(format!("chi must be >= 0, got {chi}")));
    }
    let cells = mixed_cell_count(j_max, chi, delta_levels);
    limits.check(cells)?;
    let level = j_max + delta_levels;
    let pool_size = n_integral_scales(j_max, chi);
    let pool = (0..pool_size)
        .into_par_iter()
        .map(|m| {
            let mut rng = stream.cascade(m as u64);
            build_cascade(law, t_log2, level, &mut rng, limits)
        })
        .collect::<Result<Vec<_>>>()?;
    MixedMeasure::from_pool(chi, delta_levels, pool)
}
