//! Partition functions, extreme masses and box-counting histograms of a
//! [`MixedMeasure`].
//!
//! Summation order is fixed everywhere: cell terms are combined with
//! [`pairwise_sum`] inside each cascade, then per-cascade sums are combined
//! the same way across the pool prefix. Two quantities built from the same
//! terms therefore agree bit for bit.

use rayon::prelude::*;

use crate::cascade::MixedMeasure;
use crate::error::{Error, Result};
use crate::scalar::{pairwise_sum, Real};

/// `x^p`, exact for `p = 0` and `p = 1`.
#[inline]
pub fn cell_power<F: Real>(x: F, p: F) -> F {
    if p == F::zero() {
        F::one()
    } else if p == F::one() {
        x
    } else {
        x.powf(p)
    }
}

/// `Σ_k cells[k]^p` in pairwise order.
pub fn power_sum<F: Real>(cells: &[F], p: F) -> F {
    let terms: Vec<F> = cells.iter().map(|&x| cell_power(x, p)).collect();
    pairwise_sum(&terms)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionEntry<F> {
    pub j: u32,
    pub p: F,
    pub s: F,
    pub log2_s: F,
    /// Number of integral scales `N_T(j)` contributing.
    pub n_t: usize,
    /// Number of terms in the sum.
    pub n: usize,
}

/// `S(j, p)` on a `j × p` grid, stored row-major by `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionTable<F> {
    chi: f64,
    j_list: Vec<u32>,
    p_list: Vec<F>,
    entries: Vec<PartitionEntry<F>>,
}

impl<F: Real> PartitionTable<F> {
    pub fn chi(&self) -> f64 {
        self.chi
    }

    pub fn j_list(&self) -> &[u32] {
        &self.j_list
    }

    pub fn p_list(&self) -> &[F] {
        &self.p_list
    }

    pub fn entries(&self) -> &[PartitionEntry<F>] {
        &self.entries
    }

    pub fn entry(&self, j_index: usize, p_index: usize) -> &PartitionEntry<F> {
        &self.entries[j_index * self.p_list.len() + p_index]
    }

    /// Entry for level `j` and the `p_index`-th exponent.
    pub fn get(&self, j: u32, p_index: usize) -> Option<&PartitionEntry<F>> {
        let ji = self.j_list.iter().position(|&x| x == j)?;
        (p_index < self.p_list.len()).then(|| self.entry(ji, p_index))
    }
}

fn check_lists<F: Real>(j_list: &[u32], p_list: &[F]) -> Result<()> {
    if j_list.is_empty() || p_list.is_empty() {
        return Err(Error::InvalidParameter("j and p lists must be non-empty".into()));
    }
    if p_list.iter().any(|p| !p.is_finite()) {
        return Err(Error::InvalidParameter("exponents must be finite".into()));
    }
    Ok(())
}

fn assemble<F: Real>(
    chi: f64,
    j_list: &[u32],
    p_list: &[F],
    // per j: (n_t, terms per cascade, per p: per-cascade sums)
    rows: Vec<(usize, usize, Vec<Vec<F>>)>,
) -> PartitionTable<F> {
    let mut entries = Vec::with_capacity(j_list.len() * p_list.len());
    for (&j, (n_t, per_cascade, sums)) in j_list.iter().zip(rows) {
        for (&p, cascade_sums) in p_list.iter().zip(sums) {
            let s = pairwise_sum(&cascade_sums);
            entries.push(PartitionEntry { j, p, s, log2_s: s.log2(), n_t, n: n_t * per_cascade });
        }
    }
    PartitionTable { chi, j_list: j_list.to_vec(), p_list: p_list.to_vec(), entries }
}

/// Dyadic partition function `S(j,p) = Σ_{k<N} μ̃(I_{j,k})^p` over the
/// `N = N_T(j) 2^j` cells of the level-`j` window.
///
/// Negative exponents are evaluated (the proxy masses are strictly positive)
/// but logged as a warning: their scaling estimates are not reliable.
pub fn partition<F: Real>(measure: &MixedMeasure<F>, j_list: &[u32], p_list: &[F]) -> Result<PartitionTable<F>> {
    check_lists(j_list, p_list)?;
    if p_list.iter().any(|p| *p < F::zero()) {
        log::warn!("partition function requested for p < 0; scaling estimates there are unreliable");
    }
    let rows = j_list
        .iter()
        .map(|&j| {
            let prefix = measure.prefix(j)?;
            let per_cascade: Vec<Vec<F>> = prefix
                .par_iter()
                .map(|c| {
                    let cells = c.coarse_grain(j)?;
                    Ok(p_list.iter().map(|&p| power_sum(&cells, p)).collect())
                })
                .collect::<Result<_>>()?;
            Ok((prefix.len(), 1usize << j, transpose(per_cascade, p_list.len())))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(measure.chi(), j_list, p_list, rows))
}

fn transpose<F: Copy>(rows: Vec<Vec<F>>, width: usize) -> Vec<Vec<F>> {
    (0..width).map(|i| rows.iter().map(|r| r[i]).collect()).collect()
}

/// Largest and smallest cell mass of the level-`j` window.
pub fn sup_inf<F: Real>(measure: &MixedMeasure<F>, j: u32) -> Result<(F, F)> {
    let mut sup = F::neg_infinity();
    let mut inf = F::infinity();
    for c in measure.prefix(j)? {
        for m in c.coarse_grain(j)? {
            sup = sup.max(m);
            inf = inf.min(m);
        }
    }
    Ok((sup, inf))
}

/// Piecewise-constant analyzing function on `[0, 2^J]`.
///
/// `values[s]` is the value on `[s 2^{-G}, (s+1) 2^{-G})`, so there are
/// `2^{J+G}` pieces. Integrals against a cascade are exact finite sums as
/// long as the cascade resolves `G` levels below the analysis level.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxWindowFunction<F> {
    support_log2: u32,
    granularity: u32,
    values: Vec<F>,
}

impl<F: Real> BoxWindowFunction<F> {
    pub fn new(support_log2: u32, granularity: u32, values: Vec<F>) -> Result<Self> {
        let pieces = support_log2
            .checked_add(granularity)
            .filter(|b| *b < 32)
            .map(|b| 1usize << b)
            .ok_or_else(|| Error::InvalidParameter("window function grid too large".into()))?;
        if values.len() != pieces {
            return Err(Error::InvalidParameter(format!(
                "expected {pieces} piece values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("window values must be finite".into()));
        }
        if values.iter().all(|v| *v == F::zero()) {
            return Err(Error::InvalidParameter("window function vanishes identically".into()));
        }
        Ok(Self { support_log2, granularity, values })
    }

    /// `1_{[0,1]}`; recovers the dyadic partition function.
    pub fn indicator() -> Self {
        Self { support_log2: 0, granularity: 0, values: vec![F::one()] }
    }

    /// `+1` on `[0,1)`, `−1` on `[1,2)`.
    pub fn haar() -> Self {
        Self { support_log2: 1, granularity: 0, values: vec![F::one(), -F::one()] }
    }

    /// Midpoint sampling of a piecewise-continuous `g` supported in `[0, 2^J]`.
    pub fn sampled(support_log2: u32, granularity: u32, g: impl Fn(F) -> F) -> Result<Self> {
        let step = F::lit(2.0).powi(-(granularity as i32));
        let pieces = 1usize << (support_log2 + granularity);
        let values = (0..pieces)
            .map(|s| g((F::from_usize_lossy(s) + F::lit(0.5)) * step))
            .collect();
        Self::new(support_log2, granularity, values)
    }

    pub fn support_log2(&self) -> u32 {
        self.support_log2
    }

    pub fn granularity(&self) -> u32 {
        self.granularity
    }

    pub fn values(&self) -> &[F] {
        &self.values
    }

    pub fn eval(&self, t: F) -> F {
        let scaled = t * F::lit(2.0).powi(self.granularity as i32);
        if !(scaled >= F::zero()) {
            return F::zero();
        }
        scaled
            .floor()
            .to_usize()
            .and_then(|i| self.values.get(i).copied())
            .unwrap_or_else(F::zero)
    }
}

/// Generalized partition function `Σ_m Σ_{k < 2^j − 2^J} |∫ g(2^j t/T − k) dμ^{(m)}(t)|^p`
/// over the pool prefix of each level, border positions excluded.
pub fn wavelet_partition<F: Real>(
    measure: &MixedMeasure<F>,
    j_list: &[u32],
    p_list: &[F],
    g: &BoxWindowFunction<F>,
) -> Result<PartitionTable<F>> {
    check_lists(j_list, p_list)?;
    if let Some(p) = p_list.iter().find(|p| **p <= F::zero()) {
        return Err(Error::UnsupportedExponent(p.as_f64()));
    }
    let gran = g.granularity;
    if gran > measure.delta_levels() {
        return Err(Error::GranularityTooFine { granularity: gran, available: measure.delta_levels() });
    }
    let rows = j_list
        .iter()
        .map(|&j| {
            if j + gran > measure.level() {
                return Err(Error::LevelOutOfRange { j: j + gran, level: measure.level() });
            }
            let positions = (1usize << j).saturating_sub(1usize << g.support_log2);
            if positions == 0 {
                return Err(Error::EmptyWindow { j, support_log2: g.support_log2 });
            }
            let prefix = measure.prefix(j)?;
            let stride = 1usize << gran;
            let per_cascade: Vec<Vec<F>> = prefix
                .par_iter()
                .map(|c| {
                    let cells = c.coarse_grain(j + gran)?;
                    let coefficients: Vec<F> = (0..positions)
                        .map(|k| {
                            let start = k * stride;
                            g.values
                                .iter()
                                .zip(&cells[start..start + g.values.len()])
                                .fold(F::zero(), |acc, (&gv, &m)| acc + gv * m)
                                .abs()
                        })
                        .collect();
                    Ok(p_list.iter().map(|&p| power_sum(&coefficients, p)).collect())
                })
                .collect::<Result<_>>()?;
            Ok((prefix.len(), positions, transpose(per_cascade, p_list.len())))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(measure.chi(), j_list, p_list, rows))
}

/// Cell counts per Hölder-exponent bin at one level.
///
/// Bin `i` counts cells with `2^{-j(h_i+ε)} ≤ μ̃(I_{j,k})/T ≤ 2^{-j(h_i−ε)}`; a
/// cell on a shared edge goes to the lower-`h` bin only. Histograms from
/// several trials can be merged, in which case `samples` records how many.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxCountHistogram<F> {
    pub j: u32,
    pub epsilon: F,
    pub h_bins: Vec<F>,
    pub counts: Vec<u64>,
    /// Total cells inspected (summed over merged samples).
    pub n_cells: u64,
    pub samples: u64,
}

impl<F: Real> BoxCountHistogram<F> {
    /// Adds another trial's histogram at the same level and binning.
    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if self.j != other.j || self.epsilon != other.epsilon || self.h_bins != other.h_bins {
            return Err(Error::InvalidParameter("histograms differ in level or binning".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.n_cells += other.n_cells;
        self.samples += other.samples;
        Ok(())
    }

    /// Count per sample for bin `i`.
    pub fn mean_count(&self, i: usize) -> F {
        F::lit(self.counts[i] as f64) / F::lit(self.samples.max(1) as f64)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Evenly spaced contiguous bin centres covering `[h_min, h_max]` with half-width `epsilon`.
pub fn contiguous_bins<F: Real>(h_min: F, h_max: F, epsilon: F) -> Vec<F> {
    let width = epsilon + epsilon;
    let mut bins = Vec::new();
    let mut i = 0usize;
    loop {
        let h = h_min + epsilon + width * F::from_usize_lossy(i);
        bins.push(h);
        if h + epsilon >= h_max {
            break;
        }
        i += 1;
    }
    bins
}

pub fn box_count<F: Real>(
    measure: &MixedMeasure<F>,
    j: u32,
    h_bins: &[F],
    epsilon: F,
) -> Result<BoxCountHistogram<F>> {
    if !(epsilon.is_finite() && epsilon > F::zero()) {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
    }
    if h_bins.is_empty() || h_bins.iter().any(|h| !h.is_finite()) {
        return Err(Error::InvalidParameter("histogram bins must be non-empty and finite".into()));
    }
    let min_gap = (epsilon + epsilon) * (F::one() - F::lit(1e-9));
    if h_bins.windows(2).any(|w| w[1] - w[0] < min_gap) {
        return Err(Error::InvalidParameter("bin centres must increase by at least 2·epsilon".into()));
    }
    let t = measure.integral_scale();
    let jf = F::lit(j as f64);
    let mut counts = vec![0u64; h_bins.len()];
    let mut n_cells = 0u64;
    for c in measure.prefix(j)? {
        for m in c.coarse_grain(j)? {
            n_cells += 1;
            let x = m / t;
            let bin = if j == 0 {
                // exponents are undefined at j = 0; every bin is the single point x = 1
                (x == F::one()).then_some(0)
            } else {
                let e = -x.log2() / jf;
                let i = h_bins.partition_point(|&h| h + epsilon < e);
                (i < h_bins.len() && h_bins[i] - epsilon <= e).then_some(i)
            };
            if let Some(i) = bin {
                counts[i] += 1;
            }
        }
    }
    Ok(BoxCountHistogram { j, epsilon, h_bins: h_bins.to_vec(), counts, n_cells, samples: 1 })
}
