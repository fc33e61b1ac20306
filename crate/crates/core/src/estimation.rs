//! Scaling-exponent estimates from Monte Carlo ensembles.
//!
//! Each trial builds a fresh mixed measure from `TrialStream::new(seed, t)`,
//! so a report is a pure function of its configuration. Trials run in
//! parallel and are reduced in trial order.

use rayon::prelude::*;

use crate::analysis::{box_count, partition, sup_inf, wavelet_partition, BoxCountHistogram, BoxWindowFunction, PartitionTable};
use crate::cascade::{build_mixed, MixedMeasure, ResourceLimits};
use crate::error::{Error, Result};
use crate::generators::{FamilyKind, GeneratorSpec};
use crate::rng::TrialStream;
use crate::scalar::{pairwise_sum, Real};
use crate::spectrum::critical_exponents;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit<F> {
    pub slope: F,
    pub intercept: F,
}

/// Ordinary least squares `y ≈ slope·x + intercept`.
///
/// Both coordinates are shifted by their first value before centring, so
/// constant data gives a slope of exactly zero and `y = x + c` with exactly
/// representable values gives exactly one.
pub fn least_squares<F: Real>(xs: &[F], ys: &[F]) -> Result<LineFit<F>> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidParameter("abscissae and ordinates differ in length".into()));
    }
    if xs.len() < 2 || xs.iter().all(|x| *x == xs[0]) {
        return Err(Error::DegenerateFit);
    }
    let n = F::from_usize_lossy(xs.len());
    let dx: Vec<F> = xs.iter().map(|&x| x - xs[0]).collect();
    let dy: Vec<F> = ys.iter().map(|&y| y - ys[0]).collect();
    let mx = pairwise_sum(&dx) / n;
    let my = pairwise_sum(&dy) / n;
    let sxx: Vec<F> = dx.iter().map(|&x| (x - mx) * (x - mx)).collect();
    let sxy: Vec<F> = dx.iter().zip(&dy).map(|(&x, &y)| (x - mx) * (y - my)).collect();
    let slope = pairwise_sum(&sxy) / pairwise_sum(&sxx);
    let intercept = ys[0] + my - slope * (xs[0] + mx);
    Ok(LineFit { slope, intercept })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauFit<F> {
    pub p: F,
    /// Slope of `log2 S(j,p)` against `j`.
    pub slope: F,
    /// `τ̂_χ(p) = −slope`.
    pub tau_hat: F,
}

/// Fits `log2 S(j,p)` against `j` over `j_range` for every exponent of the table.
pub fn fit_tau<F: Real>(table: &PartitionTable<F>, j_range: &[u32]) -> Result<Vec<TauFit<F>>> {
    let rows: Vec<usize> = j_range
        .iter()
        .map(|j| {
            table.j_list().iter().position(|x| x == j).ok_or_else(|| {
                Error::InvalidParameter(format!("level {j} is not in the partition table"))
            })
        })
        .collect::<Result<_>>()?;
    let xs: Vec<F> = j_range.iter().map(|&j| F::lit(j as f64)).collect();
    (0..table.p_list().len())
        .map(|pi| {
            let ys: Vec<F> = rows.iter().map(|&ji| table.entry(ji, pi).log2_s).collect();
            let fit = least_squares(&xs, &ys)?;
            // subtracting from zero keeps an exact zero slope at +0
            Ok(TauFit { p: table.p_list()[pi], slope: fit.slope, tau_hat: F::zero() - fit.slope })
        })
        .collect()
}

/// Mean, population r.m.s. and `rms/√n` of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary<F> {
    pub mean: F,
    pub rms: F,
    pub stderr: F,
}

impl<F: Real> Summary<F> {
    pub fn of(values: &[F]) -> Self {
        let n = F::from_usize_lossy(values.len().max(1));
        let mean = pairwise_sum(values) / n;
        let sq: Vec<F> = values.iter().map(|&v| (v - mean) * (v - mean)).collect();
        let rms = (pairwise_sum(&sq) / n).sqrt();
        Self { mean, rms, stderr: rms / n.sqrt() }
    }
}

/// Which partition function the ensemble fits.
#[derive(Debug, Clone, PartialEq)]
pub enum Analyzer<F> {
    Dyadic,
    Wavelet(BoxWindowFunction<F>),
}

#[derive(Debug, Clone)]
pub struct EnsembleConfig<F> {
    pub generator: GeneratorSpec<F>,
    pub t_log2: u32,
    pub chi: f64,
    pub j_min: u32,
    pub j_max: u32,
    pub delta_levels: u32,
    pub p_list: Vec<F>,
    pub trials: usize,
    pub master_seed: u64,
    pub analyzer: Analyzer<F>,
    pub limits: ResourceLimits,
}

impl<F: Real> EnsembleConfig<F> {
    /// Desk-scale defaults: `T = 2^10`, `j = 0..6`, five extra levels, `p = 0..6`, 30 trials.
    pub fn desk(generator: GeneratorSpec<F>, chi: f64, master_seed: u64) -> Self {
        Self {
            generator,
            t_log2: 10,
            chi,
            j_min: 0,
            j_max: 6,
            delta_levels: 5,
            p_list: (0..=6).map(|p| F::lit(p as f64)).collect(),
            trials: 30,
            master_seed,
            analyzer: Analyzer::Dyadic,
            limits: ResourceLimits::default(),
        }
    }

    pub fn j_range(&self) -> Vec<u32> {
        (self.j_min..=self.j_max).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateRow<F> {
    pub p: F,
    pub tau_hat_mean: F,
    pub tau_hat_rms: F,
    pub stderr: F,
}

impl<F: Real> EstimateRow<F> {
    pub fn slope_hat(&self) -> F {
        -self.tau_hat_mean
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport<F> {
    pub family: FamilyKind,
    pub chi: f64,
    pub j_min: u32,
    pub j_max: u32,
    pub trials: usize,
    pub rows: Vec<EstimateRow<F>>,
    /// Slopes of `log2 sup` and `log2 inf` against `−j`.
    pub sup_slope: Summary<F>,
    pub inf_slope: Summary<F>,
    /// `per_trial[t][i]` is trial `t`'s estimate at `p_list[i]`.
    pub per_trial: Vec<Vec<F>>,
    /// Set for a single trial, where no spread can be estimated.
    pub degenerate: bool,
}

impl<F: Real> EstimateReport<F> {
    pub fn row(&self, p: F) -> Option<&EstimateRow<F>> {
        self.rows.iter().find(|r| r.p == p)
    }
}

struct TrialOutcome<F> {
    tau_hat: Vec<F>,
    sup_slope: F,
    inf_slope: F,
}

fn sup_inf_slopes<F: Real>(measure: &MixedMeasure<F>, j_range: &[u32]) -> Result<(F, F)> {
    let mut sups = Vec::with_capacity(j_range.len());
    let mut infs = Vec::with_capacity(j_range.len());
    for &j in j_range {
        let (s, i) = sup_inf(measure, j)?;
        sups.push(s.log2());
        infs.push(i.log2());
    }
    let xs: Vec<F> = j_range.iter().map(|&j| -F::lit(j as f64)).collect();
    Ok((least_squares(&xs, &sups)?.slope, least_squares(&xs, &infs)?.slope))
}

fn run_trial<F: Real>(cfg: &EnsembleConfig<F>, trial: usize) -> Result<TrialOutcome<F>> {
    let j_range = cfg.j_range();
    let measure = build_mixed(
        &cfg.generator,
        cfg.t_log2,
        cfg.j_max,
        cfg.chi,
        cfg.delta_levels,
        TrialStream::new(cfg.master_seed, trial as u64),
        &cfg.limits,
    )?;
    let table = match &cfg.analyzer {
        Analyzer::Dyadic => partition(&measure, &j_range, &cfg.p_list)?,
        Analyzer::Wavelet(g) => wavelet_partition(&measure, &j_range, &cfg.p_list, g)?,
    };
    let tau_hat = fit_tau(&table, &j_range)?.into_iter().map(|f| f.tau_hat).collect();
    let (sup_slope, inf_slope) = sup_inf_slopes(&measure, &j_range)?;
    Ok(TrialOutcome { tau_hat, sup_slope, inf_slope })
}

/// Runs `trials` independent experiments and averages the fitted exponents.
pub fn run_ensemble<F: Real>(cfg: &EnsembleConfig<F>) -> Result<EstimateReport<F>> {
    if cfg.trials == 0 {
        return Err(Error::InsufficientTrials { trials: 0, required: 1 });
    }
    if cfg.j_max <= cfg.j_min {
        return Err(Error::DegenerateFit);
    }
    cfg.limits
        .check(crate::cascade::mixed_cell_count(cfg.j_max, cfg.chi, cfg.delta_levels))?;
    let outcomes = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(cfg, t))
        .collect::<Result<Vec<_>>>()?;

    let rows = cfg
        .p_list
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let column: Vec<F> = outcomes.iter().map(|o| o.tau_hat[i]).collect();
            let s = Summary::of(&column);
            EstimateRow { p, tau_hat_mean: s.mean, tau_hat_rms: s.rms, stderr: s.stderr }
        })
        .collect();
    let sups: Vec<F> = outcomes.iter().map(|o| o.sup_slope).collect();
    let infs: Vec<F> = outcomes.iter().map(|o| o.inf_slope).collect();
    Ok(EstimateReport {
        family: cfg.generator.kind(),
        chi: cfg.chi,
        j_min: cfg.j_min,
        j_max: cfg.j_max,
        trials: cfg.trials,
        rows,
        sup_slope: Summary::of(&sups),
        inf_slope: Summary::of(&infs),
        per_trial: outcomes.into_iter().map(|o| o.tau_hat).collect(),
        degenerate: cfg.trials == 1,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupInfFit<F> {
    pub sup_slope: Summary<F>,
    pub inf_slope: Summary<F>,
}

/// Sup and inf scaling slopes (against `−j`), averaged over measures.
pub fn fit_sup_inf<F: Real>(measures: &[MixedMeasure<F>], j_range: &[u32]) -> Result<SupInfFit<F>> {
    if measures.is_empty() {
        return Err(Error::InsufficientData("no measures given".into()));
    }
    let (sups, infs): (Vec<F>, Vec<F>) = measures
        .iter()
        .map(|m| sup_inf_slopes(m, j_range))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();
    Ok(SupInfFit { sup_slope: Summary::of(&sups), inf_slope: Summary::of(&infs) })
}

#[derive(Debug, Clone)]
pub struct BoxCountConfig<F> {
    pub generator: GeneratorSpec<F>,
    pub t_log2: u32,
    pub chi: f64,
    pub j_list: Vec<u32>,
    pub delta_levels: u32,
    pub h_bins: Vec<F>,
    pub epsilon: F,
    pub trials: usize,
    pub master_seed: u64,
    pub limits: ResourceLimits,
}

/// One histogram per level, accumulated over all trials.
///
/// Trials run one after another (each pool is built in parallel) to keep
/// only one large measure alive at a time.
pub fn box_count_ensemble<F: Real>(cfg: &BoxCountConfig<F>) -> Result<Vec<BoxCountHistogram<F>>> {
    if cfg.trials == 0 {
        return Err(Error::InsufficientTrials { trials: 0, required: 1 });
    }
    let j_max = *cfg.j_list.iter().max().ok_or_else(|| Error::InvalidParameter("no levels given".into()))?;
    let mut merged: Option<Vec<BoxCountHistogram<F>>> = None;
    for t in 0..cfg.trials {
        let measure = build_mixed(
            &cfg.generator,
            cfg.t_log2,
            j_max,
            cfg.chi,
            cfg.delta_levels,
            TrialStream::new(cfg.master_seed, t as u64),
            &cfg.limits,
        )?;
        let hists = cfg
            .j_list
            .par_iter()
            .map(|&j| box_count(&measure, j, &cfg.h_bins, cfg.epsilon))
            .collect::<Result<Vec<_>>>()?;
        match merged.as_mut() {
            None => merged = Some(hists),
            Some(acc) => {
                for (a, h) in acc.iter_mut().zip(&hists) {
                    a.merge(h)?;
                }
            }
        }
    }
    Ok(merged.expect("at least one trial"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxDimensionFit<F> {
    pub h: F,
    /// Slope of `log2(count per trial)` against `j`.
    pub slope: F,
    pub intercept: F,
    pub levels_used: Vec<u32>,
    /// Levels whose count was zero.
    pub levels_excluded: Vec<u32>,
}

/// Fits the growth rate of bin `bin` across the levels of `histograms`.
pub fn fit_box_dimension<F: Real>(histograms: &[BoxCountHistogram<F>], bin: usize) -> Result<BoxDimensionFit<F>> {
    let first = histograms.first().ok_or_else(|| Error::InsufficientData("no histograms".into()))?;
    if bin >= first.h_bins.len() {
        return Err(Error::InvalidParameter(format!("bin {bin} out of range")));
    }
    if histograms.iter().any(|h| h.h_bins != first.h_bins || h.epsilon != first.epsilon) {
        return Err(Error::InvalidParameter("histograms differ in binning".into()));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut levels_used = Vec::new();
    let mut levels_excluded = Vec::new();
    for h in histograms {
        if h.counts[bin] > 0 {
            xs.push(F::lit(h.j as f64));
            ys.push(h.mean_count(bin).log2());
            levels_used.push(h.j);
        } else {
            levels_excluded.push(h.j);
        }
    }
    if levels_used.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "bin h = {} has positive counts at {} level(s), need 2",
            first.h_bins[bin],
            levels_used.len()
        )));
    }
    let fit = least_squares(&xs, &ys)?;
    Ok(BoxDimensionFit { h: first.h_bins[bin], slope: fit.slope, intercept: fit.intercept, levels_used, levels_excluded })
}

/// Which term dominates the fluctuations of the rescaled partition function,
/// decided by the sign of `τ(2p) − 2τ(p)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CltRegime {
    /// `τ(2p) > 2τ(p)`: fluctuations between integral scales dominate, variance `∝ 1/N_T`.
    IntegralScale,
    /// `τ(2p) = 2τ(p)`: boundary case with a logarithmic correction.
    Logarithmic,
    /// `τ(2p) < 2τ(p)`: the largest cells dominate and the variance decays more slowly.
    FineScale,
    /// `τ(2p)` undefined for this law.
    Undetermined,
}

impl CltRegime {
    pub fn name(self) -> &'static str {
        match self {
            Self::IntegralScale => "integral-scale",
            Self::Logarithmic => "logarithmic",
            Self::FineScale => "fine-scale",
            Self::Undetermined => "undetermined",
        }
    }
}

#[derive(Debug, Clone)]
pub struct CltConfig<F> {
    pub generator: GeneratorSpec<F>,
    pub t_log2: u32,
    pub chi: f64,
    pub p: F,
    pub j_list: Vec<u32>,
    pub delta_levels: u32,
    pub trials: usize,
    pub master_seed: u64,
    pub limits: ResourceLimits,
}

pub const CLT_MIN_TRIALS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CltLevel<F> {
    pub j: u32,
    pub n_t: usize,
    /// Mean and sample variance over trials of `2^{j(τ(p)−χ)} S(j,p)`.
    pub mean: F,
    pub variance: F,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CltReport<F> {
    pub p: F,
    pub chi: f64,
    pub trials: usize,
    pub levels: Vec<CltLevel<F>>,
    pub slope_vs_j: F,
    /// `None` when `N_T` does not vary over the levels.
    pub slope_vs_log2_nt: Option<F>,
    /// `τ(2p) − 2τ(p)`.
    pub moment_gap: Option<F>,
    pub regime: CltRegime,
    pub predicted_slope_vs_j: Option<F>,
    pub predicted_slope_vs_log2_nt: Option<F>,
    /// `p_χ⁻/2 < p < p_χ⁺/2`.
    pub within_half_critical_range: bool,
}

fn classify<F: Real>(spec: &GeneratorSpec<F>, p: F) -> (Option<F>, CltRegime) {
    match (spec.tau(p + p), spec.tau(p)) {
        (Ok(t2), Ok(t1)) => {
            let gap = t2 - (t1 + t1);
            let tol = F::lit(1e-9) * (F::one() + t2.abs());
            let regime = if gap.abs() <= tol {
                CltRegime::Logarithmic
            } else if gap > F::zero() {
                CltRegime::IntegralScale
            } else {
                CltRegime::FineScale
            };
            (Some(gap), regime)
        }
        _ => (None, CltRegime::Undetermined),
    }
}

/// Variance decay of the rescaled partition function across levels.
pub fn clt_diagnostic<F: Real>(cfg: &CltConfig<F>) -> Result<CltReport<F>> {
    if cfg.trials < CLT_MIN_TRIALS {
        return Err(Error::InsufficientTrials { trials: cfg.trials, required: CLT_MIN_TRIALS });
    }
    let j_max = *cfg.j_list.iter().max().ok_or_else(|| Error::InvalidParameter("no levels given".into()))?;
    let tau_p = cfg.generator.tau(cfg.p)?;
    let chi = F::lit(cfg.chi);
    let t_log2 = F::lit(cfg.t_log2 as f64);
    let p_list = [cfg.p];
    // rows: trial, columns: level
    let rescaled = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let m = build_mixed(
                &cfg.generator,
                cfg.t_log2,
                j_max,
                cfg.chi,
                cfg.delta_levels,
                TrialStream::new(cfg.master_seed, t as u64),
                &cfg.limits,
            )?;
            let table = partition(&m, &cfg.j_list, &p_list)?;
            Ok(table
                .entries()
                .iter()
                .map(|e| {
                    let j = F::lit(e.j as f64);
                    (j * (tau_p - chi) + e.log2_s - cfg.p * t_log2).exp2()
                })
                .collect::<Vec<F>>())
        })
        .collect::<Result<Vec<_>>>()?;

    let n = F::from_usize_lossy(cfg.trials);
    let levels: Vec<CltLevel<F>> = cfg
        .j_list
        .iter()
        .enumerate()
        .map(|(i, &j)| {
            let column: Vec<F> = rescaled.iter().map(|r| r[i]).collect();
            let mean = pairwise_sum(&column) / n;
            let sq: Vec<F> = column.iter().map(|&v| (v - mean) * (v - mean)).collect();
            let variance = pairwise_sum(&sq) / (n - F::one());
            CltLevel { j, n_t: crate::cascade::n_integral_scales(j, cfg.chi), mean, variance }
        })
        .collect();

    let log_var: Vec<F> = levels.iter().map(|l| l.variance.log2()).collect();
    let js: Vec<F> = levels.iter().map(|l| F::lit(l.j as f64)).collect();
    let slope_vs_j = least_squares(&js, &log_var)?.slope;
    let log_nt: Vec<F> = levels.iter().map(|l| F::lit(l.n_t as f64).log2()).collect();
    let slope_vs_log2_nt = least_squares(&log_nt, &log_var).ok().map(|f| f.slope);

    let (moment_gap, regime) = classify(&cfg.generator, cfg.p);
    let (predicted_slope_vs_j, predicted_slope_vs_log2_nt) = match (regime, moment_gap) {
        (CltRegime::IntegralScale | CltRegime::Logarithmic, _) => {
            (Some(-chi), (chi > F::zero()).then(|| -F::one()))
        }
        (CltRegime::FineScale, Some(d)) => {
            (Some(-(chi + d)), (chi > F::zero()).then(|| -(F::one() + d / chi)))
        }
        _ => (None, None),
    };
    let crit = critical_exponents(&cfg.generator, chi)?;
    let two = F::lit(2.0);
    let within_half_critical_range = cfg.p > crit.p_minus / two && cfg.p < crit.p_plus / two;
    if !within_half_critical_range {
        log::warn!("p = {} lies outside (p-/2, p+/2); the variance rate is not covered by the limit theorems", cfg.p);
    }
    Ok(CltReport {
        p: cfg.p,
        chi: cfg.chi,
        trials: cfg.trials,
        levels,
        slope_vs_j,
        slope_vs_log2_nt,
        moment_gap,
        regime,
        predicted_slope_vs_j,
        predicted_slope_vs_log2_nt,
        within_half_critical_range,
    })
}
