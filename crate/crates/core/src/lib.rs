//! Mixed-asymptotic multifractal cascades: simulation, partition-function
//! analysis, theoretical spectra and ensemble estimation.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the
//! `*F64`/`*F32` aliases below pick a precision.

// `!(x < y)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cascade;
pub mod error;
pub mod estimation;
pub mod export;
pub mod generators;
pub mod rng;
pub mod scalar;
pub mod spectrum;

pub use analysis::{
    box_count, partition, power_sum, sup_inf, wavelet_partition, BoxCountHistogram, BoxWindowFunction,
    PartitionEntry, PartitionTable,
};
pub use cascade::{build_cascade, build_mixed, n_integral_scales, CascadeSample, MixedMeasure, ResourceLimits};
pub use error::{Error, Result};
pub use estimation::{
    box_count_ensemble, clt_diagnostic, fit_box_dimension, fit_sup_inf, fit_tau, least_squares, run_ensemble,
    Analyzer, BoxCountConfig, BoxDimensionFit, CltConfig, CltRegime, CltReport, EnsembleConfig, EstimateReport, EstimateRow,
};
pub use export::Provenance;
pub use generators::{EmpiricalLaw, FamilyKind, GeneratorSpec, WeightLaw};
pub use rng::TrialStream;
pub use scalar::{pairwise_sum, Real};
pub use spectrum::{
    besov_frontier, critical_exponents, lambert_w, legendre, spectrum_report, theoretical_tau_chi, Branch,
    CriticalExponents, SpectrumReport,
};

pub type GeneratorF64 = GeneratorSpec<f64>;
pub type GeneratorF32 = GeneratorSpec<f32>;
pub type CascadeF64 = CascadeSample<f64>;
pub type CascadeF32 = CascadeSample<f32>;
pub type MixedMeasureF64 = MixedMeasure<f64>;
pub type MixedMeasureF32 = MixedMeasure<f32>;
pub type PartitionTableF64 = PartitionTable<f64>;
pub type PartitionTableF32 = PartitionTable<f32>;
pub type SpectrumReportF64 = SpectrumReport<f64>;
pub type SpectrumReportF32 = SpectrumReport<f32>;
pub type EstimateReportF64 = EstimateReport<f64>;
pub type EstimateReportF32 = EstimateReport<f32>;
