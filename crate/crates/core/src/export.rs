//! CSV tables for every report type.
//!
//! Each file starts with a `#` provenance line, then a header row. Floats use
//! the shortest representation that round-trips, so identical reports give
//! identical bytes. Undefined values are written as empty fields.

use std::io::Write;

use crate::analysis::{BoxCountHistogram, PartitionTable};
use crate::error::Result;
use crate::estimation::{BoxDimensionFit, CltReport, EstimateReport};
use crate::scalar::Real;
use crate::spectrum::SpectrumReport;

/// Identifies the run that produced a table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    /// Hex SHA-256 of the effective configuration.
    pub config_sha256: String,
    pub seed: u64,
    pub version: String,
}

impl Provenance {
    pub fn line(&self) -> String {
        format!("# config_sha256={} seed={} version={}", self.config_sha256, self.seed, self.version)
    }
}

fn opt<F: Real>(x: Option<F>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes the provenance line, `header`, then `rows` as CSV.
pub fn write_table<W: Write>(mut w: W, prov: &Provenance, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
    writeln!(w, "{}", prov.line())?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(header)?;
    for r in rows {
        csv.write_record(&r)?;
    }
    csv.flush()?;
    Ok(())
}

pub const ESTIMATE_HEADER: [&str; 9] =
    ["p", "tau_hat_mean", "tau_hat_rms", "stderr", "trials", "j_min", "j_max", "chi", "family"];

pub fn write_estimate<W: Write, F: Real>(w: W, prov: &Provenance, r: &EstimateReport<F>) -> Result<()> {
    let rows = r
        .rows
        .iter()
        .map(|row| {
            vec![
                row.p.to_string(),
                row.tau_hat_mean.to_string(),
                row.tau_hat_rms.to_string(),
                row.stderr.to_string(),
                r.trials.to_string(),
                r.j_min.to_string(),
                r.j_max.to_string(),
                r.chi.to_string(),
                r.family.name().to_string(),
            ]
        })
        .collect();
    write_table(w, prov, &ESTIMATE_HEADER, rows)
}

/// One row per trial and exponent, ordered by trial then `p`.
pub fn write_estimate_trials<W: Write, F: Real>(w: W, prov: &Provenance, r: &EstimateReport<F>) -> Result<()> {
    let mut rows = Vec::new();
    for (t, taus) in r.per_trial.iter().enumerate() {
        for (row, tau) in r.rows.iter().zip(taus) {
            rows.push(vec![t.to_string(), row.p.to_string(), tau.to_string()]);
        }
    }
    write_table(w, prov, &["trial", "p", "tau_hat"], rows)
}

/// Sup and inf slope summaries of an ensemble.
pub fn write_extremes<W: Write, F: Real>(w: W, prov: &Provenance, r: &EstimateReport<F>) -> Result<()> {
    let rows = [("sup", &r.sup_slope), ("inf", &r.inf_slope)]
        .into_iter()
        .map(|(k, s)| {
            vec![k.into(), s.mean.to_string(), s.rms.to_string(), s.stderr.to_string(), r.chi.to_string()]
        })
        .collect();
    write_table(w, prov, &["statistic", "slope_mean", "slope_rms", "stderr", "chi"], rows)
}

pub fn write_partition<W: Write, F: Real>(w: W, prov: &Provenance, t: &PartitionTable<F>) -> Result<()> {
    let rows = t
        .entries()
        .iter()
        .map(|e| {
            vec![
                e.j.to_string(),
                e.p.to_string(),
                e.s.to_string(),
                e.log2_s.to_string(),
                e.n_t.to_string(),
                e.n.to_string(),
                t.chi().to_string(),
            ]
        })
        .collect();
    write_table(w, prov, &["j", "p", "s", "log2_s", "n_t", "n", "chi"], rows)
}

pub fn write_tau<W: Write, F: Real>(w: W, prov: &Provenance, r: &SpectrumReport<F>) -> Result<()> {
    let rows = r.tau.iter().map(|t| vec![t.p.to_string(), opt(t.tau), opt(t.tau_chi)]).collect();
    write_table(w, prov, &["p", "tau", "tau_chi"], rows)
}

/// `D = -inf` marks exponents outside the support of the spectrum.
pub fn write_legendre<W: Write, F: Real>(w: W, prov: &Provenance, r: &SpectrumReport<F>) -> Result<()> {
    let rows = r.legendre.iter().map(|l| vec![l.h.to_string(), l.d.to_string()]).collect();
    write_table(w, prov, &["h", "D"], rows)
}

pub fn write_besov<W: Write, F: Real>(w: W, prov: &Provenance, r: &SpectrumReport<F>) -> Result<()> {
    let rows = r.besov.iter().map(|b| vec![b.inv_p.to_string(), b.s.to_string()]).collect();
    write_table(w, prov, &["inv_p", "s"], rows)
}

pub fn write_exponents<W: Write, F: Real>(w: W, prov: &Provenance, r: &SpectrumReport<F>) -> Result<()> {
    let e = &r.exponents;
    let rows = vec![vec![
        r.family.name().to_string(),
        e.chi.to_string(),
        e.p_plus.to_string(),
        e.p_minus.to_string(),
        opt(e.h_plus),
        opt(e.h_minus),
        e.moment_condition.to_string(),
    ]];
    write_table(w, prov, &["family", "chi", "p_plus", "p_minus", "h_plus", "h_minus", "moment_condition"], rows)
}

pub fn write_histogram<W: Write, F: Real>(w: W, prov: &Provenance, h: &BoxCountHistogram<F>) -> Result<()> {
    let rows = h
        .h_bins
        .iter()
        .zip(&h.counts)
        .enumerate()
        .map(|(i, (b, c))| {
            vec![
                h.j.to_string(),
                b.to_string(),
                h.epsilon.to_string(),
                c.to_string(),
                h.mean_count(i).to_string(),
                h.n_cells.to_string(),
                h.samples.to_string(),
            ]
        })
        .collect();
    write_table(w, prov, &["j", "h", "epsilon", "count", "mean_count", "n_cells", "samples"], rows)
}

/// Levels are joined with `;` inside one field.
pub fn write_box_dimension<W: Write, F: Real>(w: W, prov: &Provenance, fits: &[BoxDimensionFit<F>]) -> Result<()> {
    let join = |v: &[u32]| v.iter().map(u32::to_string).collect::<Vec<_>>().join(";");
    let rows = fits
        .iter()
        .map(|f| {
            vec![
                f.h.to_string(),
                f.slope.to_string(),
                f.intercept.to_string(),
                join(&f.levels_used),
                join(&f.levels_excluded),
            ]
        })
        .collect();
    write_table(w, prov, &["h", "slope", "intercept", "levels_used", "levels_excluded"], rows)
}

pub fn write_clt_levels<W: Write, F: Real>(w: W, prov: &Provenance, r: &CltReport<F>) -> Result<()> {
    let rows = r
        .levels
        .iter()
        .map(|l| {
            let log2_var = if l.variance > F::zero() { Some(l.variance.log2()) } else { None };
            vec![
                l.j.to_string(),
                l.n_t.to_string(),
                l.mean.to_string(),
                l.variance.to_string(),
                opt(log2_var),
            ]
        })
        .collect();
    write_table(w, prov, &["j", "n_t", "mean", "variance", "log2_variance"], rows)
}

pub fn write_clt_summary<W: Write, F: Real>(w: W, prov: &Provenance, r: &CltReport<F>) -> Result<()> {
    let rows = vec![vec![
        r.p.to_string(),
        r.chi.to_string(),
        r.trials.to_string(),
        r.slope_vs_j.to_string(),
        opt(r.slope_vs_log2_nt),
        opt(r.moment_gap),
        r.regime.name().to_string(),
        opt(r.predicted_slope_vs_j),
        opt(r.predicted_slope_vs_log2_nt),
        r.within_half_critical_range.to_string(),
    ]];
    write_table(
        w,
        prov,
        &[
            "p",
            "chi",
            "trials",
            "slope_vs_j",
            "slope_vs_log2_nt",
            "moment_gap",
            "regime",
            "predicted_slope_vs_j",
            "predicted_slope_vs_log2_nt",
            "within_half_critical_range",
        ],
        rows,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::GeneratorSpec;
    use crate::spectrum::spectrum_report;

    fn prov() -> Provenance {
        Provenance { config_sha256: "ab".repeat(32), seed: 7, version: "0.1.0".into() }
    }

    #[test]
    fn provenance_then_header() {
        let g = GeneratorSpec::<f64>::log_normal(0.2).unwrap();
        let r = spectrum_report(&g, 1.0, &[0.0, 1.0], &[0.5], &[0.1]).unwrap();
        let mut buf = Vec::new();
        write_exponents(&mut buf, &prov(), &r).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], format!("# config_sha256={} seed=7 version=0.1.0", "ab".repeat(32)));
        assert_eq!(lines[1], "family,chi,p_plus,p_minus,h_plus,h_minus,moment_condition");
        assert!(lines[2].starts_with("lognormal,1,4.472135954999579,"), "{}", lines[2]);
    }

    #[test]
    fn undefined_values_are_empty() {
        let g = GeneratorSpec::<f64>::log_gamma(0.2, 3.0).unwrap();
        let r = spectrum_report(&g, 0.0, &[5.0], &[], &[]).unwrap();
        let mut buf = Vec::new();
        write_tau(&mut buf, &prov(), &r).unwrap();
        // τ is undefined past β; τ_χ continues linearly past p⁺
        let text = String::from_utf8(buf).unwrap();
        let fields: Vec<&str> = text.lines().nth(2).unwrap().split(',').collect();
        assert_eq!(fields[..2], ["5", ""]);
        assert!(fields[2].parse::<f64>().unwrap().is_finite());
    }
}
