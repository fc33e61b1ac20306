//! Subcommand implementations. Each one computes its reports first and then
//! writes every file from this thread, in a fixed order.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::{Context as _, Result};
use log::info;
use mixcascade::export::{self, Provenance};
use mixcascade::{
    box_count_ensemble, build_mixed, clt_diagnostic, critical_exponents, fit_box_dimension, legendre, run_ensemble,
    spectrum_report, Analyzer, BoxCountConfig, BoxWindowFunction, CltConfig, EnsembleConfig, EstimateReportF64,
    TrialStream,
};

use crate::config::{grid, AnalyzerChoice, Experiment};
use crate::plot::{Figure, Series, Style};

pub struct Context {
    pub exp: Experiment,
    pub prov: Provenance,
    /// Embedded in plots unless outputs must be reproducible.
    pub timestamp: Option<u64>,
    pub written: Vec<PathBuf>,
}

impl Context {
    pub fn new(exp: Experiment, reproducible: bool) -> Self {
        let prov = Provenance {
            config_sha256: exp.sha256(),
            seed: exp.master_seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
        };
        let timestamp = if reproducible {
            None
        } else {
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .ok()
                .map(|d| d.as_secs())
        };
        Self { exp, prov, timestamp, written: Vec::new() }
    }

    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        std::fs::create_dir_all(&self.exp.out_dir)
            .with_context(|| format!("cannot create output directory {}", self.exp.out_dir.display()))?;
        let path = self.exp.out_dir.join(name);
        let file = File::create(&path).with_context(|| format!("cannot write {}", path.display()))?;
        info!("writing {}", path.display());
        self.written.push(path);
        Ok(BufWriter::new(file))
    }

    fn csv(
        &mut self,
        name: &str,
        write: impl FnOnce(&mut BufWriter<File>, &Provenance) -> mixcascade::Result<()>,
    ) -> Result<()> {
        let prov = self.prov.clone();
        let mut w = self.create(name)?;
        write(&mut w, &prov)?;
        w.flush()?;
        Ok(())
    }

    fn svg(&mut self, name: &str, figure: &Figure) -> Result<()> {
        let svg = figure.to_svg(self.timestamp);
        let mut w = self.create(name)?;
        w.write_all(svg.as_bytes())?;
        w.flush()?;
        Ok(())
    }
}

fn chi_tag(chi: f64) -> String {
    format!("chi{chi}")
}

pub fn simulate(ctx: &mut Context) -> Result<()> {
    let exp = ctx.exp.clone();
    let g = exp.generator();
    let mut rows = Vec::new();
    for &chi in &exp.chi_list {
        exp.preflight(exp.j_max, chi)?;
        for t in 0..exp.simulate_trials {
            // trial t here is the same measure `fit` analyses as its trial t
            let m = build_mixed(
                &g,
                exp.t_log2,
                exp.j_max,
                chi,
                exp.delta_levels,
                TrialStream::new(exp.master_seed, t as u64),
                &exp.limits(),
            )?;
            let name = format!("measure_{}_trial{t}.bin", chi_tag(chi));
            let mut w = ctx.create(&name)?;
            m.write_dump(&mut w)?;
            let total: f64 = m.pool().iter().map(|c| c.total_mass()).sum();
            rows.push(vec![
                name,
                chi.to_string(),
                t.to_string(),
                m.t_log2().to_string(),
                m.level().to_string(),
                m.delta_levels().to_string(),
                m.pool_size().to_string(),
                total.to_string(),
            ]);
        }
    }
    ctx.csv("simulate.csv", |w, p| {
        export::write_table(
            w,
            p,
            &["file", "chi", "trial", "t_log2", "level", "delta_levels", "pool_size", "total_mass"],
            rows,
        )
    })
}

fn ensemble_config(exp: &Experiment, chi: f64) -> EnsembleConfig<f64> {
    EnsembleConfig {
        generator: exp.generator(),
        t_log2: exp.t_log2,
        chi,
        j_min: exp.j_min,
        j_max: exp.j_max,
        delta_levels: exp.delta_levels,
        p_list: exp.p_list.clone(),
        trials: exp.trials,
        master_seed: exp.master_seed,
        analyzer: match exp.analyzer {
            AnalyzerChoice::Dyadic => Analyzer::Dyadic,
            AnalyzerChoice::Box => Analyzer::Wavelet(BoxWindowFunction::indicator()),
            AnalyzerChoice::Haar => Analyzer::Wavelet(BoxWindowFunction::haar()),
        },
        limits: exp.limits(),
    }
}

/// Runs the ensemble for every `χ`, writes the estimate tables and the overlay plot.
fn fit_reports(ctx: &mut Context) -> Result<Vec<EstimateReportF64>> {
    let exp = ctx.exp.clone();
    for &chi in &exp.chi_list {
        exp.preflight(exp.j_max, chi)?;
    }
    let mut reports = Vec::new();
    for &chi in &exp.chi_list {
        info!("fit: chi = {chi}, {} trials", exp.trials);
        let r = run_ensemble(&ensemble_config(&exp, chi))?;
        if r.degenerate {
            log::warn!("a single trial gives no spread; rms and stderr are reported as 0");
        }
        let tag = chi_tag(chi);
        ctx.csv(&format!("fit_{tag}.csv"), |w, p| export::write_estimate(w, p, &r))?;
        ctx.csv(&format!("fit_{tag}_trials.csv"), |w, p| export::write_estimate_trials(w, p, &r))?;
        ctx.csv(&format!("extremes_{tag}.csv"), |w, p| export::write_extremes(w, p, &r))?;
        reports.push(r);
    }

    let g = exp.generator();
    let p_hi = exp.p_list.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let p_lo = exp.p_list.iter().cloned().fold(f64::INFINITY, f64::min);
    let fine = grid(p_lo, p_hi, 0.05);
    let mut series = vec![Series {
        label: "tau(p)".into(),
        style: Style::Solid,
        color: 5,
        points: fine.iter().map(|&p| (p, g.tau(p).unwrap_or(f64::NAN))).collect(),
        errors: None,
    }];
    for (k, r) in reports.iter().enumerate() {
        let crit = critical_exponents(&g, r.chi)?;
        series.push(Series {
            label: format!("chi={} theory", r.chi),
            style: Style::Dashed,
            color: k,
            points: fine.iter().map(|&p| (p, crit.tau_chi(&g, p).map_or(f64::NAN, |t| t + r.chi))).collect(),
            errors: None,
        });
        series.push(Series {
            label: format!("chi={} estimate", r.chi),
            style: Style::Markers,
            color: k,
            points: r.rows.iter().map(|row| (row.p, row.tau_hat_mean + r.chi)).collect(),
            errors: Some(r.rows.iter().map(|row| row.tau_hat_rms).collect()),
        });
    }
    let figure = Figure {
        title: format!("{} lambda2={}: tau_chi(p) + chi", exp.family, exp.lambda2),
        x_label: "p".into(),
        y_label: "tau_chi(p) + chi".into(),
        series,
    };
    ctx.svg("fit.svg", &figure)?;
    Ok(reports)
}

pub fn fit(ctx: &mut Context) -> Result<()> {
    fit_reports(ctx).map(|_| ())
}

pub fn spectrum(ctx: &mut Context) -> Result<()> {
    let exp = ctx.exp.clone();
    let g = exp.generator();
    let o = &exp.spectrum;
    let mut besov = Vec::new();
    let mut marks = Vec::new();
    let mut d_curve = None;
    for (k, &chi) in exp.chi_list.iter().enumerate() {
        let r = spectrum_report(&g, chi, &o.p_grid, &o.h_grid, &o.inv_p_grid)?;
        let tag = chi_tag(chi);
        ctx.csv(&format!("spectrum_{tag}_exponents.csv"), |w, p| export::write_exponents(w, p, &r))?;
        ctx.csv(&format!("spectrum_{tag}_tau.csv"), |w, p| export::write_tau(w, p, &r))?;
        ctx.csv(&format!("spectrum_{tag}_legendre.csv"), |w, p| export::write_legendre(w, p, &r))?;
        ctx.csv(&format!("spectrum_{tag}_besov.csv"), |w, p| export::write_besov(w, p, &r))?;
        let e = &r.exponents;
        crate::say(format_args!(
            "chi={chi}: p_plus={:.6} p_minus={:.6} h_plus={} h_minus={}",
            e.p_plus,
            e.p_minus,
            e.h_plus.map_or("undefined".into(), |h| format!("{h:.6}")),
            e.h_minus.map_or("undefined".into(), |h| format!("{h:.6}")),
        ));
        marks.push(Series {
            label: format!("h_chi at chi={chi}"),
            style: Style::Markers,
            color: k,
            points: [e.h_minus, e.h_plus].into_iter().flatten().map(|h| (h, -chi)).collect(),
            errors: None,
        });
        besov.push(Series {
            label: format!("chi={chi}"),
            style: Style::Dashed,
            color: k,
            points: r.besov.iter().map(|b| (b.inv_p, b.s)).collect(),
            errors: None,
        });
        d_curve.get_or_insert_with(|| r.legendre.iter().map(|l| (l.h, l.d)).collect::<Vec<_>>());
    }
    let mut legendre_series = vec![Series {
        label: "D(h)".into(),
        style: Style::Solid,
        color: 5,
        // the -inf sentinel is not drawable
        points: d_curve.unwrap_or_default().into_iter().filter(|(_, d)| d.is_finite()).collect(),
        errors: None,
    }];
    legendre_series.extend(marks);
    ctx.svg(
        "legendre.svg",
        &Figure {
            title: format!("{} lambda2={}: singularity spectrum", exp.family, exp.lambda2),
            x_label: "h".into(),
            y_label: "D(h)".into(),
            series: legendre_series,
        },
    )?;
    ctx.svg(
        "besov.svg",
        &Figure {
            title: format!("{} lambda2={}: Besov frontier", exp.family, exp.lambda2),
            x_label: "1/p".into(),
            y_label: "s".into(),
            series: besov,
        },
    )
}

pub fn histogram(ctx: &mut Context) -> Result<()> {
    let exp = ctx.exp.clone();
    let o = &exp.histogram;
    let g = exp.generator();
    let j_top = *o.j_list.iter().max().expect("validated non-empty");
    exp.preflight(j_top, o.chi)?;
    let cfg = BoxCountConfig {
        generator: g,
        t_log2: exp.t_log2,
        chi: o.chi,
        j_list: o.j_list.clone(),
        delta_levels: exp.delta_levels,
        h_bins: o.h_bins.clone(),
        epsilon: o.epsilon,
        trials: o.trials,
        master_seed: exp.master_seed,
        limits: exp.limits(),
    };
    info!("histogram: chi = {}, {} levels, {} trials", o.chi, o.j_list.len(), o.trials);
    let hists = box_count_ensemble(&cfg)?;
    let tag = chi_tag(o.chi);
    for h in &hists {
        ctx.csv(&format!("histogram_{tag}_j{}.csv", h.j), |w, p| export::write_histogram(w, p, h))?;
    }
    let fits: Vec<_> = (0..o.h_bins.len()).filter_map(|i| fit_box_dimension(&hists, i).ok()).collect();
    ctx.csv(&format!("box_dimension_{tag}.csv"), |w, p| export::write_box_dimension(w, p, &fits))?;

    let fine = grid(o.h_bins[0], *o.h_bins.last().expect("non-empty"), 0.005);
    let figure = Figure {
        title: format!("box-counting slopes, chi={}", o.chi),
        x_label: "h".into(),
        y_label: "chi + D(h)".into(),
        series: vec![
            Series {
                label: "chi + D(h)".into(),
                style: Style::Dashed,
                color: 0,
                points: fine.iter().map(|&h| (h, o.chi + legendre(&g, h))).collect(),
                errors: None,
            },
            Series {
                label: "fitted slope".into(),
                style: Style::Markers,
                color: 1,
                points: fits.iter().map(|f| (f.h, f.slope)).collect(),
                errors: None,
            },
        ],
    };
    ctx.svg(&format!("box_dimension_{tag}.svg"), &figure)
}

pub fn clt(ctx: &mut Context) -> Result<()> {
    let exp = ctx.exp.clone();
    let o = &exp.clt;
    let j_top = *o.j_list.iter().max().expect("validated non-empty");
    for &chi in &exp.chi_list {
        exp.preflight(j_top, chi)?;
    }
    for &chi in &exp.chi_list {
        let cfg = CltConfig {
            generator: exp.generator(),
            t_log2: exp.t_log2,
            chi,
            p: o.p,
            j_list: o.j_list.clone(),
            delta_levels: exp.delta_levels,
            trials: o.trials,
            master_seed: exp.master_seed,
            limits: exp.limits(),
        };
        info!("clt: chi = {chi}, p = {}, {} trials", o.p, o.trials);
        let r = clt_diagnostic(&cfg)?;
        let tag = chi_tag(chi);
        ctx.csv(&format!("clt_{tag}_levels.csv"), |w, p| export::write_clt_levels(w, p, &r))?;
        ctx.csv(&format!("clt_{tag}.csv"), |w, p| export::write_clt_summary(w, p, &r))?;
        crate::say(format_args!(
            "chi={chi}: slope vs j {:.4}, vs log2 N_T {}, regime {}",
            r.slope_vs_j,
            r.slope_vs_log2_nt.map_or("n/a".into(), |s| format!("{s:.4}")),
            r.regime.name()
        ));
    }
    Ok(())
}

/// Fit plus theory: estimated against analytic exponents, side by side.
pub fn report(ctx: &mut Context) -> Result<()> {
    let reports = fit_reports(ctx)?;
    let g = ctx.exp.generator();
    let mut rows = Vec::new();
    let mut extremes = Vec::new();
    for r in &reports {
        let crit = critical_exponents(&g, r.chi)?;
        let mut worst = 0.0f64;
        for row in &r.rows {
            let theory = crit.tau_chi(&g, row.p).ok().map(|t| t + r.chi);
            let estimate = row.tau_hat_mean + r.chi;
            let deviation = theory.map(|t| estimate - t);
            if let Some(d) = deviation {
                worst = worst.max(d.abs());
            }
            let show = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
            rows.push(vec![
                r.chi.to_string(),
                row.p.to_string(),
                estimate.to_string(),
                row.tau_hat_rms.to_string(),
                row.stderr.to_string(),
                show(theory),
                show(deviation),
            ]);
        }
        let show = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        extremes.push(vec![
            r.chi.to_string(),
            r.sup_slope.mean.to_string(),
            r.sup_slope.stderr.to_string(),
            show(crit.h_plus),
            r.inf_slope.mean.to_string(),
            r.inf_slope.stderr.to_string(),
            show(crit.h_minus),
        ]);
        crate::say(format_args!(
            "chi={}: max |estimate - theory| = {worst:.4}; sup slope {:.4} vs h_plus {}",
            r.chi,
            r.sup_slope.mean,
            show(crit.h_plus)
        ));
    }
    ctx.csv("report.csv", |w, p| {
        export::write_table(w, p, &["chi", "p", "estimate", "rms", "stderr", "theory", "deviation"], rows)
    })?;
    ctx.csv("report_extremes.csv", |w, p| {
        export::write_table(
            w,
            p,
            &["chi", "sup_slope_mean", "sup_slope_stderr", "h_plus", "inf_slope_mean", "inf_slope_stderr", "h_minus"],
            extremes,
        )
    })
}
