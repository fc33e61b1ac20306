//! Ensemble-level properties of the estimators.

use mixcascade::*;

fn ln() -> GeneratorF64 {
    GeneratorF64::log_normal(0.2).unwrap()
}

fn grid(step: f64, max: f64) -> Vec<f64> {
    (0..=(max / step).round() as usize).map(|i| i as f64 * step).collect()
}

#[test]
fn second_moment_exponent_at_desk_scale() {
    let mut cfg = EnsembleConfig::desk(ln(), 0.0, 21);
    cfg.p_list = vec![2.0];
    let r = run_ensemble(&cfg).unwrap();
    assert!((r.rows[0].tau_hat_mean - 0.8).abs() < 0.1, "{}", r.rows[0].tau_hat_mean);
}

#[test]
fn construction_depth_does_not_move_estimates() {
    let ps = vec![0.5, 1.5, 2.0, 3.0];
    let run = |delta_levels| {
        let mut cfg = EnsembleConfig::desk(ln(), 0.5, 22);
        cfg.p_list = ps.clone();
        cfg.delta_levels = delta_levels;
        run_ensemble(&cfg).unwrap()
    };
    let (shallow, deep) = (run(3), run(7));
    for (a, b) in shallow.rows.iter().zip(&deep.rows) {
        let tol = 3.0 * (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
        assert!(
            (a.tau_hat_mean - b.tau_hat_mean).abs() <= tol,
            "p = {}: {} vs {} (tol {tol})",
            a.p,
            a.tau_hat_mean,
            b.tau_hat_mean
        );
    }
}

#[test]
fn worker_count_does_not_change_reports() {
    let mut cfg = EnsembleConfig::desk(ln(), 1.0, 23);
    cfg.trials = 6;
    let in_pool = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_ensemble(&cfg).unwrap())
    };
    let (one, four) = (in_pool(1), in_pool(4));
    let bits = |r: &EstimateReportF64| -> Vec<u64> { r.per_trial.iter().flatten().map(|x| x.to_bits()).collect() };
    assert_eq!(bits(&one), bits(&four));
    assert_eq!(one.sup_slope.mean.to_bits(), four.sup_slope.mean.to_bits());
}

#[test]
fn single_trial_is_flagged() {
    let mut cfg = EnsembleConfig::desk(ln(), 0.0, 24);
    cfg.trials = 1;
    let r = run_ensemble(&cfg).unwrap();
    assert!(r.degenerate);
    assert!(r.rows.iter().all(|row| row.stderr == 0.0 && row.tau_hat_rms == 0.0));
}

#[test]
fn estimate_is_concave_in_p() {
    for chi in [0.0, 0.5, 1.0] {
        let mut cfg = EnsembleConfig::desk(ln(), chi, 25);
        cfg.p_list = grid(1.0, 6.0);
        let r = run_ensemble(&cfg).unwrap();
        let y: Vec<f64> = r.rows.iter().map(|row| row.tau_hat_mean + chi).collect();
        for i in 1..y.len() - 1 {
            let tol = 2.0 * r.rows[i - 1..=i + 1].iter().map(|row| row.stderr).fold(0.0, f64::max);
            let second = (y[i + 1] - y[i]) - (y[i] - y[i - 1]);
            assert!(second <= tol, "chi = {chi}, p = {}: second difference {second} > {tol}", r.rows[i].p);
        }
    }
}

/// Slope of `log2 N_T(j)` over `0..=j_max`: the `χ` the floored pool sizes actually realize.
fn effective_chi(chi: f64, j_max: u32) -> f64 {
    let js: Vec<f64> = (0..=j_max).map(f64::from).collect();
    let logs: Vec<f64> = (0..=j_max).map(|j| (n_integral_scales(j, chi) as f64).log2()).collect();
    least_squares(&js, &logs).unwrap().slope
}

#[test]
fn bias_shrinks_with_resolution() {
    let g = ln();
    for chi in [0.0, 0.5] {
        let crit = critical_exponents(&g, chi).unwrap();
        // p = 0 only counts cells and is covered by the floor bound elsewhere
        let ps: Vec<f64> = grid(0.5, 6.0).into_iter().filter(|&p| p > 0.0 && p <= 0.8 * crit.p_plus).collect();
        let run = |j_max| {
            let mut cfg = EnsembleConfig::desk(g, chi, 26);
            cfg.p_list = ps.clone();
            cfg.j_max = j_max;
            run_ensemble(&cfg).unwrap()
        };
        let (coarse, fine) = (run(4), run(8));
        // below p+ the pooled sum scales as N_T(j) 2^{-j tau(p)}, floor included
        let bias = |row: &EstimateRow<f64>, j_max| (row.tau_hat_mean - (g.tau(row.p).unwrap() - effective_chi(chi, j_max))).abs();
        for (c, f) in coarse.rows.iter().zip(&fine.rows) {
            let (bc, bf) = (bias(c, 4), bias(f, 8));
            assert!(bf <= bc + 2.0 * f.stderr, "chi = {chi}, p = {}: bias {bf} at j<=8 vs {bc} at j<=4", c.p);
        }
    }
}

#[test]
fn box_count_at_the_apex_has_full_dimension() {
    let g = ln();
    let chi = 1.0;
    let h = g.tau_prime(0.0).unwrap();
    let cfg = BoxCountConfig {
        generator: g,
        t_log2: 10,
        chi,
        j_list: (4..=9).collect(),
        delta_levels: 5,
        h_bins: vec![h],
        epsilon: 0.05,
        trials: 3,
        master_seed: 27,
        limits: ResourceLimits::default(),
    };
    let hists = box_count_ensemble(&cfg).unwrap();
    let fit = fit_box_dimension(&hists, 0).unwrap();
    // D = 1: the fraction of cells in the bin must not decay, and can grow at most to 1
    let first = &hists[0];
    let fraction = first.counts[0] as f64 / first.n_cells as f64;
    let span = (hists.last().unwrap().j - first.j) as f64;
    assert!(fit.slope >= 1.0 + chi, "{}", fit.slope);
    assert!(fit.slope <= 1.0 + chi + (1.0 / fraction).log2() / span, "{} with first-level fraction {fraction}", fit.slope);
}
