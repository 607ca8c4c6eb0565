//! Experiment dispatch.

use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use gapgrad_core::exponents::{alpha_pm, predict_rates_with, shortcut_is_reliable, shortcut_table};
use gapgrad_core::geometry::{cube_profile, derived_constants, kappa_weight, WeightSpec};
use gapgrad_core::regression::fit_loglog;
use gapgrad_core::solver::{
    assemble_disk_system, check_sweep, fit_gradient_sweep, forcing_norm, gradient_probe,
    log_spaced, lower_bound_experiment, mode_exponent, moser_level, omega_profile, summarize_moser,
    verify_oscillation_decay, BoundaryData, DiskSolver, Forcing, JacobiCg, PolarGrid,
};
use gapgrad_core::spectral::{
    assemble_operator, parity_analysis, richardson, solve_spectrum, CircleGrid,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use crate::config::{ExperimentConfig, ExperimentKind, PreconditionerKind};
use crate::fft::SeparableCg;
use crate::io::{write_bundle, write_field_csv, write_rows};
use crate::report::{Comparison, ReportBundle, RunMetadata, Series, Verdict};

pub type Solver = Box<dyn DiskSolver + Send + Sync>;

pub fn make_solver(config: &ExperimentConfig) -> Solver {
    let s = &config.solver;
    match s.preconditioner {
        PreconditionerKind::Separable => {
            Box::new(SeparableCg::new(&config.weight, s.tol, s.max_iter))
        }
        PreconditionerKind::Jacobi => Box::new(JacobiCg {
            tol: s.tol,
            max_iter: s.max_iter,
        }),
    }
}

/// Runs the experiment and, when `output_dir` is set, writes its artifacts.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ReportBundle> {
    config.validate()?;
    let started = SystemTime::now();
    let clock = Instant::now();
    let dir = config.output_dir.as_deref();
    if let Some(d) = dir {
        std::fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
    }
    let mut bundle = ReportBundle::new(config);
    match config.kind {
        ExperimentKind::Exponents => exponents(config, &mut bundle),
        ExperimentKind::Eigensolve => eigensolve(config, &mut bundle, dir),
        ExperimentKind::Decay => decay(config, &mut bundle, dir),
        ExperimentKind::RateSweep => rate_sweep(config, &mut bundle),
        ExperimentKind::LowerBound => lower_bound(config, &mut bundle),
        ExperimentKind::Moser => moser(config, &mut bundle),
        ExperimentKind::Constants => constants(config, &mut bundle),
        ExperimentKind::Cube => cube(config, &mut bundle),
    }
    .with_context(|| format!("{} experiment", config.kind.name()))?;
    if let Some(d) = dir {
        let meta = RunMetadata {
            started_unix_seconds: started
                .duration_since(UNIX_EPOCH)
                .map(|t| t.as_secs())
                .unwrap_or(0),
            elapsed_seconds: clock.elapsed().as_secs_f64(),
            threads: rayon::current_num_threads(),
        };
        write_bundle(&bundle, &meta, d)?;
    }
    Ok(bundle)
}

fn lambda_bound(lambda1: f64, d: usize) -> Verdict {
    Verdict::new(
        "lambda1_at_most_d_minus_2",
        lambda1,
        d as f64 - 2.0,
        1e-6,
        Comparison::AtMost,
    )
}

fn exponents(config: &ExperimentConfig, bundle: &mut ReportBundle) -> Result<()> {
    let spec = &config.weight;
    let report = predict_rates_with(spec, config.lambda1, config.eigen.cells)?;
    let (minus, plus) = alpha_pm(report.lambda1, spec.d, spec.m)?;
    let s = spec.d as f64 + spec.m - 3.0;
    let residual = (report.alpha * report.alpha + s * report.alpha - report.lambda1).abs();
    bundle.verdicts.push(Verdict::new(
        "indicial_residual",
        residual,
        0.0,
        config.tolerance(),
        Comparison::Absolute,
    ));
    bundle.verdicts.push(lambda_bound(report.lambda1, spec.d));
    let entry = shortcut_table(spec);
    bundle.results = json!({
        "report": report,
        "alpha_minus": minus,
        "alpha_plus": plus,
        "table_entry": entry,
        "table_entry_used": entry.is_some_and(shortcut_is_reliable),
    });
    bundle.provenance.spectral_cells = Some(config.eigen.cells);
    Ok(())
}

fn eigensolve(
    config: &ExperimentConfig,
    bundle: &mut ReportBundle,
    dir: Option<&Path>,
) -> Result<()> {
    let spec = &config.weight;
    if spec.d != 3 {
        bail!(
            "eigensolve is implemented for d = 3 only (got d = {})",
            spec.d
        );
    }
    let cells = config.eigen.cells;
    let levels: Vec<usize> = if config.eigen.richardson {
        vec![cells / 4, cells / 2, cells]
    } else {
        vec![cells]
    };
    let spectra = levels
        .par_iter()
        .map(|&n| {
            let op = assemble_operator(spec, &CircleGrid::new(n)?)?;
            solve_spectrum(&op, config.eigen.count.max(2))
        })
        .collect::<gapgrad_core::Result<Vec<_>>>()?;
    let finest = spectra.last().unwrap();
    let lambda1: Vec<f64> = spectra.iter().map(|s| s.eigenvalues[1]).collect();
    let extrapolated = if lambda1.len() >= 2 {
        richardson(
            lambda1[lambda1.len() - 2],
            lambda1[lambda1.len() - 1],
            2.0,
            2.0,
        )
    } else {
        lambda1[0]
    };
    let max_residual = finest.residuals.iter().copied().fold(0.0, f64::max);
    bundle.verdicts.push(Verdict::new(
        "eigen_residual",
        max_residual,
        0.0,
        1e-8,
        Comparison::AtMost,
    ));
    bundle.verdicts.push(lambda_bound(extrapolated, spec.d));
    if spec.is_constant() {
        bundle.verdicts.push(Verdict::new(
            "lambda1_constant_weight",
            extrapolated,
            1.0,
            config.tolerance(),
            Comparison::Absolute,
        ));
        bundle.verdicts.push(Verdict::new(
            "lambda1_multiplicity",
            finest.lambda1_multiplicity() as f64,
            2.0,
            0.0,
            Comparison::Absolute,
        ));
    } else {
        bundle.verdicts.push(
            Verdict::new(
                "lambda1_below_d_minus_2",
                extrapolated,
                1.0 - 1e-3,
                0.0,
                Comparison::AtMost,
            )
            .with_note("non-constant weight"),
        );
    }
    let entry = shortcut_table(spec);
    if let Some(e) = entry {
        let mut v = Verdict::new(
            "table_shortcut",
            finest.eigenvalues[1],
            1.0,
            1e-4,
            Comparison::Absolute,
        );
        if !shortcut_is_reliable(e) {
            v = v.with_note(
                "table entry contradicts the Rayleigh quotient of a coordinate function",
            );
        }
        bundle.verdicts.push(v);
    }
    let parity = if finest.even {
        let p = parity_analysis(finest, 1)?;
        bundle.verdicts.push(Verdict::new(
            "property_o",
            p.property_o as u8 as f64,
            1.0,
            0.0,
            Comparison::Absolute,
        ));
        Some(p)
    } else {
        None
    };
    bundle.results = json!({
        "levels": levels,
        "lambda1": lambda1,
        "lambda1_extrapolated": extrapolated,
        "eigenvalues": finest.eigenvalues,
        "multiplicities": finest.multiplicities,
        "residuals": finest.residuals,
        "parity": parity,
        "table_entry": entry,
    });
    bundle.provenance.spectral_cells = Some(cells);
    if let Some(d) = dir {
        let rows: Vec<(usize, f64, f64)> = finest
            .eigenvalues
            .iter()
            .zip(&finest.residuals)
            .enumerate()
            .map(|(k, (l, r))| (k, *l, *r))
            .collect();
        write_rows(&rows, &d.join("eigenvalues.csv"))?;
        let n = finest.center_kappa.len();
        let h = std::f64::consts::TAU / n as f64;
        let mut table = Vec::with_capacity(n);
        for j in 0..n {
            let mut row = vec![(j as f64 + 0.5) * h];
            row.extend(finest.eigenfunctions.iter().map(|y| y[j]));
            table.push(row);
        }
        write_rows(&table, &d.join("eigenfunctions.csv"))?;
    }
    Ok(())
}

/// Predicted exponent for the lowest non-constant mode present in `g`.
fn decay_exponent(
    config: &ExperimentConfig,
    boundary: &BoundaryData,
    g: &[f64],
) -> Result<(usize, f64, f64)> {
    let spec = &config.weight;
    let lowest = |k: usize| -> Result<(usize, f64, f64)> {
        if k == 1 {
            let r = predict_rates_with(spec, config.lambda1, config.eigen.cells)?;
            Ok((1, r.lambda1, r.alpha))
        } else {
            let (l, a) = mode_exponent(spec, k, config.eigen.cells)?;
            Ok((k, l, a))
        }
    };
    match boundary {
        BoundaryData::Eigenmode { k } => lowest(*k),
        BoundaryData::Coordinate { .. }
        | BoundaryData::Cosine { k: 1 }
        | BoundaryData::Sine { k: 1 } => lowest(1),
        _ => {
            let n = g.len();
            let op = assemble_operator(spec, &CircleGrid::new(n)?)?;
            let s = solve_spectrum(&op, config.eigen.count.max(2))?;
            let norm = s.inner(g, g).sqrt();
            let k = (1..s.eigenvalues.len())
                .find(|&k| s.inner(g, &s.eigenfunctions[k]).abs() > 1e-8 * norm)
                .context("boundary data has no component on the computed eigenmodes")?;
            lowest(k)
        }
    }
}

fn decay(config: &ExperimentConfig, bundle: &mut ReportBundle, dir: Option<&Path>) -> Result<()> {
    let spec = &config.weight;
    let grid = config.polar_grid()?;
    let boundary = config
        .boundary
        .clone()
        .unwrap_or(BoundaryData::Eigenmode { k: 1 });
    let g = boundary.sample(spec, &grid)?;
    let (mode, lambda, alpha) = decay_exponent(config, &boundary, &g)?;
    let rho_cfg = config.rho.unwrap();
    let rho = log_spaced(rho_cfg.min, rho_cfg.max, rho_cfg.count);
    let solver = make_solver(config);
    let system = assemble_disk_system(spec, config.eps, &grid, &Forcing::Zero, &g)?;
    let field = solver.solve_system(&system, None)?;
    let profile = omega_profile(&field, spec, &rho, None)?;
    let fit = verify_oscillation_decay(&profile, alpha)?;
    let tol = config.tolerance();
    bundle.verdicts.push(Verdict::new(
        "omega_slope",
        fit.slope,
        alpha,
        tol,
        Comparison::Relative,
    ));
    let (r1, r2) = (profile.rho[0], *profile.rho.last().unwrap());
    let ratio = profile.omega[0] / profile.omega.last().unwrap();
    bundle.verdicts.push(Verdict::new(
        "omega_two_point_ratio",
        ratio,
        (r1 / r2).powf(alpha),
        tol,
        Comparison::Relative,
    ));
    bundle.results = json!({
        "mode": mode,
        "lambda": lambda,
        "alpha": alpha,
        "fit": fit,
        "profile": profile,
    });
    bundle.series.push(Series {
        name: "omega".into(),
        x_label: "rho".into(),
        y_label: "omega".into(),
        points: profile.points(),
        fit: Some(fit),
    });
    bundle.provenance.grids.push(grid);
    bundle.provenance.solver = Some(solver.name());
    bundle.provenance.solve_residuals.push(field.solve_residual);
    bundle.provenance.iterations.push(field.iterations);
    bundle.provenance.spectral_cells = Some(config.eigen.cells);
    if let (Some(d), true) = (dir, config.write_field) {
        write_field_csv(&field, &d.join("field.csv"))?;
    }
    Ok(())
}

fn rate_sweep(config: &ExperimentConfig, bundle: &mut ReportBundle) -> Result<()> {
    let spec = &config.weight;
    let grid = config.polar_grid()?;
    let rates = predict_rates_with(spec, config.lambda1, config.eigen.cells)?;
    let predicted = rates.gradient_exponent_eps;
    check_sweep(&config.eps_list, &grid, spec.m, config.probe_radius)?;
    let boundary = config
        .boundary
        .clone()
        .unwrap_or(BoundaryData::Eigenmode { k: 1 });
    let g = boundary.sample(spec, &grid)?;
    let solver = make_solver(config);
    let points = config
        .eps_list
        .par_iter()
        .map(|&eps| gradient_probe(solver.as_ref(), spec, eps, &grid, &g, config.probe_radius))
        .collect::<gapgrad_core::Result<Vec<_>>>()?;
    let report = fit_gradient_sweep(points, &grid, predicted)?;
    let mut v = Verdict::new(
        "gradient_slope",
        report.fit.slope,
        predicted,
        config.tolerance(),
        Comparison::Relative,
    );
    if report.out_of_regime {
        v = v.with_note(format!(
            "out of the asymptotic regime: {}",
            report.notes.join("; ")
        ));
    }
    bundle.verdicts.push(v);
    bundle.series.push(Series {
        name: "max_gradient".into(),
        x_label: "eps".into(),
        y_label: "max |grad v|".into(),
        points: report
            .points
            .iter()
            .map(|p| (p.eps, p.max_gradient))
            .collect(),
        fit: Some(report.fit),
    });
    bundle.provenance.grids.push(grid);
    bundle.provenance.solver = Some(solver.name());
    bundle.provenance.solve_residuals = report.points.iter().map(|p| p.solve_residual).collect();
    bundle.provenance.iterations = report.points.iter().map(|p| p.iterations).collect();
    bundle.provenance.spectral_cells = Some(config.eigen.cells);
    bundle.results = json!({ "exponents": rates, "sweep": report });
    Ok(())
}

fn lower_bound(config: &ExperimentConfig, bundle: &mut ReportBundle) -> Result<()> {
    let spec = &config.weight;
    let grid = config.polar_grid()?;
    let lb = config.lower_bound;
    let boundary = config
        .boundary
        .clone()
        .unwrap_or(BoundaryData::Coordinate { j: lb.coordinate });
    let solver = make_solver(config);
    let report = lower_bound_experiment(solver.as_ref(), spec, &grid, &boundary, &lb)?;
    bundle.verdicts.push(Verdict::new(
        "c1_positive",
        report.c1,
        f64::MIN_POSITIVE,
        0.0,
        Comparison::AtLeast,
    ));
    let factor = config.tolerance();
    bundle.verdicts.push(Verdict::new(
        "c1_over_std_error",
        report.c1 / report.c1_std_error,
        factor,
        0.0,
        Comparison::AtLeast,
    ));
    bundle.verdicts.push(Verdict::new(
        "residual_exponent",
        report.residual_exponent.unwrap_or(f64::NAN),
        report.alpha + report.gamma / 2.0,
        0.0,
        Comparison::AtLeast,
    ));
    let fit = fit_loglog(&report.samples, Some(report.alpha)).ok();
    bundle.series.push(Series {
        name: "projection".into(),
        x_label: "r".into(),
        y_label: "U(r)".into(),
        points: report.samples.clone(),
        fit,
    });
    bundle.provenance.grids.push(grid);
    bundle.provenance.solver = Some(solver.name());
    bundle
        .provenance
        .solve_residuals
        .push(report.solve_residual);
    bundle.results = serde_json::to_value(&report)?;
    Ok(())
}

fn moser(config: &ExperimentConfig, bundle: &mut ReportBundle) -> Result<()> {
    let spec = &config.weight;
    let base = config.polar_grid()?;
    let sigma = config.sigma.unwrap();
    let forcing = config.forcing.clone().unwrap();
    let levels = if config.levels.is_empty() {
        vec![128, 256, 512]
    } else {
        config.levels.clone()
    };
    let grids = levels
        .iter()
        .map(|&n| PolarGrid::new(n, base.n_theta, base.radius()))
        .collect::<gapgrad_core::Result<Vec<_>>>()?;
    let norm = forcing_norm(&forcing, config.eps, sigma, spec.m, base.radius())?;
    let normalized = if norm > 0.0 {
        forcing.scaled(1.0 / norm)
    } else {
        Forcing::Zero
    };
    let solver = make_solver(config);
    let results = grids
        .par_iter()
        .map(|g| moser_level(solver.as_ref(), spec, config.eps, g, &normalized))
        .collect::<gapgrad_core::Result<Vec<_>>>()?;
    let report = summarize_moser(config.eps, sigma, norm, results);
    bundle.verdicts.push(Verdict::new(
        "sup_ratio_stability",
        report.max_relative_change,
        0.0,
        config.tolerance(),
        Comparison::AtMost,
    ));
    bundle.series.push(Series {
        name: "sup_ratio".into(),
        x_label: "n_r".into(),
        y_label: "sup|v| / norm(F)".into(),
        points: report
            .levels
            .iter()
            .map(|l| (l.n_r as f64, l.ratio))
            .collect(),
        fit: None,
    });
    bundle.provenance.grids = grids;
    bundle.provenance.solver = Some(solver.name());
    bundle.provenance.solve_residuals = report.levels.iter().map(|l| l.solve_residual).collect();
    bundle.provenance.iterations = report.levels.iter().map(|l| l.iterations).collect();
    bundle.results = serde_json::to_value(&report)?;
    Ok(())
}

/// Uniform points on `S^{d−2}` by rejection from the cube.
pub fn sphere_samples(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 && n <= 1.0 {
            out.push(v.iter().map(|x| x / n).collect());
        }
    }
    out
}

/// Sampled `min κ`, `max κ` and the number of sandwich violations.
pub fn sandwich_check(spec: &WeightSpec, count: usize, seed: u64) -> Result<(f64, f64, usize)> {
    let c = derived_constants(spec);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut violations = 0;
    for xi in sphere_samples(spec.dim(), count, seed) {
        let k = kappa_weight(spec, &xi)?;
        lo = lo.min(k);
        hi = hi.max(k);
        if k < c.varrho * (1.0 - 1e-12) || k > c.theta1 * (1.0 + 1e-12) {
            violations += 1;
        }
    }
    Ok((lo, hi, violations))
}

fn constants(config: &ExperimentConfig, bundle: &mut ReportBundle) -> Result<()> {
    let spec = &config.weight;
    let c = derived_constants(spec);
    let (lo, hi, violations) = sandwich_check(spec, config.samples, config.seed)?;
    bundle.verdicts.push(Verdict::new(
        "sandwich_violations",
        violations as f64,
        0.0,
        config.tolerance(),
        Comparison::Absolute,
    ));
    bundle.verdicts.push(Verdict::new(
        "cbar0_at_most_half",
        c.cbar0,
        0.5,
        0.0,
        Comparison::AtMost,
    ));
    bundle.results = json!({
        "constants": c,
        "sampled_kappa_min": lo,
        "sampled_kappa_max": hi,
        "samples": config.samples,
        "seed": config.seed,
    });
    Ok(())
}

fn cube(config: &ExperimentConfig, bundle: &mut ReportBundle) -> Result<()> {
    let cube = config.cube.unwrap();
    let profile = cube_profile(cube)?;
    let d = config.weight.d;
    let spec = profile.weight_spec(d)?;
    let constants = derived_constants(&spec);
    // Gap against its leading term along a coordinate axis.
    let t = 1e-3 * cube.r1.min(cube.r2);
    let mut x = vec![0.0; d - 1];
    x[0] = t;
    let leading = profile.kappabar * t.powf(cube.m);
    bundle.verdicts.push(Verdict::new(
        "gap_leading_term",
        profile.gap.eval(&x) / leading,
        1.0,
        1e-4,
        Comparison::Absolute,
    ));
    let rates = if d == 3 || config.lambda1.is_some() {
        Some(predict_rates_with(
            &spec,
            config.lambda1,
            config.eigen.cells,
        )?)
    } else {
        None
    };
    if let Some(r) = &rates {
        bundle.verdicts.push(lambda_bound(r.lambda1, d));
    }
    bundle.results = json!({
        "kappabar": profile.kappabar,
        "remainder_bound": profile.remainder_bound,
        "weight": spec,
        "constants": constants,
        "exponents": rates,
    });
    Ok(())
}
