//! The eight run pipelines. Each writes CSV/JSON artifacts (and SVG plots for
//! the decay sweeps) through the tracked output directory.

use num_complex::Complex64;

use biharm::discretize::sample_potential;
use biharm::kernels::expansion_remainder;
use biharm::oscint::verify_lemma31;
use biharm::propagate::{
    build_hamiltonian, decompose, free_decay_run, high_energy_scan, perturbed_decay_run,
    Cutoff, PropagatorRun,
};
use biharm::resonance::{
    classify, compute_chain, resonance_solution, weak_residual,
    ChainConfig, ResonanceKind,
};
use biharm::specfun::{Sign, SpecFunConfig};

use crate::artifacts::{loglog_svg, OutputDir};
use crate::config::{Command, RunConfig};

const SCHEMA_VERSION: u32 = 1;

pub fn dispatch(
    cfg: &RunConfig,
    out: &mut OutputDir,
    config_hash: &str,
    verbose: bool,
) -> anyhow::Result<()> {
    match cfg.command {
        Command::Classify => classify_cmd(cfg, out),
        Command::SolveResonance => solve_resonance_cmd(cfg, out),
        Command::VerifyExpansions => verify_expansions_cmd(cfg, out),
        Command::VerifyOscint => verify_oscint_cmd(cfg, out),
        Command::FreePropagator => free_propagator_cmd(cfg, out, config_hash),
        Command::Evolve => evolve_cmd(cfg, out, config_hash, verbose),
        Command::HighEnergy => high_energy_cmd(cfg, out),
        Command::Report => report_cmd(out),
    }
}

fn kind_name(kind: ResonanceKind) -> &'static str {
    match kind {
        ResonanceKind::Regular => "Regular",
        ResonanceKind::FirstKind => "First kind",
        ResonanceKind::SecondKind => "Second kind",
        ResonanceKind::ThirdKind => "Third kind",
        ResonanceKind::FourthKind => "Fourth kind",
        ResonanceKind::Indeterminate => "Indeterminate",
    }
}

fn chain_config(cfg: &RunConfig) -> ChainConfig {
    let mut cc = ChainConfig::default();
    if let Some(t) = cfg.tolerances.chain_tol {
        cc.tol = t;
    }
    if let Some(t) = cfg.tolerances.support_rel_tol {
        cc.support_rel_tol = t;
    }
    cc
}

fn classify_cmd(cfg: &RunConfig, out: &mut OutputDir) -> anyhow::Result<()> {
    let grid = cfg.make_grid()?;
    let pot = sample_potential(&cfg.potential_spec()?, &grid)?;
    let chain = out.time("compute_chain", |_| Ok(compute_chain(&pot, &grid, &chain_config(cfg))?))?;
    let kind = classify(&chain);
    if kind == ResonanceKind::Indeterminate {
        if let Some((stage, val)) = chain.ambiguous {
            out.warn(format!(
                "indeterminate band at stage {stage}: scaled eigenvalue {val:.3e}"
            ));
        }
    }
    let report = serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "kind": kind_name(kind),
        "stage_dims": (0..=5).map(|j| chain.s_dim(j)).collect::<Vec<_>>(),
        "support_cells": chain.n(),
        "gaps": serde_json::to_value(&chain.gaps)?,
        "potential_l1_norm": chain.l1_norm,
    });
    out.write_json("classification.json", &report)
}

fn solve_resonance_cmd(cfg: &RunConfig, out: &mut OutputDir) -> anyhow::Result<()> {
    let grid = cfg.make_grid()?;
    let pot = sample_potential(&cfg.potential_spec()?, &grid)?;
    let chain = compute_chain(&pot, &grid, &chain_config(cfg))?;
    let sol = resonance_solution(&chain, &grid)?;
    let residual = weak_residual(&sol, &chain, &pot, &grid, [0.3, -0.2], 1.0);
    let mut csv = String::from("x,y,phi\n");
    for (node, phi) in grid.nodes().iter().zip(&sol.phi) {
        csv.push_str(&format!("{},{},{}\n", node[0], node[1], phi));
    }
    out.write("phi.csv", csv.as_bytes())?;
    let report = serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "kind": kind_name(sol.kind),
        "polynomial_constants": sol.constants,
        "weight_exponent": sol.weight_exponent,
        "weak_residual": residual,
    });
    out.write_json("resonance.json", &report)
}

fn verify_expansions_cmd(cfg: &RunConfig, out: &mut OutputDir) -> anyhow::Result<()> {
    // remainder of the order-3 kernel expansion over the λr validity window,
    // scaled by the expected λ⁶r⁸ size (slightly weakened exponents keep the
    // log factors harmless)
    let _ = cfg;
    let mut csv = String::from("lambda,r,remainder_abs,scaled\n");
    let mut max_scaled = 0.0f64;
    let rs = [0.5, 1.0, 2.0];
    let mut count = 0usize;
    for k in 0..=24 {
        let lr = 1e-3 * 10f64.powf(2.0 * k as f64 / 24.0);
        for &r in &rs {
            let lam = lr / r;
            let rem = expansion_remainder(Sign::Plus, lam, r, 3)
                .map_err(|e| anyhow::anyhow!("{e}"))?
                .norm();
            let scaled = rem / (lam.powf(5.9) * r.powf(7.9));
            max_scaled = max_scaled.max(scaled);
            csv.push_str(&format!("{lam},{r},{rem},{scaled}\n"));
            count += 1;
        }
    }
    out.write("expansion_check.csv", csv.as_bytes())?;
    let report = serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "window": "lambda*r in [1e-3, 1e-1]",
        "order": 3,
        "samples": count,
        "max_scaled_remainder": max_scaled,
    });
    out.write_json("expansion_check.json", &report)
}

fn verify_oscint_cmd(cfg: &RunConfig, out: &mut OutputDir) -> anyhow::Result<()> {
    let _ = cfg;
    let t_grid: Vec<f64> = (0..=8).map(|k| 10f64.powf(k as f64 / 2.0)).collect();
    let n_grid: Vec<i32> = (-10..=5).collect();
    let phi_grid = [0.0, 1.0, 10.0, 100.0, 1000.0];
    let report = verify_lemma31(&t_grid, &n_grid, &phi_grid, &|_| Complex64::new(1.0, 0.0));
    let mut csv = String::from("t,n,phi,k_abs,envelope,ratio,inside_window\n");
    for row in &report.rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            row.t, row.n, row.phi, row.k_abs, row.envelope, row.ratio, row.inside_window
        ));
    }
    out.write("oscint_bounds.csv", csv.as_bytes())?;
    let summary = serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "sup_ratio_inside_window": report.sup_inside,
        "sup_ratio_outside_window": report.sup_outside,
        "max_window_offset": report.max_window_offset,
        "skipped_nodes": report.skipped,
    });
    out.write_json("oscint_bounds.json", &summary)
}

fn default_times() -> Vec<f64> {
    (0..17).map(|k| 10f64.powf(k as f64 / 8.0)).collect()
}

fn write_decay_outputs(
    out: &mut OutputDir,
    run: &PropagatorRun,
    stem: &str,
    config_hash: &str,
) -> anyhow::Result<()> {
    let mut csv = String::from("t,sup_norm_proxy");
    for s in 0..run.per_source.len() {
        csv.push_str(&format!(",source_{s}"));
    }
    csv.push('\n');
    for (i, t) in run.times.iter().enumerate() {
        csv.push_str(&format!("{t},{}", run.norms[i]));
        for src in &run.per_source {
            csv.push_str(&format!(",{}", src[i]));
        }
        csv.push('\n');
    }
    out.write(&format!("{stem}.csv"), csv.as_bytes())?;
    let fitj = serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "slope": run.fit.slope,
        "intercept": run.fit.intercept,
        "r_squared": run.fit.r_squared,
        "alpha": run.alpha,
    });
    out.write_json(&format!("{stem}_fit.json"), &fitj)?;
    let pts: Vec<(f64, f64)> =
        run.times.iter().zip(&run.norms).map(|(&t, &v)| (t, v)).collect();
    let svg = loglog_svg(
        "sup-norm decay",
        "t",
        "sup |u|",
        &pts,
        Some((run.fit.slope, run.fit.intercept)),
        &format!("config {config_hash}"),
    );
    out.write(&format!("{stem}.svg"), svg.as_bytes())
}

fn free_propagator_cmd(
    cfg: &RunConfig,
    out: &mut OutputDir,
    config_hash: &str,
) -> anyhow::Result<()> {
    let grid = cfg.make_grid()?;
    let times = cfg.sweep.time_points.clone().unwrap_or_else(default_times);
    let run = out.time("free_decay_run", |_| {
        Ok(free_decay_run(grid.half_width, grid.n, &times)?)
    })?;
    write_decay_outputs(out, &run, "decay", config_hash)
}

fn evolve_cmd(
    cfg: &RunConfig,
    out: &mut OutputDir,
    config_hash: &str,
    verbose: bool,
) -> anyhow::Result<()> {
    let grid = cfg.make_grid()?;
    let pot = sample_potential(&cfg.potential_spec()?, &grid)?;
    let d = out.time("decompose", |_| Ok(decompose(&build_hamiltonian(&pot, &grid))?))?;
    if verbose {
        eprintln!(
            "spectrum: {} negative, {} near-zero, eps0 = {:.3e}",
            d.negative_count, d.near_zero_count, d.eps0
        );
    }
    if d.negative_count > 0 {
        out.warn(format!(
            "{} negative eigenvalues excluded from P_ac (no embedded-eigenvalue certificate)",
            d.negative_count
        ));
    }
    if d.near_zero_count > 0 {
        out.warn(format!("{} near-zero states excluded below eps0", d.near_zero_count));
    }
    let times = cfg.sweep.time_points.clone().unwrap_or_else(default_times);
    let cutoff = match cfg.sweep.cutoff_lambda0 {
        Some(l0) => Cutoff::LowPass { lambda0: l0 },
        None => Cutoff::Adaptive,
    };
    if let Cutoff::LowPass { lambda0 } = cutoff {
        let horizon = biharm::propagate::revival_horizon(grid.half_width, lambda0);
        if times.iter().any(|&t| t > horizon) {
            out.warn(format!("time points clipped at the revival horizon {horizon:.2}"));
        }
    }
    let alpha = cfg.sweep.alpha.unwrap_or(0.0);
    let run = out.time("perturbed_decay_run", |_| {
        Ok(perturbed_decay_run(&d, &times, alpha, cutoff)?)
    })?;
    write_decay_outputs(out, &run, "decay", config_hash)
}

fn high_energy_cmd(cfg: &RunConfig, out: &mut OutputDir) -> anyhow::Result<()> {
    let grid = cfg.make_grid()?;
    let pot = sample_potential(&cfg.potential_spec()?, &grid)?;
    let sf = SpecFunConfig::default();
    let lambdas = cfg.sweep.lambda_points.clone().unwrap_or_else(|| {
        (0..8).map(|k| 1.2 * (2.9f64 / 1.2).powf(k as f64 / 7.0)).collect()
    });
    let sigma = cfg.sweep.sigma_weight_exponent.unwrap_or(2.0);
    let orders = cfg.sweep.derivative_orders.clone().unwrap_or_else(|| vec![0, 1]);
    let mut csv = String::from("derivative_order,energy,weighted_norm\n");
    let mut fits = Vec::new();
    for &k in &orders {
        let scan = out.time(&format!("scan_k{k}"), |_| {
            Ok(high_energy_scan(&sf, Some(&pot), &grid, &lambdas, sigma, k as usize)?)
        })?;
        for (e, nrm) in scan.energies.iter().zip(&scan.norms) {
            csv.push_str(&format!("{k},{e},{nrm}\n"));
        }
        fits.push(serde_json::json!({
            "derivative_order": k,
            "slope_vs_energy": scan.slope,
            "expected": -0.75 * (k as f64 + 1.0),
        }));
    }
    out.write("high_energy.csv", csv.as_bytes())?;
    let report = serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "sigma": sigma,
        "fits": fits,
    });
    out.write_json("high_energy.json", &report)
}

fn report_cmd(out: &mut OutputDir) -> anyhow::Result<()> {
    // aggregate whatever JSON artifacts already live in the directory
    let mut entries = serde_json::Map::new();
    let names = [
        "classification.json",
        "resonance.json",
        "expansion_check.json",
        "oscint_bounds.json",
        "decay_fit.json",
        "high_energy.json",
    ];
    for name in names {
        let path = out.dir().join(name);
        if let Ok(text) = std::fs::read_to_string(&path) {
            if let Ok(v) = serde_json::from_str::<serde_json::Value>(&text) {
                entries.insert(name.trim_end_matches(".json").to_string(), v);
            }
        }
    }
    if entries.is_empty() {
        anyhow::bail!("nothing to report: no known artifacts in the output directory");
    }
    let report = serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "sections": serde_json::Value::Object(entries),
    });
    out.write_json("report.json", &report)
}
