//! Experiment drivers behind the CLI subcommands.

use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde_json::json;

use polykin_core::entropy::{full_report, theorem_check};
use polykin_core::gaussian::{gaussian_from_cov, maxwellian};
use polykin_core::moments::{compute_macro, Distribution};
use polykin_core::relaxation::{
    run_homogeneous, run_slab, CellExecutor, CellStats, SlabField,
};
use polykin_core::sampler::{sample_macrostate, CounterRng, StateRanges};
use polykin_core::{Grid, KineticError, Mat3, Params, Vec3};

use crate::config::{InitialCondition, RelaxConfig, SnapshotGenConfig, SweepConfig};
use crate::report::{self, SweepCell};
use crate::snapshot::{read_snapshot, write_snapshot, SnapshotHeader};
use crate::{CliError, CliResult, EXIT_OK, EXIT_THEOREM};

/// Rayon-backed cell executor for slab runs; results are collected in cell
/// order, so totals are deterministic regardless of scheduling.
pub struct RayonExecutor;

impl CellExecutor for RayonExecutor {
    fn for_each_cell(
        &self,
        cells: &mut [Vec<f64>],
        op: &(dyn Fn(usize, &mut Vec<f64>) -> polykin_core::Result<CellStats> + Sync),
    ) -> polykin_core::Result<Vec<CellStats>> {
        cells
            .par_iter_mut()
            .enumerate()
            .map(|(i, cell)| op(i, cell))
            .collect()
    }

    fn build_cells(
        &self,
        n_cells: usize,
        op: &(dyn Fn(usize) -> Vec<f64> + Sync),
    ) -> Vec<Vec<f64>> {
        (0..n_cells).into_par_iter().map(op).collect()
    }
}

/// Realize a homogeneous initial condition on a grid.
pub fn build_initial(grid: &Arc<Grid>, initial: &InitialCondition) -> CliResult<Distribution> {
    match initial {
        InitialCondition::Maxwellian { rho, u, t } => {
            Ok(maxwellian(*rho, Vec3(*u), *t, grid)?)
        }
        InitialCondition::Anisotropic {
            rho,
            u,
            theta_diag,
            theta_offdiag,
            t_i,
        } => {
            let [xy, xz, yz] = *theta_offdiag;
            let theta = Mat3([
                [theta_diag[0], xy, xz],
                [xy, theta_diag[1], yz],
                [xz, yz, theta_diag[2]],
            ]);
            Ok(gaussian_from_cov(*rho, Vec3(*u), &theta, *t_i, grid)?)
        }
        InitialCondition::Bimodal { rho, separation, t } => {
            let half = 0.5 * separation;
            let a = maxwellian(0.5 * rho, Vec3::new(half, 0.0, 0.0), *t, grid)?;
            let b = maxwellian(0.5 * rho, Vec3::new(-half, 0.0, 0.0), *t, grid)?;
            let vals: Vec<f64> = a
                .values()
                .iter()
                .zip(b.values())
                .map(|(x, y)| x + y)
                .collect();
            Ok(Distribution::new(grid.clone(), vals)?)
        }
        InitialCondition::Snapshot { path } => {
            let (header, values) = read_snapshot(Path::new(path))?;
            if header.x_cells.is_some() {
                return Err(CliError::Malformed(
                    "slab snapshot cannot seed a homogeneous run".into(),
                ));
            }
            if header.grid != *grid.spec() {
                return Err(CliError::Malformed(
                    "snapshot grid differs from run grid".into(),
                ));
            }
            Ok(Distribution::new(grid.clone(), values)?)
        }
        InitialCondition::TemperatureProfile { .. } => Err(CliError::Malformed(
            "temperature-profile initial data needs a slab run".into(),
        )),
    }
}

/// Realize an initial condition per slab cell.
pub fn build_slab_field(
    grid: &Arc<Grid>,
    initial: &InitialCondition,
    x_cells: usize,
    x_length: f64,
) -> CliResult<SlabField> {
    match initial {
        InitialCondition::TemperatureProfile {
            rho,
            t0,
            amplitude,
            mode,
        } => {
            if amplitude.abs() >= 1.0 {
                return Err(CliError::Malformed("profile amplitude must satisfy |a| < 1".into()));
            }
            let omega = core::f64::consts::TAU * (*mode as f64) / x_length;
            Ok(SlabField::from_fn(grid, x_cells, x_length, |_, x| {
                let t = t0 * (1.0 + amplitude * (omega * x).cos());
                maxwellian(*rho, Vec3::ZERO, t, grid)
            })?)
        }
        InitialCondition::Snapshot { path } => {
            let (header, values) = read_snapshot(Path::new(path))?;
            let cells = header.x_cells.ok_or_else(|| {
                CliError::Malformed("snapshot is homogeneous, slab run needs x_cells".into())
            })?;
            if cells != x_cells || header.grid != *grid.spec() {
                return Err(CliError::Malformed(
                    "snapshot shape differs from slab config".into(),
                ));
            }
            let per_cell = grid.node_count();
            SlabField::from_fn(grid, x_cells, x_length, |i, _| {
                let chunk = &values[i * per_cell..(i + 1) * per_cell];
                Distribution::new(grid.clone(), chunk.to_vec())
            })
            .map_err(CliError::from)
        }
        other => {
            let template = build_initial(grid, other)?;
            Ok(SlabField::from_fn(grid, x_cells, x_length, |_, _| {
                Ok(template.clone())
            })?)
        }
    }
}

fn load_distribution(snapshot: &Path) -> CliResult<(Arc<Grid>, Distribution)> {
    let (header, values) = read_snapshot(snapshot)?;
    if let Some(cells) = header.x_cells {
        if cells > 1 {
            return Err(CliError::Malformed(
                "snapshot carries a slab field; moments/decompose expect one cell".into(),
            ));
        }
    }
    let grid = Arc::new(Grid::build(header.grid)?);
    let f = Distribution::new(grid.clone(), values)?;
    Ok((grid, f))
}

/// Print the macroscopic state of a snapshot as JSON.
pub fn cmd_moments(snapshot: &Path) -> CliResult<i32> {
    let (_, f) = load_distribution(snapshot)?;
    let mac = compute_macro(&f)?;
    println!("{}", serde_json::to_string_pretty(&mac)?);
    Ok(EXIT_OK)
}

/// Full entropy-decomposition report for a snapshot under (nu, theta).
pub fn cmd_decompose(
    snapshot: &Path,
    nu: f64,
    theta: f64,
    format: &str,
    out: Option<&Path>,
) -> CliResult<i32> {
    let (grid, f) = load_distribution(snapshot)?;
    let params = Params::new(nu, theta, grid.delta())?;
    if !params.theorem_regime() {
        eprintln!("report-only: nu = {nu} < 0 lies outside the theorem regime; no assertion is made");
    }
    let rep = full_report(&f, &params)?;
    match format {
        "csv" => {
            println!("{}", report::DECOMPOSE_CSV_HEADER);
            println!("{}", report::decompose_csv_row(0, &rep));
        }
        _ => println!("{}", serde_json::to_string_pretty(&rep)?),
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(&rep)?)?;
        std::fs::write(
            dir.join("report.csv"),
            format!(
                "{}\n{}\n",
                report::DECOMPOSE_CSV_HEADER,
                report::decompose_csv_row(0, &rep)
            ),
        )?;
    }
    if params.theorem_regime() && !rep.theorem_ok {
        eprintln!("theorem violation: R_closed = {} lhs = {}", rep.r_closed, rep.theorem_lhs);
        return Ok(EXIT_THEOREM);
    }
    Ok(EXIT_OK)
}

/// Space-homogeneous relaxation run: trajectory CSV plus manifest.
pub fn cmd_relax(cfg: &RelaxConfig, out: &Path) -> CliResult<i32> {
    let grid = Arc::new(Grid::build(cfg.run.grid)?);
    let f0 = build_initial(&grid, &cfg.initial)?;
    let run = run_homogeneous(f0, &cfg.run)?;
    std::fs::create_dir_all(out)?;
    report::write_trajectory_csv(&out.join("trajectory.csv"), &run.trajectory)?;
    let mac_scale = run.trajectory.samples[0].mac.t_delta;
    let diagnostics = grid.diagnostics(mac_scale.max(1e-12));
    report::write_manifest(&out.join("manifest.json"), cfg, cfg.seed, Some(&diagnostics))?;

    let last = run.trajectory.samples.last().expect("at least the initial sample");
    let summary = json!({
        "steps": run.trajectory.steps,
        "a_freq": run.trajectory.a_freq,
        "h_initial": run.trajectory.h_trace.first(),
        "h_final": run.trajectory.h_trace.last(),
        "worst_h_increase": run.trajectory.worst_h_increase,
        "h_monotone_ok": run.trajectory.h_monotone_ok,
        "drift_mass": last.drift_mass,
        "drift_energy": last.drift_energy,
        "drift_bound_projection_off": run.trajectory.drift_bound,
        "projection_warnings": run.trajectory.projection_warnings,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    if !run.trajectory.h_monotone_ok {
        eprintln!(
            "flag: stepwise H increased by {} (tolerance {})",
            run.trajectory.worst_h_increase,
            polykin_core::relaxation::H_STEP_TOL
        );
    }
    Ok(EXIT_OK)
}

/// 1D periodic slab run with Strang splitting.
pub fn cmd_slab(cfg: &RelaxConfig, out: &Path) -> CliResult<i32> {
    let slab = cfg
        .run
        .slab
        .ok_or_else(|| CliError::Malformed("slab run needs a slab section".into()))?;
    let grid = Arc::new(Grid::build(cfg.run.grid)?);
    let field = build_slab_field(&grid, &cfg.initial, slab.x_cells, slab.x_length)?;
    let run = run_slab(field, &cfg.run, &RayonExecutor)?;
    std::fs::create_dir_all(out)?;
    report::write_slab_csv(&out.join("slab_trajectory.csv"), &run.trajectory)?;
    let diagnostics = grid.diagnostics(1.0);
    report::write_manifest(&out.join("manifest.json"), cfg, cfg.seed, Some(&diagnostics))?;

    let last = run.trajectory.samples.last().expect("at least the initial sample");
    let summary = json!({
        "steps": run.trajectory.steps,
        "h_initial": run.trajectory.h_trace.first(),
        "h_final": run.trajectory.h_trace.last(),
        "worst_h_increase": run.trajectory.worst_h_increase,
        "h_monotone_ok": run.trajectory.h_monotone_ok,
        "drift_mass": last.drift_mass,
        "drift_energy": last.drift_energy,
        "projection_warnings": run.trajectory.projection_warnings,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    if !run.trajectory.h_monotone_ok {
        eprintln!(
            "flag: total H increased by {} (tolerance {})",
            run.trajectory.worst_h_increase,
            polykin_core::relaxation::H_SLAB_TOL
        );
    }
    Ok(EXIT_OK)
}

struct CellAccum {
    min_r: f64,
    max_lhs_excess: f64,
    violations: usize,
    degenerate: usize,
}

impl CellAccum {
    fn empty() -> Self {
        CellAccum {
            min_r: f64::INFINITY,
            max_lhs_excess: f64::NEG_INFINITY,
            violations: 0,
            degenerate: 0,
        }
    }

    fn merge(mut self, other: &CellAccum) -> Self {
        self.min_r = self.min_r.min(other.min_r);
        self.max_lhs_excess = self.max_lhs_excess.max(other.max_lhs_excess);
        self.violations += other.violations;
        self.degenerate += other.degenerate;
        self
    }
}

/// Closed-form theorem certification over an ensemble times the parameter
/// lattice. Exit code 4 if any theorem-regime cell records a violation.
pub fn cmd_sweep(cfg: &SweepConfig, out: &Path) -> CliResult<i32> {
    // regime cells first, then the report-only negative-nu probes
    let mut nus: Vec<(f64, bool)> = Vec::new();
    for &nu in &cfg.nu_list {
        if nu < 0.0 && !cfg.probe_negative_nu {
            return Err(CliError::Malformed(format!(
                "nu {nu} < 0 requires probe_negative_nu"
            )));
        }
        nus.push((nu, nu < 0.0));
    }
    if cfg.probe_negative_nu && !nus.iter().any(|(_, probe)| *probe) {
        for nu in [-0.1, -0.25, -0.4] {
            nus.push((nu, true));
        }
    }

    let mut lattice: Vec<(f64, bool, f64, f64)> = Vec::new();
    for &(nu, probe) in &nus {
        for &theta in &cfg.theta_list {
            for &delta in &cfg.delta_list {
                lattice.push((nu, probe, theta, delta));
            }
        }
    }

    let ranges = StateRanges::fuzzer();
    let seed = cfg.seed;
    let cells: Vec<SweepCell> = lattice
        .iter()
        .map(|&(nu, probe, theta, delta)| {
            let params = Params::new(nu, theta, delta).map_err(CliError::from)?;
            let acc = (0..cfg.ensemble)
                .into_par_iter()
                .fold(CellAccum::empty, |mut acc, i| {
                    // state i is drawn from its own counter stream, so the
                    // ensemble is identical across lattice cells and workers
                    let mut rng = CounterRng::stream(seed, i as u64);
                    let mac = sample_macrostate(&mut rng, &ranges, delta)
                        .expect("sampled state is valid");
                    match theorem_check(&mac, &params) {
                        Ok(tc) => {
                            acc.min_r = acc.min_r.min(tc.r_closed);
                            acc.max_lhs_excess =
                                acc.max_lhs_excess.max(tc.lhs - tc.bound);
                            if params.theorem_regime() && !(tc.theorem_ok && tc.chain_ok) {
                                acc.violations += 1;
                            }
                        }
                        Err(KineticError::NotPositiveDefinite { .. }) => {
                            acc.degenerate += 1;
                        }
                        Err(e) => panic!("unexpected failure in sweep: {e}"),
                    }
                    acc
                })
                .reduce(CellAccum::empty, |a, b| a.merge(&b));
            Ok(SweepCell {
                nu,
                theta,
                delta,
                states: cfg.ensemble,
                min_r_closed: acc.min_r,
                max_lhs_excess: acc.max_lhs_excess,
                violations: if probe { 0 } else { acc.violations },
                report_only: probe,
                degenerate: acc.degenerate,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;

    std::fs::create_dir_all(out)?;
    report::write_sweep_csv(&out.join("sweep.csv"), &cells)?;
    report::write_manifest(&out.join("manifest.json"), cfg, seed, None)?;

    let regime: Vec<&SweepCell> = cells.iter().filter(|c| !c.report_only).collect();
    let violations: usize = regime.iter().map(|c| c.violations).sum();
    let min_r = regime.iter().map(|c| c.min_r_closed).fold(f64::INFINITY, f64::min);
    let max_excess = regime
        .iter()
        .map(|c| c.max_lhs_excess)
        .fold(f64::NEG_INFINITY, f64::max);
    let summary = json!({
        "cells": cells.len(),
        "states_per_cell": cfg.ensemble,
        "theorem_regime_cells": regime.len(),
        "min_R_closed": min_r,
        "max_lhs_excess": max_excess,
        "violations": violations,
        "probe_cells": cells.len() - regime.len(),
        "probe_min_R": cells
            .iter()
            .filter(|c| c.report_only)
            .map(|c| c.min_r_closed)
            .fold(f64::INFINITY, f64::min),
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    if violations > 0 {
        eprintln!("theorem violation in {violations} state(s)");
        return Ok(EXIT_THEOREM);
    }
    Ok(EXIT_OK)
}

/// Generate a snapshot file from a config (fixtures for moments/decompose).
pub fn cmd_snapshot(cfg: &SnapshotGenConfig, out_file: &Path) -> CliResult<i32> {
    let grid = Arc::new(Grid::build(cfg.grid)?);
    let f = build_initial(&grid, &cfg.initial)?;
    let header = SnapshotHeader {
        grid: *grid.spec(),
        x_cells: None,
        encoding: cfg.encoding,
    };
    write_snapshot(out_file, &header, f.values())?;
    println!(
        "wrote {} ({} nodes, {:?})",
        out_file.display(),
        f.values().len(),
        cfg.encoding
    );
    Ok(EXIT_OK)
}
