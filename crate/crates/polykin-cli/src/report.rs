//! CSV and JSON emission. Floats are written in shortest round-trip form so
//! reruns with the same seed produce byte-identical files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::json;

use polykin_core::entropy::EntropyReport;
use polykin_core::quadrature::GridDiagnostics;
use polykin_core::relaxation::{SlabTrajectory, Trajectory};

use crate::CliResult;

pub const DECOMPOSE_CSV_HEADER: &str =
    "seed,nu,theta,delta,R_closed,R_quad,D,relative_part,F_theta,F_bound,theorem_lhs,theorem_ok";

pub fn decompose_csv_row(seed: u64, r: &EntropyReport) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{}",
        seed,
        r.nu,
        r.theta,
        r.delta,
        r.r_closed,
        r.r_quad,
        r.d,
        r.relative_part,
        r.f_theta,
        r.f_bound,
        r.theorem_lhs,
        r.theorem_ok
    )
}

pub const TRAJECTORY_CSV_HEADER: &str =
    "t,rho,Ux,Uy,Uz,Ttr,TI,Tdelta,H,D,R_closed,drift_mass,drift_energy";

pub fn write_trajectory_csv(path: &Path, trajectory: &Trajectory) -> CliResult<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{TRAJECTORY_CSV_HEADER}")?;
    for s in &trajectory.samples {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            s.t,
            s.mac.rho,
            s.mac.u.0[0],
            s.mac.u.0[1],
            s.mac.u.0[2],
            s.mac.t_tr,
            s.mac.t_i,
            s.mac.t_delta,
            s.h,
            s.d,
            s.r_closed,
            s.drift_mass,
            s.drift_energy
        )?;
    }
    w.flush()?;
    Ok(())
}

pub const SLAB_CSV_HEADER: &str = "t,mass,px,py,pz,energy,H,drift_mass,drift_energy";

pub fn write_slab_csv(path: &Path, trajectory: &SlabTrajectory) -> CliResult<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{SLAB_CSV_HEADER}")?;
    for s in &trajectory.samples {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            s.t,
            s.mass,
            s.momentum.0[0],
            s.momentum.0[1],
            s.momentum.0[2],
            s.energy,
            s.h,
            s.drift_mass,
            s.drift_energy
        )?;
    }
    w.flush()?;
    Ok(())
}

/// One summary row per sweep lattice cell.
#[derive(Debug, Clone, Serialize)]
pub struct SweepCell {
    pub nu: f64,
    pub theta: f64,
    pub delta: f64,
    pub states: usize,
    pub min_r_closed: f64,
    /// max over states of (F_theta + delta T_I / T_theta) - (3 + delta)
    pub max_lhs_excess: f64,
    /// theorem-regime states violating positivity or the bound
    pub violations: usize,
    /// nu < 0 probe cells report values and assert nothing
    pub report_only: bool,
    /// states whose corrected tensor degenerated (possible only nu < 0)
    pub degenerate: usize,
}

pub const SWEEP_CSV_HEADER: &str =
    "nu,theta,delta,states,min_R_closed,max_lhs_excess,violations,report_only,degenerate";

pub fn write_sweep_csv(path: &Path, cells: &[SweepCell]) -> CliResult<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{SWEEP_CSV_HEADER}")?;
    for c in cells {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            c.nu,
            c.theta,
            c.delta,
            c.states,
            c.min_r_closed,
            c.max_lhs_excess,
            c.violations,
            c.report_only,
            c.degenerate
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Run manifest: configuration echo plus provenance of every random draw.
pub fn write_manifest<C: Serialize>(
    path: &Path,
    config: &C,
    seed: u64,
    diagnostics: Option<&GridDiagnostics>,
) -> CliResult<()> {
    let manifest = json!({
        "tool": "polykin",
        "version": env!("CARGO_PKG_VERSION"),
        "rng": "splitmix64-counter",
        "seed": seed,
        "config": config,
        "grid_diagnostics": diagnostics,
    });
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, &manifest)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}
