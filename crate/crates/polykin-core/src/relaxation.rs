//! Time integration of the relaxation equation df/dt = A (M(f) - f), space
//! homogeneous or on a 1D periodic slab with Strang-split upwind transport,
//! with conservation and entropy monitoring.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{KineticError, Result};
use crate::gaussian::{build_gaussian, Params};
use crate::linalg::Vec3;
use crate::math::{self, NeumaierSum};
use crate::moments::{collision_frequency, compute_macro, compute_macro_with_conserved, Distribution, MacroState};
use crate::quadrature::{Grid, GridSpec};
use crate::entropy::{boltzmann_entropy, entropy_production};

/// Stepwise H-monotonicity tolerance for homogeneous runs.
pub const H_STEP_TOL: f64 = 1e-10;
/// Stepwise total-H tolerance for slab runs (transport adds its own
/// sign-definite numerical dissipation).
pub const H_SLAB_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Scheme {
    ExplicitEuler,
    Rk4,
    /// f' = e^{-A dt} f + (1 - e^{-A dt}) M(f), M frozen at step start.
    /// Unconditionally positive; the default.
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SlabConfig {
    pub x_cells: usize,
    pub x_length: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RunConfig {
    pub params: Params,
    pub grid: GridSpec,
    pub t_end: f64,
    pub dt: f64,
    pub scheme: Scheme,
    pub conservative_projection: bool,
    #[cfg_attr(feature = "serde", serde(default))]
    pub slab: Option<SlabConfig>,
    #[cfg_attr(feature = "serde", serde(default = "default_sample_every"))]
    pub sample_every: usize,
}

#[cfg(feature = "serde")]
fn default_sample_every() -> usize {
    1
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(KineticError::InvalidParams("dt must be positive"));
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return Err(KineticError::InvalidParams("t_end must be nonnegative"));
        }
        if self.sample_every == 0 {
            return Err(KineticError::InvalidParams("sample_every must be at least 1"));
        }
        if let Some(slab) = &self.slab {
            if slab.x_cells < 2 {
                return Err(KineticError::InvalidParams("slab needs at least 2 cells"));
            }
            if !(slab.x_length > 0.0) {
                return Err(KineticError::InvalidParams("slab length must be positive"));
            }
        }
        Ok(())
    }
}

/// Lab-frame conserved quantities: mass, momentum, and total energy
/// (1/2 |v|^2 + eps moment).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConservedMoments {
    pub mass: f64,
    pub momentum: Vec3,
    pub energy: f64,
}

/// One fused sweep for (mass, momentum, energy).
pub fn conserved_moments(f: &Distribution) -> ConservedMoments {
    conserved_of_values(f.grid(), f.values())
}

/// Entropy and conserved moments in a single traversal; the slab monitor
/// calls this once per cell per step.
pub fn measure_values(grid: &Grid, values: &[f64]) -> (f64, ConservedMoments) {
    let n = grid.axis_len();
    let m = grid.energy_len();
    let axis = grid.axis();
    let u_m = grid.eps_weights();
    let eps = grid.eps_nodes();

    let mut h = NeumaierSum::new();
    let mut mass = NeumaierSum::new();
    let mut mom = [NeumaierSum::new(), NeumaierSum::new(), NeumaierSum::new()];
    let mut energy = NeumaierSum::new();
    let mut chunks = values.chunks_exact(m);
    for ix in 0..n {
        let vx = axis[ix];
        for iy in 0..n {
            let vy = axis[iy];
            for iz in 0..n {
                let vz = axis[iz];
                let kin = 0.5 * (vx * vx + vy * vy + vz * vz);
                let chunk = chunks.next().expect("shape fixed");
                let mut cell = 0.0;
                let mut cell_e = 0.0;
                let mut cell_h = 0.0;
                for ((&val, &u), &e) in chunk.iter().zip(u_m).zip(eps) {
                    let vu = val * u;
                    cell += vu;
                    cell_e += vu * e;
                    if val > crate::entropy::LOG_FLOOR {
                        cell_h += vu * math::ln(val);
                    }
                }
                h.add(cell_h);
                mass.add(cell);
                mom[0].add(cell * vx);
                mom[1].add(cell * vy);
                mom[2].add(cell * vz);
                energy.add(cell * kin + cell_e);
            }
        }
    }
    let w = grid.v_weight();
    (
        h.total() * w,
        ConservedMoments {
            mass: mass.total() * w,
            momentum: Vec3([mom[0].total() * w, mom[1].total() * w, mom[2].total() * w]),
            energy: energy.total() * w,
        },
    )
}

/// The same sweep over raw values; the conservative projection uses this so
/// that a distribution whose moments already match its target produces a
/// bit-for-bit zero residual.
fn conserved_of_values(grid: &Grid, values: &[f64]) -> ConservedMoments {
    let n = grid.axis_len();
    let m = grid.energy_len();
    let axis = grid.axis();
    let u_m = grid.eps_weights();
    let eps = grid.eps_nodes();

    let mut mass = NeumaierSum::new();
    let mut mom = [NeumaierSum::new(), NeumaierSum::new(), NeumaierSum::new()];
    let mut energy = NeumaierSum::new();
    let mut chunks = values.chunks_exact(m);
    for ix in 0..n {
        let vx = axis[ix];
        for iy in 0..n {
            let vy = axis[iy];
            for iz in 0..n {
                let vz = axis[iz];
                let kin = 0.5 * (vx * vx + vy * vy + vz * vz);
                let chunk = chunks.next().expect("shape fixed");
                let mut cell = 0.0;
                let mut cell_e = 0.0;
                for ((&val, &u), &e) in chunk.iter().zip(u_m).zip(eps) {
                    let vu = val * u;
                    cell += vu;
                    cell_e += vu * e;
                }
                mass.add(cell);
                mom[0].add(cell * vx);
                mom[1].add(cell * vy);
                mom[2].add(cell * vz);
                energy.add(cell * kin + cell_e);
            }
        }
    }
    let w = grid.v_weight();
    ConservedMoments {
        mass: mass.total() * w,
        momentum: Vec3([mom[0].total() * w, mom[1].total() * w, mom[2].total() * w]),
        energy: energy.total() * w,
    }
}

impl ConservedMoments {
    /// Scales for relative residuals; momentum is normalized by
    /// mass * thermal-velocity so a zero-momentum state still has a scale.
    fn scales(&self) -> [f64; 5] {
        let vel = math::sqrt((2.0 * self.energy / self.mass).max(1e-300));
        let s_mom = self.mass * vel;
        [self.mass, s_mom, s_mom, s_mom, self.energy]
    }

    pub fn max_rel_deviation(&self, other: &ConservedMoments) -> f64 {
        let s = self.scales();
        let mut worst: f64 = ((other.mass - self.mass) / s[0]).abs();
        for i in 0..3 {
            worst = worst.max(((other.momentum.0[i] - self.momentum.0[i]) / s[1 + i]).abs());
        }
        worst.max(((other.energy - self.energy) / s[4]).abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProjectionInfo {
    pub iterations: usize,
    pub converged: bool,
    pub initial_residual: f64,
    pub final_residual: f64,
}

const PROJECTION_TOL: f64 = 1e-13;
const PROJECTION_MAX_ITER: usize = 50;

/// Multiply `m` by exp(a + b.v + c (|v|^2/2 + eps)) with (a, b, c) chosen by
/// damped Newton so its discrete (mass, momentum, energy) match `target`.
/// The exponential tilt preserves positivity. If Newton fails to converge the
/// input is left untouched and `converged` is false (callers decide whether
/// to warn).
pub fn conservative_projection(
    m: &mut Distribution,
    target: &ConservedMoments,
) -> Result<ProjectionInfo> {
    let grid = m.grid().clone();
    let n = grid.axis_len();
    let mm = grid.energy_len();
    let w = grid.v_weight();
    let scales = target.scales();

    let moments_of = |vals: &[f64]| -> [f64; 5] {
        let c = conserved_of_values(&grid, vals);
        [
            c.mass,
            c.momentum.0[0],
            c.momentum.0[1],
            c.momentum.0[2],
            c.energy,
        ]
    };

    // 5x5 Gram matrix of the collision invariants against the tilted state;
    // only a Newton direction, so plain accumulation is fine. Within one
    // energy row only (sum g, sum g*eps, sum g*eps^2) vary, so the node loop
    // is three multiply-adds and the phi products act on row aggregates.
    let gram_of = |vals: &[f64]| -> [[f64; 5]; 5] {
        let mut jac = [[0.0f64; 5]; 5];
        let mut chunks = vals.chunks_exact(mm);
        for ix in 0..n {
            let vx = grid.axis()[ix];
            for iy in 0..n {
                let vy = grid.axis()[iy];
                for iz in 0..n {
                    let vz = grid.axis()[iz];
                    let kin = 0.5 * (vx * vx + vy * vy + vz * vz);
                    let chunk = chunks.next().expect("shape fixed");
                    let mut s0 = 0.0;
                    let mut s1 = 0.0;
                    let mut s2 = 0.0;
                    for ((&val, &u), &e) in
                        chunk.iter().zip(grid.eps_weights()).zip(grid.eps_nodes())
                    {
                        let g = val * u;
                        let ge = g * e;
                        s0 += g;
                        s1 += ge;
                        s2 += ge * e;
                    }
                    // phi = (1, vx, vy, vz, kin + eps); over the row,
                    // phi_4-weighted sums become kin s0 + s1 etc.
                    let phi_v = [1.0, vx, vy, vz];
                    let m4 = kin * s0 + s1;
                    for p in 0..4 {
                        for q in p..4 {
                            jac[p][q] += s0 * phi_v[p] * phi_v[q];
                        }
                        jac[p][4] += phi_v[p] * m4;
                    }
                    jac[4][4] += kin * kin * s0 + 2.0 * kin * s1 + s2;
                }
            }
        }
        for p in 0..5 {
            for q in p..5 {
                jac[p][q] *= w;
                jac[q][p] = jac[p][q];
            }
        }
        jac
    };

    let target_vec = [
        target.mass,
        target.momentum.0[0],
        target.momentum.0[1],
        target.momentum.0[2],
        target.energy,
    ];
    let residual_norm = |mom: &[f64; 5]| -> f64 {
        let mut worst = 0.0f64;
        for p in 0..5 {
            worst = worst.max(((mom[p] - target_vec[p]) / scales[p]).abs());
        }
        worst
    };

    let mom0 = moments_of(m.values());
    let initial_residual = residual_norm(&mom0);
    if initial_residual <= PROJECTION_TOL {
        return Ok(ProjectionInfo {
            iterations: 0,
            converged: true,
            initial_residual,
            final_residual: initial_residual,
        });
    }

    // multiply in place by exp(dlambda . phi); tilts are applied
    // incrementally so trial states never copy the base values
    let apply_tilt = |dlambda: &[f64; 5], out: &mut [f64]| {
        let mut chunks = out.chunks_exact_mut(mm);
        for ix in 0..n {
            let vx = grid.axis()[ix];
            for iy in 0..n {
                let vy = grid.axis()[iy];
                for iz in 0..n {
                    let vz = grid.axis()[iz];
                    let kin = 0.5 * (vx * vx + vy * vy + vz * vz);
                    let lin = dlambda[0] + dlambda[1] * vx + dlambda[2] * vy + dlambda[3] * vz;
                    let chunk = chunks.next().expect("shape fixed");
                    for (val, &e) in chunk.iter_mut().zip(grid.eps_nodes()) {
                        let arg = (lin + dlambda[4] * (kin + e)).min(700.0);
                        // tilts are near-identity; the cubic truncation of
                        // exp is exact to ~1e-18 below 1e-4
                        let factor = if arg.abs() < 1e-4 {
                            1.0 + arg * (1.0 + arg * (0.5 + arg / 6.0))
                        } else {
                            math::exp(arg)
                        };
                        *val *= factor;
                    }
                }
            }
        }
    };

    // the tilt runs in place; `total_applied` lets a failed solve restore
    // the uncorrected input
    let mut current_res = initial_residual;
    let mut current_mom = mom0;
    let mut iterations = 0;
    let mut total_applied = [0.0f64; 5];

    while iterations < PROJECTION_MAX_ITER && current_res > PROJECTION_TOL {
        iterations += 1;
        let jac = gram_of(m.values());
        let mut rhs = [0.0f64; 5];
        for p in 0..5 {
            rhs[p] = target_vec[p] - current_mom[p];
        }
        let step = solve5(jac, rhs)?;

        // damped update: halve the step until the residual improves;
        // `applied` tracks the tilt already multiplied into the state so
        // each retry only moves by the difference
        let mut accepted = false;
        let mut applied = [0.0f64; 5];
        let mut damp = 1.0f64;
        for _ in 0..12 {
            let mut move_by = [0.0f64; 5];
            for p in 0..5 {
                move_by[p] = damp * step[p] - applied[p];
            }
            apply_tilt(&move_by, m.values_mut());
            for p in 0..5 {
                applied[p] += move_by[p];
            }
            let mom = moments_of(m.values());
            let res = residual_norm(&mom);
            if res < current_res {
                current_res = res;
                current_mom = mom;
                accepted = true;
                break;
            }
            damp *= 0.5;
        }
        for p in 0..5 {
            total_applied[p] += applied[p];
        }
        if !accepted {
            break;
        }
    }

    let converged = current_res <= PROJECTION_TOL;
    if !converged {
        // fall back to the uncorrected input (up to tilt round-trip rounding)
        let mut undo = [0.0f64; 5];
        for p in 0..5 {
            undo[p] = -total_applied[p];
        }
        apply_tilt(&undo, m.values_mut());
    }
    Ok(ProjectionInfo {
        iterations,
        converged,
        initial_residual,
        final_residual: current_res,
    })
}

/// LU solve with partial pivoting for the 5x5 Newton system.
fn solve5(mut a: [[f64; 5]; 5], mut b: [f64; 5]) -> Result<[f64; 5]> {
    for col in 0..5 {
        let mut pivot = col;
        for row in (col + 1)..5 {
            if a[row][col].abs() > a[pivot][col].abs() {
                pivot = row;
            }
        }
        if a[pivot][col].abs() < 1e-300 {
            return Err(KineticError::NoConvergence("singular projection system"));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in (col + 1)..5 {
            let factor = a[row][col] / a[col][col];
            for k in col..5 {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = [0.0f64; 5];
    for col in (0..5).rev() {
        let mut s = b[col];
        for k in (col + 1)..5 {
            s -= a[col][k] * x[k];
        }
        x[col] = s / a[col][col];
    }
    Ok(x)
}

#[derive(Debug, Clone)]
pub struct StepReport {
    /// Macro state at step start.
    pub mac: MacroState,
    pub a_freq: f64,
    /// Number of nodes clamped from (tiny) negative to zero.
    pub clamped: usize,
    pub projection: Option<ProjectionInfo>,
}

fn clamp_negatives(values: &mut [f64]) -> Result<usize> {
    let max = values.iter().fold(0.0f64, |m, &x| m.max(x));
    let tol = 1e-14 * max;
    let mut clamped = 0;
    for (i, v) in values.iter_mut().enumerate() {
        if *v < 0.0 {
            if *v < -tol {
                return Err(KineticError::NegativeValue { index: i, value: *v });
            }
            *v = 0.0;
            clamped += 1;
        }
    }
    Ok(clamped)
}

/// One step of df/dt = A (M(f) - f).
pub fn step_homogeneous(
    f: &mut Distribution,
    params: &Params,
    dt: f64,
    scheme: Scheme,
    project: bool,
) -> Result<StepReport> {
    let (mac, raw) = compute_macro_with_conserved(f)?;
    let a_freq = collision_frequency(&mac, params)?;
    let grid = f.grid().clone();

    let mut projection = None;
    let mut needs_clamp = false;
    match scheme {
        Scheme::ExplicitEuler | Scheme::Exponential => {
            let weight = match scheme {
                Scheme::ExplicitEuler => {
                    let dt_a = dt * a_freq;
                    if dt_a > 1.0 + 1e-12 {
                        return Err(KineticError::StabilityViolation { dt_a });
                    }
                    dt_a.min(1.0)
                }
                _ => 1.0 - math::exp(-dt * a_freq),
            };
            let mut mgauss = build_gaussian(&mac, params, &grid)?;
            if project {
                let target = ConservedMoments {
                    mass: raw.mass,
                    momentum: raw.momentum,
                    energy: raw.energy,
                };
                projection = Some(conservative_projection(&mut mgauss, &target)?);
            }
            // convex combination of nonnegative values stays nonnegative
            // even in floating point; no clamp pass needed
            let keep = 1.0 - weight;
            for (fv, &mv) in f.values_mut().iter_mut().zip(mgauss.values()) {
                *fv = keep * *fv + weight * mv;
            }
        }
        Scheme::Rk4 => {
            let rhs = |state: &Distribution| -> Result<Vec<f64>> {
                let mac_s = compute_macro(state)?;
                let a_s = collision_frequency(&mac_s, params)?;
                let mut m_s = build_gaussian(&mac_s, params, &grid)?;
                if project {
                    conservative_projection(&mut m_s, &conserved_moments(state))?;
                }
                Ok(m_s
                    .values()
                    .iter()
                    .zip(state.values())
                    .map(|(m, s)| a_s * (m - s))
                    .collect())
            };
            let stage = |base: &Distribution, k: &[f64], h: f64| -> Result<Distribution> {
                let vals: Vec<f64> = base
                    .values()
                    .iter()
                    .zip(k)
                    .map(|(b, ki)| (b + h * ki).max(0.0))
                    .collect();
                Distribution::from_raw(grid.clone(), vals)
            };
            let k1 = rhs(f)?;
            let y2 = stage(f, &k1, 0.5 * dt)?;
            let k2 = rhs(&y2)?;
            let y3 = stage(f, &k2, 0.5 * dt)?;
            let k3 = rhs(&y3)?;
            let y4 = stage(f, &k3, dt)?;
            let k4 = rhs(&y4)?;
            let sixth = dt / 6.0;
            for ((((fv, k1), k2), k3), k4) in f
                .values_mut()
                .iter_mut()
                .zip(&k1)
                .zip(&k2)
                .zip(&k3)
                .zip(&k4)
            {
                *fv += sixth * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
            needs_clamp = true;
        }
    }

    let clamped = if needs_clamp {
        clamp_negatives(f.values_mut())?
    } else {
        0
    };
    Ok(StepReport {
        mac,
        a_freq,
        clamped,
        projection,
    })
}

#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Sample {
    pub t: f64,
    pub mac: MacroState,
    pub h: f64,
    /// Entropy production at the sample; rebuilt from the sampled state.
    pub d: f64,
    /// Closed-form remainder; NaN if the tensor degenerated (nu < 0 probe).
    pub r_closed: f64,
    pub drift_mass: f64,
    pub drift_momentum: f64,
    pub drift_energy: f64,
}

#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    /// H after every step (index 0 = initial state).
    pub h_trace: Vec<f64>,
    /// max over steps of H_{n+1} - H_n.
    pub worst_h_increase: f64,
    /// In the theorem regime: worst_h_increase <= tolerance. Outside the
    /// regime monotonicity carries no claim and this stays true.
    pub h_monotone_ok: bool,
    pub steps: usize,
    pub dt: f64,
    /// Collision frequency at t = 0 (constant along homogeneous runs).
    pub a_freq: f64,
    /// Projection-off conservation bound: measured per-step quadrature
    /// moment error times the number of steps.
    pub drift_bound: f64,
    pub projection_warnings: usize,
}

fn sample_state(
    f: &Distribution,
    params: &Params,
    t: f64,
    initial: &ConservedMoments,
) -> Result<Sample> {
    let mac = compute_macro(f)?;
    let h = boltzmann_entropy(f)?;
    let (d, r_closed) = match build_gaussian(&mac, params, f.grid()) {
        Ok(mgauss) => {
            let (d, _) = entropy_production(f, &mgauss)?;
            let r = crate::entropy::remainder_closed_form(&mac, params)
                .map(|(r, _)| r)
                .unwrap_or(f64::NAN);
            (d, r)
        }
        Err(KineticError::NotPositiveDefinite { .. }) => (f64::NAN, f64::NAN),
        Err(e) => return Err(e),
    };
    let now = conserved_moments(f);
    let scales = initial.scales();
    let mut drift_momentum = 0.0f64;
    for i in 0..3 {
        drift_momentum = drift_momentum
            .max(((now.momentum.0[i] - initial.momentum.0[i]) / scales[1 + i]).abs());
    }
    Ok(Sample {
        t,
        mac,
        h,
        d,
        r_closed,
        drift_mass: ((now.mass - initial.mass) / scales[0]).abs(),
        drift_momentum,
        drift_energy: ((now.energy - initial.energy) / scales[4]).abs(),
    })
}

pub struct HomogeneousRun {
    pub trajectory: Trajectory,
    pub final_state: Distribution,
}

/// Step to t_end, sampling at the configured cadence, recording H after
/// every step and checking stepwise monotonicity in the theorem regime.
pub fn run_homogeneous(mut f: Distribution, cfg: &RunConfig) -> Result<HomogeneousRun> {
    cfg.validate()?;
    let steps = if cfg.t_end == 0.0 {
        0
    } else {
        ((math::round(cfg.t_end / cfg.dt)) as usize).max(1)
    };
    let initial = conserved_moments(&f);
    let mac0 = compute_macro(&f)?;
    let a_freq = collision_frequency(&mac0, &cfg.params)?;
    // probe the quadrature at the widest temperature scale the run touches,
    // including the largest stress eigenvalue
    let (theta_eigs, _) = crate::linalg::jacobi_eigen(&mac0.theta);
    let t_ref = mac0
        .t_delta
        .max(mac0.t_tr)
        .max(mac0.t_i)
        .max(theta_eigs[0].max(theta_eigs[1]).max(theta_eigs[2]));
    let diag = f.grid().diagnostics(t_ref);
    let drift_bound = diag.moment_rel_err * (steps.max(1) as f64);

    let mut h_trace = Vec::with_capacity(steps + 1);
    h_trace.push(boltzmann_entropy(&f)?);
    let mut samples = Vec::new();
    samples.push(sample_state(&f, &cfg.params, 0.0, &initial)?);

    let mut worst_h_increase = f64::NEG_INFINITY;
    let mut projection_warnings = 0usize;
    for step in 1..=steps {
        let report = step_homogeneous(&mut f, &cfg.params, cfg.dt, cfg.scheme, cfg.conservative_projection)?;
        if let Some(p) = &report.projection {
            if !p.converged {
                projection_warnings += 1;
            }
        }
        let h = boltzmann_entropy(&f)?;
        worst_h_increase = worst_h_increase.max(h - h_trace[h_trace.len() - 1]);
        h_trace.push(h);
        if step % cfg.sample_every == 0 || step == steps {
            samples.push(sample_state(&f, &cfg.params, step as f64 * cfg.dt, &initial)?);
        }
    }
    if steps == 0 {
        worst_h_increase = 0.0;
    }
    let h_monotone_ok = !cfg.params.theorem_regime() || worst_h_increase <= H_STEP_TOL;
    Ok(HomogeneousRun {
        trajectory: Trajectory {
            samples,
            h_trace,
            worst_h_increase,
            h_monotone_ok,
            steps,
            dt: cfg.dt,
            a_freq,
            drift_bound,
            projection_warnings,
        },
        final_state: f,
    })
}

/// Per-x-cell distribution values on a shared grid, periodic in x.
#[derive(Debug, Clone)]
pub struct SlabField {
    grid: Arc<Grid>,
    cells: Vec<Vec<f64>>,
    x_length: f64,
    dx: f64,
}

impl SlabField {
    /// Build from a per-cell constructor; the closure receives the cell
    /// index and its center coordinate.
    pub fn from_fn<F>(grid: &Arc<Grid>, x_cells: usize, x_length: f64, f: F) -> Result<Self>
    where
        F: Fn(usize, f64) -> Result<Distribution>,
    {
        if x_cells < 2 {
            return Err(KineticError::InvalidParams("slab needs at least 2 cells"));
        }
        if !(x_length > 0.0) {
            return Err(KineticError::InvalidParams("slab length must be positive"));
        }
        let dx = x_length / x_cells as f64;
        let mut cells = Vec::with_capacity(x_cells);
        for i in 0..x_cells {
            let x = (i as f64 + 0.5) * dx;
            let dist = f(i, x)?;
            grid.check_shape(dist.values())?;
            cells.push(dist.into_values());
        }
        Ok(SlabField {
            grid: grid.clone(),
            cells,
            x_length,
            dx,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn x_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn x_length(&self) -> f64 {
        self.x_length
    }

    pub fn cell(&self, i: usize) -> &[f64] {
        &self.cells[i]
    }
}

/// Upwind update of one cell from its periodic neighbors.
fn transported_cell(grid: &Grid, old: &[Vec<f64>], x: usize, dt_over_dx: f64) -> Vec<f64> {
    let n = grid.axis_len();
    let m = grid.energy_len();
    let block = n * n * m; // contiguous run sharing one v1 value
    let x_cells = old.len();
    let left = &old[(x + x_cells - 1) % x_cells];
    let here = &old[x];
    let right = &old[(x + 1) % x_cells];
    let mut out = Vec::with_capacity(here.len());
    for ix in 0..n {
        let c = grid.axis()[ix] * dt_over_dx;
        let lo = ix * block;
        let hi = lo + block;
        // convex form keeps the update nonnegative in floating point
        if c >= 0.0 {
            let keep = 1.0 - c;
            out.extend(
                here[lo..hi]
                    .iter()
                    .zip(&left[lo..hi])
                    .map(|(&h, &l)| keep * h + c * l),
            );
        } else {
            let keep = 1.0 + c;
            out.extend(
                here[lo..hi]
                    .iter()
                    .zip(&right[lo..hi])
                    .map(|(&h, &r)| keep * h - c * r),
            );
        }
    }
    out
}

/// First-order upwind finite-volume transport step for v1 d/dx, periodic.
/// Flux-form update; mass telescopes exactly across the periodic domain.
pub fn step_transport_1d(field: &mut SlabField, dt: f64) -> Result<()> {
    step_transport_1d_with(field, dt, &SerialExecutor)
}

/// Transport step with the per-cell updates distributed by an executor.
pub fn step_transport_1d_with(
    field: &mut SlabField,
    dt: f64,
    exec: &dyn CellExecutor,
) -> Result<()> {
    let grid = field.grid.clone();
    let n = grid.axis_len();
    let dx = field.dx;
    let max_v1 = grid.axis()[n - 1];
    let cfl = max_v1 * dt / dx;
    if cfl > 1.0 + 1e-12 {
        return Err(KineticError::CflViolation { cfl });
    }
    let old = core::mem::take(&mut field.cells);
    let dt_over_dx = dt / dx;
    field.cells = exec.build_cells(old.len(), &|x| transported_cell(&grid, &old, x, dt_over_dx));
    Ok(())
}

/// Per-cell statistics gathered by the slab monitors.
#[derive(Debug, Clone, Copy)]
pub struct CellStats {
    pub h: f64,
    pub conserved: ConservedMoments,
    pub projection_warning: bool,
}

/// Execution strategy for the embarrassingly parallel per-cell relaxation
/// and measurement sweeps. The serial implementation lives here; callers
/// with a thread pool provide their own.
pub trait CellExecutor: Sync {
    fn for_each_cell(
        &self,
        cells: &mut [Vec<f64>],
        op: &(dyn Fn(usize, &mut Vec<f64>) -> Result<CellStats> + Sync),
    ) -> Result<Vec<CellStats>>;

    /// Build one value vector per cell from an indexed pure constructor;
    /// serial by default.
    fn build_cells(
        &self,
        n_cells: usize,
        op: &(dyn Fn(usize) -> Vec<f64> + Sync),
    ) -> Vec<Vec<f64>> {
        (0..n_cells).map(op).collect()
    }
}

pub struct SerialExecutor;

impl CellExecutor for SerialExecutor {
    fn for_each_cell(
        &self,
        cells: &mut [Vec<f64>],
        op: &(dyn Fn(usize, &mut Vec<f64>) -> Result<CellStats> + Sync),
    ) -> Result<Vec<CellStats>> {
        cells
            .iter_mut()
            .enumerate()
            .map(|(i, cell)| op(i, cell))
            .collect()
    }
}

#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SlabSample {
    pub t: f64,
    pub mass: f64,
    pub momentum: Vec3,
    pub energy: f64,
    pub h: f64,
    pub drift_mass: f64,
    pub drift_energy: f64,
}

#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SlabTrajectory {
    pub samples: Vec<SlabSample>,
    /// Total H after every Strang step (index 0 = initial field).
    pub h_trace: Vec<f64>,
    pub worst_h_increase: f64,
    pub h_monotone_ok: bool,
    pub steps: usize,
    pub dt: f64,
    pub projection_warnings: usize,
}

pub struct SlabRun {
    pub trajectory: SlabTrajectory,
    pub final_field: SlabField,
}

/// Strang splitting: half transport, full relaxation per cell, half
/// transport, monitoring totals every step.
pub fn run_slab(mut field: SlabField, cfg: &RunConfig, exec: &dyn CellExecutor) -> Result<SlabRun> {
    cfg.validate()?;
    if cfg.slab.is_none() {
        return Err(KineticError::InvalidParams("slab config missing"));
    }
    let steps = if cfg.t_end == 0.0 {
        0
    } else {
        ((math::round(cfg.t_end / cfg.dt)) as usize).max(1)
    };
    let grid = field.grid.clone();
    let dx = field.dx;
    let params = cfg.params;
    let scheme = cfg.scheme;
    let project = cfg.conservative_projection;
    let dt = cfg.dt;

    let measure_op = move |_: usize, cell: &mut Vec<f64>| -> Result<CellStats> {
        let (h, conserved) = measure_values(&grid, cell);
        Ok(CellStats {
            h,
            conserved,
            projection_warning: false,
        })
    };
    let grid2 = field.grid.clone();
    // totals are read off the post-transport measure pass, so the relax op
    // only reports whether its projection had to fall back
    let relax_op = move |_: usize, cell: &mut Vec<f64>| -> Result<CellStats> {
        let mut dist = Distribution::from_raw(grid2.clone(), core::mem::take(cell))?;
        let report = step_homogeneous(&mut dist, &params, dt, scheme, project)?;
        let warned = report
            .projection
            .map(|p| !p.converged)
            .unwrap_or(false);
        *cell = dist.into_values();
        Ok(CellStats {
            h: 0.0,
            conserved: ConservedMoments {
                mass: 0.0,
                momentum: Vec3::ZERO,
                energy: 0.0,
            },
            projection_warning: warned,
        })
    };

    let totals = |stats: &[CellStats]| -> (f64, ConservedMoments) {
        let mut h = NeumaierSum::new();
        let mut mass = NeumaierSum::new();
        let mut mom = [NeumaierSum::new(), NeumaierSum::new(), NeumaierSum::new()];
        let mut energy = NeumaierSum::new();
        for s in stats {
            h.add(s.h);
            mass.add(s.conserved.mass);
            for i in 0..3 {
                mom[i].add(s.conserved.momentum.0[i]);
            }
            energy.add(s.conserved.energy);
        }
        (
            h.total() * dx,
            ConservedMoments {
                mass: mass.total() * dx,
                momentum: Vec3([
                    mom[0].total() * dx,
                    mom[1].total() * dx,
                    mom[2].total() * dx,
                ]),
                energy: energy.total() * dx,
            },
        )
    };

    let stats0 = exec.for_each_cell(&mut field.cells, &measure_op)?;
    let (h0, initial) = totals(&stats0);
    let scales = initial.scales();

    let mut h_trace = vec![h0];
    let mut samples = Vec::new();
    samples.push(SlabSample {
        t: 0.0,
        mass: initial.mass,
        momentum: initial.momentum,
        energy: initial.energy,
        h: h0,
        drift_mass: 0.0,
        drift_energy: 0.0,
    });
    let mut worst_h_increase = f64::NEG_INFINITY;
    let mut projection_warnings = 0usize;

    for step in 1..=steps {
        step_transport_1d_with(&mut field, 0.5 * dt, exec)?;
        let relax_stats = exec.for_each_cell(&mut field.cells, &relax_op)?;
        projection_warnings += relax_stats.iter().filter(|s| s.projection_warning).count();
        step_transport_1d_with(&mut field, 0.5 * dt, exec)?;
        let stats = exec.for_each_cell(&mut field.cells, &measure_op)?;
        let (h, now) = totals(&stats);
        worst_h_increase = worst_h_increase.max(h - h_trace[h_trace.len() - 1]);
        h_trace.push(h);
        if step % cfg.sample_every == 0 || step == steps {
            samples.push(SlabSample {
                t: step as f64 * dt,
                mass: now.mass,
                momentum: now.momentum,
                energy: now.energy,
                h,
                drift_mass: ((now.mass - initial.mass) / scales[0]).abs(),
                drift_energy: ((now.energy - initial.energy) / scales[4]).abs(),
            });
        }
    }
    if steps == 0 {
        worst_h_increase = 0.0;
    }
    let h_monotone_ok = !params.theorem_regime() || worst_h_increase <= H_SLAB_TOL;
    Ok(SlabRun {
        trajectory: SlabTrajectory {
            samples,
            h_trace,
            worst_h_increase,
            h_monotone_ok,
            steps,
            dt,
            projection_warnings,
        },
        final_field: field,
    })
}
