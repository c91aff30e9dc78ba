//! Dynamics of the relaxation operator against the exact moment ODEs.
//!
//! Taking moments of df/dt = A (M(f) - f) gives, for constant A (mass,
//! momentum and total energy are conserved, so rho and T_delta are):
//!   dT_tr/dt    = A theta (T_delta - T_tr)
//!   dT_I/dt     = A theta (T_delta - T_I)
//!   dTheta12/dt = -A (1 - nu + nu theta) Theta12
//! The discrete schemes inherit per-step factors from the same linear maps,
//! which is what these tests pin down.

use std::sync::Arc;

use polykin_core::entropy::boltzmann_entropy;
use polykin_core::gaussian::{build_gaussian, gaussian_from_cov, maxwellian};
use polykin_core::moments::{compute_macro, Distribution};
use polykin_core::relaxation::{
    conservative_projection, conserved_moments, run_homogeneous, run_slab, step_homogeneous,
    step_transport_1d, RunConfig, Scheme, SerialExecutor, SlabConfig, SlabField,
};
use polykin_core::{Grid, GridSpec, KineticError, Mat3, Params, Vec3};

fn small_grid(delta: f64) -> Arc<Grid> {
    // 24 points/axis keeps aliasing below ~1e-13 for the temperatures these
    // tests use, which the 1e-10-level assertions need
    let spec = GridSpec::for_scales(1.3, 0.6, delta)
        .unwrap()
        .with_points(24, 24)
        .unwrap();
    Arc::new(Grid::build(spec).unwrap())
}

fn config(grid: &Grid, nu: f64, theta: f64, t_end: f64, dt: f64, scheme: Scheme) -> RunConfig {
    RunConfig {
        params: Params::new(nu, theta, grid.delta()).unwrap(),
        grid: *grid.spec(),
        t_end,
        dt,
        scheme,
        conservative_projection: false,
        slab: None,
        sample_every: 1,
    }
}

fn anisotropic_start(grid: &Arc<Grid>) -> Distribution {
    let cov = Mat3([[1.3, 0.1, 0.0], [0.1, 0.9, 0.0], [0.0, 0.0, 1.1]]);
    gaussian_from_cov(1.0, Vec3::new(0.2, 0.0, 0.0), &cov, 0.8, grid).unwrap()
}

#[test]
fn equilibrium_is_fixed_point_for_all_schemes() {
    let grid = small_grid(2.0);
    let f0 = maxwellian(1.0, Vec3::new(0.1, 0.0, 0.0), 1.0, &grid).unwrap();
    for scheme in [Scheme::ExplicitEuler, Scheme::Rk4, Scheme::Exponential] {
        let mut f = f0.clone();
        let params = Params::new(0.5, 0.5, 2.0).unwrap();
        step_homogeneous(&mut f, &params, 0.3, scheme, false).unwrap();
        let sup = f
            .values()
            .iter()
            .zip(f0.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(sup < 1e-10, "{scheme:?}: sup {sup}");
    }
}

#[test]
fn explicit_step_moves_t_tr_by_moment_ode_increment() {
    let grid = small_grid(2.0);
    let mut f = anisotropic_start(&grid);
    let params = Params::new(0.3, 0.5, 2.0).unwrap();
    let before = compute_macro(&f).unwrap();
    let dt = 0.05 / (before.rho * before.t_delta);
    let report = step_homogeneous(&mut f, &params, dt, Scheme::ExplicitEuler, false).unwrap();
    let after = compute_macro(&f).unwrap();
    let predicted = params.theta * dt * report.a_freq * (before.t_delta - before.t_tr);
    let measured = after.t_tr - before.t_tr;
    assert!(
        (measured - predicted).abs() < 1e-8,
        "drift {measured} vs {predicted}"
    );
}

#[test]
fn euler_at_unit_weight_lands_on_gaussian() {
    let grid = small_grid(2.0);
    let mut f = anisotropic_start(&grid);
    let params = Params::new(0.5, 0.4, 2.0).unwrap();
    let mac = compute_macro(&f).unwrap();
    let target = build_gaussian(&mac, &params, &grid).unwrap();
    let a = polykin_core::moments::collision_frequency(&mac, &params).unwrap();
    step_homogeneous(&mut f, &params, 1.0 / a, Scheme::ExplicitEuler, false).unwrap();
    let sup = f
        .values()
        .iter()
        .zip(target.values())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0f64, f64::max);
    assert!(sup < 1e-14, "sup {sup}");
}

#[test]
fn euler_stability_bound_enforced() {
    let grid = small_grid(2.0);
    let mut f = anisotropic_start(&grid);
    let params = Params::new(0.5, 0.5, 2.0).unwrap();
    let mac = compute_macro(&f).unwrap();
    let a = polykin_core::moments::collision_frequency(&mac, &params).unwrap();
    let err = step_homogeneous(&mut f, &params, 1.5 / a, Scheme::ExplicitEuler, false);
    assert!(matches!(err, Err(KineticError::StabilityViolation { .. })));
}

#[test]
fn per_step_contraction_factors_match_discrete_map() {
    // exponential scheme: T' - T_delta = (1 - a theta)(T - T_delta) and
    // Theta12' = (1 - a (1 - nu + nu theta)) Theta12, a = 1 - e^{-A dt}
    let grid = small_grid(2.0);
    let mut f = anisotropic_start(&grid);
    let params = Params::new(0.4, 0.6, 2.0).unwrap();
    let before = compute_macro(&f).unwrap();
    let dt = 0.3 / (before.rho * before.t_delta);
    let report = step_homogeneous(&mut f, &params, dt, Scheme::Exponential, false).unwrap();
    let after = compute_macro(&f).unwrap();
    let a = 1.0 - (-dt * report.a_freq).exp();

    let gap_ratio = (after.t_tr - after.t_delta) / (before.t_tr - before.t_delta);
    let expect = 1.0 - a * params.theta;
    assert!((gap_ratio - expect).abs() < 1e-6, "{gap_ratio} vs {expect}");

    let off_ratio = after.theta.0[0][1] / before.theta.0[0][1];
    let expect_off = 1.0 - a * (1.0 - params.nu + params.nu * params.theta);
    assert!(
        (off_ratio - expect_off).abs() < 1e-6,
        "{off_ratio} vs {expect_off}"
    );
}

#[test]
fn theta_zero_conserves_energies_separately() {
    let grid = small_grid(2.0);
    let f = anisotropic_start(&grid);
    let cfg = config(&grid, 0.4, 0.0, 1.5, 0.05, Scheme::Exponential);
    let run = run_homogeneous(f, &cfg).unwrap();
    let first = &run.trajectory.samples[0].mac;
    let last = &run.trajectory.samples.last().unwrap().mac;
    assert!(
        ((last.e_tr - first.e_tr) / first.e_tr).abs() < 1e-10,
        "E_tr drift"
    );
    assert!(
        ((last.e_i - first.e_i) / first.e_i).abs() < 1e-10,
        "E_I drift"
    );
    // anisotropy still relaxes: off-diagonal decays at rate A(1 - nu)
    assert!(last.theta.0[0][1].abs() < first.theta.0[0][1].abs());
}

#[test]
fn relaxation_run_reaches_maxwellian_fixed_point() {
    let grid = small_grid(2.0);
    let f = anisotropic_start(&grid);
    let mac0 = compute_macro(&f).unwrap();
    let a = mac0.rho * mac0.t_delta; // nu = 0.5, theta = 0.5: denominator 0.75
    let cfg = config(&grid, 0.5, 0.5, 40.0 / a, 0.5 / a, Scheme::Exponential);
    let run = run_homogeneous(f, &cfg).unwrap();
    assert!(run.trajectory.h_monotone_ok, "H must not increase");

    let last = run.trajectory.samples.last().unwrap();
    let target = maxwellian(last.mac.rho, last.mac.u, last.mac.t_delta, &grid).unwrap();
    let sup = run
        .final_state
        .values()
        .iter()
        .zip(target.values())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0f64, f64::max);
    assert!(sup < 1e-6, "terminal sup distance {sup}");
    // H settles at the Maxwellian entropy level
    let h_eq = boltzmann_entropy(&target).unwrap();
    assert!((run.trajectory.h_trace.last().unwrap() - h_eq).abs() < 1e-6);
    // D is tiny at the end
    assert!(last.d.abs() < 1e-10, "terminal D {}", last.d);
}

#[test]
fn bimodal_entropy_strictly_decreasing() {
    let grid = small_grid(2.0);
    let fa = maxwellian(0.6, Vec3::new(0.6, 0.0, 0.0), 0.7, &grid).unwrap();
    let fb = maxwellian(0.6, Vec3::new(-0.6, 0.0, 0.0), 0.7, &grid).unwrap();
    let vals: Vec<f64> = fa
        .values()
        .iter()
        .zip(fb.values())
        .map(|(a, b)| a + b)
        .collect();
    let f = Distribution::new(grid.clone(), vals).unwrap();
    let mac = compute_macro(&f).unwrap();
    let a = mac.rho * mac.t_delta / 0.75;
    let cfg = config(&grid, 0.5, 0.5, 6.0 / a, 0.25 / a, Scheme::Exponential);
    let run = run_homogeneous(f, &cfg).unwrap();
    for w in run.trajectory.h_trace.windows(2) {
        assert!(w[1] < w[0] + 1e-12, "H not decreasing: {} -> {}", w[0], w[1]);
    }
}

#[test]
fn projection_fixes_coarse_grid_moments() {
    // deliberately under-truncated box so the Gaussian moments are visibly off
    let spec = GridSpec::new(3.2, 8, 14.0, 8, 2.0).unwrap();
    let grid = Arc::new(Grid::build(spec).unwrap());
    let f = gaussian_from_cov(
        1.0,
        Vec3::new(0.1, 0.0, 0.0),
        &Mat3::diag(1.1, 0.9, 1.0),
        1.0,
        &grid,
    )
    .unwrap();
    let mac = compute_macro(&f).unwrap();
    let params = Params::new(0.5, 0.5, 2.0).unwrap();
    let mut mgauss = build_gaussian(&mac, &params, &grid).unwrap();
    let target = conserved_moments(&f);
    let before = target.max_rel_deviation(&conserved_moments(&mgauss));
    assert!(before > 1e-6, "fixture should start visibly off: {before}");
    let info = conservative_projection(&mut mgauss, &target).unwrap();
    assert!(info.converged, "{info:?}");
    let after = target.max_rel_deviation(&conserved_moments(&mgauss));
    assert!(after <= 1e-12, "post-projection deviation {after}");
    // exponential tilt keeps positivity
    assert!(mgauss.values().iter().all(|&x| x >= 0.0));
    assert!(info.initial_residual > info.final_residual);
}

#[test]
fn projection_is_identity_when_matching() {
    let grid = small_grid(2.0);
    let f = maxwellian(1.0, Vec3::ZERO, 1.0, &grid).unwrap();
    let mut g = f.clone();
    let info = conservative_projection(&mut g, &conserved_moments(&f)).unwrap();
    assert!(info.converged);
    assert_eq!(info.iterations, 0);
    assert_eq!(f.values(), g.values());
}

fn uniform_slab(grid: &Arc<Grid>, cells: usize) -> SlabField {
    SlabField::from_fn(grid, cells, 1.0, |_, _| {
        maxwellian(1.0, Vec3::ZERO, 1.0, grid)
    })
    .unwrap()
}

#[test]
fn transport_keeps_uniform_field_unchanged() {
    let grid = small_grid(2.0);
    let mut field = uniform_slab(&grid, 8);
    let before = field.cell(3).to_vec();
    let dt = 0.9 * field.dx() / grid.axis()[grid.axis_len() - 1];
    step_transport_1d(&mut field, dt).unwrap();
    let sup = field
        .cell(3)
        .iter()
        .zip(&before)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    assert!(sup < 1e-15);
}

#[test]
fn transport_conserves_mass_and_odd_momentum() {
    let grid = small_grid(2.0);
    let cells = 8;
    // single-cell pulse on a quiescent background
    let mut field = SlabField::from_fn(&grid, cells, 1.0, |_, x| {
        let rho = if (0.4..0.5).contains(&x) { 2.0 } else { 0.5 };
        maxwellian(rho, Vec3::ZERO, 1.0, &grid)
    })
    .unwrap();
    let total = |field: &SlabField| {
        let mut mass = 0.0;
        let mut mom = 0.0;
        for i in 0..cells {
            let d = Distribution::new(grid.clone(), field.cell(i).to_vec()).unwrap();
            let c = conserved_moments(&d);
            mass += c.mass;
            mom += c.momentum.0[0];
        }
        (mass * field.dx(), mom * field.dx())
    };
    let (mass0, mom0) = total(&field);
    assert!(mom0.abs() < 1e-12, "v-odd symmetric start");
    let dt = 0.8 * field.dx() / grid.axis()[grid.axis_len() - 1];
    for _ in 0..50 {
        step_transport_1d(&mut field, dt).unwrap();
    }
    let (mass1, mom1) = total(&field);
    assert!(((mass1 - mass0) / mass0).abs() < 1e-13, "mass drift");
    assert!(mom1.abs() < 1e-12, "momentum stays zero");
}

#[test]
fn transport_cfl_violation_rejected() {
    let grid = small_grid(2.0);
    let mut field = uniform_slab(&grid, 8);
    let dt = 1.5 * field.dx() / grid.axis()[grid.axis_len() - 1];
    assert!(matches!(
        step_transport_1d(&mut field, dt),
        Err(KineticError::CflViolation { .. })
    ));
}

#[test]
fn slab_run_uniform_equilibrium_is_stationary() {
    let grid = small_grid(2.0);
    let field = uniform_slab(&grid, 8);
    let mut cfg = config(&grid, 0.5, 0.5, 0.2, 0.02, Scheme::Exponential);
    cfg.slab = Some(SlabConfig {
        x_cells: 8,
        x_length: 1.0,
    });
    let run = run_slab(field, &cfg, &SerialExecutor).unwrap();
    let h = &run.trajectory.h_trace;
    assert!((h.last().unwrap() - h[0]).abs() < 1e-10);
    let s = run.trajectory.samples.last().unwrap();
    assert!(s.drift_mass < 1e-13);
    assert!(s.drift_energy < 1e-13);
}

#[test]
fn slab_run_temperature_profile_dissipates() {
    let grid = small_grid(2.0);
    let cells = 8;
    let field = SlabField::from_fn(&grid, cells, 2.0, |_, x| {
        let t = 1.0 + 0.15 * (core::f64::consts::TAU * x / 2.0).cos();
        maxwellian(1.0, Vec3::ZERO, t, &grid)
    })
    .unwrap();
    let mut cfg = config(&grid, 0.5, 0.5, 0.5, 0.025, Scheme::Exponential);
    cfg.conservative_projection = true;
    cfg.slab = Some(SlabConfig {
        x_cells: cells,
        x_length: 2.0,
    });
    let run = run_slab(field, &cfg, &SerialExecutor).unwrap();
    assert!(run.trajectory.h_monotone_ok);
    assert!(run.trajectory.worst_h_increase <= 1e-8);
    let s = run.trajectory.samples.last().unwrap();
    assert!(s.drift_mass < 1e-12, "mass drift {}", s.drift_mass);
    // entropy strictly dropped overall
    let h = &run.trajectory.h_trace;
    assert!(h.last().unwrap() < &(h[0] - 1e-6));
}
