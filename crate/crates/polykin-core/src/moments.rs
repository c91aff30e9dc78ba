//! Macroscopic fields extracted from a discrete distribution, and the
//! collision frequency built from them.

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::error::{KineticError, Result};
use crate::gaussian::Params;
use crate::linalg::{Mat3, Vec3};
use crate::math::NeumaierSum;
use crate::quadrature::Grid;

/// Mass below this is treated as vacuum; temperatures are undefined there.
pub const VACUUM_THRESHOLD: f64 = 1e-12;

/// Nonnegative node values of f paired with the grid they live on.
#[derive(Debug, Clone)]
pub struct Distribution {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl Distribution {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        grid.check_shape(&values)?;
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(KineticError::NonFinite("distribution values"));
            }
            if v < 0.0 {
                return Err(KineticError::NegativeValue { index: i, value: v });
            }
        }
        Ok(Distribution { grid, values })
    }

    /// Evaluate `f(v, eps)` at every node. The closure must return
    /// nonnegative finite values.
    pub fn from_fn<F>(grid: &Arc<Grid>, f: F) -> Result<Self>
    where
        F: Fn(Vec3, f64) -> f64,
    {
        let n = grid.axis_len();
        let m = grid.energy_len();
        let mut values = Vec::with_capacity(grid.node_count());
        for ix in 0..n {
            for iy in 0..n {
                for iz in 0..n {
                    let v = grid.velocity(ix, iy, iz);
                    for mm in 0..m {
                        values.push(f(v, grid.eps_nodes()[mm]));
                    }
                }
            }
        }
        Distribution::new(grid.clone(), values)
    }

    #[inline]
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub(crate) fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Wrap values without the nonnegativity scan; internal fast path for
    /// freshly computed data that is positive by construction.
    pub(crate) fn from_raw(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        grid.check_shape(&values)?;
        Ok(Distribution { grid, values })
    }

    pub fn mass(&self) -> f64 {
        self.grid.integrate(&self.values).unwrap_or(f64::NAN)
    }

    pub fn same_grid(&self, other: &Distribution) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || self.grid == other.grid
    }
}

/// Density, bulk velocity, stress tensor, the translational/internal energy
/// split, and the equipartition temperatures.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MacroState {
    pub rho: f64,
    pub u: Vec3,
    pub theta: Mat3,
    pub e_tr: f64,
    pub e_i: f64,
    pub t_tr: f64,
    pub t_i: f64,
    pub t_delta: f64,
    pub delta: f64,
}

impl MacroState {
    /// Assemble a state from prescribed fields (no grid involved); used by
    /// the closed-form sweeps and the random-state sampler.
    pub fn from_parts(rho: f64, u: Vec3, theta: Mat3, t_i: f64, delta: f64) -> Result<Self> {
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(KineticError::VacuumState { rho });
        }
        if !u.is_finite() || !theta.is_finite() || !t_i.is_finite() {
            return Err(KineticError::NonFinite("macro state"));
        }
        if !(t_i > 0.0) {
            return Err(KineticError::InvalidParams("t_i must be positive"));
        }
        if !(delta > 0.0) {
            return Err(KineticError::InvalidParams("delta must be positive"));
        }
        let theta = theta.symmetrize();
        let t_tr = theta.trace() / 3.0;
        if !(t_tr > 0.0) {
            return Err(KineticError::InvalidParams("stress tensor trace must be positive"));
        }
        Ok(MacroState {
            rho,
            u,
            theta,
            e_tr: 1.5 * rho * t_tr,
            e_i: 0.5 * delta * rho * t_i,
            t_tr,
            t_i,
            t_delta: (3.0 * t_tr + delta * t_i) / (3.0 + delta),
            delta,
        })
    }

    /// Total internal energy E_delta = E_tr + E_I = (3+delta)/2 rho T_delta.
    pub fn e_delta(&self) -> f64 {
        self.e_tr + self.e_i
    }
}

/// Lab-frame conserved sums accumulated alongside the macro extraction;
/// bit-identical to the dedicated conserved-moment sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawConserved {
    pub mass: f64,
    pub momentum: Vec3,
    pub energy: f64,
}

/// Two-pass moment extraction: (rho, rho U) first, then the stress tensor
/// about the discrete U and the internal energy. Computing the centered
/// second moment directly (rather than M2 - rho U x U) avoids cancellation,
/// and the assembled tensor is symmetrized explicitly.
pub fn compute_macro(f: &Distribution) -> Result<MacroState> {
    compute_macro_with_conserved(f).map(|(mac, _)| mac)
}

/// The same extraction, also returning the lab-frame conserved moments the
/// relaxation step projects against (saves a third sweep per step).
pub fn compute_macro_with_conserved(f: &Distribution) -> Result<(MacroState, RawConserved)> {
    let grid = f.grid();
    let values = f.values();
    let n = grid.axis_len();
    let m = grid.energy_len();
    let axis = grid.axis();
    let u_m = grid.eps_weights();

    let mut rho_acc = NeumaierSum::new();
    let mut mom = [NeumaierSum::new(), NeumaierSum::new(), NeumaierSum::new()];

    // pass 1: mass and momentum
    let mut it = values.chunks_exact(m);
    for ix in 0..n {
        let vx = axis[ix];
        for iy in 0..n {
            let vy = axis[iy];
            for iz in 0..n {
                let vz = axis[iz];
                let chunk = it.next().expect("shape checked at construction");
                let mut cell = 0.0;
                for (val, u) in chunk.iter().zip(u_m.iter()) {
                    cell += val * u;
                }
                rho_acc.add(cell);
                mom[0].add(cell * vx);
                mom[1].add(cell * vy);
                mom[2].add(cell * vz);
            }
        }
    }
    let w = grid.v_weight();
    let rho = rho_acc.total() * w;
    if !rho.is_finite() {
        return Err(KineticError::NonFinite("mass moment"));
    }
    if rho < VACUUM_THRESHOLD {
        return Err(KineticError::VacuumState { rho });
    }
    let momentum = Vec3([
        mom[0].total() * w,
        mom[1].total() * w,
        mom[2].total() * w,
    ]);
    let u = Vec3([momentum.0[0] / rho, momentum.0[1] / rho, momentum.0[2] / rho]);

    // pass 2: centered second moments, internal energy, and the lab-frame
    // energy sum (accumulated exactly as the conserved sweep would)
    let mut sec = [NeumaierSum::new(); 6]; // xx, yy, zz, xy, xz, yz
    let mut e_i_acc = NeumaierSum::new();
    let mut e_lab_acc = NeumaierSum::new();
    let mut it = values.chunks_exact(m);
    for ix in 0..n {
        let vx = axis[ix];
        let cx = vx - u.0[0];
        for iy in 0..n {
            let vy = axis[iy];
            let cy = vy - u.0[1];
            for iz in 0..n {
                let vz = axis[iz];
                let cz = vz - u.0[2];
                let kin = 0.5 * (vx * vx + vy * vy + vz * vz);
                let chunk = it.next().expect("shape checked at construction");
                let mut cell = 0.0;
                let mut cell_eps = 0.0;
                for ((val, u_w), eps) in chunk.iter().zip(u_m.iter()).zip(grid.eps_nodes()) {
                    let vu = val * u_w;
                    cell += vu;
                    cell_eps += vu * eps;
                }
                sec[0].add(cell * cx * cx);
                sec[1].add(cell * cy * cy);
                sec[2].add(cell * cz * cz);
                sec[3].add(cell * cx * cy);
                sec[4].add(cell * cx * cz);
                sec[5].add(cell * cy * cz);
                e_i_acc.add(cell_eps);
                e_lab_acc.add(cell * kin + cell_eps);
            }
        }
    }
    let theta = Mat3([
        [sec[0].total(), sec[3].total(), sec[4].total()],
        [sec[3].total(), sec[1].total(), sec[5].total()],
        [sec[4].total(), sec[5].total(), sec[2].total()],
    ])
    .scale(w / rho)
    .symmetrize();
    let e_i = e_i_acc.total() * w;
    if !theta.is_finite() || !e_i.is_finite() {
        return Err(KineticError::NonFinite("second moments"));
    }

    let delta = grid.delta();
    let t_tr = theta.trace() / 3.0;
    let t_i = 2.0 * e_i / (delta * rho);
    if !(t_tr > 0.0) || !(t_i > 0.0) {
        return Err(KineticError::VacuumState { rho });
    }
    Ok((
        MacroState {
            rho,
            u,
            theta,
            e_tr: 1.5 * rho * t_tr,
            e_i,
            t_tr,
            t_i,
            t_delta: (3.0 * t_tr + delta * t_i) / (3.0 + delta),
            delta,
        },
        RawConserved {
            mass: rho,
            momentum,
            energy: e_lab_acc.total() * w,
        },
    ))
}

/// A_{nu,theta} = rho T_delta / (1 - nu + nu theta).
pub fn collision_frequency(mac: &MacroState, params: &Params) -> Result<f64> {
    let den = 1.0 - params.nu + params.nu * params.theta;
    if den <= 1e-12 {
        return Err(KineticError::InvalidParams(
            "collision frequency denominator 1 - nu + nu*theta at or below tolerance",
        ));
    }
    Ok(mac.rho * mac.t_delta / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian;
    use crate::quadrature::GridSpec;

    fn grid(delta: f64) -> Arc<Grid> {
        Arc::new(Grid::build(GridSpec::for_scales(1.0, 1.0, delta).unwrap()).unwrap())
    }

    #[test]
    fn maxwellian_moments_match_targets() {
        let g = grid(2.0);
        let f = gaussian::maxwellian(1.0, Vec3::ZERO, 1.0, &g).unwrap();
        let mac = compute_macro(&f).unwrap();
        assert!((mac.rho - 1.0).abs() < 1e-6);
        assert!(mac.u.norm() < 1e-9);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((mac.theta.0[i][j] - expect).abs() < 1e-6);
            }
        }
        assert!((mac.t_i - 1.0).abs() < 1e-6);
        assert!((mac.t_delta - 1.0).abs() < 1e-6);
    }

    #[test]
    fn two_maxwellian_mixture_moments() {
        // 1/2 M(+u e1, T) + 1/2 M(-u e1, T): U = 0, Theta = diag(T + u^2, T, T)
        let g = grid(2.0);
        let t = 0.8;
        let u = 0.6;
        let fa = gaussian::maxwellian(1.0, Vec3::new(u, 0.0, 0.0), t, &g).unwrap();
        let fb = gaussian::maxwellian(1.0, Vec3::new(-u, 0.0, 0.0), t, &g).unwrap();
        let mixed: Vec<f64> = fa
            .values()
            .iter()
            .zip(fb.values())
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        let f = Distribution::new(g.clone(), mixed).unwrap();
        let mac = compute_macro(&f).unwrap();
        assert!(mac.u.norm() < 1e-9, "U = {:?}", mac.u);
        assert!((mac.theta.0[0][0] - (t + u * u)).abs() < 1e-6);
        assert!((mac.theta.0[1][1] - t).abs() < 1e-6);
        assert!((mac.theta.0[2][2] - t).abs() < 1e-6);
        assert!(mac.theta.0[0][1].abs() < 1e-9);
    }

    #[test]
    fn scaling_is_homogeneous() {
        let g = grid(2.0);
        let f = gaussian::maxwellian(1.0, Vec3::new(0.3, 0.0, 0.0), 1.2, &g).unwrap();
        let mac = compute_macro(&f).unwrap();
        let scaled: Vec<f64> = f.values().iter().map(|v| 2.5 * v).collect();
        let f2 = Distribution::new(g.clone(), scaled).unwrap();
        let mac2 = compute_macro(&f2).unwrap();
        assert!((mac2.rho / mac.rho - 2.5).abs() < 1e-12);
        assert!((mac2.t_tr - mac.t_tr).abs() < 1e-12);
        assert!((mac2.t_i - mac.t_i).abs() < 1e-12);
        assert!(mac2.u.sub(&mac.u).norm() < 1e-12);
    }

    #[test]
    fn vacuum_is_rejected() {
        let g = grid(2.0);
        let zeros = vec![0.0; g.node_count()];
        let f = Distribution::new(g.clone(), zeros).unwrap();
        assert!(matches!(
            compute_macro(&f),
            Err(KineticError::VacuumState { .. })
        ));
    }

    #[test]
    fn energy_split_identity() {
        // E_tr + E_I = (3+delta)/2 rho T_delta by construction of T_delta
        let g = grid(3.0);
        let f = gaussian::maxwellian(1.3, Vec3::new(0.2, -0.1, 0.4), 0.9, &g).unwrap();
        let mac = compute_macro(&f).unwrap();
        let lhs = mac.e_delta();
        let rhs = 0.5 * (3.0 + mac.delta) * mac.rho * mac.t_delta;
        assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs());
        // trace identity
        assert!((mac.theta.trace() - 3.0 * mac.t_tr).abs() <= 1e-15 * mac.theta.trace());
    }

    #[test]
    fn galilean_shift_moves_u_only() {
        let g = grid(2.0);
        let t = 1.1;
        let f0 = gaussian::maxwellian(1.0, Vec3::ZERO, t, &g).unwrap();
        let shift = Vec3::new(0.7, -0.3, 0.2);
        let f1 = gaussian::maxwellian(1.0, shift, t, &g).unwrap();
        let m0 = compute_macro(&f0).unwrap();
        let m1 = compute_macro(&f1).unwrap();
        assert!(m1.u.sub(&shift).norm() < 1e-8);
        assert!((m1.t_tr - m0.t_tr).abs() < 1e-8);
        assert!((m1.t_i - m0.t_i).abs() < 1e-10);
        for i in 0..3 {
            for j in 0..3 {
                assert!((m1.theta.0[i][j] - m0.theta.0[i][j]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn collision_frequency_formula() {
        let mac = MacroState::from_parts(1.0, Vec3::ZERO, Mat3::scaled_identity(2.0), 1.0, 2.0)
            .unwrap();
        assert!((mac.t_delta - 1.6).abs() < 1e-15);
        let a = collision_frequency(&mac, &Params::new(0.0, 0.0, 2.0).unwrap()).unwrap();
        assert!((a - 1.6).abs() < 1e-15);
        let a = collision_frequency(&mac, &Params::new(0.5, 1.0, 2.0).unwrap()).unwrap();
        assert!((a - 1.6).abs() < 1e-15);
        // near-degenerate denominator is still accepted at nu = 0.999
        let a = collision_frequency(&mac, &Params::new(0.999, 0.0, 2.0).unwrap()).unwrap();
        assert!((a - 1.6 / 0.001).abs() < 1e-9 * a);
        // nu = 1 rejected at the parameter level
        assert!(Params::new(1.0, 0.0, 2.0).is_err());
    }

    #[test]
    fn negative_values_rejected() {
        let g = grid(2.0);
        let mut vals = vec![0.0; g.node_count()];
        vals[3] = -1e-3;
        assert!(matches!(
            Distribution::new(g.clone(), vals),
            Err(KineticError::NegativeValue { index: 3, .. })
        ));
    }
}
