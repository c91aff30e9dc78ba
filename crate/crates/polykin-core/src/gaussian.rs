//! The corrected temperature tensor, relaxation temperature, and the
//! polyatomic Gaussian relaxation target.

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::error::{KineticError, Result};
use crate::linalg::{jacobi_eigen, Mat3, Vec3};
use crate::math;
use crate::moments::{Distribution, MacroState};
use crate::quadrature::Grid;

/// Relaxation parameters (nu, theta) and the degree of freedom delta.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Params {
    pub nu: f64,
    pub theta: f64,
    pub delta: f64,
}

impl Params {
    /// Admissible ranges: -1/2 < nu < 1, 0 <= theta <= 1, delta > 0.
    pub fn new(nu: f64, theta: f64, delta: f64) -> Result<Self> {
        if !nu.is_finite() || nu <= -0.5 || nu >= 1.0 {
            return Err(KineticError::InvalidParams("nu must lie in (-1/2, 1)"));
        }
        if !theta.is_finite() || !(0.0..=1.0).contains(&theta) {
            return Err(KineticError::InvalidParams("theta must lie in [0, 1]"));
        }
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(KineticError::InvalidParams("delta must be positive"));
        }
        Ok(Params { nu, theta, delta })
    }

    /// The positivity theorem assumes 0 <= nu < 1 (with theta in [0, 1]).
    /// Outside this regime results are reported but never asserted.
    #[inline]
    pub fn theorem_regime(&self) -> bool {
        self.nu >= 0.0
    }
}

/// Convex blend a + t (b - a), with the endpoints handled exactly so that
/// t = 0 returns `a` and t = 1 returns `b` bit-for-bit. The equality cases
/// of the entropy bounds (nu = 0, isotropic stress, theta endpoints) then
/// hold exactly in floating point as well.
#[inline]
pub(crate) fn blend(a: f64, b: f64, t: f64) -> f64 {
    if t == 0.0 {
        a
    } else if t == 1.0 {
        b
    } else {
        a + t * (b - a)
    }
}

/// Normalizing factor Lambda_delta = 1 / int_0^inf e^{-I^(2/delta)} dI
/// = 1 / Gamma(delta/2 + 1).
pub fn lambda_delta(delta: f64) -> Result<f64> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(KineticError::InvalidParams("delta must be positive"));
    }
    Ok(1.0 / math::gamma(0.5 * delta + 1.0))
}

/// The same normalizing factor from the defining integral on a grid's energy
/// rule; cross-checks [`lambda_delta`] independently of the Gamma function.
pub fn lambda_delta_quadrature(grid: &Grid) -> f64 {
    let mut acc = math::NeumaierSum::new();
    for (&eps, &u) in grid.eps_nodes().iter().zip(grid.eps_weights()) {
        acc.add(u * math::exp(-eps));
    }
    1.0 / acc.total()
}

/// The corrected temperature tensor with its eigen-decomposition in the
/// frame that simultaneously diagonalizes the stress tensor.
#[derive(Debug, Clone, Copy)]
pub struct CorrectedTensor {
    /// T_{nu,theta} = (1-theta){(1-nu) T_tr Id + nu Theta} + theta T_delta Id
    pub matrix: Mat3,
    /// A_i = (1-theta){(1-nu) T_tr + nu Theta_i} + theta T_delta
    pub eigenvalues: [f64; 3],
    /// Eigenvalues of the stress tensor, paired index-wise with `eigenvalues`.
    pub theta_eigenvalues: [f64; 3],
    /// Orthogonal frame diagonalizing both Theta and the corrected tensor.
    pub frame: Mat3,
    pub det: f64,
    pub inverse: Mat3,
}

/// SPD acceptance: every eigenvalue must exceed 1e-12 T_delta. Separates a
/// genuine nu < 0 breakdown from rounding noise.
const SPD_TOL_FACTOR: f64 = 1e-12;

pub fn corrected_tensor(mac: &MacroState, params: &Params) -> Result<CorrectedTensor> {
    let (theta_eigs, frame) = jacobi_eigen(&mac.theta);
    let t_tr = mac.t_tr;
    let t_delta = mac.t_delta;
    let nu = params.nu;
    let th = params.theta;

    let mut a = [0.0; 3];
    for i in 0..3 {
        let inner = blend(t_tr, theta_eigs[i], nu);
        a[i] = blend(inner, t_delta, th);
    }
    let min_eig = a[0].min(a[1]).min(a[2]);
    if min_eig <= SPD_TOL_FACTOR * t_delta {
        return Err(KineticError::NotPositiveDefinite { min_eigenvalue: min_eig });
    }

    // assemble the matrix by the same blend so it shares the eigenvalues
    let inner_m = Mat3::scaled_identity(t_tr).add(&mac.theta.sub(&Mat3::scaled_identity(t_tr)).scale(nu));
    let matrix = if th == 0.0 {
        inner_m
    } else if th == 1.0 {
        Mat3::scaled_identity(t_delta)
    } else {
        inner_m.add(&Mat3::scaled_identity(t_delta).sub(&inner_m).scale(th))
    };

    let det = a[0] * a[1] * a[2];
    // inverse through the shared frame: P diag(1/A_i) P^T
    let inv_diag = Mat3::diag(1.0 / a[0], 1.0 / a[1], 1.0 / a[2]);
    let inverse = frame.mul(&inv_diag).mul(&frame.transpose());

    Ok(CorrectedTensor {
        matrix,
        eigenvalues: a,
        theta_eigenvalues: theta_eigs,
        frame,
        det,
        inverse,
    })
}

/// T_theta = (1-theta) T_I + theta T_delta.
pub fn relaxation_temperature(mac: &MacroState, params: &Params) -> f64 {
    blend(mac.t_i, mac.t_delta, params.theta)
}

/// Pointwise evaluation of a Gaussian
///   C exp(-1/2 (v-U)^T S^{-1} (v-U) - eps / T)
/// on the grid, factored into a per-velocity-node and a per-energy-node
/// exponential so the node loop is multiplication only.
fn gaussian_values(
    grid: &Grid,
    rho: f64,
    u: &Vec3,
    inverse: &Mat3,
    det: f64,
    t_internal: f64,
    delta: f64,
) -> Result<Vec<f64>> {
    if !(det > 0.0) || !(t_internal > 0.0) {
        return Err(KineticError::InvalidParams("gaussian needs positive det and temperature"));
    }
    let lam = lambda_delta(delta)?;
    let two_pi = 2.0 * math::PI;
    let prefactor =
        rho * lam / (math::sqrt(two_pi * two_pi * two_pi * det) * math::powf(t_internal, 0.5 * delta));
    if !prefactor.is_finite() {
        return Err(KineticError::NonFinite("gaussian prefactor"));
    }

    let energy_factor: Vec<f64> = grid
        .eps_nodes()
        .iter()
        .map(|&e| math::exp(-e / t_internal))
        .collect();

    let n = grid.axis_len();
    let mut values = Vec::with_capacity(grid.node_count());
    for ix in 0..n {
        for iy in 0..n {
            for iz in 0..n {
                let d = grid.velocity(ix, iy, iz).sub(u);
                let q = 0.5 * inverse.quadform(&d);
                let v_factor = prefactor * math::exp(-q);
                values.extend(energy_factor.iter().map(|ef| v_factor * ef));
            }
        }
    }
    Ok(values)
}

/// The polyatomic Gaussian M_{nu,theta}(f) for the given macroscopic state.
pub fn build_gaussian(mac: &MacroState, params: &Params, grid: &Arc<Grid>) -> Result<Distribution> {
    let ct = corrected_tensor(mac, params)?;
    let t_theta = relaxation_temperature(mac, params);
    if !(t_theta > 0.0) {
        return Err(KineticError::InvalidParams("relaxation temperature not positive"));
    }
    let values = gaussian_values(grid, mac.rho, &mac.u, &ct.inverse, ct.det, t_theta, grid.delta())?;
    Distribution::from_raw(grid.clone(), values)
}

/// Isotropic equilibrium with velocity covariance T Id and internal
/// temperature T; the theta = 1 fixed point and the standard test fixture.
pub fn maxwellian(rho: f64, u: Vec3, t: f64, grid: &Arc<Grid>) -> Result<Distribution> {
    if !(rho > 0.0) || !(t > 0.0) {
        return Err(KineticError::InvalidParams("maxwellian needs rho > 0, t > 0"));
    }
    let inv = Mat3::scaled_identity(1.0 / t);
    let values = gaussian_values(grid, rho, &u, &inv, t * t * t, t, grid.delta())?;
    Distribution::from_raw(grid.clone(), values)
}

/// Anisotropic Gaussian with prescribed velocity covariance and internal
/// temperature; realizes sampled macrostates as grid distributions.
pub fn gaussian_from_cov(
    rho: f64,
    u: Vec3,
    cov: &Mat3,
    t_internal: f64,
    grid: &Arc<Grid>,
) -> Result<Distribution> {
    if !(rho > 0.0) {
        return Err(KineticError::InvalidParams("rho must be positive"));
    }
    let (eigs, frame) = jacobi_eigen(cov);
    let min_eig = eigs[0].min(eigs[1]).min(eigs[2]);
    if min_eig <= 0.0 {
        return Err(KineticError::NotPositiveDefinite { min_eigenvalue: min_eig });
    }
    let inv_diag = Mat3::diag(1.0 / eigs[0], 1.0 / eigs[1], 1.0 / eigs[2]);
    let inverse = frame.mul(&inv_diag).mul(&frame.transpose());
    let det = eigs[0] * eigs[1] * eigs[2];
    let values = gaussian_values(grid, rho, &u, &inverse, det, t_internal, grid.delta())?;
    Distribution::from_raw(grid.clone(), values)
}
