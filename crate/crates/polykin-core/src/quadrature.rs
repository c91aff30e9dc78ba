//! Discretization of (v, I) in R^3 x R+ and numerical integration against it.
//! Every integral in the crate goes through [`Grid::integrate`] or a fused
//! sweep over the same nodes and weights, so this module is the single source
//! of truth for the discrete measure dv dI.
//!
//! Velocity space is a uniform midpoint lattice on [-L, L]^3 with an even
//! point count per axis, so nodes come in exact +/- pairs and odd moments
//! cancel to machine precision. The internal-energy integral is taken in the
//! variable eps = I^(2/delta); the substitution Jacobian (delta/2) eps^(delta/2 - 1)
//! is folded into the node weights. The eps nodes and weights are a
//! Gauss-Jacobi rule with weight function eps^(delta/2 - 1) on [0, eps_max],
//! built by Golub-Welsch, which integrates the smooth Gaussian factors to
//! near machine accuracy for any delta > 0 and never places a node at eps = 0.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{KineticError, Result};
use crate::linalg::{tridiag_eigen_first_row, Vec3};
use crate::math::{self, NeumaierSum};

/// Build parameters for a [`Grid`].
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GridSpec {
    /// Half-width L of the velocity box (velocity units).
    pub v_extent: f64,
    /// Points per velocity axis; even, at least 8.
    pub v_points_per_axis: usize,
    /// Cap on the energy variable eps = I^(2/delta).
    pub energy_variable_max: f64,
    /// Number of internal-energy nodes; at least 8.
    pub energy_points: usize,
    /// Non-translational degrees of freedom, delta > 0.
    pub delta: f64,
}

impl GridSpec {
    pub fn new(
        v_extent: f64,
        v_points_per_axis: usize,
        energy_variable_max: f64,
        energy_points: usize,
        delta: f64,
    ) -> Result<Self> {
        let spec = GridSpec {
            v_extent,
            v_points_per_axis,
            energy_variable_max,
            energy_points,
            delta,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Default extents for fields whose temperatures stay at or below
    /// `t_max` and whose bulk speed stays at or below `u_max`:
    /// L = 6.5 sqrt(t_max) + u_max keeps truncated Gaussian mass below 1e-10,
    /// eps_max = 30 t_max keeps the energy tail below 1e-13.
    pub fn for_scales(t_max: f64, u_max: f64, delta: f64) -> Result<Self> {
        if !(t_max > 0.0) || !u_max.is_finite() || u_max < 0.0 {
            return Err(KineticError::InvalidGrid("scales must be positive and finite"));
        }
        Self::new(6.5 * math::sqrt(t_max) + u_max, 32, 30.0 * t_max, 32, delta)
    }

    pub fn with_points(mut self, v_points_per_axis: usize, energy_points: usize) -> Result<Self> {
        self.v_points_per_axis = v_points_per_axis;
        self.energy_points = energy_points;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v_extent > 0.0) || !self.v_extent.is_finite() {
            return Err(KineticError::InvalidGrid("v_extent must be positive and finite"));
        }
        if self.v_points_per_axis < 8 {
            return Err(KineticError::InvalidGrid("v_points_per_axis must be at least 8"));
        }
        if self.v_points_per_axis % 2 != 0 {
            return Err(KineticError::InvalidGrid("v_points_per_axis must be even"));
        }
        if !(self.energy_variable_max > 0.0) || !self.energy_variable_max.is_finite() {
            return Err(KineticError::InvalidGrid("energy_variable_max must be positive"));
        }
        if self.energy_points < 8 {
            return Err(KineticError::InvalidGrid("energy_points must be at least 8"));
        }
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(KineticError::InvalidGrid("delta must be positive"));
        }
        Ok(())
    }

    /// Total number of (v, I) nodes.
    pub fn node_count(&self) -> usize {
        self.v_points_per_axis
            * self.v_points_per_axis
            * self.v_points_per_axis
            * self.energy_points
    }
}

/// Gauss-Jacobi nodes and weights for weight (1+x)^beta on [-1, 1]
/// (alpha = 0), via the Golub-Welsch recurrence. Nodes ascend.
fn gauss_jacobi(n: usize, beta: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    debug_assert!(beta > -1.0);
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    d[0] = beta / (beta + 2.0);
    for k in 1..n {
        let kf = k as f64;
        let den = (2.0 * kf + beta) * (2.0 * kf + beta + 2.0);
        d[k] = beta * beta / den;
        let num = 2.0 * kf * (kf + beta) / (2.0 * kf + beta);
        e[k - 1] = num / math::sqrt((2.0 * kf + beta) * (2.0 * kf + beta) - 1.0);
    }
    let mut q = vec![0.0; n];
    q[0] = 1.0;
    tridiag_eigen_first_row(&mut d, &mut e, &mut q)
        .map_err(KineticError::InvalidGrid)?;

    let mu0 = math::powf(2.0, beta + 1.0) / (beta + 1.0);
    let mut pairs: Vec<(f64, f64)> = d
        .iter()
        .zip(q.iter())
        .map(|(&x, &q0)| (x, mu0 * q0 * q0))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(pairs.into_iter().unzip())
}

/// Truncated velocity lattice times internal-energy nodes with quadrature
/// weights. Immutable after construction and safe to share across workers.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    spec: GridSpec,
    /// Velocity nodes along one axis, exactly symmetric about zero.
    axis: Vec<f64>,
    /// Velocity cell volume h^3; every velocity node carries this weight.
    v_weight: f64,
    /// Internal-energy nodes I_m.
    i_nodes: Vec<f64>,
    /// Cached eps_m = I_m^(2/delta).
    eps_nodes: Vec<f64>,
    /// Energy weights u_m representing the dI integral.
    eps_weights: Vec<f64>,
}

impl Grid {
    pub fn build(spec: GridSpec) -> Result<Self> {
        spec.validate()?;
        let n = spec.v_points_per_axis;
        let half = n / 2;
        let h = 2.0 * spec.v_extent / n as f64;

        // mirror construction keeps v -> -v symmetry bit-exact
        let mut axis = vec![0.0; n];
        for j in 0..half {
            let p = (j as f64 + 0.5) * h;
            axis[half + j] = p;
            axis[half - 1 - j] = -p;
        }

        let delta = spec.delta;
        let beta = 0.5 * delta - 1.0;
        let (x, w) = gauss_jacobi(spec.energy_points, beta)?;
        let emax = spec.energy_variable_max;
        // int_0^emax g(eps) (delta/2) eps^beta deps
        //   = (delta/2) (emax/2)^(beta+1) int_-1^1 g(emax (1+x)/2) (1+x)^beta dx
        let scale = 0.5 * delta * math::powf(0.5 * emax, beta + 1.0);
        let mut eps_nodes = Vec::with_capacity(x.len());
        let mut eps_weights = Vec::with_capacity(x.len());
        let mut i_nodes = Vec::with_capacity(x.len());
        for (xi, wi) in x.iter().zip(w.iter()) {
            let eps = 0.5 * emax * (1.0 + xi);
            let u = scale * wi;
            if !(eps > 0.0) || !(u > 0.0) || !eps.is_finite() || !u.is_finite() {
                return Err(KineticError::InvalidGrid("energy rule produced a bad node"));
            }
            eps_nodes.push(eps);
            eps_weights.push(u);
            i_nodes.push(math::powf(eps, 0.5 * delta));
        }

        Ok(Grid {
            spec,
            axis,
            v_weight: h * h * h,
            i_nodes,
            eps_nodes,
            eps_weights,
        })
    }

    #[inline]
    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    #[inline]
    pub fn delta(&self) -> f64 {
        self.spec.delta
    }

    #[inline]
    pub fn axis(&self) -> &[f64] {
        &self.axis
    }

    #[inline]
    pub fn axis_len(&self) -> usize {
        self.axis.len()
    }

    #[inline]
    pub fn energy_len(&self) -> usize {
        self.eps_nodes.len()
    }

    #[inline]
    pub fn eps_nodes(&self) -> &[f64] {
        &self.eps_nodes
    }

    #[inline]
    pub fn i_nodes(&self) -> &[f64] {
        &self.i_nodes
    }

    #[inline]
    pub fn eps_weights(&self) -> &[f64] {
        &self.eps_weights
    }

    /// Uniform velocity-node weight h^3.
    #[inline]
    pub fn v_weight(&self) -> f64 {
        self.v_weight
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.axis.len() * self.axis.len() * self.axis.len() * self.eps_nodes.len()
    }

    /// Flat index of node (ix, iy, iz, m); energy index is fastest.
    #[inline]
    pub fn index(&self, ix: usize, iy: usize, iz: usize, m: usize) -> usize {
        ((ix * self.axis.len() + iy) * self.axis.len() + iz) * self.eps_nodes.len() + m
    }

    #[inline]
    pub fn velocity(&self, ix: usize, iy: usize, iz: usize) -> Vec3 {
        Vec3([self.axis[ix], self.axis[iy], self.axis[iz]])
    }

    pub fn check_shape(&self, values: &[f64]) -> Result<()> {
        if values.len() != self.node_count() {
            return Err(KineticError::ShapeMismatch {
                expected: self.node_count(),
                got: values.len(),
            });
        }
        Ok(())
    }

    /// Sum values[k, m] * w_k * u_m in a fixed deterministic order with
    /// compensated accumulation.
    pub fn integrate(&self, values: &[f64]) -> Result<f64> {
        self.check_shape(values)?;
        let m = self.eps_nodes.len();
        let mut acc = NeumaierSum::new();
        for chunk in values.chunks_exact(m) {
            for (val, u) in chunk.iter().zip(self.eps_weights.iter()) {
                acc.add(val * u);
            }
        }
        Ok(acc.total() * self.v_weight)
    }

    /// Relative quadrature errors measured on a reference Maxwellian with
    /// temperature `t_ref`: an a-posteriori bound on how well this grid
    /// represents the moments that the relaxation operator exchanges.
    pub fn diagnostics(&self, t_ref: f64) -> GridDiagnostics {
        let n = self.axis.len();
        // 1D Gaussian sums (mass / second moment), exponentially accurate
        let mut m0 = NeumaierSum::new();
        let mut m2 = NeumaierSum::new();
        let h = 2.0 * self.spec.v_extent / n as f64;
        let norm = 1.0 / math::sqrt(2.0 * math::PI * t_ref);
        for &v in &self.axis {
            let g = norm * math::exp(-0.5 * v * v / t_ref);
            m0.add(g * h);
            m2.add(g * v * v * h);
        }
        let mass_1d = m0.total();
        let mass_err = (mass_1d * mass_1d * mass_1d - 1.0).abs();
        let var_err = (m2.total() / t_ref - 1.0).abs();

        // energy rule against the exact Gamma integrals
        let delta = self.spec.delta;
        let mut e0 = NeumaierSum::new();
        let mut e1 = NeumaierSum::new();
        for (&eps, &u) in self.eps_nodes.iter().zip(self.eps_weights.iter()) {
            let g = math::exp(-eps / t_ref);
            e0.add(u * g);
            e1.add(u * g * eps);
        }
        let gamma_half = math::gamma(0.5 * delta);
        let exact0 = 0.5 * delta * gamma_half * math::powf(t_ref, 0.5 * delta);
        let exact1 = 0.5 * delta * (0.5 * delta) * gamma_half * math::powf(t_ref, 0.5 * delta + 1.0);
        let eps_mass_err = (e0.total() / exact0 - 1.0).abs();
        let eps_energy_err = (e1.total() / exact1 - 1.0).abs();

        // normalizing-factor cross check: the discrete int e^{-I^(2/delta)} dI
        // against its exact value Gamma(delta/2 + 1)
        let mut l = NeumaierSum::new();
        for (&eps, &u) in self.eps_nodes.iter().zip(self.eps_weights.iter()) {
            l.add(u * math::exp(-eps));
        }
        let lambda_quad_err = (l.total() / math::gamma(0.5 * delta + 1.0) - 1.0).abs();

        GridDiagnostics {
            mass_rel_err: mass_err,
            var_rel_err: var_err,
            eps_mass_rel_err: eps_mass_err,
            eps_energy_rel_err: eps_energy_err,
            lambda_quad_err,
            moment_rel_err: mass_err.max(var_err).max(eps_mass_err).max(eps_energy_err),
        }
    }
}

/// Measured quadrature truncation errors for a grid, relative to the analytic
/// moments of a probe Maxwellian.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GridDiagnostics {
    pub mass_rel_err: f64,
    pub var_rel_err: f64,
    pub eps_mass_rel_err: f64,
    pub eps_energy_rel_err: f64,
    pub lambda_quad_err: f64,
    /// max of the above moment errors; the per-step moment transfer bound
    pub moment_rel_err: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_spec() -> GridSpec {
        GridSpec::new(6.0, 32, 30.0, 32, 2.0).unwrap()
    }

    #[test]
    fn spec_validation_rejects_bad_inputs() {
        assert!(GridSpec::new(-1.0, 32, 30.0, 32, 2.0).is_err());
        assert!(GridSpec::new(6.0, 6, 30.0, 32, 2.0).is_err());
        assert!(GridSpec::new(6.0, 31, 30.0, 32, 2.0).is_err());
        assert!(GridSpec::new(6.0, 32, 0.0, 32, 2.0).is_err());
        assert!(GridSpec::new(6.0, 32, 30.0, 4, 2.0).is_err());
        assert!(GridSpec::new(6.0, 32, 30.0, 32, 0.0).is_err());
    }

    #[test]
    fn velocity_weights_sum_to_box_volume() {
        // (2L)^3 with L = 6 and 16 points per axis
        let grid = Grid::build(GridSpec::new(6.0, 16, 30.0, 8, 2.0).unwrap()).unwrap();
        let n = grid.axis_len();
        let total = grid.v_weight() * (n * n * n) as f64;
        assert_eq!(total, 1728.0);
    }

    #[test]
    fn velocity_nodes_exactly_symmetric() {
        let grid = Grid::build(default_spec()).unwrap();
        let axis = grid.axis();
        let n = axis.len();
        for j in 0..n {
            assert_eq!(axis[j], -axis[n - 1 - j]);
        }
    }

    #[test]
    fn gauss_jacobi_reduces_to_legendre() {
        // beta = 0: classic Gauss-Legendre; check degree-11 exactness with 6 nodes
        let (x, w) = gauss_jacobi(6, 0.0).unwrap();
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
        let m10: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(10)).sum();
        assert!((m10 - 2.0 / 11.0).abs() < 1e-14);
    }

    #[test]
    fn gauss_jacobi_singular_weight_matches_analytic() {
        // int_-1^1 (1+x)^(-1/2) x^2 dx = 14 sqrt(2) / 15
        let (x, w) = gauss_jacobi(6, -0.5).unwrap();
        let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
        let exact = 14.0 * 2.0f64.sqrt() / 15.0;
        assert!((got - exact).abs() < 1e-14, "{got} vs {exact}");
    }

    #[test]
    fn energy_rule_delta2_normalization() {
        // oracle: int_0^inf e^-I dI = 1
        let grid = Grid::build(default_spec()).unwrap();
        let total: f64 = grid
            .eps_nodes()
            .iter()
            .zip(grid.eps_weights())
            .map(|(&e, &u)| u * (-e).exp())
            .sum();
        assert!((total - 1.0).abs() < 1e-6, "delta=2 mass {total}");
    }

    #[test]
    fn energy_rule_delta4_normalization() {
        // oracle by substitution u = sqrt(I): int_0^inf e^-sqrt(I) dI = 2
        let grid = Grid::build(GridSpec::new(6.0, 8, 40.0, 32, 4.0).unwrap()).unwrap();
        let total: f64 = grid
            .eps_nodes()
            .iter()
            .zip(grid.eps_weights())
            .map(|(&e, &u)| u * (-e).exp())
            .sum();
        assert!((total - 2.0).abs() < 1e-6, "delta=4 mass {total}");
    }

    #[test]
    fn integrate_zero_and_shape_checks() {
        let grid = Grid::build(GridSpec::new(3.0, 8, 10.0, 8, 2.0).unwrap()).unwrap();
        let zeros = vec![0.0; grid.node_count()];
        assert_eq!(grid.integrate(&zeros).unwrap(), 0.0);
        let short = vec![0.0; grid.node_count() - 1];
        assert!(matches!(
            grid.integrate(&short),
            Err(KineticError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn integrate_energy_truncation_stated() {
        // values = e^{-eps}, constant in v: integral = (2L)^3 * (1 - e^{-eps_max})
        // up to rule error; the truncated tail e^{-30} ~ 9.4e-14 is the
        // irreducible part.
        let spec = GridSpec::new(2.0, 8, 30.0, 32, 2.0).unwrap();
        let grid = Grid::build(spec).unwrap();
        let m = grid.energy_len();
        let mut values = vec![0.0; grid.node_count()];
        for chunk in values.chunks_exact_mut(m) {
            for (x, &e) in chunk.iter_mut().zip(grid.eps_nodes()) {
                *x = (-e).exp();
            }
        }
        let got = grid.integrate(&values).unwrap();
        let box_volume = 64.0;
        assert!((got - box_volume).abs() < box_volume * 1e-10);
    }

    #[test]
    fn integrate_is_linear() {
        let grid = Grid::build(GridSpec::new(3.0, 8, 10.0, 8, 2.0).unwrap()).unwrap();
        let n = grid.node_count();
        let a: Vec<f64> = (0..n).map(|i| ((i * 37 + 11) % 101) as f64 / 101.0).collect();
        let b: Vec<f64> = (0..n).map(|i| ((i * 53 + 7) % 89) as f64 / 89.0).collect();
        let combo: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 2.5 * x - 0.75 * y).collect();
        let lhs = grid.integrate(&combo).unwrap();
        let rhs = 2.5 * grid.integrate(&a).unwrap() - 0.75 * grid.integrate(&b).unwrap();
        assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
    }

    #[test]
    fn odd_moment_vanishes_by_symmetry() {
        // v1 * (even function of v) integrates to exactly zero node-pair-wise
        let grid = Grid::build(GridSpec::new(4.0, 16, 10.0, 8, 2.0).unwrap()).unwrap();
        let n = grid.axis_len();
        let m = grid.energy_len();
        let mut values = vec![0.0; grid.node_count()];
        for ix in 0..n {
            for iy in 0..n {
                for iz in 0..n {
                    let v = grid.velocity(ix, iy, iz);
                    let even = (-0.5 * v.norm_sq()).exp();
                    for mm in 0..m {
                        values[grid.index(ix, iy, iz, mm)] = v.0[0] * even;
                    }
                }
            }
        }
        let got = grid.integrate(&values).unwrap();
        assert!(got.abs() < 1e-13, "odd moment {got}");
    }

    #[test]
    fn refinement_improves_coarse_integrals() {
        // Gaussian at T = 0.15 is underresolved at 8 points/axis; halving h
        // must reduce the aliasing error until truncation takes over.
        let t = 0.15;
        let errs: Vec<f64> = [8usize, 16, 32]
            .iter()
            .map(|&n| {
                let grid =
                    Grid::build(GridSpec::new(4.0, n, 12.0, 8, 2.0).unwrap()).unwrap();
                let mut acc = 0.0;
                for &v in grid.axis() {
                    acc += (-0.5 * v * v / t).exp();
                }
                let h = 2.0 * 4.0 / n as f64;
                (acc * h / (2.0 * core::f64::consts::PI * t).sqrt() - 1.0).abs()
            })
            .collect();
        assert!(errs[1] < 0.1 * errs[0], "{errs:?}");
        assert!(errs[2] < errs[1], "{errs:?}");
    }

    #[test]
    fn diagnostics_report_tiny_errors_on_default_grid() {
        let grid = Grid::build(default_spec()).unwrap();
        let d = grid.diagnostics(1.0);
        assert!(d.moment_rel_err < 1e-7, "{d:?}");
        assert!(d.lambda_quad_err < 1e-10, "{d:?}");
    }
}
