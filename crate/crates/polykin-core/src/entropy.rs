//! The entropy functional H, the entropy production D and its positive
//! decomposition into a relative-entropy part plus the remainder R, the
//! closed form of R with its eigenvalue bounds, and the pointwise
//! equi-integrability inequality.

use alloc::vec::Vec;

use crate::error::{KineticError, Result};
use crate::gaussian::{blend, build_gaussian, corrected_tensor, relaxation_temperature, Params};
use crate::linalg::jacobi_eigen;
use crate::math::{self, NeumaierSum};
use crate::moments::{compute_macro, Distribution, MacroState};

/// Values below this floor are treated as zero inside logarithms; Gaussian
/// tails underflow long before reaching it.
pub const LOG_FLOOR: f64 = 1e-300;

/// Tolerance for closed-form (pure arithmetic) assertions.
pub const CLOSED_FORM_TOL: f64 = 1e-12;

#[inline]
fn ln_floored(x: f64) -> f64 {
    math::ln(x.max(LOG_FLOOR))
}

/// H(f) = integrate(f ln f), with x ln x := 0 below the floor.
/// Accumulation is plain within one energy row and compensated across rows,
/// keeping the fixed deterministic order of [`Grid::integrate`].
pub fn boltzmann_entropy(f: &Distribution) -> Result<f64> {
    let grid = f.grid();
    let m = grid.energy_len();
    let mut acc = NeumaierSum::new();
    for chunk in f.values().chunks_exact(m) {
        let mut row = 0.0;
        for (&val, &u) in chunk.iter().zip(grid.eps_weights()) {
            if val > LOG_FLOOR {
                row += val * math::ln(val) * u;
            }
        }
        acc.add(row);
    }
    Ok(acc.total() * grid.v_weight())
}

/// D = -integrate((M - f) ln f) and the nonnegative relative part
/// integrate((M - f)(ln M - ln f)), in one sweep.
///
/// Nodes where both operands sit below the floor contribute nothing; where
/// exactly one does, the floored value enters the logarithm (the difference
/// factor M - f is kept exact).
pub fn entropy_production(f: &Distribution, mgauss: &Distribution) -> Result<(f64, f64)> {
    if !f.same_grid(mgauss) {
        return Err(KineticError::ShapeMismatch {
            expected: f.values().len(),
            got: mgauss.values().len(),
        });
    }
    let grid = f.grid();
    let m = grid.energy_len();
    let mut d_acc = NeumaierSum::new();
    let mut rel_acc = NeumaierSum::new();
    for (fc, mc) in f
        .values()
        .chunks_exact(m)
        .zip(mgauss.values().chunks_exact(m))
    {
        let mut d_row = 0.0;
        let mut rel_row = 0.0;
        for ((&fv, &mv), &u) in fc.iter().zip(mc.iter()).zip(grid.eps_weights()) {
            if fv <= LOG_FLOOR && mv <= LOG_FLOOR {
                continue;
            }
            let diff = mv - fv;
            let ln_f = ln_floored(fv);
            let ln_m = ln_floored(mv);
            d_row -= diff * ln_f * u;
            rel_row += diff * (ln_m - ln_f) * u;
        }
        d_acc.add(d_row);
        rel_acc.add(rel_row);
    }
    Ok((
        d_acc.total() * grid.v_weight(),
        rel_acc.total() * grid.v_weight(),
    ))
}

/// Direct quadrature of the defining integral of the remainder:
/// R = integrate((M - f)(1/2 (v-U)^T T^{-1} (v-U) + eps / T_theta)).
pub fn remainder_quadrature(
    f: &Distribution,
    mgauss: &Distribution,
    mac: &MacroState,
    params: &Params,
) -> Result<f64> {
    if !f.same_grid(mgauss) {
        return Err(KineticError::ShapeMismatch {
            expected: f.values().len(),
            got: mgauss.values().len(),
        });
    }
    let ct = corrected_tensor(mac, params)?;
    let t_theta = relaxation_temperature(mac, params);
    if !(t_theta > 0.0) {
        return Err(KineticError::InvalidParams("relaxation temperature not positive"));
    }
    let grid = f.grid();
    let n = grid.axis_len();
    let m = grid.energy_len();
    let inv_t_theta = 1.0 / t_theta;
    let mut acc = NeumaierSum::new();
    let mut fc = f.values().chunks_exact(m);
    let mut mc = mgauss.values().chunks_exact(m);
    for ix in 0..n {
        for iy in 0..n {
            for iz in 0..n {
                let d = grid.velocity(ix, iy, iz).sub(&mac.u);
                let q = 0.5 * ct.inverse.quadform(&d);
                let fchunk = fc.next().expect("shape checked");
                let mchunk = mc.next().expect("shape checked");
                for (((&fv, &mv), &u), &eps) in fchunk
                    .iter()
                    .zip(mchunk.iter())
                    .zip(grid.eps_weights())
                    .zip(grid.eps_nodes())
                {
                    acc.add((mv - fv) * (q + eps * inv_t_theta) * u);
                }
            }
        }
    }
    Ok(acc.total() * grid.v_weight())
}

/// F_theta = sum_i Theta_i / A_i, plus the eigenvalue pairs it came from.
///
/// At nu = 0 every A_i collapses to the same blend of T_tr and T_delta and
/// F_theta is computed as 3 (T_tr / A); this keeps the nu = 0 equality
/// cases of the bounds exact in floating point.
fn f_theta_eigs(mac: &MacroState, params: &Params) -> Result<(f64, [f64; 3], [f64; 3])> {
    let t_tr = mac.t_tr;
    let t_delta = mac.t_delta;
    if params.nu == 0.0 {
        let a = blend(t_tr, t_delta, params.theta);
        if a <= 1e-12 * t_delta {
            return Err(KineticError::NotPositiveDefinite { min_eigenvalue: a });
        }
        return Ok((3.0 * (t_tr / a), [t_tr; 3], [a; 3]));
    }
    let (theta_eigs, _) = jacobi_eigen(&mac.theta);
    let mut a = [0.0; 3];
    let mut f = 0.0;
    for i in 0..3 {
        let inner = blend(t_tr, theta_eigs[i], params.nu);
        a[i] = blend(inner, t_delta, params.theta);
        if a[i] <= 1e-12 * t_delta {
            return Err(KineticError::NotPositiveDefinite { min_eigenvalue: a[i] });
        }
        f += theta_eigs[i] / a[i];
    }
    Ok((f, theta_eigs, a))
}

/// Closed form of the remainder:
/// R = rho/2 {3 + delta - (F_theta + delta T_I / T_theta)}.
/// Errors with `NotPositiveDefinite` when some A_i degenerates (possible
/// only for nu < 0); callers in probe mode report R as undefined then.
pub fn remainder_closed_form(mac: &MacroState, params: &Params) -> Result<(f64, f64)> {
    let (f_theta, _, _) = f_theta_eigs(mac, params)?;
    let t_theta = relaxation_temperature(mac, params);
    let lhs = f_theta + mac.delta * (mac.t_i / t_theta);
    let r = 0.5 * mac.rho * ((3.0 + mac.delta) - lhs);
    Ok((r, f_theta))
}

/// The eigenvalue-mean bound F_theta <= 3 T_tr / ((1-theta) T_tr + theta T_delta).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FThetaBound {
    pub f_theta: f64,
    pub bound: f64,
    /// F_theta <= bound + 1e-12; meaningful only when `asserted`.
    pub satisfied: bool,
    /// True in the theorem regime (nu >= 0); outside it the bound is
    /// reported but carries no claim.
    pub asserted: bool,
}

pub fn f_theta_bound(mac: &MacroState, params: &Params) -> Result<FThetaBound> {
    let (f_theta, _, _) = f_theta_eigs(mac, params)?;
    let den = blend(mac.t_tr, mac.t_delta, params.theta);
    let bound = 3.0 * (mac.t_tr / den);
    Ok(FThetaBound {
        f_theta,
        bound,
        satisfied: f_theta <= bound + CLOSED_FORM_TOL,
        asserted: params.theorem_regime(),
    })
}

/// The convexity curve F(t) = 3A/((1-t)A + tK) + delta B/((1-t)B + tK)
/// with K = (3A + delta B)/(3 + delta), evaluated on the given t-nodes.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConvexityCurve {
    pub t: Vec<f64>,
    pub values: Vec<f64>,
    pub max_value: f64,
    /// F(t) <= 3 + delta + 1e-12 at every node.
    pub bounded: bool,
    /// Centered second differences >= -1e-10 at interior nodes.
    pub convex: bool,
}

pub fn convexity_curve(a: f64, b: f64, delta: f64, t_nodes: &[f64]) -> Result<ConvexityCurve> {
    if !(a >= 0.0) || !(b >= 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(KineticError::InvalidParams("A and B must be nonnegative"));
    }
    if a == 0.0 && b == 0.0 {
        return Err(KineticError::Degenerate("A = B = 0"));
    }
    if !(delta > 0.0) {
        return Err(KineticError::InvalidParams("delta must be positive"));
    }
    let k = (3.0 * a + delta * b) / (3.0 + delta);
    let mut values = Vec::with_capacity(t_nodes.len());
    for &t in t_nodes {
        if !(0.0..=1.0).contains(&t) {
            return Err(KineticError::InvalidParams("t nodes must lie in [0, 1]"));
        }
        // term(x) = coeff * x / blend(x, K, t), with 0/den := 0 for x = 0
        let term = |coeff: f64, x: f64| {
            if x == 0.0 {
                0.0
            } else {
                coeff * (x / blend(x, k, t))
            }
        };
        values.push(term(3.0, a) + term(delta, b));
    }
    let max_value = values.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    let bound = 3.0 + delta;
    let bounded = values.iter().all(|&x| x <= bound + CLOSED_FORM_TOL);
    let mut convex = true;
    for w in values.windows(3) {
        if w[0] - 2.0 * w[1] + w[2] < -1e-10 {
            convex = false;
        }
    }
    Ok(ConvexityCurve {
        t: t_nodes.to_vec(),
        values,
        max_value,
        bounded,
        convex,
    })
}

/// The reduced theorem inequality F_theta + delta T_I / T_theta <= 3 + delta,
/// together with the two-stage chain that proves it: the eigenvalue bound on
/// F_theta feeds the convexity bound at (A, B, t) = (T_tr, T_I, theta),
/// where K coincides with T_delta.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TheoremCheck {
    pub lhs: f64,
    /// 3 + delta
    pub bound: f64,
    pub r_closed: f64,
    pub f_theta: f64,
    /// Intermediate of the chain: the F_theta bound plus delta T_I / T_theta.
    pub chain_mid: f64,
    /// lhs <= chain_mid <= bound, each within 1e-12.
    pub chain_ok: bool,
    /// lhs <= bound + 1e-12 and R >= -1e-12.
    pub theorem_ok: bool,
    pub regime: bool,
}

pub fn theorem_check(mac: &MacroState, params: &Params) -> Result<TheoremCheck> {
    let (r_closed, f_theta) = remainder_closed_form(mac, params)?;
    let t_theta = relaxation_temperature(mac, params);
    let internal = mac.delta * (mac.t_i / t_theta);
    let lhs = f_theta + internal;
    let bound = 3.0 + mac.delta;
    let f_bound = 3.0 * (mac.t_tr / blend(mac.t_tr, mac.t_delta, params.theta));
    let chain_mid = f_bound + internal;
    let chain_ok =
        lhs <= chain_mid + CLOSED_FORM_TOL && chain_mid <= bound + CLOSED_FORM_TOL;
    let theorem_ok = lhs <= bound + CLOSED_FORM_TOL && r_closed >= -CLOSED_FORM_TOL;
    Ok(TheoremCheck {
        lhs,
        bound,
        r_closed,
        f_theta,
        chain_mid,
        chain_ok,
        theorem_ok,
        regime: params.theorem_regime(),
    })
}

/// Scaled violation of the pointwise inequality
///   M <= M_cut f + (M - f)(ln M - ln f) / ln M_cut
/// for a single value pair; nonpositive when the inequality holds.
#[inline]
pub fn compactness_violation_scalar(mgauss: f64, f: f64, m_cut: f64) -> f64 {
    let cross = (mgauss - f) * (ln_floored(mgauss) - ln_floored(f)) / math::ln(m_cut);
    let rhs = m_cut * f + cross;
    let scale = mgauss + m_cut * f + cross.abs() + LOG_FLOOR;
    (mgauss - rhs) / scale
}

/// Worst scaled violation of the pointwise inequality over all grid nodes
/// where at least one operand is above the floor.
pub fn compactness_pointwise(
    f: &Distribution,
    mgauss: &Distribution,
    m_cut: f64,
) -> Result<f64> {
    if !(m_cut > 1.0) {
        return Err(KineticError::InvalidParams("M_cut must exceed 1"));
    }
    if !f.same_grid(mgauss) {
        return Err(KineticError::ShapeMismatch {
            expected: f.values().len(),
            got: mgauss.values().len(),
        });
    }
    let mut worst = f64::NEG_INFINITY;
    for (&fv, &mv) in f.values().iter().zip(mgauss.values()) {
        if fv <= LOG_FLOOR && mv <= LOG_FLOOR {
            continue;
        }
        let v = compactness_violation_scalar(mv, fv, m_cut);
        if v > worst {
            worst = v;
        }
    }
    Ok(worst)
}

/// Everything the decomposition drivers report for one (f, params) pair.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EntropyReport {
    pub nu: f64,
    pub theta: f64,
    pub delta: f64,
    pub rho: f64,
    pub h: f64,
    pub d: f64,
    pub relative_part: f64,
    pub r_quad: f64,
    /// NaN when the corrected tensor degenerated (nu < 0 probe).
    pub r_closed: f64,
    pub f_theta: f64,
    pub f_bound: f64,
    pub theorem_lhs: f64,
    pub theorem_ok: bool,
    pub regime: bool,
    pub tensor_degenerate: bool,
}

/// Full quadrature + closed-form report: builds the Gaussian for `f` under
/// `params` and evaluates every functional of the decomposition.
pub fn full_report(f: &Distribution, params: &Params) -> Result<EntropyReport> {
    let mac = compute_macro(f)?;
    let h = boltzmann_entropy(f)?;
    match corrected_tensor(&mac, params) {
        Ok(_) => {}
        Err(KineticError::NotPositiveDefinite { .. }) => {
            // probe mode outside the theorem regime: report what exists
            return Ok(EntropyReport {
                nu: params.nu,
                theta: params.theta,
                delta: params.delta,
                rho: mac.rho,
                h,
                d: f64::NAN,
                relative_part: f64::NAN,
                r_quad: f64::NAN,
                r_closed: f64::NAN,
                f_theta: f64::NAN,
                f_bound: f64::NAN,
                theorem_lhs: f64::NAN,
                theorem_ok: false,
                regime: params.theorem_regime(),
                tensor_degenerate: true,
            });
        }
        Err(e) => return Err(e),
    }
    let mgauss = build_gaussian(&mac, params, f.grid())?;
    let (d, relative_part) = entropy_production(f, &mgauss)?;
    let r_quad = remainder_quadrature(f, &mgauss, &mac, params)?;
    let check = theorem_check(&mac, params)?;
    let fb = f_theta_bound(&mac, params)?;
    Ok(EntropyReport {
        nu: params.nu,
        theta: params.theta,
        delta: params.delta,
        rho: mac.rho,
        h,
        d,
        relative_part,
        r_quad,
        r_closed: check.r_closed,
        f_theta: check.f_theta,
        f_bound: fb.bound,
        theorem_lhs: check.lhs,
        theorem_ok: check.theorem_ok,
        regime: check.regime,
        tensor_degenerate: false,
    })
}
