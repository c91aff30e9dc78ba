//! Seeded random macrostates for sweeps and fuzzing.
//!
//! All randomness derives from one 64-bit seed through SplitMix64 run in
//! counter mode: draw k of stream s is mix(seed' + k * GAMMA) with a
//! per-stream seed'. The generator is stateless given (seed, stream,
//! counter), so ensemble cells can be evaluated independently and in any
//! order while staying bit-reproducible, and the recipe is trivial to
//! reimplement in another language.

use crate::error::Result;
use crate::linalg::{Mat3, Vec3};
use crate::math;
use crate::moments::MacroState;

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// SplitMix64 in counter mode.
#[derive(Debug, Clone, Copy)]
pub struct CounterRng {
    seed: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        CounterRng { seed, counter: 0 }
    }

    /// Independent substream: reseeded by mixing the stream index in.
    pub fn stream(seed: u64, stream: u64) -> Self {
        CounterRng {
            seed: mix(seed ^ mix(stream.wrapping_add(GAMMA))),
            counter: 0,
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix(self.seed.wrapping_add(self.counter.wrapping_mul(GAMMA)))
    }

    /// Uniform in [0, 1).
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in (0, 1].
    #[inline]
    fn next_f64_open_zero(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    #[inline]
    pub fn next_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Standard normal via Box-Muller.
    pub fn next_normal(&mut self) -> f64 {
        let u1 = self.next_f64_open_zero();
        let u2 = self.next_f64();
        math::sqrt(-2.0 * math::ln(u1)) * math::cos(math::TAU * u2)
    }
}

/// Sampling ranges for random macrostates.
#[derive(Debug, Clone, Copy)]
pub struct StateRanges {
    /// Stress-tensor eigenvalues, uniform.
    pub eig: (f64, f64),
    /// Internal temperature, uniform.
    pub t_i: (f64, f64),
    /// Density, uniform.
    pub rho: (f64, f64),
    /// Bulk-velocity components, uniform in [-u_amp, u_amp].
    pub u_amp: f64,
}

impl StateRanges {
    /// Wide ranges for closed-form sweeps: strong anisotropy and temperature
    /// disequilibrium.
    pub fn fuzzer() -> Self {
        StateRanges {
            eig: (0.1, 10.0),
            t_i: (0.1, 10.0),
            rho: (0.5, 2.0),
            u_amp: 1.0,
        }
    }

    /// Ranges a 32-point-per-axis grid resolves to ~1e-8; used wherever the
    /// sampled state must be realized on a quadrature grid.
    pub fn grid_friendly() -> Self {
        StateRanges {
            eig: (0.6, 1.8),
            t_i: (0.6, 1.8),
            rho: (0.5, 2.0),
            u_amp: 0.5,
        }
    }

    /// Degrees of freedom exercised by the fuzzer.
    pub const DELTAS: [f64; 5] = [1.0, 2.0, 3.0, 5.0, 7.5];
}

/// Random orthogonal frame: Gram-Schmidt on three standard normal vectors,
/// redrawn in the (measure-zero) degenerate case.
pub fn random_orthogonal(rng: &mut CounterRng) -> Mat3 {
    loop {
        let cols: [Vec3; 3] = core::array::from_fn(|_| {
            Vec3([rng.next_normal(), rng.next_normal(), rng.next_normal()])
        });
        let q0 = cols[0];
        let n0 = q0.norm();
        if n0 < 1e-6 {
            continue;
        }
        let q0 = q0.scale(1.0 / n0);
        let mut q1 = cols[1].sub(&q0.scale(cols[1].dot(&q0)));
        let n1 = q1.norm();
        if n1 < 1e-6 {
            continue;
        }
        q1 = q1.scale(1.0 / n1);
        let mut q2 = cols[2]
            .sub(&q0.scale(cols[2].dot(&q0)))
            .sub(&q1.scale(cols[2].dot(&q1)));
        let n2 = q2.norm();
        if n2 < 1e-6 {
            continue;
        }
        q2 = q2.scale(1.0 / n2);
        return Mat3([
            [q0.0[0], q1.0[0], q2.0[0]],
            [q0.0[1], q1.0[1], q2.0[1]],
            [q0.0[2], q1.0[2], q2.0[2]],
        ]);
    }
}

/// Random macrostate: Theta = Q^T diag(L) Q with Q a random orthogonal frame
/// and eigenvalues, internal temperature, density, and bulk velocity drawn
/// uniformly from the configured ranges.
pub fn sample_macrostate(rng: &mut CounterRng, ranges: &StateRanges, delta: f64) -> Result<MacroState> {
    let q = random_orthogonal(rng);
    let eigs = Mat3::diag(
        rng.next_in(ranges.eig.0, ranges.eig.1),
        rng.next_in(ranges.eig.0, ranges.eig.1),
        rng.next_in(ranges.eig.0, ranges.eig.1),
    );
    let theta = q.transpose().mul(&eigs).mul(&q).symmetrize();
    let t_i = rng.next_in(ranges.t_i.0, ranges.t_i.1);
    let rho = rng.next_in(ranges.rho.0, ranges.rho.1);
    let u = Vec3([
        rng.next_in(-ranges.u_amp, ranges.u_amp),
        rng.next_in(-ranges.u_amp, ranges.u_amp),
        rng.next_in(-ranges.u_amp, ranges.u_amp),
    ]);
    MacroState::from_parts(rho, u, theta, t_i, delta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counter_rng_reproducible_and_stream_separated() {
        let mut a = CounterRng::new(42);
        let mut b = CounterRng::new(42);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
        let mut s0 = CounterRng::stream(42, 0);
        let mut s1 = CounterRng::stream(42, 1);
        assert_ne!(s0.next_u64(), s1.next_u64());
    }

    #[test]
    fn uniform_in_unit_interval() {
        let mut rng = CounterRng::new(7);
        let mut sum = 0.0;
        for _ in 0..10_000 {
            let x = rng.next_f64();
            assert!((0.0..1.0).contains(&x));
            sum += x;
        }
        assert!((sum / 10_000.0 - 0.5).abs() < 0.02);
    }

    #[test]
    fn random_orthogonal_is_orthogonal() {
        let mut rng = CounterRng::new(3);
        for _ in 0..20 {
            let q = random_orthogonal(&mut rng);
            let qtq = q.transpose().mul(&q);
            for i in 0..3 {
                for j in 0..3 {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((qtq.0[i][j] - expect).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn sampled_states_are_valid() {
        let mut rng = CounterRng::new(11);
        let ranges = StateRanges::fuzzer();
        for _ in 0..200 {
            let mac = sample_macrostate(&mut rng, &ranges, 2.0).unwrap();
            assert!(mac.rho >= 0.5 && mac.rho <= 2.0);
            assert!(mac.t_tr > 0.0 && mac.t_i > 0.0 && mac.t_delta > 0.0);
            // eigenvalues of Theta stay in the sampled range
            let (eigs, _) = crate::linalg::jacobi_eigen(&mac.theta);
            for e in eigs {
                assert!(e > 0.1 - 1e-9 && e < 10.0 + 1e-9);
            }
        }
    }
}
