//! Small dense linear algebra: 3-vectors, 3x3 matrices, a Jacobi-rotation
//! eigensolver for symmetric 3x3 matrices, and a symmetric tridiagonal QL
//! solver used for quadrature node generation.

use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Vec3(pub [f64; 3]);

impl Vec3 {
    pub const ZERO: Vec3 = Vec3([0.0; 3]);

    #[inline]
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3([x, y, z])
    }

    #[inline]
    pub fn dot(&self, other: &Vec3) -> f64 {
        self.0[0] * other.0[0] + self.0[1] * other.0[1] + self.0[2] * other.0[2]
    }

    #[inline]
    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        math::sqrt(self.norm_sq())
    }

    #[inline]
    pub fn add(&self, other: &Vec3) -> Vec3 {
        Vec3([
            self.0[0] + other.0[0],
            self.0[1] + other.0[1],
            self.0[2] + other.0[2],
        ])
    }

    #[inline]
    pub fn sub(&self, other: &Vec3) -> Vec3 {
        Vec3([
            self.0[0] - other.0[0],
            self.0[1] - other.0[1],
            self.0[2] - other.0[2],
        ])
    }

    #[inline]
    pub fn scale(&self, s: f64) -> Vec3 {
        Vec3([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

/// Row-major 3x3 matrix. Symmetry is a caller-maintained invariant where it
/// matters (stress tensors are symmetrized explicitly after assembly).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Mat3(pub [[f64; 3]; 3]);

impl Mat3 {
    pub const IDENTITY: Mat3 = Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
    pub const ZERO: Mat3 = Mat3([[0.0; 3]; 3]);

    #[inline]
    pub fn diag(a: f64, b: f64, c: f64) -> Self {
        Mat3([[a, 0.0, 0.0], [0.0, b, 0.0], [0.0, 0.0, c]])
    }

    #[inline]
    pub fn scaled_identity(s: f64) -> Self {
        Self::diag(s, s, s)
    }

    #[inline]
    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    pub fn transpose(&self) -> Mat3 {
        let m = &self.0;
        Mat3([
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        ])
    }

    pub fn mul(&self, other: &Mat3) -> Mat3 {
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for k in 0..3 {
                    s += self.0[i][k] * other.0[k][j];
                }
                out[i][j] = s;
            }
        }
        Mat3(out)
    }

    #[inline]
    pub fn mul_vec(&self, v: &Vec3) -> Vec3 {
        Vec3([
            self.0[0][0] * v.0[0] + self.0[0][1] * v.0[1] + self.0[0][2] * v.0[2],
            self.0[1][0] * v.0[0] + self.0[1][1] * v.0[1] + self.0[1][2] * v.0[2],
            self.0[2][0] * v.0[0] + self.0[2][1] * v.0[1] + self.0[2][2] * v.0[2],
        ])
    }

    /// v^T M v
    #[inline]
    pub fn quadform(&self, v: &Vec3) -> f64 {
        v.dot(&self.mul_vec(v))
    }

    pub fn add(&self, other: &Mat3) -> Mat3 {
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] = self.0[i][j] + other.0[i][j];
            }
        }
        Mat3(out)
    }

    pub fn sub(&self, other: &Mat3) -> Mat3 {
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] = self.0[i][j] - other.0[i][j];
            }
        }
        Mat3(out)
    }

    pub fn scale(&self, s: f64) -> Mat3 {
        let mut out = self.0;
        for row in &mut out {
            for x in row {
                *x *= s;
            }
        }
        Mat3(out)
    }

    /// (M + M^T)/2
    pub fn symmetrize(&self) -> Mat3 {
        let m = &self.0;
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] = 0.5 * (m[i][j] + m[j][i]);
            }
        }
        Mat3(out)
    }

    pub fn outer(a: &Vec3, b: &Vec3) -> Mat3 {
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] = a.0[i] * b.0[j];
            }
        }
        Mat3(out)
    }

    pub fn max_abs(&self) -> f64 {
        let mut m = 0.0f64;
        for row in &self.0 {
            for x in row {
                m = m.max(x.abs());
            }
        }
        m
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|x| x.is_finite())
    }

    #[inline]
    pub fn column(&self, j: usize) -> Vec3 {
        Vec3([self.0[0][j], self.0[1][j], self.0[2][j]])
    }
}

/// Off-diagonal Frobenius norm squared, the Jacobi convergence measure.
fn off_diag_sq(m: &Mat3) -> f64 {
    let a = &m.0;
    2.0 * (a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2])
}

/// Eigendecomposition of a symmetric 3x3 matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues (unsorted, in the order they settle on the diagonal)
/// and the orthogonal frame whose columns are the matching eigenvectors.
/// A matrix that is already diagonal is returned untouched, so exact inputs
/// keep exact eigenvalues.
pub fn jacobi_eigen(m: &Mat3) -> ([f64; 3], Mat3) {
    let mut a = m.symmetrize().0;
    let mut v = Mat3::IDENTITY.0;
    let scale = Mat3(a).max_abs().max(1e-300);
    let tol = 1e-13 * scale;

    for _sweep in 0..50 {
        if math::sqrt(off_diag_sq(&Mat3(a))) <= tol {
            break;
        }
        for p in 0..2 {
            for q in (p + 1)..3 {
                if a[p][q].abs() <= 1e-300 * scale {
                    continue;
                }
                // classic Jacobi rotation annihilating a[p][q]
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = {
                    let s = if theta >= 0.0 { 1.0 } else { -1.0 };
                    s / (theta.abs() + math::sqrt(theta * theta + 1.0))
                };
                let c = 1.0 / math::sqrt(t * t + 1.0);
                let s = t * c;
                let tau = s / (1.0 + c);

                let apq = a[p][q];
                a[p][p] -= t * apq;
                a[q][q] += t * apq;
                a[p][q] = 0.0;
                a[q][p] = 0.0;
                for r in 0..3 {
                    if r != p && r != q {
                        let arp = a[r][p];
                        let arq = a[r][q];
                        a[r][p] = arp - s * (arq + tau * arp);
                        a[p][r] = a[r][p];
                        a[r][q] = arq + s * (arp - tau * arq);
                        a[q][r] = a[r][q];
                    }
                }
                for r in 0..3 {
                    let vrp = v[r][p];
                    let vrq = v[r][q];
                    v[r][p] = vrp - s * (vrq + tau * vrp);
                    v[r][q] = vrq + s * (vrp - tau * vrq);
                }
            }
        }
    }

    ([a[0][0], a[1][1], a[2][2]], Mat3(v))
}

/// Eigenvalues of a symmetric tridiagonal matrix by QL with implicit shifts,
/// accumulating only the first row of the eigenvector matrix (all that
/// Golub-Welsch quadrature weights need).
///
/// `d` holds the diagonal (overwritten with eigenvalues), `e` the
/// subdiagonal in `e[0..n-1]` (destroyed), `q` the first-row accumulator
/// (initialize to `[1, 0, 0, ...]`).
pub fn tridiag_eigen_first_row(d: &mut [f64], e: &mut [f64], q: &mut [f64]) -> Result<(), &'static str> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    if e.len() < n || q.len() < n {
        return Err("tridiagonal buffers too short");
    }
    e[n - 1] = 0.0;

    for l in 0..n {
        let mut iter = 0;
        loop {
            // find the first negligible subdiagonal element at or after l
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 50 {
                return Err("tridiagonal QL did not converge");
            }
            // implicit shift from the 2x2 block at l
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = math::hypot(g, 1.0);
            let sign_r = if g >= 0.0 { r } else { -r };
            g = d[m] - d[l] + e[l] / (g + sign_r);
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            let mut i = m;
            while i > l {
                i -= 1;
                let mut f = s * e[i];
                let b = c * e[i];
                r = math::hypot(f, g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                // first-row eigenvector update (columns i, i+1 mix)
                f = q[i + 1];
                q[i + 1] = s * q[i] + c * f;
                q[i] = c * q[i] - s * f;
            }
            if r == 0.0 && i > l {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn jacobi_diagonal_is_exact() {
        let m = Mat3::diag(1.5, -2.0, 7.0);
        let (eigs, frame) = jacobi_eigen(&m);
        assert_eq!(eigs, [1.5, -2.0, 7.0]);
        assert_eq!(frame, Mat3::IDENTITY);
    }

    #[test]
    fn jacobi_reconstructs_matrix() {
        let m = Mat3([[4.0, 1.0, -0.5], [1.0, 3.0, 0.25], [-0.5, 0.25, 2.0]]);
        let (eigs, p) = jacobi_eigen(&m);
        // P diag(eigs) P^T == M
        let d = Mat3::diag(eigs[0], eigs[1], eigs[2]);
        let rec = p.mul(&d).mul(&p.transpose());
        for i in 0..3 {
            for j in 0..3 {
                assert_close(rec.0[i][j], m.0[i][j], 1e-12);
            }
        }
        // eigenvalue sum equals trace
        assert_close(eigs.iter().sum::<f64>(), m.trace(), 1e-12);
        // frame is orthogonal
        let ptp = p.transpose().mul(&p);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_close(ptp.0[i][j], expect, 1e-13);
            }
        }
    }

    #[test]
    fn jacobi_near_degenerate() {
        let m = Mat3([[2.0, 1e-9, 0.0], [1e-9, 2.0, 1e-9], [0.0, 1e-9, 2.0 + 1e-9]]);
        let (eigs, p) = jacobi_eigen(&m);
        let d = Mat3::diag(eigs[0], eigs[1], eigs[2]);
        let rec = p.mul(&d).mul(&p.transpose());
        for i in 0..3 {
            for j in 0..3 {
                assert_close(rec.0[i][j], m.0[i][j], 1e-13);
            }
        }
    }

    #[test]
    fn tridiag_plain_2x2() {
        // [[2,1],[1,2]] -> eigenvalues 1 and 3, first-row components 1/sqrt(2)
        let mut d = [2.0, 2.0];
        let mut e = [1.0, 0.0];
        let mut q = [1.0, 0.0];
        tridiag_eigen_first_row(&mut d, &mut e, &mut q).unwrap();
        let mut pairs = [(d[0], q[0]), (d[1], q[1])];
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert_close(pairs[0].0, 1.0, 1e-14);
        assert_close(pairs[1].0, 3.0, 1e-14);
        assert_close(pairs[0].1 * pairs[0].1, 0.5, 1e-14);
        assert_close(pairs[1].1 * pairs[1].1, 0.5, 1e-14);
    }
}
