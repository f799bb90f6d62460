//! Small fixed-size matrix/vector helpers for non-differentiable rig math
//! (the differentiable counterparts live in `se3`/`project` as tensor ops).

use crate::scalar::{s, Scalar};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Vec3<S>(pub [S; 3]);

impl<S: Scalar> Vec3<S> {
    pub fn zero() -> Self {
        Vec3([S::zero(); 3])
    }

    pub fn new(x: S, y: S, z: S) -> Self {
        Vec3([x, y, z])
    }

    pub fn dot(&self, o: &Vec3<S>) -> S {
        self.0[0] * o.0[0] + self.0[1] * o.0[1] + self.0[2] * o.0[2]
    }

    pub fn cross(&self, o: &Vec3<S>) -> Vec3<S> {
        Vec3([
            self.0[1] * o.0[2] - self.0[2] * o.0[1],
            self.0[2] * o.0[0] - self.0[0] * o.0[2],
            self.0[0] * o.0[1] - self.0[1] * o.0[0],
        ])
    }

    pub fn norm(&self) -> S {
        self.dot(self).sqrt()
    }

    pub fn scale(&self, k: S) -> Vec3<S> {
        Vec3([self.0[0] * k, self.0[1] * k, self.0[2] * k])
    }

    pub fn add(&self, o: &Vec3<S>) -> Vec3<S> {
        Vec3([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }

    pub fn sub(&self, o: &Vec3<S>) -> Vec3<S> {
        Vec3([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }

    pub fn normalized(&self) -> Vec3<S> {
        let n = self.norm();
        if n == S::zero() {
            *self
        } else {
            self.scale(S::one() / n)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat3<S>(pub [[S; 3]; 3]);

impl<S: Scalar> Mat3<S> {
    pub fn identity() -> Self {
        let mut m = [[S::zero(); 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = S::one();
        }
        Mat3(m)
    }

    pub fn from_rows(r0: [S; 3], r1: [S; 3], r2: [S; 3]) -> Self {
        Mat3([r0, r1, r2])
    }

    pub fn transpose(&self) -> Mat3<S> {
        let m = &self.0;
        Mat3([
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        ])
    }

    pub fn mul_vec(&self, v: &Vec3<S>) -> Vec3<S> {
        let m = &self.0;
        Vec3([
            m[0][0] * v.0[0] + m[0][1] * v.0[1] + m[0][2] * v.0[2],
            m[1][0] * v.0[0] + m[1][1] * v.0[1] + m[1][2] * v.0[2],
            m[2][0] * v.0[0] + m[2][1] * v.0[1] + m[2][2] * v.0[2],
        ])
    }

    pub fn mul(&self, o: &Mat3<S>) -> Mat3<S> {
        let mut out = [[S::zero(); 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = S::zero();
                for (k, orow) in o.0.iter().enumerate() {
                    acc += self.0[i][k] * orow[j];
                }
                out[i][j] = acc;
            }
        }
        Mat3(out)
    }

    pub fn scale(&self, k: S) -> Mat3<S> {
        let mut out = self.0;
        for row in &mut out {
            for v in row {
                *v *= k;
            }
        }
        Mat3(out)
    }

    pub fn add(&self, o: &Mat3<S>) -> Mat3<S> {
        let mut out = self.0;
        for (row, orow) in out.iter_mut().zip(&o.0) {
            for (v, &ov) in row.iter_mut().zip(orow) {
                *v += ov;
            }
        }
        Mat3(out)
    }

    /// Antisymmetric cross-product matrix `[v]x`.
    pub fn skew(v: &Vec3<S>) -> Mat3<S> {
        let z = S::zero();
        Mat3([
            [z, -v.0[2], v.0[1]],
            [v.0[2], z, -v.0[0]],
            [-v.0[1], v.0[0], z],
        ])
    }

    /// Frobenius distance to another matrix.
    pub fn distance(&self, o: &Mat3<S>) -> S {
        let mut acc = S::zero();
        for (row, orow) in self.0.iter().zip(&o.0) {
            for (&a, &b) in row.iter().zip(orow) {
                acc += (a - b) * (a - b);
            }
        }
        acc.sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat4<S>(pub [[S; 4]; 4]);

impl<S: Scalar> Mat4<S> {
    pub fn identity() -> Self {
        let mut m = [[S::zero(); 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = S::one();
        }
        Mat4(m)
    }

    pub fn from_rt(r: &Mat3<S>, t: &Vec3<S>) -> Self {
        let z = S::zero();
        Mat4([
            [r.0[0][0], r.0[0][1], r.0[0][2], t.0[0]],
            [r.0[1][0], r.0[1][1], r.0[1][2], t.0[1]],
            [r.0[2][0], r.0[2][1], r.0[2][2], t.0[2]],
            [z, z, z, S::one()],
        ])
    }

    pub fn rotation(&self) -> Mat3<S> {
        let m = &self.0;
        Mat3([
            [m[0][0], m[0][1], m[0][2]],
            [m[1][0], m[1][1], m[1][2]],
            [m[2][0], m[2][1], m[2][2]],
        ])
    }

    pub fn translation(&self) -> Vec3<S> {
        Vec3([self.0[0][3], self.0[1][3], self.0[2][3]])
    }

    pub fn mul(&self, o: &Mat4<S>) -> Mat4<S> {
        let mut out = [[S::zero(); 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                let mut acc = S::zero();
                for (k, orow) in o.0.iter().enumerate() {
                    acc += self.0[i][k] * orow[j];
                }
                out[i][j] = acc;
            }
        }
        Mat4(out)
    }

    /// Applies the transform to a 3-D point (homogeneous w = 1).
    pub fn mul_point(&self, p: &Vec3<S>) -> Vec3<S> {
        let m = &self.0;
        Vec3([
            m[0][0] * p.0[0] + m[0][1] * p.0[1] + m[0][2] * p.0[2] + m[0][3],
            m[1][0] * p.0[0] + m[1][1] * p.0[1] + m[1][2] * p.0[2] + m[1][3],
            m[2][0] * p.0[0] + m[2][1] * p.0[1] + m[2][2] * p.0[2] + m[2][3],
        ])
    }

    /// Rotates a direction (homogeneous w = 0).
    pub fn mul_dir(&self, d: &Vec3<S>) -> Vec3<S> {
        self.rotation().mul_vec(d)
    }

    /// Inverse of a rigid transform (orthonormal rotation block assumed).
    pub fn inverse_rigid(&self) -> Mat4<S> {
        let rt = self.rotation().transpose();
        let t = self.translation();
        let nt = rt.mul_vec(&t).scale(-S::one());
        Mat4::from_rt(&rt, &nt)
    }

    pub fn distance(&self, o: &Mat4<S>) -> S {
        let mut acc = S::zero();
        for (row, orow) in self.0.iter().zip(&o.0) {
            for (&a, &b) in row.iter().zip(orow) {
                acc += (a - b) * (a - b);
            }
        }
        acc.sqrt()
    }

    pub fn to_row_major(&self) -> [S; 16] {
        let mut out = [S::zero(); 16];
        for (i, row) in self.0.iter().enumerate() {
            out[i * 4..(i + 1) * 4].copy_from_slice(row);
        }
        out
    }

    pub fn from_row_major(v: &[S]) -> Mat4<S> {
        let mut m = [[S::zero(); 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            row.copy_from_slice(&v[i * 4..(i + 1) * 4]);
        }
        Mat4(m)
    }
}

/// Rotation about an axis-angle vector via the Rodrigues formula, with a
/// second-order series below `theta = 1e-8`.
pub fn rodrigues<S: Scalar>(aa: &Vec3<S>) -> Mat3<S> {
    let theta_sq = aa.dot(&aa);
    let (a, b) = rot_coeffs(theta_sq);
    let k = Mat3::skew(aa);
    let k2 = k.mul(&k);
    Mat3::identity().add(&k.scale(a)).add(&k2.scale(b))
}

/// `(sin t/t, (1-cos t)/t^2)` with small-angle series.
fn rot_coeffs<S: Scalar>(theta_sq: S) -> (S, S) {
    if theta_sq < s(1e-16) {
        (
            S::one() - theta_sq / s(6.0),
            s::<S>(0.5) - theta_sq / s(24.0),
        )
    } else {
        let theta = theta_sq.sqrt();
        (theta.sin() / theta, (S::one() - theta.cos()) / theta_sq)
    }
}

/// `(1 - sin t/t)/t^2` with small-angle series.
fn v_coeff<S: Scalar>(theta_sq: S) -> S {
    if theta_sq < s(1e-16) {
        S::one() / s(6.0) - theta_sq / s(120.0)
    } else {
        let theta = theta_sq.sqrt();
        (S::one() - theta.sin() / theta) / theta_sq
    }
}

/// SE(3) exponential: rotation by Rodrigues, translation through the
/// left-Jacobian `V`, so `exp(xi) * exp(-xi) = I` holds exactly.
pub fn se3_exp_mat<S: Scalar>(axis_angle: &Vec3<S>, translation: &Vec3<S>) -> Mat4<S> {
    let theta_sq = axis_angle.dot(axis_angle);
    let (a, b) = rot_coeffs(theta_sq);
    let c = v_coeff(theta_sq);
    let k = Mat3::skew(axis_angle);
    let k2 = k.mul(&k);
    let r = Mat3::identity().add(&k.scale(a)).add(&k2.scale(b));
    let v = Mat3::identity().add(&k.scale(b)).add(&k2.scale(c));
    Mat4::from_rt(&r, &v.mul_vec(translation))
}

/// SO(3) logarithm; returns a canonical axis-angle with norm in `[0, pi]`.
pub fn so3_log<S: Scalar>(r: &Mat3<S>) -> Vec3<S> {
    let m = &r.0;
    let trace = m[0][0] + m[1][1] + m[2][2];
    let cos_t = ((trace - S::one()) * s::<S>(0.5)).max(-S::one()).min(S::one());
    let theta = cos_t.acos();
    let axis_raw = Vec3([
        m[2][1] - m[1][2],
        m[0][2] - m[2][0],
        m[1][0] - m[0][1],
    ]);
    if theta < s(1e-7) {
        // R ~ I + [w]x, so the skew part is ~2w
        return axis_raw.scale(s(0.5));
    }
    let sin_t = theta.sin();
    if sin_t.abs() > s(1e-6) {
        return axis_raw.scale(theta / (s::<S>(2.0) * sin_t));
    }
    // theta near pi: recover the axis from the diagonal
    let one = S::one();
    let xx = ((m[0][0] + one) * s::<S>(0.5)).max(S::zero()).sqrt();
    let yy = ((m[1][1] + one) * s::<S>(0.5)).max(S::zero()).sqrt();
    let zz = ((m[2][2] + one) * s::<S>(0.5)).max(S::zero()).sqrt();
    let mut axis = Vec3([xx, yy, zz]);
    // fix signs using the off-diagonal sums
    if m[2][1] - m[1][2] < S::zero() {
        axis.0[0] = -axis.0[0];
    }
    if m[0][2] - m[2][0] < S::zero() {
        axis.0[1] = -axis.0[1];
    }
    if m[1][0] - m[0][1] < S::zero() {
        axis.0[2] = -axis.0[2];
    }
    axis.normalized().scale(theta)
}

/// SE(3) logarithm, the inverse of [`se3_exp_mat`].
pub fn se3_log_mat<S: Scalar>(t: &Mat4<S>) -> (Vec3<S>, Vec3<S>) {
    let aa = so3_log(&t.rotation());
    let theta_sq = aa.dot(&aa);
    let (_, b) = rot_coeffs(theta_sq);
    let c = v_coeff(theta_sq);
    let k = Mat3::skew(&aa);
    let k2 = k.mul(&k);
    let v = Mat3::identity().add(&k.scale(b)).add(&k2.scale(c));
    // invert V (3x3) analytically via adjugate
    let m = v.0;
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    let inv_det = S::one() / det;
    let adj = Mat3([
        [
            m[1][1] * m[2][2] - m[1][2] * m[2][1],
            m[0][2] * m[2][1] - m[0][1] * m[2][2],
            m[0][1] * m[1][2] - m[0][2] * m[1][1],
        ],
        [
            m[1][2] * m[2][0] - m[1][0] * m[2][2],
            m[0][0] * m[2][2] - m[0][2] * m[2][0],
            m[0][2] * m[1][0] - m[0][0] * m[1][2],
        ],
        [
            m[1][0] * m[2][1] - m[1][1] * m[2][0],
            m[0][1] * m[2][0] - m[0][0] * m[2][1],
            m[0][0] * m[1][1] - m[0][1] * m[1][0],
        ],
    ]);
    let v_inv = adj.scale(inv_det);
    (aa, v_inv.mul_vec(&t.translation()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rodrigues_quarter_turn_about_z() {
        let aa = Vec3::new(0.0, 0.0, std::f64::consts::FRAC_PI_2);
        let r = rodrigues(&aa);
        let p = r.mul_vec(&Vec3::new(1.0, 0.0, 0.0));
        assert!((p.0[0]).abs() < 1e-12);
        assert!((p.0[1] - 1.0).abs() < 1e-12);
        assert!((p.0[2]).abs() < 1e-12);
    }

    #[test]
    fn exp_log_roundtrip() {
        let aa = Vec3::<f64>::new(0.3, -0.2, 0.5);
        let t = Vec3::new(1.0, 2.0, -0.5);
        let m = se3_exp_mat(&aa, &t);
        let (aa2, t2) = se3_log_mat(&m);
        for i in 0..3 {
            assert!((aa.0[i] - aa2.0[i]).abs() < 1e-12);
            assert!((t.0[i] - t2.0[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn exp_of_negation_is_inverse() {
        let aa = Vec3::new(0.1, 0.7, -0.3);
        let t = Vec3::new(0.5, -1.0, 2.0);
        let fwd = se3_exp_mat(&aa, &t);
        let bwd = se3_exp_mat(&aa.scale(-1.0), &t.scale(-1.0));
        let prod = fwd.mul(&bwd);
        assert!(prod.distance(&Mat4::identity()) < 1e-12);
    }

    #[test]
    fn small_angle_series_continuous() {
        let tiny = Vec3::new(1e-9, -2e-9, 5e-10);
        let t = Vec3::new(0.1, 0.0, 0.0);
        let m = se3_exp_mat(&tiny, &t);
        assert!(m.distance(&Mat4::from_rt(&Mat3::identity(), &t)) < 1e-8);
    }

    #[test]
    fn rigid_inverse() {
        let m = se3_exp_mat(&Vec3::new(0.2, 0.1, -0.4), &Vec3::new(1.0, 0.0, 3.0));
        let prod = m.mul(&m.inverse_rigid());
        assert!(prod.distance(&Mat4::identity()) < 1e-12);
    }
}
