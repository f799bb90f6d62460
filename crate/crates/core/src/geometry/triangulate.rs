//! Two-view DLT triangulation against the rig's camera matrices.

use crate::geometry::mat::Vec3;
use crate::geometry::project::project_point;
use crate::geometry::rig::CameraRig;
use crate::geometry::GeometryError;
use crate::scalar::{s, Scalar};

/// Rank-deficiency threshold on the DLT system's condition number.
const CONDITION_LIMIT: f64 = 1e12;

/// Triangulated point with its quality measures.
#[derive(Clone, Copy, Debug)]
pub struct Triangulation<S> {
    /// Depth (camera-frame z) of the point in the first camera.
    pub depth_in_a: S,
    /// Depth in the second camera.
    pub depth_in_b: S,
    /// Largest reprojection residual across both views, pixels.
    pub residual_px: S,
    /// The point in the vehicle frame.
    pub point_vehicle: [S; 3],
}

/// 3x4 projection matrix `K [R^-1]` of a rig camera (vehicle frame to pixels).
fn projection_rows<S: Scalar>(rig: &CameraRig<S>, cam: usize) -> [[S; 4]; 3] {
    let camera = rig.camera(cam);
    let v2c = camera.cam_to_vehicle.inverse_rigid();
    let k = camera.intrinsics.to_matrix();
    let mut p = [[S::zero(); 4]; 3];
    for i in 0..3 {
        for j in 0..4 {
            let mut acc = S::zero();
            for (l, v2c_row) in v2c.0.iter().take(3).enumerate() {
                acc += k.0[i][l] * v2c_row[j];
            }
            p[i][j] = acc;
        }
    }
    p
}

/// Least-squares intersection of two pixel rays (linear DLT): builds the
/// 4x4 homogeneous system, takes the eigenvector of the smallest eigenvalue
/// of `A^T A`, and reports the reprojection residual. The rays must come
/// from distinct, ring-adjacent cameras.
pub fn triangulate<S: Scalar>(
    rig: &CameraRig<S>,
    cam_a: usize,
    cam_b: usize,
    uv_a: (S, S),
    uv_b: (S, S),
) -> Result<Triangulation<S>, GeometryError> {
    if cam_a == cam_b || !rig.are_adjacent(cam_a, cam_b) {
        return Err(GeometryError::NotAdjacent { a: cam_a, b: cam_b });
    }
    let pa = projection_rows(rig, cam_a);
    let pb = projection_rows(rig, cam_b);
    let mut a = [[S::zero(); 4]; 4];
    for j in 0..4 {
        a[0][j] = uv_a.0 * pa[2][j] - pa[0][j];
        a[1][j] = uv_a.1 * pa[2][j] - pa[1][j];
        a[2][j] = uv_b.0 * pb[2][j] - pb[0][j];
        a[3][j] = uv_b.1 * pb[2][j] - pb[1][j];
    }
    let (sigma, v) = jacobi_svd4(a);
    let mut order = [0usize, 1, 2, 3];
    order.sort_by(|&i, &j| sigma[j].partial_cmp(&sigma[i]).unwrap());
    // degenerate when the system has (numerical) rank < 3: the
    // second-smallest singular value collapses
    let s1 = sigma[order[0]];
    let s3 = sigma[order[2]];
    let cond = if s3 > S::zero() { s1 / s3 } else { S::infinity() };
    let limit: S = s(CONDITION_LIMIT);
    if !(cond < limit) {
        return Err(GeometryError::DegenerateRays {
            condition: cond.to_f64().unwrap_or(f64::INFINITY),
        });
    }
    let null_idx = order[3];
    let x = [
        v[0][null_idx],
        v[1][null_idx],
        v[2][null_idx],
        v[3][null_idx],
    ];
    let norm = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2] + x[3] * x[3]).sqrt();
    if x[3].abs() < s::<S>(1e-12) * norm {
        return Err(GeometryError::DegenerateRays { condition: f64::INFINITY });
    }
    let point = Vec3::new(x[0] / x[3], x[1] / x[3], x[2] / x[3]);

    let cam_point = |cam: usize| {
        rig.camera(cam)
            .cam_to_vehicle
            .inverse_rigid()
            .mul_point(&point)
    };
    let in_a = cam_point(cam_a);
    let in_b = cam_point(cam_b);
    let reproj = |cam: usize, p: &Vec3<S>, uv: (S, S)| -> S {
        match project_point(p.0, &rig.camera(cam).intrinsics) {
            Some((u, v)) => ((u - uv.0) * (u - uv.0) + (v - uv.1) * (v - uv.1)).sqrt(),
            None => S::infinity(),
        }
    };
    let ra = reproj(cam_a, &in_a, uv_a);
    let rb = reproj(cam_b, &in_b, uv_b);
    Ok(Triangulation {
        depth_in_a: in_a.0[2],
        depth_in_b: in_b.0[2],
        residual_px: ra.max(rb),
        point_vehicle: point.0,
    })
}

/// One-sided Jacobi SVD of a 4x4 matrix: orthogonalizes column pairs until
/// convergence. Returns the singular values and the right singular vectors
/// (columns of `V`). Small singular values keep high relative accuracy,
/// which the rank test relies on.
fn jacobi_svd4<S: Scalar>(a: [[S; 4]; 4]) -> ([S; 4], [[S; 4]; 4]) {
    // work on columns
    let mut cols = [[S::zero(); 4]; 4];
    for (i, arow) in a.iter().enumerate() {
        for j in 0..4 {
            cols[j][i] = arow[j];
        }
    }
    let mut v = [[S::zero(); 4]; 4];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = S::one();
    }
    let eps: S = s(1e-30);
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..3 {
            for q in (p + 1)..4 {
                let alpha: S = cols[p].iter().map(|&x| x * x).sum();
                let beta: S = cols[q].iter().map(|&x| x * x).sum();
                let gamma: S = cols[p].iter().zip(&cols[q]).map(|(&x, &y)| x * y).sum();
                if gamma.abs() <= eps * (alpha * beta).sqrt() || gamma == S::zero() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (s::<S>(2.0) * gamma);
                let t = {
                    let sign = if zeta >= S::zero() { S::one() } else { -S::one() };
                    sign / (zeta.abs() + (S::one() + zeta * zeta).sqrt())
                };
                let c = S::one() / (S::one() + t * t).sqrt();
                let sn = c * t;
                for i in 0..4 {
                    let cp = cols[p][i];
                    let cq = cols[q][i];
                    cols[p][i] = c * cp - sn * cq;
                    cols[q][i] = sn * cp + c * cq;
                }
                for vrow in v.iter_mut() {
                    let vp = vrow[p];
                    let vq = vrow[q];
                    vrow[p] = c * vp - sn * vq;
                    vrow[q] = sn * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sigma = [S::zero(); 4];
    for (j, col) in cols.iter().enumerate() {
        sigma[j] = col.iter().map(|&x| x * x).sum::<S>().sqrt();
    }
    (sigma, v)
}
