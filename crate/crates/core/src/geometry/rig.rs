//! Surround camera rig: per-camera pinhole intrinsics, camera-to-vehicle
//! extrinsics, and the ring adjacency among views.

use serde::{Deserialize, Serialize};

use crate::geometry::mat::{Mat3, Mat4};
use crate::geometry::GeometryError;
use crate::scalar::{s, Scalar};

/// Zero-skew pinhole intrinsics in pixels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pinhole<S> {
    pub fx: S,
    pub fy: S,
    pub cx: S,
    pub cy: S,
}

impl<S: Scalar> Pinhole<S> {
    pub fn new(fx: S, fy: S, cx: S, cy: S) -> Self {
        Pinhole { fx, fy, cx, cy }
    }

    pub fn to_matrix(&self) -> Mat3<S> {
        let z = S::zero();
        Mat3::from_rows(
            [self.fx, z, self.cx],
            [z, self.fy, self.cy],
            [z, z, S::one()],
        )
    }

    pub fn from_matrix(k: &Mat3<S>) -> Result<Self, GeometryError> {
        let m = &k.0;
        let tol: S = s(1e-9);
        if m[0][1].abs() > tol || m[1][0].abs() > tol {
            return Err(GeometryError::InvalidRig("nonzero skew in K".into()));
        }
        if m[2][0].abs() > tol || m[2][1].abs() > tol || (m[2][2] - S::one()).abs() > tol {
            return Err(GeometryError::InvalidRig("bottom row of K must be [0,0,1]".into()));
        }
        if !(m[0][0] > S::zero() && m[1][1] > S::zero()) {
            return Err(GeometryError::InvalidRig("focal lengths must be positive".into()));
        }
        Ok(Pinhole { fx: m[0][0], fy: m[1][1], cx: m[0][2], cy: m[1][2] })
    }

    /// Intrinsics of the level-`factor` image pyramid built by 2x2 box
    /// averaging: each coarse pixel center is the mean of its children.
    pub fn scaled_down(&self, factor: usize) -> Pinhole<S> {
        let f: S = s(factor as f64);
        let half: S = s((factor as f64 - 1.0) / 2.0);
        Pinhole {
            fx: self.fx / f,
            fy: self.fy / f,
            cx: (self.cx - half) / f,
            cy: (self.cy - half) / f,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RigCamera<S: Scalar> {
    pub id: usize,
    pub intrinsics: Pinhole<S>,
    /// Maps camera coordinates to the common vehicle frame.
    pub cam_to_vehicle: Mat4<S>,
}

#[derive(Clone, Debug)]
pub struct CameraRig<S: Scalar> {
    cameras: Vec<RigCamera<S>>,
    /// (height, width) in pixels, shared by all cameras.
    image_size: (usize, usize),
    /// Camera ids in cycle order; camera `ring[i]` neighbors `ring[i±1 mod N]`.
    ring: Vec<usize>,
}

impl<S: Scalar> CameraRig<S> {
    pub fn new(
        cameras: Vec<RigCamera<S>>,
        image_size: (usize, usize),
        ring: Vec<usize>,
    ) -> Result<Self, GeometryError> {
        if cameras.len() < 2 {
            return Err(GeometryError::InvalidRig(format!(
                "need at least 2 cameras, got {}",
                cameras.len()
            )));
        }
        if image_size.0 == 0 || image_size.1 == 0 {
            return Err(GeometryError::InvalidRig("empty image size".into()));
        }
        let n = cameras.len();
        let mut seen = vec![false; n];
        for cam in &cameras {
            if cam.id >= n || std::mem::replace(&mut seen[cam.id], true) {
                return Err(GeometryError::InvalidRig(format!(
                    "camera ids must be a permutation of 0..{n}"
                )));
            }
            validate_extrinsics(&cam.cam_to_vehicle)?;
        }
        if ring.len() != n {
            return Err(GeometryError::InvalidRig(format!(
                "ring lists {} ids for {} cameras",
                ring.len(),
                n
            )));
        }
        let mut in_ring = vec![false; n];
        for &id in &ring {
            if id >= n || std::mem::replace(&mut in_ring[id], true) {
                return Err(GeometryError::InvalidRig(
                    "ring must visit every camera exactly once".into(),
                ));
            }
        }
        let mut cameras = cameras;
        cameras.sort_by_key(|c| c.id);
        Ok(CameraRig { cameras, image_size, ring })
    }

    pub fn n_cameras(&self) -> usize {
        self.cameras.len()
    }

    pub fn image_size(&self) -> (usize, usize) {
        self.image_size
    }

    pub fn camera(&self, id: usize) -> &RigCamera<S> {
        &self.cameras[id]
    }

    pub fn cameras(&self) -> &[RigCamera<S>] {
        &self.cameras
    }

    pub fn ring(&self) -> &[usize] {
        &self.ring
    }

    /// `(previous, next)` neighbors of a camera in ring order.
    pub fn neighbors(&self, id: usize) -> (usize, usize) {
        let n = self.ring.len();
        let pos = self.ring.iter().position(|&r| r == id).expect("id in ring");
        (self.ring[(pos + n - 1) % n], self.ring[(pos + 1) % n])
    }

    /// Ring neighbor in direction `delta` (+1 next, -1 previous).
    pub fn neighbor(&self, id: usize, delta: i32) -> Result<usize, GeometryError> {
        let (prev, next) = self.neighbors(id);
        match delta {
            1 => Ok(next),
            -1 => Ok(prev),
            _ => Err(GeometryError::NotAdjacent { a: id, b: id }),
        }
    }

    pub fn are_adjacent(&self, a: usize, b: usize) -> bool {
        let (prev, next) = self.neighbors(a);
        b == prev || b == next
    }

    pub fn to_json(&self) -> String {
        let file = RigFile {
            cameras: self
                .cameras
                .iter()
                .map(|c| {
                    let k = c.intrinsics.to_matrix();
                    RigCameraFile {
                        id: c.id,
                        k: k.0
                            .iter()
                            .flat_map(|row| row.iter().map(|v| v.to_f64().unwrap()))
                            .collect(),
                        r: c
                            .cam_to_vehicle
                            .to_row_major()
                            .iter()
                            .map(|v| v.to_f64().unwrap())
                            .collect(),
                    }
                })
                .collect(),
            image_size: [self.image_size.0, self.image_size.1],
            ring: self.ring.clone(),
        };
        serde_json::to_string_pretty(&file).expect("rig serialization")
    }

    pub fn from_json(text: &str) -> Result<Self, GeometryError> {
        let file: RigFile = serde_json::from_str(text)
            .map_err(|e| GeometryError::InvalidRig(format!("rig json: {e}")))?;
        Self::from_file(&file)
    }

    pub fn from_file(file: &RigFile) -> Result<Self, GeometryError> {
        let mut cameras = Vec::with_capacity(file.cameras.len());
        for cam in &file.cameras {
            if cam.k.len() != 9 || cam.r.len() != 16 {
                return Err(GeometryError::InvalidRig(format!(
                    "camera {}: K needs 9 floats, R needs 16",
                    cam.id
                )));
            }
            let kvals: Vec<S> = cam.k.iter().map(|&v| s(v)).collect();
            let k = Mat3::from_rows(
                [kvals[0], kvals[1], kvals[2]],
                [kvals[3], kvals[4], kvals[5]],
                [kvals[6], kvals[7], kvals[8]],
            );
            let rvals: Vec<S> = cam.r.iter().map(|&v| s(v)).collect();
            cameras.push(RigCamera {
                id: cam.id,
                intrinsics: Pinhole::from_matrix(&k)?,
                cam_to_vehicle: Mat4::from_row_major(&rvals),
            });
        }
        CameraRig::new(
            cameras,
            (file.image_size[0], file.image_size[1]),
            file.ring.clone(),
        )
    }
}

fn validate_extrinsics<S: Scalar>(m: &Mat4<S>) -> Result<(), GeometryError> {
    let tol: S = s(1e-9);
    let bottom = m.0[3];
    if bottom[0].abs() > tol
        || bottom[1].abs() > tol
        || bottom[2].abs() > tol
        || (bottom[3] - S::one()).abs() > tol
    {
        return Err(GeometryError::InvalidRig("extrinsic bottom row must be [0,0,0,1]".into()));
    }
    let r = m.rotation();
    let prod = r.transpose().mul(&r);
    if prod.distance(&Mat3::identity()) > tol {
        return Err(GeometryError::InvalidRig("extrinsic rotation not orthonormal".into()));
    }
    Ok(())
}

/// JSON schema of a rig configuration file.
#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct RigFile {
    pub cameras: Vec<RigCameraFile>,
    /// `[H, W]`
    pub image_size: [usize; 2],
    pub ring: Vec<usize>,
}

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct RigCameraFile {
    pub id: usize,
    /// 3x3 row-major intrinsics.
    #[serde(rename = "K")]
    pub k: Vec<f64>,
    /// 4x4 row-major camera-to-vehicle extrinsics.
    #[serde(rename = "R")]
    pub r: Vec<f64>,
}
