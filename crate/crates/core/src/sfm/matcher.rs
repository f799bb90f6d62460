//! Built-in cross-view matcher: Harris corners plus zero-normalized
//! cross-correlation patch matching with mutual-best and ratio tests.
//! External match files (JSON lines) can be injected in its place.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geometry::mat::Vec3;
use crate::geometry::{CameraRig, Pinhole};
use crate::scalar::Scalar;
use crate::sfm::SfmError;
use crate::tensor::Tensor;

/// One putative correspondence between two views (pixel coordinates).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Match {
    pub ua: f64,
    pub va: f64,
    pub ub: f64,
    pub vb: f64,
    pub confidence: f64,
}

/// Matches of one ring-adjacent camera pair.
#[derive(Clone, Debug)]
pub struct MatchPair {
    pub cam_a: usize,
    pub cam_b: usize,
    pub matches: Vec<Match>,
}

/// All cross-view matches of one timestamp.
#[derive(Clone, Debug, Default)]
pub struct MatchSet {
    pub pairs: Vec<MatchPair>,
}

impl MatchSet {
    pub fn total_matches(&self) -> usize {
        self.pairs.iter().map(|p| p.matches.len()).sum()
    }
}

const PATCH_RADIUS: usize = 5; // 11x11 ZNCC patches
const RATIO_TEST: f64 = 0.8;
const MIN_SCORE: f64 = 0.7;
const MAX_CORNERS: usize = 600;

struct Gray {
    h: usize,
    w: usize,
    data: Vec<f64>,
}

fn to_gray<S: Scalar>(image: &Tensor<S>) -> Gray {
    let shape = image.shape();
    let (c, h, w) = (shape[0], shape[1], shape[2]);
    let src = image.data();
    let mut data = vec![0.0f64; h * w];
    for ch in 0..c {
        for (dst, &v) in data.iter_mut().zip(&src[ch * h * w..(ch + 1) * h * w]) {
            *dst += v.to_f64().unwrap_or(0.0);
        }
    }
    let inv = 1.0 / c as f64;
    for v in &mut data {
        *v *= inv;
    }
    Gray { h, w, data }
}

/// Harris corners: response `det(M) - 0.04 trace(M)^2` over a 5x5 window
/// of central-difference gradients, 3x3 non-maximum suppression, top
/// responses kept. Textureless images yield no corners.
fn harris_corners(img: &Gray) -> Vec<(usize, usize)> {
    let (h, w) = (img.h, img.w);
    if h < 8 || w < 8 {
        return Vec::new();
    }
    let at = |y: usize, x: usize| img.data[y * w + x];
    let mut ix = vec![0.0f64; h * w];
    let mut iy = vec![0.0f64; h * w];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            ix[y * w + x] = (at(y, x + 1) - at(y, x - 1)) * 0.5;
            iy[y * w + x] = (at(y + 1, x) - at(y - 1, x)) * 0.5;
        }
    }
    let mut response = vec![0.0f64; h * w];
    let win = 2isize;
    for y in 3..h - 3 {
        for x in 3..w - 3 {
            let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
            for dy in -win..=win {
                for dx in -win..=win {
                    let idx = ((y as isize + dy) * w as isize + x as isize + dx) as usize;
                    sxx += ix[idx] * ix[idx];
                    syy += iy[idx] * iy[idx];
                    sxy += ix[idx] * iy[idx];
                }
            }
            let det = sxx * syy - sxy * sxy;
            let trace = sxx + syy;
            response[y * w + x] = det - 0.04 * trace * trace;
        }
    }
    let max_r = response.iter().copied().fold(0.0f64, f64::max);
    if max_r < 1e-8 {
        return Vec::new();
    }
    let threshold = (0.01 * max_r).max(1e-8);
    let border = PATCH_RADIUS.max(3);
    let mut corners = Vec::new();
    for y in border..h - border {
        'pixel: for x in border..w - border {
            let r = response[y * w + x];
            if r < threshold {
                continue;
            }
            for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    if (dy, dx) == (0, 0) {
                        continue;
                    }
                    let nr = response[((y as isize + dy) * w as isize + x as isize + dx) as usize];
                    if nr > r || (nr == r && (dy, dx) < (0, 0)) {
                        continue 'pixel;
                    }
                }
            }
            corners.push((x, y, r));
        }
    }
    corners.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap().then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    corners.truncate(MAX_CORNERS);
    corners.into_iter().map(|(x, y, _)| (x, y)).collect()
}

/// Zero-normalized patch descriptor; `None` on flat patches.
fn zncc_patch(img: &Gray, x: usize, y: usize) -> Option<Vec<f64>> {
    let side = 2 * PATCH_RADIUS + 1;
    let mut patch = Vec::with_capacity(side * side);
    for dy in 0..side {
        for dx in 0..side {
            let yy = y + dy - PATCH_RADIUS;
            let xx = x + dx - PATCH_RADIUS;
            patch.push(img.data[yy * img.w + xx]);
        }
    }
    let mean = patch.iter().sum::<f64>() / patch.len() as f64;
    let mut norm = 0.0;
    for v in &mut patch {
        *v -= mean;
        norm += *v * *v;
    }
    if norm < 1e-12 {
        return None;
    }
    let inv = 1.0 / norm.sqrt();
    for v in &mut patch {
        *v *= inv;
    }
    Some(patch)
}

/// Quadratic sub-pixel refinement of a correlation peak: scores the
/// reference descriptor against the 3x3 integer neighborhood in the search
/// image and fits a parabola per axis. Offsets are clamped to half a pixel.
fn refine_peak(img: &Gray, x: usize, y: usize, reference: &[f64]) -> (f64, f64) {
    let score_at = |xx: isize, yy: isize| -> Option<f64> {
        if xx < PATCH_RADIUS as isize
            || yy < PATCH_RADIUS as isize
            || xx as usize + PATCH_RADIUS >= img.w
            || yy as usize + PATCH_RADIUS >= img.h
        {
            return None;
        }
        let patch = zncc_patch(img, xx as usize, yy as usize)?;
        Some(reference.iter().zip(&patch).map(|(a, b)| a * b).sum())
    };
    let center = match score_at(x as isize, y as isize) {
        Some(s) => s,
        None => return (0.0, 0.0),
    };
    let axis = |m: Option<f64>, p: Option<f64>| -> f64 {
        match (m, p) {
            (Some(m), Some(p)) => {
                let denom = m - 2.0 * center + p;
                if denom.abs() < 1e-12 {
                    0.0
                } else {
                    (0.5 * (m - p) / denom).clamp(-0.5, 0.5)
                }
            }
            _ => 0.0,
        }
    };
    let du = axis(
        score_at(x as isize - 1, y as isize),
        score_at(x as isize + 1, y as isize),
    );
    let dv = axis(
        score_at(x as isize, y as isize - 1),
        score_at(x as isize, y as isize + 1),
    );
    (du, dv)
}

/// Does the infinite-depth reprojection of pixel `(x, y)` from camera `a`
/// land anywhere near camera `b`'s raster? Used only to prune candidates.
fn roughly_overlaps<S: Scalar>(
    rig: &CameraRig<S>,
    cam_a: usize,
    cam_b: usize,
    x: f64,
    y: f64,
) -> bool {
    let ka = pinhole_f64(&rig.camera(cam_a).intrinsics);
    let kb = pinhole_f64(&rig.camera(cam_b).intrinsics);
    let (h, w) = rig.image_size();
    let dir_a = Vec3::new((x - ka.cx) / ka.fx, (y - ka.cy) / ka.fy, 1.0);
    let rot_ab = rig
        .camera(cam_b)
        .cam_to_vehicle
        .inverse_rigid()
        .mul(&rig.camera(cam_a).cam_to_vehicle);
    let rot_ab_f64 = mat4_f64(&rot_ab);
    let d = rot_ab_f64.mul_dir(&dir_a);
    if d.0[2] <= 1e-9 {
        return false;
    }
    let u = kb.fx * d.0[0] / d.0[2] + kb.cx;
    let v = kb.fy * d.0[1] / d.0[2] + kb.cy;
    let (mw, mh) = (w as f64 * 0.5, h as f64 * 0.5);
    u >= -mw && u <= w as f64 + mw && v >= -mh && v <= h as f64 + mh
}

fn pinhole_f64<S: Scalar>(k: &Pinhole<S>) -> Pinhole<f64> {
    Pinhole::new(
        k.fx.to_f64().unwrap(),
        k.fy.to_f64().unwrap(),
        k.cx.to_f64().unwrap(),
        k.cy.to_f64().unwrap(),
    )
}

fn mat4_f64<S: Scalar>(m: &crate::geometry::mat::Mat4<S>) -> crate::geometry::mat::Mat4<f64> {
    let mut out = [[0.0f64; 4]; 4];
    for (dst, src) in out.iter_mut().zip(&m.0) {
        for (d, s) in dst.iter_mut().zip(src) {
            *d = s.to_f64().unwrap();
        }
    }
    crate::geometry::mat::Mat4(out)
}

/// Matches every ring-adjacent camera pair of one timestamp. Geometric
/// overlap prunes candidates, zero-normalized cross-correlation scores
/// 11x11 patches, and a mutual-best check plus a 0.8 ratio test keep
/// only distinctive correspondences.
pub fn match_overlap<S: Scalar>(images: &[Tensor<S>], rig: &CameraRig<S>) -> MatchSet {
    let grays: Vec<Gray> = images.iter().map(to_gray).collect();
    let corners: Vec<Vec<(usize, usize)>> = grays.iter().map(harris_corners).collect();
    let descriptors: Vec<Vec<Option<Vec<f64>>>> = grays
        .iter()
        .zip(&corners)
        .map(|(g, cs)| cs.iter().map(|&(x, y)| zncc_patch(g, x, y)).collect())
        .collect();

    let mut pairs = Vec::new();
    let ring = rig.ring();
    let n = ring.len();
    for i in 0..n {
        let cam_a = ring[i];
        let cam_b = ring[(i + 1) % n];
        if n == 2 && i == 1 {
            break; // a two-camera ring has a single pair
        }
        let cand_a: Vec<usize> = (0..corners[cam_a].len())
            .filter(|&ci| {
                let (x, y) = corners[cam_a][ci];
                descriptors[cam_a][ci].is_some()
                    && roughly_overlaps(rig, cam_a, cam_b, x as f64, y as f64)
            })
            .collect();
        let cand_b: Vec<usize> = (0..corners[cam_b].len())
            .filter(|&ci| {
                let (x, y) = corners[cam_b][ci];
                descriptors[cam_b][ci].is_some()
                    && roughly_overlaps(rig, cam_b, cam_a, x as f64, y as f64)
            })
            .collect();

        let score = |ia: usize, ib: usize| -> f64 {
            let da = descriptors[cam_a][ia].as_ref().unwrap();
            let db = descriptors[cam_b][ib].as_ref().unwrap();
            da.iter().zip(db).map(|(a, b)| a * b).sum()
        };

        // best and second-best along a -> b
        let mut best_ab: Vec<Option<(usize, f64, f64)>> = vec![None; cand_a.len()];
        for (sa, &ia) in cand_a.iter().enumerate() {
            let (mut best, mut second) = ((usize::MAX, -2.0f64), -2.0f64);
            for (sb, &ib) in cand_b.iter().enumerate() {
                let sc = score(ia, ib);
                if sc > best.1 {
                    second = best.1;
                    best = (sb, sc);
                } else if sc > second {
                    second = sc;
                }
            }
            if best.0 != usize::MAX {
                best_ab[sa] = Some((best.0, best.1, second));
            }
        }
        // best along b -> a for the mutual check
        let mut best_ba: Vec<usize> = vec![usize::MAX; cand_b.len()];
        for (sb, &ib) in cand_b.iter().enumerate() {
            let mut best = (usize::MAX, -2.0f64);
            for (sa, &ia) in cand_a.iter().enumerate() {
                let sc = score(ia, ib);
                if sc > best.1 {
                    best = (sa, sc);
                }
            }
            best_ba[sb] = best.0;
        }

        let mut matches = Vec::new();
        for (sa, entry) in best_ab.iter().enumerate() {
            let Some((sb, best, second)) = *entry else { continue };
            if best < MIN_SCORE || best_ba[sb] != sa {
                continue;
            }
            // ratio test on correlation distances
            let d_best = 1.0 - best;
            let d_second = 1.0 - second;
            if d_best > RATIO_TEST * d_second {
                continue;
            }
            let (xa, ya) = corners[cam_a][cand_a[sa]];
            let (xb, yb) = corners[cam_b][cand_b[sb]];
            // sub-pixel refinement: parabola fit on the correlation surface
            // around the integer peak in view b (view a keeps the detected
            // corner; the refined point in b is its true correspondence)
            let da = descriptors[cam_a][cand_a[sa]].as_ref().unwrap();
            let (du, dv) = refine_peak(&grays[cam_b], xb, yb, da);
            matches.push(Match {
                ua: xa as f64,
                va: ya as f64,
                ub: xb as f64 + du,
                vb: yb as f64 + dv,
                confidence: best.clamp(0.0, 1.0),
            });
        }
        pairs.push(MatchPair { cam_a, cam_b, matches });
    }
    MatchSet { pairs }
}

/// One line of a match injection file.
#[derive(Serialize, Deserialize)]
struct MatchLine {
    pair: [usize; 2],
    points: Vec<[f64; 5]>,
    /// Frame the matches belong to; lines without it apply to frame 0.
    #[serde(default)]
    frame: usize,
}

/// Reads a JSON-lines match file; returns `(frame, MatchSet)` groups in
/// first-appearance order.
pub fn load_match_file(path: &Path) -> Result<Vec<(usize, MatchSet)>, SfmError> {
    let file = std::fs::File::open(path).map_err(SfmError::Io)?;
    let reader = std::io::BufReader::new(file);
    let mut frames: Vec<(usize, MatchSet)> = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(SfmError::Io)?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: MatchLine = serde_json::from_str(&line)
            .map_err(|e| SfmError::Parse(format!("line {}: {e}", lineno + 1)))?;
        let matches = parsed
            .points
            .iter()
            .map(|p| Match { ua: p[0], va: p[1], ub: p[2], vb: p[3], confidence: p[4] })
            .collect();
        let pair = MatchPair { cam_a: parsed.pair[0], cam_b: parsed.pair[1], matches };
        match frames.iter_mut().find(|(f, _)| *f == parsed.frame) {
            Some((_, set)) => set.pairs.push(pair),
            None => frames.push((parsed.frame, MatchSet { pairs: vec![pair] })),
        }
    }
    Ok(frames)
}

pub fn save_match_file(path: &Path, frames: &[(usize, MatchSet)]) -> Result<(), SfmError> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path).map_err(SfmError::Io)?);
    for (frame, set) in frames {
        for pair in &set.pairs {
            let line = MatchLine {
                pair: [pair.cam_a, pair.cam_b],
                points: pair
                    .matches
                    .iter()
                    .map(|m| [m.ua, m.va, m.ub, m.vb, m.confidence])
                    .collect(),
                frame: *frame,
            };
            let json = serde_json::to_string(&line).map_err(|e| SfmError::Parse(e.to_string()))?;
            writeln!(file, "{json}").map_err(SfmError::Io)?;
        }
    }
    Ok(())
}
