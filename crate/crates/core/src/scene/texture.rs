//! Procedural value-noise textures. Pure functions of (seed, position), so
//! renders are bit-reproducible.

use serde::{Deserialize, Serialize};

use crate::rng::{hash2, hash_unit};

/// Texture knobs: `base_frequency` is in cycles per meter. Photometric
/// losses degenerate on flat textures, so keep enough contrast and detail
/// for matching and warping to have signal.
#[derive(Serialize, Deserialize, Clone, Copy, Debug)]
pub struct TextureSpec {
    pub base_frequency: f64,
    pub octaves: usize,
    /// Albedo range is `0.5 +- contrast/2`, clamped to `[0.03, 0.97]`.
    pub contrast: f64,
}

impl Default for TextureSpec {
    fn default() -> Self {
        TextureSpec { base_frequency: 0.8, octaves: 4, contrast: 0.8 }
    }
}

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// Single-octave value noise on an integer lattice with smoothstep
/// interpolation; output in [0, 1).
pub fn value_noise(seed: u64, x: f64, y: f64) -> f64 {
    let x0 = x.floor();
    let y0 = y.floor();
    let (ix, iy) = (x0 as i64, y0 as i64);
    let fx = smoothstep(x - x0);
    let fy = smoothstep(y - y0);
    let v00 = hash_unit(hash2(seed, ix, iy));
    let v10 = hash_unit(hash2(seed, ix + 1, iy));
    let v01 = hash_unit(hash2(seed, ix, iy + 1));
    let v11 = hash_unit(hash2(seed, ix + 1, iy + 1));
    let top = v00 + fx * (v10 - v00);
    let bot = v01 + fx * (v11 - v01);
    top + fy * (bot - top)
}

/// Multi-octave value noise in [0, 1).
pub fn fbm(seed: u64, x: f64, y: f64, octaves: usize) -> f64 {
    let mut acc = 0.0;
    let mut amp = 1.0;
    let mut total = 0.0;
    let mut fx = x;
    let mut fy = y;
    for o in 0..octaves.max(1) {
        acc += amp * value_noise(seed.wrapping_add(o as u64 * 0x9e37), fx, fy);
        total += amp;
        amp *= 0.55;
        fx = fx * 2.0 + 11.7;
        fy = fy * 2.0 + 7.3;
    }
    acc / total
}

/// Per-channel albedo of a textured surface at metric coordinates `(u, v)`.
/// `footprint` is the on-surface extent of one pixel in meters: octaves
/// whose wavelength approaches the footprint fade out, so distant or
/// grazing surfaces render band-limited instead of aliasing. Aliased
/// texture would be pixel-decorrelated noise that no sub-pixel warp could
/// ever reproduce.
pub fn albedo(
    spec: &TextureSpec,
    surface_seed: u64,
    u: f64,
    v: f64,
    channel: usize,
    footprint: f64,
) -> f64 {
    let seed = surface_seed.wrapping_add(channel as u64 * 0x51_7c_c1);
    let mut acc = 0.0;
    let mut total = 0.0;
    let mut amp = 1.0;
    let mut freq = spec.base_frequency;
    let mut fu = u * spec.base_frequency;
    let mut fv = v * spec.base_frequency;
    for o in 0..spec.octaves.max(1) {
        total += amp;
        let wavelength = 1.0 / freq.max(1e-9);
        // full weight above 4 footprints per cycle, zero below 2 (Nyquist)
        let ratio = wavelength / footprint.max(1e-9);
        let fade = ((ratio - 2.0) / 2.0).clamp(0.0, 1.0);
        let fade = fade * fade * (3.0 - 2.0 * fade);
        if fade > 0.0 {
            let n = value_noise(seed.wrapping_add(o as u64 * 0x9e37), fu, fv);
            acc += amp * fade * (n - 0.5);
        }
        amp *= 0.55;
        freq *= 2.0;
        fu = fu * 2.0 + 11.7;
        fv = fv * 2.0 + 7.3;
    }
    (0.5 + (acc / total) * spec.contrast).clamp(0.03, 0.97)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_is_deterministic_and_bounded() {
        for i in 0..200 {
            let x = i as f64 * 0.173 - 10.0;
            let y = i as f64 * 0.311 + 3.0;
            let a = fbm(42, x, y, 3);
            let b = fbm(42, x, y, 3);
            assert_eq!(a, b);
            assert!((0.0..1.0).contains(&a));
        }
    }

    #[test]
    fn noise_is_continuous_across_lattice_cells() {
        let seed = 7;
        for i in 0..50 {
            let x = i as f64 * 0.7;
            let a = value_noise(seed, x, 2.0 - 1e-9);
            let b = value_noise(seed, x, 2.0 + 1e-9);
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn different_seeds_differ() {
        let a = fbm(1, 3.3, 4.4, 3);
        let b = fbm(2, 3.3, 4.4, 3);
        assert!((a - b).abs() > 1e-12);
    }
}
