//! PFM (portable float map) and binary PPM writers for inspection output.

use std::io::Write;
use std::path::Path;

use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Writes a `[1,H,W]` or `[3,H,W]` tensor as PFM (little-endian, rows
/// bottom-to-top per the format).
pub fn write_pfm<S: Scalar>(path: &Path, image: &Tensor<S>) -> std::io::Result<()> {
    let shape = image.shape();
    assert!(
        shape.len() == 3 && (shape[0] == 1 || shape[0] == 3),
        "pfm wants [1|3,H,W], got {shape:?}"
    );
    let (c, h, w) = (shape[0], shape[1], shape[2]);
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    let header = if c == 3 { "PF" } else { "Pf" };
    write!(file, "{header}\n{w} {h}\n-1.0\n")?;
    let data = image.data();
    for y in (0..h).rev() {
        for x in 0..w {
            for ch in 0..c {
                let v = data[ch * h * w + y * w + x].to_f64().unwrap_or(0.0) as f32;
                file.write_all(&v.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

/// Reads a PFM written by [`write_pfm`] back into `(channels, H, W, data)`.
pub fn read_pfm(path: &Path) -> std::io::Result<(usize, usize, usize, Vec<f64>)> {
    let bytes = std::fs::read(path)?;
    let err = |msg: &str| std::io::Error::new(std::io::ErrorKind::InvalidData, msg.to_string());
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 && pos < bytes.len() {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).to_string());
    }
    if fields.len() != 4 {
        return Err(err("truncated pfm header"));
    }
    let c = match fields[0].as_str() {
        "PF" => 3,
        "Pf" => 1,
        _ => return Err(err("bad pfm magic")),
    };
    let w: usize = fields[1].parse().map_err(|_| err("bad width"))?;
    let h: usize = fields[2].parse().map_err(|_| err("bad height"))?;
    let scale: f64 = fields[3].parse().map_err(|_| err("bad scale"))?;
    if scale >= 0.0 {
        return Err(err("big-endian pfm not supported"));
    }
    let mut data = vec![0.0f64; c * h * w];
    // payload starts after the single whitespace that terminates the header
    let mut offset = pos + 1;
    // rows are stored bottom-to-top
    for y in (0..h).rev() {
        for x in 0..w {
            for ch in 0..c {
                let v = f32::from_le_bytes(
                    bytes
                        .get(offset..offset + 4)
                        .ok_or_else(|| err("truncated pfm payload"))?
                        .try_into()
                        .unwrap(),
                );
                data[ch * h * w + y * w + x] = v as f64;
                offset += 4;
            }
        }
    }
    Ok((c, h, w, data))
}

/// Writes a `[1,H,W]` or `[3,H,W]` tensor in `[0,1]` as binary PPM (P6).
pub fn write_ppm<S: Scalar>(path: &Path, image: &Tensor<S>) -> std::io::Result<()> {
    let shape = image.shape();
    assert!(
        shape.len() == 3 && (shape[0] == 1 || shape[0] == 3),
        "ppm wants [1|3,H,W], got {shape:?}"
    );
    let (c, h, w) = (shape[0], shape[1], shape[2]);
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(file, "P6\n{w} {h}\n255\n")?;
    let data = image.data();
    let byte = |v: S| (v.to_f64().unwrap_or(0.0).clamp(0.0, 1.0) * 255.0).round() as u8;
    for y in 0..h {
        for x in 0..w {
            let idx = y * w + x;
            if c == 3 {
                for ch in 0..3 {
                    file.write_all(&[byte(data[ch * h * w + idx])])?;
                }
            } else {
                let g = byte(data[idx]);
                file.write_all(&[g, g, g])?;
            }
        }
    }
    Ok(())
}

/// Blue (low) to red (high) ramp for error visualization; `t` in `[0,1]`.
pub fn error_color(t: f64) -> (u8, u8, u8) {
    let t = t.clamp(0.0, 1.0);
    let r = (255.0 * t.powf(0.7)) as u8;
    let g = (255.0 * (1.0 - (2.0 * t - 1.0).abs()).max(0.0) * 0.8) as u8;
    let b = (255.0 * (1.0 - t).powf(0.7)) as u8;
    (r, g, b)
}

/// Writes a scalar map as a color-ramped PPM; values are normalized by
/// `max_value` before mapping.
pub fn write_error_ppm<S: Scalar>(
    path: &Path,
    map: &Tensor<S>,
    max_value: f64,
) -> std::io::Result<()> {
    let shape = map.shape();
    assert!(shape.len() == 3 && shape[0] == 1, "error map wants [1,H,W]");
    let (h, w) = (shape[1], shape[2]);
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(file, "P6\n{w} {h}\n255\n")?;
    let norm = if max_value > 0.0 { max_value } else { 1.0 };
    for &v in map.data() {
        let (r, g, b) = error_color(v.to_f64().unwrap_or(0.0) / norm);
        file.write_all(&[r, g, b])?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pfm_roundtrip() {
        let dir = std::env::temp_dir().join("ringdepth_pfm_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("x.pfm");
        let img = Tensor::from_vec(vec![1, 2, 3], vec![0.5f64, 1.5, -2.0, 3.25, 0.0, 9.0]).unwrap();
        write_pfm(&path, &img).unwrap();
        let (c, h, w, data) = read_pfm(&path).unwrap();
        assert_eq!((c, h, w), (1, 2, 3));
        assert_eq!(data, img.data());
    }

    #[test]
    fn ppm_header_and_size() {
        let dir = std::env::temp_dir().join("ringdepth_ppm_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("x.ppm");
        let img = Tensor::<f64>::full(vec![3, 4, 5], 0.5);
        write_ppm(&path, &img).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert!(bytes.starts_with(b"P6\n5 4\n255\n"));
        assert_eq!(bytes.len(), 11 + 3 * 4 * 5);
    }
}
