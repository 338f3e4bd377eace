use std::io::Write;
use std::path::Path;

use byteorder::{LittleEndian, WriteBytesExt};

use crate::error::{Error, Result};

/// Linear RGBA image, row-major from the top-left.
#[derive(Clone, Debug, PartialEq)]
pub struct RgbaImage {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<[f32; 4]>,
}

impl RgbaImage {
    pub fn filled(width: u32, height: u32, rgba: [f32; 4]) -> Self {
        RgbaImage { width, height, pixels: vec![rgba; width as usize * height as usize] }
    }

    pub fn get(&self, x: u32, y: u32) -> [f32; 4] {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    /// 8-bit RGBA bytes, channels clamped to `[0, 1]` and rounded.
    pub fn to_rgba8(&self) -> Vec<u8> {
        self.pixels.iter().flat_map(|p| p.map(|c| (c.clamp(0.0, 1.0) * 255.0).round() as u8)).collect()
    }

    pub fn encode_png(&self) -> Result<Vec<u8>> {
        let mut out = std::io::Cursor::new(Vec::new());
        image::write_buffer_with_format(
            &mut out,
            &self.to_rgba8(),
            self.width,
            self.height,
            image::ExtendedColorType::Rgba8,
            image::ImageFormat::Png,
        )?;
        Ok(out.into_inner())
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.encode_png()?).map_err(|e| Error::io(path, e))
    }

    /// Full-precision dump: `width u32, height u32`, then `f32` RGBA pixels,
    /// all little-endian.
    pub fn write_raw(&self, mut w: impl Write) -> Result<()> {
        let io = |e| Error::io("<raw image>", e);
        w.write_u32::<LittleEndian>(self.width).map_err(io)?;
        w.write_u32::<LittleEndian>(self.height).map_err(io)?;
        for p in &self.pixels {
            for c in p {
                w.write_f32::<LittleEndian>(*c).map_err(io)?;
            }
        }
        Ok(())
    }

    /// Rec. 601 luma of every pixel.
    pub fn luminance(&self) -> Vec<f64> {
        self.pixels.iter().map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64).collect()
    }
}

fn check_same(a: &RgbaImage, b: &RgbaImage) -> Result<()> {
    if (a.width, a.height) != (b.width, b.height) {
        return Err(Error::argument(format!(
            "image sizes {}x{} and {}x{} differ",
            a.width, a.height, b.width, b.height
        )));
    }
    Ok(())
}

/// PSNR over the RGB channels with peak 1; identical images give infinity.
pub fn image_psnr(a: &RgbaImage, b: &RgbaImage) -> Result<f64> {
    check_same(a, b)?;
    let sum: f64 = a
        .pixels
        .iter()
        .zip(&b.pixels)
        .map(|(p, q)| (0..3).map(|c| (p[c] as f64 - q[c] as f64).powi(2)).sum::<f64>())
        .sum();
    let mse = sum / (3 * a.pixels.len()) as f64;
    Ok(if mse == 0.0 { f64::INFINITY } else { 10.0 * (1.0 / mse).log10() })
}

const SSIM_RADIUS: usize = 5;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;

/// Separable blur with a normalized 11-tap Gaussian; borders are handled by
/// renormalizing over the taps that fall inside the image.
fn gaussian_blur(src: &[f64], w: usize, h: usize) -> Vec<f64> {
    let taps: Vec<f64> = (0..=2 * SSIM_RADIUS)
        .map(|i| {
            let d = i as f64 - SSIM_RADIUS as f64;
            (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()
        })
        .collect();
    let pass = |src: &[f64], horizontal: bool| -> Vec<f64> {
        let mut out = vec![0.0; src.len()];
        for y in 0..h {
            for x in 0..w {
                let (mut acc, mut norm) = (0.0, 0.0);
                for (k, &t) in taps.iter().enumerate() {
                    let o = k as isize - SSIM_RADIUS as isize;
                    let (sx, sy) = if horizontal { (x as isize + o, y as isize) } else { (x as isize, y as isize + o) };
                    if sx >= 0 && sy >= 0 && (sx as usize) < w && (sy as usize) < h {
                        acc += t * src[sy as usize * w + sx as usize];
                        norm += t;
                    }
                }
                out[y * w + x] = acc / norm;
            }
        }
        out
    };
    pass(&pass(src, true), false)
}

/// Mean single-scale SSIM of two luminance planes.
pub fn ssim_plane(a: &[f64], b: &[f64], w: usize, h: usize) -> f64 {
    let mul = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).collect::<Vec<_>>();
    let (mu_a, mu_b) = (gaussian_blur(a, w, h), gaussian_blur(b, w, h));
    let (aa, bb, ab) =
        (gaussian_blur(&mul(a, a), w, h), gaussian_blur(&mul(b, b), w, h), gaussian_blur(&mul(a, b), w, h));
    let mut total = 0.0;
    for i in 0..a.len() {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = aa[i] - ma * ma;
        let vb = bb[i] - mb * mb;
        let cov = ab[i] - ma * mb;
        total +=
            ((2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2)) / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2));
    }
    total / a.len() as f64
}

pub fn image_ssim(a: &RgbaImage, b: &RgbaImage) -> Result<f64> {
    check_same(a, b)?;
    Ok(ssim_plane(&a.luminance(), &b.luminance(), a.width as usize, a.height as usize))
}

/// `(PSNR in dB, SSIM)`.
pub fn image_psnr_ssim(a: &RgbaImage, b: &RgbaImage) -> Result<(f64, f64)> {
    Ok((image_psnr(a, b)?, image_ssim(a, b)?))
}
