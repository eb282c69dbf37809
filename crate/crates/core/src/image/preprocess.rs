use super::patch::{to_u8, NormalizedTensor, Patch};
use super::remap::Interpolation;
use crate::error::{Error, Result};

pub const IMAGENET_MEAN: [f64; 3] = [0.485, 0.456, 0.406];
pub const IMAGENET_STD: [f64; 3] = [0.229, 0.224, 0.225];
pub const TENSOR_SIZE: usize = 224;

/// Square window of side `size` at offset `floor((dim - size) / 2)` on each
/// axis; odd remainders leave the extra pixel on the bottom/right.
pub fn center_crop(src: &Patch, size: usize) -> Result<Patch> {
    if size == 0 {
        return Err(Error::param("crop.size", "must be at least 1"));
    }
    if size > src.width() || size > src.height() {
        return Err(Error::Shape(format!(
            "crop size {size} exceeds patch extent {}x{}",
            src.width(),
            src.height()
        )));
    }
    let x0 = (src.width() - size) / 2;
    let y0 = (src.height() - size) / 2;
    Ok(Patch::from_fn(size, size, |x, y| src.pixel(x0 + x, y0 + y)))
}

/// Resizes with pixel-center alignment: `src = (dst + 0.5) * scale - 0.5`,
/// edge-clamped. Same-size bilinear resizing is an exact copy.
pub fn resize(src: &Patch, target_w: usize, target_h: usize, interp: Interpolation) -> Result<Patch> {
    if target_w == 0 || target_h == 0 {
        return Err(Error::param("resize.target", "dimensions must be at least 1"));
    }
    let (sw, sh) = (src.width(), src.height());
    let sx = sw as f64 / target_w as f64;
    let sy = sh as f64 / target_h as f64;
    match interp {
        Interpolation::Nearest => {
            let xs: Vec<usize> = (0..target_w)
                .map(|x| (((x as f64 + 0.5) * sx).floor() as usize).min(sw - 1))
                .collect();
            let ys: Vec<usize> = (0..target_h)
                .map(|y| (((y as f64 + 0.5) * sy).floor() as usize).min(sh - 1))
                .collect();
            Ok(Patch::from_fn(target_w, target_h, |x, y| src.pixel(xs[x], ys[y])))
        }
        Interpolation::Bilinear => {
            let taps = |n: usize, scale: f64, len: usize| -> Vec<(usize, usize, f64)> {
                (0..n)
                    .map(|d| {
                        let s = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, (len - 1) as f64);
                        let i0 = s.floor() as usize;
                        let i1 = (i0 + 1).min(len - 1);
                        (i0, i1, s - i0 as f64)
                    })
                    .collect()
            };
            let xt = taps(target_w, sx, sw);
            let yt = taps(target_h, sy, sh);
            Ok(Patch::from_fn(target_w, target_h, |x, y| {
                let (x0, x1, fx) = xt[x];
                let (y0, y1, fy) = yt[y];
                let mut out = [0u8; 3];
                for (c, o) in out.iter_mut().enumerate() {
                    let p00 = src.channel(x0, y0, c) as f64;
                    let p10 = src.channel(x1, y0, c) as f64;
                    let p01 = src.channel(x0, y1, c) as f64;
                    let p11 = src.channel(x1, y1, c) as f64;
                    let top = p00 + (p10 - p00) * fx;
                    let bottom = p01 + (p11 - p01) * fx;
                    *o = to_u8(top + (bottom - top) * fy);
                }
                out
            }))
        }
    }
}

/// `(pixel / 255 - mean_c) / std_c` into a 3x224x224 planar tensor.
pub fn normalize_imagenet(src: &Patch) -> Result<NormalizedTensor> {
    if src.width() != TENSOR_SIZE || src.height() != TENSOR_SIZE {
        return Err(Error::Shape(format!(
            "normalization expects {TENSOR_SIZE}x{TENSOR_SIZE}, got {}x{}",
            src.width(),
            src.height()
        )));
    }
    let n = TENSOR_SIZE * TENSOR_SIZE;
    let mut values = vec![0f32; 3 * n];
    for (i, px) in src.pixels().enumerate() {
        for c in 0..3 {
            values[c * n + i] =
                ((px[c] as f64 / 255.0 - IMAGENET_MEAN[c]) / IMAGENET_STD[c]) as f32;
        }
    }
    NormalizedTensor::new(3, TENSOR_SIZE, TENSOR_SIZE, values)
}
