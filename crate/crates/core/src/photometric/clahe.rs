use serde::{Deserialize, Serialize};

use super::hsv::luma;
use crate::error::{Error, Result};
use crate::image::{to_u8, Patch};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClaheParams {
    /// Histogram clip height as a multiple of the mean bin height (tile pixels / 256).
    pub clip_limit: f64,
    /// Tiles per axis, `[columns, rows]`.
    pub tile_grid: [usize; 2],
}

impl Default for ClaheParams {
    fn default() -> Self {
        Self {
            clip_limit: 2.0,
            tile_grid: [4, 4],
        }
    }
}

impl ClaheParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.clip_limit > 0.0 && self.clip_limit.is_finite()) {
            return Err(Error::param("clip_limit", "must be finite and > 0"));
        }
        if self.tile_grid[0] == 0 || self.tile_grid[1] == 0 {
            return Err(Error::param("tile_grid", "dimensions must be >= 1"));
        }
        Ok(())
    }
}

/// Clipped-histogram lookup table for one tile.
///
/// Bins above `clip_limit * n / 256` are cut and the excess is spread evenly
/// over all 256 bins in a single pass. The table then reads the clipped CDF
/// at fraction `i / 255` inside bin `i`:
///
/// `lut[i] = 255 * (C(i - 1) + h(i) * i / 255) / n`
///
/// With this normalization `lut[0] = 0`, `lut[255] = 255`, a flat histogram
/// yields the identity, and a tile holding a single level `v` maps `v` to
/// itself whatever the clip limit.
pub fn tile_lut(hist: &[u32; 256], clip_limit: f64) -> [f64; 256] {
    let n: f64 = hist.iter().map(|&c| c as f64).sum();
    let mut lut = [0.0; 256];
    if n == 0.0 {
        for (i, v) in lut.iter_mut().enumerate() {
            *v = i as f64;
        }
        return lut;
    }
    let limit = clip_limit * n / 256.0;
    let excess: f64 = hist.iter().map(|&c| (c as f64 - limit).max(0.0)).sum();
    let bonus = excess / 256.0;
    let mut below = 0.0;
    for (i, v) in lut.iter_mut().enumerate() {
        let h = (hist[i] as f64).min(limit) + bonus;
        *v = (255.0 * (below + h * i as f64 / 255.0) / n).clamp(0.0, 255.0);
        below += h;
    }
    lut
}

fn tile_bounds(len: usize, tiles: usize) -> Vec<usize> {
    (0..=tiles).map(|i| i * len / tiles).collect()
}

/// Interpolation position between neighboring tile centers.
fn blend_index(pos: f64, centers: &[f64]) -> (usize, usize, f64) {
    let last = centers.len() - 1;
    if pos <= centers[0] {
        return (0, 0, 0.0);
    }
    if pos >= centers[last] {
        return (last, last, 0.0);
    }
    let j = centers.partition_point(|&c| c <= pos) - 1;
    (j, j + 1, (pos - centers[j]) / (centers[j + 1] - centers[j]))
}

/// Contrast-limited adaptive equalization of the luma plane. Each pixel's
/// luma change is added to all three channels, so chroma differences are
/// kept (up to clamping).
pub fn clahe(src: &Patch, p: &ClaheParams) -> Result<Patch> {
    p.validate()?;
    let [gx, gy] = p.tile_grid;
    let (w, h) = (src.width(), src.height());
    if w < gx || h < gy {
        return Err(Error::Shape(format!(
            "patch {w}x{h} is smaller than the {gx}x{gy} tile grid"
        )));
    }
    let lum: Vec<u8> = src.pixels().map(|px| to_u8(luma(px))).collect();
    let xb = tile_bounds(w, gx);
    let yb = tile_bounds(h, gy);

    let mut luts = Vec::with_capacity(gx * gy);
    for ty in 0..gy {
        for tx in 0..gx {
            let mut hist = [0u32; 256];
            for y in yb[ty]..yb[ty + 1] {
                for x in xb[tx]..xb[tx + 1] {
                    hist[lum[y * w + x] as usize] += 1;
                }
            }
            luts.push(tile_lut(&hist, p.clip_limit));
        }
    }

    let centers = |b: &[usize]| -> Vec<f64> {
        b.windows(2).map(|s| (s[0] + s[1] - 1) as f64 / 2.0).collect()
    };
    let cx = centers(&xb);
    let cy = centers(&yb);
    let xs: Vec<_> = (0..w).map(|x| blend_index(x as f64, &cx)).collect();
    let ys: Vec<_> = (0..h).map(|y| blend_index(y as f64, &cy)).collect();

    Ok(Patch::from_fn(w, h, |x, y| {
        let l = lum[y * w + x];
        let (x0, x1, fx) = xs[x];
        let (y0, y1, fy) = ys[y];
        let at = |tx: usize, ty: usize| luts[ty * gx + tx][l as usize];
        let top = at(x0, y0) * (1.0 - fx) + at(x1, y0) * fx;
        let bottom = at(x0, y1) * (1.0 - fx) + at(x1, y1) * fx;
        let delta = to_u8(top * (1.0 - fy) + bottom * fy) as f64 - l as f64;
        let px = src.pixel(x, y);
        px.map(|c| to_u8(c as f64 + delta))
    }))
}
