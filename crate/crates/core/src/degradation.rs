//! Optical blurs and sensor-noise models.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{
    convolve2d, convolve_separable, gaussian_kernel_1d, to_u8, Kernel2d, Patch, RngStream,
};
use crate::photometric::hsv::{hsv_to_rgb, rgb_to_hsv};

/// Blur ranges. Kernel ranges are inclusive and only odd sizes are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlurParams {
    pub gaussian_kernel: [usize; 2],
    pub defocus_radius: [usize; 2],
    pub defocus_alias_blur: [f64; 2],
    pub motion_kernel: [usize; 2],
}

impl Default for BlurParams {
    fn default() -> Self {
        Self {
            gaussian_kernel: [1, 5],
            defocus_radius: [1, 4],
            defocus_alias_blur: [0.1, 0.3],
            motion_kernel: [3, 5],
        }
    }
}

/// Noise ranges. Gaussian noise std is on the 0-255 scale with zero mean.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub gauss_std: [f64; 2],
    pub iso_color_shift: [f64; 2],
    pub iso_intensity: [f64; 2],
    pub mult_range: [f64; 2],
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self {
            gauss_std: [10.0, 50.0],
            iso_color_shift: [0.01, 0.05],
            iso_intensity: [0.1, 0.4],
            mult_range: [0.95, 1.05],
        }
    }
}

/// Odd sizes in `[lo, hi]`.
pub fn odd_sizes(range: [usize; 2]) -> Vec<usize> {
    (range[0]..=range[1]).filter(|k| k % 2 == 1).collect()
}

pub fn gaussian_sigma(kernel: usize) -> f64 {
    0.3 * ((kernel as f64 - 1.0) / 2.0 - 1.0) + 0.8
}

fn check_odd(name: &str, kernel: usize) -> Result<()> {
    if kernel == 0 || kernel % 2 == 0 {
        return Err(Error::param(name, format!("kernel size {kernel} must be odd")));
    }
    Ok(())
}

/// Separable normalized Gaussian with sigma derived from the kernel size.
pub fn gaussian_blur(src: &Patch, kernel: usize) -> Result<Patch> {
    check_odd("gaussian_blur.kernel", kernel)?;
    if kernel == 1 {
        return Ok(src.clone());
    }
    let k = gaussian_kernel_1d(kernel, gaussian_sigma(kernel));
    Ok(convolve_separable(src, &k, &k))
}

/// A disc of the given radius on a `(2r+1)^2` support, smoothed by a 3-tap
/// Gaussian of std `alias_blur` (zero outside the support), unit mass.
pub fn defocus_kernel(radius: usize, alias_blur: f64) -> Result<Kernel2d> {
    if radius == 0 {
        return Err(Error::param("defocus.radius", "must be >= 1"));
    }
    if !(alias_blur > 0.0 && alias_blur.is_finite()) {
        return Err(Error::param("defocus.alias_blur", "must be finite and > 0"));
    }
    let size = 2 * radius + 1;
    let r = radius as i64;
    let disc: Vec<f64> = (0..size * size)
        .map(|i| {
            let (x, y) = ((i % size) as i64 - r, (i / size) as i64 - r);
            if x * x + y * y <= r * r {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let g = gaussian_kernel_1d(3, alias_blur);
    let at = |x: i64, y: i64| -> f64 {
        if x < 0 || y < 0 || x >= size as i64 || y >= size as i64 {
            0.0
        } else {
            disc[y as usize * size + x as usize]
        }
    };
    let taps = (0..size * size)
        .map(|i| {
            let (x, y) = ((i % size) as i64, (i / size) as i64);
            let mut acc = 0.0;
            for (j, gy) in g.iter().enumerate() {
                for (k, gx) in g.iter().enumerate() {
                    acc += gx * gy * at(x + k as i64 - 1, y + j as i64 - 1);
                }
            }
            acc
        })
        .collect();
    Ok(Kernel2d::new(size, taps).normalized())
}

pub fn defocus(src: &Patch, radius: usize, alias_blur: f64) -> Result<Patch> {
    Ok(convolve2d(src, &defocus_kernel(radius, alias_blur)?))
}

/// A rasterized line of `size` taps through the kernel center at `angle_deg`
/// (counter-clockwise from the +x axis), unit mass. One tap per step along
/// the dominant axis.
pub fn motion_kernel(size: usize, angle_deg: f64) -> Result<Kernel2d> {
    check_odd("motion_blur.kernel", size)?;
    if size < 3 {
        return Err(Error::param("motion_blur.kernel", "must be >= 3"));
    }
    let c = (size / 2) as i64;
    let t = angle_deg.to_radians();
    let (cos, sin) = (t.cos(), t.sin());
    let mut taps = vec![0.0; size * size];
    for i in -c..=c {
        let (x, y) = if cos.abs() >= sin.abs() {
            (i, (-(i as f64) * sin / cos).round() as i64)
        } else {
            ((-(i as f64) * cos / sin).round() as i64, -i)
        };
        taps[((c + y) * size as i64 + c + x) as usize] = 1.0;
    }
    Ok(Kernel2d::new(size, taps).normalized())
}

pub fn motion_blur(src: &Patch, kernel: usize, angle_deg: f64) -> Result<Patch> {
    Ok(convolve2d(src, &motion_kernel(kernel, angle_deg)?))
}

/// Draws a kernel size among the odd sizes of `range`, then an angle in
/// `[0, 360)`.
pub fn sample_motion(range: [usize; 2], rng: &mut RngStream) -> (usize, f64) {
    let sizes = odd_sizes(range);
    let k = sizes[rng.index(sizes.len())];
    (k, rng.uniform_range(0.0, 360.0))
}

/// Adds independent `N(0, std^2)` to every channel of every pixel, drawn
/// row-major, R then G then B.
pub fn gauss_noise(src: &Patch, std: f64, rng: &mut RngStream) -> Result<Patch> {
    if !(std >= 0.0 && std.is_finite()) {
        return Err(Error::param("gauss_noise.std", "must be finite and >= 0"));
    }
    Ok(src.map_pixels(|p| p.map(|c| to_u8(c as f64 + std * rng.normal()))))
}

/// Camera-sensor noise. Per pixel, in row-major order, two normals are
/// drawn: the first perturbs HSV value by `sqrt(V * intensity) * intensity`
/// (a Gaussian stand-in for shot noise, so variance grows with brightness),
/// the second shifts hue by `color_shift * 180` on the 0-180 scale.
pub fn iso_noise(src: &Patch, color_shift: f64, intensity: f64, rng: &mut RngStream) -> Result<Patch> {
    if !(color_shift >= 0.0 && color_shift.is_finite()) {
        return Err(Error::param("iso_noise.color_shift", "must be finite and >= 0"));
    }
    if !(intensity >= 0.0 && intensity.is_finite()) {
        return Err(Error::param("iso_noise.intensity", "must be finite and >= 0"));
    }
    Ok(src.map_pixels(|p| {
        let [h, s, v] = rgb_to_hsv(p);
        let zl = rng.normal();
        let zh = rng.normal();
        let v2 = (v + (v * intensity).sqrt() * intensity * zl).clamp(0.0, 255.0);
        let h2 = (h + color_shift * 180.0 * zh).rem_euclid(180.0);
        hsv_to_rgb([h2, s, v2]).map(to_u8)
    }))
}

/// Multiplies every channel by one factor.
pub fn scale_intensity(src: &Patch, m: f64) -> Patch {
    src.map_pixels(|p| p.map(|c| to_u8(m * c as f64)))
}

/// Draws a single factor for the whole image from `range`.
pub fn multiplicative_noise(src: &Patch, range: [f64; 2], rng: &mut RngStream) -> (Patch, f64) {
    let m = rng.uniform_range(range[0], range[1]);
    (scale_intensity(src, m), m)
}
