//! Dihedral symmetries, rotations and the warping transforms (shift/scale/
//! rotate, elastic, grid and optical distortion).
//!
//! Every warp builds a [`DisplacementField`] and resamples once through
//! [`remap`] with bilinear interpolation and reflect-101 borders. Random draws
//! are taken from the supplied stream in a fixed order, documented on each
//! function.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{
    gaussian_kernel_1d, remap, Border, DisplacementField, Interpolation, Patch, RngStream,
};

const INTERP: Interpolation = Interpolation::Bilinear;
const BORDER: Border = Border::Reflect;

/// An element of the dihedral group of the square: an optional horizontal
/// flip followed by `quarter_turns` counter-clockwise 90° rotations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct D4Element {
    quarter_turns: u8,
    flip: bool,
}

impl D4Element {
    pub const IDENTITY: D4Element = D4Element {
        quarter_turns: 0,
        flip: false,
    };

    pub fn new(quarter_turns: u8, flip: bool) -> Self {
        Self {
            quarter_turns: quarter_turns % 4,
            flip,
        }
    }

    pub fn rotation(quarter_turns: u8) -> Self {
        Self::new(quarter_turns, false)
    }

    /// All eight elements; index `i` is `(i % 4 quarter turns, flip = i >= 4)`.
    pub fn all() -> [D4Element; 8] {
        std::array::from_fn(|i| Self::new((i % 4) as u8, i >= 4))
    }

    pub fn from_index(i: usize) -> Self {
        Self::all()[i % 8]
    }

    pub fn quarter_turns(&self) -> u8 {
        self.quarter_turns
    }

    pub fn flip(&self) -> bool {
        self.flip
    }

    pub fn rotation_degrees(&self) -> u16 {
        self.quarter_turns as u16 * 90
    }

    /// The element equivalent to applying `self` and then `next`.
    pub fn then(self, next: D4Element) -> D4Element {
        // a flip conjugates a rotation into its inverse
        let carried = if next.flip {
            (4 - self.quarter_turns) % 4
        } else {
            self.quarter_turns
        };
        Self::new(next.quarter_turns + carried, self.flip ^ next.flip)
    }

    pub fn inverse(self) -> D4Element {
        if self.flip {
            self
        } else {
            Self::new((4 - self.quarter_turns) % 4, false)
        }
    }
}

fn flip_horizontal(src: &Patch) -> Patch {
    let w = src.width();
    Patch::from_fn(w, src.height(), |x, y| src.pixel(w - 1 - x, y))
}

fn rot90_ccw(src: &Patch) -> Patch {
    let w = src.width();
    Patch::from_fn(src.height(), w, |x, y| src.pixel(w - 1 - y, x))
}

/// Exact pixel permutation; 90° and 270° swap width and height.
pub fn d4_apply(src: &Patch, e: D4Element) -> Patch {
    let mut out = if e.flip {
        flip_horizontal(src)
    } else {
        src.clone()
    };
    for _ in 0..e.quarter_turns {
        out = rot90_ccw(&out);
    }
    out
}

fn center(src: &Patch) -> (f64, f64) {
    ((src.width() as f64 - 1.0) / 2.0, (src.height() as f64 - 1.0) / 2.0)
}

/// Resamples through an affine map from output to source coordinates:
/// `src = [m0 m1; m3 m4] * dst + (m2, m5)`.
fn warp_affine(src: &Patch, m: [f64; 6]) -> Patch {
    let field = DisplacementField::from_fn(src.width(), src.height(), |x, y| {
        let (xf, yf) = (x as f64, y as f64);
        (
            m[0] * xf + m[1] * yf + m[2] - xf,
            m[3] * xf + m[4] * yf + m[5] - yf,
        )
    });
    remap(src, &field, INTERP, BORDER).expect("field extent matches source")
}

fn rotation_sampling(angle_deg: f64) -> (f64, f64) {
    if angle_deg == 0.0 {
        return (1.0, 0.0);
    }
    let t = angle_deg.to_radians();
    (t.cos(), t.sin())
}

/// Counter-clockwise rotation about the patch center, extent unchanged.
pub fn rotate(src: &Patch, angle_deg: f64) -> Patch {
    shift_scale_rotate_unchecked(
        src,
        &ShiftScaleRotateParams {
            shift_x: 0.0,
            shift_y: 0.0,
            scale: 1.0,
            angle: angle_deg,
        },
    )
}

/// Resolved shift/scale/rotate draw. Shifts are fractions of the patch
/// extent, `angle` is in degrees counter-clockwise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftScaleRotateParams {
    pub shift_x: f64,
    pub shift_y: f64,
    pub scale: f64,
    pub angle: f64,
}

impl ShiftScaleRotateParams {
    pub const NEUTRAL: Self = Self {
        shift_x: 0.0,
        shift_y: 0.0,
        scale: 1.0,
        angle: 0.0,
    };
}

/// Symmetric sampling ranges: shift ±`shift`, scale `1 ± scale`, angle ±`rotate`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftScaleRotateLimits {
    pub shift: f64,
    pub scale: f64,
    pub rotate: f64,
}

impl Default for ShiftScaleRotateLimits {
    fn default() -> Self {
        Self {
            shift: 0.08,
            scale: 0.15,
            rotate: 30.0,
        }
    }
}

impl ShiftScaleRotateLimits {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.shift) {
            return Err(Error::param("shift_limit", "must lie in [0, 1)"));
        }
        if !(0.0..1.0).contains(&self.scale) {
            return Err(Error::param("scale_limit", "must lie in [0, 1)"));
        }
        if !(0.0..=180.0).contains(&self.rotate) {
            return Err(Error::param("rotate_limit", "must lie in [0, 180]"));
        }
        Ok(())
    }

    pub fn check(&self, p: &ShiftScaleRotateParams) -> Result<()> {
        let within = |v: f64, lo: f64, hi: f64| v.is_finite() && v >= lo && v <= hi;
        if !within(p.shift_x, -self.shift, self.shift) {
            return Err(Error::param("shift_x", format!("{} outside ±{}", p.shift_x, self.shift)));
        }
        if !within(p.shift_y, -self.shift, self.shift) {
            return Err(Error::param("shift_y", format!("{} outside ±{}", p.shift_y, self.shift)));
        }
        if !within(p.scale, 1.0 - self.scale, 1.0 + self.scale) {
            return Err(Error::param("scale", format!("{} outside 1±{}", p.scale, self.scale)));
        }
        if !within(p.angle, -self.rotate, self.rotate) {
            return Err(Error::param("angle", format!("{} outside ±{}", p.angle, self.rotate)));
        }
        Ok(())
    }

    /// Draws shift_x, shift_y, scale, angle in that order.
    pub fn sample(&self, rng: &mut RngStream) -> ShiftScaleRotateParams {
        ShiftScaleRotateParams {
            shift_x: rng.uniform_range(-self.shift, self.shift),
            shift_y: rng.uniform_range(-self.shift, self.shift),
            scale: rng.uniform_range(1.0 - self.scale, 1.0 + self.scale),
            angle: rng.uniform_range(-self.rotate, self.rotate),
        }
    }
}

/// Scale about the center, rotate, then translate, as one resampling pass.
/// Parameters are checked against the default ranges.
pub fn shift_scale_rotate(src: &Patch, p: &ShiftScaleRotateParams) -> Result<Patch> {
    ShiftScaleRotateLimits::default().check(p)?;
    Ok(shift_scale_rotate_unchecked(src, p))
}

pub(crate) fn shift_scale_rotate_unchecked(src: &Patch, p: &ShiftScaleRotateParams) -> Patch {
    let (cx, cy) = center(src);
    let (cos, sin) = rotation_sampling(p.angle);
    let (a, b, c, d) = (cos / p.scale, -sin / p.scale, sin / p.scale, cos / p.scale);
    let tx = cx + p.shift_x * src.width() as f64;
    let ty = cy + p.shift_y * src.height() as f64;
    warp_affine(src, [a, b, cx - (a * tx + b * ty), c, d, cy - (c * tx + d * ty)])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElasticParams {
    pub alpha: f64,
    pub sigma: f64,
    pub alpha_affine: f64,
}

impl Default for ElasticParams {
    fn default() -> Self {
        Self {
            alpha: 40.0,
            sigma: 4.0,
            alpha_affine: 8.0,
        }
    }
}

impl ElasticParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::param("alpha", "must be finite and >= 0"));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::param("sigma", "must be finite and > 0"));
        }
        if !(self.alpha_affine >= 0.0 && self.alpha_affine.is_finite()) {
            return Err(Error::param("alpha_affine", "must be finite and >= 0"));
        }
        Ok(())
    }

    /// Gaussian support truncated at 4 sigma.
    pub fn kernel_size(&self) -> usize {
        2 * (4.0 * self.sigma).ceil() as usize + 1
    }
}

/// The two additive components of an elastic warp.
#[derive(Clone, Debug)]
pub struct ElasticField {
    pub smooth: DisplacementField,
    pub affine: DisplacementField,
}

impl ElasticField {
    pub fn total(&self) -> DisplacementField {
        &self.smooth + &self.affine
    }
}

/// Draw order: `w*h` uniforms for the x noise (row-major), `w*h` for y, then
/// the (x, y) displacement of corners (0,0), (w-1,0), (0,h-1).
pub fn elastic_field(width: usize, height: usize, p: &ElasticParams, rng: &mut RngStream) -> Result<ElasticField> {
    p.validate()?;
    let n = width * height;
    let noise_x: Vec<f64> = (0..n).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
    let noise_y: Vec<f64> = (0..n).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
    let k = gaussian_kernel_1d(p.kernel_size(), p.sigma);
    let smooth = |noise: &[f64]| -> Vec<f64> {
        crate::image::smooth_plane(noise, width, height, &k, &k)
            .into_iter()
            .map(|v| v * p.alpha)
            .collect()
    };
    let smooth = DisplacementField::new(width, height, smooth(&noise_x), smooth(&noise_y))?;

    let a = p.alpha_affine;
    let mut corner = || (rng.uniform_range(-a, a), rng.uniform_range(-a, a));
    let d0 = corner();
    let d1 = corner();
    let d2 = corner();
    // affine displacement interpolating the three corners exactly
    let col = |d: (f64, f64), len: usize| {
        if len > 1 {
            ((d.0 - d0.0) / (len - 1) as f64, (d.1 - d0.1) / (len - 1) as f64)
        } else {
            (0.0, 0.0)
        }
    };
    let gx = col(d1, width);
    let gy = col(d2, height);
    let affine = DisplacementField::from_fn(width, height, |x, y| {
        let (xf, yf) = (x as f64, y as f64);
        (d0.0 + gx.0 * xf + gy.0 * yf, d0.1 + gx.1 * xf + gy.1 * yf)
    });
    Ok(ElasticField { smooth, affine })
}

pub fn elastic(src: &Patch, p: &ElasticParams, rng: &mut RngStream) -> Result<Patch> {
    let field = elastic_field(src.width(), src.height(), p, rng)?;
    remap(src, &field.total(), INTERP, BORDER)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridDistortionParams {
    pub num_steps: usize,
    pub distort_limit: f64,
}

impl Default for GridDistortionParams {
    fn default() -> Self {
        Self {
            num_steps: 5,
            distort_limit: 0.2,
        }
    }
}

impl GridDistortionParams {
    pub fn validate(&self) -> Result<()> {
        if self.num_steps < 1 {
            return Err(Error::param("num_steps", "must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.distort_limit) {
            return Err(Error::param("distort_limit", "must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Source-space node positions for one axis. Node 0 and node `steps` stay
/// pinned at `0` and `len - 1`.
fn distorted_nodes(len: usize, factors: &[f64]) -> Vec<f64> {
    let span = (len - 1) as f64;
    let total: f64 = factors.iter().sum();
    let mut acc = 0.0;
    let mut nodes = vec![0.0];
    for f in factors {
        acc += f;
        nodes.push(span * acc / total);
    }
    nodes
}

fn axis_offsets(len: usize, nodes: &[f64]) -> Vec<f64> {
    let steps = nodes.len() - 1;
    if len == 1 {
        return vec![0.0];
    }
    let span = (len - 1) as f64;
    let nominal: Vec<f64> = (0..=steps).map(|i| span * i as f64 / steps as f64).collect();
    (0..len)
        .map(|x| {
            let xf = x as f64;
            let i = ((xf * steps as f64 / span).floor() as usize).min(steps - 1);
            let t = (xf - nominal[i]) / (nominal[i + 1] - nominal[i]);
            (nodes[i] - nominal[i]) * (1.0 - t) + (nodes[i + 1] - nominal[i + 1]) * t
        })
        .collect()
}

/// Node grids of a grid distortion, per axis, in source coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct GridNodes {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// Draw order: `num_steps` cell factors for x, then `num_steps` for y.
pub fn grid_nodes(width: usize, height: usize, p: &GridDistortionParams, rng: &mut RngStream) -> Result<GridNodes> {
    p.validate()?;
    let mut factors = || -> Vec<f64> {
        (0..p.num_steps)
            .map(|_| 1.0 + rng.uniform_range(-p.distort_limit, p.distort_limit))
            .collect()
    };
    let fx = factors();
    let fy = factors();
    Ok(GridNodes {
        x: distorted_nodes(width.max(1), &fx),
        y: distorted_nodes(height.max(1), &fy),
    })
}

pub fn grid_field(width: usize, height: usize, nodes: &GridNodes) -> DisplacementField {
    let ox = axis_offsets(width, &nodes.x);
    let oy = axis_offsets(height, &nodes.y);
    DisplacementField::from_fn(width, height, |x, y| (ox[x], oy[y]))
}

pub fn grid_distortion(src: &Patch, p: &GridDistortionParams, rng: &mut RngStream) -> Result<Patch> {
    let nodes = grid_nodes(src.width(), src.height(), p, rng)?;
    remap(src, &grid_field(src.width(), src.height(), &nodes), INTERP, BORDER)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpticalDistortionParams {
    pub distort_limit: f64,
}

impl Default for OpticalDistortionParams {
    fn default() -> Self {
        Self { distort_limit: 0.15 }
    }
}

impl OpticalDistortionParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.distort_limit) {
            return Err(Error::param("distort_limit", "must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn sample_k(&self, rng: &mut RngStream) -> f64 {
        rng.uniform_range(-self.distort_limit, self.distort_limit)
    }
}

/// Source radius whose image under `r -> r (1 + k (r/R)^2)` is `rho`.
/// Beyond the fold point of a barrel model (k < 0) the fold radius is used.
fn inverse_radius(rho: f64, k: f64, big_r: f64) -> f64 {
    let forward = |r: f64| r * (1.0 + k * (r / big_r).powi(2));
    let mut hi = if k < 0.0 {
        big_r / (3.0 * -k).sqrt()
    } else {
        rho
    };
    if forward(hi) <= rho {
        return hi;
    }
    let mut lo = 0.0;
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if forward(mid) < rho {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Radial field moving content at radius `r` to `r (1 + k (r/R)^2)`, with `R`
/// the half-diagonal and the patch center fixed.
pub fn optical_field(width: usize, height: usize, k: f64) -> DisplacementField {
    if k == 0.0 {
        return DisplacementField::zeros(width, height);
    }
    let cx = (width as f64 - 1.0) / 2.0;
    let cy = (height as f64 - 1.0) / 2.0;
    let big_r = (cx * cx + cy * cy).sqrt().max(f64::MIN_POSITIVE);
    DisplacementField::from_fn(width, height, |x, y| {
        let (u, v) = (x as f64 - cx, y as f64 - cy);
        let rho = u.hypot(v);
        if rho == 0.0 {
            return (0.0, 0.0);
        }
        let f = inverse_radius(rho, k, big_r) / rho - 1.0;
        (u * f, v * f)
    })
}

pub fn optical_distortion_with_k(src: &Patch, k: f64) -> Patch {
    remap(src, &optical_field(src.width(), src.height(), k), INTERP, BORDER)
        .expect("field extent matches source")
}

/// Draws one coefficient `k ~ U(-limit, limit)`.
pub fn optical_distortion(src: &Patch, p: &OpticalDistortionParams, rng: &mut RngStream) -> Result<Patch> {
    p.validate()?;
    let k = p.sample_k(rng);
    Ok(optical_distortion_with_k(src, k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::make_rng;

    fn textured(w: usize, h: usize) -> Patch {
        Patch::from_fn(w, h, |x, y| {
            [
                ((x * 37 + y * 11) % 256) as u8,
                ((x * x + 3 * y) % 256) as u8,
                ((x ^ (y * 5)) % 256) as u8,
            ]
        })
    }

    #[test]
    fn d4_identity_and_order() {
        let src = textured(5, 3);
        assert_eq!(d4_apply(&src, D4Element::IDENTITY), src);
        let r = D4Element::rotation(1);
        let mut x = src.clone();
        for _ in 0..4 {
            x = d4_apply(&x, r);
        }
        assert_eq!(x, src);
        let rotated = d4_apply(&src, r);
        assert_eq!((rotated.width(), rotated.height()), (3, 5));
    }

    #[test]
    fn d4_flip_on_2x2() {
        let src = Patch::new(2, 2, [1, 2, 3, 4].iter().flat_map(|&v| [v; 3]).collect()).unwrap();
        let flipped = d4_apply(&src, D4Element::new(0, true));
        let values: Vec<u8> = flipped.pixels().map(|p| p[0]).collect();
        assert_eq!(values, vec![2, 1, 4, 3]);
        let rot = d4_apply(&src, D4Element::rotation(1));
        let values: Vec<u8> = rot.pixels().map(|p| p[0]).collect();
        assert_eq!(values, vec![2, 4, 1, 3]);
    }

    #[test]
    fn d4_composition_matches_pixels() {
        let src = textured(4, 3);
        for a in D4Element::all() {
            for b in D4Element::all() {
                assert_eq!(d4_apply(&d4_apply(&src, a), b), d4_apply(&src, a.then(b)));
            }
            assert_eq!(d4_apply(&d4_apply(&src, a), a.inverse()), src);
        }
    }

    #[test]
    fn rotate_zero_and_constant() {
        let src = textured(9, 7);
        assert_eq!(rotate(&src, 0.0), src);
        let c = Patch::filled(9, 7, [40, 80, 120]).unwrap();
        for a in [-180.0, -33.3, 12.0, 179.0] {
            assert_eq!(rotate(&c, a), c);
        }
    }

    #[test]
    fn rotate_90_agrees_with_d4() {
        let src = textured(16, 16);
        let exact = d4_apply(&src, D4Element::rotation(1));
        let warped = rotate(&src, 90.0);
        for (a, b) in exact.data().iter().zip(warped.data()) {
            assert!((*a as i16 - *b as i16).abs() <= 1);
        }
    }

    #[test]
    fn ssr_neutral_and_shift() {
        let src = textured(11, 9);
        assert_eq!(shift_scale_rotate(&src, &ShiftScaleRotateParams::NEUTRAL).unwrap(), src);

        let impulse = Patch::from_fn(100, 20, |x, y| if (x, y) == (30, 10) { [255; 3] } else { [0; 3] });
        let p = ShiftScaleRotateParams { shift_x: 0.08, ..ShiftScaleRotateParams::NEUTRAL };
        let out = shift_scale_rotate(&impulse, &p).unwrap();
        assert_eq!(out.pixel(38, 10), [255; 3]);
        assert_eq!(out.pixels().filter(|p| p[0] > 0).count(), 1);
    }

    #[test]
    fn ssr_rejects_out_of_range() {
        let src = textured(8, 8);
        for p in [
            ShiftScaleRotateParams { shift_x: 0.09, ..ShiftScaleRotateParams::NEUTRAL },
            ShiftScaleRotateParams { scale: 1.2, ..ShiftScaleRotateParams::NEUTRAL },
            ShiftScaleRotateParams { angle: -31.0, ..ShiftScaleRotateParams::NEUTRAL },
        ] {
            assert!(matches!(shift_scale_rotate(&src, &p), Err(Error::Param { .. })));
        }
        let c = Patch::filled(8, 8, [9, 9, 200]).unwrap();
        let p = ShiftScaleRotateParams { scale: 1.15, angle: 17.0, shift_x: -0.05, shift_y: 0.08 };
        assert_eq!(shift_scale_rotate(&c, &p).unwrap(), c);
    }

    #[test]
    fn elastic_neutral_and_deterministic() {
        let src = textured(20, 16);
        let zero = ElasticParams { alpha: 0.0, sigma: 4.0, alpha_affine: 0.0 };
        assert_eq!(elastic(&src, &zero, &mut make_rng(42, 0, 0, "e")).unwrap(), src);
        let a = elastic(&src, &ElasticParams::default(), &mut make_rng(42, 0, 5, "e")).unwrap();
        let b = elastic(&src, &ElasticParams::default(), &mut make_rng(42, 0, 5, "e")).unwrap();
        assert_eq!(a, b);
        assert!(elastic(&src, &ElasticParams { sigma: 0.0, ..Default::default() }, &mut make_rng(0, 0, 0, "e")).is_err());
    }

    #[test]
    fn elastic_affine_hits_corners() {
        let p = ElasticParams { alpha: 0.0, sigma: 1.0, alpha_affine: 8.0 };
        let mut r1 = make_rng(1, 2, 3, "e");
        let f = elastic_field(10, 6, &p, &mut r1).unwrap();
        let mut r2 = make_rng(1, 2, 3, "e");
        for _ in 0..2 * 60 {
            r2.uniform();
        }
        let corners: Vec<(f64, f64)> = (0..3).map(|_| (r2.uniform_range(-8.0, 8.0), r2.uniform_range(-8.0, 8.0))).collect();
        for ((x, y), d) in [(0, 0), (9, 0), (0, 5)].into_iter().zip(corners) {
            let got = f.affine.at(x, y);
            assert!((got.0 - d.0).abs() < 1e-12 && (got.1 - d.1).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_neutral_and_pinned_corners() {
        let src = textured(23, 17);
        let p0 = GridDistortionParams { num_steps: 5, distort_limit: 0.0 };
        assert_eq!(grid_distortion(&src, &p0, &mut make_rng(1, 0, 0, "g")).unwrap(), src);

        let p = GridDistortionParams::default();
        let nodes = grid_nodes(23, 17, &p, &mut make_rng(1, 0, 0, "g")).unwrap();
        assert_eq!(nodes.x.first(), Some(&0.0));
        assert_eq!(nodes.x.last(), Some(&22.0));
        assert_eq!(nodes.y.last(), Some(&16.0));
        let field = grid_field(23, 17, &nodes);
        for (x, y) in [(0, 0), (22, 0), (0, 16), (22, 16)] {
            assert_eq!(field.at(x, y), (0.0, 0.0));
        }
        let out = grid_distortion(&src, &p, &mut make_rng(1, 0, 0, "g")).unwrap();
        assert_eq!((out.width(), out.height()), (23, 17));
        for (x, y) in [(0, 0), (22, 0), (0, 16), (22, 16)] {
            assert_eq!(out.pixel(x, y), src.pixel(x, y));
        }
    }

    #[test]
    fn grid_nodes_are_monotone() {
        let p = GridDistortionParams { num_steps: 7, distort_limit: 0.9 };
        for s in 0..50 {
            let nodes = grid_nodes(64, 64, &p, &mut make_rng(s, 0, 0, "g")).unwrap();
            assert!(nodes.x.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn optical_center_fixed_and_neutral() {
        let src = textured(21, 21);
        assert_eq!(optical_distortion_with_k(&src, 0.0), src);
        for k in [-0.15, -0.05, 0.1, 0.15] {
            assert_eq!(optical_distortion_with_k(&src, k).pixel(10, 10), src.pixel(10, 10));
        }
    }

    #[test]
    fn optical_moves_impulse_outward() {
        // impulse at radius 20 along +x from the center of a 61x61 patch
        let (n, r0) = (61usize, 20.0f64);
        let c = 30usize;
        let src = Patch::from_fn(n, n, |x, y| if (x, y) == (c + r0 as usize, c) { [255; 3] } else { [0; 3] });
        let big_r = (2.0 * 30.0f64 * 30.0).sqrt();
        for k in [0.05, 0.1, 0.15] {
            let expected = r0 * (1.0 + k * (r0 / big_r).powi(2));
            let out = optical_distortion_with_k(&src, k);
            let (mut mass, mut moment) = (0.0, 0.0);
            for x in 0..n {
                let v = out.pixel(x, c)[0] as f64;
                mass += v;
                moment += v * (x as f64 - c as f64);
            }
            let centroid = moment / mass;
            assert!((centroid - expected).abs() <= 0.5, "k={k}: {centroid} vs {expected}");
        }
    }
}
