//! Color and channel transforms simulating stain and scanner variability.

mod clahe;
pub mod hsv;

use serde::{Deserialize, Serialize};

pub use clahe::{clahe, tile_lut, ClaheParams};
use hsv::{hsv_to_rgb, luma, rgb_to_hsv};

use crate::error::{Error, Result};
use crate::image::{to_u8, Patch, RngStream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JitterOp {
    Brightness,
    Contrast,
    Saturation,
    Hue,
}

impl JitterOp {
    const CANONICAL: [JitterOp; 4] = [
        JitterOp::Brightness,
        JitterOp::Contrast,
        JitterOp::Saturation,
        JitterOp::Hue,
    ];

    /// The `index`-th of the 24 orderings, decoded as a Lehmer code.
    pub fn ordering(index: usize) -> [JitterOp; 4] {
        let mut pool = Self::CANONICAL.to_vec();
        let mut rest = index % 24;
        let mut out = [JitterOp::Brightness; 4];
        for (slot, radix) in out.iter_mut().zip([6, 2, 1, 1]) {
            *slot = pool.remove(rest / radix);
            rest %= radix;
        }
        out
    }
}

/// Symmetric ColorJitter ranges: factors `1 ± brightness|contrast|saturation`,
/// hue shift `± hue` of the full circle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColorJitterParams {
    pub brightness: f64,
    pub contrast: f64,
    pub saturation: f64,
    pub hue: f64,
}

impl Default for ColorJitterParams {
    fn default() -> Self {
        Self {
            brightness: 0.2,
            contrast: 0.2,
            saturation: 0.15,
            hue: 0.08,
        }
    }
}

impl ColorJitterParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("brightness", self.brightness),
            ("contrast", self.contrast),
            ("saturation", self.saturation),
        ] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::param(name, "must lie in [0, 1)"));
            }
        }
        if !(0.0..=0.5).contains(&self.hue) {
            return Err(Error::param("hue", "must lie in [0, 0.5]"));
        }
        Ok(())
    }

    pub fn check(&self, f: &ColorJitterFactors) -> Result<()> {
        let within = |v: f64, lo: f64, hi: f64| v.is_finite() && (lo..=hi).contains(&v);
        let checks = [
            ("brightness", f.brightness, 1.0 - self.brightness, 1.0 + self.brightness),
            ("contrast", f.contrast, 1.0 - self.contrast, 1.0 + self.contrast),
            ("saturation", f.saturation, 1.0 - self.saturation, 1.0 + self.saturation),
            ("hue", f.hue, -self.hue, self.hue),
        ];
        for (name, v, lo, hi) in checks {
            if !within(v, lo, hi) {
                return Err(Error::param(name, format!("{v} outside [{lo}, {hi}]")));
            }
        }
        let mut seen = [false; 4];
        for op in f.order {
            seen[op as usize] = true;
        }
        if !seen.iter().all(|&s| s) {
            return Err(Error::param("order", "must be a permutation of the four sub-operations"));
        }
        Ok(())
    }

    /// Draws brightness, contrast, saturation, hue, then the ordering.
    pub fn sample(&self, rng: &mut RngStream) -> ColorJitterFactors {
        let brightness = rng.uniform_range(1.0 - self.brightness, 1.0 + self.brightness);
        let contrast = rng.uniform_range(1.0 - self.contrast, 1.0 + self.contrast);
        let saturation = rng.uniform_range(1.0 - self.saturation, 1.0 + self.saturation);
        let hue = rng.uniform_range(-self.hue, self.hue);
        let order = JitterOp::ordering(rng.index(24));
        ColorJitterFactors {
            brightness,
            contrast,
            saturation,
            hue,
            order,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColorJitterFactors {
    pub brightness: f64,
    pub contrast: f64,
    pub saturation: f64,
    pub hue: f64,
    pub order: [JitterOp; 4],
}

impl ColorJitterFactors {
    pub const NEUTRAL: Self = Self {
        brightness: 1.0,
        contrast: 1.0,
        saturation: 1.0,
        hue: 0.0,
        order: JitterOp::CANONICAL,
    };
}

fn adjust_brightness(src: &Patch, f: f64) -> Patch {
    src.map_pixels(|p| p.map(|c| to_u8(c as f64 * f)))
}

fn adjust_contrast(src: &Patch, f: f64) -> Patch {
    let n = (src.width() * src.height()) as f64;
    let mean = src.pixels().map(luma).sum::<f64>() / n;
    src.map_pixels(|p| p.map(|c| to_u8(mean + f * (c as f64 - mean))))
}

fn adjust_saturation(src: &Patch, f: f64) -> Patch {
    src.map_pixels(|p| {
        let g = luma(p);
        p.map(|c| to_u8(g + f * (c as f64 - g)))
    })
}

fn rotate_hue(src: &Patch, shift: f64) -> Patch {
    let dh = shift * 180.0;
    src.map_pixels(|p| {
        let [h, s, v] = rgb_to_hsv(p);
        hsv_to_rgb([(h + dh).rem_euclid(180.0), s, v]).map(to_u8)
    })
}

pub(crate) fn color_jitter_unchecked(src: &Patch, f: &ColorJitterFactors) -> Patch {
    let mut out = src.clone();
    for op in f.order {
        out = match op {
            JitterOp::Brightness => adjust_brightness(&out, f.brightness),
            JitterOp::Contrast => adjust_contrast(&out, f.contrast),
            JitterOp::Saturation => adjust_saturation(&out, f.saturation),
            JitterOp::Hue => rotate_hue(&out, f.hue),
        };
    }
    out
}

/// Brightness scaling, contrast toward the patch's mean luma, saturation
/// toward per-pixel luma and hue rotation, in `f.order`, each stored back to
/// 8 bits. Factors are checked against the default ranges.
pub fn color_jitter(src: &Patch, f: &ColorJitterFactors) -> Result<Patch> {
    ColorJitterParams::default().check(f)?;
    Ok(color_jitter_unchecked(src, f))
}

/// Integer HSV offsets on the 0-180 / 0-255 / 0-255 scales.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HsvShift {
    pub hue: i32,
    pub saturation: i32,
    pub value: i32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HsvShiftLimits {
    pub hue_shift_limit: i32,
    pub sat_shift_limit: i32,
    pub val_shift_limit: i32,
}

impl Default for HsvShiftLimits {
    fn default() -> Self {
        Self {
            hue_shift_limit: 15,
            sat_shift_limit: 20,
            val_shift_limit: 15,
        }
    }
}

impl HsvShiftLimits {
    pub fn validate(&self) -> Result<()> {
        for (name, v, max) in [
            ("hue_shift_limit", self.hue_shift_limit, 90),
            ("sat_shift_limit", self.sat_shift_limit, 255),
            ("val_shift_limit", self.val_shift_limit, 255),
        ] {
            if !(0..=max).contains(&v) {
                return Err(Error::param(name, format!("must lie in [0, {max}]")));
            }
        }
        Ok(())
    }

    /// Draws hue, saturation, value shifts.
    pub fn sample(&self, rng: &mut RngStream) -> HsvShift {
        let mut draw = |l: i32| rng.int_inclusive(-l as i64, l as i64) as i32;
        HsvShift {
            hue: draw(self.hue_shift_limit),
            saturation: draw(self.sat_shift_limit),
            value: draw(self.val_shift_limit),
        }
    }
}

/// Adds the shifts in HSV space: hue wraps modulo 180, saturation and value
/// clamp to `[0, 255]`.
pub fn hsv_shift(src: &Patch, shift: &HsvShift) -> Patch {
    src.map_pixels(|p| {
        let [h, s, v] = rgb_to_hsv(p);
        hsv_to_rgb([
            (h + shift.hue as f64).rem_euclid(180.0),
            (s + shift.saturation as f64).clamp(0.0, 255.0),
            (v + shift.value as f64).clamp(0.0, 255.0),
        ])
        .map(to_u8)
    })
}

/// `(pixel - 128) * (1 + contrast_delta) + 128 + 255 * brightness_delta`.
pub fn brightness_contrast(src: &Patch, brightness_delta: f64, contrast_delta: f64) -> Patch {
    let gain = 1.0 + contrast_delta;
    let bias = 255.0 * brightness_delta;
    src.map_pixels(|p| p.map(|c| to_u8((c as f64 - 128.0) * gain + 128.0 + bias)))
}

pub fn rgb_shift(src: &Patch, shift: [i32; 3]) -> Patch {
    src.map_pixels(|p| std::array::from_fn(|c| (p[c] as i32 + shift[c]).clamp(0, 255) as u8))
}

/// Output channel `c` takes input channel `self.0[c]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "[usize; 3]", into = "[usize; 3]")]
pub struct ChannelPerm([usize; 3]);

impl ChannelPerm {
    pub const IDENTITY: ChannelPerm = ChannelPerm([0, 1, 2]);

    pub fn new(perm: [usize; 3]) -> Result<Self> {
        let mut sorted = perm;
        sorted.sort_unstable();
        if sorted != [0, 1, 2] {
            return Err(Error::param("perm", format!("{perm:?} is not a permutation of (0, 1, 2)")));
        }
        Ok(Self(perm))
    }

    pub fn all() -> [ChannelPerm; 6] {
        [
            [0, 1, 2],
            [0, 2, 1],
            [1, 0, 2],
            [1, 2, 0],
            [2, 0, 1],
            [2, 1, 0],
        ]
        .map(ChannelPerm)
    }

    pub fn inverse(self) -> Self {
        let mut inv = [0; 3];
        for (c, &s) in self.0.iter().enumerate() {
            inv[s] = c;
        }
        Self(inv)
    }

    pub fn as_array(&self) -> [usize; 3] {
        self.0
    }
}

impl TryFrom<[usize; 3]> for ChannelPerm {
    type Error = Error;

    fn try_from(v: [usize; 3]) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ChannelPerm> for [usize; 3] {
    fn from(p: ChannelPerm) -> Self {
        p.0
    }
}

pub fn channel_shuffle(src: &Patch, perm: ChannelPerm) -> Patch {
    src.map_pixels(|p| perm.0.map(|s| p[s]))
}

/// `round(0.299 R + 0.587 G + 0.114 B)` replicated to all channels.
pub fn to_grayscale(src: &Patch) -> Patch {
    src.map_pixels(|p| [to_u8(luma(p)); 3])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

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
    fn orderings_are_the_24_permutations() {
        let mut all: Vec<[JitterOp; 4]> = (0..24).map(JitterOp::ordering).collect();
        assert_eq!(all[0], JitterOp::CANONICAL);
        all.sort_by_key(|o| o.map(|op| op as u8));
        all.dedup();
        assert_eq!(all.len(), 24);
    }

    #[test]
    fn neutral_params_are_identities() {
        let src = textured(31, 17);
        assert_eq!(color_jitter(&src, &ColorJitterFactors::NEUTRAL).unwrap(), src);
        for order in (0..24).map(JitterOp::ordering) {
            let f = ColorJitterFactors { order, ..ColorJitterFactors::NEUTRAL };
            assert_eq!(color_jitter_unchecked(&src, &f), src);
        }
        assert_eq!(hsv_shift(&src, &HsvShift { hue: 0, saturation: 0, value: 0 }), src);
        assert_eq!(brightness_contrast(&src, 0.0, 0.0), src);
        assert_eq!(rgb_shift(&src, [0, 0, 0]), src);
        assert_eq!(channel_shuffle(&src, ChannelPerm::IDENTITY), src);
    }

    #[test]
    fn jitter_arithmetic() {
        let src = Patch::filled(4, 4, [100, 100, 100]).unwrap();
        let f = ColorJitterFactors { brightness: 1.2, ..ColorJitterFactors::NEUTRAL };
        assert_eq!(color_jitter(&src, &f).unwrap().pixel(0, 0), [120; 3]);
        let f = ColorJitterFactors { saturation: 0.85, ..ColorJitterFactors::NEUTRAL };
        assert_eq!(color_jitter(&src, &f).unwrap(), src);
        let f = ColorJitterFactors { hue: 0.08, ..ColorJitterFactors::NEUTRAL };
        assert_eq!(color_jitter(&src, &f).unwrap(), src);
        let bad = ColorJitterFactors { brightness: 1.3, ..ColorJitterFactors::NEUTRAL };
        assert!(matches!(color_jitter(&src, &bad), Err(Error::Param { .. })));
    }

    #[test]
    fn contrast_pulls_toward_mean_luma() {
        let src = Patch::new(2, 1, vec![0, 0, 0, 200, 200, 200]).unwrap();
        let f = ColorJitterFactors { contrast: 0.8, ..ColorJitterFactors::NEUTRAL };
        let out = color_jitter(&src, &f).unwrap();
        // mean 100: 100 + 0.8 * (0 - 100) = 20, 100 + 0.8 * 100 = 180
        assert_eq!(out.pixel(0, 0), [20; 3]);
        assert_eq!(out.pixel(1, 0), [180; 3]);
    }

    #[test]
    fn hsv_value_shift_on_gray() {
        let gray = Patch::filled(3, 3, [100, 100, 100]).unwrap();
        let out = hsv_shift(&gray, &HsvShift { hue: 0, saturation: 0, value: 15 });
        assert_eq!(out.pixel(1, 1), [115; 3]);
        assert_eq!(hsv_shift(&gray, &HsvShift { hue: 15, saturation: 0, value: 0 }), gray);
        assert_eq!(hsv_shift(&gray, &HsvShift { hue: -15, saturation: 0, value: 0 }), gray);
    }

    #[test]
    fn hsv_hue_wraps() {
        // pure red has hue 0; -15 wraps to 165 (330 degrees): magenta-leaning red
        let red = Patch::filled(1, 1, [255, 0, 0]).unwrap();
        let out = hsv_shift(&red, &HsvShift { hue: -15, saturation: 0, value: 0 });
        assert_eq!(out.pixel(0, 0), [255, 0, 128]);
    }

    #[test]
    fn brightness_contrast_arithmetic() {
        let p = Patch::new(2, 1, vec![10, 10, 10, 128, 128, 128]).unwrap();
        let out = brightness_contrast(&p, 0.2, 0.0);
        assert_eq!(out.pixel(0, 0), [61; 3]);
        for c in [-0.2, 0.13, 0.2] {
            assert_eq!(brightness_contrast(&p, 0.0, c).pixel(1, 0), [128; 3]);
        }
    }

    #[test]
    fn rgb_shift_clamps() {
        let p = Patch::filled(1, 1, [240, 100, 5]).unwrap();
        assert_eq!(rgb_shift(&p, [20, -20, -20]).pixel(0, 0), [255, 80, 0]);
    }

    #[test]
    fn channel_shuffle_cases() {
        let p = Patch::filled(2, 2, [10, 20, 30]).unwrap();
        let cycle = ChannelPerm::new([2, 0, 1]).unwrap();
        assert_eq!(channel_shuffle(&p, cycle).pixel(0, 0), [30, 10, 20]);
        let swap = ChannelPerm::new([1, 0, 2]).unwrap();
        assert_eq!(channel_shuffle(&channel_shuffle(&p, swap), swap), p);
        for perm in ChannelPerm::all() {
            assert_eq!(channel_shuffle(&channel_shuffle(&p, perm), perm.inverse()), p);
        }
        assert!(ChannelPerm::new([0, 0, 1]).is_err());
        assert!(serde_json::from_str::<ChannelPerm>("[1,1,2]").is_err());
    }

    #[test]
    fn grayscale_cases() {
        let p = Patch::new(3, 1, vec![255, 0, 0, 255, 255, 255, 77, 77, 77]).unwrap();
        let g = to_grayscale(&p);
        assert_eq!(g.pixel(0, 0), [76; 3]);
        assert_eq!(g.pixel(1, 0), [255; 3]);
        assert_eq!(g.pixel(2, 0), [77; 3]);
    }

    proptest! {
        #[test]
        fn grayscale_idempotent(data in proptest::collection::vec(any::<u8>(), 48)) {
            let p = Patch::new(4, 4, data).unwrap();
            let g = to_grayscale(&p);
            prop_assert_eq!(to_grayscale(&g), g);
        }

        #[test]
        fn sampled_jitter_within_ranges(seed in any::<u64>()) {
            let params = ColorJitterParams::default();
            let f = params.sample(&mut crate::image::make_rng(seed, 0, 0, "color"));
            prop_assert!(params.check(&f).is_ok());
        }
    }
}
