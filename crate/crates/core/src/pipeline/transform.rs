//! Pipeline members: the sampling ranges a member is configured with, and the
//! fully resolved transform it turns into for one sample.

use serde::{Deserialize, Serialize};

use crate::degradation::{self, odd_sizes, sample_motion, BlurParams, NoiseParams};
use crate::error::{Error, Result};
use crate::geometric::{
    self, d4_apply, rotate, D4Element, ElasticParams, GridDistortionParams,
    OpticalDistortionParams, ShiftScaleRotateLimits, ShiftScaleRotateParams,
};
use crate::image::{Patch, RngStream, StreamKey};
use crate::photometric::{
    self, brightness_contrast, channel_shuffle, hsv_shift, rgb_shift, to_grayscale, ChannelPerm,
    ClaheParams, ColorJitterFactors, ColorJitterParams, HsvShift, HsvShiftLimits,
};

/// Parameter ranges of one member. Ranges written as `[lo, hi]` are inclusive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransformRange {
    D4,
    Rotate { limit: f64 },
    Rotate90,
    ShiftScaleRotate(ShiftScaleRotateLimits),
    Elastic(ElasticParams),
    GridDistortion(GridDistortionParams),
    OpticalDistortion(OpticalDistortionParams),
    ColorJitter(ColorJitterParams),
    HueSaturationValue(HsvShiftLimits),
    BrightnessContrast { brightness_limit: f64, contrast_limit: f64 },
    Clahe(ClaheParams),
    RgbShift { shift_limit: i32 },
    ChannelShuffle,
    Grayscale,
    GaussianBlur { kernel: [usize; 2] },
    Defocus { radius: [usize; 2], alias_blur: [f64; 2] },
    MotionBlur { kernel: [usize; 2] },
    GaussNoise { std: [f64; 2] },
    IsoNoise { color_shift: [f64; 2], intensity: [f64; 2] },
    MultiplicativeNoise { multiplier: [f64; 2] },
}

fn check_span(name: &str, r: [f64; 2], min: f64, max: f64) -> Result<()> {
    if !(r[0].is_finite() && r[1].is_finite() && min <= r[0] && r[0] <= r[1] && r[1] <= max) {
        return Err(Error::param(name, format!("{r:?} must satisfy {min} <= lo <= hi <= {max}")));
    }
    Ok(())
}

fn check_odd_span(name: &str, r: [usize; 2], min: usize) -> Result<()> {
    if r[0] < min || r[0] > r[1] || r[1] > 31 || odd_sizes(r).is_empty() {
        return Err(Error::param(
            name,
            format!("{r:?} must satisfy {min} <= lo <= hi <= 31 and contain an odd size"),
        ));
    }
    Ok(())
}

impl TransformRange {
    pub fn kind(&self) -> &'static str {
        match self {
            TransformRange::D4 => "d4",
            TransformRange::Rotate { .. } => "rotate",
            TransformRange::Rotate90 => "rotate90",
            TransformRange::ShiftScaleRotate(_) => "shift_scale_rotate",
            TransformRange::Elastic(_) => "elastic",
            TransformRange::GridDistortion(_) => "grid_distortion",
            TransformRange::OpticalDistortion(_) => "optical_distortion",
            TransformRange::ColorJitter(_) => "color_jitter",
            TransformRange::HueSaturationValue(_) => "hue_saturation_value",
            TransformRange::BrightnessContrast { .. } => "brightness_contrast",
            TransformRange::Clahe(_) => "clahe",
            TransformRange::RgbShift { .. } => "rgb_shift",
            TransformRange::ChannelShuffle => "channel_shuffle",
            TransformRange::Grayscale => "grayscale",
            TransformRange::GaussianBlur { .. } => "gaussian_blur",
            TransformRange::Defocus { .. } => "defocus",
            TransformRange::MotionBlur { .. } => "motion_blur",
            TransformRange::GaussNoise { .. } => "gauss_noise",
            TransformRange::IsoNoise { .. } => "iso_noise",
            TransformRange::MultiplicativeNoise { .. } => "multiplicative_noise",
        }
    }

    pub fn brightness_contrast() -> Self {
        TransformRange::BrightnessContrast {
            brightness_limit: 0.2,
            contrast_limit: 0.2,
        }
    }

    pub fn gaussian_blur() -> Self {
        TransformRange::GaussianBlur {
            kernel: BlurParams::default().gaussian_kernel,
        }
    }

    pub fn defocus() -> Self {
        let b = BlurParams::default();
        TransformRange::Defocus {
            radius: b.defocus_radius,
            alias_blur: b.defocus_alias_blur,
        }
    }

    pub fn motion_blur() -> Self {
        TransformRange::MotionBlur {
            kernel: BlurParams::default().motion_kernel,
        }
    }

    pub fn gauss_noise() -> Self {
        TransformRange::GaussNoise {
            std: NoiseParams::default().gauss_std,
        }
    }

    pub fn iso_noise() -> Self {
        let n = NoiseParams::default();
        TransformRange::IsoNoise {
            color_shift: n.iso_color_shift,
            intensity: n.iso_intensity,
        }
    }

    pub fn multiplicative_noise() -> Self {
        TransformRange::MultiplicativeNoise {
            multiplier: NoiseParams::default().mult_range,
        }
    }

    /// Checks the ranges. Error names are relative to the member.
    pub fn validate(&self) -> Result<()> {
        match self {
            TransformRange::D4
            | TransformRange::Rotate90
            | TransformRange::ChannelShuffle
            | TransformRange::Grayscale => Ok(()),
            TransformRange::Rotate { limit } => check_span("limit", [0.0, *limit], 0.0, 180.0),
            TransformRange::ShiftScaleRotate(l) => l.validate(),
            TransformRange::Elastic(p) => p.validate(),
            TransformRange::GridDistortion(p) => p.validate(),
            TransformRange::OpticalDistortion(p) => p.validate(),
            TransformRange::ColorJitter(p) => p.validate(),
            TransformRange::HueSaturationValue(l) => l.validate(),
            TransformRange::BrightnessContrast {
                brightness_limit,
                contrast_limit,
            } => {
                check_span("brightness_limit", [0.0, *brightness_limit], 0.0, 1.0)?;
                check_span("contrast_limit", [0.0, *contrast_limit], 0.0, 1.0)
            }
            TransformRange::Clahe(p) => p.validate(),
            TransformRange::RgbShift { shift_limit } => {
                if !(0..=255).contains(shift_limit) {
                    return Err(Error::param("shift_limit", "must lie in [0, 255]"));
                }
                Ok(())
            }
            TransformRange::GaussianBlur { kernel } => check_odd_span("kernel", *kernel, 1),
            TransformRange::Defocus { radius, alias_blur } => {
                if radius[0] < 1 || radius[0] > radius[1] || radius[1] > 15 {
                    return Err(Error::param("radius", format!("{radius:?} must satisfy 1 <= lo <= hi <= 15")));
                }
                check_span("alias_blur", *alias_blur, f64::MIN_POSITIVE, 10.0)
            }
            TransformRange::MotionBlur { kernel } => check_odd_span("kernel", *kernel, 3),
            TransformRange::GaussNoise { std } => check_span("std", *std, 0.0, 255.0),
            TransformRange::IsoNoise {
                color_shift,
                intensity,
            } => {
                check_span("color_shift", *color_shift, 0.0, 1.0)?;
                check_span("intensity", *intensity, 0.0, 1.0)
            }
            TransformRange::MultiplicativeNoise { multiplier } => {
                check_span("multiplier", *multiplier, 0.0, 10.0)
            }
        }
    }

    /// Resolves every random parameter from `rng`. Members that need a
    /// per-pixel random field get their own stream `field_stream` instead, so
    /// the field can be regenerated from the audit record alone.
    pub fn sample(&self, rng: &mut RngStream, field_stream: StreamKey) -> AppliedTransform {
        match self {
            TransformRange::D4 => AppliedTransform::D4 {
                element: D4Element::from_index(rng.index(8)),
            },
            TransformRange::Rotate { limit } => AppliedTransform::Rotate {
                angle: rng.uniform_range(-limit, *limit),
            },
            TransformRange::Rotate90 => AppliedTransform::Rotate90 {
                quarter_turns: rng.index(4) as u8,
            },
            TransformRange::ShiftScaleRotate(l) => AppliedTransform::ShiftScaleRotate(l.sample(rng)),
            TransformRange::Elastic(p) => AppliedTransform::Elastic {
                params: *p,
                stream: field_stream,
            },
            TransformRange::GridDistortion(p) => AppliedTransform::GridDistortion {
                params: *p,
                stream: field_stream,
            },
            TransformRange::OpticalDistortion(p) => AppliedTransform::OpticalDistortion { k: p.sample_k(rng) },
            TransformRange::ColorJitter(p) => AppliedTransform::ColorJitter(p.sample(rng)),
            TransformRange::HueSaturationValue(l) => AppliedTransform::HueSaturationValue(l.sample(rng)),
            TransformRange::BrightnessContrast {
                brightness_limit,
                contrast_limit,
            } => AppliedTransform::BrightnessContrast {
                brightness_delta: rng.uniform_range(-brightness_limit, *brightness_limit),
                contrast_delta: rng.uniform_range(-contrast_limit, *contrast_limit),
            },
            TransformRange::Clahe(p) => AppliedTransform::Clahe(*p),
            TransformRange::RgbShift { shift_limit } => {
                let l = *shift_limit as i64;
                AppliedTransform::RgbShift {
                    shift: std::array::from_fn(|_| rng.int_inclusive(-l, l) as i32),
                }
            }
            TransformRange::ChannelShuffle => AppliedTransform::ChannelShuffle {
                perm: ChannelPerm::all()[rng.index(6)],
            },
            TransformRange::Grayscale => AppliedTransform::Grayscale,
            TransformRange::GaussianBlur { kernel } => {
                let sizes = odd_sizes(*kernel);
                AppliedTransform::GaussianBlur {
                    kernel: sizes[rng.index(sizes.len())],
                }
            }
            TransformRange::Defocus { radius, alias_blur } => AppliedTransform::Defocus {
                radius: rng.int_inclusive(radius[0] as i64, radius[1] as i64) as usize,
                alias_blur: rng.uniform_range(alias_blur[0], alias_blur[1]),
            },
            TransformRange::MotionBlur { kernel } => {
                let (kernel, angle) = sample_motion(*kernel, rng);
                AppliedTransform::MotionBlur { kernel, angle }
            }
            TransformRange::GaussNoise { std } => AppliedTransform::GaussNoise {
                std: rng.uniform_range(std[0], std[1]),
                stream: field_stream,
            },
            TransformRange::IsoNoise {
                color_shift,
                intensity,
            } => AppliedTransform::IsoNoise {
                color_shift: rng.uniform_range(color_shift[0], color_shift[1]),
                intensity: rng.uniform_range(intensity[0], intensity[1]),
                stream: field_stream,
            },
            TransformRange::MultiplicativeNoise { multiplier } => AppliedTransform::MultiplicativeNoise {
                multiplier: rng.uniform_range(multiplier[0], multiplier[1]),
            },
        }
    }
}

/// A transform with every parameter resolved. Applying it is deterministic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum AppliedTransform {
    D4 { element: D4Element },
    Rotate { angle: f64 },
    Rotate90 { quarter_turns: u8 },
    ShiftScaleRotate(ShiftScaleRotateParams),
    Elastic { params: ElasticParams, stream: StreamKey },
    GridDistortion { params: GridDistortionParams, stream: StreamKey },
    OpticalDistortion { k: f64 },
    ColorJitter(ColorJitterFactors),
    HueSaturationValue(HsvShift),
    BrightnessContrast { brightness_delta: f64, contrast_delta: f64 },
    Clahe(ClaheParams),
    RgbShift { shift: [i32; 3] },
    ChannelShuffle { perm: ChannelPerm },
    Grayscale,
    GaussianBlur { kernel: usize },
    Defocus { radius: usize, alias_blur: f64 },
    MotionBlur { kernel: usize, angle: f64 },
    GaussNoise { std: f64, stream: StreamKey },
    IsoNoise { color_shift: f64, intensity: f64, stream: StreamKey },
    MultiplicativeNoise { multiplier: f64 },
}

fn finite(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::param(name, "must be finite"));
    }
    Ok(())
}

impl AppliedTransform {
    /// Structural checks for values that may come from an edited audit file.
    /// Range limits are not enforced here: a pipeline may be configured wider
    /// than the defaults.
    fn validate(&self) -> Result<()> {
        match self {
            AppliedTransform::D4 { element } if element.quarter_turns() > 3 => {
                Err(Error::param("element.quarter_turns", "must lie in [0, 3]"))
            }
            AppliedTransform::Rotate90 { quarter_turns } if *quarter_turns > 3 => {
                Err(Error::param("quarter_turns", "must lie in [0, 3]"))
            }
            AppliedTransform::Rotate { angle } => finite("angle", *angle),
            AppliedTransform::ShiftScaleRotate(p) => {
                finite("shift_x", p.shift_x)?;
                finite("shift_y", p.shift_y)?;
                finite("angle", p.angle)?;
                if !(p.scale > 0.0 && p.scale.is_finite()) {
                    return Err(Error::param("scale", "must be finite and > 0"));
                }
                Ok(())
            }
            AppliedTransform::OpticalDistortion { k } => {
                if !(k.abs() <= 1.0) {
                    return Err(Error::param("k", "must lie in [-1, 1]"));
                }
                Ok(())
            }
            AppliedTransform::ColorJitter(f) => {
                for (name, v) in [("brightness", f.brightness), ("contrast", f.contrast), ("saturation", f.saturation)] {
                    if !(v >= 0.0 && v.is_finite()) {
                        return Err(Error::param(name, "must be finite and >= 0"));
                    }
                }
                finite("hue", f.hue)?;
                let mut seen = [false; 4];
                f.order.iter().for_each(|&op| seen[op as usize] = true);
                if !seen.iter().all(|&s| s) {
                    return Err(Error::param("order", "must be a permutation of the four sub-operations"));
                }
                Ok(())
            }
            AppliedTransform::BrightnessContrast {
                brightness_delta,
                contrast_delta,
            } => {
                finite("brightness_delta", *brightness_delta)?;
                finite("contrast_delta", *contrast_delta)
            }
            AppliedTransform::MotionBlur { angle, .. } => finite("angle", *angle),
            AppliedTransform::MultiplicativeNoise { multiplier } => {
                if !(*multiplier >= 0.0 && multiplier.is_finite()) {
                    return Err(Error::param("multiplier", "must be finite and >= 0"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn op_name(&self) -> &'static str {
        match self {
            AppliedTransform::D4 { .. } => "d4",
            AppliedTransform::Rotate { .. } => "rotate",
            AppliedTransform::Rotate90 { .. } => "rotate90",
            AppliedTransform::ShiftScaleRotate(_) => "shift_scale_rotate",
            AppliedTransform::Elastic { .. } => "elastic",
            AppliedTransform::GridDistortion { .. } => "grid_distortion",
            AppliedTransform::OpticalDistortion { .. } => "optical_distortion",
            AppliedTransform::ColorJitter(_) => "color_jitter",
            AppliedTransform::HueSaturationValue(_) => "hue_saturation_value",
            AppliedTransform::BrightnessContrast { .. } => "brightness_contrast",
            AppliedTransform::Clahe(_) => "clahe",
            AppliedTransform::RgbShift { .. } => "rgb_shift",
            AppliedTransform::ChannelShuffle { .. } => "channel_shuffle",
            AppliedTransform::Grayscale => "grayscale",
            AppliedTransform::GaussianBlur { .. } => "gaussian_blur",
            AppliedTransform::Defocus { .. } => "defocus",
            AppliedTransform::MotionBlur { .. } => "motion_blur",
            AppliedTransform::GaussNoise { .. } => "gauss_noise",
            AppliedTransform::IsoNoise { .. } => "iso_noise",
            AppliedTransform::MultiplicativeNoise { .. } => "multiplicative_noise",
        }
    }

    pub fn apply(&self, src: &Patch) -> Result<Patch> {
        self.validate().map_err(|e| e.under(self.op_name()))?;
        let out = match self {
            AppliedTransform::D4 { element } => d4_apply(src, *element),
            AppliedTransform::Rotate { angle } => rotate(src, *angle),
            AppliedTransform::Rotate90 { quarter_turns } => d4_apply(src, D4Element::rotation(*quarter_turns)),
            AppliedTransform::ShiftScaleRotate(p) => geometric::shift_scale_rotate_unchecked(src, p),
            AppliedTransform::Elastic { params, stream } => {
                geometric::elastic(src, params, &mut RngStream::new(stream.clone()))?
            }
            AppliedTransform::GridDistortion { params, stream } => {
                geometric::grid_distortion(src, params, &mut RngStream::new(stream.clone()))?
            }
            AppliedTransform::OpticalDistortion { k } => geometric::optical_distortion_with_k(src, *k),
            AppliedTransform::ColorJitter(f) => photometric::color_jitter_unchecked(src, f),
            AppliedTransform::HueSaturationValue(s) => hsv_shift(src, s),
            AppliedTransform::BrightnessContrast {
                brightness_delta,
                contrast_delta,
            } => brightness_contrast(src, *brightness_delta, *contrast_delta),
            AppliedTransform::Clahe(p) => photometric::clahe(src, p)?,
            AppliedTransform::RgbShift { shift } => rgb_shift(src, *shift),
            AppliedTransform::ChannelShuffle { perm } => channel_shuffle(src, *perm),
            AppliedTransform::Grayscale => to_grayscale(src),
            AppliedTransform::GaussianBlur { kernel } => degradation::gaussian_blur(src, *kernel)?,
            AppliedTransform::Defocus { radius, alias_blur } => degradation::defocus(src, *radius, *alias_blur)?,
            AppliedTransform::MotionBlur { kernel, angle } => degradation::motion_blur(src, *kernel, *angle)?,
            AppliedTransform::GaussNoise { std, stream } => {
                degradation::gauss_noise(src, *std, &mut RngStream::new(stream.clone()))?
            }
            AppliedTransform::IsoNoise {
                color_shift,
                intensity,
                stream,
            } => degradation::iso_noise(src, *color_shift, *intensity, &mut RngStream::new(stream.clone()))?,
            AppliedTransform::MultiplicativeNoise { multiplier } => degradation::scale_intensity(src, *multiplier),
        };
        Ok(out)
    }

    /// The member's resolved transform with neutral parameters, for identity checks.
    pub fn neutral(kind: &str, stream: StreamKey) -> Option<AppliedTransform> {
        let t = match kind {
            "d4" => AppliedTransform::D4 {
                element: D4Element::IDENTITY,
            },
            "rotate" => AppliedTransform::Rotate { angle: 0.0 },
            "rotate90" => AppliedTransform::Rotate90 { quarter_turns: 0 },
            "shift_scale_rotate" => AppliedTransform::ShiftScaleRotate(ShiftScaleRotateParams::NEUTRAL),
            "elastic" => AppliedTransform::Elastic {
                params: ElasticParams {
                    alpha: 0.0,
                    alpha_affine: 0.0,
                    ..ElasticParams::default()
                },
                stream,
            },
            "grid_distortion" => AppliedTransform::GridDistortion {
                params: GridDistortionParams {
                    distort_limit: 0.0,
                    ..GridDistortionParams::default()
                },
                stream,
            },
            "optical_distortion" => AppliedTransform::OpticalDistortion { k: 0.0 },
            "color_jitter" => AppliedTransform::ColorJitter(ColorJitterFactors::NEUTRAL),
            "hue_saturation_value" => AppliedTransform::HueSaturationValue(HsvShift {
                hue: 0,
                saturation: 0,
                value: 0,
            }),
            "brightness_contrast" => AppliedTransform::BrightnessContrast {
                brightness_delta: 0.0,
                contrast_delta: 0.0,
            },
            "rgb_shift" => AppliedTransform::RgbShift { shift: [0; 3] },
            "channel_shuffle" => AppliedTransform::ChannelShuffle {
                perm: ChannelPerm::IDENTITY,
            },
            "gaussian_blur" => AppliedTransform::GaussianBlur { kernel: 1 },
            "gauss_noise" => AppliedTransform::GaussNoise { std: 0.0, stream },
            "iso_noise" => AppliedTransform::IsoNoise {
                color_shift: 0.0,
                intensity: 0.0,
                stream,
            },
            "multiplicative_noise" => AppliedTransform::MultiplicativeNoise { multiplier: 1.0 },
            _ => return None,
        };
        Some(t)
    }
}
