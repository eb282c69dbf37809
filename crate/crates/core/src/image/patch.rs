use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stores a floating-point intermediate back to 8 bits: round half away from
/// zero, then clamp to `[0, 255]`.
#[inline]
pub fn to_u8(v: f64) -> u8 {
    let r = v.round();
    if r <= 0.0 {
        0
    } else if r >= 255.0 {
        255
    } else {
        r as u8
    }
}

/// An 8-bit interleaved RGB raster in row-major order.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Patch {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl std::fmt::Debug for Patch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Patch")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl Patch {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Shape(format!(
                "patch extent must be at least 1x1, got {width}x{height}"
            )));
        }
        if data.len() != width * height * 3 {
            return Err(Error::Shape(format!(
                "patch {width}x{height} needs {} bytes, got {}",
                width * height * 3,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// A patch filled with one color.
    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        let data = rgb
            .iter()
            .copied()
            .cycle()
            .take(width * height * 3)
            .collect();
        Self::new(width, height, data)
    }

    pub(crate) fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [u8; 3],
    ) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    /// Applies `f` to every pixel, keeping the extent.
    pub(crate) fn map_pixels(&self, mut f: impl FnMut([u8; 3]) -> [u8; 3]) -> Self {
        let mut data = self.data.clone();
        for px in data.chunks_exact_mut(3) {
            let out = f([px[0], px[1], px[2]]);
            px.copy_from_slice(&out);
        }
        Self {
            width: self.width,
            height: self.height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub(crate) fn channel(&self, x: usize, y: usize, c: usize) -> u8 {
        self.data[(y * self.width + x) * 3 + c]
    }

    pub fn pixels(&self) -> impl Iterator<Item = [u8; 3]> + '_ {
        self.data.chunks_exact(3).map(|p| [p[0], p[1], p[2]])
    }

    /// True when every pixel has the same color.
    pub fn is_uniform(&self) -> bool {
        let first = self.pixel(0, 0);
        self.pixels().all(|p| p == first)
    }
}

/// A channel-planar `f32` raster. Produced by the final preprocessing stage
/// with shape 3x224x224.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedTensor {
    channels: usize,
    height: usize,
    width: usize,
    values: Vec<f32>,
}

impl NormalizedTensor {
    pub const MAGIC: [u8; 4] = *b"MTNT";

    pub fn new(channels: usize, height: usize, width: usize, values: Vec<f32>) -> Result<Self> {
        if values.len() != channels * height * width {
            return Err(Error::Shape(format!(
                "tensor {channels}x{height}x{width} needs {} values, got {}",
                channels * height * width,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Shape(format!("non-finite tensor value at index {i}")));
        }
        Ok(Self {
            channels,
            height,
            width,
            values,
        })
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.channels, self.height, self.width]
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.values[(c * self.height + y) * self.width + x]
    }

    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.height * self.width;
        &self.values[c * n..(c + 1) * n]
    }

    /// Raw dump: `MTNT`, then C, H, W as little-endian u32, then planar
    /// little-endian f32 values.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.values.len() * 4);
        out.extend_from_slice(&Self::MAGIC);
        for dim in [self.channels, self.height, self.width] {
            out.extend_from_slice(&(dim as u32).to_le_bytes());
        }
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || bytes[..4] != Self::MAGIC {
            return Err(Error::Shape("missing MTNT tensor header".into()));
        }
        let dim = |i: usize| {
            u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize
        };
        let (c, h, w) = (dim(0), dim(1), dim(2));
        let body = &bytes[16..];
        if body.len() != c * h * w * 4 {
            return Err(Error::Shape(format!(
                "tensor body is {} bytes, header declares {c}x{h}x{w}",
                body.len()
            )));
        }
        let values = body
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        Self::new(c, h, w, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_is_half_away_then_clamped() {
        assert_eq!(to_u8(0.5), 1);
        assert_eq!(to_u8(1.49), 1);
        assert_eq!(to_u8(2.5), 3);
        assert_eq!(to_u8(-0.4), 0);
        assert_eq!(to_u8(-3.0), 0);
        assert_eq!(to_u8(254.5), 255);
        assert_eq!(to_u8(300.0), 255);
    }

    #[test]
    fn patch_rejects_bad_extents() {
        assert!(matches!(Patch::new(0, 3, vec![]), Err(Error::Shape(_))));
        assert!(matches!(Patch::new(2, 2, vec![0; 11]), Err(Error::Shape(_))));
        assert!(Patch::new(2, 2, vec![0; 12]).is_ok());
    }

    #[test]
    fn tensor_dump_round_trips() {
        let t = NormalizedTensor::new(3, 2, 2, (0..12).map(|v| v as f32 * 0.5 - 1.0).collect())
            .unwrap();
        let bytes = t.to_bytes();
        assert_eq!(&bytes[..4], b"MTNT");
        assert_eq!(bytes.len(), 16 + 48);
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 3);
        assert_eq!(NormalizedTensor::from_bytes(&bytes).unwrap(), t);
    }

    #[test]
    fn tensor_rejects_non_finite() {
        assert!(NormalizedTensor::new(1, 1, 1, vec![f32::NAN]).is_err());
    }
}
