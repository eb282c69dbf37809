use serde::{Deserialize, Serialize};

use super::filter::reflect101;
use super::patch::{to_u8, Patch};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    Nearest,
    Bilinear,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Border {
    /// Mirror about the edge pixel without repeating it (`dcb|abcd|cba`).
    Reflect,
    Constant([u8; 3]),
}

/// Per-pixel sampling offsets: output pixel `(x, y)` reads the source at
/// `(x + dx, y + dy)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DisplacementField {
    width: usize,
    height: usize,
    dx: Vec<f64>,
    dy: Vec<f64>,
}

impl DisplacementField {
    pub fn new(width: usize, height: usize, dx: Vec<f64>, dy: Vec<f64>) -> Result<Self> {
        let n = width * height;
        if width == 0 || height == 0 {
            return Err(Error::Shape("displacement field must be at least 1x1".into()));
        }
        if dx.len() != n || dy.len() != n {
            return Err(Error::Shape(format!(
                "displacement components have {} and {} entries, extent {width}x{height} needs {n}",
                dx.len(),
                dy.len()
            )));
        }
        if dx.iter().chain(&dy).any(|v| !v.is_finite()) {
            return Err(Error::Shape("displacement field contains non-finite offsets".into()));
        }
        Ok(Self {
            width,
            height,
            dx,
            dy,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            dx: vec![0.0; width * height],
            dy: vec![0.0; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> (f64, f64)) -> Self {
        let mut dx = Vec::with_capacity(width * height);
        let mut dy = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                let (a, b) = f(x, y);
                dx.push(a);
                dy.push(b);
            }
        }
        Self {
            width,
            height,
            dx,
            dy,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dx(&self) -> &[f64] {
        &self.dx
    }

    pub fn dy(&self) -> &[f64] {
        &self.dy
    }

    pub fn at(&self, x: usize, y: usize) -> (f64, f64) {
        let i = y * self.width + x;
        (self.dx[i], self.dy[i])
    }

    /// Largest Euclidean displacement in the field.
    pub fn max_magnitude(&self) -> f64 {
        self.dx
            .iter()
            .zip(&self.dy)
            .map(|(a, b)| a.hypot(*b))
            .fold(0.0, f64::max)
    }
}

impl std::ops::Add for &DisplacementField {
    type Output = DisplacementField;

    fn add(self, rhs: &DisplacementField) -> DisplacementField {
        assert_eq!((self.width, self.height), (rhs.width, rhs.height));
        DisplacementField {
            width: self.width,
            height: self.height,
            dx: self.dx.iter().zip(&rhs.dx).map(|(a, b)| a + b).collect(),
            dy: self.dy.iter().zip(&rhs.dy).map(|(a, b)| a + b).collect(),
        }
    }
}

#[inline]
fn fetch(src: &Patch, x: i64, y: i64, border: Border) -> [f64; 3] {
    let (w, h) = (src.width() as i64, src.height() as i64);
    match border {
        Border::Reflect => {
            let p = src.pixel(reflect101(x, w), reflect101(y, h));
            [p[0] as f64, p[1] as f64, p[2] as f64]
        }
        Border::Constant(c) => {
            if x < 0 || y < 0 || x >= w || y >= h {
                [c[0] as f64, c[1] as f64, c[2] as f64]
            } else {
                let p = src.pixel(x as usize, y as usize);
                [p[0] as f64, p[1] as f64, p[2] as f64]
            }
        }
    }
}

/// Samples `src` at a real-valued position.
#[inline]
pub(crate) fn sample(src: &Patch, x: f64, y: f64, interp: Interpolation, border: Border) -> [f64; 3] {
    match interp {
        Interpolation::Nearest => fetch(src, (x + 0.5).floor() as i64, (y + 0.5).floor() as i64, border),
        Interpolation::Bilinear => {
            let (x0, y0) = (x.floor(), y.floor());
            let (fx, fy) = (x - x0, y - y0);
            let (xi, yi) = (x0 as i64, y0 as i64);
            let p00 = fetch(src, xi, yi, border);
            if fx == 0.0 && fy == 0.0 {
                return p00;
            }
            let p10 = fetch(src, xi + 1, yi, border);
            let p01 = fetch(src, xi, yi + 1, border);
            let p11 = fetch(src, xi + 1, yi + 1, border);
            let mut out = [0.0; 3];
            for c in 0..3 {
                let top = p00[c] + (p10[c] - p00[c]) * fx;
                let bottom = p01[c] + (p11[c] - p01[c]) * fx;
                out[c] = top + (bottom - top) * fy;
            }
            out
        }
    }
}

/// Resamples `src` through a displacement field. The output takes the
/// field's extent.
pub fn remap(
    src: &Patch,
    field: &DisplacementField,
    interp: Interpolation,
    border: Border,
) -> Result<Patch> {
    if field.dx.len() != field.width * field.height || field.dy.len() != field.dx.len() {
        return Err(Error::Shape("displacement components disagree in extent".into()));
    }
    Ok(Patch::from_fn(field.width, field.height, |x, y| {
        let (dx, dy) = field.at(x, y);
        let v = sample(src, x as f64 + dx, y as f64 + dy, interp, border);
        [to_u8(v[0]), to_u8(v[1]), to_u8(v[2])]
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(w: usize, h: usize) -> Patch {
        Patch::from_fn(w, h, |x, y| [(x * 10 + y) as u8, (y * 7) as u8, (x + y * 3) as u8])
    }

    #[test]
    fn zero_field_is_identity() {
        let src = ramp(7, 5);
        for interp in [Interpolation::Nearest, Interpolation::Bilinear] {
            for border in [Border::Reflect, Border::Constant([9, 9, 9])] {
                let out = remap(&src, &DisplacementField::zeros(7, 5), interp, border).unwrap();
                assert_eq!(out, src);
            }
        }
    }

    #[test]
    fn unit_shift_nearest_constant_matches_index_oracle() {
        let src = Patch::from_fn(3, 3, |x, y| [(1 + x + 3 * y) as u8; 3]);
        let field = DisplacementField::from_fn(3, 3, |_, _| (1.0, 0.0));
        let out = remap(&src, &field, Interpolation::Nearest, Border::Constant([0, 0, 0])).unwrap();
        for y in 0..3 {
            for x in 0..3 {
                let expected = if x + 1 < 3 { src.pixel(x + 1, y) } else { [0, 0, 0] };
                assert_eq!(out.pixel(x, y), expected, "pixel ({x},{y})");
            }
        }
    }

    #[test]
    fn constant_patch_survives_any_field() {
        let src = Patch::filled(6, 4, [17, 130, 240]).unwrap();
        let field = DisplacementField::from_fn(6, 4, |x, y| (x as f64 * 1.37 - 4.2, (y as f64).sin() * 9.1));
        let out = remap(&src, &field, Interpolation::Bilinear, Border::Reflect).unwrap();
        assert_eq!(out, src);
    }

    #[test]
    fn reflect_does_not_duplicate_edge() {
        let src = Patch::from_fn(4, 1, |x, _| [x as u8 * 10; 3]);
        let field = DisplacementField::from_fn(4, 1, |_, _| (-2.0, 0.0));
        let out = remap(&src, &field, Interpolation::Nearest, Border::Reflect).unwrap();
        // x=0 reads -2 -> 2, x=1 reads -1 -> 1
        let row: Vec<u8> = (0..4).map(|x| out.pixel(x, 0)[0]).collect();
        assert_eq!(row, vec![20, 10, 0, 10]);
    }

    #[test]
    fn bilinear_half_pixel_average() {
        let src = Patch::from_fn(2, 1, |x, _| [if x == 0 { 10 } else { 21 }; 3]);
        let field = DisplacementField::from_fn(1, 1, |_, _| (0.5, 0.0));
        let out = remap(&src, &field, Interpolation::Bilinear, Border::Reflect).unwrap();
        // 15.5 rounds half away from zero
        assert_eq!(out.pixel(0, 0), [16; 3]);
        assert_eq!(out.width(), 1);
    }

    #[test]
    fn mismatched_components_rejected() {
        assert!(matches!(
            DisplacementField::new(2, 2, vec![0.0; 4], vec![0.0; 3]),
            Err(Error::Shape(_))
        ));
    }
}
