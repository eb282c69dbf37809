use super::patch::{to_u8, Patch};

/// Reflect-101 index folding (`dcb|abcd|cba`).
#[inline]
pub(crate) fn reflect101(i: i64, n: i64) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * n - 2;
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - m;
    }
    m as usize
}

/// A normalized, odd-length sampled Gaussian.
pub fn gaussian_kernel_1d(size: usize, sigma: f64) -> Vec<f64> {
    assert!(size % 2 == 1, "kernel size must be odd");
    let r = (size / 2) as i64;
    let taps: Vec<f64> = (-r..=r)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / sum).collect()
}

/// Square, odd-sized 2-D kernel stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel2d {
    size: usize,
    taps: Vec<f64>,
}

impl Kernel2d {
    pub fn new(size: usize, taps: Vec<f64>) -> Self {
        assert!(size % 2 == 1 && taps.len() == size * size);
        Self { size, taps }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.taps[y * self.size + x]
    }

    pub fn sum(&self) -> f64 {
        self.taps.iter().sum()
    }

    /// Scales the taps to unit mass.
    pub fn normalized(mut self) -> Self {
        let s = self.sum();
        self.taps.iter_mut().for_each(|t| *t /= s);
        self
    }
}

/// Separable filter of one float plane, reflect-101 borders.
pub(crate) fn smooth_plane(plane: &[f64], w: usize, h: usize, kx: &[f64], ky: &[f64]) -> Vec<f64> {
    let rx = (kx.len() / 2) as i64;
    let ry = (ky.len() / 2) as i64;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        let row = &plane[y * w..(y + 1) * w];
        for x in 0..w {
            tmp[y * w + x] = kx
                .iter()
                .enumerate()
                .map(|(k, t)| t * row[reflect101(x as i64 + k as i64 - rx, w as i64)])
                .sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = ky
                .iter()
                .enumerate()
                .map(|(k, t)| t * tmp[reflect101(y as i64 + k as i64 - ry, h as i64) * w + x])
                .sum();
        }
    }
    out
}

fn planes(src: &Patch) -> [Vec<f64>; 3] {
    let mut p = [
        Vec::with_capacity(src.width() * src.height()),
        Vec::with_capacity(src.width() * src.height()),
        Vec::with_capacity(src.width() * src.height()),
    ];
    for px in src.pixels() {
        for c in 0..3 {
            p[c].push(px[c] as f64);
        }
    }
    p
}

fn from_planes(w: usize, h: usize, p: &[Vec<f64>; 3]) -> Patch {
    Patch::from_fn(w, h, |x, y| {
        let i = y * w + x;
        [to_u8(p[0][i]), to_u8(p[1][i]), to_u8(p[2][i])]
    })
}

/// Horizontal pass with `kx`, then vertical with `ky`; intermediates stay
/// in floating point.
pub fn convolve_separable(src: &Patch, kx: &[f64], ky: &[f64]) -> Patch {
    if kx.len() == 1 && ky.len() == 1 && kx[0] == 1.0 && ky[0] == 1.0 {
        return src.clone();
    }
    let (w, h) = (src.width(), src.height());
    let p = planes(src);
    let out = [
        smooth_plane(&p[0], w, h, kx, ky),
        smooth_plane(&p[1], w, h, kx, ky),
        smooth_plane(&p[2], w, h, kx, ky),
    ];
    from_planes(w, h, &out)
}

/// Direct 2-D correlation with reflect-101 borders.
pub fn convolve2d(src: &Patch, kernel: &Kernel2d) -> Patch {
    let (w, h) = (src.width() as i64, src.height() as i64);
    let r = (kernel.size / 2) as i64;
    let taps: Vec<(i64, i64, f64)> = (0..kernel.size)
        .flat_map(|ky| (0..kernel.size).map(move |kx| (kx, ky)))
        .map(|(kx, ky)| (kx as i64 - r, ky as i64 - r, kernel.at(kx, ky)))
        .filter(|t| t.2 != 0.0)
        .collect();
    Patch::from_fn(src.width(), src.height(), |x, y| {
        let mut acc = [0.0; 3];
        for &(ox, oy, t) in &taps {
            let sx = reflect101(x as i64 + ox, w);
            let sy = reflect101(y as i64 + oy, h);
            for c in 0..3 {
                acc[c] += t * src.channel(sx, sy, c) as f64;
            }
        }
        [to_u8(acc[0]), to_u8(acc[1]), to_u8(acc[2])]
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflect101_folds() {
        let folded: Vec<usize> = (-4..8).map(|i| reflect101(i, 4)).collect();
        assert_eq!(folded, vec![2, 3, 2, 1, 0, 1, 2, 3, 2, 1, 0, 1]);
        assert_eq!(reflect101(-5, 1), 0);
        assert_eq!(reflect101(3, 2), 1);
        assert_eq!(reflect101(-1, 2), 1);
    }

    #[test]
    fn gaussian_kernel_has_unit_mass() {
        for (size, sigma) in [(3, 0.8), (5, 1.1), (33, 4.0)] {
            let k = gaussian_kernel_1d(size, sigma);
            assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert_eq!(k.len(), size);
            assert!((k[0] - k[size - 1]).abs() < 1e-15);
        }
    }

    #[test]
    fn convolutions_preserve_uniform() {
        let src = Patch::filled(9, 7, [3, 128, 251]).unwrap();
        let k = gaussian_kernel_1d(5, 1.1);
        assert_eq!(convolve_separable(&src, &k, &k), src);
        let box3 = Kernel2d::new(3, vec![1.0; 9]).normalized();
        assert_eq!(convolve2d(&src, &box3), src);
    }

    #[test]
    fn separable_matches_outer_product() {
        let src = Patch::from_fn(8, 6, |x, y| [(x * 30) as u8, (y * 40) as u8, ((x * y) % 256) as u8]);
        let k = gaussian_kernel_1d(3, 0.8);
        let outer = Kernel2d::new(3, (0..9).map(|i| k[i / 3] * k[i % 3]).collect());
        assert_eq!(convolve_separable(&src, &k, &k), convolve2d(&src, &outer));
    }
}
