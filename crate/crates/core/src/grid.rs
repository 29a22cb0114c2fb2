//! Lattice containers and pixel-set utilities.
//!
//! Every field lives on a `width x height` lattice with unit mesh size and is
//! stored row-major: the value at column `x`, row `y` sits at `y * width + x`.
//!
//! Binary fields follow the indicator convention used throughout the crate:
//! `1` marks background and `0` marks the object.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Real-valued function on the pixel lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField<T> {
    width: usize,
    height: usize,
    values: Vec<T>,
}

impl<T: Real> ScalarField<T> {
    /// Field with every pixel set to `value`.
    ///
    /// # Panics
    /// If either dimension is zero.
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        assert!(width >= 1 && height >= 1, "field dimensions must be positive");
        Self {
            width,
            height,
            values: vec![value; width * height],
        }
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, T::zero())
    }

    pub fn from_vec(width: usize, height: usize, values: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 || values.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: (width, height),
                found: (values.len(), 1),
            });
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        assert!(width >= 1 && height >= 1, "field dimensions must be positive");
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            values,
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.values[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: T) {
        self.values[y * self.width + x] = v;
    }

    /// Elementwise combination of two fields of equal size.
    pub fn zip_map(&self, other: &Self, mut f: impl FnMut(T, T) -> T) -> Self {
        debug_assert_eq!(self.dims(), other.dims());
        Self {
            width: self.width,
            height: self.height,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn map(&self, f: impl FnMut(T) -> T) -> Self {
        Self {
            width: self.width,
            height: self.height,
            values: self.values.iter().copied().map(f).collect(),
        }
    }

    pub fn min(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn sum(&self) -> T {
        self.values.iter().copied().sum()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Largest absolute pointwise difference.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        debug_assert_eq!(self.dims(), other.dims());
        self.values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max)
    }
}

impl<T> ScalarField<T> {
    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }
}

impl<T> Index<(usize, usize)> for ScalarField<T> {
    type Output = T;

    fn index(&self, (x, y): (usize, usize)) -> &T {
        &self.values[y * self.width + x]
    }
}

impl<T> IndexMut<(usize, usize)> for ScalarField<T> {
    fn index_mut(&mut self, (x, y): (usize, usize)) -> &mut T {
        &mut self.values[y * self.width + x]
    }
}

/// `{0, 1}`-valued indicator: `1` on background, `0` on the object.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryField {
    width: usize,
    height: usize,
    values: Vec<u8>,
}

impl BinaryField {
    /// # Panics
    /// If either dimension is zero or `value` is not 0 or 1.
    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        assert!(width >= 1 && height >= 1, "field dimensions must be positive");
        assert!(value <= 1, "binary values are 0 or 1");
        Self {
            width,
            height,
            values: vec![value; width * height],
        }
    }

    /// All background.
    pub fn background(width: usize, height: usize) -> Self {
        Self::filled(width, height, 1)
    }

    pub fn from_vec(width: usize, height: usize, values: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || values.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: (width, height),
                found: (values.len(), 1),
            });
        }
        if values.iter().any(|&v| v > 1) {
            return Err(Error::InvalidParameter(
                "binary field values must be 0 or 1".into(),
            ));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    /// `f(x, y)` is true where the pixel belongs to the object.
    pub fn from_object_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut out = Self::background(width, height);
        for y in 0..height {
            for x in 0..width {
                if f(x, y) {
                    out.values[y * width + x] = 0;
                }
            }
        }
        out
    }

    /// Background everywhere except the listed object pixels.
    pub fn from_object_pixels(set: &PixelSet) -> Self {
        let mut out = Self::background(set.width(), set.height());
        for &(x, y) in set.iter() {
            out.set(x, y, 0);
        }
        out
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.values[y * self.width + x]
    }

    #[inline]
    pub fn is_object(&self, x: usize, y: usize) -> bool {
        self.get(x, y) == 0
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        debug_assert!(v <= 1);
        self.values[y * self.width + x] = v;
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn count_ones(&self) -> usize {
        self.values.iter().filter(|&&v| v == 1).count()
    }

    pub fn object_area(&self) -> usize {
        self.values.len() - self.count_ones()
    }

    pub fn object_pixels(&self) -> PixelSet {
        self.pixels_with(0)
    }

    pub fn background_pixels(&self) -> PixelSet {
        self.pixels_with(1)
    }

    fn pixels_with(&self, value: u8) -> PixelSet {
        let mut pixels = Vec::new();
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) == value {
                    pixels.push((x, y));
                }
            }
        }
        PixelSet {
            width: self.width,
            height: self.height,
            pixels,
        }
    }

    /// Swaps object and background.
    pub fn complement(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|&v| 1 - v).collect(),
        }
    }

    pub fn to_field<T: Real>(&self) -> ScalarField<T> {
        ScalarField {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|&v| T::count(v as usize)).collect(),
        }
    }

    /// Real-valued copy in which the object perimeter reads `0.5`.
    pub fn ternary_view<T: Real>(&self) -> ScalarField<T> {
        let mut out = self.to_field();
        let half = T::lit(0.5);
        for &(x, y) in boundary_extract(self).iter() {
            out.set(x, y, half);
        }
        out
    }

    /// Number of pixels where the two fields disagree.
    pub fn hamming(&self, other: &Self) -> usize {
        debug_assert_eq!(self.dims(), other.dims());
        self.values
            .iter()
            .zip(&other.values)
            .filter(|(a, b)| a != b)
            .count()
    }
}

/// Unique, in-bounds lattice coordinates kept in row-major order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelSet {
    width: usize,
    height: usize,
    pixels: Vec<(usize, usize)>,
}

impl PixelSet {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            pixels: Vec::new(),
        }
    }

    /// Sorts and deduplicates; rejects out-of-bounds coordinates.
    pub fn new(width: usize, height: usize, mut pixels: Vec<(usize, usize)>) -> Result<Self> {
        if let Some(&(x, y)) = pixels.iter().find(|&&(x, y)| x >= width || y >= height) {
            return Err(Error::InvalidParameter(format!(
                "pixel ({x}, {y}) outside {width}x{height} domain"
            )));
        }
        pixels.sort_unstable_by_key(|&(x, y)| (y, x));
        pixels.dedup();
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, (usize, usize)> {
        self.pixels.iter()
    }

    pub fn as_slice(&self) -> &[(usize, usize)] {
        &self.pixels
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        self.pixels
            .binary_search_by_key(&(y, x), |&(px, py)| (py, px))
            .is_ok()
    }

    /// Boolean membership mask, row-major.
    pub fn to_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.width * self.height];
        for &(x, y) in &self.pixels {
            mask[y * self.width + x] = true;
        }
        mask
    }

    pub fn is_subset_of(&self, other: &PixelSet) -> bool {
        self.pixels.iter().all(|&(x, y)| other.contains(x, y))
    }
}

impl<'a> IntoIterator for &'a PixelSet {
    type Item = &'a (usize, usize);
    type IntoIter = std::slice::Iter<'a, (usize, usize)>;

    fn into_iter(self) -> Self::IntoIter {
        self.pixels.iter()
    }
}

/// Multi-channel image with interleaved samples (1 channel for gray, 3 for color).
#[derive(Debug, Clone, PartialEq)]
pub struct Image<T> {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<T>,
}

impl<T: Real> Image<T> {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 || channels == 0 || data.len() != width * height * channels {
            return Err(Error::DimensionMismatch {
                expected: (width, height),
                found: (data.len(), channels),
            });
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn from_gray(field: &ScalarField<T>) -> Self {
        Self {
            width: field.width(),
            height: field.height(),
            channels: 1,
            data: field.values().to_vec(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[T] {
        let start = (y * self.width + x) * self.channels;
        &self.data[start..start + self.channels]
    }

    /// Stacks the colors of the given pixels into a flat sample buffer.
    pub fn gather(&self, pixels: &PixelSet) -> Vec<T> {
        let mut out = Vec::with_capacity(pixels.len() * self.channels);
        for &(x, y) in pixels {
            out.extend_from_slice(self.pixel(x, y));
        }
        out
    }
}

/// Object pixels that touch the background through a 4-neighbor or sit on
/// the image border.
pub fn boundary_extract(u: &BinaryField) -> PixelSet {
    let (w, h) = u.dims();
    let mut pixels = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !u.is_object(x, y) {
                continue;
            }
            let on_border = x == 0 || y == 0 || x + 1 == w || y + 1 == h;
            if on_border
                || u.get(x - 1, y) == 1
                || u.get(x + 1, y) == 1
                || u.get(x, y - 1) == 1
                || u.get(x, y + 1) == 1
            {
                pixels.push((x, y));
            }
        }
    }
    PixelSet {
        width: w,
        height: h,
        pixels,
    }
}

/// Exact squared Euclidean distance from every pixel to the nearest object pixel.
///
/// Two passes of the lower-envelope-of-parabolas transform (columns, then rows).
/// Returns `None` when the field has no object pixel.
pub fn squared_distance_to_object(u: &BinaryField) -> Option<Vec<f64>> {
    let (w, h) = u.dims();
    if u.object_area() == 0 {
        return None;
    }
    let inf = f64::INFINITY;
    let mut grid: Vec<f64> = u
        .values()
        .iter()
        .map(|&v| if v == 0 { 0.0 } else { inf })
        .collect();

    let mut column = vec![0.0; h];
    let mut out = vec![0.0; h.max(w)];
    for x in 0..w {
        for y in 0..h {
            column[y] = grid[y * w + x];
        }
        lower_envelope_1d(&column, &mut out[..h]);
        for y in 0..h {
            grid[y * w + x] = out[y];
        }
    }
    let mut row = vec![0.0; w];
    for y in 0..h {
        row.copy_from_slice(&grid[y * w..(y + 1) * w]);
        lower_envelope_1d(&row, &mut out[..w]);
        grid[y * w..(y + 1) * w].copy_from_slice(&out[..w]);
    }
    Some(grid)
}

fn lower_envelope_1d(f: &[f64], d: &mut [f64]) {
    let n = f.len();
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    let mut first = None;
    for q in 0..n {
        if f[q].is_finite() {
            first = Some(q);
            break;
        }
    }
    let Some(start) = first else {
        d.iter_mut().for_each(|x| *x = f64::INFINITY);
        return;
    };
    v[0] = start;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in start + 1..n {
        if !f[q].is_finite() {
            continue;
        }
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k] {
                if k == 0 {
                    v[0] = q;
                    z[1] = f64::INFINITY;
                    break;
                }
                k -= 1;
                continue;
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
            break;
        }
    }
    k = 0;
    for q in 0..n {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let dq = q as f64 - p as f64;
        d[q] = dq * dq + f[p];
    }
}

/// Pixels whose Euclidean distance to the nearest object pixel exceeds `s`.
pub fn distance_beyond(u: &BinaryField, s: f64) -> Result<PixelSet> {
    let dist2 = squared_distance_to_object(u).ok_or(Error::EmptyObject)?;
    let threshold = s * s;
    let (w, h) = u.dims();
    let mut pixels = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if dist2[y * w + x] > threshold {
                pixels.push((x, y));
            }
        }
    }
    Ok(PixelSet {
        width: w,
        height: h,
        pixels,
    })
}

/// Disagreement count of `v2` against `v1`, normalized by the ones in `v1`.
pub fn relative_variation(v1: &BinaryField, v2: &BinaryField) -> Result<f64> {
    if v1.dims() != v2.dims() {
        return Err(Error::DimensionMismatch {
            expected: v1.dims(),
            found: v2.dims(),
        });
    }
    let base = v1.count_ones();
    if base == 0 {
        return Err(Error::ZeroDenominator);
    }
    Ok(v1.hamming(v2) as f64 / base as f64)
}

/// Intersection over union of the object regions of two indicators.
pub fn jaccard(a: &BinaryField, b: &BinaryField) -> f64 {
    debug_assert_eq!(a.dims(), b.dims());
    let (mut inter, mut union) = (0usize, 0usize);
    for (&va, &vb) in a.values().iter().zip(b.values()) {
        let (oa, ob) = (va == 0, vb == 0);
        inter += (oa && ob) as usize;
        union += (oa || ob) as usize;
    }
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block(w: usize, h: usize, x0: usize, y0: usize, x1: usize, y1: usize) -> BinaryField {
        BinaryField::from_object_fn(w, h, |x, y| (x0..=x1).contains(&x) && (y0..=y1).contains(&y))
    }

    #[test]
    fn boundary_of_empty_object_is_empty() {
        assert!(boundary_extract(&BinaryField::background(8, 8)).is_empty());
    }

    #[test]
    fn isolated_pixel_is_its_own_perimeter() {
        let u = block(8, 8, 4, 3, 4, 3);
        assert_eq!(boundary_extract(&u).as_slice(), &[(4, 3)]);
    }

    #[test]
    fn block_perimeter_is_outer_ring() {
        let u = block(9, 9, 3, 3, 5, 5);
        let perim = boundary_extract(&u);
        // brute force: block pixels with a background 4-neighbor
        let mut expected = Vec::new();
        for y in 3..=5usize {
            for x in 3..=5usize {
                let nbrs = [(x - 1, y), (x + 1, y), (x, y - 1), (x, y + 1)];
                if nbrs.iter().any(|&(a, b)| u.get(a, b) == 1) {
                    expected.push((x, y));
                }
            }
        }
        assert_eq!(expected.len(), 8);
        assert_eq!(perim.as_slice(), expected.as_slice());
    }

    #[test]
    fn border_object_pixels_are_perimeter() {
        let u = BinaryField::filled(4, 4, 0);
        let perim = boundary_extract(&u);
        assert_eq!(perim.len(), 12);
        assert!(!perim.contains(1, 1) && !perim.contains(2, 2));
    }

    #[test]
    fn ternary_view_marks_perimeter_only() {
        let u = block(9, 9, 3, 3, 5, 5);
        let t: ScalarField<f64> = u.ternary_view();
        assert_eq!(t.get(4, 4), 0.0);
        assert_eq!(t.get(3, 4), 0.5);
        assert_eq!(t.get(0, 0), 1.0);
    }

    #[test]
    fn distance_beyond_zero_is_complement() {
        let u = block(16, 12, 3, 2, 7, 9);
        let far = distance_beyond(&u, 0.0).unwrap();
        assert_eq!(far, u.background_pixels());
    }

    #[test]
    fn distance_beyond_single_pixel_matches_brute_force() {
        let u = block(24, 24, 10, 10, 10, 10);
        let far = distance_beyond(&u, 5.0).unwrap();
        let mut expected = Vec::new();
        for y in 0..24i64 {
            for x in 0..24i64 {
                if (x - 10).pow(2) + (y - 10).pow(2) > 25 {
                    expected.push((x as usize, y as usize));
                }
            }
        }
        assert_eq!(far.as_slice(), expected.as_slice());
    }

    #[test]
    fn distance_beyond_diagonal_is_empty() {
        let u = block(20, 10, 0, 0, 0, 0);
        let diag = ((20f64).powi(2) + (10f64).powi(2)).sqrt();
        assert!(distance_beyond(&u, diag).unwrap().is_empty());
    }

    #[test]
    fn distance_beyond_empty_object_errors() {
        assert_eq!(
            distance_beyond(&BinaryField::background(5, 5), 1.0),
            Err(Error::EmptyObject)
        );
    }

    #[test]
    fn edt_matches_brute_force_on_scattered_objects() {
        let pts = [(1usize, 2usize), (13, 3), (7, 11), (2, 14), (15, 15)];
        let u = BinaryField::from_object_fn(17, 16, |x, y| pts.contains(&(x, y)));
        let d2 = squared_distance_to_object(&u).unwrap();
        for y in 0..16 {
            for x in 0..17 {
                let best = pts
                    .iter()
                    .map(|&(px, py)| ((x as i64 - px as i64).pow(2) + (y as i64 - py as i64).pow(2)) as f64)
                    .fold(f64::INFINITY, f64::min);
                assert_eq!(d2[y * 17 + x], best, "pixel ({x}, {y})");
            }
        }
    }

    #[test]
    fn relative_variation_examples() {
        let v1 = BinaryField::background(10, 10);
        assert_eq!(relative_variation(&v1, &v1).unwrap(), 0.0);
        let mut v2 = v1.clone();
        for x in 0..5 {
            v2.set(x, 0, 0);
        }
        assert!((relative_variation(&v1, &v2).unwrap() - 0.05).abs() < 1e-15);

        let v1 = BinaryField::from_object_fn(8, 8, |x, y| y * 8 + x >= 40);
        assert_eq!(v1.count_ones(), 40);
        let rv = relative_variation(&v1, &v1.complement()).unwrap();
        assert!((rv - 64.0 / 40.0).abs() < 1e-15);
    }

    #[test]
    fn relative_variation_zero_denominator() {
        let v1 = BinaryField::filled(4, 4, 0);
        assert_eq!(
            relative_variation(&v1, &v1),
            Err(Error::ZeroDenominator)
        );
    }

    #[test]
    fn pixel_set_dedups_and_rejects_out_of_bounds() {
        let s = PixelSet::new(4, 4, vec![(1, 1), (0, 2), (1, 1)]).unwrap();
        assert_eq!(s.as_slice(), &[(1, 1), (0, 2)]);
        assert!(PixelSet::new(4, 4, vec![(4, 0)]).is_err());
    }
}
