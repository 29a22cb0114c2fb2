//! Synthetic two-tone test images with seed masks and ground truth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::grid::{squared_distance_to_object, BinaryField, Image, PixelSet};
use crate::hull::{hull_mask, hull_of_points, rasterize_polygon, Point, Polygon};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Disc { center: (f64, f64), radius: f64 },
    /// Half-open pixel ranges `[x0, x0 + width) x [y0, y0 + height)`.
    Rectangle { x0: usize, y0: usize, width: usize, height: usize },
    /// A `2 arm` square with its upper-right `arm x arm` quadrant removed.
    LShape { x0: usize, y0: usize, arm: usize },
    Polygon(Polygon),
}

impl Shape {
    fn rasterize(&self, width: usize, height: usize) -> Result<BinaryField> {
        let too_large = |what: String| Err(Error::ShapeTooLarge(what));
        let (w, h) = (width as f64, height as f64);
        match self {
            &Shape::Disc { center: (cx, cy), radius } => {
                if cx - radius < 0.0 || cy - radius < 0.0 || cx + radius > w - 1.0 || cy + radius > h - 1.0 {
                    return too_large(format!("disc of radius {radius} at ({cx}, {cy}) on {width}x{height}"));
                }
                Ok(BinaryField::from_object_fn(width, height, |x, y| {
                    (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2) <= radius * radius
                }))
            }
            &Shape::Rectangle { x0, y0, width: rw, height: rh } => {
                if x0 + rw > width || y0 + rh > height {
                    return too_large(format!("{rw}x{rh} rectangle at ({x0}, {y0}) on {width}x{height}"));
                }
                Ok(BinaryField::from_object_fn(width, height, |x, y| {
                    (x0..x0 + rw).contains(&x) && (y0..y0 + rh).contains(&y)
                }))
            }
            &Shape::LShape { x0, y0, arm } => {
                if x0 + 2 * arm > width || y0 + 2 * arm > height {
                    return too_large(format!("L of arm {arm} at ({x0}, {y0}) on {width}x{height}"));
                }
                Ok(BinaryField::from_object_fn(width, height, |x, y| {
                    let inside = (x0..x0 + 2 * arm).contains(&x) && (y0..y0 + 2 * arm).contains(&y);
                    inside && !(x >= x0 + arm && y < y0 + arm)
                }))
            }
            Shape::Polygon(poly) => {
                let out = poly
                    .vertices()
                    .iter()
                    .any(|&(x, y)| x < 0 || y < 0 || x >= width as i64 || y >= height as i64);
                if out {
                    return too_large(format!("polygon leaves the {width}x{height} canvas"));
                }
                Ok(rasterize_polygon(poly, width, height))
            }
        }
    }
}

/// How the object seed pixels are placed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FgSeed {
    /// Object pixels within `radius` of the object centroid.
    Blob { radius: f64 },
    /// Every `stride`-th diagonal of the object pixels deeper than `margin`.
    Interior { margin: f64, stride: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec {
    pub width: usize,
    pub height: usize,
    pub shape: Shape,
    pub fg_intensity: f64,
    pub bg_intensity: f64,
    pub noise_std: f64,
    pub seed: u64,
    pub fg_seed: FgSeed,
    /// Background seeds lie at distance `(ring_inner, ring_outer]` from the
    /// convex hull of the object.
    pub ring_inner: f64,
    pub ring_outer: f64,
}

impl PhantomSpec {
    /// Centered shape on a canvas with intensities 200 / 50 and no noise.
    pub fn new(width: usize, height: usize, shape: Shape) -> Self {
        Self {
            width,
            height,
            shape,
            fg_intensity: 200.0,
            bg_intensity: 50.0,
            noise_std: 0.0,
            seed: 0,
            fg_seed: FgSeed::Interior { margin: 3.0, stride: 1 },
            ring_inner: 4.0,
            ring_outer: 6.0,
        }
    }

    pub fn disc(size: usize, radius: f64) -> Self {
        let c = (size as f64 - 1.0) / 2.0;
        Self::new(size, size, Shape::Disc { center: (c, c), radius })
    }

    pub fn with_noise(mut self, std: f64, seed: u64) -> Self {
        self.noise_std = std;
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone)]
pub struct Phantom<T> {
    pub image: Image<T>,
    pub fg: PixelSet,
    pub bg: PixelSet,
    /// Indicator of the shape (object = 0).
    pub truth: BinaryField,
}

pub fn gen_phantom<T: Real>(spec: &PhantomSpec) -> Result<Phantom<T>> {
    let (w, h) = (spec.width, spec.height);
    if !(spec.noise_std >= 0.0) {
        return Err(Error::InvalidParameter("noise std must be nonnegative".into()));
    }
    let truth = spec.shape.rasterize(w, h)?;
    let object = truth.object_pixels();
    if object.is_empty() {
        return Err(Error::EmptyObject);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_std).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let data = truth
        .values()
        .iter()
        .map(|&v| {
            let base = if v == 0 { spec.fg_intensity } else { spec.bg_intensity };
            let n = if spec.noise_std > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            T::lit((base + n).round().clamp(0.0, 255.0))
        })
        .collect();
    let image = Image::new(w, h, 1, data)?;

    let fg_pixels: Vec<(usize, usize)> = match spec.fg_seed {
        FgSeed::Blob { radius } => {
            let n = object.len() as f64;
            let cx = object.iter().map(|p| p.0 as f64).sum::<f64>() / n;
            let cy = object.iter().map(|p| p.1 as f64).sum::<f64>() / n;
            object
                .iter()
                .copied()
                .filter(|&(x, y)| (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2) <= radius * radius)
                .collect()
        }
        FgSeed::Interior { margin, stride } => {
            let depth = squared_distance_to_object(&truth.complement()).expect("background is nonempty");
            let stride = stride.max(1);
            object
                .iter()
                .copied()
                .filter(|&(x, y)| depth[y * w + x] > margin * margin && (x + y) % stride == 0)
                .collect()
        }
    };
    if fg_pixels.is_empty() {
        return Err(Error::ShapeTooLarge("no room for object seeds".into()));
    }
    let fg = PixelSet::new(w, h, fg_pixels)?;

    let dist = squared_distance_to_object(&hull_mask(&truth)?).expect("object is nonempty");
    let (lo, hi) = (spec.ring_inner * spec.ring_inner, spec.ring_outer * spec.ring_outer);
    let bg_pixels = dist
        .iter()
        .enumerate()
        .filter(|&(_, &d)| d > lo && d <= hi)
        .map(|(i, _)| (i % w, i / w))
        .collect();
    let bg = PixelSet::new(w, h, bg_pixels)?;

    Ok(Phantom { image, fg, bg, truth })
}

/// Smallest distance between two parallel lines enclosing a convex polygon.
pub fn minimum_width(poly: &Polygon) -> f64 {
    let v = poly.vertices();
    if v.len() < 3 {
        return 0.0;
    }
    poly.edges()
        .map(|(a, b)| {
            let len = (((b.0 - a.0).pow(2) + (b.1 - a.1).pow(2)) as f64).sqrt();
            v.iter()
                .map(|&p| ((b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0)).abs() as f64 / len)
                .fold(0.0, f64::max)
        })
        .fold(f64::INFINITY, f64::min)
}

fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (px, py) = (p.0 as f64, p.1 as f64);
    let (ax, ay, bx, by) = (a.0 as f64, a.1 as f64, b.0 as f64, b.1 as f64);
    let (dx, dy) = (bx - ax, by - ay);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((px - ax) * dx + (py - ay) * dy) / len2).clamp(0.0, 1.0)
    };
    ((px - ax - t * dx).powi(2) + (py - ay - t * dy).powi(2)).sqrt()
}

/// Random lattice-vertex convex polygon inside a `size x size` canvas whose
/// minimum width is at least `min_width`.
pub fn random_convex_polygon(rng: &mut impl Rng, size: usize, min_width: f64) -> Polygon {
    let s = size as f64;
    loop {
        let cx = rng.random_range(0.3 * s..0.7 * s);
        let cy = rng.random_range(0.3 * s..0.7 * s);
        let room = cx.min(cy).min(s - 1.0 - cx).min(s - 1.0 - cy);
        let radius = rng.random_range((0.15 * s).min(room)..=room.min(0.35 * s));
        let n = rng.random_range(3..=9);
        let pts: Vec<Point> = (0..n)
            .map(|_| {
                let a = rng.random_range(0.0..std::f64::consts::TAU);
                ((cx + radius * a.cos()).round() as i64, (cy + radius * a.sin()).round() as i64)
            })
            .collect();
        let Ok(poly) = hull_of_points(pts) else { continue };
        if poly.len() >= 3 && minimum_width(&poly) >= min_width {
            return poly;
        }
    }
}

/// Interior angle at vertex `i` of a counterclockwise simple polygon, in degrees.
pub fn interior_angle(poly: &Polygon, i: usize) -> f64 {
    let v = poly.vertices();
    let n = v.len();
    let (p, c, q) = (v[(i + n - 1) % n], v[i], v[(i + 1) % n]);
    let a_in = ((c.1 - p.1) as f64).atan2((c.0 - p.0) as f64);
    let a_out = ((q.1 - c.1) as f64).atan2((q.0 - c.0) as f64);
    let mut turn = (a_out - a_in).to_degrees();
    while turn <= -180.0 {
        turn += 360.0;
    }
    while turn > 180.0 {
        turn -= 360.0;
    }
    180.0 - turn
}

/// Random simple polygon with one reentrant vertex made by pushing the
/// midpoint of a long edge of a convex polygon inward.
///
/// The reentrant angle lies in `[200, 300]` degrees and the notch vertex
/// keeps at least `feature` pixels from every edge not incident to it.
pub fn random_reentrant_polygon(rng: &mut impl Rng, size: usize, feature: f64) -> Polygon {
    loop {
        let base = random_convex_polygon(rng, size, 2.0 * feature);
        let v = base.vertices().to_vec();
        let n = v.len();
        let long: Vec<usize> = (0..n)
            .filter(|&i| {
                let (a, b) = (v[i], v[(i + 1) % n]);
                (((b.0 - a.0).pow(2) + (b.1 - a.1).pow(2)) as f64).sqrt() >= 2.0 * feature
            })
            .collect();
        if long.is_empty() {
            continue;
        }
        let i = long[rng.random_range(0..long.len())];
        let (a, b) = (v[i], v[(i + 1) % n]);
        let (dx, dy) = ((b.0 - a.0) as f64, (b.1 - a.1) as f64);
        let len = (dx * dx + dy * dy).sqrt();
        // inward normal of a counterclockwise edge
        let (nx, ny) = (-dy / len, dx / len);
        let depth = rng.random_range(feature..=2.0 * feature);
        let t = rng.random_range(0.35..0.65);
        let notch = (
            (a.0 as f64 + t * dx + depth * nx).round() as i64,
            (a.1 as f64 + t * dy + depth * ny).round() as i64,
        );
        if !base.contains_convex(notch) {
            continue;
        }
        let mut verts = v.clone();
        verts.insert(i + 1, notch);
        let Ok(poly) = Polygon::new(verts) else { continue };
        let angle = interior_angle(&poly, i + 1);
        if !(200.0..=300.0).contains(&angle) {
            continue;
        }
        let m = poly.len();
        let far = (0..m)
            .filter(|&j| j != i && j != i + 1)
            .all(|j| point_segment_distance(notch, poly.vertices()[j], poly.vertices()[(j + 1) % m]) >= feature);
        if far {
            return poly;
        }
    }
}
