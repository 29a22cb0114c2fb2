//! Convex hulls of pixel sets and polygon rasterization.
//!
//! Vertices are lattice points, so every orientation and containment test
//! is exact integer arithmetic.

use crate::error::{Error, Result};
use crate::grid::{BinaryField, PixelSet};

pub type Point = (i64, i64);

/// Vertex list in counterclockwise order. Hulls of degenerate inputs hold
/// one vertex (a point) or two (a segment).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Polygon {
    vertices: Vec<Point>,
}

#[inline]
fn cross(o: Point, a: Point, b: Point) -> i64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

fn twice_signed_area(vertices: &[Point]) -> i64 {
    let n = vertices.len();
    (0..n)
        .map(|i| {
            let (a, b) = (vertices[i], vertices[(i + 1) % n]);
            a.0 * b.1 - b.0 * a.1
        })
        .sum()
}

impl Polygon {
    /// Polygon from an explicit vertex list; clockwise input is reversed.
    pub fn new(mut vertices: Vec<Point>) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::InvalidParameter("polygon needs at least one vertex".into()));
        }
        if vertices.len() >= 3 && twice_signed_area(&vertices) < 0 {
            vertices.reverse();
        }
        Ok(Self { vertices })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Twice the enclosed area (exact).
    pub fn twice_area(&self) -> i64 {
        twice_signed_area(&self.vertices).abs()
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// True when every turn is a left turn (or straight).
    pub fn is_convex(&self) -> bool {
        let n = self.vertices.len();
        if n < 3 {
            return true;
        }
        (0..n).all(|i| cross(self.vertices[i], self.vertices[(i + 1) % n], self.vertices[(i + 2) % n]) >= 0)
    }

    /// Inside-or-on test for a convex polygon (including degenerate ones).
    pub fn contains_convex(&self, p: Point) -> bool {
        match self.vertices.len() {
            1 => p == self.vertices[0],
            2 => on_segment(self.vertices[0], self.vertices[1], p),
            _ => self.edges().all(|(a, b)| cross(a, b, p) >= 0),
        }
    }

    /// Inside-or-on test for any simple polygon.
    pub fn contains(&self, p: Point) -> bool {
        if self.vertices.len() < 3 {
            return self.contains_convex(p);
        }
        if self.edges().any(|(a, b)| on_segment(a, b, p)) {
            return true;
        }
        // even-odd crossing count with a half-open rule on edge endpoints
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.1 > p.1) != (b.1 > p.1) {
                // x of the crossing compared exactly: p.x < a.x + (p.y - a.y)(b.x - a.x)/(b.y - a.y)
                let lhs = (p.0 - a.0) * (b.1 - a.1);
                let rhs = (p.1 - a.1) * (b.0 - a.0);
                let left = if b.1 > a.1 { lhs < rhs } else { lhs > rhs };
                if left {
                    inside = !inside;
                }
            }
        }
        inside
    }
}

fn on_segment(a: Point, b: Point, p: Point) -> bool {
    cross(a, b, p) == 0
        && p.0 >= a.0.min(b.0)
        && p.0 <= a.0.max(b.0)
        && p.1 >= a.1.min(b.1)
        && p.1 <= a.1.max(b.1)
}

/// Andrew's monotone chain; collinear boundary points are dropped.
pub fn convex_hull(points: &PixelSet) -> Result<Polygon> {
    let pts: Vec<Point> = points.iter().map(|&(x, y)| (x as i64, y as i64)).collect();
    hull_of_points(pts)
}

/// Hull of arbitrary lattice points.
pub fn hull_of_points(mut pts: Vec<Point>) -> Result<Polygon> {
    if pts.is_empty() {
        return Err(Error::NoObjectLabels);
    }
    pts.sort_unstable();
    pts.dedup();
    if pts.len() <= 2 {
        return Ok(Polygon { vertices: pts });
    }
    let mut lower: Vec<Point> = Vec::with_capacity(pts.len());
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Point> = Vec::with_capacity(pts.len());
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    // all points collinear: monotone chain leaves the two extremes
    Ok(Polygon { vertices: lower })
}

fn mark_segment(out: &mut BinaryField, a: Point, b: Point) {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let g = gcd(dx.abs(), dy.abs()).max(1);
    let (sx, sy) = (dx / g, dy / g);
    let steps = if dx == 0 && dy == 0 { 0 } else { g };
    for i in 0..=steps {
        mark(out, (a.0 + i * sx, a.1 + i * sy));
    }
}

fn mark(out: &mut BinaryField, p: Point) {
    if p.0 >= 0 && p.1 >= 0 && (p.0 as usize) < out.width() && (p.1 as usize) < out.height() {
        out.set(p.0 as usize, p.1 as usize, 0);
    }
}

fn gcd(mut a: i64, mut b: i64) -> i64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Marks as object every pixel whose center lies inside or on the polygon.
///
/// Interior spans come from an even-odd scanline fill in which an edge owns
/// the rows `[y_min, y_max)`; the lattice points on every edge are marked in a
/// second pass so boundary pixels are always included. Pixels outside the
/// canvas are clipped.
pub fn rasterize_polygon(poly: &Polygon, width: usize, height: usize) -> BinaryField {
    let mut out = BinaryField::background(width, height);
    let v = poly.vertices();
    if v.len() >= 3 {
        let y_lo = v.iter().map(|p| p.1).min().unwrap().max(0);
        let y_hi = v.iter().map(|p| p.1).max().unwrap().min(height as i64 - 1);
        let mut crossings: Vec<(i64, i64)> = Vec::new();
        for y in y_lo..=y_hi {
            crossings.clear();
            for (a, b) in poly.edges() {
                let (lo, hi) = if a.1 < b.1 { (a, b) } else { (b, a) };
                if lo.1 == hi.1 || y < lo.1 || y >= hi.1 {
                    continue;
                }
                // x = lo.x + (y - lo.y) * (hi.x - lo.x) / (hi.y - lo.y), kept as num/den with den > 0
                let den = hi.1 - lo.1;
                let num = lo.0 * den + (y - lo.1) * (hi.0 - lo.0);
                crossings.push((num, den));
            }
            crossings.sort_by(|&(n1, d1), &(n2, d2)| ((n1 as i128) * (d2 as i128)).cmp(&((n2 as i128) * (d1 as i128))));
            for pair in crossings.chunks_exact(2) {
                let (n0, d0) = pair[0];
                let (n1, d1) = pair[1];
                let x_start = ceil_div(n0, d0).max(0);
                let x_end = n1.div_euclid(d1).min(width as i64 - 1);
                for x in x_start..=x_end {
                    out.set(x as usize, y as usize, 0);
                }
            }
        }
    }
    match v.len() {
        1 => mark(&mut out, v[0]),
        _ => {
            for (a, b) in poly.edges() {
                mark_segment(&mut out, a, b);
            }
        }
    }
    out
}

fn ceil_div(n: i64, d: i64) -> i64 {
    -((-n).div_euclid(d))
}

/// Rasterized hull: object pixels of the result are the lattice points of `CH(points)`.
pub fn rasterize_hull(poly: &Polygon, width: usize, height: usize) -> BinaryField {
    rasterize_polygon(poly, width, height)
}

/// Rasterized convex hull of the object pixels of `u`.
pub fn hull_mask(u: &BinaryField) -> Result<BinaryField> {
    let poly = convex_hull(&u.object_pixels()).map_err(|_| Error::EmptyObject)?;
    Ok(rasterize_polygon(&poly, u.width(), u.height()))
}
