//! The binary convexity constraint and geometric oracles for it.
//!
//! For an indicator `u` (background 1, object 0) and a normalized radial
//! kernel `b`, the object is convex iff
//!
//! ```text
//! C(u)(x) = u(x) * (b * u)(x) - u(x) / 2 >= 0   for every x
//! ```
//!
//! i.e. every background pixel sees at least half of its disc in the
//! background. On the lattice the half-ball balance only holds up to
//! `1 / (2N)` for a kernel covering `N` points; see [`discretization_slack`].

use crate::conv::{disc_offsets, make_disc_kernel, FftConvolver, Kernel, KernelKind, PadMode};
use crate::error::{Error, Result};
use crate::grid::{boundary_extract, BinaryField, ScalarField};
use crate::hull::hull_mask;
use crate::scalar::Real;

/// How the object perimeter enters the convolution `b * u`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundaryView {
    /// Strict `{0, 1}` values.
    #[default]
    Sharp,
    /// Perimeter pixels read `0.5`.
    Half,
}

impl BoundaryView {
    pub fn apply<T: Real>(self, u: &BinaryField) -> ScalarField<T> {
        match self {
            BoundaryView::Sharp => u.to_field(),
            BoundaryView::Half => u.ternary_view(),
        }
    }
}

/// `C_r(u)` sampled on the lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintField<T> {
    pub radius: f64,
    pub values: ScalarField<T>,
}

impl<T: Real> ConstraintField<T> {
    pub fn min(&self) -> T {
        self.values.min()
    }
}

/// `u * conv - u / 2` with the strict binary prefactor. `conv` must be `b * u`
/// (in whichever boundary view the caller chose).
pub fn constraint_from_convolution<T: Real>(u: &BinaryField, conv: &ScalarField<T>) -> ScalarField<T> {
    let half = T::lit(0.5);
    let mut out = conv.clone();
    for (c, &ui) in out.values_mut().iter_mut().zip(u.values()) {
        *c = if ui == 0 { T::zero() } else { *c - half };
    }
    out
}

/// Evaluates `C_r(u)` with the disc convolution padded by background (1).
pub fn constraint_field<T: Real>(u: &BinaryField, kernel: &Kernel<T>, view: BoundaryView) -> Result<ConstraintField<T>> {
    let KernelKind::Disc { radius } = kernel.kind() else {
        return Err(Error::NotRadial);
    };
    let plan = FftConvolver::new(u.width(), u.height(), kernel)?;
    let conv = plan.apply(&view.apply(u), PadMode::Constant(T::one()))?;
    Ok(ConstraintField {
        radius,
        values: constraint_from_convolution(u, &conv),
    })
}

/// Smallest constraint value over all radii and pixels (sharp boundary view).
///
/// An empty radius list yields `0.5`, the value of a field with no object.
pub fn min_violation<T: Real>(u: &BinaryField, radii: &[f64]) -> Result<T> {
    Ok(violation_per_radius::<T>(u, radii)?
        .into_iter()
        .fold(T::lit(0.5), T::min))
}

/// `min_x C_r(u)(x)` for each radius, in input order.
pub fn violation_per_radius<T: Real>(u: &BinaryField, radii: &[f64]) -> Result<Vec<T>> {
    radii
        .iter()
        .map(|&r| {
            let k = make_disc_kernel::<T>(r)?;
            Ok(constraint_field(u, &k, BoundaryView::Sharp)?.min())
        })
        .collect()
}

/// `1 / (2N)` where `N` is the lattice count of the radius-`r` disc.
pub fn discretization_slack(r: f64) -> f64 {
    1.0 / (2.0 * disc_offsets(r).len() as f64)
}

/// Fraction of the lattice disc around boundary pixel `at` that lies in the
/// background. Points outside the image count as background.
pub fn half_ball_test(u: &BinaryField, r: f64, at: (usize, usize)) -> Result<f64> {
    if r < 1.0 {
        return Err(Error::RadiusBelowMesh(r));
    }
    if !boundary_extract(u).contains(at.0, at.1) {
        return Err(Error::NotOnBoundary(at.0, at.1));
    }
    let (w, h) = (u.width() as i64, u.height() as i64);
    let offsets = disc_offsets(r);
    let background = offsets
        .iter()
        .filter(|&&(dx, dy)| {
            let (x, y) = (at.0 as i64 + dx, at.1 as i64 + dy);
            x < 0 || y < 0 || x >= w || y >= h || u.get(x as usize, y as usize) == 1
        })
        .count();
    Ok(background as f64 / offsets.len() as f64)
}

/// Default tolerance for [`is_convex_discrete`].
pub const CONVEXITY_TOLERANCE: f64 = 0.01;

/// Convexity score `|hull(D) \ D| / |D|` and whether it is within `tol`.
pub fn is_convex_discrete(u: &BinaryField, tol: f64) -> Result<(bool, f64)> {
    let score = convexity_score(u)?;
    Ok((score <= tol, score))
}

pub fn convexity_score(u: &BinaryField) -> Result<f64> {
    let area = u.object_area();
    if area == 0 {
        return Err(Error::EmptyObject);
    }
    let hull = hull_mask(u)?;
    let added = hull
        .values()
        .iter()
        .zip(u.values())
        .filter(|&(&hv, &uv)| hv == 0 && uv == 1)
        .count();
    Ok(added as f64 / area as f64)
}
