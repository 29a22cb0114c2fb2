//! Convexity-constrained segmentation by multiplier ascent and linearized thresholding.
//!
//! One iteration:
//!
//! 1. find the narrow band around the current object boundary,
//! 2. evaluate the linearized cost `F` of the Lagrangian at the current iterate,
//! 3. threshold `F + theta (0.5 - u)` on the band and re-impose the labels,
//! 4. move each multiplier `g_i` against its constraint field and clip at zero.
//!
//! The region force is refitted periodically from the current partition and
//! the relative variation against an older iterate decides when to stop.

use std::time::Instant;

use serde::Serialize;

use crate::conv::{disc_offsets, make_disc_kernel, make_gaussian_kernel, FftConvolver, PadMode};
use crate::convexity::{constraint_from_convolution, convexity_score, violation_per_radius, BoundaryView};
use crate::error::{Error, Result};
use crate::grid::{relative_variation, BinaryField, Image, PixelSet, ScalarField};
use crate::hull::{convex_hull, rasterize_hull};
use crate::region_force::{build_force, fit_gmm, init_models, EmOptions, ForceField, ForceParams, Gmm, SAMPLES_PER_COMPONENT};
use crate::scalar::Real;

/// Form of the constraint term in the linearized cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstraintGradient {
    /// `0.5 g - b * (u + g u)`.
    #[default]
    Verbatim,
    /// `0.5 g - g (b * u) - b * (g u)`, the derivative of `-g C(u)`.
    Exact,
}

/// Out-of-domain handling for the length-term convolution.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LengthPad {
    #[default]
    Replicate,
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverConfig {
    /// Constraint disc radii, ascending.
    pub radii: Vec<f64>,
    /// Length weight.
    pub lambda: f64,
    pub w0: f64,
    pub w1: f64,
    /// Multiplier step size.
    pub tau: f64,
    /// Proximal weight.
    pub theta: f64,
    /// Narrow-band threshold in disc-pixel counts.
    pub band_threshold: f64,
    pub band_radius: f64,
    pub gaussian_size: usize,
    pub gaussian_sigma: f64,
    /// Margin `s` around the initial hull excluded from the background fit.
    pub background_margin: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub force_refresh_period: usize,
    pub variation_period: usize,
    pub fg_components: usize,
    pub bg_components: usize,
    pub gamma0: f64,
    pub gamma1: f64,
    pub p_floor: f64,
    /// EM seed.
    pub seed: u64,
    pub em_max_iterations: usize,
    pub em_tolerance: f64,
    pub constraint_gradient: ConstraintGradient,
    /// Multiply the length term by `sqrt(pi / sigma)`.
    pub length_prefactor: bool,
    /// Value read outside the image by the constraint convolutions.
    pub constraint_pad: f64,
    pub length_pad: LengthPad,
    /// Whether the object perimeter reads 0.5 inside the constraint convolutions.
    pub half_boundary: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            radii: vec![4.0, 9.0, 14.0, 19.0],
            lambda: 0.1,
            w0: 0.5,
            w1: 0.5,
            tau: 1.0,
            theta: 1.0,
            band_threshold: 2.0,
            band_radius: 3.0,
            gaussian_size: 5,
            gaussian_sigma: 0.5,
            background_margin: 5.0,
            tolerance: 1e-3,
            max_iterations: 5000,
            force_refresh_period: 50,
            variation_period: 300,
            fg_components: 2,
            bg_components: 3,
            gamma0: 1.0,
            gamma1: 1.0,
            p_floor: 1e-6,
            seed: 0,
            em_max_iterations: 100,
            em_tolerance: 1e-6,
            constraint_gradient: ConstraintGradient::Verbatim,
            length_prefactor: false,
            constraint_pad: 1.0,
            length_pad: LengthPad::Replicate,
            half_boundary: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if self.radii.iter().any(|&r| !(r >= 1.0)) {
            return Err(Error::RadiusBelowMesh(self.radii.iter().copied().fold(f64::INFINITY, f64::min)));
        }
        if self.radii.windows(2).any(|w| w[0] > w[1]) {
            return bad("radii must be sorted ascending");
        }
        if !(self.tau > 0.0) {
            return bad("tau must be positive");
        }
        if !(self.theta >= 0.0) || !(self.lambda >= 0.0) || !(self.band_threshold >= 0.0) {
            return bad("theta, lambda and band threshold must be nonnegative");
        }
        if !(self.w0 >= 0.0) || !(self.w1 >= 0.0) {
            return bad("w0 and w1 must be nonnegative");
        }
        if !(self.gamma0 >= 0.0) || !(self.gamma1 >= 0.0) || self.gamma0 + self.gamma1 == 0.0 {
            return bad("gamma0 and gamma1 must be nonnegative and not both zero");
        }
        if !(self.p_floor > 0.0 && self.p_floor < 0.5) {
            return bad("p_floor must lie in (0, 0.5)");
        }
        if self.band_radius < 1.0 {
            return Err(Error::RadiusBelowMesh(self.band_radius));
        }
        if self.force_refresh_period == 0 || self.variation_period == 0 {
            return bad("periods must be positive");
        }
        if !(self.background_margin >= 0.0) || !(self.tolerance >= 0.0) {
            return bad("background margin and tolerance must be nonnegative");
        }
        if self.fg_components == 0 || self.bg_components == 0 {
            return bad("component counts must be positive");
        }
        if !(0.0..=1.0).contains(&self.constraint_pad) {
            return bad("constraint pad must lie in [0, 1]");
        }
        Ok(())
    }

    pub fn force_params(&self) -> ForceParams {
        ForceParams {
            w0: self.w0,
            w1: self.w1,
            gamma0: self.gamma0,
            gamma1: self.gamma1,
            p_floor: self.p_floor,
        }
    }

    pub fn em_options(&self) -> EmOptions {
        EmOptions {
            max_iterations: self.em_max_iterations,
            tolerance: self.em_tolerance,
            seed: self.seed,
            ..EmOptions::default()
        }
    }

    fn boundary_view(&self) -> BoundaryView {
        if self.half_boundary {
            BoundaryView::Half
        } else {
            BoundaryView::Sharp
        }
    }
}

/// Hard labels after relabeling: the hull of the object labels is pinned to
/// the object, background labels outside it are pinned to the background.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelConstraints {
    /// Rasterized `CH(R_ob)` as an indicator.
    pub hull: BinaryField,
    object: Vec<bool>,
    background: Vec<bool>,
}

impl LabelConstraints {
    pub fn new(r_ob: &PixelSet, r_bg: &PixelSet) -> Result<Self> {
        if (r_ob.width(), r_ob.height()) != (r_bg.width(), r_bg.height()) {
            return Err(Error::DimensionMismatch {
                expected: (r_ob.width(), r_ob.height()),
                found: (r_bg.width(), r_bg.height()),
            });
        }
        let poly = convex_hull(r_ob)?;
        let hull = rasterize_hull(&poly, r_ob.width(), r_ob.height());
        let object: Vec<bool> = hull.values().iter().map(|&v| v == 0).collect();
        let mut background = r_bg.to_mask();
        for (b, &o) in background.iter_mut().zip(&object) {
            *b &= !o;
        }
        Ok(Self {
            hull,
            object,
            background,
        })
    }

    /// Pixels forced to the object.
    pub fn object_mask(&self) -> &[bool] {
        &self.object
    }

    /// Pixels forced to the background.
    pub fn background_mask(&self) -> &[bool] {
        &self.background
    }

    pub fn is_feasible(&self, u: &BinaryField) -> bool {
        u.values()
            .iter()
            .zip(self.object.iter().zip(&self.background))
            .all(|(&v, (&o, &b))| !(o && v != 0) && !(b && v != 1))
    }
}

/// Band mask where `|sum_disc u - N u| >= rho` for the counting disc of radius `r0`.
/// Pixels outside the image take the value of the nearest edge pixel.
pub fn narrow_band_mask(u: &BinaryField, r0: f64, rho: f64) -> Vec<bool> {
    let offsets = disc_offsets(r0);
    let n = offsets.len() as i64;
    let (w, h) = (u.width() as i64, u.height() as i64);
    let mut mask = vec![false; u.values().len()];
    for y in 0..h {
        for x in 0..w {
            let mut ones = 0i64;
            for &(dx, dy) in &offsets {
                let px = (x + dx).clamp(0, w - 1) as usize;
                let py = (y + dy).clamp(0, h - 1) as usize;
                ones += u.get(px, py) as i64;
            }
            let stat = (ones - n * u.get(x as usize, y as usize) as i64).abs();
            mask[(y * w + x) as usize] = stat as f64 >= rho;
        }
    }
    mask
}

pub fn narrow_band(u: &BinaryField, r0: f64, rho: f64) -> PixelSet {
    let mask = narrow_band_mask(u, r0, rho);
    let w = u.width();
    let pixels = mask
        .iter()
        .enumerate()
        .filter(|(_, &m)| m)
        .map(|(i, _)| (i % w, i / w))
        .collect();
    PixelSet::new(u.width(), u.height(), pixels).expect("band pixels are in bounds")
}

/// Linearized cost together with the constraint fields computed on the way.
#[derive(Debug, Clone)]
pub struct CostTerms<T> {
    pub cost: ScalarField<T>,
    /// `C_i(u)` per radius, with the configured boundary view inside the convolution.
    pub constraints: Vec<ScalarField<T>>,
}

/// Precomputed kernels and transform plans for one image size.
#[derive(Debug)]
pub struct CostEvaluator<T: Real> {
    radii: Vec<f64>,
    discs: Vec<FftConvolver<T>>,
    gaussian: FftConvolver<T>,
    length_weight: T,
    gradient: ConstraintGradient,
    constraint_pad: T,
    length_pad: PadMode<T>,
    view: BoundaryView,
}

impl<T: Real> CostEvaluator<T> {
    pub fn new(width: usize, height: usize, config: &SolverConfig) -> Result<Self> {
        let discs = config
            .radii
            .iter()
            .map(|&r| FftConvolver::new(width, height, &make_disc_kernel::<T>(r)?))
            .collect::<Result<_>>()?;
        let gk = make_gaussian_kernel::<T>(config.gaussian_size, config.gaussian_sigma)?;
        let gaussian = FftConvolver::new(width, height, &gk)?;
        let mut length_weight = config.lambda;
        if config.length_prefactor {
            length_weight *= (std::f64::consts::PI / config.gaussian_sigma).sqrt();
        }
        let length_pad = match config.length_pad {
            LengthPad::Replicate => PadMode::Replicate,
            LengthPad::Constant(c) => PadMode::Constant(T::lit(1.0 - 2.0 * c)),
        };
        Ok(Self {
            radii: config.radii.clone(),
            discs,
            gaussian,
            length_weight: T::lit(length_weight),
            gradient: config.constraint_gradient,
            constraint_pad: T::lit(config.constraint_pad),
            length_pad,
            view: config.boundary_view(),
        })
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn evaluate(&self, u: &BinaryField, multipliers: &[ScalarField<T>], force: &ScalarField<T>) -> Result<CostTerms<T>> {
        if multipliers.len() != self.discs.len() {
            return Err(Error::InvalidParameter(format!(
                "expected {} multiplier fields, got {}",
                self.discs.len(),
                multipliers.len()
            )));
        }
        let half = T::lit(0.5);
        let conv_input: ScalarField<T> = self.view.apply(u);
        let mut cost = force.clone();
        let mut constraints = Vec::with_capacity(self.discs.len());
        for (plan, g) in self.discs.iter().zip(multipliers) {
            let gu = g.zip_map(&conv_input, |a, b| a * b);
            let (bu, bgu) = plan.apply_pair(
                &conv_input,
                PadMode::Constant(self.constraint_pad),
                &gu,
                PadMode::Constant(T::zero()),
            )?;
            let (gv, buv, bguv) = (g.values(), bu.values(), bgu.values());
            for (i, c) in cost.values_mut().iter_mut().enumerate() {
                let coupling = match self.gradient {
                    ConstraintGradient::Verbatim => buv[i],
                    ConstraintGradient::Exact => gv[i] * buv[i],
                };
                *c += half * gv[i] - coupling - bguv[i];
            }
            constraints.push(constraint_from_convolution(u, &bu));
        }
        if self.length_weight != T::zero() {
            let two = T::lit(2.0);
            let signed = u.to_field::<T>().map(|v| T::one() - two * v);
            let smooth = self.gaussian.apply(&signed, self.length_pad)?;
            for (c, s) in cost.values_mut().iter_mut().zip(smooth.values()) {
                *c += self.length_weight * *s;
            }
        }
        Ok(CostTerms { cost, constraints })
    }
}

/// `F(u, g)` for the given configuration.
pub fn linearized_cost<T: Real>(
    u: &BinaryField,
    multipliers: &[ScalarField<T>],
    force: &ScalarField<T>,
    config: &SolverConfig,
) -> Result<ScalarField<T>> {
    Ok(CostEvaluator::new(u.width(), u.height(), config)?
        .evaluate(u, multipliers, force)?
        .cost)
}

fn threshold_pixel<T: Real>(cost: T, current: u8, theta: T) -> u8 {
    let shifted = cost + theta * (T::lit(0.5) - T::count(current as usize));
    if shifted <= T::zero() {
        1
    } else {
        0
    }
}

/// Thresholds `F + theta (0.5 - u)` on the band, keeps `u` elsewhere, then
/// pins the labeled pixels.
pub fn update_u_masked<T: Real>(
    u: &BinaryField,
    band: &[bool],
    cost: &ScalarField<T>,
    theta: f64,
    labels: &LabelConstraints,
) -> BinaryField {
    let theta = T::lit(theta);
    let mut out = u.clone();
    let w = u.width();
    for (i, &in_band) in band.iter().enumerate() {
        if !in_band {
            continue;
        }
        let (x, y) = (i % w, i / w);
        let v = if labels.object[i] {
            0
        } else if labels.background[i] {
            1
        } else {
            threshold_pixel(cost.values()[i], u.values()[i], theta)
        };
        out.set(x, y, v);
    }
    out
}

pub fn update_u<T: Real>(
    u: &BinaryField,
    band: &PixelSet,
    cost: &ScalarField<T>,
    theta: f64,
    labels: &LabelConstraints,
) -> BinaryField {
    update_u_masked(u, &band.to_mask(), cost, theta, labels)
}

/// `g_i <- max(0, g_i - tau C_i)`.
pub fn update_multipliers<T: Real>(multipliers: &[ScalarField<T>], constraints: &[ScalarField<T>], tau: f64) -> Vec<ScalarField<T>> {
    let tau = T::lit(tau);
    multipliers
        .iter()
        .zip(constraints)
        .map(|(g, c)| g.zip_map(c, |gv, cv| (gv - tau * cv).max(T::zero())))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Tolerance,
    MaxIterations,
}

/// Iterate data that changes from step to step.
#[derive(Debug, Clone)]
pub struct SolverState<T> {
    pub u: BinaryField,
    pub multipliers: Vec<ScalarField<T>>,
    pub force: ForceField<T>,
    pub iteration: usize,
    /// `(t, Rv)` at each variation checkpoint.
    pub rv_history: Vec<(usize, f64)>,
}

/// What happened during one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    /// Iteration count after the step.
    pub t: usize,
    /// Relative variation, on checkpoint iterations only.
    pub rv: Option<f64>,
    /// `min_x C_i(u^t)` per radius as seen by the multiplier update.
    pub min_violation: Vec<f64>,
    pub band_size: usize,
    /// Pixels that changed label.
    pub changed: usize,
    pub force_refreshed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub radii: Vec<f64>,
    pub iterations: usize,
    pub stop_reason: StopReason,
    pub final_rv: Option<f64>,
    /// `min_x C_r(u)` of the output, sharp boundary view, per radius.
    pub min_violation: Vec<f64>,
    pub convexity_score: f64,
    pub wall_clock_seconds: f64,
    pub rv_history: Vec<(usize, f64)>,
}

/// The full iteration with its cached kernels.
#[derive(Debug)]
pub struct Solver<T: Real> {
    image: Image<T>,
    config: SolverConfig,
    labels: LabelConstraints,
    evaluator: CostEvaluator<T>,
    state: SolverState<T>,
    checkpoint: BinaryField,
    stop: Option<StopReason>,
    started: Instant,
}

/// Sets up `u^0 = CH(R_ob)`, zero multipliers, and the initial force.
pub fn initialize<T: Real>(image: &Image<T>, r_ob: &PixelSet, r_bg: &PixelSet, config: &SolverConfig) -> Result<Solver<T>> {
    Solver::new(image, r_ob, r_bg, config)
}

impl<T: Real> Solver<T> {
    pub fn new(image: &Image<T>, r_ob: &PixelSet, r_bg: &PixelSet, config: &SolverConfig) -> Result<Self> {
        config.validate()?;
        for set in [r_ob, r_bg] {
            if (set.width(), set.height()) != image.dims() {
                return Err(Error::DimensionMismatch {
                    expected: image.dims(),
                    found: (set.width(), set.height()),
                });
            }
        }
        let labels = LabelConstraints::new(r_ob, r_bg)?;
        let (fg, bg) = init_models(
            image,
            &labels.hull,
            config.background_margin,
            config.fg_components,
            config.bg_components,
            &config.em_options(),
        )?;
        let force = build_force(image, &fg, &bg, config.force_params());
        let (w, h) = image.dims();
        let evaluator = CostEvaluator::new(w, h, config)?;
        let u = labels.hull.clone();
        let state = SolverState {
            multipliers: vec![ScalarField::zeros(w, h); config.radii.len()],
            u: u.clone(),
            force,
            iteration: 0,
            rv_history: Vec::new(),
        };
        let stop = (config.max_iterations == 0).then_some(StopReason::MaxIterations);
        Ok(Self {
            image: image.clone(),
            config: config.clone(),
            labels,
            evaluator,
            state,
            checkpoint: u,
            stop,
            started: Instant::now(),
        })
    }

    pub fn state(&self) -> &SolverState<T> {
        &self.state
    }

    pub fn labels(&self) -> &LabelConstraints {
        &self.labels
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn stop_reason(&self) -> Option<StopReason> {
        self.stop
    }

    pub fn is_done(&self) -> bool {
        self.stop.is_some()
    }

    /// Current band, as used by the next step.
    pub fn band(&self) -> Vec<bool> {
        narrow_band_mask(&self.state.u, self.config.band_radius, self.config.band_threshold)
    }

    /// Advances one iteration. Calling it after the stop condition is an error.
    pub fn step(&mut self) -> Result<StepRecord> {
        if self.stop.is_some() {
            return Err(Error::InvalidParameter("solver already stopped".into()));
        }
        let cfg = &self.config;
        let band = self.band();
        let terms = self
            .evaluator
            .evaluate(&self.state.u, &self.state.multipliers, &self.state.force.f)?;
        let next_u = update_u_masked(&self.state.u, &band, &terms.cost, cfg.theta, &self.labels);
        let next_g = update_multipliers(&self.state.multipliers, &terms.constraints, cfg.tau);

        debug_assert!(self.labels.is_feasible(&next_u), "label constraints violated");
        debug_assert!(next_g.iter().all(|g| g.min() >= T::zero()), "negative multiplier");
        debug_assert!(
            band.iter()
                .zip(next_u.values().iter().zip(self.state.u.values()))
                .all(|(&b, (a, c))| b || a == c),
            "pixel outside the band changed"
        );

        let record_min: Vec<f64> = terms.constraints.iter().map(|c| c.min().as_f64()).collect();
        let changed = next_u.hamming(&self.state.u);
        self.state.u = next_u;
        self.state.multipliers = next_g;
        self.state.iteration += 1;
        let t = self.state.iteration;

        let mut force_refreshed = false;
        if t % cfg.force_refresh_period == 0 {
            force_refreshed = self.refresh_force();
        }
        let cfg = &self.config;
        let mut rv = None;
        if t % cfg.variation_period == 0 {
            let value = match relative_variation(&self.checkpoint, &self.state.u) {
                Ok(v) => v,
                Err(_) if self.checkpoint == self.state.u => 0.0,
                Err(_) => f64::INFINITY,
            };
            self.checkpoint = self.state.u.clone();
            self.state.rv_history.push((t, value));
            rv = Some(value);
            if value < cfg.tolerance {
                self.stop = Some(StopReason::Tolerance);
            }
        }
        if self.stop.is_none() && t >= cfg.max_iterations {
            self.stop = Some(StopReason::MaxIterations);
        }
        Ok(StepRecord {
            t,
            rv,
            min_violation: record_min,
            band_size: band.iter().filter(|&&b| b).count(),
            changed,
            force_refreshed,
        })
    }

    /// Refits both mixtures on the current partition. Skipped (returns false)
    /// when either side has too few pixels for its component count.
    fn refresh_force(&mut self) -> bool {
        let cfg = &self.config;
        let fg_pixels = self.state.u.object_pixels();
        let bg_pixels = self.state.u.background_pixels();
        if fg_pixels.len() < SAMPLES_PER_COMPONENT * cfg.fg_components
            || bg_pixels.len() < SAMPLES_PER_COMPONENT * cfg.bg_components
        {
            log::debug!("t = {}: partition too small for refit", self.state.iteration);
            return false;
        }
        let p = self.image.channels();
        let opts = cfg.em_options();
        let fit = |pixels: &PixelSet, k: usize| -> Result<Gmm<T>> { Ok(fit_gmm(&self.image.gather(pixels), p, k, &opts)?.model) };
        match (fit(&fg_pixels, cfg.fg_components), fit(&bg_pixels, cfg.bg_components)) {
            (Ok(fg), Ok(bg)) => {
                self.state.force = build_force(&self.image, &fg, &bg, cfg.force_params());
                true
            }
            (Err(e), _) | (_, Err(e)) => {
                log::warn!("t = {}: force refit failed: {e}", self.state.iteration);
                false
            }
        }
    }

    /// Steps until a stop condition, calling `observer` after every step.
    pub fn run_with(&mut self, mut observer: impl FnMut(&StepRecord, &SolverState<T>)) -> Result<()> {
        while self.stop.is_none() {
            let rec = self.step()?;
            observer(&rec, &self.state);
        }
        Ok(())
    }

    pub fn report(&self) -> Result<RunReport> {
        let u = &self.state.u;
        Ok(RunReport {
            radii: self.config.radii.clone(),
            iterations: self.state.iteration,
            stop_reason: self.stop.unwrap_or(StopReason::MaxIterations),
            final_rv: self.state.rv_history.last().map(|&(_, v)| v),
            min_violation: violation_per_radius::<T>(u, &self.config.radii)?
                .into_iter()
                .map(Real::as_f64)
                .collect(),
            convexity_score: convexity_score(u)?,
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
            rv_history: self.state.rv_history.clone(),
        })
    }

    pub fn into_result(self) -> Result<(BinaryField, RunReport)> {
        let report = self.report()?;
        Ok((self.state.u, report))
    }
}

/// Runs the full iteration and returns the final indicator with a report.
pub fn run<T: Real>(image: &Image<T>, r_ob: &PixelSet, r_bg: &PixelSet, config: &SolverConfig) -> Result<(BinaryField, RunReport)> {
    let mut solver = Solver::new(image, r_ob, r_bg, config)?;
    solver.run_with(|_, _| {})?;
    solver.into_result()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels_none(w: usize, h: usize) -> LabelConstraints {
        LabelConstraints {
            hull: BinaryField::background(w, h),
            object: vec![false; w * h],
            background: vec![false; w * h],
        }
    }

    #[test]
    fn default_config_matches_reference_parameters() {
        let c = SolverConfig::default();
        assert_eq!(c.radii, vec![4.0, 9.0, 14.0, 19.0]);
        assert_eq!((c.lambda, c.w0, c.w1, c.tau, c.theta), (0.1, 0.5, 0.5, 1.0, 1.0));
        assert_eq!((c.band_threshold, c.band_radius, c.background_margin), (2.0, 3.0, 5.0));
        assert_eq!((c.tolerance, c.max_iterations), (0.001, 5000));
        assert_eq!((c.fg_components, c.bg_components), (2, 3));
        assert_eq!((c.gaussian_size, c.gaussian_sigma), (5, 0.5));
        assert_eq!((c.force_refresh_period, c.variation_period), (50, 300));
        c.validate().unwrap();
    }

    #[test]
    fn band_of_constant_field_is_empty() {
        assert!(narrow_band(&BinaryField::background(12, 12), 3.0, 2.0).is_empty());
        assert!(narrow_band(&BinaryField::filled(12, 12, 0), 3.0, 2.0).is_empty());
    }

    #[test]
    fn band_with_zero_threshold_is_everything() {
        let u = BinaryField::from_object_fn(10, 10, |x, _| x < 4);
        assert_eq!(narrow_band(&u, 3.0, 0.0).len(), 100);
    }

    #[test]
    fn band_around_vertical_edge() {
        let (w, h) = (40, 40);
        let u = BinaryField::from_object_fn(w, h, |x, _| x < 20);
        let band = narrow_band(&u, 3.0, 2.0);
        // count the disc points on the far side of the edge for each column distance
        let offsets = disc_offsets(3.0);
        let mut cols = Vec::new();
        for x in 0..w as i64 {
            let across = offsets
                .iter()
                .filter(|&&(dx, _)| ((x + dx) < 20) != (x < 20))
                .count();
            if across >= 2 {
                cols.push(x as usize);
            }
        }
        assert_eq!(cols, vec![18, 19, 20, 21]);
        for y in 0..h {
            for x in 0..w {
                assert_eq!(band.contains(x, y), cols.contains(&x), "({x}, {y})");
            }
        }
    }

    fn single_radius(lambda: f64) -> SolverConfig {
        SolverConfig {
            radii: vec![4.0],
            lambda,
            ..SolverConfig::default()
        }
    }

    #[test]
    fn cost_reduces_to_force() {
        let u = BinaryField::from_object_fn(24, 24, |x, y| x + y < 20);
        let f = ScalarField::from_fn(24, 24, |x, y| (x as f64 - y as f64) * 0.1);
        let cfg = SolverConfig {
            radii: vec![],
            lambda: 0.0,
            ..SolverConfig::default()
        };
        let cost = linearized_cost(&u, &[], &f, &cfg).unwrap();
        assert_eq!(cost, f);
    }

    #[test]
    fn cost_on_empty_object() {
        let u = BinaryField::background(48, 48);
        let f = ScalarField::<f64>::zeros(48, 48);
        let cfg = SolverConfig::default();
        let g = vec![ScalarField::zeros(48, 48); 4];
        let cost = linearized_cost(&u, &g, &f, &cfg).unwrap();
        let expected = -4.0 - cfg.lambda;
        assert!(cost.values().iter().all(|&v| (v - expected).abs() < 1e-10));

        let cost = linearized_cost(&u, &[ScalarField::filled(48, 48, 1.0)], &f, &single_radius(0.0)).unwrap();
        // 0.5 * 1 - b * (1 + 1) away from the border
        assert!((cost.get(24, 24) + 1.5).abs() < 1e-10);
    }

    #[test]
    fn exact_gradient_differs_only_through_multiplier() {
        let u = BinaryField::from_object_fn(32, 32, |x, y| (x as f64 - 16.0).powi(2) + (y as f64 - 16.0).powi(2) < 40.0);
        let f = ScalarField::<f64>::zeros(32, 32);
        let g = vec![ScalarField::filled(32, 32, 0.0)];
        let mut cfg = single_radius(0.0);
        let verbatim = linearized_cost(&u, &g, &f, &cfg).unwrap();
        cfg.constraint_gradient = ConstraintGradient::Exact;
        let exact = linearized_cost(&u, &g, &f, &cfg).unwrap();
        // with g = 0 the exact variant has no constraint term at all
        assert!(exact.values().iter().all(|&v| v.abs() < 1e-12));
        assert!(verbatim.max() < 1e-12 && verbatim.min() < -0.5);
    }

    #[test]
    fn update_u_examples() {
        let (w, h) = (6, 6);
        let u = BinaryField::from_object_fn(w, h, |x, _| x < 3);
        let r_ob = PixelSet::new(w, h, vec![(0, 0)]).unwrap();
        let r_bg = PixelSet::new(w, h, vec![(5, 5), (0, 0)]).unwrap();
        let labels = LabelConstraints::new(&r_ob, &r_bg).unwrap();
        // bg label inside the hull is dropped
        assert!(!labels.background_mask()[0]);
        assert!(labels.background_mask()[5 * w + 5]);

        let mut cost = ScalarField::zeros(w, h);
        cost.set(0, 0, -10.0);
        cost.set(4, 1, 10.0);
        cost.set(1, 2, -0.6);
        let band = PixelSet::new(w, h, vec![(0, 0), (1, 2)]).unwrap();
        let next = update_u(&u, &band, &cost, 1.0, &labels);
        assert_eq!(next.get(0, 0), 0, "hull pin wins over the threshold");
        assert_eq!(next.get(4, 1), 1, "outside the band nothing changes");
        assert_eq!(next.get(1, 2), 1, "-0.6 + 0.5 <= 0 switches to background");
    }

    #[test]
    fn threshold_tie_goes_to_background() {
        assert_eq!(threshold_pixel(0.5f64, 1, 1.0), 1);
        assert_eq!(threshold_pixel(-0.5f64, 0, 1.0), 1);
        assert_eq!(threshold_pixel(-0.49f64, 0, 1.0), 0);
    }

    #[test]
    fn multiplier_examples() {
        let g = vec![ScalarField::from_vec(3, 1, vec![0.0, 1.0, 0.1]).unwrap()];
        let c = vec![ScalarField::from_vec(3, 1, vec![0.3, -0.2, 0.5]).unwrap()];
        let next = update_multipliers(&g, &c, 1.0);
        assert_eq!(next[0].values(), &[0.0, 1.2, 0.0]);
    }

    #[test]
    fn update_u_without_labels_is_pointwise() {
        let u = BinaryField::from_object_fn(4, 4, |x, y| (x + y) % 2 == 0);
        let cost = ScalarField::from_fn(4, 4, |x, y| x as f64 - 1.5 + 0.1 * y as f64);
        let next = update_u_masked(&u, &vec![true; 16], &cost, 0.5, &labels_none(4, 4));
        for y in 0..4 {
            for x in 0..4 {
                let shifted = cost.get(x, y) + 0.5 * (0.5 - u.get(x, y) as f64);
                assert_eq!(next.get(x, y), (shifted <= 0.0) as u8);
            }
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut c = SolverConfig::default();
        c.radii = vec![9.0, 4.0];
        assert!(c.validate().is_err());
        let c = SolverConfig {
            tau: 0.0,
            ..SolverConfig::default()
        };
        assert!(c.validate().is_err());
        let c = SolverConfig {
            radii: vec![0.5],
            ..SolverConfig::default()
        };
        assert_eq!(c.validate(), Err(Error::RadiusBelowMesh(0.5)));
    }
}
