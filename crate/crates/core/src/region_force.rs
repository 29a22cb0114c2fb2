//! Gaussian mixture color models and the pixelwise region force.
//!
//! The foreground and background color distributions are each fitted by EM.
//! Posterior membership probabilities turn into the force
//! `f = w1 * f1 - w0 * f0` with `f_i = -ln p_i`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{distance_beyond, BinaryField, Image, ScalarField};
use crate::scalar::Real;

/// Minimum number of samples per mixture component.
pub const SAMPLES_PER_COMPONENT: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianComponent<T> {
    pub weight: T,
    pub mean: Vec<T>,
    /// Row-major `p x p` covariance.
    pub covariance: Vec<T>,
    chol: Vec<T>,
    log_norm: T,
}

impl<T: Real> GaussianComponent<T> {
    fn new(weight: T, mean: Vec<T>, covariance: Vec<T>) -> Result<Self> {
        let p = mean.len();
        let chol = cholesky(&covariance, p)
            .ok_or_else(|| Error::InvalidParameter("covariance is not positive definite".into()))?;
        let log_det: T = (0..p).map(|i| chol[i * p + i].ln()).sum::<T>() * T::lit(2.0);
        let log_norm = -T::lit(0.5) * (T::count(p) * (T::TAU()).ln() + log_det);
        Ok(Self {
            weight,
            mean,
            covariance,
            chol,
            log_norm,
        })
    }

    /// `ln N(x; mean, covariance)`.
    pub fn log_pdf(&self, x: &[T]) -> T {
        let p = self.mean.len();
        // solve L z = x - mean, then the Mahalanobis term is |z|^2
        let mut z = [T::zero(); 8];
        let mut z_vec;
        let z: &mut [T] = if p <= 8 {
            &mut z[..p]
        } else {
            z_vec = vec![T::zero(); p];
            &mut z_vec
        };
        let mut maha = T::zero();
        for i in 0..p {
            let mut acc = x[i] - self.mean[i];
            for j in 0..i {
                acc -= self.chol[i * p + j] * z[j];
            }
            z[i] = acc / self.chol[i * p + i];
            maha += z[i] * z[i];
        }
        self.log_norm - T::lit(0.5) * maha
    }
}

/// Finite mixture of multivariate Gaussians with full covariances.
#[derive(Debug, Clone, PartialEq)]
pub struct Gmm<T> {
    dim: usize,
    components: Vec<GaussianComponent<T>>,
}

impl<T: Real> Gmm<T> {
    /// Builds a mixture from weights, means, and row-major covariances.
    pub fn new(weights: &[T], means: &[Vec<T>], covariances: &[Vec<T>]) -> Result<Self> {
        if weights.is_empty() || weights.len() != means.len() || weights.len() != covariances.len() {
            return Err(Error::InvalidParameter("mixture parameter lists differ in length".into()));
        }
        let dim = means[0].len();
        if dim == 0 || means.iter().any(|m| m.len() != dim) || covariances.iter().any(|c| c.len() != dim * dim) {
            return Err(Error::InvalidParameter("inconsistent mixture dimensions".into()));
        }
        let total: T = weights.iter().copied().sum();
        if weights.iter().any(|&w| w < T::zero()) || (total - T::one()).abs() > T::lit(1e-6) {
            return Err(Error::InvalidParameter("mixture weights must lie on the simplex".into()));
        }
        let components = weights
            .iter()
            .zip(means)
            .zip(covariances)
            .map(|((&w, m), c)| GaussianComponent::new(w, m.clone(), c.clone()))
            .collect::<Result<_>>()?;
        Ok(Self { dim, components })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[GaussianComponent<T>] {
        &self.components
    }

    pub fn weights(&self) -> Vec<T> {
        self.components.iter().map(|c| c.weight).collect()
    }

    /// Log of the mixture density; `-inf` only if every weight is zero.
    pub fn log_density(&self, x: &[T]) -> T {
        log_sum_exp(self.components.iter().map(|c| c.weight.ln() + c.log_pdf(x)))
    }

    pub fn density(&self, x: &[T]) -> T {
        self.log_density(x).exp()
    }
}

fn log_sum_exp<T: Real>(terms: impl Iterator<Item = T> + Clone) -> T {
    let m = terms.clone().fold(T::neg_infinity(), T::max);
    if m == T::neg_infinity() {
        return m;
    }
    m + terms.map(|t| (t - m).exp()).sum::<T>().ln()
}

/// Mixture density, made standalone for symmetry with [`posterior_p0`].
pub fn gmm_density<T: Real>(model: &Gmm<T>, color: &[T]) -> T {
    model.density(color)
}

fn cholesky<T: Real>(a: &[T], p: usize) -> Option<Vec<T>> {
    let mut l = vec![T::zero(); p * p];
    for i in 0..p {
        for j in 0..=i {
            let mut s = a[i * p + j];
            for k in 0..j {
                s -= l[i * p + k] * l[j * p + k];
            }
            if i == j {
                if !(s > T::zero()) {
                    return None;
                }
                l[i * p + i] = s.sqrt();
            } else {
                l[i * p + j] = s / l[j * p + j];
            }
        }
    }
    Some(l)
}

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix. Returns
/// eigenvalues and column eigenvectors (row-major `p x p`).
fn symmetric_eigen<T: Real>(a: &[T], p: usize) -> (Vec<T>, Vec<T>) {
    let mut m = a.to_vec();
    let mut v = vec![T::zero(); p * p];
    for i in 0..p {
        v[i * p + i] = T::one();
    }
    for _sweep in 0..64 {
        let off: T = (0..p)
            .flat_map(|i| (0..p).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * p + j] * m[i * p + j])
            .sum();
        if off <= T::epsilon() * T::epsilon() {
            break;
        }
        for i in 0..p {
            for j in i + 1..p {
                let aij = m[i * p + j];
                if aij == T::zero() {
                    continue;
                }
                let theta = (m[j * p + j] - m[i * p + i]) / (T::lit(2.0) * aij);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..p {
                    let (mki, mkj) = (m[k * p + i], m[k * p + j]);
                    m[k * p + i] = c * mki - s * mkj;
                    m[k * p + j] = s * mki + c * mkj;
                }
                for k in 0..p {
                    let (mik, mjk) = (m[i * p + k], m[j * p + k]);
                    m[i * p + k] = c * mik - s * mjk;
                    m[j * p + k] = s * mik + c * mjk;
                }
                for k in 0..p {
                    let (vki, vkj) = (v[k * p + i], v[k * p + j]);
                    v[k * p + i] = c * vki - s * vkj;
                    v[k * p + j] = s * vki + c * vkj;
                }
            }
        }
    }
    ((0..p).map(|i| m[i * p + i]).collect(), v)
}

/// Projects a symmetric matrix onto `{S : S >= floor * I}` by clamping eigenvalues.
fn clamp_eigenvalues<T: Real>(a: &[T], p: usize, floor: T) -> Vec<T> {
    if p == 1 {
        return vec![a[0].max(floor)];
    }
    let (vals, vecs) = symmetric_eigen(a, p);
    if vals.iter().all(|&l| l >= floor) {
        return a.to_vec();
    }
    let mut out = vec![T::zero(); p * p];
    for i in 0..p {
        for j in 0..p {
            out[i * p + j] = (0..p).map(|k| vecs[i * p + k] * vals[k].max(floor) * vecs[j * p + k]).sum();
        }
    }
    // symmetrize away rounding
    for i in 0..p {
        for j in i + 1..p {
            let avg = (out[i * p + j] + out[j * p + i]) * T::lit(0.5);
            out[i * p + j] = avg;
            out[j * p + i] = avg;
        }
    }
    out
}

/// EM settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmOptions {
    pub max_iterations: usize,
    /// Stop once the mean per-sample log-likelihood improves by less than this.
    pub tolerance: f64,
    /// Covariance eigenvalue floor relative to the average channel variance.
    pub covariance_floor: f64,
    pub seed: u64,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            tolerance: 1e-6,
            covariance_floor: 1e-4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GmmFit<T> {
    pub model: Gmm<T>,
    /// Total log-likelihood of the samples under each successive parameter set.
    pub log_likelihood: Vec<f64>,
}

/// Fits a `k`-component mixture to `samples` (flat buffer, `dim` values per sample).
///
/// Initialized from k-means++ seeding with hard nearest-center assignment.
pub fn fit_gmm<T: Real>(samples: &[T], dim: usize, k: usize, opts: &EmOptions) -> Result<GmmFit<T>> {
    if dim == 0 || samples.len() % dim != 0 {
        return Err(Error::InvalidParameter("sample buffer is not a whole number of colors".into()));
    }
    let n = samples.len() / dim;
    if k == 0 || n < SAMPLES_PER_COMPONENT * k {
        return Err(Error::InsufficientSamples {
            samples: n,
            components: k,
        });
    }
    let row = |i: usize| &samples[i * dim..(i + 1) * dim];

    let mean_all: Vec<T> = (0..dim).map(|c| (0..n).map(|i| row(i)[c]).sum::<T>() / T::count(n)).collect();
    let channel_var: T = (0..dim)
        .map(|c| (0..n).map(|i| (row(i)[c] - mean_all[c]).powi(2)).sum::<T>() / T::count(n))
        .sum::<T>()
        / T::count(dim);
    let floor = T::lit(opts.covariance_floor) * (channel_var + T::lit(1e-8));

    let labels = kmeans_pp_labels(samples, dim, k, opts.seed);

    let mut weights = vec![T::zero(); k];
    let mut means = vec![vec![T::zero(); dim]; k];
    let mut covs = vec![vec![T::zero(); dim * dim]; k];
    {
        let resp: Vec<T> = labels
            .iter()
            .flat_map(|&l| (0..k).map(move |j| if l == j { T::one() } else { T::zero() }))
            .collect();
        m_step(samples, dim, k, &resp, floor, &mut weights, &mut means, &mut covs);
    }

    let mut trace = Vec::new();
    let mut resp = vec![T::zero(); n * k];
    let mut model = build_model(dim, &weights, &means, &covs)?;
    let mut converged = false;
    for _ in 0..opts.max_iterations {
        let ll = e_step(&model, samples, dim, &mut resp);
        converged = trace
            .last()
            .is_some_and(|&prev: &f64| (ll - prev) / (n as f64) < opts.tolerance);
        trace.push(ll);
        if converged {
            break;
        }
        m_step(samples, dim, k, &resp, floor, &mut weights, &mut means, &mut covs);
        model = build_model(dim, &weights, &means, &covs)?;
    }
    if !converged {
        // the last M-step produced a model whose likelihood has not been recorded
        trace.push(e_step(&model, samples, dim, &mut resp));
    }
    Ok(GmmFit {
        model,
        log_likelihood: trace,
    })
}

fn build_model<T: Real>(dim: usize, weights: &[T], means: &[Vec<T>], covs: &[Vec<T>]) -> Result<Gmm<T>> {
    let components = weights
        .iter()
        .zip(means)
        .zip(covs)
        .map(|((&w, m), c)| GaussianComponent::new(w, m.clone(), c.clone()))
        .collect::<Result<_>>()?;
    Ok(Gmm { dim, components })
}

fn e_step<T: Real>(model: &Gmm<T>, samples: &[T], dim: usize, resp: &mut [T]) -> f64 {
    let k = model.components.len();
    let mut total = 0.0;
    let mut logs = vec![T::zero(); k];
    for (i, x) in samples.chunks_exact(dim).enumerate() {
        for (j, c) in model.components.iter().enumerate() {
            logs[j] = c.weight.ln() + c.log_pdf(x);
        }
        let lse = log_sum_exp(logs.iter().copied());
        for j in 0..k {
            resp[i * k + j] = (logs[j] - lse).exp();
        }
        total += lse.as_f64();
    }
    total
}

#[allow(clippy::too_many_arguments)]
fn m_step<T: Real>(
    samples: &[T],
    dim: usize,
    k: usize,
    resp: &[T],
    floor: T,
    weights: &mut [T],
    means: &mut [Vec<T>],
    covs: &mut [Vec<T>],
) {
    let n = samples.len() / dim;
    for j in 0..k {
        let nk: T = (0..n).map(|i| resp[i * k + j]).sum();
        weights[j] = nk / T::count(n);
        if nk <= T::lit(1e-12) * T::count(n) {
            // empty component: weight ~0, parameters kept
            if covs[j].iter().all(|&v| v == T::zero()) {
                for c in 0..dim {
                    covs[j][c * dim + c] = floor;
                }
            }
            continue;
        }
        let mut mu = vec![T::zero(); dim];
        for (i, x) in samples.chunks_exact(dim).enumerate() {
            let r = resp[i * k + j];
            for c in 0..dim {
                mu[c] += r * x[c];
            }
        }
        mu.iter_mut().for_each(|m| *m /= nk);
        let mut cov = vec![T::zero(); dim * dim];
        for (i, x) in samples.chunks_exact(dim).enumerate() {
            let r = resp[i * k + j];
            for a in 0..dim {
                let da = x[a] - mu[a];
                for b in 0..=a {
                    cov[a * dim + b] += r * da * (x[b] - mu[b]);
                }
            }
        }
        for a in 0..dim {
            for b in 0..=a {
                let v = cov[a * dim + b] / nk;
                cov[a * dim + b] = v;
                cov[b * dim + a] = v;
            }
        }
        means[j] = mu;
        covs[j] = clamp_eigenvalues(&cov, dim, floor);
    }
    // renormalize against rounding drift
    let total: T = weights.iter().copied().sum();
    weights.iter_mut().for_each(|w| *w /= total);
}

fn kmeans_pp_labels<T: Real>(samples: &[T], dim: usize, k: usize, seed: u64) -> Vec<usize> {
    let n = samples.len() / dim;
    let row = |i: usize| &samples[i * dim..(i + 1) * dim];
    let dist2 = |a: &[T], b: &[T]| a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum::<T>().as_f64();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = vec![rng.random_range(0..n)];
    let mut nearest: Vec<f64> = (0..n).map(|i| dist2(row(i), row(centers[0]))).collect();
    while centers.len() < k {
        let total: f64 = nearest.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in nearest.iter().enumerate() {
                if target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centers.push(next);
        for i in 0..n {
            nearest[i] = nearest[i].min(dist2(row(i), row(next)));
        }
    }
    (0..n)
        .map(|i| {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (j, &c) in centers.iter().enumerate() {
                let d = dist2(row(i), row(c));
                if d < best_d {
                    best = j;
                    best_d = d;
                }
            }
            best
        })
        .collect()
}

/// `gamma0 G0 / (gamma0 G0 + gamma1 G1)`; an undefined ratio reads `0.5`.
pub fn posterior_p0<T: Real>(g0: T, g1: T, gamma0: T, gamma1: T) -> T {
    let num = gamma0 * g0;
    let den = num + gamma1 * g1;
    if !(den > T::zero()) || !den.is_finite() {
        log::debug!("posterior denominator {den} is degenerate; returning 0.5");
        return T::lit(0.5);
    }
    num / den
}

/// [`posterior_p0`] from log densities, stable when both densities underflow.
pub fn posterior_p0_log<T: Real>(log_g0: T, log_g1: T, gamma0: T, gamma1: T) -> T {
    let a = gamma0.ln() + log_g0;
    let b = gamma1.ln() + log_g1;
    if a == T::neg_infinity() && b == T::neg_infinity() || a.is_nan() || b.is_nan() {
        log::debug!("posterior with two vanishing densities; returning 0.5");
        return T::lit(0.5);
    }
    if a == T::neg_infinity() {
        return T::zero();
    }
    if b == T::neg_infinity() {
        return T::one();
    }
    T::one() / (T::one() + (b - a).exp())
}

/// Weights of the region force.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceParams {
    pub w0: f64,
    pub w1: f64,
    pub gamma0: f64,
    pub gamma1: f64,
    pub p_floor: f64,
}

impl Default for ForceParams {
    fn default() -> Self {
        Self {
            w0: 0.5,
            w1: 0.5,
            gamma0: 1.0,
            gamma1: 1.0,
            p_floor: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForceField<T> {
    /// `w1 * f1 - w0 * f0`.
    pub f: ScalarField<T>,
    pub f0: ScalarField<T>,
    pub f1: ScalarField<T>,
    pub params: ForceParams,
}

/// Foreground and background posteriors; `p1 = 1 - p0` pixelwise.
pub fn posterior_fields<T: Real>(
    image: &Image<T>,
    fg: &Gmm<T>,
    bg: &Gmm<T>,
    gamma0: f64,
    gamma1: f64,
) -> (ScalarField<T>, ScalarField<T>) {
    let (g0, g1) = (T::lit(gamma0), T::lit(gamma1));
    let p0 = ScalarField::from_fn(image.width(), image.height(), |x, y| {
        let c = image.pixel(x, y);
        posterior_p0_log(fg.log_density(c), bg.log_density(c), g0, g1)
    });
    let p1 = p0.map(|p| T::one() - p);
    (p0, p1)
}

/// Pointwise force from two posteriors, with the floor applied before the log.
pub fn force_from_posteriors<T: Real>(p0: &ScalarField<T>, p1: &ScalarField<T>, params: ForceParams) -> ForceField<T> {
    let floor = T::lit(params.p_floor);
    let f0 = p0.map(|p| -(p.max(floor)).ln());
    let f1 = p1.map(|p| -(p.max(floor)).ln());
    let (w0, w1) = (T::lit(params.w0), T::lit(params.w1));
    let f = f1.zip_map(&f0, |a, b| w1 * a - w0 * b);
    ForceField { f, f0, f1, params }
}

pub fn build_force<T: Real>(image: &Image<T>, fg: &Gmm<T>, bg: &Gmm<T>, params: ForceParams) -> ForceField<T> {
    let (p0, p1) = posterior_fields(image, fg, bg, params.gamma0, params.gamma1);
    force_from_posteriors(&p0, &p1, params)
}

/// Fits the foreground model on the hull pixels and the background model on
/// pixels more than `s` away from the hull.
pub fn init_models<T: Real>(
    image: &Image<T>,
    hull: &BinaryField,
    s: f64,
    k0: usize,
    k1: usize,
    opts: &EmOptions,
) -> Result<(Gmm<T>, Gmm<T>)> {
    if hull.dims() != image.dims() {
        return Err(Error::DimensionMismatch {
            expected: image.dims(),
            found: hull.dims(),
        });
    }
    let fg_pixels = hull.object_pixels();
    if fg_pixels.is_empty() {
        return Err(Error::EmptyObject);
    }
    let bg_pixels = distance_beyond(hull, s)?;
    if bg_pixels.is_empty() {
        return Err(Error::EmptyBackground(s));
    }
    let p = image.channels();
    let fg = fit_gmm(&image.gather(&fg_pixels), p, k0, opts)?.model;
    let bg = fit_gmm(&image.gather(&bg_pixels), p, k1, opts)?.model;
    Ok((fg, bg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand_distr::{Distribution, Normal};

    fn gaussian_samples(rng: &mut ChaCha8Rng, n: usize, mean: f64, std: f64) -> Vec<f64> {
        let d = Normal::new(mean, std).unwrap();
        (0..n).map(|_| d.sample(rng)).collect()
    }

    #[test]
    fn single_gaussian_recovers_sample_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let xs = gaussian_samples(&mut rng, 2000, 120.0, 15.0);
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let fit = fit_gmm(&xs, 1, 1, &EmOptions::default()).unwrap();
        let c = &fit.model.components()[0];
        let se = (var / n).sqrt();
        assert!((c.mean[0] - mean).abs() < 3.0 * se);
        assert!((c.covariance[0] - var).abs() < 0.2 * var);
        assert!((c.weight - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_clusters_are_separated() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut xs = gaussian_samples(&mut rng, 300, 50.0, 5.0);
        xs.extend(gaussian_samples(&mut rng, 700, 200.0, 5.0));
        let fit = fit_gmm(&xs, 1, 2, &EmOptions::default()).unwrap();
        let mut comps: Vec<_> = fit.model.components().iter().map(|c| (c.mean[0], c.weight)).collect();
        comps.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        assert!((comps[0].0 - 50.0).abs() < 5.0 && (comps[1].0 - 200.0).abs() < 5.0);
        assert!((comps[0].1 - 0.3).abs() < 0.1 && (comps[1].1 - 0.7).abs() < 0.1);
    }

    #[test]
    fn em_log_likelihood_is_monotone() {
        for seed in 0..5u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut xs = gaussian_samples(&mut rng, 200, 30.0, 10.0);
            xs.extend(gaussian_samples(&mut rng, 150, 90.0, 25.0));
            xs.extend(gaussian_samples(&mut rng, 100, 160.0, 8.0));
            let fit = fit_gmm(&xs, 1, 3, &EmOptions { seed, ..Default::default() }).unwrap();
            for w in fit.log_likelihood.windows(2) {
                assert!(w[1] >= w[0] - 1e-8, "seed {seed}: {} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn color_fit_with_full_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let base = Normal::new(0.0, 1.0).unwrap();
        let mut xs = Vec::new();
        for _ in 0..600 {
            let (a, b) = (base.sample(&mut rng), base.sample(&mut rng));
            // correlated red/green, independent blue
            xs.extend([100.0 + 10.0 * a, 80.0 + 6.0 * a + 3.0 * b, 40.0 + 4.0 * base.sample(&mut rng)]);
        }
        let fit = fit_gmm(&xs, 3, 2, &EmOptions::default()).unwrap();
        assert_eq!(fit.model.dim(), 3);
        for w in fit.log_likelihood.windows(2) {
            assert!(w[1] >= w[0] - 1e-8);
        }
        let total: f64 = fit.model.weights().iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn too_few_samples() {
        let xs = vec![1.0; 15];
        assert_eq!(
            fit_gmm(&xs, 1, 2, &EmOptions::default()).unwrap_err(),
            Error::InsufficientSamples { samples: 15, components: 2 }
        );
    }

    #[test]
    fn constant_samples_hit_the_floor() {
        let xs = vec![7.0f64; 50];
        let fit = fit_gmm(&xs, 1, 2, &EmOptions::default()).unwrap();
        assert!(fit.model.density(&[7.0]).is_finite());
        assert!(fit.model.components().iter().all(|c| c.covariance[0] > 0.0));
    }

    #[test]
    fn standard_normal_peak() {
        for p in [1usize, 3] {
            let mut cov = vec![0.0; p * p];
            for i in 0..p {
                cov[i * p + i] = 1.0;
            }
            let g = Gmm::new(&[1.0], &[vec![0.0; p]], &[cov]).unwrap();
            let expected = (2.0 * std::f64::consts::PI).powf(-(p as f64) / 2.0);
            assert!((gmm_density(&g, &vec![0.0; p]) - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn density_integrates_to_one() {
        let g = Gmm::<f64>::new(&[0.3, 0.7], &[vec![-2.0], vec![3.0]], &[vec![0.5], vec![2.0]]).unwrap();
        // trapezoid rule on [-20, 20]
        let h = 1e-3;
        let steps = (40.0 / h) as usize;
        let mut acc = 0.0;
        for i in 0..=steps {
            let x = -20.0 + i as f64 * h;
            let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
            acc += w * g.density(&[x]);
        }
        assert!((acc * h - 1.0).abs() < 1e-8);
    }

    #[test]
    fn mixture_is_linear_in_components() {
        let g = Gmm::<f64>::new(&[0.3, 0.7], &[vec![-2.0], vec![3.0]], &[vec![0.5], vec![2.0]]).unwrap();
        let g1 = Gmm::new(&[1.0], &[vec![-2.0]], &[vec![0.5]]).unwrap();
        let g2 = Gmm::new(&[1.0], &[vec![3.0]], &[vec![2.0]]).unwrap();
        for x in [-3.0, 0.0, 1.7, 5.0] {
            let lhs = g.density(&[x]);
            let rhs = 0.3 * g1.density(&[x]) + 0.7 * g2.density(&[x]);
            assert!((lhs - rhs).abs() < 1e-14 * rhs.max(1.0));
        }
    }

    #[test]
    fn posterior_examples() {
        assert_eq!(posterior_p0(0.4, 0.4, 1.0, 1.0), 0.5);
        assert_eq!(posterior_p0(0.4, 0.1, 0.0, 1.0), 0.0);
        assert!((posterior_p0(2.0f64, 1.0, 1.0, 1.0) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(posterior_p0(0.0, 0.0, 1.0, 1.0), 0.5);
        assert!((posterior_p0_log(2f64.ln(), 0.0, 1.0, 1.0) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(posterior_p0_log(0.0, 0.0, 0.0, 1.0), 0.0);
        assert_eq!(posterior_p0_log(f64::NEG_INFINITY, f64::NEG_INFINITY, 1.0, 1.0), 0.5);
    }

    #[test]
    fn force_examples() {
        let params = ForceParams::default();
        let half = ScalarField::filled(2, 2, 0.5);
        let ff = force_from_posteriors(&half, &half, params);
        assert!(ff.f.values().iter().all(|&v| v == 0.0));

        let p0 = ScalarField::filled(2, 2, 0.9);
        let p1 = p0.map(|p| 1.0 - p);
        let ff = force_from_posteriors(&p0, &p1, params);
        let expected = 0.5 * -(0.1f64.ln()) - 0.5 * -(0.9f64.ln());
        assert!((ff.f.get(0, 0) - expected).abs() < 1e-12);
        assert!((expected - 1.0986).abs() < 1e-4);

        let p0 = ScalarField::filled(2, 2, 1e-9);
        let p1 = p0.map(|p| 1.0 - p);
        let ff = force_from_posteriors(&p0, &p1, params);
        assert!((ff.f0.get(0, 0) + 1e-6f64.ln()).abs() < 1e-12);
        assert!(ff.f.is_finite());
    }

    fn two_tone() -> (Image<f64>, BinaryField) {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let noise = Normal::new(0.0, 5.0).unwrap();
        let field = ScalarField::from_fn(48, 48, |x, y| {
            let inside = (x as f64 - 24.0).powi(2) + (y as f64 - 24.0).powi(2) <= 144.0;
            (if inside { 200.0 } else { 50.0 }) + noise.sample(&mut rng)
        });
        let hull = BinaryField::from_object_fn(48, 48, |x, y| (x as f64 - 24.0).powi(2) + (y as f64 - 24.0).powi(2) <= 36.0);
        (Image::from_gray(&field), hull)
    }

    #[test]
    fn init_models_on_two_tone_image() {
        let (img, hull) = two_tone();
        let (fg, bg) = init_models(&img, &hull, 7.0, 2, 3, &EmOptions::default()).unwrap();
        let mean = |g: &Gmm<f64>| g.components().iter().map(|c| c.weight * c.mean[0]).sum::<f64>();
        assert!((mean(&fg) - 200.0).abs() < 3.0);
        assert!((mean(&bg) - 50.0).abs() < 3.0);
    }

    #[test]
    fn init_models_errors_without_background() {
        let (img, _) = two_tone();
        let hull = BinaryField::filled(48, 48, 0);
        assert_eq!(
            init_models(&img, &hull, 5.0, 2, 3, &EmOptions::default()).unwrap_err(),
            Error::EmptyBackground(5.0)
        );
    }

    #[test]
    fn margin_zero_uses_all_non_hull_pixels() {
        let (_, hull) = two_tone();
        assert_eq!(distance_beyond(&hull, 0.0).unwrap(), hull.background_pixels());
    }

    proptest! {
        #[test]
        fn gamma_scaling_leaves_posterior_unchanged(g0 in 1e-6f64..10.0, g1 in 1e-6f64..10.0, a in 0.1f64..5.0, b in 0.1f64..5.0, s in 0.01f64..100.0) {
            let p = posterior_p0(g0, g1, a, b);
            let q = posterior_p0(g0, g1, a * s, b * s);
            prop_assert!((p - q).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&p));
        }

        #[test]
        fn force_is_increasing_in_p0(p in 1e-5f64..0.99, dp in 1e-4f64..0.009) {
            let params = ForceParams::default();
            let f = |p0: f64| {
                let a = ScalarField::filled(1, 1, p0);
                force_from_posteriors(&a, &a.map(|v| 1.0 - v), params).f.get(0, 0)
            };
            prop_assert!(f(p + dp) > f(p));
        }

        #[test]
        fn posteriors_sum_to_one(l0 in -50f64..5.0, l1 in -50f64..5.0) {
            let p0 = posterior_p0_log(l0, l1, 1.0, 1.0);
            prop_assert_eq!(p0 + (1.0 - p0), 1.0);
        }
    }
}
