//! Kernels and 2D convolution.
//!
//! [`convolve_direct`] is the literal nested sum. [`FftConvolver`] does the
//! same computation through the discrete Fourier transform and caches the
//! kernel spectrum for repeated use on same-sized fields.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelKind {
    /// Uniform weights on the lattice points of a disc.
    Disc { radius: f64 },
    /// Sampled, normalized Gaussian with standard deviation `sigma`.
    Gaussian { sigma: f64 },
    /// Anything else (identity stencils in tests, for example).
    Custom,
}

/// Nonnegative weights on a `(2k+1) x (2k+1)` stencil.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel<T> {
    half_width: usize,
    weights: Vec<T>,
    kind: KernelKind,
}

impl<T: Real> Kernel<T> {
    /// Custom kernel from a row-major stencil of odd side length.
    pub fn from_weights(side: usize, weights: Vec<T>) -> Result<Self> {
        if side % 2 == 0 || weights.len() != side * side {
            return Err(Error::InvalidKernelSize(side));
        }
        if weights.iter().any(|&w| w < T::zero() || !w.is_finite()) {
            return Err(Error::InvalidParameter("kernel weights must be finite and nonnegative".into()));
        }
        Ok(Self {
            half_width: side / 2,
            weights,
            kind: KernelKind::Custom,
        })
    }

    /// One-point stencil; convolution with it is the identity.
    pub fn identity() -> Self {
        Self {
            half_width: 0,
            weights: vec![T::one()],
            kind: KernelKind::Custom,
        }
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn side(&self) -> usize {
        2 * self.half_width + 1
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// Weight at offset `(dx, dy)`; zero outside the stencil.
    pub fn weight(&self, dx: i64, dy: i64) -> T {
        let k = self.half_width as i64;
        if dx.abs() > k || dy.abs() > k {
            return T::zero();
        }
        let side = self.side() as i64;
        self.weights[((dy + k) * side + (dx + k)) as usize]
    }

    /// Offsets with a nonzero weight.
    pub fn support(&self) -> impl Iterator<Item = (i64, i64, T)> + '_ {
        let k = self.half_width as i64;
        let side = self.side() as i64;
        self.weights.iter().enumerate().filter_map(move |(i, &w)| {
            (w != T::zero()).then(|| ((i as i64 % side) - k, (i as i64 / side) - k, w))
        })
    }

    /// Number of offsets carrying weight.
    pub fn lattice_count(&self) -> usize {
        self.support().count()
    }

    pub fn sum(&self) -> T {
        self.weights.iter().copied().sum()
    }
}

/// Offsets `(dx, dy)` with `dx^2 + dy^2 <= r^2`, row-major.
pub fn disc_offsets(r: f64) -> Vec<(i64, i64)> {
    let k = r.ceil() as i64;
    let r2 = r * r;
    let mut out = Vec::new();
    for dy in -k..=k {
        for dx in -k..=k {
            if ((dx * dx + dy * dy) as f64) <= r2 {
                out.push((dx, dy));
            }
        }
    }
    out
}

/// Uniform disc kernel normalized by its lattice count, so the weights sum to 1.
pub fn make_disc_kernel<T: Real>(r: f64) -> Result<Kernel<T>> {
    if !(r >= 1.0) || !r.is_finite() {
        return Err(Error::RadiusBelowMesh(r));
    }
    let k = r.ceil() as usize;
    let side = 2 * k + 1;
    let offsets = disc_offsets(r);
    let weight = T::one() / T::count(offsets.len());
    let mut weights = vec![T::zero(); side * side];
    for (dx, dy) in offsets {
        let idx = (dy + k as i64) as usize * side + (dx + k as i64) as usize;
        weights[idx] = weight;
    }
    Ok(Kernel {
        half_width: k,
        weights,
        kind: KernelKind::Disc { radius: r },
    })
}

/// `size x size` sampled Gaussian with standard deviation `sigma`, normalized to sum 1.
pub fn make_gaussian_kernel<T: Real>(size: usize, sigma: f64) -> Result<Kernel<T>> {
    if size < 3 || size % 2 == 0 {
        return Err(Error::InvalidKernelSize(size));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!("gaussian sigma must be positive, got {sigma}")));
    }
    let k = (size / 2) as i64;
    let mut raw = Vec::with_capacity(size * size);
    for dy in -k..=k {
        for dx in -k..=k {
            raw.push((-((dx * dx + dy * dy) as f64) / (2.0 * sigma * sigma)).exp());
        }
    }
    let total: f64 = raw.iter().sum();
    Ok(Kernel {
        half_width: k as usize,
        weights: raw.into_iter().map(|w| T::lit(w / total)).collect(),
        kind: KernelKind::Gaussian { sigma },
    })
}

/// How reads outside the lattice are resolved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PadMode<T> {
    Constant(T),
    /// Clamp to the nearest edge pixel.
    Replicate,
}

impl<T: Real> PadMode<T> {
    #[inline]
    fn read(&self, field: &ScalarField<T>, x: i64, y: i64) -> T {
        let (w, h) = (field.width() as i64, field.height() as i64);
        if x >= 0 && y >= 0 && x < w && y < h {
            return field.get(x as usize, y as usize);
        }
        match *self {
            PadMode::Constant(c) => c,
            PadMode::Replicate => field.get(x.clamp(0, w - 1) as usize, y.clamp(0, h - 1) as usize),
        }
    }
}

fn check_fits<T: Real>(width: usize, height: usize, kernel: &Kernel<T>) -> Result<()> {
    if kernel.side() > width || kernel.side() > height {
        return Err(Error::KernelTooLarge {
            kernel: kernel.side(),
            width,
            height,
        });
    }
    Ok(())
}

/// `out(x) = sum_o w(o) * field(x + o)` by literal summation.
pub fn convolve_direct<T: Real>(field: &ScalarField<T>, kernel: &Kernel<T>, pad: PadMode<T>) -> Result<ScalarField<T>> {
    check_fits(field.width(), field.height(), kernel)?;
    let support: Vec<_> = kernel.support().collect();
    Ok(ScalarField::from_fn(field.width(), field.height(), |x, y| {
        let mut acc = T::zero();
        for &(dx, dy, w) in &support {
            acc += w * pad.read(field, x as i64 + dx, y as i64 + dy);
        }
        acc
    }))
}

/// Same result as [`convolve_direct`], evaluated by FFT.
pub fn convolve<T: Real>(field: &ScalarField<T>, kernel: &Kernel<T>, pad: PadMode<T>) -> Result<ScalarField<T>> {
    FftConvolver::new(field.width(), field.height(), kernel)?.apply(field, pad)
}

/// Smallest `n >= min` whose only prime factors are 2, 3 and 5.
fn next_smooth(min: usize) -> usize {
    let mut n = min.max(1);
    loop {
        let mut m = n;
        for p in [2, 3, 5] {
            while m % p == 0 {
                m /= p;
            }
        }
        if m == 1 {
            return n;
        }
        n += 1;
    }
}

/// Convolution plan for one kernel and one field size.
pub struct FftConvolver<T: Real> {
    width: usize,
    height: usize,
    half_width: usize,
    // transform sizes along x and y
    nx: usize,
    ny: usize,
    row_fwd: Arc<dyn Fft<T>>,
    row_inv: Arc<dyn Fft<T>>,
    col_fwd: Arc<dyn Fft<T>>,
    col_inv: Arc<dyn Fft<T>>,
    // kernel spectrum, transposed layout (ny contiguous per x)
    spectrum: Vec<Complex<T>>,
}

impl<T: Real> std::fmt::Debug for FftConvolver<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftConvolver")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("half_width", &self.half_width)
            .field("nx", &self.nx)
            .field("ny", &self.ny)
            .finish()
    }
}

impl<T: Real> FftConvolver<T> {
    pub fn new(width: usize, height: usize, kernel: &Kernel<T>) -> Result<Self> {
        check_fits(width, height, kernel)?;
        let k = kernel.half_width();
        let nx = next_smooth(width + 2 * k);
        let ny = next_smooth(height + 2 * k);
        let mut planner = FftPlanner::new();
        let row_fwd = planner.plan_fft_forward(nx);
        let row_inv = planner.plan_fft_inverse(nx);
        let col_fwd = planner.plan_fft_forward(ny);
        let col_inv = planner.plan_fft_inverse(ny);

        // Correlation with w == circular convolution with w placed at -o.
        let mut buf = vec![Complex::new(T::zero(), T::zero()); nx * ny];
        for (dx, dy, w) in kernel.support() {
            let ix = (-dx).rem_euclid(nx as i64) as usize;
            let iy = (-dy).rem_euclid(ny as i64) as usize;
            buf[iy * nx + ix].re += w;
        }
        let mut plan = Self {
            width,
            height,
            half_width: k,
            nx,
            ny,
            row_fwd,
            row_inv,
            col_fwd,
            col_inv,
            spectrum: Vec::new(),
        };
        plan.spectrum = plan.forward(buf);
        Ok(plan)
    }

    /// Row transforms, transpose, column transforms.
    fn forward(&self, mut buf: Vec<Complex<T>>) -> Vec<Complex<T>> {
        self.row_fwd.process(&mut buf);
        let mut t = transpose(&buf, self.nx, self.ny);
        self.col_fwd.process(&mut t);
        t
    }

    fn inverse(&self, mut t: Vec<Complex<T>>) -> Vec<Complex<T>> {
        self.col_inv.process(&mut t);
        let mut buf = transpose(&t, self.ny, self.nx);
        self.row_inv.process(&mut buf);
        buf
    }

    fn check_dims(&self, field: &ScalarField<T>) -> Result<()> {
        if field.dims() != (self.width, self.height) {
            return Err(Error::DimensionMismatch {
                expected: (self.width, self.height),
                found: field.dims(),
            });
        }
        Ok(())
    }

    fn load(&self, field: &ScalarField<T>, pad: PadMode<T>, buf: &mut [Complex<T>], imaginary: bool) {
        let k = self.half_width as i64;
        let ext_w = self.width + 2 * self.half_width;
        let ext_h = self.height + 2 * self.half_width;
        for py in 0..ext_h {
            for px in 0..ext_w {
                let v = pad.read(field, px as i64 - k, py as i64 - k);
                let c = &mut buf[py * self.nx + px];
                if imaginary {
                    c.im = v;
                } else {
                    c.re = v;
                }
            }
        }
    }

    fn run(&self, buf: Vec<Complex<T>>) -> Vec<Complex<T>> {
        let mut t = self.forward(buf);
        for (a, b) in t.iter_mut().zip(&self.spectrum) {
            *a *= *b;
        }
        self.inverse(t)
    }

    fn extract(&self, buf: &[Complex<T>], imaginary: bool) -> ScalarField<T> {
        let k = self.half_width;
        let scale = T::one() / T::count(self.nx * self.ny);
        ScalarField::from_fn(self.width, self.height, |x, y| {
            let c = buf[(y + k) * self.nx + (x + k)];
            (if imaginary { c.im } else { c.re }) * scale
        })
    }

    pub fn apply(&self, field: &ScalarField<T>, pad: PadMode<T>) -> Result<ScalarField<T>> {
        self.check_dims(field)?;
        let mut buf = vec![Complex::new(T::zero(), T::zero()); self.nx * self.ny];
        self.load(field, pad, &mut buf, false);
        let out = self.run(buf);
        Ok(self.extract(&out, false))
    }

    /// Convolves two real fields with one complex transform (`a` in the real
    /// part, `b` in the imaginary part). Valid because the kernel is real.
    pub fn apply_pair(
        &self,
        a: &ScalarField<T>,
        pad_a: PadMode<T>,
        b: &ScalarField<T>,
        pad_b: PadMode<T>,
    ) -> Result<(ScalarField<T>, ScalarField<T>)> {
        self.check_dims(a)?;
        self.check_dims(b)?;
        let mut buf = vec![Complex::new(T::zero(), T::zero()); self.nx * self.ny];
        self.load(a, pad_a, &mut buf, false);
        self.load(b, pad_b, &mut buf, true);
        let out = self.run(buf);
        Ok((self.extract(&out, false), self.extract(&out, true)))
    }
}

fn transpose<T: Copy>(src: &[T], cols: usize, rows: usize) -> Vec<T> {
    let mut dst = Vec::with_capacity(src.len());
    for c in 0..cols {
        for r in 0..rows {
            dst.push(src[r * cols + c]);
        }
    }
    dst
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(rng: &mut ChaCha8Rng, w: usize, h: usize) -> ScalarField<f64> {
        ScalarField::from_fn(w, h, |_, _| rng.random::<f64>())
    }

    #[test]
    fn disc_r1_has_five_offsets() {
        let k = make_disc_kernel::<f64>(1.0).unwrap();
        let support: Vec<_> = k.support().map(|(dx, dy, _)| (dx, dy)).collect();
        assert_eq!(support, vec![(0, -1), (-1, 0), (0, 0), (1, 0), (0, 1)]);
        assert!(k.support().all(|(_, _, w)| w == 0.2));
    }

    #[test]
    fn disc_r15_is_full_block() {
        let k = make_disc_kernel::<f64>(1.5).unwrap();
        assert_eq!(k.half_width(), 2);
        // dx^2 + dy^2 <= 2.25 keeps exactly the 3x3 block
        let support: Vec<_> = k.support().map(|(dx, dy, _)| (dx, dy)).collect();
        assert_eq!(support.len(), 9);
        assert!(support.iter().all(|&(dx, dy)| dx.abs() <= 1 && dy.abs() <= 1));
        assert!(k.support().all(|(_, _, w)| (w - 1.0 / 9.0).abs() < 1e-16));
    }

    #[test]
    fn disc_weights_sum_to_one() {
        for r in [1.0, 2.5, 3.0, 4.0, 9.0, 14.0, 19.0, 30.0] {
            let k = make_disc_kernel::<f64>(r).unwrap();
            assert!((k.sum() - 1.0).abs() < 1e-12, "r = {r}");
            for (dx, dy, w) in k.support() {
                assert_eq!(w, k.weight(-dx, -dy));
                assert_eq!(w, k.weight(dy, dx));
            }
        }
    }

    #[test]
    fn disc_below_mesh_errors() {
        assert_eq!(make_disc_kernel::<f64>(0.5), Err(Error::RadiusBelowMesh(0.5)));
    }

    #[test]
    fn gaussian_matches_reference_values() {
        let k = make_gaussian_kernel::<f64>(5, 0.5).unwrap();
        // independent evaluation of exp(-d^2 / 0.5) on the 5x5 stencil
        let mut total = 0.0;
        for dy in -2i32..=2 {
            for dx in -2i32..=2 {
                total += (-((dx * dx + dy * dy) as f64) / 0.5).exp();
            }
        }
        let center = 1.0 / total;
        let neighbor = (-2.0f64).exp() / total;
        assert!((k.weight(0, 0) - center).abs() < 1e-15);
        assert!((k.weight(1, 0) - neighbor).abs() < 1e-15);
        assert!((center - 0.6187).abs() < 1e-4);
        assert!((neighbor - 0.0837).abs() < 1e-4);
        assert!((k.sum() - 1.0).abs() < 1e-12);
        for (dx, dy, w) in k.support() {
            assert_eq!(w, k.weight(-dx, dy));
            assert_eq!(w, k.weight(dx, -dy));
        }
    }

    #[test]
    fn wide_gaussian_approaches_uniform() {
        let k = make_gaussian_kernel::<f64>(3, 1e6).unwrap();
        assert!(k.weights().iter().all(|&w| (w - 1.0 / 9.0).abs() < 1e-9));
    }

    #[test]
    fn gaussian_even_size_errors() {
        assert_eq!(make_gaussian_kernel::<f64>(4, 0.5), Err(Error::InvalidKernelSize(4)));
    }

    #[test]
    fn identity_kernel_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = random_field(&mut rng, 7, 5);
        let k = Kernel::identity();
        assert_eq!(convolve_direct(&f, &k, PadMode::Constant(0.0)).unwrap(), f);
        assert!(convolve(&f, &k, PadMode::Constant(0.0)).unwrap().max_abs_diff(&f) < 1e-14);
    }

    #[test]
    fn constant_field_with_matching_pad_is_preserved() {
        let f = ScalarField::filled(20, 20, 1.0);
        let k = make_disc_kernel::<f64>(4.0).unwrap();
        let out = convolve(&f, &k, PadMode::Constant(1.0)).unwrap();
        assert!(out.values().iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn delta_response_is_kernel() {
        let mut f = ScalarField::zeros(15, 15);
        f.set(7, 7, 1.0);
        let k = make_gaussian_kernel::<f64>(5, 0.8).unwrap();
        let out = convolve_direct(&f, &k, PadMode::Constant(0.0)).unwrap();
        for dy in -2i64..=2 {
            for dx in -2i64..=2 {
                assert_eq!(out.get((7 + dx) as usize, (7 + dy) as usize), k.weight(-dx, -dy));
            }
        }
        assert_eq!(convolve_direct(&ScalarField::zeros(9, 9), &k, PadMode::Constant(0.0)).unwrap().max(), 0.0);
    }

    #[test]
    fn fft_matches_direct_for_asymmetric_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let weights: Vec<f64> = (0..25).map(|_| rng.random()).collect();
        let k = Kernel::from_weights(5, weights).unwrap();
        let f = random_field(&mut rng, 13, 9);
        for pad in [PadMode::Constant(0.3), PadMode::Replicate] {
            let a = convolve(&f, &k, pad).unwrap();
            let b = convolve_direct(&f, &k, pad).unwrap();
            assert!(a.max_abs_diff(&b) < 1e-12);
        }
    }

    #[test]
    fn fft_matches_direct_on_random_fields() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let k = make_disc_kernel::<f64>(4.0).unwrap();
        let plan = FftConvolver::new(32, 32, &k).unwrap();
        for _ in 0..50 {
            let f = random_field(&mut rng, 32, 32);
            let fast = plan.apply(&f, PadMode::Constant(1.0)).unwrap();
            let slow = convolve_direct(&f, &k, PadMode::Constant(1.0)).unwrap();
            assert!(fast.max_abs_diff(&slow) < 1e-10);
        }
    }

    #[test]
    fn pair_transform_separates_channels() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let k = make_disc_kernel::<f64>(3.0).unwrap();
        let plan = FftConvolver::new(20, 24, &k).unwrap();
        let a = random_field(&mut rng, 20, 24);
        let b = random_field(&mut rng, 20, 24);
        let (ca, cb) = plan.apply_pair(&a, PadMode::Constant(1.0), &b, PadMode::Replicate).unwrap();
        assert!(ca.max_abs_diff(&convolve_direct(&a, &k, PadMode::Constant(1.0)).unwrap()) < 1e-12);
        assert!(cb.max_abs_diff(&convolve_direct(&b, &k, PadMode::Replicate).unwrap()) < 1e-12);
    }

    #[test]
    fn oversized_kernel_errors() {
        let k = make_disc_kernel::<f64>(4.0).unwrap();
        let f = ScalarField::zeros(8, 20);
        assert!(matches!(convolve(&f, &k, PadMode::Replicate), Err(Error::KernelTooLarge { .. })));
        assert!(matches!(convolve_direct(&f, &k, PadMode::Replicate), Err(Error::KernelTooLarge { .. })));
    }

    #[test]
    fn single_precision_fast_path() {
        let f = ScalarField::<f32>::from_fn(24, 24, |x, y| ((x * 7 + y * 3) % 11) as f32 / 11.0);
        let k = make_disc_kernel::<f32>(4.0).unwrap();
        let a = convolve(&f, &k, PadMode::Constant(1.0)).unwrap();
        let b = convolve_direct(&f, &k, PadMode::Constant(1.0)).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-5);
    }

    #[test]
    fn smooth_sizes() {
        assert_eq!(next_smooth(102), 108);
        assert_eq!(next_smooth(64), 64);
        assert_eq!(next_smooth(7), 8);
    }
}
