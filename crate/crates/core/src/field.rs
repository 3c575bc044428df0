//! Periodic 2D fields on the torus `[0, L)²` and their spectral calculus.
//!
//! Samples are stored row-major with `x` varying fastest: sample `(i, j)` sits
//! at `(i·h, j·h)` and lives at index `j·N + i`. Spectra use the same layout
//! and are normalised so that the zero mode equals the sample mean.
//!
//! Derivatives are spectral. The Nyquist wavenumber is zeroed for odd
//! derivatives, and the Laplacian is built from the same derivative
//! wavenumbers so that `div ∘ grad == laplacian` and `curl ∘ grad == 0` hold
//! exactly on the discrete space.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("non-finite sample {value} at index {index}")]
    NonFinite { index: usize, value: f64 },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("expected {expected} samples, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
}

pub type FieldResult<T> = Result<T, FieldError>;

struct GridInner<T: Real> {
    side: T,
    n: usize,
    wavenumbers: Vec<T>,
    deriv_wavenumbers: Vec<T>,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

/// Torus geometry plus FFT plans. Cloning is cheap (shared).
#[derive(Clone)]
pub struct Grid<T: Real> {
    inner: Arc<GridInner<T>>,
}

impl<T: Real> fmt::Debug for Grid<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("side", &self.inner.side)
            .field("n", &self.inner.n)
            .finish()
    }
}

impl<T: Real> PartialEq for Grid<T> {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.n == other.inner.n && self.inner.side == other.inner.side)
    }
}

impl<T: Real> Grid<T> {
    pub fn new(side: T, n: usize) -> FieldResult<Self> {
        if !(side.is_finite() && side > T::zero()) {
            return Err(FieldError::InvalidGrid(format!(
                "side length must be positive and finite, got {side}"
            )));
        }
        if n < 8 || n % 2 != 0 {
            return Err(FieldError::InvalidGrid(format!(
                "resolution must be even and at least 8, got {n}"
            )));
        }
        let two_pi_over_l = T::TAU() / side;
        let wavenumbers: Vec<T> = (0..n)
            .map(|i| T::lit(signed_mode(i, n) as f64) * two_pi_over_l)
            .collect();
        let mut deriv_wavenumbers = wavenumbers.clone();
        deriv_wavenumbers[n / 2] = T::zero();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        Ok(Self {
            inner: Arc::new(GridInner {
                side,
                n,
                wavenumbers,
                deriv_wavenumbers,
                forward,
                inverse,
            }),
        })
    }

    pub fn n(&self) -> usize {
        self.inner.n
    }

    pub fn len(&self) -> usize {
        self.inner.n * self.inner.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn side(&self) -> T {
        self.inner.side
    }

    /// Grid spacing `h = L/N`.
    pub fn spacing(&self) -> T {
        self.inner.side / T::count(self.inner.n)
    }

    pub fn cell_area(&self) -> T {
        let h = self.spacing();
        h * h
    }

    pub fn area(&self) -> T {
        self.inner.side * self.inner.side
    }

    /// `2πm/L` for the symmetric index range `m ∈ [-N/2, N/2)`.
    pub fn wavenumbers(&self) -> &[T] {
        &self.inner.wavenumbers
    }

    /// Wavenumbers used by odd derivatives (Nyquist entry zeroed).
    pub fn derivative_wavenumbers(&self) -> &[T] {
        &self.inner.deriv_wavenumbers
    }

    /// Largest `|m|` kept by the 2/3 dealiasing rule.
    pub fn dealias_cutoff(&self) -> usize {
        (self.inner.n - 1) / 3
    }

    pub fn coordinate(&self, i: usize) -> T {
        T::count(i) * self.spacing()
    }

    pub fn mode_index(&self, i: usize) -> isize {
        signed_mode(i, self.inner.n)
    }

    fn fft2(&self, data: &mut [Complex<T>], inverse: bool) {
        const STRIP: usize = 8;
        let n = self.inner.n;
        let plan = if inverse {
            &self.inner.inverse
        } else {
            &self.inner.forward
        };
        let zero = Complex::new(T::zero(), T::zero());
        let rows_per_task = (n / (4 * rayon::current_num_threads())).max(1);
        data.par_chunks_mut(n * rows_per_task).for_each(|rows| {
            let mut scratch = vec![zero; plan.get_inplace_scratch_len()];
            plan.process_with_scratch(rows, &mut scratch);
        });

        // Columns: gather a strip of adjacent columns into a contiguous
        // buffer, transform, scatter back.
        let src: &[Complex<T>] = data;
        let strips: Vec<(usize, Vec<Complex<T>>)> = (0..n)
            .step_by(STRIP)
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|i0| {
                let w = STRIP.min(n - i0);
                let mut buf = Vec::with_capacity(w * n);
                for c in i0..i0 + w {
                    buf.extend(src[c..].iter().step_by(n));
                }
                let mut scratch = vec![zero; plan.get_inplace_scratch_len()];
                plan.process_with_scratch(&mut buf, &mut scratch);
                (i0, buf)
            })
            .collect();
        for (i0, buf) in strips {
            let w = buf.len() / n;
            for (j, row) in data.chunks_exact_mut(n).enumerate() {
                for (c, z) in row[i0..i0 + w].iter_mut().enumerate() {
                    *z = buf[c * n + j];
                }
            }
        }
    }
}

fn signed_mode(i: usize, n: usize) -> isize {
    if i < n / 2 {
        i as isize
    } else {
        i as isize - n as isize
    }
}

/// Fourier coefficients of a real field, zero mode equal to the mean.
#[derive(Clone, Debug)]
pub struct Spectrum<T: Real> {
    grid: Grid<T>,
    data: Vec<Complex<T>>,
}

impl<T: Real> Spectrum<T> {
    pub fn zeros(grid: &Grid<T>) -> Self {
        Self {
            grid: grid.clone(),
            data: vec![Complex::new(T::zero(), T::zero()); grid.len()],
        }
    }

    pub fn from_field(f: &ScalarField<T>) -> Self {
        let scale = T::one() / T::count(f.grid.len());
        let mut data: Vec<Complex<T>> = f
            .data
            .iter()
            .map(|&x| Complex::new(x * scale, T::zero()))
            .collect();
        f.grid.fft2(&mut data, false);
        Self {
            grid: f.grid.clone(),
            data,
        }
    }

    /// Real part of the inverse transform.
    pub fn to_field(&self) -> ScalarField<T> {
        let mut data = self.data.clone();
        self.grid.fft2(&mut data, true);
        ScalarField {
            grid: self.grid.clone(),
            data: data.into_iter().map(|c| c.re).collect(),
        }
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn coefficients(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn coefficients_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.data
    }

    pub fn mean(&self) -> T {
        self.data[0].re
    }

    /// Multiply every mode by `factor(kx, ky)` where `kx`, `ky` are the
    /// derivative wavenumbers and the third argument is `kx² + ky²`.
    pub fn map_modes(&self, factor: impl Fn(T, T, T) -> Complex<T>) -> Self {
        let n = self.grid.n();
        let kd = self.grid.derivative_wavenumbers();
        let mut data = self.data.clone();
        for (j, row) in data.chunks_mut(n).enumerate() {
            let ky = kd[j];
            for (i, c) in row.iter_mut().enumerate() {
                let kx = kd[i];
                *c = *c * factor(kx, ky, kx * kx + ky * ky);
            }
        }
        Self {
            grid: self.grid.clone(),
            data,
        }
    }

    pub fn dx(&self) -> Self {
        self.map_modes(|kx, _, _| Complex::new(T::zero(), kx))
    }

    pub fn dy(&self) -> Self {
        self.map_modes(|_, ky, _| Complex::new(T::zero(), ky))
    }

    pub fn laplacian(&self) -> Self {
        self.map_modes(|_, _, k2| Complex::new(-k2, T::zero()))
    }

    /// `(I - aΔ)⁻¹` applied mode by mode.
    pub fn helmholtz_inverse(&self, a: T) -> Self {
        self.map_modes(|_, _, k2| Complex::new(T::one() / (T::one() + a * k2), T::zero()))
    }

    /// Zero every mode outside the 2/3-rule band.
    pub fn band_limit(&mut self) {
        let n = self.grid.n();
        let cut = self.grid.dealias_cutoff() as isize;
        for j in 0..n {
            let mj = signed_mode(j, n);
            for i in 0..n {
                let mi = signed_mode(i, n);
                if mi.abs() > cut || mj.abs() > cut {
                    self.data[j * n + i] = Complex::new(T::zero(), T::zero());
                }
            }
        }
    }

    /// `‖f‖₂` of the represented field by Parseval.
    pub fn l2(&self) -> T {
        let sum = self.data.iter().fold(T::zero(), |acc, c| acc + c.norm_sqr());
        self.grid.side() * sum.sqrt()
    }

    pub fn scaled(&self, s: T) -> Self {
        Self {
            grid: self.grid.clone(),
            data: self.data.iter().map(|c| *c * s).collect(),
        }
    }

    /// `self += s · other`.
    pub fn add_scaled(&mut self, s: T, other: &Self) {
        debug_assert!(self.grid == other.grid);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + *b * s;
        }
    }

    /// Largest coefficient magnitude.
    pub fn max_abs(&self) -> T {
        self.data
            .iter()
            .fold(T::zero(), |m, c| m.max(c.norm()))
    }
}

/// Real samples of a periodic scalar field.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField<T: Real> {
    grid: Grid<T>,
    data: Vec<T>,
}

impl<T: Real> ScalarField<T> {
    pub fn from_vec(grid: &Grid<T>, data: Vec<T>) -> FieldResult<Self> {
        if data.len() != grid.len() {
            return Err(FieldError::LengthMismatch {
                expected: grid.len(),
                got: data.len(),
            });
        }
        let f = Self {
            grid: grid.clone(),
            data,
        };
        f.check_finite()?;
        Ok(f)
    }

    pub fn constant(grid: &Grid<T>, value: T) -> Self {
        Self {
            grid: grid.clone(),
            data: vec![value; grid.len()],
        }
    }

    pub fn zeros(grid: &Grid<T>) -> Self {
        Self::constant(grid, T::zero())
    }

    /// Sample `f(x, y)` at the grid nodes.
    pub fn from_fn(grid: &Grid<T>, f: impl Fn(T, T) -> T) -> Self {
        let n = grid.n();
        let mut data = Vec::with_capacity(grid.len());
        for j in 0..n {
            let y = grid.coordinate(j);
            for i in 0..n {
                data.push(f(grid.coordinate(i), y));
            }
        }
        Self {
            grid: grid.clone(),
            data,
        }
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn samples(&self) -> &[T] {
        &self.data
    }

    pub fn samples_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_samples(self) -> Vec<T> {
        self.data
    }

    pub fn check_finite(&self) -> FieldResult<()> {
        match self.data.iter().position(|x| !x.is_finite()) {
            Some(index) => Err(FieldError::NonFinite {
                index,
                value: self.data[index].to_f64_lossy(),
            }),
            None => Ok(()),
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            grid: self.grid.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> FieldResult<Self> {
        if self.grid != other.grid {
            return Err(FieldError::GridMismatch);
        }
        Ok(Self {
            grid: self.grid.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn spectrum(&self) -> Spectrum<T> {
        Spectrum::from_field(self)
    }

    pub fn mean(&self) -> T {
        self.data.iter().fold(T::zero(), |s, &x| s + x) / T::count(self.data.len())
    }

    pub fn min(&self) -> T {
        self.data.iter().fold(T::infinity(), |m, &x| m.min(x))
    }

    pub fn max(&self) -> T {
        self.data.iter().fold(T::neg_infinity(), |m, &x| m.max(x))
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
    }

    pub fn gradient(&self) -> FieldResult<VectorField<T>> {
        self.check_finite()?;
        let s = self.spectrum();
        Ok(VectorField {
            x: s.dx().to_field(),
            y: s.dy().to_field(),
        })
    }

    pub fn laplacian(&self) -> FieldResult<Self> {
        self.check_finite()?;
        Ok(self.spectrum().laplacian().to_field())
    }

    /// Solve `g - aΔg = f`.
    pub fn helmholtz_solve(&self, a: T) -> FieldResult<Self> {
        if !(a > T::zero() && a.is_finite()) {
            return Err(FieldError::InvalidParameter {
                name: "a",
                value: a.to_f64_lossy(),
                reason: "Helmholtz coefficient must be positive",
            });
        }
        self.check_finite()?;
        Ok(self.spectrum().helmholtz_inverse(a).to_field())
    }

    /// Project onto the 2/3-rule band.
    pub fn band_limited(&self) -> Self {
        let mut s = self.spectrum();
        s.band_limit();
        s.to_field()
    }

    pub fn lp_norm(&self, p: T) -> FieldResult<T> {
        lp_norm_of(&self.grid, self.data.iter().map(|x| x.abs()), p)
    }

    /// `‖f‖₂` on the torus.
    pub fn l2(&self) -> T {
        self.lp_norm(T::lit(2.0)).unwrap_or_else(|_| T::nan())
    }

    pub fn scaled(&self, s: T) -> Self {
        self.map(|x| x * s)
    }
}

/// Two-component periodic vector field.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField<T: Real> {
    pub x: ScalarField<T>,
    pub y: ScalarField<T>,
}

impl<T: Real> VectorField<T> {
    pub fn new(x: ScalarField<T>, y: ScalarField<T>) -> FieldResult<Self> {
        if x.grid != y.grid {
            return Err(FieldError::GridMismatch);
        }
        Ok(Self { x, y })
    }

    pub fn zeros(grid: &Grid<T>) -> Self {
        Self {
            x: ScalarField::zeros(grid),
            y: ScalarField::zeros(grid),
        }
    }

    pub fn constant(grid: &Grid<T>, vx: T, vy: T) -> Self {
        Self {
            x: ScalarField::constant(grid, vx),
            y: ScalarField::constant(grid, vy),
        }
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.x.grid
    }

    pub fn check(&self) -> FieldResult<()> {
        if self.x.grid != self.y.grid {
            return Err(FieldError::GridMismatch);
        }
        self.x.check_finite()?;
        self.y.check_finite()
    }

    /// Componentwise spectral gradient `(∂₁φ, ∂₂φ)` from a spectrum.
    pub fn gradient_of(s: &Spectrum<T>) -> Self {
        Self {
            x: s.dx().to_field(),
            y: s.dy().to_field(),
        }
    }

    pub fn divergence(&self) -> FieldResult<ScalarField<T>> {
        self.check()?;
        let mut d = self.x.spectrum().dx();
        d.add_scaled(T::one(), &self.y.spectrum().dy());
        Ok(d.to_field())
    }

    /// `∇⊥·w = ∂₂w₁ − ∂₁w₂`.
    pub fn curl(&self) -> FieldResult<ScalarField<T>> {
        self.check()?;
        let mut c = self.x.spectrum().dy();
        c.add_scaled(-T::one(), &self.y.spectrum().dx());
        Ok(c.to_field())
    }

    pub fn magnitude(&self) -> ScalarField<T> {
        ScalarField {
            grid: self.x.grid.clone(),
            data: self
                .x
                .data
                .iter()
                .zip(&self.y.data)
                .map(|(&a, &b)| (a * a + b * b).sqrt())
                .collect(),
        }
    }

    /// Lᵖ norm of the pointwise Euclidean magnitude.
    pub fn lp_norm(&self, p: T) -> FieldResult<T> {
        if self.x.grid != self.y.grid {
            return Err(FieldError::GridMismatch);
        }
        lp_norm_of(
            &self.x.grid,
            self.x.data.iter().zip(&self.y.data).map(|(&a, &b)| (a * a + b * b).sqrt()),
            p,
        )
    }

    pub fn l2(&self) -> T {
        self.lp_norm(T::lit(2.0)).unwrap_or_else(|_| T::nan())
    }

    pub fn max_abs(&self) -> T {
        self.lp_norm(T::infinity()).unwrap_or_else(|_| T::nan())
    }

    pub fn mean(&self) -> (T, T) {
        (self.x.mean(), self.y.mean())
    }

    pub fn band_limited(&self) -> Self {
        Self {
            x: self.x.band_limited(),
            y: self.y.band_limited(),
        }
    }

    pub fn scaled(&self, s: T) -> Self {
        Self {
            x: self.x.scaled(s),
            y: self.y.scaled(s),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T + Copy) -> FieldResult<Self> {
        Ok(Self {
            x: self.x.zip_map(&other.x, f)?,
            y: self.y.zip_map(&other.y, f)?,
        })
    }
}

fn lp_norm_of<T: Real>(
    grid: &Grid<T>,
    magnitudes: impl Iterator<Item = T>,
    p: T,
) -> FieldResult<T> {
    if p.is_nan() || p < T::one() {
        return Err(FieldError::InvalidParameter {
            name: "p",
            value: p.to_f64_lossy(),
            reason: "Lp norms need p >= 1",
        });
    }
    if p.is_infinite() {
        return Ok(magnitudes.fold(T::zero(), |m, x| m.max(x)));
    }
    let two = T::lit(2.0);
    let four = T::lit(4.0);
    let sum = if p == two {
        magnitudes.fold(T::zero(), |s, x| s + x * x)
    } else if p == four {
        magnitudes.fold(T::zero(), |s, x| {
            let x2 = x * x;
            s + x2 * x2
        })
    } else {
        magnitudes.fold(T::zero(), |s, x| s + x.powf(p))
    };
    Ok((sum * grid.cell_area()).powf(T::one() / p))
}

/// Band-limited transform of the pointwise product `a·b` (2/3 rule).
///
/// Exact (no aliasing) whenever both factors are already band-limited.
pub fn dealiased_product<T: Real>(
    a: &ScalarField<T>,
    b: &ScalarField<T>,
) -> FieldResult<Spectrum<T>> {
    let mut s = a.zip_map(b, |x, y| x * y)?.spectrum();
    s.band_limit();
    Ok(s)
}
