//! Discontinuous initial data, mollification and the smallness parameters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{FieldError, Grid, ScalarField, Spectrum, VectorField};
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InitError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("initial density is negative: minimum {min}")]
    NegativeDensity { min: f64 },
    #[error("p0 must exceed 4, got {0}")]
    P0OutOfRange(f64),
    #[error("mollifier width {delta} exceeds L/4 = {limit}")]
    DeltaTooLarge { delta: f64, limit: f64 },
    #[error("invalid recipe: {0}")]
    InvalidRecipe(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecipeKind {
    PiecewiseConstantDisks,
    PiecewiseConstantStripes,
    SmoothBump,
    FromPotential,
}

/// Disk with centre given as a fraction of `L`; the density jump inside is
/// `weight · amplitude`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disk {
    pub center: [f64; 2],
    pub radius: f64,
    #[serde(default = "one")]
    pub weight: f64,
}

/// One term `weight · sin(2π(mx·x + my·y)/L + phase)` of a velocity potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialMode {
    pub mx: i32,
    pub my: i32,
    #[serde(default = "one")]
    pub weight: f64,
    #[serde(default)]
    pub phase: f64,
}

fn one() -> f64 {
    1.0
}

/// Recipe for `(u₀, v₀)`.
///
/// `v₀` is always the gradient of a potential φ₀: for `from_potential` the
/// potential is `amplitude · Σ modes`, for every other kind the density
/// perturbation is scaled by `amplitude` and `potential` modes (if any) are
/// added unscaled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialDataRecipe {
    pub kind: RecipeKind,
    pub amplitude: f64,
    #[serde(default)]
    pub disks: Vec<Disk>,
    /// When `disks` is empty, place this many disks of `random_radius` at
    /// seeded random positions with alternating signs.
    #[serde(default)]
    pub random_disks: usize,
    #[serde(default = "one")]
    pub random_radius: f64,
    /// Stripe `[lo, hi)` in fractions of `L` along x.
    #[serde(default = "default_stripe")]
    pub stripe: [f64; 2],
    #[serde(default = "one")]
    pub bump_width: f64,
    #[serde(default)]
    pub potential: Vec<PotentialMode>,
    #[serde(default = "default_p0")]
    pub p0: f64,
    #[serde(default)]
    pub delta: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_stripe() -> [f64; 2] {
    [0.25, 0.75]
}

fn default_p0() -> f64 {
    6.0
}

impl InitialDataRecipe {
    pub fn new(kind: RecipeKind, amplitude: f64) -> Self {
        Self {
            kind,
            amplitude,
            disks: Vec::new(),
            random_disks: 0,
            random_radius: 1.0,
            stripe: default_stripe(),
            bump_width: 1.0,
            potential: Vec::new(),
            p0: default_p0(),
            delta: 0.0,
            seed: 0,
        }
    }

    pub fn equilibrium() -> Self {
        Self::new(RecipeKind::SmoothBump, 0.0)
    }

    pub fn validate(&self) -> Result<(), InitError> {
        if !(self.p0 > 4.0) || !self.p0.is_finite() {
            return Err(InitError::P0OutOfRange(self.p0));
        }
        if !(self.delta >= 0.0) || !self.delta.is_finite() {
            return Err(InitError::InvalidRecipe(format!(
                "delta must be >= 0, got {}",
                self.delta
            )));
        }
        if !self.amplitude.is_finite() {
            return Err(InitError::InvalidRecipe("amplitude must be finite".into()));
        }
        match self.kind {
            RecipeKind::PiecewiseConstantDisks => {
                if self.disks.is_empty() && self.random_disks == 0 {
                    return Err(InitError::InvalidRecipe(
                        "disk recipe needs disks or random_disks".into(),
                    ));
                }
                if self.disks.iter().any(|d| !(d.radius > 0.0))
                    || (self.disks.is_empty() && !(self.random_radius > 0.0))
                {
                    return Err(InitError::InvalidRecipe("disk radius must be > 0".into()));
                }
            }
            RecipeKind::PiecewiseConstantStripes => {
                let [lo, hi] = self.stripe;
                if !(0.0 <= lo && lo < hi && hi <= 1.0) {
                    return Err(InitError::InvalidRecipe(format!(
                        "stripe fractions must satisfy 0 <= lo < hi <= 1, got [{lo}, {hi}]"
                    )));
                }
            }
            RecipeKind::SmoothBump => {
                if !(self.bump_width > 0.0) {
                    return Err(InitError::InvalidRecipe("bump_width must be > 0".into()));
                }
            }
            RecipeKind::FromPotential => {
                if self.potential.is_empty() {
                    return Err(InitError::InvalidRecipe(
                        "from_potential needs at least one potential mode".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Smallness parameters of a datum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataSummary<T: Real> {
    /// `‖u₀−1‖² + ‖v₀‖²`.
    pub theta0: T,
    /// `‖v₀‖_{L^{p₀}}`.
    pub m: T,
    /// `‖u₀−1‖∞ + ‖v₀‖∞`.
    pub linf_amplitude: T,
    pub delta: T,
    pub eta0: T,
}

impl<T: Real> DataSummary<T> {
    pub fn from_fields(
        u0: &ScalarField<T>,
        v0: &VectorField<T>,
        p0: T,
        delta: T,
    ) -> Result<Self, InitError> {
        let pert = u0.map(|u| u - T::one());
        let ul2 = pert.l2();
        let vl2 = v0.l2();
        Ok(Self {
            theta0: ul2 * ul2 + vl2 * vl2,
            m: v0.lp_norm(p0)?,
            linf_amplitude: pert.max_abs() + v0.max_abs(),
            delta,
            eta0: compute_eta0(p0)?,
        })
    }
}

/// A constructed datum.
#[derive(Debug, Clone)]
pub struct InitialData<T: Real> {
    pub u0: ScalarField<T>,
    pub v0: VectorField<T>,
    /// Potential with `v₀ = ∇φ₀` (zero mean).
    pub potential: ScalarField<T>,
    pub summary: DataSummary<T>,
}

impl<T: Real> InitialData<T> {
    /// Chemical profile consistent with `v₀ = −(1/μ)∇ln c₀`: `c₀ = exp(−μφ₀)`.
    pub fn chemical(&self, mu: T) -> ScalarField<T> {
        self.potential.map(|phi| (-mu * phi).exp())
    }
}

/// `η₀ = (p₀−4) / (2(p₀−2))`.
pub fn compute_eta0<T: Real>(p0: T) -> Result<T, InitError> {
    let four = T::lit(4.0);
    if !(p0 > four) || !p0.is_finite() {
        return Err(InitError::P0OutOfRange(p0.to_f64_lossy()));
    }
    Ok((p0 - four) / (T::lit(2.0) * (p0 - T::lit(2.0))))
}

pub fn build_initial_data<T: Real>(
    recipe: &InitialDataRecipe,
    grid: &Grid<T>,
) -> Result<InitialData<T>, InitError> {
    recipe.validate()?;
    let l = grid.side().to_f64_lossy();
    let a = recipe.amplitude;

    let perturbation: ScalarField<T> = match recipe.kind {
        RecipeKind::PiecewiseConstantDisks => {
            let disks = if recipe.disks.is_empty() {
                random_disks(recipe)
            } else {
                recipe.disks.clone()
            };
            ScalarField::from_fn(grid, |x, y| {
                let (x, y) = (x.to_f64_lossy(), y.to_f64_lossy());
                let mut s = 0.0;
                for d in &disks {
                    let dx = periodic_offset(x - d.center[0] * l, l);
                    let dy = periodic_offset(y - d.center[1] * l, l);
                    if dx * dx + dy * dy <= d.radius * d.radius {
                        s += d.weight * a;
                    }
                }
                T::lit(s)
            })
        }
        RecipeKind::PiecewiseConstantStripes => {
            let [lo, hi] = recipe.stripe;
            ScalarField::from_fn(grid, |x, _| {
                let fx = x.to_f64_lossy() / l;
                T::lit(if fx >= lo && fx < hi { a } else { 0.0 })
            })
        }
        RecipeKind::SmoothBump => {
            let w2 = recipe.bump_width * recipe.bump_width;
            ScalarField::from_fn(grid, |x, y| {
                let dx = periodic_offset(x.to_f64_lossy() - 0.5 * l, l);
                let dy = periodic_offset(y.to_f64_lossy() - 0.5 * l, l);
                T::lit(a * (-(dx * dx + dy * dy) / (2.0 * w2)).exp())
            })
        }
        RecipeKind::FromPotential => ScalarField::zeros(grid),
    };

    let potential_scale = match recipe.kind {
        RecipeKind::FromPotential => a,
        _ => 1.0,
    };
    let potential = ScalarField::from_fn(grid, |x, y| {
        let (x, y) = (x.to_f64_lossy(), y.to_f64_lossy());
        let s: f64 = recipe
            .potential
            .iter()
            .map(|m| {
                let arg = std::f64::consts::TAU * (m.mx as f64 * x + m.my as f64 * y) / l + m.phase;
                m.weight * arg.sin()
            })
            .sum();
        T::lit(potential_scale * s)
    });

    let mut u0 = perturbation.map(|p| T::one() + p);
    check_nonnegative(&u0)?;
    let mut potential = potential;
    let delta = T::lit(recipe.delta);
    if recipe.delta > 0.0 {
        u0 = mollify(&u0, delta)?;
        potential = mollify(&potential, delta)?;
        check_nonnegative(&u0)?;
    }
    let mean = potential.mean();
    let potential = potential.map(|p| p - mean);
    let v0 = VectorField::gradient_of(&potential.spectrum());
    let summary = DataSummary::from_fields(&u0, &v0, T::lit(recipe.p0), delta)?;
    Ok(InitialData {
        u0,
        v0,
        potential,
        summary,
    })
}

fn periodic_offset(d: f64, l: f64) -> f64 {
    d - l * (d / l).round()
}

fn check_nonnegative<T: Real>(u0: &ScalarField<T>) -> Result<(), InitError> {
    let min = u0.min();
    if min < T::zero() {
        return Err(InitError::NegativeDensity {
            min: min.to_f64_lossy(),
        });
    }
    Ok(())
}

fn random_disks(recipe: &InitialDataRecipe) -> Vec<Disk> {
    let mut rng = ChaCha8Rng::seed_from_u64(recipe.seed);
    (0..recipe.random_disks)
        .map(|i| Disk {
            center: [rng.random_range(0.2..0.8), rng.random_range(0.2..0.8)],
            radius: recipe.random_radius,
            weight: if i % 2 == 0 { 1.0 } else { -1.0 },
        })
        .collect()
}

/// Periodic convolution with the bump `(1 − (r/δ)²)³`, normalised to unit
/// discrete mass.
pub fn mollify<T: Real>(f: &ScalarField<T>, delta: T) -> Result<ScalarField<T>, InitError> {
    let grid = f.grid();
    if !(delta > T::zero()) || !delta.is_finite() {
        return Err(FieldError::InvalidParameter {
            name: "delta",
            value: delta.to_f64_lossy(),
            reason: "mollifier width must be positive",
        }
        .into());
    }
    let limit = grid.side() / T::lit(4.0);
    if delta > limit {
        return Err(InitError::DeltaTooLarge {
            delta: delta.to_f64_lossy(),
            limit: limit.to_f64_lossy(),
        });
    }
    f.check_finite()?;
    let kernel = mollifier_kernel(grid, delta);
    let kernel_hat = kernel.spectrum();
    let scale = T::count(grid.len());
    let mut s = f.spectrum();
    for (c, k) in s.coefficients_mut().iter_mut().zip(kernel_hat.coefficients()) {
        *c = *c * (*k * scale);
    }
    Ok(s.to_field())
}

/// Discrete kernel centred at the origin, wrapped periodically.
pub fn mollifier_kernel<T: Real>(grid: &Grid<T>, delta: T) -> ScalarField<T> {
    let l = grid.side();
    let half = l / T::lit(2.0);
    let wrap = |x: T| if x >= half { x - l } else { x };
    let mut k = ScalarField::from_fn(grid, |x, y| {
        let (dx, dy) = (wrap(x), wrap(y));
        let r2 = (dx * dx + dy * dy) / (delta * delta);
        if r2 < T::one() {
            let s = T::one() - r2;
            s * s * s
        } else {
            T::zero()
        }
    });
    let mass = k.samples().iter().fold(T::zero(), |s, &x| s + x);
    for x in k.samples_mut() {
        *x /= mass;
    }
    k
}

/// Gradient part of the Helmholtz decomposition; the mean of `w` is kept.
pub fn project_curl_free<T: Real>(w: &VectorField<T>) -> Result<VectorField<T>, FieldError> {
    w.check()?;
    let grid = w.grid();
    let n = grid.n();
    let kd = grid.derivative_wavenumbers();
    let sx = w.x.spectrum();
    let sy = w.y.spectrum();
    let mut px = Spectrum::zeros(grid);
    let mut py = Spectrum::zeros(grid);
    let zero = Complex::new(T::zero(), T::zero());
    for j in 0..n {
        for i in 0..n {
            let idx = j * n + i;
            let (kx, ky) = (kd[i], kd[j]);
            let k2 = kx * kx + ky * ky;
            let (cx, cy) = if idx == 0 {
                (sx.coefficients()[0], sy.coefficients()[0])
            } else if k2 == T::zero() {
                (zero, zero)
            } else {
                let dot = sx.coefficients()[idx] * kx + sy.coefficients()[idx] * ky;
                (dot * (kx / k2), dot * (ky / k2))
            };
            px.coefficients_mut()[idx] = cx;
            py.coefficients_mut()[idx] = cy;
        }
    }
    Ok(VectorField {
        x: px.to_field(),
        y: py.to_field(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(n: usize) -> Grid<f64> {
        Grid::new(16.0 * PI, n).unwrap()
    }

    #[test]
    fn eta0_values() {
        assert!((compute_eta0(6.0_f64).unwrap() - 0.25).abs() < 1e-15);
        assert!((compute_eta0(8.0_f64).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let near = compute_eta0(4.0_f64 + 1e-9).unwrap();
        assert!(near > 0.0 && near < 1e-8);
        assert!(compute_eta0(4.0_f64).is_err());
        assert!(compute_eta0(3.0_f64).is_err());
        assert!(compute_eta0(1e6_f64).unwrap() < 0.5);
    }

    #[test]
    fn equilibrium_recipe() {
        let d = build_initial_data(&InitialDataRecipe::equilibrium(), &grid(32)).unwrap();
        assert!(d.u0.map(|u| u - 1.0).max_abs() == 0.0);
        assert!(d.v0.max_abs() == 0.0);
        assert_eq!(d.summary.theta0, 0.0);
    }

    #[test]
    fn single_disk_theta0_counts_cells() {
        let g = grid(64);
        let mut r = InitialDataRecipe::new(RecipeKind::PiecewiseConstantDisks, 0.3);
        r.disks = vec![Disk {
            center: [0.5, 0.5],
            radius: 5.0,
            weight: 1.0,
        }];
        let d = build_initial_data(&r, &g).unwrap();
        let inside = d
            .u0
            .samples()
            .iter()
            .filter(|&&u| (u - 1.3).abs() < 1e-12)
            .count() as f64;
        let area = inside * g.cell_area();
        assert!((d.summary.theta0 - 0.09 * area).abs() <= 1e-12 * d.summary.theta0);
        // rasterised area approaches the disk area
        assert!((area - PI * 25.0).abs() / (PI * 25.0) < 0.05);
    }

    #[test]
    fn potential_l2_matches_closed_form() {
        let g = grid(64);
        let l = g.side();
        let eps = 0.01;
        let mut r = InitialDataRecipe::new(RecipeKind::FromPotential, eps);
        r.potential = vec![PotentialMode {
            mx: 1,
            my: 0,
            weight: 1.0,
            phase: 0.0,
        }];
        let d = build_initial_data(&r, &g).unwrap();
        let w = 2.0 * PI / l;
        let expected = eps * eps * w * w * l * l / 2.0;
        let got = d.v0.l2().powi(2);
        assert!((got - expected).abs() <= 1e-12 * expected);
        assert!(d.v0.curl().unwrap().max_abs() <= 1e-12);
    }

    #[test]
    fn negative_density_rejected() {
        let mut r = InitialDataRecipe::new(RecipeKind::PiecewiseConstantStripes, -1.5);
        r.stripe = [0.1, 0.4];
        match build_initial_data(&r, &grid(32)) {
            Err(InitError::NegativeDensity { min }) => assert!((min + 0.5).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn p0_rejected() {
        let mut r = InitialDataRecipe::equilibrium();
        r.p0 = 4.0;
        assert!(matches!(
            build_initial_data::<f64>(&r, &grid(16)),
            Err(InitError::P0OutOfRange(_))
        ));
    }

    #[test]
    fn mollify_constant_and_limits() {
        let g = grid(32);
        let f = ScalarField::constant(&g, 2.5);
        let m = mollify(&f, 3.0).unwrap();
        assert!(m.map(|x| x - 2.5).max_abs() < 1e-13);
        assert!(mollify(&f, 0.0).is_err());
        assert!(matches!(
            mollify(&f, g.side() / 3.0),
            Err(InitError::DeltaTooLarge { .. })
        ));
    }

    #[test]
    fn mollified_jump_stays_in_range() {
        let g = grid(64);
        let r = {
            let mut r = InitialDataRecipe::new(RecipeKind::PiecewiseConstantStripes, 2.0);
            r.delta = 4.0 * g.spacing();
            r
        };
        let d = build_initial_data(&r, &g).unwrap();
        assert!(d.u0.min() >= 1.0 - 1e-12);
        assert!(d.u0.max() <= 3.0 + 1e-12);
    }

    #[test]
    fn project_examples() {
        let g = grid(32);
        let w = 2.0 * PI / g.side();
        let f = ScalarField::from_fn(&g, |x, y| (w * x).sin() * (2.0 * w * y).cos());
        let grad = f.gradient().unwrap();
        let p = project_curl_free(&grad).unwrap();
        assert!(p.zip_map(&grad, |a, b| a - b).unwrap().max_abs() < 1e-12);

        let shear = VectorField::new(
            ScalarField::from_fn(&g, |_, y| (w * y).sin()),
            ScalarField::zeros(&g),
        )
        .unwrap();
        assert!(project_curl_free(&shear).unwrap().max_abs() < 1e-13);

        let c = VectorField::constant(&g, 0.3, -0.2);
        let pc = project_curl_free(&c).unwrap();
        assert!((pc.mean().0 - 0.3).abs() < 1e-14 && (pc.mean().1 + 0.2).abs() < 1e-14);
    }

    #[test]
    fn random_disks_are_seeded() {
        let g = grid(32);
        let mut r = InitialDataRecipe::new(RecipeKind::PiecewiseConstantDisks, 0.1);
        r.random_disks = 3;
        r.random_radius = 3.0;
        r.seed = 42;
        let a = build_initial_data(&r, &g).unwrap();
        let b = build_initial_data(&r, &g).unwrap();
        assert_eq!(a.u0, b.u0);
        r.seed = 43;
        let c = build_initial_data(&r, &g).unwrap();
        assert_ne!(a.u0, c.u0);
    }
}
