//! Cole-Hopf layer: `v = −(1/μ)∇ln c` and the chemical ODE `c_t = −μuc`.

use thiserror::Error;

use crate::field::{FieldError, ScalarField, VectorField};
use crate::scalar::Real;

/// Concentrations at or below this are treated as extinct.
pub const C_FLOOR: f64 = 1e-300;

pub fn c_floor<T: Real>() -> T {
    T::lit(C_FLOOR).max(T::min_positive_value())
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChemError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("chemical extinct at sample {index} (x = {x}, y = {y}): c = {value}")]
    Extinction {
        index: usize,
        x: f64,
        y: f64,
        value: f64,
    },
    #[error("time step must be positive, got {0}")]
    InvalidStep(f64),
    #[error("empty u history")]
    EmptyHistory,
    #[error("invalid chemistry parameters: {0}")]
    InvalidParams(String),
}

/// `χ = μξ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChemistryParams<T: Real> {
    pub chi: T,
    pub mu: T,
    pub xi: T,
}

impl<T: Real> Default for ChemistryParams<T> {
    fn default() -> Self {
        Self {
            chi: T::one(),
            mu: T::one(),
            xi: T::one(),
        }
    }
}

impl<T: Real> ChemistryParams<T> {
    pub fn new(mu: T, xi: T) -> Result<Self, ChemError> {
        let p = Self {
            chi: mu * xi,
            mu,
            xi,
        };
        p.validate()?;
        Ok(p)
    }

    /// Chemotactic coupling set directly; `xi` is derived.
    pub fn with_chi(chi: T, mu: T) -> Result<Self, ChemError> {
        Self::new(mu, chi / mu)
    }

    pub fn validate(&self) -> Result<(), ChemError> {
        let positive = |x: T| x > T::zero() && x.is_finite();
        if !positive(self.mu) || !(self.xi >= T::zero()) || !self.xi.is_finite() {
            return Err(ChemError::InvalidParams(format!(
                "need mu > 0 and xi >= 0 (got chi={}, mu={}, xi={})",
                self.chi, self.mu, self.xi
            )));
        }
        let prod = self.mu * self.xi;
        if (self.chi - prod).abs() > T::lit(1e-14) * prod.abs().max(T::one()) {
            return Err(ChemError::InvalidParams(format!(
                "chi = {} differs from mu*xi = {}",
                self.chi, prod
            )));
        }
        Ok(())
    }
}

fn extinction<T: Real>(c: &ScalarField<T>, index: usize) -> ChemError {
    let n = c.grid().n();
    ChemError::Extinction {
        index,
        x: c.grid().coordinate(index % n).to_f64_lossy(),
        y: c.grid().coordinate(index / n).to_f64_lossy(),
        value: c.samples()[index].to_f64_lossy(),
    }
}

/// First sample at or below the floor, if any.
pub fn check_chemical<T: Real>(c: &ScalarField<T>) -> Result<(), ChemError> {
    let floor = c_floor::<T>();
    match c.samples().iter().position(|&x| !(x > floor)) {
        Some(i) => Err(extinction(c, i)),
        None => Ok(()),
    }
}

pub fn forward_transform<T: Real>(
    c: &ScalarField<T>,
    params: &ChemistryParams<T>,
) -> Result<VectorField<T>, ChemError> {
    check_chemical(c)?;
    let log_c = c.map(|x| x.ln());
    let s = log_c.spectrum().scaled(-T::one() / params.mu);
    Ok(VectorField::gradient_of(&s))
}

/// Exact exponential update over `dt` with `u` frozen at the midpoint of the
/// supplied endpoint values (or the left value when only one is given).
pub fn c_step<T: Real>(
    c: &ScalarField<T>,
    u_left: &ScalarField<T>,
    u_right: Option<&ScalarField<T>>,
    mu: T,
    dt: T,
) -> Result<ScalarField<T>, ChemError> {
    if !(dt > T::zero()) || !dt.is_finite() {
        return Err(ChemError::InvalidStep(dt.to_f64_lossy()));
    }
    if c.grid() != u_left.grid() || u_right.is_some_and(|u| u.grid() != c.grid()) {
        return Err(FieldError::GridMismatch.into());
    }
    if let Some(i) = c.samples().iter().position(|&x| !(x > T::zero())) {
        return Err(extinction(c, i));
    }
    let half = T::lit(0.5);
    let mut out = c.clone();
    let ul = u_left.samples();
    match u_right {
        Some(ur) => {
            for ((o, &a), &b) in out.samples_mut().iter_mut().zip(ul).zip(ur.samples()) {
                *o *= (-mu * half * (a + b) * dt).exp();
            }
        }
        None => {
            for (o, &a) in out.samples_mut().iter_mut().zip(ul) {
                *o *= (-mu * a * dt).exp();
            }
        }
    }
    Ok(out)
}

/// Running trapezoid `∫u dτ` per grid point.
#[derive(Debug, Clone)]
pub struct ExposureIntegral<T: Real> {
    integral: Vec<T>,
    last: Option<(T, ScalarField<T>)>,
}

impl<T: Real> ExposureIntegral<T> {
    pub fn new() -> Self {
        Self {
            integral: Vec::new(),
            last: None,
        }
    }

    pub fn push(&mut self, t: T, u: &ScalarField<T>) {
        match &self.last {
            None => self.integral = vec![T::zero(); u.samples().len()],
            Some((t0, u0)) => {
                let w = (t - *t0) * T::lit(0.5);
                for ((acc, &a), &b) in self
                    .integral
                    .iter_mut()
                    .zip(u0.samples())
                    .zip(u.samples())
                {
                    *acc += w * (a + b);
                }
            }
        }
        self.last = Some((t, u.clone()));
    }

    pub fn is_empty(&self) -> bool {
        self.last.is_none()
    }

    pub fn values(&self) -> &[T] {
        &self.integral
    }

    /// `c₀ · exp(−μ ∫u)`.
    pub fn chemical(&self, c0: &ScalarField<T>, mu: T) -> Result<ScalarField<T>, ChemError> {
        if self.last.is_none() {
            return Err(ChemError::EmptyHistory);
        }
        let mut c = c0.clone();
        for (x, &i) in c.samples_mut().iter_mut().zip(&self.integral) {
            *x *= (-mu * i).exp();
        }
        Ok(c)
    }
}

impl<T: Real> ExposureIntegral<T> {
    /// `max c₀ · exp(−μ ∫u)` without building the field.
    pub fn chemical_max(&self, c0: &ScalarField<T>, mu: T) -> Result<T, ChemError> {
        if self.last.is_none() {
            return Err(ChemError::EmptyHistory);
        }
        Ok(c0
            .samples()
            .iter()
            .zip(&self.integral)
            .fold(T::zero(), |m, (&c, &i)| m.max((c * (-mu * i).exp()).abs())))
    }
}

impl<T: Real> Default for ExposureIntegral<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// `c(T) = c₀ · exp(−μ ∫₀ᵀ u dτ)` with the trapezoid rule on the history.
pub fn reconstruct_c<'a, T: Real>(
    history: impl IntoIterator<Item = (T, &'a ScalarField<T>)>,
    c0: &ScalarField<T>,
    mu: T,
) -> Result<ScalarField<T>, ChemError> {
    if let Some(i) = c0.samples().iter().position(|&x| !(x > T::zero())) {
        return Err(extinction(c0, i));
    }
    let mut acc = ExposureIntegral::new();
    for (t, u) in history {
        if u.grid() != c0.grid() {
            return Err(FieldError::GridMismatch.into());
        }
        acc.push(t, u);
    }
    acc.chemical(c0, mu)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grid;
    use std::f64::consts::PI;

    fn grid() -> Grid<f64> {
        Grid::new(16.0 * PI, 32).unwrap()
    }

    #[test]
    fn params() {
        let p = ChemistryParams::<f64>::default();
        assert_eq!(p.chi, 1.0);
        assert!(p.validate().is_ok());
        let bad = ChemistryParams {
            chi: 2.0,
            mu: 1.0,
            xi: 1.0,
        };
        assert!(bad.validate().is_err());
        assert!(ChemistryParams::new(0.0, 1.0).is_err());
        assert!(ChemistryParams::new(1.0, -1.0).is_err());
        assert_eq!(ChemistryParams::new(1.0, 0.0).unwrap().chi, 0.0);
        let q = ChemistryParams::<f64>::with_chi(3.0, 2.0).unwrap();
        assert!((q.xi - 1.5).abs() < 1e-15);
    }

    #[test]
    fn constant_chemical_has_no_velocity() {
        let g = grid();
        let v = forward_transform(&ScalarField::constant(&g, 3.0), &ChemistryParams::default())
            .unwrap();
        assert!(v.max_abs() < 1e-14);
    }

    #[test]
    fn exp_sine_chemical() {
        let g = grid();
        let w = 2.0 * PI / g.side();
        let c = ScalarField::from_fn(&g, |x, _| (w * x).sin().exp());
        let v = forward_transform(&c, &ChemistryParams::default()).unwrap();
        let exact = ScalarField::from_fn(&g, |x, _| -w * (w * x).cos());
        assert!(v.x.zip_map(&exact, |a, b| a - b).unwrap().max_abs() < 1e-12);
        assert!(v.curl().unwrap().max_abs() < 1e-12);

        let v2 = forward_transform(&c, &ChemistryParams::new(2.0, 0.5).unwrap()).unwrap();
        let half = v.scaled(0.5);
        assert!(v2.zip_map(&half, |a, b| a - b).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn extinct_chemical_rejected_with_location() {
        let g = grid();
        let mut c = ScalarField::constant(&g, 1.0);
        c.samples_mut()[33] = 0.0;
        match forward_transform(&c, &ChemistryParams::default()) {
            Err(ChemError::Extinction { index, x, y, .. }) => {
                assert_eq!(index, 33);
                assert!((x - g.spacing()).abs() < 1e-12);
                assert!((y - g.spacing()).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn c_step_examples() {
        let g = grid();
        let c = ScalarField::constant(&g, 2.0);
        let u = ScalarField::constant(&g, 1.0);
        let out = c_step(&c, &u, None, 1.0, 0.5).unwrap();
        assert!(out.map(|x| x - 2.0 * (-0.5f64).exp()).max_abs() < 1e-15);
        let zero = ScalarField::zeros(&g);
        assert_eq!(c_step(&c, &zero, None, 1.0, 0.5).unwrap(), c);
        assert!(c_step(&c, &u, None, 1.0, 0.0).is_err());
        assert!(c_step(&c, &u, None, 1.0, -1.0).is_err());
    }

    #[test]
    fn reconstruct_constant_history() {
        let g = grid();
        let c0 = ScalarField::from_fn(&g, |x, _| 1.0 + 0.1 * x.sin().abs());
        let one = ScalarField::constant(&g, 1.0);
        let hist: Vec<(f64, &ScalarField<f64>)> =
            (0..=20).map(|k| (0.1 * k as f64, &one)).collect();
        let c = reconstruct_c(hist, &c0, 1.0).unwrap();
        let exact = c0.scaled((-2.0f64).exp());
        let mut acc = ExposureIntegral::new();
        for k in 0..=20 {
            acc.push(0.1 * k as f64, &one);
        }
        let max = acc.chemical_max(&c0, 1.0).unwrap();
        assert!((max - exact.max()).abs() < 1e-14);
        assert!(c.zip_map(&exact, |a, b| (a - b) / b).unwrap().max_abs() < 1e-13);
        let empty: Vec<(f64, &ScalarField<f64>)> = Vec::new();
        assert_eq!(reconstruct_c(empty, &c0, 1.0), Err(ChemError::EmptyHistory));
    }
}
