//! Effective viscous flux `F = ∇u + χuv`, its structural identities, the
//! σ-weighted energy functionals and decay fitting.
//!
//! Every product of two fields goes through [`dealiased_product`], and the
//! time derivative `ũ_t` is always the assembled right-hand side
//! `Δũ + χ∇·(ũv) + χ∇·v`, never a difference quotient of snapshots.

use thiserror::Error;

use crate::field::{dealiased_product, FieldError, ScalarField, Spectrum, VectorField};
use crate::scalar::Real;

/// Curl level above which `v` is considered to violate `∇⊥·v = 0`.
pub const CURL_TOL: f64 = 1e-8;

pub const CSV_SCHEMA: &str = "chemoflux-diagnostics v1";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("Gagliardo-Nirenberg ratio undefined: gradient vanishes")]
    ConstantField,
    #[error("empty trajectory")]
    EmptyTrajectory,
    #[error("decay fit needs at least 10 samples in the window, got {0}")]
    TooFewSamples(usize),
    #[error("decay fit needs positive values, got {value} at t = {t}")]
    NonPositive { t: f64, value: f64 },
    #[error("invalid fit window [{lo}, {hi}]: need 1 <= lo < hi")]
    InvalidWindow { lo: f64, hi: f64 },
}

fn sub<T: Real>(a: &ScalarField<T>, b: &ScalarField<T>) -> Result<ScalarField<T>, FieldError> {
    a.zip_map(b, |x, y| x - y)
}

/// Spectrum of `χ∇·(ũv)` with the product dealiased.
pub fn transport_spectrum<T: Real>(
    u_pert: &ScalarField<T>,
    v: &VectorField<T>,
    chi: T,
) -> Result<Spectrum<T>, FieldError> {
    let mut d = dealiased_product(u_pert, &v.x)?.dx();
    d.add_scaled(T::one(), &dealiased_product(u_pert, &v.y)?.dy());
    Ok(d.scaled(chi))
}

/// `ũ_t = Δũ + χ∇·(ũv) + χ∇·v`, returned as a spectrum.
pub fn rhs_spectrum<T: Real>(
    u_pert: &ScalarField<T>,
    v: &VectorField<T>,
    chi: T,
) -> Result<Spectrum<T>, FieldError> {
    let mut rhs = u_pert.spectrum().laplacian();
    rhs.add_scaled(T::one(), &transport_spectrum(u_pert, v, chi)?);
    let mut div_v = v.x.spectrum().dx();
    div_v.add_scaled(T::one(), &v.y.spectrum().dy());
    rhs.add_scaled(chi, &div_v);
    Ok(rhs)
}

/// The transformed system's right-hand side `ũ_t` in physical space.
pub fn transformed_rhs<T: Real>(
    u: &ScalarField<T>,
    v: &VectorField<T>,
    chi: T,
) -> Result<ScalarField<T>, FieldError> {
    v.check()?;
    u.check_finite()?;
    let pert = u.map(|x| x - T::one());
    Ok(rhs_spectrum(&pert, v, chi)?.to_field())
}

/// `F = ∇ũ + χ(ũ+1)v`.
pub fn effective_flux<T: Real>(
    u: &ScalarField<T>,
    v: &VectorField<T>,
    chi: T,
) -> Result<VectorField<T>, FieldError> {
    v.check()?;
    u.check_finite()?;
    let pert = u.map(|x| x - T::one());
    let grad = VectorField::gradient_of(&pert.spectrum());
    let px = dealiased_product(&pert, &v.x)?.to_field();
    let py = dealiased_product(&pert, &v.y)?.to_field();
    let fx = grad.x.zip_map(&px, |g, p| g + chi * p)?;
    let fy = grad.y.zip_map(&py, |g, p| g + chi * p)?;
    Ok(VectorField {
        x: fx.zip_map(&v.x, |f, w| f + chi * w)?,
        y: fy.zip_map(&v.y, |f, w| f + chi * w)?,
    })
}

/// `‖∇·F − ũ_t‖₂`.
pub fn divergence_residual<T: Real>(
    flux: &VectorField<T>,
    rhs_ut: &ScalarField<T>,
) -> Result<T, FieldError> {
    Ok(sub(&flux.divergence()?, rhs_ut)?.l2())
}

/// `‖∇·F − ũ_t‖₂` with `F` assembled from `(u, v)`.
pub fn flux_divergence_residual<T: Real>(
    u: &ScalarField<T>,
    v: &VectorField<T>,
    chi: T,
    rhs_ut: &ScalarField<T>,
) -> Result<T, FieldError> {
    divergence_residual(&effective_flux(u, v, chi)?, rhs_ut)
}

/// `χ ∇⊥ũ·v = χ(∂₂ũ v₁ − ∂₁ũ v₂)`, dealiased.
pub fn curl_source<T: Real>(
    u: &ScalarField<T>,
    v: &VectorField<T>,
    chi: T,
) -> Result<ScalarField<T>, FieldError> {
    let grad = u.gradient()?;
    let mut s = dealiased_product(&grad.y, &v.x)?;
    s.add_scaled(-T::one(), &dealiased_product(&grad.x, &v.y)?);
    Ok(s.scaled(chi).to_field())
}

/// Residual of the curl identity and the size of its right-hand side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurlResidual<T> {
    /// `‖∇⊥·F − χ∇⊥ũ·v‖₂`.
    pub residual: T,
    /// `‖χ∇⊥ũ·v‖₂`.
    pub scale: T,
}

impl<T: Real> CurlResidual<T> {
    /// `residual / (1 + scale)`.
    pub fn relative(&self) -> T {
        self.residual / (T::one() + self.scale)
    }
}

pub fn curl_flux_residual<T: Real>(
    u: &ScalarField<T>,
    v: &VectorField<T>,
    chi: T,
) -> Result<CurlResidual<T>, FieldError> {
    let flux = effective_flux(u, v, chi)?;
    let rhs = curl_source(u, v, chi)?;
    Ok(CurlResidual {
        residual: sub(&flux.curl()?, &rhs)?.l2(),
        scale: rhs.l2(),
    })
}

/// `‖f‖²_{L⁴} / (‖f‖₂‖∇f‖₂)`.
pub fn gn_ratio<T: Real>(f: &ScalarField<T>) -> Result<T, DiagError> {
    gn_from_norms(f, f.gradient()?.l2())
}

fn gn_from_norms<T: Real>(f: &ScalarField<T>, grad: T) -> Result<T, DiagError> {
    let l2 = f.l2();
    let kmin = T::TAU() / f.grid().side();
    if grad == T::zero() || grad <= T::lit(1e-12) * l2 * kmin {
        return Err(DiagError::ConstantField);
    }
    let l4 = f.lp_norm(T::lit(4.0))?;
    Ok(l4 * l4 / (l2 * grad))
}

/// Result of auditing `‖∇F‖_p ≤ C(‖ũ_t‖_p + ‖∇⊥ũ·v‖_p)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lemma33Audit<T> {
    /// `None` when the denominator is degenerate.
    pub ratio: Option<T>,
    /// `‖∇⊥·v‖∞` exceeded [`CURL_TOL`]; the hypothesis is violated.
    pub curl_violation: bool,
}

pub fn lemma33_ratio<T: Real>(
    u: &ScalarField<T>,
    v: &VectorField<T>,
    ut: &ScalarField<T>,
    chi: T,
    p: T,
) -> Result<Lemma33Audit<T>, FieldError> {
    let flux = effective_flux(u, v, chi)?;
    let sx = flux.x.spectrum();
    let sy = flux.y.spectrum();
    let parts = [sx.dx(), sx.dy(), sy.dx(), sy.dy()].map(|s| s.to_field());
    let n = u.samples().len();
    let frob: Vec<T> = (0..n)
        .map(|i| {
            parts
                .iter()
                .fold(T::zero(), |s, f| s + f.samples()[i] * f.samples()[i])
                .sqrt()
        })
        .collect();
    let grad_f = ScalarField::from_vec(u.grid(), frob)?.lp_norm(p)?;
    let denom = ut.lp_norm(p)? + curl_source(u, v, chi)?.lp_norm(p)?;
    let curl_violation = v.curl()?.max_abs() > T::lit(CURL_TOL);
    Ok(Lemma33Audit {
        ratio: (denom > T::lit(1e-14)).then(|| grad_f / denom),
        curl_violation,
    })
}

/// Quantities entering `A1..A3` at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergySample<T> {
    pub t: T,
    /// `‖ũ‖² + ‖v‖²`.
    pub energy: T,
    /// `‖∇ũ‖²` (also `‖v_t‖²`, since `v_t = ∇ũ`).
    pub grad_u_sq: T,
    /// `‖ũ_t‖²`.
    pub ut_sq: T,
    /// `‖∇ũ_t‖²`.
    pub grad_ut_sq: T,
    /// `‖v‖⁴_{L⁴}`.
    pub v4: T,
}

pub fn sigma<T: Real>(t: T) -> T {
    t.min(T::one()).max(T::zero())
}

/// Running `A1, A2, A3` with trapezoid integrals over the samples pushed so
/// far and sups over those samples.
#[derive(Debug, Clone, Default)]
pub struct EnergyAccumulator<T: Real> {
    last: Option<EnergySample<T>>,
    sup1: T,
    int1: T,
    sup2: T,
    int2: T,
    sup3: T,
    int3: T,
}

impl<T: Real> EnergyAccumulator<T> {
    pub fn new() -> Self {
        Self {
            last: None,
            sup1: T::zero(),
            int1: T::zero(),
            sup2: T::zero(),
            int2: T::zero(),
            sup3: T::zero(),
            int3: T::zero(),
        }
    }

    pub fn push(&mut self, s: EnergySample<T>) {
        let sg = sigma(s.t);
        let sup2 = sg * s.grad_u_sq + sg * sg * (s.ut_sq + s.grad_u_sq);
        self.sup1 = self.sup1.max(s.energy);
        self.sup2 = self.sup2.max(sup2);
        self.sup3 = self.sup3.max(s.v4);
        if let Some(p) = self.last {
            let half = (s.t - p.t) * T::lit(0.5);
            let sp = sigma(p.t);
            let f2 = |sg: T, e: &EnergySample<T>| sg * e.ut_sq + sg * sg * e.grad_ut_sq;
            self.int1 += half * (p.grad_u_sq + s.grad_u_sq);
            self.int2 += half * (f2(sp, &p) + f2(sg, &s));
            self.int3 += half * (p.v4 + s.v4);
        }
        self.last = Some(s);
    }

    /// `(A1, A2, A3)`.
    pub fn values(&self) -> (T, T, T) {
        (
            self.sup1 + self.int1,
            self.sup2 + self.int2,
            self.sup3 + self.int3,
        )
    }

    /// Integral parts only.
    pub fn integrals(&self) -> (T, T, T) {
        (self.int1, self.int2, self.int3)
    }
}

/// `(A1, A2, A3)` over a recorded sequence.
pub fn energy_functionals<T: Real>(samples: &[EnergySample<T>]) -> Result<(T, T, T), DiagError> {
    if samples.is_empty() {
        return Err(DiagError::EmptyTrajectory);
    }
    let mut acc = EnergyAccumulator::new();
    for s in samples {
        acc.push(*s);
    }
    Ok(acc.values())
}

/// One row of the diagnostics CSV. Field order is the column order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRecord<T> {
    pub t: T,
    pub sigma: T,
    pub u_l2: T,
    pub grad_u_l2: T,
    pub u_linf: T,
    pub v_l2: T,
    pub v_l4: T,
    pub v_lp0: T,
    pub v_linf: T,
    pub c_linf: Option<T>,
    pub flux_l2: T,
    pub div_residual: T,
    pub curl_residual: T,
    pub a1: T,
    pub a2: T,
    pub a3: T,
    pub blowup_integral: T,
    pub gn_ratio: Option<T>,
    /// Not a CSV column: `‖ũ_t‖₂`, the scale of `div_residual`.
    pub ut_l2: T,
    /// Not a CSV column: `‖χ∇⊥ũ·v‖₂`, the scale of `curl_residual`.
    pub curl_source_l2: T,
    /// Not a CSV column: `‖∇⊥·v‖∞`.
    pub v_curl_linf: T,
}

pub const CSV_COLUMNS: [&str; 18] = [
    "t",
    "sigma",
    "u_l2",
    "grad_u_l2",
    "u_linf",
    "v_l2",
    "v_l4",
    "v_lp0",
    "v_linf",
    "c_linf",
    "flux_l2",
    "div_residual",
    "curl_residual",
    "a1",
    "a2",
    "a3",
    "blowup_integral",
    "gn_ratio",
];

impl<T: Real> DiagnosticsRecord<T> {
    pub fn csv_fields(&self) -> Vec<String> {
        let f = |x: T| format!("{x:e}");
        let o = |x: Option<T>| x.map(f).unwrap_or_default();
        vec![
            f(self.t),
            f(self.sigma),
            f(self.u_l2),
            f(self.grad_u_l2),
            f(self.u_linf),
            f(self.v_l2),
            f(self.v_l4),
            f(self.v_lp0),
            f(self.v_linf),
            o(self.c_linf),
            f(self.flux_l2),
            f(self.div_residual),
            f(self.curl_residual),
            f(self.a1),
            f(self.a2),
            f(self.a3),
            f(self.blowup_integral),
            o(self.gn_ratio),
        ]
    }

    pub fn energy(&self) -> T {
        self.u_l2 * self.u_l2 + self.v_l2 * self.v_l2
    }

    pub fn div_identity_holds(&self, tol: T) -> bool {
        self.div_residual <= tol * (T::one() + self.ut_l2)
    }

    pub fn curl_identity_holds(&self, tol: T) -> bool {
        self.curl_residual <= tol * (T::one() + self.curl_source_l2)
    }
}

/// Builds [`DiagnosticsRecord`]s and carries the running energy functionals.
#[derive(Debug, Clone)]
pub struct DiagnosticsRecorder<T: Real> {
    chi: T,
    p0: T,
    energy: EnergyAccumulator<T>,
}

impl<T: Real> DiagnosticsRecorder<T> {
    pub fn new(chi: T, p0: T) -> Self {
        Self {
            chi,
            p0,
            energy: EnergyAccumulator::new(),
        }
    }

    pub fn energies(&self) -> (T, T, T) {
        self.energy.values()
    }

    pub fn observe(
        &mut self,
        t: T,
        u: &ScalarField<T>,
        v: &VectorField<T>,
        c_linf: Option<T>,
        blowup_integral: T,
    ) -> Result<DiagnosticsRecord<T>, FieldError> {
        let chi = self.chi;
        v.check()?;
        if u.grid() != v.x.grid() {
            return Err(FieldError::GridMismatch);
        }
        // Same quantities as effective_flux / rhs_spectrum / curl_source,
        // with the spectra shared and L² norms taken by Parseval.
        let pert = u.map(|x| x - T::one());
        let pert_hat = pert.spectrum();
        let vx_hat = v.x.spectrum();
        let vy_hat = v.y.spectrum();
        let grad = VectorField::gradient_of(&pert_hat);
        let px_hat = dealiased_product(&pert, &v.x)?;
        let py_hat = dealiased_product(&pert, &v.y)?;

        let mut rhs_hat = pert_hat.laplacian();
        rhs_hat.add_scaled(chi, &px_hat.dx());
        rhs_hat.add_scaled(chi, &py_hat.dy());
        rhs_hat.add_scaled(chi, &vx_hat.dx());
        rhs_hat.add_scaled(chi, &vy_hat.dy());

        let (px, py) = (px_hat.to_field(), py_hat.to_field());
        let assemble = |g: &ScalarField<T>, p: &ScalarField<T>, w: &ScalarField<T>| {
            let mut f = g.clone();
            for ((f, &p), &w) in f.samples_mut().iter_mut().zip(p.samples()).zip(w.samples()) {
                *f += chi * p + chi * w;
            }
            f
        };
        let flux = VectorField {
            x: assemble(&grad.x, &px, &v.x),
            y: assemble(&grad.y, &py, &v.y),
        };
        let fx_hat = flux.x.spectrum();
        let fy_hat = flux.y.spectrum();

        let mut div_err = fx_hat.dx();
        div_err.add_scaled(T::one(), &fy_hat.dy());
        div_err.add_scaled(-T::one(), &rhs_hat);
        let div_residual = div_err.l2();

        let mut source = dealiased_product(&grad.y, &v.x)?;
        source.add_scaled(-T::one(), &dealiased_product(&grad.x, &v.y)?);
        let source = source.scaled(chi);
        let mut curl_err = fx_hat.dy();
        curl_err.add_scaled(-T::one(), &fy_hat.dx());
        curl_err.add_scaled(-T::one(), &source);
        let curl_residual = curl_err.l2();

        let mut v_curl = vx_hat.dy();
        v_curl.add_scaled(-T::one(), &vy_hat.dx());

        let u_l2 = pert.l2();
        let grad_u_l2 = grad.l2();
        let v_l2 = v.l2();
        let v_l4 = v.lp_norm(T::lit(4.0))?;
        let ut_l2 = rhs_hat.l2();
        let grad_ut_l2 = rhs_hat.dx().l2().hypot(rhs_hat.dy().l2());
        let sq = |x: T| x * x;
        self.energy.push(EnergySample {
            t,
            energy: sq(u_l2) + sq(v_l2),
            grad_u_sq: sq(grad_u_l2),
            ut_sq: sq(ut_l2),
            grad_ut_sq: sq(grad_ut_l2),
            v4: sq(sq(v_l4)),
        });
        let (a1, a2, a3) = self.energy.values();
        Ok(DiagnosticsRecord {
            t,
            sigma: sigma(t),
            u_l2,
            grad_u_l2,
            u_linf: pert.max_abs(),
            v_l2,
            v_l4,
            v_lp0: v.lp_norm(self.p0)?,
            v_linf: v.max_abs(),
            c_linf,
            flux_l2: flux.l2(),
            div_residual,
            curl_residual,
            a1,
            a2,
            a3,
            blowup_integral,
            gn_ratio: gn_from_norms(&pert, grad_u_l2).ok(),
            ut_l2,
            curl_source_l2: source.l2(),
            v_curl_linf: v_curl.to_field().max_abs(),
        })
    }
}

/// Log-linear least-squares fit `value ≈ prefactor · e^{−rate·t}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    pub quantity: String,
    pub window: (f64, f64),
    pub rate: f64,
    pub prefactor: f64,
    /// Root-mean-square residual of `ln value`.
    pub residual: f64,
    pub samples: usize,
}

pub fn fit_decay(
    quantity: &str,
    series: &[(f64, f64)],
    window: (f64, f64),
) -> Result<DecayFit, DiagError> {
    let (lo, hi) = window;
    if !(lo >= 1.0 && hi > lo) {
        return Err(DiagError::InvalidWindow { lo, hi });
    }
    let pts: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|&(t, _)| t >= lo && t <= hi)
        .collect();
    if pts.len() < 10 {
        return Err(DiagError::TooFewSamples(pts.len()));
    }
    if let Some(&(t, value)) = pts.iter().find(|&&(_, y)| !(y > 0.0)) {
        return Err(DiagError::NonPositive { t, value });
    }
    let n = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = pts.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(t, y) in &pts {
        sxy += (t - tm) * (y.ln() - ym);
        sxx += (t - tm) * (t - tm);
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * tm;
    let ss: f64 = pts
        .iter()
        .map(|&(t, y)| (y.ln() - intercept - slope * t).powi(2))
        .sum();
    Ok(DecayFit {
        quantity: quantity.to_string(),
        window,
        rate: -slope,
        prefactor: intercept.exp(),
        residual: (ss / n).sqrt(),
        samples: pts.len(),
    })
}

/// `sup_{t≥1} ‖u−1‖∞ ≤ 1/4` over the recorded instants.
pub fn late_perturbation_bounded<T: Real>(records: &[DiagnosticsRecord<T>]) -> bool {
    records
        .iter()
        .filter(|r| r.t >= T::one())
        .all(|r| r.u_linf <= T::lit(0.25))
}

/// Per-interval excess of the discrete energy balance
/// `ΔE + 2∫‖∇ũ‖² − C∫‖ũ‖²‖v‖⁴_{L⁴}` (trapezoid on the records).
pub fn energy_balance_excess<T: Real>(records: &[DiagnosticsRecord<T>], c: T) -> Vec<T> {
    let half = T::lit(0.5);
    records
        .windows(2)
        .map(|w| {
            let (a, b) = (&w[0], &w[1]);
            let dt = b.t - a.t;
            let diss = half * dt * (a.grad_u_l2.powi(2) + b.grad_u_l2.powi(2));
            let src = |r: &DiagnosticsRecord<T>| r.u_l2.powi(2) * r.v_l4.powi(4);
            let forcing = half * dt * (src(a) + src(b));
            b.energy() - a.energy() + T::lit(2.0) * diss - c * forcing
        })
        .collect()
}

/// Smallest `C` for which [`energy_balance_excess`] is nonpositive on every
/// interval (up to `slack`). Infinite if an interval has no forcing to absorb
/// a positive excess.
pub fn fit_energy_constant<T: Real>(records: &[DiagnosticsRecord<T>], slack: T) -> T {
    let base = energy_balance_excess(records, T::zero());
    let unit = energy_balance_excess(records, T::one());
    base.iter()
        .zip(&unit)
        .fold(T::zero(), |c, (&b, &u)| {
            let forcing = b - u;
            if b <= slack {
                c
            } else if forcing > T::zero() {
                c.max((b - slack) / forcing)
            } else {
                T::infinity()
            }
        })
}

/// Indices of intervals violating the balance with constant `c`.
pub fn energy_violations<T: Real>(
    records: &[DiagnosticsRecord<T>],
    c: T,
    slack: T,
) -> Vec<usize> {
    energy_balance_excess(records, c)
        .into_iter()
        .enumerate()
        .filter(|&(_, e)| e > slack)
        .map(|(i, _)| i)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grid;
    use std::f64::consts::PI;

    fn grid(n: usize) -> Grid<f64> {
        Grid::new(16.0 * PI, n).unwrap()
    }

    #[test]
    fn flux_examples() {
        let g = grid(32);
        let one = ScalarField::constant(&g, 1.0);
        let f = effective_flux(&one, &VectorField::zeros(&g), 1.0).unwrap();
        assert_eq!(f.max_abs(), 0.0);

        let w = 2.0 * PI / g.side();
        let phi = ScalarField::from_fn(&g, |x, y| 0.1 * (w * x).sin() * (w * y).cos());
        let v = phi.gradient().unwrap();
        let f = effective_flux(&one, &v, 1.0).unwrap();
        assert!(f.zip_map(&v, |a, b| a - b).unwrap().max_abs() < 1e-15);

        let u = ScalarField::from_fn(&g, |x, _| 1.0 + 0.2 * (w * x).cos());
        let f = effective_flux(&u, &v, 0.0).unwrap();
        let grad = u.gradient().unwrap();
        assert!(f.zip_map(&grad, |a, b| a - b).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn gn_ratio_single_mode_closed_form() {
        // ‖sin‖²_{L⁴} = L·sqrt(3/8), ‖sin‖₂ = L/sqrt2, ‖∇sin‖₂ = w·L/sqrt2
        for n in [16, 64] {
            let g = grid(n);
            let w = 2.0 * PI / g.side();
            let f = ScalarField::from_fn(&g, |x, _| (w * x).sin());
            let r = gn_ratio(&f).unwrap();
            let expected = (3.0f64 / 8.0).sqrt() / PI;
            assert!((r - expected).abs() < 1e-12, "{r} vs {expected}");
            assert!((gn_ratio(&f.scaled(-37.0)).unwrap() - r).abs() < 1e-12);
        }
        assert_eq!(
            gn_ratio(&ScalarField::constant(&grid(16), 3.0)),
            Err(DiagError::ConstantField)
        );
        assert_eq!(
            gn_ratio(&ScalarField::zeros(&grid(16))),
            Err(DiagError::ConstantField)
        );
    }

    #[test]
    fn energy_functionals_of_frozen_and_equilibrium() {
        assert_eq!(
            energy_functionals::<f64>(&[]),
            Err(DiagError::EmptyTrajectory)
        );
        let zero = EnergySample {
            t: 0.0,
            energy: 0.0,
            grad_u_sq: 0.0,
            ut_sq: 0.0,
            grad_ut_sq: 0.0,
            v4: 0.0,
        };
        let eq: Vec<_> = (0..5).map(|k| EnergySample { t: k as f64, ..zero }).collect();
        assert_eq!(energy_functionals(&eq).unwrap(), (0.0, 0.0, 0.0));
        let frozen = EnergySample {
            energy: 0.37,
            grad_u_sq: 2.0,
            ..zero
        };
        let (a1, a2, _) = energy_functionals(&[frozen]).unwrap();
        assert_eq!(a1, 0.37);
        // σ(0) = 0 removes every weighted term
        assert_eq!(a2, 0.0);
    }

    #[test]
    fn accumulator_integrals_are_trapezoid() {
        let mut acc = EnergyAccumulator::new();
        for k in 0..=4 {
            let t = 0.5 * k as f64;
            acc.push(EnergySample {
                t,
                energy: 1.0,
                grad_u_sq: t,
                ut_sq: 0.0,
                grad_ut_sq: 0.0,
                v4: 1.0,
            });
        }
        let (i1, _, i3) = acc.integrals();
        assert!((i1 - 2.0).abs() < 1e-15);
        assert!((i3 - 2.0).abs() < 1e-15);
    }

    #[test]
    fn fit_decay_examples() {
        let series: Vec<(f64, f64)> = (0..40)
            .map(|k| {
                let t = 1.0 + 0.5 * k as f64;
                (t, 2.0 * (-0.9 * t).exp())
            })
            .collect();
        let fit = fit_decay("x", &series, (1.0, 20.0)).unwrap();
        assert!((fit.rate - 0.9).abs() < 1e-10);
        assert!((fit.prefactor - 2.0).abs() < 1e-9);
        assert!(fit.residual < 1e-10);

        let flat: Vec<(f64, f64)> = (0..20).map(|k| (1.0 + k as f64, 3.0)).collect();
        assert!(fit_decay("x", &flat, (1.0, 30.0)).unwrap().rate.abs() < 1e-14);

        assert!(matches!(
            fit_decay("x", &flat, (0.5, 30.0)),
            Err(DiagError::InvalidWindow { .. })
        ));
        assert!(matches!(
            fit_decay("x", &flat, (1.0, 5.0)),
            Err(DiagError::TooFewSamples(5))
        ));
        let mut bad = flat.clone();
        bad[3].1 = 0.0;
        assert!(matches!(
            fit_decay("x", &bad, (1.0, 30.0)),
            Err(DiagError::NonPositive { .. })
        ));
    }

    #[test]
    fn recorder_matches_standalone_functions() {
        let g = grid(32);
        let w = 2.0 * PI / g.side();
        let u = ScalarField::from_fn(&g, |x, y| 1.0 + 0.3 * (w * x).sin() * (2.0 * w * y).cos());
        let phi = ScalarField::from_fn(&g, |x, y| 0.2 * (w * x + 0.4).cos() + 0.1 * (w * y).sin());
        let v = phi.gradient().unwrap();
        let chi = 1.7;
        let rec = DiagnosticsRecorder::new(chi, 6.0)
            .observe(0.5, &u, &v, None, 0.0)
            .unwrap();
        let ut = transformed_rhs(&u, &v, chi).unwrap();
        assert!((rec.ut_l2 - ut.l2()).abs() < 1e-12 * ut.l2());
        let div = flux_divergence_residual(&u, &v, chi, &ut).unwrap();
        assert!((rec.div_residual - div).abs() < 1e-12);
        let curl = curl_flux_residual(&u, &v, chi).unwrap();
        assert!((rec.curl_residual - curl.residual).abs() < 1e-12);
        assert!((rec.curl_source_l2 - curl.scale).abs() < 1e-12 * curl.scale);
        let flux = effective_flux(&u, &v, chi).unwrap();
        assert!((rec.flux_l2 - flux.l2()).abs() < 1e-12 * flux.l2());
        let gn = gn_ratio(&u.map(|x| x - 1.0)).unwrap();
        assert!((rec.gn_ratio.unwrap() - gn).abs() < 1e-12);
        assert!(rec.v_curl_linf < 1e-13);
    }

    #[test]
    fn lemma33_degenerate_at_equilibrium() {
        let g = grid(32);
        let one = ScalarField::constant(&g, 1.0);
        let zero = ScalarField::zeros(&g);
        let a = lemma33_ratio(&one, &VectorField::zeros(&g), &zero, 1.0, 2.0).unwrap();
        assert_eq!(a.ratio, None);
        assert!(!a.curl_violation);
    }

    #[test]
    fn sigma_clamps() {
        assert_eq!(sigma(0.3), 0.3);
        assert_eq!(sigma(7.0), 1.0);
        assert_eq!(sigma(0.0), 0.0);
    }
}
