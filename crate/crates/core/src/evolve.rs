//! Time integration of the transformed system
//!
//! ```text
//! u_t − χ∇·(uv) = Δu,    v_t − ∇u = 0
//! ```
//!
//! and of the original PDE-ODE system `u_t = Δu − ξ∇·(u∇ln c)`, `c_t = −μuc`.
//!
//! Transformed mode treats the linear part (diffusion plus the `χ∇·v` half of
//! the transport and the `v_t = ∇u` coupling) implicitly and the quadratic
//! `χ∇·(ũv)` explicitly. Because `v` is advanced by the trapezoid of `∇u`,
//! eliminating `v^{n+1}` collapses the implicit stage into one Helmholtz solve
//! per stage:
//!
//! ```text
//! (I − aΔ) u^{n+1} = (I + bΔ) u^n + χ dt ∇·v^n + dt N
//!   imex_cn: a = b = dt/2 + χ dt²/4,  N = Heun average of χ∇·(ũv)
//!   imex_be: a = dt + χ dt²/2, b = χ dt²/2, N = χ∇·(ũ^n v^n)
//! ```
//!
//! Original mode is Strang split around the exact chemical update. The
//! `u`-substep with `c` frozen uses an implicit (imex_be) or exponential
//! (imex_cn, ETD2RK) treatment of diffusion and explicit drift.

use thiserror::Error;

use crate::cole_hopf::{self, c_step, ChemError, ChemistryParams, ExposureIntegral};
use crate::field::{FieldError, ScalarField, Spectrum, VectorField};
use crate::flux_diag::{transport_spectrum, DiagnosticsRecord, DiagnosticsRecorder};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Transformed,
    Original,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Companion<T: Real> {
    /// `v` of the transformed system.
    Velocity(VectorField<T>),
    /// `c` of the original system.
    Chemical(ScalarField<T>),
}

/// `(u, v, t)` or `(u, c, t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState<T: Real> {
    pub t: T,
    pub u: ScalarField<T>,
    pub companion: Companion<T>,
}

impl<T: Real> SimState<T> {
    pub fn transformed(u: ScalarField<T>, v: VectorField<T>) -> Self {
        Self {
            t: T::zero(),
            u,
            companion: Companion::Velocity(v),
        }
    }

    pub fn original(u: ScalarField<T>, c: ScalarField<T>) -> Self {
        Self {
            t: T::zero(),
            u,
            companion: Companion::Chemical(c),
        }
    }

    pub fn mode(&self) -> Mode {
        match self.companion {
            Companion::Velocity(_) => Mode::Transformed,
            Companion::Chemical(_) => Mode::Original,
        }
    }

    pub fn velocity(&self) -> Option<&VectorField<T>> {
        match &self.companion {
            Companion::Velocity(v) => Some(v),
            Companion::Chemical(_) => None,
        }
    }

    pub fn chemical(&self) -> Option<&ScalarField<T>> {
        match &self.companion {
            Companion::Chemical(c) => Some(c),
            Companion::Velocity(_) => None,
        }
    }

    /// `v` in transformed mode, `−(1/μ)∇ln c` (band-limited) in original mode.
    pub fn effective_velocity(
        &self,
        params: &ChemistryParams<T>,
    ) -> Result<VectorField<T>, StepError> {
        match &self.companion {
            Companion::Velocity(v) => Ok(v.clone()),
            Companion::Chemical(c) => Ok(VectorField::gradient_of(&drift_potential(c, params)?)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    ImexBe,
    ImexCn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DtMode {
    Fixed,
    Cfl,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepperConfig<T> {
    /// Fixed step, or the cap in CFL mode.
    pub dt: T,
    pub dt_mode: DtMode,
    pub cfl_number: T,
    pub scheme: Scheme,
    pub t_end: T,
    pub record_every: usize,
}

impl<T: Real> StepperConfig<T> {
    pub fn fixed(dt: T, t_end: T, scheme: Scheme) -> Self {
        Self {
            dt,
            dt_mode: DtMode::Fixed,
            cfl_number: T::lit(0.5),
            scheme,
            t_end,
            record_every: 1,
        }
    }

    pub fn validate(&self) -> Result<(), StepError> {
        let bad = |m: String| Err(StepError::InvalidConfig(m));
        if !(self.dt > T::zero()) || !self.dt.is_finite() {
            return bad(format!("stepper.dt must be positive, got {}", self.dt));
        }
        if !(self.t_end >= T::zero()) || !self.t_end.is_finite() {
            return bad(format!("stepper.t_end must be >= 0, got {}", self.t_end));
        }
        if self.t_end > T::zero() && self.dt > self.t_end {
            return bad(format!(
                "stepper.dt = {} exceeds stepper.t_end = {}",
                self.dt, self.t_end
            ));
        }
        if !(self.cfl_number > T::zero() && self.cfl_number <= T::one()) {
            return bad(format!(
                "stepper.cfl_number must lie in (0, 1], got {}",
                self.cfl_number
            ));
        }
        if self.record_every == 0 {
            return bad("stepper.record_every must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StepError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Chem(#[from] ChemError),
    #[error("state mode does not match the stepper")]
    ModeMismatch,
    #[error("invalid stepper configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite value in the solution at t = {t}")]
    NonFinite { t: f64 },
}

/// Spectrum of `−(1/μ) ln c`, band-limited; its gradient is the drift velocity.
fn drift_potential<T: Real>(
    c: &ScalarField<T>,
    params: &ChemistryParams<T>,
) -> Result<Spectrum<T>, ChemError> {
    cole_hopf::check_chemical(c)?;
    let mut s = c.map(|x| x.ln()).spectrum().scaled(-T::one() / params.mu);
    s.band_limit();
    Ok(s)
}

fn div_spectrum<T: Real>(vx: &Spectrum<T>, vy: &Spectrum<T>) -> Spectrum<T> {
    let mut d = vx.dx();
    d.add_scaled(T::one(), &vy.dy());
    d
}

fn finite_or_halt<T: Real>(t: T, fields: &[&ScalarField<T>]) -> Result<(), StepError> {
    if fields.iter().all(|f| f.samples().iter().all(|x| x.is_finite())) {
        Ok(())
    } else {
        Err(StepError::NonFinite { t: t.to_f64_lossy() })
    }
}

/// One IMEX step of the transformed system.
pub fn step_transformed<T: Real>(
    state: &SimState<T>,
    dt: T,
    scheme: Scheme,
    params: &ChemistryParams<T>,
) -> Result<SimState<T>, StepError> {
    let v = state.velocity().ok_or(StepError::ModeMismatch)?;
    if !(dt > T::zero()) {
        return Err(StepError::InvalidConfig(format!("dt must be positive, got {dt}")));
    }
    let chi = params.chi;
    let half = T::lit(0.5);
    let u_hat = state.u.spectrum();
    let vx_hat = v.x.spectrum();
    let vy_hat = v.y.spectrum();
    let pert = state.u.map(|x| x - T::one());
    let n0 = transport_spectrum(&pert, v, chi)?;

    let (a, b) = match scheme {
        Scheme::ImexCn => {
            let a = dt * half + chi * dt * dt * T::lit(0.25);
            (a, a)
        }
        Scheme::ImexBe => (dt + chi * dt * dt * half, chi * dt * dt * half),
    };
    let mut base = u_hat.clone();
    base.add_scaled(b, &u_hat.laplacian());
    base.add_scaled(chi * dt, &div_spectrum(&vx_hat, &vy_hat));

    let advance_v = |u_new: &Spectrum<T>| {
        let mut sum = u_hat.clone();
        sum.add_scaled(T::one(), u_new);
        let mut wx = vx_hat.clone();
        wx.add_scaled(dt * half, &sum.dx());
        let mut wy = vy_hat.clone();
        wy.add_scaled(dt * half, &sum.dy());
        VectorField {
            x: wx.to_field(),
            y: wy.to_field(),
        }
    };

    let u_new_hat = match scheme {
        Scheme::ImexBe => {
            let mut rhs = base;
            rhs.add_scaled(dt, &n0);
            rhs.helmholtz_inverse(a)
        }
        Scheme::ImexCn => {
            let mut pred = base.clone();
            pred.add_scaled(dt, &n0);
            let u_star_hat = pred.helmholtz_inverse(a);
            let u_star = u_star_hat.to_field();
            let v_star = advance_v(&u_star_hat);
            finite_or_halt(state.t + dt, &[&u_star, &v_star.x, &v_star.y])?;
            let n1 = transport_spectrum(&u_star.map(|x| x - T::one()), &v_star, chi)?;
            let mut corr = base;
            corr.add_scaled(dt * half, &n0);
            corr.add_scaled(dt * half, &n1);
            corr.helmholtz_inverse(a)
        }
    };
    let u_new = u_new_hat.to_field();
    let v_new = advance_v(&u_new_hat);
    let t = state.t + dt;
    finite_or_halt(t, &[&u_new, &v_new.x, &v_new.y])?;
    Ok(SimState {
        t,
        u: u_new,
        companion: Companion::Velocity(v_new),
    })
}

/// `φ₁(z) = (eᶻ−1)/z`, `φ₂(z) = (eᶻ−1−z)/z²`.
fn phi_functions<T: Real>(z: T) -> (T, T) {
    if z.abs() < T::lit(1e-3) {
        let (c2, c6, c24, c120) = (T::lit(0.5), T::lit(1.0 / 6.0), T::lit(1.0 / 24.0), T::lit(1.0 / 120.0));
        let phi1 = T::one() + z * (c2 + z * (c6 + z * c24));
        let phi2 = c2 + z * (c6 + z * (c24 + z * c120));
        (phi1, phi2)
    } else {
        let em1 = z.exp_m1();
        (em1 / z, (em1 - z) / (z * z))
    }
}

/// Strang step of the original system: half chemical step, full `u` step
/// with `c` frozen, half chemical step.
pub fn step_original<T: Real>(
    state: &SimState<T>,
    dt: T,
    scheme: Scheme,
    params: &ChemistryParams<T>,
) -> Result<SimState<T>, StepError> {
    let c = state.chemical().ok_or(StepError::ModeMismatch)?;
    if !(dt > T::zero()) {
        return Err(StepError::InvalidConfig(format!("dt must be positive, got {dt}")));
    }
    let chi = params.chi;
    let half = T::lit(0.5);
    let c_half = c_step(c, &state.u, None, params.mu, dt * half)?;
    let phi = drift_potential(&c_half, params)?;
    let w = VectorField::gradient_of(&phi);
    // forcing χ∇·w is constant over the substep
    let forcing = phi.laplacian().scaled(chi);
    let drift = |u: &ScalarField<T>| transport_spectrum(&u.map(|x| x - T::one()), &w, chi);

    let u_hat = state.u.spectrum();
    let m0 = drift(&state.u)?;
    let u_new_hat = match scheme {
        Scheme::ImexBe => {
            let mut rhs = u_hat;
            rhs.add_scaled(dt, &forcing);
            rhs.add_scaled(dt, &m0);
            rhs.helmholtz_inverse(dt)
        }
        Scheme::ImexCn => {
            let mut g0 = forcing.clone();
            g0.add_scaled(T::one(), &m0);
            let mut stage = u_hat.map_modes(|_, _, k2| {
                let z = -k2 * dt;
                rustfft::num_complex::Complex::new(z.exp(), T::zero())
            });
            stage.add_scaled(
                dt,
                &g0.map_modes(|_, _, k2| {
                    rustfft::num_complex::Complex::new(phi_functions(-k2 * dt).0, T::zero())
                }),
            );
            let a = stage.to_field();
            finite_or_halt(state.t + dt, &[&a])?;
            let mut dm = drift(&a)?;
            dm.add_scaled(-T::one(), &m0);
            stage.add_scaled(
                dt,
                &dm.map_modes(|_, _, k2| {
                    rustfft::num_complex::Complex::new(phi_functions(-k2 * dt).1, T::zero())
                }),
            );
            stage
        }
    };
    let u_new = u_new_hat.to_field();
    let t = state.t + dt;
    finite_or_halt(t, &[&u_new])?;
    let c_new = c_step(&c_half, &u_new, None, params.mu, dt * half)?;
    cole_hopf::check_chemical(&c_new)?;
    Ok(SimState {
        t,
        u: u_new,
        companion: Companion::Chemical(c_new),
    })
}

pub fn step<T: Real>(
    state: &SimState<T>,
    dt: T,
    scheme: Scheme,
    params: &ChemistryParams<T>,
) -> Result<SimState<T>, StepError> {
    match state.mode() {
        Mode::Transformed => step_transformed(state, dt, scheme, params),
        Mode::Original => step_original(state, dt, scheme, params),
    }
}

/// `dt = cfl·h / max(1e−12, χ‖v‖∞ + h‖∇u‖∞)`, capped by `cfg.dt`.
pub fn choose_dt<T: Real>(
    state: &SimState<T>,
    cfg: &StepperConfig<T>,
    params: &ChemistryParams<T>,
) -> Result<T, StepError> {
    let h = state.u.grid().spacing();
    let v = state.effective_velocity(params)?;
    let grad = state.u.gradient()?;
    let speed = params.chi * v.max_abs() + grad.max_abs() * h;
    let dt = cfg.cfl_number * h / speed.max(T::lit(1e-12));
    Ok(dt.min(cfg.dt))
}

/// How a run ended.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome<T> {
    Completed,
    BlowUp {
        t: T,
        blowup_integral: T,
    },
    ChemicalExtinction {
        t: T,
        index: usize,
        value: f64,
    },
}

impl<T> Outcome<T> {
    pub fn label(&self) -> &'static str {
        match self {
            Outcome::Completed => "completed",
            Outcome::BlowUp { .. } => "blow_up",
            Outcome::ChemicalExtinction { .. } => "chemical_extinction",
        }
    }

    /// Process exit status: 0, 10, 11.
    pub fn exit_code(&self) -> i32 {
        match self {
            Outcome::Completed => 0,
            Outcome::BlowUp { .. } => 10,
            Outcome::ChemicalExtinction { .. } => 11,
        }
    }
}

/// Hook invoked on every recorded step.
pub trait Recorder<T: Real> {
    fn record(&mut self, record: &DiagnosticsRecord<T>, state: &SimState<T>);
}

/// Collects `(t, u)` at every recorded step.
#[derive(Debug, Default)]
pub struct UHistory<T: Real> {
    pub entries: Vec<(T, ScalarField<T>)>,
}

impl<T: Real> Recorder<T> for UHistory<T> {
    fn record(&mut self, _record: &DiagnosticsRecord<T>, state: &SimState<T>) {
        self.entries.push((state.t, state.u.clone()));
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions<T: Real> {
    pub p0: T,
    /// Chemical datum used to reconstruct `c` (and `‖c‖∞`) in transformed
    /// mode via `c = c₀ exp(−μ∫u)`.
    pub c0: Option<ScalarField<T>>,
    /// States are captured at the first step reaching each time.
    pub snapshot_times: Vec<T>,
    /// Project the initial fields onto the dealiased band before stepping.
    pub band_limit_initial: bool,
}

impl<T: Real> Default for RunOptions<T> {
    fn default() -> Self {
        Self {
            p0: T::lit(6.0),
            c0: None,
            snapshot_times: Vec::new(),
            band_limit_initial: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory<T: Real> {
    pub records: Vec<DiagnosticsRecord<T>>,
    pub snapshots: Vec<SimState<T>>,
    pub outcome: Outcome<T>,
    pub final_state: SimState<T>,
    pub initial_state: SimState<T>,
    pub steps: usize,
}

struct RunLoop<'a, 'b, T: Real> {
    params: ChemistryParams<T>,
    diag: DiagnosticsRecorder<T>,
    exposure: ExposureIntegral<T>,
    c0: Option<ScalarField<T>>,
    blowup_integral: T,
    last_v4: T,
    recorders: &'a mut [&'b mut dyn Recorder<T>],
    records: Vec<DiagnosticsRecord<T>>,
}

impl<T: Real> RunLoop<'_, '_, T> {
    fn v4(&self, state: &SimState<T>) -> Result<(VectorField<T>, T), StepError> {
        let v = state.effective_velocity(&self.params)?;
        let l4 = v.lp_norm(T::lit(4.0))?;
        Ok((v, l4.powi(4)))
    }

    fn record(&mut self, state: &SimState<T>, v: &VectorField<T>) -> Result<(), StepError> {
        let c_linf = match (&state.companion, &self.c0) {
            (Companion::Chemical(c), _) => Some(c.max_abs()),
            (Companion::Velocity(_), Some(c0)) => {
                Some(self.exposure.chemical_max(c0, self.params.mu)?)
            }
            _ => None,
        };
        let rec = self
            .diag
            .observe(state.t, &state.u, v, c_linf, self.blowup_integral)?;
        for r in self.recorders.iter_mut() {
            r.record(&rec, state);
        }
        self.records.push(rec);
        Ok(())
    }
}

/// Advance to `cfg.t_end` or a halt, recording diagnostics every
/// `cfg.record_every` steps (and at the final step).
pub fn run<T: Real>(
    initial: SimState<T>,
    cfg: &StepperConfig<T>,
    params: &ChemistryParams<T>,
    opts: &RunOptions<T>,
    recorders: &mut [&mut dyn Recorder<T>],
) -> Result<Trajectory<T>, StepError> {
    cfg.validate()?;
    params.validate()?;
    let mut state = initial;
    state.u.check_finite()?;
    if opts.band_limit_initial {
        state.u = state.u.band_limited();
        if let Companion::Velocity(v) = &state.companion {
            state.companion = Companion::Velocity(v.band_limited());
        }
    }
    match &state.companion {
        Companion::Velocity(v) => v.check()?,
        Companion::Chemical(c) => cole_hopf::check_chemical(c)?,
    }
    let initial_state = state.clone();

    let mut lp = RunLoop {
        params: *params,
        diag: DiagnosticsRecorder::new(params.chi, opts.p0),
        exposure: ExposureIntegral::new(),
        c0: opts.c0.clone(),
        blowup_integral: T::zero(),
        last_v4: T::zero(),
        recorders,
        records: Vec::new(),
    };
    let mut snapshots = Vec::new();
    let mut pending: Vec<T> = opts.snapshot_times.clone();
    pending.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let mut capture = |state: &SimState<T>, pending: &mut Vec<T>| {
        let mut hit = false;
        while pending.first().is_some_and(|&ts| state.t >= ts) {
            pending.remove(0);
            hit = true;
        }
        if hit {
            snapshots.push(state.clone());
        }
    };

    lp.exposure.push(state.t, &state.u);
    let (v, v4) = lp.v4(&state)?;
    lp.last_v4 = v4;
    lp.record(&state, &v)?;
    capture(&state, &mut pending);

    let eps = T::lit(1e-9);
    let fixed_steps = if cfg.dt_mode == DtMode::Fixed {
        (cfg.t_end / cfg.dt - eps).ceil().to_usize().unwrap_or(0)
    } else {
        0
    };
    let mut steps = 0usize;
    let mut outcome = Outcome::Completed;
    loop {
        let remaining = cfg.t_end - state.t;
        let dt = match cfg.dt_mode {
            DtMode::Fixed => {
                if steps >= fixed_steps {
                    break;
                }
                let t_next = if steps + 1 == fixed_steps {
                    cfg.t_end
                } else {
                    T::count(steps + 1) * cfg.dt
                };
                t_next - state.t
            }
            DtMode::Cfl => {
                if remaining <= cfg.t_end * eps {
                    break;
                }
                choose_dt(&state, cfg, params)?.min(remaining)
            }
        };
        let next = match step(&state, dt, cfg.scheme, params) {
            Ok(s) => s,
            Err(StepError::NonFinite { t }) => {
                outcome = Outcome::BlowUp {
                    t: T::lit(t),
                    blowup_integral: lp.blowup_integral,
                };
                break;
            }
            Err(StepError::Chem(ChemError::Extinction { index, value, .. })) => {
                outcome = Outcome::ChemicalExtinction {
                    t: state.t + dt,
                    index,
                    value,
                };
                break;
            }
            Err(e) => return Err(e),
        };
        let mut next = next;
        if cfg.dt_mode == DtMode::Fixed && steps + 1 == fixed_steps {
            next.t = cfg.t_end;
        }
        steps += 1;
        let (v, v4) = lp.v4(&next)?;
        lp.blowup_integral += (next.t - state.t) * T::lit(0.5) * (lp.last_v4 + v4);
        lp.last_v4 = v4;
        lp.exposure.push(next.t, &next.u);
        state = next;
        let last = match cfg.dt_mode {
            DtMode::Fixed => steps == fixed_steps,
            DtMode::Cfl => cfg.t_end - state.t <= cfg.t_end * eps,
        };
        if steps % cfg.record_every == 0 || last {
            lp.record(&state, &v)?;
        }
        capture(&state, &mut pending);
    }

    Ok(Trajectory {
        records: lp.records,
        snapshots,
        outcome,
        final_state: state,
        initial_state,
        steps,
    })
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
    fn equilibrium_is_fixed_point() {
        let g = grid(16);
        let mut s = SimState::transformed(ScalarField::constant(&g, 1.0), VectorField::zeros(&g));
        let p = ChemistryParams::default();
        for scheme in [Scheme::ImexBe, Scheme::ImexCn] {
            for _ in 0..5 {
                s = step_transformed(&s, 0.1, scheme, &p).unwrap();
            }
            assert!(s.u.map(|x| x - 1.0).max_abs() <= 1e-13);
            assert!(s.velocity().unwrap().max_abs() <= 1e-13);
        }
    }

    #[test]
    fn homogeneous_original_state() {
        let g = grid(16);
        let p = ChemistryParams::new(0.7, 1.0).unwrap();
        let s = SimState::original(ScalarField::constant(&g, 1.0), ScalarField::constant(&g, 2.0));
        for scheme in [Scheme::ImexBe, Scheme::ImexCn] {
            let n = step_original(&s, 0.1, scheme, &p).unwrap();
            assert!(n.u.map(|x| x - 1.0).max_abs() < 1e-14);
            let c = n.chemical().unwrap();
            let exact = 2.0 * (-0.7f64 * 0.1).exp();
            assert!(c.map(|x| x - exact).max_abs() < 1e-14);
        }
    }

    #[test]
    fn mode_mismatch_rejected() {
        let g = grid(16);
        let p = ChemistryParams::default();
        let s = SimState::transformed(ScalarField::constant(&g, 1.0), VectorField::zeros(&g));
        assert_eq!(
            step_original(&s, 0.1, Scheme::ImexCn, &p),
            Err(StepError::ModeMismatch)
        );
        let o = SimState::original(ScalarField::constant(&g, 1.0), ScalarField::constant(&g, 1.0));
        assert_eq!(
            step_transformed(&o, 0.1, Scheme::ImexCn, &p),
            Err(StepError::ModeMismatch)
        );
    }

    #[test]
    fn phi_functions_continuous_at_switch() {
        for z in [-1e-3f64 - 1e-12, -1e-3 + 1e-12] {
            let (a, b) = phi_functions(z);
            assert!((a - (z.exp_m1() / z)).abs() < 1e-12);
            assert!((b - 0.5 - z / 6.0).abs() < 1e-6);
        }
        assert_eq!(phi_functions(0.0f64), (1.0, 0.5));
    }

    #[test]
    fn config_validation() {
        let mut c = StepperConfig::fixed(0.1, 1.0, Scheme::ImexCn);
        assert!(c.validate().is_ok());
        c.dt = 2.0;
        assert!(c.validate().is_err());
        c.dt = 0.1;
        c.cfl_number = 0.0;
        assert!(c.validate().is_err());
        c.cfl_number = 0.5;
        c.record_every = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn zero_horizon_gives_single_record() {
        let g = grid(16);
        let s = SimState::transformed(ScalarField::constant(&g, 1.0), VectorField::zeros(&g));
        let cfg = StepperConfig::fixed(0.1, 0.0, Scheme::ImexCn);
        let traj = run(s, &cfg, &ChemistryParams::default(), &RunOptions::default(), &mut [])
            .unwrap();
        assert_eq!(traj.records.len(), 1);
        assert_eq!(traj.steps, 0);
        assert_eq!(traj.outcome, Outcome::Completed);
    }

    #[test]
    fn nonfinite_state_halts_as_blow_up() {
        let g = grid(16);
        let w = 2.0 * PI / g.side();
        let u = ScalarField::from_fn(&g, |x, _| 1.0 + 0.1 * (w * x).cos());
        // an absurd step overflows the explicit transport term
        let v = VectorField::constant(&g, 1e300, 1e300);
        let s = SimState::transformed(u, v);
        let cfg = StepperConfig::fixed(1e10, 1e10, Scheme::ImexCn);
        let mut opts = RunOptions::default();
        opts.band_limit_initial = false;
        let traj = run(s, &cfg, &ChemistryParams::default(), &opts, &mut []).unwrap();
        assert!(matches!(traj.outcome, Outcome::BlowUp { .. }));
        assert_eq!(traj.outcome.exit_code(), 10);
    }
}
