//! The canonical studies. Independent runs fan out over the rayon pool and are
//! collected in configuration order.

use std::path::Path;

use rayon::prelude::*;

use crate::cole_hopf::{self, forward_transform, ChemistryParams};
use crate::evolve::{self, Mode, Outcome, Recorder, RunOptions, SimState, StepperConfig, Trajectory};
use crate::field::{FieldError, Grid, ScalarField, VectorField};
use crate::flux_diag::{fit_decay, late_perturbation_bounded, DecayFit, DiagnosticsRecord};
use crate::init_data::{build_initial_data, DataSummary, InitialData};

use super::config::ExperimentConfig;
use super::io::{fmt_f64, fmt_opt, write_diagnostics, write_state_snapshot, write_table_file};
use super::HarnessError;

/// Everything needed to start a run.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub grid: Grid<f64>,
    pub data: InitialData<f64>,
    pub params: ChemistryParams<f64>,
    pub stepper: StepperConfig<f64>,
    pub options: RunOptions<f64>,
    pub initial: SimState<f64>,
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared, HarnessError> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let params = cfg.chemistry()?;
    let stepper = cfg.stepper_config()?;
    let data = build_initial_data(&cfg.recipe, &grid)?;
    let c0 = data.chemical(params.mu);
    cole_hopf::check_chemical(&c0)?;
    let initial = match cfg.mode() {
        Mode::Transformed => SimState::transformed(data.u0.clone(), data.v0.clone()),
        Mode::Original => SimState::original(data.u0.clone(), c0.clone()),
    };
    let options = RunOptions {
        p0: cfg.recipe.p0,
        c0: Some(c0),
        snapshot_times: cfg.output.snapshot_times.clone(),
        band_limit_initial: true,
    };
    Ok(Prepared {
        grid,
        data,
        params,
        stepper,
        options,
        initial,
    })
}

fn execute(
    p: &Prepared,
    recorders: &mut [&mut dyn Recorder<f64>],
) -> Result<Trajectory<f64>, HarnessError> {
    Ok(evolve::run(p.initial.clone(), &p.stepper, &p.params, &p.options, recorders)?)
}

/// Quantities fitted over the decay window, in output order.
pub const DECAY_QUANTITIES: [&str; 3] = ["c_linf", "u_linf", "v_l4"];

fn series(records: &[DiagnosticsRecord<f64>], quantity: &str) -> Vec<(f64, f64)> {
    records
        .iter()
        .filter_map(|r| {
            let y = match quantity {
                "c_linf" => r.c_linf?,
                "u_linf" => r.u_linf,
                "v_l4" => r.v_l4,
                _ => return None,
            };
            Some((r.t, y))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct DecayRow {
    pub quantity: String,
    pub fit: Result<DecayFit, String>,
}

pub fn decay_rows(records: &[DiagnosticsRecord<f64>], window: [f64; 2]) -> Vec<DecayRow> {
    DECAY_QUANTITIES
        .iter()
        .map(|&q| DecayRow {
            quantity: q.to_string(),
            fit: fit_decay(q, &series(records, q), (window[0], window[1])).map_err(|e| e.to_string()),
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct SingleRun {
    pub summary: DataSummary<f64>,
    pub trajectory: Trajectory<f64>,
    pub decay: Vec<DecayRow>,
}

impl SingleRun {
    pub fn exit_code(&self) -> i32 {
        self.trajectory.outcome.exit_code()
    }
}

pub fn run_single(cfg: &ExperimentConfig) -> Result<SingleRun, HarnessError> {
    let p = prepare(cfg)?;
    let trajectory = execute(&p, &mut [])?;
    let decay = decay_rows(&trajectory.records, cfg.study.decay_window);
    Ok(SingleRun {
        summary: p.data.summary,
        trajectory,
        decay,
    })
}

fn outcome_fields(o: &Outcome<f64>) -> (String, String) {
    match o {
        Outcome::Completed => (String::new(), String::new()),
        Outcome::BlowUp { t, .. } => (fmt_f64(*t), String::new()),
        Outcome::ChemicalExtinction { t, index, .. } => (fmt_f64(*t), index.to_string()),
    }
}

pub fn write_single(dir: &Path, cfg: &ExperimentConfig, run: &SingleRun) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("config.toml"), cfg.to_toml())?;
    let f = std::io::BufWriter::new(std::fs::File::create(dir.join("diagnostics.csv"))?);
    write_diagnostics(f, &run.trajectory.records)?;
    write_table_file(
        &dir.join("decay_summary.csv"),
        "chemoflux-decay v1",
        &["quantity", "t_lo", "t_hi", "rate", "prefactor", "residual", "samples", "note"],
        run.decay.iter().map(|d| match &d.fit {
            Ok(f) => vec![
                d.quantity.clone(),
                fmt_f64(f.window.0),
                fmt_f64(f.window.1),
                fmt_f64(f.rate),
                fmt_f64(f.prefactor),
                fmt_f64(f.residual),
                f.samples.to_string(),
                String::new(),
            ],
            Err(e) => {
                let mut r = vec![d.quantity.clone()];
                r.extend(std::iter::repeat_n(String::new(), 6));
                r.push(e.clone());
                r
            }
        }),
    )?;
    let tr = &run.trajectory;
    let (halt_t, halt_index) = outcome_fields(&tr.outcome);
    let s = &run.summary;
    let info = [
        ("outcome", tr.outcome.label().to_string()),
        ("exit_code", tr.outcome.exit_code().to_string()),
        ("halt_t", halt_t),
        ("halt_index", halt_index),
        ("steps", tr.steps.to_string()),
        ("t_final", fmt_f64(tr.final_state.t)),
        ("theta0", fmt_f64(s.theta0)),
        ("m", fmt_f64(s.m)),
        ("linf_amplitude", fmt_f64(s.linf_amplitude)),
        ("delta", fmt_f64(s.delta)),
        ("eta0", fmt_f64(s.eta0)),
    ];
    write_table_file(
        &dir.join("run_info.csv"),
        "chemoflux-run v1",
        &["key", "value"],
        info.into_iter().map(|(k, v)| vec![k.to_string(), v]),
    )?;
    for (k, snap) in tr.snapshots.iter().enumerate() {
        write_state_snapshot(&dir.join(format!("snapshot_{k:03}.cfx")), snap)?;
    }
    Ok(())
}

fn velocity_of(state: &SimState<f64>, params: &ChemistryParams<f64>) -> Result<VectorField<f64>, HarnessError> {
    Ok(match state.velocity() {
        Some(v) => v.clone(),
        None => forward_transform(state.chemical().expect("original mode"), params)?,
    })
}

fn diff_l2(a: &ScalarField<f64>, b: &ScalarField<f64>) -> Result<f64, FieldError> {
    Ok(a.zip_map(b, |x, y| x - y)?.l2())
}

fn vdiff_l2(a: &VectorField<f64>, b: &VectorField<f64>) -> Result<f64, FieldError> {
    Ok(a.zip_map(b, |x, y| x - y)?.l2())
}

#[derive(Debug, Clone)]
pub struct DeltaRun {
    pub delta_h: f64,
    pub delta: f64,
    pub theta0: f64,
    pub outcome: &'static str,
}

#[derive(Debug, Clone)]
pub struct DeltaPair {
    pub delta_a: f64,
    pub delta_b: f64,
    pub du: f64,
    pub dv: f64,
}

#[derive(Debug, Clone)]
pub struct DeltaSweep {
    pub runs: Vec<DeltaRun>,
    pub pairs: Vec<DeltaPair>,
}

impl DeltaSweep {
    /// Pairwise distances strictly decrease down the sweep (both `u` and `v`).
    pub fn is_cauchy(&self) -> bool {
        self.pairs
            .windows(2)
            .all(|w| w[1].du < w[0].du && w[1].dv < w[0].dv)
    }
}

pub fn run_delta_sweep(cfg: &ExperimentConfig) -> Result<DeltaSweep, HarnessError> {
    let deltas = &cfg.study.deltas_h;
    if deltas.len() < 3 || deltas.windows(2).any(|w| !(w[1] < w[0])) || deltas.iter().any(|&d| !(d > 0.0)) {
        return Err(HarnessError::Study(
            "delta sweep needs at least 3 positive, strictly decreasing widths".into(),
        ));
    }
    let h = cfg.spacing();
    let finals: Vec<(DeltaRun, SimState<f64>, ChemistryParams<f64>)> = deltas
        .par_iter()
        .map(|&dh| {
            let mut c = cfg.clone();
            c.delta_h = Some(dh);
            c.recipe.delta = dh * h;
            let p = prepare(&c)?;
            let tr = execute(&p, &mut [])?;
            Ok((
                DeltaRun {
                    delta_h: dh,
                    delta: dh * h,
                    theta0: p.data.summary.theta0,
                    outcome: tr.outcome.label(),
                },
                tr.final_state,
                p.params,
            ))
        })
        .collect::<Result<_, HarnessError>>()?;
    let mut pairs = Vec::new();
    for w in finals.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        pairs.push(DeltaPair {
            delta_a: a.0.delta_h,
            delta_b: b.0.delta_h,
            du: diff_l2(&a.1.u, &b.1.u)?,
            dv: vdiff_l2(&velocity_of(&a.1, &a.2)?, &velocity_of(&b.1, &b.2)?)?,
        });
    }
    Ok(DeltaSweep {
        runs: finals.into_iter().map(|f| f.0).collect(),
        pairs,
    })
}

pub fn write_delta_sweep(dir: &Path, cfg: &ExperimentConfig, s: &DeltaSweep) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("config.toml"), cfg.to_toml())?;
    write_table_file(
        &dir.join("delta_runs.csv"),
        "chemoflux-delta-runs v1",
        &["delta_h", "delta", "theta0", "outcome"],
        s.runs.iter().map(|r| {
            vec![fmt_f64(r.delta_h), fmt_f64(r.delta), fmt_f64(r.theta0), r.outcome.to_string()]
        }),
    )?;
    write_table_file(
        &dir.join("delta_sweep.csv"),
        "chemoflux-delta-sweep v1",
        &["delta_a_h", "delta_b_h", "u_distance", "v_distance"],
        s.pairs
            .iter()
            .map(|p| vec![fmt_f64(p.delta_a), fmt_f64(p.delta_b), fmt_f64(p.du), fmt_f64(p.dv)]),
    )
}

/// One level of a refinement ladder. `error` is the successive difference
/// (temporal) or the distance to the finest run (spatial); `order` compares
/// this level with the next.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderRow {
    pub level: f64,
    pub error: f64,
    pub order: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct Refinement {
    pub temporal: Vec<OrderRow>,
    pub spatial: Vec<OrderRow>,
}

fn observed_orders(levels: &[f64], errors: &[f64]) -> Vec<OrderRow> {
    (0..errors.len())
        .map(|k| OrderRow {
            level: levels[k],
            error: errors[k],
            order: (k + 1 < errors.len())
                .then(|| (errors[k] / errors[k + 1]).ln() / (levels[k] / levels[k + 1]).ln().abs()),
        })
        .collect()
}

/// Samples of a fine field at the points of a coarser grid.
pub fn inject(fine: &ScalarField<f64>, coarse: &Grid<f64>) -> Result<ScalarField<f64>, HarnessError> {
    let (nf, nc) = (fine.grid().n(), coarse.n());
    if nf % nc != 0 {
        return Err(HarnessError::Study(format!("cannot inject N = {nf} onto N = {nc}")));
    }
    let r = nf / nc;
    let s = fine.samples();
    let data = (0..nc * nc).map(|k| s[(k / nc) * r * nf + (k % nc) * r]).collect();
    Ok(ScalarField::from_vec(coarse, data)?)
}

fn final_u(cfg: &ExperimentConfig) -> Result<ScalarField<f64>, HarnessError> {
    let p = prepare(cfg)?;
    let tr = execute(&p, &mut [])?;
    if tr.outcome != Outcome::Completed {
        return Err(HarnessError::Study(format!(
            "refinement run at N = {}, dt = {} ended with {}",
            cfg.grid.n,
            cfg.stepper.dt,
            tr.outcome.label()
        )));
    }
    Ok(tr.final_state.u)
}

pub fn run_refinement(cfg: &ExperimentConfig) -> Result<Refinement, HarnessError> {
    let s = &cfg.study;
    if s.resolutions.is_empty() && s.dts.is_empty() {
        return Err(HarnessError::Study("refinement needs resolutions and/or dts".into()));
    }
    if (!s.resolutions.is_empty() && s.resolutions.len() < 3) || (!s.dts.is_empty() && s.dts.len() < 3) {
        return Err(HarnessError::Study("refinement needs at least 3 levels".into()));
    }
    let mut out = Refinement::default();
    if !s.dts.is_empty() {
        let us: Vec<ScalarField<f64>> = s
            .dts
            .par_iter()
            .map(|&dt| {
                let mut c = cfg.clone();
                c.stepper.dt = dt;
                final_u(&c)
            })
            .collect::<Result<_, _>>()?;
        let diffs = us
            .windows(2)
            .map(|w| diff_l2(&w[0], &w[1]))
            .collect::<Result<Vec<_>, _>>()?;
        out.temporal = observed_orders(&s.dts, &diffs);
    }
    if !s.resolutions.is_empty() {
        let us: Vec<ScalarField<f64>> = s
            .resolutions
            .par_iter()
            .map(|&n| final_u(&cfg.at_resolution(n)))
            .collect::<Result<_, _>>()?;
        let finest = us.last().expect("at least 3 levels");
        let errs = us[..us.len() - 1]
            .iter()
            .map(|u| Ok(diff_l2(u, &inject(finest, u.grid())?)?))
            .collect::<Result<Vec<_>, HarnessError>>()?;
        let levels: Vec<f64> = s.resolutions.iter().map(|&n| n as f64).collect();
        out.spatial = observed_orders(&levels[..errs.len()], &errs);
    }
    Ok(out)
}

fn order_rows<'a>(kind: &str, rows: &'a [OrderRow]) -> impl Iterator<Item = Vec<String>> + 'a {
    let kind = kind.to_string();
    rows.iter()
        .map(move |r| vec![kind.clone(), fmt_f64(r.level), fmt_f64(r.error), fmt_opt(r.order)])
}

pub fn write_refinement(dir: &Path, cfg: &ExperimentConfig, r: &Refinement) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("config.toml"), cfg.to_toml())?;
    write_table_file(
        &dir.join("refinement.csv"),
        "chemoflux-refinement v1",
        &["kind", "level", "error", "order"],
        order_rows("temporal", &r.temporal).chain(order_rows("spatial", &r.spatial)),
    )
}

#[derive(Default)]
struct StateHistory {
    entries: Vec<(f64, ScalarField<f64>, SimState<f64>)>,
}

impl Recorder<f64> for StateHistory {
    fn record(&mut self, _r: &DiagnosticsRecord<f64>, state: &SimState<f64>) {
        self.entries.push((state.t, state.u.clone(), state.clone()));
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossValRow {
    pub n: usize,
    pub dt: f64,
    /// `max_t ‖u_orig − u_transf‖₂`.
    pub u_discrepancy: f64,
    /// `max_t ‖forward_transform(c) − v‖₂`.
    pub v_discrepancy: f64,
    pub compared: usize,
}

fn cross_validate_once(cfg: &ExperimentConfig) -> Result<CrossValRow, HarnessError> {
    let mut tcfg = cfg.clone();
    tcfg.stepper.mode = super::config::ModeName::Transformed;
    let mut ocfg = cfg.clone();
    ocfg.stepper.mode = super::config::ModeName::Original;
    let (pt, po) = (prepare(&tcfg)?, prepare(&ocfg)?);
    let run = |p: &Prepared| -> Result<StateHistory, HarnessError> {
        let mut h = StateHistory::default();
        let tr = {
            let mut recs: [&mut dyn Recorder<f64>; 1] = [&mut h];
            execute(p, &mut recs)?
        };
        if tr.outcome != Outcome::Completed {
            return Err(HarnessError::Study(format!(
                "cross-validation run halted: {}",
                tr.outcome.label()
            )));
        }
        Ok(h)
    };
    let (ht, ho) = rayon::join(|| run(&pt), || run(&po));
    let (ht, ho) = (ht?, ho?);
    let tol = 1e-9 * cfg.stepper.t_end.max(1.0);
    let (mut du, mut dv, mut compared) = (0.0f64, 0.0f64, 0usize);
    let mut j = 0;
    for (t, u_t, st) in &ht.entries {
        while j < ho.entries.len() && ho.entries[j].0 < t - tol {
            j += 1;
        }
        let Some((to, u_o, so)) = ho.entries.get(j) else { break };
        if (to - t).abs() > tol {
            continue;
        }
        du = du.max(diff_l2(u_o, u_t)?);
        dv = dv.max(vdiff_l2(&velocity_of(so, &po.params)?, &velocity_of(st, &pt.params)?)?);
        compared += 1;
    }
    Ok(CrossValRow {
        n: cfg.grid.n,
        dt: cfg.stepper.dt,
        u_discrepancy: du,
        v_discrepancy: dv,
        compared,
    })
}

/// Original vs transformed solvers from matched data. With
/// `study.resolutions` the pair is repeated with `dt ∝ h`.
pub fn run_cross_validate(cfg: &ExperimentConfig) -> Result<Vec<CrossValRow>, HarnessError> {
    let levels: Vec<ExperimentConfig> = if cfg.study.resolutions.is_empty() {
        vec![cfg.clone()]
    } else {
        cfg.study
            .resolutions
            .iter()
            .map(|&n| {
                let mut c = cfg.at_resolution(n);
                c.stepper.dt = cfg.stepper.dt * cfg.grid.n as f64 / n as f64;
                c
            })
            .collect()
    };
    levels.par_iter().map(cross_validate_once).collect()
}

pub fn write_cross_validate(dir: &Path, cfg: &ExperimentConfig, rows: &[CrossValRow]) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("config.toml"), cfg.to_toml())?;
    write_table_file(
        &dir.join("cross_validation.csv"),
        "chemoflux-xval v1",
        &["N", "dt", "u_discrepancy", "v_discrepancy", "compared"],
        rows.iter().map(|r| {
            vec![
                r.n.to_string(),
                fmt_f64(r.dt),
                fmt_f64(r.u_discrepancy),
                fmt_f64(r.v_discrepancy),
                r.compared.to_string(),
            ]
        }),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThetaRow {
    pub amplitude: f64,
    pub theta0: f64,
    pub m: f64,
    /// `completed_decay`, `completed_no_decay`, `blow_up`,
    /// `chemical_extinction` or `rejected`.
    pub status: String,
    pub a1_ratio: Option<f64>,
    pub a1_bound_holds: bool,
    pub late_bound_holds: bool,
    pub note: String,
}

/// `‖u−1‖∞` at the end is at most a tenth of its value at `t = 1`, or the
/// state already sits at equilibrium (`≤ 1e−12`) by then.
pub fn decayed(records: &[DiagnosticsRecord<f64>]) -> bool {
    match (records.iter().find(|r| r.t >= 1.0), records.last()) {
        (Some(a), _) if a.u_linf <= 1e-12 => true,
        (Some(a), Some(b)) if b.t > a.t => b.u_linf <= 0.1 * a.u_linf,
        _ => false,
    }
}

fn theta_row(cfg: &ExperimentConfig, amplitude: f64) -> ThetaRow {
    let mut c = cfg.clone();
    c.recipe.amplitude = amplitude;
    let rejected = |note: String| ThetaRow {
        amplitude,
        theta0: f64::NAN,
        m: f64::NAN,
        status: "rejected".into(),
        a1_ratio: None,
        a1_bound_holds: false,
        late_bound_holds: false,
        note,
    };
    let p = match prepare(&c) {
        Ok(p) => p,
        Err(e) => return rejected(e.to_string()),
    };
    let tr = match execute(&p, &mut []) {
        Ok(t) => t,
        Err(e) => return rejected(e.to_string()),
    };
    let s = p.data.summary;
    let a1 = tr.records.iter().map(|r| r.a1).fold(0.0, f64::max);
    let a1_ratio = (s.theta0 > 0.0).then(|| a1 / s.theta0);
    let status = match tr.outcome {
        Outcome::Completed if decayed(&tr.records) => "completed_decay",
        Outcome::Completed => "completed_no_decay",
        ref o => o.label(),
    };
    ThetaRow {
        amplitude,
        theta0: s.theta0,
        m: s.m,
        status: status.into(),
        a1_ratio,
        a1_bound_holds: a1 <= 1.5 * s.theta0,
        late_bound_holds: late_perturbation_bounded(&tr.records),
        note: String::new(),
    }
}

pub fn run_theta_scan(cfg: &ExperimentConfig) -> Result<Vec<ThetaRow>, HarnessError> {
    if cfg.study.amplitudes.is_empty() {
        return Err(HarnessError::Study("theta scan needs amplitudes".into()));
    }
    Ok(cfg.study.amplitudes.par_iter().map(|&a| theta_row(cfg, a)).collect())
}

pub fn write_theta_scan(dir: &Path, cfg: &ExperimentConfig, rows: &[ThetaRow]) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("config.toml"), cfg.to_toml())?;
    write_table_file(
        &dir.join("theta_scan.csv"),
        "chemoflux-theta-scan v1",
        &["amplitude", "theta0", "m", "status", "a1_ratio", "a1_bound_holds", "late_bound_holds", "note"],
        rows.iter().map(|r| {
            vec![
                fmt_f64(r.amplitude),
                fmt_f64(r.theta0),
                fmt_f64(r.m),
                r.status.clone(),
                fmt_opt(r.a1_ratio),
                r.a1_bound_holds.to_string(),
                r.late_bound_holds.to_string(),
                r.note.clone(),
            ]
        }),
    )
}

/// Decay fit of one column of a diagnostics CSV.
pub fn fit_decay_csv(path: &Path, column: &str, window: [f64; 2]) -> Result<DecayFit, HarnessError> {
    let data = super::io::read_column(path, column)?;
    Ok(fit_decay(column, &data, (window[0], window[1]))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orders_from_geometric_errors() {
        let rows = observed_orders(&[4e-3, 2e-3, 1e-3], &[16.0, 4.0, 1.0]);
        assert!((rows[0].order.unwrap() - 2.0).abs() < 1e-12);
        assert!((rows[1].order.unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(rows[2].order, None);
        let rows = observed_orders(&[32.0, 64.0], &[1e-2, 1e-3]);
        assert!((rows[0].order.unwrap() - 10f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn injection_picks_coincident_points() {
        let fine = Grid::new(1.0, 16).unwrap();
        let coarse = Grid::new(1.0, 8).unwrap();
        let f = ScalarField::from_fn(&fine, |x, y| x + 3.0 * y);
        let c = inject(&f, &coarse).unwrap();
        let exact = ScalarField::from_fn(&coarse, |x, y| x + 3.0 * y);
        assert!(c.zip_map(&exact, |a, b| a - b).unwrap().max_abs() < 1e-15);
        assert!(inject(&f, &Grid::new(1.0, 10).unwrap()).is_err());
    }
}
