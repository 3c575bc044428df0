//! Acceptance criteria 1-10. Each criterion prints one PASS/FAIL line.

use std::io::Write;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use chemoflux::cole_hopf::ChemistryParams;
use chemoflux::evolve::{run, Outcome, Recorder, RunOptions, Scheme, SimState, StepperConfig, UHistory};
use chemoflux::flux_diag::{fit_decay, late_perturbation_bounded, DiagnosticsRecord};
use chemoflux::harness::io::write_diagnostics;
use chemoflux::harness::{
    prepare, run_cross_validate, run_delta_sweep, run_refinement, ExperimentConfig,
};
use chemoflux::{Grid, ScalarField, VectorField};

fn shipped(name: &str) -> ExperimentConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name);
    ExperimentConfig::from_path(&path).unwrap()
}

struct Verdict {
    id: u32,
    pass: bool,
    detail: String,
}

fn report(verdicts: &[Verdict]) {
    let mut err = std::io::stderr().lock();
    for v in verdicts {
        let tag = if v.pass { "PASS" } else { "FAIL" };
        // written to the raw handle so the lines survive output capture
        writeln!(err, "{tag} criterion {}: {}", v.id, v.detail).unwrap();
    }
}

/// Means and curl at every recorded step.
#[derive(Default)]
struct Structure {
    u_mean: Vec<f64>,
    v_mean: Vec<(f64, f64)>,
    v_curl: Vec<f64>,
}

impl Recorder<f64> for Structure {
    fn record(&mut self, rec: &DiagnosticsRecord<f64>, state: &SimState<f64>) {
        self.u_mean.push(state.u.mean());
        self.v_mean.push(state.velocity().expect("transformed mode").mean());
        self.v_curl.push(rec.v_curl_linf);
    }
}

struct Flagship {
    records: Vec<DiagnosticsRecord<f64>>,
    structure: Structure,
    outcome: Outcome<f64>,
    theta0: f64,
    elapsed: Duration,
    csv: Vec<u8>,
}

fn flagship() -> Flagship {
    let cfg = shipped("flagship.toml");
    let p = prepare(&cfg).unwrap();
    let mut structure = Structure::default();
    let start = Instant::now();
    let tr = {
        let mut recs: [&mut dyn Recorder<f64>; 1] = [&mut structure];
        run(p.initial.clone(), &p.stepper, &p.params, &p.options, &mut recs).unwrap()
    };
    let elapsed = start.elapsed();
    let mut csv = Vec::new();
    write_diagnostics(&mut csv, &tr.records).unwrap();
    Flagship {
        records: tr.records,
        structure,
        outcome: tr.outcome,
        theta0: p.data.summary.theta0,
        elapsed,
        csv,
    }
}

fn single_threaded<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(f)
}

fn criterion_1(f: &Flagship) -> Verdict {
    let div = f
        .records
        .iter()
        .map(|r| r.div_residual / (1.0 + r.ut_l2))
        .fold(0.0, f64::max);
    let curl = f
        .records
        .iter()
        .map(|r| r.curl_residual / (1.0 + r.curl_source_l2))
        .fold(0.0, f64::max);
    let all_div = f.records.iter().all(|r| r.div_identity_holds(1e-11));
    let all_curl = f.records.iter().all(|r| r.curl_identity_holds(1e-10));
    let fast = f.elapsed <= Duration::from_secs(600);
    Verdict {
        id: 1,
        pass: all_div && all_curl && fast && f.outcome == Outcome::Completed,
        detail: format!(
            "div {div:e} (<= 1e-11), curl {curl:e} (<= 1e-10), {} records, runtime {:.1} s (<= 600 s)",
            f.records.len(),
            f.elapsed.as_secs_f64()
        ),
    }
}

fn criterion_2(f: &Flagship) -> Verdict {
    let s = &f.structure;
    let u0 = s.u_mean[0];
    let (vx0, vy0) = s.v_mean[0];
    let du = s.u_mean.iter().map(|m| (m - u0).abs()).fold(0.0, f64::max);
    let dv = s
        .v_mean
        .iter()
        .map(|&(x, y)| (x - vx0).abs().max((y - vy0).abs()))
        .fold(0.0, f64::max);
    let curl = s.v_curl.iter().copied().fold(0.0, f64::max);
    Verdict {
        id: 2,
        pass: du <= 1e-11 && dv <= 1e-11 && curl <= 1e-10 && s.u_mean.len() == f.records.len(),
        detail: format!("mean(u) drift {du:e}, mean(v) drift {dv:e} (<= 1e-11), curl v {curl:e} (<= 1e-10)"),
    }
}

fn criterion_3() -> Verdict {
    let g = Grid::new(16.0 * std::f64::consts::PI, 32).unwrap();
    let mut cfg = StepperConfig::fixed(0.01, 100.0, Scheme::ImexCn);
    cfg.record_every = 100;
    let tr = run(
        SimState::transformed(ScalarField::constant(&g, 1.0), VectorField::zeros(&g)),
        &cfg,
        &ChemistryParams::default(),
        &RunOptions::default(),
        &mut [],
    )
    .unwrap();
    let worst = tr
        .records
        .iter()
        .flat_map(|r| [r.u_l2, r.grad_u_l2, r.u_linf, r.v_l2, r.v_linf, r.flux_l2, r.ut_l2])
        .fold(0.0, f64::max);
    Verdict {
        id: 3,
        pass: tr.steps == 10_000 && worst <= 1e-12,
        detail: format!("{} steps, max perturbation norm {worst:e} (<= 1e-12)", tr.steps),
    }
}

/// exp(M t) for a real 2x2 matrix.
fn expm2(m: [[f64; 2]; 2], t: f64) -> [[f64; 2]; 2] {
    let s = 0.5 * (m[0][0] + m[1][1]);
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let q2 = s * s - det;
    let q = q2.abs().sqrt();
    let (c, sq) = if q2 > 0.0 {
        ((q * t).cosh(), (q * t).sinh() / q)
    } else if q2 < 0.0 {
        ((q * t).cos(), (q * t).sin() / q)
    } else {
        (1.0, t)
    };
    let e = (s * t).exp();
    [
        [e * (c + sq * (m[0][0] - s)), e * sq * m[0][1]],
        [e * sq * m[1][0], e * (c + sq * (m[1][1] - s))],
    ]
}

fn criterion_4() -> Verdict {
    let l = 16.0 * std::f64::consts::PI;
    let g = Grid::new(l, 32).unwrap();
    let k = 2.0 * std::f64::consts::PI * 4.0 / l;
    let eps = 1e-6;
    let dt = 0.01;
    let params: ChemistryParams<f64> = ChemistryParams::default();
    let chi = params.chi;
    // u - 1 = a cos kx, v = grad(b cos kx): a' = -k^2 a - chi k^2 b, b' = a
    let m = [[-k * k, -chi * k * k], [1.0, 0.0]];
    let u0 = ScalarField::from_fn(&g, |x, _| 1.0 + eps * (k * x).cos());
    let mut hist = UHistory::default();
    let mut cfg = StepperConfig::fixed(dt, 5.0, Scheme::ImexCn);
    cfg.record_every = 10;
    {
        let mut recs: [&mut dyn Recorder<f64>; 1] = [&mut hist];
        run(
            SimState::transformed(u0, VectorField::zeros(&g)),
            &cfg,
            &params,
            &RunOptions::default(),
            &mut recs,
        )
        .unwrap();
    }
    let (mut err, mut scale) = (0.0f64, 0.0f64);
    for (t, u) in &hist.entries {
        let a = expm2(m, *t)[0][0] * eps;
        let exact = ScalarField::from_fn(&g, |x, _| a * (k * x).cos());
        let pert = u.map(|x| x - 1.0);
        err = err.max(pert.zip_map(&exact, |p, q| p - q).unwrap().l2());
        scale = scale.max(exact.l2());
    }
    let rel = err / scale;
    let tol = 1e-4 + 10.0 * dt * dt;
    Verdict {
        id: 4,
        pass: rel <= tol && hist.entries.len() > 10,
        detail: format!("relative error {rel:e} (<= {tol:e}) over {} samples", hist.entries.len()),
    }
}

fn criterion_5() -> Verdict {
    let cfg = shipped("refinement.toml");
    let r = run_refinement(&cfg).unwrap();
    let order = r.temporal.first().and_then(|row| row.order).unwrap_or(f64::NAN);
    let (e64, e128) = (r.spatial[0].error, r.spatial[1].error);
    let drop = e64 / e128;
    Verdict {
        id: 5,
        pass: (1.9..=2.1).contains(&order) && drop >= 1e2,
        detail: format!(
            "temporal order {order:.4} (in [1.9, 2.1]), spatial error N=64 {e64:e} / N=128 {e128:e} = {drop:e} (>= 1e2)"
        ),
    }
}

fn criterion_6(f: &Flagship) -> Verdict {
    let last = f.records.last().unwrap();
    let a1 = f.records.iter().map(|r| r.a1).fold(0.0, f64::max);
    let ratio = a1 / f.theta0;
    let late_bound = late_perturbation_bounded(&f.records);
    let half = f
        .records
        .iter()
        .find(|r| r.t >= 0.5 * last.t)
        .unwrap();
    let settled = |end: f64, mid: f64| end.is_finite() && end - mid <= 0.1 * end;
    let a3_ok = settled(last.a3, half.a3);
    let bu_ok = settled(last.blowup_integral, half.blowup_integral);
    Verdict {
        id: 6,
        pass: ratio <= 1.5 && late_bound && a3_ok && bu_ok,
        detail: format!(
            "theta0 {:e}, A1/theta0 {ratio:.4} (<= 1.5), |u-1|inf <= 0.25 for t >= 1: {late_bound}, A3 {:e} (T/2: {:e}), blow-up integral {:e} (T/2: {:e})",
            f.theta0, last.a3, half.a3, last.blowup_integral, half.blowup_integral
        ),
    }
}

fn criterion_7(f: &Flagship) -> Verdict {
    let at1 = f.records.iter().find(|r| r.t >= 1.0).unwrap();
    let last = f.records.last().unwrap();
    let ru = last.u_linf / at1.u_linf;
    let rv = last.v_l4 / at1.v_l4;
    let series: Vec<(f64, f64)> = f
        .records
        .iter()
        .filter_map(|r| Some((r.t, r.c_linf?)))
        .collect();
    let fit = fit_decay("c_linf", &series, (2.0, 20.0));
    let (rate, resid) = fit.as_ref().map(|f| (f.rate, f.residual)).unwrap_or((f64::NAN, f64::NAN));
    Verdict {
        id: 7,
        pass: ru <= 0.1 && rv <= 0.1 && rate >= 0.75 && resid <= 0.05,
        detail: format!(
            "|u-1|inf ratio {ru:.4}, |v|L4 ratio {rv:.4} (<= 0.1), c decay rate {rate:.4} (>= 0.75, expected ~1), residual {resid:e} (<= 0.05)"
        ),
    }
}

fn criterion_8() -> Verdict {
    let rows = run_cross_validate(&shipped("xval.toml")).unwrap();
    let at = |n: usize| rows.iter().find(|r| r.n == n).map(|r| r.u_discrepancy.max(r.v_discrepancy));
    let (d128, d256) = (at(128).unwrap_or(f64::NAN), at(256).unwrap_or(f64::NAN));
    Verdict {
        id: 8,
        pass: d128 <= 1e-3 && d256 <= 0.5 * d128,
        detail: format!("discrepancy N=128 {d128:e} (<= 1e-3), N=256 {d256:e} (<= {:e})", 0.5 * d128),
    }
}

fn criterion_9() -> Verdict {
    let s = run_delta_sweep(&shipped("delta_sweep.toml")).unwrap();
    let pairs: Vec<String> = s
        .pairs
        .iter()
        .map(|p| format!("({}h,{}h): u {:e} v {:e}", p.delta_a, p.delta_b, p.du, p.dv))
        .collect();
    Verdict {
        id: 9,
        pass: s.is_cauchy(),
        detail: format!("strictly decreasing distances: {}", pairs.join("; ")),
    }
}

fn criterion_10(first: &Flagship) -> Verdict {
    let second = single_threaded(flagship);
    let same = first.csv == second.csv;
    Verdict {
        id: 10,
        pass: same,
        detail: format!(
            "diagnostics CSVs {} ({} and {} bytes)",
            if same { "byte-identical" } else { "differ" },
            first.csv.len(),
            second.csv.len()
        ),
    }
}

#[test]
fn acceptance_criteria() {
    let f = single_threaded(flagship);
    let mut verdicts = vec![criterion_1(&f), criterion_2(&f)];
    verdicts.push(criterion_3());
    verdicts.push(criterion_4());
    verdicts.push(criterion_5());
    verdicts.push(criterion_6(&f));
    verdicts.push(criterion_7(&f));
    verdicts.push(criterion_8());
    verdicts.push(criterion_9());
    verdicts.push(criterion_10(&f));
    report(&verdicts);
    let failed: Vec<u32> = verdicts.iter().filter(|v| !v.pass).map(|v| v.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
