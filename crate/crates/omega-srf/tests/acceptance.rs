//! End-to-end acceptance checks. Runs without the libtest harness so every
//! criterion prints exactly one PASS/FAIL line; exits nonzero on any failure.

use std::sync::{Arc, OnceLock};
use std::time::Instant;

use omega_srf::domain_grid::linalg::field_inverse;
use omega_srf::domain_grid::products::raise_form;
use omega_srf::domain_grid::{einsum, shape, EndoField, Field, Grid, PolarizationField, DEFAULT_EIGENGAP};
use omega_srf::identity_verifier::{refinement_slope, run_suite, verify_hamilton_interpolation, SuiteConfig};
use omega_srf::metric_space_geometry::{conservation_along_geodesic, curvature_m};
use omega_srf::riemann_ops::{Geometry, BOUNDARY_MARGIN};
use omega_srf::srf_flow::{hp_monitor, Flow, FlowRun, Form, IntegratorConfig};
use omega_srf::testbeds::{self, gaussian, gaussian_1d, torus, Modes};
use omega_srf::w_functional::{ConvexKind, ConvexSetSpec, WContext};
use omega_srf::Result;

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion = fn() -> Result<Outcome>;

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn polarization(grid: &Arc<Grid>) -> PolarizationField {
    let g = Field::euclidean(grid);
    PolarizationField::new(&g, Field::constant(grid, shape::ENDO, &[1.0, 0.0, 0.0, 2.0]), DEFAULT_EIGENGAP)
        .expect("constant diagonal polarization")
}

fn sin_perturbation(grid: &Arc<Grid>) -> EndoField {
    Field::identity(grid).mul_scalar(&Field::scalar_fn(grid, |x| 0.1 * x[0].sin()))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

fn sci(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>().join(", ")
}

fn soliton_fixed_point() -> Result<Outcome> {
    let grid = gaussian_1d(256)?;
    let h2 = grid.h_max().powi(2);
    let g0 = Field::euclidean(&grid);
    let geo = Geometry::new(&g0)?;
    let static_err = geo.bakry_emery_ricci().max_abs_diff_inner(&g0, BOUNDARY_MARGIN);
    let flow = Flow::new(&g0)?;
    let cfg = IntegratorConfig { dt: 1e-3, t_end: 5.0, diagnostics_stride: 100, ..IntegratorConfig::default() };
    let run = flow.run(&flow.initial(&Field::zeros(&grid, shape::ENDO), Form::H)?, &cfg)?;
    let flow_err = run.records.iter().map(|r| r.soliton_residual).fold(0.0, f64::max);
    let t_last = run.records.last().map_or(0.0, |r| r.t);
    outcome(
        static_err <= 5.0 * h2 && flow_err <= 10.0 * h2 && run.abort.is_none() && (t_last - 5.0).abs() < 1e-9,
        format!(
            "static {:.2e} <= {:.2e}, flow sup {:.2e} <= {:.2e} to t = {t_last}",
            static_err,
            5.0 * h2,
            flow_err,
            10.0 * h2
        ),
    )
}

fn flat_torus_closed_form() -> Result<Outcome> {
    let grid = torus(2, 8, |_| 0.0)?;
    let g0 = Field::constant(&grid, shape::METRIC, &[1.5, 0.3, 0.3, 0.8]);
    let flow = Flow::new(&g0)?;
    let zero = Field::zeros(&grid, shape::ENDO);
    let exact = g0.scale((-1.0f64).exp());
    let err = |form: Form, dt: f64| -> Result<f64> {
        let cfg = IntegratorConfig {
            dt,
            t_end: 1.0,
            cfl_guard: 1e9,
            diagnostics_stride: 1 << 30,
            ..IntegratorConfig::default()
        };
        let run = flow.run(&flow.initial(&zero, form)?, &cfg)?;
        Ok(flow.metric(&run.last)?.max_abs_diff(&exact) / exact.max_abs())
    };
    let mut pass = true;
    let mut detail = Vec::new();
    for form in [Form::G, Form::H, Form::A] {
        let e = err(form, 1e-3)?;
        pass &= e <= 1e-8;
        detail.push(format!("{form:?} rel {e:.1e}"));
    }
    for form in [Form::G, Form::H] {
        let dts = [0.2, 0.1, 0.05];
        let errs = dts.iter().map(|&dt| err(form, dt)).collect::<Result<Vec<_>>>()?;
        let order = refinement_slope(&dts, &errs).unwrap_or(f64::NAN);
        pass &= order >= 3.8;
        detail.push(format!("{form:?} order {order:.2}"));
    }
    outcome(pass, detail.join(", "))
}

/// Drift is measured in the Ω-weighted L² norm; the sup norm is reported alongside and is
/// dominated by the far tail of the truncated box, where Ω < e^{-20}.
fn three_forms_agree() -> Result<Outcome> {
    let mut hs = Vec::new();
    let mut drifts = Vec::new();
    let mut sups = Vec::new();
    let mut cs = Vec::new();
    let mut aborted = false;
    for n in [128, 256, 512] {
        let grid = gaussian_1d(n)?;
        let flow = Flow::new(&Field::euclidean(&grid))?;
        let h = grid.h_max();
        let dt = 0.25 * h * h;
        let cfg = IntegratorConfig { dt, t_end: 1.0, diagnostics_stride: 100, p_max: 1, ..IntegratorConfig::default() };
        let (report, _) = flow.cross_check(&sin_perturbation(&grid), &cfg)?;
        aborted |= !report.aborted.is_empty();
        hs.push(h);
        drifts.push(report.max_l2);
        sups.push(report.max_sup);
        cs.push(report.max_l2 / (dt.powi(4) + h * h));
    }
    let slope = refinement_slope(&hs, &drifts).unwrap_or(f64::NAN);
    let sup_slope = refinement_slope(&hs, &sups).unwrap_or(f64::NAN);
    outcome(
        !aborted && slope >= 1.8,
        format!(
            "L2 drift [{}], slope {slope:.2}, C {cs:.4?}; sup drift [{}], slope {sup_slope:.2}",
            sci(&drifts),
            sci(&sups)
        ),
    )
}

fn gradient_consistency() -> Result<Outcome> {
    let grid = gaussian(2, 48)?;
    let flow = Flow::new(&Field::euclidean(&grid))?;
    let ctx = flow.context();
    let k = polarization(&grid);
    let mut rng = testbeds::rng(20);
    let eps = 1e-5;
    let (mut worst_fd, mut worst_rhs) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let a = ctx.random_commuting(&mut rng, Some(&k)).scale(0.1);
        let v = ctx.random_commuting(&mut rng, Some(&k));
        let fd = (ctx.w_bold(&a.axpy(eps, &v))? - ctx.w_bold(&a.axpy(-eps, &v))?) / (2.0 * eps);
        let grad = ctx.grad_w(&a)?;
        let an = 4.0 * ctx.l2(&grad, &v)?;
        worst_fd = worst_fd.max((fd - an).abs() / an.abs().max(1.0));
        worst_rhs = worst_rhs.max((&flow.rhs_a(&a)? + &grad).max_abs());
    }
    outcome(
        worst_fd <= 1e-5 && worst_rhs <= 1e-10,
        format!("FD rel {worst_fd:.1e} <= 1e-5, |rhs_A + grad| {worst_rhs:.1e} <= 1e-10"),
    )
}

fn convexity() -> Result<Outcome> {
    let grid = gaussian(2, 48)?;
    let ctx = WContext::new(&Field::euclidean(&grid))?;
    let spec = ConvexSetSpec::new(ConvexKind::PlusPlus).with_polarization(polarization(&grid));
    let mut rng = testbeds::rng(5);
    let mut min_d2 = f64::INFINITY;
    let mut min_mid = f64::INFINITY;
    let mut worst_sv = 0.0f64;
    let eps = 1e-3;
    for _ in 0..20 {
        let a0 = ctx.random_member(&mut rng, &spec, 0.3)?;
        let a1 = ctx.random_member(&mut rng, &spec, 0.3)?;
        min_d2 = min_d2.min(ctx.segment_scan(&a0, &a1, 11)?.min_second_diff());
        let mid = a0.zip_map(&a1, |x, y| 0.5 * (x + y));
        min_mid = min_mid.min(ctx.convex_set_membership(&mid, &spec)?.margin);
        let v = &a1 - &a0;
        let w = |s: f64| ctx.w_bold(&a0.axpy(s, &v));
        let fd = (w(eps)? - 2.0 * w(0.0)? + w(-eps)?) / (eps * eps);
        worst_sv = worst_sv.max(rel(fd, ctx.second_variation_w(&a0, &v)?));
    }
    outcome(
        min_d2 >= -1e-8 && min_mid >= 0.0 && worst_sv <= 1e-4,
        format!(
            "min second difference {min_d2:.2e}, min midpoint margin {min_mid:.3}, second variation rel {worst_sv:.1e}"
        ),
    )
}

fn lower_bound() -> Result<Outcome> {
    let grid = gaussian(2, 48)?;
    let ctx = WContext::new(&Field::euclidean(&grid))?;
    let eps = ctx.ricci_lower_bound()?.min(1.0);
    let lb = ctx.w_lower_bound(eps)?;
    let k = polarization(&grid);
    let mut rng = testbeds::rng(6);
    let mut min_gap = f64::INFINITY;
    for i in 0..50 {
        let amp = 0.1 + 0.9 * (i % 10) as f64 / 9.0;
        let a = ctx.random_commuting(&mut rng, Some(&k)).scale(amp);
        min_gap = min_gap.min(ctx.w_bold(&a)? - lb);
    }
    let line = gaussian_1d(256)?;
    let ctx1 = WContext::new(&Field::euclidean(&line))?;
    let gap0 = ctx1.w_bold(&Field::zeros(&line, shape::ENDO))? - ctx1.w_lower_bound(1.0)?;
    let h2 = line.h_max().powi(2);
    outcome(
        min_gap >= -1e-6 && gap0.abs() <= 10.0 * h2,
        format!("min gap over 50 samples {min_gap:.3e} (eps {eps:.4}), soliton gap {gap0:.2e} <= {:.2e}", 10.0 * h2),
    )
}

/// The 1D sin-perturbed run with snapshots, shared by the decay and H^p checks.
fn perturbed_run() -> &'static (Flow, FlowRun) {
    static RUN: OnceLock<(Flow, FlowRun)> = OnceLock::new();
    RUN.get_or_init(|| {
        let grid = gaussian_1d(256).expect("grid");
        let flow = Flow::new(&Field::euclidean(&grid)).expect("flow");
        let cfg = IntegratorConfig {
            dt: 5e-4,
            t_end: 4.0,
            diagnostics_stride: 20,
            p_max: 3,
            keep_snapshots: true,
            ..IntegratorConfig::default()
        };
        let run = flow.run(&flow.initial(&sin_perturbation(&grid), Form::H).expect("initial"), &cfg).expect("run");
        (flow, run)
    })
}

fn exponential_decay() -> Result<Outcome> {
    let (flow, run) = perturbed_run();
    let heat = flow.heat_diagnostics(run)?;
    let w_rise = run.records.windows(2).map(|w| w[1].w - w[0].w).fold(f64::NEG_INFINITY, f64::max);
    outcome(
        run.abort.is_none() && heat.delta > 0.0 && heat.decay_ok && w_rise <= 1e-8 && heat.sandwich_margin >= 0.0,
        format!(
            "delta {:.3}, decay ratio {:.4} <= 1.01, max W increase {w_rise:.2e}, C {:.3} sandwich margin {:.3}",
            heat.delta, heat.decay_ratio, heat.c_sandwich, heat.sandwich_margin
        ),
    )
}

fn identity_suite() -> Result<Outcome> {
    let report = run_suite(&SuiteConfig::default())?;
    let ids = report.summary().identities.len();
    let mut detail = format!("{} rows over {ids} identities, {} failures", report.reports.len(), report.failures.len());
    if let Some(f) = report.failures.first() {
        detail.push_str(&format!("; first: {f}"));
    }
    outcome(report.passed(), detail)
}

fn hamilton_constants() -> Result<Outcome> {
    let sample = |n: usize| -> Result<Vec<(Field, EndoField)>> {
        let mut rng = testbeds::rng(9);
        (0..10)
            .map(|_| {
                let log_omega = Modes::random(&mut rng, 1, 3, 2, 0.5);
                let grid = torus(1, n, |x| log_omega.eval(x))?;
                let g = testbeds::random_metric(&mut rng, &grid, 0.5);
                let a = testbeds::random_sym2(&mut rng, &grid, 1.0);
                Ok((g, a))
            })
            .collect()
    };
    let coarse = verify_hamilton_interpolation(&sample(64)?)?;
    let fine = verify_hamilton_interpolation(&sample(128)?)?;
    let change = coarse.relative_change(&fine);
    let worst = change.lemma.max(change.interp_i).max(change.interp_ii);
    let c = &fine.c_hat;
    outcome(
        coarse.is_finite() && fine.is_finite() && worst <= 0.05,
        format!(
            "C = ({:.4}, {:.4}, {:.4}), largest change under doubling {worst:.2e}",
            c.lemma, c.interp_i, c.interp_ii
        ),
    )
}

fn flat_geometry() -> Result<Outcome> {
    // Curvature of the space of metrics on commuting triples u* = B, v* = B², w* = 𝕀 + B³.
    let grid = torus(2, 16, |_| 0.0)?;
    let mut rng = testbeds::rng(10);
    let mut curv = 0.0f64;
    for _ in 0..5 {
        let g = testbeds::random_metric(&mut rng, &grid, 0.4);
        let b = raise_form(&field_inverse(&g)?, &testbeds::random_sym2(&mut rng, &grid, 0.8));
        let mm = |x: &Field, y: &Field| einsum("ij,jk->ik", &[x, y], shape::ENDO);
        let b2 = mm(&b, &b);
        let w = &Field::identity(&grid) + &mm(&b2, &b);
        let lower = |e: &Field| einsum("ij,jk->ik", &[&g, e], shape::METRIC);
        curv = curv.max(curvature_m(&g, &lower(&b), &lower(&b2), &lower(&w))?.max_abs());
    }

    // Geodesics with a Codazzi velocity commuting with K.
    let mut hs = Vec::new();
    let mut res = Vec::new();
    for n in [32, 64, 128] {
        let grid = torus(2, n, |x| 0.2 * x[0].cos() * x[1].sin())?;
        let g0 = Field::euclidean(&grid);
        let v = Field::from_fn(&grid, shape::METRIC, |x, o| {
            o.copy_from_slice(&[0.3 * x[0].sin(), 0.0, 0.0, 0.2 * x[1].cos()])
        });
        let recs = conservation_along_geodesic(&g0, &v, &polarization(&grid), &[0.0, 0.5, 1.0, 2.0], 2)?;
        hs.push(grid.h_max());
        res.push(recs.iter().map(|r| r.value).fold(0.0, f64::max));
    }
    let geo_ok = res.iter().all(|&r| r <= 1e-12) || refinement_slope(&hs, &res).is_some_and(|s| s >= 1.8);

    let (_, run) = perturbed_run();
    let hp = hp_monitor(&run.records, 3);
    let thetas: Vec<f64> = hp.iter().map(|e| e.theta.unwrap_or(f64::NAN)).collect();
    let hp_ok = hp.len() == 4 && thetas.iter().all(|&t| t > 0.0);
    outcome(
        curv <= 1e-12 && geo_ok && hp_ok,
        format!("curvature {curv:.1e}, geodesic residuals [{}], theta_p {thetas:.3?}", sci(&res)),
    )
}

fn main() {
    let criteria: [(&str, Criterion); 10] = [
        ("Gaussian soliton fixed point", soliton_fixed_point),
        ("closed-form flat torus flow", flat_torus_closed_form),
        ("three-form equivalence", three_forms_agree),
        ("gradient-flow consistency", gradient_consistency),
        ("convexity", convexity),
        ("entropy lower bound", lower_bound),
        ("exponential decay", exponential_decay),
        ("identity suite", identity_suite),
        ("interpolation constants", hamilton_constants),
        ("flat-geometry checks", flat_geometry),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (pass, detail) = match f() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!pass);
        println!(
            "criterion {}: {} [{name}] {detail} ({:.1}s)",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
