use std::io::Write;
use std::path::Path;

use serde::Serialize;

use omega_srf::domain_grid::products::commutator;
use omega_srf::domain_grid::Field;
use omega_srf::identity_verifier::{run_suite, write_suite_csv, SuiteSummary};
use omega_srf::metric_space_geometry::{conservation_along_geodesic, ConservationRecord};
use omega_srf::srf_flow::{hp_monitor, write_records_csv, DiagnosticsRecord, HpEntry};
use omega_srf::srf_flow::Flow;
use omega_srf::testbeds;
use omega_srf::w_functional::{ConvexKind, ConvexSetSpec, WContext};

use crate::config::RunConfig;
use crate::error::{AbortKind, CliError};
use crate::output::{fmt_f64, OutDir, Provenance};

fn open_out(cfg: &RunConfig, command: &'static str) -> Result<OutDir, CliError> {
    OutDir::create(&cfg.output_dir, Provenance { command, config_hash: cfg.hash() })
}

#[derive(Serialize)]
struct AbortInfo {
    kind: &'static str,
    message: String,
}

#[derive(Serialize)]
struct RunSummary<'a> {
    testbed: &'a crate::config::TestbedConfig,
    h: f64,
    steps: usize,
    t_final: f64,
    records: usize,
    max_soliton_residual: f64,
    initial_tangency: Option<f64>,
    last: Option<&'a DiagnosticsRecord>,
    hp_monitor: Vec<HpEntry>,
    abort: Option<AbortInfo>,
}

pub fn run(cfg: &RunConfig) -> Result<(), CliError> {
    let grid = cfg.grid()?;
    let k = cfg.polarization(&grid)?;
    let g0 = Field::euclidean(&grid);
    let a0 = cfg.initial.build(&grid, false)?;
    let flow = Flow::new(&g0)?;
    let state = flow.initial(&a0, cfg.flow.form)?;
    let it = &cfg.flow.integrator;
    log::info!("run: {:?} form, dt = {}, t_end = {}", cfg.flow.form, it.dt, it.t_end);
    let run = flow.run(&state, it)?;

    let out = open_out(cfg, "run")?;
    out.csv("trajectory.csv", |w| Ok(write_records_csv(&run.records, w)?))?;
    let h = grid.h_max();
    let max_soliton_residual = run.records.iter().map(|r| r.soliton_residual).fold(0.0, f64::max);
    let summary = RunSummary {
        testbed: &cfg.testbed,
        h,
        steps: run.steps,
        t_final: run.last.t,
        records: run.records.len(),
        max_soliton_residual,
        initial_tangency: k.as_ref().map(|k| commutator(k.k(), &a0).max_abs()),
        last: run.records.last(),
        hp_monitor: hp_monitor(&run.records, it.p_max),
        abort: run.abort.as_ref().map(|e| AbortInfo { kind: AbortKind::of(e).as_str(), message: e.to_string() }),
    };
    out.json("summary.json", &summary)?;

    if let Some(e) = run.abort {
        return Err(CliError::Numerical(AbortKind::of(&e), e.to_string()));
    }
    if let Some(tol) = cfg.flow.soliton_tolerance {
        let bound = tol * h * h;
        if max_soliton_residual > bound {
            return Err(CliError::Acceptance(format!(
                "soliton residual {max_soliton_residual:e} exceeds {tol}·h² = {bound:e}"
            )));
        }
    }
    println!("run: {} steps to t = {}, max soliton residual {:.3e}", run.steps, run.last.t, max_soliton_residual);
    Ok(())
}

pub fn verify(cfg: &RunConfig) -> Result<(), CliError> {
    let report = run_suite(&cfg.suite)?;
    let out = open_out(cfg, "verify")?;
    out.csv("suite.csv", |w| Ok(write_suite_csv(&report.reports, w)?))?;
    let summary: SuiteSummary = report.summary();
    out.json("suite_summary.json", &summary)?;
    println!("verify: {} rows, {} failures", report.reports.len(), report.failures.len());
    if report.passed() {
        Ok(())
    } else {
        for f in &report.failures {
            eprintln!("  {f}");
        }
        Err(CliError::Acceptance(format!("{} identity checks failed", report.failures.len())))
    }
}

#[derive(Serialize)]
struct ConvexitySummary {
    kind: ConvexKind,
    segments: usize,
    points: usize,
    min_second_diff: f64,
    min_midpoint_margin: f64,
    floor: f64,
}

pub fn convexity(cfg: &RunConfig) -> Result<(), CliError> {
    let grid = cfg.grid()?;
    let g0 = Field::euclidean(&grid);
    let ctx = WContext::new(&g0)?;
    let cs = &cfg.convexity;
    let mut spec = match cs.kind {
        ConvexKind::Delta => ConvexSetSpec::delta(&ctx, cs.delta)?,
        kind => ConvexSetSpec::new(kind),
    };
    spec.seed = cfg.seed;
    if let Some(k) = cfg.polarization(&grid)? {
        spec = spec.with_polarization(k);
    }
    let mut rng = testbeds::rng(cfg.seed);
    let mut rows = Vec::new();
    let mut min_d2 = f64::INFINITY;
    let mut min_mid = f64::INFINITY;
    for s in 0..cs.segments {
        let a0 = ctx.random_member(&mut rng, &spec, cs.amp)?;
        let a1 = ctx.random_member(&mut rng, &spec, cs.amp)?;
        let scan = ctx.segment_scan(&a0, &a1, cs.points)?;
        let mid = ctx.convex_set_membership(&a0.zip_map(&a1, |x, y| 0.5 * (x + y)), &spec)?.margin;
        min_d2 = min_d2.min(scan.min_second_diff());
        min_mid = min_mid.min(mid);
        rows.push((s, scan, mid));
    }

    let out = open_out(cfg, "convexity")?;
    out.csv("convexity.csv", |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["segment", "index", "t", "w_bold", "second_diff"])?;
        for (s, scan, _) in &rows {
            for i in 0..scan.t.len() {
                let d2 = if i == 0 || i + 1 == scan.t.len() { String::new() } else { fmt_f64(scan.second_diff[i - 1]) };
                c.write_record([s.to_string(), i.to_string(), fmt_f64(scan.t[i]), fmt_f64(scan.w[i]), d2])?;
            }
        }
        c.flush()?;
        Ok(())
    })?;
    out.json(
        "convexity_summary.json",
        &ConvexitySummary {
            kind: cs.kind,
            segments: cs.segments,
            points: cs.points,
            min_second_diff: min_d2,
            min_midpoint_margin: min_mid,
            floor: cs.floor,
        },
    )?;

    let mut stdout = std::io::stdout().lock();
    writeln!(stdout, "{:>8} {:>16} {:>16}", "segment", "min second diff", "midpoint margin")?;
    for (s, scan, mid) in &rows {
        writeln!(stdout, "{:>8} {:>16.6e} {:>16.6e}", s, scan.min_second_diff(), mid)?;
    }
    if min_d2 < cs.floor {
        return Err(CliError::Acceptance(format!("second difference {min_d2:e} below {:e}", cs.floor)));
    }
    if min_mid < 0.0 {
        return Err(CliError::Acceptance(format!("segment midpoint left the set (margin {min_mid:e})")));
    }
    Ok(())
}

pub fn geodesic(cfg: &RunConfig) -> Result<(), CliError> {
    let geo = cfg.geodesic.as_ref().ok_or_else(|| CliError::Config("geodesic needs a [geodesic] section".into()))?;
    let grid = cfg.grid()?;
    let k = cfg.polarization(&grid)?.ok_or_else(|| CliError::Config("geodesic needs k_diag".into()))?;
    let g0 = Field::euclidean(&grid);
    let v = geo.velocity.build(&grid, true)?;
    let records: Vec<ConservationRecord> = conservation_along_geodesic(&g0, &v, &k, &geo.times, geo.p_max)?;

    let out = open_out(cfg, "geodesic")?;
    out.csv("geodesic.csv", |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["time", "residual_name", "value"])?;
        for r in &records {
            c.write_record([fmt_f64(r.time), r.residual_name.clone(), fmt_f64(r.value)])?;
        }
        c.flush()?;
        Ok(())
    })?;
    let worst = records.iter().map(|r| r.value).fold(0.0, f64::max);
    out.json("geodesic_summary.json", &serde_json::json!({ "records": records.len(), "max_residual": worst }))?;
    println!("geodesic: {} records, max residual {worst:.3e}", records.len());
    match geo.tolerance {
        Some(tol) if !(worst <= tol) => Err(CliError::Acceptance(format!("residual {worst:e} exceeds {tol:e}"))),
        _ => Ok(()),
    }
}

/// Files `report` knows how to render, in display order.
const KNOWN_OUTPUTS: &[&str] = &[
    "summary.json",
    "trajectory.csv",
    "suite_summary.json",
    "suite.csv",
    "convexity_summary.json",
    "convexity.csv",
    "geodesic_summary.json",
    "geodesic.csv",
];

pub fn report(path: &Path, out: &mut impl Write) -> Result<(), CliError> {
    if path.is_dir() {
        let mut found = false;
        for name in KNOWN_OUTPUTS {
            let p = path.join(name);
            if p.is_file() {
                found = true;
                render_file(&p, out)?;
            }
        }
        if !found {
            return Err(CliError::Config(format!("no result files in {}", path.display())));
        }
        Ok(())
    } else if path.is_file() {
        render_file(path, out)
    } else {
        Err(CliError::Config(format!("{} does not exist", path.display())))
    }
}

fn render_file(path: &Path, out: &mut impl Write) -> Result<(), CliError> {
    writeln!(out, "== {}", path.file_name().unwrap_or_default().to_string_lossy())?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => {
            let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
            let mut lines = Vec::new();
            flatten_json("", &v, &mut lines);
            let width = lines.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
            for (k, v) in lines {
                writeln!(out, "{k:<width$}  {v}")?;
            }
        }
        Some("csv") => render_csv(path, out)?,
        _ => return Err(CliError::Config(format!("cannot render {}", path.display()))),
    }
    writeln!(out)?;
    Ok(())
}

fn flatten_json(prefix: &str, v: &serde_json::Value, out: &mut Vec<(String, String)>) {
    let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        serde_json::Value::Object(m) => m.iter().for_each(|(k, v)| flatten_json(&key(k), v, out)),
        // Long arrays (per-identity tables) are summarized by length.
        serde_json::Value::Array(a) if a.len() > 8 => out.push((prefix.to_string(), format!("[{} entries]", a.len()))),
        serde_json::Value::Array(a) => a.iter().enumerate().for_each(|(i, v)| flatten_json(&key(&i.to_string()), v, out)),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

fn short(cell: &str) -> String {
    match cell.parse::<f64>() {
        Ok(v) if cell.contains(['e', '.']) => format!("{v:.4e}"),
        _ => cell.to_string(),
    }
}

/// Aligned columns with numbers shortened; at most 40 rows.
fn render_csv(path: &Path, out: &mut impl Write) -> Result<(), CliError> {
    const MAX_ROWS: usize = 40;
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut total = 0;
    for rec in rdr.records() {
        let rec = rec?;
        total += 1;
        if rows.len() < MAX_ROWS {
            rows.push(rec.iter().map(short).collect());
        }
    }
    let widths: Vec<usize> = (0..header.len())
        .map(|j| rows.iter().map(|r| r.get(j).map_or(0, |c| c.len())).chain([header[j].len()]).max().unwrap_or(0))
        .collect();
    let line = |cells: &[String]| -> String {
        cells.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect::<Vec<_>>().join("  ")
    };
    writeln!(out, "{}", line(&header))?;
    for r in &rows {
        writeln!(out, "{}", line(r))?;
    }
    if total > rows.len() {
        writeln!(out, "... {} more rows", total - rows.len())?;
    }
    Ok(())
}
