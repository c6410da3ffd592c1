use std::io::Write;

use serde::Serialize;

use super::{Flow, Form, FlowRun, IntegratorConfig};
use crate::domain_grid::linalg::{eigenvalues_g, field_trace};
use crate::domain_grid::products::{norm2_g, raise_form};
use crate::domain_grid::{einsum, integrate_omega, shape, EndoField, Field, MetricField};
use crate::error::Result;
use crate::riemann_ops::{Geometry, BOUNDARY_MARGIN};
use crate::w_functional::w_omega_geometry;

/// Snapshot of the monitored quantities at one time.
#[derive(Clone, Debug, Serialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    /// `sup |ġ|_g`.
    pub gdot_sup: f64,
    /// `sup |∇ġ*|_g`.
    pub dgdot_sup: f64,
    /// `W_Ω(g_t)`.
    pub w: f64,
    /// `𝐖_Ω(A_t)`.
    pub w_bold: f64,
    /// `sup |Ric_g(Ω) - g|_g`; the same tensor as `ġ`, kept for the trajectory file.
    pub soliton_residual: f64,
    /// Smallest eigenvalue of `Ric*_g(Ω)` away from truncated edges.
    pub ric_min_eig: f64,
    /// `∫ |∇^p ġ*|²_g Ω` for `p = 0..=p_max`.
    pub seminorms: Vec<f64>,
    /// Largest pairwise sup-distance between the forms, when cross-checked.
    pub drift: Option<f64>,
}

fn sqrt_sup(n2: &Field) -> f64 {
    n2.max_abs_inner(BOUNDARY_MARGIN).sqrt()
}

impl Flow {
    /// All record entries for the metric `g` with log coordinate `a`.
    pub fn diagnostics(&self, t: f64, g: &MetricField, a: &EndoField, p_max: usize) -> Result<DiagnosticsRecord> {
        let geo = Geometry::new(g)?;
        let gdot = geo.bakry_emery_ricci() - g;
        let gdot_sup = sqrt_sup(&norm2_g(&gdot, g, geo.ginv()));
        let gstar = raise_form(geo.ginv(), &gdot);
        let mut seminorms = Vec::with_capacity(p_max + 1);
        let mut dgdot_sup = 0.0;
        let mut d = gstar;
        for p in 0..=p_max.max(1) {
            if p > 0 {
                d = geo.nabla(&d);
            }
            let n2 = norm2_g(&d, g, geo.ginv());
            if p == 1 {
                dgdot_sup = sqrt_sup(&n2);
            }
            if p <= p_max {
                seminorms.push(integrate_omega(&n2)?);
            }
        }
        let ric = eigenvalues_g(g, &geo.ric_star_omega())?;
        let grid = g.grid();
        let ric_min_eig = ric
            .iter()
            .enumerate()
            .filter(|(p, _)| grid.edge_distance(*p) >= BOUNDARY_MARGIN)
            .map(|(_, v)| v[0])
            .fold(f64::INFINITY, f64::min);
        Ok(DiagnosticsRecord {
            t,
            gdot_sup,
            dgdot_sup,
            w: w_omega_geometry(&geo)?,
            w_bold: self.ctx.w_bold(a)?,
            soliton_residual: gdot_sup,
            ric_min_eig,
            seminorms,
            drift: None,
        })
    }
}

/// One CSV row per record; seminorm columns are `seminorm_0 ..`.
pub fn write_records_csv<W: Write>(records: &[DiagnosticsRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let np = records.first().map_or(0, |r| r.seminorms.len());
    let mut header: Vec<String> =
        ["t", "gdot_sup", "dgdot_sup", "w", "w_bold", "soliton_residual", "ric_min_eig"].iter().map(|s| s.to_string()).collect();
    header.extend((0..np).map(|p| format!("seminorm_{p}")));
    header.push("drift".into());
    w.write_record(&header)?;
    for r in records {
        let mut row: Vec<String> = [r.t, r.gdot_sup, r.dgdot_sup, r.w, r.w_bold, r.soliton_residual, r.ric_min_eig]
            .iter()
            .map(|v| format!("{v:.17e}"))
            .collect();
        row.extend(r.seminorms.iter().map(|v| format!("{v:.17e}")));
        row.push(r.drift.map(|v| format!("{v:.17e}")).unwrap_or_default());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Pairwise distance between the three forms integrated from the same data.
#[derive(Clone, Debug, Serialize)]
pub struct DriftReport {
    pub times: Vec<f64>,
    /// Per time: the largest pairwise `sup |g_i - g_j|_{g₀}`.
    pub sup: Vec<f64>,
    /// Per time: the largest pairwise `(∫ |g_i - g_j|²_{g₀} Ω)^{1/2}`.
    pub l2: Vec<f64>,
    pub max_sup: f64,
    pub max_l2: f64,
    /// Forms that aborted, with the reason.
    pub aborted: Vec<(Form, String)>,
}

impl Flow {
    /// Integrates the log coordinate `a0` in the metric, `H` and `A` forms and
    /// compares the metrics at every diagnostics time.
    pub fn cross_check(&self, a0: &EndoField, cfg: &IntegratorConfig) -> Result<(DriftReport, Vec<FlowRun>)> {
        let cfg = IntegratorConfig { keep_snapshots: true, ..cfg.clone() };
        let forms = [Form::G, Form::H, Form::A];
        let mut runs = Vec::with_capacity(3);
        for form in forms {
            runs.push(self.run(&self.initial(a0, form)?, &cfg)?);
        }
        let aborted = forms
            .iter()
            .zip(&runs)
            .filter_map(|(f, r)| r.abort.as_ref().map(|e| (*f, e.to_string())))
            .collect();
        let len = runs.iter().map(|r| r.snapshots.len()).min().unwrap_or(0);
        let g0 = self.g0();
        let ginv0 = self.ctx.geometry().ginv();
        let mut report = DriftReport { times: Vec::new(), sup: Vec::new(), l2: Vec::new(), max_sup: 0.0, max_l2: 0.0, aborted };
        for k in 0..len {
            let (mut s, mut l) = (0.0f64, 0.0f64);
            for (i, j) in [(0, 1), (0, 2), (1, 2)] {
                let d = &runs[i].snapshots[k].1 - &runs[j].snapshots[k].1;
                let n2 = norm2_g(&d, g0, ginv0);
                s = s.max(sqrt_sup(&n2));
                l = l.max(integrate_omega(&n2)?.max(0.0).sqrt());
            }
            report.times.push(runs[0].snapshots[k].0);
            report.sup.push(s);
            report.l2.push(l);
            report.max_sup = report.max_sup.max(s);
            report.max_l2 = report.max_l2.max(l);
        }
        for run in &mut runs {
            for (rec, s) in run.records.iter_mut().zip(&report.sup) {
                rec.drift = Some(*s);
            }
        }
        Ok((report, runs))
    }
}

/// Checks of the decay estimates along a stored trajectory.
#[derive(Clone, Debug, Serialize)]
pub struct HeatReport {
    /// Infimum over the trajectory of the smallest eigenvalue of `Ric*(Ω)`.
    pub delta: f64,
    /// Largest `sup |□|ġ|² - (-2|∇ġ*|² - 4|ġ|² - 4 Tr(ġ*)³)|` over interior snapshots.
    pub identity_residual: f64,
    /// Largest `(∫ r² Ω / ∫ Ω)^{1/2}` of the same residual `r` over interior snapshots.
    pub identity_residual_l2: f64,
    /// Largest magnitude among the terms of the heat identity, for normalization.
    pub identity_scale: f64,
    /// Largest `□|ġ|² + δ|ġ|²` (nonpositive up to discretization when the inequality holds).
    pub inequality_excess: f64,
    /// Largest `sup|ġ_t| / (sup|ġ₀| e^{-δt/2})` over the records.
    pub decay_ratio: f64,
    pub decay_ok: bool,
    /// `∫₀^∞ sup|ġ| dt`: trapezoid over the records plus the exponential tail.
    pub c_sandwich: f64,
    /// Smallest `log λ` margin in `e^{-C} ≤ λ(g₀⁻¹ g_t) ≤ e^C` over the snapshots.
    pub sandwich_margin: f64,
    /// `max_t e^t sup|∇ġ*|`.
    pub c1_estimate: f64,
    /// Least-squares decay rate of `sup|∇ġ*|`.
    pub dgdot_rate: Option<f64>,
}

/// Tolerance factor on the exponential decay bound.
pub const DECAY_SLACK: f64 = 1e-2;

/// Least-squares slope of `-log y` against `t`, skipping values below `floor`.
pub fn fit_decay_rate(t: &[f64], y: &[f64], floor: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = t.iter().zip(y).filter(|(_, v)| **v > floor).map(|(a, v)| (*a, v.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(-sxy / sxx)
}

impl Flow {
    /// Evaluates the heat identity, the exponential decay of `|ġ|`, the metric
    /// sandwich and the `|∇ġ*|` bound. Needs a run with snapshots.
    pub fn heat_diagnostics(&self, run: &FlowRun) -> Result<HeatReport> {
        let recs = &run.records;
        let delta = recs.iter().map(|r| r.ric_min_eig).fold(f64::INFINITY, f64::min);
        let snaps = &run.snapshots;

        struct Local {
            n2: Field,
            dn2: Field,
            tr3: Field,
            lap: Field,
        }
        let mut local = Vec::with_capacity(snaps.len());
        for (_, g) in snaps {
            let geo = Geometry::new(g)?;
            let gdot = geo.bakry_emery_ricci() - g;
            let gs = raise_form(geo.ginv(), &gdot);
            let n2 = norm2_g(&gdot, g, geo.ginv());
            let dn2 = norm2_g(&geo.nabla(&gs), g, geo.ginv());
            let gs2 = einsum("ij,jk->ik", &[&gs, &gs], shape::ENDO);
            let tr3 = field_trace(&einsum("ij,jk->ik", &[&gs2, &gs], shape::ENDO));
            let lap = geo.laplacian_omega(&n2);
            local.push(Local { n2, dn2, tr3, lap });
        }
        let mut identity_residual: f64 = 0.0;
        let mut identity_scale: f64 = 0.0;
        let mut identity_residual_l2: f64 = 0.0;
        let mut inequality_excess = f64::NEG_INFINITY;
        for k in 1..snaps.len().saturating_sub(1) {
            let dt = snaps[k + 1].0 - snaps[k - 1].0;
            let l = &local[k];
            let grid = l.n2.grid();
            let mut r2 = Field::zeros(grid, shape::SCALAR);
            for p in 0..grid.npts() {
                if grid.edge_distance(p) < BOUNDARY_MARGIN {
                    continue;
                }
                let ddt = (local[k + 1].n2.data()[p] - local[k - 1].n2.data()[p]) / dt;
                let boxed = l.lap.data()[p] + 2.0 * ddt;
                let u = l.n2.data()[p];
                let rhs = -2.0 * l.dn2.data()[p] - 4.0 * u - 4.0 * l.tr3.data()[p];
                identity_residual = identity_residual.max((boxed - rhs).abs());
                r2.data_mut()[p] = (boxed - rhs).powi(2);
                identity_scale = identity_scale.max(l.lap.data()[p].abs()).max(2.0 * ddt.abs()).max(rhs.abs());
                inequality_excess = inequality_excess.max(boxed + delta * u);
            }
            identity_residual_l2 = identity_residual_l2.max((integrate_omega(&r2)? / grid.volume()).sqrt());
        }
        if !inequality_excess.is_finite() {
            inequality_excess = 0.0;
        }

        let sup0 = recs.first().map_or(0.0, |r| r.gdot_sup);
        let mut decay_ratio: f64 = 0.0;
        for r in recs {
            let bound = sup0 * (-0.5 * delta * r.t).exp();
            if bound > 0.0 {
                decay_ratio = decay_ratio.max(r.gdot_sup / bound);
            } else if r.gdot_sup > 0.0 {
                decay_ratio = f64::INFINITY;
            }
        }
        let decay_ok = decay_ratio <= 1.0 + DECAY_SLACK;

        let mut c = 0.0;
        for w in recs.windows(2) {
            c += 0.5 * (w[1].t - w[0].t) * (w[0].gdot_sup + w[1].gdot_sup);
        }
        if let Some(last) = recs.last() {
            if delta > 0.0 {
                c += 2.0 * last.gdot_sup / delta;
            }
        }
        let g0 = self.g0();
        let ginv0 = self.ctx.geometry().ginv();
        let mut sandwich_margin = f64::INFINITY;
        for (_, g) in snaps {
            let b = raise_form(ginv0, g);
            for ev in eigenvalues_g(g0, &b)? {
                for l in ev {
                    sandwich_margin = sandwich_margin.min(c - l.ln().abs());
                }
            }
        }

        let c1_estimate = recs.iter().map(|r| r.t.exp() * r.dgdot_sup).fold(0.0, f64::max);
        let ts: Vec<f64> = recs.iter().map(|r| r.t).collect();
        let ds: Vec<f64> = recs.iter().map(|r| r.dgdot_sup).collect();
        Ok(HeatReport {
            delta,
            identity_residual,
            identity_residual_l2,
            identity_scale,
            inequality_excess,
            decay_ratio,
            decay_ok,
            c_sandwich: c,
            sandwich_margin,
            c1_estimate,
            dgdot_rate: fit_decay_rate(&ts, &ds, 1e-300),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HpStatus {
    Decaying,
    /// Identically zero up to the floor along the whole run.
    Vanishing,
    NotDecaying,
}

#[derive(Clone, Debug, Serialize)]
pub struct HpEntry {
    pub p: usize,
    pub theta: Option<f64>,
    pub max_value: f64,
    pub status: HpStatus,
}

/// Seminorms below this are treated as zero.
pub const HP_FLOOR: f64 = 1e-26;

/// Fits `∫|∇^p ġ*|² Ω ≈ C_p e^{-θ_p t}` for every recorded `p ≤ p_max`.
pub fn hp_monitor(records: &[DiagnosticsRecord], p_max: usize) -> Vec<HpEntry> {
    let ts: Vec<f64> = records.iter().map(|r| r.t).collect();
    (0..=p_max)
        .filter(|p| records.first().is_some_and(|r| *p < r.seminorms.len()))
        .map(|p| {
            let ys: Vec<f64> = records.iter().map(|r| r.seminorms[p]).collect();
            let max_value = ys.iter().cloned().fold(0.0, f64::max);
            let theta = fit_decay_rate(&ts, &ys, HP_FLOOR);
            let status = if max_value <= HP_FLOOR {
                HpStatus::Vanishing
            } else if theta.is_some_and(|v| v > 0.0) {
                HpStatus::Decaying
            } else {
                HpStatus::NotDecaying
            };
            HpEntry { p, theta, max_value, status }
        })
        .collect()
}
