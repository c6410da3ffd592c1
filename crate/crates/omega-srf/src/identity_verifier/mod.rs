//! Finite-difference certification of the variation formulas and geometric
//! identities used by the flow. Every identity is evaluated on a ladder of
//! grids with `dt = h`, and must converge at second order on families that
//! satisfy its hypotheses while failing clearly on families or right sides
//! that do not.

mod checks;
mod families;
mod hamilton;

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

pub use checks::{catalogue, Check, Eval, Evaluator};
pub use families::{Family, FamilyKind};
pub use hamilton::*;

use crate::domain_grid::Field;
use crate::error::{Result, SrfError};
use crate::riemann_ops::Sides;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Control {
    /// Hypotheses hold; the residual must meet its budget and converge.
    Positive,
    /// The family violates a hypothesis; the residual must stay large.
    Negative,
    /// A right side with one sign flipped; the residual must stay large.
    Mutant,
}

impl Control {
    pub fn as_str(self) -> &'static str {
        match self {
            Control::Positive => "positive",
            Control::Negative => "negative",
            Control::Mutant => "mutant",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IdentityReport {
    pub identity_id: String,
    pub instance: String,
    pub family: FamilyKind,
    pub control: Control,
    /// Index of the grid in the refinement ladder.
    pub level: usize,
    pub n: usize,
    /// Grid layers next to a truncated edge left out of the norms.
    pub margin: usize,
    pub h: f64,
    pub dt: f64,
    pub lhs_norm: f64,
    pub rhs_norm: f64,
    pub residual: f64,
    pub hypothesis_defect: Option<f64>,
    /// Least-squares slope of `log residual` against `log h` over the ladder.
    pub slope: Option<f64>,
    #[serde(skip)]
    pub sides: Option<Sides>,
}

impl IdentityReport {
    fn new(id: &str, instance: String, control: Control, level: usize, fam: &Family, timed: bool, lhs: Field, rhs: Field) -> Self {
        let margin = fam.margin();
        let sides = Sides::with_margin(lhs, rhs, margin);
        let lhs_norm = sides.lhs.max_abs_inner(margin);
        let rhs_norm = sides.rhs.max_abs_inner(margin);
        IdentityReport {
            identity_id: id.to_string(),
            instance,
            family: fam.kind,
            control,
            level,
            n: fam.grid().axes()[0].n,
            margin,
            h: fam.h(),
            dt: if timed { fam.dt } else { 0.0 },
            lhs_norm,
            rhs_norm,
            residual: sides.residual,
            hypothesis_defect: None,
            slope: None,
            sides: Some(sides),
        }
    }

    /// `‖lhs − rhs‖∞` over the interior, from the stored sides.
    pub fn recompute_residual(&self) -> Option<f64> {
        self.sides.as_ref().map(|s| s.lhs.max_abs_diff_inner(&s.rhs, self.margin))
    }

    pub fn scale(&self) -> f64 {
        self.lhs_norm.max(self.rhs_norm)
    }

    /// `κ (h² + dt²) max(1, scale)`.
    pub fn budget(&self, kappa: f64) -> f64 {
        kappa * (self.h * self.h + self.dt * self.dt) * self.scale().max(1.0)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub seed: u64,
    pub levels_1d: Vec<usize>,
    pub levels_2d: Vec<usize>,
    pub kappa: f64,
    pub min_slope: f64,
    pub negative_factor: f64,
    /// Identity ids to run; empty runs the whole catalogue.
    pub only: Vec<String>,
    /// Keep both sides of every evaluation in memory.
    pub keep_sides: bool,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            seed: 7,
            levels_1d: vec![128, 256, 512],
            levels_2d: vec![64, 128, 256],
            kappa: DEFAULT_KAPPA,
            min_slope: 1.8,
            negative_factor: 100.0,
            only: Vec::new(),
            keep_sides: false,
        }
    }
}

/// Budget constant shared by every identity.
pub const DEFAULT_KAPPA: f64 = 20.0;

/// Residuals below this (relative to `max(1, scale)`) count as exact and are
/// exempt from the slope requirement.
pub const EXACT_TOL: f64 = 1e-10;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuiteReport {
    pub config: SuiteConfig,
    pub reports: Vec<IdentityReport>,
    pub failures: Vec<String>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

impl SuiteConfig {
    fn levels(&self, kind: FamilyKind) -> &[usize] {
        if kind.dim() == 1 {
            &self.levels_1d
        } else {
            &self.levels_2d
        }
    }

    fn validate(&self) -> Result<()> {
        if self.levels_1d.is_empty() || self.levels_1d.len() != self.levels_2d.len() {
            return Err(SrfError::Param("levels_1d and levels_2d must be nonempty and of equal length".into()));
        }
        if !(self.kappa > 0.0) || !(self.negative_factor > 0.0) {
            return Err(SrfError::Param("kappa and negative_factor must be positive".into()));
        }
        let known: Vec<&str> = catalogue().iter().map(|c| c.id).collect();
        if let Some(bad) = self.only.iter().find(|id| !known.contains(&id.as_str())) {
            return Err(SrfError::Param(format!("unknown identity id {bad:?}")));
        }
        Ok(())
    }
}

/// Evaluates one identity on one family and wraps the result in reports
/// (a mutant report is added for positive instances that define one).
pub fn verify(check: &Check, fam: &Family, control: Control, level: usize) -> Result<Vec<IdentityReport>> {
    let Eval { lhs, rhs, mutant, hypothesis_defect, timed } = (check.eval)(fam)?;
    let instance = format!("{}/n={}", fam.label(), fam.grid().axes()[0].n);
    let mut out = Vec::with_capacity(2);
    if let (Control::Positive, Some(m)) = (control, mutant) {
        let mut r = IdentityReport::new(check.id, instance.clone(), Control::Mutant, level, fam, timed, lhs.clone(), m);
        r.hypothesis_defect = hypothesis_defect;
        out.push(r);
    }
    let mut r = IdentityReport::new(check.id, instance, control, level, fam, timed, lhs, rhs);
    r.hypothesis_defect = hypothesis_defect;
    out.insert(0, r);
    Ok(out)
}

/// Least-squares slope of `log y` against `log x`; `None` with fewer than two
/// positive points.
pub fn refinement_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = x.iter().zip(y).filter(|(a, b)| **a > 0.0 && **b > 0.0).map(|(a, b)| (a.ln(), b.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / m, pts.iter().map(|p| p.1).sum::<f64>() / m);
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Runs the configured identities over the family ladder and judges every
/// positive, negative and mutant control.
pub fn run_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    cfg.validate()?;
    let mut reports = Vec::new();
    for check in catalogue() {
        if !cfg.only.is_empty() && !cfg.only.iter().any(|id| id == check.id) {
            continue;
        }
        let instances =
            check.positive.iter().map(|k| (*k, Control::Positive)).chain(check.negative.iter().map(|k| (*k, Control::Negative)));
        for (kind, control) in instances {
            for (level, &n) in cfg.levels(kind).iter().enumerate() {
                let fam = Family::new(kind, n, cfg.seed)?;
                for mut r in verify(&check, &fam, control, level)? {
                    if !cfg.keep_sides {
                        r.sides = None;
                    }
                    log::debug!("{} {} {:?} residual {:.3e}", r.identity_id, r.instance, r.control, r.residual);
                    reports.push(r);
                }
            }
        }
    }
    assign_slopes(&mut reports);
    let failures = judge(cfg, &reports);
    Ok(SuiteReport { config: cfg.clone(), reports, failures })
}

fn group_key(r: &IdentityReport) -> (String, String, Control) {
    let family = r.instance.rsplit_once("/n=").map_or(r.instance.as_str(), |(a, _)| a).to_string();
    (r.identity_id.clone(), family, r.control)
}

fn assign_slopes(reports: &mut [IdentityReport]) {
    let mut groups: BTreeMap<(String, String, Control), Vec<usize>> = BTreeMap::new();
    for (i, r) in reports.iter().enumerate() {
        groups.entry(group_key(r)).or_default().push(i);
    }
    for idx in groups.values() {
        let h: Vec<f64> = idx.iter().map(|&i| reports[i].h).collect();
        let res: Vec<f64> = idx.iter().map(|&i| reports[i].residual).collect();
        let slope = refinement_slope(&h, &res);
        for &i in idx {
            reports[i].slope = slope;
        }
    }
}

/// The positive residual a negative or mutant control is measured against:
/// the same family for a mutant, otherwise the largest positive residual of
/// the identity at that level among families of the same dimension (any
/// dimension when none match).
fn reference_residual(reports: &[IdentityReport], r: &IdentityReport) -> f64 {
    let pos = reports.iter().filter(|p| p.control == Control::Positive && p.identity_id == r.identity_id && p.level == r.level);
    let max = |it: &mut dyn Iterator<Item = &IdentityReport>| it.map(|p| p.residual).fold(f64::NAN, f64::max);
    if r.control == Control::Mutant {
        return max(&mut pos.filter(|p| p.family == r.family));
    }
    let same_dim = max(&mut pos.clone().filter(|p| p.family.dim() == r.family.dim()));
    if same_dim.is_nan() {
        max(&mut pos.into_iter())
    } else {
        same_dim
    }
}

fn judge(cfg: &SuiteConfig, reports: &[IdentityReport]) -> Vec<String> {
    let mut failures = Vec::new();
    let mut has_negative: BTreeMap<&str, bool> = BTreeMap::new();
    for r in reports {
        let e = has_negative.entry(&r.identity_id).or_insert(false);
        *e |= r.control != Control::Positive;
    }
    for (id, neg) in &has_negative {
        if !neg {
            failures.push(format!("{id}: no negative control"));
        }
    }
    let finest = cfg.levels_1d.len() - 1;
    for r in reports {
        let tag = format!("{} [{} {}]", r.identity_id, r.control.as_str(), r.instance);
        if !r.residual.is_finite() {
            failures.push(format!("{tag}: non-finite residual"));
            continue;
        }
        match r.control {
            Control::Positive => {
                let budget = r.budget(cfg.kappa);
                if r.residual > budget {
                    failures.push(format!("{tag}: residual {:.3e} exceeds budget {budget:.3e}", r.residual));
                }
                let exact = r.residual <= EXACT_TOL * r.scale().max(1.0);
                if r.level == finest && !exact {
                    match r.slope {
                        Some(s) if s >= cfg.min_slope => {}
                        s => failures.push(format!("{tag}: refinement slope {s:?} below {}", cfg.min_slope)),
                    }
                }
            }
            // Separation is certified on the finest grid of the ladder.
            Control::Negative | Control::Mutant if r.level == finest => {
                let reference = reference_residual(reports, r);
                if reference.is_nan() {
                    failures.push(format!("{tag}: no positive counterpart"));
                    continue;
                }
                let floor = (cfg.negative_factor * reference).max(EXACT_TOL * r.scale().max(1.0));
                if r.residual < floor {
                    failures.push(format!(
                        "{tag}: residual {:.3e} below {} x positive residual {reference:.3e}",
                        r.residual, cfg.negative_factor
                    ));
                }
            }
            _ => {}
        }
    }
    failures
}

/// Per-row suite CSV: the documented columns followed by diagnostics.
pub fn write_suite_csv<W: Write>(reports: &[IdentityReport], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "identity_id",
        "instance",
        "h",
        "dt",
        "residual",
        "slope",
        "control_type",
        "level",
        "lhs_norm",
        "rhs_norm",
        "hypothesis_defect",
    ])?;
    let num = |v: f64| format!("{v:.17e}");
    let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
    for r in reports {
        out.write_record([
            r.identity_id.clone(),
            r.instance.clone(),
            num(r.h),
            num(r.dt),
            num(r.residual),
            opt(r.slope),
            r.control.as_str().to_string(),
            r.level.to_string(),
            num(r.lhs_norm),
            num(r.rhs_norm),
            opt(r.hypothesis_defect),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Aggregate over one identity.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IdentitySummary {
    pub identity_id: String,
    /// Largest positive residual over its budget.
    pub worst_budget_ratio: f64,
    pub min_positive_slope: Option<f64>,
    /// Smallest negative or mutant residual over the positive reference.
    pub min_separation: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub seed: u64,
    pub kappa: f64,
    pub rows: usize,
    pub passed: bool,
    pub failures: Vec<String>,
    pub identities: Vec<IdentitySummary>,
}

impl SuiteReport {
    pub fn summary(&self) -> SuiteSummary {
        let mut ids: Vec<&str> = Vec::new();
        for r in &self.reports {
            if !ids.contains(&r.identity_id.as_str()) {
                ids.push(&r.identity_id);
            }
        }
        let identities = ids
            .into_iter()
            .map(|id| {
                let rows: Vec<&IdentityReport> = self.reports.iter().filter(|r| r.identity_id == id).collect();
                let pos: Vec<&&IdentityReport> = rows.iter().filter(|r| r.control == Control::Positive).collect();
                let worst = pos.iter().map(|r| r.residual / r.budget(self.config.kappa)).fold(0.0, f64::max);
                let min_slope = pos.iter().filter_map(|r| r.slope).reduce(f64::min);
                let min_sep = rows
                    .iter()
                    .filter(|r| r.control != Control::Positive)
                    .filter_map(|r| {
                        let reference = reference_residual(&self.reports, r);
                        (reference > 0.0).then(|| r.residual / reference)
                    })
                    .reduce(f64::min);
                IdentitySummary {
                    identity_id: id.to_string(),
                    worst_budget_ratio: worst,
                    min_positive_slope: min_slope,
                    min_separation: min_sep,
                }
            })
            .collect();
        SuiteSummary {
            seed: self.config.seed,
            kappa: self.config.kappa,
            rows: self.reports.len(),
            passed: self.passed(),
            failures: self.failures.clone(),
            identities,
        }
    }
}
