//! Time integration of `ġ = Ric_g(Ω) - g` inside the flat `Σ_K(g₀)`, in the
//! metric form, the porous-medium form for `H = (g⁻¹g₀)^{1/2}` and the
//! log form for `A = log H`.

mod diagnostics;

pub use diagnostics::*;

use serde::{Deserialize, Serialize};

use crate::domain_grid::linalg::{eigenvalues_g, endo_fn_g, field_inverse};
use crate::domain_grid::products::{lower_endo, raise_form};
use crate::domain_grid::{einsum, shape, EndoField, Field, MetricField};
use crate::error::{Result, SrfError};
use crate::riemann_ops::{validate_metric, Geometry};
use crate::w_functional::WContext;

/// Which unknown the integrator advances.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Form {
    G,
    H,
    A,
}

#[derive(Clone, Debug)]
pub enum Repr {
    G(MetricField),
    H(EndoField),
    A(EndoField),
}

impl Repr {
    pub fn form(&self) -> Form {
        match self {
            Repr::G(_) => Form::G,
            Repr::H(_) => Form::H,
            Repr::A(_) => Form::A,
        }
    }

    fn field(&self) -> &Field {
        match self {
            Repr::G(f) | Repr::H(f) | Repr::A(f) => f,
        }
    }

    fn with_field(&self, f: Field) -> Repr {
        match self {
            Repr::G(_) => Repr::G(f),
            Repr::H(_) => Repr::H(f),
            Repr::A(_) => Repr::A(f),
        }
    }
}

#[derive(Clone, Debug)]
pub struct FlowState {
    pub t: f64,
    pub repr: Repr,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Rk4,
    ExplicitEuler,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub scheme: Scheme,
    pub t_end: f64,
    /// Largest admissible `dt · max|H|² / h²`.
    pub cfl_guard: f64,
    pub diagnostics_stride: usize,
    /// Highest derivative order of the monitored seminorms.
    pub p_max: usize,
    /// Keep a copy of the metric at every diagnostics time.
    pub keep_snapshots: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            dt: 1e-3,
            scheme: Scheme::Rk4,
            t_end: 1.0,
            cfl_guard: 1.0,
            diagnostics_stride: 100,
            p_max: 3,
            keep_snapshots: false,
        }
    }
}

/// The flow with its base point `g₀`; all three forms use `Δ^Ω_{g₀}` and `Ric*_{g₀}(Ω)`.
#[derive(Debug)]
pub struct Flow {
    ctx: WContext,
}

fn matmul(a: &Field, b: &Field) -> Field {
    einsum("ij,jk->ik", &[a, b], shape::ENDO)
}

fn sym(t: &Field) -> Field {
    t.zip_map(&t.permute(&[1, 0]), |a, b| 0.5 * (a + b))
}

impl Flow {
    pub fn new(g0: &MetricField) -> Result<Flow> {
        Ok(Flow { ctx: WContext::new(g0)? })
    }

    pub fn context(&self) -> &WContext {
        &self.ctx
    }

    pub fn g0(&self) -> &MetricField {
        self.ctx.g0()
    }

    /// Initial state at `t = 0` from a log coordinate, in the requested form.
    pub fn initial(&self, a0: &EndoField, form: Form) -> Result<FlowState> {
        let repr = match form {
            Form::A => Repr::A(a0.clone()),
            Form::H => Repr::H(self.ctx.exp(a0)?),
            Form::G => Repr::G(self.metric_from_a(a0)?),
        };
        Ok(FlowState { t: 0.0, repr })
    }

    fn metric_from_a(&self, a: &EndoField) -> Result<MetricField> {
        let e = endo_fn_g(self.g0(), a, |v| (-2.0 * v).exp())?;
        Ok(sym(&lower_endo(self.g0(), &e)))
    }

    /// `g` of a state in any form (`g = g₀ H⁻² = g₀ e^{-2A}`).
    pub fn metric(&self, s: &FlowState) -> Result<MetricField> {
        match &s.repr {
            Repr::G(g) => Ok(g.clone()),
            Repr::H(h) => {
                let hinv2 = endo_fn_g(self.g0(), h, |v| v.powi(-2))?;
                Ok(sym(&lower_endo(self.g0(), &hinv2)))
            }
            Repr::A(a) => self.metric_from_a(a),
        }
    }

    /// `A = -½ log(g₀⁻¹ g)` of a state.
    pub fn log_coordinate(&self, s: &FlowState) -> Result<EndoField> {
        match &s.repr {
            Repr::A(a) => Ok(a.clone()),
            Repr::H(h) => endo_fn_g(self.g0(), h, f64::ln),
            Repr::G(g) => {
                let b = raise_form(&field_inverse(self.g0())?, g);
                endo_fn_g(self.g0(), &b, |v| -0.5 * v.ln())
            }
        }
    }

    /// `ġ = Ric_g(Ω) - g`.
    pub fn rhs_g(&self, g: &MetricField) -> Result<MetricField> {
        let geo = Geometry::new(g)?;
        Ok(geo.bakry_emery_ricci() - g)
    }

    /// `Ḣ = ½ (-H² Δ^Ω_{g₀} H - H³ Ric*_{g₀}(Ω) + H)`.
    pub fn rhs_h(&self, h: &EndoField) -> EndoField {
        let lap = self.ctx.geometry().laplacian_omega(h);
        let hh = matmul(h, h);
        let a = matmul(&hh, &lap);
        let b = matmul(&matmul(&hh, h), self.ctx.ric_star0());
        let mut out = h - &a;
        out = &out - &b;
        out.scale(0.5)
    }

    /// `Ȧ = ½ (e^A div^Ω_{g₀}(∇ e^A) - e^{2A} Ric*_{g₀}(Ω) + 𝕀)`.
    pub fn rhs_a(&self, a: &EndoField) -> Result<EndoField> {
        let geo = self.ctx.geometry();
        let e = self.ctx.exp(a)?;
        let div = geo.omega_div(&geo.nabla(&e));
        let e2 = endo_fn_g(self.g0(), a, |v| (2.0 * v).exp())?;
        let mut out = matmul(&e, &div);
        out = &out - &matmul(&e2, self.ctx.ric_star0());
        out = &out + &Field::identity(a.grid());
        Ok(out.scale(0.5))
    }

    fn rhs(&self, r: &Repr) -> Result<Field> {
        match r {
            Repr::G(g) => self.rhs_g(g),
            Repr::H(h) => Ok(self.rhs_h(h)),
            Repr::A(a) => self.rhs_a(a),
        }
    }

    /// Largest eigenvalue of `H² = g⁻¹ g₀` over the grid.
    pub fn max_h_squared(&self, s: &FlowState) -> Result<f64> {
        let g0 = self.g0();
        let top = |ev: Vec<Vec<f64>>| ev.iter().map(|v| *v.last().expect("n ≥ 1")).fold(f64::MIN, f64::max);
        Ok(match &s.repr {
            Repr::H(h) => {
                let ev = eigenvalues_g(g0, h)?;
                ev.iter().flat_map(|v| v.iter()).map(|x| x * x).fold(0.0, f64::max)
            }
            Repr::A(a) => (2.0 * top(eigenvalues_g(g0, a)?)).exp(),
            Repr::G(g) => {
                let b = raise_form(&field_inverse(g)?, g0);
                top(eigenvalues_g(g0, &b)?)
            }
        })
    }

    /// `dt · max|H|² / h_min²`.
    pub fn cfl_ratio(&self, s: &FlowState, dt: f64) -> Result<f64> {
        let hmin = self.g0().grid().h().iter().cloned().fold(f64::INFINITY, f64::min);
        Ok(dt * self.max_h_squared(s)? / (hmin * hmin))
    }

    fn check_positive(&self, s: &FlowState) -> Result<()> {
        let field = s.repr.field();
        if !field.is_finite() {
            return Err(SrfError::NonFinite(format!("flow state at t = {}", s.t)));
        }
        match &s.repr {
            Repr::H(h) => {
                let ev = eigenvalues_g(self.g0(), h)?;
                let min = ev.iter().map(|v| v[0]).fold(f64::INFINITY, f64::min);
                if !(min > 0.0) {
                    return Err(SrfError::PositivityLoss { t: s.t, min_eig: min });
                }
            }
            Repr::G(g) => {
                validate_metric(g).map_err(|e| match e {
                    SrfError::NotPositive { min_eig, .. } => SrfError::PositivityLoss { t: s.t, min_eig },
                    other => other,
                })?;
            }
            Repr::A(_) => {}
        }
        Ok(())
    }

    /// One step of the configured scheme; rejects steps beyond the CFL guard.
    pub fn step(&self, s: &FlowState, cfg: &IntegratorConfig) -> Result<FlowState> {
        let ratio = self.cfl_ratio(s, cfg.dt)?;
        if ratio > cfg.cfl_guard {
            return Err(SrfError::Cfl { ratio, limit: cfg.cfl_guard, advisory_dt: cfg.dt * cfg.cfl_guard / ratio });
        }
        let dt = cfg.dt;
        let y = s.repr.field();
        let next = match cfg.scheme {
            Scheme::ExplicitEuler => y.axpy(dt, &self.rhs(&s.repr)?),
            Scheme::Rk4 => {
                let k1 = self.rhs(&s.repr)?;
                let k2 = self.rhs(&s.repr.with_field(y.axpy(0.5 * dt, &k1)))?;
                let k3 = self.rhs(&s.repr.with_field(y.axpy(0.5 * dt, &k2)))?;
                let k4 = self.rhs(&s.repr.with_field(y.axpy(dt, &k3)))?;
                let mut out = y.clone();
                let d = out.data_mut();
                let c = dt / 6.0;
                for (i, v) in d.iter_mut().enumerate() {
                    *v += c * (k1.data()[i] + 2.0 * k2.data()[i] + 2.0 * k3.data()[i] + k4.data()[i]);
                }
                out
            }
        };
        let out = FlowState { t: s.t + dt, repr: s.repr.with_field(next) };
        self.check_positive(&out)?;
        Ok(out)
    }

    /// Integrates to `t_end`, recording diagnostics every `diagnostics_stride`
    /// steps. An abort keeps the trajectory so far and the last good state.
    pub fn run(&self, initial: &FlowState, cfg: &IntegratorConfig) -> Result<FlowRun> {
        if !(cfg.dt > 0.0) || cfg.diagnostics_stride == 0 {
            return Err(SrfError::Param("dt must be positive and the diagnostics stride nonzero".into()));
        }
        let steps = (cfg.t_end / cfg.dt).round() as usize;
        let mut state = initial.clone();
        self.check_positive(&state)?;
        let mut run = FlowRun { records: Vec::new(), snapshots: Vec::new(), last: state.clone(), abort: None, steps: 0 };
        self.record(&state, cfg, &mut run)?;
        for k in 1..=steps {
            match self.step(&state, cfg) {
                Ok(next) => state = next,
                Err(e) => {
                    log::warn!("flow aborted at t = {}: {e}", state.t);
                    run.abort = Some(e);
                    break;
                }
            }
            run.steps = k;
            run.last = state.clone();
            if k % cfg.diagnostics_stride == 0 || k == steps {
                self.record(&state, cfg, &mut run)?;
            }
        }
        Ok(run)
    }

    fn record(&self, s: &FlowState, cfg: &IntegratorConfig, run: &mut FlowRun) -> Result<()> {
        let g = self.metric(s)?;
        let a = self.log_coordinate(s)?;
        let rec = self.diagnostics(s.t, &g, &a, cfg.p_max)?;
        log::debug!("t = {:.4} sup|gdot| = {:.3e} W = {:.10}", rec.t, rec.gdot_sup, rec.w);
        run.records.push(rec);
        if cfg.keep_snapshots {
            run.snapshots.push((s.t, g));
        }
        Ok(())
    }
}

/// Output of [`Flow::run`].
#[derive(Debug)]
pub struct FlowRun {
    pub records: Vec<DiagnosticsRecord>,
    /// `(t, g_t)` at diagnostics times when snapshots are kept.
    pub snapshots: Vec<(f64, MetricField)>,
    pub last: FlowState,
    pub abort: Option<SrfError>,
    pub steps: usize,
}
