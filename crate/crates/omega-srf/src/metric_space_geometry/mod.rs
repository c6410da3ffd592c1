//! The space of metrics with its L²(Ω) product: geodesics, curvature,
//! the flats `Σ_K(g₀)` and the membership tests for the variation spaces
//! `𝔽`, `𝔽^∞`, `𝔼` and `𝔽^K`.

use serde::Serialize;

use crate::domain_grid::linalg::{endo_fn_g, field_inverse};
use crate::domain_grid::products::{commutator, endo_bracket, inner_g, lower_endo, raise_form};
use crate::domain_grid::{einsum, integrate_omega, shape, EndoField, Field, MetricField, PolarizationField};
use crate::error::Result;
use crate::riemann_ops::{validate_metric, Geometry, BOUNDARY_MARGIN};

/// Named residuals of a membership test; membership means all are small.
#[derive(Clone, Debug, Default, Serialize)]
pub struct Residuals(pub Vec<(String, f64)>);

impl Residuals {
    pub fn push(&mut self, name: impl Into<String>, value: f64) {
        self.0.push((name.into(), value));
    }

    pub fn max(&self) -> f64 {
        self.0.iter().map(|(_, v)| *v).fold(0.0, f64::max)
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.0.iter().all(|(_, v)| *v <= tol)
    }
}

/// A base metric, a second metric and the log coordinate `A = -½ log(g₀⁻¹ g)`,
/// so that `g = g₀ e^{-2A}`.
#[derive(Clone, Debug)]
pub struct MetricPair {
    pub g0: MetricField,
    pub g: MetricField,
    pub a: EndoField,
}

impl MetricPair {
    pub fn new(g0: &MetricField, g: &MetricField) -> Result<MetricPair> {
        validate_metric(g0)?;
        validate_metric(g)?;
        let g0inv = field_inverse(g0)?;
        let b = raise_form(&g0inv, g);
        let a = endo_fn_g(g0, &b, |v| -0.5 * v.ln())?;
        Ok(MetricPair { g0: g0.clone(), g: g.clone(), a })
    }

    /// Builds `g = g₀ e^{-2A}` from a g₀-self-adjoint `A`.
    pub fn from_log(g0: &MetricField, a: &EndoField) -> Result<MetricPair> {
        let e = endo_fn_g(g0, a, |v| (-2.0 * v).exp())?;
        let g = lower_endo(g0, &e);
        let g = symmetrize(&g);
        Ok(MetricPair { g0: g0.clone(), g, a: a.clone() })
    }
}

fn symmetrize(t: &Field) -> Field {
    t.zip_map(&t.permute(&[1, 0]), |a, b| 0.5 * (a + b))
}

/// `G_g(u, v) = ∫ ⟨u, v⟩_g Ω`.
pub fn g_inner(g: &MetricField, u: &Field, v: &Field) -> Result<f64> {
    let ginv = field_inverse(g)?;
    integrate_omega(&inner_g(u, v, g, &ginv))
}

/// `g_t = g₀ exp(t g₀⁻¹ v)`.
pub fn geodesic(g0: &MetricField, v: &MetricField, t: f64) -> Result<MetricField> {
    let g0inv = field_inverse(g0)?;
    let vs = raise_form(&g0inv, v);
    let e = endo_fn_g(g0, &vs, |x| (t * x).exp())?;
    Ok(symmetrize(&lower_endo(g0, &e)))
}

/// `R_M(g)(u, v) w = -¼ g [[u*, v*], w*]`.
pub fn curvature_m(g: &MetricField, u: &Field, v: &Field, w: &Field) -> Result<Field> {
    let ginv = field_inverse(g)?;
    let (us, vs, ws) = (raise_form(&ginv, u), raise_form(&ginv, v), raise_form(&ginv, w));
    let inner = commutator(&commutator(&us, &vs), &ws);
    Ok(lower_endo(g, &inner).scale(-0.25))
}

fn inner_max(t: &Field) -> f64 {
    t.max_abs_inner(BOUNDARY_MARGIN)
}

/// Membership in `𝔽_g`: `|∇_{T_X} v*|`.
pub fn in_f(geo: &Geometry, v: &MetricField) -> f64 {
    let vs = raise_form(geo.ginv(), v);
    inner_max(&geo.ext_d(&vs))
}

/// Membership in `𝔽^∞_g`: `|∇_{T_X}(v*)^p|` for `p = 1..=p_max`.
pub fn in_f_infty(geo: &Geometry, v: &MetricField, p_max: usize) -> Residuals {
    let vs = raise_form(geo.ginv(), v);
    let mut pow = Field::identity(geo.grid());
    let mut out = Residuals::default();
    for p in 1..=p_max {
        pow = einsum("ij,jk->ik", &[&pow, &vs], shape::ENDO);
        out.push(format!("ext_d_power_{p}"), inner_max(&geo.ext_d(&pow)));
    }
    out
}

/// Membership in `𝔼_g`: `[R, v*] = 0` and `[R, ∇_ξ v*] = 0`.
pub fn in_e(geo: &Geometry, v: &MetricField) -> Residuals {
    let vs = raise_form(geo.ginv(), v);
    let mut out = Residuals::default();
    out.push("curv_bracket_0", geo.curv_commutator_defect(&vs));
    out.push("curv_bracket_1", geo.curv_commutator_defect(&geo.nabla(&vs)));
    out
}

/// Membership in `𝔽^K_g`: `v ∈ 𝔽_g` and `[T, ∇^p v*] = 0` for `T = K, R` and
/// `p = 0..=p_max`.
pub fn in_f_k(geo: &Geometry, v: &MetricField, k: &PolarizationField, p_max: usize) -> Residuals {
    let vs = raise_form(geo.ginv(), v);
    let mut out = Residuals::default();
    out.push("ext_d", inner_max(&geo.ext_d(&vs)));
    let mut d = vs;
    for p in 0..=p_max {
        if p > 0 {
            d = geo.nabla(&d);
        }
        let kb = endo_bracket(&d, k.k()).scale(-1.0);
        out.push(format!("k_bracket_{p}"), inner_max(&kb));
        out.push(format!("curv_bracket_{p}"), geo.curv_commutator_defect(&d));
    }
    out
}

/// The equivalent description: `v ∈ 𝔽_g` and `[∇^p T, v*] = 0` for `T = K, R`.
pub fn in_f_k_derivative_form(geo: &Geometry, v: &MetricField, k: &PolarizationField, p_max: usize) -> Residuals {
    let vs = raise_form(geo.ginv(), v);
    let mut out = Residuals::default();
    out.push("ext_d", inner_max(&geo.ext_d(&vs)));
    let mut dk = k.k().clone();
    let mut dr = geo.riemann().clone();
    for p in 0..=p_max {
        if p > 0 {
            dk = geo.nabla(&dk);
            dr = geo.nabla(&dr);
        }
        out.push(format!("dk_bracket_{p}"), inner_max(&endo_bracket(&dk, &vs)));
        out.push(format!("dcurv_bracket_{p}"), inner_max(&endo_bracket(&dr, &vs)));
    }
    out
}

/// Both characterizations of `𝔽^K_g`, which must vanish together.
pub fn equivalent_fk_check(
    geo: &Geometry,
    v: &MetricField,
    k: &PolarizationField,
    p_max: usize,
) -> (Residuals, Residuals) {
    (in_f_k(geo, v, k, p_max), in_f_k_derivative_form(geo, v, k, p_max))
}

/// Pre-scattering defect `|∇_{T_X} Ric*(Ω)|`.
pub fn is_prescattering(geo: &Geometry) -> f64 {
    inner_max(&geo.ext_d(&geo.ric_star_omega()))
}

/// Scattering data: `Ric(Ω) ∈ 𝔽^K_g`.
pub fn is_scattering_k(geo: &Geometry, k: &PolarizationField, p_max: usize) -> Residuals {
    in_f_k(geo, geo.bakry_emery_ricci(), k, p_max)
}

/// Membership of `g` in `Σ_K(g₀)`, tested on the tangent vector `g₀·(-2A)`.
pub fn sigma_k_membership(pair: &MetricPair, k: &PolarizationField, p_max: usize) -> Result<Residuals> {
    let geo0 = Geometry::new(&pair.g0)?;
    let v = lower_endo(&pair.g0, &pair.a).scale(-2.0);
    Ok(in_f_k(&geo0, &symmetrize(&v), k, p_max))
}

/// Distance on the flat: `(4 ∫ |A|²_{g₀} Ω)^{1/2}`.
pub fn dist_g_on_flat(pair: &MetricPair) -> Result<f64> {
    dist_between_logs(&pair.g0, &pair.a, &Field::zeros(pair.a.grid(), shape::ENDO))
}

/// Flat distance between two points of `Σ_K(g₀)` given by their log coordinates.
pub fn dist_between_logs(g0: &MetricField, a: &EndoField, b: &EndoField) -> Result<f64> {
    let g0inv = field_inverse(g0)?;
    let d = a - b;
    Ok((4.0 * integrate_omega(&inner_g(&d, &d, g0, &g0inv))?).max(0.0).sqrt())
}

#[derive(Clone, Debug, Serialize)]
pub struct ConservationRecord {
    pub time: f64,
    pub residual_name: String,
    pub value: f64,
}

/// Runs the geodesic `g_t = g₀ exp(t g₀⁻¹ v)` and reports, at every time:
/// curvature drift `|R_{g_t} - R_{g₀}|`, the pre-scattering defect, the drift
/// of `∇_{g_t} ġ*_t` (here `ġ*_t = g₀⁻¹ v`) and the `𝔽^K` residuals of `ġ_t`.
pub fn conservation_along_geodesic(
    g0: &MetricField,
    v: &MetricField,
    k: &PolarizationField,
    times: &[f64],
    p_max: usize,
) -> Result<Vec<ConservationRecord>> {
    let geo0 = Geometry::new(g0)?;
    let vs = raise_form(geo0.ginv(), v);
    let r0 = geo0.riemann().clone();
    let dv0 = geo0.nabla(&vs);
    let mut out = Vec::new();
    let mut rec = |time: f64, name: &str, value: f64| {
        out.push(ConservationRecord { time, residual_name: name.to_string(), value })
    };
    for &t in times {
        let gt = geodesic(g0, v, t)?;
        let geo = Geometry::new(&gt)?;
        rec(t, "curvature_drift", geo.riemann().max_abs_diff_inner(&r0, BOUNDARY_MARGIN));
        rec(t, "prescattering", is_prescattering(&geo));
        rec(t, "pcov_drift", geo.nabla(&vs).max_abs_diff_inner(&dv0, BOUNDARY_MARGIN));
        let gdot = symmetrize(&lower_endo(&gt, &vs));
        let m = in_f_k(&geo, &gdot, k, p_max);
        rec(t, "fk_membership", m.max());
    }
    Ok(out)
}
