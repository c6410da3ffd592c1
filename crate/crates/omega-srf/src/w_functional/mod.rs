//! Perelman's functional on metrics and in the log coordinate `A` of the flat
//! `Σ_K(g₀)`, with its L² gradient, second variation, convex sets and lower bound.
//!
//! The L² product on the log coordinate is `4 ∫ ⟨·,·⟩_{g₀} Ω`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain_grid::linalg::{eigenvalues_g, endo_fn_g};
use crate::domain_grid::products::{commutator, inner_g, lower_endo, norm2_g};
use crate::domain_grid::{einsum, integrate_omega, shape, EndoField, Field, MetricField, PolarizationField};
use crate::error::{Result, SrfError};
use crate::metric_space_geometry::MetricPair;
use crate::riemann_ops::Geometry;
use crate::testbeds::Modes;

/// `W_Ω(g) = ∫ [Tr_g(Ric_g(Ω) - g) + 2 log(dV_g/Ω)] Ω`.
pub fn w_omega_metric(g: &MetricField) -> Result<f64> {
    let geo = Geometry::new(g)?;
    w_omega_geometry(&geo)
}

pub fn w_omega_geometry(geo: &Geometry) -> Result<f64> {
    let n = geo.dim() as f64;
    let tr = crate::domain_grid::linalg::field_trace(&geo.ric_star_omega());
    let integrand = tr.zip_map(geo.f(), |t, f| t - n + 2.0 * f);
    integrate_omega(&integrand)
}

fn tr(m: &Field) -> Field {
    crate::domain_grid::linalg::field_trace(m)
}

fn matmul(a: &Field, b: &Field) -> Field {
    einsum("ij,jk->ik", &[a, b], shape::ENDO)
}

/// The base point `g₀` with everything the functional needs from it.
#[derive(Debug)]
pub struct WContext {
    geo0: Geometry,
    ric0: Field,
}

/// Which of the convex subsets of the log-coordinate space is tested.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvexKind {
    /// `Ric_{g_A}(Ω) ≥ δ g_A`.
    Delta,
    /// `Ric_{g_A}(Ω) ≥ g₀ Δ^Ω A`, i.e. `{A, A} ≤ Ric_{g₀}(Ω)`.
    PlusPlus,
    /// `∫ |U ∇A|² Ω ≤ ∫ Tr[U² Ric*(Ω)] Ω` for all `U`.
    Plus,
    /// `Ric_{g_A}(Ω) ≥ -Ric_{g₀}(Ω)`.
    Minus,
}

#[derive(Clone, Debug)]
pub struct ConvexSetSpec {
    pub kind: ConvexKind,
    pub delta: f64,
    pub k: Option<PolarizationField>,
    /// Random directions for the integral test of `Plus`.
    pub samples: usize,
    pub seed: u64,
}

impl ConvexSetSpec {
    pub fn new(kind: ConvexKind) -> ConvexSetSpec {
        ConvexSetSpec { kind, delta: 0.0, k: None, samples: 64, seed: 0 }
    }

    /// Checks `0 ≤ δ < ε` with `ε` the lower bound of `Ric*_{g₀}(Ω)`.
    pub fn delta(ctx: &WContext, delta: f64) -> Result<ConvexSetSpec> {
        let eps = ctx.ricci_lower_bound()?;
        if !(0.0..eps).contains(&delta) {
            return Err(SrfError::Param(format!("delta = {delta} must lie in [0, {eps})")));
        }
        Ok(ConvexSetSpec { delta, ..ConvexSetSpec::new(ConvexKind::Delta) })
    }

    pub fn with_polarization(mut self, k: PolarizationField) -> Self {
        self.k = Some(k);
        self
    }
}

/// Margin of a convex-set inequality: nonnegative means member.
#[derive(Clone, Debug, Serialize)]
pub struct ConvexMargin {
    /// Smallest eigenvalue of the pointwise defining endomorphism.
    pub pointwise: f64,
    /// For `Plus`: smallest normalized integral margin over sampled `U`.
    pub integral: Option<f64>,
    /// `|[K, A]|` when a polarization is given.
    pub tangency: Option<f64>,
    pub margin: f64,
}

/// `𝐖` along a straight segment in the log coordinate.
#[derive(Clone, Debug, Serialize)]
pub struct SegmentScan {
    pub t: Vec<f64>,
    pub w: Vec<f64>,
    /// Undivided second differences `W_{i-1} - 2W_i + W_{i+1}` at the interior parameters.
    pub second_diff: Vec<f64>,
}

impl SegmentScan {
    pub fn min_second_diff(&self) -> f64 {
        self.second_diff.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// The three evaluations of `Ric_{g_A}(Ω)`.
#[derive(Clone, Debug)]
pub struct RicRoutes {
    pub direct: MetricField,
    pub bracket: MetricField,
    pub h_form: MetricField,
}

impl RicRoutes {
    pub fn max_discrepancy(&self, margin: usize) -> f64 {
        self.direct
            .max_abs_diff_inner(&self.bracket, margin)
            .max(self.direct.max_abs_diff_inner(&self.h_form, margin))
            .max(self.bracket.max_abs_diff_inner(&self.h_form, margin))
    }
}

impl WContext {
    pub fn new(g0: &MetricField) -> Result<WContext> {
        let geo0 = Geometry::new(g0)?;
        let ric0 = geo0.ric_star_omega();
        Ok(WContext { geo0, ric0 })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geo0
    }

    pub fn g0(&self) -> &MetricField {
        self.geo0.g()
    }

    /// `Ric*_{g₀}(Ω)`.
    pub fn ric_star0(&self) -> &Field {
        &self.ric0
    }

    /// Smallest eigenvalue of `Ric*_{g₀}(Ω)` over the grid.
    pub fn ricci_lower_bound(&self) -> Result<f64> {
        Ok(min_eig(self.g0(), &self.ric0))
    }

    /// `e^A` for g₀-self-adjoint `A`.
    pub fn exp(&self, a: &EndoField) -> Result<EndoField> {
        endo_fn_g(self.g0(), a, f64::exp)
    }

    /// `⟨X, Y⟩_{g₀}` integrated against Ω.
    pub fn l2(&self, x: &Field, y: &Field) -> Result<f64> {
        integrate_omega(&inner_g(x, y, self.g0(), self.geo0.ginv()))
    }

    /// `𝐖_Ω(A) = ∫ [|∇e^A|² + Tr(e^{2A} Ric*₀(Ω) - 2A)] Ω + ∫ [2 log(dV_{g₀}/Ω) - n] Ω`.
    pub fn w_bold(&self, a: &EndoField) -> Result<f64> {
        let h = self.exp(a)?;
        let dh = self.geo0.nabla(&h);
        let grad2 = norm2_g(&dh, self.g0(), self.geo0.ginv());
        let pot = tr(&matmul(&matmul(&h, &h), &self.ric0));
        let tra = tr(a);
        let n = self.geo0.dim() as f64;
        let f0 = self.geo0.f();
        let mut integrand = grad2;
        for (p, v) in integrand.data_mut().iter_mut().enumerate() {
            *v += pot.data()[p] - 2.0 * tra.data()[p] + 2.0 * f0.data()[p] - n;
        }
        integrate_omega(&integrand)
    }

    /// `∇_{L²} 𝐖(A) = ½ (e^A Δ^Ω e^A + e^{2A} Ric*₀(Ω) - 𝕀)`.
    pub fn grad_w(&self, a: &EndoField) -> Result<EndoField> {
        let h = self.exp(a)?;
        let lap = self.geo0.laplacian_omega(&h);
        let hh = matmul(&h, &h);
        let mut out = &matmul(&h, &lap) + &matmul(&hh, &self.ric0);
        out = &out - &Field::identity(a.grid());
        Ok(out.scale(0.5))
    }

    /// `|[K, ∇𝐖(A)]|`: how far the gradient leaves the tangent space of the flat.
    pub fn tangency_residual(&self, a: &EndoField, k: &PolarizationField) -> Result<f64> {
        Ok(commutator(k.k(), &self.grad_w(a)?).max_abs())
    }

    /// `∫ ⟨[e^A Δ^Ω e^A + 2 e^{2A} Ric*₀] V, V⟩ 2Ω + 2 ∫ |∇(e^A V)|² Ω`.
    pub fn second_variation_w(&self, a: &EndoField, v: &EndoField) -> Result<f64> {
        let h = self.exp(a)?;
        let lap = self.geo0.laplacian_omega(&h);
        let hh = matmul(&h, &h);
        let op = &matmul(&h, &lap) + &matmul(&hh, &self.ric0).scale(2.0);
        let first = self.l2(&matmul(&op, v), v)?;
        let dhv = self.geo0.nabla(&matmul(&h, v));
        let second = integrate_omega(&norm2_g(&dhv, self.g0(), self.geo0.ginv()))?;
        Ok(2.0 * first + 2.0 * second)
    }

    /// `{A, B}_{g₀} = g₀ Tr_{g₀}(∇_• A ∇_• B)`.
    pub fn bracket_product(&self, a: &EndoField, b: &EndoField) -> MetricField {
        let e = self.trace_product(a, b);
        lower_endo(self.g0(), &e)
    }

    /// `Tr_{g₀}(∇_• A ∇_• B)` as an endomorphism.
    pub fn trace_product(&self, a: &EndoField, b: &EndoField) -> EndoField {
        let da = self.geo0.nabla(a);
        let db = self.geo0.nabla(b);
        einsum("xy,xij,yjk->ik", &[self.geo0.ginv(), &da, &db], shape::ENDO)
    }

    /// `Ric_{g_A}(Ω)` for `g_A = g₀ e^{-2A}`: directly, as
    /// `g₀Δ^Ω A - {A,A} + Ric_{g₀}(Ω)`, and as `g₀(e^{-A} Δ^Ω e^A + Ric*₀)`.
    pub fn ric_of_a(&self, a: &EndoField) -> Result<RicRoutes> {
        let pair = MetricPair::from_log(self.g0(), a)?;
        let direct = Geometry::new(&pair.g)?.bakry_emery_ricci().clone();
        let g0 = self.g0();
        let lap_a = self.geo0.laplacian_omega(a);
        let bracket = sym(&(&(&lower_endo(g0, &lap_a) - &self.bracket_product(a, a)) + self.geo0.bakry_emery_ricci()));
        let h = self.exp(a)?;
        let hinv = endo_fn_g(g0, a, |v| (-v).exp())?;
        let hl = &matmul(&hinv, &self.geo0.laplacian_omega(&h)) + &self.ric0;
        let h_form = sym(&lower_endo(g0, &hl));
        Ok(RicRoutes { direct, bracket, h_form })
    }

    /// Pointwise defining endomorphism of a convex set; its smallest eigenvalue is the margin.
    pub fn convex_endo(&self, a: &EndoField, kind: ConvexKind, delta: f64) -> Result<EndoField> {
        let t = self.trace_product(a, a);
        Ok(match kind {
            ConvexKind::PlusPlus | ConvexKind::Plus => &self.ric0 - &t,
            ConvexKind::Minus => &(&self.geo0.laplacian_omega(a) - &t) + &self.ric0.scale(2.0),
            ConvexKind::Delta => {
                let e = endo_fn_g(self.g0(), a, |v| (-2.0 * v).exp())?;
                &(&(&self.geo0.laplacian_omega(a) - &t) + &self.ric0) - &e.scale(delta)
            }
        })
    }

    pub fn convex_set_membership(&self, a: &EndoField, spec: &ConvexSetSpec) -> Result<ConvexMargin> {
        let pointwise = min_eig(self.g0(), &self.convex_endo(a, spec.kind, spec.delta)?);
        let tangency = spec.k.as_ref().map(|k| commutator(k.k(), a).max_abs());
        let integral = if spec.kind == ConvexKind::Plus {
            let mut rng = crate::testbeds::rng(spec.seed);
            let mut worst = f64::INFINITY;
            for _ in 0..spec.samples {
                let u = self.random_commuting(&mut rng, spec.k.as_ref());
                worst = worst.min(self.plus_integral_margin(a, &u)?);
            }
            Some(worst)
        } else {
            None
        };
        let margin = match integral {
            Some(i) if pointwise < 0.0 => i,
            _ => pointwise,
        };
        Ok(ConvexMargin { pointwise, integral, tangency, margin })
    }

    /// `(∫ Tr[U² Ric*₀] Ω - ∫ |U ∇A|² Ω) / ∫ |U|² Ω`.
    pub fn plus_integral_margin(&self, a: &EndoField, u: &EndoField) -> Result<f64> {
        let uu = matmul(u, u);
        let lhs = integrate_omega(&tr(&matmul(&uu, &self.ric0)))?;
        let da = self.geo0.nabla(a);
        let uda = einsum("ij,xjk->xik", &[u, &da], shape::TX2);
        let rhs = integrate_omega(&norm2_g(&uda, self.g0(), self.geo0.ginv()))?;
        let norm = self.l2(u, u)?;
        Ok(if norm > 0.0 { (lhs - rhs) / norm } else { 0.0 })
    }

    /// A random smooth endomorphism commuting with `K`: `Σ_j c_j(x) K^j`, or a
    /// scalar multiple of the identity without a polarization.
    pub fn random_commuting(&self, rng: &mut impl Rng, k: Option<&PolarizationField>) -> EndoField {
        let grid = self.g0().grid();
        let n = grid.dim();
        let terms = if k.is_some() { n } else { 1 };
        let mut out = Field::zeros(grid, shape::ENDO);
        let mut pow = Field::identity(grid);
        for j in 0..terms {
            if j > 0 {
                pow = matmul(&pow, k.expect("polarization").k());
            }
            let c = Modes::random(rng, n, 3, 3, 1.0).with_offset(rng.gen_range(-1.0..1.0)).field(grid);
            out = &out + &pow.mul_scalar(&c);
        }
        out
    }

    /// A random member of the convex set: `amp · U` for a random `U` from
    /// [`Self::random_commuting`], halving `amp` until the margin is nonnegative.
    pub fn random_member(&self, rng: &mut impl Rng, spec: &ConvexSetSpec, amp: f64) -> Result<EndoField> {
        let u = self.random_commuting(rng, spec.k.as_ref());
        let mut s = amp;
        for _ in 0..40 {
            let a = u.scale(s);
            if self.convex_set_membership(&a, spec)?.margin >= 0.0 {
                return Ok(a);
            }
            s *= 0.5;
        }
        Err(SrfError::Param(format!("no member found for {:?} down to amplitude {s:e}", spec.kind)))
    }

    /// `𝐖` at `points` equispaced parameters of `t ↦ (1-t)A₀ + tA₁`.
    pub fn segment_scan(&self, a0: &EndoField, a1: &EndoField, points: usize) -> Result<SegmentScan> {
        if points < 3 {
            return Err(SrfError::Param(format!("a segment scan needs at least 3 points, got {points}")));
        }
        let t: Vec<f64> = (0..points).map(|i| i as f64 / (points - 1) as f64).collect();
        let w = t.iter().map(|&s| self.w_bold(&a0.zip_map(a1, |x, y| (1.0 - s) * x + s * y))).collect::<Result<Vec<_>>>()?;
        let second_diff = w.windows(3).map(|v| v[0] - 2.0 * v[1] + v[2]).collect();
        Ok(SegmentScan { t, w, second_diff })
    }

    /// `2 ∫ log(dV_{ε g₀}/Ω) Ω`.
    pub fn w_lower_bound(&self, eps: f64) -> Result<f64> {
        if !(eps > 0.0) {
            return Err(SrfError::Param(format!("lower bound needs eps > 0, got {eps}")));
        }
        let n = self.geo0.dim() as f64;
        let shift = 0.5 * n * eps.ln();
        integrate_omega(&self.geo0.f().map(|f| 2.0 * (f + shift)))
    }
}

fn sym(t: &Field) -> Field {
    t.zip_map(&t.permute(&[1, 0]), |a, b| 0.5 * (a + b))
}

fn min_eig(g: &MetricField, m: &EndoField) -> f64 {
    eigenvalues_g(g, m)
        .map(|ev| ev.iter().map(|v| v[0]).fold(f64::INFINITY, f64::min))
        .unwrap_or(f64::NAN)
}
