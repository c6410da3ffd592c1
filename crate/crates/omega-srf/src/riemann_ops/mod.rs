//! Levi-Civita calculus of a metric field against the reference measure Ω of
//! its grid: connection, curvature, Bakry-Emery-Ricci tensor, weighted
//! adjoints and Laplacians, divergences of `T_X`-valued forms, and the
//! commutation and Weitzenböck identities built on them.
//!
//! Conventions: `Δ^Ω = ∇*_Ω ∇` is nonnegative; `R(ξ,η) = [∇_ξ, ∇_η] - ∇_[ξ,η]`;
//! `Ric* ξ = Σ_k R(ξ, e_k) e_k`, positive on round spheres; `f = log(dV_g/Ω)`.

use std::sync::{Arc, OnceLock};

use crate::domain_grid::linalg::{asymmetry, cholesky, det, field_inverse};
use crate::domain_grid::products::{
    alt, bullet_k, endo_bracket, g_transpose_endo, hat_neg, hat_neg_g, raise_form, star_endo, trace_g, tx_degree,
};
use crate::domain_grid::{einsum, grad, shape, Field, Grid, MetricField, Slot};
use crate::error::{Result, SrfError};

mod identities;
pub use identities::*;

/// Points closer than this many layers to a truncated edge are left out of
/// identity residuals, since nested one-sided stencils lose accuracy there.
pub const BOUNDARY_MARGIN: usize = 4;

/// Both sides of an identity and the pointwise residual between them.
#[derive(Clone, Debug)]
pub struct Sides {
    pub lhs: Field,
    pub rhs: Field,
    pub residual: f64,
    /// max(|lhs|, |rhs|) over the same points, for relative comparisons.
    pub scale: f64,
}

impl Sides {
    pub fn new(lhs: Field, rhs: Field) -> Sides {
        Sides::with_margin(lhs, rhs, BOUNDARY_MARGIN)
    }

    pub fn with_margin(lhs: Field, rhs: Field, margin: usize) -> Sides {
        let residual = lhs.max_abs_diff_inner(&rhs, margin);
        let scale = lhs.max_abs_inner(margin).max(rhs.max_abs_inner(margin));
        Sides { lhs, rhs, residual, scale }
    }
}

/// A metric field with its connection and weighted density, the context for
/// every differential operator in this module.
#[derive(Debug)]
pub struct Geometry {
    g: MetricField,
    ginv: Field,
    gamma: Field,
    f: Field,
    df: Field,
    grad_f: Field,
    riemann: OnceLock<Field>,
    ric_omega: OnceLock<Field>,
}

/// Checks that `g` is a symmetric positive-definite covariant 2-tensor field.
pub fn validate_metric(g: &MetricField) -> Result<()> {
    if !g.is_shape(shape::METRIC) {
        return Err(SrfError::Shape(format!("metric must have slots [Down, Down], got {:?}", g.slots())));
    }
    if !g.is_finite() {
        return Err(SrfError::NonFinite("metric".into()));
    }
    let n = g.dim();
    let mut l = vec![0.0; n * n];
    for p in 0..g.npts() {
        let m = g.at(p);
        let scale = m.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        let defect = asymmetry(n, m);
        if defect > 1e-10 * scale {
            return Err(SrfError::Asymmetric { point: p, defect });
        }
        if cholesky(n, m, &mut l).is_none() {
            let min_eig = crate::domain_grid::linalg::sym_eigen(n, m).0[0];
            return Err(SrfError::NotPositive { point: p, min_eig });
        }
    }
    Ok(())
}

/// Levi-Civita coefficients `Γ[i][k][j] = Γ^k_{ij}`: the matrix of `∇_{∂_i}`
/// acting on coordinate vectors.
pub fn christoffel(g: &MetricField, ginv: &Field) -> Field {
    let dg = grad(g);
    let low = dg.zip_map(&dg.permute(&[1, 0, 2]), |a, b| a + b);
    let low = &low - &dg.permute(&[1, 2, 0]);
    let low = low.scale(0.5);
    einsum("kl,ijl->ikj", &[ginv, &low], shape::TX2)
}

/// `log(dV_g / Ω) = ½ log det g - log ω`, with det taken in coordinates.
pub fn log_density(g: &MetricField) -> Field {
    let n = g.dim();
    let lw = g.grid().log_omega();
    g.map_points(shape::SCALAR, |p, m, o| o[0] = 0.5 * det(n, m).ln() - lw[p])
}

fn symmetrize(t: &Field) -> Field {
    let tt = t.permute(&[1, 0]);
    t.zip_map(&tt, |a, b| 0.5 * (a + b))
}

impl Geometry {
    pub fn new(g: &MetricField) -> Result<Geometry> {
        validate_metric(g)?;
        let ginv = field_inverse(g)?;
        let gamma = christoffel(g, &ginv);
        let f = log_density(g);
        let df = grad(&f);
        let grad_f = einsum("ab,b->a", &[&ginv, &df], shape::VECTOR);
        Ok(Geometry {
            g: g.clone(),
            ginv,
            gamma,
            f,
            df,
            grad_f,
            riemann: OnceLock::new(),
            ric_omega: OnceLock::new(),
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.g.grid()
    }

    pub fn dim(&self) -> usize {
        self.g.dim()
    }

    pub fn g(&self) -> &MetricField {
        &self.g
    }

    pub fn ginv(&self) -> &Field {
        &self.ginv
    }

    pub fn christoffel(&self) -> &Field {
        &self.gamma
    }

    /// The density `f = log(dV_g/Ω)`.
    pub fn f(&self) -> &Field {
        &self.f
    }

    pub fn df(&self) -> &Field {
        &self.df
    }

    pub fn grad_f(&self) -> &Field {
        &self.grad_f
    }

    /// Covariant derivative; the derivative direction becomes a new leading Down slot.
    pub fn nabla(&self, t: &Field) -> Field {
        let n = self.dim();
        let r = t.rank();
        let nc = t.ncomp();
        let mut out = grad(t);
        if r == 0 {
            return out;
        }
        // For each component and slot: (slot digit, stride of that slot).
        let pow: Vec<usize> = (0..r).map(|s| n.pow((r - 1 - s) as u32)).collect();
        let slots = t.slots().to_vec();
        let onc = out.ncomp();
        for p in 0..t.npts() {
            let tp = t.at(p);
            let gp = self.gamma.at(p);
            let op = &mut out.data_mut()[p * onc..(p + 1) * onc];
            for a in 0..n {
                let oa = &mut op[a * nc..(a + 1) * nc];
                for (c, o) in oa.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for s in 0..r {
                        let d = (c / pow[s]) % n;
                        let base = c - d * pow[s];
                        match slots[s] {
                            Slot::Up => {
                                for b in 0..n {
                                    acc += gp[(a * n + d) * n + b] * tp[base + b * pow[s]];
                                }
                            }
                            Slot::Down => {
                                for b in 0..n {
                                    acc -= gp[(a * n + b) * n + d] * tp[base + b * pow[s]];
                                }
                            }
                        }
                    }
                    *o += acc;
                }
            }
        }
        out
    }

    /// `∇^p T`, derivative slots ordered outermost first.
    pub fn nabla_p(&self, t: &Field, p: usize) -> Field {
        let mut out = t.clone();
        for _ in 0..p {
            out = self.nabla(&out);
        }
        out
    }

    fn adjoint(&self, t: &Field, slot: usize, weighted: bool) -> Field {
        assert!(
            slot < t.rank() && t.slots()[slot] == Slot::Down,
            "adjoint derivative: slot {slot} of {:?} is not covariant",
            t.slots()
        );
        if weighted {
            let w = self.f.map(|v| (-v).exp());
            let dt = self.nabla(&t.mul_scalar(&w));
            let c = trace_g(&dt, 0, slot + 1, &self.ginv);
            c.mul_scalar(&self.f.map(|v| -v.exp()))
        } else {
            let dt = self.nabla(t);
            trace_g(&dt, 0, slot + 1, &self.ginv).scale(-1.0)
        }
    }

    /// Formal adjoint of `∇` contracting slot `slot` of `t`: `-Σ (∇_{e_k} T)(.., e_k, ..)`.
    pub fn nabla_star(&self, t: &Field, slot: usize) -> Field {
        self.adjoint(t, slot, false)
    }

    /// Ω-adjoint `∇*_Ω T = e^f ∇*(e^{-f} T)` contracting slot `slot`.
    pub fn nabla_star_omega(&self, t: &Field, slot: usize) -> Field {
        self.adjoint(t, slot, true)
    }

    /// Rough Laplacian `∇*∇`.
    pub fn laplacian(&self, t: &Field) -> Field {
        self.nabla_star(&self.nabla(t), 0)
    }

    /// Ω-Laplacian `Δ^Ω = ∇*_Ω ∇ = Δ + ∇_{∇f}`.
    pub fn laplacian_omega(&self, t: &Field) -> Field {
        self.nabla_star_omega(&self.nabla(t), 0)
    }

    /// `div^Ω T = e^f tr_g ∇(e^{-f} T)` over the first slot, i.e. `-∇*_Ω T`.
    pub fn omega_div(&self, t: &Field) -> Field {
        let r = t.rank();
        assert!(r >= 1 && t.slots()[0] == Slot::Down, "omega_div: leading covariant slot required");
        let down = self.f.map(|v| (-v).exp());
        let up = self.f.map(f64::exp);
        let d = self.nabla(&t.mul_scalar(&down));
        let rest: String = (2..r + 1).map(crate::domain_grid::einsum::idx).collect();
        let spec = format!("ab,ab{rest}->{rest}");
        einsum(&spec, &[&self.ginv, &d], &t.slots()[1..]).mul_scalar(&up)
    }

    /// Curvature `R[a][b][l][m] = R(∂_a, ∂_b)^l_m`.
    pub fn riemann(&self) -> &Field {
        self.riemann.get_or_init(|| {
            let g = &self.gamma;
            let dg = grad(g);
            let quad = einsum("alk,bkm->ablm", &[g, g], shape::CURV);
            let r = &dg - &dg.permute(&[1, 0, 2, 3]);
            &r + &alt(&quad)
        })
    }

    /// Ricci tensor (symmetrized).
    pub fn ricci(&self) -> Field {
        symmetrize(&einsum("abam->bm", &[self.riemann()], shape::METRIC))
    }

    pub fn ric_star(&self) -> Field {
        raise_form(&self.ginv, &self.ricci())
    }

    /// Covariant Hessian of a scalar field (symmetrized).
    pub fn hessian(&self, u: &Field) -> Field {
        assert_eq!(u.rank(), 0, "hessian: scalar field required");
        symmetrize(&self.nabla(&grad(u)))
    }

    /// `Ric_g(Ω) = Ric_g + ∇² f`.
    pub fn bakry_emery_ricci(&self) -> &Field {
        self.ric_omega.get_or_init(|| {
            let ric = einsum("abam->bm", &[self.riemann()], shape::METRIC);
            let hess = self.nabla(&self.df);
            symmetrize(&(&ric + &hess))
        })
    }

    /// `Ric*_g(Ω) = g⁻¹ Ric_g(Ω)`.
    pub fn ric_star_omega(&self) -> Field {
        raise_form(&self.ginv, self.bakry_emery_ricci())
    }

    /// Exterior covariant derivative `∇_{T_X}` of a vector (0-form) or an
    /// endomorphism (1-form).
    pub fn ext_d(&self, t: &Field) -> Field {
        match tx_degree(t) {
            0 => self.nabla(t).permute(&[1, 0]),
            1 => alt(&self.nabla(t)),
            q => panic!("ext_d: T_X-valued {q}-forms are not supported"),
        }
    }

    fn first_form_slot(t: &Field) -> usize {
        match tx_degree(t) {
            0 => panic!("adjoint exterior derivative of a 0-form"),
            1 => 1,
            _ => 0,
        }
    }

    /// Formal adjoint of `∇_{T_X}` on `T_X`-valued 1- and 2-forms.
    pub fn ext_d_star(&self, t: &Field) -> Field {
        self.nabla_star(t, Self::first_form_slot(t))
    }

    /// Ω-adjoint of `∇_{T_X}`.
    pub fn ext_d_star_omega(&self, t: &Field) -> Field {
        self.nabla_star_omega(t, Self::first_form_slot(t))
    }

    fn underline(&self, a: &Field, contracted: Field) -> Field {
        let q = tx_degree(a);
        if q <= 1 {
            return contracted;
        }
        // Remaining slots are [v_1 .. v_{q-1}, value]; move the value before v_{q-1}.
        let r = contracted.rank();
        let mut perm: Vec<usize> = (0..r).collect();
        perm.swap(r - 1, r - 2);
        contracted.permute(&perm)
    }

    /// `div̲ A (v_1..v_{q-1}) = Σ_k (∇_{e_k} A)(v_1..v_{q-1}, e_k)`.
    pub fn div_underline(&self, a: &Field) -> Field {
        let c = self.nabla_star(a, a.rank() - 1).scale(-1.0);
        self.underline(a, c)
    }

    /// `div̲^Ω A = div̲ A - A(.., ∇f)`.
    pub fn div_underline_omega(&self, a: &Field) -> Field {
        let c = self.nabla_star_omega(a, a.rank() - 1).scale(-1.0);
        self.underline(a, c)
    }

    /// `(∇*_Ω R)(ξ) = Σ_k (∇_{e_k} R)(ξ, e_k) - R(ξ, ∇f)`, a `T_X`-valued 2-form.
    pub fn nabla_star_omega_curv(&self) -> Field {
        self.nabla_star_omega(self.riemann(), 0)
    }

    /// `Δ_{T_X} H = ∇_{T_X} ∇* H + ∇* ∇_{T_X} H` (Ω-weighted adjoints when `weighted`).
    pub fn hodge_laplacian_tx(&self, h: &Field, weighted: bool) -> Field {
        assert!(h.is_shape(shape::ENDO), "hodge_laplacian_tx: endomorphism field required");
        if weighted {
            &self.ext_d(&self.ext_d_star_omega(h)) + &self.ext_d_star_omega(&self.ext_d(h))
        } else {
            &self.ext_d(&self.ext_d_star(h)) + &self.ext_d_star(&self.ext_d(h))
        }
    }

    /// `(R ∗ H) ξ = Σ_k R(ξ, e_k) H e_k`.
    pub fn curv_star_endo(&self, h: &Field) -> Field {
        star_endo(self.riemann(), h, &self.ginv)
    }

    pub fn g_transpose(&self, m: &Field) -> Field {
        g_transpose_endo(m, &self.g, &self.ginv)
    }

    /// `R ̂¬_g T`, used by the commutator formula.
    pub(crate) fn curv_hat_neg_g(&self, t: &Field) -> Field {
        hat_neg_g(self.riemann(), t, &self.ginv)
    }

    pub(crate) fn hat_neg(a: &Field, b: &Field) -> Field {
        hat_neg(a, b)
    }

    pub(crate) fn bullet(a: &Field, b: &Field) -> Field {
        bullet_k(a, b, 1)
    }

    /// Largest `|[R(u,v), T(..)]|` over the endomorphism part of `t`.
    pub fn curv_commutator_defect(&self, t: &Field) -> f64 {
        let nr = t.rank();
        if nr < 2 {
            return 0.0;
        }
        let p: String = (0..nr - 2).map(crate::domain_grid::einsum::idx).collect();
        let mut slots = vec![Slot::Down, Slot::Down];
        slots.extend_from_slice(t.slots());
        let r = self.riemann();
        let rt = einsum(&format!("WXij,{p}jk->WX{p}ik"), &[r, t], &slots);
        let tr = einsum(&format!("{p}ij,WXjk->WX{p}ik"), &[t, r], &slots);
        rt.max_abs_diff_inner(&tr, BOUNDARY_MARGIN)
    }

    /// `[R, A]`: curvature acting on an endomorphism field as a derivation.
    pub fn curv_bracket(&self, a: &Field) -> Field {
        let r = self.riemann();
        endo_bracket(r, a)
    }
}
