//! The catalogue of checked identities. Each evaluator returns both sides at
//! `t = 0` of a family, and optionally a deliberately wrong right side.

use std::f64::consts::PI;

use crate::domain_grid::einsum::idx;
use crate::domain_grid::linalg::{endo_fn_g, field_inverse};
use crate::domain_grid::products::{
    alt, circledstar, endo_bracket, endo_hook, endo_on_value, g_transpose_tx2, hat_neg, raise_form,
};
use crate::domain_grid::{einsum, endo_log, shape, Field};
use crate::error::Result;
use crate::riemann_ops::{Geometry, BOUNDARY_MARGIN};
use crate::testbeds::{self, Modes};

use super::families::{Family, FamilyKind};

/// Both sides of one identity on one family.
#[derive(Clone, Debug)]
pub struct Eval {
    pub lhs: Field,
    pub rhs: Field,
    /// A right side with one term's sign flipped; must miss `lhs`.
    pub mutant: Option<Field>,
    /// Size of the commutators the identity assumes to vanish, when it assumes any.
    pub hypothesis_defect: Option<f64>,
    /// Whether the left side involves a time derivative (sets the budget's `dt` term).
    pub timed: bool,
}

impl Eval {
    fn timed(lhs: Field, rhs: Field) -> Eval {
        Eval { lhs, rhs, mutant: None, hypothesis_defect: None, timed: true }
    }

    fn fixed(lhs: Field, rhs: Field) -> Eval {
        Eval { lhs, rhs, mutant: None, hypothesis_defect: None, timed: false }
    }

    fn with_mutant(mut self, m: Field) -> Eval {
        self.mutant = Some(m);
        self
    }

    fn with_defect(mut self, d: f64) -> Eval {
        self.hypothesis_defect = Some(d);
        self
    }
}

pub type Evaluator = fn(&Family) -> Result<Eval>;

/// One identity with the families on which it must hold and those on which it must fail.
pub struct Check {
    pub id: &'static str,
    pub eval: Evaluator,
    pub positive: &'static [FamilyKind],
    pub negative: &'static [FamilyKind],
}

use FamilyKind::{FlatTorus2d as Flat, Generic2d as Gen, Geodesic1d as Geo, Warped2d as Warp};

pub fn catalogue() -> Vec<Check> {
    vec![
        Check { id: "connection_variation", eval: connection_variation, positive: &[Gen, Geo], negative: &[] },
        Check { id: "connection_variation_codazzi", eval: connection_variation_codazzi, positive: &[Geo, Warp], negative: &[Gen] },
        Check { id: "curvature_variation", eval: curvature_variation, positive: &[Gen], negative: &[] },
        Check { id: "curvature_variation_codazzi", eval: curvature_variation_codazzi, positive: &[Warp], negative: &[Gen] },
        Check { id: "bakry_emery_variation", eval: bakry_emery_variation, positive: &[Gen, Geo], negative: &[] },
        Check { id: "bakry_emery_variation_codazzi", eval: bakry_emery_variation_codazzi, positive: &[Geo, Warp], negative: &[Gen] },
        Check { id: "ric_star_omega_variation_codazzi", eval: ric_star_omega_variation_codazzi, positive: &[Geo, Warp], negative: &[Gen] },
        Check { id: "density_gradient_variation", eval: density_gradient_variation, positive: &[Geo, Warp], negative: &[Gen] },
        Check { id: "ric_star_variation_codazzi", eval: ric_star_variation_codazzi, positive: &[Warp], negative: &[Gen] },
        Check { id: "endo_connection_variation", eval: endo_connection_variation, positive: &[Warp], negative: &[Gen] },
        Check { id: "exterior_derivative_variation", eval: exterior_derivative_variation, positive: &[Gen, Warp], negative: &[] },
        Check { id: "higher_derivative_variation", eval: higher_derivative_variation, positive: &[Geo], negative: &[Gen] },
        Check { id: "laplacian_derivative_expansion", eval: laplacian_derivative_expansion, positive: &[Geo, Gen], negative: &[] },
        Check { id: "weighted_contracted_bianchi", eval: weighted_contracted_bianchi, positive: &[Gen], negative: &[] },
        Check { id: "prescattering_variation_codazzi", eval: prescattering_variation_codazzi, positive: &[Warp], negative: &[Gen] },
        Check { id: "prescattering_variation", eval: prescattering_variation, positive: &[Gen], negative: &[] },
        Check { id: "weitzenbock_tx", eval: weitzenbock_plain, positive: &[Gen], negative: &[] },
        Check { id: "weitzenbock_tx_weighted", eval: weitzenbock_weighted, positive: &[Gen], negative: &[] },
        Check { id: "endo_divergence_formula", eval: endo_divergence_formula, positive: &[Gen], negative: &[] },
        Check { id: "commutator_nabla_laplacian", eval: commutator_nabla_laplacian, positive: &[Gen, Flat], negative: &[Warp] },
        Check { id: "log_derivative", eval: log_derivative, positive: &[Geo, Flat], negative: &[Gen] },
    ]
}

fn v_star(fam: &Family, geo: &Geometry) -> Field {
    raise_form(geo.ginv(), &fam.v)
}

fn matmul(a: &Field, b: &Field) -> Field {
    einsum("ij,jk->ik", &[a, b], shape::ENDO)
}

/// `max |[X(..), Y(..)]|` over the endomorphism parts of two fields.
fn endo_part_commutator(x: &Field, y: &Field) -> f64 {
    let (rx, ry) = (x.rank(), y.rank());
    let xs: String = (0..rx - 2).map(idx).collect();
    let ys: String = (0..ry - 2).map(|k| idx(10 + k)).collect();
    let mut slots = x.slots()[..rx - 2].to_vec();
    slots.extend_from_slice(&y.slots()[..ry - 2]);
    slots.extend_from_slice(shape::ENDO);
    let xy = einsum(&format!("{xs}IJ,{ys}JK->{xs}{ys}IK"), &[x, y], &slots);
    let yx = einsum(&format!("{ys}IJ,{xs}JK->{xs}{ys}IK"), &[y, x], &slots);
    xy.max_abs_diff_inner(&yx, BOUNDARY_MARGIN)
}

fn connection_variation(fam: &Family) -> Result<Eval> {
    let geo = fam.geometry0()?;
    let gamma_dot = fam.ddt(|g| g.christoffel().clone())?;
    let lhs = einsum("ikj,km->ijm", &[&gamma_dot, &fam.g0], shape::COV3).scale(2.0);
    let n = geo.nabla(&fam.v);
    let sym = &n + &n.permute(&[1, 0, 2]);
    let last = n.permute(&[1, 2, 0]);
    Ok(Eval::timed(lhs, &sym - &last).with_mutant(&sym + &last))
}

fn connection_variation_codazzi(fam: &Family) -> Result<Eval> {
    let geo = fam.geometry0()?;
    let lhs = fam.ddt(|g| g.christoffel().clone())?.scale(2.0);
    Ok(Eval::timed(lhs, geo.nabla(&v_star(fam, &geo))))
}

fn curvature_variation(fam: &Family) -> Result<Eval> {
    let geo = fam.geometry0()?;
    let lhs = fam.ddt(|g| g.riemann().clone())?;
    let d = geo.nabla(&fam.ddt(|g| g.christoffel().clone())?);
    let swapped = d.permute(&[1, 0, 2, 3]);
    Ok(Eval::timed(lhs, &d - &swapped).with_mutant(&d + &swapped))
}

fn curvature_variation_codazzi(fam: &Family) -> Result<Eval> {
    let geo = fam.geometry0()?;
    let lhs = fam.ddt(|g| g.riemann().clone())?.scale(2.0);
    Ok(Eval::timed(lhs, geo.curv_bracket(&v_star(fam, &geo))))
}

fn bakry_emery_variation(fam: &Family) -> Result<Eval> {
    let geo = fam.geometry0()?;
    let lhs = fam.ddt(|g| g.bakry_emery_ricci().clone())?.scale(2.0);
    let n = geo.nabla(&fam.v);
    let pair = &n.permute(&[1, 0, 2]) + &n.permute(&[2, 1, 0]);
    let rhs = geo.nabla_star_omega(&(&pair - &n), 0).scale(-1.0);
    let mutant = geo.nabla_star_omega(&(&pair + &n), 0).scale(-1.0);
    Ok(Eval::timed(lhs, rhs).with_mutant(mutant))
}

fn bakry_emery_variation_codazzi(fam: &Family) -> Result<Eval> {
    let geo = fam.geometry0()?;
    let lhs = fam.ddt(|g| g.bakry_emery_ricci().clone())?.scale(2.0);
    Ok(Eval::timed(lhs, geo.laplacian_omega(&fam.v).scale(-1.0)))
}

fn ric_star_omega_variation_codazzi(fam: &Family) -> Result<Eval> {
    let geo = fam.geometry0()?;
    let vs = v_star(fam, &geo);
    let lhs = fam.ddt(|g| g.ric_star_omega())?.scale(2.0);
    let rhs = &geo.laplacian_omega(&vs).scale(-1.0) - &matmul(&vs, &geo.ric_star_omega()).scale(2.0);
    Ok(Eval::timed(lhs, rhs))
}

fn density_gradient_variation(fam: &Family) -> Result<Eval> {
    let geo = fam.geometry0()?;
    let vs = v_star(fam, &geo);
    let lhs = fam.ddt(|g| g.grad_f().clone())?.scale(2.0);
    let push = einsum("ij,j->i", &[&vs, geo.grad_f()], shape::VECTOR);
    let rhs = &geo.nabla_star(&vs, 1).scale(-1.0) - &push.scale(2.0);
    Ok(Eval::timed(lhs, rhs))
}

fn ric_star_variation_codazzi(fam: &Family) -> Result<Eval> {
    let geo = fam.geometry0()?;
    let vs = v_star(fam, &geo);
    let lhs = fam.ddt(|g| g.ric_star())?.scale(2.0);
    let rhs = (&matmul(&vs, &geo.ric_star()) + &geo.curv_star_endo(&vs)).scale(-1.0);
    Ok(Eval::timed(lhs, rhs))
}

fn endo_connection_variation(fam: &Family) -> Result<Eval> {
    let geo = fam.geometry0()?;
    let h = &fam.aux;
    let lhs = fam.ddt(|g| g.nabla(h))?.scale(2.0);
    Ok(Eval::timed(lhs, endo_bracket(&geo.nabla(&v_star(fam, &geo)), h)))
}

fn exterior_derivative_variation(fam: &Family) -> Result<Eval> {
    let geo = fam.geometry0()?;
    let vs = v_star(fam, &geo);
    let h = &fam.aux;
    let lhs = fam.ddt(|g| g.ext_d(h))?.scale(2.0);
    let b = geo.ext_d(&vs);
    let base = &(&geo.ext_d(&matmul(&vs, h)) - &endo_on_value(&vs, &geo.ext_d(h))) - &endo_hook(h, &b);
    let bt_h = alt(&einsum("vij,jk->vik", &[&g_transpose_tx2(&b, geo.g(), geo.ginv()), h], shape::TX2));
    let e = Eval::timed(lhs, &base + &bt_h);
    // On Codazzi families the transposed term vanishes and a flipped sign would go unnoticed.
    Ok(if fam.kind == FamilyKind::Generic2d { e.with_mutant(&base - &bt_h) } else { e })
}

/// Order of the derivative in the higher-derivative check.
const PDER_ORDER: usize = 2;

fn higher_derivative_variation(fam: &Family) -> Result<Eval> {
    let geo = fam.geometry0()?;
    let h = &fam.aux;
    let lhs = fam.ddt(|g| g.nabla_p(h, PDER_ORDER))?.scale(2.0);
    let dv = geo.nabla(&v_star(fam, &geo));
    let mut rhs = Field::zeros(h.grid(), geo.nabla(h).slots());
    let mut lower = h.clone();
    let mut defect = endo_part_commutator(&dv, h);
    for _ in 1..PDER_ORDER {
        lower = geo.nabla(&lower);
        defect = defect.max(endo_part_commutator(&dv, &lower));
        rhs = &geo.nabla(&rhs) - &hat_neg(&dv, &lower);
    }
    Ok(Eval::timed(lhs, rhs).with_defect(defect))
}

fn laplacian_derivative_expansion(fam: &Family) -> Result<Eval> {
    let geo = fam.geometry0()?;
    let a = &fam.aux;
    let s = geo.nabla_laplacian_expansion(a);
    let n2 = geo.nabla_p(a, 2);
    let drift = einsum("xbik,b->xik", &[&n2, geo.grad_f()], &n2.slots()[1..]);
    let mutant = &s.rhs - &drift.scale(2.0);
    Ok(Eval::fixed(s.lhs, s.rhs).with_mutant(mutant))
}

fn weighted_contracted_bianchi(fam: &Family) -> Result<Eval> {
    let geo = fam.geometry0()?;
    let s = geo.omega_contracted_bianchi();
    let mutant = s.rhs.scale(-1.0);
    Ok(Eval::fixed(s.lhs, s.rhs).with_mutant(mutant))
}

fn prescattering_variation_codazzi(fam: &Family) -> Result<Eval> {
    let geo = fam.geometry0()?;
    let vs = v_star(fam, &geo);
    let lhs = fam.ddt(|g| g.ext_d(&g.ric_star_omega()))?.scale(2.0);
    let q = geo.ext_d(&geo.ric_star_omega());
    let bracket = geo.div_underline_omega(&geo.curv_bracket(&vs));
    let spin = alt(&circledstar(geo.riemann(), &geo.nabla(&vs), geo.ginv()));
    let rhs = &(&bracket + &spin) - &endo_on_value(&vs, &q).scale(2.0);
    Ok(Eval::timed(lhs, rhs))
}

fn prescattering_variation(fam: &Family) -> Result<Eval> {
    let geo = fam.geometry0()?;
    let vs = v_star(fam, &geo);
    let lhs = fam.ddt(|g| g.ext_d(&g.ric_star_omega()))?.scale(2.0);
    let ric = geo.ric_star_omega();
    let q = geo.ext_d(&ric);
    let b = geo.ext_d(&vs);
    let transposed = geo.ext_d(&geo.g_transpose(&geo.ext_d_star_omega(&b)));
    let bracket = geo.div_underline_omega(&geo.curv_bracket(&vs));
    let spin = alt(&circledstar(geo.riemann(), &(&geo.nabla(&vs) - &b), geo.ginv()));
    let bt_ric = alt(&einsum("vij,jk->vik", &[&g_transpose_tx2(&b, geo.g(), geo.ginv()), &ric], shape::TX2));
    let rest = &(&(&bracket + &spin) + &bt_ric) - &(&endo_hook(&ric, &b) + &endo_on_value(&vs, &q).scale(2.0));
    Ok(Eval::timed(lhs, &rest + &transposed).with_mutant(&rest - &transposed))
}

fn weitzenbock(fam: &Family, weighted: bool) -> Result<Eval> {
    let geo = fam.geometry0()?;
    let s = geo.weitzenbock_tx(&fam.aux, weighted);
    let mutant = &s.rhs + &geo.curv_star_endo(&fam.aux).scale(2.0);
    Ok(Eval::fixed(s.lhs, s.rhs).with_mutant(mutant))
}

fn weitzenbock_plain(fam: &Family) -> Result<Eval> {
    weitzenbock(fam, false)
}

fn weitzenbock_weighted(fam: &Family) -> Result<Eval> {
    weitzenbock(fam, true)
}

fn endo_divergence_formula(fam: &Family) -> Result<Eval> {
    let geo = fam.geometry0()?;
    let s = geo.endo_div_formula(&fam.v);
    let p = geo.nabla_star_omega(&geo.ext_d(&v_star(fam, &geo)), 0);
    let mutant = &s.rhs - &geo.g_transpose(&p).scale(2.0);
    Ok(Eval::fixed(s.lhs, s.rhs).with_mutant(mutant))
}

/// `α ⊗ 𝕀` with `α` taken from the first row of the auxiliary field.
fn scalar_valued_form(fam: &Family) -> Field {
    let n = fam.grid().dim();
    fam.aux.map_points(shape::TX2, |_, h, o| {
        for u in 0..n {
            for i in 0..n {
                o[(u * n + i) * n + i] = h[u];
            }
        }
    })
}

fn commutator_nabla_laplacian(fam: &Family) -> Result<Eval> {
    let geo = fam.geometry0()?;
    let a = match fam.kind {
        FamilyKind::Generic2d => scalar_valued_form(fam),
        _ => fam.aux.clone(),
    };
    let rep = geo.commutator_nabla_laplacian(&a);
    Ok(Eval::fixed(rep.sides.lhs, rep.sides.rhs).with_defect(rep.hypothesis_defect))
}

/// Rotation by a fixed angle, so `P diag(..) Pᵀ` keeps a constant eigenframe.
const FRAME_ANGLE: f64 = 0.4;

fn log_derivative(fam: &Family) -> Result<Eval> {
    let geo = fam.geometry0()?;
    let grid = fam.grid();
    let b = match fam.kind {
        FamilyKind::Geodesic1d => fam.aux.map(f64::exp),
        FamilyKind::FlatTorus2d => {
            let mut rng = testbeds::rng(fam.seed ^ 0x5eed);
            let m1 = Modes::random(&mut rng, 2, 3, 2, 0.6);
            let m2 = Modes::random(&mut rng, 2, 3, 2, 0.6);
            let (c, s) = (FRAME_ANGLE.cos(), FRAME_ANGLE.sin());
            Field::from_fn(grid, shape::ENDO, |x, o| {
                let (l1, l2) = (m1.eval(x).exp(), m2.eval(x).exp());
                o[0] = c * c * l1 + s * s * l2;
                o[1] = c * s * (l1 - l2);
                o[2] = o[1];
                o[3] = s * s * l1 + c * c * l2;
            })
        }
        _ => {
            // Symmetric exponent whose eigenframe rotates across the domain.
            let m = Modes::random(&mut testbeds::rng(fam.seed ^ 0x5eed), 2, 3, 2, 0.6);
            let s = Field::from_fn(grid, shape::METRIC, |x, o| {
                let th = 0.5 * PI * (x[0].sin() + 0.5 * x[1].cos());
                let (c, sn) = (th.cos(), th.sin());
                let (l1, l2) = (m.eval(x), -0.5 * m.eval(x) + 0.3);
                o[0] = c * c * l1 + sn * sn * l2;
                o[1] = c * sn * (l1 - l2);
                o[2] = o[1];
                o[3] = sn * sn * l1 + c * c * l2;
            });
            endo_fn_g(geo.g(), &raise_form(geo.ginv(), &s), f64::exp)?
        }
    };
    let log_b = match fam.kind {
        FamilyKind::Generic2d => endo_fn_g(geo.g(), &b, f64::ln)?,
        _ => endo_log(&b)?,
    };
    let db = geo.nabla(&b);
    let lhs = geo.nabla(&log_b);
    let rhs = einsum("ij,ajk->aik", &[&field_inverse(&b)?, &db], shape::TX2);
    Ok(Eval::fixed(lhs, rhs).with_defect(endo_part_commutator(&db, &b)))
}
