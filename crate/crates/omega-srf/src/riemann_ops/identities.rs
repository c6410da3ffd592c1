use super::{Geometry, Sides};
use crate::domain_grid::products::{g_transpose_endo, raise_form, trace_g, tx_degree};
use crate::domain_grid::{einsum, shape, Field, MetricField};

/// Outcome of the `[∇, Δ^Ω]` check, with the advisory curvature hypothesis.
#[derive(Clone, Debug)]
pub struct CommutatorReport {
    pub sides: Sides,
    /// `max |[R, ξ¬∇^r A]|` over r = 0, 1.
    pub hypothesis_defect: f64,
    pub hypothesis_ok: bool,
}

/// Tolerance on the curvature commutator below which the hypothesis of the
/// commutator formula counts as satisfied.
pub const HYPOTHESIS_TOL: f64 = 1e-6;

impl Geometry {
    /// Weitzenböck formula for `T_X`-valued 1-forms:
    /// `Δ_{T_X} H = Δ H - R ∗ H + H Ric*`, or with Ω-weighted adjoints
    /// `Δ^Ω_{T_X} H = Δ^Ω H - R ∗ H + H Ric*(Ω)`.
    pub fn weitzenbock_tx(&self, h: &Field, weighted: bool) -> Sides {
        let lhs = self.hodge_laplacian_tx(h, weighted);
        let (lap, ric) =
            if weighted { (self.laplacian_omega(h), self.ric_star_omega()) } else { (self.laplacian(h), self.ric_star()) };
        let h_ric = einsum("ij,jk->ik", &[h, &ric], shape::ENDO);
        let rhs = &(&lap - &self.curv_star_endo(h)) + &h_ric;
        Sides::new(lhs, rhs)
    }

    /// The divergence formula for `D u (μ, ξ, η) = ∇u(ξ,μ,η) + ∇u(η,ξ,μ) - ∇u(μ,ξ,η)`:
    /// `-(∇*_Ω D u)* = ∇*_Ω ∇_{T_X} u* + (∇*_Ω ∇_{T_X} u*)^T - Δ^Ω u*`.
    pub fn endo_div_formula(&self, u: &MetricField) -> Sides {
        let du = self.nabla(u);
        let d = &(&du.permute(&[1, 0, 2]) + &du.permute(&[2, 1, 0])) - &du;
        let lhs = raise_form(self.ginv(), &self.nabla_star_omega(&d, 0)).scale(-1.0);
        let us = raise_form(self.ginv(), u);
        let p = self.nabla_star_omega(&self.ext_d(&us), 0);
        let rhs = &(&p + &g_transpose_endo(&p, self.g(), self.ginv())) - &self.laplacian_omega(&us);
        Sides::new(lhs, rhs)
    }

    /// Contracted second Bianchi identity with weight: `div̲^Ω R = -∇_{T_X} Ric*(Ω)`.
    pub fn omega_contracted_bianchi(&self) -> Sides {
        let lhs = self.div_underline_omega(self.riemann());
        let rhs = self.ext_d(&self.ric_star_omega()).scale(-1.0);
        Sides::new(lhs, rhs)
    }

    /// Ricci identity `Alt ∇²A = [R, A]` for scalars, vectors and endomorphisms.
    pub fn ricci_identity(&self, a: &Field) -> Sides {
        let second = self.nabla_p(a, 2);
        let lhs = &second - &second.permute(&swap01(second.rank()));
        let rhs = match a.rank() {
            0 => Field::zeros(a.grid(), lhs.slots()),
            1 => einsum("abij,j->abi", &[self.riemann(), a], lhs.slots()),
            2 => self.curv_bracket(a),
            r => panic!("ricci_identity: rank {r} not supported"),
        };
        Sides::new(lhs, rhs)
    }

    /// First derivative of the Ω-Laplacian:
    /// `∇ Δ^Ω A = -Tr_{2,3} ∇³A + ∇f ¬_2 ∇²A + ∇²f ∗_1 ∇A`.
    pub fn nabla_laplacian_expansion(&self, a: &Field) -> Sides {
        let lhs = self.nabla(&self.laplacian_omega(a));
        let n1 = self.nabla(a);
        let n2 = self.nabla(&n1);
        let n3 = self.nabla(&n2);
        let tr = trace_g(&n3, 1, 2, self.ginv());
        let r = a.rank();
        let rest: String = (0..r).map(|k| crate::domain_grid::einsum::idx(3 + k)).collect();
        let drift = einsum(&format!("xb{rest},b->x{rest}"), &[&n2, self.grad_f()], n1.slots());
        let hess = raise_form(self.ginv(), &self.nabla(self.df()));
        let curve = einsum(&format!("bx,b{rest}->x{rest}"), &[&hess, &n1], n1.slots());
        let rhs = &(&drift + &curve) - &tr;
        Sides::new(lhs, rhs)
    }

    /// `[∇, Δ^Ω] A = Ric*(Ω) • ∇A + 2 R ̂¬_g ∇A + ∇*_Ω R ̂¬ A` for scalars and
    /// `T_X`-valued forms. The curvature hypothesis is checked and reported,
    /// not enforced.
    pub fn commutator_nabla_laplacian(&self, a: &Field) -> CommutatorReport {
        let na = self.nabla(a);
        let lhs = &self.nabla(&self.laplacian_omega(a)) - &self.laplacian_omega(&na);
        let ric = self.ric_star_omega();
        let (rhs, defect) = if a.rank() == 0 {
            (einsum("a,ax->x", &[&na, &ric], shape::COVECTOR), 0.0)
        } else {
            let _ = tx_degree(a);
            let t1 = Geometry::bullet(&ric, &na);
            let t2 = self.curv_hat_neg_g(&na).scale(2.0);
            let t3 = Geometry::hat_neg(&self.nabla_star_omega_curv(), a);
            let defect = self.curv_commutator_defect(a).max(self.curv_commutator_defect(&na));
            (&(&t1 + &t2) + &t3, defect)
        };
        CommutatorReport { sides: Sides::new(lhs, rhs), hypothesis_defect: defect, hypothesis_ok: defect <= HYPOTHESIS_TOL }
    }
}

fn swap01(r: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..r).collect();
    p.swap(0, 1);
    p
}
