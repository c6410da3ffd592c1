//! Grids, tensor fields, pointwise algebra, stencils and Ω-weighted quadrature.

pub mod dump;
pub mod einsum;
pub mod fd;
pub mod field;
pub mod grid;
pub mod linalg;
pub mod products;

pub use einsum::{einsum, Contraction};
pub use fd::{fd_partial, grad};
pub use field::{
    shape, sum_fields, CurvField, EndoField, Field, MetricField, ScalarField, Slot, Tensor3Field, VectorField,
};
pub use grid::{pairwise_sum, Axis, FdAccuracy, Grid, GridSpec, Topology};
pub use linalg::{endo_exp, endo_log};

use crate::error::{Result, SrfError};

/// `∫ u Ω` with trapezoid weights on truncated axes and a fixed pairwise
/// summation order.
pub fn integrate_omega(u: &ScalarField) -> Result<f64> {
    if u.rank() != 0 {
        return Err(SrfError::Shape(format!("integrate_omega expects a scalar field, got {:?}", u.slots())));
    }
    if !u.is_finite() {
        return Err(SrfError::NonFinite("integrate_omega input".into()));
    }
    let w = u.grid().quad_weights();
    let prod: Vec<f64> = u.data().iter().zip(w).map(|(a, b)| a * b).collect();
    Ok(pairwise_sum(&prod))
}

/// A center of polarization: an endomorphism field with simple spectrum.
#[derive(Clone, Debug)]
pub struct PolarizationField {
    k: EndoField,
    eigengap: f64,
}

pub const DEFAULT_EIGENGAP: f64 = 1e-6;

impl PolarizationField {
    /// Validates that `k` is g-self-adjoint with pairwise eigenvalue gaps above
    /// `threshold` at every point.
    pub fn new(g: &MetricField, k: EndoField, threshold: f64) -> Result<Self> {
        let eigs = linalg::eigenvalues_g(g, &k)?;
        let mut gap = f64::INFINITY;
        for (p, ev) in eigs.iter().enumerate() {
            let local = ev.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
            if local <= threshold {
                return Err(SrfError::Eigengap { point: p, gap: local, threshold });
            }
            gap = gap.min(local);
        }
        Ok(PolarizationField { k, eigengap: gap })
    }

    pub fn k(&self) -> &EndoField {
        &self.k
    }

    pub fn eigengap(&self) -> f64 {
        self.eigengap
    }
}
