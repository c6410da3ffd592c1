use serde::{Deserialize, Serialize};

use crate::domain_grid::products::norm2_g;
use crate::domain_grid::{integrate_omega, EndoField, Field, MetricField};
use crate::error::Result;
use crate::riemann_ops::{Geometry, BOUNDARY_MARGIN};

/// Left side over the constant-free right side of the three interpolation
/// inequalities, for one field, with `r = 1` and `p = 2` throughout.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InterpolationRatios {
    /// `∫|∇A|² / ((∫|∇²A|²)^½ (∫|A|²)^½)`.
    pub lemma: f64,
    /// `∫|∇A|⁴ / ((max|A|)² ∫|∇²A|²)`.
    pub interp_i: f64,
    /// `∫|∇^r A|² / ((∫|∇^p A|²)^{r/p} (∫|A|²)^{1-r/p})`; at `r = 1, p = 2` it
    /// coincides with `lemma`.
    pub interp_ii: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Integrals of `|∇^k A|^{2e}` against Ω.
fn moment(geo: &Geometry, t: &Field, e: i32) -> Result<f64> {
    let n2 = norm2_g(t, geo.g(), geo.ginv());
    integrate_omega(&n2.map(|v| v.max(0.0).powi(e)))
}

pub fn interpolation_ratios(g: &MetricField, a: &EndoField) -> Result<InterpolationRatios> {
    let geo = Geometry::new(g)?;
    let d1 = geo.nabla(a);
    let d2 = geo.nabla(&d1);
    let a2 = moment(&geo, a, 1)?;
    let d1_2 = moment(&geo, &d1, 1)?;
    let d1_4 = moment(&geo, &d1, 2)?;
    let d2_2 = moment(&geo, &d2, 1)?;
    let sup = norm2_g(a, geo.g(), geo.ginv()).max_abs_inner(BOUNDARY_MARGIN).sqrt();
    let (r, p) = (1.0, 2.0);
    Ok(InterpolationRatios {
        lemma: ratio(d1_2, d2_2.sqrt() * a2.sqrt()),
        interp_i: ratio(d1_4, sup.powf(2.0 * (p / r - 1.0)) * d2_2),
        interp_ii: ratio(d1_2, d2_2.powf(r / p) * a2.powf(1.0 - r / p)),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HamiltonReport {
    pub samples: Vec<InterpolationRatios>,
    /// Empirical constants: the largest ratio over the samples.
    pub c_hat: InterpolationRatios,
}

impl HamiltonReport {
    pub fn is_finite(&self) -> bool {
        let c = &self.c_hat;
        c.lemma.is_finite() && c.interp_i.is_finite() && c.interp_ii.is_finite()
    }

    /// Relative change of each constant against another run (e.g. a refined grid).
    pub fn relative_change(&self, other: &HamiltonReport) -> InterpolationRatios {
        let rel = |a: f64, b: f64| if a == b { 0.0 } else { (a - b).abs() / a.abs().max(b.abs()) };
        InterpolationRatios {
            lemma: rel(self.c_hat.lemma, other.c_hat.lemma),
            interp_i: rel(self.c_hat.interp_i, other.c_hat.interp_i),
            interp_ii: rel(self.c_hat.interp_ii, other.c_hat.interp_ii),
        }
    }
}

/// Evaluates the interpolation ratios on every sample and keeps the maxima.
pub fn verify_hamilton_interpolation(samples: &[(MetricField, EndoField)]) -> Result<HamiltonReport> {
    let ratios: Vec<InterpolationRatios> =
        samples.iter().map(|(g, a)| interpolation_ratios(g, a)).collect::<Result<_>>()?;
    let c_hat = ratios.iter().fold(InterpolationRatios::default(), |m, r| InterpolationRatios {
        lemma: m.lemma.max(r.lemma),
        interp_i: m.interp_i.max(r.interp_i),
        interp_ii: m.interp_ii.max(r.interp_ii),
    });
    Ok(HamiltonReport { samples: ratios, c_hat })
}
