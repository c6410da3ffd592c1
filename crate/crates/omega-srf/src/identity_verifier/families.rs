use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain_grid::{shape, Field, Grid, MetricField, Topology};
use crate::error::Result;
use crate::metric_space_geometry::geodesic;
use crate::riemann_ops::{Geometry, BOUNDARY_MARGIN};
use crate::testbeds::{self, Modes};

/// The randomized or constructed family a check is run on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    /// Torus with random metric, random weight and random velocity; `ġ ∉ 𝔽`.
    Generic2d,
    /// Torus with `g = dx² + φ(x)² dy²`, random weight and a Codazzi velocity, so `ġ ∈ 𝔽`.
    Warped2d,
    /// Gaussian line with a geodesic through the Euclidean metric; `ġ ∈ 𝔽` in one dimension.
    Geodesic1d,
    /// Flat torus with random weight; no time dependence.
    FlatTorus2d,
}

impl FamilyKind {
    pub fn dim(self) -> usize {
        match self {
            FamilyKind::Geodesic1d => 1,
            _ => 2,
        }
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FamilyKind::Generic2d => "generic2d",
            FamilyKind::Warped2d => "warped2d",
            FamilyKind::Geodesic1d => "geodesic1d",
            FamilyKind::FlatTorus2d => "flat_torus2d",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Path {
    Linear,
    Geodesic,
}

/// A curve of metrics `t ↦ g_t` through `g₀` with `ġ₀ = v`, plus an auxiliary
/// endomorphism field `aux` for identities that act on one. Time derivatives at
/// `t = 0` are central differences with step `dt = h`.
#[derive(Debug)]
pub struct Family {
    pub kind: FamilyKind,
    pub seed: u64,
    pub g0: MetricField,
    pub v: MetricField,
    pub aux: Field,
    pub dt: f64,
    path: Path,
}

/// `φ = 1 + 0.3 cos x` and the Codazzi pair `a = φ^m`, `b = φ^m/(m+1) + c/φ`.
const WARP_AMP: f64 = 0.3;
const WARP_M: i32 = 2;
const WARP_C: f64 = 0.2;

/// Width of the excluded band next to a truncated edge.
const EDGE_WIDTH: f64 = 1.0;

fn warp(x: f64) -> f64 {
    1.0 + WARP_AMP * x.cos()
}

impl Family {
    pub fn new(kind: FamilyKind, n: usize, seed: u64) -> Result<Family> {
        let mut rng = testbeds::rng(seed);
        let (g0, v, aux, path) = match kind {
            FamilyKind::Generic2d => {
                let psi = Modes::random(&mut rng, 2, 3, 2, 0.5);
                let grid = testbeds::torus(2, n, |x| -psi.eval(x))?;
                let g0 = testbeds::random_metric(&mut rng, &grid, 0.4);
                let v = testbeds::random_sym2(&mut rng, &grid, 0.5);
                let aux = testbeds::random_endo(&mut rng, &grid, 0.5);
                (g0, v, aux, Path::Linear)
            }
            FamilyKind::Warped2d => {
                let psi = Modes::random(&mut rng, 2, 3, 2, 0.5);
                let grid = testbeds::torus(2, n, |x| -psi.eval(x))?;
                let g0 = Field::from_fn(&grid, shape::METRIC, |x, o| {
                    o[0] = 1.0;
                    o[3] = warp(x[0]).powi(2);
                });
                let v = Field::from_fn(&grid, shape::METRIC, |x, o| {
                    let phi = warp(x[0]);
                    let a = phi.powi(WARP_M);
                    let b = a / f64::from(WARP_M + 1) + WARP_C / phi;
                    o[0] = a;
                    o[3] = b * phi * phi;
                });
                let aux = testbeds::random_endo(&mut rng, &grid, 0.5);
                (g0, v, aux, Path::Linear)
            }
            FamilyKind::Geodesic1d => {
                let grid = testbeds::gaussian_1d(n)?;
                let g0 = Field::euclidean(&grid);
                let v = Field::from_fn(&grid, shape::METRIC, |x, o| o[0] = 0.4 * x[0].sin() + 0.2 * (0.5 * x[0]).cos());
                let aux = Field::from_fn(&grid, shape::ENDO, |x, o| o[0] = 0.3 + (0.7 * x[0]).sin());
                (g0, v, aux, Path::Geodesic)
            }
            FamilyKind::FlatTorus2d => {
                let psi = Modes::random(&mut rng, 2, 3, 2, 0.5);
                let grid = testbeds::torus(2, n, |x| -psi.eval(x))?;
                let g0 = Field::euclidean(&grid);
                let v = Field::zeros(&grid, shape::METRIC);
                let aux = testbeds::random_endo(&mut rng, &grid, 0.5);
                (g0, v, aux, Path::Linear)
            }
        };
        let dt = g0.grid().h_max();
        Ok(Family { kind, seed, g0, v, aux, dt, path })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.g0.grid()
    }

    pub fn h(&self) -> f64 {
        self.grid().h_max()
    }

    /// Layers left out of residuals: the stencil margin, widened on truncated
    /// axes to a fixed physical distance so the measured region does not grow
    /// toward the edge under refinement.
    pub fn margin(&self) -> usize {
        let grid = self.grid();
        let truncated = grid.axes().iter().any(|a| a.topology == Topology::Truncated);
        if truncated {
            BOUNDARY_MARGIN.max((EDGE_WIDTH / self.h()).ceil() as usize)
        } else {
            BOUNDARY_MARGIN
        }
    }

    pub fn label(&self) -> String {
        format!("{}/seed={}", self.kind, self.seed)
    }

    pub fn metric_at(&self, t: f64) -> Result<MetricField> {
        match self.path {
            Path::Linear => Ok(self.g0.axpy(t, &self.v)),
            Path::Geodesic => geodesic(&self.g0, &self.v, t),
        }
    }

    pub fn geometry0(&self) -> Result<Geometry> {
        Geometry::new(&self.g0)
    }

    /// `d/dt|₀ Q(g_t)` by a central difference.
    pub fn ddt(&self, q: impl Fn(&Geometry) -> Field) -> Result<Field> {
        let plus = q(&Geometry::new(&self.metric_at(self.dt)?)?);
        let minus = q(&Geometry::new(&self.metric_at(-self.dt)?)?);
        Ok((&plus - &minus).scale(0.5 / self.dt))
    }
}
