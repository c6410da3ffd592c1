use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SrfError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    /// Points `lo + i h`, `i < n`, with `h = (hi - lo) / n` and wraparound.
    Periodic,
    /// Points `lo + i h`, `i < n`, with `h = (hi - lo) / (n - 1)`; both ends included.
    Truncated,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FdAccuracy {
    Second,
    Fourth,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub n: usize,
    pub lo: f64,
    pub hi: f64,
    pub topology: Topology,
}

impl Axis {
    pub fn periodic(n: usize, lo: f64, hi: f64) -> Self {
        Axis { n, lo, hi, topology: Topology::Periodic }
    }

    pub fn truncated(n: usize, lo: f64, hi: f64) -> Self {
        Axis { n, lo, hi, topology: Topology::Truncated }
    }

    pub fn spacing(&self) -> f64 {
        match self.topology {
            Topology::Periodic => (self.hi - self.lo) / self.n as f64,
            Topology::Truncated => (self.hi - self.lo) / (self.n - 1) as f64,
        }
    }
}

/// Construction parameters of a [`Grid`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub axes: Vec<Axis>,
    pub accuracy: FdAccuracy,
    /// Upper bound for the density of Ω on the boundary layers of truncated axes.
    pub boundary_cutoff: f64,
}

impl GridSpec {
    pub fn new(axes: Vec<Axis>) -> Self {
        GridSpec { axes, accuracy: FdAccuracy::Second, boundary_cutoff: 1e-10 }
    }

    pub fn with_accuracy(mut self, accuracy: FdAccuracy) -> Self {
        self.accuracy = accuracy;
        self
    }
}

/// Rectangular tensor-product discretization of the domain together with the
/// reference volume form Ω = ω dx. Points are stored row-major, axis 0 slowest.
#[derive(Debug)]
pub struct Grid {
    spec: GridSpec,
    h: Vec<f64>,
    strides: Vec<usize>,
    npts: usize,
    log_omega: Vec<f64>,
    omega: Vec<f64>,
    /// ω times the trapezoid cell weight, the measure used by `integrate_omega`.
    quad: Vec<f64>,
}

impl Grid {
    /// Builds the grid and samples `log ω` at every point.
    pub fn new(spec: GridSpec, log_omega: impl Fn(&[f64]) -> f64) -> Result<Arc<Grid>> {
        let dim = spec.axes.len();
        if !(1..=3).contains(&dim) {
            return Err(SrfError::Grid(format!("dimension {dim} not in 1..=3")));
        }
        let min_points = match spec.accuracy {
            FdAccuracy::Second => 4,
            FdAccuracy::Fourth => 6,
        };
        for (k, ax) in spec.axes.iter().enumerate() {
            if ax.n < min_points {
                return Err(SrfError::Grid(format!(
                    "axis {k} has {} points, need at least {min_points}",
                    ax.n
                )));
            }
            if !(ax.hi > ax.lo) || !ax.lo.is_finite() || !ax.hi.is_finite() {
                return Err(SrfError::Grid(format!("axis {k} has an empty or non-finite range")));
            }
        }
        let h: Vec<f64> = spec.axes.iter().map(Axis::spacing).collect();
        let mut strides = vec![1usize; dim];
        for d in (0..dim.saturating_sub(1)).rev() {
            strides[d] = strides[d + 1] * spec.axes[d + 1].n;
        }
        let npts = strides[0] * spec.axes[0].n;

        let mut log_w = Vec::with_capacity(npts);
        let mut x = vec![0.0; dim];
        for p in 0..npts {
            for d in 0..dim {
                let i = (p / strides[d]) % spec.axes[d].n;
                x[d] = spec.axes[d].lo + i as f64 * h[d];
            }
            let lw = log_omega(&x);
            if !lw.is_finite() {
                return Err(SrfError::Grid(format!("log density not finite at point {p}")));
            }
            log_w.push(lw);
        }
        let omega: Vec<f64> = log_w.iter().map(|v| v.exp()).collect();
        if let Some(p) = omega.iter().position(|&w| !(w > 0.0)) {
            return Err(SrfError::Grid(format!("omega density vanishes at point {p}")));
        }

        let mut quad = vec![0.0; npts];
        for p in 0..npts {
            let mut w = omega[p];
            for d in 0..dim {
                w *= h[d];
                let i = (p / strides[d]) % spec.axes[d].n;
                if spec.axes[d].topology == Topology::Truncated && (i == 0 || i + 1 == spec.axes[d].n) {
                    w *= 0.5;
                }
            }
            quad[p] = w;
        }

        let grid = Grid { spec, h, strides, npts, log_omega: log_w, omega, quad };
        let edge = grid.boundary_omega_max();
        if edge > grid.spec.boundary_cutoff {
            return Err(SrfError::Grid(format!(
                "omega density {edge:e} on a truncated boundary exceeds cutoff {:e}",
                grid.spec.boundary_cutoff
            )));
        }
        Ok(Arc::new(grid))
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.spec.axes
    }

    pub fn accuracy(&self) -> FdAccuracy {
        self.spec.accuracy
    }

    pub fn npts(&self) -> usize {
        self.npts
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    /// Largest spacing over all axes.
    pub fn h_max(&self) -> f64 {
        self.h.iter().cloned().fold(0.0, f64::max)
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    pub fn index(&self, p: usize, axis: usize) -> usize {
        (p / self.strides[axis]) % self.spec.axes[axis].n
    }

    pub fn coord(&self, p: usize, axis: usize) -> f64 {
        self.spec.axes[axis].lo + self.index(p, axis) as f64 * self.h[axis]
    }

    pub fn coords(&self, p: usize, out: &mut [f64]) {
        for (d, x) in out.iter_mut().enumerate().take(self.dim()) {
            *x = self.coord(p, d);
        }
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn log_omega(&self) -> &[f64] {
        &self.log_omega
    }

    /// Quadrature weights (ω times trapezoid cell volume).
    pub fn quad_weights(&self) -> &[f64] {
        &self.quad
    }

    /// True when the point sits on the first or last layer of a truncated axis.
    pub fn on_boundary(&self, p: usize) -> bool {
        (0..self.dim()).any(|d| {
            let ax = &self.spec.axes[d];
            let i = self.index(p, d);
            ax.topology == Topology::Truncated && (i == 0 || i + 1 == ax.n)
        })
    }

    /// Number of layers between the point and the nearest truncated edge
    /// (`usize::MAX` on a fully periodic grid).
    pub fn edge_distance(&self, p: usize) -> usize {
        (0..self.dim())
            .filter(|&d| self.spec.axes[d].topology == Topology::Truncated)
            .map(|d| {
                let i = self.index(p, d);
                i.min(self.spec.axes[d].n - 1 - i)
            })
            .min()
            .unwrap_or(usize::MAX)
    }

    /// Maximum of ω over the boundary layers of truncated axes (0 without any).
    pub fn boundary_omega_max(&self) -> f64 {
        (0..self.npts)
            .filter(|&p| self.on_boundary(p))
            .map(|p| self.omega[p])
            .fold(0.0, f64::max)
    }

    /// Total Ω-volume ∫Ω.
    pub fn volume(&self) -> f64 {
        pairwise_sum(&self.quad)
    }

    pub fn same_as(self: &Arc<Self>, other: &Arc<Grid>) -> bool {
        Arc::ptr_eq(self, other)
            || (self.spec == other.spec && self.log_omega == other.log_omega)
    }
}

/// Fixed-order pairwise summation; the result depends only on the input order.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if v.len() <= BLOCK {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}
