//! Standard domains and seeded band-limited random fields.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use crate::domain_grid::{shape, Axis, Field, Grid, GridSpec, MetricField};
use crate::error::Result;

/// Half-width of the truncated Gaussian box.
pub const GAUSSIAN_HALF_WIDTH: f64 = 8.0;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `[-8, 8]^dim` with `Ω = e^{-|x|²/2} dx`, truncated on every axis.
pub fn gaussian(dim: usize, n: usize) -> Result<Arc<Grid>> {
    let axes = vec![Axis::truncated(n, -GAUSSIAN_HALF_WIDTH, GAUSSIAN_HALF_WIDTH); dim];
    Grid::new(GridSpec::new(axes), |x| -0.5 * x.iter().map(|v| v * v).sum::<f64>())
}

pub fn gaussian_1d(n: usize) -> Result<Arc<Grid>> {
    gaussian(1, n)
}

/// Periodic `[0, 2π)^dim` with `Ω = ω dx` for the given `log ω`.
pub fn torus(dim: usize, n: usize, log_omega: impl Fn(&[f64]) -> f64) -> Result<Arc<Grid>> {
    Grid::new(GridSpec::new(vec![Axis::periodic(n, 0.0, 2.0 * PI); dim]), log_omega)
}

/// The circle with `g = dx²` and `Ω = e^{-cos x} dx`, for which `Ric(Ω) = -cos x`.
pub fn circle_weighted(n: usize) -> Result<Arc<Grid>> {
    torus(1, n, |x| -x[0].cos())
}

/// A smooth function `Σ_j a_j cos(k_j · x + φ_j)` with few low wavenumbers.
#[derive(Clone, Debug)]
pub struct Modes {
    terms: Vec<(Vec<f64>, f64, f64)>,
    offset: f64,
}

impl Modes {
    /// `count` modes with integer wavevectors of sup-norm ≤ `kmax`; the
    /// amplitudes sum to at most `amp`.
    pub fn random(rng: &mut impl Rng, dim: usize, count: usize, kmax: i32, amp: f64) -> Modes {
        let mut terms = Vec::with_capacity(count);
        for _ in 0..count {
            let k: Vec<f64> = loop {
                let k: Vec<i32> = (0..dim).map(|_| rng.gen_range(-kmax..=kmax)).collect();
                if k.iter().any(|&v| v != 0) {
                    break k.into_iter().map(f64::from).collect();
                }
            };
            let a = amp / count as f64 * rng.gen_range(0.3..1.0);
            let phi = rng.gen_range(0.0..2.0 * PI);
            terms.push((k, a, phi));
        }
        Modes { terms, offset: 0.0 }
    }

    pub fn with_offset(mut self, c: f64) -> Modes {
        self.offset = c;
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.offset
            + self
                .terms
                .iter()
                .map(|(k, a, phi)| a * (k.iter().zip(x).map(|(k, x)| k * x).sum::<f64>() + phi).cos())
                .sum::<f64>()
    }

    pub fn field(&self, grid: &Arc<Grid>) -> Field {
        Field::scalar_fn(grid, |x| self.eval(x))
    }
}

/// Independent mode sets for the upper triangle of a symmetric matrix.
#[derive(Clone, Debug)]
pub struct SymModes {
    dim: usize,
    entries: Vec<Modes>,
    diag_offset: f64,
}

impl SymModes {
    pub fn random(rng: &mut impl Rng, dim: usize, count: usize, kmax: i32, amp: f64) -> SymModes {
        let entries = (0..dim * (dim + 1) / 2).map(|_| Modes::random(rng, dim, count, kmax, amp)).collect();
        SymModes { dim, entries, diag_offset: 0.0 }
    }

    /// Adds `c` times the identity.
    pub fn with_diag(mut self, c: f64) -> SymModes {
        self.diag_offset = c;
        self
    }

    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        let n = self.dim;
        let mut e = 0;
        for i in 0..n {
            for j in i..n {
                let v = self.entries[e].eval(x) + if i == j { self.diag_offset } else { 0.0 };
                out[i * n + j] = v;
                out[j * n + i] = v;
                e += 1;
            }
        }
    }

    pub fn metric(&self, grid: &Arc<Grid>) -> MetricField {
        Field::from_fn(grid, shape::METRIC, |x, o| self.eval(x, o))
    }

    pub fn endo(&self, grid: &Arc<Grid>) -> Field {
        Field::from_fn(grid, shape::ENDO, |x, o| self.eval(x, o))
    }
}

/// `g = I + S` with `S` band-limited symmetric and `|S| ≤ amp < 1` entrywise sum,
/// positive definite for `amp·dim < 1`.
pub fn random_metric(rng: &mut impl Rng, grid: &Arc<Grid>, amp: f64) -> MetricField {
    SymModes::random(rng, grid.dim(), 3, 2, amp).with_diag(1.0).metric(grid)
}

/// Random symmetric 2-tensor field (a variation direction).
pub fn random_sym2(rng: &mut impl Rng, grid: &Arc<Grid>, amp: f64) -> MetricField {
    SymModes::random(rng, grid.dim(), 3, 2, amp).metric(grid)
}

/// Random endomorphism field with independent entries (not symmetric).
pub fn random_endo(rng: &mut impl Rng, grid: &Arc<Grid>, amp: f64) -> Field {
    let n = grid.dim();
    let modes: Vec<Modes> = (0..n * n).map(|_| Modes::random(rng, n, 3, 2, amp)).collect();
    Field::from_fn(grid, shape::ENDO, |x, o| {
        for (v, m) in o.iter_mut().zip(&modes) {
            *v = m.eval(x);
        }
    })
}
