use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::grid::{pairwise_sum, Grid};
use crate::error::{Result, SrfError};

/// Variance of a tensor slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Slot {
    Up,
    Down,
}

/// Slot patterns of the tensor shapes used throughout the crate.
///
/// A `T_X`-valued q-form is stored as an endomorphism-valued (q-1)-form:
/// slots `[Down; q-1], Up, Down`. The Up slot is the value, the trailing
/// Down slot is the last form argument. Covariant derivatives prepend a
/// Down slot, which keeps this convention stable.
pub mod shape {
    use super::Slot::{self, Down, Up};
    pub const SCALAR: &[Slot] = &[];
    pub const VECTOR: &[Slot] = &[Up];
    pub const COVECTOR: &[Slot] = &[Down];
    pub const ENDO: &[Slot] = &[Up, Down];
    pub const METRIC: &[Slot] = &[Down, Down];
    pub const TX2: &[Slot] = &[Down, Up, Down];
    pub const COV3: &[Slot] = &[Down, Down, Down];
    pub const CURV: &[Slot] = &[Down, Down, Up, Down];
}

/// A tensor field sampled on a grid. Storage is point-major: the components
/// of point `p` are `data[p * ncomp .. (p + 1) * ncomp]`, row-major over slots.
#[derive(Clone, Debug)]
pub struct Field {
    grid: Arc<Grid>,
    slots: Vec<Slot>,
    ncomp: usize,
    data: Vec<f64>,
}

pub type ScalarField = Field;
pub type VectorField = Field;
pub type EndoField = Field;
pub type MetricField = Field;
pub type Tensor3Field = Field;
pub type CurvField = Field;

impl Field {
    pub fn zeros(grid: &Arc<Grid>, slots: &[Slot]) -> Field {
        let ncomp = grid.dim().pow(slots.len() as u32);
        Field { grid: grid.clone(), slots: slots.to_vec(), ncomp, data: vec![0.0; ncomp * grid.npts()] }
    }

    pub fn from_data(grid: &Arc<Grid>, slots: &[Slot], data: Vec<f64>) -> Result<Field> {
        let ncomp = grid.dim().pow(slots.len() as u32);
        if data.len() != ncomp * grid.npts() {
            return Err(SrfError::Shape(format!(
                "expected {} values, got {}",
                ncomp * grid.npts(),
                data.len()
            )));
        }
        Ok(Field { grid: grid.clone(), slots: slots.to_vec(), ncomp, data })
    }

    /// Samples `f(x, out)` at every grid point; `out` holds the point's components.
    pub fn from_fn(grid: &Arc<Grid>, slots: &[Slot], mut f: impl FnMut(&[f64], &mut [f64])) -> Field {
        let mut out = Field::zeros(grid, slots);
        let mut x = vec![0.0; grid.dim()];
        let nc = out.ncomp;
        for p in 0..grid.npts() {
            grid.coords(p, &mut x);
            f(&x, &mut out.data[p * nc..(p + 1) * nc]);
        }
        out
    }

    pub fn scalar_fn(grid: &Arc<Grid>, f: impl Fn(&[f64]) -> f64) -> Field {
        Field::from_fn(grid, shape::SCALAR, |x, o| o[0] = f(x))
    }

    pub fn constant(grid: &Arc<Grid>, slots: &[Slot], values: &[f64]) -> Field {
        let mut out = Field::zeros(grid, slots);
        assert_eq!(values.len(), out.ncomp, "constant: wrong number of components");
        for chunk in out.data.chunks_mut(values.len().max(1)) {
            chunk.copy_from_slice(values);
        }
        out
    }

    pub fn scalar_const(grid: &Arc<Grid>, c: f64) -> Field {
        Field::constant(grid, shape::SCALAR, &[c])
    }

    /// The identity endomorphism field.
    pub fn identity(grid: &Arc<Grid>) -> Field {
        let n = grid.dim();
        let mut id = vec![0.0; n * n];
        for i in 0..n {
            id[i * n + i] = 1.0;
        }
        Field::constant(grid, shape::ENDO, &id)
    }

    /// Covariant version of the identity, i.e. the Euclidean metric δ.
    pub fn euclidean(grid: &Arc<Grid>) -> Field {
        Field::identity(grid).with_slots(shape::METRIC)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn rank(&self) -> usize {
        self.slots.len()
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    pub fn npts(&self) -> usize {
        self.grid.npts()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn at(&self, p: usize) -> &[f64] {
        &self.data[p * self.ncomp..(p + 1) * self.ncomp]
    }

    pub fn at_mut(&mut self, p: usize) -> &mut [f64] {
        let nc = self.ncomp;
        &mut self.data[p * nc..(p + 1) * nc]
    }

    /// Same data, different slot labels (same rank required).
    pub fn with_slots(mut self, slots: &[Slot]) -> Field {
        assert_eq!(slots.len(), self.slots.len(), "with_slots: rank change");
        self.slots = slots.to_vec();
        self
    }

    pub fn is_shape(&self, slots: &[Slot]) -> bool {
        self.slots == slots
    }

    pub fn assert_compatible(&self, other: &Field, what: &str) {
        assert!(
            self.grid.same_as(&other.grid) && self.slots == other.slots,
            "{what}: incompatible fields ({:?} vs {:?})",
            self.slots,
            other.slots
        );
    }

    pub fn check_compatible(&self, other: &Field) -> Result<()> {
        if !self.grid.same_as(&other.grid) {
            return Err(SrfError::Shape("fields live on different grids".into()));
        }
        if self.slots != other.slots {
            return Err(SrfError::Shape(format!("slot mismatch {:?} vs {:?}", self.slots, other.slots)));
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid.clone(),
            slots: self.slots.clone(),
            ncomp: self.ncomp,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        self.assert_compatible(other, "zip_map");
        Field {
            grid: self.grid.clone(),
            slots: self.slots.clone(),
            ncomp: self.ncomp,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    /// Pointwise map over whole points: `f(p, input components, output components)`.
    pub fn map_points(&self, out_slots: &[Slot], mut f: impl FnMut(usize, &[f64], &mut [f64])) -> Field {
        let mut out = Field::zeros(&self.grid, out_slots);
        let (ni, no) = (self.ncomp, out.ncomp);
        for p in 0..self.npts() {
            f(p, &self.data[p * ni..(p + 1) * ni], &mut out.data[p * no..(p + 1) * no]);
        }
        out
    }

    pub fn scale(&self, c: f64) -> Field {
        self.map(|v| c * v)
    }

    /// `self + c * other`
    pub fn axpy(&self, c: f64, other: &Field) -> Field {
        self.zip_map(other, |a, b| a + c * b)
    }

    /// Multiplies every component by a scalar field.
    pub fn mul_scalar(&self, s: &Field) -> Field {
        assert!(s.rank() == 0 && s.grid.same_as(&self.grid), "mul_scalar: expected a scalar field");
        let nc = self.ncomp;
        let mut out = self.clone();
        for (p, chunk) in out.data.chunks_mut(nc.max(1)).enumerate() {
            let c = s.data[p];
            chunk.iter_mut().for_each(|v| *v *= c);
        }
        out
    }

    /// Extracts one component as a scalar field.
    pub fn component(&self, c: usize) -> Field {
        assert!(c < self.ncomp);
        let data = (0..self.npts()).map(|p| self.data[p * self.ncomp + c]).collect();
        Field { grid: self.grid.clone(), slots: vec![], ncomp: 1, data }
    }

    /// Reorders slots: slot `k` of the result is slot `perm[k]` of `self`.
    pub fn permute(&self, perm: &[usize]) -> Field {
        let r = self.rank();
        assert_eq!(perm.len(), r, "permute: wrong permutation length");
        let mut seen = vec![false; r];
        for &q in perm {
            assert!(q < r && !seen[q], "permute: not a permutation");
            seen[q] = true;
        }
        let n = self.dim();
        let slots: Vec<Slot> = perm.iter().map(|&q| self.slots[q]).collect();
        // Stride in the source layout for each output slot.
        let src_stride: Vec<usize> = (0..r).map(|q| n.pow((r - 1 - q) as u32)).collect();
        let table: Vec<usize> = (0..self.ncomp)
            .map(|c| {
                let mut off = 0;
                for (k, &q) in perm.iter().enumerate() {
                    let digit = (c / n.pow((r - 1 - k) as u32)) % n;
                    off += digit * src_stride[q];
                }
                off
            })
            .collect();
        let nc = self.ncomp;
        let mut out = Field::zeros(&self.grid, &slots);
        for p in 0..self.npts() {
            let src = &self.data[p * nc..(p + 1) * nc];
            let dst = &mut out.data[p * nc..(p + 1) * nc];
            for (d, &t) in dst.iter_mut().zip(&table) {
                *d = src[t];
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Field) -> f64 {
        self.assert_compatible(other, "max_abs_diff");
        self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Maximum over points not on a truncated boundary layer.
    pub fn max_abs_interior(&self) -> f64 {
        let nc = self.ncomp;
        (0..self.npts())
            .filter(|&p| !self.grid.on_boundary(p))
            .flat_map(|p| self.data[p * nc..(p + 1) * nc].iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest |difference| over points at least `margin` layers from a truncated edge.
    pub fn max_abs_diff_inner(&self, other: &Field, margin: usize) -> f64 {
        self.assert_compatible(other, "max_abs_diff_inner");
        let nc = self.ncomp;
        (0..self.npts())
            .filter(|&p| self.grid.edge_distance(p) >= margin)
            .flat_map(|p| self.data[p * nc..(p + 1) * nc].iter().zip(&other.data[p * nc..(p + 1) * nc]))
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Largest |value| over points at least `margin` layers from a truncated edge.
    pub fn max_abs_inner(&self, margin: usize) -> f64 {
        let nc = self.ncomp;
        (0..self.npts())
            .filter(|&p| self.grid.edge_distance(p) >= margin)
            .flat_map(|p| self.data[p * nc..(p + 1) * nc].iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Sum of all values with a fixed reduction order.
    pub fn sum(&self) -> f64 {
        pairwise_sum(&self.data)
    }
}

impl Add for &Field {
    type Output = Field;
    fn add(self, rhs: &Field) -> Field {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl Sub for &Field {
    type Output = Field;
    fn sub(self, rhs: &Field) -> Field {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl Neg for &Field {
    type Output = Field;
    fn neg(self) -> Field {
        self.map(|v| -v)
    }
}

impl Mul<f64> for &Field {
    type Output = Field;
    fn mul(self, c: f64) -> Field {
        self.scale(c)
    }
}

impl Mul<&Field> for f64 {
    type Output = Field;
    fn mul(self, f: &Field) -> Field {
        f.scale(self)
    }
}

/// Sums a non-empty list of compatible fields.
pub fn sum_fields(fields: &[&Field]) -> Field {
    let mut acc = fields[0].clone();
    for f in &fields[1..] {
        acc = &acc + f;
    }
    acc
}
