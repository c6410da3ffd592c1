use super::field::{Field, Slot};
use super::grid::{FdAccuracy, Topology};
use crate::error::{Result, SrfError};

// Interior and one-sided stencils as (offset, weight) lists, weights in units
// of 1/h (first derivative) or 1/h^2 (second derivative).
const D1_C2: &[(isize, f64)] = &[(-1, -0.5), (1, 0.5)];
const D1_L2: &[(isize, f64)] = &[(0, -1.5), (1, 2.0), (2, -0.5)];
const D2_C2: &[(isize, f64)] = &[(-1, 1.0), (0, -2.0), (1, 1.0)];
const D2_L2: &[(isize, f64)] = &[(0, 2.0), (1, -5.0), (2, 4.0), (3, -1.0)];

const D1_C4: &[(isize, f64)] = &[(-2, 1.0 / 12.0), (-1, -8.0 / 12.0), (1, 8.0 / 12.0), (2, -1.0 / 12.0)];
const D1_L4_0: &[(isize, f64)] =
    &[(0, -25.0 / 12.0), (1, 4.0), (2, -3.0), (3, 4.0 / 3.0), (4, -0.25)];
const D1_L4_1: &[(isize, f64)] =
    &[(-1, -0.25), (0, -5.0 / 6.0), (1, 1.5), (2, -0.5), (3, 1.0 / 12.0)];
const D2_C4: &[(isize, f64)] =
    &[(-2, -1.0 / 12.0), (-1, 16.0 / 12.0), (0, -30.0 / 12.0), (1, 16.0 / 12.0), (2, -1.0 / 12.0)];
const D2_L4_0: &[(isize, f64)] = &[
    (0, 45.0 / 12.0),
    (1, -154.0 / 12.0),
    (2, 214.0 / 12.0),
    (3, -156.0 / 12.0),
    (4, 61.0 / 12.0),
    (5, -10.0 / 12.0),
];
const D2_L4_1: &[(isize, f64)] = &[
    (-1, 10.0 / 12.0),
    (0, -15.0 / 12.0),
    (1, -4.0 / 12.0),
    (2, 14.0 / 12.0),
    (3, -6.0 / 12.0),
    (4, 1.0 / 12.0),
];

/// Stencil for node `i` of `n` on a truncated axis; right-end stencils are
/// mirrored left-end ones (sign flipped for odd derivative order).
fn truncated_stencil(acc: FdAccuracy, order: usize, i: usize, n: usize) -> (Vec<(isize, f64)>, bool) {
    let (center, left): (&[(isize, f64)], &[&[(isize, f64)]]) = match (acc, order) {
        (FdAccuracy::Second, 1) => (D1_C2, &[D1_L2]),
        (FdAccuracy::Second, _) => (D2_C2, &[D2_L2]),
        (FdAccuracy::Fourth, 1) => (D1_C4, &[D1_L4_0, D1_L4_1]),
        (FdAccuracy::Fourth, _) => (D2_C4, &[D2_L4_0, D2_L4_1]),
    };
    let nb = left.len();
    if i < nb {
        (left[i].to_vec(), false)
    } else if i >= n - nb {
        let j = n - 1 - i;
        let sign = if order == 1 { -1.0 } else { 1.0 };
        (left[j].iter().map(|&(o, w)| (-o, sign * w)).collect(), true)
    } else {
        (center.to_vec(), false)
    }
}

/// Finite-difference partial derivative of every component along `axis`.
/// `order` is the derivative order (1 or 2).
pub fn fd_partial(field: &Field, axis: usize, order: usize) -> Result<Field> {
    let grid = field.grid().clone();
    if axis >= grid.dim() {
        return Err(SrfError::AxisOutOfRange { axis, dim: grid.dim() });
    }
    if !(1..=2).contains(&order) {
        return Err(SrfError::Param(format!("derivative order {order} not in {{1, 2}}")));
    }
    let ax = &grid.axes()[axis];
    let n = ax.n;
    let h = grid.h()[axis];
    let scale = if order == 1 { 1.0 / h } else { 1.0 / (h * h) };
    let stride = grid.stride(axis);
    let acc = grid.accuracy();
    let nc = field.ncomp();

    let stencils: Vec<Vec<(isize, f64)>> = (0..n)
        .map(|i| match ax.topology {
            Topology::Periodic => truncated_stencil(acc, order, n / 2, n).0,
            Topology::Truncated => truncated_stencil(acc, order, i, n).0,
        })
        .collect();

    let mut out = Field::zeros(&grid, field.slots());
    let src = field.data();
    let dst = out.data_mut();
    for p in 0..grid.npts() {
        let i = grid.index(p, axis);
        let base = p - i * stride;
        let po = &mut dst[p * nc..(p + 1) * nc];
        for &(off, w) in &stencils[i] {
            let j = match ax.topology {
                Topology::Periodic => (i as isize + off).rem_euclid(n as isize) as usize,
                Topology::Truncated => (i as isize + off) as usize,
            };
            let q = base + j * stride;
            let ws = w * scale;
            for (o, s) in po.iter_mut().zip(&src[q * nc..(q + 1) * nc]) {
                *o += ws * s;
            }
        }
    }
    Ok(out)
}

/// Coordinate gradient ∂T: a new Down slot in front, `[a][I] = ∂_a T[I]`.
pub fn grad(field: &Field) -> Field {
    let dim = field.dim();
    let parts: Vec<Field> = (0..dim).map(|a| fd_partial(field, a, 1).expect("valid axis")).collect();
    let mut slots = vec![Slot::Down];
    slots.extend_from_slice(field.slots());
    let nc = field.ncomp();
    let mut out = Field::zeros(field.grid(), &slots);
    let onc = out.ncomp();
    let dst = out.data_mut();
    for p in 0..field.npts() {
        for (a, part) in parts.iter().enumerate() {
            dst[p * onc + a * nc..p * onc + (a + 1) * nc].copy_from_slice(part.at(p));
        }
    }
    out
}
