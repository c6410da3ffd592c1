//! Pointwise dense linear algebra for n ≤ 3 and its lift to endomorphism fields.

use super::field::{shape, EndoField, Field, MetricField};
use crate::error::{Result, SrfError};

/// Row-major product of two n×n matrices.
pub fn mat_mul(n: usize, a: &[f64], b: &[f64], out: &mut [f64]) {
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = (0..n).map(|k| a[i * n + k] * b[k * n + j]).sum();
        }
    }
}

pub fn transpose(n: usize, a: &[f64], out: &mut [f64]) {
    for i in 0..n {
        for j in 0..n {
            out[j * n + i] = a[i * n + j];
        }
    }
}

pub fn det(n: usize, a: &[f64]) -> f64 {
    match n {
        1 => a[0],
        2 => a[0] * a[3] - a[1] * a[2],
        3 => {
            a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6])
                + a[2] * (a[3] * a[7] - a[4] * a[6])
        }
        _ => panic!("det: n = {n} unsupported"),
    }
}

/// Inverse by cofactors; `None` when the determinant vanishes.
pub fn inverse(n: usize, a: &[f64], out: &mut [f64]) -> Option<()> {
    let d = det(n, a);
    if d == 0.0 || !d.is_finite() {
        return None;
    }
    match n {
        1 => out[0] = 1.0 / a[0],
        2 => {
            out[0] = a[3] / d;
            out[1] = -a[1] / d;
            out[2] = -a[2] / d;
            out[3] = a[0] / d;
        }
        3 => {
            out[0] = (a[4] * a[8] - a[5] * a[7]) / d;
            out[1] = (a[2] * a[7] - a[1] * a[8]) / d;
            out[2] = (a[1] * a[5] - a[2] * a[4]) / d;
            out[3] = (a[5] * a[6] - a[3] * a[8]) / d;
            out[4] = (a[0] * a[8] - a[2] * a[6]) / d;
            out[5] = (a[2] * a[3] - a[0] * a[5]) / d;
            out[6] = (a[3] * a[7] - a[4] * a[6]) / d;
            out[7] = (a[1] * a[6] - a[0] * a[7]) / d;
            out[8] = (a[0] * a[4] - a[1] * a[3]) / d;
        }
        _ => panic!("inverse: n = {n} unsupported"),
    }
    Some(())
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
/// Returns eigenvalues (ascending) and eigenvectors as columns of a row-major matrix.
pub fn sym_eigen(n: usize, a: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut m = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let scale: f64 = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    for _sweep in 0..50 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j] * m[i * n + j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-17 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[i * n + i].total_cmp(&m[j * n + j]));
    let vals = order.iter().map(|&i| m[i * n + i]).collect();
    let mut vecs = vec![0.0; n * n];
    for (c, &i) in order.iter().enumerate() {
        for k in 0..n {
            vecs[k * n + c] = v[k * n + i];
        }
    }
    (vals, vecs)
}

/// `V f(Λ) Vᵀ` for a symmetric matrix.
pub fn sym_fn(n: usize, a: &[f64], f: impl Fn(f64) -> f64, out: &mut [f64]) {
    let (vals, vecs) = sym_eigen(n, a);
    let fv: Vec<f64> = vals.iter().map(|&l| f(l)).collect();
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = (0..n).map(|k| vecs[i * n + k] * fv[k] * vecs[j * n + k]).sum();
        }
    }
}

pub fn asymmetry(n: usize, a: &[f64]) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            m = m.max((a[i * n + j] - a[j * n + i]).abs());
        }
    }
    m
}

/// Lower Cholesky factor of a symmetric positive-definite matrix.
pub fn cholesky(n: usize, a: &[f64], l: &mut [f64]) -> Option<()> {
    l.iter_mut().for_each(|v| *v = 0.0);
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if !(d > 0.0) {
            return None;
        }
        let djj = d.sqrt();
        l[j * n + j] = djj;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / djj;
        }
    }
    Some(())
}

const SYM_TOL: f64 = 1e-9;

fn check_endo(a: &Field) -> Result<()> {
    if !a.is_shape(shape::ENDO) && !a.is_shape(shape::METRIC) {
        return Err(SrfError::Shape(format!("expected a rank-2 field, got {:?}", a.slots())));
    }
    Ok(())
}

fn check_symmetric(a: &Field) -> Result<()> {
    let n = a.dim();
    for p in 0..a.npts() {
        let m = a.at(p);
        let scale = 1.0 + m.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        let defect = asymmetry(n, m);
        if defect > SYM_TOL * scale {
            return Err(SrfError::Asymmetric { point: p, defect });
        }
    }
    Ok(())
}

/// Pointwise exponential of a field of symmetric matrices.
pub fn endo_exp(a: &EndoField) -> Result<EndoField> {
    check_endo(a)?;
    check_symmetric(a)?;
    let n = a.dim();
    Ok(a.map_points(a.slots(), |_, m, o| sym_fn(n, m, f64::exp, o)))
}

/// Pointwise logarithm of a field of symmetric positive-definite matrices.
pub fn endo_log(b: &EndoField) -> Result<EndoField> {
    check_endo(b)?;
    check_symmetric(b)?;
    let n = b.dim();
    for p in 0..b.npts() {
        let (vals, _) = sym_eigen(n, b.at(p));
        if !(vals[0] > 0.0) {
            return Err(SrfError::NotPositive { point: p, min_eig: vals[0] });
        }
    }
    Ok(b.map_points(b.slots(), |_, m, o| sym_fn(n, m, f64::ln, o)))
}

/// Applies a scalar function to a g-self-adjoint endomorphism field:
/// with g = L Lᵀ, f(A) = L⁻ᵀ f(Lᵀ A L⁻ᵀ) Lᵀ.
pub fn endo_fn_g(g: &MetricField, a: &EndoField, f: impl Fn(f64) -> f64) -> Result<EndoField> {
    let n = a.dim();
    let mut out = Field::zeros(a.grid(), shape::ENDO);
    let mut l = vec![0.0; n * n];
    let mut lt = vec![0.0; n * n];
    let mut lti = vec![0.0; n * n];
    let mut t1 = vec![0.0; n * n];
    let mut s = vec![0.0; n * n];
    let mut fs = vec![0.0; n * n];
    for p in 0..a.npts() {
        cholesky(n, g.at(p), &mut l).ok_or(SrfError::NotPositive { point: p, min_eig: f64::NAN })?;
        transpose(n, &l, &mut lt);
        inverse(n, &lt, &mut lti).ok_or(SrfError::Singular { point: p })?;
        mat_mul(n, &lt, a.at(p), &mut t1);
        mat_mul(n, &t1, &lti, &mut s);
        let scale = 1.0 + s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let defect = asymmetry(n, &s);
        if defect > 1e-8 * scale {
            return Err(SrfError::Asymmetric { point: p, defect });
        }
        for i in 0..n {
            for j in 0..i {
                let m = 0.5 * (s[i * n + j] + s[j * n + i]);
                s[i * n + j] = m;
                s[j * n + i] = m;
            }
        }
        sym_fn(n, &s, &f, &mut fs);
        mat_mul(n, &lti, &fs, &mut t1);
        mat_mul(n, &t1, &lt, out.at_mut(p));
    }
    Ok(out)
}

/// Eigenvalues (ascending) of a g-self-adjoint endomorphism at every point.
pub fn eigenvalues_g(g: &MetricField, a: &EndoField) -> Result<Vec<Vec<f64>>> {
    let n = a.dim();
    let mut l = vec![0.0; n * n];
    let mut lt = vec![0.0; n * n];
    let mut lti = vec![0.0; n * n];
    let mut t1 = vec![0.0; n * n];
    let mut s = vec![0.0; n * n];
    let mut all = Vec::with_capacity(a.npts());
    for p in 0..a.npts() {
        cholesky(n, g.at(p), &mut l).ok_or(SrfError::NotPositive { point: p, min_eig: f64::NAN })?;
        transpose(n, &l, &mut lt);
        inverse(n, &lt, &mut lti).ok_or(SrfError::Singular { point: p })?;
        mat_mul(n, &lt, a.at(p), &mut t1);
        mat_mul(n, &t1, &lti, &mut s);
        for i in 0..n {
            for j in 0..i {
                let m = 0.5 * (s[i * n + j] + s[j * n + i]);
                s[i * n + j] = m;
                s[j * n + i] = m;
            }
        }
        all.push(sym_eigen(n, &s).0);
    }
    Ok(all)
}

/// Smallest eigenvalue over the grid of a g-self-adjoint endomorphism field,
/// together with the point attaining it.
pub fn min_eigenvalue_g(g: &MetricField, a: &EndoField) -> Result<(f64, usize)> {
    let ev = eigenvalues_g(g, a)?;
    Ok(ev.iter().enumerate().fold((f64::INFINITY, 0), |(m, at), (p, v)| if v[0] < m { (v[0], p) } else { (m, at) }))
}

/// Pointwise inverse of a rank-2 field (slots reversed in variance).
pub fn field_inverse(a: &Field) -> Result<Field> {
    let n = a.dim();
    let slots: Vec<_> = a
        .slots()
        .iter()
        .map(|s| match s {
            super::field::Slot::Up => super::field::Slot::Down,
            super::field::Slot::Down => super::field::Slot::Up,
        })
        .collect();
    let mut out = Field::zeros(a.grid(), &slots);
    for p in 0..a.npts() {
        inverse(n, a.at(p), out.at_mut(p)).ok_or(SrfError::Singular { point: p })?;
    }
    Ok(out)
}

pub fn field_det(a: &Field) -> Field {
    let n = a.dim();
    a.map_points(shape::SCALAR, |_, m, o| o[0] = det(n, m))
}

/// Pointwise matrix product of two rank-2 fields (value slots follow the operands).
pub fn field_matmul(a: &Field, b: &Field) -> Field {
    let n = a.dim();
    assert!(a.rank() == 2 && b.rank() == 2, "field_matmul: rank-2 operands required");
    let slots = [a.slots()[0], b.slots()[1]];
    let mut out = Field::zeros(a.grid(), &slots);
    for p in 0..a.npts() {
        mat_mul(n, a.at(p), b.at(p), out.at_mut(p));
    }
    out
}

pub fn field_transpose(a: &Field) -> Field {
    assert_eq!(a.rank(), 2);
    a.permute(&[1, 0])
}

/// Pointwise trace of a rank-2 field.
pub fn field_trace(a: &Field) -> Field {
    let n = a.dim();
    a.map_points(shape::SCALAR, |_, m, o| o[0] = (0..n).map(|i| m[i * n + i]).sum())
}

/// Smallest eigenvalue of a symmetric matrix field (coordinate metric).
pub fn min_eigenvalue_sym(a: &Field) -> (f64, usize) {
    let n = a.dim();
    (0..a.npts()).fold((f64::INFINITY, 0), |(m, at), p| {
        let v = sym_eigen(n, a.at(p)).0[0];
        if v < m {
            (v, p)
        } else {
            (m, at)
        }
    })
}
