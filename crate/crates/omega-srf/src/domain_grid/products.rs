//! Pointwise product algebra on tensor fields.
//!
//! `T_X`-valued q-forms use the layout of [`shape`](super::field::shape):
//! `[v_1 .. v_{q-1}][value][v_q]`. The metric enters through `g` / `ginv`
//! wherever a sum runs over an orthonormal frame.

use super::einsum::{einsum, idx};
use super::field::{shape, Field, Slot};

fn spec(inputs: &[Vec<char>], out: &[char]) -> String {
    let lhs: Vec<String> = inputs.iter().map(|v| v.iter().collect()).collect();
    format!("{}->{}", lhs.join(","), out.iter().collect::<String>())
}

/// Slots of a `T_X`-valued form with `nargs` arguments (`nargs = 0` is a vector).
pub fn tx_form_slots(nargs: usize) -> Vec<Slot> {
    if nargs == 0 {
        return vec![Slot::Up];
    }
    let mut s = vec![Slot::Down; nargs - 1];
    s.push(Slot::Up);
    s.push(Slot::Down);
    s
}

/// Number of form arguments of a `T_X`-valued form field.
///
/// # Panics
/// If the field does not have the `[Down..., Up, Down]` (or `[Up]`) layout.
pub fn tx_degree(f: &Field) -> usize {
    let s = f.slots();
    if s == [Slot::Up] {
        return 0;
    }
    let r = s.len();
    assert!(
        r >= 2 && s[r - 2] == Slot::Up && s[r - 1] == Slot::Down && s[..r - 2].iter().all(|&x| x == Slot::Down),
        "expected a T_X-valued form, got slots {s:?}"
    );
    r - 1
}

/// Splits a list of `nargs` argument letters plus a value letter into layout order.
fn tx_layout(args: &[char], value: char) -> Vec<char> {
    if args.is_empty() {
        return vec![value];
    }
    let mut v = args[..args.len() - 1].to_vec();
    v.push(value);
    v.push(args[args.len() - 1]);
    v
}

/// Pointwise commutator `AB - BA` of endomorphism fields.
pub fn commutator(a: &Field, b: &Field) -> Field {
    assert!(a.is_shape(shape::ENDO) && b.is_shape(shape::ENDO), "commutator: endomorphism fields required");
    let ab = einsum("ij,jk->ik", &[a, b], shape::ENDO);
    let ba = einsum("ij,jk->ik", &[b, a], shape::ENDO);
    &ab - &ba
}

/// `[T(..), H]` where the last two slots of `T` are an endomorphism.
pub fn endo_bracket(t: &Field, h: &Field) -> Field {
    let r = t.rank();
    assert!(r >= 2 && t.slots()[r - 2] == Slot::Up && t.slots()[r - 1] == Slot::Down);
    let pre: Vec<char> = (0..r - 2).map(idx).collect();
    let (i, j, k) = (idx(r), idx(r + 1), idx(r + 2));
    let mut tl = pre.clone();
    tl.extend([i, j]);
    let mut tr = pre.clone();
    tr.extend([j, k]);
    let mut out = pre.clone();
    out.extend([i, k]);
    let th = einsum(&spec(&[tl.clone(), vec![j, k]], &out), &[t, h], t.slots());
    let ht = einsum(&spec(&[vec![i, j], tr], &out), &[h, t], t.slots());
    &th - &ht
}

/// `H · T`: the endomorphism acts on the value (Up) slot of a `T_X`-valued form.
pub fn endo_on_value(h: &Field, t: &Field) -> Field {
    let q = tx_degree(t);
    let args: Vec<char> = (0..q).map(idx).collect();
    let (v, w) = (idx(q), idx(q + 1));
    let tin = tx_layout(&args, w);
    let out = tx_layout(&args, v);
    einsum(&spec(&[vec![v, w], tin], &out), &[h, t], t.slots())
}

/// `(T H)(.., v) = T(.., H v)`: precomposition in the last argument.
pub fn endo_on_last(t: &Field, h: &Field) -> Field {
    let r = t.rank();
    let pre: Vec<char> = (0..r - 1).map(idx).collect();
    let (a, b) = (idx(r), idx(r + 1));
    let mut tin = pre.clone();
    tin.push(a);
    let mut out = pre;
    out.push(b);
    einsum(&spec(&[tin, vec![a, b]], &out), &[t, h], t.slots())
}

/// `Alt T (u, v, ..) = T(u, v, ..) - T(v, u, ..)` over the first two covariant slots.
pub fn alt(t: &Field) -> Field {
    let downs: Vec<usize> = t.slots().iter().enumerate().filter(|(_, s)| **s == Slot::Down).map(|(i, _)| i).collect();
    assert!(downs.len() >= 2, "alt: need two covariant slots");
    let mut perm: Vec<usize> = (0..t.rank()).collect();
    perm.swap(downs[0], downs[1]);
    t - &t.permute(&perm)
}

/// `(B ∗ A)(u, v) = Σ_k B(u, e_k) A(e_k, v)` for `B ∈ Λ²⊗End`, `A` a `T_X`-valued 2-form.
pub fn star_form(b: &Field, a: &Field, ginv: &Field) -> Field {
    assert!(b.is_shape(shape::CURV) && a.is_shape(shape::TX2));
    einsum("uaij,bjv,ab->uiv", &[b, a, ginv], shape::TX2)
}

/// `(A ∗ R)(u, v) = Σ_k A(e_k, R(u, v) e_k)` for `A` a `T_X`-valued 2-form.
pub fn star_tx_curv(a: &Field, r: &Field, ginv: &Field) -> Field {
    assert!(a.is_shape(shape::TX2) && r.is_shape(shape::CURV));
    einsum("aij,uvjb,ab->uiv", &[a, r, ginv], shape::TX2)
}

/// `(B ⊛ A)(u, v) = Σ_k [B(u, e_k), e_k ¬ A] v`.
pub fn circledstar(b: &Field, a: &Field, ginv: &Field) -> Field {
    assert!(b.is_shape(shape::CURV) && a.is_shape(shape::TX2));
    let first = star_form(b, a, ginv);
    let second = einsum("bij,uajv,ab->uiv", &[a, b, ginv], shape::TX2);
    &first - &second
}

/// `(R ∗ H) ξ = Σ_k R(ξ, e_k) H e_k`, the curvature–endomorphism product of the
/// Weitzenböck formulas.
pub fn star_endo(r: &Field, h: &Field, ginv: &Field) -> Field {
    assert!(r.is_shape(shape::CURV) && h.is_shape(shape::ENDO));
    einsum("xaij,jb,ab->ix", &[r, h, ginv], shape::ENDO)
}

/// `(A •_k B)(u, v) = B(v_1, .., v_{k-1}, A(u, v_k), v_{k+1}, .., v_q)`, `k` 1-based.
pub fn bullet_k(a: &Field, b: &Field, k: usize) -> Field {
    let p = tx_degree(a);
    let q = tx_degree(b);
    assert!(p >= 1 && (1..=q).contains(&k), "bullet_k: k = {k} out of range for q = {q}");
    let u: Vec<char> = (0..p - 1).map(idx).collect();
    let v: Vec<char> = (0..q).map(|j| idx(p - 1 + j)).collect();
    let (val, s) = (idx(p + q), idx(p + q + 1));
    let mut a_args = u.clone();
    a_args.push(v[k - 1]);
    let a_spec = tx_layout(&a_args, s);
    let mut b_args = v.clone();
    b_args[k - 1] = s;
    let b_spec = tx_layout(&b_args, val);
    let mut out_args = u;
    out_args.extend(&v);
    let out = tx_layout(&out_args, val);
    einsum(&spec(&[a_spec, b_spec], &out), &[a, b], &tx_form_slots(p - 1 + q))
}

/// `(A ∗_k B)(u_1..u_p, v_1..v_{q-1}) = B(v_1, .., v_{k-1}, A(u), v_k, .., v_{q-1})`.
pub fn star_k(a: &Field, b: &Field, k: usize) -> Field {
    let p = tx_degree(a);
    let q = tx_degree(b);
    assert!((1..=q).contains(&k), "star_k: k = {k} out of range for q = {q}");
    let u: Vec<char> = (0..p).map(idx).collect();
    let v: Vec<char> = (0..q - 1).map(|j| idx(p + j)).collect();
    let (val, s) = (idx(p + q), idx(p + q + 1));
    let a_spec = tx_layout(&u, s);
    let mut b_args = v[..k - 1].to_vec();
    b_args.push(s);
    b_args.extend(&v[k - 1..]);
    let b_spec = tx_layout(&b_args, val);
    let mut out_args = u;
    out_args.extend(&v);
    let out = tx_layout(&out_args, val);
    einsum(&spec(&[a_spec, b_spec], &out), &[a, b], &tx_form_slots(p + q - 1))
}

/// `A ̂¬ B = Σ_{k=1}^{q-1} A •_k B`.
pub fn hat_neg(a: &Field, b: &Field) -> Field {
    let p = tx_degree(a);
    let q = tx_degree(b);
    let mut acc = Field::zeros(a.grid(), &tx_form_slots(p - 1 + q));
    for k in 1..q {
        acc = &acc + &bullet_k(a, b, k);
    }
    acc
}

/// `H ¬ φ = Σ_{k=1}^{q} φ(.., H v_k, ..)`: the derivation action of an
/// endomorphism on every argument of a `T_X`-valued form.
pub fn endo_hook(h: &Field, phi: &Field) -> Field {
    let q = tx_degree(phi);
    let mut acc = Field::zeros(phi.grid(), phi.slots());
    for k in 1..=q {
        acc = &acc + &bullet_k(h, phi, k);
    }
    acc
}

/// `(A ⊙_{k,l} B)(u, v) = Tr_g B(v_1..v_{l-1}, ·, v_l..v_{k-1}, A(u, ·, v_k), v_{k+1}..v_{q-1})`,
/// with `1 ≤ l ≤ k ≤ q - 2`.
pub fn odot_kl(a: &Field, b: &Field, k: usize, l: usize, ginv: &Field) -> Field {
    let p = tx_degree(a);
    let q = tx_degree(b);
    assert!(p >= 2 && 1 <= l && l <= k && k + 2 <= q, "odot_kl: indices out of range");
    let u: Vec<char> = (0..p - 2).map(idx).collect();
    let v: Vec<char> = (0..q - 1).map(|j| idx(p - 2 + j)).collect();
    let base = p + q;
    let (val, s, t1, t2) = (idx(base), idx(base + 1), idx(base + 2), idx(base + 3));
    let mut a_args = u.clone();
    a_args.push(t2);
    a_args.push(v[k - 1]);
    let a_spec = tx_layout(&a_args, s);
    let mut b_args: Vec<char> = v[..l - 1].to_vec();
    b_args.push(t1);
    b_args.extend(&v[l - 1..k - 1]);
    b_args.push(s);
    b_args.extend(&v[k..]);
    let b_spec = tx_layout(&b_args, val);
    let mut out_args = u;
    out_args.extend(&v);
    let out = tx_layout(&out_args, val);
    einsum(&spec(&[a_spec, b_spec, vec![t1, t2]], &out), &[a, b, ginv], &tx_form_slots(p + q - 3))
}

/// `A ̂¬_g B = Σ_{k=1}^{q-2} A ⊙_{k,1} B`.
pub fn hat_neg_g(a: &Field, b: &Field, ginv: &Field) -> Field {
    let p = tx_degree(a);
    let q = tx_degree(b);
    let mut acc = Field::zeros(a.grid(), &tx_form_slots(p + q - 3));
    for k in 1..q.saturating_sub(1) {
        acc = &acc + &odot_kl(a, b, k, 1, ginv);
    }
    acc
}

/// g-transpose of an endomorphism field, `g⁻¹ Mᵀ g`.
pub fn g_transpose_endo(m: &Field, g: &Field, ginv: &Field) -> Field {
    einsum("ia,ba,bj->ij", &[ginv, m, g], shape::ENDO)
}

/// g-transpose of a `T_X`-valued 2-form: `A^T(v, w) = (v ¬ A)^T_g w`.
pub fn g_transpose_tx2(a: &Field, g: &Field, ginv: &Field) -> Field {
    assert!(a.is_shape(shape::TX2));
    einsum("vba,ia,bj->vij", &[a, ginv, g], shape::TX2)
}

/// `g M`: lowers the value slot of an endomorphism field.
pub fn lower_endo(g: &Field, m: &Field) -> Field {
    einsum("ia,aj->ij", &[g, m], shape::METRIC)
}

/// `g⁻¹ S`: the endomorphism lift of a symmetric 2-tensor.
pub fn raise_form(ginv: &Field, s: &Field) -> Field {
    einsum("ia,aj->ij", &[ginv, s], shape::ENDO)
}

/// Contracts slots `i < j` of `t` (both covariant) with the inverse metric.
pub fn trace_g(t: &Field, i: usize, j: usize, ginv: &Field) -> Field {
    let r = t.rank();
    assert!(i < j && j < r && t.slots()[i] == Slot::Down && t.slots()[j] == Slot::Down);
    let mut letters: Vec<char> = (0..r).map(idx).collect();
    let (a, b) = (letters[i], letters[j]);
    let out: Vec<char> = letters.iter().enumerate().filter(|(k, _)| *k != i && *k != j).map(|(_, c)| *c).collect();
    let slots: Vec<Slot> = t.slots().iter().enumerate().filter(|(k, _)| *k != i && *k != j).map(|(_, s)| *s).collect();
    letters.truncate(r);
    einsum(&spec(&[letters, vec![a, b]], &out), &[t, ginv], &slots)
}

/// Contracts an Up slot `i` with a Down slot `j` of the same field.
pub fn trace_mixed(t: &Field, i: usize, j: usize) -> Field {
    let r = t.rank();
    let mut letters: Vec<char> = (0..r).map(idx).collect();
    letters[j] = letters[i];
    let out: Vec<char> = (0..r).filter(|k| *k != i && *k != j).map(idx).collect();
    let slots: Vec<Slot> = (0..r).filter(|k| *k != i && *k != j).map(|k| t.slots()[k]).collect();
    einsum(&spec(&[letters], &out), &[t], &slots)
}

/// Pointwise inner product `⟨S, T⟩_g`, every slot contracted with g or g⁻¹.
pub fn inner_g(s: &Field, t: &Field, g: &Field, ginv: &Field) -> Field {
    assert_eq!(s.slots(), t.slots(), "inner_g: slot mismatch");
    let r = s.rank();
    let sl: Vec<char> = (0..r).map(idx).collect();
    let tl: Vec<char> = (0..r).map(|k| idx(r + k)).collect();
    let mut specs = vec![sl.clone(), tl.clone()];
    let mut ops: Vec<&Field> = vec![s, t];
    for k in 0..r {
        specs.push(vec![sl[k], tl[k]]);
        ops.push(match s.slots()[k] {
            Slot::Down => ginv,
            Slot::Up => g,
        });
    }
    einsum(&spec(&specs, &[]), &ops, shape::SCALAR)
}

/// Pointwise squared norm `|T|²_g`.
pub fn norm2_g(t: &Field, g: &Field, ginv: &Field) -> Field {
    inner_g(t, t, g, ginv)
}
