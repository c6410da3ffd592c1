use std::sync::Arc;

use proptest::prelude::*;

use omega_srf::domain_grid::products::inner_g;
use omega_srf::domain_grid::{integrate_omega, shape, Field, Grid, MetricField, Slot};
use omega_srf::riemann_ops::{validate_metric, Geometry, BOUNDARY_MARGIN};
use omega_srf::testbeds::{self, gaussian, gaussian_1d, torus, Modes};
use omega_srf::SrfError;

fn warped(grid: &Arc<Grid>, amp: f64) -> MetricField {
    Field::from_fn(grid, shape::METRIC, |x, o| {
        let phi = 1.0 + amp * x[0].cos();
        o.copy_from_slice(&[1.0, 0.0, 0.0, phi * phi]);
    })
}

#[test]
fn christoffel_symbols_of_a_warped_product() {
    // g = dx² + φ(x)² dy²: Γ^y_{xy} = φ'/φ and Γ^x_{yy} = -φφ'; the rest vanish.
    let grid = torus(2, 96, |_| 0.0).unwrap();
    let geo = Geometry::new(&warped(&grid, 0.3)).unwrap();
    let want = Field::from_fn(&grid, shape::TX2, |x, o| {
        let phi = 1.0 + 0.3 * x[0].cos();
        let dphi = -0.3 * x[0].sin();
        // o[i * 4 + k * 2 + j] = Γ^k_{ij}
        o[1 * 2 + 1] = dphi / phi;
        o[4 + 1 * 2] = dphi / phi;
        o[4 + 1] = -phi * dphi;
    });
    let err = geo.christoffel().max_abs_diff(&want);
    assert!(err < 2e-3, "christoffel error {err}");
}

#[test]
fn gauss_curvature_of_a_warped_product_converges() {
    // Ric = K g with K = -φ''/φ.
    let mut errs = Vec::new();
    let mut hs = Vec::new();
    for n in [32, 64, 128] {
        let grid = torus(2, n, |_| 0.0).unwrap();
        let g = warped(&grid, 0.3);
        let geo = Geometry::new(&g).unwrap();
        let want = Field::from_fn(&grid, shape::METRIC, |x, o| {
            let phi = 1.0 + 0.3 * x[0].cos();
            let k = 0.3 * x[0].cos() / phi;
            o.copy_from_slice(&[k, 0.0, 0.0, k * phi * phi]);
        });
        errs.push(geo.ricci().max_abs_diff(&want));
        hs.push(grid.h_max());
    }
    let slope = omega_srf::identity_verifier::refinement_slope(&hs, &errs).unwrap();
    assert!(slope > 1.9, "errors {errs:?}, slope {slope}");
}

#[test]
fn conformally_flat_curvature() {
    // g = e^{2u} δ in two dimensions: K = -e^{-2u} (u_xx + u_yy).
    let grid = torus(2, 128, |_| 0.0).unwrap();
    let u = |x: &[f64]| 0.2 * x[0].sin() * x[1].cos();
    let g = Field::from_fn(&grid, shape::METRIC, |x, o| {
        let e = (2.0 * u(x)).exp();
        o.copy_from_slice(&[e, 0.0, 0.0, e]);
    });
    let geo = Geometry::new(&g).unwrap();
    let ric_star = geo.ric_star();
    let k = Field::from_fn(&grid, shape::ENDO, |x, o| {
        let lap = -2.0 * u(x);
        let kk = -(-2.0 * u(x)).exp() * lap;
        o.copy_from_slice(&[kk, 0.0, 0.0, kk]);
    });
    let err = ric_star.max_abs_diff(&k);
    assert!(err < 2e-3, "Ric* error {err}");
}

#[test]
fn gaussian_measure_is_a_shrinking_soliton() {
    for (grid, tol) in [(gaussian_1d(257).unwrap(), 1e-10), (gaussian(2, 65).unwrap(), 1e-10)] {
        let g = Field::euclidean(&grid);
        let geo = Geometry::new(&g).unwrap();
        // f = |x|²/2 is quadratic, so second differences are exact away from the edges.
        let err = geo.bakry_emery_ricci().max_abs_diff_inner(&g, BOUNDARY_MARGIN);
        assert!(err < tol, "Ric(Ω) - g = {err}");
    }
}

#[test]
fn weighted_laplacian_of_a_scalar() {
    // Δ^Ω u = -u'' - (log ω)' u' for g = dx² and Ω = ω dx.
    let grid = torus(1, 256, |x| 0.5 * x[0].sin()).unwrap();
    let geo = Geometry::new(&Field::euclidean(&grid)).unwrap();
    let u = Field::scalar_fn(&grid, |x| (2.0 * x[0]).cos());
    let want = Field::scalar_fn(&grid, |x| 4.0 * (2.0 * x[0]).cos() + 0.5 * x[0].cos() * 2.0 * (2.0 * x[0]).sin());
    let err = geo.laplacian_omega(&u).max_abs_diff(&want);
    let h = grid.h_max();
    assert!(err < 10.0 * h * h, "Δ^Ω error {err}");
}

#[test]
fn hessian_in_flat_coordinates() {
    let grid = torus(2, 128, |_| 0.0).unwrap();
    let geo = Geometry::new(&Field::euclidean(&grid)).unwrap();
    let u = Field::scalar_fn(&grid, |x| x[0].sin() * (2.0 * x[1]).cos());
    let want = Field::from_fn(&grid, shape::METRIC, |x, o| {
        let (s, c) = (x[0].sin(), x[0].cos());
        let (s2, c2) = ((2.0 * x[1]).sin(), (2.0 * x[1]).cos());
        o.copy_from_slice(&[-s * c2, -2.0 * c * s2, -2.0 * c * s2, -4.0 * s * c2]);
    });
    let err = geo.hessian(&u).max_abs_diff(&want);
    let h = grid.h_max();
    assert!(err < 10.0 * h * h, "Hessian error {err}");
}

#[test]
fn metric_validation_reports_the_defect() {
    let grid = torus(2, 8, |_| 0.0).unwrap();
    let asym = Field::constant(&grid, shape::METRIC, &[1.0, 0.1, 0.0, 1.0]);
    assert!(matches!(validate_metric(&asym), Err(SrfError::Asymmetric { .. })));
    let indefinite = Field::constant(&grid, shape::METRIC, &[1.0, 0.0, 0.0, -1.0]);
    assert!(matches!(validate_metric(&indefinite), Err(SrfError::NotPositive { .. })));
    assert!(matches!(validate_metric(&Field::identity(&grid)), Err(SrfError::Shape(_))));
}

fn random_setup(seed: u64, n: usize) -> (Arc<Grid>, Geometry) {
    let mut rng = testbeds::rng(seed);
    let modes = Modes::random(&mut rng, 2, 3, 2, 0.4);
    let grid = torus(2, n, |x| modes.eval(x)).unwrap();
    let g = testbeds::random_metric(&mut rng, &grid, 0.3);
    let geo = Geometry::new(&g).unwrap();
    (grid, geo)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn curvature_is_antisymmetric_in_its_directions(seed in 0u64..1000) {
        let (_, geo) = random_setup(seed, 24);
        let r = geo.riemann();
        let sum = r.zip_map(&r.permute(&[1, 0, 2, 3]), |a, b| a + b);
        prop_assert!(sum.max_abs() < 1e-12 * r.max_abs().max(1.0));
    }

    #[test]
    fn lowered_curvature_is_antisymmetric_in_its_endomorphism_slots(seed in 0u64..1000) {
        // R_{ab lm} = g_{lk} R^k_m must be skew in (l, m) up to discretization error.
        let (_, geo) = random_setup(seed, 48);
        let low = omega_srf::domain_grid::einsum("lk,abkm->ablm", &[geo.g(), geo.riemann()], &[Slot::Down; 4]);
        let skew = low.zip_map(&low.permute(&[0, 1, 3, 2]), |a, b| a + b);
        prop_assert!(skew.max_abs() < 0.05 * low.max_abs().max(1e-3), "{} vs {}", skew.max_abs(), low.max_abs());
    }

    #[test]
    fn weighted_laplacian_is_symmetric_and_nonnegative(seed in 0u64..1000) {
        let (grid, geo) = random_setup(seed, 48);
        let mut rng = testbeds::rng(seed + 1);
        let u = Modes::random(&mut rng, 2, 3, 2, 1.0).field(&grid);
        let v = Modes::random(&mut rng, 2, 3, 2, 1.0).field(&grid);
        let uv = integrate_omega(&u.zip_map(&geo.laplacian_omega(&v), |a, b| a * b)).unwrap();
        let vu = integrate_omega(&v.zip_map(&geo.laplacian_omega(&u), |a, b| a * b)).unwrap();
        let uu = integrate_omega(&u.zip_map(&geo.laplacian_omega(&u), |a, b| a * b)).unwrap();
        let grad_uu = integrate_omega(&inner_g(&geo.nabla(&u), &geo.nabla(&u), geo.g(), geo.ginv())).unwrap();
        prop_assert!((uv - vu).abs() < 1e-2 * uu.abs().max(1.0));
        prop_assert!(uu > 0.0);
        prop_assert!((uu - grad_uu).abs() < 1e-2 * grad_uu);
    }
}

#[test]
fn one_dimensional_metrics_are_flat() {
    let grid = gaussian_1d(65).unwrap();
    let mut rng = testbeds::rng(9);
    let g = testbeds::random_metric(&mut rng, &grid, 0.5);
    let geo = Geometry::new(&g).unwrap();
    assert!(geo.riemann().max_abs() < 1e-10);
}

#[test]
fn flat_weighted_laplacian_is_symmetric_on_concentrated_fields() {
    let grid = gaussian(2, 96).unwrap();
    let geo = Geometry::new(&Field::euclidean(&grid)).unwrap();
    let u = Field::scalar_fn(&grid, |x| (-(x[0] - 0.5).powi(2) - x[1] * x[1]).exp() * x[0].sin());
    let v = Field::scalar_fn(&grid, |x| (-0.5 * (x[0] + 0.3).powi(2) - 0.3 * x[1] * x[1]).exp() * (2.0 * x[1]).cos());
    let pair = |a: &Field, b: &Field| integrate_omega(&a.zip_map(&geo.laplacian_omega(b), |p, q| p * q)).unwrap();
    let (uv, vu, uu) = (pair(&u, &v), pair(&v, &u), pair(&u, &u));
    assert!((uv - vu).abs() <= 1e-6 * uv.abs().max(uu));
    assert!(uu > 0.0);
}

fn slope_of(mut residual: impl FnMut(usize) -> (f64, f64), levels: &[usize]) -> f64 {
    let (hs, rs): (Vec<f64>, Vec<f64>) = levels.iter().map(|&n| residual(n)).unzip();
    omega_srf::identity_verifier::refinement_slope(&hs, &rs).unwrap()
}

#[test]
fn weighted_identities_converge_at_second_order() {
    let levels = [32, 64, 128];
    let setup = |n: usize| {
        let (grid, geo) = random_setup(21, n);
        let mut rng = testbeds::rng(22);
        let a = testbeds::random_endo(&mut rng, &grid, 0.5);
        let u = testbeds::random_sym2(&mut rng, &grid, 0.5);
        (grid, geo, a, u)
    };
    let bianchi = slope_of(
        |n| {
            let (g, geo, _, _) = setup(n);
            (g.h_max(), geo.omega_contracted_bianchi().residual)
        },
        &levels,
    );
    let weitz = slope_of(
        |n| {
            let (g, geo, a, _) = setup(n);
            (g.h_max(), geo.weitzenbock_tx(&a, true).residual)
        },
        &levels,
    );
    let div = slope_of(
        |n| {
            let (g, geo, _, u) = setup(n);
            (g.h_max(), geo.endo_div_formula(&u).residual)
        },
        &levels,
    );
    let scalar = Modes::random(&mut testbeds::rng(23), 2, 3, 2, 1.0);
    let comm = slope_of(
        |n| {
            let (g, geo, _, _) = setup(n);
            (g.h_max(), geo.commutator_nabla_laplacian(&scalar.field(&g)).sides.residual)
        },
        &levels,
    );
    for (name, s) in [("bianchi", bianchi), ("weitzenbock", weitz), ("endo_div", div), ("commutator", comm)] {
        assert!(s >= 1.8, "{name}: slope {s}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn bakry_emery_endomorphism_is_self_adjoint(seed in 0u64..1000) {
        let (grid, geo) = random_setup(seed, 16);
        let ric = geo.ric_star_omega();
        let mut rng = testbeds::rng(seed ^ 0x5a);
        let u = Modes::random(&mut rng, 2, 2, 2, 1.0).field(&grid);
        let w = Modes::random(&mut rng, 2, 2, 2, 1.0).field(&grid);
        let uvec = Field::from_fn(&grid, shape::VECTOR, |x, o| { o[0] = 1.0 + x[0].sin(); o[1] = 0.5; });
        let vvec = uvec.map_points(shape::VECTOR, |p, v, o| { o[0] = v[1] * u.at(p)[0]; o[1] = w.at(p)[0]; });
        let g = geo.g();
        let lhs = omega_srf::domain_grid::einsum("ij,ik,k,j->", &[g, &ric, &uvec, &vvec], shape::SCALAR);
        let rhs = omega_srf::domain_grid::einsum("ij,jk,k,i->", &[g, &ric, &vvec, &uvec], shape::SCALAR);
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-10 * lhs.max_abs().max(1.0));
    }
}
