use std::sync::Arc;

use proptest::prelude::*;

use omega_srf::domain_grid::linalg::field_inverse;
use omega_srf::domain_grid::products::raise_form;
use omega_srf::domain_grid::{einsum, shape, Field, Grid, MetricField, PolarizationField, DEFAULT_EIGENGAP};
use omega_srf::metric_space_geometry::{
    conservation_along_geodesic, curvature_m, dist_between_logs, dist_g_on_flat, equivalent_fk_check, geodesic, in_f,
    in_f_k, MetricPair,
};
use omega_srf::riemann_ops::Geometry;
use omega_srf::testbeds::{self, torus};

fn diag_metric(grid: &Arc<Grid>, a: impl Fn(&[f64]) -> f64, b: impl Fn(&[f64]) -> f64) -> MetricField {
    Field::from_fn(grid, shape::METRIC, |x, o| o.copy_from_slice(&[a(x), 0.0, 0.0, b(x)]))
}

fn polarization(grid: &Arc<Grid>) -> PolarizationField {
    let g = Field::euclidean(grid);
    PolarizationField::new(&g, Field::constant(grid, shape::ENDO, &[1.0, 0.0, 0.0, 2.0]), DEFAULT_EIGENGAP).unwrap()
}

#[test]
fn geodesic_of_a_codazzi_velocity_stays_in_the_flat() {
    // v = diag(a(x), b(y)) on the flat torus is a Hessian, commutes with K and stays so.
    for n in [48, 96] {
        let grid = torus(2, n, |x| 0.2 * x[0].cos() * x[1].sin()).unwrap();
        let g0 = Field::euclidean(&grid);
        let v = diag_metric(&grid, |x| 0.3 * x[0].sin(), |x| 0.2 * x[1].cos());
        let k = polarization(&grid);
        let recs = conservation_along_geodesic(&g0, &v, &k, &[0.0, 0.5, 1.0, 2.0], 2).unwrap();
        let h = grid.h_max();
        for r in &recs {
            assert!(r.value <= 10.0 * h * h, "{} at t = {}: {:e}", r.residual_name, r.time, r.value);
        }
    }
}

#[test]
fn membership_tests_reject_non_codazzi_velocities() {
    let grid = torus(2, 64, |_| 0.0).unwrap();
    let geo = Geometry::new(&Field::euclidean(&grid)).unwrap();
    let k = polarization(&grid);
    let member = diag_metric(&grid, |x| 0.3 * x[0].sin(), |x| 0.2 * x[1].cos());
    let swapped = diag_metric(&grid, |x| 0.3 * x[1].sin(), |x| 0.2 * x[0].cos());
    let off_diag = Field::from_fn(&grid, shape::METRIC, |_, o| o.copy_from_slice(&[0.0, 0.3, 0.3, 0.0]));
    let h2 = grid.h_max().powi(2);
    assert!(in_f(&geo, &member) < h2);
    assert!(in_f(&geo, &swapped) > 0.1);
    assert!(in_f_k(&geo, &member, &k, 2).max() < h2);
    // Constant and Codazzi, but it does not commute with K.
    let r = in_f_k(&geo, &off_diag, &k, 2);
    assert!(r.get("ext_d").unwrap() < 1e-12);
    assert!(r.get("k_bracket_0").unwrap() > 0.1);
    let (a, b) = equivalent_fk_check(&geo, &member, &k, 2);
    assert!(a.max() < h2 && b.max() < h2);
    let (a, b) = equivalent_fk_check(&geo, &off_diag, &k, 2);
    assert!(a.max() > 0.1 && b.max() > 0.1);
}

#[test]
fn curvature_of_the_space_of_metrics() {
    let grid = torus(2, 8, |_| 0.0).unwrap();
    let g = testbeds::random_metric(&mut testbeds::rng(4), &grid, 0.3);
    let diag = |a: f64, b: f64| Field::constant(&grid, shape::ENDO, &[a, 0.0, 0.0, b]);
    // u = g u* with commuting u*: the curvature vanishes identically.
    let lower = |e: &Field| einsum("ij,jk->ik", &[&g, e], shape::METRIC);
    let (u, v, w) = (lower(&diag(1.0, 2.0)), lower(&diag(-0.5, 0.3)), lower(&diag(0.7, 0.7)));
    assert!(curvature_m(&g, &u, &v, &w).unwrap().max_abs() < 1e-12);
    // For u* = E₁₁, v* = E₁₂ + E₂₁ and w* = u*: [[u*, v*], w*] = -(E₁₂ + E₂₁) in a g-orthonormal frame.
    let flat = Field::euclidean(&grid);
    let e11 = Field::constant(&grid, shape::METRIC, &[1.0, 0.0, 0.0, 0.0]);
    let sym = Field::constant(&grid, shape::METRIC, &[0.0, 1.0, 1.0, 0.0]);
    let r = curvature_m(&flat, &e11, &sym, &e11).unwrap();
    assert!(r.max_abs_diff(&sym.scale(0.25)) < 1e-14);
}

#[test]
fn geodesic_velocity_is_constant_in_the_lifted_frame() {
    // g_t⁻¹ ġ_t by central differences in t equals g₀⁻¹ v.
    let grid = torus(2, 8, |_| 0.0).unwrap();
    let mut rng = testbeds::rng(12);
    let g0 = testbeds::random_metric(&mut rng, &grid, 0.3);
    let v = testbeds::random_sym2(&mut rng, &grid, 0.5);
    let v_star = raise_form(&field_inverse(&g0).unwrap(), &v);
    let dt = 1e-4;
    for t in [0.0, 0.7, 1.5] {
        let gdot = (&geodesic(&g0, &v, t + dt).unwrap() - &geodesic(&g0, &v, t - dt).unwrap()).scale(0.5 / dt);
        let lifted = raise_form(&field_inverse(&geodesic(&g0, &v, t).unwrap()).unwrap(), &gdot);
        assert!(lifted.max_abs_diff(&v_star) < 1e-6, "t = {t}");
    }
}

#[test]
fn log_coordinate_round_trip() {
    let grid = torus(2, 12, |_| 0.0).unwrap();
    let mut rng = testbeds::rng(8);
    let g0 = testbeds::random_metric(&mut rng, &grid, 0.3);
    let s = testbeds::random_sym2(&mut rng, &grid, 0.4);
    let a = raise_form(&field_inverse(&g0).unwrap(), &s);
    let pair = MetricPair::from_log(&g0, &a).unwrap();
    let back = MetricPair::new(&g0, &pair.g).unwrap();
    assert!(back.a.max_abs_diff(&a) < 1e-12);
    assert!(dist_g_on_flat(&pair).unwrap() > 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn geodesics_form_a_one_parameter_group(seed in 0u64..10_000, s in -1.0f64..1.0, t in -1.0f64..1.0) {
        let grid = torus(2, 6, |_| 0.0).unwrap();
        let mut rng = testbeds::rng(seed);
        let g0 = testbeds::random_metric(&mut rng, &grid, 0.4);
        let v = testbeds::random_sym2(&mut rng, &grid, 0.6);
        let g0inv = field_inverse(&g0).unwrap();
        let rel = |g: &MetricField| raise_form(&g0inv, g);
        let lhs = rel(&geodesic(&g0, &v, s + t).unwrap());
        let rhs = einsum("ij,jk->ik", &[&rel(&geodesic(&g0, &v, s).unwrap()), &rel(&geodesic(&g0, &v, t).unwrap())], shape::ENDO);
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-10 * lhs.max_abs().max(1.0));
    }

    #[test]
    fn flat_distance_satisfies_the_triangle_inequality(seed in 0u64..10_000) {
        let grid = torus(2, 16, |x| 0.3 * x[0].sin()).unwrap();
        let g0 = Field::euclidean(&grid);
        let mut rng = testbeds::rng(seed);
        let k = polarization(&grid);
        let ctx = omega_srf::w_functional::WContext::new(&g0).unwrap();
        let a = ctx.random_commuting(&mut rng, Some(&k));
        let b = ctx.random_commuting(&mut rng, Some(&k));
        let c = ctx.random_commuting(&mut rng, Some(&k));
        let ab = dist_between_logs(&g0, &a, &b).unwrap();
        let bc = dist_between_logs(&g0, &b, &c).unwrap();
        let ac = dist_between_logs(&g0, &a, &c).unwrap();
        prop_assert!(ac <= ab + bc + 1e-8);
        prop_assert!((ab - dist_between_logs(&g0, &b, &a).unwrap()).abs() < 1e-12);
    }
}
