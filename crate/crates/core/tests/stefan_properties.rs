use evsample::integrator::EllipsoidBound;
use evsample::io::{read_grid_csv, write_grid_csv};
use evsample::lqg::ResetSystem;
use evsample::plants::double_integrator_drift;
use evsample::stefan::{
    assemble_operator, auto_half_width, extract_boundary, grid_trigger, hausdorff_distance, stefan_solve,
    GridSpec, StefanStepper, ValueFunctionGrid,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn system(a: &[f64], q: &[f64], r: &[f64]) -> ResetSystem {
    let m = |v: &[f64]| DMatrix::from_row_slice(2, 2, v);
    ResetSystem::new(m(a), m(q), m(r)).unwrap()
}

fn double_integrator() -> ResetSystem {
    ResetSystem::new(double_integrator_drift(), DMatrix::identity(2, 2), DMatrix::identity(2, 2)).unwrap()
}

fn spec(sys: &ResetSystem, j: f64, n: usize) -> GridSpec {
    let w = auto_half_width(sys, j).unwrap();
    GridSpec::with_defaults(sys, j, [w, w], [n, n]).unwrap()
}

fn mirror_gap(g: &ValueFunctionGrid) -> f64 {
    let (n0, n1) = g.v.dim();
    let scale = g.v.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut gap = 0.0f64;
    for i in 0..n0 {
        for j in 0..n1 {
            gap = gap.max((g.v[[i, j]] - g.v[[n0 - 1 - i, n1 - 1 - j]]).abs());
        }
    }
    gap / scale
}

#[test]
fn clamp_holds_after_every_step() {
    let sys = double_integrator();
    let s = spec(&sys, 1.0, 48);
    let mut stepper = StefanStepper::new(&sys, 1.0, &s).unwrap();
    let (oi, oj) = s.origin();
    for _ in 0..200 {
        stepper.step().unwrap();
        let v = stepper.values();
        let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(max, 0.0);
        assert!(v[[oi, oj]] < 0.0);
    }
    assert_eq!(stepper.steps(), 200);
}

#[test]
fn stationary_residual_vanishes_inside() {
    let sys = double_integrator();
    let j = 1.0;
    let s = spec(&sys, j, 96);
    let g = stefan_solve(&sys, j, &s).unwrap();
    let lv = assemble_operator(&sys, &s).unwrap().apply_grid(&g.v);
    let (n0, n1) = g.v.dim();
    let deep = |i: usize, k: usize| {
        (i.saturating_sub(2)..=(i + 2).min(n0 - 1))
            .all(|a| (k.saturating_sub(2)..=(k + 2).min(n1 - 1)).all(|b| g.omega_mask[[a, b]]))
    };
    let mut checked = 0;
    for i in 2..n0 - 2 {
        for k in 2..n1 - 2 {
            if !deep(i, k) {
                continue;
            }
            let [x1, x2] = s.coord(i, k);
            let res = x1 * x1 + x2 * x2 - j + lv[[i, k]];
            assert!(res.abs() <= 10.0 * s.stationarity_tol * (1.0 + j), "residual {res:e} at ({i}, {k})");
            checked += 1;
        }
    }
    assert!(checked > 100);
}

#[test]
fn omega_grows_with_j() {
    let sys = double_integrator();
    let s = spec(&sys, 2.0, 64);
    let small = stefan_solve(&sys, 0.8, &s).unwrap();
    let large = stefan_solve(&sys, 2.0, &s).unwrap();
    assert!(large.rho_effective >= small.rho_effective);
    for (a, b) in small.omega_mask.iter().zip(large.omega_mask.iter()) {
        assert!(!*a || *b, "Ω(J₁) ⊄ Ω(J₂)");
    }
    assert!(large.omega_size() > small.omega_size());
}

#[test]
fn boundary_gradient_is_first_order() {
    let sys = double_integrator();
    let j = 1.0;
    let w = auto_half_width(&sys, j).unwrap();
    let edge_gradient = |n: usize| {
        let s = GridSpec::with_defaults(&sys, j, [w, w], [n, n]).unwrap();
        let g = stefan_solve(&sys, j, &s).unwrap();
        let [h1, h2] = s.dx();
        let (n0, n1) = g.v.dim();
        let mut worst = 0.0f64;
        let mut reach = 0.0f64;
        for i in 1..n0 - 1 {
            for k in 1..n1 - 1 {
                let on_edge = g.omega_mask[[i, k]]
                    && [(i - 1, k), (i + 1, k), (i, k - 1), (i, k + 1)]
                        .iter()
                        .any(|&(a, b)| !g.omega_mask[[a, b]]);
                if on_edge {
                    let [x1, x2] = s.coord(i, k);
                    reach = reach.max(x1.hypot(x2));
                    let d1 = (g.v[[i + 1, k]] - g.v[[i - 1, k]]) / (2.0 * h1);
                    let d2 = (g.v[[i, k + 1]] - g.v[[i, k - 1]]) / (2.0 * h2);
                    worst = worst.max(d1.hypot(d2));
                }
            }
        }
        (worst, reach, h1)
    };
    let (coarse, reach, dx) = edge_gradient(64);
    let (fine, _, _) = edge_gradient(128);
    // Q = R = I: curvature of V near ∂Ω is bounded by the source J + |x|²
    let c = 4.0 * (j + reach * reach);
    assert!(coarse <= c * dx, "{coarse} vs {c}·dx, dx = {dx}");
    assert!(coarse / fine >= 1.5, "edge gradient {coarse} → {fine}");
}

#[test]
fn polyline_points_fire_and_origin_does_not() {
    let sys = double_integrator();
    let s = spec(&sys, 1.5, 64);
    let g = stefan_solve(&sys, 1.5, &s).unwrap();
    let poly = extract_boundary(&g).unwrap();
    assert!(poly.points.len() > 20);
    for p in &poly.points {
        assert!(grid_trigger(p, &g), "boundary point {p:?} does not fire");
        let v = g.interpolate(p).unwrap();
        assert!(v.abs() <= 0.05 * g.rho_effective, "V = {v} on ∂Ω");
    }
    assert!(!grid_trigger(&[0.0, 0.0], &g));
    assert!(grid_trigger(&[10.0 * s.half_width[0], 0.0], &g));
}

#[test]
fn integrator_grid_tracks_closed_form() {
    let sys = system(&[0.0; 4], &[1.0, 0.0, 0.0, 1.0], &[1.0, 0.0, 0.0, 1.0]);
    let j = 2f64.sqrt();
    let s = spec(&sys, j, 128);
    let g = stefan_solve(&sys, j, &s).unwrap();
    assert!((g.rho_effective - 1.0).abs() < 0.05);
    let ellipse = EllipsoidBound::optimal(&sys.q, &sys.r, 1.0).unwrap().boundary_points(720).unwrap();
    let d = hausdorff_distance(&extract_boundary(&g).unwrap().points, &ellipse);
    assert!(d <= 2.0 * s.dx()[0], "Hausdorff {d}");
}

#[test]
fn solved_grid_survives_csv() {
    let sys = double_integrator();
    let s = spec(&sys, 1.0, 48);
    let g = stefan_solve(&sys, 1.0, &s).unwrap();
    let mut buf = Vec::new();
    write_grid_csv(&mut buf, &g).unwrap();
    let back = read_grid_csv(buf.as_slice()).unwrap();
    assert_eq!(back.spec, g.spec);
    assert_eq!(back.v, g.v);
    assert_eq!(back.omega_mask, g.omega_mask);
    assert_eq!(back.rho_effective, g.rho_effective);
    assert_eq!(back.boundary_field(), g.boundary_field());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn solution_is_point_symmetric(
        a in prop::collection::vec(-1.0f64..1.0, 4),
        q in (0.5f64..2.0, -0.4f64..0.4, 0.5f64..2.0),
        r in (0.5f64..2.0, -0.4f64..0.4, 0.5f64..2.0),
        j in 0.3f64..3.0,
    ) {
        let sys = system(&a, &[q.0, q.1, q.1, q.2], &[r.0, r.1, r.1, r.2]);
        let s = spec(&sys, j, 48);
        let g = stefan_solve(&sys, j, &s);
        prop_assume!(g.is_ok());
        let g = g.unwrap();
        prop_assert!(mirror_gap(&g) <= 1e-8, "asymmetry {:e}", mirror_gap(&g));
        prop_assert!(g.v.iter().all(|&v| v <= 0.0));
        prop_assert!(g.rho_effective > 0.0);
        let (oi, oj) = s.origin();
        prop_assert!(g.omega_mask[[oi, oj]]);
    }
}
