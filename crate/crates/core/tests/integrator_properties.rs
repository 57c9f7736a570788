use evsample::integrator::{
    integrator_costs, ratio_from_eigenvalues, riccati_like_residual, root_of_h, scalar_h, slopes_and_ratio,
    solve_riccati_like, value_function_integrator, value_gradient_integrator, value_hessian_integrator,
    EllipsoidBound,
};
use evsample::linalg::sym_eig_range;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

/// `U diag(d) Uᵀ` with `U` orthogonal from a QR factorization.
fn spd(n: usize, raw: &[f64], logd: &[f64]) -> DMatrix<f64> {
    let m = DMatrix::from_fn(n, n, |i, j| raw[i * n + j]) + DMatrix::identity(n, n) * 1e-3;
    let u = m.qr().q();
    let d = DVector::from_iterator(n, logd[..n].iter().map(|&l| 10f64.powf(l)));
    let out = &u * DMatrix::from_diagonal(&d) * u.transpose();
    (&out + out.transpose()) * 0.5
}

prop_compose! {
    fn spd_pair(lo: usize, hi: usize)(n in lo..=hi,
        a in prop::collection::vec(-1.0f64..1.0, 25), da in prop::collection::vec(-2.0f64..2.0, 5),
        b in prop::collection::vec(-1.0f64..1.0, 25), db in prop::collection::vec(-2.0f64..2.0, 5))
        -> (DMatrix<f64>, DMatrix<f64>) {
        (spd(n, &a, &da), spd(n, &b, &db))
    }
}

fn quad(p: &DMatrix<f64>, x: &[f64]) -> f64 {
    let v = DVector::from_column_slice(x);
    (v.transpose() * p * &v)[(0, 0)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn riccati_like_residual_is_small((q, r) in spd_pair(1, 5)) {
        let sol = solve_riccati_like(&q, &r).unwrap();
        let res = riccati_like_residual(&sol.p, &q, &r).norm();
        prop_assert!(res <= 1e-10 * q.norm(), "residual {res:e}");
        prop_assert!(sym_eig_range(&sol.p).0 > 0.0);
        let rv: Vec<f64> = sol.r.iter().copied().collect();
        prop_assert!(scalar_h(0.5 * sol.s, &rv).unwrap() < 0.0);
        prop_assert!(scalar_h(2.0 * sol.s, &rv).unwrap() > 0.0);
        prop_assert!(scalar_h(sol.s, &rv).unwrap().abs() <= 1e-12 * (1.0 + sol.s));
        prop_assert!(((&r * &sol.p).trace() - sol.s).abs() <= 1e-10 * sol.s);
    }

    #[test]
    fn ratio_lies_between_bounds((q, r) in spd_pair(2, 5)) {
        let n = q.nrows() as f64;
        let s = slopes_and_ratio(&q, &r).unwrap();
        prop_assert!(s.j_ratio >= 1.0 + 2.0 / n - 1e-12, "{}", s.j_ratio);
        prop_assert!(s.j_ratio < 3.0);
        let p = solve_riccati_like(&q, &r).unwrap().p;
        prop_assert!((ratio_from_eigenvalues(&p, &r) - s.j_ratio).abs() <= 1e-9 * s.j_ratio);
    }

    #[test]
    fn equal_eigenvalues_hit_lower_bound((_q, r) in spd_pair(2, 5), c in 0.01f64..100.0) {
        let n = r.nrows() as f64;
        let q = r.clone().try_inverse().unwrap() * c;
        let s = slopes_and_ratio(&q, &r).unwrap();
        prop_assert!((s.j_ratio - (1.0 + 2.0 / n)).abs() <= 1e-8);
    }

    #[test]
    fn scaling_q_shrinks_the_ellipsoid((q, r) in spd_pair(1, 5), a1 in 0.1f64..10.0, k in 1.01f64..10.0) {
        let p1 = solve_riccati_like(&(&q * a1), &r).unwrap().p;
        let p2 = solve_riccati_like(&(&q * (a1 * k)), &r).unwrap().p;
        prop_assert!(riccati_like_residual(&p2, &(&q * (a1 * k)), &r).norm() <= 1e-10 * a1 * k * q.norm());
        // {xᵀP₂x ≤ c} ⊆ {xᵀP₁x ≤ c}  ⇔  P₂ ⪰ P₁
        let (lo, _) = sym_eig_range(&(&p2 - &p1));
        prop_assert!(lo >= -1e-10 * p2.norm(), "{lo:e}");
    }

    #[test]
    fn derivatives_match_finite_differences(
        (q, r) in spd_pair(1, 4),
        rho in 0.1f64..4.0,
        dir in prop::collection::vec(-1.0f64..1.0, 4),
        frac in 0.05f64..0.9,
    ) {
        let n = q.nrows();
        let p = solve_riccati_like(&q, &r).unwrap().p;
        let d = &dir[..n];
        let norm = quad(&p, d).sqrt();
        prop_assume!(norm > 1e-3);
        let level = 2.0 * rho.sqrt();
        let x: Vec<f64> = d.iter().map(|v| v / norm * (frac * level).sqrt()).collect();

        let grad = value_gradient_integrator(&x, &p, rho);
        let hess = value_hessian_integrator(&x, &p, rho);
        let h = 1e-5 * (level / sym_eig_range(&p).1).sqrt();
        let v = |y: &[f64]| value_function_integrator(y, &p, rho);
        let shifted = |i: usize, t: f64| {
            let mut y = x.clone();
            y[i] += t;
            y
        };
        for i in 0..n {
            let fd = (v(&shifted(i, h)) - v(&shifted(i, -h))) / (2.0 * h);
            prop_assert!((fd - grad[i]).abs() <= 1e-6 * (grad.norm() + 1e-3), "{fd} vs {} (h = {h:e})", grad[i]);
            let gp = value_gradient_integrator(&shifted(i, h), &p, rho);
            let gm = value_gradient_integrator(&shifted(i, -h), &p, rho);
            for k in 0..n {
                let fd2 = (gp[k] - gm[k]) / (2.0 * h);
                prop_assert!((fd2 - hess[(k, i)]).abs() <= 1e-6 * (hess.norm() + 1e-3));
            }
        }
    }
}

#[test]
fn collapse_approaches_upper_bound() {
    let r = DMatrix::identity(2, 2);
    let mut last = 0.0;
    for eps in [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6] {
        let q = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, eps]));
        let ratio = slopes_and_ratio(&q, &r).unwrap().j_ratio;
        assert!(ratio > last, "not increasing at ε = {eps}");
        last = ratio;
    }
    assert!(last > 3.0 - 1e-2, "{last}");
}

#[test]
fn root_is_unique_on_bracket() {
    let r = [0.3, 2.0, 7.5];
    let s = root_of_h(&r).unwrap();
    let mut prev = scalar_h(1e-9, &r).unwrap();
    for k in 1..400 {
        let t = 3.0 * s * k as f64 / 400.0;
        let hv = scalar_h(t, &r).unwrap();
        if t < s * (1.0 - 1e-9) {
            assert!(hv < 0.0);
        } else if t > s * (1.0 + 1e-9) {
            assert!(hv > 0.0);
        }
        assert!(hv >= prev - 1e-12, "h is not monotone");
        prev = hv;
    }
}

/// Samples the verification conditions on a box around the ellipsoid.
fn certificate(q: &DMatrix<f64>, r: &DMatrix<f64>, rho: f64) {
    let b = EllipsoidBound::optimal(q, r, rho).unwrap();
    let p = &b.p;
    let j = integrator_costs(p, r, rho).unwrap().total;
    let level = b.level();
    let v0 = value_function_integrator(&[0.0, 0.0], p, rho);
    assert!((v0 + rho).abs() <= 1e-12 * rho);

    let reach = (level / sym_eig_range(p).0).sqrt() * 1.5;
    let scale = 1.0 + j;
    let n = 81;
    let (mut inside, mut outside) = (0, 0);
    for a in 0..n {
        for c in 0..n {
            let x = [
                reach * (2.0 * a as f64 / (n - 1) as f64 - 1.0),
                reach * (2.0 * c as f64 / (n - 1) as f64 - 1.0),
            ];
            let lhs = quad(q, &x) + 0.5 * (r * value_hessian_integrator(&x, p, rho)).trace();
            let v = value_function_integrator(&x, p, rho);
            assert!(v - v0 <= rho * (1.0 + 1e-12));
            if quad(p, &x) < level {
                inside += 1;
                assert!((lhs - j).abs() <= 1e-8 * scale, "inside: {lhs} vs {j}");
                assert!(v - v0 < rho);
            } else {
                outside += 1;
                assert!(lhs >= j - 1e-8 * scale, "outside: {lhs} < {j}");
            }
        }
    }
    assert!(inside > 100 && outside > 100);
    for x in b.boundary_points(64).unwrap() {
        let v = value_function_integrator(&x, p, rho);
        assert!((v - v0 - rho).abs() <= 1e-9 * rho);
        assert!(value_gradient_integrator(&x, p, rho).norm() <= 1e-7 * (1.0 + p.norm()));
    }
}

#[test]
fn verification_conditions_hold_on_sample_grid() {
    let q = DMatrix::from_row_slice(2, 2, &[2.0, 0.4, 0.4, 1.0]);
    let r = DMatrix::from_row_slice(2, 2, &[0.5, -0.2, -0.2, 3.0]);
    for rho in [0.05, 1.0, 20.0] {
        certificate(&q, &r, rho);
    }
}
