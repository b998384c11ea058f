use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use r2ch::mesh::{
    apply_helmholtz, central_diff, coupling_flux, second_undivided, shift, solve_helmholtz,
    third_diff, GridFunction, Helmholtz, PeriodicGrid,
};
use std::f64::consts::PI;

fn dense_b(grid: &PeriodicGrid) -> DMatrix<f64> {
    let m = grid.len();
    let h = grid.h();
    let mut b = DMatrix::zeros(m, m);
    for i in 0..m {
        b[(i, i)] += 1.0 + 1.0 / (2.0 * h * h);
        b[(i, (i + 2) % m)] -= 1.0 / (4.0 * h * h);
        b[(i, (i + m - 2) % m)] -= 1.0 / (4.0 * h * h);
    }
    b
}

fn grid_and_field(max_m: usize) -> impl Strategy<Value = (PeriodicGrid, Vec<f64>)> {
    (5usize..=max_m, -5.0f64..5.0, 0.5f64..20.0).prop_flat_map(|(m, xmin, len)| {
        let grid = PeriodicGrid::new(xmin, xmin + len, m).unwrap();
        (Just(grid), prop::collection::vec(-3.0f64..3.0, m))
    })
}

fn two_fields(max_m: usize) -> impl Strategy<Value = (PeriodicGrid, Vec<f64>, Vec<f64>)> {
    grid_and_field(max_m).prop_flat_map(|(g, w)| {
        let m = g.len();
        (Just(g), Just(w), prop::collection::vec(-3.0f64..3.0, m))
    })
}

fn ulps_close(a: &[f64], b: &[f64], ulps: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| {
        let scale = x.abs().max(y.abs()).max(f64::MIN_POSITIVE);
        (x - y).abs() <= ulps * f64::EPSILON * scale
    })
}

#[test]
fn shift_examples() {
    let w = [1.0, 2.0, 3.0, 4.0];
    assert_eq!(shift(&w, 1).0, vec![2.0, 3.0, 4.0, 1.0]);
    assert_eq!(shift(&w, 0).0, w.to_vec());
    assert_eq!(shift(&shift(&w, 3), -3).0, w.to_vec());
}

#[test]
fn coupling_flux_examples() {
    let ones = [1.0; 4];
    assert_eq!(coupling_flux(&[0.0; 4], &ones).0, vec![0.0; 4]);
    assert_eq!(coupling_flux(&[0.3; 4], &[2.0; 4]).0, vec![0.0; 4]);
    assert_eq!(coupling_flux(&[1.0, 0.0, 0.0, 0.0], &ones).0, vec![0.0, -2.0, 0.0, 2.0]);
}

#[test]
fn helmholtz_of_constants() {
    let g = PeriodicGrid::new(0.0, 3.0, 12).unwrap();
    let c = g.constant(1.7);
    assert!(apply_helmholtz(&g, &c).iter().all(|&v| (v - 1.7).abs() < 1e-13));
    assert!(solve_helmholtz(&g, &c).unwrap().iter().all(|&v| (v - 1.7).abs() < 1e-13));
}

#[test]
fn impulse_solve_matches_dense_lu() {
    let g = PeriodicGrid::new(0.0, 8.0, 8).unwrap();
    assert_eq!(g.h(), 1.0);
    let mut m = vec![0.0; 8];
    m[0] = 1.0;
    let u = solve_helmholtz(&g, &m).unwrap();
    let oracle = dense_b(&g).lu().solve(&DVector::from_vec(m)).unwrap();
    for i in 0..8 {
        assert!((u[i] - oracle[i]).abs() < 1e-14, "node {i}: {} vs {}", u[i], oracle[i]);
    }
}

#[test]
fn fourier_eigenvalues_match_dense_spectrum() {
    for m in 5..=16 {
        let g = PeriodicGrid::new(-1.0, 1.0 + m as f64 * 0.1, m).unwrap();
        let h = g.h();
        let b = dense_b(&g);
        let hz = Helmholtz::new(g);
        for k in 0..m {
            let lambda = hz.eigenvalue(k);
            let expected = 1.0 + (2.0 * PI * k as f64 / m as f64).sin().powi(2) / (h * h);
            assert!((lambda - expected).abs() <= 1e-13 * expected);
            assert!(lambda >= 1.0);
            // cos and sin modes are eigenvectors of the dense matrix.
            for phase in [0.0, PI / 2.0] {
                let v = DVector::from_fn(m, |i, _| (2.0 * PI * (k * i) as f64 / m as f64 + phase).cos());
                let bv = &b * &v;
                assert!((bv - lambda * &v).amax() <= 1e-12 * lambda);
            }
        }
        let mut dense: Vec<f64> = b.symmetric_eigen().eigenvalues.iter().copied().collect();
        let mut ours: Vec<f64> = (0..m).map(|k| hz.eigenvalue(k)).collect();
        dense.sort_by(f64::total_cmp);
        ours.sort_by(f64::total_cmp);
        for (a, b) in dense.iter().zip(&ours) {
            assert!((a - b).abs() <= 1e-12 * b, "M = {m}: {a} vs {b}");
        }
    }
}

#[test]
fn differences_match_exact_stencils_on_trig_modes() {
    let g = PeriodicGrid::new(-2.0, 5.0, 40).unwrap();
    let (l, h) = (g.length(), g.h());
    let k = 2.0 * PI / l;
    let s = g.sample(|x| (k * x).sin());
    let c = g.sample(|x| (k * x).cos());
    let d1 = central_diff(&g, &s);
    let d3 = third_diff(&g, &c);
    for i in 0..g.len() {
        let x = g.x(i);
        // sin(a+b) - sin(a-b) = 2 cos a sin b
        let exact1 = (k * x).cos() * (k * h).sin() / h;
        // cos(x+2h) - 2cos(x+h) + 2cos(x-h) - cos(x-2h) = -2 sin x (sin 2kh - 2 sin kh)
        let exact3 = -(k * x).sin() * ((2.0 * k * h).sin() - 2.0 * (k * h).sin()) / (h * h * h);
        assert!((d1[i] - exact1).abs() < 1e-13, "{} vs {}", d1[i], exact1);
        assert!((d3[i] - exact3).abs() < 1e-10, "{} vs {}", d3[i], exact3);
    }
}

#[test]
fn solve_round_trip_on_fine_grid() {
    let g = PeriodicGrid::new(-20.0, 20.0, 3200).unwrap();
    let w = g.sample(|x| (-(x * x)).exp() + 0.1 * (0.3 * x).sin());
    let back = solve_helmholtz(&g, &apply_helmholtz(&g, &w)).unwrap();
    let err = back.iter().zip(w.iter()).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
    assert!(err <= 1e-12 * w.max_abs(), "{err}");
}

proptest! {
    #[test]
    fn operators_commute_with_shifts((g, w) in grid_and_field(40), k in -50isize..50) {
        let hz = Helmholtz::new(g);
        let sw = shift(&w, k);
        prop_assert!(ulps_close(&central_diff(&g, &sw), &shift(&central_diff(&g, &w), k), 4.0));
        prop_assert!(ulps_close(&third_diff(&g, &sw), &shift(&third_diff(&g, &w), k), 4.0));
        prop_assert!(ulps_close(&apply_helmholtz(&g, &sw), &shift(&apply_helmholtz(&g, &w), k), 4.0));
        // The FFT does not see the rotation exactly; compare in norm instead.
        let a = hz.solve(&sw).unwrap();
        let b = shift(&hz.solve(&w).unwrap(), k);
        let scale = GridFunction(w.clone()).max_abs().max(1e-300);
        for (x, y) in a.iter().zip(b.iter()) {
            prop_assert!((x - y).abs() <= 1e-13 * scale);
        }
    }

    #[test]
    fn shifts_compose((_, w) in grid_and_field(30), j in -40isize..40, k in -40isize..40) {
        prop_assert_eq!(shift(&shift(&w, j), k), shift(&w, j + k));
        prop_assert_eq!(shift(&shift(&w, k), -k).0, w);
    }

    #[test]
    fn differences_telescope((g, w) in grid_and_field(64)) {
        let m = g.len() as f64;
        let h = g.h();
        let wmax = GridFunction(w.clone()).max_abs();
        let s1: f64 = central_diff(&g, &w).iter().sum();
        let s3: f64 = third_diff(&g, &w).iter().sum();
        let s2: f64 = second_undivided(&w).iter().sum();
        prop_assert!(s1.abs() <= 4.0 * m * f64::EPSILON * wmax / h);
        prop_assert!(s3.abs() <= 8.0 * m * f64::EPSILON * wmax / (h * h * h));
        prop_assert!(s2.abs() <= 8.0 * m * f64::EPSILON * wmax);
    }

    #[test]
    fn helmholtz_is_symmetric((g, u, w) in two_fields(48)) {
        let bu = apply_helmholtz(&g, &u);
        let bw = apply_helmholtz(&g, &w);
        let lhs: f64 = bu.iter().zip(&w).map(|(a, b)| a * b).sum();
        let rhs: f64 = u.iter().zip(bw.iter()).map(|(a, b)| a * b).sum();
        let scale: f64 = bu.iter().zip(&w).map(|(a, b)| (a * b).abs()).sum::<f64>().max(1e-300);
        prop_assert!((lhs - rhs).abs() <= 1e-13 * scale, "{} vs {}", lhs, rhs);
    }

    #[test]
    fn helmholtz_matches_dense_and_nested_forms((g, u) in grid_and_field(16)) {
        let ours = apply_helmholtz(&g, &u);
        let dense = dense_b(&g) * DVector::from_vec(u.clone());
        let v = central_diff(&g, &u);
        let dv = central_diff(&g, &v);
        for i in 0..g.len() {
            let scale = 1.0 + u.iter().fold(0.0f64, |a, x| a.max(x.abs())) / (g.h() * g.h());
            prop_assert!((ours[i] - dense[i]).abs() <= 1e-13 * scale);
            prop_assert!((ours[i] - (u[i] - dv[i])).abs() <= 1e-13 * scale);
        }
    }

    #[test]
    fn solve_inverts_apply((g, w) in grid_and_field(256)) {
        let back = solve_helmholtz(&g, &apply_helmholtz(&g, &w)).unwrap();
        // Forward error grows with the condition number 1 + 1/h^2.
        let kappa = 1.0 + 1.0 / (g.h() * g.h());
        let tol = (1e-12f64).max(64.0 * kappa * f64::EPSILON) * GridFunction(w.clone()).max_abs();
        for (a, b) in back.iter().zip(&w) {
            prop_assert!((a - b).abs() <= tol, "{:e} > {:e}", (a - b).abs(), tol);
        }
        let hz = Helmholtz::new(g);
        let m = hz.apply(&w);
        prop_assert!(hz.backward_error(&hz.solve(&m).unwrap(), &m) <= 1e-12);
    }

    #[test]
    fn summation_by_parts((g, u) in grid_and_field(64)) {
        let m = apply_helmholtz(&g, &u);
        let n = g.len();
        let h = g.h();
        let total: f64 = (0..n)
            .map(|i| {
                let (ip, im) = ((i + 1) % n, (i + n - 1) % n);
                u[i] * ((m[ip] * u[ip] - m[im] * u[im]) / (2.0 * h) + m[i] * (u[ip] - u[im]) / (2.0 * h))
            })
            .sum();
        let umax = GridFunction(u.clone()).max_abs();
        let bound = 1e-11 * umax * umax * m.max_abs() * n as f64 / h;
        prop_assert!(total.abs() <= bound.max(1e-300), "{} > {}", total, bound);
    }
}
