//! Randomized invariants of the norms, the straightening, the tangent flow,
//! the disk mesh and the Hamiltonian integrator.

use nalgebra::DMatrix;
use nhim_core::geometry::{
    canonical_angle, mat_row_sup_norm, vec_sup_norm, ChartPoint, ChartTopology, CoordKind,
};
use nhim_core::lambdalemma::{
    advance_mesh, c1_distance, find_k, seed_mesh, verify_bound_domination, DiskSpec,
};
use nhim_core::models::{
    energy, flow_step, make_poly, make_poly_with, make_twist_annulus, poincare_map, FlowState,
    Frequency, HamiltonianSpec, PolyParams,
};
use nhim_core::normalform::{apply_map, check_constants, estimate_bounds, jacobian, FD_STEP};
use nhim_core::straighten::{straighten_inverse, straighten_point, FnGraphPair};
use nhim_core::tangentflow::{stable_restricted_step, step_jet, JetState};
use nhim_core::{Dimensions, MapSpec, TangentVector};
use proptest::prelude::*;

const TAU: f64 = core::f64::consts::TAU;

fn vector(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1e3..1e3f64, len)
}

fn matrix() -> impl Strategy<Value = DMatrix<f64>> {
    (1usize..6, 1usize..6).prop_flat_map(|(r, c)| {
        prop::collection::vec(-10.0..10.0f64, r * c).prop_map(move |v| DMatrix::from_vec(r, c, v))
    })
}

fn poly_1d() -> impl Strategy<Value = nhim_core::models::PolyModel> {
    (0.0..0.1f64, 0.3..0.6f64, 1.8..3.0f64, 0.2..0.5f64)
        .prop_filter_map("constants refused", |(c, ls, lu, rho)| {
            make_poly(c, ls, lu, rho).ok()
        })
}

proptest! {
    #[test]
    fn sup_norm_is_homogeneous_and_subadditive(len in 1usize..8, a in -50.0..50.0f64, seed in vector(16)) {
        let (x, y) = (&seed[..len], &seed[8..8 + len]);
        let nx = vec_sup_norm(x).unwrap();
        let scaled: Vec<f64> = x.iter().map(|v| a * v).collect();
        prop_assert!((vec_sup_norm(&scaled).unwrap() - a.abs() * nx).abs() <= 1e-12 * a.abs() * nx);
        let sum: Vec<f64> = x.iter().zip(y).map(|(p, q)| p + q).collect();
        prop_assert!(vec_sup_norm(&sum).unwrap() <= nx + vec_sup_norm(y).unwrap() + 1e-12);
    }

    #[test]
    fn row_sum_norm_is_homogeneous_and_subadditive(a in matrix(), t in -50.0..50.0f64, shift in -5.0..5.0f64) {
        let na = mat_row_sup_norm(&a).unwrap();
        prop_assert!((mat_row_sup_norm(&(&a * t)).unwrap() - t.abs() * na).abs() <= 1e-12 * (1.0 + t.abs() * na));
        let b = a.map(|v| v * v - shift);
        let sum = mat_row_sup_norm(&(&a + &b)).unwrap();
        prop_assert!(sum <= na + mat_row_sup_norm(&b).unwrap() + 1e-12 * (1.0 + sum));
    }

    #[test]
    fn row_sum_norm_is_the_induced_operator_norm(a in matrix(), seed in vector(5)) {
        let norm = mat_row_sup_norm(&a).unwrap();
        let v: Vec<f64> = seed[..a.ncols()].to_vec();
        prop_assume!(vec_sup_norm(&v).unwrap() > 0.0);
        let av = &a * DMatrix::from_column_slice(v.len(), 1, &v);
        let lhs = vec_sup_norm(av.as_slice()).unwrap();
        prop_assert!(lhs <= norm * vec_sup_norm(&v).unwrap() * (1.0 + 1e-12));

        let row = (0..a.nrows())
            .max_by(|&i, &j| a.row(i).abs().sum().total_cmp(&a.row(j).abs().sum()))
            .unwrap();
        let signs: Vec<f64> = a.row(row).iter().map(|x| if *x >= 0.0 { 1.0 } else { -1.0 }).collect();
        let image = &a * DMatrix::from_column_slice(signs.len(), 1, &signs);
        let attained = vec_sup_norm(image.as_slice()).unwrap();
        prop_assert!((attained - norm).abs() <= 1e-12 * (1.0 + norm));
    }

    #[test]
    fn angle_canonicalization_is_idempotent(a in -1e4..1e4f64, b in -1e4..1e4f64, c in -1e4..1e4f64) {
        let once = canonical_angle(a);
        prop_assert!((0.0..TAU).contains(&once));
        prop_assert_eq!(canonical_angle(once), once);
        let topo = ChartTopology::new(vec![CoordKind::Angle, CoordKind::Linear, CoordKind::Angle]);
        let mut x = vec![a, b, c];
        topo.canonicalize(&mut x);
        let mut again = x.clone();
        topo.canonicalize(&mut again);
        prop_assert_eq!(x[1], b);
        prop_assert_eq!(again, x);
    }

    #[test]
    fn straightening_round_trip(
        a_s in -1.0..1.0f64,
        a_u in -1.0..1.0f64,
        s in -0.1..0.1f64,
        u in -0.1..0.1f64,
        x in 0.0..TAU,
    ) {
        let dims = Dimensions { n_s: 1, n_u: 1, m: 1 };
        let gp = FnGraphPair::quadratic(dims, 0.2, a_s, a_u);
        let p = ChartPoint::new(vec![s], vec![u], vec![x]);
        let q = straighten_point(&gp, &p).unwrap();
        let back = straighten_inverse(&gp, &q, 1e-14, 200).unwrap();
        prop_assert!((back.s[0] - s).abs() <= 1e-10);
        prop_assert!((back.u[0] - u).abs() <= 1e-10);
        prop_assert_eq!(back.x[0], x);
    }

    #[test]
    fn manifold_and_stable_slice_are_invariant(f in poly_1d(), s in -1.0..1.0f64, x in 0.0..TAU) {
        let on_m = apply_map(&f, &ChartPoint::new(vec![0.0], vec![0.0], vec![x])).unwrap();
        prop_assert_eq!(on_m.s[0], 0.0);
        prop_assert_eq!(on_m.u[0], 0.0);

        let p = ChartPoint::new(vec![s * f.rho()], vec![0.0], vec![x]);
        prop_assert_eq!(apply_map(&f, &p).unwrap().u[0], 0.0);
        let j = jacobian(&f, &p, FD_STEP).unwrap();
        prop_assert_eq!(j[(1, 0)], 0.0);
        prop_assert_eq!(j[(1, 2)], 0.0);
    }

    #[test]
    fn restricted_step_equals_the_full_step(
        f in poly_1d(),
        s in -1.0..1.0f64,
        x in 0.0..TAU,
        vs in -5.0..5.0f64,
        vx in -5.0..5.0f64,
    ) {
        let p = ChartPoint::new(vec![s * f.rho()], vec![0.0], vec![x]);
        let jet = JetState::new(p, vec![TangentVector::new(vec![vs], vec![1.0], vec![vx])]).unwrap();
        let full = step_jet(&f, &jet).unwrap();
        let restricted = stable_restricted_step(&f, &jet).unwrap();
        let a = full.p.to_vec().into_iter().chain(full.frame[0].to_vec());
        let b = restricted.p.to_vec().into_iter().chain(restricted.frame[0].to_vec());
        for (l, r) in a.zip(b) {
            prop_assert!((l - r).abs() <= 1e-12, "{} vs {}", l, r);
        }
    }

    #[test]
    fn twist_circles_are_fixed_setwise(eps in -1.0..1.0f64, theta in 0.0..TAU, s in -0.3..0.3f64) {
        let f = make_twist_annulus(eps, 0.2, 0.8, 0.5, 2.0, Frequency::default()).unwrap();
        for y in [0.2, 0.8] {
            let p = ChartPoint::new(vec![s], vec![0.0], vec![theta, y]);
            prop_assert_eq!(apply_map(&f, &p).unwrap().x[1], y);
        }
    }

    #[test]
    fn flow_step_is_reversible(
        p in -0.3..0.3f64,
        q in -1.0..1.0f64,
        i in -2.0..2.0f64,
        theta in 0.0..TAU,
        j in -2.0..2.0f64,
        phi in 0.0..TAU,
    ) {
        let hs = HamiltonianSpec::new(0.01, 0.001, 60, 1.0).unwrap();
        let st = FlowState::new(p, q, i, theta, j, phi);
        let back = flow_step(&hs, &flow_step(&hs, &st, 1e-3), -1e-3);
        let angle = |a: f64, b: f64| nhim_core::geometry::wrap_difference(a - b).abs();
        prop_assert!((back.p - st.p).abs() <= 1e-12);
        prop_assert!((back.i - st.i).abs() <= 1e-12);
        prop_assert!((back.j - st.j).abs() <= 1e-12);
        prop_assert!(angle(back.q, st.q) <= 1e-12);
        prop_assert!(angle(back.theta, st.theta) <= 1e-12);
        prop_assert!(angle(back.phi, st.phi) <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn integrable_return_rotates_by_the_action(i in -2.0..2.0f64, theta in 0.0..TAU, j in -1.0..1.0f64) {
        let hs = HamiltonianSpec::new(0.0, 0.0, 60, 1.0).unwrap();
        let ret = poincare_map(&hs, &FlowState::new(0.0, 0.0, i, theta, j, 0.0), 1e-3).unwrap();
        prop_assert_eq!(ret.state.i, i);
        prop_assert_eq!(ret.state.j, j);
        let advance = nhim_core::geometry::wrap_difference(ret.state.theta - theta - TAU * i);
        prop_assert!(advance.abs() <= 1e-11, "{}", advance);
    }

    #[test]
    fn censoring_is_monotone(
        f in poly_1d(),
        s0 in 0.0..0.5f64,
        slope in -0.5..0.5f64,
        lo in 0.01..0.5f64,
        hi in 0.01..0.5f64,
    ) {
        let rho = f.rho();
        let d = DiskSpec::affine(
            f.dims(),
            vec![s0 * rho],
            DMatrix::from_element(1, 1, slope),
            DMatrix::zeros(1, 1),
            vec![(-lo * rho, hi * rho)],
            vec![(0.0, TAU)],
            6,
        )
        .unwrap();
        let mut mo = seed_mesh(&d, &f).unwrap();
        let slice = mo.points.iter().filter(|p| p.on_stable_slice()).count();
        prop_assert!(slice > 0);
        for _ in 0..15 {
            let before: Vec<bool> = mo.points.iter().map(|p| p.alive).collect();
            mo = advance_mesh(mo, &f, 1).unwrap();
            for (was, p) in before.iter().zip(&mo.points) {
                prop_assert!(*was || !p.alive);
                if p.on_stable_slice() {
                    prop_assert!(p.alive);
                }
            }
            prop_assert!(mo.points.iter().filter(|p| p.on_stable_slice() && p.alive).count() == slice);
        }
    }

    #[test]
    fn refined_meshes_dominate(
        f in poly_1d(),
        s0 in 0.0..0.5f64,
        slope_u in -1.0..1.0f64,
        slope_x in -0.02..0.02f64,
        width in 0.001..0.1f64,
        coarse in 3usize..6,
        n in 0usize..8,
    ) {
        let disk = |mesh| {
            DiskSpec::affine(
                f.dims(),
                vec![s0 * f.rho()],
                DMatrix::from_element(1, 1, slope_u),
                DMatrix::from_element(1, 1, slope_x / TAU),
                vec![(-width * f.rho(), width * f.rho())],
                vec![(0.0, TAU)],
                mesh,
            )
            .unwrap()
        };
        let run = |mesh| {
            let mut mo = seed_mesh(&disk(mesh), &f).unwrap();
            if n > 0 {
                mo = advance_mesh(mo, &f, n).unwrap();
            }
            c1_distance(&mo).unwrap()
        };
        let (c, r) = (run(coarse), run(2 * coarse - 1));
        prop_assert!(r.c0 >= c.c0);
        prop_assert!(r.c1 >= c.c1);
    }

    #[test]
    fn k_is_nonincreasing_in_eps(f in poly_1d(), s0 in 0.01..0.5f64, width in 0.001..0.1f64, e in 1e-4..1e-1f64) {
        let rho = f.rho();
        let d = DiskSpec::constant(f.dims(), vec![s0 * rho], vec![(-width * rho, width * rho)], vec![(0.0, TAU)], 5)
            .unwrap();
        let tight = find_k(&d, &f, e, 40).unwrap();
        let loose = find_k(&d, &f, 2.0 * e, 40).unwrap();
        prop_assert!(tight.k.is_some());
        prop_assert!(loose.k.unwrap() <= tight.k.unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn eps_regime_persists_on_random_models(
        n_s in 1usize..3,
        n_u in 1usize..3,
        coupling in 0.0..0.08f64,
        lambda_s in 0.3..0.6f64,
        lambda_u in 1.8..3.0f64,
        rho in 0.2..0.5f64,
        omega in 0.0..1.0f64,
        s0 in 0.0..0.5f64,
        slope in -0.5..0.5f64,
    ) {
        let dims = Dimensions { n_s, n_u, m: 1 };
        let f = make_poly_with(PolyParams { dims, coupling, lambda_s, lambda_u, omega, rho });
        prop_assume!(f.is_ok());
        let f = f.unwrap();
        let b = estimate_bounds(&f, 5, 1e-2).unwrap();
        prop_assume!(check_constants(&b).iter().all(|c| c.holds) && b.eps_s > 0.0);
        let d = DiskSpec::affine(
            dims,
            vec![s0 * rho; n_s],
            DMatrix::from_element(n_s, n_u, slope),
            DMatrix::zeros(n_s, 1),
            vec![(-0.01 * rho, 0.01 * rho); n_u],
            vec![(0.0, TAU)],
            5,
        )
        .unwrap();
        let rep = verify_bound_domination(&d, &f, &b, 30).unwrap();
        prop_assert!(rep.persistence_checked() > 0);
        prop_assert_eq!(rep.persistence_violations(), 0);
        prop_assert_eq!(rep.stretch_violations(), 0);
        prop_assert_eq!(rep.negative_margins(), 0, "min margin {}", rep.min_margin());
    }

    #[test]
    fn bounds_grow_with_grid_density(f in poly_1d(), coarse in 2usize..5) {
        let a = estimate_bounds(&f, coarse, 1e-2).unwrap();
        let b = estimate_bounds(&f, 2 * coarse, 1e-2).unwrap();
        prop_assert!(b.k >= a.k);
        prop_assert!(b.c >= a.c);
        prop_assert!(b.c_tilde >= a.c_tilde);
        prop_assert!(b.d >= a.d);
    }
}

/// Largest `|H(t) − H(0)|` over `t ∈ [0, 20π]` with step `h`.
fn max_energy_error(hs: &HamiltonianSpec, st: &FlowState, h: f64) -> f64 {
    let steps = (10.0 * TAU / h).round() as usize;
    let h0 = energy(hs, st);
    let mut cur = *st;
    let mut worst = 0.0_f64;
    for _ in 0..steps {
        cur = flow_step(hs, &cur, h);
        worst = worst.max((energy(hs, &cur) - h0).abs());
    }
    worst
}

#[test]
fn energy_error_is_second_order() {
    let hs = HamiltonianSpec::new(0.01, 0.001, 60, 1.0).unwrap();
    for st in [
        FlowState::new(0.05, 0.1, 0.7, 1.0, 0.2, 0.0),
        FlowState::new(0.0, 0.0, 1.3, 0.0, -0.4, 2.0),
    ] {
        let coarse = max_energy_error(&hs, &st, 2e-2);
        let fine = max_energy_error(&hs, &st, 1e-2);
        let ratio = coarse / fine;
        assert!(
            (3.5..=4.5).contains(&ratio),
            "ratio {ratio} ({coarse:e} / {fine:e})"
        );
    }
}
