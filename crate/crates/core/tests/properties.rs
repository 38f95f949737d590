//! Randomized invariants of the mesh, forms, projections and diagnostics.

use std::sync::Arc;

use dgflow_core::diagnostics::{cumulative_norm, kinetic_energy, velocity_l2_norm};
use dgflow_core::forms::jump_and_average;
use dgflow_core::krylov::LinearOptions;
use dgflow_core::{
    DGField, DIRKTableau, Discretization, FormConfig, PenaltyContext, ProjectionVariant, Projector, StructuredMesh2D,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn disc(n: usize, p: usize, periodic: [bool; 2], mu: f64) -> Discretization {
    let mesh = Arc::new(StructuredMesh2D::new(n, n + 1, [-1.0, 0.5, 0.0, 2.0], periodic).unwrap());
    Discretization::new(mesh, p, FormConfig { mu, ..FormConfig::default() }).unwrap()
}

fn random(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn periodicity() -> impl Strategy<Value = [bool; 2]> {
    (any::<bool>(), any::<bool>()).prop_map(|(a, b)| [a, b])
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn jump_and_average_reconstruct_traces(a in -1e3..1e3f64, b in -1e3..1e3f64) {
        let (j, m) = jump_and_average(a, b);
        prop_assert!((m + 0.5 * j - a).abs() <= 1e-12 * (1.0 + a.abs()));
        prop_assert!((m - 0.5 * j - b).abs() <= 1e-12 * (1.0 + b.abs()));
    }

    #[test]
    fn mesh_face_counts(nx in 1usize..7, ny in 1usize..7, per in periodicity()) {
        let m = StructuredMesh2D::new(nx, ny, [0.0, 2.0, -1.0, 1.0], per).unwrap();
        let vx = if per[0] { nx * ny } else { (nx + 1) * ny };
        let hy = if per[1] { nx * ny } else { nx * (ny + 1) };
        prop_assert_eq!(m.faces().len(), vx + hy);
        // every cell sees four faces, each interior face two cells
        let mut seen = vec![0usize; m.num_cells()];
        for f in m.faces() {
            seen[f.left_cell] += 1;
            if let Some(r) = f.right_cell { seen[r] += 1; }
            let (hx, hy) = (m.hx(), m.hy());
            let want = if f.axis == dgflow_core::Axis::X { hx } else { hy };
            prop_assert!((m.face_h_e(f) - want).abs() < 1e-14);
        }
        prop_assert!(seen.iter().all(|&s| s == 4));
    }

    #[test]
    fn viscous_and_poisson_forms_are_symmetric_and_nonnegative(
        seed in any::<u64>(), p in 2usize..4, per in periodicity(), mu in 1e-3..10.0f64,
    ) {
        let d = disc(2, p, per, mu);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (nv, np) = (d.velocity_len(), d.pressure_len());
        let (u, v) = (random(nv, &mut rng), random(nv, &mut rng));
        let (mut au, mut av) = (vec![0.0; nv], vec![0.0; nv]);
        d.apply_a_raw(&u, &mut au);
        d.apply_a_raw(&v, &mut av);
        let scale = dot(&u, &au).abs() + dot(&v, &av).abs();
        prop_assert!((dot(&v, &au) - dot(&u, &av)).abs() <= 1e-11 * scale);
        prop_assert!(dot(&u, &au) > 0.0);

        let (q, r) = (random(np, &mut rng), random(np, &mut rng));
        let (mut aq, mut ar) = (vec![0.0; np], vec![0.0; np]);
        d.apply_alpha_raw(&q, &mut aq);
        d.apply_alpha_raw(&r, &mut ar);
        let scale = dot(&q, &aq).abs() + dot(&r, &ar).abs();
        prop_assert!((dot(&r, &aq) - dot(&q, &ar)).abs() <= 1e-11 * scale);
        prop_assert!(dot(&q, &aq) >= -1e-12 * scale);
    }

    #[test]
    fn b_and_its_transpose_are_adjoint(seed in any::<u64>(), p in 2usize..5, per in periodicity()) {
        let d = disc(2, p, per, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (v, q) = (random(d.velocity_len(), &mut rng), random(d.pressure_len(), &mut rng));
        let (mut bv, mut btq) = (vec![0.0; q.len()], vec![0.0; v.len()]);
        d.apply_b_raw(&v, &mut bv);
        d.apply_bt_raw(&q, &mut btq);
        let (x, y) = (dot(&bv, &q), dot(&v, &btq));
        prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
    }

    #[test]
    fn poisson_form_annihilates_constants(c in -5.0..5.0f64, p in 2usize..5, per in periodicity()) {
        let d = disc(3, p, per, 1.0);
        let q = d.interpolate_pressure(|_, _| c);
        let aq = d.apply_alpha(&q).unwrap();
        prop_assert!(aq.max_abs() <= 1e-11 * (1.0 + c.abs()));
    }

    #[test]
    fn viscous_form_annihilates_constants_on_periodic_mesh(c0 in -5.0..5.0f64, c1 in -5.0..5.0f64, p in 2usize..4) {
        let d = disc(3, p, [true, true], 0.7);
        let v = d.interpolate_velocity(|_, _| [c0, c1]);
        prop_assert!(d.apply_a(&v).unwrap().max_abs() <= 1e-11 * (1.0 + c0.abs() + c1.abs()));
    }

    #[test]
    fn kinetic_energy_is_quadratic(seed in any::<u64>(), s in -4.0..4.0f64) {
        let d = disc(2, 2, [false, true], 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = DGField::from_data(d.mesh.num_cells(), 2, 2, random(d.velocity_len(), &mut rng)).unwrap();
        let mut sv = v.clone();
        sv.scale(s);
        let (e, es) = (kinetic_energy(&d, &v).unwrap(), kinetic_energy(&d, &sv).unwrap());
        prop_assert!((es - s * s * e).abs() <= 1e-12 * (1.0 + es));
        let n = velocity_l2_norm(&d, &v).unwrap();
        prop_assert!((0.5 * n * n - e).abs() <= 1e-12 * (1.0 + e));
    }

    #[test]
    fn cumulative_norm_of_constant_error(e in 0.0..10.0f64, t_end in 0.1..5.0f64, n in 2usize..40) {
        let samples: Vec<(f64, f64)> = (0..n).map(|i| (t_end * i as f64 / (n - 1) as f64, e)).collect();
        let got = cumulative_norm(&samples).unwrap();
        prop_assert!((got - e * t_end.sqrt()).abs() <= 1e-12 * (1.0 + got));
    }

    #[test]
    fn cumulative_norm_is_homogeneous_and_monotone(
        errs in proptest::collection::vec(0.0..1.0f64, 2..30), s in 0.0..10.0f64, extra in 0.0..1.0f64,
    ) {
        let samples: Vec<(f64, f64)> = errs.iter().enumerate().map(|(i, &e)| (0.1 * i as f64, e)).collect();
        let scaled: Vec<(f64, f64)> = samples.iter().map(|&(t, e)| (t, s * e)).collect();
        let (a, b) = (cumulative_norm(&samples).unwrap(), cumulative_norm(&scaled).unwrap());
        prop_assert!((b - s * a).abs() <= 1e-12 * (1.0 + b));
        let mut longer = samples.clone();
        longer.push((0.1 * errs.len() as f64, extra));
        prop_assert!(cumulative_norm(&longer).unwrap() >= a);
    }

    #[test]
    fn interpolation_reproduces_tensor_polynomials(
        coef in proptest::collection::vec(-1.0..1.0f64, 9), xi in 0.0..1.0f64, eta in 0.0..1.0f64, cell in 0usize..6,
    ) {
        // Q^2 polynomial sum c_ij x^i y^j
        let f = |x: f64, y: f64| {
            (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| coef[3 * i + j] * x.powi(i as i32) * y.powi(j as i32)).sum::<f64>()
        };
        let d = disc(2, 2, [false, false], 1.0);
        let q = d.interpolate_velocity(|x, y| [f(x, y), -f(y, x)]);
        let [x, y] = d.mesh.map_point(cell, xi, eta);
        let got = q.eval_at(cell, xi, eta);
        prop_assert!((got[0] - f(x, y)).abs() < 1e-12);
        prop_assert!((got[1] + f(y, x)).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, ..ProptestConfig::default() })]

    #[test]
    fn helmholtz_flux_projection_is_idempotent(seed in any::<u64>(), p in 2usize..4, per in periodicity()) {
        let d = disc(3, p, per, 1.0);
        let pr = Projector::new(&d, ProjectionVariant::helmholtz_rt(p).unwrap())
            .unwrap()
            .with_poisson_options(LinearOptions { tol: 1e-14, abs_tol: 1e-16, max_iter: 5000, restart: 50 });
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = DGField::from_data(d.mesh.num_cells(), 2, p, random(d.velocity_len(), &mut rng)).unwrap();
        let ctx = PenaltyContext { dt: 0.01, nu: 0.1 };
        let v = pr.project(&w, 0.0, ctx).unwrap().velocity;
        let mut dv = pr.project(&v, 0.0, ctx).unwrap().velocity;
        dv.axpy(-1.0, &v);
        prop_assert!(velocity_l2_norm(&d, &dv).unwrap() <= 1e-11 * velocity_l2_norm(&d, &w).unwrap());
    }

    #[test]
    fn potential_is_mean_free_for_every_variant(seed in any::<u64>(), which in 0usize..4) {
        let d = disc(2, 2, [false, false], 1.0);
        let variant = [
            ProjectionVariant::div_div(),
            ProjectionVariant::div_div_conti(),
            ProjectionVariant::pressure_poisson_rt(2).unwrap(),
            ProjectionVariant::helmholtz_rt(2).unwrap(),
        ][which];
        let pr = Projector::new(&d, variant).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = DGField::from_data(d.mesh.num_cells(), 2, 2, random(d.velocity_len(), &mut rng)).unwrap();
        let res = pr.project(&w, 0.0, PenaltyContext { dt: 0.01, nu: 0.1 }).unwrap();
        prop_assert!(d.mean(&res.potential).abs() < 1e-12);
    }
}

#[test]
fn alexander_tableau_is_second_order_and_stiffly_accurate() {
    let t = DIRKTableau::alexander2();
    assert!(t.order_residuals().iter().all(|r| r.abs() < 1e-15));
    assert!(t.is_stiffly_accurate());
    assert!((t.a[0][0] - (1.0 - 0.5f64.sqrt())).abs() < 1e-15);
}
