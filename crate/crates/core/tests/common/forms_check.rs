//! Entrywise comparison of the matrix-free kernels against the dense oracle.

use std::sync::Arc;

use dgflow_core::{Discretization, FormConfig, Space, StructuredMesh2D};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::oracle::Oracle;

/// Polynomial boundary datum, integrated exactly by every rule involved.
pub fn boundary_datum(x: [f64; 2]) -> [f64; 2] {
    [1.0 + x[0] * x[1], x[0] - x[1] * x[1]]
}

/// Worst relative deviation per form over `trials` random inputs.
#[derive(Clone, Debug, Default)]
pub struct FormDeviations {
    pub mass_v: f64,
    pub mass_p: f64,
    pub a: f64,
    pub b: f64,
    pub bt: f64,
    pub c: f64,
    pub alpha: f64,
    pub r: f64,
}

impl FormDeviations {
    pub fn entries(&self) -> [(&'static str, f64); 8] {
        [
            ("M_v", self.mass_v),
            ("M_p", self.mass_p),
            ("a", self.a),
            ("b", self.b),
            ("b^T", self.bt),
            ("c", self.c),
            ("alpha", self.alpha),
            ("r", self.r),
        ]
    }

    pub fn max(&self) -> f64 {
        self.entries().iter().fold(0.0, |m, (_, e)| m.max(*e))
    }
}

fn rel(got: &[f64], want: &DVector<f64>) -> f64 {
    let scale = want.amax().max(1e-300);
    got.iter().zip(want.iter()).fold(0.0f64, |m, (g, w)| m.max((g - w).abs())) / scale
}

/// Compares every form on an `n x n` mesh of a non-square box.
pub fn compare_forms(n: usize, p: usize, periodic: [bool; 2], mu: f64, trials: usize, seed: u64) -> FormDeviations {
    let bounds = [0.0, 1.0, -0.5, 1.0];
    let mesh = Arc::new(StructuredMesh2D::new(n, n, bounds, periodic).expect("mesh"));
    let forms = FormConfig {
        mu,
        dirichlet: Some(Arc::new(|x, _t| boundary_datum(x))),
        ..FormConfig::default()
    };
    let disc = Discretization::new(mesh, p, forms).expect("discretization");
    let oracle = Oracle::new(n, n, bounds, periodic, p, mu);
    let (nv, np) = (oracle.velocity_len(), oracle.pressure_len());
    assert_eq!(nv, disc.velocity_len());
    assert_eq!(np, disc.pressure_len());

    let mv = oracle.velocity_mass();
    let mp = oracle.pressure_mass();
    let a = oracle.a_matrix();
    let b = oracle.b_matrix();
    let al = oracle.alpha_matrix();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dev = FormDeviations::default();
    let mut out_v = vec![0.0; nv];
    let mut out_p = vec![0.0; np];
    for _ in 0..trials {
        let v = DVector::from_fn(nv, |_, _| rng.gen_range(-1.0..1.0));
        let q = DVector::from_fn(np, |_, _| rng.gen_range(-1.0..1.0));

        disc.mass_apply_raw(Space::Velocity, v.as_slice(), &mut out_v);
        dev.mass_v = dev.mass_v.max(rel(&out_v, &(&mv * &v)));
        disc.mass_apply_raw(Space::Pressure, q.as_slice(), &mut out_p);
        dev.mass_p = dev.mass_p.max(rel(&out_p, &(&mp * &q)));

        disc.apply_a_raw(v.as_slice(), &mut out_v);
        dev.a = dev.a.max(rel(&out_v, &(&a * &v)));

        disc.apply_b_raw(v.as_slice(), &mut out_p);
        dev.b = dev.b.max(rel(&out_p, &(&b * &v)));
        disc.apply_bt_raw(q.as_slice(), &mut out_v);
        dev.bt = dev.bt.max(rel(&out_v, &(b.transpose() * &q)));

        disc.apply_alpha_raw(q.as_slice(), &mut out_p);
        dev.alpha = dev.alpha.max(rel(&out_p, &(&al * &q)));

        disc.apply_c_raw(v.as_slice(), 0.0, &mut out_v);
        dev.c = dev.c.max(rel(&out_v, &oracle.c_vector(&v, &boundary_datum, p + 2)));
    }
    if !(periodic[0] && periodic[1]) {
        disc.rhs_r_raw(0.0, &mut out_p);
        dev.r = rel(&out_p, &oracle.r_vector(&boundary_datum));
    }
    dev
}
