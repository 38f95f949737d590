//! Matrix-free DG forms for velocity in `(Q_h^p)^2` and pressure in `Q_h^{p-1}`.
//!
//! Every `apply_*` routine returns the residual vector of a form against all
//! test functions of the relevant space, e.g. `apply_a(u)[i] = a(u, phi_i)`.
//! The SIPG variant is hard-wired (`epsilon = -1`). Free-slip and outflow
//! boundary terms are not part of this discretization.

use std::sync::Arc;

use crate::basis::{
    eval_cell_into, eval_face_into, integrate_cell, integrate_face, unit_gauss, BasisTable, CellValues,
    FaceValues, TensorBasis1D,
};
use crate::error::{check_len, Error, Result};
use crate::field::DGField;
use crate::mesh::{Axis, Face, FaceKind, Side, StructuredMesh2D};

/// Interior-penalty symmetry switch; only SIPG is supported.
pub const EPSILON: f64 = -1.0;

/// Spatial dimension.
pub const DIM: usize = 2;

/// Time-dependent vector datum `(x, t) -> value`.
pub type VectorFn = Arc<dyn Fn([f64; 2], f64) -> [f64; 2] + Send + Sync>;

#[derive(Clone)]
pub struct FormConfig {
    /// Dynamic viscosity.
    pub mu: f64,
    pub rho: f64,
    /// Penalty scale in `sigma = alpha p (p + d - 1)`.
    pub penalty_alpha: f64,
    /// Dirichlet datum `g`; absent means homogeneous.
    pub dirichlet: Option<VectorFn>,
    /// Body force `f`; absent means zero.
    pub force: Option<VectorFn>,
}

impl Default for FormConfig {
    fn default() -> Self {
        Self {
            mu: 1.0,
            rho: 1.0,
            penalty_alpha: 3.0,
            dirichlet: None,
            force: None,
        }
    }
}

impl std::fmt::Debug for FormConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FormConfig")
            .field("mu", &self.mu)
            .field("rho", &self.rho)
            .field("penalty_alpha", &self.penalty_alpha)
            .field("dirichlet", &self.dirichlet.is_some())
            .field("force", &self.force.is_some())
            .finish()
    }
}

/// Jump `int - ext` and average of two traces.
pub fn jump_and_average(interior: f64, exterior: f64) -> (f64, f64) {
    (interior - exterior, 0.5 * (interior + exterior))
}

/// Penalty factor for the velocity space: `alpha p (p + d - 1)`.
pub fn penalty_sigma_velocity(p: usize, d: usize, alpha: f64) -> f64 {
    alpha * (p * (p + d - 1)) as f64
}

/// Penalty factor for the pressure space `Q^{p-1}`: `alpha (p - 1)(p + d - 2)`.
pub fn penalty_sigma_pressure(p: usize, d: usize, alpha: f64) -> f64 {
    alpha * ((p - 1) * (p + d - 2)) as f64
}

/// Which discrete space a field lives in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Space {
    Velocity,
    Pressure,
}

/// Mesh, bases, quadrature tables and form parameters.
pub struct Discretization {
    pub mesh: Arc<StructuredMesh2D>,
    degree: usize,
    pub config: FormConfig,
    pub(crate) vel: BasisTable,
    pub(crate) pre: BasisTable,
    pub(crate) vel_conv: BasisTable,
    vel_mass: Vec<f64>,
    vel_mass_inv: Vec<f64>,
    pre_mass: Vec<f64>,
    pre_mass_inv: Vec<f64>,
    sigma_v: f64,
    sigma_p: f64,
}

impl std::fmt::Debug for Discretization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Discretization")
            .field("degree", &self.degree)
            .field("nx", &self.mesh.nx)
            .field("ny", &self.mesh.ny)
            .field("config", &self.config)
            .finish()
    }
}

fn mass_1d(tab: &BasisTable) -> Vec<f64> {
    let (nb, nq) = (tab.nb, tab.nq);
    let mut m = vec![0.0; nb * nb];
    for i in 0..nb {
        for j in 0..nb {
            m[i * nb + j] = (0..nq)
                .map(|q| tab.rule.weights[q] * tab.val[i * nq + q] * tab.val[j * nq + q])
                .sum();
        }
    }
    m
}

fn invert_small(m: &[f64], n: usize) -> Result<Vec<f64>> {
    let mat = nalgebra::DMatrix::from_row_slice(n, n, m);
    let inv = mat
        .try_inverse()
        .ok_or_else(|| Error::InvalidParameter("singular 1D mass matrix".into()))?;
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = inv[(i, j)];
        }
    }
    Ok(out)
}

/// `out = scale * (B kron A) x` for `nb x nb` row-major matrices with x fastest.
fn tensor_apply(a: &[f64], b: &[f64], nb: usize, scale: f64, x: &[f64], out: &mut [f64], tmp: &mut [f64]) {
    // tmp[j * nb + i] = sum_k a[i][k] x[j * nb + k]
    for j in 0..nb {
        for i in 0..nb {
            let mut s = 0.0;
            for k in 0..nb {
                s += a[i * nb + k] * x[j * nb + k];
            }
            tmp[j * nb + i] = s;
        }
    }
    for j in 0..nb {
        for i in 0..nb {
            let mut s = 0.0;
            for k in 0..nb {
                s += b[j * nb + k] * tmp[k * nb + i];
            }
            out[j * nb + i] = scale * s;
        }
    }
}

/// Per-face geometric data shared by the face kernels.
#[derive(Clone, Copy, Debug)]
pub(crate) struct FaceGeom {
    /// Extent of the adjacent cells along the face normal.
    pub h_normal: f64,
    /// `+1` if `n_e` points in the positive axis direction.
    pub sign: f64,
    pub measure: f64,
    pub h_e: f64,
}

impl Discretization {
    /// Velocity degree `p >= 1`; the pressure space has degree `p - 1`.
    /// Quadrature uses `p + 1` points per direction, `p + 2` for convection.
    pub fn new(mesh: Arc<StructuredMesh2D>, degree: usize, config: FormConfig) -> Result<Self> {
        Self::with_quadrature(mesh, degree, config, degree + 1, degree + 2)
    }

    pub fn with_quadrature(
        mesh: Arc<StructuredMesh2D>,
        degree: usize,
        config: FormConfig,
        n_standard: usize,
        n_convection: usize,
    ) -> Result<Self> {
        if degree == 0 {
            return Err(Error::InvalidDegree("velocity degree must be >= 1".into()));
        }
        if !(config.mu > 0.0) || !(config.rho > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "viscosity and density must be positive (mu = {}, rho = {})",
                config.mu, config.rho
            )));
        }
        let rule = unit_gauss(n_standard)?;
        let rule_conv = unit_gauss(n_convection)?;
        let vb = TensorBasis1D::new(degree);
        let pb = TensorBasis1D::new(degree - 1);
        let vel = BasisTable::new(&vb, &rule);
        let pre = BasisTable::new(&pb, &rule);
        let vel_conv = BasisTable::new(&vb, &rule_conv);
        let vel_mass = mass_1d(&vel);
        let pre_mass = mass_1d(&pre);
        let vel_mass_inv = invert_small(&vel_mass, vel.nb)?;
        let pre_mass_inv = invert_small(&pre_mass, pre.nb)?;
        let sigma_v = penalty_sigma_velocity(degree, DIM, config.penalty_alpha);
        let sigma_p = penalty_sigma_pressure(degree, DIM, config.penalty_alpha);
        Ok(Self {
            mesh,
            degree,
            config,
            vel,
            pre,
            vel_conv,
            vel_mass,
            vel_mass_inv,
            pre_mass,
            pre_mass_inv,
            sigma_v,
            sigma_p,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn pressure_degree(&self) -> usize {
        self.degree - 1
    }

    pub fn sigma_velocity(&self) -> f64 {
        self.sigma_v
    }

    pub fn sigma_pressure(&self) -> f64 {
        self.sigma_p
    }

    pub fn velocity_table(&self) -> &BasisTable {
        &self.vel
    }

    pub fn pressure_table(&self) -> &BasisTable {
        &self.pre
    }

    pub fn convection_table(&self) -> &BasisTable {
        &self.vel_conv
    }

    pub fn velocity_zeros(&self) -> DGField {
        DGField::vector(&self.mesh, self.degree)
    }

    pub fn pressure_zeros(&self) -> DGField {
        DGField::scalar(&self.mesh, self.degree - 1)
    }

    pub fn velocity_len(&self) -> usize {
        self.mesh.num_cells() * 2 * self.vel.ncoeffs()
    }

    pub fn pressure_len(&self) -> usize {
        self.mesh.num_cells() * self.pre.ncoeffs()
    }

    pub fn space_len(&self, space: Space) -> usize {
        match space {
            Space::Velocity => self.velocity_len(),
            Space::Pressure => self.pressure_len(),
        }
    }

    /// Coefficients per cell in a space (all components).
    pub fn cell_block_len(&self, space: Space) -> usize {
        match space {
            Space::Velocity => 2 * self.vel.ncoeffs(),
            Space::Pressure => self.pre.ncoeffs(),
        }
    }

    pub fn interpolate_velocity(&self, f: impl Fn(f64, f64) -> [f64; 2]) -> DGField {
        DGField::interpolate(&self.mesh, self.degree, 2, |x, y| f(x, y).to_vec())
    }

    pub fn interpolate_pressure(&self, f: impl Fn(f64, f64) -> f64) -> DGField {
        DGField::interpolate(&self.mesh, self.degree - 1, 1, |x, y| vec![f(x, y)])
    }

    pub(crate) fn face_geom(&self, face: &Face) -> FaceGeom {
        FaceGeom {
            h_normal: self.mesh.normal_extent(face.axis),
            sign: face.normal_sign(),
            measure: face.measure,
            h_e: self.mesh.face_h_e(face),
        }
    }

    /// Physical coordinates of a face point with face parameter `s` in `[0,1]`.
    pub(crate) fn face_point(&self, face: &Face, s: f64) -> [f64; 2] {
        let end = face.left_side.end() as f64;
        match face.axis {
            Axis::X => self.mesh.map_point(face.left_cell, end, s),
            Axis::Y => self.mesh.map_point(face.left_cell, s, end),
        }
    }

    pub(crate) fn dirichlet_at(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        match &self.config.dirichlet {
            Some(g) => g(x, t),
            None => [0.0, 0.0],
        }
    }

    fn check_velocity(&self, f: &DGField) -> Result<()> {
        if f.degree != self.degree || f.ncomp != 2 {
            return Err(Error::InvalidDegree(format!(
                "expected vector field of degree {}, got ncomp={} degree={}",
                self.degree, f.ncomp, f.degree
            )));
        }
        check_len(self.velocity_len(), f.len())
    }

    fn check_pressure(&self, f: &DGField) -> Result<()> {
        if f.degree + 1 != self.degree || f.ncomp != 1 {
            return Err(Error::InvalidDegree(format!(
                "expected scalar field of degree {}, got ncomp={} degree={}",
                self.degree - 1,
                f.ncomp,
                f.degree
            )));
        }
        check_len(self.pressure_len(), f.len())
    }

    // ---------------------------------------------------------------- mass

    fn mass_like(&self, space: Space, x: &[f64], out: &mut [f64], inverse: bool) {
        let (nb, m, ncomp) = match (space, inverse) {
            (Space::Velocity, false) => (self.vel.nb, &self.vel_mass, 2),
            (Space::Velocity, true) => (self.vel.nb, &self.vel_mass_inv, 2),
            (Space::Pressure, false) => (self.pre.nb, &self.pre_mass, 1),
            (Space::Pressure, true) => (self.pre.nb, &self.pre_mass_inv, 1),
        };
        let jac = self.mesh.cell_measure();
        let scale = if inverse { 1.0 / jac } else { jac };
        let n = nb * nb;
        let mut tmp = vec![0.0; n];
        for blk in 0..self.mesh.num_cells() * ncomp {
            tensor_apply(m, m, nb, scale, &x[blk * n..(blk + 1) * n], &mut out[blk * n..(blk + 1) * n], &mut tmp);
        }
    }

    /// `out = M x` in the given space.
    pub fn mass_apply_raw(&self, space: Space, x: &[f64], out: &mut [f64]) {
        self.mass_like(space, x, out, false);
    }

    /// `out = M^{-1} x`, exact per cell.
    pub fn inverse_mass_raw(&self, space: Space, x: &[f64], out: &mut [f64]) {
        self.mass_like(space, x, out, true);
    }

    pub fn mass_apply(&self, f: &DGField) -> DGField {
        let space = if f.ncomp == 2 { Space::Velocity } else { Space::Pressure };
        let mut out = f.zeros_like();
        self.mass_apply_raw(space, &f.data, &mut out.data);
        out
    }

    pub fn inverse_mass_apply(&self, f: &DGField) -> DGField {
        let space = if f.ncomp == 2 { Space::Velocity } else { Space::Pressure };
        let mut out = f.zeros_like();
        self.inverse_mass_raw(space, &f.data, &mut out.data);
        out
    }

    // ---------------------------------------------------------------- viscous form a

    /// Residual of the SIPG viscous form `a(u, phi_i)` (homogeneous, no data).
    pub fn apply_a_raw(&self, u: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let mu = self.config.mu;
        self.sipg_laplacian(&self.vel, 2, self.sigma_v, mu, true, u, out);
    }

    pub fn apply_a(&self, u: &DGField) -> Result<DGField> {
        self.check_velocity(u)?;
        let mut out = u.zeros_like();
        self.apply_a_raw(&u.data, &mut out.data);
        Ok(out)
    }

    /// Shared SIPG Laplacian kernel. `dirichlet_faces` selects whether
    /// boundary faces carry Nitsche terms (velocity) or are natural (pressure).
    #[allow(clippy::too_many_arguments)]
    fn sipg_laplacian(
        &self,
        tab: &BasisTable,
        ncomp: usize,
        sigma: f64,
        coef: f64,
        dirichlet_faces: bool,
        u: &[f64],
        out: &mut [f64],
    ) {
        let mesh = &*self.mesh;
        let (hx, hy) = (mesh.hx(), mesh.hy());
        let jac = hx * hy;
        let nloc = tab.ncoeffs();
        let nq = tab.nq;
        let w = &tab.rule.weights;

        let mut cv = CellValues::zeros(tab.npoints());
        let mut scratch = Vec::new();
        let mut gx = vec![0.0; tab.npoints()];
        let mut gy = vec![0.0; tab.npoints()];
        for cell in 0..mesh.num_cells() {
            for c in 0..ncomp {
                let off = (cell * ncomp + c) * nloc;
                eval_cell_into(&u[off..off + nloc], tab, &mut cv, &mut scratch);
                for qy in 0..nq {
                    for qx in 0..nq {
                        let q = qy * nq + qx;
                        let wq = coef * w[qx] * w[qy] * jac;
                        gx[q] = wq * cv.d_xi[q] / (hx * hx);
                        gy[q] = wq * cv.d_eta[q] / (hy * hy);
                    }
                }
                integrate_cell(tab, None, Some(&gx), Some(&gy), &mut out[off..off + nloc], &mut scratch);
            }
        }

        let mut fl = FaceValues::zeros(nq);
        let mut fr = FaceValues::zeros(nq);
        let mut va = vec![0.0; nq];
        let mut vb = vec![0.0; nq];
        let mut vr = vec![0.0; nq];
        for face in mesh.faces() {
            let g = self.face_geom(face);
            let pen = sigma / g.h_e;
            let dn_scale = g.sign / g.h_normal;
            match face.kind {
                FaceKind::Interior => {
                    let right = face.right_cell.expect("interior face");
                    let rside = face.right_side.expect("interior face");
                    for c in 0..ncomp {
                        let ol = (face.left_cell * ncomp + c) * nloc;
                        let or = (right * ncomp + c) * nloc;
                        eval_face_into(&u[ol..ol + nloc], tab, face.left_side, &mut fl);
                        eval_face_into(&u[or..or + nloc], tab, rside, &mut fr);
                        for q in 0..nq {
                            let wq = coef * w[q] * g.measure;
                            let jump = fl.val[q] - fr.val[q];
                            let avg_dn = 0.5 * (fl.d_normal[q] + fr.d_normal[q]) * dn_scale;
                            let a = wq * (-avg_dn + pen * jump);
                            let b = wq * 0.5 * EPSILON * jump * dn_scale;
                            va[q] = a;
                            vr[q] = -a;
                            vb[q] = b;
                        }
                        integrate_face(tab, face.left_side, &va, Some(&vb), &mut out[ol..ol + nloc]);
                        integrate_face(tab, rside, &vr, Some(&vb), &mut out[or..or + nloc]);
                    }
                }
                FaceKind::Dirichlet if dirichlet_faces => {
                    for c in 0..ncomp {
                        let ol = (face.left_cell * ncomp + c) * nloc;
                        eval_face_into(&u[ol..ol + nloc], tab, face.left_side, &mut fl);
                        for q in 0..nq {
                            let wq = coef * w[q] * g.measure;
                            let dn = fl.d_normal[q] * dn_scale;
                            va[q] = wq * (-dn + pen * fl.val[q]);
                            vb[q] = wq * EPSILON * fl.val[q] * dn_scale;
                        }
                        integrate_face(tab, face.left_side, &va, Some(&vb), &mut out[ol..ol + nloc]);
                    }
                }
                FaceKind::Dirichlet => {}
            }
        }
    }

    /// Right-hand side functional `l(phi_i; t)` including the Nitsche lifting of `g`.
    pub fn rhs_l_raw(&self, t: f64, out: &mut [f64]) {
        out.fill(0.0);
        let mesh = &*self.mesh;
        let tab = &self.vel;
        let (nq, nloc) = (tab.nq, tab.ncoeffs());
        let pts = &tab.rule.points;
        let w = &tab.rule.weights;
        let jac = mesh.cell_measure();
        let mut scratch = Vec::new();
        if let Some(f) = &self.config.force {
            let mut fx = vec![0.0; nq * nq];
            let mut fy = vec![0.0; nq * nq];
            for cell in 0..mesh.num_cells() {
                for qy in 0..nq {
                    for qx in 0..nq {
                        let x = mesh.map_point(cell, pts[qx], pts[qy]);
                        let v = f(x, t);
                        let wq = w[qx] * w[qy] * jac;
                        fx[qy * nq + qx] = wq * v[0];
                        fy[qy * nq + qx] = wq * v[1];
                    }
                }
                let off = cell * 2 * nloc;
                integrate_cell(tab, Some(&fx), None, None, &mut out[off..off + nloc], &mut scratch);
                integrate_cell(tab, Some(&fy), None, None, &mut out[off + nloc..off + 2 * nloc], &mut scratch);
            }
        }
        if self.config.dirichlet.is_some() {
            let mu = self.config.mu;
            let mut va = vec![0.0; nq];
            let mut vb = vec![0.0; nq];
            for face in mesh.faces().iter().filter(|f| f.kind == FaceKind::Dirichlet) {
                let g = self.face_geom(face);
                let pen = self.sigma_v / g.h_e;
                let dn_scale = g.sign / g.h_normal;
                let gv: Vec<[f64; 2]> = pts.iter().map(|&s| self.dirichlet_at(self.face_point(face, s), t)).collect();
                for c in 0..2 {
                    for q in 0..nq {
                        let wq = mu * w[q] * g.measure;
                        va[q] = wq * pen * gv[q][c];
                        vb[q] = wq * EPSILON * gv[q][c] * dn_scale;
                    }
                    let ol = (face.left_cell * 2 + c) * nloc;
                    integrate_face(tab, face.left_side, &va, Some(&vb), &mut out[ol..ol + nloc]);
                }
            }
        }
    }

    pub fn rhs_l(&self, t: f64) -> DGField {
        let mut out = self.velocity_zeros();
        self.rhs_l_raw(t, &mut out.data);
        out
    }

    // ---------------------------------------------------------------- pressure-velocity coupling b

    /// `out[j] = b(v, q_j)` for all pressure basis functions.
    pub fn apply_b_raw(&self, v: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let mesh = &*self.mesh;
        let (vt, pt) = (&self.vel, &self.pre);
        let (nq, nv, np) = (vt.nq, vt.ncoeffs(), pt.ncoeffs());
        let w = &vt.rule.weights;
        let (hx, hy) = (mesh.hx(), mesh.hy());
        let jac = hx * hy;
        let mut cx = CellValues::zeros(vt.npoints());
        let mut cy = CellValues::zeros(vt.npoints());
        let mut scratch = Vec::new();
        let mut div = vec![0.0; vt.npoints()];
        for cell in 0..mesh.num_cells() {
            let off = cell * 2 * nv;
            eval_cell_into(&v[off..off + nv], vt, &mut cx, &mut scratch);
            eval_cell_into(&v[off + nv..off + 2 * nv], vt, &mut cy, &mut scratch);
            for qy in 0..nq {
                for qx in 0..nq {
                    let q = qy * nq + qx;
                    div[q] = -w[qx] * w[qy] * jac * (cx.d_xi[q] / hx + cy.d_eta[q] / hy);
                }
            }
            integrate_cell(pt, Some(&div), None, None, &mut out[cell * np..(cell + 1) * np], &mut scratch);
        }
        let mut fl = FaceValues::zeros(nq);
        let mut fr = FaceValues::zeros(nq);
        let mut val = vec![0.0; nq];
        for face in mesh.faces() {
            let g = self.face_geom(face);
            let comp = axis_component(face.axis);
            let ol = (face.left_cell * 2 + comp) * nv;
            eval_face_into(&v[ol..ol + nv], vt, face.left_side, &mut fl);
            match face.kind {
                FaceKind::Interior => {
                    let right = face.right_cell.unwrap();
                    let rside = face.right_side.unwrap();
                    let or = (right * 2 + comp) * nv;
                    eval_face_into(&v[or..or + nv], vt, rside, &mut fr);
                    for q in 0..nq {
                        val[q] = 0.5 * w[q] * g.measure * g.sign * (fl.val[q] - fr.val[q]);
                    }
                    integrate_face(pt, face.left_side, &val, None, &mut out[face.left_cell * np..(face.left_cell + 1) * np]);
                    integrate_face(pt, rside, &val, None, &mut out[right * np..(right + 1) * np]);
                }
                FaceKind::Dirichlet => {
                    for q in 0..nq {
                        val[q] = w[q] * g.measure * g.sign * fl.val[q];
                    }
                    integrate_face(pt, face.left_side, &val, None, &mut out[face.left_cell * np..(face.left_cell + 1) * np]);
                }
            }
        }
    }

    pub fn apply_b(&self, v: &DGField) -> Result<DGField> {
        self.check_velocity(v)?;
        let mut out = self.pressure_zeros();
        self.apply_b_raw(&v.data, &mut out.data);
        Ok(out)
    }

    /// `b(v, q)` as a number.
    pub fn b_value(&self, v: &DGField, q: &DGField) -> Result<f64> {
        self.check_pressure(q)?;
        Ok(self.apply_b(v)?.dot(q))
    }

    /// `out[i] = b(phi_i, q)` for all velocity basis functions.
    pub fn apply_bt_raw(&self, q_in: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let mesh = &*self.mesh;
        let (vt, pt) = (&self.vel, &self.pre);
        let (nq, nv, np) = (vt.nq, vt.ncoeffs(), pt.ncoeffs());
        let w = &vt.rule.weights;
        let (hx, hy) = (mesh.hx(), mesh.hy());
        let jac = hx * hy;
        let mut qv = vec![0.0; vt.npoints()];
        let mut gx = vec![0.0; vt.npoints()];
        let mut gy = vec![0.0; vt.npoints()];
        let mut scratch = Vec::new();
        for cell in 0..mesh.num_cells() {
            crate::basis::eval_cell_values(&q_in[cell * np..(cell + 1) * np], pt, &mut qv, &mut scratch);
            for qy in 0..nq {
                for qx in 0..nq {
                    let q = qy * nq + qx;
                    let wq = -w[qx] * w[qy] * jac * qv[q];
                    gx[q] = wq / hx;
                    gy[q] = wq / hy;
                }
            }
            let off = cell * 2 * nv;
            integrate_cell(vt, None, Some(&gx), None, &mut out[off..off + nv], &mut scratch);
            integrate_cell(vt, None, None, Some(&gy), &mut out[off + nv..off + 2 * nv], &mut scratch);
        }
        let mut fl = FaceValues::zeros(nq);
        let mut fr = FaceValues::zeros(nq);
        let mut val = vec![0.0; nq];
        let mut valr = vec![0.0; nq];
        for face in mesh.faces() {
            let g = self.face_geom(face);
            let comp = axis_component(face.axis);
            eval_face_into(&q_in[face.left_cell * np..(face.left_cell + 1) * np], pt, face.left_side, &mut fl);
            let ol = (face.left_cell * 2 + comp) * nv;
            match face.kind {
                FaceKind::Interior => {
                    let right = face.right_cell.unwrap();
                    let rside = face.right_side.unwrap();
                    eval_face_into(&q_in[right * np..(right + 1) * np], pt, rside, &mut fr);
                    for q in 0..nq {
                        let avg = 0.5 * (fl.val[q] + fr.val[q]);
                        val[q] = w[q] * g.measure * g.sign * avg;
                        valr[q] = -val[q];
                    }
                    let or = (right * 2 + comp) * nv;
                    integrate_face(vt, face.left_side, &val, None, &mut out[ol..ol + nv]);
                    integrate_face(vt, rside, &valr, None, &mut out[or..or + nv]);
                }
                FaceKind::Dirichlet => {
                    for q in 0..nq {
                        val[q] = w[q] * g.measure * g.sign * fl.val[q];
                    }
                    integrate_face(vt, face.left_side, &val, None, &mut out[ol..ol + nv]);
                }
            }
        }
    }

    pub fn apply_bt(&self, q: &DGField) -> Result<DGField> {
        self.check_pressure(q)?;
        let mut out = self.velocity_zeros();
        self.apply_bt_raw(&q.data, &mut out.data);
        Ok(out)
    }

    /// Dirichlet mass-flux functional `r(q_j; t)`.
    pub fn rhs_r_raw(&self, t: f64, out: &mut [f64]) {
        out.fill(0.0);
        if self.config.dirichlet.is_none() {
            return;
        }
        let pt = &self.pre;
        let (nq, np) = (pt.nq, pt.ncoeffs());
        let w = &pt.rule.weights;
        let mut val = vec![0.0; nq];
        for face in self.mesh.faces().iter().filter(|f| f.kind == FaceKind::Dirichlet) {
            for (q, &s) in pt.rule.points.iter().enumerate() {
                let gv = self.dirichlet_at(self.face_point(face, s), t);
                val[q] = w[q] * face.measure * (gv[0] * face.normal[0] + gv[1] * face.normal[1]);
            }
            let c = face.left_cell;
            integrate_face(pt, face.left_side, &val, None, &mut out[c * np..(c + 1) * np]);
        }
    }

    pub fn rhs_r(&self, t: f64) -> DGField {
        let mut out = self.pressure_zeros();
        self.rhs_r_raw(t, &mut out.data);
        out
    }

    // ---------------------------------------------------------------- convection c

    /// Conservative upwind convection residual `c(v, phi_i)` with boundary data at time `t`.
    pub fn apply_c_raw(&self, v: &[f64], t: f64, out: &mut [f64]) {
        out.fill(0.0);
        let mesh = &*self.mesh;
        let tab = &self.vel_conv;
        let (nq, nv) = (tab.nq, tab.ncoeffs());
        let w = &tab.rule.weights;
        let (hx, hy) = (mesh.hx(), mesh.hy());
        let jac = hx * hy;
        let mut scratch = Vec::new();
        let mut ux = vec![0.0; tab.npoints()];
        let mut uy = vec![0.0; tab.npoints()];
        let mut gx = vec![0.0; tab.npoints()];
        let mut gy = vec![0.0; tab.npoints()];
        for cell in 0..mesh.num_cells() {
            let off = cell * 2 * nv;
            crate::basis::eval_cell_values(&v[off..off + nv], tab, &mut ux, &mut scratch);
            crate::basis::eval_cell_values(&v[off + nv..off + 2 * nv], tab, &mut uy, &mut scratch);
            for c in 0..2 {
                for qy in 0..nq {
                    for qx in 0..nq {
                        let q = qy * nq + qx;
                        let wq = -w[qx] * w[qy] * jac;
                        let vi = if c == 0 { ux[q] } else { uy[q] };
                        gx[q] = wq * vi * ux[q] / hx;
                        gy[q] = wq * vi * uy[q] / hy;
                    }
                }
                let o = off + c * nv;
                integrate_cell(tab, None, Some(&gx), Some(&gy), &mut out[o..o + nv], &mut scratch);
            }
        }

        let mut fl = [FaceValues::zeros(nq), FaceValues::zeros(nq)];
        let mut fr = [FaceValues::zeros(nq), FaceValues::zeros(nq)];
        let mut flux = [vec![0.0; nq], vec![0.0; nq]];
        let mut neg = vec![0.0; nq];
        for face in mesh.faces() {
            let n = face.normal;
            for c in 0..2 {
                let o = (face.left_cell * 2 + c) * nv;
                eval_face_into(&v[o..o + nv], tab, face.left_side, &mut fl[c]);
            }
            match face.kind {
                FaceKind::Interior => {
                    let right = face.right_cell.unwrap();
                    let rside = face.right_side.unwrap();
                    for c in 0..2 {
                        let o = (right * 2 + c) * nv;
                        eval_face_into(&v[o..o + nv], tab, rside, &mut fr[c]);
                    }
                    for q in 0..nq {
                        let vl = [fl[0].val[q], fl[1].val[q]];
                        let vr = [fr[0].val[q], fr[1].val[q]];
                        let vn = 0.5 * ((vl[0] + vr[0]) * n[0] + (vl[1] + vr[1]) * n[1]);
                        let wq = w[q] * face.measure;
                        for c in 0..2 {
                            flux[c][q] = wq * (vn.max(0.0) * vl[c] + vn.min(0.0) * vr[c]);
                        }
                    }
                    for c in 0..2 {
                        for q in 0..nq {
                            neg[q] = -flux[c][q];
                        }
                        let ol = (face.left_cell * 2 + c) * nv;
                        let or = (right * 2 + c) * nv;
                        integrate_face(tab, face.left_side, &flux[c], None, &mut out[ol..ol + nv]);
                        integrate_face(tab, rside, &neg, None, &mut out[or..or + nv]);
                    }
                }
                FaceKind::Dirichlet => {
                    for (q, &s) in tab.rule.points.iter().enumerate() {
                        let vl = [fl[0].val[q], fl[1].val[q]];
                        let gv = self.dirichlet_at(self.face_point(face, s), t);
                        let vn = vl[0] * n[0] + vl[1] * n[1];
                        let wq = w[q] * face.measure;
                        for c in 0..2 {
                            flux[c][q] = wq * (vn.max(0.0) * vl[c] + vn.min(0.0) * gv[c]);
                        }
                    }
                    for c in 0..2 {
                        let ol = (face.left_cell * 2 + c) * nv;
                        integrate_face(tab, face.left_side, &flux[c], None, &mut out[ol..ol + nv]);
                    }
                }
            }
        }
    }

    pub fn apply_c(&self, v: &DGField, t: f64) -> Result<DGField> {
        self.check_velocity(v)?;
        let mut out = v.zeros_like();
        self.apply_c_raw(&v.data, t, &mut out.data);
        Ok(out)
    }

    // ---------------------------------------------------------------- pressure Poisson alpha

    /// SIPG pressure-Poisson form with natural boundary conditions on Dirichlet faces.
    pub fn apply_alpha_raw(&self, psi: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        self.sipg_laplacian(&self.pre, 1, self.sigma_p, 1.0, false, psi, out);
    }

    pub fn apply_alpha(&self, psi: &DGField) -> Result<DGField> {
        self.check_pressure(psi)?;
        let mut out = psi.zeros_like();
        self.apply_alpha_raw(&psi.data, &mut out.data);
        Ok(out)
    }

    // ---------------------------------------------------------------- derived operators

    /// Discrete divergence `B_h w` with `(B_h w, q) = -b(w, q) + r(q; t)`.
    pub fn discrete_divergence(&self, w: &DGField, t: f64) -> Result<DGField> {
        let mut rhs = self.apply_b(w)?;
        let r = self.rhs_r(t);
        for (x, ri) in rhs.data.iter_mut().zip(&r.data) {
            *x = -*x + ri;
        }
        Ok(self.inverse_mass_apply(&rhs))
    }

    /// Broken gradient tested against velocity functions: `out[i] = (grad_h psi, phi_i)`.
    pub fn apply_grad_raw(&self, psi: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let mesh = &*self.mesh;
        let (vt, pt) = (&self.vel, &self.pre);
        let (nq, nv, np) = (vt.nq, vt.ncoeffs(), pt.ncoeffs());
        let w = &vt.rule.weights;
        let (hx, hy) = (mesh.hx(), mesh.hy());
        let jac = hx * hy;
        let mut cv = CellValues::zeros(pt.npoints());
        let mut scratch = Vec::new();
        let mut gx = vec![0.0; vt.npoints()];
        let mut gy = vec![0.0; vt.npoints()];
        for cell in 0..mesh.num_cells() {
            eval_cell_into(&psi[cell * np..(cell + 1) * np], pt, &mut cv, &mut scratch);
            for qy in 0..nq {
                for qx in 0..nq {
                    let q = qy * nq + qx;
                    let wq = w[qx] * w[qy] * jac;
                    gx[q] = wq * cv.d_xi[q] / hx;
                    gy[q] = wq * cv.d_eta[q] / hy;
                }
            }
            let off = cell * 2 * nv;
            integrate_cell(vt, Some(&gx), None, None, &mut out[off..off + nv], &mut scratch);
            integrate_cell(vt, Some(&gy), None, None, &mut out[off + nv..off + 2 * nv], &mut scratch);
        }
    }

    /// Per-cell balance of face-average fluxes plus Dirichlet inflow, using
    /// outward normals of each cell.
    pub fn local_mass_residual(&self, v: &DGField, t: f64) -> Result<Vec<f64>> {
        self.check_velocity(v)?;
        let mesh = &*self.mesh;
        let tab = &self.vel;
        let (nq, nv) = (tab.nq, tab.ncoeffs());
        let w = &tab.rule.weights;
        let mut res = vec![0.0; mesh.num_cells()];
        let mut fl = FaceValues::zeros(nq);
        let mut fr = FaceValues::zeros(nq);
        for face in mesh.faces() {
            let comp = axis_component(face.axis);
            match face.kind {
                FaceKind::Interior => {
                    let right = face.right_cell.unwrap();
                    let ol = (face.left_cell * 2 + comp) * nv;
                    let or = (right * 2 + comp) * nv;
                    eval_face_into(&v.data[ol..ol + nv], tab, face.left_side, &mut fl);
                    eval_face_into(&v.data[or..or + nv], tab, face.right_side.unwrap(), &mut fr);
                    let flux: f64 = (0..nq)
                        .map(|q| w[q] * face.measure * 0.5 * (fl.val[q] + fr.val[q]) * face.normal_sign())
                        .sum();
                    res[face.left_cell] += flux;
                    res[right] -= flux;
                }
                FaceKind::Dirichlet => {
                    let flux: f64 = tab
                        .rule
                        .points
                        .iter()
                        .enumerate()
                        .map(|(q, &s)| {
                            let g = self.dirichlet_at(self.face_point(face, s), t);
                            w[q] * face.measure * (g[0] * face.normal[0] + g[1] * face.normal[1])
                        })
                        .sum();
                    res[face.left_cell] += flux;
                }
            }
        }
        Ok(res)
    }

    /// L2 mean of a scalar field.
    pub fn mean(&self, f: &DGField) -> f64 {
        let tab = if f.degree + 1 == self.degree { &self.pre } else { &self.vel };
        let nq = tab.nq;
        let w = &tab.rule.weights;
        let mut vals = vec![0.0; tab.npoints()];
        let mut scratch = Vec::new();
        let mut total = 0.0;
        for cell in 0..f.ncells {
            crate::basis::eval_cell_values(f.block(cell, 0), tab, &mut vals, &mut scratch);
            for qy in 0..nq {
                for qx in 0..nq {
                    total += w[qx] * w[qy] * vals[qy * nq + qx];
                }
            }
        }
        total * self.mesh.cell_measure() / self.mesh.domain_measure()
    }

    /// Removes the L2 mean of a scalar field (nodal bases reproduce constants).
    pub fn remove_mean(&self, f: &mut DGField) {
        let m = self.mean(f);
        f.data.iter_mut().for_each(|x| *x -= m);
    }

    /// Side of `cell` adjacent to `face`, or `None` if not adjacent.
    pub fn side_of(&self, face: &Face, cell: usize) -> Option<Side> {
        if face.left_cell == cell {
            Some(face.left_side)
        } else if face.right_cell == Some(cell) {
            face.right_side
        } else {
            None
        }
    }
}

/// Velocity component normal to faces of the given orientation.
pub(crate) fn axis_component(axis: Axis) -> usize {
    match axis {
        Axis::X => 0,
        Axis::Y => 1,
    }
}
