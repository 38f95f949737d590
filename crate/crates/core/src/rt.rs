//! Raviart-Thomas spaces `RT^k` on axis-aligned rectangles.
//!
//! The x-component on the reference cell is written as
//! `v_x(x, y) = sum_{a, m} D[a][m] chi_a(x) Lt_m(y) / h_y`, where `Lt_m` is the
//! shifted Legendre polynomial scaled by `2m + 1` (the dual basis of `L_m` on
//! `[0, 1]`) and `chi_a` (degree `k + 1`) is dual to the functionals
//! `{f(0), f(1), int f L_j (j < k)}`. With this choice every coefficient is a
//! degree of freedom:
//!
//! * `D[0][m]`, `D[1][m]` are the physical flux moments `int_e v_x L_m` on the
//!   west/east face (shared between neighbours, giving H(div) conformity);
//! * `D[j + 2][m] = (v_x, L_j(x) L_m(y))_E / h_x` are the interior moments.
//!
//! The y-component is the same with the roles of the directions swapped, so
//! all moment systems are diagonal.

use std::sync::Arc;

use crate::basis::{eval_cell_into, eval_cell_values, eval_face_into, shifted_legendre, CellValues, FaceValues, TensorBasis1D};
use crate::error::{Error, Result};
use crate::field::DGField;
use crate::forms::{axis_component, Discretization};
use crate::mesh::{FaceKind, Side, StructuredMesh2D};

/// One-dimensional building blocks of `RT^k`.
#[derive(Clone, Debug)]
pub struct RTBasis {
    pub k: usize,
    /// `chi_a = sum_b coef[b * (k + 2) + a] L_b`.
    coef: Vec<f64>,
}

impl RTBasis {
    pub fn new(k: usize) -> Self {
        let n = k + 2;
        // F[i][b] = functional_i(L_b)
        let mut f = nalgebra::DMatrix::<f64>::zeros(n, n);
        for b in 0..n {
            f[(0, b)] = if b % 2 == 0 { 1.0 } else { -1.0 };
            f[(1, b)] = 1.0;
        }
        for j in 0..k {
            f[(j + 2, j)] = 1.0 / (2 * j + 1) as f64;
        }
        let inv = f.try_inverse().expect("RT functional matrix is unisolvent");
        let mut coef = vec![0.0; n * n];
        for b in 0..n {
            for a in 0..n {
                coef[b * n + a] = inv[(b, a)];
            }
        }
        Self { k, coef }
    }

    /// Number of normal-direction functions `k + 2`.
    pub fn n_normal(&self) -> usize {
        self.k + 2
    }

    /// `(chi_a(x), chi_a'(x))`
    pub fn chi(&self, a: usize, x: f64) -> (f64, f64) {
        let n = self.k + 2;
        let (mut v, mut d) = (0.0, 0.0);
        for b in 0..n {
            let (l, dl) = shifted_legendre(b, x);
            v += self.coef[b * n + a] * l;
            d += self.coef[b * n + a] * dl;
        }
        (v, d)
    }

    /// Scaled Legendre `(2m + 1) L_m(x)`, dual to `L_m` in `L2(0, 1)`.
    pub fn tangential(m: usize, x: f64) -> f64 {
        (2 * m + 1) as f64 * shifted_legendre(m, x).0
    }
}

/// A field in `RT^k` on a structured mesh.
#[derive(Clone, Debug)]
pub struct RTField {
    pub degree: usize,
    pub mesh: Arc<StructuredMesh2D>,
    /// Flux moments `int_e (v . e_axis) L_m`, `k + 1` per face.
    pub face_moments: Vec<f64>,
    /// Interior coefficients, `2 k (k + 1)` per cell: x block then y block,
    /// each indexed `j * (k + 1) + m`.
    pub interior: Vec<f64>,
}

impl RTField {
    pub fn zeros(mesh: Arc<StructuredMesh2D>, k: usize) -> Self {
        let nf = mesh.faces().len() * (k + 1);
        let ni = mesh.num_cells() * 2 * k * (k + 1);
        Self {
            degree: k,
            mesh,
            face_moments: vec![0.0; nf],
            interior: vec![0.0; ni],
        }
    }

    pub fn face_dofs(&self) -> usize {
        self.degree + 1
    }

    pub fn interior_dofs_per_cell(&self) -> usize {
        2 * self.degree * (self.degree + 1)
    }

    /// Local dimension `2 (k + 1)(k + 2)`.
    pub fn dofs_per_cell(&self) -> usize {
        4 * self.face_dofs() + self.interior_dofs_per_cell()
    }

    /// Reference coefficients `(Dx, Dy)` of a cell, each `(k + 2) x (k + 1)` row-major.
    pub fn cell_coefficients(&self, cell: usize) -> (Vec<f64>, Vec<f64>) {
        let k = self.degree;
        let nk = k + 1;
        let faces = self.mesh.cell_faces(cell);
        let mut dx = vec![0.0; (k + 2) * nk];
        let mut dy = vec![0.0; (k + 2) * nk];
        for m in 0..nk {
            dx[m] = self.face_moments[faces[0] * nk + m];
            dx[nk + m] = self.face_moments[faces[1] * nk + m];
            dy[m] = self.face_moments[faces[2] * nk + m];
            dy[nk + m] = self.face_moments[faces[3] * nk + m];
        }
        let ni = k * nk;
        let base = cell * 2 * ni;
        dx[2 * nk..].copy_from_slice(&self.interior[base..base + ni]);
        dy[2 * nk..].copy_from_slice(&self.interior[base + ni..base + 2 * ni]);
        (dx, dy)
    }

    /// Physical value at reference coordinates of a cell.
    pub fn eval(&self, cell: usize, xi: f64, eta: f64) -> [f64; 2] {
        let basis = RTBasis::new(self.degree);
        self.eval_with(&basis, cell, xi, eta).0
    }

    /// Divergence at reference coordinates of a cell.
    pub fn divergence_at(&self, cell: usize, xi: f64, eta: f64) -> f64 {
        let basis = RTBasis::new(self.degree);
        self.eval_with(&basis, cell, xi, eta).1
    }

    fn eval_with(&self, basis: &RTBasis, cell: usize, xi: f64, eta: f64) -> ([f64; 2], f64) {
        let (dx, dy) = self.cell_coefficients(cell);
        let nk = self.degree + 1;
        let (hx, hy) = (self.mesh.hx(), self.mesh.hy());
        let (mut vx, mut vy, mut dvx, mut dvy) = (0.0, 0.0, 0.0, 0.0);
        for a in 0..basis.n_normal() {
            let (cx, dcx) = basis.chi(a, xi);
            let (cy, dcy) = basis.chi(a, eta);
            for m in 0..nk {
                let tx = RTBasis::tangential(m, eta);
                let ty = RTBasis::tangential(m, xi);
                vx += dx[a * nk + m] * cx * tx;
                dvx += dx[a * nk + m] * dcx * tx;
                vy += dy[a * nk + m] * ty * cy;
                dvy += dy[a * nk + m] * ty * dcy;
            }
        }
        ([vx / hy, vy / hx], (dvx + dvy) / (hx * hy))
    }

    pub fn axpy(&mut self, a: f64, x: &RTField) {
        crate::field::axpy(a, &x.face_moments, &mut self.face_moments);
        crate::field::axpy(a, &x.interior, &mut self.interior);
    }
}

/// Legendre values `L_m(x_q)` for `m <= k` at the given points.
fn legendre_table(k: usize, pts: &[f64]) -> Vec<f64> {
    let nq = pts.len();
    let mut t = vec![0.0; (k + 1) * nq];
    for m in 0..=k {
        for (q, &x) in pts.iter().enumerate() {
            t[m * nq + q] = shifted_legendre(m, x).0;
        }
    }
    t
}

/// Shared moment assembly: `w` contributes the velocity reconstruction and
/// `psi` the pressure-flux reconstruction. Both are linear, so the combined
/// reconstruction is a single pass.
fn assemble(disc: &Discretization, k: usize, w: Option<(&DGField, f64)>, psi: Option<&DGField>) -> RTField {
    let mesh = disc.mesh.clone();
    let vt = disc.velocity_table();
    let pt = disc.pressure_table();
    let rule = &vt.rule;
    let nq = rule.len();
    let wts = &rule.weights;
    let leg = legendre_table(k, &rule.points);
    let nk = k + 1;
    let (nv, np) = (vt.ncoeffs(), pt.ncoeffs());
    let sigma_p = disc.sigma_pressure();
    let mut out = RTField::zeros(mesh.clone(), k);

    let mut fl = FaceValues::zeros(nq);
    let mut fr = FaceValues::zeros(nq);
    let mut integrand = vec![0.0; nq];
    // face jump of psi, cached for the interior lifting term
    let nfaces = mesh.faces().len();
    let mut psi_jump = vec![0.0; if psi.is_some() { nfaces * nq } else { 0 }];
    for (fid, face) in mesh.faces().iter().enumerate() {
        integrand.fill(0.0);
        let comp = axis_component(face.axis);
        if let Some((wf, t)) = w {
            match face.kind {
                FaceKind::Interior => {
                    let right = face.right_cell.unwrap();
                    eval_face_into(&wf.data[(face.left_cell * 2 + comp) * nv..][..nv], vt, face.left_side, &mut fl);
                    eval_face_into(&wf.data[(right * 2 + comp) * nv..][..nv], vt, face.right_side.unwrap(), &mut fr);
                    for q in 0..nq {
                        integrand[q] += 0.5 * (fl.val[q] + fr.val[q]);
                    }
                }
                FaceKind::Dirichlet => {
                    for q in 0..nq {
                        let g = disc.dirichlet_at(disc.face_point(face, rule.points[q]), t);
                        integrand[q] += g[comp];
                    }
                }
            }
        }
        if let (Some(ps), FaceKind::Interior) = (psi, face.kind) {
            let right = face.right_cell.unwrap();
            eval_face_into(&ps.data[face.left_cell * np..][..np], pt, face.left_side, &mut fl);
            eval_face_into(&ps.data[right * np..][..np], pt, face.right_side.unwrap(), &mut fr);
            let h = mesh.normal_extent(face.axis);
            let pen = sigma_p / mesh.face_h_e(face);
            for q in 0..nq {
                let jump = fl.val[q] - fr.val[q];
                let avg_dn = 0.5 * (fl.d_normal[q] + fr.d_normal[q]) / h;
                integrand[q] += -avg_dn + pen * jump;
                psi_jump[fid * nq + q] = jump;
            }
        }
        for m in 0..nk {
            out.face_moments[fid * nk + m] =
                (0..nq).map(|q| wts[q] * face.measure * integrand[q] * leg[m * nq + q]).sum();
        }
    }

    if k == 0 {
        return out;
    }
    let (hx, hy) = (mesh.hx(), mesh.hy());
    let jac = hx * hy;
    let ni = k * nk;
    let npts = nq * nq;
    let mut fx = vec![0.0; npts];
    let mut fy = vec![0.0; npts];
    let mut wx = vec![0.0; npts];
    let mut cv = CellValues::zeros(npts);
    let mut scratch = Vec::new();
    for cell in 0..mesh.num_cells() {
        fx.fill(0.0);
        fy.fill(0.0);
        if let Some((wf, _)) = w {
            eval_cell_values(&wf.data[cell * 2 * nv..][..nv], vt, &mut wx, &mut scratch);
            crate::field::axpy(1.0, &wx, &mut fx);
            eval_cell_values(&wf.data[(cell * 2 + 1) * nv..][..nv], vt, &mut wx, &mut scratch);
            crate::field::axpy(1.0, &wx, &mut fy);
        }
        if let Some(ps) = psi {
            eval_cell_into(&ps.data[cell * np..][..np], pt, &mut cv, &mut scratch);
            for q in 0..npts {
                fx[q] -= cv.d_xi[q] / hx;
                fy[q] -= cv.d_eta[q] / hy;
            }
        }
        let base = cell * 2 * ni;
        // x block: test L_j(x) L_m(y); y block: test L_m(x) L_j(y)
        for j in 0..k {
            for m in 0..nk {
                let (mut sx, mut sy) = (0.0, 0.0);
                for qy in 0..nq {
                    for qx in 0..nq {
                        let wq = wts[qx] * wts[qy] * jac;
                        sx += wq * fx[qy * nq + qx] * leg[j * nq + qx] * leg[m * nq + qy];
                        sy += wq * fy[qy * nq + qx] * leg[m * nq + qx] * leg[j * nq + qy];
                    }
                }
                out.interior[base + j * nk + m] = sx;
                out.interior[base + ni + j * nk + m] = sy;
            }
        }
        if psi.is_some() {
            // half-weighted jump lifting: 1/2 sum_e int (r . n_e) [psi]
            let faces = mesh.cell_faces(cell);
            for (slot, side) in [Side::West, Side::East, Side::South, Side::North].into_iter().enumerate() {
                let fid = faces[slot];
                let face = mesh.face(fid);
                if face.kind != FaceKind::Interior {
                    continue;
                }
                let block = if slot < 2 { 0 } else { ni };
                for j in 0..k {
                    // L_j at the side's end point: (+1) at 1, (-1)^j at 0
                    let lj = if side.end() == 1 { 1.0 } else if j % 2 == 0 { 1.0 } else { -1.0 };
                    for m in 0..nk {
                        let s: f64 = (0..nq)
                            .map(|q| wts[q] * face.measure * leg[m * nq + q] * psi_jump[fid * nq + q])
                            .sum();
                        out.interior[base + block + j * nk + m] += 0.5 * lj * s;
                    }
                }
            }
        }
        for j in 0..ni {
            out.interior[base + j] /= hx;
            out.interior[base + ni + j] /= hy;
        }
    }
    out
}

fn check_psi(disc: &Discretization, psi: &DGField) -> Result<()> {
    if psi.ncomp != 1 || psi.degree + 1 != disc.degree() || psi.len() != disc.pressure_len() {
        return Err(Error::InvalidDegree(format!(
            "potential must be a scalar field of degree {}",
            disc.pressure_degree()
        )));
    }
    Ok(())
}

fn check_w(disc: &Discretization, w: &DGField) -> Result<()> {
    if w.ncomp != 2 || w.degree != disc.degree() || w.len() != disc.velocity_len() {
        return Err(Error::InvalidDegree(format!(
            "velocity must be a vector field of degree {}",
            disc.degree()
        )));
    }
    Ok(())
}

/// Reconstruction `G_h psi` of `-grad psi` in `RT^k`, `k <= p - 1`.
pub fn reconstruct_pressure_flux(disc: &Discretization, psi: &DGField, k: usize) -> Result<RTField> {
    check_psi(disc, psi)?;
    if k > disc.pressure_degree() {
        return Err(Error::InvalidDegree(format!(
            "RT degree {k} exceeds pressure degree {}",
            disc.pressure_degree()
        )));
    }
    Ok(assemble(disc, k, None, Some(psi)))
}

/// Divergence-preserving velocity reconstruction `Pi w` in `RT^{p-1}`.
pub fn reconstruct_velocity(disc: &Discretization, w: &DGField, t: f64) -> Result<RTField> {
    check_w(disc, w)?;
    Ok(assemble(disc, disc.degree() - 1, Some((w, t)), None))
}

/// Fused `Pi w + G_h psi` in `RT^{p-1}`.
pub fn reconstruct_helmholtz_flux(disc: &Discretization, w: &DGField, psi: &DGField, t: f64) -> Result<RTField> {
    check_w(disc, w)?;
    check_psi(disc, psi)?;
    Ok(assemble(disc, disc.degree() - 1, Some((w, t)), Some(psi)))
}

/// Exact divergence as a nodal field of degree `k`.
pub fn rt_divergence(v: &RTField) -> DGField {
    let basis = RTBasis::new(v.degree);
    let nodes = TensorBasis1D::new(v.degree).nodes().to_vec();
    let nb = nodes.len();
    let mut out = DGField::scalar(&v.mesh, v.degree);
    for cell in 0..v.mesh.num_cells() {
        let blk = out.block_mut(cell, 0);
        for iy in 0..nb {
            for ix in 0..nb {
                blk[iy * nb + ix] = v.eval_with(&basis, cell, nodes[ix], nodes[iy]).1;
            }
        }
    }
    out
}

/// Exact inclusion `RT^k -> (Q^p)^2` by nodal interpolation; needs `k <= p - 1`.
pub fn rt_embed_to_dg(v: &RTField, p: usize) -> Result<DGField> {
    if v.degree + 1 > p {
        return Err(Error::InvalidDegree(format!(
            "RT^{} is not contained in Q^{p}",
            v.degree
        )));
    }
    let k = v.degree;
    let nk = k + 1;
    let basis = RTBasis::new(k);
    let nodes = TensorBasis1D::new(p).nodes().to_vec();
    let nb = nodes.len();
    // tables at the nodes
    let chi: Vec<f64> = (0..k + 2).flat_map(|a| nodes.iter().map(move |&x| (a, x))).map(|(a, x)| basis.chi(a, x).0).collect();
    let tan: Vec<f64> = (0..nk).flat_map(|m| nodes.iter().map(move |&x| RTBasis::tangential(m, x))).collect();
    let (hx, hy) = (v.mesh.hx(), v.mesh.hy());
    let mut out = DGField::vector(&v.mesh, p);
    for cell in 0..v.mesh.num_cells() {
        let (dx, dy) = v.cell_coefficients(cell);
        for iy in 0..nb {
            for ix in 0..nb {
                let (mut vx, mut vy) = (0.0, 0.0);
                for a in 0..k + 2 {
                    for m in 0..nk {
                        vx += dx[a * nk + m] * chi[a * nb + ix] * tan[m * nb + iy];
                        vy += dy[a * nk + m] * tan[m * nb + ix] * chi[a * nb + iy];
                    }
                }
                out.block_mut(cell, 0)[iy * nb + ix] = vx / hy;
                out.block_mut(cell, 1)[iy * nb + ix] = vy / hx;
            }
        }
    }
    Ok(out)
}
