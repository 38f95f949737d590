//! Dense reference assembly written directly from the variational forms.
//!
//! Independent of the library kernels: own Lagrange basis, hard-coded Gauss
//! tables, own face enumeration, physical-coordinate integrands. Only the
//! degree-of-freedom numbering is shared, since results are compared entrywise.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

/// Gauss-Legendre rule mapped to `[0, 1]`.
pub fn gauss01(n: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w): (Vec<f64>, Vec<f64>) = match n {
        4 => (
            vec![-0.8611363115940526, -0.3399810435848563, 0.3399810435848563, 0.8611363115940526],
            vec![0.3478548451374538, 0.6521451548625461, 0.6521451548625461, 0.3478548451374538],
        ),
        5 => (
            vec![-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831, 0.9061798459386640],
            vec![0.2369268850561891, 0.4786286704993665, 0.5688888888888889, 0.4786286704993665, 0.2369268850561891],
        ),
        6 => (
            vec![
                -0.9324695142031521,
                -0.6612093864662645,
                -0.2386191860831909,
                0.2386191860831909,
                0.6612093864662645,
                0.9324695142031521,
            ],
            vec![
                0.1713244923791704,
                0.3607615730481386,
                0.4679139345726910,
                0.4679139345726910,
                0.3607615730481386,
                0.1713244923791704,
            ],
        ),
        _ => panic!("no table for {n} points"),
    };
    (x.iter().map(|t| 0.5 * (t + 1.0)).collect(), w.iter().map(|w| 0.5 * w).collect())
}

/// Gauss-Lobatto nodes on `[0, 1]` for small degrees.
pub fn gll01(p: usize) -> Vec<f64> {
    match p {
        0 => vec![0.5],
        1 => vec![0.0, 1.0],
        2 => vec![0.0, 0.5, 1.0],
        3 => {
            let a = 0.5 / 5f64.sqrt();
            vec![0.0, 0.5 - a, 0.5 + a, 1.0]
        }
        _ => panic!("no GLL table for degree {p}"),
    }
}

/// Value and derivative of the `i`-th Lagrange polynomial on `nodes`.
pub fn lagrange(nodes: &[f64], i: usize, x: f64) -> (f64, f64) {
    let mut val = 1.0;
    for (j, &xj) in nodes.iter().enumerate() {
        if j != i {
            val *= (x - xj) / (nodes[i] - xj);
        }
    }
    let mut der = 0.0;
    for (k, &xk) in nodes.iter().enumerate() {
        if k == i {
            continue;
        }
        let mut term = 1.0 / (nodes[i] - xk);
        for (j, &xj) in nodes.iter().enumerate() {
            if j != i && j != k {
                term *= (x - xj) / (nodes[i] - xj);
            }
        }
        der += term;
    }
    (val, der)
}

#[derive(Clone, Copy)]
struct Eval {
    /// Local index within the cell block.
    local: usize,
    val: f64,
    dx: f64,
    dy: f64,
}

/// A face seen from one side: cell, reference point generator, jump sign.
struct Trace {
    cell: usize,
    sign: f64,
}

pub struct Oracle {
    pub nx: usize,
    pub ny: usize,
    pub bounds: [f64; 4],
    pub periodic: [bool; 2],
    pub p: usize,
    pub mu: f64,
    pub alpha: f64,
}

/// Quadrature point on a face: both sides' reference coordinates and the physical point.
struct FacePoint {
    w: f64,
    x: [f64; 2],
    left: (f64, f64),
    right: Option<(f64, f64)>,
}

struct OFace {
    left: usize,
    right: Option<usize>,
    normal: [f64; 2],
    /// 0: normal along x, 1: along y.
    axis: usize,
    /// `|E| / |e|`
    h_e: f64,
    measure: f64,
    /// Offset (physical) and direction used to place points.
    x0: [f64; 2],
    left_end: f64,
    right_end: f64,
}

impl Oracle {
    pub fn new(nx: usize, ny: usize, bounds: [f64; 4], periodic: [bool; 2], p: usize, mu: f64) -> Self {
        Self { nx, ny, bounds, periodic, p, mu, alpha: 3.0 }
    }

    fn hx(&self) -> f64 {
        (self.bounds[1] - self.bounds[0]) / self.nx as f64
    }
    fn hy(&self) -> f64 {
        (self.bounds[3] - self.bounds[2]) / self.ny as f64
    }
    fn ncells(&self) -> usize {
        self.nx * self.ny
    }
    fn origin(&self, cell: usize) -> [f64; 2] {
        let (i, j) = (cell % self.nx, cell / self.nx);
        [self.bounds[0] + i as f64 * self.hx(), self.bounds[2] + j as f64 * self.hy()]
    }

    /// All basis functions of degree `deg` of a cell evaluated at reference `(xi, eta)`.
    fn basis(&self, deg: usize, xi: f64, eta: f64) -> Vec<Eval> {
        let nodes = gll01(deg);
        let nb = nodes.len();
        let (hx, hy) = (self.hx(), self.hy());
        let mut out = Vec::with_capacity(nb * nb);
        for iy in 0..nb {
            let (ly, dly) = lagrange(&nodes, iy, eta);
            for ix in 0..nb {
                let (lx, dlx) = lagrange(&nodes, ix, xi);
                out.push(Eval { local: iy * nb + ix, val: lx * ly, dx: dlx * ly / hx, dy: lx * dly / hy });
            }
        }
        out
    }

    fn faces(&self) -> Vec<OFace> {
        let (hx, hy) = (self.hx(), self.hy());
        let (nx, ny) = (self.nx, self.ny);
        let cell = |i: usize, j: usize| j * nx + i;
        let mut faces = Vec::new();
        // vertical faces
        for j in 0..ny {
            for i in 0..=nx {
                let x = self.bounds[0] + i as f64 * hx;
                let y0 = self.bounds[2] + j as f64 * hy;
                let interior = (i > 0 && i < nx) || (self.periodic[0] && i < nx);
                if interior {
                    let l = if i == 0 { cell(nx - 1, j) } else { cell(i - 1, j) };
                    faces.push(OFace {
                        left: l,
                        right: Some(cell(i, j)),
                        normal: [1.0, 0.0],
                        axis: 0,
                        h_e: hx,
                        measure: hy,
                        x0: [x, y0],
                        left_end: 1.0,
                        right_end: 0.0,
                    });
                } else if !self.periodic[0] {
                    let (c, n, e) = if i == 0 { (cell(0, j), -1.0, 0.0) } else { (cell(nx - 1, j), 1.0, 1.0) };
                    faces.push(OFace {
                        left: c,
                        right: None,
                        normal: [n, 0.0],
                        axis: 0,
                        h_e: hx,
                        measure: hy,
                        x0: [x, y0],
                        left_end: e,
                        right_end: 0.0,
                    });
                }
            }
        }
        // horizontal faces
        for j in 0..=ny {
            for i in 0..nx {
                let y = self.bounds[2] + j as f64 * hy;
                let x0 = self.bounds[0] + i as f64 * hx;
                let interior = (j > 0 && j < ny) || (self.periodic[1] && j < ny);
                if interior {
                    let l = if j == 0 { cell(i, ny - 1) } else { cell(i, j - 1) };
                    faces.push(OFace {
                        left: l,
                        right: Some(cell(i, j)),
                        normal: [0.0, 1.0],
                        axis: 1,
                        h_e: hy,
                        measure: hx,
                        x0: [x0, y],
                        left_end: 1.0,
                        right_end: 0.0,
                    });
                } else if !self.periodic[1] {
                    let (c, n, e) = if j == 0 { (cell(i, 0), -1.0, 0.0) } else { (cell(i, ny - 1), 1.0, 1.0) };
                    faces.push(OFace {
                        left: c,
                        right: None,
                        normal: [0.0, n],
                        axis: 1,
                        h_e: hy,
                        measure: hx,
                        x0: [x0, y],
                        left_end: e,
                        right_end: 0.0,
                    });
                }
            }
        }
        faces
    }

    fn face_points(&self, f: &OFace, n: usize) -> Vec<FacePoint> {
        let (s, w) = gauss01(n);
        s.iter()
            .zip(&w)
            .map(|(&s, &w)| {
                let (x, left, right) = if f.axis == 0 {
                    ([f.x0[0], f.x0[1] + s * f.measure], (f.left_end, s), f.right.map(|_| (f.right_end, s)))
                } else {
                    ([f.x0[0] + s * f.measure, f.x0[1]], (s, f.left_end), f.right.map(|_| (s, f.right_end)))
                };
                FacePoint { w: w * f.measure, x, left, right }
            })
            .collect()
    }

    fn nb(deg: usize) -> usize {
        (deg + 1) * (deg + 1)
    }

    fn dof(&self, deg: usize, ncomp: usize, cell: usize, comp: usize, local: usize) -> usize {
        (cell * ncomp + comp) * Self::nb(deg) + local
    }

    pub fn velocity_len(&self) -> usize {
        self.ncells() * 2 * Self::nb(self.p)
    }

    pub fn pressure_len(&self) -> usize {
        self.ncells() * Self::nb(self.p - 1)
    }

    fn mass(&self, deg: usize, ncomp: usize) -> DMatrix<f64> {
        let n = self.ncells() * ncomp * Self::nb(deg);
        let mut m = DMatrix::zeros(n, n);
        let (g, w) = gauss01(6);
        let jac = self.hx() * self.hy();
        for cell in 0..self.ncells() {
            for (qy, &eta) in g.iter().enumerate() {
                for (qx, &xi) in g.iter().enumerate() {
                    let b = self.basis(deg, xi, eta);
                    let wq = w[qx] * w[qy] * jac;
                    for c in 0..ncomp {
                        for bi in &b {
                            for bj in &b {
                                m[(self.dof(deg, ncomp, cell, c, bi.local), self.dof(deg, ncomp, cell, c, bj.local))] +=
                                    wq * bi.val * bj.val;
                            }
                        }
                    }
                }
            }
        }
        m
    }

    pub fn velocity_mass(&self) -> DMatrix<f64> {
        self.mass(self.p, 2)
    }

    pub fn pressure_mass(&self) -> DMatrix<f64> {
        self.mass(self.p - 1, 1)
    }

    /// Symmetric interior penalty Laplacian `K[i][j] = form(phi_j, phi_i)`.
    fn sipg(&self, deg: usize, ncomp: usize, kappa: f64, sigma: f64, boundary: bool) -> DMatrix<f64> {
        let n = self.ncells() * ncomp * Self::nb(deg);
        let mut k = DMatrix::zeros(n, n);
        let (g, w) = gauss01(6);
        let jac = self.hx() * self.hy();
        for cell in 0..self.ncells() {
            for (qy, &eta) in g.iter().enumerate() {
                for (qx, &xi) in g.iter().enumerate() {
                    let b = self.basis(deg, xi, eta);
                    let wq = kappa * w[qx] * w[qy] * jac;
                    for c in 0..ncomp {
                        for bi in &b {
                            for bj in &b {
                                k[(self.dof(deg, ncomp, cell, c, bi.local), self.dof(deg, ncomp, cell, c, bj.local))] +=
                                    wq * (bi.dx * bj.dx + bi.dy * bj.dy);
                            }
                        }
                    }
                }
            }
        }
        for f in self.faces() {
            if f.right.is_none() && !boundary {
                continue;
            }
            let pen = sigma / f.h_e;
            for fp in self.face_points(&f, 6) {
                // (dof, jump coefficient, normal derivative weight)
                let mut entries: Vec<(usize, f64, f64, usize)> = Vec::new();
                let push = |cell: usize, s: f64, avg: f64, (xi, eta): (f64, f64), entries: &mut Vec<(usize, f64, f64, usize)>| {
                    for e in self.basis(deg, xi, eta) {
                        let dn = e.dx * f.normal[0] + e.dy * f.normal[1];
                        for c in 0..ncomp {
                            entries.push((self.dof(deg, ncomp, cell, c, e.local), s * e.val, avg * dn, c));
                        }
                    }
                };
                match (f.right, fp.right) {
                    (Some(r), Some(rp)) => {
                        push(f.left, 1.0, 0.5, fp.left, &mut entries);
                        push(r, -1.0, 0.5, rp, &mut entries);
                    }
                    _ => push(f.left, 1.0, 1.0, fp.left, &mut entries),
                }
                let wq = kappa * fp.w;
                for &(i, ji, di, ci) in &entries {
                    for &(j, jj, dj, cj) in &entries {
                        if ci != cj {
                            continue;
                        }
                        k[(i, j)] += wq * (-dj * ji - di * jj + pen * jj * ji);
                    }
                }
            }
        }
        k
    }

    /// Viscous form with Nitsche boundary terms.
    pub fn a_matrix(&self) -> DMatrix<f64> {
        let p = self.p as f64;
        self.sipg(self.p, 2, self.mu, self.alpha * p * (p + 1.0), true)
    }

    /// Pressure Poisson form without boundary terms.
    pub fn alpha_matrix(&self) -> DMatrix<f64> {
        let p = self.p as f64;
        self.sipg(self.p - 1, 1, 1.0, self.alpha * (p - 1.0) * p, false)
    }

    /// `B[j][i] = b(phi_i, q_j)`.
    pub fn b_matrix(&self) -> DMatrix<f64> {
        let (pv, pp) = (self.p, self.p - 1);
        let mut b = DMatrix::zeros(self.pressure_len(), self.velocity_len());
        let (g, w) = gauss01(6);
        let jac = self.hx() * self.hy();
        for cell in 0..self.ncells() {
            for (qy, &eta) in g.iter().enumerate() {
                for (qx, &xi) in g.iter().enumerate() {
                    let bv = self.basis(pv, xi, eta);
                    let bq = self.basis(pp, xi, eta);
                    let wq = w[qx] * w[qy] * jac;
                    for q in &bq {
                        let row = self.dof(pp, 1, cell, 0, q.local);
                        for v in &bv {
                            b[(row, self.dof(pv, 2, cell, 0, v.local))] -= wq * v.dx * q.val;
                            b[(row, self.dof(pv, 2, cell, 1, v.local))] -= wq * v.dy * q.val;
                        }
                    }
                }
            }
        }
        for f in self.faces() {
            for fp in self.face_points(&f, 6) {
                // [v . n] {q} on interior faces, (v . n) q on the boundary
                let mut vs: Vec<(usize, f64)> = Vec::new();
                let mut qs: Vec<(usize, f64)> = Vec::new();
                let mut side = |cell: usize, s: f64, avg: f64, (xi, eta): (f64, f64)| {
                    for e in self.basis(pv, xi, eta) {
                        for c in 0..2 {
                            vs.push((self.dof(pv, 2, cell, c, e.local), s * e.val * f.normal[c]));
                        }
                    }
                    for e in self.basis(pp, xi, eta) {
                        qs.push((self.dof(pp, 1, cell, 0, e.local), avg * e.val));
                    }
                };
                match (f.right, fp.right) {
                    (Some(r), Some(rp)) => {
                        side(f.left, 1.0, 0.5, fp.left);
                        side(r, -1.0, 0.5, rp);
                    }
                    _ => side(f.left, 1.0, 1.0, fp.left),
                }
                for &(qi, qv) in &qs {
                    for &(vi, vv) in &vs {
                        b[(qi, vi)] += fp.w * vv * qv;
                    }
                }
            }
        }
        b
    }

    /// Velocity of a coefficient vector at a reference point of a cell.
    fn velocity_at(&self, v: &DVector<f64>, cell: usize, xi: f64, eta: f64) -> [f64; 2] {
        let mut u = [0.0; 2];
        for e in self.basis(self.p, xi, eta) {
            for (c, uc) in u.iter_mut().enumerate() {
                *uc += v[self.dof(self.p, 2, cell, c, e.local)] * e.val;
            }
        }
        u
    }

    /// `out[i] = c(v, phi_i)` with face quadrature of `face_points` Gauss points.
    pub fn c_vector(&self, v: &DVector<f64>, g: &dyn Fn([f64; 2]) -> [f64; 2], face_points: usize) -> DVector<f64> {
        let p = self.p;
        let mut out = DVector::zeros(self.velocity_len());
        let (gq, w) = gauss01(6);
        let jac = self.hx() * self.hy();
        for cell in 0..self.ncells() {
            for (qy, &eta) in gq.iter().enumerate() {
                for (qx, &xi) in gq.iter().enumerate() {
                    let u = self.velocity_at(v, cell, xi, eta);
                    let wq = w[qx] * w[qy] * jac;
                    for e in self.basis(p, xi, eta) {
                        for c in 0..2 {
                            // -(u_c u, grad phi)
                            out[self.dof(p, 2, cell, c, e.local)] -= wq * u[c] * (u[0] * e.dx + u[1] * e.dy);
                        }
                    }
                }
            }
        }
        for f in self.faces() {
            for fp in self.face_points(&f, face_points) {
                let vl = self.velocity_at(v, f.left, fp.left.0, fp.left.1);
                let n = f.normal;
                let (flux, right) = match (f.right, fp.right) {
                    (Some(r), Some(rp)) => {
                        let vr = self.velocity_at(v, r, rp.0, rp.1);
                        let vn = 0.5 * ((vl[0] + vr[0]) * n[0] + (vl[1] + vr[1]) * n[1]);
                        ([0, 1].map(|c| vn.max(0.0) * vl[c] + vn.min(0.0) * vr[c]), Some((r, rp)))
                    }
                    _ => {
                        let gv = g(fp.x);
                        let vn = vl[0] * n[0] + vl[1] * n[1];
                        ([0, 1].map(|c| vn.max(0.0) * vl[c] + vn.min(0.0) * gv[c]), None)
                    }
                };
                for e in self.basis(p, fp.left.0, fp.left.1) {
                    for c in 0..2 {
                        out[self.dof(p, 2, f.left, c, e.local)] += fp.w * flux[c] * e.val;
                    }
                }
                if let Some((r, rp)) = right {
                    for e in self.basis(p, rp.0, rp.1) {
                        for c in 0..2 {
                            out[self.dof(p, 2, r, c, e.local)] -= fp.w * flux[c] * e.val;
                        }
                    }
                }
            }
        }
        out
    }

    /// `r(q_j) = sum over boundary faces of (g . n, q_j)`.
    pub fn r_vector(&self, g: &dyn Fn([f64; 2]) -> [f64; 2]) -> DVector<f64> {
        let pp = self.p - 1;
        let mut out = DVector::zeros(self.pressure_len());
        for f in self.faces().iter().filter(|f| f.right.is_none()) {
            for fp in self.face_points(f, 6) {
                let gv = g(fp.x);
                let gn = gv[0] * f.normal[0] + gv[1] * f.normal[1];
                for e in self.basis(pp, fp.left.0, fp.left.1) {
                    out[self.dof(pp, 1, f.left, 0, e.local)] += fp.w * gn * e.val;
                }
            }
        }
        out
    }
}
