//! Tensor-product Gauss-Lobatto-Lagrange bases, Gauss-Legendre rules and
//! sum-factorized evaluation kernels.
//!
//! Node and point generators work on `[-1, 1]`; everything downstream lives on
//! the reference interval `[0, 1]`. Cell coefficients are stored with the x
//! index running fastest: `c[iy * (p + 1) + ix]`.

use crate::error::{check_len, Error, Result};
use crate::mesh::Side;

const NEWTON_TOL: f64 = 1e-15;

/// Legendre polynomial `P_n` and its derivative at `x` in `[-1, 1]`.
pub fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    // derivative from the standard identity, endpoint-safe form
    let dp = if (x.abs() - 1.0).abs() < 1e-14 {
        let s = if x > 0.0 { 1.0 } else { (-1.0f64).powi(n as i32 + 1) };
        s * (n * (n + 1)) as f64 / 2.0
    } else {
        n as f64 * (x * p1 - p0) / (x * x - 1.0)
    };
    (p1, dp)
}

/// Shifted Legendre polynomial `L_m(x) = P_m(2x - 1)` on `[0, 1]` and its derivative.
pub fn shifted_legendre(m: usize, x: f64) -> (f64, f64) {
    let (p, dp) = legendre(m, 2.0 * x - 1.0);
    (p, 2.0 * dp)
}

/// Gauss-Lobatto nodes of degree `p` on `[-1, 1]`: the endpoints plus the
/// roots of `P_p'`.
pub fn gll_nodes(p: usize) -> Result<Vec<f64>> {
    if p == 0 {
        return Err(Error::InvalidDegree(
            "Gauss-Lobatto nodes need p >= 1".into(),
        ));
    }
    let n = p + 1;
    let mut x = vec![0.0; n];
    x[0] = -1.0;
    x[p] = 1.0;
    for i in 1..p {
        // Chebyshev-Gauss-Lobatto initial guess, Newton on P_p'
        let mut xi = -(std::f64::consts::PI * i as f64 / p as f64).cos();
        for _ in 0..100 {
            let (pp, dp) = legendre(p, xi);
            // P_p'' from the Legendre ODE: (1-x^2) P'' = 2x P' - p(p+1) P
            let d2 = (2.0 * xi * dp - (p * (p + 1)) as f64 * pp) / (1.0 - xi * xi);
            let dx = dp / d2;
            xi -= dx;
            if dx.abs() < NEWTON_TOL {
                break;
            }
        }
        x[i] = xi;
    }
    // enforce exact symmetry
    for i in 0..n / 2 {
        let s = 0.5 * (x[p - i] - x[i]);
        x[i] = -s;
        x[p - i] = s;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    Ok(x)
}

/// A one-dimensional quadrature rule.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule1D {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule1D {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Affine image of a rule on `[-1, 1]` in `[0, 1]`.
    pub fn to_unit(&self) -> Self {
        Self {
            points: self.points.iter().map(|x| 0.5 * (x + 1.0)).collect(),
            weights: self.weights.iter().map(|w| 0.5 * w).collect(),
        }
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Result<QuadratureRule1D> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "Gauss-Legendre rule needs n >= 1".into(),
        ));
    }
    let mut points = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < NEWTON_TOL {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        points[i] = -x;
        points[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        points[n / 2] = 0.0;
    }
    Ok(QuadratureRule1D { points, weights })
}

/// Gauss-Legendre rule mapped to `[0, 1]`.
pub fn unit_gauss(n: usize) -> Result<QuadratureRule1D> {
    Ok(gauss_legendre(n)?.to_unit())
}

/// Lagrange basis of degree `p` on the GLL nodes of `[0, 1]`.
///
/// Degree 0 is the constant function, with its node at the midpoint.
#[derive(Clone, Debug)]
pub struct TensorBasis1D {
    degree: usize,
    nodes: Vec<f64>,
}

impl TensorBasis1D {
    pub fn new(degree: usize) -> Self {
        let nodes = if degree == 0 {
            vec![0.5]
        } else {
            gll_nodes(degree)
                .expect("degree >= 1")
                .into_iter()
                .map(|x| 0.5 * (x + 1.0))
                .collect()
        };
        Self { degree, nodes }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.degree + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn value(&self, i: usize, x: f64) -> f64 {
        let xi = self.nodes[i];
        self.nodes
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &xj)| (x - xj) / (xi - xj))
            .product()
    }

    pub fn derivative(&self, i: usize, x: f64) -> f64 {
        let xi = self.nodes[i];
        let mut sum = 0.0;
        for (k, &xk) in self.nodes.iter().enumerate() {
            if k == i {
                continue;
            }
            let mut term = 1.0 / (xi - xk);
            for (j, &xj) in self.nodes.iter().enumerate() {
                if j != i && j != k {
                    term *= (x - xj) / (xi - xj);
                }
            }
            sum += term;
        }
        sum
    }

    /// `D[j][i] = phi_i'(x_j)`: maps nodal values to nodal derivatives.
    pub fn differentiation_matrix(&self) -> Vec<Vec<f64>> {
        self.nodes
            .iter()
            .map(|&xj| (0..self.len()).map(|i| self.derivative(i, xj)).collect())
            .collect()
    }

    /// Nodal coefficients of the interpolant of `f`.
    pub fn interpolate(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|&x| f(x)).collect()
    }
}

/// Values and derivatives of a 1D basis at the points of a rule and at the
/// interval endpoints.
#[derive(Clone, Debug)]
pub struct BasisTable {
    pub nb: usize,
    pub nq: usize,
    /// `val[i * nq + q] = phi_i(x_q)`
    pub val: Vec<f64>,
    pub der: Vec<f64>,
    /// Values at `x = 0` and `x = 1`.
    pub end_val: [Vec<f64>; 2],
    pub end_der: [Vec<f64>; 2],
    pub rule: QuadratureRule1D,
}

impl BasisTable {
    pub fn new(basis: &TensorBasis1D, rule: &QuadratureRule1D) -> Self {
        let nb = basis.len();
        let nq = rule.len();
        let mut val = vec![0.0; nb * nq];
        let mut der = vec![0.0; nb * nq];
        for i in 0..nb {
            for (q, &x) in rule.points.iter().enumerate() {
                val[i * nq + q] = basis.value(i, x);
                der[i * nq + q] = basis.derivative(i, x);
            }
        }
        let ends = |f: &dyn Fn(usize, f64) -> f64, x: f64| (0..nb).map(|i| f(i, x)).collect();
        let v = |i, x| basis.value(i, x);
        let d = |i, x| basis.derivative(i, x);
        Self {
            nb,
            nq,
            val,
            der,
            end_val: [ends(&v, 0.0), ends(&v, 1.0)],
            end_der: [ends(&d, 0.0), ends(&d, 1.0)],
            rule: rule.clone(),
        }
    }

    pub fn ncoeffs(&self) -> usize {
        self.nb * self.nb
    }

    pub fn npoints(&self) -> usize {
        self.nq * self.nq
    }
}

/// Values and reference gradients on the tensor quadrature grid of a cell,
/// stored with the x point index running fastest.
#[derive(Clone, Debug, Default)]
pub struct CellValues {
    pub val: Vec<f64>,
    pub d_xi: Vec<f64>,
    pub d_eta: Vec<f64>,
}

impl CellValues {
    pub fn zeros(npoints: usize) -> Self {
        Self {
            val: vec![0.0; npoints],
            d_xi: vec![0.0; npoints],
            d_eta: vec![0.0; npoints],
        }
    }
}

/// `out[b * nq + q] = sum_a c[b * nb + a] * table[a * nq + q]`
#[inline]
fn contract_x(c: &[f64], table: &[f64], nb: usize, nq: usize, out: &mut [f64]) {
    for b in 0..nb {
        let row = &mut out[b * nq..(b + 1) * nq];
        row.fill(0.0);
        for a in 0..nb {
            let ca = c[b * nb + a];
            if ca == 0.0 {
                continue;
            }
            let t = &table[a * nq..(a + 1) * nq];
            for q in 0..nq {
                row[q] += ca * t[q];
            }
        }
    }
}

/// `out[qy * nq + qx] = sum_b tmp[b * nq + qx] * table[b * nq + qy]`
#[inline]
fn contract_y(tmp: &[f64], table: &[f64], nb: usize, nq: usize, out: &mut [f64]) {
    out.fill(0.0);
    for b in 0..nb {
        let src = &tmp[b * nq..(b + 1) * nq];
        for qy in 0..nq {
            let t = table[b * nq + qy];
            if t == 0.0 {
                continue;
            }
            let dst = &mut out[qy * nq..(qy + 1) * nq];
            for qx in 0..nq {
                dst[qx] += t * src[qx];
            }
        }
    }
}

/// Sum-factorized evaluation of values and reference gradients.
pub fn eval_cell_into(coeffs: &[f64], tab: &BasisTable, out: &mut CellValues, scratch: &mut Vec<f64>) {
    let (nb, nq) = (tab.nb, tab.nq);
    scratch.resize(2 * nb * nq, 0.0);
    let (t0, t1) = scratch.split_at_mut(nb * nq);
    contract_x(coeffs, &tab.val, nb, nq, t0);
    contract_x(coeffs, &tab.der, nb, nq, t1);
    contract_y(t0, &tab.val, nb, nq, &mut out.val);
    contract_y(t1, &tab.val, nb, nq, &mut out.d_xi);
    contract_y(t0, &tab.der, nb, nq, &mut out.d_eta);
}

/// Checked sum-factorized evaluation of a single cell polynomial.
pub fn eval_cell(coeffs: &[f64], tab: &BasisTable) -> Result<CellValues> {
    check_len(tab.ncoeffs(), coeffs.len())?;
    let mut out = CellValues::zeros(tab.npoints());
    let mut scratch = Vec::new();
    eval_cell_into(coeffs, tab, &mut out, &mut scratch);
    Ok(out)
}

/// Values only.
pub fn eval_cell_values(coeffs: &[f64], tab: &BasisTable, out: &mut [f64], scratch: &mut Vec<f64>) {
    let (nb, nq) = (tab.nb, tab.nq);
    scratch.resize(nb * nq, 0.0);
    contract_x(coeffs, &tab.val, nb, nq, scratch);
    contract_y(scratch, &tab.val, nb, nq, out);
}

/// Transpose of `eval_cell`: `out[i] += sum_q (v_q phi_i + gx_q d_xi phi_i + gy_q d_eta phi_i)`.
/// Quadrature weights must already be folded into the inputs.
pub fn integrate_cell(
    tab: &BasisTable,
    val: Option<&[f64]>,
    d_xi: Option<&[f64]>,
    d_eta: Option<&[f64]>,
    out: &mut [f64],
    scratch: &mut Vec<f64>,
) {
    let (nb, nq) = (tab.nb, tab.nq);
    scratch.resize(2 * nb * nq, 0.0);
    let (tv, td) = scratch.split_at_mut(nb * nq);
    // tv[b * nq + qx] = sum_qy f[qy, qx] * phi_b(qy)
    let reduce_y = |f: &[f64], table: &[f64], dst: &mut [f64], accumulate: bool| {
        if !accumulate {
            dst.fill(0.0);
        }
        for b in 0..nb {
            let row = &mut dst[b * nq..(b + 1) * nq];
            for qy in 0..nq {
                let t = table[b * nq + qy];
                let src = &f[qy * nq..(qy + 1) * nq];
                for qx in 0..nq {
                    row[qx] += t * src[qx];
                }
            }
        }
    };
    // values and d_xi both use phi in y
    tv.fill(0.0);
    td.fill(0.0);
    if let Some(v) = val {
        reduce_y(v, &tab.val, tv, true);
    }
    if let Some(gx) = d_xi {
        reduce_y(gx, &tab.val, td, true);
    }
    let reduce_x = |src: &[f64], table: &[f64], out: &mut [f64]| {
        for b in 0..nb {
            let row = &src[b * nq..(b + 1) * nq];
            for a in 0..nb {
                let t = &table[a * nq..(a + 1) * nq];
                let mut s = 0.0;
                for q in 0..nq {
                    s += row[q] * t[q];
                }
                out[b * nb + a] += s;
            }
        }
    };
    if val.is_some() {
        reduce_x(tv, &tab.val, out);
    }
    if d_xi.is_some() {
        reduce_x(td, &tab.der, out);
    }
    if let Some(gy) = d_eta {
        reduce_y(gy, &tab.der, tv, false);
        reduce_x(tv, &tab.val, out);
    }
}

/// Trace data on one side of a cell at the face quadrature points.
#[derive(Clone, Debug, Default)]
pub struct FaceValues {
    pub val: Vec<f64>,
    /// Reference derivative along the side's axis (positive axis direction).
    pub d_normal: Vec<f64>,
    /// Reference derivative along the face.
    pub d_tangent: Vec<f64>,
}

impl FaceValues {
    pub fn zeros(nq: usize) -> Self {
        Self {
            val: vec![0.0; nq],
            d_normal: vec![0.0; nq],
            d_tangent: vec![0.0; nq],
        }
    }
}

/// Evaluates the trace of a cell polynomial on one of its sides.
pub fn eval_face_into(coeffs: &[f64], tab: &BasisTable, side: Side, out: &mut FaceValues) {
    let (nb, nq) = (tab.nb, tab.nq);
    let e = side.end();
    let ev = &tab.end_val[e];
    let ed = &tab.end_der[e];
    out.val.iter_mut().for_each(|v| *v = 0.0);
    out.d_normal.iter_mut().for_each(|v| *v = 0.0);
    out.d_tangent.iter_mut().for_each(|v| *v = 0.0);
    match side {
        Side::West | Side::East => {
            // collapse x, then run along y
            for b in 0..nb {
                let (mut cv, mut cd) = (0.0, 0.0);
                for a in 0..nb {
                    let c = coeffs[b * nb + a];
                    cv += c * ev[a];
                    cd += c * ed[a];
                }
                for q in 0..nq {
                    let phi = tab.val[b * nq + q];
                    out.val[q] += cv * phi;
                    out.d_normal[q] += cd * phi;
                    out.d_tangent[q] += cv * tab.der[b * nq + q];
                }
            }
        }
        Side::South | Side::North => {
            for a in 0..nb {
                let (mut cv, mut cd) = (0.0, 0.0);
                for b in 0..nb {
                    let c = coeffs[b * nb + a];
                    cv += c * ev[b];
                    cd += c * ed[b];
                }
                for q in 0..nq {
                    let phi = tab.val[a * nq + q];
                    out.val[q] += cv * phi;
                    out.d_normal[q] += cd * phi;
                    out.d_tangent[q] += cv * tab.der[a * nq + q];
                }
            }
        }
    }
}

/// Checked trace evaluation.
pub fn eval_face(coeffs: &[f64], tab: &BasisTable, side: Side) -> Result<FaceValues> {
    check_len(tab.ncoeffs(), coeffs.len())?;
    let mut out = FaceValues::zeros(tab.nq);
    eval_face_into(coeffs, tab, side, &mut out);
    Ok(out)
}

/// Transpose of the trace evaluation: `out[i] += sum_q (v_q phi_i + dn_q d_n phi_i)`
/// with weights folded into the inputs.
pub fn integrate_face(tab: &BasisTable, side: Side, val: &[f64], d_normal: Option<&[f64]>, out: &mut [f64]) {
    let (nb, nq) = (tab.nb, tab.nq);
    let e = side.end();
    let ev = &tab.end_val[e];
    let ed = &tab.end_der[e];
    for t in 0..nb {
        // tangential basis index t
        let mut sv = 0.0;
        let mut sd = 0.0;
        for q in 0..nq {
            let phi = tab.val[t * nq + q];
            sv += val[q] * phi;
            if let Some(dn) = d_normal {
                sd += dn[q] * phi;
            }
        }
        for n in 0..nb {
            let contrib = sv * ev[n] + sd * ed[n];
            if contrib == 0.0 {
                continue;
            }
            let idx = match side {
                Side::West | Side::East => t * nb + n,
                Side::South | Side::North => n * nb + t,
            };
            out[idx] += contrib;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gll_small_degrees() {
        assert_eq!(gll_nodes(1).unwrap(), vec![-1.0, 1.0]);
        assert_eq!(gll_nodes(2).unwrap(), vec![-1.0, 0.0, 1.0]);
        let n3 = gll_nodes(3).unwrap();
        let s = 1.0 / 5f64.sqrt();
        for (a, b) in n3.iter().zip([-1.0, -s, s, 1.0]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(gll_nodes(0).is_err());
    }

    #[test]
    fn gll_nodes_are_roots_of_legendre_derivative() {
        // bisection oracle on P_p' between consecutive Chebyshev-like brackets
        for p in 2..=10 {
            let nodes = gll_nodes(p).unwrap();
            for w in nodes.windows(2) {
                assert!(w[0] < w[1]);
            }
            for &x in &nodes[1..p] {
                assert!(legendre(p, x).1.abs() < 1e-12);
            }
            for i in 0..=p {
                assert!((nodes[i] + nodes[p - i]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn gauss_small_rules() {
        let r = gauss_legendre(1).unwrap();
        assert_eq!(r.points, vec![0.0]);
        assert!((r.weights[0] - 2.0).abs() < 1e-15);
        let r = gauss_legendre(2).unwrap();
        let s = 1.0 / 3f64.sqrt();
        assert!((r.points[0] + s).abs() < 1e-15 && (r.points[1] - s).abs() < 1e-15);
        assert!((r.weights[0] - 1.0).abs() < 1e-15 && (r.weights[1] - 1.0).abs() < 1e-15);
        let r = gauss_legendre(3).unwrap();
        assert!((r.integrate(|x| x.powi(4)) - 0.4).abs() < 1e-14);
    }

    #[test]
    fn gauss_exactness_on_monomials() {
        for n in 1..=12 {
            let r = gauss_legendre(n).unwrap();
            assert!(r.weights.iter().all(|&w| w > 0.0));
            assert!((r.weights.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            for k in 0..=(2 * n - 1) {
                let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
                assert!((r.integrate(|x| x.powi(k as i32)) - exact).abs() < 1e-13, "n={n} k={k}");
            }
            if n >= 2 {
                let u = r.to_unit();
                assert!((u.integrate(|x| x * x) - 1.0 / 3.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn lagrange_property_and_partition_of_unity() {
        for p in 0..=8 {
            let b = TensorBasis1D::new(p);
            for i in 0..=p {
                for j in 0..=p {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((b.value(i, b.nodes()[j]) - expect).abs() < 1e-13);
                }
            }
            for k in 0..20 {
                let x = k as f64 / 19.0;
                let s: f64 = (0..=p).map(|i| b.value(i, x)).sum();
                assert!((s - 1.0).abs() < 1e-13);
                let ds: f64 = (0..=p).map(|i| b.derivative(i, x)).sum();
                assert!(ds.abs() < 1e-11);
            }
        }
    }

    #[test]
    fn differentiation_matrix_is_exact_on_polynomials() {
        for p in 1..=8 {
            let b = TensorBasis1D::new(p);
            let d = b.differentiation_matrix();
            for deg in 0..=p {
                let f = b.interpolate(|x| x.powi(deg as i32));
                for (j, &xj) in b.nodes().iter().enumerate() {
                    let got: f64 = d[j].iter().zip(&f).map(|(a, b)| a * b).sum();
                    let exact = if deg == 0 { 0.0 } else { deg as f64 * xj.powi(deg as i32 - 1) };
                    assert!((got - exact).abs() < 1e-12 * (1.0 + exact.abs()), "p={p} deg={deg}");
                }
            }
        }
    }

    fn naive_cell(coeffs: &[f64], b: &TensorBasis1D, rule: &QuadratureRule1D) -> CellValues {
        let nq = rule.len();
        let nb = b.len();
        let mut out = CellValues::zeros(nq * nq);
        for qy in 0..nq {
            for qx in 0..nq {
                let (x, y) = (rule.points[qx], rule.points[qy]);
                for iy in 0..nb {
                    for ix in 0..nb {
                        let c = coeffs[iy * nb + ix];
                        out.val[qy * nq + qx] += c * b.value(ix, x) * b.value(iy, y);
                        out.d_xi[qy * nq + qx] += c * b.derivative(ix, x) * b.value(iy, y);
                        out.d_eta[qy * nq + qx] += c * b.value(ix, x) * b.derivative(iy, y);
                    }
                }
            }
        }
        out
    }

    #[test]
    fn eval_cell_constant_and_bilinear() {
        let b = TensorBasis1D::new(3);
        let rule = unit_gauss(4).unwrap();
        let tab = BasisTable::new(&b, &rule);
        let ones = vec![1.0; 16];
        let v = eval_cell(&ones, &tab).unwrap();
        assert!(v.val.iter().all(|x| (x - 1.0).abs() < 1e-13));
        assert!(v.d_xi.iter().chain(&v.d_eta).all(|x| x.abs() < 1e-12));

        let mut c = vec![0.0; 16];
        for iy in 0..4 {
            for ix in 0..4 {
                c[iy * 4 + ix] = b.nodes()[ix] * b.nodes()[iy];
            }
        }
        let v = eval_cell(&c, &tab).unwrap();
        for qy in 0..4 {
            for qx in 0..4 {
                let (x, y) = (rule.points[qx], rule.points[qy]);
                assert!((v.val[qy * 4 + qx] - x * y).abs() < 1e-13);
            }
        }
        assert!(eval_cell(&c[..15], &tab).is_err());
    }

    #[test]
    fn sum_factorization_matches_naive_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for p in 1..=8 {
            let b = TensorBasis1D::new(p);
            for nq in [p + 1, p + 2] {
                let rule = unit_gauss(nq).unwrap();
                let tab = BasisTable::new(&b, &rule);
                let c: Vec<f64> = (0..tab.ncoeffs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let fast = eval_cell(&c, &tab).unwrap();
                let slow = naive_cell(&c, &b, &rule);
                let scale = 1.0 + slow.val.iter().map(|x| x.abs()).fold(0.0, f64::max);
                for (a, s) in [(&fast.val, &slow.val), (&fast.d_xi, &slow.d_xi), (&fast.d_eta, &slow.d_eta)] {
                    for (x, y) in a.iter().zip(s.iter()) {
                        assert!((x - y).abs() < 1e-13 * scale * (p * p) as f64, "p={p}");
                    }
                }
            }
        }
    }

    #[test]
    fn integrate_cell_is_transpose_of_eval() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for p in 1..=6 {
            let b = TensorBasis1D::new(p);
            let tab = BasisTable::new(&b, &unit_gauss(p + 2).unwrap());
            let c: Vec<f64> = (0..tab.ncoeffs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let f: Vec<Vec<f64>> = (0..3)
                .map(|_| (0..tab.npoints()).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let e = eval_cell(&c, &tab).unwrap();
            let lhs: f64 = (0..tab.npoints())
                .map(|q| e.val[q] * f[0][q] + e.d_xi[q] * f[1][q] + e.d_eta[q] * f[2][q])
                .sum();
            let mut out = vec![0.0; tab.ncoeffs()];
            let mut s = Vec::new();
            integrate_cell(&tab, Some(&f[0]), Some(&f[1]), Some(&f[2]), &mut out, &mut s);
            let rhs: f64 = out.iter().zip(&c).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()));
        }
    }

    #[test]
    fn face_traces() {
        let b = TensorBasis1D::new(3);
        let rule = unit_gauss(4).unwrap();
        let tab = BasisTable::new(&b, &rule);
        let ones = vec![1.0; 16];
        for side in [Side::West, Side::East, Side::South, Side::North] {
            let f = eval_face(&ones, &tab, side).unwrap();
            assert!(f.val.iter().all(|v| (v - 1.0).abs() < 1e-13));
            assert!(f.d_normal.iter().all(|v| v.abs() < 1e-12));
        }
        // field x on x = 1 face
        let mut c = vec![0.0; 16];
        for iy in 0..4 {
            for ix in 0..4 {
                c[iy * 4 + ix] = b.nodes()[ix];
            }
        }
        let f = eval_face(&c, &tab, Side::East).unwrap();
        assert!(f.val.iter().all(|v| (v - 1.0).abs() < 1e-13));
        assert!(f.d_normal.iter().all(|v| (v - 1.0).abs() < 1e-12));
        let f = eval_face(&c, &tab, Side::West).unwrap();
        assert!(f.val.iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn face_traces_match_naive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for p in 1..=6 {
            let b = TensorBasis1D::new(p);
            let rule = unit_gauss(p + 1).unwrap();
            let tab = BasisTable::new(&b, &rule);
            let nb = p + 1;
            let c: Vec<f64> = (0..tab.ncoeffs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            for side in [Side::West, Side::East, Side::South, Side::North] {
                let f = eval_face(&c, &tab, side).unwrap();
                let end = side.end() as f64;
                for (q, &s) in rule.points.iter().enumerate() {
                    let (x, y) = match side {
                        Side::West | Side::East => (end, s),
                        _ => (s, end),
                    };
                    let mut v = 0.0;
                    let mut dn = 0.0;
                    for iy in 0..nb {
                        for ix in 0..nb {
                            let cc = c[iy * nb + ix];
                            v += cc * b.value(ix, x) * b.value(iy, y);
                            dn += cc * match side {
                                Side::West | Side::East => b.derivative(ix, x) * b.value(iy, y),
                                _ => b.value(ix, x) * b.derivative(iy, y),
                            };
                        }
                    }
                    assert!((f.val[q] - v).abs() < 1e-13 * (p as f64));
                    assert!((f.d_normal[q] - dn).abs() < 1e-11 * (1.0 + dn.abs()));
                }
                // transpose check
                let w: Vec<f64> = (0..tab.nq).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let wd: Vec<f64> = (0..tab.nq).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let lhs: f64 = (0..tab.nq).map(|q| f.val[q] * w[q] + f.d_normal[q] * wd[q]).sum();
                let mut out = vec![0.0; tab.ncoeffs()];
                integrate_face(&tab, side, &w, Some(&wd), &mut out);
                let rhs: f64 = out.iter().zip(&c).map(|(a, b)| a * b).sum();
                assert!((lhs - rhs).abs() < 1e-11 * (1.0 + lhs.abs()));
            }
        }
    }
}
