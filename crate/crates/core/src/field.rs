//! Element-local polynomial fields.

use crate::basis::TensorBasis1D;
use crate::error::{check_len, Result};
use crate::mesh::StructuredMesh2D;

/// Coefficients of a scalar or vector field in `Q_h^p`.
///
/// Layout: cell-major, then component, then the `(p+1)^2` local nodal values
/// with the x index fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct DGField {
    pub degree: usize,
    pub ncomp: usize,
    pub ncells: usize,
    pub data: Vec<f64>,
}

impl DGField {
    pub fn zeros(ncells: usize, ncomp: usize, degree: usize) -> Self {
        let n = ncells * ncomp * (degree + 1) * (degree + 1);
        Self {
            degree,
            ncomp,
            ncells,
            data: vec![0.0; n],
        }
    }

    pub fn scalar(mesh: &StructuredMesh2D, degree: usize) -> Self {
        Self::zeros(mesh.num_cells(), 1, degree)
    }

    pub fn vector(mesh: &StructuredMesh2D, degree: usize) -> Self {
        Self::zeros(mesh.num_cells(), 2, degree)
    }

    pub fn from_data(ncells: usize, ncomp: usize, degree: usize, data: Vec<f64>) -> Result<Self> {
        check_len(ncells * ncomp * (degree + 1) * (degree + 1), data.len())?;
        Ok(Self {
            degree,
            ncomp,
            ncells,
            data,
        })
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.ncells, self.ncomp, self.degree)
    }

    /// Coefficients per component block.
    pub fn nloc(&self) -> usize {
        (self.degree + 1) * (self.degree + 1)
    }

    /// Coefficients per cell (all components).
    pub fn cell_len(&self) -> usize {
        self.ncomp * self.nloc()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn block(&self, cell: usize, comp: usize) -> &[f64] {
        let n = self.nloc();
        let start = (cell * self.ncomp + comp) * n;
        &self.data[start..start + n]
    }

    pub fn block_mut(&mut self, cell: usize, comp: usize) -> &mut [f64] {
        let n = self.nloc();
        let start = (cell * self.ncomp + comp) * n;
        &mut self.data[start..start + n]
    }

    pub fn cell(&self, cell: usize) -> &[f64] {
        let n = self.cell_len();
        &self.data[cell * n..(cell + 1) * n]
    }

    pub fn cell_mut(&mut self, cell: usize) -> &mut [f64] {
        let n = self.cell_len();
        &mut self.data[cell * n..(cell + 1) * n]
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.degree == other.degree && self.ncomp == other.ncomp && self.ncells == other.ncells
    }

    /// Nodal interpolation of `f(x, y) -> [f64; ncomp]` at the GLL points.
    pub fn interpolate<F>(mesh: &StructuredMesh2D, degree: usize, ncomp: usize, f: F) -> Self
    where
        F: Fn(f64, f64) -> Vec<f64>,
    {
        let basis = TensorBasis1D::new(degree);
        let nodes = basis.nodes();
        let nb = nodes.len();
        let mut out = Self::zeros(mesh.num_cells(), ncomp, degree);
        for cell in 0..mesh.num_cells() {
            for iy in 0..nb {
                for ix in 0..nb {
                    let [x, y] = mesh.map_point(cell, nodes[ix], nodes[iy]);
                    let v = f(x, y);
                    for (c, val) in v.iter().enumerate().take(ncomp) {
                        out.block_mut(cell, c)[iy * nb + ix] = *val;
                    }
                }
            }
        }
        out
    }

    /// Pointwise evaluation at reference coordinates of a cell.
    pub fn eval_at(&self, cell: usize, xi: f64, eta: f64) -> Vec<f64> {
        let basis = TensorBasis1D::new(self.degree);
        let nb = basis.len();
        let bx: Vec<f64> = (0..nb).map(|i| basis.value(i, xi)).collect();
        let by: Vec<f64> = (0..nb).map(|i| basis.value(i, eta)).collect();
        (0..self.ncomp)
            .map(|c| {
                let blk = self.block(cell, c);
                let mut s = 0.0;
                for iy in 0..nb {
                    for ix in 0..nb {
                        s += blk[iy * nb + ix] * bx[ix] * by[iy];
                    }
                }
                s
            })
            .collect()
    }

    pub fn fill(&mut self, v: f64) {
        self.data.fill(v);
    }

    pub fn scale(&mut self, a: f64) {
        self.data.iter_mut().for_each(|x| *x *= a);
    }

    /// `self += a * x`
    pub fn axpy(&mut self, a: f64, x: &Self) {
        debug_assert!(self.same_shape(x));
        axpy(a, &x.data, &mut self.data);
    }

    pub fn dot(&self, other: &Self) -> f64 {
        dot(&self.data, &other.data)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += a * x`
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}
