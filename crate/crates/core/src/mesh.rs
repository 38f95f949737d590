//! Structured mesh of axis-aligned rectangles.
//!
//! Cells are numbered row by row, `cell = j * nx + i`. Faces are split into
//! vertical faces (normal along x) followed by horizontal faces (normal along
//! y). Interior faces carry a normal in the positive axis direction and the
//! cell on the negative side is `left_cell`. Boundary faces carry the outward
//! normal and only a `left_cell`. Periodic identification happens here, so a
//! periodic seam shows up as an ordinary interior face.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
}

/// Side of a cell on which a face lies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    West,
    East,
    South,
    North,
}

impl Side {
    pub fn axis(self) -> Axis {
        match self {
            Side::West | Side::East => Axis::X,
            Side::South | Side::North => Axis::Y,
        }
    }

    /// Reference coordinate (0 or 1) of the side along its axis.
    pub fn end(self) -> usize {
        match self {
            Side::West | Side::South => 0,
            Side::East | Side::North => 1,
        }
    }

    /// Sign of the outward normal relative to the positive axis direction.
    pub fn outward_sign(self) -> f64 {
        match self {
            Side::West | Side::South => -1.0,
            Side::East | Side::North => 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FaceKind {
    Interior,
    Dirichlet,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Face {
    pub kind: FaceKind,
    /// Cell E¹ (interior faces) or the single adjacent cell (boundary faces).
    pub left_cell: usize,
    pub right_cell: Option<usize>,
    pub left_side: Side,
    pub right_side: Option<Side>,
    pub axis: Axis,
    pub normal: [f64; 2],
    pub measure: f64,
}

impl Face {
    pub fn is_interior(&self) -> bool {
        self.kind == FaceKind::Interior
    }

    /// `+1` when the face normal points in the positive axis direction.
    pub fn normal_sign(&self) -> f64 {
        match self.axis {
            Axis::X => self.normal[0],
            Axis::Y => self.normal[1],
        }
    }
}

#[derive(Clone, Debug)]
pub struct StructuredMesh2D {
    pub nx: usize,
    pub ny: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub periodic_x: bool,
    pub periodic_y: bool,
    faces: Vec<Face>,
    /// West, East, South, North face of every cell.
    cell_faces: Vec<[usize; 4]>,
}

impl StructuredMesh2D {
    pub fn new(
        nx: usize,
        ny: usize,
        bounds: [f64; 4],
        periodic: [bool; 2],
    ) -> Result<Self> {
        let [x_min, x_max, y_min, y_max] = bounds;
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidMesh(format!(
                "cell counts must be positive, got {nx}x{ny}"
            )));
        }
        if !(x_min < x_max) || !(y_min < y_max) {
            return Err(Error::InvalidMesh(format!(
                "degenerate bounds [{x_min}, {x_max}] x [{y_min}, {y_max}]"
            )));
        }
        let [periodic_x, periodic_y] = periodic;
        let hx = (x_max - x_min) / nx as f64;
        let hy = (y_max - y_min) / ny as f64;

        let mut faces = Vec::new();
        let mut cell_faces = vec![[usize::MAX; 4]; nx * ny];
        let cell = |i: usize, j: usize| j * nx + i;

        // vertical faces, x = x_min + i * hx
        let x_face_count = if periodic_x { nx } else { nx + 1 };
        for j in 0..ny {
            for i in 0..x_face_count {
                let id = faces.len();
                let face = if i == 0 && !periodic_x {
                    Face {
                        kind: FaceKind::Dirichlet,
                        left_cell: cell(0, j),
                        right_cell: None,
                        left_side: Side::West,
                        right_side: None,
                        axis: Axis::X,
                        normal: [-1.0, 0.0],
                        measure: hy,
                    }
                } else if i == nx {
                    Face {
                        kind: FaceKind::Dirichlet,
                        left_cell: cell(nx - 1, j),
                        right_cell: None,
                        left_side: Side::East,
                        right_side: None,
                        axis: Axis::X,
                        normal: [1.0, 0.0],
                        measure: hy,
                    }
                } else {
                    let left = if i == 0 { nx - 1 } else { i - 1 };
                    Face {
                        kind: FaceKind::Interior,
                        left_cell: cell(left, j),
                        right_cell: Some(cell(i, j)),
                        left_side: Side::East,
                        right_side: Some(Side::West),
                        axis: Axis::X,
                        normal: [1.0, 0.0],
                        measure: hy,
                    }
                };
                if let Some(r) = face.right_cell {
                    cell_faces[r][0] = id;
                    cell_faces[face.left_cell][1] = id;
                } else {
                    let slot = if face.left_side == Side::West { 0 } else { 1 };
                    cell_faces[face.left_cell][slot] = id;
                }
                faces.push(face);
            }
        }

        // horizontal faces, y = y_min + j * hy
        let y_face_count = if periodic_y { ny } else { ny + 1 };
        for j in 0..y_face_count {
            for i in 0..nx {
                let id = faces.len();
                let face = if j == 0 && !periodic_y {
                    Face {
                        kind: FaceKind::Dirichlet,
                        left_cell: cell(i, 0),
                        right_cell: None,
                        left_side: Side::South,
                        right_side: None,
                        axis: Axis::Y,
                        normal: [0.0, -1.0],
                        measure: hx,
                    }
                } else if j == ny {
                    Face {
                        kind: FaceKind::Dirichlet,
                        left_cell: cell(i, ny - 1),
                        right_cell: None,
                        left_side: Side::North,
                        right_side: None,
                        axis: Axis::Y,
                        normal: [0.0, 1.0],
                        measure: hx,
                    }
                } else {
                    let below = if j == 0 { ny - 1 } else { j - 1 };
                    Face {
                        kind: FaceKind::Interior,
                        left_cell: cell(i, below),
                        right_cell: Some(cell(i, j)),
                        left_side: Side::North,
                        right_side: Some(Side::South),
                        axis: Axis::Y,
                        normal: [0.0, 1.0],
                        measure: hx,
                    }
                };
                if let Some(r) = face.right_cell {
                    cell_faces[r][2] = id;
                    cell_faces[face.left_cell][3] = id;
                } else {
                    let slot = if face.left_side == Side::South { 2 } else { 3 };
                    cell_faces[face.left_cell][slot] = id;
                }
                faces.push(face);
            }
        }

        debug_assert!(cell_faces.iter().all(|f| f.iter().all(|&id| id != usize::MAX)));

        Ok(Self {
            nx,
            ny,
            x_min,
            x_max,
            y_min,
            y_max,
            periodic_x,
            periodic_y,
            faces,
            cell_faces,
        })
    }

    /// Unit square `(0,1)^2`.
    pub fn unit_square(n: usize, periodic: bool) -> Result<Self> {
        Self::new(n, n, [0.0, 1.0, 0.0, 1.0], [periodic, periodic])
    }

    pub fn num_cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn hx(&self) -> f64 {
        (self.x_max - self.x_min) / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        (self.y_max - self.y_min) / self.ny as f64
    }

    pub fn cell_measure(&self) -> f64 {
        self.hx() * self.hy()
    }

    pub fn domain_measure(&self) -> f64 {
        (self.x_max - self.x_min) * (self.y_max - self.y_min)
    }

    /// Lower-left corner of a cell.
    pub fn cell_origin(&self, cell: usize) -> [f64; 2] {
        let i = cell % self.nx;
        let j = cell / self.nx;
        [
            self.x_min + i as f64 * self.hx(),
            self.y_min + j as f64 * self.hy(),
        ]
    }

    /// Maps reference coordinates in `[0,1]^2` to physical coordinates.
    pub fn map_point(&self, cell: usize, xi: f64, eta: f64) -> [f64; 2] {
        let [x0, y0] = self.cell_origin(cell);
        [x0 + xi * self.hx(), y0 + eta * self.hy()]
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn face(&self, id: usize) -> &Face {
        &self.faces[id]
    }

    /// Face ids of a cell in the order West, East, South, North.
    pub fn cell_faces(&self, cell: usize) -> [usize; 4] {
        self.cell_faces[cell]
    }

    pub fn num_interior_faces(&self) -> usize {
        self.faces.iter().filter(|f| f.is_interior()).count()
    }

    pub fn num_boundary_faces(&self) -> usize {
        self.faces.len() - self.num_interior_faces()
    }

    /// Length scale `h_e` entering the interior penalty `sigma / h_e`.
    pub fn face_h_e(&self, face: &Face) -> f64 {
        // all cells have equal measure, so min(|E_int|, |E_ext|) = |E|
        self.cell_measure() / face.measure
    }

    /// Colouring in which no two face-neighbours share a colour.
    /// Returns `(number of colours, colour per cell)`.
    pub fn cell_coloring(&self) -> (usize, Vec<usize>) {
        // two colours per direction unless an odd periodic wrap forbids it
        let cx = if self.periodic_x && self.nx % 2 == 1 { self.nx } else { 2.min(self.nx) };
        let cy = if self.periodic_y && self.ny % 2 == 1 { self.ny } else { 2.min(self.ny) };
        let colors = (0..self.num_cells())
            .map(|c| (c % self.nx) % cx + cx * ((c / self.nx) % cy))
            .collect();
        (cx * cy, colors)
    }

    /// Physical extent of a face's cells along the face normal.
    pub fn normal_extent(&self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.hx(),
            Axis::Y => self.hy(),
        }
    }
}
