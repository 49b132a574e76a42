//! Periodic uniform staggered grids, the fields living on them, and the two
//! volume-weighted inner products.
//!
//! Layout: cells are stored row-major with the last axis fastest. Face `k` of
//! axis `a` is the lower face of cell `k` along `a`, so in 1-D face `i` sits at
//! `x = i·h` between cells `i-1` and `i` (periodic). In 2-D a face field holds
//! the axis-0 faces followed by the axis-1 faces.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

static NEXT_GRID_ID: AtomicU64 = AtomicU64::new(1);

/// Identity tag shared by a grid and every field built on it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GridId(u64);

/// Which of the two staggered locations a quantity lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Location {
    Cells,
    Faces,
}

#[derive(Clone, Debug)]
pub struct StaggeredGrid<T> {
    id: GridId,
    n_cells: Vec<usize>,
    length: Vec<T>,
    spacing: Vec<T>,
    cell_weights: Vec<T>,
    face_weights: Vec<T>,
}

impl<T: Scalar> StaggeredGrid<T> {
    /// Builds a grid with `n_cells.len()` axes (1 or 2).
    pub fn new(n_cells: &[usize], length: &[T]) -> Result<Self> {
        let dims = n_cells.len();
        if dims == 0 || dims > 2 {
            return Err(Error::UnsupportedDims(dims));
        }
        if length.len() != dims {
            return Err(Error::AxisCountMismatch {
                expected: dims,
                found: length.len(),
            });
        }
        for (axis, (&n, &l)) in n_cells.iter().zip(length).enumerate() {
            if n < 3 {
                return Err(Error::TooFewCells { axis, n_cells: n });
            }
            if !(l > T::zero()) || !l.is_finite() {
                return Err(Error::InvalidLength {
                    axis,
                    length: l.as_f64(),
                });
            }
        }
        let spacing: Vec<T> = n_cells
            .iter()
            .zip(length)
            .map(|(&n, &l)| l / T::of(n as f64))
            .collect();
        let volume = spacing.iter().fold(T::one(), |acc, &h| acc * h);
        let cells: usize = n_cells.iter().product();
        Ok(Self {
            id: GridId(NEXT_GRID_ID.fetch_add(1, Ordering::Relaxed)),
            n_cells: n_cells.to_vec(),
            length: length.to_vec(),
            spacing,
            cell_weights: vec![volume; cells],
            // dual volume of a face equals the cell volume on a uniform periodic grid
            face_weights: vec![volume; cells * dims],
        })
    }

    pub fn new_1d(n_cells: usize, length: T) -> Result<Self> {
        Self::new(&[n_cells], &[length])
    }

    pub fn id(&self) -> GridId {
        self.id
    }

    pub fn dims(&self) -> usize {
        self.n_cells.len()
    }

    pub fn n_cells(&self, axis: usize) -> usize {
        self.n_cells[axis]
    }

    pub fn length(&self, axis: usize) -> T {
        self.length[axis]
    }

    pub fn spacing(&self, axis: usize) -> T {
        self.spacing[axis]
    }

    pub fn cell_count(&self) -> usize {
        self.cell_weights.len()
    }

    pub fn face_count(&self) -> usize {
        self.face_weights.len()
    }

    pub fn count(&self, at: Location) -> usize {
        match at {
            Location::Cells => self.cell_count(),
            Location::Faces => self.face_count(),
        }
    }

    pub fn cell_weights(&self) -> &[T] {
        &self.cell_weights
    }

    pub fn face_weights(&self) -> &[T] {
        &self.face_weights
    }

    pub fn weights(&self, at: Location) -> &[T] {
        match at {
            Location::Cells => &self.cell_weights,
            Location::Faces => &self.face_weights,
        }
    }

    pub fn volume(&self) -> T {
        self.length.iter().fold(T::one(), |acc, &l| acc * l)
    }

    fn stride(&self, axis: usize) -> usize {
        self.n_cells[axis + 1..].iter().product()
    }

    /// Index of the periodic neighbour of cell `index` shifted by `offset` along `axis`.
    pub fn shift(&self, index: usize, axis: usize, offset: isize) -> usize {
        let n = self.n_cells[axis] as isize;
        let stride = self.stride(axis);
        let coord = ((index / stride) as isize) % n;
        let moved = (coord + offset).rem_euclid(n);
        (index as isize + (moved - coord) * stride as isize) as usize
    }

    /// Integer coordinates of a cell.
    pub fn cell_coords(&self, index: usize) -> Vec<usize> {
        (0..self.dims())
            .map(|axis| (index / self.stride(axis)) % self.n_cells[axis])
            .collect()
    }

    pub fn cell_center(&self, index: usize) -> Vec<T> {
        self.cell_coords(index)
            .into_iter()
            .enumerate()
            .map(|(axis, c)| (T::of(c as f64) + T::half()) * self.spacing[axis])
            .collect()
    }

    /// Axis and physical position of face `index`.
    pub fn face_position(&self, index: usize) -> (usize, Vec<T>) {
        let cells = self.cell_count();
        let axis = index / cells;
        let mut pos = self.cell_center(index % cells);
        pos[axis] = pos[axis] - T::half() * self.spacing[axis];
        (axis, pos)
    }

    fn check(&self, id: GridId, len: usize, at: Location) -> Result<()> {
        if id != self.id {
            return Err(Error::GridMismatch {
                expected: self.id,
                found: id,
            });
        }
        let expected = self.count(at);
        if len != expected {
            return Err(Error::LengthMismatch {
                expected,
                found: len,
            });
        }
        Ok(())
    }

    pub(crate) fn check_cells(&self, f: &CellField<T>) -> Result<()> {
        self.check(f.grid, f.values.len(), Location::Cells)
    }

    pub(crate) fn check_faces(&self, f: &FaceField<T>) -> Result<()> {
        self.check(f.grid, f.values.len(), Location::Faces)
    }

    /// `⟨a, b⟩_c = Σ Ω_c,i a_i b_i`.
    pub fn inner_product_cells(&self, a: &CellField<T>, b: &CellField<T>) -> Result<T> {
        self.check_cells(a)?;
        self.check_cells(b)?;
        Ok(weighted_dot(&self.cell_weights, &a.values, &b.values))
    }

    /// `⟨a, b⟩_v = Σ Ω_v,i a_i b_i`.
    pub fn inner_product_faces(&self, a: &FaceField<T>, b: &FaceField<T>) -> Result<T> {
        self.check_faces(a)?;
        self.check_faces(b)?;
        Ok(weighted_dot(&self.face_weights, &a.values, &b.values))
    }

    /// `⟨1, a⟩_c`, the integral of a cell quantity over the domain.
    pub fn total_cells(&self, a: &CellField<T>) -> Result<T> {
        self.check_cells(a)?;
        Ok(weighted_sum(&self.cell_weights, &a.values))
    }

    /// `⟨1, a⟩_v`.
    pub fn total_faces(&self, a: &FaceField<T>) -> Result<T> {
        self.check_faces(a)?;
        Ok(weighted_sum(&self.face_weights, &a.values))
    }
}

fn weighted_dot<T: Scalar>(w: &[T], a: &[T], b: &[T]) -> T {
    w.iter()
        .zip(a)
        .zip(b)
        .fold(T::zero(), |acc, ((&w, &a), &b)| acc + w * a * b)
}

fn weighted_sum<T: Scalar>(w: &[T], a: &[T]) -> T {
    w.iter().zip(a).fold(T::zero(), |acc, (&w, &a)| acc + w * a)
}

fn check_finite<T: Scalar>(values: &[T]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite {
            index,
            value: values[index].as_f64(),
        }),
        None => Ok(()),
    }
}

macro_rules! field_type {
    ($(#[$doc:meta])* $name:ident, $loc:expr) => {
        $(#[$doc])*
        #[derive(Clone, Debug, PartialEq)]
        pub struct $name<T> {
            grid: GridId,
            values: Vec<T>,
        }

        impl<T: Scalar> $name<T> {
            pub const LOCATION: Location = $loc;

            /// Validates length and finiteness against `grid`.
            pub fn new(grid: &StaggeredGrid<T>, values: Vec<T>) -> Result<Self> {
                let expected = grid.count($loc);
                if values.len() != expected {
                    return Err(Error::LengthMismatch {
                        expected,
                        found: values.len(),
                    });
                }
                check_finite(&values)?;
                Ok(Self {
                    grid: grid.id(),
                    values,
                })
            }

            pub fn zeros(grid: &StaggeredGrid<T>) -> Self {
                Self::constant(grid, T::zero())
            }

            pub fn constant(grid: &StaggeredGrid<T>, value: T) -> Self {
                Self {
                    grid: grid.id(),
                    values: vec![value; grid.count($loc)],
                }
            }

            pub(crate) fn from_raw(grid: GridId, values: Vec<T>) -> Self {
                Self { grid, values }
            }

            pub fn grid_id(&self) -> GridId {
                self.grid
            }

            pub fn values(&self) -> &[T] {
                &self.values
            }

            pub fn into_values(self) -> Vec<T> {
                self.values
            }

            pub fn len(&self) -> usize {
                self.values.len()
            }

            pub fn is_empty(&self) -> bool {
                self.values.is_empty()
            }

            pub fn max_abs(&self) -> T {
                crate::scalar::max_abs(&self.values)
            }

            pub fn map(&self, f: impl Fn(T) -> T) -> Self {
                Self::from_raw(self.grid, self.values.iter().map(|&v| f(v)).collect())
            }

            pub fn try_map(&self, f: impl Fn(T) -> Result<T>) -> Result<Self> {
                let values = self.values.iter().map(|&v| f(v)).collect::<Result<_>>()?;
                Ok(Self::from_raw(self.grid, values))
            }

            pub fn scaled(&self, a: T) -> Self {
                self.map(|v| a * v)
            }

            /// Entrywise combination; fails on fields from different grids.
            pub fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
                if self.grid != other.grid {
                    return Err(Error::GridMismatch {
                        expected: self.grid,
                        found: other.grid,
                    });
                }
                let values = self
                    .values
                    .iter()
                    .zip(&other.values)
                    .map(|(&a, &b)| f(a, b))
                    .collect();
                Ok(Self::from_raw(self.grid, values))
            }

            /// `self + a·x`.
            pub fn axpy(&self, a: T, x: &Self) -> Result<Self> {
                self.zip_with(x, |s, x| s + a * x)
            }

            pub fn add(&self, other: &Self) -> Result<Self> {
                self.zip_with(other, |a, b| a + b)
            }

            pub fn sub(&self, other: &Self) -> Result<Self> {
                self.zip_with(other, |a, b| a - b)
            }

            /// Pointwise product, i.e. `diag(self)·other`.
            pub fn hadamard(&self, other: &Self) -> Result<Self> {
                self.zip_with(other, |a, b| a * b)
            }
        }
    };
}

field_type!(
    /// Scalars located at cell centres (pressure, density, energy densities).
    CellField,
    Location::Cells
);
field_type!(
    /// Scalars located at cell faces (velocity, momentum, face densities, mass flux).
    FaceField,
    Location::Faces
);

impl<T: Scalar> CellField<T> {
    /// Samples `f` at every cell centre.
    pub fn from_fn(grid: &StaggeredGrid<T>, f: impl Fn(&[T]) -> T) -> Result<Self> {
        let values = (0..grid.cell_count())
            .map(|i| f(&grid.cell_center(i)))
            .collect();
        Self::new(grid, values)
    }
}

impl<T: Scalar> FaceField<T> {
    /// Samples `f(axis, position)` at every face.
    pub fn from_fn(grid: &StaggeredGrid<T>, f: impl Fn(usize, &[T]) -> T) -> Result<Self> {
        let values = (0..grid.face_count())
            .map(|i| {
                let (axis, pos) = grid.face_position(i);
                f(axis, &pos)
            })
            .collect();
        Self::new(grid, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, l: f64) -> StaggeredGrid<f64> {
        StaggeredGrid::new_1d(n, l).unwrap()
    }

    #[test]
    fn uniform_unit_spacing() {
        let g = grid(4, 4.0);
        assert_eq!(g.spacing(0), 1.0);
        assert_eq!(g.cell_weights(), &[1.0; 4]);
        assert_eq!(g.face_weights(), &[1.0; 4]);
        assert_eq!(g.face_count(), g.cell_count());
    }

    #[test]
    fn weights_sum_to_volume() {
        let g = grid(8, 1.0);
        assert_eq!(g.spacing(0), 0.125);
        assert_eq!(g.cell_weights().iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn two_dimensional_weights() {
        let g = StaggeredGrid::new(&[3, 4], &[3.0, 2.0]).unwrap();
        assert!(g.cell_weights().iter().all(|&w| w == 0.5));
        assert_eq!(g.cell_weights().iter().sum::<f64>(), 6.0);
        assert_eq!(g.face_count(), 24);
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(matches!(
            StaggeredGrid::<f64>::new_1d(2, 1.0),
            Err(Error::TooFewCells { .. })
        ));
        assert!(matches!(
            StaggeredGrid::<f64>::new_1d(4, 0.0),
            Err(Error::InvalidLength { .. })
        ));
        assert!(matches!(
            StaggeredGrid::<f64>::new_1d(4, -1.0),
            Err(Error::InvalidLength { .. })
        ));
        assert!(StaggeredGrid::<f64>::new(&[4, 4, 4], &[1.0; 3]).is_err());
        assert!(StaggeredGrid::<f64>::new(&[4, 4], &[1.0]).is_err());
    }

    #[test]
    fn periodic_shift() {
        let g = grid(4, 1.0);
        assert_eq!(g.shift(0, 0, -1), 3);
        assert_eq!(g.shift(3, 0, 1), 0);
        let g2 = StaggeredGrid::new(&[3, 4], &[1.0, 1.0]).unwrap();
        // cell (2, 3) is index 11
        assert_eq!(g2.shift(11, 0, 1), 3);
        assert_eq!(g2.shift(11, 1, 1), 8);
        assert_eq!(g2.shift(0, 1, -1), 3);
    }

    #[test]
    fn inner_products() {
        let g = grid(4, 4.0);
        let ones = CellField::constant(&g, 1.0);
        assert_eq!(g.inner_product_cells(&ones, &ones).unwrap(), 4.0);
        let a = CellField::new(&g, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = CellField::new(&g, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(g.inner_product_cells(&a, &b).unwrap(), 1.0);

        let f = FaceField::constant(&g, 1.0);
        assert_eq!(g.inner_product_faces(&f, &f).unwrap(), 4.0);
        let alt = FaceField::new(&g, vec![1.0, -1.0, 1.0, -1.0]).unwrap();
        assert_eq!(g.inner_product_faces(&alt, &alt).unwrap(), 4.0);
    }

    #[test]
    fn totals() {
        let g = grid(4, 4.0);
        let a = CellField::new(&g, vec![1.0; 4]).unwrap();
        assert_eq!(g.total_cells(&a).unwrap(), 4.0);
        let b = CellField::new(&g, vec![2.0, -2.0, 0.0, 0.0]).unwrap();
        assert_eq!(g.total_cells(&b).unwrap(), 0.0);
    }

    #[test]
    fn grid_identity_is_enforced() {
        let g1 = grid(4, 1.0);
        let g2 = grid(4, 1.0);
        let a = CellField::constant(&g1, 1.0);
        let b = CellField::constant(&g2, 1.0);
        assert!(matches!(
            g1.inner_product_cells(&a, &b),
            Err(Error::GridMismatch { .. })
        ));
        assert!(a.add(&b).is_err());
    }

    #[test]
    fn field_validation() {
        let g = grid(4, 1.0);
        assert!(matches!(
            CellField::new(&g, vec![1.0; 3]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            FaceField::new(&g, vec![1.0, f64::NAN, 0.0, 0.0]),
            Err(Error::NonFinite { index: 1, .. })
        ));
    }

    #[test]
    fn face_positions_1d() {
        let g = grid(4, 4.0);
        assert_eq!(g.face_position(0), (0, vec![0.0]));
        assert_eq!(g.face_position(3), (0, vec![3.0]));
        assert_eq!(g.cell_center(0), vec![0.5]);
    }
}
