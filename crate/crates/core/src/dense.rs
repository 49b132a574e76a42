//! Dense realizations of the grid operators, used to verify adjoint and
//! symmetry identities entry by entry.

use crate::error::{Error, Result};
use crate::grid::{CellField, FaceField, Location, StaggeredGrid};
use crate::operators;
use crate::scalar::{max_abs, Scalar};

/// Largest input or output dimension accepted by [`assemble_dense`].
pub const DENSE_LIMIT: usize = 4096;

/// A linear grid operator, with any coefficient fields frozen.
#[derive(Clone, Copy, Debug)]
pub enum LinearOperator<'a, T> {
    Grad,
    Div,
    Lapl,
    Interp,
    /// `diag(r)·GRAD`.
    RGrad(&'a FaceField<T>),
    /// `DIV·diag(r)`.
    DivR(&'a FaceField<T>),
    /// `ADVEC` with the given face mass flux.
    Advec(&'a FaceField<T>),
}

impl<T> LinearOperator<'_, T> {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Grad => "grad",
            Self::Div => "div",
            Self::Lapl => "lapl",
            Self::Interp => "interp",
            Self::RGrad(_) => "r_grad",
            Self::DivR(_) => "div_r",
            Self::Advec(_) => "advec",
        }
    }

    pub fn domain(&self) -> Location {
        match self {
            Self::Grad | Self::Lapl | Self::Interp | Self::RGrad(_) => Location::Cells,
            Self::Div | Self::DivR(_) | Self::Advec(_) => Location::Faces,
        }
    }

    pub fn codomain(&self) -> Location {
        match self {
            Self::Div | Self::Lapl | Self::DivR(_) => Location::Cells,
            Self::Grad | Self::Interp | Self::RGrad(_) | Self::Advec(_) => Location::Faces,
        }
    }
}

impl<T: Scalar> LinearOperator<'_, T> {
    /// Applies the operator to raw values laid out in its domain.
    pub fn apply(&self, grid: &StaggeredGrid<T>, x: &[T]) -> Result<Vec<T>> {
        let cells = || CellField::new(grid, x.to_vec());
        let faces = || FaceField::new(grid, x.to_vec());
        Ok(match self {
            Self::Grad => operators::grad(grid, &cells()?)?.into_values(),
            Self::Div => operators::div(grid, &faces()?)?.into_values(),
            Self::Lapl => operators::lapl(grid, &cells()?)?.into_values(),
            Self::Interp => operators::interp_c2f(grid, &cells()?)?.into_values(),
            Self::RGrad(r) => operators::r_grad(grid, &cells()?, r)?.into_values(),
            Self::DivR(r) => operators::div_r(grid, &faces()?, r)?.into_values(),
            Self::Advec(m) => operators::advec(grid, m, &faces()?)?.into_values(),
        })
    }
}

/// Row-major dense matrix mapping `domain` values to `codomain` values, with
/// the quadrature weights of both spaces.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
    domain: Location,
    codomain: Location,
    domain_weights: Vec<T>,
    codomain_weights: Vec<T>,
}

impl<T: Scalar> OperatorMatrix<T> {
    pub fn new(
        data: Vec<T>,
        domain: Location,
        codomain: Location,
        domain_weights: Vec<T>,
        codomain_weights: Vec<T>,
    ) -> Result<Self> {
        let (rows, cols) = (codomain_weights.len(), domain_weights.len());
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self {
            rows,
            cols,
            data,
            domain,
            codomain,
            domain_weights,
            codomain_weights,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn domain(&self) -> Location {
        self.domain
    }

    pub fn codomain(&self) -> Location {
        self.codomain
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[row * self.cols + col]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, row: usize) -> &[T] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn max_abs(&self) -> T {
        max_abs(&self.data)
    }

    /// Weighted adjoint `A* = Ω_in⁻¹ Aᵀ Ω_out`.
    pub fn adjoint(&self) -> Self {
        let mut data = vec![T::zero(); self.data.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                data[j * self.rows + i] =
                    self.get(i, j) * self.codomain_weights[i] / self.domain_weights[j];
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            data,
            domain: self.codomain,
            codomain: self.domain,
            domain_weights: self.codomain_weights.clone(),
            codomain_weights: self.domain_weights.clone(),
        }
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.rows != other.rows
            || self.cols != other.cols
            || self.domain != other.domain
            || self.codomain != other.codomain
        {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} ({:?} -> {:?}) vs {}x{} ({:?} -> {:?})",
                self.rows,
                self.cols,
                self.domain,
                self.codomain,
                other.rows,
                other.cols,
                other.domain,
                other.codomain
            )));
        }
        Ok(())
    }

    /// `self + scale·other`.
    pub fn add_scaled(&self, scale: T, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a + scale * b)
            .collect();
        Ok(Self {
            data,
            ..self.clone()
        })
    }

    /// Subtracts `diag` from the main diagonal of a square matrix.
    pub fn sub_diagonal(&self, diag: &[T]) -> Result<Self> {
        if self.rows != self.cols || diag.len() != self.rows {
            return Err(Error::DimensionMismatch(format!(
                "diagonal of length {} on a {}x{} matrix",
                diag.len(),
                self.rows,
                self.cols
            )));
        }
        let mut out = self.clone();
        for (i, &d) in diag.iter().enumerate() {
            out.data[i * self.cols + i] = out.data[i * self.cols + i] - d;
        }
        Ok(out)
    }

    pub fn row_sums(&self) -> Vec<T> {
        (0..self.rows)
            .map(|i| self.row(i).iter().fold(T::zero(), |a, &b| a + b))
            .collect()
    }
}

/// Assembles a dense matrix column by column from an arbitrary linear map.
pub fn assemble_with<T: Scalar>(
    grid: &StaggeredGrid<T>,
    domain: Location,
    codomain: Location,
    apply: impl Fn(&[T]) -> Result<Vec<T>>,
) -> Result<OperatorMatrix<T>> {
    let cols = grid.count(domain);
    let rows = grid.count(codomain);
    let unknowns = cols.max(rows);
    if unknowns > DENSE_LIMIT {
        return Err(Error::DenseTooLarge {
            unknowns,
            limit: DENSE_LIMIT,
        });
    }
    let mut data = vec![T::zero(); rows * cols];
    let mut basis = vec![T::zero(); cols];
    for j in 0..cols {
        basis[j] = T::one();
        let column = apply(&basis)?;
        if column.len() != rows {
            return Err(Error::DimensionMismatch(format!(
                "operator returned {} values, expected {rows}",
                column.len()
            )));
        }
        for (i, v) in column.into_iter().enumerate() {
            data[i * cols + j] = v;
        }
        basis[j] = T::zero();
    }
    OperatorMatrix::new(
        data,
        domain,
        codomain,
        grid.weights(domain).to_vec(),
        grid.weights(codomain).to_vec(),
    )
}

/// Column `j` is the operator applied to the `j`-th basis field.
pub fn assemble_dense<T: Scalar>(
    op: LinearOperator<'_, T>,
    grid: &StaggeredGrid<T>,
) -> Result<OperatorMatrix<T>> {
    assemble_with(grid, op.domain(), op.codomain(), |x| op.apply(grid, x))
}

/// `max |A* − sign·B|`.
pub fn adjoint_residual<T: Scalar>(
    a: &OperatorMatrix<T>,
    b: &OperatorMatrix<T>,
    sign: T,
) -> Result<T> {
    Ok(a.adjoint().add_scaled(-sign, b)?.max_abs())
}
