//! Staggered-grid difference operators.
//!
//! All stencils are two-point differences and arithmetic means on the
//! periodic grid. Under the weighted inner products of [`StaggeredGrid`] they
//! satisfy `GRAD* = −DIV`, `LAPL* = LAPL`, `rGRAD* = −DIVr` and
//! `ADVEC + ADVEC* = diag(Interp DIV m)` exactly.

use crate::error::{Error, Result};
use crate::grid::{CellField, FaceField, StaggeredGrid};
use crate::laws::StateLaw;
use crate::scalar::Scalar;

/// Relative pressure jump below which [`face_density`] switches to `R(mean p)`.
pub const FALLBACK_THRESHOLD: f64 = 1e-8;

/// Which discrete chain rule a face density realizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DensityKind {
    /// `r = Δp / ΔQ(p)`, so that `rGRAD Q(p) = GRAD p`.
    Euler,
    /// `r̃ = ΔQ(p) / ΔS(p)`, so that `r̃GRAD S(p) = GRAD Q(p)`.
    CompressibleWave,
}

/// `(GRAD p)` on face `k` of axis `a`: difference of the two adjacent cells over `h_a`.
pub fn grad<T: Scalar>(grid: &StaggeredGrid<T>, p: &CellField<T>) -> Result<FaceField<T>> {
    grid.check_cells(p)?;
    let cells = grid.cell_count();
    let pv = p.values();
    let mut out = Vec::with_capacity(grid.face_count());
    for axis in 0..grid.dims() {
        let h = grid.spacing(axis);
        out.extend((0..cells).map(|k| (pv[k] - pv[grid.shift(k, axis, -1)]) / h));
    }
    Ok(FaceField::from_raw(grid.id(), out))
}

/// `(DIV v)` on cell `k`: sum over axes of the face difference over `h_a`.
pub fn div<T: Scalar>(grid: &StaggeredGrid<T>, v: &FaceField<T>) -> Result<CellField<T>> {
    grid.check_faces(v)?;
    let cells = grid.cell_count();
    let vv = v.values();
    let mut out = vec![T::zero(); cells];
    for axis in 0..grid.dims() {
        let h = grid.spacing(axis);
        let faces = &vv[axis * cells..(axis + 1) * cells];
        for (k, o) in out.iter_mut().enumerate() {
            *o = *o + (faces[grid.shift(k, axis, 1)] - faces[k]) / h;
        }
    }
    Ok(CellField::from_raw(grid.id(), out))
}

/// `LAPL = DIV ∘ GRAD`.
pub fn lapl<T: Scalar>(grid: &StaggeredGrid<T>, p: &CellField<T>) -> Result<CellField<T>> {
    div(grid, &grad(grid, p)?)
}

/// Cell-to-face interpolation: mean of the two adjacent cells.
pub fn interp_c2f<T: Scalar>(grid: &StaggeredGrid<T>, a: &CellField<T>) -> Result<FaceField<T>> {
    grid.check_cells(a)?;
    let cells = grid.cell_count();
    let av = a.values();
    let mut out = Vec::with_capacity(grid.face_count());
    for axis in 0..grid.dims() {
        out.extend((0..cells).map(|k| (av[grid.shift(k, axis, -1)] + av[k]) * T::half()));
    }
    Ok(FaceField::from_raw(grid.id(), out))
}

/// Face densities defined by divided differences of `Q` (and `S`).
///
/// When the adjacent pressures agree to within [`FALLBACK_THRESHOLD`]
/// (relative, floored at 1) the density is `R` at the mean pressure.
pub fn face_density<T: Scalar>(
    grid: &StaggeredGrid<T>,
    p: &CellField<T>,
    law: &StateLaw<T>,
    kind: DensityKind,
) -> Result<FaceField<T>> {
    grid.check_cells(p)?;
    let pv = p.values();
    let q = pv.iter().map(|&x| law.q(x)).collect::<Result<Vec<_>>>()?;
    let s = match kind {
        DensityKind::CompressibleWave => pv.iter().map(|&x| law.s(x)).collect::<Result<Vec<_>>>()?,
        DensityKind::Euler => Vec::new(),
    };
    let eps = T::of(FALLBACK_THRESHOLD);
    let cells = grid.cell_count();
    let mut out = Vec::with_capacity(grid.face_count());
    for axis in 0..grid.dims() {
        for right in 0..cells {
            let left = grid.shift(right, axis, -1);
            let (pl, pr) = (pv[left], pv[right]);
            let jump = pr - pl;
            let r = if jump.abs() <= eps * pl.abs().max(pr.abs()).max(T::one()) {
                law.density((pl + pr) * T::half())?
            } else {
                match kind {
                    DensityKind::Euler => jump / (q[right] - q[left]),
                    DensityKind::CompressibleWave => (q[right] - q[left]) / (s[right] - s[left]),
                }
            };
            out.push(r);
        }
    }
    Ok(FaceField::from_raw(grid.id(), out))
}

/// `DIVr v = DIV(diag(r)·v)`.
pub fn div_r<T: Scalar>(
    grid: &StaggeredGrid<T>,
    v: &FaceField<T>,
    r: &FaceField<T>,
) -> Result<CellField<T>> {
    grid.check_faces(v)?;
    grid.check_faces(r)?;
    div(grid, &r.hadamard(v)?)
}

/// `rGRAD s = diag(r)·GRAD s`.
pub fn r_grad<T: Scalar>(
    grid: &StaggeredGrid<T>,
    s: &CellField<T>,
    r: &FaceField<T>,
) -> Result<FaceField<T>> {
    grid.check_faces(r)?;
    r.hadamard(&grad(grid, s)?)
}

/// Flux-form advection of the face quantity `w` by the face mass flux `m` (1-D only).
///
/// `(ADVEC w)_i = [M_{i+½}·(w_i + w_{i+1})/2 − M_{i−½}·(w_{i−1} + w_i)/2] / h`
/// with the cell flux `M_{i+½} = (m_i + m_{i+1})/2`.
pub fn advec<T: Scalar>(
    grid: &StaggeredGrid<T>,
    m: &FaceField<T>,
    w: &FaceField<T>,
) -> Result<FaceField<T>> {
    advec_weighted(grid, m, w, T::half())
}

/// [`advec`] with the face-average weight exposed; `½` is the only value for
/// which the symmetry property holds.
pub(crate) fn advec_weighted<T: Scalar>(
    grid: &StaggeredGrid<T>,
    m: &FaceField<T>,
    w: &FaceField<T>,
    average: T,
) -> Result<FaceField<T>> {
    if grid.dims() != 1 {
        return Err(Error::Unsupported("ADVEC is only defined on 1-D grids"));
    }
    grid.check_faces(m)?;
    grid.check_faces(w)?;
    let n = grid.cell_count();
    let h = grid.spacing(0);
    let (mv, wv) = (m.values(), w.values());
    // cell k lies between faces k and k+1
    let flux: Vec<T> = (0..n)
        .map(|k| (mv[k] + mv[(k + 1) % n]) * T::half())
        .collect();
    let out = (0..n)
        .map(|i| {
            let prev = (i + n - 1) % n;
            let next = (i + 1) % n;
            let east = flux[i] * (wv[i] + wv[next]) * average;
            let west = flux[prev] * (wv[prev] + wv[i]) * average;
            (east - west) / h
        })
        .collect();
    Ok(FaceField::from_raw(grid.id(), out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid4() -> StaggeredGrid<f64> {
        StaggeredGrid::new_1d(4, 4.0).unwrap()
    }

    fn cells(g: &StaggeredGrid<f64>, v: &[f64]) -> CellField<f64> {
        CellField::new(g, v.to_vec()).unwrap()
    }

    fn faces(g: &StaggeredGrid<f64>, v: &[f64]) -> FaceField<f64> {
        FaceField::new(g, v.to_vec()).unwrap()
    }

    #[test]
    fn grad_stencil() {
        let g = grid4();
        assert_eq!(grad(&g, &cells(&g, &[1.0; 4])).unwrap().values(), &[0.0; 4]);
        let out = grad(&g, &cells(&g, &[0.0, 1.0, 0.0, 1.0])).unwrap();
        assert_eq!(out.values(), &[-1.0, 1.0, -1.0, 1.0]);
    }

    #[test]
    fn grad_exact_for_linear_profile() {
        // periodic grids only admit affine data away from the wrap-around face
        let g = StaggeredGrid::<f64>::new_1d(32, 2.0).unwrap();
        let p = CellField::from_fn(&g, |x| 3.0 * x[0] - 1.0).unwrap();
        let gp = grad(&g, &p).unwrap();
        for &s in &gp.values()[1..] {
            assert!((s - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn div_stencil() {
        let g = grid4();
        assert_eq!(div(&g, &faces(&g, &[1.0; 4])).unwrap().values(), &[0.0; 4]);
        let out = div(&g, &faces(&g, &[0.0, 1.0, 0.0, 1.0])).unwrap();
        assert_eq!(out.values(), &[1.0, -1.0, 1.0, -1.0]);
    }

    #[test]
    fn lapl_stencil() {
        let g = grid4();
        assert_eq!(lapl(&g, &cells(&g, &[2.5; 4])).unwrap().values(), &[0.0; 4]);
        let out = lapl(&g, &cells(&g, &[0.0, 1.0, 0.0, 1.0])).unwrap();
        assert_eq!(out.values(), &[2.0, -2.0, 2.0, -2.0]);
    }

    #[test]
    fn interpolation() {
        let g = grid4();
        assert_eq!(
            interp_c2f(&g, &cells(&g, &[3.0; 4])).unwrap().values(),
            &[3.0; 4]
        );
        assert_eq!(
            interp_c2f(&g, &cells(&g, &[1.0, 3.0, 1.0, 3.0]))
                .unwrap()
                .values(),
            &[2.0; 4]
        );
        let g = StaggeredGrid::new_1d(10, 1.0).unwrap();
        let a = CellField::from_fn(&g, |x| 2.0 * x[0] + 0.5).unwrap();
        let fa = interp_c2f(&g, &a).unwrap();
        for i in 1..10 {
            let x = i as f64 * 0.1;
            assert!((fa.values()[i] - (2.0 * x + 0.5)).abs() < 1e-14);
        }
    }

    #[test]
    fn face_density_examples() {
        let g = StaggeredGrid::new_1d(3, 3.0).unwrap();
        let law = StateLaw::power(2.0, 1.0).unwrap();
        let p = cells(&g, &[1.0, 4.0, 4.0]);
        let r = face_density(&g, &p, &law, DensityKind::Euler).unwrap();
        // face 1 separates p = 1 and p = 4
        assert!((r.values()[1] - 1.5).abs() < 1e-15);
        assert_eq!(r.values()[2], 2.0);
        let rt = face_density(&g, &p, &law, DensityKind::CompressibleWave).unwrap();
        assert!((rt.values()[1] - 2.0 / 4f64.ln()).abs() < 1e-15);

        let uniform = cells(&g, &[2.0; 3]);
        let r = face_density(&g, &uniform, &law, DensityKind::Euler).unwrap();
        assert!(r.values().iter().all(|&x| x == 2f64.sqrt()));
    }

    #[test]
    fn face_density_out_of_domain() {
        let g = grid4();
        let law = StateLaw::power(2.0, 1.0).unwrap();
        let p = cells(&g, &[1.0, -1.0, 1.0, 1.0]);
        assert!(matches!(
            face_density(&g, &p, &law, DensityKind::Euler),
            Err(Error::OutOfDomain { .. })
        ));
    }

    #[test]
    fn weighted_operators() {
        let g = grid4();
        let v = faces(&g, &[1.0; 4]);
        let r = faces(&g, &[1.0, 2.0, 1.0, 2.0]);
        assert_eq!(div_r(&g, &v, &r).unwrap().values(), &[1.0, -1.0, 1.0, -1.0]);
        let ones = faces(&g, &[1.0; 4]);
        let w = faces(&g, &[0.3, -1.0, 2.0, 0.5]);
        assert_eq!(div_r(&g, &w, &ones).unwrap(), div(&g, &w).unwrap());
        let s = cells(&g, &[0.0, 1.0, 0.0, 1.0]);
        let twos = faces(&g, &[2.0; 4]);
        assert_eq!(r_grad(&g, &s, &twos).unwrap().values(), &[-2.0, 2.0, -2.0, 2.0]);
        assert_eq!(r_grad(&g, &s, &ones).unwrap(), grad(&g, &s).unwrap());
    }

    #[test]
    fn advection_stencil() {
        let g = StaggeredGrid::new_1d(6, 6.0).unwrap();
        let w = faces(&g, &[0.1, 0.7, -0.3, 1.2, 0.0, -0.9]);
        let zero = FaceField::zeros(&g);
        assert_eq!(advec(&g, &zero, &w).unwrap().values(), &[0.0; 6]);
        let ones = FaceField::constant(&g, 1.0);
        let a = advec(&g, &ones, &w).unwrap();
        for i in 0..6 {
            let central = (w.values()[(i + 1) % 6] - w.values()[(i + 5) % 6]) / 2.0;
            assert!((a.values()[i] - central).abs() < 1e-15);
        }
    }

    #[test]
    fn advection_rejects_2d() {
        let g = StaggeredGrid::new(&[4, 4], &[1.0, 1.0]).unwrap();
        let m = FaceField::constant(&g, 1.0);
        assert!(matches!(advec(&g, &m, &m), Err(Error::Unsupported(_))));
    }

    #[test]
    fn two_dimensional_stencils() {
        let g = StaggeredGrid::<f64>::new(&[3, 4], &[3.0, 2.0]).unwrap();
        // p depends on the second axis only
        let p = CellField::from_fn(&g, |x| (x[1] * 2.0).round()).unwrap();
        let gp = grad(&g, &p).unwrap();
        assert!(gp.values()[..12].iter().all(|&x| x == 0.0));
        let c = CellField::constant(&g, 1.5);
        assert!(lapl(&g, &c).unwrap().values().iter().all(|&x| x == 0.0));
        let v = FaceField::constant(&g, 0.25);
        assert!(div(&g, &v).unwrap().values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn grid_mismatch_is_an_error() {
        let g1 = grid4();
        let g2 = grid4();
        let p = CellField::constant(&g2, 1.0);
        assert!(matches!(grad(&g1, &p), Err(Error::GridMismatch { .. })));
    }
}
