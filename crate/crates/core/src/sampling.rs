//! Seeded smooth random fields and states.
//!
//! Draws come from ChaCha8 seeded through `SeedableRng::seed_from_u64`, which
//! is platform independent. A profile is `offset + amplitude·g(x)` where `g`
//! sums the first three sine/cosine modes along each axis with random
//! coefficients normalized so that `|g| ≤ 1`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::grid::{CellField, FaceField, StaggeredGrid};
use crate::models::{Model, ModelKind, ModelState};
use crate::scalar::Scalar;

const MODES: usize = 3;

#[derive(Clone, Debug)]
struct Profile {
    // per axis, per mode: (sin, cos) coefficients
    coefficients: Vec<[(f64, f64); MODES]>,
    lengths: Vec<f64>,
    amplitude: f64,
    offset: f64,
}

impl Profile {
    fn eval(&self, x: &[f64]) -> f64 {
        let mut sum = 0.0;
        for (axis, coeffs) in self.coefficients.iter().enumerate() {
            let theta = 2.0 * PI * x[axis] / self.lengths[axis];
            for (k, &(a, b)) in coeffs.iter().enumerate() {
                let kt = (k + 1) as f64 * theta;
                sum += a * kt.sin() + b * kt.cos();
            }
        }
        self.offset + self.amplitude * sum
    }
}

#[derive(Clone, Debug)]
pub struct SmoothSampler {
    rng: ChaCha8Rng,
}

impl SmoothSampler {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.gen_range(lo..hi)
    }

    fn profile<T: Scalar>(&mut self, grid: &StaggeredGrid<T>, amplitude: f64, offset: f64) -> Profile {
        let dims = grid.dims();
        // Σ_k 2/k over the modes, times the number of axes, bounds |g|
        let harmonic: f64 = (1..=MODES).map(|k| 2.0 / k as f64).sum();
        let norm = harmonic * dims as f64;
        let coefficients = (0..dims)
            .map(|_| {
                let mut c = [(0.0, 0.0); MODES];
                for (k, slot) in c.iter_mut().enumerate() {
                    let decay = 1.0 / ((k + 1) as f64 * norm);
                    *slot = (
                        self.rng.gen_range(-1.0..1.0) * decay,
                        self.rng.gen_range(-1.0..1.0) * decay,
                    );
                }
                c
            })
            .collect();
        Profile {
            coefficients,
            lengths: (0..dims).map(|a| grid.length(a).as_f64()).collect(),
            amplitude,
            offset,
        }
    }

    /// Smooth cell field with `|f − offset| ≤ amplitude`.
    pub fn cells<T: Scalar>(
        &mut self,
        grid: &StaggeredGrid<T>,
        amplitude: f64,
        offset: f64,
    ) -> Result<CellField<T>> {
        let profile = self.profile(grid, amplitude, offset);
        CellField::from_fn(grid, |x| {
            let x: Vec<f64> = x.iter().map(|v| v.as_f64()).collect();
            T::of(profile.eval(&x))
        })
    }

    /// Smooth face field; each axis in 2-D gets an independent profile.
    pub fn faces<T: Scalar>(
        &mut self,
        grid: &StaggeredGrid<T>,
        amplitude: f64,
        offset: f64,
    ) -> Result<FaceField<T>> {
        let profiles: Vec<Profile> = (0..grid.dims())
            .map(|_| self.profile(grid, amplitude, offset))
            .collect();
        FaceField::from_fn(grid, |axis, x| {
            let x: Vec<f64> = x.iter().map(|v| v.as_f64()).collect();
            T::of(profiles[axis].eval(&x))
        })
    }

    /// Random valid state for `model`: perturbations of size `amplitude`
    /// around zero, with densities of compressible models offset to 1 and
    /// perturbed by at most `amplitude / 2`. Velocities, not momenta, are
    /// drawn for Euler.
    pub fn state<T: Scalar>(&mut self, model: &Model<T>, amplitude: f64) -> Result<ModelState<T>> {
        let g = model.grid();
        Ok(match model.kind() {
            ModelKind::ScalarWave => ModelState::Wave {
                p: self.cells(g, amplitude, 0.0)?,
                w: self.cells(g, amplitude, 0.0)?,
            },
            ModelKind::LinearWave => ModelState::Flow {
                rho: self.cells(g, amplitude, 0.0)?,
                v: self.faces(g, amplitude, 0.0)?,
            },
            ModelKind::CompressibleWave | ModelKind::Euler => {
                let rho = self.cells(g, 0.5 * amplitude.min(1.0), 1.0)?;
                let v = self.faces(g, amplitude, 0.0)?;
                model.flow_state(rho, v)?
            }
        })
    }
}
