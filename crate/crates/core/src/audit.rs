//! Batch verification: operator identities, chain rules, conservation audits
//! and time-integration drift collected into one [`ConformanceReport`], plus
//! the time-series and convergence drivers behind the command-line tool.
//!
//! Every check draws its random data from its own generator, seeded with the
//! report seed mixed with an FNV-1a hash of the check name, so a check's
//! outcome does not depend on which other checks ran.

use std::fmt::{self, Write as _};

use rand::Rng;

use crate::dense::{adjoint_residual, assemble_dense, assemble_with, LinearOperator, OperatorMatrix};
use crate::error::{Error, Result};
use crate::grid::{CellField, FaceField, Location, StaggeredGrid};
use crate::integrators::{self, IntegratorConfig, Scheme};
use crate::laws::{EnergyForm, PowerLaw, StateLaw};
use crate::models::{Model, ModelKind, ModelState, Physics};
use crate::operators::{self, DensityKind, FALLBACK_THRESHOLD};
use crate::sampling::SmoothSampler;

type Grid = StaggeredGrid<f64>;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckRecord {
    pub name: String,
    /// The identity or property being checked.
    pub anchor: String,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckRecord {
    fn new(name: String, anchor: &str, residual: f64, tolerance: f64) -> Self {
        Self {
            name,
            anchor: anchor.to_string(),
            residual,
            tolerance,
            // NaN residuals fail
            passed: residual <= tolerance,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConformanceReport {
    /// Sorted by name.
    pub checks: Vec<CheckRecord>,
    pub sizes: Vec<usize>,
    pub gammas: Vec<f64>,
    pub seed: u64,
    pub fault: Fault,
}

impl ConformanceReport {
    /// True when every check passed, including the vacuous empty report.
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRecord> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&CheckRecord> {
        self.checks
            .binary_search_by(|c| c.name.as_str().cmp(name))
            .ok()
            .map(|i| &self.checks[i])
    }

    /// Checks whose name starts with `prefix`.
    pub fn family<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = &'a CheckRecord> {
        self.checks.iter().filter(move |c| c.name.starts_with(prefix))
    }

    pub fn max_residual(&self) -> f64 {
        self.checks.iter().map(|c| c.residual).fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("name,anchor,residual,tolerance,status\n");
        for c in &self.checks {
            let _ = writeln!(
                out,
                "{},{},{:.16e},{:.16e},{}",
                c.name,
                c.anchor,
                c.residual,
                c.tolerance,
                if c.passed { "pass" } else { "fail" }
            );
        }
        out
    }

    pub fn to_pretty(&self) -> String {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "sizes {:?}  gammas {:?}  seed {}{}",
            self.sizes,
            self.gammas,
            self.seed,
            match self.fault {
                Fault::None => String::new(),
                f => format!("  fault {f}"),
            }
        );
        for c in &self.checks {
            let _ = writeln!(
                out,
                "{}  {:<width$}  {:>10.3e} <= {:<9.1e} {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.residual,
                c.tolerance,
                c.anchor,
            );
        }
        let failed = self.failures().count();
        let _ = writeln!(
            out,
            "{} checks, {} failed, max residual {:.3e}",
            self.checks.len(),
            failed,
            self.max_residual()
        );
        out
    }
}

/// Deliberate defects used as negative controls.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Fault {
    #[default]
    None,
    /// ADVEC with face averages `w_i + w_{i+1}` instead of their mean.
    AdvecHalf,
    /// DIV with the wrong sign in the adjoint checks.
    DivSign,
}

impl fmt::Display for Fault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::None => "none",
            Self::AdvecHalf => "advec",
            Self::DivSign => "div",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConformanceOptions {
    pub sizes: Vec<usize>,
    pub gammas: Vec<f64>,
    pub seed: u64,
    pub fault: Fault,
    /// Random draws per randomized check.
    pub samples: usize,
}

impl Default for ConformanceOptions {
    fn default() -> Self {
        Self {
            sizes: vec![4, 8, 16],
            gammas: vec![1.4, 2.0],
            seed: 0,
            fault: Fault::None,
            samples: 5,
        }
    }
}

pub const ADJOINT_TOL: f64 = 1e-13;
pub const ADVEC_TOL: f64 = 1e-14;
pub const CHAIN_RULE_TOL: f64 = 1e-13;
pub const CONTINUITY_TOL: f64 = 1e-6;
pub const LAW_FD_TOL: f64 = 1e-6;
pub const ENERGY_RATE_TOL: f64 = 1e-12;
pub const CONSERVATION_TOL: f64 = 1e-13;
pub const ENERGY_FD_TOL: f64 = 1e-8;
pub const RICHARDSON_TOL: f64 = 0.5;
pub const INVARIANT_DRIFT_TOL: f64 = 1e-12;

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

fn sampler(seed: u64, name: &str) -> SmoothSampler {
    SmoothSampler::new(seed ^ fnv1a(name))
}

fn uniform_cells(s: &mut SmoothSampler, g: &Grid, lo: f64, hi: f64) -> CellField<f64> {
    let v = (0..g.cell_count()).map(|_| s.rng().gen_range(lo..hi)).collect();
    CellField::new(g, v).expect("finite samples")
}

fn uniform_faces(s: &mut SmoothSampler, g: &Grid, lo: f64, hi: f64) -> FaceField<f64> {
    let v = (0..g.face_count()).map(|_| s.rng().gen_range(lo..hi)).collect();
    FaceField::new(g, v).expect("finite samples")
}

fn ratio(residual: f64, scale: f64) -> f64 {
    if residual == 0.0 {
        0.0
    } else {
        residual / scale
    }
}

fn gamma_tag(gamma: f64) -> String {
    format!("g{gamma}")
}

/// Collects check records; errors from the checked code become failures.
struct Runner {
    seed: u64,
    fault: Fault,
    samples: usize,
    checks: Vec<CheckRecord>,
}

impl Runner {
    fn check(
        &mut self,
        name: String,
        anchor: &str,
        tolerance: f64,
        body: impl FnOnce(&mut SmoothSampler, &Runner) -> Result<f64>,
    ) {
        let mut rng = sampler(self.seed, &name);
        let residual = body(&mut rng, self).unwrap_or(f64::INFINITY);
        self.checks.push(CheckRecord::new(name, anchor, residual, tolerance));
    }

    fn div_matrix(&self, g: &Grid) -> Result<OperatorMatrix<f64>> {
        let m = assemble_dense(LinearOperator::Div, g)?;
        Ok(match self.fault {
            Fault::DivSign => m.add_scaled(-2.0, &m)?,
            _ => m,
        })
    }

    fn div_r_matrix(&self, g: &Grid, r: &FaceField<f64>) -> Result<OperatorMatrix<f64>> {
        let m = assemble_dense(LinearOperator::DivR(r), g)?;
        Ok(match self.fault {
            Fault::DivSign => m.add_scaled(-2.0, &m)?,
            _ => m,
        })
    }

    fn advec(&self, g: &Grid, m: &FaceField<f64>, w: &FaceField<f64>) -> Result<FaceField<f64>> {
        let average = match self.fault {
            Fault::AdvecHalf => 1.0,
            _ => 0.5,
        };
        operators::advec_weighted(g, m, w, average)
    }
}

/// Relative adjoint residual `max|A* − sign·B| / max(|A*|, |B|)`.
fn relative_adjoint(a: &OperatorMatrix<f64>, b: &OperatorMatrix<f64>, sign: f64) -> Result<f64> {
    let scale = a.adjoint().max_abs().max(b.max_abs());
    Ok(ratio(adjoint_residual(a, b, sign)?, scale))
}

fn power_law(gamma: f64) -> Result<StateLaw<f64>> {
    StateLaw::power(gamma, 1.0)
}

/// Runs every operator, law and model check over the configured sizes and
/// laws. Failures are report entries, never errors.
pub fn run_conformance(options: &ConformanceOptions) -> ConformanceReport {
    let mut r = Runner {
        seed: options.seed,
        fault: options.fault,
        samples: options.samples.max(1),
        checks: Vec::new(),
    };
    for &n in &options.sizes {
        operator_checks(&mut r, n);
        for kind in [ModelKind::ScalarWave, ModelKind::LinearWave] {
            model_checks(&mut r, n, kind, None);
        }
        for &gamma in &options.gammas {
            face_density_checks(&mut r, n, gamma);
            for kind in [ModelKind::CompressibleWave, ModelKind::Euler] {
                model_checks(&mut r, n, kind, Some(gamma));
            }
            anchor_checks(&mut r, n, gamma);
        }
    }
    if !options.sizes.is_empty() {
        for &gamma in &options.gammas {
            law_checks(&mut r, gamma);
        }
    }
    let mut checks = r.checks;
    checks.sort_by(|a, b| a.name.cmp(&b.name));
    ConformanceReport {
        checks,
        sizes: options.sizes.clone(),
        gammas: options.gammas.clone(),
        seed: options.seed,
        fault: options.fault,
    }
}

fn operator_checks(r: &mut Runner, n: usize) {
    let grids = |dims: usize| -> Result<Vec<Grid>> {
        Ok(match dims {
            1 => vec![Grid::new_1d(n, 1.0)?],
            _ => vec![
                Grid::new(&[n, 5], &[1.0, 0.7])?,
                Grid::new(&[5, n], &[1.3, 1.0])?,
            ],
        })
    };
    for dims in [1, 2] {
        r.check(
            format!("adjoint.grad_div.{dims}d.N{n}"),
            "GRAD* = -DIV",
            ADJOINT_TOL,
            |_, r| {
                let mut worst: f64 = 0.0;
                for g in grids(dims)? {
                    let grad = assemble_dense(LinearOperator::Grad, &g)?;
                    worst = worst.max(relative_adjoint(&grad, &r.div_matrix(&g)?, -1.0)?);
                }
                Ok(worst)
            },
        );
        r.check(
            format!("adjoint.lapl.{dims}d.N{n}"),
            "LAPL* = LAPL",
            ADJOINT_TOL,
            |_, _| {
                let mut worst: f64 = 0.0;
                for g in grids(dims)? {
                    let l = assemble_dense(LinearOperator::Lapl, &g)?;
                    worst = worst.max(relative_adjoint(&l, &l, 1.0)?);
                }
                Ok(worst)
            },
        );
        r.check(
            format!("lapl.semidefinite.{dims}d.N{n}"),
            "<p LAPL p> <= 0",
            ADJOINT_TOL,
            |s, r| {
                let mut worst: f64 = 0.0;
                for g in grids(dims)? {
                    for _ in 0..r.samples {
                        let p = uniform_cells(s, &g, -1.0, 1.0);
                        let lp = operators::lapl(&g, &p)?;
                        let form = g.inner_product_cells(&p, &lp)?;
                        let h = (0..g.dims()).map(|a| g.spacing(a)).fold(f64::INFINITY, f64::min);
                        let scale = 4.0 * g.dims() as f64 / (h * h) * g.inner_product_cells(&p, &p)?;
                        worst = worst.max(ratio(form.max(0.0), scale));
                    }
                }
                Ok(worst)
            },
        );
        r.check(
            format!("null_space.{dims}d.N{n}"),
            "GRAD c = 0 and DIV c = 0",
            0.0,
            |s, _| {
                let mut worst: f64 = 0.0;
                for g in grids(dims)? {
                    let c = s.uniform(-2.0, 2.0);
                    worst = worst
                        .max(operators::grad(&g, &CellField::constant(&g, c))?.max_abs())
                        .max(operators::div(&g, &FaceField::constant(&g, c))?.max_abs());
                }
                Ok(worst)
            },
        );
        r.check(
            format!("telescoping.grad.{dims}d.N{n}"),
            "<1 GRAD p> = 0",
            CONSERVATION_TOL,
            |s, r| {
                let mut worst: f64 = 0.0;
                for g in grids(dims)? {
                    for _ in 0..r.samples {
                        let gp = operators::grad(&g, &uniform_cells(s, &g, -1.0, 1.0))?;
                        let abs: f64 = gp.values().iter().zip(g.face_weights()).map(|(x, w)| w * x.abs()).sum();
                        worst = worst.max(ratio(g.total_faces(&gp)?.abs(), abs));
                    }
                }
                Ok(worst)
            },
        );
    }

    let g = match Grid::new_1d(n, 1.0) {
        Ok(g) => g,
        Err(_) => return,
    };
    let h = g.spacing(0);
    r.check(
        format!("mass.div_r_total.N{n}"),
        "<1 DIVr v> = 0",
        CONSERVATION_TOL,
        |s, r| {
            let mut worst: f64 = 0.0;
            for _ in 0..r.samples {
                let v = uniform_faces(s, &g, -1.0, 1.0);
                let rho = uniform_faces(s, &g, 0.5, 2.0);
                let d = operators::div_r(&g, &v, &rho)?;
                let abs: f64 = rho.hadamard(&v)?.values().iter().map(|x| 2.0 * x.abs()).sum();
                worst = worst.max(ratio(g.total_cells(&d)?.abs(), abs));
            }
            Ok(worst)
        },
    );
    r.check(
        format!("advec.symmetry.N{n}"),
        "ADVEC + ADVEC* = diag(Interp DIV m)",
        ADVEC_TOL,
        |s, r| {
            let mut worst: f64 = 0.0;
            for _ in 0..r.samples {
                let m = uniform_faces(s, &g, -1.0, 1.0);
                let a = assemble_with(&g, Location::Faces, Location::Faces, |x| {
                    Ok(r.advec(&g, &m, &FaceField::new(&g, x.to_vec())?)?.into_values())
                })?;
                let diag = operators::interp_c2f(&g, &operators::div(&g, &m)?)?;
                let sym = a.add_scaled(1.0, &a.adjoint())?.sub_diagonal(diag.values())?;
                worst = worst.max(ratio(sym.max_abs(), m.max_abs() / h));
            }
            Ok(worst)
        },
    );
    r.check(
        format!("advec.quadratic_form.N{n}"),
        "<w ADVEC w> = 1/2 <w w Interp DIV m>",
        CONSERVATION_TOL,
        |s, r| {
            let mut worst: f64 = 0.0;
            for _ in 0..r.samples {
                let m = uniform_faces(s, &g, -1.0, 1.0);
                let w = uniform_faces(s, &g, -1.0, 1.0);
                let lhs = g.inner_product_faces(&w, &r.advec(&g, &m, &w)?)?;
                let w2 = w.hadamard(&w)?;
                let rhs = 0.5 * g.inner_product_faces(&w2, &operators::interp_c2f(&g, &operators::div(&g, &m)?)?)?;
                let scale = 2.0 * g.volume() * m.max_abs() * w.max_abs().powi(2) / h;
                worst = worst.max(ratio((lhs - rhs).abs(), scale));
            }
            Ok(worst)
        },
    );
    r.check(
        format!("telescoping.advec.N{n}"),
        "<1 ADVEC w> = 0",
        CONSERVATION_TOL,
        |s, r| {
            let mut worst: f64 = 0.0;
            for _ in 0..r.samples {
                let m = uniform_faces(s, &g, -1.0, 1.0);
                let w = uniform_faces(s, &g, -1.0, 1.0);
                let a = r.advec(&g, &m, &w)?;
                let scale = 2.0 * g.volume() * m.max_abs() * w.max_abs() / h;
                worst = worst.max(ratio(g.total_faces(&a)?.abs(), scale));
            }
            Ok(worst)
        },
    );
}

/// `max_f |r·ΔA − ΔB| / (|r|(|A_L| + |A_R|) + |B_L| + |B_R|)`: the chain rule
/// `r GRAD A = GRAD B` relative to the magnitude of the operands.
pub fn chain_rule_residual(g: &Grid, r: &FaceField<f64>, a: &CellField<f64>, b: &CellField<f64>) -> Result<f64> {
    let lhs = operators::r_grad(g, a, r)?;
    let rhs = operators::grad(g, b)?;
    let mut worst: f64 = 0.0;
    let cells = g.cell_count();
    let (av, bv, rv) = (a.values(), b.values(), r.values());
    for axis in 0..g.dims() {
        let h = g.spacing(axis);
        for right in 0..cells {
            let f = axis * cells + right;
            let left = g.shift(right, axis, -1);
            let scale = (rv[f].abs() * (av[left].abs() + av[right].abs()) + bv[left].abs() + bv[right].abs()) / h;
            worst = worst.max(ratio((lhs.values()[f] - rhs.values()[f]).abs(), scale));
        }
    }
    Ok(worst)
}

/// Pressures whose neighbour jumps alternate just below and just above the
/// face-density fallback threshold, around a smooth positive background.
pub fn straddling_pressure(g: &Grid, sampler: &mut SmoothSampler) -> Result<CellField<f64>> {
    let n = g.cell_count();
    let base = sampler.uniform(0.5, 3.0);
    let mut p = Vec::with_capacity(n);
    let mut current = base;
    for k in 0..n {
        p.push(current);
        let factor = match k % 4 {
            0 => 0.5,
            1 => 1.5,
            2 => 0.999,
            _ => 1.001,
        };
        let threshold = FALLBACK_THRESHOLD * current.abs().max(1.0);
        current += threshold * factor;
    }
    CellField::new(g, p)
}

fn pressure_tables(law: &StateLaw<f64>, p: &CellField<f64>) -> Result<(CellField<f64>, CellField<f64>)> {
    Ok((p.try_map(|x| law.q(x))?, p.try_map(|x| law.s(x))?))
}

fn face_density_checks(r: &mut Runner, n: usize, gamma: f64) {
    let g = match Grid::new_1d(n, 1.0) {
        Ok(g) => g,
        Err(_) => return,
    };
    let tag = gamma_tag(gamma);
    for (kind, label, anchor) in [
        (DensityKind::Euler, "euler", "rGRAD Q(p) = GRAD p"),
        (DensityKind::CompressibleWave, "compressible_wave", "rGRAD S(p) = GRAD Q(p)"),
    ] {
        let chain = |g: &Grid, law: &StateLaw<f64>, p: &CellField<f64>| -> Result<f64> {
            let rf = operators::face_density(g, p, law, kind)?;
            let (q, s) = pressure_tables(law, p)?;
            match kind {
                DensityKind::Euler => chain_rule_residual(g, &rf, &q, p),
                DensityKind::CompressibleWave => chain_rule_residual(g, &rf, &s, &q),
            }
        };
        r.check(
            format!("chain_rule.{label}.N{n}.{tag}"),
            anchor,
            CHAIN_RULE_TOL,
            |s, r| {
                let law = power_law(gamma)?;
                let mut worst: f64 = 0.0;
                for _ in 0..r.samples {
                    let p = uniform_cells(s, &g, 0.2, 4.0);
                    worst = worst.max(chain(&g, &law, &p)?);
                }
                Ok(worst)
            },
        );
        r.check(
            format!("chain_rule.{label}.straddle.N{n}.{tag}"),
            anchor,
            CHAIN_RULE_TOL,
            |s, r| {
                let law = power_law(gamma)?;
                let mut worst: f64 = 0.0;
                for _ in 0..r.samples {
                    let p = straddling_pressure(&g, s)?;
                    worst = worst.max(chain(&g, &law, &p)?);
                }
                Ok(worst)
            },
        );
        r.check(
            format!("adjoint.rgrad_divr.{label}.N{n}.{tag}"),
            "rGRAD* = -DIVr",
            ADJOINT_TOL,
            |s, r| {
                let law = power_law(gamma)?;
                let mut worst: f64 = 0.0;
                for _ in 0..r.samples {
                    let p = uniform_cells(s, &g, 0.2, 4.0);
                    let rf = operators::face_density(&g, &p, &law, kind)?;
                    let a = assemble_dense(LinearOperator::RGrad(&rf), &g)?;
                    worst = worst.max(relative_adjoint(&a, &r.div_r_matrix(&g, &rf)?, -1.0)?);
                }
                Ok(worst)
            },
        );
        r.check(
            format!("face_density.continuity.{label}.{tag}.N{n}"),
            "face density continuous across fallback",
            CONTINUITY_TOL,
            |s, r| {
                let law = power_law(gamma)?;
                let mut worst: f64 = 0.0;
                for _ in 0..r.samples {
                    let pl = s.uniform(0.3, 3.0);
                    let eps = FALLBACK_THRESHOLD * pl.max(1.0);
                    let mut values = vec![pl; n];
                    let mut densities = Vec::new();
                    for jump in [0.999 * eps, 1.001 * eps, 0.98 * eps, 1.02 * eps] {
                        values[1] = pl + jump;
                        let p = CellField::new(&g, values.clone())?;
                        densities.push(operators::face_density(&g, &p, &law, kind)?.values()[1]);
                    }
                    for pair in [(0, 1), (2, 3)] {
                        let (a, b) = (densities[pair.0], densities[pair.1]);
                        worst = worst.max((a - b).abs() / a.abs().max(b.abs()));
                    }
                }
                Ok(worst)
            },
        );
    }
}

fn law_checks(r: &mut Runner, gamma: f64) {
    let tag = gamma_tag(gamma);
    let samples = [0.25, 0.5, 0.9, 1.0, 1.7, 3.0, 6.0];
    let central = |f: &dyn Fn(f64) -> Result<f64>, p: f64| -> Result<f64> {
        let d = 1e-5 * p;
        Ok((f(p + d)? - f(p - d)?) / (2.0 * d))
    };
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(f64::MIN_POSITIVE);
    r.check(format!("law.q_slope.{tag}"), "Q' R = 1", LAW_FD_TOL, |_, _| {
        let law = power_law(gamma)?;
        let mut worst: f64 = 0.0;
        for p in samples {
            let fd = central(&|x| law.q(x), p)?;
            worst = worst.max(rel(fd * law.density(p)?, 1.0));
        }
        Ok(worst)
    });
    r.check(format!("law.s_slope.{tag}"), "S' R^2 = 1", LAW_FD_TOL, |_, _| {
        let law = power_law(gamma)?;
        let mut worst: f64 = 0.0;
        for p in samples {
            let fd = central(&|x| law.s(x), p)?;
            worst = worst.max(rel(fd * law.density(p)?.powi(2), 1.0));
        }
        Ok(worst)
    });
    for (form, label, anchor) in [
        (EnergyForm::Euler, "euler", "e_int' = R' Q"),
        (EnergyForm::CompressibleWave { rho0: 1.3 }, "compressible_wave", "e_int' = rho0 R' S"),
    ] {
        r.check(format!("law.e_int_slope.{label}.{tag}"), anchor, LAW_FD_TOL, |_, _| {
            let law = power_law(gamma)?;
            let mut worst: f64 = 0.0;
            for p in samples {
                let fd = central(&|x| law.internal_energy(form, x), p)?;
                let expected = match form {
                    EnergyForm::Euler => law.density_derivative(p)? * law.q(p)?,
                    EnergyForm::CompressibleWave { rho0 } => rho0 * law.density_derivative(p)? * law.s(p)?,
                };
                // both sides vanish at the anchors; compare against the slope magnitude
                let scale = law.density_derivative(p)? * (law.q(p)?.abs() + law.s(p)?.abs() + p / law.density(p)?);
                worst = worst.max((fd - expected).abs() / scale);
            }
            Ok(worst)
        });
    }
    r.check(format!("law.monotone.{tag}"), "R Q S increasing", 0.0, |_, _| {
        let law = power_law(gamma)?;
        let mut violations = 0.0;
        for pair in samples.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let increments = [
                law.density(b)? - law.density(a)?,
                law.q(b)? - law.q(a)?,
                law.s(b)? - law.s(a)?,
            ];
            violations += increments.iter().filter(|d| !(**d > 0.0)).count() as f64;
        }
        Ok(violations)
    });
}

fn kind_tag(n: usize, kind: ModelKind, gamma: Option<f64>) -> String {
    match gamma {
        Some(gm) => format!("{kind}.N{n}.{}", gamma_tag(gm)),
        None => format!("{kind}.N{n}"),
    }
}

/// The model family used by the conformance checks and the acceptance suite.
pub fn reference_model(n: usize, kind: ModelKind, gamma: Option<f64>) -> Result<Model<f64>> {
    let law = || power_law(gamma.unwrap_or(2.0));
    let physics = match kind {
        ModelKind::ScalarWave => Physics::ScalarWave,
        ModelKind::LinearWave => Physics::LinearWave { rho0: 1.3, c: 0.8 },
        ModelKind::CompressibleWave => Physics::CompressibleWave { rho0: 1.3, law: law()? },
        ModelKind::Euler => Physics::Euler { law: law()? },
    };
    Model::new(Grid::new_1d(n, 1.0)?, physics)
}

/// Characteristic wave speed of `model`, used to pick time steps.
pub fn wave_speed(model: &Model<f64>) -> f64 {
    match model.physics() {
        Physics::ScalarWave => 1.0,
        Physics::LinearWave { c, .. } => *c,
        // sound speed at rho = 1 plus the flow speeds the samplers produce
        Physics::CompressibleWave { law, .. } | Physics::Euler { law } => match law.as_power() {
            Some(p) => (p.gamma() / p.scale().powf(p.gamma())).sqrt() + 1.0,
            None => 1.0,
        },
    }
}

fn model_checks(r: &mut Runner, n: usize, kind: ModelKind, gamma: Option<f64>) {
    let tag = kind_tag(n, kind, gamma);
    let model = || reference_model(n, kind, gamma);
    let amplitude = 0.5;
    r.check(format!("energy_rate.{tag}"), "dE/dt = 0", ENERGY_RATE_TOL, |s, r| {
        let m = model()?;
        let mut worst: f64 = 0.0;
        for _ in 0..r.samples {
            let u = s.state(&m, amplitude)?;
            worst = worst.max(m.energy_rate_audit(&u)?.relative());
        }
        Ok(worst)
    });
    r.check(format!("mass_rate.{tag}"), "<1 drho/dt> = 0", CONSERVATION_TOL, |s, r| {
        let m = model()?;
        let mut worst: f64 = 0.0;
        for _ in 0..r.samples {
            worst = worst.max(m.mass_rate(&s.state(&m, amplitude)?)?.relative());
        }
        Ok(worst)
    });
    r.check(
        format!("momentum_rate.{tag}"),
        "<1 d(momentum)/dt> = 0",
        CONSERVATION_TOL,
        |s, r| {
            let m = model()?;
            let mut worst: f64 = 0.0;
            for _ in 0..r.samples {
                worst = worst.max(m.momentum_rate(&s.state(&m, amplitude)?)?.relative());
            }
            Ok(worst)
        },
    );
    r.check(
        format!("energy_fd.{tag}"),
        "audit = central difference of E",
        ENERGY_FD_TOL,
        |s, r| {
            let m = model()?;
            let dt = 1e-5 * m.grid().spacing(0) / wave_speed(&m);
            let mut worst: f64 = 0.0;
            for _ in 0..r.samples {
                let u = s.state(&m, amplitude)?;
                let audit = m.energy_rate_audit(&u)?;
                let fd = m.finite_difference_energy_check(&u, dt)?;
                let e = m.energy(&u)?;
                let scale = audit.scale + e.kinetic.abs() + e.internal.abs();
                worst = worst.max(ratio((fd - audit.rate).abs(), scale));
            }
            Ok(worst)
        },
    );
    if kind == ModelKind::Euler {
        r.check(
            format!("energy_fd.richardson.{tag}"),
            "central difference error ~ dt^2",
            RICHARDSON_TOL,
            |s, r| {
                let m = model()?;
                let mut worst: f64 = 0.0;
                for _ in 0..r.samples {
                    let u = s.state(&m, amplitude)?;
                    worst = worst.max((richardson_ratio(&m, &u)? - 4.0).abs());
                }
                Ok(worst)
            },
        );
    }
    for scheme in [Scheme::Rk4, Scheme::ImplicitMidpoint] {
        r.check(
            format!("invariant_drift.{tag}.{scheme}"),
            "mass and momentum preserved by the stepper",
            INVARIANT_DRIFT_TOL,
            |s, _| {
                let m = model()?;
                let u = s.state(&m, amplitude)?;
                let cfg = IntegratorConfig::new(scheme, 0.1 * m.grid().spacing(0) / wave_speed(&m))?;
                invariant_drift(&m, &u, &cfg, 50)
            },
        );
    }
    if matches!(kind, ModelKind::ScalarWave | ModelKind::LinearWave) {
        let steps = 200;
        let cfg = IntegratorConfig::<f64>::implicit_midpoint(1.0);
        let tolerance = cfg.map(|c| steps as f64 * 100.0 * c.tolerance).unwrap_or(0.0);
        r.check(
            format!("midpoint_drift.{tag}"),
            "implicit midpoint keeps quadratic energy",
            tolerance,
            |s, _| {
                let m = model()?;
                let u = s.state(&m, amplitude)?;
                let cfg = IntegratorConfig::implicit_midpoint(0.1 * m.grid().spacing(0) / wave_speed(&m))?;
                let series = conservation_run(&m, &u, &cfg, steps, steps).map_err(|f| f.error)?;
                Ok(relative_energy_drift(&series))
            },
        );
    }
}

/// `|fd(δ) − audit| / |fd(δ/2) − audit|` at `δ = 0.05·h / speed`; close to 4
/// when the central difference is in its asymptotic regime.
pub fn richardson_ratio(model: &Model<f64>, state: &ModelState<f64>) -> Result<f64> {
    let audit = model.energy_rate_audit(state)?.rate;
    let dt = 0.05 * model.grid().spacing(0) / wave_speed(model);
    let coarse = (model.finite_difference_energy_check(state, dt)? - audit).abs();
    let fine = (model.finite_difference_energy_check(state, 0.5 * dt)? - audit).abs();
    Ok(coarse / fine)
}

/// Largest change of mass and momentum over `steps` steps, relative to the
/// absolute mass and momentum content of the initial state.
pub fn invariant_drift(
    model: &Model<f64>,
    state: &ModelState<f64>,
    config: &IntegratorConfig<f64>,
    steps: usize,
) -> Result<f64> {
    let g = model.grid();
    let abs = |w: &[f64], x: &[f64]| w.iter().zip(x).map(|(w, x)| w * x.abs()).sum::<f64>();
    let (mass_scale, momentum_scale) = match model.kind() {
        ModelKind::ScalarWave => (0.0, 0.0),
        ModelKind::Euler => {
            let (rho, _) = model.primitive(state)?;
            let rv = model.momentum_density(state)?;
            (abs(g.cell_weights(), rho.values()), abs(g.face_weights(), rv.values()))
        }
        _ => {
            let (rho, v) = model.primitive(state)?;
            (abs(g.cell_weights(), rho.values()), abs(g.face_weights(), v.values()))
        }
    };
    let series = conservation_run(model, state, config, steps, 1).map_err(|f| f.error)?;
    let first = series[0];
    let mut worst: f64 = 0.0;
    for s in &series {
        worst = worst
            .max(ratio((s.mass - first.mass).abs(), mass_scale))
            .max(ratio((s.momentum - first.momentum).abs(), momentum_scale * flow_factor(model)));
    }
    Ok(worst)
}

fn flow_factor(model: &Model<f64>) -> f64 {
    match model.physics() {
        Physics::LinearWave { rho0, .. } | Physics::CompressibleWave { rho0, .. } => *rho0,
        _ => 1.0,
    }
}

fn anchor_checks(r: &mut Runner, n: usize, gamma: f64) {
    for kind in [ModelKind::CompressibleWave, ModelKind::Euler] {
        let tag = kind_tag(n, kind, Some(gamma));
        r.check(
            format!("anchor_independence.{tag}"),
            "anchors shift E_int by constants times mass and volume",
            CONSERVATION_TOL,
            |s, r| {
                let base = power_law(gamma)?;
                let shifted = StateLaw::Power(PowerLaw::new(gamma, 1.0)?.with_anchors(0.7, 0.4)?);
                let g = Grid::new_1d(n, 1.0)?;
                let build = |law: StateLaw<f64>| -> Result<Model<f64>> {
                    let physics = match kind {
                        ModelKind::Euler => Physics::Euler { law },
                        _ => Physics::CompressibleWave { rho0: 1.3, law },
                    };
                    Model::new(g.clone(), physics)
                };
                let (m0, m1) = (build(base)?, build(shifted)?);
                // Q and S shift by constants
                let kq = shifted.q(1.0)? - base.q(1.0)?;
                let ks = shifted.s(1.0)? - base.s(1.0)?;
                let mut worst: f64 = 0.0;
                for _ in 0..r.samples {
                    let u = s.state(&m0, 0.5)?;
                    let (e0, e1) = (m0.energy(&u)?, m1.energy(&u)?);
                    let vol = m0.grid().volume();
                    let expected = match kind {
                        ModelKind::Euler => kq * e0.mass,
                        _ => 1.3 * (ks * e0.mass - kq * vol),
                    };
                    let scale = e0.internal.abs() + e1.internal.abs() + expected.abs();
                    worst = worst.max(ratio((e1.internal - e0.internal - expected).abs(), scale));
                    let (a0, a1) = (m0.energy_rate_audit(&u)?, m1.energy_rate_audit(&u)?);
                    worst = worst.max(ratio((a1.rate - a0.rate).abs(), a0.scale.max(a1.scale)));
                }
                Ok(worst)
            },
        );
    }
}

/// One row of a conservation time series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    pub step: usize,
    pub t: f64,
    pub kinetic: f64,
    pub internal: f64,
    pub total: f64,
    pub mass: f64,
    pub momentum: f64,
    /// `|dE/dt|` from the semi-discrete audit.
    pub energy_rate: f64,
}

pub const SAMPLE_CSV_HEADER: &str = "step,t,E_kin,E_int,E_total,mass,momentum,dEdt_audit";

impl Sample {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            self.step, self.t, self.kinetic, self.internal, self.total, self.mass, self.momentum, self.energy_rate
        )
    }
}

/// A time integration that stopped early, with the samples taken so far.
#[derive(Debug)]
pub struct RunFailure {
    pub partial: Vec<Sample>,
    pub step: usize,
    pub error: Error,
}

impl fmt::Display for RunFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "step {} failed: {}", self.step, self.error)
    }
}

impl std::error::Error for RunFailure {}

fn sample(model: &Model<f64>, state: &ModelState<f64>, step: usize, dt: f64) -> Result<Sample> {
    let e = model.energy(state)?;
    Ok(Sample {
        step,
        t: step as f64 * dt,
        kinetic: e.kinetic,
        internal: e.internal,
        total: e.total,
        mass: e.mass,
        momentum: e.momentum,
        energy_rate: model.energy_rate_audit(state)?.rate.abs(),
    })
}

/// Integrates `steps` steps, sampling at step 0, every `stride` steps and at
/// the final step.
pub fn conservation_run(
    model: &Model<f64>,
    state: &ModelState<f64>,
    config: &IntegratorConfig<f64>,
    steps: usize,
    stride: usize,
) -> std::result::Result<Vec<Sample>, RunFailure> {
    let stride = stride.max(1);
    let mut series = Vec::new();
    let fail = |series: Vec<Sample>, step, error| RunFailure {
        partial: series,
        step,
        error,
    };
    if let Err(e) = model.check_state(state) {
        return Err(fail(series, 0, e));
    }
    match sample(model, state, 0, config.dt) {
        Ok(s) => series.push(s),
        Err(e) => return Err(fail(series, 0, e)),
    }
    let mut u = state.clone();
    for k in 1..=steps {
        u = match integrators::step(model, &u, config) {
            Ok(next) if next.is_finite() => next,
            Ok(_) => return Err(fail(series, k, Error::NonPhysical("state became non-finite".into()))),
            Err(e) => return Err(fail(series, k, e)),
        };
        if k % stride == 0 || k == steps {
            match sample(model, &u, k, config.dt) {
                Ok(s) => series.push(s),
                Err(e) => return Err(fail(series, k, e)),
            }
        }
    }
    Ok(series)
}

/// `max_t |E(t) − E(0)| / |E(0)|`, or the absolute drift when `E(0) = 0`.
pub fn relative_energy_drift(series: &[Sample]) -> f64 {
    let Some(first) = series.first() else {
        return 0.0;
    };
    let drift = series.iter().map(|s| (s.total - first.total).abs()).fold(0.0, f64::max);
    if first.total == 0.0 {
        drift
    } else {
        drift / first.total.abs()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub dt: f64,
    pub steps: usize,
    /// `|E(T) − E(0)|`.
    pub energy_error: f64,
    /// Observed order against the previous row, when both are above the floor.
    pub order: Option<f64>,
    /// Error at or below the round-off or solver floor.
    pub saturated: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceTable {
    pub scheme: Scheme,
    pub t_end: f64,
    pub initial_energy: f64,
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of `log error` against `log dt` over unsaturated rows.
    pub fitted_order: Option<f64>,
}

pub const CONVERGENCE_CSV_HEADER: &str = "dt,steps,energy_error,order,saturated";

impl ConvergenceTable {
    pub fn to_csv(&self) -> String {
        let mut out = format!("{CONVERGENCE_CSV_HEADER}\n");
        for r in &self.rows {
            let order = r.order.map(|o| format!("{o:.16e}")).unwrap_or_default();
            let _ = writeln!(
                out,
                "{:.16e},{},{:.16e},{},{}",
                r.dt, r.steps, r.energy_error, order, r.saturated
            );
        }
        out
    }

    fn refit(&mut self) {
        let pts: Vec<(f64, f64)> = self
            .rows
            .iter()
            .filter(|r| !r.saturated)
            .map(|r| (r.dt.ln(), r.energy_error.ln()))
            .collect();
        self.fitted_order = least_squares_slope(&pts);
    }
}

fn least_squares_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Debug)]
pub struct ConvergenceFailure {
    pub partial: ConvergenceTable,
    pub dt: f64,
    pub error: Error,
}

impl fmt::Display for ConvergenceFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "integration with dt = {} failed: {}", self.dt, self.error)
    }
}

impl std::error::Error for ConvergenceFailure {}

/// Checks that `dts` has at least three entries forming a geometric sequence.
pub fn validate_dt_sequence(dts: &[f64]) -> Result<()> {
    if dts.len() < 3 {
        return Err(Error::InvalidParameter {
            name: "dt count",
            value: dts.len() as f64,
        });
    }
    if let Some(&bad) = dts.iter().find(|d| !(**d > 0.0) || !d.is_finite()) {
        return Err(Error::InvalidParameter { name: "dt", value: bad });
    }
    let q = dts[0] / dts[1];
    if (q - 1.0).abs() < 1e-12 {
        return Err(Error::InvalidParameter { name: "dt ratio", value: q });
    }
    for pair in dts.windows(2) {
        let r = pair[0] / pair[1];
        if (r - q).abs() > 1e-9 * q {
            return Err(Error::InvalidParameter { name: "dt ratio", value: r });
        }
    }
    Ok(())
}

/// Terminal energy error at `t_end` for each step size, with observed orders.
///
/// Each `t_end / dt` must be an integer to within `1e-9`. Errors at or below
/// `100·ε·|E(0)|` (and, for the implicit midpoint rule, below
/// `steps·100·tolerance·|E(0)|`) are marked saturated and left out of the fit.
pub fn convergence_study(
    model: &Model<f64>,
    state: &ModelState<f64>,
    base: &IntegratorConfig<f64>,
    dts: &[f64],
    t_end: f64,
) -> std::result::Result<ConvergenceTable, ConvergenceFailure> {
    let mut table = ConvergenceTable {
        scheme: base.scheme,
        t_end,
        initial_energy: f64::NAN,
        rows: Vec::new(),
        fitted_order: None,
    };
    let fail = |table: ConvergenceTable, dt: f64, error| ConvergenceFailure {
        partial: table,
        dt,
        error,
    };
    if let Err(e) = validate_dt_sequence(dts) {
        return Err(fail(table, f64::NAN, e));
    }
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(fail(table, f64::NAN, Error::InvalidParameter { name: "t_end", value: t_end }));
    }
    let e0 = match model.energy(state) {
        Ok(e) => e.total,
        Err(e) => return Err(fail(table, f64::NAN, e)),
    };
    table.initial_energy = e0;
    for &dt in dts {
        let exact = t_end / dt;
        let steps = exact.round();
        if (exact - steps).abs() > 1e-9 * exact.max(1.0) || steps < 1.0 {
            return Err(fail(table, dt, Error::InvalidParameter { name: "t_end / dt", value: exact }));
        }
        let steps = steps as usize;
        let cfg = match base.with_dt(dt).validated() {
            Ok(c) => c,
            Err(e) => return Err(fail(table, dt, e)),
        };
        let end = match integrators::integrate(model, state, &cfg, steps) {
            Ok(u) => u,
            Err(e) => return Err(fail(table, dt, e)),
        };
        let error = match model.energy(&end) {
            Ok(e) if e.total.is_finite() => (e.total - e0).abs(),
            Ok(_) => return Err(fail(table, dt, Error::NonPhysical("energy became non-finite".into()))),
            Err(e) => return Err(fail(table, dt, e)),
        };
        let mut floor = 100.0 * f64::EPSILON * e0.abs();
        if cfg.scheme == Scheme::ImplicitMidpoint {
            floor = floor.max(steps as f64 * 100.0 * cfg.tolerance * e0.abs());
        }
        let saturated = error <= floor;
        let order = table.rows.last().and_then(|prev: &ConvergenceRow| {
            (!prev.saturated && !saturated).then(|| (prev.energy_error / error).ln() / (prev.dt / dt).ln())
        });
        table.rows.push(ConvergenceRow {
            dt,
            steps,
            energy_error: error,
            order,
            saturated,
        });
        table.refit();
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ConformanceOptions {
        ConformanceOptions {
            sizes: vec![4, 8],
            gammas: vec![2.0],
            samples: 2,
            ..Default::default()
        }
    }

    #[test]
    fn default_report_passes() {
        let report = run_conformance(&small());
        for c in report.failures() {
            eprintln!("{c:?}");
        }
        assert!(report.passed());
        assert!(report.checks.len() >= 20);
        assert!(report.checks.windows(2).all(|w| w[0].name < w[1].name));
    }

    #[test]
    fn report_is_deterministic() {
        assert_eq!(run_conformance(&small()), run_conformance(&small()));
    }

    #[test]
    fn empty_sizes_pass_vacuously() {
        let report = run_conformance(&ConformanceOptions {
            sizes: vec![],
            ..Default::default()
        });
        assert!(report.checks.is_empty());
        assert!(report.passed());
    }

    #[test]
    fn broken_advec_fails_symmetry() {
        let report = run_conformance(&ConformanceOptions {
            fault: Fault::AdvecHalf,
            ..small()
        });
        let c = report.get("advec.symmetry.N8").unwrap();
        assert!(!c.passed && c.residual > 1e-2, "{c:?}");
    }

    #[test]
    fn broken_div_fails_adjoint() {
        let report = run_conformance(&ConformanceOptions {
            fault: Fault::DivSign,
            ..small()
        });
        let c = report.get("adjoint.grad_div.1d.N4").unwrap();
        assert!(!c.passed && c.residual > 1e-2, "{c:?}");
    }

    #[test]
    fn csv_layout() {
        let csv = run_conformance(&small()).to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("name,anchor,residual,tolerance,status"));
        assert!(lines.all(|l| l.split(',').count() == 5));
    }

    #[test]
    fn zero_state_gives_flat_series() {
        let m = reference_model(8, ModelKind::LinearWave, None).unwrap();
        let g = m.grid();
        let u = ModelState::Flow {
            rho: CellField::zeros(g),
            v: FaceField::zeros(g),
        };
        let cfg = IntegratorConfig::rk4(0.01).unwrap();
        let series = conservation_run(&m, &u, &cfg, 10, 3).unwrap();
        assert_eq!(series.iter().map(|s| s.step).collect::<Vec<_>>(), [0, 3, 6, 9, 10]);
        assert!(series.iter().all(|s| s.total == 0.0 && s.energy_rate == 0.0));
        assert_eq!(series[4].t, 10.0 * 0.01);
    }

    #[test]
    fn run_failure_keeps_partial_series() {
        let m = reference_model(8, ModelKind::Euler, Some(2.0)).unwrap();
        let g = m.grid().clone();
        // strong converging flow empties a cell
        let u = m
            .flow_state(
                CellField::constant(&g, 1.0),
                FaceField::from_fn(&g, |_, x| -5.0 * (2.0 * std::f64::consts::PI * x[0]).sin()).unwrap(),
            )
            .unwrap();
        let cfg = IntegratorConfig::rk4(0.02).unwrap();
        let err = conservation_run(&m, &u, &cfg, 1000, 1).unwrap_err();
        assert!(!err.partial.is_empty());
        assert_eq!(err.partial.len(), err.step);
    }

    #[test]
    fn dt_sequence_validation() {
        assert!(validate_dt_sequence(&[0.1]).is_err());
        assert!(validate_dt_sequence(&[0.1, 0.05]).is_err());
        assert!(validate_dt_sequence(&[0.1, 0.05, 0.02]).is_err());
        assert!(validate_dt_sequence(&[0.1, 0.1, 0.1]).is_err());
        assert!(validate_dt_sequence(&[0.1, 0.05, 0.025]).is_ok());
    }

    #[test]
    fn slope_fit() {
        let pts: Vec<(f64, f64)> = [1.0f64, 0.5, 0.25].iter().map(|d| (d.ln(), 3.0 * d.ln() + 1.0)).collect();
        assert!((least_squares_slope(&pts).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(least_squares_slope(&pts[..1]), None);
    }

    #[test]
    fn midpoint_on_linear_model_saturates() {
        let m = reference_model(8, ModelKind::LinearWave, None).unwrap();
        let u = SmoothSampler::new(3).state(&m, 0.5).unwrap();
        let base = IntegratorConfig::implicit_midpoint(0.01).unwrap();
        let t = convergence_study(&m, &u, &base, &[0.02, 0.01, 0.005], 0.4).unwrap();
        assert!(t.rows.iter().all(|r| r.saturated && r.order.is_none()));
        assert_eq!(t.fitted_order, None);
    }
}
