use mimetic_core::integrators;
use mimetic_core::models::Physics as GenericPhysics;
use mimetic_core::operators::{self, DensityKind};
use mimetic_core::sampling::SmoothSampler;
use mimetic_core::{
    CellField, FaceField, IntegratorConfig, Model, ModelKind, ModelState, Physics, StaggeredGrid, StateLaw,
};
use proptest::prelude::*;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

// Hand-derived values.

#[test]
fn power_law_face_densities_by_hand() {
    // gamma = 2, C = 1: R = sqrt(p), Q = 2 sqrt(p) + c, S = ln p + c'
    let g = StaggeredGrid::new_1d(3, 1.0).unwrap();
    let law = StateLaw::power(2.0, 1.0).unwrap();
    let p = CellField::new(&g, vec![1.0, 4.0, 4.0]).unwrap();
    let r = operators::face_density(&g, &p, &law, DensityKind::Euler).unwrap();
    // Δp/ΔQ = 3 / (2·(2 − 1)) on the faces joining p = 1 and p = 4
    assert!(close(r.values()[0], 1.5, 1e-14));
    assert!(close(r.values()[1], 1.5, 1e-14));
    // flat face: R(4) = 2
    assert!(close(r.values()[2], 2.0, 1e-14));
    let rt = operators::face_density(&g, &p, &law, DensityKind::CompressibleWave).unwrap();
    // ΔQ/ΔS = 2 / ln 4
    assert!(close(rt.values()[1], 2.0 / 4f64.ln(), 1e-14));
    assert!(close(rt.values()[2], 2.0, 1e-14));
}

#[test]
fn face_density_falls_back_on_flat_pressure() {
    let g = StaggeredGrid::new_1d(3, 1.0).unwrap();
    let law = StateLaw::power(1.4, 1.0).unwrap();
    let p = CellField::constant(&g, 2.0);
    let r = operators::face_density(&g, &p, &law, DensityKind::Euler).unwrap();
    let expected = law.density(2.0).unwrap();
    assert!(r.values().iter().all(|x| close(*x, expected, 1e-15)));
}

#[test]
fn scalar_wave_energy_by_hand() {
    // p = e_0 on four cells of width ¼: GRAD p = ±4 on two faces, so
    // E = ½·¼·(16 + 16) = 4
    let g = StaggeredGrid::new_1d(4, 1.0).unwrap();
    let m = Model::new(g.clone(), Physics::ScalarWave).unwrap();
    let u = ModelState::Wave {
        p: CellField::new(&g, vec![1.0, 0.0, 0.0, 0.0]).unwrap(),
        w: CellField::zeros(&g),
    };
    let e = m.energy(&u).unwrap();
    assert!(close(e.total, 4.0, 1e-15), "{e:?}");
    assert_eq!(e.kinetic, 0.0);
}

#[test]
fn linear_wave_pressure_is_c_squared_rho() {
    let g = StaggeredGrid::new_1d(4, 1.0).unwrap();
    let m = Model::new(g.clone(), Physics::LinearWave { rho0: 2.0, c: 3.0 }).unwrap();
    let rho = CellField::new(&g, vec![0.1, -0.2, 0.3, 0.0]).unwrap();
    let u = m.flow_state(rho, FaceField::zeros(&g)).unwrap();
    let p = m.pressure(&u).unwrap();
    for (p, r) in p.values().iter().zip([0.1, -0.2, 0.3, 0.0]) {
        assert!(close(*p, 9.0 * r, 1e-15));
    }
}

#[test]
fn euler_mass_flux_is_interpolated_density_times_velocity() {
    let g = StaggeredGrid::new_1d(4, 1.0).unwrap();
    let m = Model::new(
        g.clone(),
        Physics::Euler {
            law: StateLaw::power(2.0, 1.0).unwrap(),
        },
    )
    .unwrap();
    let rho = CellField::new(&g, vec![1.0, 2.0, 3.0, 2.0]).unwrap();
    let v = FaceField::new(&g, vec![0.5, -1.0, 0.0, 2.0]).unwrap();
    let u = m.flow_state(rho, v).unwrap();
    // face k averages cells k−1 and k
    let expected = [0.5 * 1.5, -1.5, 0.0, 2.0 * 2.5];
    let rv = m.momentum_density(&u).unwrap();
    for (a, b) in rv.values().iter().zip(expected) {
        assert!(close(*a, b, 1e-15));
    }
    // DIV of that flux: drho_k = −(f_{k+1} − f_k)/h
    let t = m.euler_tendencies(&u).unwrap();
    let h = 0.25;
    for k in 0..4 {
        let d = -(expected[(k + 1) % 4] - expected[k]) / h;
        assert!(close(t.drho.values()[k], d, 1e-14));
    }
}

// Invariants over random fields.

fn field(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, n)
}

fn grid_1d() -> impl Strategy<Value = StaggeredGrid> {
    (3usize..40, 0.2f64..5.0).prop_map(|(n, l)| StaggeredGrid::new_1d(n, l).unwrap())
}

fn grid_any() -> impl Strategy<Value = StaggeredGrid> {
    prop_oneof![
        grid_1d(),
        (3usize..12, 3usize..12, 0.5f64..3.0, 0.5f64..3.0)
            .prop_map(|(a, b, x, y)| StaggeredGrid::new(&[a, b], &[x, y]).unwrap()),
    ]
}

fn cells_and_faces() -> impl Strategy<Value = (StaggeredGrid, CellField, FaceField)> {
    grid_any().prop_flat_map(|g| {
        let (c, f) = (g.cell_count(), g.face_count());
        (Just(g), field(c), field(f)).prop_map(|(g, a, b)| {
            let p = CellField::new(&g, a).unwrap();
            let v = FaceField::new(&g, b).unwrap();
            (g, p, v)
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn grad_and_div_are_negative_adjoints((g, p, v) in cells_and_faces()) {
        let lhs = g.inner_product_faces(&operators::grad(&g, &p).unwrap(), &v).unwrap();
        let rhs = -g.inner_product_cells(&p, &operators::div(&g, &v).unwrap()).unwrap();
        let h = (0..g.dims()).map(|a| g.spacing(a)).fold(f64::MAX, f64::min);
        let scale = g.volume() * p.max_abs() * v.max_abs() / h;
        prop_assert!((lhs - rhs).abs() <= 1e-13 * scale.max(1e-300));
    }

    #[test]
    fn divergence_integrates_to_zero((g, _p, v) in cells_and_faces()) {
        let total = g.total_cells(&operators::div(&g, &v).unwrap()).unwrap();
        let h = (0..g.dims()).map(|a| g.spacing(a)).fold(f64::MAX, f64::min);
        prop_assert!(total.abs() <= 1e-13 * g.volume() * v.max_abs() / h);
    }

    #[test]
    fn laplacian_is_negative_semidefinite_with_constant_kernel((g, p, _v) in cells_and_faces(), c in -5.0f64..5.0) {
        let lp = operators::lapl(&g, &p).unwrap();
        let q = g.inner_product_cells(&p, &lp).unwrap();
        let grad = operators::grad(&g, &p).unwrap();
        // ⟨p, LAPL p⟩ = −|GRAD p|²
        let g2 = g.inner_product_faces(&grad, &grad).unwrap();
        prop_assert!(q <= 1e-12 * g2);
        prop_assert!(close(q, -g2, 1e-12));
        let flat = operators::lapl(&g, &CellField::constant(&g, c)).unwrap();
        prop_assert!(flat.max_abs() <= 1e-12 * c.abs());
    }

    #[test]
    fn chain_rules_hold_for_positive_pressure(
        g in grid_any(),
        gamma in prop::sample::select(vec![1.4, 2.0, 3.0]),
        seed in any::<u64>(),
    ) {
        let mut s = SmoothSampler::new(seed);
        let p = CellField::new(&g, (0..g.cell_count()).map(|_| s.uniform(0.05, 5.0)).collect()).unwrap();
        let law = StateLaw::power(gamma, 1.0).unwrap();
        let q = p.try_map(|x| law.q(x)).unwrap();
        let sv = p.try_map(|x| law.s(x)).unwrap();
        let r = operators::face_density(&g, &p, &law, DensityKind::Euler).unwrap();
        let rt = operators::face_density(&g, &p, &law, DensityKind::CompressibleWave).unwrap();
        let a = operators::r_grad(&g, &q, &r).unwrap();
        let b = operators::grad(&g, &p).unwrap();
        let c = operators::r_grad(&g, &sv, &rt).unwrap();
        let d = operators::grad(&g, &q).unwrap();
        let h = (0..g.dims()).map(|a| g.spacing(a)).fold(f64::MAX, f64::min);
        prop_assert!(a.sub(&b).unwrap().max_abs() <= 1e-12 * (r.max_abs() * q.max_abs() + p.max_abs()) / h);
        prop_assert!(c.sub(&d).unwrap().max_abs() <= 1e-12 * (rt.max_abs() * sv.max_abs() + q.max_abs()) / h);
        // the face densities lie between the cell densities they join
        for (f, rf) in r.values().iter().enumerate() {
            let (axis, right) = (f / g.cell_count(), f % g.cell_count());
            let left = g.shift(right, axis, -1);
            let (lo, hi) = {
                let a = law.density(p.values()[left]).unwrap();
                let b = law.density(p.values()[right]).unwrap();
                (a.min(b), a.max(b))
            };
            prop_assert!(*rf >= lo * (1.0 - 1e-12) && *rf <= hi * (1.0 + 1e-12));
        }
    }

    #[test]
    fn advection_quadratic_form(g in grid_1d(), seed in any::<u64>()) {
        let mut s = SmoothSampler::new(seed);
        let n = g.face_count();
        let m = FaceField::new(&g, (0..n).map(|_| s.uniform(-1.0, 1.0)).collect()).unwrap();
        let w = FaceField::new(&g, (0..n).map(|_| s.uniform(-1.0, 1.0)).collect()).unwrap();
        let lhs = g.inner_product_faces(&w, &operators::advec(&g, &m, &w).unwrap()).unwrap();
        let idiv = operators::interp_c2f(&g, &operators::div(&g, &m).unwrap()).unwrap();
        let rhs = 0.5 * g.inner_product_faces(&w.hadamard(&w).unwrap(), &idiv).unwrap();
        let scale = g.volume() * m.max_abs() * w.max_abs().powi(2) / g.spacing(0);
        prop_assert!((lhs - rhs).abs() <= 1e-13 * scale);
        // a divergence-free (constant) flux makes ADVEC skew
        let c = FaceField::constant(&g, s.uniform(-1.0, 1.0));
        let skew = g.inner_product_faces(&w, &operators::advec(&g, &c, &w).unwrap()).unwrap();
        prop_assert!(skew.abs() <= 1e-13 * scale.max(1e-300));
    }

    #[test]
    fn semi_discrete_models_conserve(
        n in 3usize..33,
        kind in prop::sample::select(vec![
            ModelKind::ScalarWave, ModelKind::LinearWave, ModelKind::CompressibleWave, ModelKind::Euler,
        ]),
        gamma in prop::sample::select(vec![1.4, 2.0, 3.0]),
        seed in any::<u64>(),
    ) {
        let m = mimetic_core::audit::reference_model(n, kind, Some(gamma)).unwrap();
        let u = SmoothSampler::new(seed).state(&m, 0.5).unwrap();
        prop_assert!(m.energy_rate_audit(&u).unwrap().relative() <= 1e-12);
        prop_assert!(m.mass_rate(&u).unwrap().relative() <= 1e-13);
        prop_assert!(m.momentum_rate(&u).unwrap().relative() <= 1e-13);
    }

    #[test]
    fn euler_steps_keep_linear_invariants(
        n in 4usize..24,
        seed in any::<u64>(),
        midpoint in any::<bool>(),
    ) {
        let m = mimetic_core::audit::reference_model(n, ModelKind::Euler, Some(1.4)).unwrap();
        let u = SmoothSampler::new(seed).state(&m, 0.5).unwrap();
        let dt = 0.1 * m.grid().spacing(0) / mimetic_core::audit::wave_speed(&m);
        let cfg = if midpoint { IntegratorConfig::implicit_midpoint(dt) } else { IntegratorConfig::rk4(dt) }.unwrap();
        let next = integrators::step(&m, &u, &cfg).unwrap();
        let (e0, e1) = (m.energy(&u).unwrap(), m.energy(&next).unwrap());
        prop_assert!((e1.mass - e0.mass).abs() <= 1e-14 * e0.mass.abs());
        prop_assert!((e1.momentum - e0.momentum).abs() <= 1e-14 * (e0.mass + e0.momentum.abs()));
    }
}

#[test]
fn single_precision_models_run() {
    use mimetic_core::f32 as s;
    let g = s::StaggeredGrid::new_1d(16, 1.0).unwrap();
    let law = s::StateLaw::power(1.4, 1.0).unwrap();
    let m = s::Model::new(g.clone(), GenericPhysics::Euler { law }).unwrap();
    let u = SmoothSampler::new(3).state(&m, 0.5).unwrap();
    assert!(m.energy_rate_audit(&u).unwrap().relative() <= 1e-5);
    let cfg = mimetic_core::integrators::IntegratorConfig::<f32>::rk4(1e-3).unwrap();
    let e0 = m.energy(&u).unwrap();
    let mut v: s::ModelState = u;
    for _ in 0..100 {
        v = integrators::step(&m, &v, &cfg).unwrap();
    }
    let e1 = m.energy(&v).unwrap();
    assert!(((e1.mass - e0.mass) / e0.mass).abs() <= 1e-5);
    assert!(((e1.total - e0.total) / e0.total).abs() <= 1e-4);
}
