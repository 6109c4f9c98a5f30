use confgeo::dynamics::{flat_jerk_from_c, mercator_c, CurveFlow};
use confgeo::geometry::*;
use confgeo::hamiltonian::*;
use confgeo::integrate::{linspace, Settings};
use confgeo::oracles::*;
use confgeo::CurveState;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn v(x: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(x)
}

fn flat_jet(x: &[f64]) -> GeometryJet {
    if x.len() < 3 {
        return arclength_jet(&MetricSpec::euclidean(x.len()), x).unwrap();
    }
    geometry_jet(&MetricSpec::euclidean(x.len()), x, JetLevel::Full).unwrap()
}

fn tight() -> Settings {
    Settings::rkf45(1e-12)
}

fn unit_circle_state(x0: &[f64], u: &[f64], a: &[f64]) -> CurveState {
    CurveState::new(v(x0), v(u), v(a))
}

#[test]
fn ostrogradsky_flow_reproduces_circles() {
    let c = OracleCurve::Circle(CircleParams::new(&[0.0; 3], &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]).unwrap());
    let (s0, _) = c.state(&flat_jet(&[0.0; 3]), 0.0).unwrap();
    let times = linspace(0.0, 1.0, 51);
    let traj = run_ostrogradsky(&OstrogradskyState::from_curve(&s0).unwrap(), &times, &tight()).unwrap();
    for (i, t) in times.iter().enumerate() {
        assert!((traj.position(i) - c.point(*t).unwrap()).amax() <= 1e-8);
    }
}

#[test]
fn ostrogradsky_flow_matches_the_fourth_order_flow() {
    // the generic non-planar Figure 1 curve, C = (0, 0, 1)
    let jet = flat_jet(&[0.0; 3]);
    let mut s0 = CurveState::new(v(&[0.0; 3]), v(&[1.0, 0.0, 0.0]), v(&[0.1, 1.0, 0.0]));
    s0.j = Some(flat_jerk_from_c(&jet, &s0, &v(&[0.0, 0.0, 1.0])).unwrap());
    let times = linspace(0.0, 1.0, 41);
    let reference = CurveFlow::mercator(MetricSpec::euclidean(3)).run(&s0, &times, &tight()).unwrap();
    let o0 = OstrogradskyState::from_curve(&s0).unwrap();
    let traj = run_ostrogradsky(&o0, &times, &tight()).unwrap();
    let h0 = ostro_hamiltonian(&o0);
    let c0 = mercator_c(&jet, &s0).unwrap();
    for i in 0..times.len() {
        let o = OstrogradskyState::from_flat(3, &traj.states[i]).unwrap();
        let s = o.to_curve().unwrap();
        let r = reference.curve_state(i).unwrap();
        assert!((&s.x - &r.x).amax() <= 1e-8);
        assert!((&s.u - &r.u).amax() <= 1e-8);
        assert!((&s.a - &r.a).amax() <= 1e-8);
        assert!((s.jerk().unwrap() - r.jerk().unwrap()).amax() <= 1e-8);
        assert!((ostro_hamiltonian(&o) - h0).abs() <= 1e-9);
        assert!((&o.p - &o0.p).amax() <= 1e-12);
        let c = mercator_c(&flat_jet(s.x.as_slice()), &s).unwrap();
        assert!((c - &c0).amax() <= 1e-8);
    }
}

#[test]
fn hamiltonian_conserved_on_a_spiral() {
    let c = OracleCurve::Spiral(SpiralParams::new(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0; 3], 2.0).unwrap());
    let (s0, _) = c.state(&flat_jet(&[1.0, 0.0, 0.0]), 0.0).unwrap();
    let o0 = OstrogradskyState::from_curve(&s0).unwrap();
    let times = linspace(0.0, 1.0, 21);
    let traj = run_ostrogradsky(&o0, &times, &tight()).unwrap();
    for (i, t) in times.iter().enumerate() {
        let o = OstrogradskyState::from_flat(3, &traj.states[i]).unwrap();
        assert!((ostro_hamiltonian(&o) - ostro_hamiltonian(&o0)).abs() <= 1e-9);
        assert!((traj.position(i) - c.point(*t).unwrap()).amax() <= 1e-8);
    }
}

fn circle_fit(points: &[DVector<f64>]) -> (DVector<f64>, f64, DVector<f64>) {
    // centre, radius and unit normal of the circle through three points
    let (p, q, r) = (&points[0], &points[1], &points[2]);
    let a = q - p;
    let b = r - p;
    let normal = a.cross(&b);
    let nn = normal.norm_squared();
    let centre = p + (b.norm_squared() * normal.cross(&a) + a.norm_squared() * b.cross(&normal)) / (2.0 * nn);
    let radius = (p - &centre).norm();
    (centre, radius, normal / nn.sqrt())
}

#[test]
fn arclength_flow_traces_the_same_circle() {
    let oracle = OracleCurve::Circle(CircleParams::new(&[0.1, 0.0, 0.2], &[1.0, 0.0, 0.0], &[0.0, 0.5, 0.5]).unwrap());
    let pts: Vec<DVector<f64>> = [0.0, 0.3, 0.7].iter().map(|t| oracle.point(*t).unwrap()).collect();
    let (centre, radius, normal) = circle_fit(&pts);
    // unit speed, A ⊥ U with curvature 1/radius, pointing at the centre
    let a0 = (&centre - &pts[0]) / (radius * radius);
    let s0 = unit_circle_state(pts[0].as_slice(), &[1.0, 0.0, 0.0], a0.as_slice());
    let times = linspace(0.0, 10.0, 201);
    let traj = run_arclength(&MetricSpec::euclidean(3), &s0, &times, &tight()).unwrap();
    for i in 0..times.len() {
        let s = traj.curve_state(i).unwrap();
        let d = &s.x - &centre;
        let off = d.dot(&normal);
        let inplane = (&d - &normal * off).norm();
        assert!(((inplane - radius).powi(2) + off * off).sqrt() < 1e-7);
        assert!((s.u.norm() - 1.0).abs() < 1e-9);
        assert!((s.a.norm() - 1.0 / radius).abs() < 1e-9);
        assert!(s.u.dot(&s.a).abs() < 1e-9);
    }
}

#[test]
fn arclength_flow_on_the_sphere_keeps_acceleration_norm() {
    let m = MetricSpec::round_sphere(3);
    let x0 = [0.2, -0.1, 0.3];
    let jet = geometry_jet(&m, &x0, JetLevel::Curvature).unwrap();
    let u = v(&[1.0, 0.2, 0.0]);
    let u = &u / jet.norm2(&u).sqrt();
    let w = v(&[0.0, 0.4, 0.3]);
    let a = &w - &u * jet.inner(&u, &w);
    let s0 = CurveState::new(v(&x0), u, a);
    let times = linspace(0.0, 3.0, 31);
    let traj = run_arclength(&m, &s0, &times, &tight()).unwrap();
    let a0 = jet.norm2(&s0.a);
    for i in 0..times.len() {
        let s = traj.curve_state(i).unwrap();
        let jet = geometry_jet(&m, s.x.as_slice(), JetLevel::Curvature).unwrap();
        assert!((jet.norm2(&s.u) - 1.0).abs() < 1e-9);
        assert!(jet.inner(&s.u, &s.a).abs() < 1e-9);
        assert!((jet.norm2(&s.a) - a0).abs() < 1e-9);
    }
}

#[test]
fn magnetic_unit_circle() {
    let ks = KahlerStructure::standard(2, 1.0).unwrap();
    let times = linspace(0.0, 2.0 * std::f64::consts::PI, 101);
    let traj = run_magnetic(&ks, &[0.0, 0.0], &[1.0, 0.0], &times, &tight()).unwrap();
    let centre = v(&[0.0, -1.0]);
    for i in 0..times.len() {
        assert!(((traj.position(i) - &centre).norm() - 1.0).abs() < 1e-9);
    }
    assert!(traj.position(times.len() - 1).amax() < 1e-9);

    let still = KahlerStructure::standard(2, 0.0).unwrap();
    let line = run_magnetic(&still, &[1.0, 1.0], &[0.5, -1.0], &[0.0, 2.0], &tight()).unwrap();
    assert!((line.position(1) - v(&[2.0, -1.0])).amax() < 1e-14);
}

#[test]
fn magnetic_geodesics_are_conformal_geodesics() {
    let e = 0.7;
    let ks = KahlerStructure::standard(4, e).unwrap();
    let u0 = v(&[0.3, -0.5, 0.6, 0.2]).normalize();
    let x0 = [0.1, 0.2, -0.3, 0.0];
    let times = linspace(0.0, 10.0, 101);
    let mag = run_magnetic(&ks, &x0, u0.as_slice(), &times, &tight()).unwrap();
    let s0 = mag.curve_state(0).unwrap();
    let cg = run_arclength(&MetricSpec::euclidean(4), &s0, &times, &tight()).unwrap();
    for i in 0..times.len() {
        let s = mag.curve_state(i).unwrap();
        assert!(magnetic_arclength_residual(&ks, &s.u) <= 1e-9);
        assert!((s.a.norm() - e).abs() <= 1e-9);
        let jet = flat_jet(s.x.as_slice());
        let pauls = arclength_jerk(&jet, &s).unwrap() - ks.complex_structure() * &s.a * e;
        assert!(pauls.amax() <= 1e-9);
        assert!((cg.position(i) - mag.position(i)).amax() <= 1e-9);
    }
}

#[test]
fn poisson_flow_closed_form() {
    let ks = KahlerStructure::standard(2, 1.0).unwrap();
    let times = linspace(0.0, 4.0, 81);
    let traj = run_poisson(&ks, 1.0, &[0.5, 0.0, 1.0, 0.0, 0.0, 0.0], &times, &tight()).unwrap();
    for (i, t) in times.iter().enumerate() {
        assert!((traj.position(i) - v(&[0.5 + t.sin(), 0.0])).amax() < 1e-10);
        assert!(hamiltonian_au(&ks, &traj.states[i]).abs() < 1e-10);
    }

    let flat = run_poisson(&ks, 0.0, &[0.0, 0.0, 1.0, 0.0, 0.0, 2.0], &[0.0, 1.5], &tight()).unwrap();
    assert!((flat.position(1) - v(&[1.5, 2.25])).amax() < 1e-12);
}

#[test]
fn poisson_flow_third_order_residual() {
    let ks = KahlerStructure::standard(4, 1.0).unwrap();
    let w = 1.3;
    let z0 = [0.1, 0.2, 0.3, 0.4, 1.0, -0.5, 0.2, 0.3, 0.4, 0.1, -0.2, 0.6];
    let h = 0.01;
    let times = linspace(0.0, 2.0, 201);
    let traj = run_poisson(&ks, w, &z0, &times, &tight()).unwrap();
    let h0 = hamiltonian_au(&ks, &z0);
    for i in 0..times.len() {
        assert!((hamiltonian_au(&ks, &traj.states[i]) - h0).abs() < 1e-10);
    }
    // five-point derivative with step s·h, then Richardson over s = 1, 2
    let deriv = |name: &str, i: usize, s: usize| {
        let f = |k: usize| traj.field(k, name).unwrap();
        (f(i - 2 * s) - f(i + 2 * s) + (f(i + s) - f(i - s)) * 8.0) / (12.0 * h * s as f64)
    };
    for i in 4..times.len() - 4 {
        let u = traj.field(i, "U").unwrap();
        let a_dot = (deriv("A", i, 1) * 16.0 - deriv("A", i, 2)) / 15.0;
        assert!((&a_dot + &u * (w * w)).amax() < 1e-9);
        let x_dot = (deriv("x", i, 1) * 16.0 - deriv("x", i, 2)) / 15.0;
        assert!((&x_dot - &u).amax() < 1e-9);
    }
}

#[test]
fn jacobi_identity_on_coordinates() {
    for n in [2, 4] {
        let ks = KahlerStructure::standard(n, 1.0).unwrap();
        for w in [0.0, 0.5, 2.0] {
            assert_eq!(jacobi_coordinate_triples(&ks, w), 0.0);
        }
    }
}

#[test]
fn hamilton_equations_from_the_bracket() {
    for n in [2, 4] {
        let ks = KahlerStructure::standard(n, 1.0).unwrap();
        let z: Vec<f64> = (0..3 * n).map(|i| (i as f64 * 0.37).sin()).collect();
        let from_bracket = hamilton_equations(&ks, 1.7, &z);
        let displayed = v(&poisson_flow_rhs(&ks, 1.7, &z).unwrap());
        assert!((from_bracket - displayed).amax() < 1e-14);
    }
}

#[test]
fn dirac_reduction_reproduces_the_brackets() {
    for n in [2, 4] {
        let ks = KahlerStructure::standard(n, 1.0).unwrap();
        let r = dirac_bracket_check(&ks, 1.5).unwrap();
        assert!(r.max_residual() < 1e-12, "{r:?}");
        assert_eq!(r.constraint_sign, -1.0);
    }
    // a non-standard form: rotate the standard one by an orthogonal matrix
    let q = DMatrix::from_row_slice(4, 4, &[0.5, 0.5, 0.5, 0.5, 0.5, -0.5, 0.5, -0.5, 0.5, 0.5, -0.5, -0.5, 0.5, -0.5, -0.5, 0.5]);
    let std = KahlerStructure::standard(4, 1.0).unwrap();
    let ks = KahlerStructure::new(&q * &std.omega * q.transpose(), 1.0).unwrap();
    let r = dirac_bracket_check(&ks, 0.8).unwrap();
    assert!(r.max_residual() < 1e-12);
    let up = ks.omega_upper();
    assert!((ks.omega.transpose() * &up - DMatrix::<f64>::identity(4, 4)).amax() < 1e-14);
}

#[test]
fn cky_residuals() {
    let x = [0.3, -0.2, 0.5];
    let jet = flat_jet(&x);
    let k = [1.0, 2.0, -0.5];
    assert!(cky_residual(&jet, &CkyPair::position_wedge(&k).unwrap(), &x).unwrap().max_abs() < 1e-14);

    // same Y without W: residual δ_ab k_c − δ_ac k_b
    let wedge = CkyPair::from_upper(
        3,
        &[(0, 1, "x1*2 - x2*1"), (0, 2, "x1*(-0.5) - x3*1"), (1, 2, "x2*(-0.5) - x3*2")],
        &["0", "0", "0"],
    )
    .unwrap();
    let r = cky_residual(&jet, &wedge, &x).unwrap();
    for a in 0..3 {
        for b in 0..3 {
            for c in 0..3 {
                let d = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
                let expected = d(a, b) * k[c] - d(a, c) * k[b];
                assert!((r.residual.at([a, b, c]) - expected).abs() < 1e-14);
            }
        }
    }

    let control = CkyPair::from_upper(3, &[(0, 1, "x1*x2")], &["0", "0", "0"]).unwrap();
    assert!(cky_residual(&jet, &control, &x).unwrap().residual.max_abs() > 0.1);

    let rotation = CkyPair::from_upper(2, &[], &["-x2", "x1"]).unwrap();
    assert!(cky_residual(&flat_jet(&[0.4, 0.1]), &rotation, &[0.4, 0.1]).unwrap().killing < 1e-15);
    let dilation = CkyPair::from_upper(2, &[], &["x1", "x2"]).unwrap();
    assert!(cky_residual(&flat_jet(&[0.4, 0.1]), &dilation, &[0.4, 0.1]).unwrap().killing > 0.5);
}

fn drift(pair: &CkyPair, traj: &confgeo::trajectory::Trajectory) -> f64 {
    let q: Vec<f64> = (0..traj.len())
        .map(|i| {
            let s = traj.curve_state(i).unwrap();
            first_integral_q(pair, s.x.as_slice(), &s.u, &s.a).unwrap()
        })
        .collect();
    q.iter().map(|v| (v - q[0]).abs()).fold(0.0, f64::max)
}

#[test]
fn cky_first_integrals_along_conformal_geodesics() {
    let times = linspace(0.0, 10.0, 101);
    let plane = run_arclength(&MetricSpec::euclidean(2), &unit_circle_state(&[0.2, 0.1], &[0.0, 1.0], &[-1.0, 0.0]), &times, &tight()).unwrap();
    let area = CkyPair::constant(&DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])).unwrap();
    assert!(drift(&area, &plane) <= 1e-9);

    let s0 = unit_circle_state(&[0.1, 0.2, 0.3], &[0.6, 0.8, 0.0], &[-0.4, 0.3, 0.5]);
    let space = run_arclength(&MetricSpec::euclidean(3), &s0, &times, &tight()).unwrap();
    for k in [[1.0, 0.0, 0.0], [0.3, -0.7, 1.1]] {
        assert!(drift(&CkyPair::position_wedge(&k).unwrap(), &space) <= 1e-8);
    }
    let control = CkyPair::from_upper(3, &[(0, 1, "x1*x2")], &["0", "0", "0"]).unwrap();
    assert!(drift(&control, &space) > 1e-3);
    let control2 = CkyPair::from_upper(2, &[(0, 1, "x1*x2")], &["0", "0"]).unwrap();
    assert!(drift(&control2, &plane) > 1e-3);
}

fn arclength_state(u: &[f64], a: &[f64]) -> (DVector<f64>, DVector<f64>) {
    let u = v(u).normalize();
    let a = v(a);
    let a = &a - &u * u.dot(&a);
    (u, a)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn q_commutes_with_h_for_cky_pairs(
        x in proptest::collection::vec(-1.0..1.0f64, 3),
        u in proptest::collection::vec(-1.0..1.0f64, 3),
        a in proptest::collection::vec(-1.0..1.0f64, 3),
        k in proptest::collection::vec(-1.0..1.0f64, 3),
        y in proptest::collection::vec(-1.0..1.0f64, 3),
    ) {
        prop_assume!(v(&u).norm() > 0.1);
        let (u, a) = arclength_state(&u, &a);
        let wedge = CkyPair::position_wedge(&k).unwrap();
        let constant = CkyPair::constant(&DMatrix::from_row_slice(3, 3, &[0.0, y[0], y[1], -y[0], 0.0, y[2], -y[1], -y[2], 0.0])).unwrap();
        for pair in [&wedge, &constant] {
            let direct = q_bracket_h(pair, &x, &u, &a).unwrap();
            prop_assert!(direct.abs() < 1e-9);
            prop_assert!((q_bracket_expansion(pair, &x, &u, &a).unwrap() - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn q_bracket_is_the_derivative_along_the_flow(
        x in proptest::collection::vec(-1.0..1.0f64, 3),
        u in proptest::collection::vec(-1.0..1.0f64, 3),
        a in proptest::collection::vec(-1.0..1.0f64, 3),
    ) {
        let (u, a) = (v(&u), v(&a));
        let pair = CkyPair::from_upper(3, &[(0, 1, "x1*x2"), (1, 2, "sin(x3)")], &["x2", "0", "x1*x3"]).unwrap();
        let q = |t: f64| {
            let xt: Vec<f64> = x.iter().zip(u.iter()).map(|(xi, ui)| xi + t * ui).collect();
            let ut = &u + &a * t;
            let at = &a - &u * (a.norm_squared() * t);
            first_integral_q(&pair, &xt, &ut, &at).unwrap()
        };
        let h = 1e-4;
        let fd = (q(h) - q(-h)) / (2.0 * h);
        prop_assert!((q_bracket_h(&pair, &x, &u, &a).unwrap() - fd).abs() < 1e-6);
    }

    #[test]
    fn jacobi_identity_for_quadratic_observables(
        entries in proptest::collection::vec(-1.0..1.0f64, 3 * 12 * 12 + 3 * 12),
        w in 0.1..2.0f64,
    ) {
        let ks = KahlerStructure::standard(4, 1.0).unwrap();
        let pi = structure_matrix(&ks, w);
        let obs: Vec<Quadratic> = (0..3)
            .map(|k| {
                let m = DMatrix::from_column_slice(12, 12, &entries[k * 144..(k + 1) * 144]);
                Quadratic { m: &m + m.transpose(), b: v(&entries[432 + 12 * k..432 + 12 * (k + 1)]), c: 0.0 }
            })
            .collect();
        let z = v(&entries[..12]);
        prop_assert!(jacobi_defect(&pi, &obs, &z) < 1e-9);
        let f = &obs[0];
        let g = &obs[1];
        let fg = f.bracket(g, &pi).value(&z);
        prop_assert!((fg - poisson_bracket(&ks, w, &f.gradient(&z), &g.gradient(&z))).abs() < 1e-10);
        prop_assert!((fg + g.bracket(f, &pi).value(&z)).abs() < 1e-10);
    }
}

#[test]
fn momentum_round_trip_at_random_jets() {
    for k in 0..10 {
        let f = |i: usize| ((k * 5 + i) as f64 * 0.73).sin();
        let s = CurveState::with_jerk(v(&[f(0), f(1), f(2)]), v(&[1.0 + f(3), f(4), f(5)]), v(&[f(6), f(7), f(8)]), v(&[f(9), f(10), f(11)]));
        let o = OstrogradskyState::from_curve(&s).unwrap();
        let d = ostro_flow_rhs(&o).unwrap();
        assert!((&d.u - &s.a).amax() < 1e-13);
        let back = o.to_curve().unwrap();
        assert!((back.jerk().unwrap() - s.jerk().unwrap()).amax() < 1e-12);
    }
}
