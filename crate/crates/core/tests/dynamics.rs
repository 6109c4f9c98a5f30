use confgeo::dynamics::*;
use confgeo::expr::Expr;
use confgeo::geometry::*;
use confgeo::integrate::{linspace, Settings};
use confgeo::oracles::*;
use confgeo::CurveState;
use nalgebra::DVector;
use proptest::prelude::*;

fn v(x: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(x)
}

fn flat_jet(n: usize) -> GeometryJet {
    geometry_jet(&MetricSpec::euclidean(n), &vec![0.0; n], JetLevel::Full).unwrap()
}

fn unit_circle() -> OracleCurve {
    OracleCurve::Circle(CircleParams::new(&[0.0; 3], &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]).unwrap())
}

fn spiral(r0: [f64; 3]) -> OracleCurve {
    OracleCurve::Spiral(SpiralParams::new(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &r0, 2.0).unwrap())
}

fn max_deviation(traj: &confgeo::trajectory::Trajectory, curve: &OracleCurve) -> f64 {
    (0..traj.len())
        .map(|i| (traj.position(i) - curve.point(traj.times[i]).unwrap()).amax())
        .fold(0.0, f64::max)
}

/// A 4D metric with nonzero Weyl tensor.
fn warped4() -> MetricSpec {
    MetricSpec::diagonal(
        "warped4",
        vec![
            Expr::parse("1 + 0.2*x2^2").unwrap(),
            Expr::parse("exp(0.3*x1 - 0.1*x4)").unwrap(),
            Expr::parse("1 + 0.1*sin(x1*x2)").unwrap(),
            Expr::parse("2 + cos(x3)").unwrap(),
        ],
        vec![1.0; 4],
    )
    .unwrap()
}

/// Schwarzschild in isotropic coordinates, mass 0.2, time as `x1`.
fn isotropic_schwarzschild() -> MetricSpec {
    let rho = "sqrt(x2^2 + x3^2 + x4^2)";
    let psi = format!("(1 + 0.1/{rho})");
    let lapse = format!("((1 - 0.1/{rho})/{psi})");
    let spatial = format!("{psi}^4");
    MetricSpec::diagonal(
        "isotropic-schwarzschild",
        vec![
            Expr::parse(&format!("-({lapse})^2")).unwrap(),
            Expr::parse(&spatial).unwrap(),
            Expr::parse(&spatial).unwrap(),
            Expr::parse(&spatial).unwrap(),
        ],
        vec![-1.0, 1.0, 1.0, 1.0],
    )
    .unwrap()
}

#[test]
fn circle_from_conformal_geodesic_flow() {
    let c = unit_circle();
    let (s0, _) = c.state(&flat_jet(3), 0.0).unwrap();
    let flow = CurveFlow::conformal_geodesic(MetricSpec::euclidean(3));
    let traj = flow.run(&s0, &linspace(0.0, 1.0, 101), &Settings::rkf45(1e-10)).unwrap();
    assert!(max_deviation(&traj, &c) <= 1e-8);
    assert_eq!(traj.meta.equation, "cg3");
}

#[test]
fn circle_from_fourth_order_flow() {
    let c = OracleCurve::Circle(CircleParams::new(&[0.2, 0.0, -0.1], &[0.0, 0.6, 0.8], &[1.0, 0.4, -0.3]).unwrap());
    let (s0, _) = c.state(&flat_jet(3), 0.0).unwrap();
    let traj = CurveFlow::mercator(MetricSpec::euclidean(3))
        .run(&s0, &linspace(0.0, 1.0, 51), &Settings::rkf45(1e-11))
        .unwrap();
    assert!(max_deviation(&traj, &c) <= 1e-8);
}

#[test]
fn rk4_error_drops_sixteenfold() {
    let c = unit_circle();
    let (s0, _) = c.state(&flat_jet(3), 0.0).unwrap();
    let flow = CurveFlow::conformal_geodesic(MetricSpec::euclidean(3));
    let err = |h: f64| max_deviation(&flow.run(&s0, &[0.0, 1.0], &Settings::rk4(h)).unwrap(), &c);
    let ratio = err(0.02) / err(0.01);
    assert!((ratio - 16.0).abs() < 1.0, "{ratio}");
}

#[test]
fn spiral_from_fourth_order_flow() {
    let p = SpiralParams::new(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.5, -0.5, 0.0], 2.0).unwrap();
    let c = OracleCurve::Spiral(p.clone());
    let jet = flat_jet(3);
    let (s0, _) = c.state(&jet, 0.0).unwrap();
    assert!(mercator_c(&jet, &s0).unwrap().amax() < 1e-14);
    let times = linspace(0.0, 1.0, 201);
    let traj = CurveFlow::mercator(MetricSpec::euclidean(3)).run(&s0, &times, &Settings::rkf45(1e-11)).unwrap();
    assert!(max_deviation(&traj, &c) <= 1e-7);
    // polar law with the angle unwrapped along the samples
    let mut prev = 0.0;
    let mut winding = 0.0;
    for i in 0..traj.len() {
        let (r, theta) = p.polar(traj.position(i).as_slice());
        if i > 0 && theta - prev < -std::f64::consts::PI {
            winding += 2.0 * std::f64::consts::PI;
        }
        prev = theta;
        assert!((r - p.polar_radius(theta + winding)).abs() <= 1e-6);
    }
}

#[test]
fn generic_and_first_integral_forms_agree() {
    let m = MetricSpec::euclidean(3);
    let jet = flat_jet(3);
    let c = v(&[0.0, 0.0, 1.0]);
    let s = CurveState::new(v(&[0.0; 3]), v(&[1.0, 0.0, 0.0]), v(&[0.1, 1.0, 0.0]));
    let j = flat_jerk_from_c(&jet, &s, &c).unwrap();
    let s0 = CurveState::with_jerk(s.x.clone(), s.u.clone(), s.a.clone(), j);
    let times = linspace(0.0, 2.0, 81);
    let settings = Settings::rkf45(1e-11);
    let generic = CurveFlow::mercator(m.clone()).run(&s0, &times, &settings).unwrap();
    let reduced = CurveFlow::flat_mercator(m, c.clone()).unwrap().run(&s0, &times, &settings).unwrap();
    for i in 0..times.len() {
        let (a, b) = (generic.curve_state(i).unwrap(), reduced.curve_state(i).unwrap());
        assert!((&a.x - &b.x).amax() < 1e-8);
        assert!((a.jerk().unwrap() - b.jerk().unwrap()).amax() < 1e-6);
        assert!((mercator_c(&jet, &a).unwrap() - &c).amax() < 1e-6);
    }
}

#[test]
fn conformal_geodesics_solve_the_fourth_order_equation() {
    let sphere = MetricSpec::round_sphere(3);
    let stretched = MetricSpec::euclidean(3).rescale(&ConformalFactor::exponential(&[0.2, -0.4, 0.1]));
    let curves = [
        unit_circle(),
        OracleCurve::ConformalImage { base: Box::new(unit_circle()), b: vec![0.2, 0.1, -0.3] },
    ];
    for m in [MetricSpec::euclidean(3), sphere, stretched] {
        for c in &curves {
            for t in linspace(-0.8, 0.8, 9) {
                let x = c.point(t).unwrap();
                let jet = geometry_jet(&m, x.as_slice(), JetLevel::Full).unwrap();
                let (s, snap) = c.state(&jet, t).unwrap();
                assert!(e_vector(&jet, &s).unwrap().amax() < 1e-9, "{}", m.name());
                assert!(mercator_residual(&jet, &s, &snap).unwrap().amax() < 1e-7, "{}", m.name());
            }
        }
    }
}

#[test]
fn sphere_conformal_geodesic_flow_traces_chart_circles() {
    // E is conformally invariant, so the same parametrised chart curve solves the sphere equation
    let sphere = MetricSpec::round_sphere(3);
    let c = OracleCurve::Circle(CircleParams::new(&[0.3, 0.0, 0.1], &[0.0, 1.0, 0.0], &[0.5, 0.0, -0.4]).unwrap());
    let jet = geometry_jet(&sphere, &[0.3, 0.0, 0.1], JetLevel::Full).unwrap();
    let (s0, _) = c.state(&jet, 0.0).unwrap();
    let traj = CurveFlow::conformal_geodesic(sphere).run(&s0, &linspace(0.0, 1.0, 41), &Settings::default()).unwrap();
    assert!(max_deviation(&traj, &c) < 1e-6);
}

#[test]
fn loxodromes_on_the_sphere() {
    let sphere = MetricSpec::round_sphere(3);
    let c = spiral([0.0; 3]);
    let mut angles = Vec::new();
    for t in linspace(-1.5, 1.0, 26) {
        let x = c.point(t).unwrap();
        let jet = geometry_jet(&sphere, x.as_slice(), JetLevel::Full).unwrap();
        let (s, snap) = c.state(&jet, t).unwrap();
        assert!(mercator_residual(&jet, &s, &snap).unwrap().amax() <= 1e-6);
        angles.push(meridian_angle(&x, &s.u).unwrap());
    }
    let mean = angles.iter().sum::<f64>() / angles.len() as f64;
    let sd = (angles.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / angles.len() as f64).sqrt();
    assert!(sd <= 1e-6, "{sd}");
    // the angle to the rays from the centre of a log spiral is atan(c)
    assert!((mean - 2f64.atan()).abs() < 1e-12);
}

#[test]
fn special_conformal_images_of_spirals() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let jet = flat_jet(3);
    for _ in 0..12 {
        let b: Vec<f64> = (0..3).map(|_| rng.gen_range(-0.15..0.15)).collect();
        let c = OracleCurve::ConformalImage { base: Box::new(spiral([0.3, -0.2, 0.1])), b };
        for t in linspace(0.0, 1.0, 11) {
            let (s, snap) = c.state(&jet, t).unwrap();
            assert!(mercator_residual(&jet, &s, &snap).unwrap().amax() <= 1e-6);
        }
    }
}

#[test]
fn covariant_derivative_of_f_matches_time_differences() {
    let m = warped4();
    let c = OracleCurve::Spiral(SpiralParams::new(&[0.4, 0.0, 0.0, 0.0], &[0.0, 0.2, 0.2, 0.2 * 2f64.sqrt()], &[0.1, 0.2, -0.3, 0.0], 2.0).unwrap());
    let f_at = |t: f64| {
        let x = c.point(t).unwrap();
        let jet = geometry_jet(&m, x.as_slice(), JetLevel::Full).unwrap();
        let (s, snap) = c.state(&jet, t).unwrap();
        (jet, s, snap)
    };
    let t = 0.35;
    let (jet, s, snap) = f_at(t);
    let (_, df) = f_with_derivative(&jet, &s, &snap).unwrap();
    let dfdt = |h: f64| {
        let (jp, sp, _) = f_at(t + h);
        let (jm, sm, _) = f_at(t - h);
        (f_vector(&jp, &sp).unwrap() - f_vector(&jm, &sm).unwrap()) / (2.0 * h)
    };
    let f = f_vector(&jet, &s).unwrap();
    let (d1, d2) = (dfdt(1e-3), dfdt(5e-4));
    let e1 = (&d1 + jet.gamma(&s.u, &f) - &df).amax();
    let e2 = (&d2 + jet.gamma(&s.u, &f) - &df).amax();
    assert!((e1 / e2 - 4.0).abs() < 0.5, "{}", e1 / e2);
    let extrapolated = (d2 * 4.0 - d1) / 3.0;
    assert!((extrapolated + jet.gamma(&s.u, &f) - &df).amax() < 1e-8);
}

#[test]
fn lagrangian_splits_into_total_derivative_and_l1() {
    let m = warped4();
    let c = OracleCurve::ConformalImage {
        base: Box::new(OracleCurve::Spiral(SpiralParams::new(&[0.3, 0.0, 0.0, 0.0], &[0.0, 0.3, 0.0, 0.0], &[0.0, 0.1, 0.2, -0.1], 2.0).unwrap())),
        b: vec![0.1, 0.0, -0.1, 0.2],
    };
    let at = |t: f64| {
        let x = c.point(t).unwrap();
        let jet = geometry_jet(&m, x.as_slice(), JetLevel::Full).unwrap();
        let (s, _) = c.state(&jet, t).unwrap();
        (jet, s)
    };
    let q = |t: f64| {
        let (jet, s) = at(t);
        jet.inner(&s.u, &s.a) / jet.norm2(&s.u)
    };
    let dq = |t: f64, h: f64| (q(t + h) - q(t - h)) / (2.0 * h);
    for t in [0.1, 0.5, 0.9] {
        let (jet, s) = at(t);
        let rest = lagrangian(&jet, &s).unwrap() - lagrangian_l1(&jet, &s).unwrap();
        let (e1, e2) = ((rest - dq(t, 4e-3)).abs(), (rest - dq(t, 2e-3)).abs());
        assert!((e1 / e2 - 4.0).abs() < 0.3, "{}", e1 / e2);
        let extrapolated = (4.0 * dq(t, 2e-3) - dq(t, 4e-3)) / 3.0;
        assert!((rest - extrapolated).abs() < 1e-8, "{e1:e} {e2:e} {:e}", (rest - extrapolated).abs());
    }
}

#[test]
fn k_is_orthogonal_to_velocity_on_schwarzschild() {
    use rand::{Rng, SeedableRng};
    let m = isotropic_schwarzschild();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let mut nonzero = 0.0f64;
    for _ in 0..20 {
        let x: Vec<f64> = (0..4).map(|i| if i == 0 { rng.gen_range(-1.0..1.0) } else { rng.gen_range(0.4..1.2) }).collect();
        let jet = geometry_jet(&m, &x, JetLevel::Full).unwrap();
        let r = |rng: &mut rand_chacha::ChaCha8Rng| DVector::from_fn(4, |_, _| rng.gen_range(-1.0..1.0));
        let s = CurveState::new(v(&x), r(&mut rng), r(&mut rng));
        let k = k_vector(&jet, &s).unwrap();
        nonzero = nonzero.max(k.amax());
        assert!(jet.inner(&k, &s.u).abs() <= 1e-9 * (1.0 + k.amax()));
    }
    assert!(nonzero > 1e-3);
}

/// Covariant data of a curve and a vector field along it, built from coordinate jets.
struct Sample {
    state: CurveState,
    v: [DVector<f64>; 3],
}

fn sample(jet: &GeometryJet, xd: &[DVector<f64>], vd: &[DVector<f64>]) -> Sample {
    let cov = lift::covariant_from_coordinates(jet, &xd[1..4]).unwrap();
    let gs = lift::christoffel_along(jet, &xd[1..], 1).unwrap();
    let vc = lift::covariant_derivatives(&gs, &xd[1..], vd);
    Sample {
        state: CurveState::with_jerk(xd[0].clone(), cov[0].clone(), cov[1].clone(), cov[2].clone()),
        v: [vc[0].clone(), vc[1].clone(), vc[2].clone()],
    }
}

struct Quantities {
    e: DVector<f64>,
    l: f64,
    dv: DVector<f64>,
    b: f64,
    kv: f64,
}

fn quantities(jet: &GeometryJet, s: &Sample) -> Quantities {
    let st = &s.state;
    let u2 = jet.norm2(&st.u);
    Quantities {
        e: e_vector(jet, st).unwrap(),
        l: lagrangian(jet, st).unwrap(),
        dv: d_op(jet, st, &s.v[0], &s.v[1]).unwrap(),
        b: b_term(jet, st, &s.v[0], &s.v[1], &s.v[2]).unwrap(),
        kv: jet.inner(&k_vector(jet, st).unwrap(), &s.v[0]) / u2,
    }
}

fn vec_strategy(n: usize, r: f64) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-r..r, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn invariant_quantities_under_rescaling(
        x in vec_strategy(4, 0.6),
        jets in proptest::collection::vec(vec_strategy(4, 1.0), 4),
        vjets in proptest::collection::vec(vec_strategy(4, 1.0), 3),
        k in vec_strategy(4, 0.5),
        stereo in any::<bool>(),
    ) {
        let base = warped4();
        let factor = if stereo { ConformalFactor::stereographic() } else { ConformalFactor::exponential(&k) };
        let hat = base.rescale(&factor);
        let mut xd = vec![v(&x)];
        xd.extend(jets.iter().map(|j| v(j)));
        xd[1][0] += 1.5;
        let vd: Vec<DVector<f64>> = vjets.iter().map(|j| v(j)).collect();
        let g = geometry_jet(&base, &x, JetLevel::Full).unwrap();
        let gh = geometry_jet(&hat, &x, JetLevel::Full).unwrap();
        let q = quantities(&g, &sample(&g, &xd, &vd));
        let qh = quantities(&gh, &sample(&gh, &xd, &vd));
        let tol = |a: f64| 1e-7 * (1.0 + a.abs());
        prop_assert!((&q.e - &qh.e).amax() <= tol(q.e.amax()));
        prop_assert!((q.l - qh.l).abs() <= tol(q.l));
        prop_assert!((&q.dv - &qh.dv).amax() <= tol(q.dv.amax()));
        prop_assert!((q.b - qh.b).abs() <= tol(q.b));
        prop_assert!((q.kv - qh.kv).abs() <= tol(q.kv));
    }

    #[test]
    fn velocity_is_annihilated_by_d_and_orthogonal_to_k(
        x in vec_strategy(4, 0.6),
        u in vec_strategy(4, 1.0),
        a in vec_strategy(4, 1.0),
        j in vec_strategy(4, 1.0),
    ) {
        let jet = geometry_jet(&warped4(), &x, JetLevel::Full).unwrap();
        let mut u = v(&u);
        u[1] += 1.5;
        let s = CurveState::with_jerk(v(&x), u.clone(), v(&a), v(&j));
        let scale = 1.0 + s.a.amax() * s.a.amax();
        prop_assert!(d_op(&jet, &s, &u, &s.a).unwrap().amax() <= 1e-12 * scale);
        prop_assert!(d2_op(&jet, &s, &u, &s.a, s.jerk().unwrap()).unwrap().amax() <= 1e-11 * scale * scale);
        let k = k_vector(&jet, &s).unwrap();
        prop_assert!(jet.inner(&k, &u).abs() <= 1e-10 * (1.0 + k.amax()));
    }

    #[test]
    fn flat_first_integral_is_conserved(
        a in vec_strategy(3, 1.0),
        cvec in vec_strategy(3, 0.5),
    ) {
        let m = MetricSpec::euclidean(3);
        let jet = flat_jet(3);
        let c = v(&cvec);
        let s = CurveState::new(v(&[0.0; 3]), v(&[1.0, 0.0, 0.0]), v(&a));
        let flow = CurveFlow::flat_mercator(m, c.clone()).unwrap();
        let traj = flow.run(&s, &linspace(0.0, 0.5, 6), &Settings::default()).unwrap();
        for i in 0..traj.len() {
            let st = traj.curve_state(i).unwrap();
            prop_assert!((mercator_c(&jet, &st).unwrap() - &c).amax() < 1e-6);
        }
    }
}
