//! Browser bindings: the three Figure 1 curves, loxodromes on the sphere, and
//! special conformal images of spirals. Every export returns flat `x, y, z`
//! triples for drawing plus a JSON summary of the checks behind the picture.

use nalgebra::DVector;
use serde::Serialize;
use wasm_bindgen::prelude::*;

use confgeo::checks;
use confgeo::dynamics::mercator_residual;
use confgeo::geometry::{geometry_jet, JetLevel, MetricSpec};
use confgeo::integrate::{linspace, Settings};
use confgeo::oracles::{meridian_angle, to_sphere, OracleCurve, SpiralParams};

/// Points and summary of one computed picture.
#[wasm_bindgen(getter_with_clone)]
#[derive(Clone, Debug)]
pub struct Curves {
    /// Concatenated `x, y, z` triples of every curve.
    pub points: Vec<f64>,
    /// Number of points in each curve.
    pub lengths: Vec<u32>,
    pub summary: String,
}

fn to_js(e: confgeo::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn check_samples(samples: usize) -> confgeo::Result<()> {
    if !(3..=20_000).contains(&samples) {
        return Err(confgeo::Error::BadParams(format!("samples must be in 3..=20000, got {samples}")));
    }
    Ok(())
}

#[derive(Serialize)]
struct Figure1Summary<'a> {
    colour: &'a str,
    label: &'a str,
    c: &'a [f64],
    c_drift: f64,
    plane_deviation: f64,
    circle_deviation: f64,
    max_abs_torsion: f64,
}

pub fn figure1_curves(t1: f64, samples: usize) -> confgeo::Result<Curves> {
    check_samples(samples)?;
    if !(t1 > 0.0 && t1 <= 20.0) {
        return Err(confgeo::Error::BadParams(format!("t1 must be in (0, 20], got {t1}")));
    }
    let runs = checks::figure1(t1, samples, &Settings::rkf45(1e-10))?;
    let mut out = Curves { points: Vec::new(), lengths: Vec::new(), summary: String::new() };
    let mut summary = Vec::new();
    for r in &runs {
        for i in 0..r.trajectory.len() {
            out.points.extend(r.trajectory.position(i).iter());
        }
        out.lengths.push(r.trajectory.len() as u32);
        summary.push(Figure1Summary {
            colour: r.colour,
            label: r.label,
            c: &r.c,
            c_drift: r.c_drift,
            plane_deviation: r.plane_deviation,
            circle_deviation: r.circle_deviation,
            max_abs_torsion: r.max_abs_torsion,
        });
    }
    out.summary = serde_json::to_string(&summary).expect("summary serialises");
    Ok(out)
}

#[derive(Serialize)]
struct LoxodromeSummary {
    c: f64,
    mean_meridian_angle: f64,
    meridian_angle_std: f64,
}

/// Stereographic image on the unit sphere of the plane spiral `eᵗ(cos ct, sin ct)`.
/// It cuts every meridian at the same angle.
pub fn loxodrome(c: f64, t0: f64, t1: f64, samples: usize) -> confgeo::Result<Curves> {
    check_samples(samples)?;
    if !(t1 > t0) {
        return Err(confgeo::Error::BadParams("need t0 < t1".into()));
    }
    let spiral = OracleCurve::Spiral(SpiralParams::new(&[1.0, 0.0], &[0.0, 1.0], &[0.0, 0.0], c)?);
    let mut points = Vec::with_capacity(3 * samples);
    let mut angles = Vec::with_capacity(samples);
    for t in linspace(t0, t1, samples) {
        let d = spiral.derivatives(t)?;
        points.extend(to_sphere(&d[0]).iter());
        angles.push(meridian_angle(&d[0], &d[1])?);
    }
    let mean = angles.iter().sum::<f64>() / angles.len() as f64;
    let var = angles.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / angles.len() as f64;
    let summary = LoxodromeSummary { c, mean_meridian_angle: mean, meridian_angle_std: var.sqrt() };
    Ok(Curves {
        points,
        lengths: vec![samples as u32],
        summary: serde_json::to_string(&summary).expect("summary serialises"),
    })
}

#[derive(Serialize)]
struct ImageSummary {
    b: [f64; 3],
    /// Largest residual of the fourth-order equation along the image.
    max_residual: f64,
}

/// A spiral and its image under the special conformal map with parameter `b`.
pub fn conformal_image(b: [f64; 3], t0: f64, t1: f64, samples: usize) -> confgeo::Result<Curves> {
    check_samples(samples)?;
    if !(t1 > t0) {
        return Err(confgeo::Error::BadParams("need t0 < t1".into()));
    }
    let s = 0.5f64.sqrt();
    let base = OracleCurve::Spiral(SpiralParams::new(&[0.5, 0.0, 0.0], &[0.0, 0.5 * s, 0.5 * s], &[0.2, -0.1, 0.3], 2.0)?);
    let image = OracleCurve::ConformalImage { base: Box::new(base.clone()), b: b.to_vec() };
    let flat = MetricSpec::euclidean(3);
    let mut points = Vec::with_capacity(6 * samples);
    let mut max_residual = 0.0f64;
    let times = linspace(t0, t1, samples);
    for &t in &times {
        points.extend(base.point(t)?.iter());
    }
    for &t in &times {
        let x: DVector<f64> = image.point(t)?;
        let jet = geometry_jet(&flat, x.as_slice(), JetLevel::Full)?;
        let (state, snap) = image.state(&jet, t)?;
        max_residual = max_residual.max(mercator_residual(&jet, &state, &snap)?.amax());
        points.extend(x.iter());
    }
    Ok(Curves {
        points,
        lengths: vec![samples as u32; 2],
        summary: serde_json::to_string(&ImageSummary { b, max_residual }).expect("summary serialises"),
    })
}

#[wasm_bindgen(js_name = figure1)]
pub fn figure1_js(t1: f64, samples: usize) -> Result<Curves, JsError> {
    figure1_curves(t1, samples).map_err(to_js)
}

#[wasm_bindgen(js_name = loxodrome)]
pub fn loxodrome_js(c: f64, t0: f64, t1: f64, samples: usize) -> Result<Curves, JsError> {
    loxodrome(c, t0, t1, samples).map_err(to_js)
}

#[wasm_bindgen(js_name = conformalImage)]
pub fn conformal_image_js(b1: f64, b2: f64, b3: f64, t0: f64, t1: f64, samples: usize) -> Result<Curves, JsError> {
    conformal_image([b1, b2, b3], t0, t1, samples).map_err(to_js)
}
