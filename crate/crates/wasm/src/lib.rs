//! Three entry points for the static demo page. Each takes and returns JSON
//! text so the page needs no generated bindings beyond strings.

use algebroid::algebroid::{jacobi_poisson, poisson_cotangent, verify_axioms};
use algebroid::eform::EForm;
use algebroid::flow::{integrate_flow, FlowConfig, FlowModel, GridField, ScalarField};
use algebroid::io::{InputError, PsmDef, Workspace};
use algebroid::morphism::BundleMap;
use algebroid::symexpr::{rat_to_f64, VarKind};
use serde::Deserialize;
use serde_json::json;
use wasm_bindgen::prelude::*;

#[derive(Debug, thiserror::Error)]
pub enum DemoError {
    #[error("bad request: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Input(#[from] InputError),
    #[error("{0}")]
    Invalid(String),
}

impl From<algebroid::flow::FlowError> for DemoError {
    fn from(e: algebroid::flow::FlowError) -> Self {
        DemoError::Invalid(e.to_string())
    }
}

impl From<algebroid::algebroid::AlgebroidError> for DemoError {
    fn from(e: algebroid::algebroid::AlgebroidError) -> Self {
        DemoError::Invalid(e.to_string())
    }
}

impl From<algebroid::morphism::MorphismError> for DemoError {
    fn from(e: algebroid::morphism::MorphismError) -> Self {
        DemoError::Invalid(e.to_string())
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PoissonRequest {
    base_coords: Vec<String>,
    poisson: Vec<Vec<String>>,
}

/// `{"base_coords": [..], "poisson": [[..]]}` to
/// `{"holds", "witnesses": [[i, j, k, value]], "axioms": bool}`.
pub fn poisson_report(request: &str) -> Result<String, DemoError> {
    let req: PoissonRequest = serde_json::from_str(request)?;
    let mut ws = Workspace::new();
    let base = ws.coords(&req.base_coords, VarKind::Target)?;
    let p = req
        .poisson
        .iter()
        .map(|row| row.iter().map(|s| ws.poly(s, "poisson")).collect::<Result<Vec<_>, _>>())
        .collect::<Result<Vec<_>, _>>()?;
    let report = jacobi_poisson(&base, &p)?;
    let axioms = verify_axioms(&poisson_cotangent(base, &p, &ws.vars)?).pass();
    let witnesses: Vec<_> = report
        .witnesses
        .iter()
        .map(|((i, j, k), v)| json!([i + 1, j + 1, k + 1, v.display(&ws.vars).to_string()]))
        .collect();
    Ok(json!({ "holds": report.holds, "witnesses": witnesses, "axioms": axioms }).to_string())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MapRequest {
    base_coords: Vec<String>,
    poisson: Vec<Vec<String>>,
    phi0: Vec<String>,
    #[serde(rename = "A")]
    a: Vec<[String; 2]>,
}

/// A map from `TR^2` (coordinates `x1, x2`) into a Poisson cotangent
/// algebroid: nonzero field strengths and the sigma-model density.
pub fn map_report(request: &str) -> Result<String, DemoError> {
    let req: MapRequest = serde_json::from_str(request)?;
    let mut ws = Workspace::new();
    let model = ws.psm(&PsmDef {
        sigma_coords: ["x1".into(), "x2".into()],
        base_coords: req.base_coords,
        poisson: req.poisson,
    })?;
    let phi0 = req
        .phi0
        .iter()
        .map(|s| ws.poly(s, "phi0"))
        .collect::<Result<Vec<_>, _>>()?;
    let a = req
        .a
        .iter()
        .map(|[u, v]| Ok(EForm::one_form(&[ws.poly(u, "A")?, ws.poly(v, "A")?])))
        .collect::<Result<Vec<_>, DemoError>>()?;
    let phi = BundleMap::new(model.source().clone(), model.target().clone(), phi0, a)?;
    let frame = model.source().frame();
    let nonzero: Vec<String> = phi
        .curvature()
        .nonzero(model.target(), &ws.vars)
        .iter()
        .map(|(n, f)| format!("{n} = {}", f.display(frame, &ws.vars)))
        .collect();
    let density = model
        .action_density(&phi)
        .map(|d| d.display(frame, &ws.vars).to_string())
        .map_err(|e| DemoError::Invalid(e.to_string()))?;
    Ok(json!({ "morphism": nonzero.is_empty(), "nonzero": nonzero, "density": density }).to_string())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FlowRequest {
    base_coords: Vec<String>,
    poisson: Vec<Vec<String>>,
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "L")]
    l: String,
    dt: f64,
    #[serde(rename = "T")]
    t: f64,
    eps: Vec<String>,
    #[serde(rename = "X")]
    x: Vec<String>,
    #[serde(rename = "A")]
    a: Vec<[String; 2]>,
}

/// Runs the gauge flow on the torus and returns one row per step.
pub fn flow_report(request: &str) -> Result<String, DemoError> {
    let req: FlowRequest = serde_json::from_str(request)?;
    let mut ws = Workspace::new();
    let model = ws.psm(&PsmDef {
        sigma_coords: ["x1".into(), "x2".into()],
        base_coords: req.base_coords,
        poisson: req.poisson,
    })?;
    let fm = FlowModel::psm(&model, &ws.vars)?;
    let period = ws
        .poly(&req.l, "L")?
        .constant_value()
        .map(|r| rat_to_f64(&r))
        .filter(|v| *v > 0.0)
        .ok_or_else(|| DemoError::Invalid("L must be a positive constant".into()))?;
    let x = fm.parse_fields(&req.x)?;
    let a = req
        .a
        .iter()
        .map(|pair| {
            let mut v = fm.parse_fields(pair)?;
            let second = v.pop().expect("two components");
            Ok([v.pop().expect("two components"), second])
        })
        .collect::<Result<Vec<[ScalarField; 2]>, DemoError>>()?;
    let g = GridField::sample(&fm, req.n, period, &x, &a)?;
    let cfg = FlowConfig::new(req.dt, req.t, fm.parse_fields(&req.eps)?)?;
    let traj = integrate_flow(&g, &fm, &cfg)?;
    let rows: Vec<_> = traj
        .samples
        .iter()
        .map(|s| json!([s.t, s.residuals.base, s.residuals.frame, s.action]))
        .collect();
    Ok(json!({ "rows": rows, "blowup": traj.blowup }).to_string())
}

fn js(r: Result<String, DemoError>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn check_poisson(request: &str) -> Result<String, JsError> {
    js(poisson_report(request))
}

#[wasm_bindgen]
pub fn map_curvature(request: &str) -> Result<String, JsError> {
    js(map_report(request))
}

#[wasm_bindgen]
pub fn flow_trajectory(request: &str) -> Result<String, JsError> {
    js(flow_report(request))
}
