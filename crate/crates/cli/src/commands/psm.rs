use algebroid::eform::EForm;
use algebroid::fieldcalc::Expr;
use algebroid::gauge::{delta_conn, gauge_condition_check, ParamExprs};
use algebroid::io::{ConnectionDef, PsmDef, Workspace};
use algebroid::morphism::BundleMap;
use algebroid::psm::PsmModel;
use serde::Deserialize;
use serde_json::json;

use super::{identity_check, label};
use crate::{load, CliError, Check, Common, Report};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PsmMapDef {
    #[serde(default)]
    name: String,
    phi0: Vec<String>,
    #[serde(rename = "A")]
    a: Vec<Vec<String>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDef {
    #[serde(default)]
    name: String,
    sigma_coords: [String; 2],
    base_coords: Vec<String>,
    poisson: Vec<Vec<String>>,
    /// Target 1-forms `eps_i(X) dX^i`, one list of components per case.
    #[serde(default)]
    eps: Vec<Vec<String>>,
    #[serde(default)]
    connections: Vec<ConnectionDef>,
    #[serde(default)]
    maps: Vec<PsmMapDef>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PsmFile {
    #[allow(dead_code)]
    version: u32,
    models: Vec<ModelDef>,
}

pub fn psm_variation(c: &Common) -> Result<Report, CliError> {
    let file: PsmFile = load(&c.file)?;
    let mut ws = Workspace::new();
    let mut report = Report::new("psm-variation", c);
    for (k, def) in file.models.iter().enumerate() {
        let name = label(&def.name, k);
        let model = ws.psm(&PsmDef {
            sigma_coords: def.sigma_coords.clone(),
            base_coords: def.base_coords.clone(),
            poisson: def.poisson.clone(),
        })?;
        let space = model.space();

        for (e, comps) in def.eps.iter().enumerate() {
            let eps = comps
                .iter()
                .map(|s| ws.poly(s, &format!("model `{name}` eps")))
                .collect::<Result<Vec<_>, _>>()?;
            let condition = gauge_condition_check(model.target().base(), model.poisson(), &eps)?;
            let eps_e: Vec<Expr> = eps.iter().cloned().map(Expr::func).collect();
            let residual = model
                .variation_expr(&eps)
                .map_err(|e| CliError::Input(e.into()))?
                .sub(&model.exact_term(&eps_e));
            let rep = space.identity_check(&[("residual".into(), residual)], &[], c.trials, c.degree, c.seed)?;
            let mut check = identity_check(format!("variation[{name}/eps {}]", e + 1), &rep, &space, &ws);
            check.pass = rep.pass == condition;
            if check.pass {
                check.witness = None;
            }
            if let Some(d) = check.detail.as_mut() {
                d["gauge_condition"] = json!(condition);
                d["exact"] = json!(rep.pass);
            }
            report.push(check);
        }

        let lagrangian = model.action_expr();
        for (g, cdef) in def.connections.iter().enumerate() {
            let gamma = ws.connection(cdef, model.target())?;
            let torsion_free = gamma.is_torsion_free_cotangent();
            let (eps, slots) = ParamExprs::slots(&space, 0, true);
            let v = delta_conn(&space, &eps, &gamma)?;
            let e = space.vary(&lagrangian, &v).sub(&model.exact_term(&eps.eps2));
            let rep = space.identity_check(&[("dL".into(), e)], &slots, c.trials, c.degree, c.seed)?;
            let cname = label(&cdef.name, g);
            let mut check = identity_check(format!("torsion[{name}/{cname}]"), &rep, &space, &ws);
            check.pass = rep.pass == torsion_free;
            if check.pass {
                check.witness = None;
            }
            if let Some(d) = check.detail.as_mut() {
                d["torsion_free"] = json!(torsion_free);
                d["invariant"] = json!(rep.pass);
            }
            report.push(check);
        }

        for (m, mdef) in def.maps.iter().enumerate() {
            let mname = label(&mdef.name, m);
            let phi = build_map(&ws, &model, mdef)?;
            let frame = model.source().frame();
            let action = model.action_density(&phi);
            report.push(match &action {
                Ok(d) => Check::new(format!("action routes[{name}/{mname}]"), true)
                    .detail(json!({ "density": d.display(frame, &ws.vars).to_string() })),
                Err(e) => Check::new(format!("action routes[{name}/{mname}]"), false).witness(Some(e.to_string())),
            });
            let el = model.euler_lagrange(&phi);
            report.push(match &el {
                Ok(curv) => {
                    let nonzero: Vec<String> = curv
                        .nonzero(model.target(), &ws.vars)
                        .iter()
                        .map(|(n, f)| format!("{n} = {}", f.display(frame, &ws.vars)))
                        .collect();
                    Check::new(format!("field equations[{name}/{mname}]"), true)
                        .detail(json!({ "solution": nonzero.is_empty(), "nonzero": nonzero }))
                }
                Err(e) => Check::new(format!("field equations[{name}/{mname}]"), false).witness(Some(e.to_string())),
            });
        }
    }
    Ok(report)
}

fn build_map(ws: &Workspace, model: &PsmModel, def: &PsmMapDef) -> Result<BundleMap, CliError> {
    let ctx = format!("map `{}`", def.name);
    let phi0 = def.phi0.iter().map(|s| ws.poly(s, &ctx)).collect::<Result<Vec<_>, _>>()?;
    let a = def
        .a
        .iter()
        .map(|row| {
            let comps = row.iter().map(|s| ws.poly(s, &ctx)).collect::<Result<Vec<_>, _>>()?;
            if comps.len() != 2 {
                return Err(CliError::Invalid(format!("{ctx}: A rows need 2 components")));
            }
            Ok(EForm::one_form(&comps))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(BundleMap::new(model.source().clone(), model.target().clone(), phi0, a)?)
}
