use algebroid::algebroid::{jacobi_poisson, poisson_cotangent, verify_axioms};
use algebroid::io::{AlgebroidDef, Workspace};
use algebroid::symexpr::VarKind;
use serde::Deserialize;
use serde_json::json;

use super::label;
use crate::{load, CliError, Check, Common, Report};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AlgebroidFile {
    #[allow(dead_code)]
    version: u32,
    algebroids: Vec<AlgebroidDef>,
}

pub fn check_algebroid(c: &Common) -> Result<Report, CliError> {
    let file: AlgebroidFile = load(&c.file)?;
    let mut ws = Workspace::new();
    let mut report = Report::new("check-algebroid", c);
    for (k, def) in file.algebroids.iter().enumerate() {
        let name = label(&def.name, k);
        let e = ws.algebroid(&name, def, VarKind::Target)?;
        let ax = verify_axioms(&e);
        let witnesses: Vec<String> = ax.witnesses.iter().map(|w| w.display(&e, &ws.vars).to_string()).collect();
        report.push(
            Check::new(format!("axioms[{name}]"), ax.pass())
                .witness(witnesses.first().cloned())
                .detail(json!({
                    "anchor_compat": ax.anchor_compat,
                    "jacobi": ax.jacobi,
                    "witnesses": witnesses,
                })),
        );
        report.push(
            Check::new(format!("d squared[{name}]"), ax.routes_agree()).detail(json!({
                "dd_coords": ax.dd_coords,
                "dd_frame": ax.dd_frame,
            })),
        );
    }
    Ok(report)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PoissonFile {
    #[allow(dead_code)]
    version: u32,
    #[serde(default)]
    name: String,
    base_coords: Vec<String>,
    poisson: Vec<Vec<String>>,
}

pub fn check_poisson(c: &Common) -> Result<Report, CliError> {
    let file: PoissonFile = load(&c.file)?;
    let mut ws = Workspace::new();
    let base = ws.coords(&file.base_coords, VarKind::Target)?;
    let p = file
        .poisson
        .iter()
        .map(|row| row.iter().map(|s| ws.poly(s, "poisson")).collect::<Result<Vec<_>, _>>())
        .collect::<Result<Vec<_>, _>>()?;
    let name = label(&file.name, 0);
    let rep = jacobi_poisson(&base, &p).map_err(|e| CliError::Input(e.into()))?;
    let witnesses: Vec<String> = rep
        .witnesses
        .iter()
        .map(|((i, j, k), v)| format!("({},{},{}): {}", i + 1, j + 1, k + 1, v.display(&ws.vars)))
        .collect();
    let mut report = Report::new("check-poisson", c);
    report.push(
        Check::new(format!("jacobi[{name}]"), rep.holds)
            .witness(witnesses.first().cloned())
            .detail(json!({ "witnesses": witnesses })),
    );
    let alg = poisson_cotangent(base, &p, &ws.vars).map_err(|e| CliError::Input(e.into()))?;
    let axioms = verify_axioms(&alg).pass();
    report.push(
        Check::new(format!("cotangent axioms agree[{name}]"), axioms == rep.holds)
            .detail(json!({ "cotangent_axioms": axioms })),
    );
    Ok(report)
}
