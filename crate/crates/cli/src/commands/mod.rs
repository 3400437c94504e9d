mod axioms;
mod flow;
mod gauge;
mod morphism;
mod psm;

pub use axioms::{check_algebroid, check_poisson};
pub use flow::flow;
pub use gauge::{frame_covariance, gauge_closure};
pub use morphism::check_morphism;
pub use psm::psm_variation;

use algebroid::fieldcalc::{FieldSpace, IdentityReport};
use algebroid::io::{AlgebroidDef, Workspace};
use algebroid::symexpr::VarKind;
use serde_json::json;

use crate::{CliError, Check};

fn label(name: &str, index: usize) -> String {
    if name.is_empty() {
        format!("#{}", index + 1)
    } else {
        name.to_string()
    }
}

/// The worldsheet `TR^2` with coordinates `x1, x2` unless given.
fn source_or_default(ws: &mut Workspace, def: Option<&AlgebroidDef>) -> Result<algebroid::algebroid::Algebroid, CliError> {
    let fallback = AlgebroidDef {
        name: "source".into(),
        base_coords: vec!["x1".into(), "x2".into()],
        frame: None,
        anchor: None,
        structure: Vec::new(),
        tangent: true,
        poisson: None,
    };
    let def = def.unwrap_or(&fallback);
    Ok(ws.algebroid("source", def, VarKind::Source)?)
}

fn identity_check(name: String, rep: &IdentityReport, space: &FieldSpace, ws: &Workspace) -> Check {
    let witness = rep.witness.as_ref().map(|w| {
        format!(
            "trial {}: {} = {}",
            w.trial,
            w.name,
            w.value.display(space.source.frame(), &ws.vars)
        )
    });
    let fields = rep.witness.as_ref().map(|w| w.fields.display(&ws.vars).to_string());
    let mut detail = json!({"trials": rep.trials, "seed": rep.seed});
    if let Some(f) = fields {
        detail["fields"] = json!(f);
    }
    Check::new(name, rep.pass).witness(witness).detail(detail)
}
