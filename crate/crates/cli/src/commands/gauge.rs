use algebroid::fieldcalc::FieldSpace;
use algebroid::gauge::{closure_check, exact_closure_check, frame_defect_check, GaugeKind};
use algebroid::io::{AlgebroidDef, ConnectionDef, Workspace};
use algebroid::random::trial_rng;
use algebroid::symexpr::VarKind;
use serde::Deserialize;
use serde_json::json;

use super::{identity_check, label, source_or_default};
use crate::{load, CliError, Check, Common, Report};

#[derive(Deserialize)]
#[serde(untagged)]
enum KindDef {
    Named(String),
    Connection { connection: ConnectionDef },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Case {
    #[serde(default)]
    name: String,
    target: AlgebroidDef,
    kinds: Vec<KindDef>,
}

fn default_true() -> bool {
    true
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ClosureFile {
    #[allow(dead_code)]
    version: u32,
    #[serde(default)]
    source: Option<AlgebroidDef>,
    #[serde(default = "default_true")]
    vertical: bool,
    cases: Vec<Case>,
}

/// Kinds: `covariant` (defect vanishes), `corollary` (naive defect equals
/// the predicted field-strength term), `naive` (naive defect vanishes) and
/// `{"connection": ...}`.
pub fn gauge_closure(c: &Common) -> Result<Report, CliError> {
    let file: ClosureFile = load(&c.file)?;
    let mut ws = Workspace::new();
    let source = source_or_default(&mut ws, file.source.as_ref())?;
    let mut report = Report::new("gauge-closure", c);
    for (k, case) in file.cases.iter().enumerate() {
        let name = label(&case.name, k);
        let target = ws.algebroid(&name, &case.target, VarKind::Target)?;
        let space = FieldSpace::new(source.clone(), target);
        for kind in &case.kinds {
            let (kname, rep) = match kind {
                KindDef::Named(s) => match s.as_str() {
                    "covariant" => (
                        "covariant".to_string(),
                        closure_check(&space, &GaugeKind::Covariant, file.vertical, c.trials, c.degree, c.seed)?,
                    ),
                    "corollary" => (
                        "corollary".to_string(),
                        closure_check(&space, &GaugeKind::Naive, true, c.trials, c.degree, c.seed)?,
                    ),
                    "naive" => (
                        "naive".to_string(),
                        exact_closure_check(&space, &GaugeKind::Naive, true, c.trials, c.degree, c.seed)?,
                    ),
                    other => return Err(CliError::Invalid(format!("unknown closure kind `{other}`"))),
                },
                KindDef::Connection { connection } => {
                    let g = ws.connection(connection, &space.target)?;
                    (
                        format!("connection {}", label(&connection.name, 0)),
                        exact_closure_check(&space, &GaugeKind::Connection(g), true, c.trials, c.degree, c.seed)?,
                    )
                }
            };
            report.push(identity_check(format!("{kname}[{name}]"), &rep.identity, &space, &ws));
        }
    }
    Ok(report)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameFile {
    #[allow(dead_code)]
    version: u32,
    #[serde(default)]
    source: Option<AlgebroidDef>,
    target: AlgebroidDef,
    #[serde(rename = "B")]
    b: Vec<Vec<String>>,
    #[serde(rename = "B_inv")]
    b_inv: Vec<Vec<String>>,
}

pub fn frame_covariance(c: &Common) -> Result<Report, CliError> {
    let file: FrameFile = load(&c.file)?;
    let mut ws = Workspace::new();
    let source = source_or_default(&mut ws, file.source.as_ref())?;
    let target = ws.algebroid("target", &file.target, VarKind::Target)?;
    let fc = ws.frame_change(&file.b, &file.b_inv)?;
    let space = FieldSpace::new(source, target);
    let mut report = Report::new("frame-covariance", c);

    let mut witness = None;
    for t in 0..c.trials {
        let phi = space.random_fields(&mut trial_rng(c.seed, t as u64), c.degree);
        let defects = phi.frame_change_defect(&fc)?;
        if let Some((i, d)) = defects.iter().enumerate().find(|(_, d)| !d.is_zero()) {
            witness = Some(format!(
                "trial {t}: F[{}] defect = {}",
                i + 1,
                d.display(space.source.frame(), &ws.vars)
            ));
            break;
        }
    }
    report.push(
        Check::new("field strength frame change", witness.is_none())
            .witness(witness)
            .detail(json!({"trials": c.trials, "seed": c.seed})),
    );
    let rep = frame_defect_check(&space, &fc, c.trials, c.degree, c.seed)?;
    report.push(identity_check("gauge frame defects".into(), &rep, &space, &ws));
    Ok(report)
}
