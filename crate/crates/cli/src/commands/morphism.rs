use std::collections::{HashMap, HashSet};

use algebroid::algebroid::{Algebroid, Section};
use algebroid::io::{AlgebroidDef, InputError, MapDef, Workspace};
use algebroid::morphism::BundleMap;
use algebroid::random::{random_eform, random_homogeneous, trial_rng};
use algebroid::symexpr::VarKind;
use serde::Deserialize;
use serde_json::json;

use super::label;
use crate::{load, CliError, Check, Common, Report};

const SPOT_CHECKS: usize = 10;
const PROJECTOR_FORMS: usize = 20;
const LEIBNIZ_PAIRS: usize = 10;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MorphismFile {
    #[allow(dead_code)]
    version: u32,
    algebroids: Vec<AlgebroidDef>,
    maps: Vec<MapDef>,
}

pub fn check_morphism(c: &Common) -> Result<Report, CliError> {
    let file: MorphismFile = load(&c.file)?;
    let mut ws = Workspace::new();
    let sources: HashSet<&str> = file.maps.iter().map(|m| m.source.as_str()).collect();
    let mut algs: HashMap<String, Algebroid> = HashMap::new();
    for (k, def) in file.algebroids.iter().enumerate() {
        let name = label(&def.name, k);
        let kind = if sources.contains(name.as_str()) {
            VarKind::Source
        } else {
            VarKind::Target
        };
        let e = ws.algebroid(&name, def, kind)?;
        algs.insert(name, e);
    }
    let find = |n: &str| {
        algs.get(n).ok_or_else(|| {
            CliError::Input(InputError::Unknown {
                kind: "algebroid",
                name: n.to_string(),
            })
        })
    };
    let mut report = Report::new("check-morphism", c);
    for (k, def) in file.maps.iter().enumerate() {
        let name = label(&def.name, k);
        let m = ws.map(def, find(&def.source)?, find(&def.target)?)?;
        for check in map_checks(&m, &name, &ws, c, k as u64)? {
            report.push(check);
        }
    }
    Ok(report)
}

fn map_checks(m: &BundleMap, name: &str, ws: &Workspace, c: &Common, stream: u64) -> Result<Vec<Check>, CliError> {
    let mut rng = trial_rng(c.seed, stream);
    let mut out = Vec::new();

    let rep = m.is_morphism(&mut rng, SPOT_CHECKS);
    let nonzero: Vec<String> = rep
        .curvature
        .nonzero(m.target(), &ws.vars)
        .iter()
        .map(|(n, f)| format!("{n} = {}", f.display(m.source().frame(), &ws.vars)))
        .collect();
    out.push(
        Check::new(format!("morphism[{name}]"), rep.is_morphism())
            .witness(nonzero.first().cloned())
            .detail(json!({
                "field_strengths_vanish": rep.f_verdict,
                "chain_map_spot_checks": rep.spot_verdict,
                "spot_checks": rep.spot_checks,
                "nonzero": nonzero,
            })),
    );
    out.push(Check::new(format!("spot-check agrees[{name}]"), rep.agrees()));

    let graph = m.graph_is_morphism()?;
    out.push(
        Check::new(format!("graph agrees[{name}]"), graph == rep.f_verdict).detail(json!({ "graph_morphism": graph })),
    );

    let sum = m.graph_algebroid()?;
    let mut projector = true;
    for _ in 0..PROJECTOR_FORMS {
        let w = random_eform(&mut rng, sum.rank(), 3, sum.base(), c.degree);
        let once = m.e_phi(&w)?;
        if m.e_phi(&once)? != once {
            projector = false;
        }
    }
    out.push(Check::new(format!("projector[{name}]"), projector).detail(json!({ "forms": PROJECTOR_FORMS })));

    let t = m.target();
    let mut leibniz = true;
    for k in 0..LEIBNIZ_PAIRS {
        let (p, q) = (k % 3, (k / 3) % 3);
        let w = random_homogeneous(&mut rng, t.rank(), p, t.base(), c.degree);
        let v = random_homogeneous(&mut rng, t.rank(), q, t.base(), c.degree);
        let lhs = m.f_phi(&w.wedge(&v))?;
        let first = m.f_phi(&w)?.wedge(&m.pullback(&v)?);
        let second = m.pullback(&w)?.wedge(&m.f_phi(&v)?);
        let rhs = if p % 2 == 0 { first.add(&second) } else { first.sub(&second) };
        if lhs != rhs {
            leibniz = false;
        }
    }
    out.push(Check::new(format!("leibniz[{name}]"), leibniz).detail(json!({ "pairs": LEIBNIZ_PAIRS })));

    let r1 = m.source().rank();
    let mut pairs = Vec::new();
    let mut lifted = Vec::new();
    for a in 0..r1 {
        let s1 = Section::basis(r1, a);
        if let Some(s2) = m.lift_section(&s1) {
            if !s2.is_zero() {
                lifted.push(a + 1);
            }
            pairs.push((s1, s2));
        }
    }
    let rel = m.phi_related(&pairs);
    let ok = !rep.is_morphism() || rel.all_related();
    out.push(
        Check::new(format!("relation[{name}]"), ok).detail(json!({
            "anchor_related": rel.anchor,
            "lifted_coordinate_sections": lifted,
            "brackets_related": rel.brackets.iter().all(|(_, b)| *b),
        })),
    );
    Ok(out)
}
