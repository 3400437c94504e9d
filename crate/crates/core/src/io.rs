//! JSON input definitions and their conversion into domain objects.

use serde::{Deserialize, Serialize};

use crate::algebroid::{
    poisson_cotangent, tangent_bundle, Algebroid, AlgebroidError, FrameChange, StructureEntry,
};
use crate::eform::EForm;
use crate::gauge::{Connection, GaugeError, GaugeParam};
use crate::fieldcalc::FieldSpace;
use crate::morphism::{BundleMap, MorphismError};
use crate::psm::{PsmError, PsmModel};
use crate::symexpr::{parse, Poly, VarId, VarKind, VarTable};

pub const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum InputError {
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported schema version {0}, expected 1")]
    Version(u32),
    #[error("in {context}: cannot parse `{src}`: {msg}")]
    Expr { context: String, src: String, msg: String },
    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Algebroid(#[from] AlgebroidError),
    #[error(transparent)]
    Morphism(#[from] MorphismError),
    #[error(transparent)]
    Gauge(#[from] GaugeError),
    #[error(transparent)]
    Psm(#[from] PsmError),
}

/// A general algebroid (`frame`, `anchor`, `structure`), a tangent bundle
/// (`tangent: true`) or a Poisson cotangent bundle (`poisson`).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgebroidDef {
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub name: String,
    pub base_coords: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub structure: Vec<StructureDef>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub tangent: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poisson: Option<Vec<Vec<String>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructureDef {
    pub upper: String,
    pub lower: [String; 2],
    pub coeff: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapDef {
    #[serde(default)]
    pub name: String,
    pub source: String,
    pub target: String,
    pub phi0: Vec<String>,
    #[serde(rename = "A")]
    pub a: Vec<Vec<String>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaEntry {
    pub upper: String,
    pub base: String,
    pub lower: String,
    pub coeff: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConnectionDef {
    #[serde(default)]
    pub name: String,
    pub gamma: Vec<GammaEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaugeParamDef {
    #[serde(default)]
    pub eps1: Vec<String>,
    pub eps2: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsmDef {
    pub sigma_coords: [String; 2],
    pub base_coords: Vec<String>,
    pub poisson: Vec<Vec<String>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowInit {
    #[serde(rename = "X")]
    pub x: Vec<String>,
    #[serde(rename = "A")]
    pub a: Vec<[String; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowDef {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "L")]
    pub l: String,
    pub dt: f64,
    #[serde(rename = "T")]
    pub t: f64,
    pub eps: Vec<String>,
    pub init: FlowInit,
}

/// Checks the top-level `version` field before any further decoding.
pub fn check_version(v: &serde_json::Value) -> Result<(), InputError> {
    match v.get("version").and_then(|x| x.as_u64()) {
        Some(1) => Ok(()),
        Some(n) => Err(InputError::Version(n as u32)),
        None => Err(InputError::Invalid("missing top-level \"version\": 1".into())),
    }
}

/// Owns the variable table shared by everything built from one input file.
#[derive(Debug, Default)]
pub struct Workspace {
    pub vars: VarTable,
}

impl Workspace {
    pub fn new() -> Self {
        Workspace { vars: VarTable::new() }
    }

    pub fn coords(&mut self, names: &[String], kind: VarKind) -> Result<Vec<VarId>, InputError> {
        names
            .iter()
            .map(|n| {
                self.vars
                    .declare(n, kind)
                    .map_err(|e| InputError::Invalid(format!("coordinate `{n}`: {e}")))
            })
            .collect()
    }

    pub fn poly(&self, src: &str, context: &str) -> Result<Poly, InputError> {
        parse(src, &self.vars).map_err(|e| InputError::Expr {
            context: context.to_string(),
            src: src.to_string(),
            msg: e.to_string(),
        })
    }

    fn polys(&self, srcs: &[String], context: &str) -> Result<Vec<Poly>, InputError> {
        srcs.iter().map(|s| self.poly(s, context)).collect()
    }

    fn matrix(&self, rows: &[Vec<String>], context: &str) -> Result<Vec<Vec<Poly>>, InputError> {
        rows.iter().map(|r| self.polys(r, context)).collect()
    }

    pub fn algebroid(&mut self, name: &str, def: &AlgebroidDef, kind: VarKind) -> Result<Algebroid, InputError> {
        let base = self.coords(&def.base_coords, kind)?;
        let ctx = format!("algebroid `{name}`");
        let conflict = |what: &str| InputError::Invalid(format!("{ctx}: `{what}` cannot be combined with this kind"));
        if def.tangent {
            if def.poisson.is_some() {
                return Err(conflict("poisson"));
            }
            if def.frame.is_some() || def.anchor.is_some() || !def.structure.is_empty() {
                return Err(conflict("frame/anchor/structure"));
            }
            return Ok(tangent_bundle(base, &self.vars)?);
        }
        if let Some(p) = &def.poisson {
            if def.frame.is_some() || def.anchor.is_some() || !def.structure.is_empty() {
                return Err(conflict("frame/anchor/structure"));
            }
            let p = self.matrix(p, &ctx)?;
            return Ok(poisson_cotangent(base, &p, &self.vars)?);
        }
        let frame = def
            .frame
            .clone()
            .ok_or_else(|| InputError::Invalid(format!("{ctx}: missing `frame`")))?;
        let anchor = match &def.anchor {
            Some(rows) => self.matrix(rows, &ctx)?,
            None => vec![vec![Poly::zero(); base.len()]; frame.len()],
        };
        let index = |f: &str| {
            frame.iter().position(|x| x == f).ok_or_else(|| InputError::Unknown {
                kind: "frame element",
                name: f.to_string(),
            })
        };
        let mut entries = Vec::new();
        for s in &def.structure {
            entries.push(StructureEntry {
                upper: index(&s.upper)?,
                lower: (index(&s.lower[0])?, index(&s.lower[1])?),
                coeff: self.poly(&s.coeff, &ctx)?,
            });
        }
        Ok(Algebroid::new(base, frame, anchor, entries)?)
    }

    pub fn map(&self, def: &MapDef, source: &Algebroid, target: &Algebroid) -> Result<BundleMap, InputError> {
        let ctx = format!("map `{}`", def.name);
        let phi0 = self.polys(&def.phi0, &ctx)?;
        let mut a = Vec::new();
        for row in &def.a {
            if row.len() != source.rank() {
                return Err(InputError::Invalid(format!(
                    "{ctx}: each A row needs {} components",
                    source.rank()
                )));
            }
            let comps = self.polys(row, &ctx)?;
            a.push(EForm::one_form(&comps));
        }
        Ok(BundleMap::new(source.clone(), target.clone(), phi0, a)?)
    }

    pub fn connection(&self, def: &ConnectionDef, target: &Algebroid) -> Result<Connection, InputError> {
        let ctx = format!("connection `{}`", def.name);
        let mut g = Connection::zero(target.rank(), target.dim());
        let frame = |f: &str| target.frame_index(f);
        for e in &def.gamma {
            let base = target
                .base()
                .iter()
                .position(|&v| self.vars.name(v) == e.base)
                .ok_or_else(|| InputError::Unknown {
                    kind: "coordinate",
                    name: e.base.clone(),
                })?;
            let (u, l) = (frame(&e.upper)?, frame(&e.lower)?);
            let v = g.get(u, base, l) + &self.poly(&e.coeff, &ctx)?;
            g.set(u, base, l, v);
        }
        Ok(g)
    }

    pub fn gauge_param(&self, def: &GaugeParamDef, space: &FieldSpace) -> Result<GaugeParam, InputError> {
        let eps2 = self.polys(&def.eps2, "gauge parameter")?;
        if def.eps1.is_empty() {
            return Ok(GaugeParam::vertical(space, eps2)?);
        }
        let eps1 = self.polys(&def.eps1, "gauge parameter")?;
        Ok(GaugeParam::new(space, eps1, eps2)?)
    }

    pub fn psm(&mut self, def: &PsmDef) -> Result<PsmModel, InputError> {
        let sigma = self.coords(&def.sigma_coords, VarKind::Source)?;
        let base = self.coords(&def.base_coords, VarKind::Target)?;
        let p = self.matrix(&def.poisson, "poisson")?;
        Ok(PsmModel::new(&self.vars, [sigma[0], sigma[1]], base, p)?)
    }

    pub fn frame_change(&self, b: &[Vec<String>], b_inv: &[Vec<String>]) -> Result<FrameChange, InputError> {
        Ok(FrameChange::new(self.matrix(b, "B")?, self.matrix(b_inv, "B_inv")?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_fields_are_rejected() {
        let bad = r#"{"base_coords": [], "frame": ["e1"], "colour": "red"}"#;
        assert!(serde_json::from_str::<AlgebroidDef>(bad).is_err());
    }

    #[test]
    fn version_gate() {
        assert!(check_version(&serde_json::json!({"version": 1})).is_ok());
        assert!(matches!(check_version(&serde_json::json!({"version": 2})), Err(InputError::Version(2))));
        assert!(check_version(&serde_json::json!({})).is_err());
    }

    #[test]
    fn builds_each_kind() {
        let mut ws = Workspace::new();
        let so3: AlgebroidDef = serde_json::from_str(
            r#"{"base_coords": [], "frame": ["e1","e2","e3"], "structure": [
                {"upper": "e3", "lower": ["e1","e2"], "coeff": "1"},
                {"upper": "e1", "lower": ["e2","e3"], "coeff": "1"},
                {"upper": "e2", "lower": ["e3","e1"], "coeff": "1"}]}"#,
        )
        .unwrap();
        let g = ws.algebroid("so3", &so3, VarKind::Target).unwrap();
        assert!(crate::algebroid::verify_axioms(&g).pass());
        let t: AlgebroidDef = serde_json::from_str(r#"{"base_coords": ["x1","x2"], "tangent": true}"#).unwrap();
        let t = ws.algebroid("t", &t, VarKind::Source).unwrap();
        assert_eq!(t.frame(), ["dx1", "dx2"]);
        let p: AlgebroidDef =
            serde_json::from_str(r#"{"base_coords": ["X1","X2"], "poisson": [["0","X1"],["-X1","0"]]}"#).unwrap();
        let p = ws.algebroid("p", &p, VarKind::Target).unwrap();
        assert_eq!(p.frame(), ["dX1", "dX2"]);
        let m: MapDef = serde_json::from_str(
            r#"{"source": "t", "target": "p", "phi0": ["x1", "1"], "A": [["1", "0"], ["0", "x2"]]}"#,
        )
        .unwrap();
        ws.map(&m, &t, &p).unwrap();
    }

    #[test]
    fn parse_errors_name_the_context() {
        let mut ws = Workspace::new();
        let d: AlgebroidDef =
            serde_json::from_str(r#"{"base_coords": ["X1","X2"], "poisson": [["0","X1 +"],["-X1","0"]]}"#).unwrap();
        let err = ws.algebroid("bad", &d, VarKind::Target).unwrap_err();
        assert!(err.to_string().contains("algebroid `bad`"));
    }
}
