use algebroid::flow::{integrate_flow, FlowConfig, FlowModel, GridField, ScalarField, Trajectory};
use algebroid::io::{AlgebroidDef, FlowDef, PsmDef, Workspace};
use algebroid::symexpr::{rat_to_f64, VarKind};
use serde::Deserialize;
use serde_json::json;

use crate::{load, write_file, CliError, Check, FlowArgs, Report};

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FlowChecks {
    /// Bound on `sup|F|` over the run, as a multiple of its initial value.
    #[serde(default)]
    envelope: Option<f64>,
    /// Accepted range for `sup|F|(T)` at `N` over the same at `2N`.
    #[serde(default)]
    refinement: Option<[f64; 2]>,
    /// Accepted range for `|S(T) - S(0)|` at `N` over the same at `2N`.
    #[serde(default)]
    action_refinement: Option<[f64; 2]>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FlowFile {
    #[allow(dead_code)]
    version: u32,
    #[serde(default)]
    psm: Option<PsmDef>,
    #[serde(default)]
    target: Option<AlgebroidDef>,
    #[serde(default)]
    sigma_coords: Option<[String; 2]>,
    flow: FlowDef,
    #[serde(default)]
    checks: FlowChecks,
}

struct Setup {
    model: FlowModel,
    period: f64,
}

fn setup(file: &FlowFile) -> Result<Setup, CliError> {
    let mut ws = Workspace::new();
    let model = match (&file.psm, &file.target) {
        (Some(p), None) => {
            if file.sigma_coords.is_some() {
                return Err(CliError::Invalid("`sigma_coords` belongs inside `psm`".into()));
            }
            let m = ws.psm(p)?;
            FlowModel::psm(&m, &ws.vars)?
        }
        (None, Some(t)) => {
            let sigma = file
                .sigma_coords
                .clone()
                .unwrap_or_else(|| ["x1".to_string(), "x2".to_string()]);
            ws.coords(&sigma, VarKind::Source)?;
            let e = ws.algebroid("target", t, VarKind::Target)?;
            FlowModel::new(&e, &ws.vars, [&sigma[0], &sigma[1]])?
        }
        _ => return Err(CliError::Invalid("give exactly one of `psm` and `target`".into())),
    };
    let l = ws.poly(&file.flow.l, "L")?;
    let period = l
        .constant_value()
        .map(|r| rat_to_f64(&r))
        .filter(|v| *v > 0.0)
        .ok_or_else(|| CliError::Invalid(format!("L must be a positive rational, got `{}`", file.flow.l)))?;
    Ok(Setup { model, period })
}

fn run(s: &Setup, def: &FlowDef, n: usize) -> Result<Trajectory, CliError> {
    let m = &s.model;
    let x = m.parse_fields(&def.init.x)?;
    let a = def
        .init
        .a
        .iter()
        .map(|pair| {
            let mut v = m.parse_fields(pair)?;
            let second = v.pop().expect("two components");
            Ok([v.pop().expect("two components"), second])
        })
        .collect::<Result<Vec<[ScalarField; 2]>, CliError>>()?;
    let g = GridField::sample(m, n, s.period, &x, &a)?;
    let cfg = FlowConfig::new(def.dt, def.t, m.parse_fields(&def.eps)?)?;
    Ok(integrate_flow(&g, m, &cfg)?)
}

fn drift(t: &Trajectory) -> Option<f64> {
    Some((t.samples.last()?.action? - t.samples.first()?.action?).abs())
}

fn ratio_check(name: &str, coarse: f64, fine: f64, range: [f64; 2]) -> Check {
    let ratio = coarse / fine;
    Check::new(name, ratio >= range[0] && ratio <= range[1])
        .witness(Some(format!("ratio {ratio:.4} outside [{}, {}]", range[0], range[1])))
        .detail(json!({ "coarse": coarse, "fine": fine, "ratio": ratio, "range": range }))
}

pub fn flow(args: &FlowArgs) -> Result<Report, CliError> {
    let c = &args.common;
    let file: FlowFile = load(&c.file)?;
    let s = setup(&file)?;
    let def = &file.flow;
    let base = run(&s, def, def.n)?;
    let mut report = Report::new("flow", c);

    let first = base.samples.first().expect("initial sample");
    let last = base.samples.last().expect("initial sample");
    report.push(
        Check::new("finite", base.blowup.is_none())
            .witness(base.blowup.map(|t| format!("non-finite state at t = {t}")))
            .detail(json!({
                "N": def.n,
                "steps": base.samples.len() - 1,
                "initial": [first.residuals.base, first.residuals.frame],
                "final": [last.residuals.base, last.residuals.frame],
                "action": [first.action, last.action],
            })),
    );
    if let Some(factor) = file.checks.envelope {
        let r0 = first.residuals.max();
        let worst = base.samples.iter().map(|s| s.residuals.max()).fold(0.0, f64::max);
        report.push(
            Check::new("envelope", worst <= factor * r0)
                .witness(Some(format!("sup|F| reached {worst:e}, initial {r0:e}")))
                .detail(json!({ "initial": r0, "max": worst, "factor": factor })),
        );
    }
    if file.checks.refinement.is_some() || file.checks.action_refinement.is_some() {
        let fine = run(&s, def, 2 * def.n)?;
        if let Some(range) = file.checks.refinement {
            let coarse = last.residuals.max();
            let f = fine.samples.last().expect("initial sample").residuals.max();
            report.push(ratio_check("refinement", coarse, f, range));
        }
        if let Some(range) = file.checks.action_refinement {
            match (drift(&base), drift(&fine)) {
                (Some(a), Some(b)) => report.push(ratio_check("action refinement", a, b, range)),
                _ => report.push(Check::new("action refinement", false).witness(Some("no action for this target".into()))),
            }
        }
    }
    for check in report.checks.iter_mut().filter(|c| c.pass) {
        check.witness = None;
    }

    if let Some(path) = &args.csv {
        write_file(path, &base.csv())?;
    }
    if let Some(path) = &args.state {
        let state = json!({
            "N": base.last.size(),
            "L": base.last.period(),
            "X": base.last.x(),
            "A": base.last.a(),
        });
        let mut text = serde_json::to_string(&state).expect("state serialises");
        text.push('\n');
        write_file(path, &text)?;
    }
    Ok(report)
}
