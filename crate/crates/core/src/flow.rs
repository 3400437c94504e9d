//! Numeric gauge flow on a periodic square grid.

use std::collections::HashMap;

use crate::algebroid::Algebroid;
use crate::psm::PsmModel;
use crate::symexpr::{rat_to_f64, Poly, VarId, VarTable};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FlowError {
    #[error("non-finite value at t = {0}")]
    NonFinite(f64),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("bad configuration: {0}")]
    Config(String),
    #[error("cannot parse `{src}`: {msg}")]
    Expr { src: String, msg: String },
    #[error("polynomial uses a variable outside the target base")]
    ForeignVariable,
    #[error("the action needs a Poisson target")]
    NotPsm,
}

/// A polynomial with `f64` coefficients, indexed by position in the target base.
#[derive(Debug, Clone)]
pub struct CompiledPoly {
    terms: Vec<(f64, Vec<(usize, i32)>)>,
}

impl CompiledPoly {
    pub fn new(p: &Poly, base: &[VarId]) -> Result<Self, FlowError> {
        let mut terms = Vec::with_capacity(p.num_terms());
        for (m, c) in p.terms() {
            let mut powers = Vec::new();
            for &(v, e) in m.pairs() {
                let i = base.iter().position(|&b| b == v).ok_or(FlowError::ForeignVariable)?;
                powers.push((i, e as i32));
            }
            terms.push((rat_to_f64(c), powers));
        }
        Ok(CompiledPoly { terms })
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(c, powers)| powers.iter().fold(*c, |acc, &(i, e)| acc * x[i].powi(e)))
            .sum()
    }
}

struct Point<'a> {
    names: &'a [String],
    values: &'a [f64],
}

impl meval::ContextProvider for Point<'_> {
    fn get_var(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }
}

/// A real expression in named variables, e.g. `sin(2*pi*x1/L) + X1^2`.
pub struct ScalarField {
    expr: meval::Expr,
    names: Vec<String>,
    ctx: meval::Context<'static>,
}

impl std::fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScalarField").field("names", &self.names).finish()
    }
}

impl ScalarField {
    pub fn parse(src: &str, names: &[String]) -> Result<Self, FlowError> {
        let err = |msg: String| FlowError::Expr {
            src: src.to_string(),
            msg,
        };
        let expr: meval::Expr = src.parse().map_err(|e: meval::Error| err(e.to_string()))?;
        let field = ScalarField {
            expr,
            names: names.to_vec(),
            ctx: meval::Context::new(),
        };
        let zeros = vec![0.0; names.len()];
        field
            .expr
            .eval_with_context((Point { names, values: &zeros }, &field.ctx))
            .map_err(|e| err(e.to_string()))?;
        Ok(field)
    }

    pub fn eval(&self, values: &[f64]) -> f64 {
        let pt = Point {
            names: &self.names,
            values,
        };
        self.expr.eval_with_context((pt, &self.ctx)).unwrap_or(f64::NAN)
    }
}

/// Anchor, structure functions and, for sigma models, the Poisson tensor,
/// compiled for pointwise evaluation.
#[derive(Debug, Clone)]
pub struct FlowModel {
    sigma_names: [String; 2],
    target_names: Vec<String>,
    anchor: Vec<Vec<CompiledPoly>>,
    structure: Vec<(usize, usize, usize, CompiledPoly)>,
    poisson: Option<Vec<Vec<CompiledPoly>>>,
}

impl FlowModel {
    pub fn new(target: &Algebroid, vars: &VarTable, sigma_names: [&str; 2]) -> Result<Self, FlowError> {
        let base = target.base();
        let anchor = (0..target.rank())
            .map(|big| {
                (0..target.dim())
                    .map(|i| CompiledPoly::new(target.anchor(big, i), base))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut structure = Vec::new();
        for upper in 0..target.rank() {
            for j in 0..target.rank() {
                for k in 0..target.rank() {
                    let c = target.structure(upper, j, k);
                    if !c.is_zero() {
                        structure.push((upper, j, k, CompiledPoly::new(&c, base)?));
                    }
                }
            }
        }
        Ok(FlowModel {
            sigma_names: sigma_names.map(String::from),
            target_names: base.iter().map(|&v| vars.name(v).to_string()).collect(),
            anchor,
            structure,
            poisson: None,
        })
    }

    pub fn psm(model: &PsmModel, vars: &VarTable) -> Result<Self, FlowError> {
        let [s1, s2] = model.sigma();
        let mut out = FlowModel::new(model.target(), vars, [vars.name(s1), vars.name(s2)])?;
        let base = model.target().base();
        out.poisson = Some(
            model
                .poisson()
                .iter()
                .map(|row| row.iter().map(|p| CompiledPoly::new(p, base)).collect())
                .collect::<Result<_, _>>()?,
        );
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.target_names.len()
    }

    pub fn rank(&self) -> usize {
        self.anchor.len()
    }

    /// Variable names visible to expressions: worldsheet coordinates,
    /// target coordinates, then the period `L`.
    pub fn names(&self) -> Vec<String> {
        let mut out: Vec<String> = self.sigma_names.to_vec();
        out.extend(self.target_names.iter().cloned());
        out.push("L".into());
        out
    }

    pub fn parse_fields(&self, srcs: &[String]) -> Result<Vec<ScalarField>, FlowError> {
        let names = self.names();
        srcs.iter().map(|s| ScalarField::parse(s, &names)).collect()
    }
}

/// Fields on the torus `[0, L)^2` sampled at `N x N` points, row-major in `(x1, x2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    n: usize,
    period: f64,
    x: Vec<Vec<f64>>,
    a: Vec<[Vec<f64>; 2]>,
}

impl GridField {
    pub fn new(n: usize, period: f64, x: Vec<Vec<f64>>, a: Vec<[Vec<f64>; 2]>) -> Result<Self, FlowError> {
        if n < 3 {
            return Err(FlowError::Shape("grid needs at least 3 points per axis".into()));
        }
        if !(period > 0.0 && period.is_finite()) {
            return Err(FlowError::Config("period must be positive".into()));
        }
        let len = n * n;
        if x.iter().any(|v| v.len() != len) || a.iter().any(|c| c.iter().any(|v| v.len() != len)) {
            return Err(FlowError::Shape(format!("arrays must have {len} entries")));
        }
        let g = GridField { n, period, x, a };
        if !g.is_finite() {
            return Err(FlowError::NonFinite(0.0));
        }
        Ok(g)
    }

    /// Samples `X^i` and `A^I_mu` from expressions in the worldsheet coordinates.
    pub fn sample(
        model: &FlowModel,
        n: usize,
        period: f64,
        x: &[ScalarField],
        a: &[[ScalarField; 2]],
    ) -> Result<Self, FlowError> {
        if x.len() != model.dim() || a.len() != model.rank() {
            return Err(FlowError::Shape("initial data does not match the target".into()));
        }
        let h = period / n as f64;
        let mut vals = vec![0.0; model.names().len()];
        *vals.last_mut().unwrap() = period;
        let mut field = |f: &ScalarField| -> Vec<f64> {
            (0..n * n)
                .map(|p| {
                    vals[0] = (p / n) as f64 * h;
                    vals[1] = (p % n) as f64 * h;
                    f.eval(&vals)
                })
                .collect()
        };
        let xs = x.iter().map(&mut field).collect();
        let as_ = a.iter().map(|[f1, f2]| [field(f1), field(f2)]).collect();
        GridField::new(n, period, xs, as_)
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn spacing(&self) -> f64 {
        self.period / self.n as f64
    }

    pub fn x(&self) -> &[Vec<f64>] {
        &self.x
    }

    pub fn a(&self) -> &[[Vec<f64>; 2]] {
        &self.a
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().flatten().all(|v| v.is_finite())
            && self.a.iter().flat_map(|c| c.iter().flatten()).all(|v| v.is_finite())
    }

    fn coords(&self, p: usize) -> (f64, f64) {
        let h = self.spacing();
        ((p / self.n) as f64 * h, (p % self.n) as f64 * h)
    }

    fn target_point(&self, p: usize) -> Vec<f64> {
        self.x.iter().map(|v| v[p]).collect()
    }

    /// Central difference along `mu` (0 for x1, 1 for x2).
    pub fn diff(&self, f: &[f64], mu: usize) -> Vec<f64> {
        let n = self.n;
        let inv = 1.0 / (2.0 * self.spacing());
        (0..n * n)
            .map(|p| {
                let (i, j) = (p / n, p % n);
                let (fw, bw) = if mu == 0 {
                    (((i + 1) % n) * n + j, ((i + n - 1) % n) * n + j)
                } else {
                    (i * n + (j + 1) % n, i * n + (j + n - 1) % n)
                };
                (f[fw] - f[bw]) * inv
            })
            .collect()
    }

    fn axpy(&self, s: f64, k: &GridField) -> GridField {
        let comb = |u: &Vec<f64>, v: &Vec<f64>| u.iter().zip(v).map(|(a, b)| a + s * b).collect();
        GridField {
            n: self.n,
            period: self.period,
            x: self.x.iter().zip(&k.x).map(|(u, v)| comb(u, v)).collect(),
            a: self
                .a
                .iter()
                .zip(&k.a)
                .map(|(u, v)| [comb(&u[0], &v[0]), comb(&u[1], &v[1])])
                .collect(),
        }
    }
}

/// Sum in a fixed binary-tree order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let (l, r) = xs.split_at(xs.len() / 2);
    pairwise_sum(l) + pairwise_sum(r)
}

fn sup(vals: impl Iterator<Item = f64>) -> f64 {
    vals.fold(0.0, |m, v| if v.abs() > m || v.is_nan() { v.abs() } else { m })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residuals {
    pub base: f64,
    pub frame: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.base.max(self.frame)
    }
}

fn check_shape(g: &GridField, model: &FlowModel) -> Result<(), FlowError> {
    if g.x.len() != model.dim() || g.a.len() != model.rank() {
        return Err(FlowError::Shape("grid field does not match the target".into()));
    }
    Ok(())
}

/// Sup norms of `F^i = d1X^i - rho^i_I A^I` and
/// `F^I = d1A^I + sum_{J<K} C^I_JK A^J ^ A^K` on the grid.
pub fn residuals(g: &GridField, model: &FlowModel) -> Result<Residuals, FlowError> {
    check_shape(g, model)?;
    let len = g.n * g.n;
    let pts: Vec<Vec<f64>> = (0..len).map(|p| g.target_point(p)).collect();
    let mut base = 0.0f64;
    for i in 0..model.dim() {
        for mu in 0..2 {
            let dx = g.diff(&g.x[i], mu);
            base = base.max(sup((0..len).map(|p| {
                let rho: f64 = (0..model.rank())
                    .filter(|&big| !model.anchor[big][i].is_zero())
                    .map(|big| model.anchor[big][i].eval(&pts[p]) * g.a[big][mu][p])
                    .sum();
                dx[p] - rho
            })));
        }
    }
    let mut frame = 0.0f64;
    for upper in 0..model.rank() {
        let d12 = g.diff(&g.a[upper][1], 0);
        let d21 = g.diff(&g.a[upper][0], 1);
        let terms: Vec<_> = model.structure.iter().filter(|t| t.0 == upper).collect();
        frame = frame.max(sup((0..len).map(|p| {
            // the full double sum counts each J<K pair twice with the same sign
            let quad: f64 = terms
                .iter()
                .map(|(_, j, k, c)| 0.5 * c.eval(&pts[p]) * (g.a[*j][0][p] * g.a[*k][1][p] - g.a[*j][1][p] * g.a[*k][0][p]))
                .sum();
            d12[p] - d21[p] + quad
        })));
    }
    if !(base.is_finite() && frame.is_finite()) {
        return Err(FlowError::NonFinite(f64::NAN));
    }
    Ok(Residuals { base, frame })
}

/// Discretised action `sum over points of (A_i ^ dX^i + 1/2 P^{ij} A_i ^ A_j)_{12} h^2`.
pub fn action_numeric(g: &GridField, model: &FlowModel) -> Result<f64, FlowError> {
    check_shape(g, model)?;
    let p = model.poisson.as_ref().ok_or(FlowError::NotPsm)?;
    let n = model.dim();
    let len = g.n * g.n;
    let dx: Vec<[Vec<f64>; 2]> = g.x.iter().map(|x| [g.diff(x, 0), g.diff(x, 1)]).collect();
    let density: Vec<f64> = (0..len)
        .map(|q| {
            let pt = g.target_point(q);
            let mut c = 0.0;
            for i in 0..n {
                c += g.a[i][0][q] * dx[i][1][q] - g.a[i][1][q] * dx[i][0][q];
                for j in 0..n {
                    if !p[i][j].is_zero() {
                        c += p[i][j].eval(&pt) * g.a[i][0][q] * g.a[j][1][q];
                    }
                }
            }
            c
        })
        .collect();
    let h = g.spacing();
    Ok(pairwise_sum(&density) * h * h)
}

#[derive(Debug)]
pub struct FlowConfig {
    pub dt: f64,
    pub t_final: f64,
    pub eps: Vec<ScalarField>,
}

impl FlowConfig {
    pub fn new(dt: f64, t_final: f64, eps: Vec<ScalarField>) -> Result<Self, FlowError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(FlowError::Config("dt must be positive".into()));
        }
        if !(t_final >= 0.0 && t_final.is_finite()) {
            return Err(FlowError::Config("T must be non-negative".into()));
        }
        Ok(FlowConfig { dt, t_final, eps })
    }

    fn steps(&self) -> usize {
        (self.t_final / self.dt - 1e-9).ceil().max(0.0) as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub residuals: Residuals,
    pub action: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub last: GridField,
    /// Time at which a non-finite value appeared; `last` is then the state before it.
    pub blowup: Option<f64>,
}

impl Trajectory {
    pub fn csv(&self) -> String {
        let mut out = String::from("t,supF_base,supF_frame,action\n");
        for s in &self.samples {
            let action = s.action.map(|a| format!("{a:e}")).unwrap_or_default();
            out.push_str(&format!("{},{:e},{:e},{}\n", s.t, s.residuals.base, s.residuals.frame, action));
        }
        out
    }
}

fn rhs(g: &GridField, model: &FlowModel, eps: &[ScalarField]) -> GridField {
    let len = g.n * g.n;
    let names = model.names().len();
    let mut vals = vec![0.0; names];
    vals[names - 1] = g.period;
    let mut e = vec![vec![0.0; len]; model.rank()];
    let pts: Vec<Vec<f64>> = (0..len).map(|p| g.target_point(p)).collect();
    for p in 0..len {
        let (x1, x2) = g.coords(p);
        vals[0] = x1;
        vals[1] = x2;
        vals[2..2 + model.dim()].copy_from_slice(&pts[p]);
        for (big, f) in eps.iter().enumerate() {
            e[big][p] = f.eval(&vals);
        }
    }
    let x = (0..model.dim())
        .map(|i| {
            (0..len)
                .map(|p| {
                    (0..model.rank())
                        .filter(|&big| !model.anchor[big][i].is_zero())
                        .map(|big| model.anchor[big][i].eval(&pts[p]) * e[big][p])
                        .sum()
                })
                .collect()
        })
        .collect();
    let a = (0..model.rank())
        .map(|upper| {
            let mut out = [g.diff(&e[upper], 0), g.diff(&e[upper], 1)];
            for (u, j, k, c) in &model.structure {
                if *u != upper {
                    continue;
                }
                for p in 0..len {
                    let ce = c.eval(&pts[p]) * e[*k][p];
                    out[0][p] += ce * g.a[*j][0][p];
                    out[1][p] += ce * g.a[*j][1][p];
                }
            }
            out
        })
        .collect();
    GridField {
        n: g.n,
        period: g.period,
        x,
        a,
    }
}

/// RK4 for `dX^i/dt = rho^i_I eps^I`, `dA^I/dt = d1 eps^I + C^I_JK A^J eps^K`.
pub fn integrate_flow(g: &GridField, model: &FlowModel, cfg: &FlowConfig) -> Result<Trajectory, FlowError> {
    check_shape(g, model)?;
    if cfg.eps.len() != model.rank() {
        return Err(FlowError::Shape(format!("need {} parameter expressions", model.rank())));
    }
    let sample = |t: f64, s: &GridField| -> Result<Sample, FlowError> {
        Ok(Sample {
            t,
            residuals: residuals(s, model).map_err(|_| FlowError::NonFinite(t))?,
            action: model.poisson.as_ref().map(|_| action_numeric(s, model)).transpose()?,
        })
    };
    let steps = cfg.steps();
    let dt = if steps == 0 { 0.0 } else { cfg.t_final / steps as f64 };
    let mut state = g.clone();
    let mut samples = vec![sample(0.0, &state)?];
    for step in 0..steps {
        let k1 = rhs(&state, model, &cfg.eps);
        let k2 = rhs(&state.axpy(dt / 2.0, &k1), model, &cfg.eps);
        let k3 = rhs(&state.axpy(dt / 2.0, &k2), model, &cfg.eps);
        let k4 = rhs(&state.axpy(dt, &k3), model, &cfg.eps);
        let next = state
            .axpy(dt / 6.0, &k1)
            .axpy(dt / 3.0, &k2)
            .axpy(dt / 3.0, &k3)
            .axpy(dt / 6.0, &k4);
        let t = (step + 1) as f64 * dt;
        if !next.is_finite() {
            return Ok(Trajectory {
                samples,
                last: state,
                blowup: Some(t),
            });
        }
        state = next;
        samples.push(sample(t, &state)?);
    }
    Ok(Trajectory {
        samples,
        last: state,
        blowup: None,
    })
}

/// Evaluates each polynomial at every grid point through the compiled path.
pub fn grid_values(g: &GridField, polys: &[CompiledPoly]) -> Vec<Vec<f64>> {
    let len = g.n * g.n;
    polys
        .iter()
        .map(|c| (0..len).map(|p| c.eval(&g.target_point(p))).collect())
        .collect()
}

/// Exact evaluation of a polynomial at a point given as rationals, for spot checks.
pub fn exact_value(p: &Poly, base: &[VarId], point: &[crate::symexpr::Rat]) -> f64 {
    let map: HashMap<VarId, _> = base.iter().copied().zip(point.iter().cloned()).collect();
    rat_to_f64(&p.eval_at(&map).expect("point covers the base"))
}
