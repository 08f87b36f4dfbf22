use std::fmt::Write;
use std::path::{Path, PathBuf};

use log::info;
use regpoly::collocate::{solve_bvp_1d, solve_collocation};
use regpoly::hermite::{interpolate_hermite, interpolate_operator_preserving, HermiteOptions, HermiteProblem};
use regpoly::multivariate::{interpolate_hermite_nd, DerivativeSet, MultiHermiteProblem};
use regpoly::synthesis::{audit_csv, blend_many, condition_audit, Member, Partition};
use regpoly::verify::{
    convergence_study, error_report, oracle_sweep, residual_report, Grid, ResidualProblem,
};
use regpoly::wkb::{approximate_drift, expand, DriftSource, WkbModel};
use regpoly::{DifferentialOperator, JetValue, MultiIndex, NewtonPolynomial, Precision};
use serde::de::DeserializeOwned;

use crate::error::{CliError, CliResult};
use crate::golden;
use crate::problems::{
    as_refs, expr, invalid, variables, FunctionData, GridSpec, InterpolateFile, PreserveFile, ProblemFile,
    ProblemType, VerifyFile, WkbFile,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    /// `index,coefficient` rows.
    Csv,
    /// Polynomial JSON.
    Json,
    /// `{nodes, polynomial}` JSON, the input format of `synthesize`.
    Member,
}

#[derive(Clone, Debug)]
pub struct Options {
    pub precision: Precision,
    pub tolerance: Option<f64>,
    pub seed: u64,
    pub preserve_order: bool,
    pub format: Option<Format>,
}

/// Primary output, optional report, and a failed check if any.
#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub output: String,
    pub report: Option<String>,
    pub failure: Option<String>,
}

impl Outcome {
    fn new(output: String) -> Self {
        Outcome {
            output,
            ..Default::default()
        }
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn core(stage: &str) -> impl Fn(regpoly::Error) -> CliError + '_ {
    move |e| CliError::core(stage, e)
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn emit(p: &NewtonPolynomial, nodes: &[Vec<f64>], format: Format) -> String {
    match format {
        Format::Csv => p.coefficient_csv(),
        Format::Json => to_json(p),
        Format::Member => to_json(&Member {
            nodes: nodes.to_vec(),
            polynomial: p.clone(),
        }),
    }
}

fn sorted_order(nodes: &[f64], preserve: bool) -> Vec<usize> {
    let mut order: Vec<usize> = (0..nodes.len()).collect();
    if !preserve {
        order.sort_by(|&a, &b| nodes[a].total_cmp(&nodes[b]));
    }
    order
}

pub fn interpolate(path: &Path, opts: &Options) -> CliResult<Outcome> {
    let file: InterpolateFile = read_json(path)?;
    let dim = file.dimension.unwrap_or_else(|| file.nodes.dim());
    let points = file.nodes.points();
    if let Some(x) = points.iter().find(|x| x.len() != dim) {
        return Err(invalid(format!("node {x:?} does not have dimension {dim}")));
    }
    let vars = variables(&file.vars, dim)?;
    let multivariate = dim > 1 || file.beta.is_some() || file.total_degree.is_some();
    if !multivariate {
        let k = file.k.ok_or_else(|| invalid("`k` is required for univariate interpolation"))?;
        let raw: Vec<f64> = points.iter().map(|x| x[0]).collect();
        let order = sorted_order(&raw, opts.preserve_order);
        let nodes: Vec<f64> = order.iter().map(|&i| raw[i]).collect();
        let prob = match &file.f {
            FunctionData::Expr(text) => {
                let f = expr(text, &vars, "f")?;
                HermiteProblem::from_source(&f, nodes.clone(), k).map_err(core("evaluating f"))?
            }
            FunctionData::Jets { jets } => {
                if jets.len() != raw.len() {
                    return Err(invalid(format!("{} nodes but {} jets", raw.len(), jets.len())));
                }
                let data = order
                    .iter()
                    .map(|&i| JetValue::univariate(raw[i], jets[i].clone()))
                    .collect();
                HermiteProblem::new(nodes.clone(), k, data).map_err(core("jet table"))?
            }
        };
        let p = interpolate_hermite(
            &prob,
            HermiteOptions {
                precision: opts.precision,
                scaling: file.scaling,
            },
        )
        .map_err(core("interpolate_hermite"))?;
        info!("{}: {} coefficients", path.display(), p.len());
        let pts: Vec<Vec<f64>> = nodes.iter().map(|&x| vec![x]).collect();
        return Ok(Outcome::new(emit(&p, &pts, opts.format.unwrap_or(Format::Csv))));
    }
    let set = match (&file.beta, file.total_degree, file.k) {
        (Some(b), None, None) => DerivativeSet::Box(MultiIndex::new(b.clone())),
        (None, Some(l), None) => DerivativeSet::TotalDegree(l),
        (None, None, Some(k)) => DerivativeSet::Box(MultiIndex::uniform(dim, k)),
        _ => return Err(invalid("give exactly one of `beta`, `total_degree` or `k`")),
    };
    let f = match &file.f {
        FunctionData::Expr(text) => expr(text, &vars, "f")?,
        FunctionData::Jets { .. } => return Err(invalid("jet tables are supported for univariate problems only")),
    };
    let prob = MultiHermiteProblem::from_source(&f, points.clone(), set, file.multiplier)
        .map_err(core("evaluating f"))?;
    let p = interpolate_hermite_nd(&prob, opts.precision).map_err(core("interpolate_hermite_nd"))?;
    Ok(Outcome::new(emit(&p, &points, opts.format.unwrap_or(Format::Json))))
}

pub fn preserve_ops(path: &Path, opts: &Options) -> CliResult<Outcome> {
    let file: PreserveFile = read_json(path)?;
    let vars = variables(&None, 1)?;
    let f = expr(&file.f, &vars, "f")?;
    let ops = file
        .operators
        .iter()
        .map(|s| DifferentialOperator::from_spec(s, &as_refs(&vars)))
        .collect::<regpoly::Result<Vec<_>>>()
        .map_err(core("parsing operators"))?;
    let order = sorted_order(&file.nodes, opts.preserve_order);
    let nodes: Vec<f64> = order.iter().map(|&i| file.nodes[i]).collect();
    let p = interpolate_operator_preserving(&f, &ops, &nodes, opts.precision)
        .map_err(core("interpolate_operator_preserving"))?;
    let pts: Vec<Vec<f64>> = nodes.iter().map(|&x| vec![x]).collect();
    Ok(Outcome::new(emit(&p, &pts, opts.format.unwrap_or(Format::Csv))))
}

fn node_residual_csv(rows: &[(Vec<f64>, f64)]) -> String {
    let mut out = String::from("node,residual\n");
    for (x, r) in rows {
        let xs: Vec<String> = x.iter().map(|v| format!("{v:e}")).collect();
        writeln!(out, "{},{r:e}", xs.join(";")).expect("writing to a String");
    }
    out
}

fn residual_outcome(
    p: &NewtonPolynomial,
    op: &DifferentialOperator,
    rhs: &regpoly::Expr,
    nodes: &[Vec<f64>],
    opts: &Options,
) -> CliResult<Outcome> {
    let mut rows = Vec::new();
    for x in nodes {
        let lp = op.apply_poly(p, x, opts.precision).map_err(core("residual"))?;
        let f = rhs.eval(x).map_err(core("rhs"))?;
        rows.push((x.clone(), lp - f));
    }
    let worst = rows.iter().map(|(_, r)| r.abs()).fold(0.0, f64::max);
    let failure = match opts.tolerance {
        Some(t) if !(worst <= t) => Some(format!("largest node residual {worst:e} exceeds {t:e}")),
        _ => None,
    };
    Ok(Outcome {
        output: emit(p, nodes, opts.format.unwrap_or(Format::Json)),
        report: Some(node_residual_csv(&rows)),
        failure,
    })
}

pub fn solve_bvp1d(path: &Path, opts: &Options) -> CliResult<Outcome> {
    let file: ProblemFile = read_json(path)?;
    let prob = file.to_bvp()?;
    let p = solve_bvp_1d(&prob, opts.precision).map_err(core("solve_bvp_1d"))?;
    let op = prob.operator().map_err(core("operator"))?;
    let nodes: Vec<Vec<f64>> = prob.nodes.iter().map(|&x| vec![x]).collect();
    residual_outcome(&p, &op, &prob.f, &nodes, opts)
}

pub fn solve_collocation_file(path: &Path, opts: &Options) -> CliResult<Outcome> {
    let file: ProblemFile = read_json(path)?;
    let prob = file.to_collocation()?;
    let p = solve_collocation(&prob, opts.precision).map_err(core("solve_collocation"))?;
    residual_outcome(&p, &prob.operator, &prob.rhs, &prob.interior_nodes, opts)
}

/// Default relative tolerance of the condition audit.
pub const AUDIT_TOLERANCE: f64 = 1e-7;

pub fn synthesize(paths: &[PathBuf], k: u32, opts: &Options) -> CliResult<Outcome> {
    let members = paths
        .iter()
        .map(|p| read_json::<Member>(p))
        .collect::<CliResult<Vec<_>>>()?;
    let part = Partition::new(members, k).map_err(core("partition"))?;
    let out = blend_many(&part, opts.precision).map_err(core("blend"))?;
    info!("{} members blended in {} rounds", part.members().len(), out.rounds);
    let rows = condition_audit(part.members(), &out.member.polynomial, k, opts.precision)
        .map_err(core("condition audit"))?;
    let tol = opts.tolerance.unwrap_or(AUDIT_TOLERANCE);
    let worst = rows
        .iter()
        .map(|r| r.diff / r.target.abs().max(1.0))
        .fold(0.0, f64::max);
    let failure = (!(worst <= tol)).then(|| format!("condition audit: largest relative deviation {worst:e} exceeds {tol:e}"));
    Ok(Outcome {
        output: emit(&out.member.polynomial, &out.member.nodes, opts.format.unwrap_or(Format::Json)),
        report: Some(audit_csv(&rows)),
        failure,
    })
}

pub fn wkb(path: &Path, opts: &Options) -> CliResult<Outcome> {
    let file: WkbFile = read_json(path)?;
    if file.b.len() != file.n || file.y.len() != file.n {
        return Err(invalid(format!(
            "n = {} but {} drift components and a base point of length {}",
            file.n,
            file.b.len(),
            file.y.len()
        )));
    }
    let vars = variables(&file.vars, file.n)?;
    let drift = file
        .b
        .iter()
        .enumerate()
        .map(|(i, b)| expr(b, &vars, &format!("b[{i}]")))
        .collect::<CliResult<Vec<_>>>()?;
    let sources = match (&file.drift_nodes, file.drift_order) {
        (Some(nodes), Some(order)) => approximate_drift(&drift, &nodes.points(), order, opts.precision)
            .map_err(core("drift approximation"))?
            .into_iter()
            .map(DriftSource::Poly)
            .collect(),
        (None, None) => drift.into_iter().map(DriftSource::Expr).collect(),
        _ => return Err(invalid("`drift_nodes` and `drift_order` go together")),
    };
    let mut model = WkbModel::new(sources, file.y.clone(), file.order).map_err(core("wkb model"))?;
    if let Some(d) = file.degree {
        model = model.with_degree(d);
    }
    let expansion = expand(&model, opts.precision).map_err(core("wkb expansion"))?;
    let report = match &file.samples {
        None => None,
        Some(s) => {
            let mut out = String::from("t,");
            out.push_str(&vars.join(","));
            out.push_str(",p\n");
            for &t in &s.t {
                for x in &s.x {
                    let p = expansion.assemble_kernel(t, x).map_err(core("kernel"))?;
                    let xs: Vec<String> = x.iter().map(|v| format!("{v:e}")).collect();
                    writeln!(out, "{t:e},{},{p:e}", xs.join(",")).expect("writing to a String");
                }
            }
            Some(out)
        }
    };
    Ok(Outcome {
        output: expansion.coefficient_csv(),
        report,
        failure: None,
    })
}

fn grid(spec: &GridSpec) -> CliResult<Grid> {
    Grid::uniform(&spec.lo, &spec.hi, &spec.counts).map_err(core("grid"))
}

/// Default tolerance of the oracle sweep.
pub const ORACLE_TOLERANCE: f64 = 1e-8;

pub fn verify(path: &Path, opts: &Options) -> CliResult<Outcome> {
    match read_json::<VerifyFile>(path)? {
        VerifyFile::Oracle { instances } => {
            let tol = opts.tolerance.unwrap_or(ORACLE_TOLERANCE);
            let s = oracle_sweep(instances, opts.seed, tol, opts.precision).map_err(core("oracle sweep"))?;
            let mut out = String::from("instances,seed,tolerance,worst,failures\n");
            writeln!(out, "{},{},{tol:e},{:e},{}", s.instances, opts.seed, s.worst, s.failures.len())
                .expect("writing to a String");
            let failure = (!s.failures.is_empty()).then(|| format!("{} oracle mismatches", s.failures.len()));
            Ok(Outcome {
                output: out,
                report: (!s.failures.is_empty()).then(|| s.failures.join("\n") + "\n"),
                failure,
            })
        }
        VerifyFile::Residual {
            problem,
            polynomial,
            grid: g,
            k,
            alpha,
        } => {
            // one-dimensional problems without an explicit type are two-point BVPs
            let bvp = match problem.kind {
                Some(kind) => kind == ProblemType::Bvp1d,
                None => problem.dim()? == 1,
            };
            let rp = if bvp {
                ResidualProblem::from_bvp(&problem.to_bvp()?)
            } else {
                ResidualProblem::from_collocation(&problem.to_collocation()?)
            }
            .map_err(core("residual problem"))?;
            let r = residual_report(&polynomial, &rp, &grid(&g)?, k, alpha, opts.precision)
                .map_err(core("residual report"))?;
            Ok(Outcome {
                output: r.csv(),
                report: Some(r.node_csv()),
                failure: None,
            })
        }
        VerifyFile::Error {
            f,
            polynomial,
            grid: g,
            k,
            alpha,
            vars,
        } => {
            let vars = variables(&vars, polynomial.dimension)?;
            let f = expr(&f, &vars, "f")?;
            let precision = opts.precision;
            let diff = move |x: &[f64], b: &MultiIndex| -> regpoly::Result<JetValue> {
                let a = polynomial.eval_jet(x, b, precision)?;
                let e = f.eval_jet(x, b)?;
                Ok(JetValue::from_fn(x, b, |g| {
                    a.get(g).expect("in bound") - e.get(g).expect("in bound")
                }))
            };
            let r = error_report(&diff, &grid(&g)?, k, alpha).map_err(core("error report"))?;
            let mut out = String::from("quantity,value,grid_size\n");
            out.push_str(&r.csv_rows(""));
            Ok(Outcome::new(out))
        }
        VerifyFile::Convergence {
            f,
            interval: (a, b),
            k,
            node_counts,
            samples,
        } => {
            let vars = variables(&None, 1)?;
            let f = expr(&f, &vars, "f")?;
            let precision = opts.precision;
            let build = |n: usize| {
                let nodes = if n == 1 {
                    vec![0.5 * (a + b)]
                } else {
                    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
                };
                let prob = HermiteProblem::from_source(&f, nodes, k)?;
                interpolate_hermite(
                    &prob,
                    HermiteOptions {
                        precision,
                        ..Default::default()
                    },
                )
            };
            let reference = |x: &[f64]| f.eval(x);
            let g = Grid::interval(a, b, samples).map_err(core("grid"))?;
            let t = convergence_study(&node_counts, &build, &reference, &g).map_err(core("convergence study"))?;
            Ok(Outcome::new(t.csv()))
        }
    }
}

pub fn golden(opts: &Options) -> CliResult<Outcome> {
    let computed = golden::compute(opts.precision)?;
    let rows = golden::rows(&computed, opts.tolerance);
    let bad = rows.iter().filter(|r| !r.ok()).count();
    let failure = (bad > 0).then(|| format!("golden: {bad} of {} coefficients outside tolerance", rows.len()));
    Ok(Outcome {
        output: golden::csv(&rows),
        report: None,
        failure,
    })
}
