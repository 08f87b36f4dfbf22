//! JSON input formats.

use regpoly::collocate::{BoundaryData, Bvp1D, CollocationProblem};
use regpoly::expr::default_vars;
use regpoly::hermite::BasisScaling;
use regpoly::multivariate::Multiplier;
use regpoly::operator::OperatorSpec;
use regpoly::{parse, DifferentialOperator, Expr, NewtonPolynomial};
use serde::Deserialize;

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum Nodes {
    Line(Vec<f64>),
    Points(Vec<Vec<f64>>),
}

impl Nodes {
    pub fn points(&self) -> Vec<Vec<f64>> {
        match self {
            Nodes::Line(v) => v.iter().map(|&x| vec![x]).collect(),
            Nodes::Points(p) => p.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Nodes::Line(_) => 1,
            Nodes::Points(p) => p.first().map_or(1, Vec::len),
        }
    }
}

/// Function data: an expression, or per-node derivative lists `f, f', …, f^(k)`.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum FunctionData {
    Expr(String),
    Jets { jets: Vec<Vec<f64>> },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterpolateFile {
    pub nodes: Nodes,
    #[serde(default)]
    pub dimension: Option<usize>,
    #[serde(default)]
    pub k: Option<u32>,
    #[serde(default)]
    pub beta: Option<Vec<u32>>,
    #[serde(default)]
    pub total_degree: Option<u32>,
    pub f: FunctionData,
    #[serde(default)]
    pub scaling: BasisScaling,
    #[serde(default)]
    pub multiplier: Multiplier,
    #[serde(default)]
    pub vars: Option<Vec<String>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreserveFile {
    pub nodes: Vec<f64>,
    pub f: String,
    pub operators: Vec<OperatorSpec>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum BoundaryValues {
    Numbers(Vec<f64>),
    Expr(String),
    Initial { g: String, omega: String, time_axis: usize },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySpec {
    pub nodes: Nodes,
    pub data: BoundaryValues,
    #[serde(default)]
    pub l: u32,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteriorSpec {
    pub nodes: Nodes,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemType {
    Bvp1d,
    Collocation,
}

/// `{type, operator: {terms}, rhs, boundary: {nodes, data, l}, interior: {nodes}}`.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    #[serde(rename = "type", default)]
    pub kind: Option<ProblemType>,
    pub operator: OperatorSpec,
    pub rhs: String,
    pub boundary: BoundarySpec,
    pub interior: InteriorSpec,
    #[serde(default)]
    pub multiplier: Multiplier,
    #[serde(default)]
    pub vars: Option<Vec<String>>,
}

pub fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Invalid(msg.into())
}

/// Variable names: explicit, or `x1 … xn`.
pub fn variables(explicit: &Option<Vec<String>>, dim: usize) -> CliResult<Vec<String>> {
    match explicit {
        Some(v) if v.len() != dim => Err(invalid(format!("{} variable names for dimension {dim}", v.len()))),
        Some(v) => Ok(v.clone()),
        None if dim > 9 => Err(invalid(format!("dimension {dim} exceeds the 9 default variables"))),
        None => Ok(default_vars(dim).iter().map(|s| s.to_string()).collect()),
    }
}

pub fn as_refs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

pub fn expr(text: &str, vars: &[String], what: &str) -> CliResult<Expr> {
    parse(text, &as_refs(vars)).map_err(|e| CliError::core(format!("parsing {what}"), e))
}

fn operator_dim(spec: &OperatorSpec) -> CliResult<usize> {
    spec.terms
        .first()
        .map(|t| t.alpha.len())
        .ok_or_else(|| invalid("operator has no terms"))
}

impl ProblemFile {
    pub fn dim(&self) -> CliResult<usize> {
        operator_dim(&self.operator)
    }

    pub fn to_bvp(&self) -> CliResult<Bvp1D> {
        if self.kind == Some(ProblemType::Collocation) {
            return Err(invalid("problem type is \"collocation\"; use solve-collocation"));
        }
        if self.dim()? != 1 {
            return Err(invalid("a bvp1d problem must be one-dimensional"));
        }
        let vars = variables(&self.vars, 1)?;
        let mut coeffs: [Vec<String>; 3] = Default::default();
        for t in &self.operator.terms {
            match t.alpha.as_slice() {
                [o] if *o <= 2 => coeffs[2 - *o as usize].push(format!("({})", t.coeff)),
                a => return Err(invalid(format!("bvp1d operators have order ≤ 2, found alpha {a:?}"))),
            }
        }
        let sum = |parts: &[String]| if parts.is_empty() { "0".to_string() } else { parts.join(" + ") };
        let b_nodes = match &self.boundary.nodes {
            Nodes::Line(v) => v.clone(),
            Nodes::Points(p) => p.iter().map(|x| x.first().copied().unwrap_or(f64::NAN)).collect(),
        };
        let [d, e] = b_nodes[..] else {
            return Err(invalid("a bvp1d problem needs exactly two boundary nodes"));
        };
        let (d, e, swapped) = if d <= e { (d, e, false) } else { (e, d, true) };
        let (cd, ce) = match &self.boundary.data {
            BoundaryValues::Numbers(v) if v.len() == 2 => (v[0], v[1]),
            BoundaryValues::Numbers(v) => {
                return Err(invalid(format!("two boundary values expected, found {}", v.len())));
            }
            BoundaryValues::Expr(g) => {
                let g = expr(g, &vars, "boundary data")?;
                let at = |x: f64| g.eval(&[x]).map_err(|err| CliError::core("boundary data", err));
                (at(b_nodes[0])?, at(b_nodes[1])?)
            }
            BoundaryValues::Initial { .. } => return Err(invalid("initial data applies to collocation problems only")),
        };
        let (cd, ce) = if swapped { (ce, cd) } else { (cd, ce) };
        let interior = self.interior.nodes.points();
        if interior.iter().any(|x| x.len() != 1) {
            return Err(invalid("interior nodes of a bvp1d problem are scalars"));
        }
        Ok(Bvp1D {
            a: expr(&sum(&coeffs[0]), &vars, "coefficient of u''")?,
            b: expr(&sum(&coeffs[1]), &vars, "coefficient of u'")?,
            c: expr(&sum(&coeffs[2]), &vars, "coefficient of u")?,
            f: expr(&self.rhs, &vars, "rhs")?,
            interval: (d, e),
            boundary: (cd, ce),
            nodes: interior.into_iter().map(|x| x[0]).collect(),
        })
    }

    pub fn to_collocation(&self) -> CliResult<CollocationProblem> {
        if self.kind == Some(ProblemType::Bvp1d) {
            return Err(invalid("problem type is \"bvp1d\"; use solve-bvp1d"));
        }
        let dim = self.dim()?;
        let vars = variables(&self.vars, dim)?;
        let operator = DifferentialOperator::from_spec(&self.operator, &as_refs(&vars))
            .map_err(|e| CliError::core("parsing operator", e))?;
        let boundary_data = match &self.boundary.data {
            BoundaryValues::Expr(g) => BoundaryData::Function(expr(g, &vars, "boundary data")?),
            BoundaryValues::Initial { g, omega, time_axis } => BoundaryData::Initial {
                g: expr(g, &vars, "initial value")?,
                omega: expr(omega, &vars, "initial velocity")?,
                time_axis: *time_axis,
            },
            BoundaryValues::Numbers(_) => {
                return Err(invalid("collocation boundary data must be an expression or initial data"));
            }
        };
        Ok(CollocationProblem {
            operator,
            rhs: expr(&self.rhs, &vars, "rhs")?,
            boundary_nodes: self.boundary.nodes.points(),
            boundary_data,
            l: self.boundary.l,
            interior_nodes: self.interior.nodes.points(),
            multiplier: self.multiplier,
        })
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSamples {
    pub t: Vec<f64>,
    pub x: Vec<Vec<f64>>,
}

/// `{n, b, y, K, D}` plus optional drift approximation and kernel samples.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WkbFile {
    pub n: usize,
    pub b: Vec<String>,
    pub y: Vec<f64>,
    #[serde(rename = "K")]
    pub order: u32,
    #[serde(rename = "D", default)]
    pub degree: Option<u32>,
    #[serde(default)]
    pub drift_nodes: Option<Nodes>,
    #[serde(default)]
    pub drift_order: Option<u32>,
    #[serde(default)]
    pub samples: Option<KernelSamples>,
    #[serde(default)]
    pub vars: Option<Vec<String>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub counts: Vec<usize>,
}

fn default_alpha() -> f64 {
    0.5
}

fn default_instances() -> usize {
    200
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum VerifyFile {
    Oracle {
        #[serde(default = "default_instances")]
        instances: usize,
    },
    Residual {
        problem: ProblemFile,
        polynomial: NewtonPolynomial,
        grid: GridSpec,
        #[serde(default)]
        k: u32,
        #[serde(default = "default_alpha")]
        alpha: f64,
    },
    Error {
        f: String,
        polynomial: NewtonPolynomial,
        grid: GridSpec,
        #[serde(default)]
        k: u32,
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default)]
        vars: Option<Vec<String>>,
    },
    Convergence {
        f: String,
        interval: (f64, f64),
        k: u32,
        node_counts: Vec<usize>,
        #[serde(default = "default_samples")]
        samples: usize,
    },
}

fn default_samples() -> usize {
    500
}
