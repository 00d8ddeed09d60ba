//! Flat `key=value` scenario configs, one key per line, `#` comments.

use std::str::FromStr;

use crate::grid::{Field, Grid, GridSpec};
use crate::model::ModelParams;
use crate::{Error, Result};

/// Which check a scenario runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    SolvePrimal,
    VerifyThm1,
    VerifyThm2,
    VerifyThm3,
    VerifyThm4,
    NaiveDualDiag,
    Sweep,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::SolvePrimal => "solve-primal",
            Task::VerifyThm1 => "verify-thm1",
            Task::VerifyThm2 => "verify-thm2",
            Task::VerifyThm3 => "verify-thm3",
            Task::VerifyThm4 => "verify-thm4",
            Task::NaiveDualDiag => "naive-dual-diag",
            Task::Sweep => "sweep",
        }
    }
}

impl FromStr for Task {
    type Err = Error;
    fn from_str(s: &str) -> Result<Task> {
        Ok(match s {
            "solve-primal" => Task::SolvePrimal,
            "verify-thm1" => Task::VerifyThm1,
            "verify-thm2" => Task::VerifyThm2,
            "verify-thm3" => Task::VerifyThm3,
            "verify-thm4" => Task::VerifyThm4,
            "naive-dual-diag" => Task::NaiveDualDiag,
            "sweep" => Task::Sweep,
            other => return Err(Error::UnknownKey(format!("task={other}"))),
        })
    }
}

/// Forcing-term grammar: `const:<v>`, `sin:<amplitude>` (product of
/// `sin(πxᵢ/extent)` over axes), or `file:<path>` (one value per line in
/// node order).
#[derive(Debug, Clone, PartialEq)]
pub enum FSpec {
    Const(f64),
    Sin(f64),
    File(String),
}

impl FSpec {
    pub fn materialize(&self, grid: &Grid) -> Result<Field> {
        match self {
            FSpec::Const(v) => Ok(grid.constant(*v)),
            FSpec::Sin(a) => {
                let extent = grid.spec.extent;
                let m = grid.spec.nodes_per_axis;
                Ok(Field::from_fn(grid.n, |i, _| {
                    let mut r = i;
                    let mut val = *a;
                    for _ in 0..grid.spec.dimension {
                        let xi = ((r % m) as f64 + 1.0) * grid.h;
                        val *= (std::f64::consts::PI * xi / extent).sin();
                        r /= m;
                    }
                    val
                }))
            }
            FSpec::File(path) => {
                let text = std::fs::read_to_string(path)?;
                let vals: Vec<f64> = text
                    .lines()
                    .map(str::trim)
                    .filter(|l| !l.is_empty())
                    .map(|l| {
                        l.parse::<f64>().map_err(|_| {
                            Error::InvalidParameter(format!("bad value in {path}: {l}"))
                        })
                    })
                    .collect::<Result<_>>()?;
                if vals.len() != grid.n {
                    return Err(Error::DimensionMismatch { expected: grid.n, got: vals.len() });
                }
                Ok(Field::from_vec(vals))
            }
        }
    }

    pub fn echo(&self) -> String {
        match self {
            FSpec::Const(v) => format!("const:{v}"),
            FSpec::Sin(a) => format!("sin:{a}"),
            FSpec::File(p) => format!("file:{p}"),
        }
    }
}

impl FromStr for FSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<FSpec> {
        let (kind, arg) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidParameter(format!("bad f spec `{s}`")))?;
        match kind {
            "const" | "sin" => {
                let v: f64 = arg
                    .parse()
                    .map_err(|_| Error::InvalidParameter(format!("bad f amplitude `{arg}`")))?;
                Ok(if kind == "const" { FSpec::Const(v) } else { FSpec::Sin(v) })
            }
            "file" => Ok(FSpec::File(arg.to_string())),
            _ => Err(Error::InvalidParameter(format!("bad f spec `{s}`"))),
        }
    }
}

/// A parsed scenario: grid, model parameters, task, and solver knobs.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub grid: GridSpec,
    pub gamma: f64,
    pub alpha: f64,
    pub beta: f64,
    pub k: f64,
    pub eps: f64,
    pub k12: Option<f64>,
    pub f: FSpec,
    pub task: Task,
    pub tol: f64,
    pub maxit: usize,
    pub seed: u64,
    pub nsamples: usize,
    pub sweep_param: Option<String>,
    pub sweep_values: Vec<f64>,
}

impl Scenario {
    pub fn build(&self) -> Result<(Grid, ModelParams)> {
        let grid = crate::grid::build_grid(self.grid)?;
        let params = ModelParams {
            gamma: self.gamma,
            alpha: self.alpha,
            beta: self.beta,
            k: self.k,
            eps: self.eps,
            f: self.f.materialize(&grid)?,
            k12: self.k12,
        };
        params.validate(&grid)?;
        Ok((grid, params))
    }

    /// Config echo for the report header, in declared key order.
    pub fn echo(&self) -> Vec<(String, String)> {
        let mut out = vec![
            ("dim".into(), self.grid.dimension.to_string()),
            ("extent".into(), format!("{}", self.grid.extent)),
            ("nodes".into(), self.grid.nodes_per_axis.to_string()),
            ("gamma".into(), format!("{}", self.gamma)),
            ("alpha".into(), format!("{}", self.alpha)),
            ("beta".into(), format!("{}", self.beta)),
            ("K".into(), format!("{}", self.k)),
            ("eps".into(), format!("{}", self.eps)),
            ("f".into(), self.f.echo()),
            ("task".into(), self.task.name().into()),
            ("tol".into(), format!("{}", self.tol)),
            ("maxit".into(), self.maxit.to_string()),
            ("seed".into(), self.seed.to_string()),
            ("nsamples".into(), self.nsamples.to_string()),
        ];
        if let Some(k12) = self.k12 {
            out.push(("K12".into(), format!("{k12}")));
        }
        if let Some(p) = &self.sweep_param {
            out.push(("sweep_param".into(), p.clone()));
            out.push((
                "sweep_values".into(),
                self.sweep_values
                    .iter()
                    .map(|v| format!("{v}"))
                    .collect::<Vec<_>>()
                    .join(","),
            ));
        }
        out
    }
}

fn parse_num<T: FromStr>(line: usize, key: &str, val: &str) -> Result<T> {
    val.parse().map_err(|_| Error::ParseError {
        line,
        msg: format!("bad value for {key}: `{val}`"),
    })
}

pub fn parse_config(text: &str) -> Result<Scenario> {
    let mut dim = 1usize;
    let mut extent = 1.0f64;
    let mut nodes = 31usize;
    let mut gamma = None;
    let mut alpha = None;
    let mut beta = None;
    let mut k = 10.0f64;
    let mut eps = 0.1f64;
    let mut k12 = None;
    let mut f = FSpec::Const(0.0);
    let mut task = Task::SolvePrimal;
    let mut tol = 1e-10f64;
    let mut maxit = 200usize;
    let mut seed = 42u64;
    let mut nsamples = 100usize;
    let mut sweep_param = None;
    let mut sweep_values = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, val) = line.split_once('=').ok_or(Error::ParseError {
            line: lineno,
            msg: format!("expected key=value, got `{line}`"),
        })?;
        let (key, val) = (key.trim(), val.trim());
        match key {
            "dim" => dim = parse_num(lineno, key, val)?,
            "extent" => extent = parse_num(lineno, key, val)?,
            "nodes" => nodes = parse_num(lineno, key, val)?,
            "gamma" => gamma = Some(parse_num::<f64>(lineno, key, val)?),
            "alpha" => alpha = Some(parse_num::<f64>(lineno, key, val)?),
            "beta" => beta = Some(parse_num::<f64>(lineno, key, val)?),
            "K" => k = parse_num(lineno, key, val)?,
            "K12" => k12 = Some(parse_num::<f64>(lineno, key, val)?),
            "eps" => eps = parse_num(lineno, key, val)?,
            "f" => f = val.parse()?,
            "task" => task = val.parse()?,
            "tol" => tol = parse_num(lineno, key, val)?,
            "maxit" => maxit = parse_num(lineno, key, val)?,
            "seed" => seed = parse_num(lineno, key, val)?,
            "nsamples" => nsamples = parse_num(lineno, key, val)?,
            "sweep_param" => sweep_param = Some(val.to_string()),
            "sweep_values" => {
                sweep_values = val
                    .split(',')
                    .map(|v| parse_num::<f64>(lineno, key, v.trim()))
                    .collect::<Result<_>>()?
            }
            other => return Err(Error::UnknownKey(other.to_string())),
        }
    }

    let scenario = Scenario {
        grid: GridSpec { dimension: dim, extent, nodes_per_axis: nodes },
        gamma: gamma.ok_or(Error::MissingRequired("gamma"))?,
        alpha: alpha.ok_or(Error::MissingRequired("alpha"))?,
        beta: beta.ok_or(Error::MissingRequired("beta"))?,
        k,
        eps,
        k12,
        f,
        task,
        tol,
        maxit,
        seed,
        nsamples,
        sweep_param,
        sweep_values,
    };
    if scenario.tol <= 0.0 || scenario.maxit == 0 {
        return Err(Error::InvalidParameter("tol and maxit must be positive".into()));
    }
    Ok(scenario)
}
