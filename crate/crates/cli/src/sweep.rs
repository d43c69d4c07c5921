use serde::{Deserialize, Serialize};
use sigdesign::market::MarketParams;

use rayon::prelude::*;

use crate::error::{CliError, CliResult};
use crate::solve::headline;
use crate::table::{Param, Row};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Linspace {
    pub start: f64,
    pub stop: f64,
    pub num: usize,
}

/// One swept parameter, given either as explicit values or as a linspace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub param: Param,
    #[serde(default)]
    pub values: Option<Vec<f64>>,
    #[serde(default)]
    pub linspace: Option<Linspace>,
}

impl Axis {
    pub fn points(&self) -> CliResult<Vec<f64>> {
        let name = self.param.name();
        match (&self.values, &self.linspace) {
            (Some(v), None) if !v.is_empty() => Ok(v.clone()),
            (None, Some(l)) if l.num >= 1 => Ok(linspace(l.start, l.stop, l.num)),
            (Some(_), None) => Err(CliError::input(format!("axes.{name}.values must not be empty"))),
            (None, Some(_)) => Err(CliError::input(format!("axes.{name}.linspace.num must be at least 1"))),
            _ => Err(CliError::input(format!(
                "axes.{name}: give exactly one of `values` or `linspace`"
            ))),
        }
    }
}

pub fn linspace(start: f64, stop: f64, num: usize) -> Vec<f64> {
    if num == 1 {
        return vec![start];
    }
    (0..num)
        .map(|k| start + (stop - start) * k as f64 / (num - 1) as f64)
        .collect()
}

/// A base market and the axes of its Cartesian sweep; the first axis
/// varies slowest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPlan {
    pub base: MarketParams,
    pub axes: Vec<Axis>,
}

impl SweepPlan {
    pub fn points(&self) -> CliResult<Vec<MarketParams>> {
        self.base.validate()?;
        let mut out = vec![self.base.clone()];
        for axis in &self.axes {
            let values = axis.points()?;
            let mut next = Vec::with_capacity(out.len() * values.len());
            for p in &out {
                for v in &values {
                    next.push(axis.param.apply(p, *v)?);
                }
            }
            out = next;
        }
        Ok(out)
    }
}

/// Headline outcome at every point, in input order.
pub fn run(points: &[MarketParams], tol: f64) -> CliResult<Vec<Row>> {
    points
        .par_iter()
        .enumerate()
        .map(|(k, p)| {
            let o = headline(p, tol).map_err(|e| match e {
                CliError::Input(m) => CliError::Input(format!("sweep point {}: {m}", k + 1)),
                CliError::Numeric(m) => CliError::Numeric(format!("sweep point {}: {m}", k + 1)),
            })?;
            Row::new(p, &o)
        })
        .collect()
}
