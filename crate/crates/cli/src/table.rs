use std::path::Path;

use serde::{Deserialize, Serialize};
use sigdesign::market::{CostFamily, MarketParams};
use sigdesign::outer::{welfare, EquilibriumOutcome, OutcomeLabel};

use crate::error::{CliError, CliResult};
use crate::io::emit_bytes;

/// Parameters that sweeps and plots can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
pub enum Param {
    #[serde(rename = "theta_L")]
    #[value(name = "theta_L")]
    ThetaLow,
    #[serde(rename = "theta_H")]
    #[value(name = "theta_H")]
    ThetaHigh,
    #[serde(rename = "lambda")]
    #[value(name = "lambda")]
    Lambda,
    #[serde(rename = "n_schools")]
    #[value(name = "n_schools")]
    Schools,
    #[serde(rename = "credit_cap")]
    #[value(name = "credit_cap")]
    CreditCap,
    #[serde(rename = "kappa_L")]
    #[value(name = "kappa_L")]
    KappaLow,
    #[serde(rename = "kappa_H")]
    #[value(name = "kappa_H")]
    KappaHigh,
    #[serde(rename = "exponent")]
    #[value(name = "exponent")]
    Exponent,
}

impl Param {
    pub fn name(self) -> &'static str {
        match self {
            Param::ThetaLow => "theta_L",
            Param::ThetaHigh => "theta_H",
            Param::Lambda => "lambda",
            Param::Schools => "n_schools",
            Param::CreditCap => "credit_cap",
            Param::KappaLow => "kappa_L",
            Param::KappaHigh => "kappa_H",
            Param::Exponent => "exponent",
        }
    }

    /// Copy of `base` with this parameter set to `v`, validated.
    pub fn apply(self, base: &MarketParams, v: f64) -> CliResult<MarketParams> {
        let mut p = base.clone();
        let bad_family = || CliError::input(format!("{} cannot be set on this cost family", self.name()));
        match self {
            Param::ThetaLow => p.theta_low = v,
            Param::ThetaHigh => p.theta_high = v,
            Param::Lambda => p.lambda = v,
            Param::Schools => {
                if !(v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64) {
                    return Err(CliError::input(format!(
                        "n_schools must be a positive integer, got {v}"
                    )));
                }
                p.n_schools = v as usize;
            }
            Param::CreditCap => p.credit_cap = Some(v),
            Param::KappaLow | Param::KappaHigh => match &mut p.cost {
                CostFamily::Linear { kappa_low, kappa_high }
                | CostFamily::Power {
                    kappa_low, kappa_high, ..
                } => {
                    if self == Param::KappaLow {
                        *kappa_low = v;
                    } else {
                        *kappa_high = v;
                    }
                }
                CostFamily::Tabulated { .. } => return Err(bad_family()),
            },
            Param::Exponent => match &mut p.cost {
                CostFamily::Power { exponent, .. } => *exponent = v,
                _ => return Err(bad_family()),
            },
        }
        p.validate()
            .map_err(|e| CliError::input(format!("{} = {v}: {e}", self.name())))?;
        Ok(p)
    }
}

/// Rounds to 12 significant digits and prints with '.' as the decimal mark.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.11e}").parse().unwrap_or(x);
    rounded.to_string()
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

/// One outcome with the parameters it was solved at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    #[serde(rename = "theta_L")]
    pub theta_low: f64,
    #[serde(rename = "theta_H")]
    pub theta_high: f64,
    pub lambda: f64,
    pub n_schools: usize,
    pub credit_cap: Option<f64>,
    #[serde(rename = "kappa_L")]
    pub kappa_low: Option<f64>,
    #[serde(rename = "kappa_H")]
    pub kappa_high: Option<f64>,
    pub label: OutcomeLabel,
    pub fee: f64,
    pub welfare_total: f64,
    pub waste: f64,
    pub profit: f64,
    #[serde(rename = "U_L")]
    pub payoff_low: f64,
    #[serde(rename = "U_H")]
    pub payoff_high: f64,
}

pub const HEADER: [&str; 14] = [
    "theta_L",
    "theta_H",
    "lambda",
    "n_schools",
    "credit_cap",
    "kappa_L",
    "kappa_H",
    "label",
    "fee",
    "welfare_total",
    "waste",
    "profit",
    "U_L",
    "U_H",
];

impl Row {
    pub fn new(params: &MarketParams, o: &EquilibriumOutcome) -> CliResult<Row> {
        let w = welfare(o, params)?;
        let (kappa_low, kappa_high) = match params.cost {
            CostFamily::Linear { kappa_low, kappa_high }
            | CostFamily::Power {
                kappa_low, kappa_high, ..
            } => (Some(kappa_low), Some(kappa_high)),
            CostFamily::Tabulated { .. } => (None, None),
        };
        Ok(Row {
            theta_low: params.theta_low,
            theta_high: params.theta_high,
            lambda: params.lambda,
            n_schools: params.n_schools,
            credit_cap: params.credit_cap,
            kappa_low,
            kappa_high,
            label: o.label,
            fee: o.profile.fee(0),
            welfare_total: w.total,
            waste: w.effort_waste,
            profit: w.school_profit_total,
            payoff_low: o.payoffs.low,
            payoff_high: o.payoffs.high,
        })
    }

    fn record(&self) -> Vec<String> {
        vec![
            fmt_num(self.theta_low),
            fmt_num(self.theta_high),
            fmt_num(self.lambda),
            self.n_schools.to_string(),
            fmt_opt(self.credit_cap),
            fmt_opt(self.kappa_low),
            fmt_opt(self.kappa_high),
            self.label.to_string(),
            fmt_num(self.fee),
            fmt_num(self.welfare_total),
            fmt_num(self.waste),
            fmt_num(self.profit),
            fmt_num(self.payoff_low),
            fmt_num(self.payoff_high),
        ]
    }
}

/// Writes `rows` as CSV. Plot data is prefixed by `plot_param` and
/// `plot_value` columns naming the varied parameter and its value.
pub fn write_csv(out: Option<&Path>, plot: Option<(Param, &[f64])>, rows: &[Row]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Numeric(e.to_string());
    let mut header: Vec<&str> = Vec::new();
    if plot.is_some() {
        header.extend(["plot_param", "plot_value"]);
    }
    header.extend(HEADER);
    w.write_record(&header).map_err(csv_err)?;
    for (k, row) in rows.iter().enumerate() {
        let mut rec: Vec<String> = match plot {
            Some((param, vals)) => vec![param.name().to_string(), fmt_num(vals[k])],
            None => Vec::new(),
        };
        rec.extend(row.record());
        w.write_record(&rec).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Numeric(e.to_string()))?;
    emit_bytes(out, &bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_keep_twelve_digits() {
        assert_eq!(fmt_num(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_num(1.5), "1.5");
        assert_eq!(fmt_num(-0.0), "0");
        assert_eq!(fmt_num(2.0 / 3.0 * 1e-3), "0.000666666666667");
        assert_eq!(fmt_num(123456789.1234567), "123456789.123");
    }

    #[test]
    fn params_apply_and_validate() {
        let base = MarketParams::linear(-1.0, 2.0, 0.5, 2.0, 1.0);
        assert_eq!(
            Param::KappaHigh.apply(&base, 1.5).unwrap().cost,
            CostFamily::linear(2.0, 1.5)
        );
        assert_eq!(Param::Schools.apply(&base, 3.0).unwrap().n_schools, 3);
        assert!(Param::Schools.apply(&base, 2.5).is_err());
        assert!(Param::ThetaLow.apply(&base, 3.0).is_err());
        assert!(Param::Exponent.apply(&base, 2.0).is_err());
    }
}
