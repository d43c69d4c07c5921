//! Model primitives and the bracketing bisection used to invert costs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum number of bisection steps after a bracket is found.
pub const MAX_BISECTION_STEPS: usize = 200;
const MAX_DOUBLINGS: usize = 1100;

/// Student type. The label selects the cost slope; productivity lives in
/// [`MarketParams`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Type {
    #[serde(rename = "L")]
    Low,
    #[serde(rename = "H")]
    High,
}

impl Type {
    pub const BOTH: [Type; 2] = [Type::Low, Type::High];

    pub fn other(self) -> Type {
        match self {
            Type::Low => Type::High,
            Type::High => Type::Low,
        }
    }
}

/// Effort cost c(θ, e). Each type carries its own slope, so the family is
/// well defined whatever the sign of θ_L.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CostFamily {
    /// c(θ, e) = κ_θ · e
    Linear {
        #[serde(rename = "kappa_L")]
        kappa_low: f64,
        #[serde(rename = "kappa_H")]
        kappa_high: f64,
    },
    /// c(θ, e) = κ_θ · e^p with p ≥ 1
    Power {
        #[serde(rename = "kappa_L")]
        kappa_low: f64,
        #[serde(rename = "kappa_H")]
        kappa_high: f64,
        exponent: f64,
    },
    /// Piecewise-linear interpolation between knots.
    Tabulated {
        efforts: Vec<f64>,
        #[serde(rename = "cost_L")]
        cost_low: Vec<f64>,
        #[serde(rename = "cost_H")]
        cost_high: Vec<f64>,
    },
}

impl CostFamily {
    pub fn linear(kappa_low: f64, kappa_high: f64) -> Self {
        CostFamily::Linear { kappa_low, kappa_high }
    }

    pub fn power(kappa_low: f64, kappa_high: f64, exponent: f64) -> Self {
        CostFamily::Power {
            kappa_low,
            kappa_high,
            exponent,
        }
    }

    /// Evaluates c(θ, e).
    pub fn cost(&self, ty: Type, effort: f64) -> Result<f64> {
        if effort.is_nan() || effort < 0.0 {
            return Err(Error::Domain(format!("effort must be nonnegative, got {effort}")));
        }
        match self {
            CostFamily::Linear { kappa_low, kappa_high } => Ok(pick(ty, *kappa_low, *kappa_high) * effort),
            CostFamily::Power {
                kappa_low,
                kappa_high,
                exponent,
            } => Ok(pick(ty, *kappa_low, *kappa_high) * effort.powf(*exponent)),
            CostFamily::Tabulated {
                efforts,
                cost_low,
                cost_high,
            } => {
                let table = match ty {
                    Type::Low => cost_low,
                    Type::High => cost_high,
                };
                interpolate(efforts, table, effort)
            }
        }
    }

    /// Largest admissible effort (finite only for tabulated families).
    pub fn effort_cap(&self) -> Option<f64> {
        match self {
            CostFamily::Tabulated { efforts, .. } => efforts.last().copied(),
            _ => None,
        }
    }

    /// c(θ_L, e) − c(θ_H, e).
    pub fn gap(&self, effort: f64) -> Result<f64> {
        Ok(self.cost(Type::Low, effort)? - self.cost(Type::High, effort)?)
    }

    /// Structural checks plus strict decreasing differences (at table knots
    /// for tabulated families).
    pub fn validate(&self) -> Result<()> {
        match self {
            CostFamily::Linear { kappa_low, kappa_high } => check_slopes(*kappa_low, *kappa_high),
            CostFamily::Power {
                kappa_low,
                kappa_high,
                exponent,
            } => {
                check_slopes(*kappa_low, *kappa_high)?;
                if !(exponent.is_finite() && *exponent >= 1.0) {
                    return Err(Error::input("cost.exponent", "must be a finite number >= 1"));
                }
                Ok(())
            }
            CostFamily::Tabulated {
                efforts,
                cost_low,
                cost_high,
            } => {
                if efforts.len() < 2 {
                    return Err(Error::input("cost.efforts", "need at least two knots"));
                }
                if cost_low.len() != efforts.len() {
                    return Err(Error::input("cost.cost_L", "length must match cost.efforts"));
                }
                if cost_high.len() != efforts.len() {
                    return Err(Error::input("cost.cost_H", "length must match cost.efforts"));
                }
                if efforts[0] != 0.0 {
                    return Err(Error::input("cost.efforts", "first knot must be 0"));
                }
                if !strictly_ascending(efforts) {
                    return Err(Error::input(
                        "cost.efforts",
                        "knots must be strictly ascending and finite",
                    ));
                }
                for (field, table) in [("cost.cost_L", cost_low), ("cost.cost_H", cost_high)] {
                    if table[0] != 0.0 {
                        return Err(Error::input(field, "cost at zero effort must be 0"));
                    }
                    if !strictly_ascending(table) {
                        return Err(Error::input(field, "costs must be strictly increasing and finite"));
                    }
                }
                let report = check_decreasing_differences(self, efforts)?;
                if !report.passed() {
                    return Err(Error::input("cost", "table violates strict decreasing differences"));
                }
                Ok(())
            }
        }
    }
}

fn pick(ty: Type, low: f64, high: f64) -> f64 {
    match ty {
        Type::Low => low,
        Type::High => high,
    }
}

fn check_slopes(kappa_low: f64, kappa_high: f64) -> Result<()> {
    if !(kappa_low.is_finite() && kappa_low > 0.0) {
        return Err(Error::input("cost.kappa_L", "must be a positive finite number"));
    }
    if !(kappa_high.is_finite() && kappa_high > 0.0) {
        return Err(Error::input("cost.kappa_H", "must be a positive finite number"));
    }
    if kappa_high >= kappa_low {
        return Err(Error::input("cost.kappa_H", "must be strictly below kappa_L"));
    }
    Ok(())
}

fn strictly_ascending(xs: &[f64]) -> bool {
    xs.iter().all(|x| x.is_finite()) && xs.windows(2).all(|w| w[0] < w[1])
}

fn interpolate(knots: &[f64], values: &[f64], x: f64) -> Result<f64> {
    let last = *knots.last().ok_or_else(|| Error::Range("empty cost table".into()))?;
    if x > last || knots.len() != values.len() {
        return Err(Error::Range(format!("effort {x} outside tabulated range [0, {last}]")));
    }
    let idx = knots.partition_point(|k| *k <= x);
    if idx == 0 {
        return Err(Error::Range(format!("effort {x} below first knot")));
    }
    if idx == knots.len() {
        return Ok(values[idx - 1]);
    }
    let (x0, x1) = (knots[idx - 1], knots[idx]);
    let (y0, y1) = (values[idx - 1], values[idx]);
    Ok(y0 + (y1 - y0) * (x - x0) / (x1 - x0))
}

/// Primitives of the market.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketParams {
    #[serde(rename = "theta_L")]
    pub theta_low: f64,
    #[serde(rename = "theta_H")]
    pub theta_high: f64,
    pub lambda: f64,
    pub n_schools: usize,
    #[serde(default)]
    pub credit_cap: Option<f64>,
    pub cost: CostFamily,
}

impl MarketParams {
    /// Linear-cost market with one school and no credit cap.
    pub fn linear(theta_low: f64, theta_high: f64, lambda: f64, kappa_low: f64, kappa_high: f64) -> Self {
        MarketParams {
            theta_low,
            theta_high,
            lambda,
            n_schools: 1,
            credit_cap: None,
            cost: CostFamily::linear(kappa_low, kappa_high),
        }
    }

    pub fn with_schools(mut self, n: usize) -> Self {
        self.n_schools = n;
        self
    }

    pub fn with_credit_cap(mut self, cap: f64) -> Self {
        self.credit_cap = Some(cap);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.theta_high.is_finite() || self.theta_high <= 0.0 {
            return Err(Error::input("theta_H", "must be a positive finite number"));
        }
        if !self.theta_low.is_finite() || self.theta_low >= self.theta_high {
            return Err(Error::input("theta_L", "must be finite and strictly below theta_H"));
        }
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(Error::input("lambda", "must lie strictly inside (0, 1)"));
        }
        if self.n_schools == 0 {
            return Err(Error::input("n_schools", "must be a positive integer"));
        }
        if let Some(k) = self.credit_cap {
            if !(k.is_finite() && k > 0.0) {
                return Err(Error::input("credit_cap", "must be a positive finite number"));
            }
        }
        self.cost.validate()
    }

    pub fn cost(&self, ty: Type, effort: f64) -> Result<f64> {
        self.cost.cost(ty, effort)
    }

    pub fn theta(&self, ty: Type) -> f64 {
        pick(ty, self.theta_low, self.theta_high)
    }

    /// Population weight of a type.
    pub fn weight(&self, ty: Type) -> f64 {
        pick(ty, 1.0 - self.lambda, self.lambda)
    }

    /// θ_L ≥ 0 (the boundary θ_L = 0 counts as sorting).
    pub fn is_sorting(&self) -> bool {
        self.theta_low >= 0.0
    }

    /// max{θ_L, 0}: the lowest sequentially rational wage.
    pub fn wage_floor(&self) -> f64 {
        self.theta_low.max(0.0)
    }
}

/// 𝔼θ = λθ_H + (1−λ)θ_L.
pub fn expected_type(params: &MarketParams) -> f64 {
    params.lambda * params.theta_high + (1.0 - params.lambda) * params.theta_low
}

/// c(θ, e); see [`CostFamily::cost`].
pub fn cost(cf: &CostFamily, ty: Type, effort: f64) -> Result<f64> {
    cf.cost(ty, effort)
}

/// Solves c(θ, e) = target by bracketing bisection.
pub fn cost_inverse_effort(cf: &CostFamily, ty: Type, target: f64, tol: f64) -> Result<f64> {
    solve_increasing(|e| cf.cost(ty, e), target, tol, cf.effort_cap())
}

/// Finds x ≥ 0 with |f(x) − target| ≤ tol for a continuous increasing f with
/// f(0) = 0. The bracket [0, x_max] doubles until it contains the target
/// (never beyond `cap`), then at most [`MAX_BISECTION_STEPS`] bisection steps
/// run.
pub fn solve_increasing<F>(f: F, target: f64, tol: f64, cap: Option<f64>) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(target.is_finite() && target >= 0.0) {
        return Err(Error::Domain(format!(
            "target cost must be finite and nonnegative, got {target}"
        )));
    }
    if target == 0.0 {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut hi = cap.map_or(1.0, |c| c.min(1.0));
    let mut doublings = 0;
    while f(hi)? < target {
        if let Some(c) = cap {
            if hi >= c {
                return Err(Error::Range(format!(
                    "target cost {target} exceeds the tabulated range (max effort {c})"
                )));
            }
        }
        doublings += 1;
        if doublings > MAX_DOUBLINGS || !hi.is_finite() {
            return Err(Error::numeric(
                "could not bracket the target; cost looks bounded",
                Some((lo, hi)),
            ));
        }
        lo = hi;
        hi = cap.map_or(2.0 * hi, |c| (2.0 * hi).min(c));
    }
    if f(hi)? == target {
        return Ok(hi);
    }
    for _ in 0..MAX_BISECTION_STEPS {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = f(mid)?;
        if v == target {
            return Ok(mid);
        }
        if v < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (dl, dh) = ((f(lo)? - target).abs(), (f(hi)? - target).abs());
    let (best, err) = if dl <= dh { (lo, dl) } else { (hi, dh) };
    if err <= tol {
        Ok(best)
    } else {
        Err(Error::numeric(
            format!("bisection stalled with residual {err:e} above tolerance {tol:e}"),
            Some((lo, hi)),
        ))
    }
}

/// Kind of decreasing-differences failure between adjacent grid points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DdViolationKind {
    NegativeGap,
    NonIncreasingGap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DdViolation {
    pub lo: f64,
    pub hi: f64,
    pub kind: DdViolationKind,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DecreasingDifferencesReport {
    pub violations: Vec<DdViolation>,
}

impl DecreasingDifferencesReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks that g(e) = c(θ_L, e) − c(θ_H, e) is nonnegative and strictly
/// increasing across every adjacent pair of `grid`.
pub fn check_decreasing_differences(cf: &CostFamily, grid: &[f64]) -> Result<DecreasingDifferencesReport> {
    if grid.len() < 2 {
        return Err(Error::input("grid", "need at least two points"));
    }
    if grid.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
        return Err(Error::input("grid", "points must be finite and nonnegative"));
    }
    if !strictly_ascending(grid) {
        return Err(Error::input("grid", "points must be sorted without duplicates"));
    }
    let gaps = grid.iter().map(|e| cf.gap(*e)).collect::<Result<Vec<_>>>()?;
    let mut report = DecreasingDifferencesReport::default();
    for (i, pair) in gaps.windows(2).enumerate() {
        let (lo, hi) = (grid[i], grid[i + 1]);
        if pair[0] < 0.0 || pair[1] < 0.0 {
            report.violations.push(DdViolation {
                lo,
                hi,
                kind: DdViolationKind::NegativeGap,
            });
        }
        if pair[1] <= pair[0] {
            report.violations.push(DdViolation {
                lo,
                hi,
                kind: DdViolationKind::NonIncreasingGap,
            });
        }
    }
    Ok(report)
}

/// Riley effort e^R: c(θ_L, e^R) = θ_H − max{θ_L, 0}.
pub fn riley_effort(params: &MarketParams, tol: f64) -> Result<f64> {
    let target = params.theta_high - params.wage_floor();
    cost_inverse_effort(&params.cost, Type::Low, target, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn canon(theta_low: f64) -> MarketParams {
        MarketParams::linear(theta_low, 2.0, 0.5, 2.0, 1.0)
    }

    #[test]
    fn expected_type_examples() {
        assert_eq!(expected_type(&canon(1.0)), 1.5);
        assert_eq!(expected_type(&MarketParams::linear(-1.0, 1.0, 0.5, 2.0, 1.0)), 0.0);
        assert_eq!(expected_type(&canon(-1.0)), 0.5);
    }

    #[test]
    fn cost_examples() {
        let lin = CostFamily::linear(2.0, 1.0);
        assert_eq!(cost(&lin, Type::High, 0.0).unwrap(), 0.0);
        assert_eq!(cost(&lin, Type::Low, 0.5).unwrap(), 1.0);
        let pow = CostFamily::power(2.0, 1.0, 2.0);
        assert_eq!(cost(&pow, Type::High, 3.0).unwrap(), 9.0);
        assert!(matches!(cost(&lin, Type::Low, -0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn tabulated_interpolates_and_rejects_out_of_range() {
        let tab = CostFamily::Tabulated {
            efforts: vec![0.0, 1.0, 2.0],
            cost_low: vec![0.0, 2.0, 5.0],
            cost_high: vec![0.0, 1.0, 2.0],
        };
        tab.validate().unwrap();
        assert_eq!(tab.cost(Type::Low, 1.5).unwrap(), 3.5);
        assert_eq!(tab.cost(Type::High, 2.0).unwrap(), 2.0);
        assert!(matches!(tab.cost(Type::High, 2.5), Err(Error::Range(_))));
        assert!(matches!(
            cost_inverse_effort(&tab, Type::Low, 6.0, 1e-9),
            Err(Error::Range(_))
        ));
        assert!((cost_inverse_effort(&tab, Type::Low, 3.5, 1e-12).unwrap() - 1.5).abs() < 1e-9);
    }

    #[test]
    fn inverse_examples() {
        let lin = CostFamily::linear(2.0, 1.0);
        assert_eq!(cost_inverse_effort(&lin, Type::Low, 1.0, 1e-9).unwrap(), 0.5);
        assert_eq!(cost_inverse_effort(&lin, Type::High, 0.0, 1e-9).unwrap(), 0.0);
        let pow = CostFamily::power(2.0, 1.0, 2.0);
        assert!((cost_inverse_effort(&pow, Type::High, 9.0, 1e-9).unwrap() - 3.0).abs() < 1e-9);
    }

    #[test]
    fn stalled_bisection_reports_bracket() {
        let step = |e: f64| Ok(if e < 0.3 { 0.0 } else { 2.0 });
        match solve_increasing(step, 1.0, 1e-9, None) {
            Err(Error::Numeric {
                bracket: Some((lo, hi)),
                ..
            }) => {
                assert!(lo < 0.3 && hi >= 0.3 && hi - lo < 1e-12);
            }
            other => panic!("expected numeric error, got {other:?}"),
        }
    }

    #[test]
    fn bounded_cost_cannot_be_bracketed() {
        let bounded = |e: f64| Ok(1.0 - (-e).exp());
        assert!(matches!(
            solve_increasing(bounded, 2.0, 1e-9, None),
            Err(Error::Numeric { .. })
        ));
    }

    #[test]
    fn decreasing_differences_examples() {
        let ok = check_decreasing_differences(&CostFamily::linear(2.0, 1.0), &[0.0, 1.0, 2.0]).unwrap();
        assert!(ok.passed());
        let flat = check_decreasing_differences(&CostFamily::linear(1.0, 1.0), &[0.0, 1.0]).unwrap();
        assert_eq!(
            flat.violations,
            vec![DdViolation {
                lo: 0.0,
                hi: 1.0,
                kind: DdViolationKind::NonIncreasingGap
            }]
        );
        let inverted = CostFamily::Tabulated {
            efforts: vec![0.0, 1.0],
            cost_low: vec![0.0, 1.0],
            cost_high: vec![0.0, 2.0],
        };
        let rep = check_decreasing_differences(&inverted, &[0.0, 1.0]).unwrap();
        assert!(rep.violations.iter().any(|v| v.kind == DdViolationKind::NegativeGap));
        assert!(inverted.validate().is_err());
        assert!(check_decreasing_differences(&CostFamily::linear(2.0, 1.0), &[1.0, 0.0]).is_err());
        assert!(check_decreasing_differences(&CostFamily::linear(2.0, 1.0), &[0.0, 0.0]).is_err());
    }

    #[test]
    fn riley_examples() {
        assert_eq!(riley_effort(&canon(-1.0), 1e-9).unwrap(), 1.0);
        assert_eq!(riley_effort(&canon(1.0), 1e-9).unwrap(), 0.5);
        let p = MarketParams::linear(-1.0, 1.0, 0.5, 2.0, 1.0);
        assert_eq!(riley_effort(&p, 1e-9).unwrap(), 0.5);
    }

    #[test]
    fn params_validation_names_fields() {
        let mut p = canon(1.0);
        p.lambda = 1.0;
        assert!(matches!(p.validate(), Err(Error::Input { field, .. }) if field == "lambda"));
        let mut p = canon(1.0);
        p.theta_low = 3.0;
        assert!(matches!(p.validate(), Err(Error::Input { field, .. }) if field == "theta_L"));
        let p = canon(1.0).with_credit_cap(-1.0);
        assert!(matches!(p.validate(), Err(Error::Input { field, .. }) if field == "credit_cap"));
        let p = MarketParams::linear(1.0, 2.0, 0.5, 1.0, 2.0);
        assert!(matches!(p.validate(), Err(Error::Input { field, .. }) if field == "cost.kappa_H"));
    }

    #[test]
    fn params_json_shape() {
        let json = r#"{"theta_L":1,"theta_H":2,"lambda":0.5,"n_schools":2,"credit_cap":null,
                       "cost":{"kind":"power","kappa_L":2,"kappa_H":1,"exponent":2}}"#;
        let p: MarketParams = serde_json::from_str(json).unwrap();
        assert_eq!(p.cost, CostFamily::power(2.0, 1.0, 2.0));
        assert_eq!(p.n_schools, 2);
        let back: MarketParams = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(back, p);
    }
}
