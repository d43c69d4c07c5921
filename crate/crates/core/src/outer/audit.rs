//! Unilateral deviation audits against a constructed outcome.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::EquilibriumOutcome;
use crate::epbe::{construct_epbe, Destination, SubgameEquilibrium};
use crate::error::{Error, Result};
use crate::market::{MarketParams, Type};
use crate::monitoring::{Policy, PolicyProfile, StepMonitoringPolicy};
use crate::refine::{brute_force_equilibria, DeviationGrid, MAX_ORACLE_GRID};

/// Continuation play assumed after a deviation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditMode {
    /// The canonical equilibrium of the post-deviation subgame.
    #[default]
    Canonical,
    /// The deviator's least profitable equilibrium among the canonical one
    /// and those found by the brute-force enumerator.
    Pessimistic,
}

/// Signal-class count above which the pessimistic mode falls back to the
/// canonical continuation.
pub const PESSIMISTIC_SIGNAL_CAP: usize = 8;

/// Efforts used for single-threshold deviations and templates, and the fee
/// grid for deviations.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditGrids {
    pub effort: DeviationGrid,
    pub fees: Vec<f64>,
}

impl AuditGrids {
    pub fn new(effort: DeviationGrid, fees: Vec<f64>) -> Result<Self> {
        if effort.len() < 2 {
            return Err(Error::input("grids.effort", "needs a positive grid point"));
        }
        if fees.iter().any(|f| !(f.is_finite() && *f >= 0.0)) {
            return Err(Error::input("grids.fees", "fees must be finite and nonnegative"));
        }
        Ok(AuditGrids { effort, fees })
    }

    /// Effort grid covering the outcome's thresholds plus `n_points` evenly
    /// spaced fees in [0, θ_H].
    pub fn covering(outcome: &EquilibriumOutcome, params: &MarketParams, n_points: usize, tol: f64) -> Result<Self> {
        let effort = DeviationGrid::uniform_covering(&outcome.profile, params, n_points, tol)?;
        let k = n_points.max(2);
        let fees = (0..k).map(|j| params.theta_high * j as f64 / (k - 1) as f64).collect();
        AuditGrids::new(effort, fees)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    /// 1-based school index.
    pub school: usize,
    pub policy: Policy,
    pub template: String,
    pub profit: f64,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub mode: AuditMode,
    pub max_gain: f64,
    pub best: Option<Deviation>,
    pub evaluated: usize,
    pub pessimistic_fallbacks: usize,
}

fn school_profit(eq: &SubgameEquilibrium, params: &MarketParams, school: usize) -> f64 {
    let fee = eq.profile.fee(school);
    Type::BOTH
        .iter()
        .map(|ty| {
            let mass: f64 = eq
                .strategy
                .actions(*ty)
                .iter()
                .filter(|a| a.destination == Destination::School(school))
                .fold(0.0, |acc, a| acc + a.prob);
            params.weight(*ty) * mass * fee
        })
        .sum()
}

/// Profit gain of `school` switching to `policy`, under the canonical
/// continuation.
pub fn deviation_gain(
    outcome: &EquilibriumOutcome,
    params: &MarketParams,
    school: usize,
    policy: &Policy,
    tol: f64,
) -> Result<f64> {
    if school >= outcome.profile.len() {
        return Err(Error::input("school", format!("school {} does not exist", school + 1)));
    }
    let mut profile = outcome.profile.clone();
    profile.policies[school] = policy.clone();
    let eq = construct_epbe(&profile, params, tol)?;
    Ok(school_profit(&eq, params, school) - outcome.profits[school])
}

fn candidates(
    outcome: &EquilibriumOutcome,
    params: &MarketParams,
    grids: &AuditGrids,
) -> Result<Vec<(Policy, &'static str)>> {
    let points = grids.effort.points();
    let eps = points[1];
    let gap = params.cost(Type::Low, eps)? - params.cost(Type::High, eps)?;
    let gamma = (eps / 10.0).min(0.5 * gap);
    let mut out = Vec::new();
    for f in grids.fees.iter().filter(|f| **f <= params.theta_high) {
        out.push((Policy::uninformative(*f), "fee_grid"));
        for t in points.iter().filter(|t| **t > 0.0) {
            out.push((Policy::new(*f, StepMonitoringPolicy::cutoff(*t)?), "fee_grid"));
        }
    }
    let undercut = (outcome.profile.f_min() - params.cost(Type::Low, eps)? - gamma).max(0.0);
    out.push((Policy::new(undercut, StepMonitoringPolicy::cutoff(eps)?), "undercut"));
    out.push((Policy::new(gamma, StepMonitoringPolicy::cutoff(eps)?), "tiny_fee"));
    out.push((
        Policy::new(gamma, StepMonitoringPolicy::perfectly_informative(points)?),
        "grid_informative",
    ));
    Ok(out)
}

/// Searches unilateral deviations by every school over the fee × threshold
/// grid and the undercut, tiny-fee and grid-informative templates (ε is the
/// first positive grid effort, γ = min{ε/10, (c(θ_L,ε) − c(θ_H,ε))/2}).
/// Schools with identical policies are audited once.
pub fn deviation_audit(
    outcome: &EquilibriumOutcome,
    params: &MarketParams,
    grids: &AuditGrids,
    mode: AuditMode,
    tol: f64,
) -> Result<AuditReport> {
    if let Some((i, t)) = grids.effort.missing_threshold(&outcome.profile) {
        return Err(Error::input(
            "grids.effort",
            format!("threshold {t} of school {} is not on the grid", i + 1),
        ));
    }
    let policies = candidates(outcome, params, grids)?;
    let mut schools: Vec<usize> = Vec::new();
    for i in 0..outcome.profile.len() {
        let p = &outcome.profile.policies[i];
        if !schools
            .iter()
            .any(|j| outcome.profile.policies[*j] == *p && outcome.profits[*j] == outcome.profits[i])
        {
            schools.push(i);
        }
    }
    let jobs: Vec<(usize, &(Policy, &'static str))> = schools
        .iter()
        .flat_map(|i| policies.iter().map(move |p| (*i, p)))
        .collect();

    let results: Vec<(Deviation, bool)> = jobs
        .par_iter()
        .map(|(i, (policy, template))| -> Result<(Deviation, bool)> {
            let mut profile = outcome.profile.clone();
            profile.policies[*i] = policy.clone();
            let canon = construct_epbe(&profile, params, tol)?;
            let mut profit = school_profit(&canon, params, *i);
            let mut fallback = false;
            if mode == AuditMode::Pessimistic {
                match pessimistic_profit(&profile, params, grids, *i, tol)? {
                    Some(p) => profit = profit.min(p),
                    None => fallback = true,
                }
            }
            Ok((
                Deviation {
                    school: i + 1,
                    policy: policy.clone(),
                    template: template.to_string(),
                    profit,
                    gain: profit - outcome.profits[*i],
                },
                fallback,
            ))
        })
        .collect::<Result<_>>()?;

    let mut best: Option<Deviation> = None;
    let mut fallbacks = 0;
    for (d, fell_back) in &results {
        fallbacks += usize::from(*fell_back);
        if best.as_ref().is_none_or(|b| d.gain > b.gain) {
            best = Some(d.clone());
        }
    }
    Ok(AuditReport {
        mode,
        max_gain: best.as_ref().map_or(f64::NEG_INFINITY, |b| b.gain),
        best,
        evaluated: results.len(),
        pessimistic_fallbacks: fallbacks,
    })
}

/// Lowest deviator profit over the enumerated continuation equilibria, or
/// `None` when the subgame is too large to enumerate.
fn pessimistic_profit(
    profile: &PolicyProfile,
    params: &MarketParams,
    grids: &AuditGrids,
    school: usize,
    tol: f64,
) -> Result<Option<f64>> {
    if profile.signals().len() > PESSIMISTIC_SIGNAL_CAP
        || grids.effort.len() > MAX_ORACLE_GRID
        || profile.policies.iter().any(|p| p.fee > params.theta_high)
    {
        return Ok(None);
    }
    let all = brute_force_equilibria(profile, params, &grids.effort, 2, tol)?;
    Ok(all.iter().map(|eq| school_profit(eq, params, school)).reduce(f64::min))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::expected_type;
    use crate::outer::{riley_rpbe, OutcomeLabel};

    const TOL: f64 = 1e-9;

    #[test]
    fn riley_survives_canonical_audit() {
        let p = MarketParams::linear(-1.0, 2.0, 0.5, 2.0, 1.0).with_schools(2);
        let o = riley_rpbe(&p, 2, TOL).unwrap();
        let g = AuditGrids::covering(&o, &p, 21, TOL).unwrap();
        let r = deviation_audit(&o, &p, &g, AuditMode::Canonical, TOL).unwrap();
        assert!(r.max_gain <= TOL, "{r:?}");
        let own = o.profile.policies[0].clone();
        assert_eq!(deviation_gain(&o, &p, 0, &own, TOL).unwrap(), 0.0);
    }

    #[test]
    fn pooling_at_mean_invites_undercutting() {
        let p = MarketParams::linear(1.0, 2.0, 0.5, 2.0, 1.0).with_schools(2);
        let prof = PolicyProfile::symmetric(Policy::uninformative(expected_type(&p)), 2);
        let eq = construct_epbe(&prof, &p, TOL).unwrap();
        let o = EquilibriumOutcome::from_equilibrium(&eq, &p, OutcomeLabel::MonopolySorting).unwrap();
        let g = AuditGrids::covering(&o, &p, 21, TOL).unwrap();
        let r = deviation_audit(&o, &p, &g, AuditMode::Canonical, TOL).unwrap();
        assert!(r.max_gain >= 0.1, "{r:?}");
    }

    #[test]
    fn missing_incumbent_threshold_is_rejected() {
        let p = MarketParams::linear(-1.0, 2.0, 0.5, 2.0, 1.0).with_schools(2);
        let o = riley_rpbe(&p, 2, TOL).unwrap();
        let g = AuditGrids::new(DeviationGrid::new(vec![0.0, 0.5]).unwrap(), vec![0.0]).unwrap();
        assert!(matches!(
            deviation_audit(&o, &p, &g, AuditMode::Canonical, TOL),
            Err(Error::Input { .. })
        ));
    }
}
