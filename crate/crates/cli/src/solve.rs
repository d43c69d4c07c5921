use serde::{Deserialize, Serialize};
use sigdesign::market::MarketParams;
use sigdesign::outer::{
    credit_monopoly_rpbe, deviation_audit, is_fierce, mild_fee_set, monopoly_rpbe, riley_rpbe, select_iis,
    semipooling_family, AuditGrids, AuditMode, AuditReport, CreditSolution, EquilibriumOutcome, FeeSet, FierceVerdict,
    FreeParam, SemipoolingVariant,
};

use crate::error::CliResult;

/// Summary of a continuum of credit-constrained monopoly outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreditFamilySummary {
    pub fee: f64,
    pub profit: f64,
    pub e_prime: f64,
    pub pooling_cutoff_max: f64,
    pub sorting: bool,
}

/// Closed-form outcomes for the market described by `params`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub outcomes: Vec<EquilibriumOutcome>,
    pub fierce: Option<FierceVerdict>,
    pub fee_set: Option<FeeSet>,
    pub credit_family: Option<CreditFamilySummary>,
}

/// Number of evenly spaced pooling members reported for a credit family.
const FAMILY_SAMPLES: usize = 3;

pub fn solve_market(params: &MarketParams, tol: f64) -> CliResult<Solution> {
    let n = params.n_schools;
    if n == 1 {
        if params.credit_cap.is_none() {
            return Ok(Solution {
                outcomes: vec![monopoly_rpbe(params, tol)?],
                fierce: None,
                fee_set: None,
                credit_family: None,
            });
        }
        return Ok(match credit_monopoly_rpbe(params, tol)? {
            CreditSolution::Unique { outcome } => Solution {
                outcomes: vec![*outcome],
                fierce: None,
                fee_set: None,
                credit_family: None,
            },
            CreditSolution::Family { family } => Solution {
                outcomes: family.sample(FAMILY_SAMPLES)?,
                fierce: None,
                fee_set: None,
                credit_family: Some(CreditFamilySummary {
                    fee: family.fee,
                    profit: family.profit,
                    e_prime: family.e_prime,
                    pooling_cutoff_max: family.pooling_cutoff_max,
                    sorting: family.sorting,
                }),
            },
        });
    }
    let mut outcomes = vec![riley_rpbe(params, n, tol)?];
    let semi = semipooling_family(params, n, SemipoolingVariant::ZeroFee, FreeParam::LowEffort(0.0), tol)?;
    outcomes.extend(semi.members);
    Ok(Solution {
        outcomes,
        fierce: Some(is_fierce(params, n)?),
        fee_set: Some(mild_fee_set(params, n)?),
        credit_family: None,
    })
}

/// The outcome reported for a market in sweeps and plots: the monopoly
/// outcome (the zero-cutoff pooling member for a credit family) or the
/// Riley outcome under competition.
pub fn headline(params: &MarketParams, tol: f64) -> CliResult<EquilibriumOutcome> {
    let mut sol = solve_market(params, tol)?;
    if params.n_schools >= 2 {
        return Ok(select_iis(&sol.outcomes)?);
    }
    Ok(sol.outcomes.swap_remove(0))
}

/// Output of `solve`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub params: MarketParams,
    #[serde(flatten)]
    pub solution: Solution,
    /// One audit per outcome, in the same order.
    pub audits: Vec<AuditReport>,
}

pub fn solve_report(params: &MarketParams, grid_points: usize, pessimistic: bool, tol: f64) -> CliResult<SolveReport> {
    let solution = solve_market(params, tol)?;
    let mode = if pessimistic {
        AuditMode::Pessimistic
    } else {
        AuditMode::Canonical
    };
    let audits = solution
        .outcomes
        .iter()
        .map(|o| {
            let grids = AuditGrids::covering(o, params, grid_points, tol)?;
            Ok(deviation_audit(o, params, &grids, mode, tol)?)
        })
        .collect::<CliResult<_>>()?;
    Ok(SolveReport {
        params: params.clone(),
        solution,
        audits,
    })
}
