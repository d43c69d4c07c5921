use serde::{Deserialize, Serialize};
use sigdesign::epbe::{construct_epbe, SubgameEquilibrium};
use sigdesign::market::MarketParams;
use sigdesign::monitoring::PolicyProfile;
use sigdesign::refine::{
    brute_force_equilibria, check_minimality, outcomes_equivalent, verify_extended_d1, verify_pbe, DeviationGrid,
    VerificationReport,
};

use crate::error::CliResult;
use crate::io::ProfileInput;

/// Tolerance for matching the canonical equilibrium against the oracle.
pub const MATCH_TOL: f64 = 1e-6;

fn check_schools(profile: &PolicyProfile, params: &MarketParams) -> CliResult<()> {
    if profile.len() != params.n_schools {
        return Err(crate::error::CliError::input(format!(
            "profile has {} policies but n_schools is {}",
            profile.len(),
            params.n_schools
        )));
    }
    Ok(())
}

/// Runs every equilibrium check on the given equilibrium, or on
/// the canonical one when only a profile is given.
pub fn verify(
    input: ProfileInput,
    params: &MarketParams,
    grid_points: usize,
    tol: f64,
) -> CliResult<VerificationReport> {
    let (profile, eq) = match input {
        ProfileInput::Profile(p) => {
            check_schools(&p, params)?;
            let eq = construct_epbe(&p, params, tol)?;
            (p, eq)
        }
        ProfileInput::Bundle { profile, equilibrium } => (profile, equilibrium),
    };
    check_schools(&profile, params)?;
    let grid = DeviationGrid::uniform_covering(&profile, params, grid_points, tol)?;
    Ok(verify_pbe(&profile, &eq, params, &grid, tol)?
        .merge(verify_extended_d1(&profile, &eq, params, &grid, tol)?)
        .merge(check_minimality(&profile, &eq, params, &grid, tol)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Match,
    Mismatch,
}

/// Result of `oracle-compare`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub result: Verdict,
    pub grid: Vec<f64>,
    pub canonical: SubgameEquilibrium,
    /// 0-based index of the first enumerated equilibrium matching the
    /// canonical one.
    pub matched: Option<usize>,
    pub oracle: Vec<SubgameEquilibrium>,
}

pub fn oracle_compare(
    profile: &PolicyProfile,
    params: &MarketParams,
    grid_points: usize,
    tol: f64,
) -> CliResult<OracleComparison> {
    check_schools(profile, params)?;
    let grid = DeviationGrid::uniform_covering(profile, params, grid_points, tol)?;
    let canonical = construct_epbe(profile, params, tol)?;
    let oracle = brute_force_equilibria(profile, params, &grid, 2, tol)?;
    let matched = oracle
        .iter()
        .position(|eq| outcomes_equivalent(&canonical, eq, &grid, MATCH_TOL));
    Ok(OracleComparison {
        result: if matched.is_some() {
            Verdict::Match
        } else {
            Verdict::Mismatch
        },
        grid: grid.points().to_vec(),
        canonical,
        matched,
        oracle,
    })
}
