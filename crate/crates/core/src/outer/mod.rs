//! Full-game solvers for monopoly and competing schools, together with
//! deviation audits and welfare accounting.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::epbe::{construct_epbe, ConstructionTag, Destination, Offer, PopulationStrategy, SubgameEquilibrium};
use crate::error::{Error, Result};
use crate::market::{cost_inverse_effort, expected_type, riley_effort, MarketParams, Type};
use crate::monitoring::{Policy, PolicyProfile, Signal, StepMonitoringPolicy};

mod audit;
mod credit;
mod semipool;

pub use audit::{deviation_audit, deviation_gain, AuditGrids, AuditMode, AuditReport, Deviation};
pub use credit::{credit_monopoly_rpbe, low_enrollment_probability, CreditFamily, CreditSolution};
pub use semipool::{semipooling_family, BoundCertificate, FreeParam, SemipoolingFamily, SemipoolingVariant};

/// A pair of per-type quantities.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TypeShares {
    #[serde(rename = "L")]
    pub low: f64,
    #[serde(rename = "H")]
    pub high: f64,
}

impl TypeShares {
    pub fn get(&self, ty: Type) -> f64 {
        match ty {
            Type::Low => self.low,
            Type::High => self.high,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeLabel {
    MonopolySorting,
    MonopolyScreening,
    MonopolyCredit,
    Riley,
    SemipoolingZeroFee,
    SemipoolingWithFee,
    CreditFamily,
    /// Canonical equilibrium of an arbitrary profile.
    Canonical,
}

impl fmt::Display for OutcomeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            OutcomeLabel::MonopolySorting => "monopoly_sorting",
            OutcomeLabel::MonopolyScreening => "monopoly_screening",
            OutcomeLabel::MonopolyCredit => "monopoly_credit",
            OutcomeLabel::Riley => "riley",
            OutcomeLabel::SemipoolingZeroFee => "semipooling_zero_fee",
            OutcomeLabel::SemipoolingWithFee => "semipooling_with_fee",
            OutcomeLabel::CreditFamily => "credit_family",
            OutcomeLabel::Canonical => "canonical",
        };
        f.write_str(s)
    }
}

/// An equilibrium of the full game with its induced allocations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumOutcome {
    pub profile: PolicyProfile,
    pub on_path: PopulationStrategy,
    pub wages: BTreeMap<Signal, Offer>,
    pub beliefs: BTreeMap<Signal, f64>,
    pub profits: Vec<f64>,
    pub enrollment: TypeShares,
    pub employment: TypeShares,
    pub payoffs: TypeShares,
    pub label: OutcomeLabel,
    pub construction_tag: ConstructionTag,
}

impl EquilibriumOutcome {
    pub fn from_equilibrium(eq: &SubgameEquilibrium, params: &MarketParams, label: OutcomeLabel) -> Result<Self> {
        let n = eq.profile.len();
        let mut enrollment = TypeShares::default();
        let mut employment = TypeShares::default();
        let mut profits = vec![0.0; n];
        for ty in Type::BOTH {
            let (mut enrolled, mut employed) = (0.0, 0.0);
            for a in eq.strategy.actions(ty) {
                if let Destination::School(i) = a.destination {
                    enrolled += a.prob;
                    profits[i] += params.weight(ty) * a.prob * eq.profile.fee(i);
                    if eq.offer(eq.profile.signal_at(i, a.effort))?.is_hire() {
                        employed += a.prob;
                    }
                }
            }
            match ty {
                Type::Low => {
                    enrollment.low = enrolled;
                    employment.low = employed;
                }
                Type::High => {
                    enrollment.high = enrolled;
                    employment.high = employed;
                }
            }
        }
        Ok(EquilibriumOutcome {
            profile: eq.profile.clone(),
            on_path: eq.strategy.clone(),
            wages: eq.wages.clone(),
            beliefs: eq.beliefs.clone(),
            profits,
            enrollment,
            employment,
            payoffs: TypeShares {
                low: eq.payoff_low,
                high: eq.payoff_high,
            },
            label,
            construction_tag: eq.construction_tag,
        })
    }

    /// The subgame equilibrium on the outcome's profile.
    pub fn subgame(&self) -> SubgameEquilibrium {
        SubgameEquilibrium {
            profile: self.profile.clone(),
            strategy: self.on_path.clone(),
            wages: self.wages.clone(),
            beliefs: self.beliefs.clone(),
            payoff_low: self.payoffs.low,
            payoff_high: self.payoffs.high,
            construction_tag: self.construction_tag,
        }
    }

    pub fn total_profit(&self) -> f64 {
        self.profits.iter().sum()
    }

    /// Wage paid on a sent signal (no offer counts as 0).
    pub fn wage(&self, s: Signal) -> Option<f64> {
        self.wages.get(&s).map(Offer::value)
    }
}

fn require_schools(n: usize, min: usize) -> Result<()> {
    if n < min {
        return Err(Error::input("n_schools", format!("must be at least {min}, got {n}")));
    }
    Ok(())
}

/// Monopoly outcome without a binding credit cap: pooling at fee 𝔼θ under
/// sorting, exclusion of low types at fee θ_H under screening.
pub fn monopoly_rpbe(params: &MarketParams, tol: f64) -> Result<EquilibriumOutcome> {
    params.validate()?;
    if params.n_schools != 1 {
        return Err(Error::input(
            "n_schools",
            format!("a monopoly needs exactly one school, got {}", params.n_schools),
        ));
    }
    let (fee, label) = if params.is_sorting() {
        (expected_type(params), OutcomeLabel::MonopolySorting)
    } else {
        (params.theta_high, OutcomeLabel::MonopolyScreening)
    };
    if let Some(k) = params.credit_cap {
        if k < fee {
            return Err(Error::input(
                "credit_cap",
                format!("cap {k} binds below the monopoly fee {fee}; use the credit-constrained solver"),
            ));
        }
    }
    let profile = PolicyProfile::new(vec![Policy::uninformative(fee)]);
    let eq = construct_epbe(&profile, params, tol)?;
    EquilibriumOutcome::from_equilibrium(&eq, params, label)
}

/// Symmetric separating outcome: every school charges 0 and certifies
/// effort e^R; high types split evenly and earn θ_H.
pub fn riley_rpbe(params: &MarketParams, n: usize, tol: f64) -> Result<EquilibriumOutcome> {
    require_schools(n, 2)?;
    let params = params.clone().with_schools(n);
    params.validate()?;
    let er = riley_effort(&params, tol)?;
    let profile = PolicyProfile::symmetric(Policy::new(0.0, StepMonitoringPolicy::cutoff(er)?), n);
    let eq = construct_epbe(&profile, &params, tol)?;
    EquilibriumOutcome::from_equilibrium(&eq, &params, OutcomeLabel::Riley)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FierceReason {
    NExceedsInvLambda,
    NThetaLExceedsMean,
    LossesDominate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FierceVerdict {
    pub fierce: bool,
    pub reasons: Vec<FierceReason>,
}

/// Competition is fierce when n > 1/λ, nθ_L > 𝔼θ or −(n−1)θ_L ≥ θ_H.
pub fn is_fierce(params: &MarketParams, n: usize) -> Result<FierceVerdict> {
    require_schools(n, 2)?;
    let nf = n as f64;
    let mut reasons = Vec::new();
    if nf > 1.0 / params.lambda {
        reasons.push(FierceReason::NExceedsInvLambda);
    }
    if nf * params.theta_low > expected_type(params) {
        reasons.push(FierceReason::NThetaLExceedsMean);
    }
    if -(nf - 1.0) * params.theta_low >= params.theta_high {
        reasons.push(FierceReason::LossesDominate);
    }
    Ok(FierceVerdict {
        fierce: !reasons.is_empty(),
        reasons,
    })
}

/// One connected piece of a fee set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeeComponent {
    Point {
        fee: f64,
    },
    Interval {
        lo: f64,
        hi: f64,
        lo_closed: bool,
        hi_closed: bool,
    },
}

impl FeeComponent {
    pub fn contains(&self, f: f64, tol: f64) -> bool {
        match *self {
            FeeComponent::Point { fee } => (f - fee).abs() <= tol,
            FeeComponent::Interval {
                lo,
                hi,
                lo_closed,
                hi_closed,
            } => {
                let above = if lo_closed { f >= lo - tol } else { f > lo + tol };
                let below = if hi_closed { f <= hi + tol } else { f < hi - tol };
                above && below
            }
        }
    }
}

/// Finite union of points and intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeeSet {
    pub components: Vec<FeeComponent>,
}

impl FeeSet {
    pub fn contains(&self, f: f64, tol: f64) -> bool {
        self.components.iter().any(|c| c.contains(f, tol))
    }

    pub fn zero() -> Self {
        FeeSet {
            components: vec![FeeComponent::Point { fee: 0.0 }],
        }
    }
}

impl fmt::Display for FeeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .components
            .iter()
            .map(|c| match *c {
                FeeComponent::Point { fee } => format!("{{{fee}}}"),
                FeeComponent::Interval {
                    lo,
                    hi,
                    lo_closed,
                    hi_closed,
                } => format!(
                    "{}{lo}, {hi}{}",
                    if lo_closed { '[' } else { '(' },
                    if hi_closed { ']' } else { ')' }
                ),
            })
            .collect();
        f.write_str(&parts.join(" ∪ "))
    }
}

/// Fees compatible with a symmetric equilibrium of the full game. Fierce
/// competition leaves only {0}.
pub fn mild_fee_set(params: &MarketParams, n: usize) -> Result<FeeSet> {
    if is_fierce(params, n)?.fierce {
        return Ok(FeeSet::zero());
    }
    let nf = n as f64;
    let mean = expected_type(params);
    let mut components = Vec::new();
    if params.is_sorting() {
        let lo = nf * params.theta_low;
        let hi = params.theta_high.min(mean / (params.lambda * nf));
        if lo > 0.0 {
            components.push(FeeComponent::Point { fee: 0.0 });
        }
        if lo < hi {
            components.push(FeeComponent::Interval {
                lo,
                hi,
                lo_closed: true,
                hi_closed: false,
            });
        } else if lo <= 0.0 {
            components.push(FeeComponent::Point { fee: 0.0 });
        }
    } else {
        let hi = ((params.theta_high + (nf - 1.0) * params.theta_low) / nf).max(0.0);
        if hi > 0.0 {
            components.push(FeeComponent::Interval {
                lo: 0.0,
                hi,
                lo_closed: true,
                hi_closed: true,
            });
        } else {
            components.push(FeeComponent::Point { fee: 0.0 });
        }
    }
    Ok(FeeSet { components })
}

/// Picks the Riley member of a family of symmetric outcomes.
pub fn select_iis(family: &[EquilibriumOutcome]) -> Result<EquilibriumOutcome> {
    family
        .iter()
        .find(|o| o.label == OutcomeLabel::Riley)
        .cloned()
        .ok_or_else(|| Error::Invariant("the family has no Riley member".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelfareReport {
    pub productivity_term: f64,
    pub effort_waste: f64,
    pub total: f64,
    /// (1−λ)U_L and λU_H.
    pub student_surplus: TypeShares,
    pub school_profit_total: f64,
    pub max_welfare: f64,
}

/// Expected productivity of employed workers net of effort costs, and its
/// split between students and schools.
pub fn welfare(outcome: &EquilibriumOutcome, params: &MarketParams) -> Result<WelfareReport> {
    let lambda = params.lambda;
    let productivity_term = lambda * params.theta_high * outcome.employment.high
        + (1.0 - lambda) * params.theta_low * outcome.employment.low;
    let mut effort_waste = 0.0;
    for ty in Type::BOTH {
        for a in outcome.on_path.actions(ty) {
            effort_waste += params.weight(ty) * a.prob * params.cost(ty, a.effort)?;
        }
    }
    let max_welfare = if params.is_sorting() {
        expected_type(params)
    } else {
        lambda * params.theta_high
    };
    Ok(WelfareReport {
        productivity_term,
        effort_waste,
        total: productivity_term - effort_waste,
        student_surplus: TypeShares {
            low: (1.0 - lambda) * outcome.payoffs.low,
            high: lambda * outcome.payoffs.high,
        },
        school_profit_total: outcome.total_profit(),
        max_welfare,
    })
}

/// Effort with c(θ, e) = target, clamped to the table end for tabulated
/// families.
pub(crate) fn effort_for_cost(params: &MarketParams, ty: Type, target: f64, tol: f64) -> Result<f64> {
    match cost_inverse_effort(&params.cost, ty, target.max(0.0), tol) {
        Err(Error::Range(_)) => Ok(params.cost.effort_cap().unwrap_or(f64::INFINITY)),
        other => other,
    }
}

/// Policy with messages 0, 1, … at the given positive ascending thresholds.
pub(crate) fn step_policy(fee: f64, thresholds: Vec<f64>) -> Result<Policy> {
    Ok(Policy::new(fee, StepMonitoringPolicy::with_thresholds(thresholds)?))
}
