//! Monopoly pricing when students can pay at most K.

use serde::Serialize;

use super::{effort_for_cost, monopoly_rpbe, step_policy, EquilibriumOutcome, OutcomeLabel};
use crate::epbe::{construct_epbe, Action, PopulationStrategy};
use crate::error::{Error, Result};
use crate::market::{expected_type, MarketParams, Type};
use crate::monitoring::{Policy, PolicyProfile};
use crate::refine::equilibrium_from_strategy;

/// Result of the credit-constrained monopoly problem.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CreditSolution {
    Unique { outcome: Box<EquilibriumOutcome> },
    Family { family: Box<CreditFamily> },
}

/// The continuum of full-enrollment outcomes at fee K < 𝔼θ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CreditFamily {
    pub fee: f64,
    pub profit: f64,
    /// K + c(θ_L, e′) = 𝔼θ.
    pub e_prime: f64,
    /// Largest pooling cutoff: c(θ_L, e) = 𝔼θ − max{K, θ_L}.
    pub pooling_cutoff_max: f64,
    pub sorting: bool,
    #[serde(skip)]
    params: MarketParams,
    #[serde(skip)]
    tol: f64,
}

/// Solves the monopoly problem under the credit cap carried by `params`.
pub fn credit_monopoly_rpbe(params: &MarketParams, tol: f64) -> Result<CreditSolution> {
    params.validate()?;
    let k = params
        .credit_cap
        .ok_or_else(|| Error::input("credit_cap", "no credit cap given"))?;
    if params.n_schools != 1 {
        return Err(Error::input(
            "n_schools",
            format!("a monopoly needs exactly one school, got {}", params.n_schools),
        ));
    }
    let mean = expected_type(params);
    let mut uncapped = params.clone();
    uncapped.credit_cap = None;
    if k >= params.theta_high || (params.is_sorting() && k >= mean) {
        return Ok(CreditSolution::Unique {
            outcome: Box::new(monopoly_rpbe(&uncapped, tol)?),
        });
    }
    if k >= mean {
        let profile = PolicyProfile::new(vec![Policy::uninformative(k)]);
        let eq = construct_epbe(&profile, params, tol)?;
        let outcome = EquilibriumOutcome::from_equilibrium(&eq, params, OutcomeLabel::MonopolyCredit)?;
        return Ok(CreditSolution::Unique {
            outcome: Box::new(outcome),
        });
    }
    let e_prime = effort_for_cost(params, Type::Low, mean - k, tol)?;
    let pooling_cutoff_max = effort_for_cost(params, Type::Low, mean - k.max(params.theta_low), tol)?;
    Ok(CreditSolution::Family {
        family: Box::new(CreditFamily {
            fee: k,
            profit: k,
            e_prime,
            pooling_cutoff_max,
            sorting: params.is_sorting(),
            params: params.clone(),
            tol,
        }),
    })
}

/// Probability α_K with which low types enroll when the fee is K ∈ [𝔼θ, θ_H):
/// the pooled wage (λθ_H + α(1−λ)θ_L)/(λ + α(1−λ)) equals K.
pub fn low_enrollment_probability(params: &MarketParams, k: f64) -> f64 {
    let l = params.lambda;
    (l / (1.0 - l) * (params.theta_high - k) / (k - params.theta_low)).clamp(0.0, 1.0)
}

impl CreditFamily {
    fn build(&self, thresholds: Vec<f64>, strategy: PopulationStrategy) -> Result<EquilibriumOutcome> {
        let profile = PolicyProfile::new(vec![step_policy(self.fee, thresholds)?]);
        let eq = equilibrium_from_strategy(&profile, strategy, &self.params, self.tol)?;
        EquilibriumOutcome::from_equilibrium(&eq, &self.params, OutcomeLabel::CreditFamily)
    }

    /// Everybody enrolls and exerts the cutoff effort `e_l`, paid 𝔼θ.
    pub fn pooling_member(&self, e_l: f64) -> Result<EquilibriumOutcome> {
        if !(0.0..=self.pooling_cutoff_max + self.tol).contains(&e_l) {
            return Err(Error::input(
                "e_l",
                format!("pooling cutoff must lie in [0, {}]", self.pooling_cutoff_max),
            ));
        }
        let thresholds = if e_l > 0.0 { vec![e_l] } else { vec![] };
        let strategy = PopulationStrategy {
            low: vec![Action::school(0, e_l, 1.0)],
            high: vec![Action::school(0, e_l, 1.0)],
        };
        self.build(thresholds, strategy)
    }

    /// Screening: low types exert `e_l`; high types exert `e_l` with
    /// probability `q_h` and otherwise the effort e_h that leaves them
    /// indifferent at wage θ_H.
    pub fn partial_member(&self, e_l: f64, q_h: f64) -> Result<EquilibriumOutcome> {
        if self.sorting {
            return Err(Error::input(
                "params",
                "partial pooling members exist under screening only",
            ));
        }
        if !(q_h > 0.0 && q_h < 1.0) {
            return Err(Error::input("q_h", "must lie strictly inside (0, 1)"));
        }
        if !(e_l >= 0.0 && e_l.is_finite()) {
            return Err(Error::input("e_l", "must be finite and nonnegative"));
        }
        let p = &self.params;
        let l = p.lambda;
        let w_l = (l * q_h * p.theta_high + (1.0 - l) * p.theta_low) / (l * q_h + 1.0 - l);
        if w_l < self.fee + p.cost(Type::Low, e_l)? - self.tol {
            return Err(Error::input(
                "e_l",
                format!("pooled wage {w_l} does not cover the fee plus the low type's effort cost"),
            ));
        }
        let e_h = effort_for_cost(p, Type::High, p.theta_high - w_l + p.cost(Type::High, e_l)?, self.tol)?;
        let thresholds = if e_l > 0.0 { vec![e_l, e_h] } else { vec![e_h] };
        let strategy = PopulationStrategy {
            low: vec![Action::school(0, e_l, 1.0)],
            high: vec![Action::school(0, e_l, q_h), Action::school(0, e_h, 1.0 - q_h)],
        };
        self.build(thresholds, strategy)
    }

    /// Sorting: low types exert 0; high types exert 0 or the cutoff `e_l`,
    /// with the mix set so that the zero-effort wage is θ_H − c(θ_H, e_l).
    pub fn sorting_member(&self, e_l: f64) -> Result<EquilibriumOutcome> {
        if !self.sorting {
            return Err(Error::input("params", "sorting members exist under sorting only"));
        }
        let p = &self.params;
        let l = p.lambda;
        if !(e_l > 0.0 && e_l.is_finite()) {
            return Err(Error::input("e_l", "must be positive and finite"));
        }
        let w_l = p.theta_high - p.cost(Type::High, e_l)?;
        let mean = expected_type(p);
        if w_l < self.fee.max(p.theta_low) - self.tol || w_l > mean + self.tol {
            return Err(Error::input(
                "e_l",
                format!("wage θ_H − c(θ_H, e_l) = {w_l} must lie in [max(K, θ_L), 𝔼θ]"),
            ));
        }
        let q_h = ((1.0 - l) * (w_l - p.theta_low) / (l * (p.theta_high - w_l))).clamp(0.0, 1.0);
        let mut high = vec![Action::school(0, e_l, 1.0 - q_h)];
        if q_h > 0.0 {
            high.push(Action::school(0, 0.0, q_h));
        }
        let strategy = PopulationStrategy {
            low: vec![Action::school(0, 0.0, 1.0)],
            high,
        };
        self.build(vec![e_l], strategy)
    }

    /// `count` pooling members with evenly spaced cutoffs in
    /// [0, pooling_cutoff_max].
    pub fn sample(&self, count: usize) -> Result<Vec<EquilibriumOutcome>> {
        let steps = count.max(1);
        (0..steps)
            .map(|j| {
                let e = if steps == 1 {
                    0.0
                } else {
                    self.pooling_cutoff_max * j as f64 / (steps - 1) as f64
                };
                self.pooling_member(e)
            })
            .collect()
    }
}
