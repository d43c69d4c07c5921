//! Symmetric semi-pooling outcomes under competition: low types and a share
//! q_h of high types pool at e_l for the wage w_l, the other high types
//! separate for θ_H.

use serde::{Deserialize, Serialize};

use super::{effort_for_cost, mild_fee_set, require_schools, step_policy, EquilibriumOutcome, OutcomeLabel};
use crate::epbe::{Action, PopulationStrategy};
use crate::error::{Error, Result};
use crate::market::{expected_type, riley_effort, MarketParams, Type};
use crate::monitoring::PolicyProfile;
use crate::refine::equilibrium_from_strategy;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "fee", rename_all = "snake_case")]
pub enum SemipoolingVariant {
    ZeroFee,
    WithFee(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum FreeParam {
    LowEffort(f64),
    PoolShare(f64),
}

/// Why a zero-fee family is empty: the pooled wage can never reach what
/// high-type indifference requires.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCertificate {
    /// sup over q_h ∈ (0,1) of the pooled wage, i.e. 𝔼θ.
    pub sup_pool_wage: f64,
    /// θ_H − c(θ_H, e^R), the smallest pooled wage compatible with e_l ≥ 0.
    pub required_pool_wage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SemipoolingFamily {
    pub members: Vec<EquilibriumOutcome>,
    pub certificate: Option<BoundCertificate>,
}

fn pooled_wage(params: &MarketParams, q_h: f64) -> f64 {
    let l = params.lambda;
    (l * q_h * params.theta_high + (1.0 - l) * params.theta_low) / (l * q_h + 1.0 - l)
}

fn pool_share(params: &MarketParams, w_l: f64) -> f64 {
    let l = params.lambda;
    (1.0 - l) * (w_l - params.theta_low) / (l * (params.theta_high - w_l))
}

/// Fee, pooled and separating efforts, and the pooled share of high types.
struct Shape {
    fee: f64,
    e_l: f64,
    e_h: f64,
    q_h: f64,
}

fn build(params: &MarketParams, n: usize, shape: Shape, label: OutcomeLabel, tol: f64) -> Result<EquilibriumOutcome> {
    let Shape { fee, e_l, e_h, q_h } = shape;
    let thresholds = if e_l > 0.0 { vec![e_l, e_h] } else { vec![e_h] };
    let profile = PolicyProfile::symmetric(step_policy(fee, thresholds)?, n);
    let share = 1.0 / n as f64;
    let mut strategy = PopulationStrategy::default();
    for i in 0..n {
        strategy.low.push(Action::school(i, e_l, share));
        strategy.high.push(Action::school(i, e_l, q_h * share));
        strategy.high.push(Action::school(i, e_h, (1.0 - q_h) * share));
    }
    let eq = equilibrium_from_strategy(&profile, strategy, params, tol)?;
    EquilibriumOutcome::from_equilibrium(&eq, params, label)
}

/// Semi-pooling member pinned by one free parameter, or an empty family
/// when the parameter admits no member. Zero-fee members separate at e^R;
/// members with a fee leave low types with payoff exactly 0 and are kept
/// only when the fee lies in the mild-competition fee set.
pub fn semipooling_family(
    params: &MarketParams,
    n: usize,
    variant: SemipoolingVariant,
    free: FreeParam,
    tol: f64,
) -> Result<SemipoolingFamily> {
    require_schools(n, 2)?;
    let params = &params.clone().with_schools(n);
    params.validate()?;
    let er = riley_effort(params, tol)?;
    match free {
        FreeParam::PoolShare(q) if !(q > 0.0 && q < 1.0) => {
            return Err(Error::input("q_h", "must lie strictly inside (0, 1)"))
        }
        FreeParam::LowEffort(e) if !(e >= 0.0 && e.is_finite()) => {
            return Err(Error::input("e_l", "must be finite and nonnegative"))
        }
        FreeParam::LowEffort(e) if matches!(variant, SemipoolingVariant::ZeroFee) && e >= er => {
            return Err(Error::input("e_l", format!("must lie in [0, e^R) = [0, {er})")))
        }
        _ => {}
    }
    let empty = |certificate| SemipoolingFamily {
        members: vec![],
        certificate,
    };
    let floor = params.wage_floor();
    match variant {
        SemipoolingVariant::ZeroFee => {
            let base = params.theta_high - params.cost(Type::High, er)?;
            let mean = expected_type(params);
            let certificate = (mean <= base + tol).then_some(BoundCertificate {
                sup_pool_wage: mean,
                required_pool_wage: base,
            });
            let (e_l, w_l, q_h) = match free {
                FreeParam::PoolShare(q) => {
                    let w = pooled_wage(params, q);
                    let gap = w - base;
                    if gap < -tol {
                        return Ok(empty(certificate));
                    }
                    (effort_for_cost(params, Type::High, gap, tol)?, w, q)
                }
                FreeParam::LowEffort(e) => {
                    let w = base + params.cost(Type::High, e)?;
                    if !(w > params.theta_low && w < params.theta_high) {
                        return Ok(empty(certificate));
                    }
                    (e, w, pool_share(params, w))
                }
            };
            let feasible = e_l < er
                && w_l > floor
                && w_l < params.theta_high
                && q_h > 0.0
                && q_h < 1.0
                && w_l - params.cost(Type::Low, e_l)? >= floor - tol;
            if !feasible {
                return Ok(empty(certificate));
            }
            let member = build(
                params,
                n,
                Shape {
                    fee: 0.0,
                    e_l,
                    e_h: er,
                    q_h,
                },
                OutcomeLabel::SemipoolingZeroFee,
                tol,
            )?;
            Ok(SemipoolingFamily {
                members: vec![member],
                certificate: None,
            })
        }
        SemipoolingVariant::WithFee(fee) => {
            if !(fee > 0.0 && fee.is_finite()) {
                return Err(Error::input("fee", "must be positive"));
            }
            if !mild_fee_set(params, n)?.contains(fee, tol) {
                return Ok(empty(None));
            }
            let (e_l, w_l, q_h) = match free {
                FreeParam::PoolShare(q) => {
                    let w = pooled_wage(params, q);
                    if w < fee - tol {
                        return Ok(empty(None));
                    }
                    (effort_for_cost(params, Type::Low, w - fee, tol)?, w, q)
                }
                FreeParam::LowEffort(e) => {
                    let w = fee + params.cost(Type::Low, e)?;
                    if !(w > params.theta_low && w < params.theta_high) {
                        return Ok(empty(None));
                    }
                    (e, w, pool_share(params, w))
                }
            };
            if !(q_h > 0.0 && q_h < 1.0 && w_l > floor && w_l < params.theta_high) {
                return Ok(empty(None));
            }
            let e_h = effort_for_cost(
                params,
                Type::High,
                params.theta_high - w_l + params.cost(Type::High, e_l)?,
                tol,
            )?;
            if e_h <= e_l + tol {
                return Ok(empty(None));
            }
            let member = build(
                params,
                n,
                Shape { fee, e_l, e_h, q_h },
                OutcomeLabel::SemipoolingWithFee,
                tol,
            )?;
            Ok(SemipoolingFamily {
                members: vec![member],
                certificate: None,
            })
        }
    }
}
