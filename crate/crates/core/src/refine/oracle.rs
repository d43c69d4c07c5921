//! Brute-force enumeration of subgame equilibria with small supports.
//!
//! Efforts above a message's minimum effort are strictly dominated, and
//! signals sharing a fee and a minimum effort are payoff-equivalent for
//! students, so each type chooses among the outside option and equivalence
//! classes of signals. For every pair of supports the wages on shared classes
//! follow from indifference, the mixing weights from the wage identity, and
//! any freedom left in how a type spreads mass over payoff-equivalent
//! destinations is resolved uniformly.

use std::collections::BTreeMap;

use rayon::prelude::*;

use super::{equilibrium_from_strategy, DeviationGrid, Verifier};
use crate::epbe::{wage_for_belief, Action, Destination, PopulationStrategy, SubgameEquilibrium};
use crate::error::{Error, Result};
use crate::market::{MarketParams, Type};
use crate::monitoring::{PolicyProfile, Signal};

/// Largest effort grid the enumerator accepts.
pub const MAX_ORACLE_GRID: usize = 25;
/// Largest number of signal classes per type support (outside not counted).
pub const MAX_SUPPORT_CAP: usize = 2;

struct Class {
    effort: f64,
    signals: Vec<Signal>,
    cost: [f64; 2],
}

#[derive(Clone)]
struct Support {
    outside: bool,
    classes: Vec<usize>,
}

fn idx(ty: Type) -> usize {
    match ty {
        Type::Low => 0,
        Type::High => 1,
    }
}

fn classes_of(profile: &PolicyProfile, params: &MarketParams, tol: f64) -> Result<Vec<Class>> {
    let mut out: Vec<(f64, Class)> = Vec::new();
    for s in profile.signals() {
        let e = profile.signal_effort(s)?;
        let f = profile.fee(s.school);
        match out
            .iter_mut()
            .find(|(fee, c)| (fee - f).abs() <= tol && (c.effort - e).abs() <= tol)
        {
            Some((_, c)) => c.signals.push(s),
            None => out.push((
                f,
                Class {
                    effort: e,
                    signals: vec![s],
                    cost: [f + params.cost(Type::Low, e)?, f + params.cost(Type::High, e)?],
                },
            )),
        }
    }
    Ok(out.into_iter().map(|(_, c)| c).collect())
}

fn supports(classes: &[Class], ty: Type, cap: usize, params: &MarketParams, tol: f64) -> Vec<Support> {
    let usable: Vec<usize> = (0..classes.len())
        .filter(|c| classes[*c].cost[idx(ty)] <= params.theta_high + tol)
        .collect();
    let mut sets: Vec<Vec<usize>> = vec![vec![]];
    for (k, a) in usable.iter().enumerate() {
        sets.push(vec![*a]);
        if cap >= 2 {
            for b in &usable[k + 1..] {
                sets.push(vec![*a, *b]);
            }
        }
    }
    sets.sort();
    let mut out = Vec::new();
    for classes in sets {
        for outside in [false, true] {
            if classes.is_empty() && !outside {
                continue;
            }
            out.push(Support {
                outside,
                classes: classes.clone(),
            });
        }
    }
    out
}

fn agree(values: &[f64], tol: f64) -> Option<Option<f64>> {
    match values.first() {
        None => Some(None),
        Some(v) => values.iter().all(|x| (x - v).abs() <= tol).then_some(Some(*v)),
    }
}

/// Solves one support pair for wages and weights; `None` when the pair
/// admits no equilibrium or a continuum of them.
fn solve(
    classes: &[Class],
    low: &Support,
    high: &Support,
    params: &MarketParams,
    tol: f64,
) -> Option<PopulationStrategy> {
    let shared: Vec<usize> = low
        .classes
        .iter()
        .filter(|c| high.classes.contains(c))
        .copied()
        .collect();
    let own = |s: &Support| -> Vec<usize> { s.classes.iter().filter(|c| !shared.contains(c)).copied().collect() };
    let (own_low, own_high) = (own(low), own(high));
    let separated_low = wage_for_belief(params, 0.0).value();

    let mut anchors_low: Vec<f64> = own_low.iter().map(|c| separated_low - classes[*c].cost[0]).collect();
    let mut anchors_high: Vec<f64> = own_high
        .iter()
        .map(|c| params.theta_high - classes[*c].cost[1])
        .collect();
    if low.outside {
        anchors_low.push(0.0);
    }
    if high.outside {
        anchors_high.push(0.0);
    }
    let u_low = agree(&anchors_low, tol)?;
    let u_high = agree(&anchors_high, tol)?;
    let low_rest = !anchors_low.is_empty();
    let high_rest = !anchors_high.is_empty();

    let lambda = params.lambda;
    let mut mass: BTreeMap<usize, [f64; 2]> = BTreeMap::new();
    match shared.len() {
        0 => {}
        1 if u_low.is_none() && u_high.is_none() => {
            mass.insert(shared[0], [1.0, 1.0]);
        }
        _ => {
            let mut ratios = Vec::with_capacity(shared.len());
            for c in &shared {
                let from_low = u_low.map(|u| u + classes[*c].cost[0]);
                let from_high = u_high.map(|u| u + classes[*c].cost[1]);
                let mut w = match (from_low, from_high) {
                    (Some(a), Some(b)) if (a - b).abs() <= tol => a,
                    (Some(_), Some(_)) => return None,
                    (Some(a), None) | (None, Some(a)) => a,
                    (None, None) => return None,
                };
                if params.theta_low < 0.0 && w.abs() <= tol {
                    w = 0.0;
                } else if !(w > params.theta_low + tol && w < params.theta_high - tol && w >= 0.0) {
                    return None;
                }
                ratios.push((1.0 - lambda) * (w - params.theta_low) / (lambda * (params.theta_high - w)));
            }
            if shared.len() == 1 {
                let rho = ratios[0];
                let m = match (low_rest, high_rest) {
                    (false, true) => [1.0, rho],
                    (true, false) => [1.0 / rho, 1.0],
                    _ => return None,
                };
                mass.insert(shared[0], m);
            } else {
                if low_rest || high_rest {
                    return None;
                }
                let (ra, rb) = (ratios[0], ratios[1]);
                if (ra - rb).abs() <= tol {
                    return None;
                }
                let la = (1.0 - rb) / (ra - rb);
                mass.insert(shared[0], [la, ra * la]);
                mass.insert(shared[1], [1.0 - la, rb * (1.0 - la)]);
            }
        }
    }
    if mass.values().flatten().any(|m| !(*m > tol && *m <= 1.0 + tol)) {
        return None;
    }

    let mut strategy = PopulationStrategy::default();
    for (ty, support, own) in [(Type::Low, low, &own_low), (Type::High, high, &own_high)] {
        let k = idx(ty);
        let acts = strategy.actions_mut(ty);
        let mut used = 0.0;
        for (c, m) in &mass {
            let class = &classes[*c];
            let share = m[k] / class.signals.len() as f64;
            used += m[k];
            for s in &class.signals {
                acts.push(Action::school(s.school, class.effort, share));
            }
        }
        let rest = 1.0 - used;
        let units = usize::from(support.outside) + own.iter().map(|c| classes[*c].signals.len()).sum::<usize>();
        if units == 0 {
            if rest.abs() > tol {
                return None;
            }
            continue;
        }
        if rest <= tol {
            return None;
        }
        let unit = rest / units as f64;
        if support.outside {
            acts.push(Action::outside(unit));
        }
        for c in own {
            let class = &classes[*c];
            for s in &class.signals {
                acts.push(Action::school(s.school, class.effort, unit));
            }
        }
    }
    strategy.normalize();
    Some(strategy)
}

/// Enumerates subgame equilibria in which each type mixes over at most
/// `support_cap` signal classes plus the outside option. Returned candidates
/// pass both the PBE and the extended D1 checks on `grid`, in lexicographic
/// order of their supports.
pub fn brute_force_equilibria(
    profile: &PolicyProfile,
    params: &MarketParams,
    grid: &DeviationGrid,
    support_cap: usize,
    tol: f64,
) -> Result<Vec<SubgameEquilibrium>> {
    profile.validate(params)?;
    if grid.len() > MAX_ORACLE_GRID {
        return Err(Error::Resource(format!(
            "effort grid has {} points; the enumerator accepts at most {MAX_ORACLE_GRID}",
            grid.len()
        )));
    }
    if support_cap == 0 || support_cap > MAX_SUPPORT_CAP {
        return Err(Error::input(
            "support_cap",
            format!("must lie in 1..={MAX_SUPPORT_CAP}, got {support_cap}"),
        ));
    }
    if profile.policies.iter().any(|p| p.fee > params.theta_high) {
        return Ok(Vec::new());
    }
    let verifier = Verifier::new(profile, params, grid, tol)?;
    let classes = classes_of(profile, params, tol)?;
    let low = supports(&classes, Type::Low, support_cap, params, tol);
    let high = supports(&classes, Type::High, support_cap, params, tol);
    let pairs: Vec<(&Support, &Support)> = low.iter().flat_map(|l| high.iter().map(move |h| (l, h))).collect();

    let found: Vec<Option<SubgameEquilibrium>> = pairs
        .par_iter()
        .map(|(l, h)| -> Result<Option<SubgameEquilibrium>> {
            let Some(strategy) = solve(&classes, l, h, params, tol) else {
                return Ok(None);
            };
            let eq = equilibrium_from_strategy(profile, strategy, params, tol)?;
            if verifier.pbe(&eq)?.is_empty() && verifier.d1(&eq)?.is_empty() {
                Ok(Some(eq))
            } else {
                Ok(None)
            }
        })
        .collect::<Result<_>>()?;
    Ok(found.into_iter().flatten().collect())
}

fn outcome_shares(eq: &SubgameEquilibrium, grid: &DeviationGrid, ty: Type) -> BTreeMap<(Destination, usize), f64> {
    let mut out = BTreeMap::new();
    for a in eq.strategy.actions(ty) {
        *out.entry((a.destination, grid.snap(a.effort))).or_insert(0.0) += a.prob;
    }
    out
}

/// Same profile, same per-type distribution over (destination, effort
/// snapped to `grid`), and same wages on every sent signal, all within `tol`.
/// Off-path beliefs are ignored.
pub fn outcomes_equivalent(a: &SubgameEquilibrium, b: &SubgameEquilibrium, grid: &DeviationGrid, tol: f64) -> bool {
    if a.profile != b.profile {
        return false;
    }
    for ty in Type::BOTH {
        let (x, y) = (outcome_shares(a, grid, ty), outcome_shares(b, grid, ty));
        let keys: Vec<_> = x.keys().chain(y.keys()).collect();
        for k in keys {
            let (p, q) = (x.get(k).copied().unwrap_or(0.0), y.get(k).copied().unwrap_or(0.0));
            if (p - q).abs() > tol {
                return false;
            }
        }
    }
    let mut sent = a.sent_signals();
    sent.extend(b.sent_signals());
    sent.iter().all(|s| match (a.wages.get(s), b.wages.get(s)) {
        (Some(u), Some(v)) => (u.value() - v.value()).abs() <= tol,
        _ => false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::epbe::construct_epbe;
    use crate::market::{expected_type, riley_effort};
    use crate::monitoring::{Policy, StepMonitoringPolicy};

    const TOL: f64 = 1e-9;

    fn grid(profile: &PolicyProfile, params: &MarketParams) -> DeviationGrid {
        DeviationGrid::uniform_covering(profile, params, 21, TOL).unwrap()
    }

    #[test]
    fn pooling_monopoly_is_found() {
        let p = MarketParams::linear(1.0, 2.0, 0.5, 2.0, 1.0);
        let prof = PolicyProfile::new(vec![Policy::uninformative(expected_type(&p))]);
        let g = grid(&prof, &p);
        let all = brute_force_equilibria(&prof, &p, &g, 2, TOL).unwrap();
        assert!(!all.is_empty());
        let canon = construct_epbe(&prof, &p, TOL).unwrap();
        assert!(all.iter().any(|e| outcomes_equivalent(e, &canon, &g, 1e-6)));
    }

    #[test]
    fn riley_duopoly_is_found() {
        let p = MarketParams::linear(-1.0, 2.0, 0.5, 2.0, 1.0).with_schools(2);
        let er = riley_effort(&p, TOL).unwrap();
        let prof = PolicyProfile::symmetric(Policy::new(0.0, StepMonitoringPolicy::cutoff(er).unwrap()), 2);
        let g = grid(&prof, &p);
        let all = brute_force_equilibria(&prof, &p, &g, 2, TOL).unwrap();
        let canon = construct_epbe(&prof, &p, TOL).unwrap();
        assert!(all.iter().any(|e| outcomes_equivalent(e, &canon, &g, 1e-6)));
        assert!(all
            .iter()
            .all(|e| (e.payoff_high - 1.0).abs() < 1e-9 && e.payoff_low.abs() < 1e-9));
    }

    #[test]
    fn fee_above_theta_high_yields_nothing() {
        let p = MarketParams::linear(1.0, 2.0, 0.5, 2.0, 1.0);
        let prof = PolicyProfile::new(vec![Policy::uninformative(2.5)]);
        let g = DeviationGrid::new(vec![0.0, 1.0]).unwrap();
        assert!(brute_force_equilibria(&prof, &p, &g, 2, TOL).unwrap().is_empty());
    }

    #[test]
    fn limits_are_enforced() {
        let p = MarketParams::linear(1.0, 2.0, 0.5, 2.0, 1.0);
        let prof = PolicyProfile::new(vec![Policy::uninformative(1.0)]);
        let big = DeviationGrid::new((0..30).map(|k| k as f64 * 0.1).collect()).unwrap();
        assert!(matches!(
            brute_force_equilibria(&prof, &p, &big, 2, TOL),
            Err(Error::Resource(_))
        ));
        let g = DeviationGrid::new(vec![0.0, 1.0]).unwrap();
        assert!(matches!(
            brute_force_equilibria(&prof, &p, &g, 3, TOL),
            Err(Error::Input { .. })
        ));
    }
}
