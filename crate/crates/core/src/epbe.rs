//! Subgame equilibria and the canonical construction that produces one for
//! any policy profile.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::market::{cost_inverse_effort, expected_type, MarketParams, Type};
use crate::monitoring::{PolicyProfile, Signal};

/// Where a student goes: the outside option or a school.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Destination {
    Outside,
    School(usize),
}

impl Serialize for Destination {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Destination::Outside => serializer.serialize_none(),
            Destination::School(i) => serializer.serialize_some(&(i + 1)),
        }
    }
}

impl<'de> Deserialize<'de> for Destination {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        match Option::<usize>::deserialize(deserializer)? {
            None => Ok(Destination::Outside),
            Some(0) => Err(serde::de::Error::custom("schools are numbered from 1")),
            Some(i) => Ok(Destination::School(i - 1)),
        }
    }
}

/// One support point of a type's mixed strategy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Action {
    #[serde(rename = "school")]
    pub destination: Destination,
    pub effort: f64,
    pub prob: f64,
}

impl Action {
    pub fn outside(prob: f64) -> Self {
        Action {
            destination: Destination::Outside,
            effort: 0.0,
            prob,
        }
    }

    pub fn school(school: usize, effort: f64, prob: f64) -> Self {
        Action {
            destination: Destination::School(school),
            effort,
            prob,
        }
    }
}

/// Finite-support distribution over (destination, effort) for each type.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PopulationStrategy {
    #[serde(rename = "L")]
    pub low: Vec<Action>,
    #[serde(rename = "H")]
    pub high: Vec<Action>,
}

impl PopulationStrategy {
    pub fn actions(&self, ty: Type) -> &[Action] {
        match ty {
            Type::Low => &self.low,
            Type::High => &self.high,
        }
    }

    pub fn actions_mut(&mut self, ty: Type) -> &mut Vec<Action> {
        match ty {
            Type::Low => &mut self.low,
            Type::High => &mut self.high,
        }
    }

    /// Merges duplicate support points, drops zero-probability entries and
    /// sorts each support deterministically.
    pub fn normalize(&mut self) {
        for ty in Type::BOTH {
            let acts = self.actions_mut(ty);
            let mut merged: Vec<Action> = Vec::with_capacity(acts.len());
            acts.sort_by(|a, b| a.destination.cmp(&b.destination).then(a.effort.total_cmp(&b.effort)));
            for a in acts.drain(..) {
                match merged.last_mut() {
                    Some(last) if last.destination == a.destination && last.effort == a.effort => last.prob += a.prob,
                    _ => merged.push(a),
                }
            }
            merged.retain(|a| a.prob > 0.0);
            *acts = merged;
        }
    }

    /// Checks that each type plays a probability distribution over valid actions.
    pub fn validate(&self, n_schools: usize, tol: f64) -> Result<()> {
        for ty in Type::BOTH {
            let acts = self.actions(ty);
            let field = match ty {
                Type::Low => "strategy.L",
                Type::High => "strategy.H",
            };
            if acts.iter().any(|a| !(a.prob >= 0.0 && a.prob <= 1.0 + tol)) {
                return Err(Error::input(field, "probabilities must lie in [0, 1]"));
            }
            let total: f64 = acts.iter().map(|a| a.prob).sum();
            if (total - 1.0).abs() > tol.max(1e-12) {
                return Err(Error::input(field, format!("probabilities sum to {total}, not 1")));
            }
            for a in acts {
                match a.destination {
                    Destination::Outside if a.effort != 0.0 => {
                        return Err(Error::input(field, "outside option carries effort 0"))
                    }
                    Destination::School(i) if i >= n_schools => {
                        return Err(Error::input(field, format!("school {} does not exist", i + 1)))
                    }
                    _ => {}
                }
                if !(a.effort >= 0.0 && a.effort.is_finite()) {
                    return Err(Error::input(field, "efforts must be finite and nonnegative"));
                }
            }
        }
        Ok(())
    }

    /// Probability mass each type puts on every signal it generates.
    pub fn signal_mass(&self, profile: &PolicyProfile, ty: Type) -> BTreeMap<Signal, f64> {
        let mut out = BTreeMap::new();
        for a in self.actions(ty) {
            if let Destination::School(i) = a.destination {
                *out.entry(profile.signal_at(i, a.effort)).or_insert(0.0) += a.prob;
            }
        }
        out
    }

    /// Enrollment probability of a type in each school.
    pub fn school_enrollment(&self, ty: Type, n_schools: usize) -> Vec<f64> {
        let mut out = vec![0.0; n_schools];
        for a in self.actions(ty) {
            if let Destination::School(i) = a.destination {
                out[i] += a.prob;
            }
        }
        out
    }
}

/// Firms' response to a signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Offer {
    Hire(f64),
    NoOffer,
}

impl Offer {
    /// Wage received (0 when no offer is made).
    pub fn value(&self) -> f64 {
        match self {
            Offer::Hire(w) => *w,
            Offer::NoOffer => 0.0,
        }
    }

    pub fn is_hire(&self) -> bool {
        matches!(self, Offer::Hire(_))
    }
}

/// Expected productivity under belief μ_H, or no offer when it is negative.
pub fn wage_for_belief(params: &MarketParams, mu_high: f64) -> Offer {
    let w = params.theta_low + mu_high * (params.theta_high - params.theta_low);
    if w < -1e-12 {
        Offer::NoOffer
    } else {
        Offer::Hire(w.max(0.0))
    }
}

/// Posterior μ_H that makes the expected productivity equal `wage`.
pub fn belief_for_wage(params: &MarketParams, wage: f64) -> f64 {
    ((wage - params.theta_low) / (params.theta_high - params.theta_low)).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstructionTag {
    SemiPooling,
    Separating,
    /// Built from a prescribed on-path strategy (oracle or closed-form family).
    Enumerated,
}

/// Strategies, wages, beliefs and payoffs in the subgame after a profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgameEquilibrium {
    pub profile: PolicyProfile,
    pub strategy: PopulationStrategy,
    pub wages: BTreeMap<Signal, Offer>,
    pub beliefs: BTreeMap<Signal, f64>,
    #[serde(rename = "payoff_L")]
    pub payoff_low: f64,
    #[serde(rename = "payoff_H")]
    pub payoff_high: f64,
    pub construction_tag: ConstructionTag,
}

impl SubgameEquilibrium {
    /// Assembles an equilibrium from a strategy and beliefs on every signal;
    /// wages follow the beliefs and payoffs follow the strategy.
    pub fn from_beliefs(
        profile: PolicyProfile,
        strategy: PopulationStrategy,
        beliefs: BTreeMap<Signal, f64>,
        params: &MarketParams,
        tag: ConstructionTag,
    ) -> Result<Self> {
        let wages = beliefs
            .iter()
            .map(|(s, mu)| (*s, wage_for_belief(params, *mu)))
            .collect();
        let mut eq = SubgameEquilibrium {
            profile,
            strategy,
            wages,
            beliefs,
            payoff_low: 0.0,
            payoff_high: 0.0,
            construction_tag: tag,
        };
        eq.payoff_low = eq.expected_payoff(params, Type::Low)?;
        eq.payoff_high = eq.expected_payoff(params, Type::High)?;
        Ok(eq)
    }

    pub fn offer(&self, s: Signal) -> Result<Offer> {
        self.wages
            .get(&s)
            .copied()
            .ok_or_else(|| Error::input("wages", format!("no wage recorded for signal {s}")))
    }

    pub fn payoff(&self, ty: Type) -> f64 {
        match ty {
            Type::Low => self.payoff_low,
            Type::High => self.payoff_high,
        }
    }

    /// Payoff of a type playing `action` against the wage schedule.
    pub fn action_payoff(&self, params: &MarketParams, ty: Type, action: &Action) -> Result<f64> {
        match action.destination {
            Destination::Outside => Ok(0.0),
            Destination::School(i) => {
                let s = self.profile.signal_at(i, action.effort);
                Ok(self.offer(s)?.value() - self.profile.fee(i) - params.cost(ty, action.effort)?)
            }
        }
    }

    /// Strategy-weighted payoff of a type.
    pub fn expected_payoff(&self, params: &MarketParams, ty: Type) -> Result<f64> {
        self.strategy
            .actions(ty)
            .iter()
            .map(|a| Ok(a.prob * self.action_payoff(params, ty, a)?))
            .sum()
    }

    /// Signals generated with positive probability by some type.
    pub fn sent_signals(&self) -> BTreeSet<Signal> {
        Type::BOTH
            .iter()
            .flat_map(|ty| self.strategy.signal_mass(&self.profile, *ty))
            .filter(|(_, m)| *m > 0.0)
            .map(|(s, _)| s)
            .collect()
    }
}

/// (f_min, u̲) with u̲ = max{0, θ_L − f_min}: the payoff a low type secures
/// without signaling.
pub fn reservation(profile: &PolicyProfile, params: &MarketParams) -> (f64, f64) {
    let f_min = profile.f_min();
    (f_min, (params.theta_low - f_min).max(0.0))
}

fn one_based<S: Serializer>(xs: &[usize], serializer: S) -> std::result::Result<S::Ok, S::Error> {
    serializer.collect_seq(xs.iter().map(|i| i + 1))
}

/// Marginal-signal geometry of a profile.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontierReport {
    pub f_min: f64,
    pub u_low: f64,
    /// Largest effort a low type would exert in each school when paid θ_H;
    /// `None` when the school is unattractive even at zero effort.
    pub e_star: Vec<Option<f64>>,
    /// m*_i: the message produced at e*_i.
    pub marginal: Vec<Option<Signal>>,
    pub m_star: Signal,
    pub m_star_effort: f64,
    #[serde(serialize_with = "one_based")]
    pub i_star: Vec<usize>,
    pub s_star: Vec<Signal>,
    pub s_plus: Vec<Signal>,
    pub s_minus: Vec<Signal>,
    pub c_low_star: f64,
    pub c_high_star: f64,
}

fn check_profile(profile: &PolicyProfile, params: &MarketParams, tol: f64) -> Result<()> {
    profile.validate(params)?;
    for (i, p) in profile.policies.iter().enumerate() {
        if p.fee > params.theta_high + tol {
            return Err(Error::input(
                format!("profile[{}].fee", i + 1),
                format!("fee {} exceeds theta_H = {}", p.fee, params.theta_high),
            ));
        }
    }
    Ok(())
}

/// Computes e*_i, m*_i, m*, I* and the partition S*, S*₊, S*₋.
pub fn mimic_frontier(profile: &PolicyProfile, params: &MarketParams, tol: f64) -> Result<FrontierReport> {
    check_profile(profile, params, tol)?;
    let (f_min, u_low) = reservation(profile, params);
    let n = profile.len();
    let mut e_star = Vec::with_capacity(n);
    let mut marginal = Vec::with_capacity(n);
    for (i, p) in profile.policies.iter().enumerate() {
        let head = params.theta_high - p.fee - u_low;
        if head < -tol {
            e_star.push(None);
            marginal.push(None);
            continue;
        }
        let e = match cost_inverse_effort(&params.cost, Type::Low, head.max(0.0), tol) {
            Err(Error::Range(_)) => params.cost.effort_cap().unwrap_or(f64::INFINITY),
            other => other?,
        };
        e_star.push(Some(e));
        let mon = &p.monitoring;
        let mut best = 0;
        for j in 1..mon.len() {
            let t = mon.band_start(j);
            if head - params.cost(Type::Low, t)? >= -tol {
                best = j;
            }
        }
        marginal.push(Some(Signal::new(i, mon.messages()[best])));
    }

    let mut star: Option<(Signal, f64, f64)> = None;
    for s in marginal.iter().flatten() {
        let e = profile.signal_effort(*s)?;
        let f = profile.fee(s.school);
        let better = match star {
            None => true,
            Some((_, be, bf)) => e > be + tol || ((e - be).abs() <= tol && f < bf - tol),
        };
        if better {
            star = Some((*s, e, f));
        }
    }
    let (m_star, m_star_effort, _) =
        star.ok_or_else(|| Error::Invariant("no school admits a marginal signal".into()))?;

    let level: Vec<usize> = (0..n)
        .filter(|i| match marginal[*i] {
            Some(s) => profile
                .signal_effort(s)
                .map(|e| (e - m_star_effort).abs() <= tol)
                .unwrap_or(false),
            None => false,
        })
        .collect();
    let fee_floor = level.iter().map(|i| profile.fee(*i)).fold(f64::INFINITY, f64::min);
    let i_star: Vec<usize> = level
        .into_iter()
        .filter(|i| profile.fee(*i) <= fee_floor + tol)
        .collect();
    let s_star: Vec<Signal> = i_star.iter().filter_map(|i| marginal[*i]).collect();

    let mut s_plus = Vec::new();
    let mut s_minus = Vec::new();
    for s in profile.signals() {
        if s_star.contains(&s) {
            continue;
        }
        if profile.signal_effort(s)? > m_star_effort + tol {
            s_plus.push(s);
        } else {
            s_minus.push(s);
        }
    }
    let fee_star = profile.fee(m_star.school);
    Ok(FrontierReport {
        f_min,
        u_low,
        e_star,
        marginal,
        m_star,
        m_star_effort,
        i_star,
        s_star,
        s_plus,
        s_minus,
        c_low_star: params.cost(Type::Low, m_star_effort)? + fee_star,
        c_high_star: params.cost(Type::High, m_star_effort)? + fee_star,
    })
}

/// True when the semi-pooling branch applies: S*₊ is empty or
/// θ_H − u̲ ≤ C(θ_H, s′) − C(θ_H, s*) + C(θ_L, s*) for every s′ ∈ S*₊.
pub fn semi_pooling_applies(
    frontier: &FrontierReport,
    profile: &PolicyProfile,
    params: &MarketParams,
    tol: f64,
) -> Result<bool> {
    let lhs = params.theta_high - frontier.u_low;
    for s in &frontier.s_plus {
        let c_high = params.cost(Type::High, profile.signal_effort(*s)?)? + profile.fee(s.school);
        if lhs > c_high - frontier.c_high_star + frontier.c_low_star + tol {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Low-type fallback ψ̲: enroll uniformly in the cheapest schools at zero
/// effort when θ_L − f_min > 0, otherwise stay outside.
fn fallback_actions(profile: &PolicyProfile, params: &MarketParams, mass: f64, tol: f64) -> Vec<Action> {
    let f_min = profile.f_min();
    if params.theta_low - f_min > tol {
        let cheapest: Vec<usize> = (0..profile.len()).filter(|i| profile.fee(*i) <= f_min + tol).collect();
        let share = mass / cheapest.len() as f64;
        cheapest.into_iter().map(|i| Action::school(i, 0.0, share)).collect()
    } else {
        vec![Action::outside(mass)]
    }
}

/// Mimicking probability q for a pooling wage target w̄.
pub fn mimic_probability(params: &MarketParams, w_bar: f64, tol: f64) -> f64 {
    let mean = expected_type(params);
    if w_bar <= mean + tol {
        return 1.0;
    }
    if w_bar >= params.theta_high - tol {
        return 0.0;
    }
    let lambda = params.lambda;
    let q = lambda / (1.0 - lambda) * (params.theta_high - w_bar) / (w_bar - params.theta_low);
    q.clamp(0.0, 1.0)
}

/// Builds the canonical equilibrium of the subgame after `profile`.
pub fn construct_epbe(profile: &PolicyProfile, params: &MarketParams, tol: f64) -> Result<SubgameEquilibrium> {
    let fr = mimic_frontier(profile, params, tol)?;
    let mut strategy = PopulationStrategy::default();
    let mut beliefs = BTreeMap::new();
    for s in &fr.s_minus {
        beliefs.insert(*s, 0.0);
    }
    for s in &fr.s_plus {
        beliefs.insert(*s, 1.0);
    }

    let tag = if semi_pooling_applies(&fr, profile, params, tol)? {
        let w_bar = (fr.c_low_star + fr.u_low).min(params.theta_high);
        let q = mimic_probability(params, w_bar, tol);
        let k = fr.s_star.len() as f64;
        let mu = params.lambda / (params.lambda + (1.0 - params.lambda) * q);
        for s in &fr.s_star {
            strategy.high.push(Action::school(s.school, fr.m_star_effort, 1.0 / k));
            if q > 0.0 {
                strategy.low.push(Action::school(s.school, fr.m_star_effort, q / k));
            }
            beliefs.insert(*s, mu);
        }
        if q < 1.0 {
            strategy.low.extend(fallback_actions(profile, params, 1.0 - q, tol));
        }
        ConstructionTag::SemiPooling
    } else {
        let mut cheapest: Vec<(Signal, f64, f64)> = Vec::new();
        for s in &fr.s_plus {
            let e = profile.signal_effort(*s)?;
            let c = params.cost(Type::High, e)? + profile.fee(s.school);
            cheapest.push((*s, e, c));
        }
        let c_min = cheapest.iter().map(|x| x.2).fold(f64::INFINITY, f64::min);
        cheapest.retain(|x| x.2 <= c_min + tol);
        let k = cheapest.len() as f64;
        for (s, e, _) in &cheapest {
            strategy.high.push(Action::school(s.school, *e, 1.0 / k));
        }
        for s in &fr.s_star {
            beliefs.insert(*s, 0.0);
        }
        strategy.low.extend(fallback_actions(profile, params, 1.0, tol));
        ConstructionTag::Separating
    };
    strategy.normalize();
    SubgameEquilibrium::from_beliefs(profile.clone(), strategy, beliefs, params, tag)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::monitoring::{Policy, StepMonitoringPolicy};

    fn sorting() -> MarketParams {
        MarketParams::linear(1.0, 2.0, 0.5, 2.0, 1.0)
    }

    fn cut(fee: f64, t: f64) -> Policy {
        Policy::new(fee, StepMonitoringPolicy::cutoff(t).unwrap())
    }

    #[test]
    fn reservation_examples() {
        let p = sorting().with_schools(2);
        let prof = PolicyProfile::new(vec![Policy::uninformative(0.3), Policy::uninformative(0.5)]);
        let (f, u) = reservation(&prof, &p);
        assert_eq!(f, 0.3);
        assert!((u - 0.7).abs() < 1e-15);
        let scr = MarketParams::linear(-1.0, 2.0, 0.5, 2.0, 1.0).with_schools(2);
        let prof = PolicyProfile::new(vec![Policy::uninformative(0.0), Policy::uninformative(0.0)]);
        assert_eq!(reservation(&prof, &scr), (0.0, 0.0));
        let prof = PolicyProfile::new(vec![Policy::uninformative(2.0)]);
        assert_eq!(reservation(&prof, &sorting()), (2.0, 0.0));
    }

    #[test]
    fn frontier_examples() {
        let fr = mimic_frontier(&PolicyProfile::new(vec![cut(0.0, 0.5)]), &sorting(), 1e-9).unwrap();
        assert_eq!(fr.e_star, vec![Some(0.5)]);
        assert_eq!(fr.m_star, Signal::new(0, 1));
        let fr = mimic_frontier(&PolicyProfile::new(vec![Policy::uninformative(0.0)]), &sorting(), 1e-9).unwrap();
        assert_eq!(fr.m_star, Signal::new(0, 0));
        assert!(fr.s_plus.is_empty());
        let p2 = sorting().with_schools(2);
        let prof = PolicyProfile::new(vec![cut(0.0, 0.4), cut(0.0, 0.6)]);
        let fr = mimic_frontier(&prof, &p2, 1e-9).unwrap();
        assert_eq!(fr.marginal, vec![Some(Signal::new(0, 1)), Some(Signal::new(1, 0))]);
        assert_eq!(fr.i_star, vec![0]);
        assert_eq!(fr.m_star_effort, 0.4);
        assert_eq!(fr.s_plus, vec![Signal::new(1, 1)]);
    }

    #[test]
    fn unattractive_school_has_no_marginal_signal() {
        let p2 = sorting().with_schools(2);
        let prof = PolicyProfile::new(vec![Policy::uninformative(0.0), Policy::uninformative(1.5)]);
        let fr = mimic_frontier(&prof, &p2, 1e-9).unwrap();
        assert_eq!(fr.e_star[1], None);
        assert_eq!(fr.i_star, vec![0]);
    }

    #[test]
    fn uninformative_monopoly_pools() {
        let eq = construct_epbe(&PolicyProfile::new(vec![Policy::uninformative(1.5)]), &sorting(), 1e-9).unwrap();
        assert_eq!(eq.construction_tag, ConstructionTag::SemiPooling);
        assert_eq!(eq.strategy.low, vec![Action::school(0, 0.0, 1.0)]);
        assert_eq!(eq.strategy.high, vec![Action::school(0, 0.0, 1.0)]);
        assert_eq!(eq.offer(Signal::new(0, 0)).unwrap(), Offer::Hire(1.5));
        assert_eq!((eq.payoff_low, eq.payoff_high), (0.0, 0.0));
    }

    #[test]
    fn cutoff_at_mimic_effort_separates_via_case_one() {
        let eq = construct_epbe(&PolicyProfile::new(vec![cut(0.0, 0.5)]), &sorting(), 1e-9).unwrap();
        assert_eq!(eq.construction_tag, ConstructionTag::SemiPooling);
        assert_eq!(eq.strategy.low, vec![Action::school(0, 0.0, 1.0)]);
        assert_eq!(eq.strategy.high, vec![Action::school(0, 0.5, 1.0)]);
        assert_eq!(eq.offer(Signal::new(0, 1)).unwrap(), Offer::Hire(2.0));
        assert_eq!(eq.offer(Signal::new(0, 0)).unwrap(), Offer::Hire(1.0));
    }

    #[test]
    fn cutoff_above_mimic_effort_separates_via_case_two() {
        let eq = construct_epbe(&PolicyProfile::new(vec![cut(0.0, 0.6)]), &sorting(), 1e-9).unwrap();
        assert_eq!(eq.construction_tag, ConstructionTag::Separating);
        assert_eq!(eq.strategy.high, vec![Action::school(0, 0.6, 1.0)]);
        assert_eq!(eq.strategy.low, vec![Action::school(0, 0.0, 1.0)]);
        assert_eq!(eq.offer(Signal::new(0, 1)).unwrap(), Offer::Hire(2.0));
        assert_eq!(eq.offer(Signal::new(0, 0)).unwrap(), Offer::Hire(1.0));
        assert!((eq.payoff_high - 1.4).abs() < 1e-12);
    }

    #[test]
    fn fee_above_theta_high_is_rejected() {
        let r = construct_epbe(&PolicyProfile::new(vec![Policy::uninformative(2.5)]), &sorting(), 1e-9);
        assert!(matches!(r, Err(Error::Input { .. })));
    }

    #[test]
    fn equilibrium_json_keys() {
        let eq = construct_epbe(&PolicyProfile::new(vec![cut(0.0, 0.5)]), &sorting(), 1e-9).unwrap();
        let v = serde_json::to_value(&eq).unwrap();
        assert_eq!(v["wages"]["1:1"]["hire"], 2.0);
        assert_eq!(v["construction_tag"], "semi_pooling");
        assert_eq!(v["strategy"]["H"][0]["school"], 1);
        let back: SubgameEquilibrium = serde_json::from_value(v).unwrap();
        assert_eq!(back, eq);
    }
}
