//! Equilibrium verification on discretized effort grids. On-path play is
//! checked for best responses and Bayes consistency; off-path beliefs are
//! checked against the extended D1 criterion.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::epbe::{ConstructionTag, Destination, Offer, PopulationStrategy, SubgameEquilibrium};
use crate::error::{Error, Result};
use crate::market::{cost_inverse_effort, MarketParams, Type};
use crate::monitoring::{reduce_minimal, Policy, PolicyProfile, Signal, StepMonitoringPolicy};

mod oracle;

pub use oracle::{brute_force_equilibria, outcomes_equivalent, MAX_ORACLE_GRID, MAX_SUPPORT_CAP};

const DEFAULT_WAGE_RESOLUTION: f64 = 0.01;

/// Ascending effort grid used for best-response checks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationGrid {
    effort_grid: Vec<f64>,
    wage_grid_resolution: f64,
}

impl DeviationGrid {
    /// Sorts and deduplicates `points`; 0 is always added.
    pub fn new(mut points: Vec<f64>) -> Result<Self> {
        if points.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return Err(Error::input("grid", "efforts must be finite and nonnegative"));
        }
        points.push(0.0);
        points.sort_by(f64::total_cmp);
        points.dedup();
        Ok(DeviationGrid {
            effort_grid: points,
            wage_grid_resolution: DEFAULT_WAGE_RESOLUTION,
        })
    }

    /// Sets the wage resolution used when reporting intervals.
    pub fn with_wage_resolution(mut self, resolution: f64) -> Result<Self> {
        if !(resolution.is_finite() && resolution > 0.0) {
            return Err(Error::input("wage_grid_resolution", "must be positive"));
        }
        self.wage_grid_resolution = resolution;
        Ok(self)
    }

    /// `n_points` evenly spaced efforts from 0 up to the effort at which a
    /// high type's cost reaches θ_H (or the largest threshold, if larger),
    /// merged with every threshold of `profile`.
    pub fn uniform_covering(profile: &PolicyProfile, params: &MarketParams, n_points: usize, tol: f64) -> Result<Self> {
        if n_points < 2 {
            return Err(Error::input("grid_points", "need at least two grid points"));
        }
        let reach = match cost_inverse_effort(&params.cost, Type::High, params.theta_high, tol) {
            Err(Error::Range(_)) => params.cost.effort_cap().unwrap_or(f64::INFINITY),
            other => other?,
        };
        let thresholds: Vec<f64> = profile
            .policies
            .iter()
            .flat_map(|p| p.monitoring.thresholds().iter().copied())
            .collect();
        let top = thresholds.iter().copied().fold(reach, f64::max);
        let step = top / (n_points - 1) as f64;
        let mut points: Vec<f64> = (0..n_points).map(|k| k as f64 * step).collect();
        points[n_points - 1] = top;
        points.extend(thresholds);
        DeviationGrid::new(points)
    }

    pub fn points(&self) -> &[f64] {
        &self.effort_grid
    }

    pub fn len(&self) -> usize {
        self.effort_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.effort_grid.is_empty()
    }

    pub fn wage_resolution(&self) -> f64 {
        self.wage_grid_resolution
    }

    /// First threshold of `profile` absent from the grid, as (school, threshold).
    pub fn missing_threshold(&self, profile: &PolicyProfile) -> Option<(usize, f64)> {
        profile.policies.iter().enumerate().find_map(|(i, p)| {
            p.monitoring
                .thresholds()
                .iter()
                .find(|t| !self.contains(**t))
                .map(|t| (i, *t))
        })
    }

    /// True when the grid contains 0 and every threshold of `profile`.
    pub fn covers(&self, profile: &PolicyProfile) -> bool {
        self.contains(0.0) && self.missing_threshold(profile).is_none()
    }

    fn contains(&self, e: f64) -> bool {
        let k = self.effort_grid.partition_point(|x| *x < e - 1e-12);
        k < self.effort_grid.len() && (self.effort_grid[k] - e).abs() <= 1e-12
    }

    /// Index of the grid point nearest to `e`.
    pub fn snap(&self, e: f64) -> usize {
        let k = self.effort_grid.partition_point(|x| *x < e);
        if k == 0 {
            return 0;
        }
        if k == self.effort_grid.len() {
            return k - 1;
        }
        if (self.effort_grid[k] - e) < (e - self.effort_grid[k - 1]) {
            k
        } else {
            k - 1
        }
    }
}

/// Upper wage interval [lower, upper] or (lower, upper].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WageInterval {
    pub lower: f64,
    pub upper: f64,
    pub lower_open: bool,
}

/// Wages that would weakly (resp. strictly) tempt a type to deviate to an
/// unsent signal; `None` is the empty set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct D1WageSets {
    pub weak: Option<WageInterval>,
    pub strict: Option<WageInterval>,
}

/// Closed-form deviation sets for the threshold t = U(θ) + f_i + c(θ, e_{i,m})
/// within the sequentially rational range [max{0, θ_L}, θ_H].
pub fn wage_sets_from_threshold(params: &MarketParams, threshold: f64) -> D1WageSets {
    let floor = params.wage_floor();
    let top = params.theta_high;
    let weak = (threshold <= top).then(|| WageInterval {
        lower: threshold.max(floor),
        upper: top,
        lower_open: false,
    });
    let strict = if threshold >= top {
        None
    } else if threshold < floor {
        Some(WageInterval {
            lower: floor,
            upper: top,
            lower_open: false,
        })
    } else {
        Some(WageInterval {
            lower: threshold,
            upper: top,
            lower_open: true,
        })
    };
    D1WageSets { weak, strict }
}

/// a ⊊ b for upper intervals sharing the right end point.
pub fn strict_subset(a: Option<&WageInterval>, b: Option<&WageInterval>, tol: f64) -> bool {
    match (a, b) {
        (_, None) => false,
        (None, Some(_)) => true,
        (Some(a), Some(b)) => {
            if b.lower < a.lower - tol {
                true
            } else if (a.lower - b.lower).abs() <= tol {
                a.lower_open && !b.lower_open
            } else {
                false
            }
        }
    }
}

/// Belief D1 forces at a signal: `Some(1.0)` when the low type's weak set is
/// strictly inside the high type's strict set, `Some(0.0)` in the mirror case.
pub fn d1_requirement(low: &D1WageSets, high: &D1WageSets, tol: f64) -> Option<f64> {
    if strict_subset(low.weak.as_ref(), high.strict.as_ref(), tol) {
        Some(1.0)
    } else if strict_subset(high.weak.as_ref(), low.strict.as_ref(), tol) {
        Some(0.0)
    } else {
        None
    }
}

fn sets_at(profile: &PolicyProfile, params: &MarketParams, s: Signal, ty: Type, payoff: f64) -> Result<D1WageSets> {
    let e = profile.signal_effort(s)?;
    let t = payoff + profile.fee(s.school) + params.cost(ty, e)?;
    Ok(wage_sets_from_threshold(params, t))
}

/// D1 wage sets of `ty` at the unsent signal `s`.
pub fn d1_wage_sets(eq: &SubgameEquilibrium, params: &MarketParams, s: Signal, ty: Type) -> Result<D1WageSets> {
    if eq.sent_signals().contains(&s) {
        return Err(Error::input("signal", format!("{s} is on the equilibrium path")));
    }
    let u = eq.expected_payoff(params, ty)?;
    sets_at(&eq.profile, params, s, ty, u)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    StudentBestResponse,
    WageBeliefConsistency,
    BayesOnPath,
    D1Belief,
    Minimality,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub signal: Option<Signal>,
    #[serde(rename = "type", default, skip_serializing_if = "Option::is_none")]
    pub ty: Option<Type>,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub passed: bool,
    pub violations: Vec<Violation>,
}

impl VerificationReport {
    pub fn from_violations(violations: Vec<Violation>) -> Self {
        VerificationReport {
            passed: violations.is_empty(),
            violations,
        }
    }

    /// Concatenates two reports.
    pub fn merge(mut self, other: VerificationReport) -> Self {
        self.violations.extend(other.violations);
        self.passed = self.violations.is_empty();
        self
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }
}

fn type_index(ty: Type) -> usize {
    match ty {
        Type::Low => 0,
        Type::High => 1,
    }
}

/// Precomputed menu of grid deviations for one profile, reused across many
/// candidate equilibria.
pub(crate) struct Verifier<'a> {
    profile: &'a PolicyProfile,
    params: &'a MarketParams,
    tol: f64,
    menu: Vec<(Signal, [f64; 2])>,
}

impl<'a> Verifier<'a> {
    pub(crate) fn new(
        profile: &'a PolicyProfile,
        params: &'a MarketParams,
        grid: &DeviationGrid,
        tol: f64,
    ) -> Result<Self> {
        if let Some((i, t)) = grid.missing_threshold(profile) {
            return Err(Error::input(
                "grid",
                format!("threshold {t} of school {} is not on the grid", i + 1),
            ));
        }
        let mut menu = Vec::with_capacity(profile.len() * grid.len());
        for (i, p) in profile.policies.iter().enumerate() {
            for e in grid.points() {
                if let Some(cap) = params.cost.effort_cap() {
                    if *e > cap {
                        continue;
                    }
                }
                let s = profile.signal_at(i, *e);
                menu.push((
                    s,
                    [
                        p.fee + params.cost(Type::Low, *e)?,
                        p.fee + params.cost(Type::High, *e)?,
                    ],
                ));
            }
        }
        Ok(Verifier {
            profile,
            params,
            tol,
            menu,
        })
    }

    fn check_profile(&self, eq: &SubgameEquilibrium) -> Result<()> {
        if eq.profile != *self.profile {
            return Err(Error::input(
                "equilibrium.profile",
                "does not match the profile under test",
            ));
        }
        for s in self.profile.signals() {
            if !eq.wages.contains_key(&s) {
                return Err(Error::input("wages", format!("missing entry for signal {s}")));
            }
            if !eq.beliefs.contains_key(&s) {
                return Err(Error::input("beliefs", format!("missing entry for signal {s}")));
            }
        }
        for ty in Type::BOTH {
            for a in eq.strategy.actions(ty) {
                match a.destination {
                    Destination::School(i) if i >= self.profile.len() => {
                        return Err(Error::input("strategy", format!("school {} does not exist", i + 1)))
                    }
                    _ if !(a.effort >= 0.0 && a.effort.is_finite()) => {
                        return Err(Error::input("strategy", "efforts must be finite and nonnegative"))
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    /// Best-response, wage/belief and Bayes checks.
    pub(crate) fn pbe(&self, eq: &SubgameEquilibrium) -> Result<Vec<Violation>> {
        self.check_profile(eq)?;
        let params = self.params;
        let tol = self.tol;
        let mut out = Vec::new();

        for ty in Type::BOTH {
            let k = type_index(ty);
            let best = self
                .menu
                .iter()
                .map(|(s, c)| eq.wages[s].value() - c[k])
                .fold(0.0, f64::max);
            for a in eq.strategy.actions(ty) {
                if a.prob <= 0.0 {
                    continue;
                }
                let v = eq.action_payoff(params, ty, a)?;
                if v < best - tol {
                    let signal = match a.destination {
                        Destination::Outside => None,
                        Destination::School(i) => Some(self.profile.signal_at(i, a.effort)),
                    };
                    out.push(Violation {
                        kind: ViolationKind::StudentBestResponse,
                        signal,
                        ty: Some(ty),
                        gap: best - v,
                    });
                }
            }
            let total: f64 = eq.strategy.actions(ty).iter().map(|a| a.prob).sum();
            if (total - 1.0).abs() > tol || eq.strategy.actions(ty).iter().any(|a| a.prob < -tol) {
                out.push(Violation {
                    kind: ViolationKind::BayesOnPath,
                    signal: None,
                    ty: Some(ty),
                    gap: (total - 1.0).abs(),
                });
            }
        }

        for (s, mu) in &eq.beliefs {
            let raw = params.theta_low + mu * (params.theta_high - params.theta_low);
            let gap = if !(-tol..=1.0 + tol).contains(mu) {
                (mu - mu.clamp(0.0, 1.0)).abs()
            } else {
                match eq.wages.get(s) {
                    Some(Offer::Hire(w)) => {
                        if raw < -tol {
                            w - raw
                        } else {
                            (w - raw.max(0.0)).abs()
                        }
                    }
                    Some(Offer::NoOffer) => raw.max(0.0),
                    None => 0.0,
                }
            };
            if gap > tol {
                out.push(Violation {
                    kind: ViolationKind::WageBeliefConsistency,
                    signal: Some(*s),
                    ty: None,
                    gap,
                });
            }
        }

        let low = eq.strategy.signal_mass(self.profile, Type::Low);
        let high = eq.strategy.signal_mass(self.profile, Type::High);
        let on_path: BTreeSet<Signal> = low.keys().chain(high.keys()).copied().collect();
        for s in on_path {
            let ml = (1.0 - params.lambda) * low.get(&s).copied().unwrap_or(0.0);
            let mh = params.lambda * high.get(&s).copied().unwrap_or(0.0);
            if ml + mh <= 0.0 {
                continue;
            }
            let posterior = mh / (ml + mh);
            let gap = (eq.beliefs[&s] - posterior).abs();
            if gap > tol {
                out.push(Violation {
                    kind: ViolationKind::BayesOnPath,
                    signal: Some(s),
                    ty: None,
                    gap,
                });
            }
        }
        Ok(out)
    }

    /// Extended D1 checks at every unsent signal.
    pub(crate) fn d1(&self, eq: &SubgameEquilibrium) -> Result<Vec<Violation>> {
        self.check_profile(eq)?;
        let params = self.params;
        let u_low = eq.expected_payoff(params, Type::Low)?;
        let u_high = eq.expected_payoff(params, Type::High)?;
        let sent = eq.sent_signals();
        let mut out = Vec::new();
        for s in self.profile.signals() {
            if sent.contains(&s) {
                continue;
            }
            let low = sets_at(self.profile, params, s, Type::Low, u_low)?;
            let high = sets_at(self.profile, params, s, Type::High, u_high)?;
            if let Some(required) = d1_requirement(&low, &high, self.tol) {
                let gap = (eq.beliefs[&s] - required).abs();
                if gap > self.tol {
                    out.push(Violation {
                        kind: ViolationKind::D1Belief,
                        signal: Some(s),
                        ty: None,
                        gap,
                    });
                }
            }
        }
        Ok(out)
    }
}

/// Checks best responses on `grid`, wage/belief consistency on every signal
/// and Bayes' rule on every sent signal.
pub fn verify_pbe(
    profile: &PolicyProfile,
    eq: &SubgameEquilibrium,
    params: &MarketParams,
    grid: &DeviationGrid,
    tol: f64,
) -> Result<VerificationReport> {
    let v = Verifier::new(profile, params, grid, tol)?;
    Ok(VerificationReport::from_violations(v.pbe(eq)?))
}

/// Checks that beliefs at unsent signals respect the extended D1 criterion.
pub fn verify_extended_d1(
    profile: &PolicyProfile,
    eq: &SubgameEquilibrium,
    params: &MarketParams,
    grid: &DeviationGrid,
    tol: f64,
) -> Result<VerificationReport> {
    let v = Verifier::new(profile, params, grid, tol)?;
    Ok(VerificationReport::from_violations(v.d1(eq)?))
}

/// Completes an on-path strategy into a subgame equilibrium candidate:
/// Bayes beliefs on sent signals, and off path the lowest belief D1 allows
/// (1 where D1 forces the high type, 0 elsewhere).
pub fn equilibrium_from_strategy(
    profile: &PolicyProfile,
    strategy: PopulationStrategy,
    params: &MarketParams,
    tol: f64,
) -> Result<SubgameEquilibrium> {
    strategy.validate(profile.len(), tol.max(1e-9))?;
    let low = strategy.signal_mass(profile, Type::Low);
    let high = strategy.signal_mass(profile, Type::High);
    let mut beliefs = BTreeMap::new();
    for s in low.keys().chain(high.keys()) {
        let ml = (1.0 - params.lambda) * low.get(s).copied().unwrap_or(0.0);
        let mh = params.lambda * high.get(s).copied().unwrap_or(0.0);
        if ml + mh > 0.0 {
            beliefs.insert(*s, mh / (ml + mh));
        }
    }
    let on_path = SubgameEquilibrium::from_beliefs(
        profile.clone(),
        strategy,
        beliefs.clone(),
        params,
        ConstructionTag::Enumerated,
    )?;
    let (u_low, u_high) = (on_path.payoff_low, on_path.payoff_high);
    for s in profile.signals() {
        if beliefs.contains_key(&s) {
            continue;
        }
        let l = sets_at(profile, params, s, Type::Low, u_low)?;
        let h = sets_at(profile, params, s, Type::High, u_high)?;
        beliefs.insert(s, d1_requirement(&l, &h, tol).unwrap_or(0.0));
    }
    SubgameEquilibrium::from_beliefs(
        profile.clone(),
        on_path.strategy,
        beliefs,
        params,
        ConstructionTag::Enumerated,
    )
}

/// Flags every school whose message partition can be coarsened to its sent
/// messages while the same strategies still form an equilibrium passing
/// both the PBE and the D1 checks. The gap is the number of droppable
/// messages.
pub fn check_minimality(
    profile: &PolicyProfile,
    eq: &SubgameEquilibrium,
    params: &MarketParams,
    grid: &DeviationGrid,
    tol: f64,
) -> Result<VerificationReport> {
    if eq.profile != *profile {
        return Err(Error::input(
            "equilibrium.profile",
            "does not match the profile under test",
        ));
    }
    let sent = eq.sent_signals();
    let mut violations = Vec::new();
    for (i, p) in profile.policies.iter().enumerate() {
        let used: BTreeSet<_> = sent.iter().filter(|s| s.school == i).map(|s| s.message).collect();
        let unsent: Vec<_> = p
            .monitoring
            .messages()
            .iter()
            .filter(|m| !used.contains(m))
            .copied()
            .collect();
        if unsent.is_empty() || p.monitoring.len() == 1 {
            continue;
        }
        let coarse = if used.is_empty() {
            StepMonitoringPolicy::new(vec![], vec![p.monitoring.messages()[0]])?
        } else {
            reduce_minimal(&p.monitoring, &used)?
        };
        let mut reduced = profile.clone();
        reduced.policies[i] = Policy::new(p.fee, coarse);
        let transported = equilibrium_from_strategy(&reduced, eq.strategy.clone(), params, tol)?;
        let v = Verifier::new(&reduced, params, grid, tol)?;
        if v.pbe(&transported)?.is_empty() && v.d1(&transported)?.is_empty() {
            violations.push(Violation {
                kind: ViolationKind::Minimality,
                signal: Some(Signal::new(i, unsent[0])),
                ty: None,
                gap: (p.monitoring.len() - used.len().max(1)) as f64,
            });
        }
    }
    Ok(VerificationReport::from_violations(violations))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::epbe::{construct_epbe, Action};
    use crate::market::riley_effort;

    const TOL: f64 = 1e-9;

    fn sorting() -> MarketParams {
        MarketParams::linear(1.0, 2.0, 0.5, 2.0, 1.0)
    }

    fn screening() -> MarketParams {
        MarketParams::linear(-1.0, 2.0, 0.5, 2.0, 1.0)
    }

    fn grid_for(profile: &PolicyProfile, params: &MarketParams) -> DeviationGrid {
        DeviationGrid::uniform_covering(profile, params, 21, TOL).unwrap()
    }

    fn interval(lower: f64, open: bool) -> WageInterval {
        WageInterval {
            lower,
            upper: 2.0,
            lower_open: open,
        }
    }

    #[test]
    fn wage_set_examples() {
        let p = sorting().with_schools(1);
        let p0 = MarketParams::linear(0.0, 2.0, 0.5, 2.0, 1.0);
        assert_eq!(wage_sets_from_threshold(&p0, 1.0).weak, Some(interval(1.0, false)));
        assert_eq!(wage_sets_from_threshold(&p0, 0.0).weak, Some(interval(0.0, false)));
        assert_eq!(wage_sets_from_threshold(&p0, 3.0).weak, None);
        let s = wage_sets_from_threshold(&p, 0.5);
        assert_eq!(s.weak, Some(interval(1.0, false)));
        assert_eq!(s.strict, Some(interval(1.0, false)));
        assert_eq!(wage_sets_from_threshold(&p, 2.0).strict, None);
        assert_eq!(wage_sets_from_threshold(&p, 2.0).weak, Some(interval(2.0, false)));
    }

    #[test]
    fn strict_inclusion_rules() {
        let a = interval(1.0, false);
        let b = interval(0.5, true);
        assert!(strict_subset(Some(&a), Some(&b), TOL));
        assert!(!strict_subset(Some(&b), Some(&a), TOL));
        assert!(strict_subset(None, Some(&a), TOL));
        assert!(!strict_subset(None, None, TOL));
        assert!(!strict_subset(Some(&a), Some(&a), TOL));
        assert!(!strict_subset(Some(&a), Some(&interval(1.0, true)), TOL));
        assert!(strict_subset(Some(&interval(1.0, true)), Some(&a), TOL));
    }

    #[test]
    fn pooling_monopoly_passes_and_tampered_wage_fails() {
        let p = sorting();
        let prof = PolicyProfile::new(vec![Policy::uninformative(1.5)]);
        let eq = construct_epbe(&prof, &p, TOL).unwrap();
        let g = grid_for(&prof, &p);
        assert!(verify_pbe(&prof, &eq, &p, &g, TOL).unwrap().passed);
        assert!(verify_extended_d1(&prof, &eq, &p, &g, TOL).unwrap().passed);
        assert!(check_minimality(&prof, &eq, &p, &g, TOL).unwrap().passed);
        let mut bad = eq.clone();
        bad.wages.insert(Signal::new(0, 0), Offer::Hire(2.0));
        let r = verify_pbe(&prof, &bad, &p, &g, TOL).unwrap();
        assert!(r.has(ViolationKind::WageBeliefConsistency));
    }

    #[test]
    fn excess_effort_is_not_a_best_response() {
        let p = sorting();
        let er = riley_effort(&p, TOL).unwrap();
        let prof = PolicyProfile::new(vec![Policy::new(0.0, StepMonitoringPolicy::cutoff(er).unwrap())]);
        let mut eq = construct_epbe(&prof, &p, TOL).unwrap();
        eq.strategy.high = vec![Action::school(0, er + 0.1, 1.0)];
        let g = DeviationGrid::new(vec![0.0, er, er + 0.1, 1.0]).unwrap();
        let r = verify_pbe(&prof, &eq, &p, &g, TOL).unwrap();
        let v = r
            .violations
            .iter()
            .find(|v| v.kind == ViolationKind::StudentBestResponse)
            .unwrap();
        assert!((v.gap - 0.1).abs() < 1e-9);
    }

    #[test]
    fn grid_missing_threshold_is_input_error() {
        let p = sorting();
        let prof = PolicyProfile::new(vec![Policy::new(0.0, StepMonitoringPolicy::cutoff(0.5).unwrap())]);
        let eq = construct_epbe(&prof, &p, TOL).unwrap();
        let g = DeviationGrid::new(vec![0.0, 0.4, 1.0]).unwrap();
        let r = verify_pbe(&prof, &eq, &p, &g, TOL);
        assert!(matches!(r, Err(Error::Input { ref field, .. }) if field == "grid"));
    }

    #[test]
    fn d1_forces_high_belief_on_cheap_unsent_message() {
        let p = sorting();
        let eps = 0.05;
        let prof = PolicyProfile::new(vec![Policy::new(
            1.5,
            StepMonitoringPolicy::new(vec![eps], vec![0, 1]).unwrap(),
        )]);
        let mut strategy = PopulationStrategy::default();
        strategy.low.push(Action::school(0, 0.0, 1.0));
        strategy.high.push(Action::school(0, 0.0, 1.0));
        let mut beliefs = BTreeMap::new();
        beliefs.insert(Signal::new(0, 0), 0.5);
        beliefs.insert(Signal::new(0, 1), 0.0);
        let eq =
            SubgameEquilibrium::from_beliefs(prof.clone(), strategy, beliefs, &p, ConstructionTag::Enumerated).unwrap();
        let g = grid_for(&prof, &p);
        assert!(verify_pbe(&prof, &eq, &p, &g, TOL).unwrap().passed);
        let high = d1_wage_sets(&eq, &p, Signal::new(0, 1), Type::High).unwrap();
        let low = d1_wage_sets(&eq, &p, Signal::new(0, 1), Type::Low).unwrap();
        assert!((low.weak.unwrap().lower - 1.6).abs() < 1e-12);
        assert!((high.strict.unwrap().lower - 1.55).abs() < 1e-12);
        let r = verify_extended_d1(&prof, &eq, &p, &g, TOL).unwrap();
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].signal, Some(Signal::new(0, 1)));
        assert_eq!(r.violations[0].gap, 1.0);
    }

    #[test]
    fn monopoly_fee_at_theta_high_leaves_no_tempting_wage() {
        let p = screening();
        let prof = PolicyProfile::new(vec![Policy::new(
            2.0,
            StepMonitoringPolicy::new(vec![0.05], vec![0, 1]).unwrap(),
        )]);
        let eq = construct_epbe(&prof, &p, TOL).unwrap();
        let s = Signal::new(0, 1);
        assert_eq!(d1_wage_sets(&eq, &p, s, Type::Low).unwrap().weak, None);
        assert_eq!(d1_wage_sets(&eq, &p, s, Type::High).unwrap().strict, None);
        assert!(
            verify_extended_d1(&prof, &eq, &p, &grid_for(&prof, &p), TOL)
                .unwrap()
                .passed
        );
        assert!(d1_wage_sets(&eq, &p, Signal::new(0, 0), Type::Low).is_err());
    }

    #[test]
    fn riley_with_low_off_path_belief_passes_d1() {
        let p = screening();
        let er = riley_effort(&p, TOL).unwrap();
        let prof = PolicyProfile::new(vec![Policy::new(
            0.0,
            StepMonitoringPolicy::with_thresholds(vec![0.5, er]).unwrap(),
        )]);
        let eq = construct_epbe(&prof, &p, TOL).unwrap();
        assert_eq!(eq.beliefs[&Signal::new(0, 1)], 0.0);
        let g = grid_for(&prof, &p);
        assert!(verify_pbe(&prof, &eq, &p, &g, TOL).unwrap().passed);
        assert!(verify_extended_d1(&prof, &eq, &p, &g, TOL).unwrap().passed);
    }

    #[test]
    fn minimality_examples() {
        let p = sorting();
        let riley = PolicyProfile::new(vec![Policy::new(0.0, StepMonitoringPolicy::cutoff(0.5).unwrap())]);
        let eq = construct_epbe(&riley, &p, TOL).unwrap();
        assert!(
            check_minimality(&riley, &eq, &p, &grid_for(&riley, &p), TOL)
                .unwrap()
                .passed
        );

        let three = PolicyProfile::new(vec![Policy::new(
            0.0,
            StepMonitoringPolicy::with_thresholds(vec![0.5, 1.0]).unwrap(),
        )]);
        let eq = construct_epbe(&three, &p, TOL).unwrap();
        let r = check_minimality(&three, &eq, &p, &grid_for(&three, &p), TOL).unwrap();
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].kind, ViolationKind::Minimality);
        assert_eq!(r.violations[0].signal, Some(Signal::new(0, 2)));

        let sp = screening();
        let er = riley_effort(&sp, TOL).unwrap();
        let cut = PolicyProfile::new(vec![Policy::new(0.0, StepMonitoringPolicy::cutoff(er).unwrap())]);
        let eq = construct_epbe(&cut, &sp, TOL).unwrap();
        assert!(
            check_minimality(&cut, &eq, &sp, &grid_for(&cut, &sp), TOL)
                .unwrap()
                .passed
        );
    }

    #[test]
    fn report_json_shape() {
        let r = VerificationReport::from_violations(vec![Violation {
            kind: ViolationKind::D1Belief,
            signal: Some(Signal::new(1, 3)),
            ty: None,
            gap: 0.5,
        }]);
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["passed"], false);
        assert_eq!(v["violations"][0]["kind"], "d1_belief");
        assert_eq!(v["violations"][0]["signal"], "2:3");
    }
}
