//! Property tests for the structural invariants of the solvers.

use std::collections::BTreeSet;

use proptest::prelude::*;

use sigdesign::epbe::{construct_epbe, mimic_frontier, semi_pooling_applies, ConstructionTag, SubgameEquilibrium};
use sigdesign::market::{expected_type, riley_effort, CostFamily, MarketParams, Type};
use sigdesign::monitoring::{reduce_minimal, Policy, PolicyProfile, StepMonitoringPolicy};
use sigdesign::outer::{
    low_enrollment_probability, semipooling_family, welfare, EquilibriumOutcome, FreeParam, OutcomeLabel,
    SemipoolingVariant,
};
use sigdesign::refine::{
    brute_force_equilibria, d1_requirement, strict_subset, verify_extended_d1, verify_pbe, wage_sets_from_threshold,
    DeviationGrid,
};

const TOL: f64 = 1e-9;

fn params_strategy() -> impl Strategy<Value = MarketParams> {
    (-2.0..1.5f64, 0.3..2.5f64, 0.1..0.9f64, 0.5..3.0f64, 0.2..0.95f64).prop_map(
        |(theta_low, spread, lambda, kappa_low, ratio)| {
            MarketParams::linear(
                theta_low,
                (theta_low + spread).max(0.5),
                lambda,
                kappa_low,
                kappa_low * ratio,
            )
        },
    )
}

/// A school policy on a coarse effort lattice {0.1, 0.2, …, 2.0}.
fn policy_strategy() -> impl Strategy<Value = (f64, Vec<u32>)> {
    (0.0..1.0f64, prop::collection::btree_set(1u32..=20, 0..3))
        .prop_map(|(fee_share, ts)| (fee_share, ts.into_iter().collect()))
}

fn market_and_profile() -> impl Strategy<Value = (MarketParams, PolicyProfile)> {
    (params_strategy(), prop::collection::vec(policy_strategy(), 1..=3)).prop_map(|(p, raw)| {
        let policies = raw
            .into_iter()
            .map(|(fee_share, ts)| {
                let thresholds = ts.into_iter().map(|t| t as f64 / 10.0).collect();
                Policy::new(
                    fee_share * p.theta_high,
                    StepMonitoringPolicy::with_thresholds(thresholds).unwrap(),
                )
            })
            .collect::<Vec<_>>();
        let n = policies.len();
        (p.with_schools(n), PolicyProfile::new(policies))
    })
}

fn outcome(profile: &PolicyProfile, p: &MarketParams) -> (SubgameEquilibrium, EquilibriumOutcome) {
    let eq = construct_epbe(profile, p, TOL).unwrap();
    let o = EquilibriumOutcome::from_equilibrium(&eq, p, OutcomeLabel::MonopolySorting).unwrap();
    (eq, o)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn costs_increase_and_favour_high_types(
        kappa_low in 0.5..3.0f64,
        ratio in 0.1..0.99f64,
        exponent in 1.0..3.0f64,
        e1 in 0.0..3.0f64,
        de in 0.001..1.0f64,
    ) {
        for cf in [
            CostFamily::linear(kappa_low, kappa_low * ratio),
            CostFamily::power(kappa_low, kappa_low * ratio, exponent),
        ] {
            let e2 = e1 + de;
            for ty in Type::BOTH {
                prop_assert!(cf.cost(ty, e2).unwrap() > cf.cost(ty, e1).unwrap());
            }
            prop_assert!(cf.cost(Type::Low, e2).unwrap() > cf.cost(Type::High, e2).unwrap());
            let rise_low = cf.cost(Type::Low, e2).unwrap() - cf.cost(Type::Low, e1).unwrap();
            let rise_high = cf.cost(Type::High, e2).unwrap() - cf.cost(Type::High, e1).unwrap();
            prop_assert!(rise_low > rise_high);
        }
    }

    #[test]
    fn reduction_keeps_sent_messages_only(
        ts in prop::collection::btree_set(1u32..=30, 0..6),
        mask in prop::collection::vec(any::<bool>(), 7),
    ) {
        let thresholds: Vec<f64> = ts.iter().map(|t| *t as f64 / 10.0).collect();
        let policy = StepMonitoringPolicy::with_thresholds(thresholds).unwrap();
        let mut sent: BTreeSet<u32> =
            policy.messages().iter().zip(&mask).filter(|(_, keep)| **keep).map(|(m, _)| *m).collect();
        if sent.is_empty() {
            sent.insert(policy.messages()[0]);
        }
        let reduced = reduce_minimal(&policy, &sent).unwrap();
        let image: BTreeSet<u32> = reduced.messages().iter().copied().collect();
        prop_assert_eq!(&image, &sent);
        prop_assert!(reduced.thresholds().iter().all(|t| policy.thresholds().contains(t)));
        for m in &sent {
            let e = policy.min_effort(*m).unwrap();
            prop_assert_eq!(reduced.message_of(e), *m);
            prop_assert!(reduced.min_effort(*m).unwrap() <= e);
        }
        prop_assert_eq!(reduce_minimal(&reduced, &sent).unwrap(), reduced);
    }

    #[test]
    fn wage_sets_nest(p in params_strategy(), t1 in -3.0..5.0f64, dt in 0.0..2.0f64) {
        let a = wage_sets_from_threshold(&p, t1);
        if let (Some(w), Some(s)) = (a.weak, a.strict) {
            prop_assert!(s.lower >= w.lower - 1e-12);
            prop_assert_eq!(w.upper, p.theta_high);
            prop_assert_eq!(s.upper, p.theta_high);
        }
        prop_assert!(a.strict.is_none() || a.weak.is_some());
        let b = wage_sets_from_threshold(&p, t1 + dt);
        prop_assert!(!strict_subset(a.weak.as_ref(), b.weak.as_ref(), 0.0));
        prop_assert!(!strict_subset(a.strict.as_ref(), b.strict.as_ref(), 0.0));
        prop_assert!(!strict_subset(a.weak.as_ref(), a.weak.as_ref(), 0.0));
    }

    #[test]
    fn lower_cost_type_is_never_forced_low(
        p in params_strategy(),
        u_low in 0.0..1.0f64,
        extra_high in 0.0..1.0f64,
        fee in 0.0..2.0f64,
        e in 0.0..2.0f64,
    ) {
        let u_high = u_low + extra_high;
        let t_low = u_low + fee + p.cost(Type::Low, e).unwrap();
        let t_high = u_high + fee + p.cost(Type::High, e).unwrap();
        let low = wage_sets_from_threshold(&p, t_low);
        let high = wage_sets_from_threshold(&p, t_high);
        if t_high < t_low {
            prop_assert_ne!(d1_requirement(&low, &high, TOL), Some(0.0));
        }
    }

    #[test]
    fn canonical_construction_verifies((p, profile) in market_and_profile()) {
        let (eq, _) = outcome(&profile, &p);
        let grid = DeviationGrid::uniform_covering(&profile, &p, 21, TOL).unwrap();
        let pbe = verify_pbe(&profile, &eq, &p, &grid, 1e-7).unwrap();
        prop_assert!(pbe.passed, "{:?}", pbe.violations);
        let d1 = verify_extended_d1(&profile, &eq, &p, &grid, 1e-7).unwrap();
        prop_assert!(d1.passed, "{:?}", d1.violations);
        let coarse = grid.clone().with_wage_resolution(0.5).unwrap();
        prop_assert_eq!(verify_pbe(&profile, &eq, &p, &coarse, 1e-7).unwrap(), pbe);
    }

    #[test]
    fn construction_branches_are_exclusive((p, profile) in market_and_profile()) {
        let eq = construct_epbe(&profile, &p, TOL).unwrap();
        let fr = mimic_frontier(&profile, &p, TOL).unwrap();
        let semi = semi_pooling_applies(&fr, &profile, &p, TOL).unwrap();
        let expected = if semi { ConstructionTag::SemiPooling } else { ConstructionTag::Separating };
        prop_assert_eq!(eq.construction_tag, expected);
        let high_signals: BTreeSet<_> = eq.strategy.signal_mass(&profile, Type::High).into_keys().collect();
        if !semi {
            prop_assert!(high_signals.iter().all(|s| fr.s_plus.contains(s)));
        }
    }

    #[test]
    fn accounting_identities((p, profile) in market_and_profile()) {
        let (_, o) = outcome(&profile, &p);
        let w = welfare(&o, &p).unwrap();
        let surplus = p.lambda * o.payoffs.high + (1.0 - p.lambda) * o.payoffs.low + o.total_profit();
        prop_assert!((w.total - surplus).abs() <= 1e-7, "{} vs {}", w.total, surplus);
        prop_assert!(w.total <= w.max_welfare + 1e-9);
        for ty in Type::BOTH {
            prop_assert!(o.employment.get(ty) <= o.enrollment.get(ty) + 1e-12);
            prop_assert!(o.enrollment.get(ty) <= 1.0 + 1e-9);
            prop_assert!(o.payoffs.get(ty) >= -1e-9);
        }
        for (i, profit) in o.profits.iter().enumerate() {
            let enrolled: f64 = Type::BOTH
                .iter()
                .map(|ty| p.weight(*ty) * o.on_path.school_enrollment(*ty, profile.len())[i])
                .sum();
            prop_assert!((profit - profile.fee(i) * enrolled).abs() <= 1e-12);
        }
    }

    #[test]
    fn semipooling_members_are_consistent(
        theta_low in -2.0..0.0f64,
        kappa_high in 1.2..1.95f64,
        lambda in 0.2..0.8f64,
        share in 0.0..1.0f64,
    ) {
        let p = MarketParams::linear(theta_low, 2.0, lambda, 2.0, kappa_high).with_schools(2);
        let er = riley_effort(&p, TOL).unwrap();
        let e_l = share * er;
        let fam = semipooling_family(&p, 2, SemipoolingVariant::ZeroFee, FreeParam::LowEffort(e_l), TOL).unwrap();
        for m in &fam.members {
            let s_pool = m.profile.signal_at(0, e_l);
            let s_sep = m.profile.signal_at(0, er);
            let w_l = m.wage(s_pool).unwrap();
            prop_assert!(w_l > p.wage_floor() && w_l < p.theta_high);
            prop_assert!(e_l < er);
            let u_pool = w_l - p.cost(Type::High, e_l).unwrap();
            let u_sep = m.wage(s_sep).unwrap() - p.cost(Type::High, er).unwrap();
            prop_assert!((u_pool - u_sep).abs() <= 1e-7);
            let grid = DeviationGrid::uniform_covering(&m.profile, &p, 21, TOL).unwrap();
            let eq = m.subgame();
            prop_assert!(verify_pbe(&m.profile, &eq, &p, &grid, 1e-7).unwrap().passed);
        }
        if fam.members.is_empty() {
            if let Some(c) = fam.certificate {
                prop_assert!(c.sup_pool_wage <= c.required_pool_wage + 1e-9);
            }
        }
    }

    #[test]
    fn capped_enrollment_probability_is_a_share(p in params_strategy(), x in 0.0..1.0f64) {
        let mean = expected_type(&p);
        let k = mean + x * (p.theta_high - mean) * 0.999;
        let alpha = low_enrollment_probability(&p, k);
        prop_assert!(alpha > 0.0 && alpha <= 1.0 + 1e-12);
        if k > p.theta_low {
            let l = p.lambda;
            let pooled = (l * p.theta_high + alpha * (1.0 - l) * p.theta_low) / (l + alpha * (1.0 - l));
            if alpha < 1.0 {
                prop_assert!((pooled - k).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn json_round_trips((p, profile) in market_and_profile()) {
        let (eq, o) = outcome(&profile, &p);
        let back: MarketParams = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        prop_assert_eq!(back, p);
        let back: PolicyProfile = serde_json::from_str(&serde_json::to_string(&profile).unwrap()).unwrap();
        prop_assert_eq!(back, profile);
        let back: SubgameEquilibrium = serde_json::from_str(&serde_json::to_string(&eq).unwrap()).unwrap();
        prop_assert_eq!(back, eq);
        let back: EquilibriumOutcome = serde_json::from_str(&serde_json::to_string(&o).unwrap()).unwrap();
        prop_assert_eq!(back, o);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn enumerated_equilibria_verify((p, profile) in market_and_profile()) {
        let grid = DeviationGrid::uniform_covering(&profile, &p, 9, TOL).unwrap();
        prop_assume!(grid.len() <= 25);
        for eq in brute_force_equilibria(&profile, &p, &grid, 2, TOL).unwrap() {
            prop_assert!(eq.strategy.validate(profile.len(), 1e-9).is_ok());
            prop_assert!(verify_pbe(&profile, &eq, &p, &grid, TOL).unwrap().passed);
            prop_assert!(verify_extended_d1(&profile, &eq, &p, &grid, TOL).unwrap().passed);
        }
    }
}
