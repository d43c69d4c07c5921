//! Right-continuous step monitoring policies and the signals a profile of
//! them produces.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::market::{CostFamily, MarketParams, Type};

/// Opaque message identifier, local to one school.
pub type MessageId = u32;

#[derive(Deserialize)]
struct RawStepPolicy {
    #[serde(default)]
    thresholds: Vec<f64>,
    messages: Vec<MessageId>,
}

/// M(e) = m_j for e ∈ [t_j, t_{j+1}), with t_0 = 0 and m_k for e ≥ t_k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawStepPolicy")]
pub struct StepMonitoringPolicy {
    thresholds: Vec<f64>,
    messages: Vec<MessageId>,
}

impl TryFrom<RawStepPolicy> for StepMonitoringPolicy {
    type Error = Error;

    fn try_from(raw: RawStepPolicy) -> Result<Self> {
        StepMonitoringPolicy::new(raw.thresholds, raw.messages)
    }
}

impl StepMonitoringPolicy {
    pub fn new(thresholds: Vec<f64>, messages: Vec<MessageId>) -> Result<Self> {
        if thresholds.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::input(
                "monitoring.thresholds",
                "thresholds must be positive and finite",
            ));
        }
        if thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::input(
                "monitoring.thresholds",
                "thresholds must be strictly ascending",
            ));
        }
        if messages.len() != thresholds.len() + 1 {
            return Err(Error::input(
                "monitoring.messages",
                format!(
                    "expected {} messages for {} thresholds",
                    thresholds.len() + 1,
                    thresholds.len()
                ),
            ));
        }
        let distinct: BTreeSet<_> = messages.iter().collect();
        if distinct.len() != messages.len() {
            return Err(Error::input(
                "monitoring.messages",
                "messages must be pairwise distinct",
            ));
        }
        Ok(StepMonitoringPolicy { thresholds, messages })
    }

    /// Single-message policy.
    pub fn uninformative() -> Self {
        StepMonitoringPolicy {
            thresholds: Vec::new(),
            messages: vec![0],
        }
    }

    /// Messages 0, 1, …, k for the given thresholds.
    pub fn with_thresholds(thresholds: Vec<f64>) -> Result<Self> {
        let messages = (0..=thresholds.len() as MessageId).collect();
        Self::new(thresholds, messages)
    }

    /// Two messages: 0 below `cutoff`, 1 from `cutoff` on.
    pub fn cutoff(cutoff: f64) -> Result<Self> {
        Self::with_thresholds(vec![cutoff])
    }

    /// One step per positive grid point: reveals effort at grid resolution.
    pub fn perfectly_informative(grid: &[f64]) -> Result<Self> {
        let mut ts: Vec<f64> = grid.iter().copied().filter(|e| *e > 0.0).collect();
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        Self::with_thresholds(ts)
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn messages(&self) -> &[MessageId] {
        &self.messages
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    /// Band index j with t_j ≤ e < t_{j+1}.
    pub fn band_of(&self, effort: f64) -> usize {
        self.thresholds.partition_point(|t| *t <= effort)
    }

    pub fn message_of(&self, effort: f64) -> MessageId {
        self.messages[self.band_of(effort)]
    }

    pub fn index_of(&self, m: MessageId) -> Option<usize> {
        self.messages.iter().position(|x| *x == m)
    }

    /// Start of band j (0 for j = 0).
    pub fn band_start(&self, j: usize) -> f64 {
        if j == 0 {
            0.0
        } else {
            self.thresholds[j - 1]
        }
    }

    /// Minimum effort e_m generating message m.
    pub fn min_effort(&self, m: MessageId) -> Result<f64> {
        self.index_of(m)
            .map(|j| self.band_start(j))
            .ok_or_else(|| Error::input("message", format!("message {m} is not produced by this policy")))
    }
}

/// Free-function form of [`StepMonitoringPolicy::message_of`].
pub fn message_of(policy: &StepMonitoringPolicy, effort: f64) -> MessageId {
    policy.message_of(effort)
}

/// Free-function form of [`StepMonitoringPolicy::min_effort`].
pub fn min_effort(policy: &StepMonitoringPolicy, m: MessageId) -> Result<f64> {
    policy.min_effort(m)
}

/// Coarsest policy agreeing with `policy` wherever the original message is
/// sent and whose image is exactly `sent`. An unsent band joins its left
/// neighbour when there is one; a leading run of unsent bands joins the first
/// sent band to its right.
pub fn reduce_minimal(policy: &StepMonitoringPolicy, sent: &BTreeSet<MessageId>) -> Result<StepMonitoringPolicy> {
    if sent.is_empty() {
        return Err(Error::input("sent_messages", "at least one message must be sent"));
    }
    if let Some(m) = sent.iter().find(|m| policy.index_of(**m).is_none()) {
        return Err(Error::input(
            "sent_messages",
            format!("message {m} is not produced by this policy"),
        ));
    }
    let mut thresholds = Vec::new();
    let mut messages = Vec::new();
    for (j, m) in policy.messages.iter().enumerate() {
        if sent.contains(m) {
            if !messages.is_empty() {
                thresholds.push(policy.band_start(j));
            }
            messages.push(*m);
        }
    }
    StepMonitoringPolicy::new(thresholds, messages)
}

/// A school's policy p_i = (f_i, M_i).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub fee: f64,
    pub monitoring: StepMonitoringPolicy,
}

impl Policy {
    pub fn new(fee: f64, monitoring: StepMonitoringPolicy) -> Self {
        Policy { fee, monitoring }
    }

    pub fn uninformative(fee: f64) -> Self {
        Policy::new(fee, StepMonitoringPolicy::uninformative())
    }
}

/// One policy per school; schools are indexed from 0 internally and from 1
/// in every textual form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PolicyProfile {
    pub policies: Vec<Policy>,
}

impl PolicyProfile {
    pub fn new(policies: Vec<Policy>) -> Self {
        PolicyProfile { policies }
    }

    /// `n` copies of one policy.
    pub fn symmetric(policy: Policy, n: usize) -> Self {
        PolicyProfile::new(vec![policy; n])
    }

    pub fn len(&self) -> usize {
        self.policies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.policies.is_empty()
    }

    pub fn fee(&self, school: usize) -> f64 {
        self.policies[school].fee
    }

    pub fn f_min(&self) -> f64 {
        self.policies.iter().map(|p| p.fee).fold(f64::INFINITY, f64::min)
    }

    /// Checks the profile against `params`.
    pub fn validate(&self, params: &MarketParams) -> Result<()> {
        if self.policies.len() != params.n_schools {
            return Err(Error::input(
                "profile",
                format!(
                    "has {} policies but n_schools = {}",
                    self.policies.len(),
                    params.n_schools
                ),
            ));
        }
        for (i, p) in self.policies.iter().enumerate() {
            if !(p.fee.is_finite() && p.fee >= 0.0) {
                return Err(Error::input(
                    format!("profile[{}].fee", i + 1),
                    "must be finite and nonnegative",
                ));
            }
            if let Some(cap) = params.cost.effort_cap() {
                if p.monitoring.thresholds().iter().any(|t| *t > cap) {
                    return Err(Error::input(
                        format!("profile[{}].monitoring.thresholds", i + 1),
                        "threshold beyond the tabulated cost range",
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn signal_at(&self, school: usize, effort: f64) -> Signal {
        Signal::new(school, self.policies[school].monitoring.message_of(effort))
    }

    /// Minimum effort e_{i,m} of a signal.
    pub fn signal_effort(&self, s: Signal) -> Result<f64> {
        self.policies
            .get(s.school)
            .ok_or_else(|| Error::input("signal", format!("school {} does not exist", s.school + 1)))?
            .monitoring
            .min_effort(s.message)
    }

    /// Every signal of the profile, by school and then by band.
    pub fn signals(&self) -> Vec<Signal> {
        self.policies
            .iter()
            .enumerate()
            .flat_map(|(i, p)| p.monitoring.messages().iter().map(move |m| Signal::new(i, *m)))
            .collect()
    }
}

/// A (school, message) pair as observed by firms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Signal {
    pub school: usize,
    pub message: MessageId,
}

impl Signal {
    pub fn new(school: usize, message: MessageId) -> Self {
        Signal { school, message }
    }
}

impl fmt::Display for Signal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.school + 1, self.message)
    }
}

impl FromStr for Signal {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::input("signal", format!("expected `school:message`, got `{s}`"));
        let (i, m) = s.split_once(':').ok_or_else(bad)?;
        let school: usize = i.trim().parse().map_err(|_| bad())?;
        let message: MessageId = m.trim().parse().map_err(|_| bad())?;
        if school == 0 {
            return Err(bad());
        }
        Ok(Signal::new(school - 1, message))
    }
}

impl Serialize for Signal {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Signal {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// C(θ, i, m) = c(θ, e_{i,m}) + f_i.
pub fn min_cost(profile: &PolicyProfile, cf: &CostFamily, ty: Type, s: Signal) -> Result<f64> {
    let e = profile.signal_effort(s)?;
    Ok(cf.cost(ty, e)? + profile.fee(s.school))
}
