//! Default-deny micro-segmentation, sanctions, and behavioral baselines.
//!
//! Agents are isolated by default: a message is allowed only when an explicit
//! rule matches, and sanctions take precedence over rules. Escalation is a
//! pure function of an agent's violation count, so replaying any violation
//! history is deterministic and order-independent.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::ops::Range;

use thiserror::Error;

use crate::identity::{AgentIdentity, Role, Tick};

/// Rule endpoint: a single agent or every agent in a segment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Selector {
    Agent(String),
    Segment(String),
}

impl Selector {
    fn matches(&self, identity: &AgentIdentity) -> bool {
        match self {
            Selector::Agent(id) => identity.agent_id == *id,
            Selector::Segment(seg) => identity.segment_id == *seg,
        }
    }

    fn is_segment(&self) -> bool {
        matches!(self, Selector::Segment(_))
    }
}

impl std::fmt::Display for Selector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Selector::Agent(id) => write!(f, "agent:{id}"),
            Selector::Segment(seg) => write!(f, "segment:{seg}"),
        }
    }
}

/// An explicit allow rule; anything not matched by some rule is denied.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyRule {
    pub src: Selector,
    pub dst: Selector,
    pub message_kinds: BTreeSet<String>,
}

impl PolicyRule {
    pub fn new(
        src: Selector,
        dst: Selector,
        kinds: impl IntoIterator<Item = impl Into<String>>,
    ) -> Self {
        Self {
            src,
            dst,
            message_kinds: kinds.into_iter().map(Into::into).collect(),
        }
    }

    fn matches(&self, src: &AgentIdentity, dst: &AgentIdentity, kind: &str) -> bool {
        self.src.matches(src) && self.dst.matches(dst) && self.message_kinds.contains(kind)
    }

    /// Agent-level selectors take precedence over segment-level ones.
    fn segment_selector_count(&self) -> usize {
        usize::from(self.src.is_segment()) + usize::from(self.dst.is_segment())
    }
}

/// Sanction severity, from none to full quarantine. Never decreases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SanctionTier {
    None,
    Throttled,
    Restricted,
    Quarantined,
}

impl std::fmt::Display for SanctionTier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SanctionTier::None => "none",
            SanctionTier::Throttled => "throttled",
            SanctionTier::Restricted => "restricted",
            SanctionTier::Quarantined => "quarantined",
        })
    }
}

/// Violation counts at which each tier kicks in.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EscalationTable {
    pub throttle_at: usize,
    pub restrict_at: usize,
    pub quarantine_at: usize,
}

impl Default for EscalationTable {
    fn default() -> Self {
        Self {
            throttle_at: 1,
            restrict_at: 3,
            quarantine_at: 5,
        }
    }
}

impl EscalationTable {
    pub fn tier_for(&self, violation_count: usize) -> SanctionTier {
        if violation_count >= self.quarantine_at {
            SanctionTier::Quarantined
        } else if violation_count >= self.restrict_at {
            SanctionTier::Restricted
        } else if violation_count >= self.throttle_at {
            SanctionTier::Throttled
        } else {
            SanctionTier::None
        }
    }
}

/// Persistent offender history for one agent. Append-only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SanctionState {
    pub agent_id: String,
    pub violations: Vec<(Tick, String)>,
    pub tier: SanctionTier,
}

impl SanctionState {
    pub fn new(agent_id: impl Into<String>) -> Self {
        Self {
            agent_id: agent_id.into(),
            violations: Vec::new(),
            tier: SanctionTier::None,
        }
    }
}

/// Append a violation and escalate per the table. The tier never decreases,
/// and the final tier depends only on the violation count.
pub fn record_violation(
    state: &SanctionState,
    kind: impl Into<String>,
    now: Tick,
    table: &EscalationTable,
) -> SanctionState {
    let mut violations = state.violations.clone();
    violations.push((now, kind.into()));
    let tier = table.tier_for(violations.len()).max(state.tier);
    SanctionState {
        agent_id: state.agent_id.clone(),
        violations,
        tier,
    }
}

/// Why a message was denied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DenyReason {
    /// Default deny: no rule matched.
    NoRule,
    Quarantined,
    Restricted,
}

impl std::fmt::Display for DenyReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DenyReason::NoRule => "no matching rule",
            DenyReason::Quarantined => "source quarantined",
            DenyReason::Restricted => "source restricted",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Allow,
    Deny(DenyReason),
}

impl Decision {
    pub fn is_allow(&self) -> bool {
        matches!(self, Decision::Allow)
    }
}

/// Decide whether `src` may send a `kind` message to `dst`.
///
/// Sanctions dominate rules: a quarantined source is always denied, and a
/// restricted source may only reach auditors. Throttled sources pass policy;
/// the rate cap is the simulator's job. Otherwise the decision is allow iff
/// some rule matches, with agent-level selectors taking precedence over
/// segment-level ones and first-match-wins in declaration order among equals.
pub fn evaluate(
    rules: &[PolicyRule],
    sanctions: &BTreeMap<String, SanctionState>,
    src: &AgentIdentity,
    dst: &AgentIdentity,
    kind: &str,
) -> Decision {
    if let Some(state) = sanctions.get(&src.agent_id) {
        match state.tier {
            SanctionTier::Quarantined => return Decision::Deny(DenyReason::Quarantined),
            SanctionTier::Restricted if dst.role != Role::Auditor => {
                return Decision::Deny(DenyReason::Restricted)
            }
            _ => {}
        }
    }
    match matching_rule(rules, src, dst, kind) {
        Some(_) => Decision::Allow,
        None => Decision::Deny(DenyReason::NoRule),
    }
}

/// Index of the winning rule, if any.
pub fn matching_rule(
    rules: &[PolicyRule],
    src: &AgentIdentity,
    dst: &AgentIdentity,
    kind: &str,
) -> Option<usize> {
    rules
        .iter()
        .enumerate()
        .filter(|(_, r)| r.matches(src, dst, kind))
        .min_by_key(|(i, r)| (r.segment_selector_count(), *i))
        .map(|(i, _)| i)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolicyError {
    #[error("agent {0:?} is not in the roster")]
    UnknownAgent(String),
    #[error("observation window is empty")]
    EmptyWindow,
}

/// Transitive closure of agents reachable from `start` over allow edges.
///
/// An edge exists when [`evaluate`] allows at least one message kind named by
/// any rule. Always contains `start`; a quarantined start therefore reaches
/// only itself.
pub fn blast_radius(
    rules: &[PolicyRule],
    sanctions: &BTreeMap<String, SanctionState>,
    start: &str,
    roster: &[AgentIdentity],
) -> Result<BTreeSet<String>, PolicyError> {
    let by_id: BTreeMap<&str, &AgentIdentity> =
        roster.iter().map(|a| (a.agent_id.as_str(), a)).collect();
    if !by_id.contains_key(start) {
        return Err(PolicyError::UnknownAgent(start.to_string()));
    }
    let kinds: BTreeSet<&str> = rules
        .iter()
        .flat_map(|r| r.message_kinds.iter().map(String::as_str))
        .collect();

    let mut reached: BTreeSet<String> = BTreeSet::new();
    reached.insert(start.to_string());
    let mut queue: VecDeque<&str> = VecDeque::new();
    queue.push_back(start);
    while let Some(current) = queue.pop_front() {
        let src = by_id[current];
        for (id, dst) in &by_id {
            if reached.contains(*id) {
                continue;
            }
            let allowed = kinds
                .iter()
                .any(|kind| evaluate(rules, sanctions, src, dst, kind).is_allow());
            if allowed {
                reached.insert((*id).to_string());
                queue.push_back(id);
            }
        }
    }
    Ok(reached)
}

/// One observed message, the raw material for behavioral baselines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MessageEvent {
    pub tick: Tick,
    pub src: String,
    pub dst: String,
    pub kind: String,
}

/// What an agent's traffic normally looks like over a window.
#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorProfile {
    pub agent_id: String,
    pub destination_set: BTreeSet<String>,
    /// Messages per 100 ticks.
    pub mean_rate: f64,
    /// Normalized frequency per message kind; sums to 1 when non-empty.
    pub kind_histogram: BTreeMap<String, f64>,
}

/// Deterministic anomaly thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyThresholds {
    /// Rate spike multiplier (kappa).
    pub rate_factor: f64,
    /// L1 histogram distance bound (tau).
    pub histogram_distance: f64,
}

impl Default for AnomalyThresholds {
    fn default() -> Self {
        Self {
            rate_factor: 3.0,
            histogram_distance: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnomalyKind {
    NewDestination,
    RateSpike,
    ContentShift,
}

impl std::fmt::Display for AnomalyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AnomalyKind::NewDestination => "new_destination",
            AnomalyKind::RateSpike => "rate_spike",
            AnomalyKind::ContentShift => "content_shift",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Anomaly {
    pub agent_id: String,
    pub kind: AnomalyKind,
    pub detail: String,
}

/// Build a behavior profile for `agent_id` from events inside the half-open
/// tick window.
pub fn baseline_profile(
    events: &[MessageEvent],
    agent_id: &str,
    window: Range<Tick>,
) -> Result<BehaviorProfile, PolicyError> {
    if window.is_empty() {
        return Err(PolicyError::EmptyWindow);
    }
    let (destination_set, mean_rate, kind_histogram) = summarize(events, agent_id, &window);
    Ok(BehaviorProfile {
        agent_id: agent_id.to_string(),
        destination_set,
        mean_rate,
        kind_histogram,
    })
}

fn summarize(
    events: &[MessageEvent],
    agent_id: &str,
    window: &Range<Tick>,
) -> (BTreeSet<String>, f64, BTreeMap<String, f64>) {
    let relevant: Vec<&MessageEvent> = events
        .iter()
        .filter(|e| e.src == agent_id && window.contains(&e.tick))
        .collect();
    let destinations: BTreeSet<String> = relevant.iter().map(|e| e.dst.clone()).collect();
    let window_len = (window.end - window.start) as f64;
    let rate = relevant.len() as f64 * 100.0 / window_len;
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for e in &relevant {
        *counts.entry(e.kind.clone()).or_insert(0) += 1;
    }
    let total = relevant.len() as f64;
    let histogram = counts
        .into_iter()
        .map(|(k, n)| (k, n as f64 / total))
        .collect();
    (destinations, rate, histogram)
}

/// Compare fresh events in `window` against an established baseline.
///
/// Emits `new_destination` per destination outside the baseline set,
/// `rate_spike` when the observed rate exceeds `rate_factor` times a positive
/// baseline rate, and `content_shift` when the L1 distance between kind
/// histograms exceeds `histogram_distance`. No observed traffic means no
/// anomalies.
pub fn detect_anomalies(
    profile: &BehaviorProfile,
    new_events: &[MessageEvent],
    window: Range<Tick>,
    thresholds: &AnomalyThresholds,
) -> Vec<Anomaly> {
    let mut anomalies = Vec::new();
    if window.is_empty() {
        return anomalies;
    }
    let (destinations, rate, histogram) = summarize(new_events, &profile.agent_id, &window);
    if histogram.is_empty() {
        return anomalies;
    }

    for dst in destinations.difference(&profile.destination_set) {
        anomalies.push(Anomaly {
            agent_id: profile.agent_id.clone(),
            kind: AnomalyKind::NewDestination,
            detail: format!("message sent to never-seen destination {dst}"),
        });
    }

    if profile.mean_rate > 0.0 && rate > thresholds.rate_factor * profile.mean_rate {
        anomalies.push(Anomaly {
            agent_id: profile.agent_id.clone(),
            kind: AnomalyKind::RateSpike,
            detail: format!(
                "observed rate {rate:.3} exceeds {} x baseline {:.3}",
                thresholds.rate_factor, profile.mean_rate
            ),
        });
    }

    let keys: BTreeSet<&String> = profile
        .kind_histogram
        .keys()
        .chain(histogram.keys())
        .collect();
    let l1: f64 = keys
        .into_iter()
        .map(|k| {
            let p = profile.kind_histogram.get(k).copied().unwrap_or(0.0);
            let q = histogram.get(k).copied().unwrap_or(0.0);
            (p - q).abs()
        })
        .sum();
    if l1 > thresholds.histogram_distance {
        anomalies.push(Anomaly {
            agent_id: profile.agent_id.clone(),
            kind: AnomalyKind::ContentShift,
            detail: format!(
                "kind histogram moved {l1:.3} (L1) against bound {}",
                thresholds.histogram_distance
            ),
        });
    }
    anomalies
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::identity::{generate_identity, seed_from_label};
    use proptest::prelude::*;

    fn agent(id: &str, segment: &str, role: Role) -> AgentIdentity {
        generate_identity(&seed_from_label(id, 0), id, segment, role)
            .unwrap()
            .0
    }

    fn rule(src: &str, dst: &str, kinds: &[&str]) -> PolicyRule {
        let sel = |s: &str| {
            let (tag, name) = s.split_once(':').unwrap();
            match tag {
                "agent" => Selector::Agent(name.to_string()),
                _ => Selector::Segment(name.to_string()),
            }
        };
        PolicyRule::new(sel(src), sel(dst), kinds.iter().copied())
    }

    #[test]
    fn empty_rules_deny_everything() {
        let a = agent("a", "s1", Role::Specialist);
        let b = agent("b", "s1", Role::Specialist);
        let sanctions = BTreeMap::new();
        for kind in ["data", "control", "fact"] {
            assert_eq!(
                evaluate(&[], &sanctions, &a, &b, kind),
                Decision::Deny(DenyReason::NoRule)
            );
        }
    }

    #[test]
    fn segment_rule_allows_within_segment() {
        let a = agent("a", "s1", Role::Specialist);
        let b = agent("b", "s1", Role::Specialist);
        let rules = vec![rule("segment:s1", "segment:s1", &["data"])];
        assert!(evaluate(&rules, &BTreeMap::new(), &a, &b, "data").is_allow());
        assert_eq!(
            evaluate(&rules, &BTreeMap::new(), &a, &b, "control"),
            Decision::Deny(DenyReason::NoRule)
        );
    }

    #[test]
    fn quarantine_beats_matching_rule() {
        let a = agent("a", "s1", Role::Specialist);
        let b = agent("b", "s1", Role::Specialist);
        let rules = vec![rule("segment:s1", "segment:s1", &["data"])];
        let mut sanctions = BTreeMap::new();
        let mut state = SanctionState::new("a");
        let table = EscalationTable::default();
        for i in 0..5 {
            state = record_violation(&state, "spam", i, &table);
        }
        assert_eq!(state.tier, SanctionTier::Quarantined);
        sanctions.insert("a".to_string(), state);
        assert_eq!(
            evaluate(&rules, &sanctions, &a, &b, "data"),
            Decision::Deny(DenyReason::Quarantined)
        );
    }

    #[test]
    fn restricted_source_may_only_reach_auditors() {
        let a = agent("a", "s1", Role::Specialist);
        let b = agent("b", "s1", Role::Specialist);
        let auditor = agent("aud", "s1", Role::Auditor);
        let rules = vec![rule("segment:s1", "segment:s1", &["data"])];
        let table = EscalationTable::default();
        let mut state = SanctionState::new("a");
        for i in 0..3 {
            state = record_violation(&state, "spam", i, &table);
        }
        let sanctions = BTreeMap::from([("a".to_string(), state)]);
        assert_eq!(
            evaluate(&rules, &sanctions, &a, &b, "data"),
            Decision::Deny(DenyReason::Restricted)
        );
        assert!(evaluate(&rules, &sanctions, &a, &auditor, "data").is_allow());
    }

    #[test]
    fn agent_selector_outranks_segment_selector() {
        let a = agent("a", "s1", Role::Specialist);
        let b = agent("b", "s1", Role::Specialist);
        let rules = vec![
            rule("segment:s1", "segment:s1", &["data"]),
            rule("agent:a", "agent:b", &["data"]),
        ];
        // Both match; the agent-level rule (index 1) wins despite declaration order.
        assert_eq!(matching_rule(&rules, &a, &b, "data"), Some(1));
    }

    #[test]
    fn escalation_thresholds() {
        let table = EscalationTable::default();
        let mut state = SanctionState::new("a");
        assert_eq!(state.tier, SanctionTier::None);
        state = record_violation(&state, "v", 0, &table);
        assert_eq!(state.tier, SanctionTier::Throttled);
        state = record_violation(&state, "v", 1, &table);
        assert_eq!(state.tier, SanctionTier::Throttled);
        state = record_violation(&state, "v", 2, &table);
        assert_eq!(state.tier, SanctionTier::Restricted);
        state = record_violation(&state, "v", 3, &table);
        state = record_violation(&state, "v", 4, &table);
        assert_eq!(state.tier, SanctionTier::Quarantined);
        assert_eq!(state.violations.len(), 5);
    }

    #[test]
    fn final_tier_depends_only_on_count() {
        let table = EscalationTable::default();
        let kinds = ["a", "b", "c", "d"];
        let mut forward = SanctionState::new("x");
        let mut reverse = SanctionState::new("x");
        for (i, k) in kinds.iter().enumerate() {
            forward = record_violation(&forward, *k, i as Tick, &table);
        }
        for (i, k) in kinds.iter().rev().enumerate() {
            reverse = record_violation(&reverse, *k, i as Tick, &table);
        }
        assert_eq!(forward.tier, reverse.tier);
    }

    #[test]
    fn isolated_agent_blast_radius_is_itself() {
        let roster = vec![
            agent("a", "s1", Role::Specialist),
            agent("b", "s2", Role::Specialist),
        ];
        let out = blast_radius(&[], &BTreeMap::new(), "a", &roster).unwrap();
        assert_eq!(out, BTreeSet::from(["a".to_string()]));
    }

    #[test]
    fn chain_stops_at_missing_rule() {
        let roster: Vec<AgentIdentity> = ["a", "b", "c", "d"]
            .iter()
            .map(|id| agent(id, "s1", Role::Specialist))
            .collect();
        let rules = vec![
            rule("agent:a", "agent:b", &["data"]),
            rule("agent:b", "agent:c", &["data"]),
        ];
        let out = blast_radius(&rules, &BTreeMap::new(), "a", &roster).unwrap();
        assert_eq!(
            out,
            BTreeSet::from(["a".to_string(), "b".to_string(), "c".to_string()])
        );
    }

    #[test]
    fn unknown_start_agent_errors() {
        let roster = vec![agent("a", "s1", Role::Specialist)];
        assert_eq!(
            blast_radius(&[], &BTreeMap::new(), "ghost", &roster).unwrap_err(),
            PolicyError::UnknownAgent("ghost".to_string())
        );
    }

    #[test]
    fn baseline_of_no_events_is_empty() {
        let profile = baseline_profile(&[], "a", 0..100).unwrap();
        assert!(profile.destination_set.is_empty());
        assert_eq!(profile.mean_rate, 0.0);
        assert!(profile.kind_histogram.is_empty());
    }

    #[test]
    fn baseline_rate_and_destinations() {
        let events: Vec<MessageEvent> = (0..10)
            .map(|i| MessageEvent {
                tick: i * 10,
                src: "a".to_string(),
                dst: if i % 2 == 0 { "b" } else { "c" }.to_string(),
                kind: if i < 6 { "data" } else { "control" }.to_string(),
            })
            .collect();
        let profile = baseline_profile(&events, "a", 0..100).unwrap();
        assert_eq!(profile.mean_rate, 10.0);
        assert_eq!(profile.destination_set.len(), 2);
        assert_eq!(profile.kind_histogram["data"], 0.6);
        assert_eq!(profile.kind_histogram["control"], 0.4);
        let sum: f64 = profile.kind_histogram.values().sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn empty_window_is_an_error() {
        assert_eq!(
            baseline_profile(&[], "a", 5..5).unwrap_err(),
            PolicyError::EmptyWindow
        );
    }

    fn mk_events(n: usize, dst: &str, kind: &str, start: Tick) -> Vec<MessageEvent> {
        (0..n)
            .map(|i| MessageEvent {
                tick: start + i as Tick,
                src: "a".to_string(),
                dst: dst.to_string(),
                kind: kind.to_string(),
            })
            .collect()
    }

    #[test]
    fn matching_behavior_yields_no_anomalies() {
        let baseline = baseline_profile(&mk_events(10, "b", "data", 0), "a", 0..100).unwrap();
        let fresh = mk_events(10, "b", "data", 100);
        assert!(
            detect_anomalies(&baseline, &fresh, 100..200, &AnomalyThresholds::default())
                .is_empty()
        );
    }

    #[test]
    fn new_destination_is_flagged() {
        let baseline = baseline_profile(&mk_events(10, "b", "data", 0), "a", 0..100).unwrap();
        let mut fresh = mk_events(9, "b", "data", 100);
        fresh.push(MessageEvent {
            tick: 150,
            src: "a".to_string(),
            dst: "mallory".to_string(),
            kind: "data".to_string(),
        });
        let anomalies =
            detect_anomalies(&baseline, &fresh, 100..200, &AnomalyThresholds::default());
        assert_eq!(anomalies.len(), 1);
        assert_eq!(anomalies[0].kind, AnomalyKind::NewDestination);
    }

    #[test]
    fn rate_spike_threshold() {
        // Baseline rate 2.0 per 100 ticks; observed 7.0 with kappa 3 spikes.
        let baseline = baseline_profile(&mk_events(2, "b", "data", 0), "a", 0..100).unwrap();
        assert_eq!(baseline.mean_rate, 2.0);
        let fresh = mk_events(7, "b", "data", 100);
        let anomalies =
            detect_anomalies(&baseline, &fresh, 100..200, &AnomalyThresholds::default());
        assert_eq!(anomalies.len(), 1);
        assert_eq!(anomalies[0].kind, AnomalyKind::RateSpike);

        // 6.0 is exactly 3 x 2.0 and must NOT spike (strict inequality).
        let fresh = mk_events(6, "b", "data", 100);
        assert!(
            detect_anomalies(&baseline, &fresh, 100..200, &AnomalyThresholds::default())
                .is_empty()
        );
    }

    #[test]
    fn content_shift_on_kind_swap() {
        let baseline = baseline_profile(&mk_events(10, "b", "data", 0), "a", 0..100).unwrap();
        let fresh = mk_events(10, "b", "control", 100);
        let anomalies =
            detect_anomalies(&baseline, &fresh, 100..200, &AnomalyThresholds::default());
        assert_eq!(anomalies.len(), 1);
        assert_eq!(anomalies[0].kind, AnomalyKind::ContentShift);
    }

    /// Test-only reachability oracle: boolean-matrix transitive closure,
    /// independent of the BFS in `blast_radius`.
    fn closure_oracle(
        rules: &[PolicyRule],
        sanctions: &BTreeMap<String, SanctionState>,
        start: &str,
        roster: &[AgentIdentity],
    ) -> BTreeSet<String> {
        let n = roster.len();
        let kinds: BTreeSet<&str> = rules
            .iter()
            .flat_map(|r| r.message_kinds.iter().map(String::as_str))
            .collect();
        let mut adj = vec![vec![false; n]; n];
        for (i, src) in roster.iter().enumerate() {
            for (j, dst) in roster.iter().enumerate() {
                if i == j {
                    continue;
                }
                adj[i][j] = kinds
                    .iter()
                    .any(|k| evaluate(rules, sanctions, src, dst, k).is_allow());
            }
        }
        // Warshall closure.
        for via in 0..n {
            for i in 0..n {
                if adj[i][via] {
                    for j in 0..n {
                        if adj[via][j] {
                            adj[i][j] = true;
                        }
                    }
                }
            }
        }
        let s = roster.iter().position(|a| a.agent_id == start).unwrap();
        let mut out: BTreeSet<String> = roster
            .iter()
            .enumerate()
            .filter(|(j, _)| adj[s][*j])
            .map(|(_, a)| a.agent_id.clone())
            .collect();
        out.insert(start.to_string());
        out
    }

    #[test]
    fn six_agent_mesh_matches_closure_oracle() {
        let roster: Vec<AgentIdentity> = (0..6)
            .map(|i| {
                agent(
                    &format!("a{i}"),
                    if i < 3 { "left" } else { "right" },
                    Role::Specialist,
                )
            })
            .collect();
        let rules = vec![
            rule("segment:left", "segment:left", &["data"]),
            rule("agent:a2", "agent:a3", &["data"]),
            rule("segment:right", "agent:a5", &["control"]),
        ];
        let sanctions = BTreeMap::new();
        for a in &roster {
            assert_eq!(
                blast_radius(&rules, &sanctions, &a.agent_id, &roster).unwrap(),
                closure_oracle(&rules, &sanctions, &a.agent_id, &roster),
                "mismatch from {}",
                a.agent_id
            );
        }
    }

    proptest! {
        /// Adding a rule never shrinks the blast radius.
        #[test]
        fn adding_a_rule_is_monotone(
            edges in proptest::collection::vec((0usize..6, 0usize..6), 0..10),
            extra in (0usize..6, 0usize..6),
            start in 0usize..6,
        ) {
            let roster: Vec<AgentIdentity> = (0..6)
                .map(|i| agent(&format!("a{i}"), "s", Role::Specialist))
                .collect();
            let mk = |&(i, j): &(usize, usize)| {
                rule(&format!("agent:a{i}"), &format!("agent:a{j}"), &["data"])
            };
            let rules: Vec<PolicyRule> = edges.iter().map(mk).collect();
            let mut more = rules.clone();
            more.push(mk(&extra));
            let sanctions = BTreeMap::new();
            let base = blast_radius(&rules, &sanctions, &roster[start].agent_id, &roster).unwrap();
            let grown = blast_radius(&more, &sanctions, &roster[start].agent_id, &roster).unwrap();
            prop_assert!(base.is_subset(&grown));
        }

        /// Quarantined sources are denied no matter the rules.
        #[test]
        fn quarantine_dominates(
            edges in proptest::collection::vec((0usize..5, 0usize..5), 0..12),
            src in 0usize..5,
            dst in 0usize..5,
        ) {
            let roster: Vec<AgentIdentity> = (0..5)
                .map(|i| agent(&format!("a{i}"), "s", Role::Specialist))
                .collect();
            let rules: Vec<PolicyRule> = edges
                .iter()
                .map(|&(i, j)| rule(&format!("agent:a{i}"), &format!("agent:a{j}"), &["data"]))
                .collect();
            let table = EscalationTable::default();
            let mut state = SanctionState::new(roster[src].agent_id.clone());
            for i in 0..5 {
                state = record_violation(&state, "v", i, &table);
            }
            let sanctions = BTreeMap::from([(roster[src].agent_id.clone(), state)]);
            let decision = evaluate(&rules, &sanctions, &roster[src], &roster[dst], "data");
            prop_assert_eq!(decision, Decision::Deny(DenyReason::Quarantined));
        }

        /// A violation never lowers the tier.
        #[test]
        fn violations_never_lower_tier(count in 0usize..12) {
            let table = EscalationTable::default();
            let mut state = SanctionState::new("a");
            let mut last = state.tier;
            for i in 0..count {
                state = record_violation(&state, "v", i as Tick, &table);
                prop_assert!(state.tier >= last);
                last = state.tier;
            }
        }
    }
}
