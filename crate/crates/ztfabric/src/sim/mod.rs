//! Deterministic pipeline simulator.
//!
//! Models a retrieval agent followed by a chain of rewriting specialists.
//! Downstream rewriting is a per-assertion three-state Markov channel
//! ([`channel`]), trials score grounding/exactness/verifiability per hop
//! ([`experiment`]), and [`attack`] runs the false-fact injection scenario
//! with the zero-trust defenses on or off. Everything is a pure function of
//! the scenario parameters and one master seed.

pub mod attack;
pub mod channel;
pub mod experiment;

pub use attack::{
    inject_false_fact, ContaminationReport, DefenseParams, Defenses, DeliveryOutcome,
};
pub use channel::{apply_channel, expected_scores, RewriteChannel};
pub use experiment::{
    pipeline_topology, run_experiment, run_trial, score, synthetic_query, ExperimentParams,
    ExperimentReport, HopStats, Mitigation, Scores, Stat, TrialResult,
};

use thiserror::Error;

use crate::identity::{AgentIdentity, KeyPair};
use crate::packet::{AssertionKind, Violation};

/// Channel state of one assertion. `Dropped` is absorbing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssertionState {
    Exact,
    Mutated,
    Dropped,
}

/// One reference claim moving through the pipeline.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assertion {
    pub key: String,
    pub value: String,
    pub kind: AssertionKind,
    pub state: AssertionState,
}

impl Assertion {
    /// A ground-truth assertion, state Exact.
    pub fn reference(
        key: impl Into<String>,
        value: impl Into<String>,
        kind: AssertionKind,
    ) -> Self {
        Self {
            key: key.into(),
            value: value.into(),
            kind,
            state: AssertionState::Exact,
        }
    }
}

/// A query with its ground-truth reference assertions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryItem {
    pub query_id: String,
    pub references: Vec<Assertion>,
}

impl QueryItem {
    /// Validates that the reference list is non-empty and keys are unique.
    pub fn new(
        query_id: impl Into<String>,
        references: Vec<Assertion>,
    ) -> Result<Self, SimError> {
        if references.is_empty() {
            return Err(SimError::EmptyReferences);
        }
        let mut seen = std::collections::BTreeSet::new();
        for assertion in &references {
            if !seen.insert(assertion.key.as_str()) {
                return Err(SimError::DuplicateAssertionKey(assertion.key.clone()));
            }
        }
        Ok(Self {
            query_id: query_id.into(),
            references,
        })
    }
}

/// Ordered agent pipeline. The first agent plays the retrieval-specialist
/// role; the rest are rewriting specialists.
#[derive(Debug, Clone)]
pub struct Topology {
    agents: Vec<(AgentIdentity, KeyPair)>,
    adversary_index: Option<usize>,
}

impl Topology {
    pub fn new(
        agents: Vec<(AgentIdentity, KeyPair)>,
        adversary_index: Option<usize>,
    ) -> Result<Self, SimError> {
        if agents.len() < 2 {
            return Err(SimError::TooFewAgents(agents.len()));
        }
        if let Some(index) = adversary_index {
            if index >= agents.len() {
                return Err(SimError::AdversaryOutOfBounds {
                    index,
                    agents: agents.len(),
                });
            }
        }
        Ok(Self {
            agents,
            adversary_index,
        })
    }

    pub fn agents(&self) -> &[(AgentIdentity, KeyPair)] {
        &self.agents
    }

    pub fn adversary_index(&self) -> Option<usize> {
        self.adversary_index
    }

    /// Number of rewrite hops (pipeline length minus the retrieval agent).
    pub fn hops(&self) -> usize {
        self.agents.len() - 1
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("query reference list must be non-empty")]
    EmptyReferences,
    #[error("duplicate assertion key {0:?} within a query")]
    DuplicateAssertionKey(String),
    #[error("channel probabilities out of range: a={a}, b={b} (need a,b >= 0 and a+b <= 1)")]
    InvalidChannel { a: f64, b: f64 },
    #[error("protected fraction {0} outside [0, 1]")]
    InvalidProtectedFraction(f64),
    #[error("pipeline needs at least 2 agents, got {0}")]
    TooFewAgents(usize),
    #[error("adversary index {index} out of bounds for {agents} agents")]
    AdversaryOutOfBounds { index: usize, agents: usize },
    #[error("adversary {0:?} is not in the pipeline")]
    UnknownAdversary(String),
    #[error("assertion list does not align with the query references")]
    MisalignedAssertions,
    #[error("scenario size must be at least 1: {0}")]
    DegenerateScenario(&'static str),
    #[error("trial aborted: {0}")]
    GuardViolation(#[from] Violation),
}

/// Derive an independent trial seed from the master seed and a trial index
/// (SplitMix64 over their combination).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::identity::{generate_identity, seed_from_label, Role};

    fn agents(n: usize) -> Vec<(AgentIdentity, KeyPair)> {
        (0..n)
            .map(|i| {
                generate_identity(
                    &seed_from_label("topo", i as u64),
                    &format!("a{i}"),
                    "pipeline",
                    Role::Specialist,
                )
                .unwrap()
            })
            .collect()
    }

    #[test]
    fn topology_needs_two_agents() {
        assert_eq!(
            Topology::new(agents(1), None).unwrap_err(),
            SimError::TooFewAgents(1)
        );
        assert_eq!(Topology::new(agents(2), None).unwrap().hops(), 1);
    }

    #[test]
    fn adversary_index_is_bounds_checked() {
        assert!(matches!(
            Topology::new(agents(3), Some(3)).unwrap_err(),
            SimError::AdversaryOutOfBounds { index: 3, agents: 3 }
        ));
        assert!(Topology::new(agents(3), Some(2)).is_ok());
    }

    #[test]
    fn query_keys_must_be_unique() {
        let refs = vec![
            Assertion::reference("k", "1", AssertionKind::Term),
            Assertion::reference("k", "2", AssertionKind::Term),
        ];
        assert_eq!(
            QueryItem::new("q", refs).unwrap_err(),
            SimError::DuplicateAssertionKey("k".to_string())
        );
        assert_eq!(
            QueryItem::new("q", Vec::new()).unwrap_err(),
            SimError::EmptyReferences
        );
    }

    #[test]
    fn derived_seeds_differ_across_indices() {
        let seeds: std::collections::BTreeSet<u64> =
            (0..1000).map(|i| derive_seed(42, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_eq!(derive_seed(42, 7), derive_seed(42, 7));
        assert_ne!(derive_seed(42, 7), derive_seed(43, 7));
    }
}
